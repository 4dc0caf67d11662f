from trackdiag.svm.kernels import KernelKind, KernelSpec, gram, kernel_eval
from trackdiag.svm.multiclass import (
    CLASS_PAIRS,
    FeatureScaling,
    MulticlassSvmModel,
    pair_decisions,
    predict_class,
    predict_classes,
    train_one_vs_one,
    vote,
)
from trackdiag.svm.smo import (
    BinarySvmModel,
    SmoSettings,
    decision_value,
    decision_values,
    dual_objective,
    kkt_violation,
    solve_dual,
    train_binary_smo,
)

__all__ = [
    "BinarySvmModel",
    "CLASS_PAIRS",
    "FeatureScaling",
    "KernelKind",
    "KernelSpec",
    "MulticlassSvmModel",
    "SmoSettings",
    "decision_value",
    "decision_values",
    "dual_objective",
    "gram",
    "kernel_eval",
    "kkt_violation",
    "pair_decisions",
    "predict_class",
    "predict_classes",
    "solve_dual",
    "train_binary_smo",
    "train_one_vs_one",
    "vote",
]
