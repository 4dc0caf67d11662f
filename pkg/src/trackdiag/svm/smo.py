"""Binary soft-margin SVM trained by sequential minimal optimization.

Working-set selection uses the maximal violating pair, optionally refined
by the second-order gain of the partner index. Kernel rows come either from
a fully materialised Gram matrix or from an LRU row cache when the problem
does not fit ``cache_budget``.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from trackdiag import _accel
from trackdiag.errors import ConvergenceError, InvalidArgumentError
from trackdiag.svm import _smo_kernels as kern
from trackdiag.svm.kernels import KernelSpec, gram, kernel_diag

# full Gram matrices up to this size are built eagerly
DEFAULT_CACHE_BYTES = 1 << 30


@dataclass(frozen=True)
class SmoSettings:
    kkt_tolerance: float = 1e-3
    max_passes_without_progress: int = 10
    max_iterations: Optional[int] = None
    cache_budget: Optional[int] = None
    second_order: bool = False

    def __post_init__(self):
        if not self.kkt_tolerance > 0:
            raise InvalidArgumentError("kkt_tolerance must be > 0")
        if self.max_passes_without_progress < 1:
            raise InvalidArgumentError("max_passes_without_progress must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.cache_budget is not None and self.cache_budget < 2:
            raise InvalidArgumentError("cache_budget must hold at least 2 kernel rows")

    def iteration_cap(self, n):
        return self.max_iterations if self.max_iterations is not None else 10 * n

    def rows_cached(self, n):
        if self.cache_budget is not None:
            return min(self.cache_budget, n)
        return max(2, min(n, DEFAULT_CACHE_BYTES // (8 * n)))

    def as_dict(self):
        return {
            "kkt_tolerance": self.kkt_tolerance,
            "max_passes_without_progress": self.max_passes_without_progress,
            "max_iterations": self.max_iterations,
            "cache_budget": self.cache_budget,
            "second_order": self.second_order,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True, eq=False)
class BinarySvmModel:
    """Trained pairwise classifier; ``dual_coefs[k] = alpha_k * y_k``.

    ``class_pair = (neg, pos)``: a positive decision value votes for ``pos``.
    """

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float
    class_pair: tuple = (-1, 1)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        sv = np.ascontiguousarray(self.support_vectors, dtype=np.float64)
        coefs = np.asarray(self.dual_coefs, dtype=np.float64).reshape(-1)
        if sv.ndim != 2 or sv.shape[0] != coefs.size or coefs.size < 1:
            raise InvalidArgumentError("need one dual coefficient per support vector")
        sv.setflags(write=False)
        coefs.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefs", coefs)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "class_pair", tuple(int(v) for v in self.class_pair))

    @property
    def n_features(self):
        return self.support_vectors.shape[1]

    @property
    def alphas(self):
        return np.abs(self.dual_coefs)


def decision_value(model: BinarySvmModel, x) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != model.n_features:
        raise InvalidArgumentError(f"expected {model.n_features} features, got {x.size}")
    return float(decision_values(model, x[None, :])[0])


def decision_values(model: BinarySvmModel, X) -> np.ndarray:
    """Vectorised ``f(x) = sum_k coef_k K(sv_k, x) + b`` over rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise InvalidArgumentError(f"expected {model.n_features} features, got {X.shape[1]}")
    K = gram(model.kernel, X, model.support_vectors)
    return K @ model.dual_coefs + model.bias


class KernelRowCache:
    """LRU cache of kernel rows ``K[i, :]`` computed on demand."""

    def __init__(self, spec: KernelSpec, X: np.ndarray, capacity: int):
        self.spec = spec
        self.X = X
        self.capacity = capacity
        self.diag = kernel_diag(spec, X)
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        r = self._rows.get(i)
        if r is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return r
        self.misses += 1
        r = gram(self.spec, self.X[i:i + 1], self.X)[0]
        if self.spec.kind.value == "rbf":
            r[i] = 1.0
        self._rows[i] = r
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return r


def _labels_pm1(labels):
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise InvalidArgumentError("binary labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InvalidArgumentError("both classes (+1 and -1) must be present")
    return y


def _solve_cached(rows, diag, y, c, tol, max_iter, max_stall, second_order, alpha, grad, use_jit):
    if use_jit:
        first, second, length, apply = (
            kern.select_first_jit, kern.select_second_jit, kern.step_length_jit, kern.apply_step_jit,
        )
    else:
        first, second, length, apply = (
            kern.select_first_np, kern.select_second_np, kern.step_length_np, kern.apply_step_np,
        )
    stall = 0
    it = 0
    while True:
        i, m = first(grad, y, alpha, c)
        if i < 0:
            return it, kern.STATUS_CONVERGED, 0.0
        k_i = rows(i)
        j, low = second(grad, y, alpha, c, m, k_i, diag, i, second_order)
        if j < 0:
            return it, kern.STATUS_CONVERGED, 0.0
        gap = m - low
        if gap <= tol:
            return it, kern.STATUS_CONVERGED, gap
        if it >= max_iter:
            return it, kern.STATUS_MAX_ITER, gap
        k_j = rows(j)
        lam, clip = length(grad, y, alpha, c, i, j, diag[i], diag[j], k_i[j])
        if lam <= 1e-15:
            stall += 1
            if stall >= max_stall:
                return it, kern.STATUS_STALLED, gap
        else:
            stall = 0
        apply(grad, y, alpha, c, i, j, lam, clip, k_i, k_j)
        it += 1


def _bias(grad, y, alpha, c):
    """Mean of per-point estimates over margin SVs, else feasible-interval midpoint."""
    cand = -y * grad
    free = (alpha > 0) & (alpha < c)
    if np.any(free):
        return float(np.mean(cand[free]))
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
    hi = cand[up].max() if np.any(up) else cand[low].min()
    lo = cand[low].min() if np.any(low) else hi
    return float(0.5 * (hi + lo))


def dual_objective(alpha, y, K) -> float:
    """``W(a) = sum(a) - 0.5 sum_ij a_i a_j y_i y_j K_ij`` (maximised)."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ (K @ ay))


def kkt_violation(alpha, y, K, bias, c) -> float:
    """Largest soft-margin KKT violation of ``alpha`` (0 means satisfied exactly)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    margin = y * (K @ (alpha * y) + bias)
    at_zero = alpha <= 0
    at_c = alpha >= c
    free = ~at_zero & ~at_c
    v = 0.0
    if np.any(at_zero):
        v = max(v, float(np.max(1.0 - margin[at_zero])))
    if np.any(at_c):
        v = max(v, float(np.max(margin[at_c] - 1.0)))
    if np.any(free):
        v = max(v, float(np.max(np.abs(margin[free] - 1.0))))
    return max(v, 0.0)


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    iterations: int
    gap: float
    status: int
    objective: float


def solve_dual(X, y, c, kernel: KernelSpec, settings: SmoSettings = SmoSettings(), K=None) -> SmoResult:
    """Run SMO on the soft-margin dual. ``K`` may supply a precomputed Gram matrix."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = _labels_pm1(y)
    n = y.size
    if X.shape[0] != n:
        raise InvalidArgumentError("data and labels differ in length")
    if n < 2:
        raise InvalidArgumentError("need at least two training points")
    if not c > 0:
        raise InvalidArgumentError(f"C must be > 0, got {c}")
    c = float(c)
    tol = settings.kkt_tolerance
    cap = settings.iteration_cap(n)
    stall = settings.max_passes_without_progress
    alpha = np.zeros(n)
    grad = -np.ones(n)

    if K is None and settings.rows_cached(n) >= n:
        K = gram(kernel, X)
    if K is not None:
        K = np.ascontiguousarray(K, dtype=np.float64)
        if not np.all(np.isfinite(K)):
            raise InvalidArgumentError("kernel matrix has non-finite entries")
        if _accel.NUMBA_ENABLED:
            it, status, gap = kern.smo_full_jit(K, y, c, tol, cap, stall, settings.second_order, alpha, grad)
        else:
            diag = np.ascontiguousarray(np.diagonal(K))
            it, status, gap = _solve_cached(
                K.__getitem__, diag, y, c, tol, cap, stall, settings.second_order, alpha, grad, False
            )
        # fresh gradient, free of accumulated update drift
        grad = K @ (alpha * y) * y - 1.0
        objective = dual_objective(alpha, y, K)
    else:
        cache = KernelRowCache(kernel, X, settings.rows_cached(n))
        it, status, gap = _solve_cached(
            cache.row, cache.diag, y, c, tol, cap, stall, settings.second_order,
            alpha, grad, _accel.NUMBA_ENABLED,
        )
        objective = float(np.sum(alpha) * 0.5 - 0.5 * alpha @ grad)

    bias = _bias(grad, y, alpha, c)
    result = SmoResult(alpha, bias, int(it), float(gap), int(status), objective)
    if status != kern.STATUS_CONVERGED:
        reason = "iteration cap reached" if status == kern.STATUS_MAX_ITER else "no progress"
        raise ConvergenceError(
            f"SMO did not converge ({reason}) after {it} iterations, KKT gap {gap:.3g} > {tol:g}",
            diagnostics={
                "iterations": int(it),
                "gap": float(gap),
                "alpha": alpha,
                "bias": bias,
                "objective": objective,
                "status": reason,
            },
        )
    return result


def train_binary_smo(
    data,
    labels,
    c: float,
    kernel: KernelSpec,
    settings: SmoSettings = SmoSettings(),
    seed=None,
    *,
    class_pair=(-1, 1),
    K=None,
) -> BinarySvmModel:
    """Fit a binary SVM. Selection is deterministic, so ``seed`` only tags the model."""
    X = np.ascontiguousarray(data, dtype=np.float64)
    res = solve_dual(X, labels, c, kernel, settings, K=K)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    sv = np.flatnonzero(res.alpha > 0)
    if sv.size == 0:
        # degenerate: decision is the bias alone; keep one zero-weight vector
        sv = np.array([0])
    return BinarySvmModel(
        support_vectors=X[sv],
        dual_coefs=res.alpha[sv] * y[sv],
        bias=res.bias,
        kernel=kernel,
        c=float(c),
        class_pair=class_pair,
        info={
            "iterations": res.iterations,
            "gap": res.gap,
            "objective": res.objective,
            "n_train": int(y.size),
            "support_indices": sv.tolist(),
            "seed": seed if isinstance(seed, (int, type(None))) else str(seed),
        },
    )
