import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import qp_oracle
from trackdiag.errors import ConvergenceError, InvalidArgumentError
from trackdiag.svm.kernels import KernelSpec, gram
from trackdiag.svm.smo import (
    SmoSettings,
    decision_value,
    decision_values,
    dual_objective,
    kkt_violation,
    solve_dual,
    train_binary_smo,
)

RBF = KernelSpec("rbf", 0.1)


def random_problem(rng, n_max=12):
    n = int(rng.integers(2, n_max + 1))
    X = rng.normal(size=(n, int(rng.integers(1, 5))))
    y = rng.choice([-1.0, 1.0], n)
    y[:2] = (1.0, -1.0)
    return X, y


def test_two_point_problem_analytic():
    # K = [[1, e^-1], [e^-1, 1]] with gamma=1: alpha = 2/(2 - 2e^-1) each, bias 0
    X = np.array([[0.0], [1.0]])
    y = np.array([-1.0, 1.0])
    spec = KernelSpec("rbf", 1.0)
    m = train_binary_smo(X, y, 100.0, spec)
    a = 1.0 / (1.0 - np.exp(-1.0))
    np.testing.assert_allclose(np.abs(m.dual_coefs), [a, a], rtol=1e-9)
    assert abs(m.bias) < 1e-12
    assert decision_value(m, [0.0]) == pytest.approx(-1.0, abs=1e-9)
    assert decision_value(m, [1.0]) == pytest.approx(1.0, abs=1e-9)
    assert decision_value(m, [0.5]) == pytest.approx(0.0, abs=1e-9)


def test_two_point_box_bound():
    X = np.array([[0.0], [1.0]])
    y = np.array([-1.0, 1.0])
    m = train_binary_smo(X, y, 0.5, KernelSpec("rbf", 1.0))
    np.testing.assert_allclose(m.dual_coefs, [-0.5, 0.5])


def test_xor_uses_all_points():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    m = train_binary_smo(X, y, 10.0, KernelSpec("rbf", 1.0))
    assert len(m.dual_coefs) == 4
    assert np.array_equal(np.sign(decision_values(m, X)), y)


@pytest.mark.parametrize("seed", range(8))
def test_matches_projected_gradient_oracle(seed):
    rng = np.random.default_rng(seed)
    X, y = random_problem(rng)
    c = float(10 ** rng.uniform(-1, 2))
    spec = KernelSpec("rbf", float(10 ** rng.uniform(-2, 1)))
    K = gram(spec, X)
    res = solve_dual(X, y, c, spec, SmoSettings(max_iterations=100_000))
    _, best = qp_oracle(K, y, c, 3000)
    assert abs(res.objective - best) <= 1e-4 * max(1.0, abs(best))
    assert res.objective == pytest.approx(dual_objective(res.alpha, y, K), rel=1e-9, abs=1e-9)
    assert kkt_violation(res.alpha, y, K, res.bias, c) <= 1e-3


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), log_c=st.floats(-1, 2), poly=st.booleans())
def test_solution_feasible_and_kkt(seed, log_c, poly):
    rng = np.random.default_rng(seed)
    X, y = random_problem(rng, 30)
    c = 10 ** log_c
    spec = KernelSpec("poly", 0.5, 2, 1.0) if poly else KernelSpec("rbf", 0.5)
    res = solve_dual(X, y, c, spec, SmoSettings(max_iterations=100_000))
    assert np.all(res.alpha >= 0) and np.all(res.alpha <= c)
    assert abs(res.alpha @ y) <= 1e-9 * max(1.0, c * len(y))
    assert kkt_violation(res.alpha, y, gram(spec, X), res.bias, c) <= 1e-3


def test_cached_rows_match_full_gram(rng):
    X = rng.normal(size=(60, 5))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=60) > 0, 1.0, -1.0)
    full = solve_dual(X, y, 10.0, RBF, SmoSettings())
    row_bytes = 60 * 8
    cached = solve_dual(X, y, 10.0, RBF, SmoSettings(cache_budget=7 * row_bytes))
    np.testing.assert_allclose(cached.alpha, full.alpha, atol=1e-9)
    assert cached.bias == pytest.approx(full.bias, abs=1e-9)
    assert kkt_violation(cached.alpha, y, gram(RBF, X), cached.bias, 10.0) <= 1e-3


def test_second_order_selection_converges(rng):
    X = rng.normal(size=(80, 3))
    y = np.where(np.sum(X ** 2, axis=1) > 3, 1.0, -1.0)
    first = solve_dual(X, y, 10.0, KernelSpec("rbf", 0.5), SmoSettings())
    second = solve_dual(X, y, 10.0, KernelSpec("rbf", 0.5), SmoSettings(second_order=True))
    assert second.objective == pytest.approx(first.objective, rel=1e-3)
    assert kkt_violation(second.alpha, y, gram(KernelSpec("rbf", 0.5), X), second.bias, 10.0) <= 1e-3


def test_iteration_cap_raises_with_diagnostics(rng):
    X = rng.normal(size=(40, 2))
    y = np.where(X[:, 0] > 0, 1.0, -1.0)
    with pytest.raises(ConvergenceError) as info:
        solve_dual(X, y, 100.0, RBF, SmoSettings(max_iterations=2))
    d = info.value.diagnostics
    assert d["iterations"] == 2 and d["gap"] > 1e-3 and d["alpha"].shape == (40,)


def test_input_validation():
    X = np.zeros((3, 2))
    with pytest.raises(InvalidArgumentError):
        solve_dual(X, [1, 1, 1], 1.0, RBF)
    with pytest.raises(InvalidArgumentError):
        solve_dual(X, [1, -1, 2], 1.0, RBF)
    with pytest.raises(InvalidArgumentError):
        solve_dual(X, [1, -1, 1], 0.0, RBF)
    with pytest.raises(InvalidArgumentError):
        solve_dual(X, [1, -1, 1], 1.0, RBF, K=np.full((3, 3), np.nan))


def test_deterministic_regardless_of_seed(rng):
    X = rng.normal(size=(30, 4))
    y = np.where(X[:, 1] > 0, 1.0, -1.0)
    a = train_binary_smo(X, y, 1.0, RBF, seed=1)
    b = train_binary_smo(X, y, 1.0, RBF, seed=2)
    assert np.array_equal(a.dual_coefs, b.dual_coefs) and a.bias == b.bias


_BACKEND_SCRIPT = """
import json, numpy as np
from trackdiag._accel import backend_name
from trackdiag.svm.kernels import KernelSpec
from trackdiag.svm.smo import SmoSettings, solve_dual
rng = np.random.default_rng(3)
X = rng.normal(size=(120, 6)); y = np.where(X[:, 0] * X[:, 1] > 0, 1.0, -1.0)
out = {"backend": backend_name()}
for name, s in (("full", SmoSettings()), ("cached", SmoSettings(cache_budget=20 * 120 * 8))):
    r = solve_dual(X, y, 10.0, KernelSpec("rbf", 0.2), s)
    out[name] = [r.alpha.tolist(), r.bias, r.iterations]
print(json.dumps(out))
"""


def _run_backend(disable):
    env = dict(os.environ)
    env.pop("TRACKDIAG_DISABLE_NUMBA", None)
    if disable:
        env["TRACKDIAG_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", _BACKEND_SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def test_numba_and_numpy_backends_agree():
    jit = _run_backend(False)
    ref = _run_backend(True)
    assert jit["backend"] == "numba" and ref["backend"] == "numpy"
    for key in ("full", "cached"):
        np.testing.assert_allclose(jit[key][0], ref[key][0], rtol=0, atol=1e-12)
        assert jit[key][1] == pytest.approx(ref[key][1], abs=1e-12)
        assert jit[key][2] == ref[key][2]
