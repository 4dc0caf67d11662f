"""Inner loops of the SMO solver.

Two interchangeable implementations of the same three steps (pick the
first index, pick its partner, apply the pair update):

* scalar loops compiled by numba (``*_jit``), including a fully compiled
  driver for the case where the whole Gram matrix is in memory;
* vectorised numpy versions (``*_np``) used when numba is disabled.

Notation: ``grad`` is the gradient of ``0.5 a'Qa - e'a`` with
``Q_ij = y_i y_j K_ij``.  A pair step moves ``a_i += y_i*lam`` and
``a_j -= y_j*lam``, so ``grad_t += y_t*lam*(K_ti - K_tj)``.
"""

import numpy as np

from trackdiag._accel import njit

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_STALLED = 2

TAU = 1e-12


# numba implementation -------------------------------------------------------


@njit
def select_first_jit(grad, y, alpha, c):
    """Index in I_up maximising -y*grad; returns (i, m)."""
    best = -np.inf
    idx = -1
    for t in range(y.shape[0]):
        if (y[t] > 0 and alpha[t] < c) or (y[t] < 0 and alpha[t] > 0):
            v = -y[t] * grad[t]
            if v > best:
                best = v
                idx = t
    return idx, best


@njit
def select_second_jit(grad, y, alpha, c, m, k_i, diag, i, second_order):
    """Partner in I_low; returns (j, M) with M the I_low minimum of -y*grad."""
    low = np.inf
    j = -1
    best_obj = np.inf
    j2 = -1
    k_ii = diag[i]
    for t in range(y.shape[0]):
        if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c):
            v = -y[t] * grad[t]
            if v < low:
                low = v
                j = t
            if second_order:
                b = m - v
                if b > 0:
                    a = k_ii + diag[t] - 2.0 * k_i[t]
                    if a <= 0:
                        a = TAU
                    obj = -(b * b) / a
                    if obj < best_obj:
                        best_obj = obj
                        j2 = t
    if second_order and j2 >= 0:
        return j2, low
    return j, low


def step_length(grad, y, alpha, c, i, j, k_ii, k_jj, k_ij):
    """Unconstrained Newton step along (+y_i, -y_j), clipped to the box.

    ``clip`` reports which variable hit its bound (0 none, 1 i, 2 j).
    """
    eta = k_ii + k_jj - 2.0 * k_ij
    if eta <= 0:
        eta = TAU
    lam = (-y[i] * grad[i] + y[j] * grad[j]) / eta
    lim_i = c - alpha[i] if y[i] > 0 else alpha[i]
    lim_j = alpha[j] if y[j] > 0 else c - alpha[j]
    clip = 0
    if lim_i <= lam:
        lam = lim_i
        clip = 1
    if lim_j <= lam:
        lam = lim_j
        clip = 2
    return lam, clip


step_length_jit = njit(step_length)


@njit
def apply_step_jit(grad, y, alpha, c, i, j, lam, clip, k_i, k_j):
    alpha[i] += y[i] * lam
    alpha[j] -= y[j] * lam
    # snap the variable that hit its bound onto it exactly
    if clip == 1:
        alpha[i] = c if y[i] > 0 else 0.0
    elif clip == 2:
        alpha[j] = 0.0 if y[j] > 0 else c
    if alpha[i] < 0.0:
        alpha[i] = 0.0
    elif alpha[i] > c:
        alpha[i] = c
    if alpha[j] < 0.0:
        alpha[j] = 0.0
    elif alpha[j] > c:
        alpha[j] = c
    for t in range(y.shape[0]):
        grad[t] += y[t] * lam * (k_i[t] - k_j[t])


@njit
def smo_full_jit(K, y, c, tol, max_iter, max_stall, second_order, alpha, grad):
    """Complete solve with the Gram matrix in memory. Returns (iters, status, gap)."""
    diag = np.empty(y.shape[0])
    for t in range(y.shape[0]):
        diag[t] = K[t, t]
    stall = 0
    gap = np.inf
    it = 0
    while True:
        i, m = select_first_jit(grad, y, alpha, c)
        if i < 0:
            return it, STATUS_CONVERGED, 0.0
        j, low = select_second_jit(grad, y, alpha, c, m, K[i], diag, i, second_order)
        if j < 0:
            return it, STATUS_CONVERGED, 0.0
        gap = m - low
        if gap <= tol:
            return it, STATUS_CONVERGED, gap
        if it >= max_iter:
            return it, STATUS_MAX_ITER, gap
        lam, clip = step_length_jit(grad, y, alpha, c, i, j, diag[i], diag[j], K[i, j])
        if lam <= 1e-15:
            stall += 1
            if stall >= max_stall:
                return it, STATUS_STALLED, gap
        else:
            stall = 0
        apply_step_jit(grad, y, alpha, c, i, j, lam, clip, K[i], K[j])
        it += 1


# numpy implementation -------------------------------------------------------


def _up_mask(y, alpha, c):
    return ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))


def _low_mask(y, alpha, c):
    return ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))


def select_first_np(grad, y, alpha, c):
    v = np.where(_up_mask(y, alpha, c), -y * grad, -np.inf)
    i = int(np.argmax(v))
    if v[i] == -np.inf:
        return -1, -np.inf
    return i, float(v[i])


def select_second_np(grad, y, alpha, c, m, k_i, diag, i, second_order):
    low_mask = _low_mask(y, alpha, c)
    v = np.where(low_mask, -y * grad, np.inf)
    j = int(np.argmin(v))
    low = float(v[j])
    if low == np.inf:
        return -1, low
    if second_order:
        b = m - v
        cand = low_mask & (b > 0)
        if cand.any():
            a = diag[i] + diag - 2.0 * k_i
            a = np.where(a <= 0, TAU, a)
            obj = np.where(cand, -(b * b) / a, np.inf)
            j = int(np.argmin(obj))
    return j, low


step_length_np = step_length


def apply_step_np(grad, y, alpha, c, i, j, lam, clip, k_i, k_j):
    alpha[i] += y[i] * lam
    alpha[j] -= y[j] * lam
    if clip == 1:
        alpha[i] = c if y[i] > 0 else 0.0
    elif clip == 2:
        alpha[j] = 0.0 if y[j] > 0 else c
    alpha[i] = min(max(alpha[i], 0.0), c)
    alpha[j] = min(max(alpha[j], 0.0), c)
    grad += (lam * y) * (k_i - k_j)
