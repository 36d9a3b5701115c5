"""Hot numerical kernels with a numba path and a pure-numpy path.

Set ``RKHS_FUSION_DISABLE_NUMBA=1`` to force the numpy implementations.
The numba versions are compiled lazily on first call.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

ENV_FLAG = "RKHS_FUSION_DISABLE_NUMBA"


def numba_enabled():
    """True when the numba path is available and not disabled by the env flag."""
    return numba is not None and os.environ.get(ENV_FLAG, "0").lower() not in ("1", "true", "yes")


# ------------------------------------------------------- agent norm sweep

def _agent_norm_sweep_numpy(kj, kvecs, rho, out_metric, whiten, qtol):
    n, m = kvecs.shape
    q2 = np.einsum("ni,ij,nj->n", kvecs, kj, kvecs)
    a = rho * kj[None, :, :] + kvecs[:, :, None] * kvecs[:, None, :]
    rhs = np.concatenate([np.broadcast_to(rho * kj, (n, m, m)), kvecs[:, :, None]], axis=2)
    op = np.linalg.solve(a, rhs)
    num = np.einsum("nki,kl,nlj->nij", op, out_metric, op)
    w = np.zeros((n, m + 1, m + 1))
    w[:, :m, :m] = whiten
    ok = q2 > qtol
    w[ok, m, m] = 1.0 / np.sqrt(q2[ok])
    s = np.einsum("nki,nkl,nlj->nij", w, num, w)
    s = 0.5 * (s + np.transpose(s, (0, 2, 1)))
    out = np.linalg.eigvalsh(s)[:, -1]
    out[~ok] = np.nan
    return out


def _agent_norm_sweep_loop(kj, kvecs, rho, out_metric, whiten, qtol):
    n, m = kvecs.shape
    out = np.empty(n)
    rhs = np.zeros((m, m + 1))
    w = np.zeros((m + 1, m + 1))
    w[:m, :m] = whiten
    for p in range(n):
        k = kvecs[p]
        q2 = k @ (kj @ k)
        if q2 <= qtol:
            out[p] = np.nan
            continue
        a = rho * kj + np.outer(k, k)
        rhs[:, :m] = rho * kj
        rhs[:, m] = k
        op = np.linalg.solve(a, rhs)
        w[m, m] = 1.0 / np.sqrt(q2)
        s = w.T @ (op.T @ out_metric @ op) @ w
        s = 0.5 * (s + s.T)
        out[p] = np.linalg.eigvalsh(s)[-1]
    return out


# ------------------------------------------------- projected gradient descent

def _gd_numpy(a, b, proj, x0, step, n_steps):
    x = proj @ x0
    for _ in range(n_steps):
        x = proj @ (x - step * 2.0 * (a @ x - b))
    return x


_gd_loop = _gd_numpy


# -------------------------------------------------------- power iteration

def _power_numpy(a, v0, max_iters, tol):
    v = v0 / np.linalg.norm(v0)
    resid = np.inf
    for it in range(max_iters):
        w = a @ v
        resid = np.linalg.norm(w - v)
        if resid <= tol:
            return v, it, resid
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return v, it, resid
        v = w / nw
    return v, max_iters, resid


_power_loop = _power_numpy


_compiled = {}


def _jit(name, func):
    if name not in _compiled:
        _compiled[name] = numba.njit(cache=True)(func)
    return _compiled[name]


def agent_norm_sweep(kj, kvecs, rho, out_metric, whiten, qtol):
    """Squared operator norm of the agent update at each grid point.

    Parameters
    ----------
    kj : ndarray, shape (m, m)
        Positive definite agent Gram matrix.
    kvecs : ndarray, shape (n, m)
        Kernel vectors ``[K(x_p, a_j)]_j`` at the grid points.
    rho : float
        Regularisation.
    out_metric : ndarray, shape (m, m)
        Gram of the norm used to measure outputs.
    whiten : ndarray, shape (m, m)
        ``W`` with ``W^T kj W = I``.
    qtol : float
        Grid points with ``k^T kj k <= qtol`` are skipped and return NaN.
    """
    args = (np.ascontiguousarray(kj, dtype=float), np.ascontiguousarray(kvecs, dtype=float),
            float(rho), np.ascontiguousarray(out_metric, dtype=float),
            np.ascontiguousarray(whiten, dtype=float), float(qtol))
    if numba_enabled():
        return _jit("sweep", _agent_norm_sweep_loop)(*args)
    return _agent_norm_sweep_numpy(*args)


def projected_gradient_descent(a, b, proj, x0, step, n_steps):
    """Minimise ``x^T a x - 2 b^T x`` over ``range(proj)`` by fixed-step descent."""
    args = (np.ascontiguousarray(a, dtype=float), np.ascontiguousarray(b, dtype=float),
            np.ascontiguousarray(proj, dtype=float), np.ascontiguousarray(x0, dtype=float),
            float(step), int(n_steps))
    if numba_enabled():
        return _jit("gd", _gd_loop)(*args)
    return _gd_numpy(*args)


def power_iteration(a, v0, max_iters, tol):
    """Iterate ``v <- a v / ||a v||`` until ``||a v - v|| <= tol``.

    Returns
    -------
    v : ndarray
        Last unit iterate.
    iterations : int
    residual : float
        ``||a v - v||`` at the returned ``v``.
    """
    args = (np.ascontiguousarray(a, dtype=float), np.ascontiguousarray(v0, dtype=float),
            int(max_iters), float(tol))
    if numba_enabled():
        return _jit("power", _power_loop)(*args)
    return _power_numpy(*args)
