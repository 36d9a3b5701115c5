"""Symmetric linear algebra helpers.

Every solve in the library goes through a symmetric eigendecomposition so
that clamping of tiny or negative eigenvalues is handled in one place.
"""

import numpy as np

from .errors import SingularSystem

JITTER_TRIGGER = 1e-12
JITTER_SCALE = 1e-10
RANK_TOL = 1e-10


def symmetrize(a):
    """Return ``(a + a.T) / 2``."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def sym_eig(a):
    """Eigendecomposition of a symmetric matrix, ascending eigenvalues."""
    return np.linalg.eigh(symmetrize(a))


def jitter_amount(a):
    """Diagonal shift needed before inverting a PSD matrix.

    Returns ``1e-10 * lambda_max`` when the smallest eigenvalue falls below
    ``1e-12 * lambda_max`` and zero otherwise.
    """
    w = np.linalg.eigvalsh(symmetrize(a))
    top = max(w[-1], 0.0)
    if top == 0.0:
        return 0.0
    return JITTER_SCALE * top if w[0] < JITTER_TRIGGER * top else 0.0


def jittered(a):
    """Return ``a`` with the jitter shift added to its diagonal."""
    a = symmetrize(a)
    return a + jitter_amount(a) * np.eye(a.shape[0])


def sym_solve(a, b, rcond=1e-14):
    """Solve ``a x = b`` for symmetric nonsingular ``a``.

    Raises
    ------
    SingularSystem
        If ``|lambda|_min < rcond * |lambda|_max``.
    """
    w, v = sym_eig(a)
    scale = np.max(np.abs(w)) if w.size else 0.0
    if scale == 0.0 or np.min(np.abs(w)) < rcond * scale:
        raise SingularSystem(
            f"matrix of size {len(w)} has eigenvalue ratio below {rcond:g}")
    b = np.asarray(b, dtype=float)
    return v @ ((v.T @ b) / (w[:, None] if b.ndim == 2 else w))


def psd_sqrt(a, tol=RANK_TOL):
    """Square root of a PSD matrix with eigenvalues below ``tol * max`` clamped to zero."""
    w, v = sym_eig(a)
    w = np.where(w > tol * max(w[-1], 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.T


def range_basis(a, tol=RANK_TOL):
    """Orthonormal basis of the column space of ``a`` via SVD.

    Singular values below ``tol * s_max`` are treated as zero.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    return u[:, s > tol * s[0]]


def numerical_rank(a, tol=RANK_TOL):
    """Rank of ``a`` with relative singular value tolerance ``tol``."""
    return range_basis(a, tol).shape[1]


def spectral_norm(a):
    """Largest singular value; zero for empty matrices."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def lambda_max(a):
    """Largest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(symmetrize(a))[-1])
