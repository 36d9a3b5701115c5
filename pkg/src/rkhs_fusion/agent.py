"""Local recursive ridge estimation at one agent.

Given the previous estimate ``fbar`` with coefficients ``abar`` and one data
point ``(x, y)`` the agent minimises

    C(f) = (y - f(x))^2 + rho * ||f - fbar||^2

whose minimiser has coefficients

    alpha = (rho G + k k^T)^{-1} (k y + rho G abar),    k = [K(x, a_j)]_j

with ``G`` the agent Gram matrix. When the anchors span the features the
system is solved on ``range(G)``, which fixes a unique coefficient vector per
function; otherwise ``G`` is jittered.
"""

import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import _accel
from .domain import Domain
from .errors import SingularSystem
from .linalg import jitter_amount, range_basis, sym_eig, sym_solve
from .rkhs import AnchorSet, FeatureKernel, RkhsFunction, gram, zero_function

DEFAULT_GRID_PER_PIECE = 256


@dataclass(frozen=True)
class DataPoint:
    """One observation ``y`` at input ``x``."""

    x: float
    y: float


@dataclass(frozen=True, eq=False)
class AgentSpace:
    """Fixed geometry of one agent: kernel, anchors and input domain.

    Derived matrices are computed once and cached.
    """

    agent_id: int
    kernel: FeatureKernel
    anchors: AnchorSet
    domain: Domain = None

    def __post_init__(self):
        if self.agent_id not in (1, 2):
            raise ValueError("agent_id must be 1 or 2")

    @property
    def space_tag(self):
        return f"H{self.agent_id}"

    @cached_property
    def gram(self):
        return gram(self.kernel, self.anchors)

    @cached_property
    def jitter(self):
        return jitter_amount(self.gram)

    @cached_property
    def solve_gram(self):
        """Agent Gram with the jitter shift applied."""
        return self.gram + self.jitter * np.eye(len(self.anchors))

    @cached_property
    def anchor_features(self):
        """``P`` with rows ``phi(a_j)``; ``G = P P^T``."""
        return self.kernel.features(self.anchors.points)

    @cached_property
    def range_basis(self):
        """Orthonormal basis of ``range(G)``, the canonical coefficient subspace."""
        u = range_basis(self.anchor_features)
        if u.shape[1] < self.kernel.dimension:
            raise SingularSystem(
                f"agent {self.agent_id} anchors do not span its {self.kernel.dimension} features")
        return u

    @cached_property
    def coordinate_inverse(self):
        """Map from feature coordinates to canonical coefficients, ``pinv(P^T)``."""
        return np.linalg.pinv(self.anchor_features.T)

    @cached_property
    def range_gram(self):
        """Agent Gram restricted to the canonical subspace; positive definite."""
        u = self.range_basis
        g = u.T @ self.gram @ u
        return 0.5 * (g + g.T)

    @cached_property
    def spans_features(self):
        """True when the anchor sections span the whole agent space."""
        try:
            self.range_basis
        except SingularSystem:
            return False
        return True

    def canonical(self, alpha):
        """Minimum-norm coefficient vector representing the same function."""
        u = self.range_basis
        return u @ (u.T @ np.asarray(alpha, dtype=float))

    def function(self, coefficients):
        return RkhsFunction(coefficients, self.kernel, self.anchors, self.space_tag)

    def zero(self):
        return zero_function(self.kernel, self.anchors, self.space_tag)

    def from_feature_coordinates(self, c):
        """Function whose feature coordinates are ``c``, with canonical coefficients."""
        return self.function(self.coordinate_inverse @ np.asarray(c, dtype=float))

    def feature_coordinates(self, f):
        return self.anchor_features.T @ f.coefficients

    def norm(self, f):
        """Norm in the agent space, computed isometrically from feature coordinates."""
        return float(np.linalg.norm(self.feature_coordinates(f)))

    def kernel_vector(self, x):
        return self.kernel.matrix(np.atleast_1d(float(x)), self.anchors.points)[0]

    def default_grid(self):
        if self.domain is None:
            lo, hi = self.anchors.points.min(), self.anchors.points.max()
            return np.linspace(lo, hi, DEFAULT_GRID_PER_PIECE)
        return self.domain.grid(DEFAULT_GRID_PER_PIECE)


@dataclass(frozen=True)
class AgentState:
    """An agent's geometry plus its current downloaded estimate."""

    space: AgentSpace
    estimate: RkhsFunction = None
    schedule: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.estimate is None:
            object.__setattr__(self, "estimate", self.space.zero())
        if len(self.estimate.coefficients) != len(self.space.anchors):
            raise ValueError("estimate must live over the agent's anchors")

    @property
    def agent_id(self):
        return self.space.agent_id

    @property
    def kernel(self):
        return self.space.kernel

    @property
    def anchors(self):
        return self.space.anchors

    def with_estimate(self, f):
        return replace(self, estimate=f)


@dataclass(frozen=True)
class DataEmbedding:
    """The function with coefficients ``y * k(x)`` over the agent anchors."""

    function: RkhsFunction
    point: DataPoint


def _check_rho(rho):
    if not (rho > 0 and np.isfinite(rho)):
        raise ValueError(f"regularisation must be positive and finite, got {rho}")


def _check_point(space, d):
    if space.domain is not None and not space.domain.contains(d.x):
        raise ValueError(f"x = {d.x} lies outside agent {space.agent_id}'s domain")


def _update(space, alpha, beta, x, rho):
    k = space.kernel_vector(x)
    rhs = rho * (space.gram @ alpha) + beta
    if not space.spans_features:
        g = space.solve_gram
        return sym_solve(rho * g + np.outer(k, k), rho * (g @ alpha) + beta)
    # on range(G) the system is positive definite; this is the zero-jitter
    # limit of the jittered solve and stays well conditioned
    u = space.range_basis
    ku = u.T @ k
    lhs = rho * space.range_gram + np.outer(ku, ku)
    return u @ sym_solve(lhs, u.T @ rhs)


def embed_data(state, d):
    """Data embedding ``psi`` with coefficients ``y * [K(x, a_j)]_j``."""
    space = state.space
    return DataEmbedding(space.function(d.y * space.kernel_vector(d.x)), d)


def local_estimate(state, d, rho):
    """Closed-form minimiser of the agent's regularised one-point cost.

    Parameters
    ----------
    state : AgentState
    d : DataPoint
    rho : float
        Positive regularisation.

    Returns
    -------
    RkhsFunction
        New local estimate in the agent space.

    Raises
    ------
    SingularSystem
        If the regularised matrix is singular after jitter.
    """
    _check_rho(rho)
    space = state.space
    _check_point(space, d)
    beta = d.y * space.kernel_vector(d.x)
    return space.function(_update(space, state.estimate.coefficients, beta, d.x, rho))


def apply_learning_operator(state, f, psi, rho):
    """Learning operator applied to a pair ``(f, psi)`` at the data location of ``psi``."""
    _check_rho(rho)
    space = state.space
    return space.function(
        _update(space, f.coefficients, psi.function.coefficients, psi.point.x, rho))


def local_cost(space, alpha, d, rho, alpha_bar):
    """Regularised one-point cost with the exact (unjittered) Gram."""
    k = space.kernel_vector(d.x)
    r = d.y - k @ alpha
    diff = np.asarray(alpha) - np.asarray(alpha_bar)
    return float(r * r + rho * diff @ space.gram @ diff)


def local_cost_gradient(space, alpha, d, rho, alpha_bar):
    """Gradient of :func:`local_cost` with respect to the coefficients."""
    k = space.kernel_vector(d.x)
    r = d.y - k @ alpha
    return -2.0 * r * k + 2.0 * rho * space.gram @ (np.asarray(alpha) - np.asarray(alpha_bar))


def agent_operator_norm_profile(space, rho, grid=None, out_metric=None):
    """Per-point norms of the learning operator.

    For fixed ``x`` the operator maps ``(alpha, y)`` to the minimiser
    coefficients of ``(y' - f(x))^2 + rho ||f - f_alpha||^2`` with data term
    ``y``. Its squared norm under the input constraint
    ``alpha^T G alpha + y^2 k^T G k = 1`` is the top generalised eigenvalue,
    solved after whitening. Coefficients are restricted to the canonical
    subspace ``range(G)``, where ``G`` is positive definite, so no jitter
    enters and null coefficient directions (which carry no function) are
    excluded.

    Parameters
    ----------
    out_metric : ndarray, optional
        Gram of the output norm on full coefficient vectors; the agent Gram
        by default.

    Returns
    -------
    values : ndarray
        Norm per grid point, NaN where ``k^T G k`` vanishes.
    """
    _check_rho(rho)
    grid = space.default_grid() if grid is None else np.atleast_1d(np.asarray(grid, float))
    if grid.size == 0:
        raise ValueError("grid is empty")
    u = space.range_basis
    g = space.range_gram
    w, v = sym_eig(g)
    if w[0] <= 0:
        raise SingularSystem(f"agent {space.agent_id} Gram is not positive definite")
    whiten = v / np.sqrt(w)
    kvecs = space.kernel.matrix(grid, space.anchors.points) @ u
    q2 = np.einsum("ni,ij,nj->n", kvecs, g, kvecs)
    qtol = 1e-14 * max(float(q2.max()), np.finfo(float).tiny)
    metric = g if out_metric is None else u.T @ out_metric @ u
    sq = _accel.agent_norm_sweep(g, kvecs, rho, metric, whiten, qtol)
    return np.sqrt(np.clip(sq, 0.0, None))


def agent_operator_norm(state, rho, grid=None, out_metric=None):
    """Grid estimate of the agent learning operator norm.

    Returns the maximum of :func:`agent_operator_norm_profile` over the grid.
    Grid points where the data constraint degenerates are skipped with a warning.
    """
    space = state.space if isinstance(state, AgentState) else state
    values = agent_operator_norm_profile(space, rho, grid, out_metric)
    skipped = int(np.isnan(values).sum())
    if skipped == len(values):
        raise SingularSystem("data constraint degenerate at every grid point")
    if skipped:
        warnings.warn(f"skipped {skipped} grid points with degenerate data constraint",
                      stacklevel=2)
    return float(np.nanmax(values))
