"""Finite-dimensional RKHS machinery built from explicit feature maps.

A feature kernel is ``K(x, y) = sum_j phi_j(x) phi_j(y)``. Because its
features are linearly independent they are orthonormal in the induced
space, so feature coordinates give an exact isometry to Euclidean space.
"""

import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientRank, MixedSpace, SingularSystem
from .linalg import numerical_rank, range_basis, sym_eig

FUSION_GRID_POINTS = 512


# ---------------------------------------------------------------- features

@dataclass(frozen=True)
class Feature:
    """A named real-valued function of one variable.

    Parameters
    ----------
    name : str
        Canonical name, e.g. ``"monomial(2)"``.
    func : callable
        Vectorised map from an array of points to an array of values.
    """

    name: str
    func: object = field(compare=False, repr=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape)


def constant():
    return Feature("constant", lambda x: np.ones_like(x))


def monomial(k):
    k = int(k)
    if k < 0:
        raise ValueError("monomial degree must be nonnegative")
    if k == 0:
        return constant()
    return Feature(f"monomial({k})", lambda x: x ** k)


def exponential(sign):
    sign = 1 if sign > 0 else -1
    return Feature(f"exp({'+' if sign > 0 else '-'}1)", lambda x: np.exp(sign * x))


_PRIMITIVE = re.compile(r"^\s*(constant|monomial\(\s*(\d+)\s*\)|exp\(\s*([+-]?)\s*1\s*\))\s*$")


def parse_feature(text):
    """Build a feature from its primitive name.

    Accepted names are ``constant``, ``monomial(k)``, ``exp(+1)`` and ``exp(-1)``.
    """
    match = _PRIMITIVE.match(text)
    if not match:
        raise ValueError(f"unknown feature primitive {text.strip()!r}")
    if match.group(1) == "constant":
        return constant()
    if match.group(2) is not None:
        return monomial(int(match.group(2)))
    return exponential(-1 if match.group(3) == "-" else 1)


@dataclass(frozen=True)
class FeatureSet:
    """An ordered, linearly independent list of features."""

    features: tuple

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ValueError("a feature set needs at least one feature")

    @property
    def dimension(self):
        return len(self.features)

    def evaluate(self, x):
        """Feature matrix with rows ``[phi_1(x_k), ..., phi_d(x_k)]``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([f(x) for f in self.features], axis=-1)

    def check_independent(self, grid, tol=1e-10):
        """Raise ``SingularSystem`` unless the features have full rank on ``grid``."""
        rank = numerical_rank(self.evaluate(grid), tol)
        if rank < self.dimension:
            raise SingularSystem(
                f"features have numerical rank {rank} < {self.dimension} on the grid")


# ----------------------------------------------------------------- kernels

class Kernel:
    """Base class for kernels with an explicit stacked feature map."""

    def features(self, x):
        """Stacked feature matrix of shape ``(n, D)``."""
        raise NotImplementedError

    def __call__(self, x, y):
        return eval_kernel(self, x, y)

    def matrix(self, a, b):
        a = _points(a)
        b = _points(b)
        return self.features(a) @ self.features(b).T

    @property
    def dimension(self):
        raise NotImplementedError


class FeatureKernel(Kernel):
    """Kernel ``K(x, y) = sum_j phi_j(x) phi_j(y)`` of one feature set."""

    def __init__(self, feature_set):
        if not isinstance(feature_set, FeatureSet):
            feature_set = FeatureSet(tuple(feature_set))
        self.feature_set = feature_set

    def features(self, x):
        return self.feature_set.evaluate(x)

    @property
    def dimension(self):
        return self.feature_set.dimension

    def __repr__(self):
        names = ", ".join(f.name for f in self.feature_set.features)
        return f"FeatureKernel([{names}])"


class SumKernel(Kernel):
    """Kernel ``K = K1 + K2``; its feature map stacks both parts."""

    def __init__(self, first, second):
        self.first = first
        self.second = second

    def features(self, x):
        return np.concatenate([self.first.features(x), self.second.features(x)], axis=-1)

    def matrix(self, a, b):
        return self.first.matrix(a, b) + self.second.matrix(a, b)

    @property
    def dimension(self):
        return self.first.dimension + self.second.dimension

    def __repr__(self):
        return f"SumKernel({self.first!r}, {self.second!r})"


def _points(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def eval_kernel(k, x, y):
    """Evaluate ``K(x, y)`` at two scalar points."""
    if isinstance(k, SumKernel):
        return eval_kernel(k.first, x, y) + eval_kernel(k.second, x, y)
    return float(k.features(x)[0] @ k.features(y)[0])


# ----------------------------------------------------------------- anchors

@dataclass(frozen=True)
class AnchorSet:
    """Points whose kernel sections span a space.

    Parameters
    ----------
    points : ndarray
        Pairwise distinct anchor locations.
    space_tag : str
        Tag of the space whose sections the points index.
    condition_number : float, optional
        Gram condition number reported by anchor selection.
    require_distinct : bool
        Reject repeated points. Disabled only for the pooled anchors of
        two agents, where overlap is allowed with a warning.
    """

    points: np.ndarray
    space_tag: str = "H"
    condition_number: float = float("nan")
    require_distinct: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        pts = _points(self.points).copy()
        pts.setflags(write=False)
        if pts.size == 0:
            raise ValueError("anchor set is empty")
        if self.require_distinct and len(np.unique(pts)) != len(pts):
            raise ValueError("anchor points must be pairwise distinct")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return (isinstance(other, AnchorSet) and self.space_tag == other.space_tag
                and np.array_equal(self.points, other.points))

    def __hash__(self):
        return hash((self.space_tag, self.points.tobytes()))


def gram(k, a, b=None):
    """Gram matrix ``[K(a_j, b_l)]``; ``b`` defaults to ``a``."""
    pa = a.points if isinstance(a, AnchorSet) else _points(a)
    pb = pa if b is None else (b.points if isinstance(b, AnchorSet) else _points(b))
    g = k.matrix(pa, pb)
    if b is None:
        g = 0.5 * (g + g.T)
    return g


# --------------------------------------------------------------- functions

@dataclass(frozen=True)
class RkhsFunction:
    """``f(x) = sum_j alpha_j K(x, a_j)`` tagged with the space whose norm applies."""

    coefficients: np.ndarray
    kernel: Kernel
    anchors: AnchorSet
    space_tag: str

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float).reshape(-1)
        c.setflags(write=False)
        if len(c) != len(self.anchors):
            raise ValueError(
                f"{len(c)} coefficients for {len(self.anchors)} anchors")
        object.__setattr__(self, "coefficients", c)

    def __call__(self, x):
        return eval_function(self, x)

    def with_coefficients(self, coefficients):
        return RkhsFunction(coefficients, self.kernel, self.anchors, self.space_tag)

    def _check_same_basis(self, other):
        if self.space_tag != other.space_tag:
            raise MixedSpace(f"{self.space_tag} vs {other.space_tag}")
        if self.kernel is not other.kernel or self.anchors != other.anchors:
            raise MixedSpace("functions are expressed over different bases")

    def __add__(self, other):
        self._check_same_basis(other)
        return self.with_coefficients(self.coefficients + other.coefficients)

    def __sub__(self, other):
        self._check_same_basis(other)
        return self.with_coefficients(self.coefficients - other.coefficients)

    def __mul__(self, scalar):
        return self.with_coefficients(float(scalar) * self.coefficients)

    __rmul__ = __mul__

    def feature_coordinates(self):
        """Coordinates in the (stacked) feature basis of the kernel."""
        return self.kernel.features(self.anchors.points).T @ self.coefficients

    def norm(self):
        return float(np.sqrt(max(inner_product(self, self), 0.0)))


def zero_function(kernel, anchors, space_tag):
    return RkhsFunction(np.zeros(len(anchors)), kernel, anchors, space_tag)


def eval_function(f, x):
    """Evaluate ``f`` at a scalar or an array of points."""
    pts = np.asarray(x, dtype=float)
    vals = f.kernel.matrix(_points(pts), f.anchors.points) @ f.coefficients
    return float(vals[0]) if pts.ndim == 0 else vals


def inner_product(f, g):
    """``alpha^T G beta`` over the common kernel.

    Raises
    ------
    MixedSpace
        If the space tags or kernels differ.
    """
    if f.space_tag != g.space_tag or f.kernel is not g.kernel:
        raise MixedSpace(f"cannot pair a function in {f.space_tag} with one in {g.space_tag}")
    cross = gram(f.kernel, f.anchors, g.anchors)
    if f.anchors == g.anchors:
        cross = 0.5 * (cross + cross.T)
    return float(f.coefficients @ cross @ g.coefficients)


def stacked_coordinates(f, k1, k2):
    """Coordinates of ``f`` in the stacked feature basis ``[phi^1 | phi^2]``."""
    pts = f.anchors.points
    d1, d2 = k1.dimension, k2.dimension
    if f.kernel is k1:
        return np.concatenate([k1.features(pts).T @ f.coefficients, np.zeros(d2)])
    if f.kernel is k2:
        return np.concatenate([np.zeros(d1), k2.features(pts).T @ f.coefficients])
    if isinstance(f.kernel, SumKernel) and f.kernel.first is k1 and f.kernel.second is k2:
        return f.kernel.features(pts).T @ f.coefficients
    raise MixedSpace("function kernel is neither agent kernel nor their sum")


def row_space_projector(evaluations, tol=1e-10):
    """Orthogonal projector onto the row space of a feature evaluation matrix."""
    basis = range_basis(np.asarray(evaluations).T, tol)
    if basis.shape[1] == basis.shape[0]:
        return np.eye(basis.shape[0])
    return basis @ basis.T


def default_grid(points, n=FUSION_GRID_POINTS):
    """Uniform grid over the hull of ``points`` widened by one unit on each side."""
    points = _points(points)
    return np.linspace(points.min() - 1.0, points.max() + 1.0, n)


def sum_space_norm(f, k1, k2, grid=None):
    """Squared norm of ``f`` in ``H1 + H2``.

    Minimises ``||f1||^2 + ||f2||^2`` over decompositions ``f = f1 + f2``. In
    stacked feature coordinates ``c`` the feasible set is ``c + ker(E)`` where
    ``E`` evaluates the stacked features on ``grid``, so the minimum is
    ``||P c||^2`` with ``P`` the projector onto the row space of ``E``.

    Raises
    ------
    SingularSystem
        If the stacked features vanish on the grid.
    """
    if grid is None:
        grid = default_grid(f.anchors.points)
    evaluations = np.concatenate([k1.features(grid), k2.features(grid)], axis=1)
    if numerical_rank(evaluations) == 0:
        raise SingularSystem("stacked feature evaluations have rank zero")
    c = stacked_coordinates(f, k1, k2)
    pc = row_space_projector(evaluations) @ c
    return float(pc @ pc)


def fusion_dimension(k1, k2, grid, tol=1e-10):
    """Dimension of ``H1 + H2`` as the numerical rank of stacked features on ``grid``."""
    return numerical_rank(np.concatenate([k1.features(grid), k2.features(grid)], axis=1), tol)


def select_anchors(k, pool, m, space_tag="H", exclude=(), tol=1e-10):
    """Greedy anchor selection.

    At each step the candidate maximising the smallest eigenvalue of the
    growing Gram block is added; ties go to the earliest pool entry.

    Parameters
    ----------
    k : Kernel
    pool : array_like
        Candidate points, in priority order.
    m : int
        Number of anchors.
    exclude : array_like
        Points that overlap another agent's anchors; choosing one only warns.

    Raises
    ------
    InsufficientRank
        When no remaining candidate keeps the block nonsingular.
    """
    pool = _points(pool)
    if len(pool) < m:
        raise InsufficientRank(f"pool of {len(pool)} points cannot supply {m} anchors")
    full = k.matrix(pool, pool)
    scale = max(np.max(np.abs(np.diag(full))), np.finfo(float).tiny)
    chosen = []
    for _ in range(m):
        best, best_val = None, -np.inf
        for idx in range(len(pool)):
            if idx in chosen or any(pool[idx] == pool[c] for c in chosen):
                continue
            trial = chosen + [idx]
            val = np.linalg.eigvalsh(full[np.ix_(trial, trial)])[0]
            if val > best_val:
                best, best_val = idx, val
        if best is None or best_val <= tol * scale:
            raise InsufficientRank(
                f"no candidate raises the Gram rank beyond {len(chosen)}")
        chosen.append(best)
    points = pool[chosen]
    overlap = np.intersect1d(points, _points(exclude)) if len(exclude) else []
    if len(overlap):
        warnings.warn(f"anchors overlap the other agent's anchors at {list(overlap)}",
                      stacklevel=2)
    w = np.linalg.eigvalsh(full[np.ix_(chosen, chosen)])
    return AnchorSet(points, space_tag, condition_number=float(w[-1] / w[0]))


# ------------------------------------------------------------ basis change

@dataclass(frozen=True)
class BasisChange:
    """Matrix ``M`` with ``Ki(., a_j) = sum_l M_lj K(., a_l)``."""

    matrix: np.ndarray
    source: Kernel
    target: Kernel
    anchors: AnchorSet

    def apply(self, f):
        """Re-express a function over ``source`` sections as one over ``target`` sections."""
        return RkhsFunction(self.matrix @ f.coefficients, self.target, self.anchors, "H")

    def residual(self, grid):
        """Max relative mismatch between both representations of the sections."""
        lhs = self.source.matrix(grid, self.anchors.points)
        rhs = self.target.matrix(grid, self.anchors.points) @ self.matrix
        return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(lhs)), 1.0))


def basis_change(source, target, anchors, max_condition=1e12):
    """Solve ``G M = C`` where ``G`` is the target Gram and ``C`` the source Gram.

    Raises
    ------
    SingularSystem
        If the target Gram has condition number above ``max_condition``.
    """
    g = gram(target, anchors)
    w, v = sym_eig(g)
    if w[0] <= 0 or w[-1] / w[0] > max_condition:
        raise SingularSystem(
            f"target Gram at anchors is ill-conditioned (eigenvalues {w[0]:.3g}..{w[-1]:.3g})")
    cross = gram(source, anchors)
    return BasisChange(v @ ((v.T @ cross) / w[:, None]), source, target, anchors)
