"""Fusion center: upload, data reconstruction, fusion regression and download.

Coordinates used throughout:

* stacked feature coordinates ``c`` in ``R^D`` for ``D = d1 + d2``;
* Phi-coordinates, an orthonormal basis of the sum space obtained by
  Gram-Schmidt on the stacked features in order (agent 1 first).

The sum-space inner product of two stacked coordinate vectors is
``c^T P c'`` with ``P`` the orthogonal projector onto the row space of the
stacked feature evaluations, so Gram-Schmidt is carried out in that metric.
"""

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import SingularSystem
from .linalg import lambda_max, range_basis, sym_eig
from .rkhs import (FUSION_GRID_POINTS, AnchorSet, RkhsFunction, SumKernel,
                   basis_change, row_space_projector)

EIG_CLAMP = 1e-10
GRAM_NORMALIZATIONS = ("none", "gram", "blocks")


def _check_rho(rho):
    if not (rho > 0 and np.isfinite(rho)):
        raise ValueError(f"regularisation must be positive and finite, got {rho}")


def gram_schmidt(vectors, metric, tol=1e-10):
    """Orthonormalise columns of ``vectors`` under ``<u, v> = u^T metric v``.

    Columns whose residual norm falls below ``tol`` times their original
    norm are dropped. Returns the kept orthonormal columns.
    """
    kept = []
    for col in np.asarray(vectors, dtype=float).T:
        base = np.sqrt(max(col @ metric @ col, 0.0))
        if base == 0.0:
            continue
        v = col.copy()
        for _ in range(2):
            for q in kept:
                v = v - (q @ metric @ v) * q
        nv = np.sqrt(max(v @ metric @ v, 0.0))
        if nv > tol * base:
            kept.append(v / nv)
    return np.array(kept).T if kept else np.zeros((len(metric), 0))


@dataclass(frozen=True, eq=False)
class FusionSpace:
    """Sum space of two agents together with its fixed bases.

    Parameters
    ----------
    agent1, agent2 : AgentSpace
        Agent geometries; each must carry ``dim H`` anchors.
    grid : ndarray, optional
        Evaluation grid for rank and projector computations. Defaults to
        512 points over the hull of both domains (or anchors).
    gram_normalization : {"none", "gram", "blocks"}
        Scale the fusion kernel by ``1 / lambda_max`` of the pooled Gram or
        of its larger diagonal block.
    """

    agent1: object
    agent2: object
    grid: np.ndarray = None
    gram_normalization: str = "none"

    def __post_init__(self):
        if self.gram_normalization not in GRAM_NORMALIZATIONS:
            raise ValueError(f"gram_normalization must be one of {GRAM_NORMALIZATIONS}")
        if self.grid is None:
            object.__setattr__(self, "grid", self._default_grid())
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "kernel", SumKernel(self.agent1.kernel, self.agent2.kernel))
        overlap = np.intersect1d(self.agent1.anchors.points, self.agent2.anchors.points)
        if len(overlap):
            warnings.warn(f"agent anchor sets overlap at {list(overlap)}", stacklevel=2)
        for agent in self.agents:
            if len(agent.anchors) != self.dimension:
                raise ValueError(
                    f"agent {agent.agent_id} has {len(agent.anchors)} anchors but the "
                    f"sum space has dimension {self.dimension}")

    def _default_grid(self):
        pts = []
        for agent in (self.agent1, self.agent2):
            if agent.domain is not None:
                pts.extend(agent.domain.hull)
            pts.extend(agent.anchors.points)
        return np.linspace(min(pts), max(pts), FUSION_GRID_POINTS)

    @property
    def agents(self):
        return (self.agent1, self.agent2)

    def agent(self, agent_id):
        return self.agents[agent_id - 1]

    @property
    def m(self):
        return len(self.agent1.anchors)

    # ------------------------------------------------------ geometry

    @cached_property
    def anchors(self):
        pts = np.concatenate([self.agent1.anchors.points, self.agent2.anchors.points])
        return AnchorSet(pts, "H", require_distinct=False)

    @cached_property
    def agent_anchors(self):
        """Each agent's anchors tagged as indexing sections of the sum kernel."""
        return tuple(AnchorSet(a.anchors.points, "H") for a in self.agents)

    @cached_property
    def evaluations(self):
        return self.kernel.features(self.grid)

    @cached_property
    def projector(self):
        """Projector onto the row space of stacked feature evaluations."""
        return row_space_projector(self.evaluations)

    @cached_property
    def dimension(self):
        return range_basis(self.evaluations.T).shape[1]

    @cached_property
    def phi_basis(self):
        """Columns are the orthonormal Phi basis in stacked feature coordinates."""
        p = self.projector
        return p @ gram_schmidt(np.eye(len(p)), p)

    @cached_property
    def selectors(self):
        d1 = self.agent1.kernel.dimension
        eye = np.eye(self.kernel.dimension)
        return (eye[:, :d1], eye[:, d1:])

    @cached_property
    def raw_gram(self):
        g = self.kernel.matrix(self.anchors.points, self.anchors.points)
        return 0.5 * (g + g.T)

    @cached_property
    def block_grams(self):
        """Diagonal blocks of the pooled Gram: the sum kernel at each agent's anchors."""
        m = self.m
        g = self.raw_gram
        return (g[:m, :m], g[m:, m:])

    @cached_property
    def gram_scale(self):
        if self.gram_normalization == "gram":
            return 1.0 / lambda_max(self.raw_gram)
        if self.gram_normalization == "blocks":
            return 1.0 / max(lambda_max(b) for b in self.block_grams)
        return 1.0

    @property
    def gram(self):
        """Pooled fusion Gram after normalisation."""
        return self.gram_scale * self.raw_gram

    @cached_property
    def basis_changes(self):
        return tuple(basis_change(a.kernel, self.kernel, anchors)
                     for a, anchors in zip(self.agents, self.agent_anchors))

    @cached_property
    def agent_phi_maps(self):
        """Maps from agent feature coordinates to Phi-coordinates."""
        q = self.phi_basis
        return tuple(q.T @ s for s in self.selectors)

    # ------------------------------------------------- coordinates

    def stacked_coordinates(self, f):
        """Stacked feature coordinates of a function in either agent space or the sum space."""
        pts = f.anchors.points
        if f.kernel is self.kernel:
            return self.kernel.features(pts).T @ f.coefficients
        for agent, sel in zip(self.agents, self.selectors):
            if f.kernel is agent.kernel:
                return sel @ (agent.kernel.features(pts).T @ f.coefficients)
        raise ValueError("function kernel does not belong to this fusion space")

    def phi_coordinates(self, f):
        if isinstance(f, RkhsFunction):
            return self.phi_basis.T @ self.stacked_coordinates(f)
        return np.asarray(f, dtype=float)

    @cached_property
    def _phi_to_pooled(self):
        feats = self.kernel.features(self.anchors.points)
        return np.linalg.pinv(feats.T) @ self.phi_basis

    def function_from_phi(self, a):
        """Function over the pooled anchors whose Phi-coordinates are ``a``."""
        return RkhsFunction(self._phi_to_pooled @ np.asarray(a, dtype=float),
                            self.kernel, self.anchors, "H")

    def norm(self, f):
        """Sum-space norm."""
        return float(np.linalg.norm(self.phi_coordinates(f)))


def build_fusion_space(agent1, agent2, grid=None, gram_normalization="none"):
    """Assemble the sum space and eagerly validate its basis changes."""
    space = FusionSpace(agent1, agent2, grid, gram_normalization)
    space.basis_changes
    return space


# ------------------------------------------------------------------ upload

def upload(space, agent_id, f):
    """Same function, re-expressed over sum-kernel sections and tagged ``H``."""
    return space.basis_changes[agent_id - 1].apply(f)


# ------------------------------------------------------- reconstruction

@dataclass(frozen=True)
class ReconstructedData:
    """Inputs are the agent anchors; outputs are ``(G + rho I) alpha``."""

    agent_id: int
    inputs: np.ndarray
    outputs: np.ndarray


def reconstruct_data(space, agent_id, f, rho):
    """Data that ridge regression at ``rho`` would map back to ``f``."""
    _check_rho(rho)
    agent = space.agent(agent_id)
    outputs = agent.gram @ f.coefficients + rho * f.coefficients
    return ReconstructedData(agent_id, agent.anchors.points.copy(), outputs)


def ridge_coefficients(g, y, rho):
    """Coefficients ``alpha`` minimising ``|g alpha - y|^2 + rho alpha^T g alpha``.

    The normal equations read ``g (g + rho I) alpha = g y``. Solving in the
    eigenbasis of ``g`` the factor ``g`` cancels on its range, giving
    ``alpha = (g + rho I)^{-1} y`` exactly with no inversion of ``g``.
    """
    _check_rho(rho)
    w, v = sym_eig(g)
    w = np.clip(w, 0.0, None)
    return v @ ((v.T @ np.asarray(y, dtype=float)) / (w + rho))


def fuse(space, d1, d2, rho):
    """Ridge regression in the sum space on the pooled reconstructed data."""
    _check_rho(rho)
    y = np.concatenate([d1.outputs, d2.outputs])
    alpha = ridge_coefficients(space.gram, y, rho)
    if not np.all(np.isfinite(alpha)):
        raise SingularSystem("fusion solve produced non-finite coefficients")
    return RkhsFunction(space.gram_scale * alpha, space.kernel, space.anchors, "H")


def fusion_cost(space, alpha, y, rho):
    """Fusion objective in pooled coefficients of the (scaled) fusion kernel."""
    g = space.gram
    r = g @ alpha - y
    return float(r @ r + rho * alpha @ g @ alpha)


# ---------------------------------------------------------------- download

@dataclass(frozen=True, eq=False)
class DownloadOperator:
    """Download from the sum space to one agent, in Phi-coordinates."""

    space: FusionSpace
    agent_id: int
    matrix_l: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sqrt_l: np.ndarray
    projector: np.ndarray

    @property
    def matrix(self):
        """Composed download map ``sqrt(L) P`` in Phi-coordinates."""
        return self.sqrt_l @ self.projector

    @property
    def agent(self):
        return self.space.agent(self.agent_id)

    @cached_property
    def _section_coefficients(self):
        """Rows ``a_k``: eigenvector ``k`` as a combination of sum-kernel sections
        at the agent anchors, for the retained eigenpairs."""
        space = self.space
        keep = self.eigenvalues > 0
        vecs = self.eigenvectors[:, keep]
        pts = self.agent.anchors.points
        values = space.kernel.features(pts) @ (space.phi_basis @ vecs)
        w, v = sym_eig(space.block_grams[self.agent_id - 1])
        return (v @ ((v.T @ values) / w[:, None])).T, vecs, np.sqrt(self.eigenvalues[keep])


def build_download_operator(space, agent_id):
    """Assemble ``L = Q^T S S^T Q`` in Phi-coordinates with its spectral data."""
    sel = space.selectors[agent_id - 1]
    lmat = space.phi_basis.T @ sel @ sel.T @ space.phi_basis
    lmat = 0.5 * (lmat + lmat.T)
    w, v = sym_eig(lmat)
    top = max(w[-1], 0.0)
    w = np.where(w > EIG_CLAMP * top, w, 0.0)
    sqrt_l = (v * np.sqrt(w)) @ v.T
    keep = v[:, w > 0]
    return DownloadOperator(space, agent_id, lmat, w, v, sqrt_l, keep @ keep.T)


def download(op, f, scale=1.0):
    """Download via the eigen-expansion of ``L``.

    With ``b_k`` the coordinates of ``f`` along eigenvector ``k`` and ``a_k``
    that eigenvector's coefficients over sum-kernel sections at the agent
    anchors, the agent coefficients are ``sum_k b_k a_k / sqrt(lambda_k)``
    over agent-kernel sections, canonicalised and multiplied by ``scale``.
    """
    a = op.space.phi_coordinates(f)
    coeffs, vecs, roots = op._section_coefficients
    b = vecs.T @ a
    alpha = coeffs.T @ (b / roots) if len(roots) else np.zeros(op.space.m)
    agent = op.agent
    return agent.function(scale * agent.canonical(alpha))


def download_matrix_form(op, f, scale=1.0):
    """Download by applying the composed matrix in Phi-coordinates, then
    solving for agent coefficients from values at the agent anchors."""
    space = op.space
    g = op.matrix @ space.phi_coordinates(f)
    agent = op.agent
    values = space.kernel.features(agent.anchors.points) @ (space.phi_basis @ g)
    w, v = sym_eig(agent.gram)
    keep = w > EIG_CLAMP * max(w[-1], 0.0)
    alpha = v[:, keep] @ ((v[:, keep].T @ values) / w[keep])
    return agent.function(scale * alpha)


def download_normalization(space, ops=None):
    """``c_d = 1 + lambda_max((P1 P2 + P2 P1) / 2)`` for the two download projectors."""
    if ops is None:
        ops = (build_download_operator(space, 1), build_download_operator(space, 2))
    p1, p2 = ops[0].projector, ops[1].projector
    top = lambda_max(0.5 * (p1 @ p2 + p2 @ p1))
    return 1.0 + float(np.clip(top, 0.0, 1.0))
