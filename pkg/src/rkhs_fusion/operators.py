"""Operator norms, the per-iteration stage operator and related diagnostics.

All maps are assembled as dense matrices in orthonormal coordinates:

* agent spaces use feature coordinates (the features are orthonormal there);
* the sum space uses Phi-coordinates.

Operator norms are then largest singular values.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _accel
from .agent import AgentState, agent_operator_norm
from .fusion import build_download_operator, download_normalization
from .linalg import lambda_max, range_basis, spectral_norm, sym_eig, sym_solve

DIVERGENCE_PRODUCT = 1e6


def _space(s):
    return s.space if isinstance(s, AgentState) else s


# ------------------------------------------------------------ fusion norm

@dataclass(frozen=True)
class SchurReport:
    """Top eigenvalues around the block decomposition of a fusion Gram."""

    lambda_max_gram: float
    lambda_max_d: float
    lambda_max_blocks: tuple

    @property
    def block_bound(self):
        return max(self.lambda_max_blocks)


def schur_report(gram, m):
    """Eigenvalue summary of ``[[A, B], [B^T, C]]`` and ``D = diag(A - B C^{-1} B^T, C)``."""
    gram = np.asarray(gram, dtype=float)
    a, b, c = gram[:m, :m], gram[:m, m:], gram[m:, m:]
    schur = a - b @ sym_solve(c, b.T)
    top_d = max(lambda_max(schur), lambda_max(c))
    return SchurReport(lambda_max(gram), top_d, (lambda_max(a), lambda_max(c)))


@dataclass(frozen=True)
class FusionNorm:
    """Fusion operator norm with the eigenvalue bounds it is compared to."""

    value: float
    schur: SchurReport

    @property
    def lambda_max_gram(self):
        return self.schur.lambda_max_gram

    @property
    def block_bound(self):
        return self.schur.block_bound


def fusion_operator_norm(space, rho, reconstruct_rho=None):
    """Norm of the fusion map in the form used for its large-``rho`` limit.

    Inputs are pairs of agent coefficient vectors restricted to the canonical
    subspace, constrained by ``sum_i a_i^T M_i^T B_i M_i a_i = 1`` where
    ``B_i`` is the sum-kernel Gram at agent ``i``'s anchors, i.e. the pair's
    sum-space norms. The output is measured by the quadratic form of the
    (normalised) pooled Gram on the fused coefficients.

    Parameters
    ----------
    space : FusionSpace
    rho : float
        Fusion regularisation.
    reconstruct_rho : float, optional
        Regularisation used in the data reconstruction; ``rho`` by default.
    """
    rr = rho if reconstruct_rho is None else reconstruct_rho
    g = space.gram
    w, v = sym_eig(g)
    w = np.clip(w, 0.0, None)
    solve = v @ np.diag(1.0 / (w + rho)) @ v.T
    blocks, cons = [], []
    for agent, bc, bg in zip(space.agents, space.basis_changes, space.block_grams):
        u = agent.range_basis
        blocks.append((agent.gram + rr * np.eye(len(u))) @ u)
        mu = bc.matrix @ u
        cons.append(mu.T @ bg @ mu)
    d1 = blocks[0].shape[1]
    lift = np.zeros((2 * space.m, d1 + blocks[1].shape[1]))
    lift[:space.m, :d1] = blocks[0]
    lift[space.m:, d1:] = blocks[1]
    out = solve @ lift
    num = out.T @ g @ out
    con = np.zeros((lift.shape[1],) * 2)
    con[:d1, :d1] = cons[0]
    con[d1:, d1:] = cons[1]
    cw, cv = sym_eig(con)
    whiten = cv / np.sqrt(cw)
    top = lambda_max(whiten.T @ num @ whiten)
    return FusionNorm(float(np.sqrt(max(top, 0.0))), schur_report(g, space.m))


# ------------------------------------------------------ multi-agent norm

@dataclass(frozen=True)
class MultiAgentNorm:
    value: float
    blocks: tuple


def multi_agent_operator_norm(s1, s2, rho1, rho2, space=None, grids=(None, None)):
    """Norm of the block-diagonal map ``(upload o learn_1, upload o learn_2)``.

    With ``space`` given, outputs are measured in the sum-space norm;
    otherwise in each agent's own norm.
    """
    values = []
    for idx, (s, rho, grid) in enumerate(zip((s1, s2), (rho1, rho2), grids)):
        metric = None
        if space is not None:
            bc = space.basis_changes[idx].matrix
            metric = bc.T @ space.block_grams[idx] @ bc
        values.append(agent_operator_norm(_space(s), rho, grid, metric))
    return MultiAgentNorm(max(values), tuple(values))


# ---------------------------------------------------------- stage operator

def _block_diag(a, b):
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[:a.shape[0], :a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


def agent_update_matrix(space, x, rho):
    """Learning operator at data location ``x`` in feature coordinates.

    Maps ``(c_f, c_psi)`` to the feature coordinates of the updated estimate.
    """
    p = space.anchor_features
    inv = space.coordinate_inverse
    u = space.range_basis
    ku = u.T @ space.kernel_vector(x)
    lhs = rho * space.range_gram + np.outer(ku, ku)
    rhs = u.T @ np.hstack([rho * space.gram @ inv, inv])
    return p.T @ u @ sym_solve(lhs, rhs)


@dataclass(frozen=True, eq=False)
class StageOperator:
    """One full iteration as a linear map.

    Inputs are stacked feature coordinates ``(f1, f2, psi1, psi2)``; outputs
    are feature coordinates of the two downloaded estimates.
    """

    matrix: np.ndarray
    agent_matrix: np.ndarray
    fusion_matrix: np.ndarray
    fusion_domain: np.ndarray
    download_matrix: np.ndarray
    agents: tuple

    @property
    def norm(self):
        return spectral_norm(self.matrix)

    @property
    def agent_norm(self):
        return spectral_norm(self.agent_matrix)

    @property
    def fusion_norm(self):
        return spectral_norm(self.fusion_matrix @ self.fusion_domain)

    @property
    def download_norm(self):
        return spectral_norm(self.download_matrix)

    @property
    def linear_part(self):
        """Square block acting on ``(f1, f2)`` with zero data embeddings."""
        n = self.matrix.shape[0]
        return self.matrix[:, :n]

    def apply(self, f1, f2, psi1, psi2):
        """Apply to four functions, returning the two downloaded functions."""
        a1, a2 = self.agents
        x = np.concatenate([a1.feature_coordinates(f1), a2.feature_coordinates(f2),
                            a1.feature_coordinates(psi1), a2.feature_coordinates(psi2)])
        return self.split(self.matrix @ x)

    def split(self, coords):
        a1, a2 = self.agents
        d1 = a1.kernel.dimension
        return (a1.from_feature_coordinates(coords[:d1]),
                a2.from_feature_coordinates(coords[d1:]))


def stage_operator(space, s1, s2, rho1, rho2, rho, x1, x2, normalize=True,
                   reconstruct="agent", ops=None):
    """Assemble the stage operator for fixed data locations.

    Parameters
    ----------
    space : FusionSpace
    s1, s2 : AgentState or AgentSpace
    rho1, rho2, rho : float
        Agent and fusion regularisation.
    x1, x2 : float
        Data locations for this stage.
    normalize : bool
        Divide downloads by the overlap constant ``c_d``.
    reconstruct : {"agent", "fusion"}
        Which regularisation feeds the data reconstruction.
    ops : tuple of DownloadOperator, optional
        Prebuilt download operators.
    """
    a1, a2 = _space(s1), _space(s2)
    d1, d2 = a1.kernel.dimension, a2.kernel.dimension
    if ops is None:
        ops = (build_download_operator(space, 1), build_download_operator(space, 2))
    cd = download_normalization(space, ops) if normalize else 1.0

    # learning then upload, into Phi-coordinates of both uploads
    ups = space.agent_phi_maps
    t1 = ups[0] @ agent_update_matrix(a1, x1, rho1)
    t2 = ups[1] @ agent_update_matrix(a2, x2, rho2)
    dim = space.dimension
    tbar = np.zeros((2 * dim, 2 * (d1 + d2)))
    tbar[:dim, :d1] = t1[:, :d1]
    tbar[:dim, d1 + d2:2 * d1 + d2] = t1[:, d1:]
    tbar[dim:, d1:d1 + d2] = t2[:, :d2]
    tbar[dim:, 2 * d1 + d2:] = t2[:, d2:]

    # fusion: uploads -> agent coefficients -> reconstructed data -> fused Phi-coordinates
    rr = (rho1, rho2) if reconstruct == "agent" else (rho, rho)
    recon = [(a.gram + r * np.eye(space.m)) @ a.coordinate_inverse @ np.linalg.pinv(up)
             for a, r, up in zip((a1, a2), rr, ups)]
    g = space.gram
    w, v = sym_eig(g)
    w = np.clip(w, 0.0, None)
    solve = v @ np.diag(1.0 / (w + rho)) @ v.T
    to_phi = space.phi_basis.T @ space.kernel.features(space.anchors.points).T
    fusion = space.gram_scale * to_phi @ solve @ _block_diag(*recon)
    domain = _block_diag(range_basis(ups[0]), range_basis(ups[1]))

    # download: Phi-coordinates -> agent feature coordinates
    rows = []
    for a, op in zip((a1, a2), ops):
        gw, gv = sym_eig(a.gram)
        keep = gw > 1e-10 * max(gw[-1], 0.0)
        pinv = gv[:, keep] @ np.diag(1.0 / gw[keep]) @ gv[:, keep].T
        values = space.kernel.features(a.anchors.points) @ space.phi_basis
        rows.append(a.anchor_features.T @ pinv @ values @ op.matrix / cd)
    down = np.vstack(rows)
    return StageOperator(down @ fusion @ tbar, tbar, fusion, domain, down, (a1, a2))


# ------------------------------------------------------------- norm trace

@dataclass(frozen=True)
class NormRecord:
    n: int
    norm: float
    product: float
    running_gap: float


@dataclass(frozen=True)
class NormTrace:
    """Stage norms, their cumulative products and the running infimum of ``|norm - 1|``."""

    records: tuple
    diverged: bool

    @property
    def sup_product(self):
        return max(r.product for r in self.records)


def norm_trace(stage_at, horizon):
    """Trace stage operator norms for ``n = 1..horizon``.

    Parameters
    ----------
    stage_at : callable
        ``stage_at(n)`` returns a :class:`StageOperator` or a norm value.
    horizon : int
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    records, product, gap = [], 1.0, np.inf
    for n in range(1, horizon + 1):
        stage = stage_at(n)
        value = stage.norm if isinstance(stage, StageOperator) else float(stage)
        product *= value
        gap = min(gap, abs(value - 1.0))
        records.append(NormRecord(n, value, product, gap))
    return NormTrace(tuple(records), any(r.product > DIVERGENCE_PRODUCT for r in records))


# -------------------------------------------------------- fixed-point probe

@dataclass(frozen=True)
class FixedPoint:
    """Unit vector ``f`` with ``||T f - f|| <= tolerance``."""

    coordinates: np.ndarray
    residual: float
    iterations: int
    functions: Optional[tuple] = None


def fixed_point_probe(stage, tolerance=1e-6, max_iters=10_000, seed=0, starts=5):
    """Search for a unit fixed point of the linear part of a stage.

    Power-iterates ``f -> T f / ||T f||`` from ``starts`` seeded random unit
    vectors and returns the first iterate meeting the tolerance, else ``None``.

    Parameters
    ----------
    stage : StageOperator or ndarray
        A square matrix is used as is.
    """
    a = stage.linear_part if isinstance(stage, StageOperator) else np.asarray(stage, float)
    rng = np.random.default_rng(seed)
    for _ in range(starts):
        v0 = rng.standard_normal(a.shape[1])
        v, its, resid = _accel.power_iteration(a, v0, max_iters, tolerance)
        if resid <= tolerance:
            funcs = stage.split(v) if isinstance(stage, StageOperator) else None
            return FixedPoint(np.asarray(v), float(resid), int(its), funcs)
    return None


def projector_overlap_gap(p1, p2, probes=1000, seed=0):
    """Largest gap between the raw and symmetrised quadratic forms of ``p1 p2``
    over random unit probes; zero up to rounding since a quadratic form only
    sees the symmetric part of its matrix."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((probes, len(p1)))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    prod = p1 @ p2
    sym = 0.5 * (prod + prod.T)
    raw = np.einsum("ni,ij,nj->n", v, prod, v)
    return float(np.max(np.abs(raw - np.einsum("ni,ij,nj->n", v, sym, v))))
