"""Experiment orchestration: build the system, generate data, run, write outputs."""

import csv
import io
import os
from dataclasses import dataclass, replace

import numpy as np

from ..agent import AgentSpace
from ..errors import Diverged, MaxIterationsExceeded
from ..fusion import build_fusion_space
from ..linalg import lambda_max
from ..operators import fusion_operator_norm, projector_overlap_gap, schur_report
from ..rkhs import (AnchorSet, FeatureKernel, SumKernel, fusion_dimension,
                    parse_feature, select_anchors)
from ..runtime import GeneratedSource, assemble_system, checkpoint_text, run
from .svg import line_chart

METRICS_COLUMNS = ("n", "rmse_agent1", "rmse_agent2", "rmse_fused", "window_stat",
                   "rho1", "rho2", "rho_fusion")
FUNCTION_COLUMNS = ("x", "f_agent1", "f_agent2", "f_fused", "f_true")
SWEEP_RHOS = (1e2, 1e4, 1e6, 1e8)


def fmt(value):
    """Decimal text with 17 significant digits; ``nan`` for missing values."""
    return format(float(value), ".17g")


def _kernel(spec):
    return FeatureKernel([parse_feature(name) for name in spec.features])


def build_system(config):
    """Agent spaces, fusion space, download operators and ``c_d`` for a config.

    Missing anchor lists are chosen greedily from a uniform pool on each
    agent's domain so that the sum-kernel block at the anchors is nonsingular.
    """
    kernels = [_kernel(a) for a in config.agents]
    lo, hi = config.domain.hull
    m = fusion_dimension(kernels[0], kernels[1], np.linspace(lo, hi, 512))
    total = SumKernel(*kernels)
    spaces, taken = [], ()
    for idx, (spec, k) in enumerate(zip(config.agents, kernels), 1):
        tag = f"H{idx}"
        if spec.anchors is not None:
            anchors = AnchorSet(spec.anchors, tag)
        else:
            # prefer points the other agent has not taken
            pool = spec.domain.grid(spec.anchor_pool)
            pool = pool[~np.isin(pool, taken)]
            anchors = select_anchors(total, pool, m, tag, exclude=taken)
        taken = tuple(anchors.points)
        spaces.append(AgentSpace(idx, k, anchors, spec.domain))
    space = build_fusion_space(spaces[0], spaces[1],
                               gram_normalization=config.gram_normalization)
    return assemble_system(space)


def generate_data(config, seed=None):
    """Seeded per-agent data stream ``y = f*(x) + N(0, sigma^2)``."""
    seed = config.run.seed if seed is None else seed
    return GeneratedSource(config.true_function(), tuple(a.domain for a in config.agents),
                           config.sigma, seed)


@dataclass(frozen=True)
class ExperimentResult:
    result: object
    metrics: list
    best_iteration: int
    best_rmse: float
    files: tuple
    error: Exception = None


def _rmse(f, grid, truth):
    if len(grid) == 0:
        return float("nan")
    return float(np.sqrt(np.mean((f(grid) - truth(grid)) ** 2)))


def metrics_rows(config, result):
    """One row per iteration: grid RMSEs, window statistic and rho values."""
    truth = config.true_function()
    grid = config.evaluation_grid()
    own = [grid[a.domain.contains(grid)] for a in config.agents]
    rows = []
    for rec in result.records:
        rows.append((rec.n,
                     _rmse(rec.downloaded[0], own[0], truth),
                     _rmse(rec.downloaded[1], own[1], truth),
                     _rmse(rec.fused, grid, truth),
                     rec.window_stat, *rec.rhos))
    return rows


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([str(row[0])] + [fmt(v) for v in row[1:]])
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_outputs(config, result, out_dir):
    """Write metrics, final functions, checkpoint and optional SVG.

    Returns
    -------
    rows, best_index, files
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = metrics_rows(config, result)
    files = []
    path = os.path.join(out_dir, "metrics.csv")
    _write(path, _csv_text(METRICS_COLUMNS, rows))
    files.append(path)

    grid = config.evaluation_grid()
    truth = config.true_function()(grid)
    best = int(np.nanargmin([r[3] for r in rows])) if rows else -1
    final = result.final
    fused = result.records[best].fused(grid) if rows else np.zeros_like(grid)
    curves = np.column_stack([grid, final[0](grid), final[1](grid), fused, truth])
    path = os.path.join(out_dir, "final_functions.csv")
    _write(path, _csv_text(FUNCTION_COLUMNS, [(fmt(r[0]), *r[1:]) for r in curves]))
    files.append(path)

    path = os.path.join(out_dir, "run.checkpoint")
    _write(path, checkpoint_text(config.run, result))
    files.append(path)

    if config.svg:
        path = os.path.join(out_dir, "final_functions.svg")
        _write(path, line_chart(grid, {name: curves[:, j + 1]
                                       for j, name in enumerate(FUNCTION_COLUMNS[1:])}))
        files.append(path)
    return rows, best, tuple(files)


def run_experiment(config, out_dir=None, seed=None, echo=print):
    """Run a configured experiment and write its artifacts.

    Outputs are written for partial results too; run errors are then re-raised.

    Returns
    -------
    ExperimentResult
    """
    out_dir = config.output_dir if out_dir is None else out_dir
    system = build_system(config)
    source = generate_data(config, seed)
    run_cfg = config.run
    if seed is not None:
        run_cfg = replace(run_cfg, seed=seed)
    error = None
    try:
        result = run(run_cfg, source, system)
    except (MaxIterationsExceeded, Diverged) as exc:
        if exc.result is None:
            raise
        result, error = exc.result, exc
    rows, best, files = write_outputs(config, result, out_dir)
    best_rmse = rows[best][3] if rows else float("nan")
    echo(f"iterations: {len(result.records)}")
    echo(f"stop reason: {result.stop_reason}")
    if rows:
        echo(f"min fused grid RMSE (oracle-only diagnostic, uses the true function): "
             f"{fmt(best_rmse)} at n = {rows[best][0]}")
    for path in files:
        echo(f"wrote {path}")
    if error is not None:
        raise error
    return ExperimentResult(result, rows, rows[best][0] if rows else 0, best_rmse, files)


def _matrix(a):
    a = np.round(np.asarray(a, dtype=float), 12) + 0.0
    return "\n".join("  [" + ", ".join(f"{v: .12g}" for v in row) + "]" for row in a)


def dump_operators(config):
    """Text report of the fixed operators of a configured system."""
    system = build_system(config)
    space = system.space
    ops = system.ops
    lines = [f"sum space dimension: {space.dimension}",
             f"gram normalization: {space.gram_normalization} (scale {fmt(space.gram_scale)})",
             "anchors:"]
    for agent in space.agents:
        lines.append(f"  agent {agent.agent_id}: "
                     + ", ".join(fmt(x) for x in agent.anchors.points))
    lines += ["Phi basis (orthonormal in the sum space; columns over stacked features):",
              _matrix(space.phi_basis)]
    for op in ops:
        lines += [f"L{op.agent_id}:", _matrix(op.matrix_l),
                  f"sqrt(L{op.agent_id}):", _matrix(op.sqrt_l),
                  f"projector P{op.agent_id}:", _matrix(op.projector)]
    gap = projector_overlap_gap(ops[0].projector, ops[1].projector)
    report = schur_report(space.gram, space.m)
    lines += [f"c_d: {fmt(system.c_d)}",
              f"projector overlap gap: {fmt(gap)}",
              f"lambda_max(fusion Gram): {fmt(lambda_max(space.gram))}",
              f"lambda_max(diag(Schur complement, C)): {fmt(report.lambda_max_d)}",
              "lambda_max(diagonal blocks): "
              + ", ".join(fmt(v) for v in report.lambda_max_blocks),
              "fusion operator norm sweep:"]
    for rho in SWEEP_RHOS:
        lines.append(f"  rho = {rho:g}: {fmt(fusion_operator_norm(space, rho).value)}")
    return "\n".join(lines) + "\n"
