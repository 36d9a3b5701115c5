"""The iterative two-agent learning loop with its windowed stopping rule."""

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .agent import AgentState, DataPoint, local_estimate
from .errors import (Diverged, MaxIterationsExceeded, SingularSystem,
                     WindowNotFilled)
from .fusion import (build_download_operator, download, download_normalization,
                     fuse, reconstruct_data)

SCHEDULE_KINDS = ("constant", "linear", "geometric")
RECONSTRUCT_CHOICES = ("agent", "fusion")


# --------------------------------------------------------------- schedules

@dataclass(frozen=True)
class Schedule:
    """Regularisation schedule ``rho_n``.

    ``constant`` gives ``c``; ``linear`` gives ``c * n``; ``geometric``
    gives ``c * r**n``.
    """

    kind: str
    base: float
    ratio: float = 2.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"schedule kind must be one of {SCHEDULE_KINDS}")
        if not (self.base > 0 and math.isfinite(self.base)):
            raise ValueError("schedule base must be positive and finite")
        if self.kind == "geometric" and not (self.ratio > 0 and math.isfinite(self.ratio)):
            raise ValueError("geometric ratio must be positive and finite")

    def value(self, n):
        return schedule_value(self, n)

    def describe(self):
        if self.kind == "geometric":
            return f"geometric({self.base:g}, {self.ratio:g})"
        return f"{self.kind}({self.base:g})"


def schedule_value(schedule, n):
    """Value of ``schedule`` at iteration ``n >= 1``.

    Raises
    ------
    OverflowError
        If a geometric schedule exceeds the float range.
    """
    if n < 1:
        raise ValueError("iterations are numbered from 1")
    if schedule.kind == "constant":
        return float(schedule.base)
    if schedule.kind == "linear":
        return float(schedule.base) * n
    value = float(schedule.base) * math.pow(float(schedule.ratio), n)
    if not math.isfinite(value):
        raise OverflowError(f"geometric schedule overflows at n = {n}")
    return value


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class RunConfig:
    """Parameters of one run.

    Parameters
    ----------
    epsilon : float
        Stopping threshold on the window statistic.
    k_max : int
        Window length.
    max_iterations : int
        Hard cap on iterations.
    rho1, rho2, rho_fusion : Schedule
    normalize_download : bool
        Divide downloads by the overlap constant.
    seed : int
        Recorded for provenance; data streams carry their own seed.
    reconstruct : {"agent", "fusion"}
        Which regularisation feeds the data reconstruction.
    initial : tuple of ndarray or None
        Initial agent coefficients; zero functions by default.
    """

    epsilon: float
    k_max: int
    rho1: Schedule
    rho2: Schedule
    rho_fusion: Schedule
    max_iterations: int = 10_000
    normalize_download: bool = True
    seed: int = 0
    reconstruct: str = "agent"
    initial: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if int(self.k_max) < 1:
            raise ValueError("k_max must be at least 1")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.reconstruct not in RECONSTRUCT_CHOICES:
            raise ValueError(f"reconstruct must be one of {RECONSTRUCT_CHOICES}")


@dataclass(frozen=True, eq=False)
class System:
    """A fusion space with its download operators and overlap constant."""

    space: object
    ops: tuple
    c_d: float

    @property
    def agents(self):
        return self.space.agents


def assemble_system(space):
    ops = (build_download_operator(space, 1), build_download_operator(space, 2))
    return System(space, ops, download_normalization(space, ops))


# ------------------------------------------------------------- data sources

class DataSource:
    """Per-agent stream of data points indexed by iteration ``n >= 1``."""

    def point(self, agent_id, n):
        raise NotImplementedError


class RecordedSource(DataSource):
    """Replays fixed lists of ``DataPoint`` (or ``(x, y)`` pairs) per agent."""

    def __init__(self, stream1, stream2):
        self.streams = tuple([p if isinstance(p, DataPoint) else DataPoint(*map(float, p))
                              for p in s] for s in (stream1, stream2))

    def point(self, agent_id, n):
        stream = self.streams[agent_id - 1]
        if n > len(stream):
            raise IndexError(f"agent {agent_id} stream has only {len(stream)} points")
        return stream[n - 1]


class GeneratedSource(DataSource):
    """Samples ``x`` uniformly on each agent domain and ``y = f(x) + N(0, sigma^2)``.

    Each agent draws from its own generator spawned from ``seed``; points are
    generated lazily and cached so any index replays identically.
    """

    def __init__(self, true_function, domains, sigma=0.0, seed=0):
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.true_function = true_function
        self.domains = tuple(domains)
        self.sigma = float(sigma)
        self.seed = seed
        children = np.random.SeedSequence(seed).spawn(2)
        self._rngs = [np.random.default_rng(c) for c in children]
        self._cache = ([], [])

    def point(self, agent_id, n):
        cache = self._cache[agent_id - 1]
        rng = self._rngs[agent_id - 1]
        while len(cache) < n:
            x = self.domains[agent_id - 1].sample(rng)
            noise = rng.standard_normal() * self.sigma if self.sigma > 0 else 0.0
            cache.append(DataPoint(x, float(self.true_function(x)) + noise))
        return cache[n - 1]


# ----------------------------------------------------------------- records

@dataclass(frozen=True, eq=False)
class IterationRecord:
    """Everything computed at iteration ``n``."""

    n: int
    points: tuple
    rhos: tuple
    local: tuple
    reconstructed: np.ndarray
    fused: object
    downloaded: tuple
    step_norms: tuple
    window_stat: float
    stop: bool


@dataclass(frozen=True, eq=False)
class RunResult:
    """Records of a run plus the initial estimates and how it ended."""

    records: list
    initial: tuple
    stop_reason: str

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    @property
    def history(self):
        """Downloaded estimate pairs indexed by iteration, index 0 being the start."""
        return [self.initial] + [r.downloaded for r in self.records]

    @property
    def final(self):
        return self.history[-1]


def agent_norm(f):
    """Agent-space norm via feature coordinates, which are orthonormal there."""
    return float(np.linalg.norm(f.feature_coordinates()))


def window_statistic(history, n, k_max):
    """Largest summed deviation from the window's base iterate.

    ``max_j sum_i ||f^i_{n-k_max+j} - f^i_{n-k_max}||`` over ``j = 1..k_max``,
    where ``history[t]`` holds the two estimates after iteration ``t``.

    Raises
    ------
    WindowNotFilled
        If ``n < k_max``.
    """
    if n < k_max:
        raise WindowNotFilled(f"window of {k_max} needs n >= {k_max}, got {n}")
    base = history[n - k_max]
    best = 0.0
    for j in range(1, k_max + 1):
        cur = history[n - k_max + j]
        best = max(best, sum(agent_norm(c - b) for c, b in zip(cur, base)))
    return best


def max_pairwise_window(history, n, k_max):
    """Largest summed deviation over all pairs inside the final window."""
    window = history[n - k_max:n + 1]
    best = 0.0
    for p, a in enumerate(window):
        for b in window[p + 1:]:
            best = max(best, sum(agent_norm(x - y) for x, y in zip(a, b)))
    return best


# -------------------------------------------------------------------- loop

def step(system, config, estimates, n, source):
    """One iteration from the previous downloaded estimates.

    Returns the record without a window statistic; :func:`run` fills it in.
    """
    space = system.space
    rhos = (schedule_value(config.rho1, n), schedule_value(config.rho2, n),
            schedule_value(config.rho_fusion, n))
    points, local, recon = [], [], []
    for idx, agent in enumerate(space.agents):
        d = source.point(agent.agent_id, n)
        f = local_estimate(AgentState(agent, estimates[idx]), d, rhos[idx])
        rr = rhos[idx] if config.reconstruct == "agent" else rhos[2]
        points.append(d)
        local.append(f)
        recon.append(reconstruct_data(space, agent.agent_id, f, rr))
        if not np.all(np.isfinite(recon[-1].outputs)):
            raise Diverged(f"non-finite reconstructed data at iteration {n}")
    fused = fuse(space, recon[0], recon[1], rhos[2])
    scale = 1.0 / system.c_d if config.normalize_download else 1.0
    down = tuple(download(op, fused, scale) for op in system.ops)
    for f in down:
        if len(f.coefficients) != len(f.anchors):
            raise AssertionError("downloaded estimate left the agent anchor basis")
    steps = tuple(agent_norm(a - b) for a, b in zip(down, estimates))
    return IterationRecord(
        n=n, points=tuple(points), rhos=rhos,
        local=tuple(f.coefficients for f in local),
        reconstructed=np.concatenate([r.outputs for r in recon]),
        fused=fused, downloaded=down, step_norms=steps,
        window_stat=float("nan"), stop=False)


def _initial_estimates(system, config):
    if config.initial is None:
        return tuple(a.zero() for a in system.agents)
    return tuple(a.function(np.asarray(c, dtype=float))
                 for a, c in zip(system.agents, config.initial))


def run(config, source, system):
    """Run until the window statistic drops below ``epsilon``.

    Returns
    -------
    RunResult

    Raises
    ------
    MaxIterationsExceeded
        If the cap is reached first; the partial result is attached.
    Diverged
        If an estimate becomes non-finite; the partial result is attached.
    SingularSystem
        Re-raised with the failing iteration index.
    """
    initial = _initial_estimates(system, config)
    history = [initial]
    records = []
    for n in range(1, config.max_iterations + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                rec = step(system, config, history[-1], n, source)
        except SingularSystem as exc:
            raise SingularSystem(str(exc), iteration=n) from exc
        except Diverged as exc:
            raise Diverged(str(exc), RunResult(records, initial, "diverged")) from exc
        if not all(np.all(np.isfinite(f.coefficients)) for f in rec.downloaded):
            raise Diverged(f"non-finite estimate at iteration {n}",
                           RunResult(records, initial, "diverged"))
        history.append(rec.downloaded)
        stat = float("nan")
        stop = False
        if n >= config.k_max:
            stat = window_statistic(history, n, config.k_max)
            stop = stat < config.epsilon
        records.append(IterationRecord(**{**rec.__dict__, "window_stat": stat, "stop": stop}))
        if stop:
            return RunResult(records, initial, "window")
    raise MaxIterationsExceeded(
        f"no stop within {config.max_iterations} iterations",
        RunResult(records, initial, "max_iterations"))


# -------------------------------------------------------------- checkpoint

def _dump(obj):
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return json.dumps(str(v))
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = ",\n".join(f"{json.dumps(str(k))}: {_dump(v)}" for k, v in obj.items())
        return "{\n" + items + "\n}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_dump(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def checkpoint_text(config, result):
    """JSON document with the config, seed and final coefficients.

    Floats are written with 17 significant digits so they round-trip exactly.
    """
    cfg = asdict(config)
    cfg.pop("initial")
    final = result.final
    doc = {
        "config": cfg,
        "seed": config.seed,
        "iterations": len(result.records),
        "stop_reason": result.stop_reason,
        "final_coefficients": {f"agent{i + 1}": list(f.coefficients)
                               for i, f in enumerate(final)},
    }
    return _dump(doc) + "\n"


def load_checkpoint(text):
    """Parse a checkpoint document into a plain dictionary."""
    return json.loads(text)
