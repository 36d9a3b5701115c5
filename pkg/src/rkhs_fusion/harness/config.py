"""Experiment configuration files.

Grammar: INI-style sections ``[agent1] [agent2] [fusion] [run] [data]
[output]``; keys are lowercase snake_case; lists are comma separated;
domains are intervals ``lo..hi`` joined by ``|``; ``#`` starts a comment.
"""

import configparser
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..domain import Domain
from ..errors import ParseError, ValidationError
from ..fusion import GRAM_NORMALIZATIONS
from ..rkhs import parse_feature
from ..runtime import RECONSTRUCT_CHOICES, RunConfig, Schedule

SECTIONS = ("agent1", "agent2", "fusion", "run", "data", "output")
KEYS = {
    "agent1": {"features", "domain", "anchors", "anchor_pool", "rho"},
    "agent2": {"features", "domain", "anchors", "anchor_pool", "rho"},
    "fusion": {"rho", "reconstruct_rho", "normalize_download", "gram_normalization"},
    "run": {"epsilon", "k_max", "max_iterations", "seed"},
    "data": {"true_function", "noise_sigma"},
    "output": {"directory", "grid_points", "svg"},
}
REQUIRED = {
    "agent1": {"features", "domain", "rho"},
    "agent2": {"features", "domain", "rho"},
    "fusion": {"rho"},
    "run": {"epsilon", "k_max"},
    "data": {"true_function"},
}
_KEY = re.compile(r"^[a-z][a-z0-9_]*$")
_SCHEDULE = re.compile(r"^\s*(constant|linear|geometric)\s*\(([^)]*)\)\s*$")
_NUMBER = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(r"\s*([+-]?)\s*(" + _NUMBER + r")?\s*\*?\s*"
                   r"(constant|monomial\(\s*\d+\s*\)|exp\(\s*[+-]?\s*1\s*\))\s*")


@dataclass(frozen=True)
class AgentSpec:
    features: tuple
    domain: Domain
    anchors: Optional[tuple]
    anchor_pool: int
    rho: Schedule


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed and validated experiment description."""

    agents: tuple
    true_terms: tuple
    sigma: float
    run: RunConfig
    gram_normalization: str
    output_dir: str
    grid_points: int
    svg: bool

    def true_function(self):
        feats = [(c, parse_feature(name)) for c, name in self.true_terms]
        return lambda x: sum(c * f(np.asarray(x, float)) for c, f in feats)

    @property
    def domain(self):
        return Domain.union(*(a.domain for a in self.agents))

    def evaluation_grid(self):
        lo, hi = self.domain.hull
        return np.linspace(lo, hi, self.grid_points)


def _line_of(text, section, key):
    current = None
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and "=" in line and line.split("=", 1)[0].strip() == key:
            return num
    return 0


def _read(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",), strict=True,
                                       default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError(exc.lineno, "content before the first section header") from exc
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ParseError(exc.lineno or 0, exc.message.splitlines()[0]) from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(lineno, f"expected 'key = value', got {line.strip()!r}") from exc
    for section in parser.sections():
        if section not in SECTIONS:
            raise ParseError(_section_line(text, section), f"unknown section [{section}]")
        for key in parser[section]:
            if not _KEY.match(key):
                raise ParseError(_line_of(text, section, key),
                                 f"key {key!r} is not lowercase snake_case")
            if key not in KEYS[section]:
                raise ParseError(_line_of(text, section, key),
                                 f"unknown key {key!r} in [{section}]")
    return parser


def _section_line(text, section):
    for num, raw in enumerate(text.splitlines(), 1):
        if raw.strip() == f"[{section}]":
            return num
    return 0


def _float(field, value):
    try:
        return float(value)
    except ValueError as exc:
        raise ValidationError(field, f"expected a number, got {value!r}") from exc


def _int(field, value):
    try:
        return int(value)
    except ValueError as exc:
        raise ValidationError(field, f"expected an integer, got {value!r}") from exc


def _bool(field, value):
    low = value.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValidationError(field, f"expected true or false, got {value!r}")


def parse_list(value):
    return [v.strip() for v in value.split(",") if v.strip()]


def parse_domain(field, value):
    pieces = []
    for part in value.split("|"):
        if ".." not in part:
            raise ValidationError(field, f"interval {part.strip()!r} is not of the form lo..hi")
        lo, hi = part.split("..", 1)
        pieces.append((_float(field, lo), _float(field, hi)))
    try:
        return Domain(tuple(pieces))
    except ValueError as exc:
        raise ValidationError(field, str(exc)) from exc


def parse_schedule(field, value):
    match = _SCHEDULE.match(value)
    if not match:
        raise ValidationError(field, f"expected constant(c), linear(c) or geometric(c, r), "
                                     f"got {value!r}")
    kind, args = match.group(1), parse_list(match.group(2))
    nums = [_float(field, a) for a in args]
    if (kind == "geometric" and len(nums) != 2) or (kind != "geometric" and len(nums) != 1):
        raise ValidationError(field, f"wrong number of arguments for {kind}")
    try:
        return Schedule(kind, *nums)
    except ValueError as exc:
        raise ValidationError(field, str(exc)) from exc


def parse_terms(field, value):
    """Parse ``c1*name1 + c2*name2 - ...`` into ``((c, name), ...)``."""
    text, pos, terms = value.strip(), 0, []
    while pos < len(text):
        match = _TERM.match(text, pos)
        if not match:
            raise ValidationError(field, f"cannot parse term at {text[pos:]!r}")
        sign, coef, name = match.groups()
        if terms and not sign:
            raise ValidationError(field, "terms must be joined by + or -")
        c = float(coef) if coef else 1.0
        terms.append((-c if sign == "-" else c, re.sub(r"\s+", "", name)))
        pos = match.end()
    if not terms:
        raise ValidationError(field, "true function has no terms")
    return tuple(terms)


def _agent(parser, name):
    sec = parser[name]
    feats = parse_list(sec["features"])
    for f in feats:
        try:
            parse_feature(f)
        except ValueError as exc:
            raise ValidationError(f"{name}.features", str(exc)) from exc
    if not feats:
        raise ValidationError(f"{name}.features", "needs at least one feature")
    domain = parse_domain(f"{name}.domain", sec["domain"])
    anchors = None
    if "anchors" in sec:
        anchors = tuple(_float(f"{name}.anchors", a) for a in parse_list(sec["anchors"]))
        if len(set(anchors)) != len(anchors):
            raise ValidationError(f"{name}.anchors", "anchor points must be distinct")
    pool = _int(f"{name}.anchor_pool", sec.get("anchor_pool", "50"))
    if pool < 1:
        raise ValidationError(f"{name}.anchor_pool", "must be positive")
    rho = parse_schedule(f"{name}.rho", sec["rho"])
    return AgentSpec(tuple(re.sub(r"\s+", "", f) for f in feats), domain, anchors, pool, rho)


def parse_config(text):
    """Parse and validate an experiment configuration.

    Raises
    ------
    ParseError
        On malformed text, unknown sections or keys.
    ValidationError
        On missing or invalid values.
    """
    parser = _read(text)
    for section, keys in REQUIRED.items():
        if section not in parser:
            raise ValidationError(section, "section is missing")
        for key in keys:
            if key not in parser[section]:
                raise ValidationError(f"{section}.{key}", "required key is missing")
    agents = (_agent(parser, "agent1"), _agent(parser, "agent2"))
    whole = Domain.union(*(a.domain for a in agents))
    lo, hi = whole.hull
    for idx, a in enumerate(agents, 1):
        if a.anchors is not None and not all(whole.contains(x) for x in a.anchors):
            raise ValidationError(f"agent{idx}.anchors",
                                  f"anchors must lie in the input domain within {lo}..{hi}")

    fusion = parser["fusion"]
    reconstruct = fusion.get("reconstruct_rho", "agent").strip()
    if reconstruct not in RECONSTRUCT_CHOICES:
        raise ValidationError("fusion.reconstruct_rho", f"must be one of {RECONSTRUCT_CHOICES}")
    gram_norm = fusion.get("gram_normalization", "none").strip()
    if gram_norm not in GRAM_NORMALIZATIONS:
        raise ValidationError("fusion.gram_normalization",
                              f"must be one of {GRAM_NORMALIZATIONS}")

    run = parser["run"]
    eps = _float("run.epsilon", run["epsilon"])
    if not eps > 0:
        raise ValidationError("run.epsilon", "must be positive")
    k_max = _int("run.k_max", run["k_max"])
    if k_max < 1:
        raise ValidationError("run.k_max", "must be at least 1")
    max_it = _int("run.max_iterations", run.get("max_iterations", "10000"))
    if max_it < 1:
        raise ValidationError("run.max_iterations", "must be at least 1")
    seed = _int("run.seed", run.get("seed", "0"))

    data = parser["data"]
    terms = parse_terms("data.true_function", data["true_function"])
    for _, name in terms:
        try:
            parse_feature(name)
        except ValueError as exc:
            raise ValidationError("data.true_function", str(exc)) from exc
    sigma = _float("data.noise_sigma", data.get("noise_sigma", "0"))
    if not sigma >= 0:
        raise ValidationError("data.noise_sigma", "must be nonnegative")

    out = parser["output"] if "output" in parser else {}
    grid_points = _int("output.grid_points", out.get("grid_points", "401"))
    if grid_points < 2:
        raise ValidationError("output.grid_points", "must be at least 2")

    run_cfg = RunConfig(
        epsilon=eps, k_max=k_max, max_iterations=max_it,
        rho1=agents[0].rho, rho2=agents[1].rho,
        rho_fusion=parse_schedule("fusion.rho", fusion["rho"]),
        normalize_download=_bool("fusion.normalize_download",
                                 fusion.get("normalize_download", "true")),
        seed=seed, reconstruct=reconstruct)
    return ExperimentConfig(
        agents=agents, true_terms=terms, sigma=sigma, run=run_cfg,
        gram_normalization=gram_norm,
        output_dir=out.get("directory", "out").strip(),
        grid_points=grid_points,
        svg=_bool("output.svg", out.get("svg", "true")))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
