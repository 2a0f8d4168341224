"""Run configuration: flat ``[section] key = value`` files.

Every key is optional except where a command needs it; errors name the
offending ``section.key``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bias import WeightingFunction, parse_bias
from .costs import CostModel, PiecewiseLinear, parse_cost
from .firm import DeploymentMode, LossSpec, SearchSpec
from .model import Classifier
from .population import GaussianScenario, SigmoidScenario
from .response import AgentParams


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key {key}: {message}")


def parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",") if v.strip()], dtype=float)


def parse_matrix(text: str) -> np.ndarray:
    """Rows separated by ``;``, entries by ``,``."""
    rows = [parse_vector(r) for r in text.split(";") if r.strip()]
    if not rows or len({r.size for r in rows}) != 1:
        raise ValueError("matrix rows must have equal length")
    return np.vstack(rows)


@dataclass
class PopulationConfig:
    source: str
    gaussian: GaussianScenario | None = None
    sigmoid: SigmoidScenario | None = None
    sigmoid_weights: tuple = (0.65, 0.35)
    csv_path: Path | None = None
    seed: int = 0


@dataclass
class Example1Config:
    n_per_label: int = 10_000
    scale: float = 10.0
    gamma: float = 0.5
    budget_12: float = 5.0
    budget_3: float = 10.0
    oblivious_fit: str = "scenario2"


@dataclass
class StudyConfig:
    hours: float = 10.0
    tiers: str = "piecewise"
    gamma: float = 0.5
    gamma_min: float = 0.30
    gamma_max: float = 1.00
    gamma_step: float = 0.01
    x0_2: tuple = (40.0, 60.0)
    x0_4: tuple = (60.0, 40.0, 60.0, 65.0)
    weights_2u: tuple = (0.78, 0.22)
    weights_2b: tuple = (0.5, 0.5)
    weights_4u: tuple = (0.5, 0.2, 0.2, 0.1)
    weights_4b: tuple = (0.25, 0.25, 0.25, 0.25)
    theta0_2: float = 70.0


@dataclass
class RunConfig:
    seed: int = 0
    out: Path = Path("out")
    mode: DeploymentMode | None = None
    mode_name: str = "aware_biased"
    compare_modes: bool = False
    population: PopulationConfig | None = None
    classifier: Classifier | None = None
    bias: WeightingFunction | None = None
    bias_spec: str = "prelec:0.5"
    cost: CostModel | None = None
    cost_spec: str = "norm2"
    params: AgentParams | None = None
    loss: LossSpec = field(default_factory=LossSpec)
    search: SearchSpec = field(default_factory=SearchSpec)
    sort_descending: bool = False
    example1: Example1Config = field(default_factory=Example1Config)
    study: StudyConfig = field(default_factory=StudyConfig)


_SECTIONS = {"run", "population", "classifier", "agent", "loss", "search", "example1", "study"}


def _get(cp, section, key, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} ({exc})") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _float_or_inf(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity") else float(text)


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _tuple(text: str) -> tuple:
    return tuple(parse_vector(text).tolist())


def load_config(path, seed_override: int | None = None, out_override=None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("--config", f"file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError("--config", f"malformed config: {exc}") from None
    for s in cp.sections():
        if s not in _SECTIONS:
            raise ConfigError(s, f"unknown section; expected one of {sorted(_SECTIONS)}")
    base = path.parent
    cfg = RunConfig()

    cfg.seed = _get(cp, "run", "seed", int, 0)
    if seed_override is not None:
        cfg.seed = seed_override
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("run.seed", "seed must be an unsigned 64-bit integer")
    cfg.out = Path(out_override) if out_override is not None else _get(cp, "run", "out", lambda t: base / t, base / "out")
    cfg.mode_name = _get(cp, "run", "mode", str, "aware_biased").strip().lower()
    cfg.compare_modes = _get(cp, "run", "compare_modes", _bool, False)

    cfg.bias_spec = _get(cp, "agent", "bias", str, "prelec:0.5")
    try:
        spec = cfg.bias_spec
        if spec.strip().lower().startswith("table:"):
            spec = "table:" + str(base / spec.split(":", 1)[1].strip())
        cfg.bias = parse_bias(spec)
    except (OSError, ValueError) as exc:
        raise ConfigError("agent.bias", str(exc)) from None
    norm2_budget = _get(cp, "agent", "norm2_budget", str, "distance")
    cfg.cost_spec = _get(cp, "agent", "cost", str, "norm2")
    try:
        cfg.cost = parse_cost(cfg.cost_spec, norm2_budget)
    except ValueError as exc:
        raise ConfigError("agent.cost" if "norm2_budget" not in str(exc) else "agent.norm2_budget", str(exc)) from None
    budget = _get(cp, "agent", "budget", _float_or_inf, 5.0)
    reward = _get(cp, "agent", "reward", _float_or_inf, math.inf)
    try:
        cfg.params = AgentParams(budget, cfg.cost, reward)
    except ValueError as exc:
        raise ConfigError("agent.budget" if "budget" in str(exc) else "agent.reward", str(exc)) from None
    cfg.sort_descending = _get(cp, "agent", "sort_descending", _bool, False)

    try:
        cfg.mode = DeploymentMode.parse(cfg.mode_name, cfg.bias)
    except ValueError as exc:
        raise ConfigError("run.mode", str(exc)) from None

    up = _get(cp, "loss", "u_plus", float, 1.0)
    um = _get(cp, "loss", "u_minus", float, 1.0)
    try:
        cfg.loss = LossSpec(up, um)
    except ValueError as exc:
        raise ConfigError("loss.u_plus", str(exc)) from None

    try:
        cfg.search = SearchSpec(
            theta_steps=_get(cp, "search", "theta_steps", int, 181),
            theta0_min=_get(cp, "search", "theta0_min", _opt_float, None),
            theta0_max=_get(cp, "search", "theta0_max", _opt_float, None),
            theta0_steps=_get(cp, "search", "theta0_steps", int, 201),
            refine=_get(cp, "search", "refine", _bool, True),
            max_sweeps=_get(cp, "search", "max_sweeps", int, 5),
        )
    except ValueError as exc:
        raise ConfigError("search", str(exc)) from None

    if cp.has_option("classifier", "classifier"):
        try:
            cfg.classifier = Classifier.parse(cp.get("classifier", "classifier"))
        except ValueError as exc:
            raise ConfigError("classifier.classifier", str(exc)) from None

    if cp.has_section("population"):
        cfg.population = _population(cp, base, cfg.seed, seed_override)

    e = Example1Config()
    cfg.example1 = Example1Config(
        n_per_label=_get(cp, "example1", "n_per_label", int, e.n_per_label),
        scale=_get(cp, "example1", "scale", float, e.scale),
        gamma=_get(cp, "example1", "gamma", float, e.gamma),
        budget_12=_get(cp, "example1", "budget_12", float, e.budget_12),
        budget_3=_get(cp, "example1", "budget_3", float, e.budget_3),
        oblivious_fit=_get(cp, "example1", "oblivious_fit", str, e.oblivious_fit).strip().lower(),
    )
    if cfg.example1.oblivious_fit not in ("scenario2", "own"):
        raise ConfigError("example1.oblivious_fit", "expected 'scenario2' or 'own'")

    st = StudyConfig()
    cfg.study = StudyConfig(
        hours=_get(cp, "study", "hours", float, st.hours),
        tiers=_get(cp, "study", "tiers", str, st.tiers),
        gamma=_get(cp, "study", "gamma", float, st.gamma),
        gamma_min=_get(cp, "study", "gamma_min", float, st.gamma_min),
        gamma_max=_get(cp, "study", "gamma_max", float, st.gamma_max),
        gamma_step=_get(cp, "study", "gamma_step", float, st.gamma_step),
        x0_2=_get(cp, "study", "x0_2", _tuple, st.x0_2),
        x0_4=_get(cp, "study", "x0_4", _tuple, st.x0_4),
        weights_2u=_get(cp, "study", "weights_2u", _tuple, st.weights_2u),
        weights_2b=_get(cp, "study", "weights_2b", _tuple, st.weights_2b),
        weights_4u=_get(cp, "study", "weights_4u", _tuple, st.weights_4u),
        weights_4b=_get(cp, "study", "weights_4b", _tuple, st.weights_4b),
        theta0_2=_get(cp, "study", "theta0_2", float, st.theta0_2),
    )
    try:
        tiers = parse_cost(cfg.study.tiers)
    except ValueError as exc:
        raise ConfigError("study.tiers", str(exc)) from None
    if not isinstance(tiers, PiecewiseLinear):
        raise ConfigError("study.tiers", "study needs a piecewise cost")
    if float(cfg.study.hours) != int(cfg.study.hours) or cfg.study.hours < 0:
        raise ConfigError("study.hours", "hours must be a nonnegative whole number")
    if not (0 < cfg.study.gamma_min <= cfg.study.gamma_max and cfg.study.gamma_step > 0):
        raise ConfigError("study.gamma_step", "need 0 < gamma_min <= gamma_max and a positive step")
    return cfg


def _population(cp, base: Path, run_seed: int, seed_override) -> PopulationConfig:
    source = _get(cp, "population", "source", str, "gaussian").strip().lower()
    seed = _get(cp, "population", "seed", int, run_seed)
    if seed_override is not None:
        seed = seed_override
    has_path = cp.has_option("population", "path")
    if source == "csv":
        if not has_path:
            raise ConfigError("population.path", "csv source needs a path")
        p = base / cp.get("population", "path").strip()
        if not p.is_file():
            raise ConfigError("population.path", f"file not found: {p}")
        return PopulationConfig("csv", csv_path=p, seed=seed)
    if has_path:
        raise ConfigError("population.path", f"path given but source is {source!r}; use exactly one source")
    if source == "gaussian":
        for key in ("mu1", "mu0", "sigma1", "sigma0"):
            if not cp.has_option("population", key):
                raise ConfigError(f"population.{key}", "required for the gaussian source")
        n = _get(cp, "population", "n", int, 10_000)
        try:
            scen = GaussianScenario(
                mu1=_get(cp, "population", "mu1", parse_vector, None),
                mu0=_get(cp, "population", "mu0", parse_vector, None),
                sigma1=_get(cp, "population", "sigma1", parse_matrix, None),
                sigma0=_get(cp, "population", "sigma0", parse_matrix, None),
                n1=_get(cp, "population", "n1", int, n),
                n0=_get(cp, "population", "n0", int, n),
                scale=_get(cp, "population", "scale", float, 1.0),
                seed=seed,
            )
        except ValueError as exc:
            raise ConfigError("population", str(exc)) from None
        return PopulationConfig("gaussian", gaussian=scen, seed=seed)
    if source == "sigmoid":
        try:
            scen = SigmoidScenario(n=_get(cp, "population", "n", int, 150))
        except ValueError as exc:
            raise ConfigError("population.n", str(exc)) from None
        weights = _get(cp, "population", "weights", _tuple, (0.65, 0.35))
        return PopulationConfig("sigmoid", sigmoid=scen, sigmoid_weights=weights, seed=seed)
    raise ConfigError("population.source", f"unknown source {source!r}; expected gaussian, sigmoid or csv")
