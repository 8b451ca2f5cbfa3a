"""Scenario configuration: an INI-style ``key = value`` file.

Relative paths are resolved against the directory holding the config file.
Disease parameters may be numbers or the word ``estimate``.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .epi import MODES, SCREENING
from .errors import ConfigError, ParseError
from .est import FITTERS, TRAJECTORY, SearchSpec

STRATEGIES = ("network", "infection_rate", "population", "none")
ESTIMATE = "estimate"


@dataclass
class ScenarioConfig:
    distances: Path
    populations: Path
    cases: Path | None
    alpha: float | str
    beta: float | str
    gamma: float | str
    lam: float | str
    t0: int
    T: int
    start: str | None
    budget: float | None = None
    budget_fraction: float | None = None
    a_max: float | None = None
    mode: str = SCREENING
    strategies: tuple[str, ...] = STRATEGIES
    estimator: str = TRAJECTORY
    fairness_delta: float = 0.0
    iterations: int = 200
    polish: bool = True
    delta_a: float = 0.17
    d_h: float = 5.2
    d_r: float = 15.0
    search: SearchSpec = field(default_factory=SearchSpec)
    out_dir: Path = Path("out")
    source: Path | None = None

    def __post_init__(self):
        if self.T < self.t0:
            raise ConfigError(f"T={self.T} precedes t0={self.t0}")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}; choose from {list(STRATEGIES)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.estimator not in FITTERS:
            raise ConfigError(f"estimator must be one of {sorted(FITTERS)}")
        if (self.budget is None) == (self.budget_fraction is None):
            raise ConfigError("give exactly one of budget or budget_fraction")
        for name in ("alpha", "beta", "gamma", "lam"):
            v = getattr(self, name)
            if isinstance(v, str) and v != ESTIMATE:
                raise ConfigError(f"{name} must be a number or {ESTIMATE!r}")
        for p in (self.distances, self.populations, self.cases):
            if p is not None and not Path(p).exists():
                raise ParseError("file not found", path=p)

    @property
    def needs_fit(self) -> bool:
        return ESTIMATE in (self.alpha, self.lam)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        for k, v in d.items():
            if isinstance(v, Path):
                d[k] = str(v)
        d["strategies"] = list(self.strategies)
        return d


def _number_or_estimate(section, key, default=None):
    raw = section.get(key, fallback=None)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing parameter {key!r}")
        return default
    raw = raw.strip()
    if raw.lower() == ESTIMATE:
        return ESTIMATE
    try:
        if "/" in raw:
            num, den = raw.split("/", 1)
            return float(num) / float(den)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} = {raw!r} is neither a number nor {ESTIMATE!r}") from None


def _opt_float(section, key):
    raw = section.get(key, fallback=None)
    if raw is None or raw.strip() == "":
        return None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} = {raw!r} is not a number") from None


def _opt_int(section, key):
    value = _opt_float(section, key)
    if value is None:
        return None
    if value != int(value):
        raise ConfigError(f"{key} must be a whole number")
    return int(value)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ParseError("config file not found", path=path) from None
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], path=path) from None
    base = path.parent

    def section(name):
        return parser[name] if parser.has_section(name) else parser[parser.default_section]

    def resolve(raw):
        if raw is None or raw.strip() == "":
            return None
        p = Path(raw.strip())
        return p if p.is_absolute() else base / p

    data = section("data")
    params = section("params")
    clinical = section("clinical")
    horizon = section("horizon")
    alloc = section("allocation")
    est = section("estimation")
    output = section("output")

    try:
        search = SearchSpec(
            alpha_min=est.getfloat("alpha_min", 0.01),
            alpha_max=est.getfloat("alpha_max", 0.99),
            lambda_min=est.getfloat("lambda_min", 0.0),
            lambda_max=_opt_float(est, "lambda_max"),
            grid_size=est.getint("grid_size", 20),
            refinement_rounds=est.getint("refinement_rounds", 2),
            smoothing_window=est.getint("smoothing_window", 1),
            window=_opt_int(est, "window"),
        )
        strategies = tuple(s.strip() for s in alloc.get("strategies", ",".join(STRATEGIES)).split(",") if s.strip())
        distances = resolve(data.get("distances"))
        populations = resolve(data.get("populations"))
        if distances is None or populations is None:
            raise ConfigError("[data] needs distances and populations")
        return ScenarioConfig(
            distances=distances,
            populations=populations,
            cases=resolve(data.get("cases")),
            alpha=_number_or_estimate(params, "alpha"),
            beta=_number_or_estimate(params, "beta"),
            gamma=_number_or_estimate(params, "gamma"),
            lam=_number_or_estimate(params, "lambda"),
            t0=horizon.getint("t0", 1),
            T=horizon.getint("T", 30),
            start=horizon.get("start", None),
            budget=_opt_float(alloc, "budget"),
            budget_fraction=_opt_float(alloc, "budget_fraction"),
            a_max=_opt_float(alloc, "a_max"),
            mode=alloc.get("mode", SCREENING).strip(),
            strategies=strategies,
            estimator=est.get("estimator", TRAJECTORY).strip(),
            fairness_delta=alloc.getfloat("fairness_delta", 0.0),
            iterations=alloc.getint("iterations", 200),
            polish=alloc.getboolean("polish", True),
            delta_a=clinical.getfloat("delta_a", 0.17),
            d_h=clinical.getfloat("d_h", 5.2),
            d_r=clinical.getfloat("d_r", 15.0),
            search=search,
            out_dir=resolve(output.get("dir", "out")),
            source=path,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
