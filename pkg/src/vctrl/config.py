"""Plain ``key = value`` run configurations.

Blank lines and ``#`` comments are ignored. Every key is optional; see
``KEYS`` for the full list. Example::

    scenario = optimize
    t_f = 84
    weights.case = B
    params.phi = 6
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, ParameterError
from .integrator import IntegratorConfig
from .model import ALPHA_MIN, ControlTriple, EpiParams, default_params
from .ocp import CHANNELS, CostWeights, scenario_weights
from .r0 import PAIRS

SCENARIOS = ("simulate", "r0-point", "r0-sweep", "optimize", "optimize-single", "compare")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "simulate"
    params: EpiParams = field(default_factory=default_params)
    t_f: float = 84.0
    n_intervals: int | None = None  # None: one per day
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    weights: CostWeights = field(default_factory=lambda: scenario_weights("A"))
    controls: ControlTriple = ControlTriple(0.0, 0.0, 1.0)
    alpha_min: float = ALPHA_MIN
    single: str | None = None
    r0_pair: tuple[str, str] = ("c_m", "c_A")
    r0_fixed: float | None = None
    r0_resolution: int = 101
    multistart: int = 0
    max_iter: int = 500
    output_dir: Path = Path("out")
    seed: int = 0

    @property
    def intervals(self) -> int:
        return self.n_intervals if self.n_intervals is not None else max(1, int(round(self.t_f)))


def _float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}", key=key) from None


def _str(key, raw):
    return raw


def _int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", key=key) from None


_PARAM_KEYS = {f"params.{f.name}" for f in fields(EpiParams)}
_INTEGRATOR_KEYS = {
    "integrator.method": _str,
    "integrator.rel_tol": _float,
    "integrator.abs_tol": _float,
    "integrator.step": _float,
    "integrator.output_points": _int,
}
_WEIGHT_KEYS = ("weights.gamma_D", "weights.gamma_S", "weights.gamma_L", "weights.gamma_E")
_SIMPLE_KEYS = {
    "scenario": _str,
    "t_f": _float,
    "n_intervals": _int,
    "alpha_min": _float,
    "single": _str,
    "r0.pair": _str,
    "r0.fixed": _float,
    "r0.resolution": _int,
    "multistart": _int,
    "solver.max_iter": _int,
    "output_dir": _str,
    "seed": _int,
    "weights.case": _str,
    "controls.c_A": _float,
    "controls.c_m": _float,
    "controls.alpha": _float,
}
KEYS = sorted(_PARAM_KEYS | set(_INTEGRATOR_KEYS) | set(_WEIGHT_KEYS) | set(_SIMPLE_KEYS))


def parse_lines(text: str) -> dict[str, tuple[int, str]]:
    """Split a document into ``{key: (line number, raw value)}``."""
    entries: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        entries[key] = (lineno, value)
    return entries


def _apply(obj, dotted: dict):
    """``replace`` with ``section.field`` keys, blaming the first key that fails."""
    for key, value in dotted.items():
        try:
            replace(obj, **{key.split(".", 1)[1]: value})
        except ParameterError as exc:
            raise ConfigError(str(exc), key=key) from None
    try:
        return replace(obj, **{k.split(".", 1)[1]: v for k, v in dotted.items()})
    except ParameterError as exc:
        raise ConfigError(str(exc), key=next(iter(dotted))) from None


def build_config(entries: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    """Apply ``{key: raw value}`` overrides on top of ``base`` and validate."""
    cfg = base or RunConfig()
    conv = {}
    for key, raw in entries.items():
        if key in _PARAM_KEYS or key in _WEIGHT_KEYS:
            conv[key] = _float(key, raw)
        elif key in _INTEGRATOR_KEYS:
            conv[key] = _INTEGRATOR_KEYS[key](key, raw)
        elif key in _SIMPLE_KEYS:
            conv[key] = _SIMPLE_KEYS[key](key, raw)
        else:
            raise ConfigError(f"unknown key {key!r}", key=key)

    changes = {}
    if "scenario" in conv:
        if conv["scenario"] not in SCENARIOS:
            raise ConfigError(f"unknown scenario {conv['scenario']!r}; expected one of {SCENARIOS}", key="scenario")
        changes["scenario"] = conv["scenario"]

    param_changes = {k: v for k, v in conv.items() if k in _PARAM_KEYS}
    if param_changes:
        changes["params"] = _apply(cfg.params, param_changes)

    if "t_f" in conv:
        if not conv["t_f"] > 0:
            raise ConfigError("must be > 0", key="t_f")
        changes["t_f"] = conv["t_f"]
    if "n_intervals" in conv:
        if conv["n_intervals"] < 1:
            raise ConfigError("must be >= 1", key="n_intervals")
        changes["n_intervals"] = conv["n_intervals"]

    integ = {k: v for k, v in conv.items() if k in _INTEGRATOR_KEYS}
    if integ:
        changes["integrator"] = _apply(cfg.integrator, integ)

    weights = cfg.weights
    if "weights.case" in conv:
        try:
            weights = scenario_weights(conv["weights.case"])
        except ParameterError as exc:
            raise ConfigError(str(exc), key="weights.case") from None
    explicit = {k: v for k, v in conv.items() if k in _WEIGHT_KEYS}
    if explicit:
        weights = _apply(weights, explicit)
    changes["weights"] = weights

    if "alpha_min" in conv:
        if not 0 < conv["alpha_min"] <= 1:
            raise ConfigError("must lie in (0, 1]", key="alpha_min")
        changes["alpha_min"] = conv["alpha_min"]
    alpha_min = changes.get("alpha_min", cfg.alpha_min)

    controls = cfg.controls._asdict()
    for name, (lo, hi) in {"c_A": (0.0, 1.0), "c_m": (0.0, 1.0), "alpha": (alpha_min, 1.0)}.items():
        key = f"controls.{name}"
        if key in conv:
            val = conv[key]
            if name == "alpha" and val <= 0:
                raise ConfigError("alpha must be > 0", key=key)
            if not lo <= val <= hi:
                raise ConfigError(f"must lie in [{lo:g}, {hi:g}], got {val:g}", key=key)
            controls[name] = val
    changes["controls"] = ControlTriple(**controls)

    if "single" in conv:
        if conv["single"] not in CHANNELS:
            raise ConfigError(f"expected one of {sorted(CHANNELS)}", key="single")
        changes["single"] = conv["single"]
    if "r0.pair" in conv:
        pair = tuple(s.strip() for s in conv["r0.pair"].split(","))
        if pair not in PAIRS:
            raise ConfigError(f"expected one of {[','.join(p) for p in PAIRS]}", key="r0.pair")
        changes["r0_pair"] = pair
    if "r0.fixed" in conv:
        changes["r0_fixed"] = conv["r0.fixed"]
    if "r0.resolution" in conv:
        if conv["r0.resolution"] < 2:
            raise ConfigError("must be >= 2", key="r0.resolution")
        changes["r0_resolution"] = conv["r0.resolution"]
    if "multistart" in conv:
        if conv["multistart"] < 0:
            raise ConfigError("must be >= 0", key="multistart")
        changes["multistart"] = conv["multistart"]
    if "solver.max_iter" in conv:
        if conv["solver.max_iter"] < 1:
            raise ConfigError("must be >= 1", key="solver.max_iter")
        changes["max_iter"] = conv["solver.max_iter"]
    if "output_dir" in conv:
        changes["output_dir"] = Path(conv["output_dir"])
    if "seed" in conv:
        changes["seed"] = conv["seed"]
    return replace(cfg, **changes)


def parse_config(text: str) -> RunConfig:
    """Parse a configuration document; missing keys take their defaults."""
    entries = parse_lines(text)
    raw = {k: v for k, (_, v) in entries.items()}
    try:
        return build_config(raw)
    except ConfigError as exc:
        if exc.key in entries and exc.line is None:
            raise ConfigError(exc.detail, line=entries[exc.key][0], key=exc.key) from None
        raise


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
