"""Experiment configuration: a flat ``key = value`` text format.

One key per line, ``#`` starts a comment, dotted keys address the
``selection``, ``aggregation``, ``ddpg`` and ``perr`` blocks. Unknown keys
and duplicates are rejected.
"""

import math
from dataclasses import dataclass, field, replace

from .ddpg import DdpgHyper
from .fed import SelectionConfig
from .sim.mac import DISTANCE_RANGE

SCENARIOS = ("static", "dynamic", "bianchi-validate")
MODES = ("efrl", "afrl", "drl", "beb", "rtscts", "fixed")
AGENT_MODES = ("efrl", "afrl", "drl")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    scenario: str
    n_stations: int
    traffic_rate_mbps: float = 10.0
    n_fixed_traffic: int | None = None
    n_random_traffic: int | None = None
    random_rate_min_mbps: float = 0.0
    random_rate_max_mbps: float | None = None  # None -> 2 * traffic_rate_mbps
    distances: list | None = None  # None -> uniform in [0.5, 30] from the seed
    sim_time_s: float = 20.0
    step_ms: float = 20.0
    fl_period_s: float = 2.5
    mode: str = "efrl"
    seed: int = 0
    fixed_cw: int = 15
    warmup_frac: float = 0.25
    delay_limit_ms: float = 20.0
    retry_limit: int = 7
    queue_limit: int | None = None
    payload_bytes: int = 1472
    ampdu_max: int = 64
    max_ppdu_us: int = 5484
    data_rate_mbps: float = 240.0  # effective rate; 120 saturates the static cell
    perr_min: float = 0.01
    perr_max: float = 0.15
    perr_gamma: float = 2.0
    lam: float = 1.0
    normalize: bool = True
    top_k: str | int = "half"
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    ddpg: DdpgHyper = field(default_factory=DdpgHyper)
    out_dir: str = "results"

    @property
    def step_us(self):
        return _to_us(self.step_ms * 1e3)

    @property
    def fl_period_us(self):
        return _to_us(self.fl_period_s * 1e6)

    @property
    def sim_time_us(self):
        return _to_us(self.sim_time_s * 1e6)

    @property
    def n_windows(self):
        return self.sim_time_us // self.step_us

    @property
    def windows_per_round(self):
        return self.fl_period_us // self.step_us

    @property
    def n_rounds(self):
        return self.sim_time_us // self.fl_period_us

    def resolved_top_k(self):
        if self.top_k == "all":
            return None
        if self.top_k == "half":
            return math.ceil(self.n_stations / 2)
        return int(self.top_k)

    @property
    def run_id(self):
        return f"{self.scenario}-{self.mode}-s{self.seed}"

    def with_overrides(self, **kw):
        cfg = replace(self, **kw)
        validate(cfg)
        return cfg


def _to_us(value):
    us = round(value)
    if abs(us - value) > 1e-6:
        raise ConfigError("timing", f"{value} us is not a whole number of microseconds")
    return us


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if text.lower() in ("none", "inf", "unlimited") else int(text)


def _opt_float(text):
    return None if text.lower() in ("none", "auto") else float(text)


def _distances(text):
    if text.lower() in ("random", "uniform"):
        return None
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _top_k(text):
    low = text.lower()
    return low if low in ("all", "half") else int(text)


def _hidden(text):
    return tuple(int(x) for x in text.replace(";", ",").split(","))


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


# key -> (block, attribute, parser)
KEYS = {
    "scenario": (None, "scenario", _choice(SCENARIOS)),
    "n_stations": (None, "n_stations", int),
    "traffic_rate_mbps": (None, "traffic_rate_mbps", float),
    "n_fixed_traffic": (None, "n_fixed_traffic", int),
    "n_random_traffic": (None, "n_random_traffic", int),
    "random_rate_min_mbps": (None, "random_rate_min_mbps", float),
    "random_rate_max_mbps": (None, "random_rate_max_mbps", _opt_float),
    "distances": (None, "distances", _distances),
    "sim_time_s": (None, "sim_time_s", float),
    "step_ms": (None, "step_ms", float),
    "fl_period_s": (None, "fl_period_s", float),
    "mode": (None, "mode", _choice(MODES)),
    "seed": (None, "seed", int),
    "fixed_cw": (None, "fixed_cw", int),
    "warmup_frac": (None, "warmup_frac", float),
    "delay_limit_ms": (None, "delay_limit_ms", float),
    "retry_limit": (None, "retry_limit", int),
    "queue_limit": (None, "queue_limit", _opt_int),
    "payload_bytes": (None, "payload_bytes", int),
    "ampdu_max": (None, "ampdu_max", int),
    "max_ppdu_us": (None, "max_ppdu_us", int),
    "data_rate_mbps": (None, "data_rate_mbps", float),
    "out_dir": (None, "out_dir", str),
    "perr.p_min": (None, "perr_min", float),
    "perr.p_max": (None, "perr_max", float),
    "perr.gamma": (None, "perr_gamma", float),
    "aggregation.lambda": (None, "lam", float),
    "aggregation.normalize": (None, "normalize", _bool),
    "selection.top_k": (None, "top_k", _top_k),
    "selection.w1": ("selection", "w1", float),
    "selection.w2": ("selection", "w2", float),
    "selection.d_max": ("selection", "d_max", float),
    "selection.min_samples": ("selection", "min_samples", int),
    "selection.pruning": ("selection", "pruning", _bool),
    "ddpg.lr": ("ddpg", "lr", float),
    "ddpg.tau": ("ddpg", "tau", float),
    "ddpg.batch": ("ddpg", "batch", int),
    "ddpg.gamma": ("ddpg", "gamma", float),
    "ddpg.noise_scale": ("ddpg", "noise_scale", float),
    "ddpg.noise_decay": ("ddpg", "noise_decay", float),
    "ddpg.buffer": ("ddpg", "buffer", int),
    "ddpg.hidden": ("ddpg", "hidden", _hidden),
    "ddpg.refresh_targets": ("ddpg", "refresh_targets", _bool),
}

REQUIRED = ("scenario", "n_stations")


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "given more than once")
        try:
            values[key] = KEYS[key][2](value)
        except ValueError as exc:
            raise ConfigError(key, f"bad value {value!r} ({exc})") from None
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(key, "required key missing")
    if values["scenario"] != "bianchi-validate" and "traffic_rate_mbps" not in values:
        raise ConfigError("traffic_rate_mbps", "required for static and dynamic scenarios")
    return build_config(values)


def build_config(values):
    top, blocks = {}, {"selection": {}, "ddpg": {}}
    for key, value in values.items():
        block, attr, _ = KEYS[key]
        (blocks[block] if block else top)[attr] = value
    try:
        top["selection"] = SelectionConfig(**blocks["selection"])
    except ValueError as exc:
        raise ConfigError("selection", str(exc)) from None
    try:
        top["ddpg"] = DdpgHyper(**blocks["ddpg"])
    except ValueError as exc:
        raise ConfigError("ddpg", str(exc)) from None
    cfg = ExperimentConfig(**top)
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg.scenario not in SCENARIOS:
        raise ConfigError("scenario", f"expected one of {SCENARIOS}")
    if cfg.mode not in MODES:
        raise ConfigError("mode", f"expected one of {MODES}")
    if cfg.n_stations < 1:
        raise ConfigError("n_stations", "must be at least 1")
    for key, val in (("step_ms", cfg.step_ms), ("fl_period_s", cfg.fl_period_s),
                     ("sim_time_s", cfg.sim_time_s)):
        if val <= 0:
            raise ConfigError(key, "must be positive")
    step, period, total = cfg.step_us, cfg.fl_period_us, cfg.sim_time_us
    if period % step:
        raise ConfigError("fl_period_s", f"{cfg.fl_period_s} s is not a multiple of step_ms={cfg.step_ms}")
    if total % step:
        raise ConfigError("sim_time_s", f"{cfg.sim_time_s} s is not a multiple of step_ms={cfg.step_ms}")
    if cfg.traffic_rate_mbps < 0:
        raise ConfigError("traffic_rate_mbps", "must be non-negative")
    if cfg.scenario == "dynamic":
        if cfg.n_fixed_traffic is None or cfg.n_random_traffic is None:
            raise ConfigError("n_fixed_traffic", "dynamic scenario needs n_fixed_traffic and n_random_traffic")
        if cfg.n_fixed_traffic + cfg.n_random_traffic != cfg.n_stations:
            raise ConfigError("n_random_traffic", "n_fixed_traffic + n_random_traffic must equal n_stations")
        hi = cfg.random_rate_max_mbps
        if hi is not None and not 0 <= cfg.random_rate_min_mbps <= hi:
            raise ConfigError("random_rate_max_mbps", "need 0 <= min <= max")
    if cfg.distances is not None:
        if len(cfg.distances) != cfg.n_stations:
            raise ConfigError("distances", f"expected {cfg.n_stations} values, got {len(cfg.distances)}")
        lo, hi = DISTANCE_RANGE
        bad = [d for d in cfg.distances if not lo <= d <= hi]
        if bad:
            raise ConfigError("distances", f"{bad} outside [{lo}, {hi}] m")
    if cfg.fixed_cw not in (15, 31, 63, 127, 255, 511, 1023):
        raise ConfigError("fixed_cw", "must be one of 15, 31, ..., 1023")
    if not 0.0 <= cfg.warmup_frac < 1.0:
        raise ConfigError("warmup_frac", "must lie in [0, 1)")
    if cfg.retry_limit < 0:
        raise ConfigError("retry_limit", "must be non-negative")
    if cfg.queue_limit is not None and cfg.queue_limit < 1:
        raise ConfigError("queue_limit", "must be positive or 'none'")
    if cfg.selection.min_samples < cfg.ddpg.batch and cfg.mode in ("efrl", "afrl") and cfg.selection.pruning:
        raise ConfigError("selection.min_samples", "must be at least ddpg.batch")
    if cfg.ampdu_max < 1:
        raise ConfigError("ampdu_max", "must be at least 1")
    if cfg.payload_bytes < 1:
        raise ConfigError("payload_bytes", "must be positive")
    if cfg.delay_limit_ms <= 0:
        raise ConfigError("delay_limit_ms", "must be positive")


def to_text(cfg):
    """Render a config back to the key-value format (round-trips through parse)."""
    lines = []
    for key, (block, attr, _) in KEYS.items():
        value = getattr(getattr(cfg, block), attr) if block else getattr(cfg, attr)
        if value is None:
            if key == "distances":
                value = "random"
            elif key == "random_rate_max_mbps":
                value = "auto"
            elif key in ("n_fixed_traffic", "n_random_traffic"):
                continue
            else:
                value = "none"
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
