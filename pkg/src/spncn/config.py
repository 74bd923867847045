"""Experiment configuration: a flat ``key = value`` text format.

Lines look like ``alpha_u = 0.0025``; ``#`` starts a comment.  Tuples are
comma separated (``layers = 1000, 1000``), booleans are ``true``/``false``,
and ``task_pairs`` is written ``0-1, 2-3, ...``.  Unknown keys are errors.
The resolved config written next to every run lists every field, so a run
can be reproduced from its output directory alone.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .encode import EncoderConfig
from .exceptions import ConfigError
from .neuron import FilterMode, LifConfig, TraceConfig

TASKS = ("xo", "bouncing", "classify", "semi", "continual")
MODELS = ("spncn", "snn_bfa", "snn_drtp")
DATA_FORMATS = ("idx", "csv", "mnist5k")
REQUIRED = ("task", "model", "layers")


@dataclass
class ExperimentConfig:
    task: str = "classify"
    model: str = "spncn"
    layers: tuple = (1000, 1000, 1000, 1000)   # spiking layer sizes, sensory size is inferred

    # neuron
    dt: float = 0.25
    tau_m: float = 20.0
    R_m: float = 1.0
    gamma_m: float = 1.0
    v_thr: float = 0.5
    v_reset: float = 0.0
    t_r: float = 1.0
    tau_f: float = 20.0
    trace_mode: str = "trace"

    # network / learning
    tau_J: float = 10.0
    gamma_J: float = 0.0
    beta: float = 1.0
    alpha_u: float = 0.0025
    lam: float = 0.0
    w_bound: float = 20.0
    w_max: float = 1.0
    w_min: float = -1.0
    init_scale: float = 0.05
    mirror_init: bool = False
    reuse_error_delta: bool = True
    fb_scale: float = 1.0

    # encoding and presentation
    K: float = 63.75
    max_pixel: float = 255.0
    T_st: float = 100.0
    T_ist: float = 0.0
    T_test: float = 100.0
    hard_reset_per_sample: bool = False

    # data
    data_format: str = "idx"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    n_classes: int = 10
    n_train: int = 0      # 0 = whole training file
    n_test: int = 0       # 0 = whole test file
    p_u: float = 0.0
    p_f: float = 0.05
    task_pairs: tuple = ((0, 1), (2, 3), (4, 5), (6, 7), (8, 9))

    # bouncing balls / x-o
    frames: int = 2000
    learn_frames: int = 1000
    n_balls: int = 3
    ball_radius: float = 2.0
    pse_alpha: float = 0.995
    xo_train: int = 20

    # run
    seed: int = 0
    trials: int = 1
    out: str = "runs/out"
    export_embeddings: bool = False
    embed_layer: int = 0  # 0 = topmost layer

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task: expected one of {TASKS}, got {self.task!r}")
        if self.model not in MODELS:
            raise ConfigError(f"model: expected one of {MODELS}, got {self.model!r}")
        if self.data_format not in DATA_FORMATS:
            raise ConfigError(f"data_format: expected one of {DATA_FORMATS}, got {self.data_format!r}")
        if self.trace_mode not in {m.value for m in FilterMode}:
            raise ConfigError(f"trace_mode: expected 'trace' or 'low_pass', got {self.trace_mode!r}")
        if not self.layers or any(int(n) <= 0 for n in self.layers):
            raise ConfigError("layers: need at least one positive layer size")
        if self.task == "bouncing" and self.model != "spncn":
            raise ConfigError("bouncing: only the spncn model predicts frames")
        if not 0.0 <= self.p_u <= 1.0 or not 0.0 <= self.p_f <= 1.0:
            raise ConfigError("p_u and p_f must lie in [0, 1]")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.T_st <= 0 or self.T_ist < 0 or self.T_test <= 0:
            raise ConfigError("presentation times must be positive (T_ist may be 0)")

    # -- derived objects ------------------------------------------------------

    def lif_config(self) -> LifConfig:
        return LifConfig(dt=self.dt, tau_m=self.tau_m, R_m=self.R_m, gamma_m=self.gamma_m,
                         v_thr=self.v_thr, v_reset=self.v_reset, t_r=self.t_r)

    def trace_config(self) -> TraceConfig:
        return TraceConfig.from_tau(self.tau_f, self.dt, FilterMode(self.trace_mode))

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(K=self.K, dt=self.dt, max_pixel=self.max_pixel)

    @property
    def kappa(self) -> float:
        return math.exp(-self.dt / self.tau_J)

    # -- text round trip ------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join("-".join(str(c) for c in pair) for pair in value)
        return ", ".join(str(v) for v in value)
    return str(value)


def _convert(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {raw!r}")
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if name == "task_pairs":
                return tuple(tuple(int(c) for c in p.split("-")) for p in parts)
            return tuple(int(p) for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def parse_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = raw
    return values


def _resolve_path(path) -> tuple[str, str]:
    path = str(path)
    if path.startswith("preset:"):
        name = path.split(":", 1)[1]
        ref = resources.files("spncn") / "presets" / f"{name}.cfg"
        if not ref.is_file():
            raise ConfigError(f"no preset named {name!r}")
        return ref.read_text(), path
    return Path(path).read_text(), path


def build_config(values: dict, require: bool = True) -> ExperimentConfig:
    defaults = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    if require:
        missing = [k for k in REQUIRED if k not in values]
        if missing:
            raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    typed = {}
    for k, raw in values.items():
        default = getattr(defaults, k)
        typed[k] = raw if not isinstance(raw, str) or isinstance(default, str) else _convert(k, raw, default)
    return ExperimentConfig(**typed)


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file (or ``preset:<name>``) and apply flag overrides."""
    values = {}
    if path is not None:
        text, source = _resolve_path(path)
        values = parse_text(text, source)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values, require=path is not None)


def preset_names() -> list[str]:
    root = resources.files("spncn") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))
