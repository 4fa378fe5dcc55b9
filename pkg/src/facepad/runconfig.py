"""Run configuration: defaults, ``key = value`` files, env seed, flag overrides."""
from __future__ import annotations

import dataclasses
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .data.preprocess import PreprocessSpec
from .errors import ParseError, ValidationError
from .model.config import ModelConfig
from .nn.optim import OptimizerState

SEED_ENV = "FACEPAD_SEED"
AGGREGATES = ("frame", "video", "both")


@dataclass
class RunConfig:
    seed: int = 0
    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-3
    decay: float = 1e-3
    momentum: float = 0.9
    decay_mode: str = "inverse-time"
    margin: int = 44
    workers: int = 1
    aggregate: str = "frame"
    tiny: bool = False
    model: dict = field(default_factory=dict)
    manifest: str | None = None
    root: str | None = None
    cache: str | None = None
    checkpoint: str | None = None
    log: str | None = None
    out: str | None = None

    def validate(self) -> "RunConfig":
        if self.batch_size < 2:
            raise ValidationError("batch_size must be >= 2")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.aggregate not in AGGREGATES:
            raise ValidationError(f"aggregate must be one of {AGGREGATES}")
        try:
            self.optimizer()
            self.model_config()
            self.preprocess_spec()
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        return self

    def model_config(self) -> ModelConfig:
        base = ModelConfig.tiny() if self.tiny else ModelConfig()
        overrides = dict(self.model)
        overrides.setdefault("seed", self.seed)
        try:
            return base.replace(**overrides)
        except TypeError as exc:
            raise ValidationError(f"model override: {exc}") from None

    def preprocess_spec(self) -> PreprocessSpec:
        return PreprocessSpec(self.margin, self.model_config().input_size)

    def optimizer(self) -> OptimizerState:
        return OptimizerState(self.learning_rate, self.decay, self.momentum, self.decay_mode)

    def to_dict(self) -> dict:
        """Effective configuration with the resolved model config."""
        d = dataclasses.asdict(self)
        d["model"] = self.model_config().to_dict()
        return d


_RUN_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_MODEL_TYPES = {f.name: f.type for f in dataclasses.fields(ModelConfig)}


def _convert(raw: str, kind: str, key: str):
    raw = raw.strip()
    try:
        if kind in ("int",):
            return int(raw)
        if kind in ("float",):
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind.startswith("tuple"):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind.startswith("str | None"):
            return raw or None
        return raw
    except ValueError as exc:
        raise ParseError(f"{key}: {exc}") from None


def _kind(t) -> str:
    return t if isinstance(t, str) else getattr(t, "__name__", str(t))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{source}:{n}: empty key")
        if key in out:
            raise ParseError(f"{source}:{n}: duplicate key {key!r}")
        out[key] = value
    return out


def apply_settings(cfg: RunConfig, settings: dict[str, typing.Any], source: str) -> RunConfig:
    """Apply raw (string) or typed settings; ``model.<field>`` keys override the model."""
    for key, value in settings.items():
        if key.startswith("model."):
            name = key[len("model."):]
            if name not in _MODEL_TYPES:
                raise ValidationError(f"{source}: unknown model key {name!r}")
            kind = _kind(_MODEL_TYPES[name])
            cfg.model[name] = _convert(value, kind, key) if isinstance(value, str) else value
        elif key in _RUN_TYPES and key != "model":
            kind = _kind(_RUN_TYPES[key])
            setattr(cfg, key, _convert(value, kind, key) if isinstance(value, str) else value)
        else:
            raise ValidationError(f"{source}: unknown config key {key!r}")
    return cfg


def resolve(config_file=None, flags: dict | None = None, env=None) -> RunConfig:
    """Defaults, then the env seed, then the config file, then explicit flags."""
    env = os.environ if env is None else env
    cfg = RunConfig()
    if env.get(SEED_ENV):
        try:
            cfg.seed = int(env[SEED_ENV])
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer") from None
    if config_file is not None:
        path = Path(config_file)
        if not path.is_file():
            raise FileNotFoundError(f"config file {path} not found")
        apply_settings(cfg, parse_config_text(path.read_text(encoding="utf-8"), str(path)), str(path))
    apply_settings(cfg, {k: v for k, v in (flags or {}).items() if v is not None}, "flags")
    return cfg.validate()
