"""Model and training hyperparameters, plus the run-config file loader."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 32
    n_heads: int = 4
    window: int = 8
    leff_ratio: int = 4
    n_sab: int = 2
    n_dab: int = 2
    kcnn_channels: int = 32
    kcnn_layers: int = 5
    enable_sab: bool = True
    enable_dab: bool = True
    enable_locality: bool = True
    # LayerNorm before the attention branch as well as before LeFF
    pre_attn_norm: bool = True
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.embed_dim < 1 or self.n_heads < 1 or self.embed_dim % self.n_heads:
            raise ConfigError(f"embed_dim={self.embed_dim} must be a positive multiple of n_heads={self.n_heads}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.kcnn_layers < 2:
            raise ConfigError(f"kcnn_layers must be >= 2, got {self.kcnn_layers}")
        if min(self.leff_ratio, self.kcnn_channels) < 1 or min(self.n_sab, self.n_dab) < 0:
            raise ConfigError("leff_ratio, kcnn_channels must be positive; block counts non-negative")
        if self.ln_eps <= 0:
            raise ConfigError(f"ln_eps must be positive, got {self.ln_eps}")

    @property
    def has_transformer(self) -> bool:
        return (self.enable_sab and self.n_sab > 0) or (self.enable_dab and self.n_dab > 0)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    lr: float = 1e-3
    sched_step: int = 40
    sched_gamma: float = 0.1
    mode: str = "ssl"
    seed: int = 0
    accel: int = 4
    batch_size: int = 1
    rho: float = 0.6
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.mode not in ("ssl", "supervised"):
            raise ConfigError(f"mode must be 'ssl' or 'supervised', got {self.mode!r}")
        if self.batch_size != 1:
            raise ConfigError("only batch_size=1 (one slice per step) is supported")
        if self.lr <= 0 or self.sched_step < 1 or not 0 < self.sched_gamma <= 1:
            raise ConfigError("lr must be > 0, sched_step >= 1, sched_gamma in (0, 1]")
        if self.accel < 1:
            raise ConfigError(f"accel must be >= 1, got {self.accel}")
        if not 0 < self.rho < 1:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return {"model": dataclasses.asdict(self.model), "train": dataclasses.asdict(self.train)}


def _build(cls, values: dict, section: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unrecognized {section} keys: {', '.join(unknown)}")
    out = {}
    for key, value in values.items():
        want = known[key].type
        if want in ("bool", bool) and not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be true/false, got {value!r}")
        if want in ("int", int) and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        if want in ("float", float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
            value = float(value)
        out[key] = value
    return cls(**out)


def model_config_from_dict(d: dict) -> ModelConfig:
    return _build(ModelConfig, d, "model")


def train_config_from_dict(d: dict) -> TrainConfig:
    return _build(TrainConfig, d, "train")


def load_run_config(path=None, model_overrides: dict | None = None,
                    train_overrides: dict | None = None) -> RunConfig:
    """Defaults, then the JSON file, then command-line overrides.

    The file holds optional ``"model"`` and ``"train"`` objects whose keys are
    the :class:`ModelConfig` / :class:`TrainConfig` field names.
    """
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        extra = sorted(set(doc) - {"model", "train"})
        if extra:
            raise ConfigError(f"unrecognized config sections: {', '.join(extra)}")
    model = dict(doc.get("model", {}))
    train = dict(doc.get("train", {}))
    model.update(model_overrides or {})
    train.update(train_overrides or {})
    return RunConfig(model_config_from_dict(model), train_config_from_dict(train))
