"""Run configuration and its flat ``section.key=value`` text format."""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from hyperdrift.errors import ConfigError

ENV_PREFIX = "HYPERDRIFT_"


@dataclass
class RunConfig:
    # pseudo-labelling: top mu_p fraction of training reconstruction errors is Positive
    mu_p: float = 0.15
    # live concept-uncertainty gate; None = max training uncertainty
    mu_e: float | None = None
    # gate applied while pseudo-labelling during controller training
    label_mu_e: float = 0.1
    mu_o_fraction: float = 0.1
    mu_o: float | None = None  # absolute trigger value; overrides mu_o_fraction
    delta_l: int = 64
    t_max: int | None = None  # None = 50 * delta_l
    ema_beta: float = 0.9
    finetune_epochs: int = 50
    h_r: float = 0.2
    explained: float = 0.7
    latent_dim: int | None = None  # None = PCA sizing
    hidden: tuple[int, ...] | None = None  # encoder hidden widths; None = one auto layer
    iec_hidden: int = 16
    # evidence calibration after controller training; slope 0 disables it
    evidence_slope: float = 5.0
    evidence_level: float = 5.0
    embed_dim: int = 16
    share_dim: int = 32
    epochs: int = 1000
    iec_epochs: int = 200
    dsd_epochs: int = 200
    lr: float = 1e-2
    decay: float = 0.96
    batch_size: int = 64
    patience: int = 20
    tol: float = 1e-6
    seed: int = 0
    use_iec: bool = True
    use_dsd: bool = True
    use_ous: bool = True
    joint_dsd: bool = False
    use_true_labels: bool = False
    chunk_size: int = 1024

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("mu_p", "h_r"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if not 0.0 < self.explained <= 1.0:
            raise ConfigError("explained must lie in (0, 1]")
        if not 0.0 <= self.ema_beta <= 1.0:
            raise ConfigError("ema_beta must lie in [0, 1]")
        if self.mu_o_fraction <= 0:
            raise ConfigError("mu_o_fraction must be positive")
        if self.mu_e is not None and self.mu_e <= 0:
            raise ConfigError("mu_e must be positive")
        if self.label_mu_e <= 0:
            raise ConfigError("label_mu_e must be positive")
        if self.evidence_slope < 0:
            raise ConfigError("evidence_slope must be >= 0")
        for name in ("delta_l", "batch_size", "chunk_size", "iec_hidden", "embed_dim", "share_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("epochs", "iec_epochs", "dsd_epochs", "finetune_epochs", "patience"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.t_max is not None and self.t_max < 0:
            raise ConfigError("t_max must be >= 0")

    @property
    def effective_t_max(self) -> int:
        return 50 * self.delta_l if self.t_max is None else self.t_max

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for key, name in KEYS.items():
            lines.append(f"{key}={_format(getattr(self, name))}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


# dotted key -> field name
KEYS: dict[str, str] = {
    "seed": "seed",
    "scd.mu_p": "mu_p",
    "scd.explained": "explained",
    "scd.latent_dim": "latent_dim",
    "scd.hidden": "hidden",
    "iec.mu_e": "mu_e",
    "iec.label_mu_e": "label_mu_e",
    "iec.hidden": "iec_hidden",
    "iec.evidence_slope": "evidence_slope",
    "iec.evidence_level": "evidence_level",
    "iec.epochs": "iec_epochs",
    "iec.true_labels": "use_true_labels",
    "dsd.embed_dim": "embed_dim",
    "dsd.share_dim": "share_dim",
    "dsd.epochs": "dsd_epochs",
    "dsd.joint": "joint_dsd",
    "ous.mu_o_fraction": "mu_o_fraction",
    "ous.mu_o": "mu_o",
    "ous.delta_l": "delta_l",
    "ous.t_max": "t_max",
    "ous.ema_beta": "ema_beta",
    "ous.finetune_epochs": "finetune_epochs",
    "data.h_r": "h_r",
    "train.epochs": "epochs",
    "train.lr": "lr",
    "train.decay": "decay",
    "train.batch_size": "batch_size",
    "train.patience": "patience",
    "train.tol": "tol",
    "ablation.use_iec": "use_iec",
    "ablation.use_dsd": "use_dsd",
    "ablation.use_ous": "use_ous",
    "stream.chunk_size": "chunk_size",
}

_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _parse(name: str, raw: str):
    raw = raw.strip()
    typ = _TYPES[name]
    if raw.lower() in ("none", "max", "") and "None" in typ:
        return None
    try:
        if typ.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        if typ.startswith("tuple"):
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    raise ConfigError(f"unsupported field type for {name}")


def parse_config(text: str, base: RunConfig | None = None, env: dict | None = None) -> RunConfig:
    """Parse ``key=value`` lines (``#`` comments allowed) over ``base``.

    Environment variables ``HYPERDRIFT_<SECTION>__<KEY>`` override file values,
    e.g. ``HYPERDRIFT_OUS__DELTA_L=32``.
    """
    values = dataclasses.asdict(base or RunConfig())
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[KEYS[key]] = _parse(KEYS[key], raw)
    env = os.environ if env is None else env
    for key, name in KEYS.items():
        var = ENV_PREFIX + key.upper().replace(".", "__")
        if var in env:
            values[name] = _parse(name, env[var])
    if isinstance(values.get("hidden"), list):
        values["hidden"] = tuple(values["hidden"])
    return RunConfig(**values)


def load_config(path: str | Path | None, env: dict | None = None) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8") if path else ""
    return parse_config(text, env=env)
