"""Flat ``key = value`` simulation configuration.

Lines may hold several comma-separated assignments; ``#`` starts a comment.
Omitted keys take the defaults of :class:`SimConfig`, which are the shipped
``paper-calibration`` preset. Float values accept ``exp(<number>)``.
"""

from __future__ import annotations

import dataclasses
import math
import re
import warnings
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .errors import ParseError
from .policies import PolicyKind

PRESET_NAME = "paper-calibration"


@dataclass(frozen=True)
class SimConfig:
    # deployment area, meters
    width: float = 20.0
    height: float = 20.0
    n_devices: int = 100
    # event process and sensing
    alpha: float = 0.05
    eta: float = 1.0
    psi: float = 1.0
    i_min: float = math.exp(-2)
    # energy, integer units
    e_max: int = 100
    e_tx: int = 10
    e_idle: int = 1
    e_h: int = 1
    lambda_tau: float = 1.0
    # policy
    d_max: float = 4.0
    k_neighbors: int = 5
    policy: PolicyKind = PolicyKind.KNN_CLUSTER
    wakeup_sensing: str = "deterministic"
    geometry_mode: str = "oracle-geometry"
    # Monte Carlo
    tti_count: int = 10_000
    burn_in: int | None = None  # None: 10 x longest DRX cycle
    n_runs: int = 100
    base_seed: int = 2024

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)


_INT_KEYS = {"n_devices", "e_max", "e_tx", "e_idle", "e_h", "k_neighbors", "tti_count", "n_runs", "base_seed"}
_FLOAT_KEYS = {"width", "height", "alpha", "eta", "psi", "i_min", "lambda_tau", "d_max"}
_CHOICES = {
    "wakeup_sensing": ("deterministic", "bernoulli"),
    "geometry_mode": ("oracle-geometry", "estimated"),
}
KEYS = [f.name for f in fields(SimConfig)]

_EXP = re.compile(r"^exp\(\s*([-+0-9.eE]+)\s*\)$")


def validate(cfg: SimConfig) -> None:
    def need(ok, key, msg):
        if not ok:
            raise ParseError(msg, key=key)

    need(cfg.width > 0, "width", f"must be > 0, got {cfg.width}")
    need(cfg.height > 0, "height", f"must be > 0, got {cfg.height}")
    need(cfg.n_devices >= 1, "n_devices", f"must be >= 1, got {cfg.n_devices}")
    need(0.0 <= cfg.alpha <= 1.0, "alpha", f"must lie in [0, 1], got {cfg.alpha}")
    need(cfg.eta > 0, "eta", f"must be > 0, got {cfg.eta}")
    need(cfg.psi > 0, "psi", f"must be > 0, got {cfg.psi}")
    need(0 < cfg.i_min <= cfg.psi, "i_min", f"must lie in (0, psi={cfg.psi}], got {cfg.i_min}")
    need(cfg.e_max >= 1, "e_max", f"must be >= 1, got {cfg.e_max}")
    need(cfg.e_tx >= 1, "e_tx", f"must be >= 1, got {cfg.e_tx}")
    need(cfg.e_idle >= 0, "e_idle", f"must be >= 0, got {cfg.e_idle}")
    need(cfg.e_h >= 1, "e_h", f"must be >= 1, got {cfg.e_h}")
    need(cfg.lambda_tau > 0, "lambda_tau", f"must be > 0, got {cfg.lambda_tau}")
    need(cfg.d_max > 0, "d_max", f"must be > 0, got {cfg.d_max}")
    need(cfg.k_neighbors >= 1, "k_neighbors", f"must be >= 1, got {cfg.k_neighbors}")
    need(isinstance(cfg.policy, PolicyKind), "policy", f"must be a PolicyKind, got {cfg.policy!r}")
    for key, allowed in _CHOICES.items():
        need(getattr(cfg, key) in allowed, key, f"must be one of {allowed}, got {getattr(cfg, key)!r}")
    need(cfg.tti_count >= 0, "tti_count", f"must be >= 0, got {cfg.tti_count}")
    need(cfg.burn_in is None or cfg.burn_in >= 0, "burn_in", f"must be >= 0 or 'auto', got {cfg.burn_in}")
    need(cfg.n_runs >= 1, "n_runs", f"must be >= 1, got {cfg.n_runs}")
    need(cfg.base_seed >= 0, "base_seed", f"must be >= 0, got {cfg.base_seed}")
    if cfg.e_tx > cfg.e_max:
        warnings.warn(f"e_tx={cfg.e_tx} exceeds e_max={cfg.e_max}: no device can ever transmit", stacklevel=3)


def _convert(key: str, raw: str, line: int | None):
    try:
        if key in _INT_KEYS:
            if not re.fullmatch(r"[-+]?\d+", raw):
                raise ValueError
            return int(raw)
        if key in _FLOAT_KEYS:
            m = _EXP.match(raw)
            return math.exp(float(m.group(1))) if m else float(raw)
        if key == "burn_in":
            if raw.lower() == "auto":
                return None
            if not re.fullmatch(r"[-+]?\d+", raw):
                raise ValueError
            return int(raw)
        if key == "policy":
            return PolicyKind.parse(raw)
        return raw
    except ValueError:
        kind = "integer" if key in _INT_KEYS else "number" if key in _FLOAT_KEYS else "value"
        raise ParseError(f"expected {kind}, got {raw!r}", key=key, line=line) from None


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    values: dict[str, object] = {}
    where: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for part in line.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ParseError(f"expected 'key = value', got {part!r}", line=lineno)
            key, raw = (s.strip() for s in part.split("=", 1))
            if key not in KEYS:
                raise ParseError("unknown key", key=key, line=lineno)
            if key in values:
                raise ParseError("duplicate key", key=key, line=lineno)
            values[key] = _convert(key, raw, lineno)
            where[key] = lineno
    base = base or SimConfig()
    try:
        return dataclasses.replace(base, **values)
    except ParseError as exc:
        raise ParseError(str(exc).split(": ", 1)[-1], key=exc.key, line=where.get(exc.key)) from None


def load_config(path: str | Path | None) -> SimConfig:
    if path is None:
        return SimConfig()
    return parse_config(Path(path).read_text())


def _format_value(key: str, value) -> str:
    if key == "burn_in":
        return "auto" if value is None else str(value)
    if key == "policy":
        return value.value
    if key in _FLOAT_KEYS:
        return repr(float(value))
    return str(value)


def serialize_config(cfg: SimConfig) -> str:
    return "".join(f"{key} = {_format_value(key, getattr(cfg, key))}\n" for key in KEYS)


def preset_text(name: str = PRESET_NAME) -> str:
    return resources.files("ehduty").joinpath("presets", f"{name}.conf").read_text()


def load_preset(name: str = PRESET_NAME) -> SimConfig:
    return parse_config(preset_text(name))
