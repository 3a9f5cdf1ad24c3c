"""Plain-text key=value configuration (UTF-8, '#' comments).

Recognised keys::

    drift.kind       zero | linear | tabulated
    drift.lambda     rate of the linear drift b(x) = -lambda x
    drift.breakpoints, drift.values   comma-separated table (tabulated drift)
    drift.Lambda, drift.K, drift.m    user-supplied constants (tabulated drift)
    alpha, sigma, x0, epsilon, T
    grid.dt, grid.dy, grid.ymin, grid.theta
    seed
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .model import DriftSpec, ModelConfig

KNOWN_KEYS = {
    "drift.kind", "drift.lambda", "drift.breakpoints", "drift.values", "drift.Lambda",
    "drift.K", "drift.m", "alpha", "sigma", "x0", "epsilon", "T",
    "grid.dt", "grid.dy", "grid.ymin", "grid.theta", "seed",
}


@dataclass(frozen=True)
class GridParams:
    """User grid choices; ``None`` means automatic. ``dt`` is in physical time."""

    dt: float | None = None
    dy: float | None = None
    ymin: float | None = None
    theta: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    grid: GridParams
    seed: int | None
    raw: dict


def parse_key_values(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _num(raw: dict, key: str, default=None, cast=float):
    if key not in raw or raw[key] in ("", None):
        return default
    try:
        return cast(raw[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw[key]!r}") from exc


def _floats(raw: dict, key: str):
    try:
        return [float(s) for s in str(raw[key]).split(",") if s.strip()]
    except KeyError as exc:
        raise ConfigError(f"missing key {key}") from exc
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw[key]!r}") from exc


def drift_from_raw(raw: dict) -> DriftSpec:
    kind = str(raw.get("drift.kind", "zero")).lower()
    if kind == "zero":
        return DriftSpec.zero()
    if kind == "linear":
        lam = _num(raw, "drift.lambda", 1.0)
        if lam < 0:
            raise ConfigError("drift.lambda must be >= 0")
        return DriftSpec.linear(lam)
    if kind == "tabulated":
        return DriftSpec.tabulated(
            _floats(raw, "drift.breakpoints"), _floats(raw, "drift.values"),
            _num(raw, "drift.Lambda", 0.0), _num(raw, "drift.K", 0.0), _num(raw, "drift.m", 0.0))
    raise ConfigError(f"unknown drift.kind {kind!r}")


def build_run_config(raw: dict) -> RunConfig:
    """Turn a key -> string mapping into validated model and grid settings."""
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    model = ModelConfig.create(
        drift=drift_from_raw(raw),
        alpha=_num(raw, "alpha", 0.05),
        x0=_num(raw, "x0", 0.8),
        T=_num(raw, "T", 1.0),
        sigma=_num(raw, "sigma", 1.0),
        epsilon=_num(raw, "epsilon", None),
    )
    grid = GridParams(_num(raw, "grid.dt"), _num(raw, "grid.dy"), _num(raw, "grid.ymin"),
                      _num(raw, "grid.theta", 0.0))
    seed = _num(raw, "seed", None, int)
    return RunConfig(model, grid, seed, dict(raw))


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a config file (optional) and apply ``overrides`` on top."""
    raw = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = parse_key_values(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = str(v)
    return build_run_config(raw)


def dump_key_values(raw: dict) -> str:
    return "".join(f"{k}={raw[k]}\n" for k in sorted(raw))
