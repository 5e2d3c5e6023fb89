"""Flat ``key = value`` run configuration and CSV table output."""
from __future__ import annotations

import csv
import sys
from pathlib import Path

from .evolution import EvolutionConfig

__all__ = ["ConfigError", "KEYS", "read_config", "resolve", "to_evolution_config", "write_table", "parse_grid"]


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


KEYS = {
    "n_columns": int,
    "t_max": int,
    "chi_max": int,
    "gamma": float,
    "omega": float,
    "sweep_alternation": _bool,
    "cutoff": float,
    "compression": str,
    "alignment": str,
    "fit_window_lo": float,
    "fit_window_hi": float,
    "output_path": str,
    "workers": int,
}

DEFAULTS = {
    "n_columns": 64,
    "t_max": 64,
    "chi_max": 64,
    "gamma": 1.0,
    "omega": 0.0,
    "sweep_alternation": True,
    "cutoff": 1e-14,
    "compression": "zip",
    "alignment": "sweep",
    "fit_window_lo": 30.0,
    "fit_window_hi": 100.0,
    "output_path": "-",
    "workers": 1,
}


def read_config(path) -> dict:
    """Parse a flat key-value file. ``#`` starts a comment; ``=`` or ``:`` separates."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        key, _, value = line.partition(sep)
        key, value = key.strip(), value.strip()
        if not _ or key not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown or malformed entry {raw!r}")
        try:
            out[key] = KEYS[key](value)
        except ValueError as err:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {err}") from None
    return out


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then file values, then non-``None`` overrides."""
    cfg = dict(DEFAULTS)
    cfg.update(file_values or {})
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return cfg


def to_evolution_config(cfg: dict) -> EvolutionConfig:
    return EvolutionConfig(
        n_columns=cfg["n_columns"],
        t_max=cfg["t_max"],
        chi_max=cfg["chi_max"],
        gamma=cfg["gamma"],
        omega=cfg["omega"],
        sweep_alternation=cfg["sweep_alternation"],
        cutoff=cfg["cutoff"],
        compression=cfg["compression"],
        alignment=cfg["alignment"],
    )


def parse_grid(spec: str) -> list[float]:
    """``"a:b:step"`` (inclusive of ``b``) or a comma-separated list."""
    spec = spec.strip()
    if ":" in spec:
        parts = [float(x) for x in spec.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"grid must be start:stop:step with step > 0, got {spec!r}")
        a, b, h = parts
        count = int(round((b - a) / h)) + 1
        if count < 1:
            raise ConfigError(f"empty grid {spec!r}")
        return [round(a + i * h, 12) for i in range(count)]
    return [float(x) for x in spec.split(",") if x.strip()]


def write_table(path, header, rows, metadata: dict | None = None) -> None:
    """CSV with ``# key=value`` provenance lines ahead of the header; ``-`` is stdout."""
    fh = sys.stdout if str(path) == "-" else open(path, "w", newline="", encoding="utf-8")
    try:
        for k, v in (metadata or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    finally:
        if fh is not sys.stdout:
            fh.close()
