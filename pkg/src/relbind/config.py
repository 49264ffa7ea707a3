"""Configuration ingestion: TOML files with nested key-value tables, validated
into model objects, plus a canonical serialized form (stable key order) and
its hash, emitted alongside every report for reproducibility.

Schema (all tables except [model], [grid] optional; see configs/desk.toml):

  [model]      d, N, masses, alpha, kappa, ir_cutoff
  [profile]    kind, Lambda, sigma_floor, scale
  [grid]       n, L
  [potential]  family, v0, w  (or delta, table_r, table_v)
  [scan]       alphas, kappa
  [fiber]      n, L, p_samples
  [levy]       n_paths, t, k_steps
  [fock]       shells, n_max, ladder, kappa_ladder
  [seed]       master
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .model import (CutoffProfile, ExternalPotential, Grid, ModelError, ModelParams)


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    raw: Dict[str, Any]
    params: ModelParams
    grid: Grid
    potential: ExternalPotential
    seed: int

    def section(self, name: str) -> Dict[str, Any]:
        value = self.raw.get(name, {})
        if not isinstance(value, dict):
            raise ConfigError(f"section [{name}] must be a table")
        return value

    def canonical_json(self) -> str:
        return canonical_json(self.raw)

    def config_hash(self) -> str:
        return config_hash(self.raw)


def canonical_json(obj: Any) -> str:
    """Deterministic serialization: sorted keys, pinned float formatting."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not serializable: {type(value)}")


def config_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def _get(table: Dict[str, Any], section: str, key: str, kind, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"missing key '{section}.{key}'")
        return default
    value = table[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"key '{section}.{key}' must be {kind.__name__}, got {type(value).__name__}")
    return value


def load_config(path) -> RunConfig:
    """Parse and validate a TOML config file into model objects."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config does not parse as TOML: {err}") from err
    return parse_config(raw)


def parse_config(raw: Dict[str, Any]) -> RunConfig:
    model = raw.get("model")
    if not isinstance(model, dict):
        raise ConfigError("missing table [model]")
    d = _get(model, "model", "d", int, required=True)
    N = _get(model, "model", "N", int, required=True)
    masses = model.get("masses")
    if not isinstance(masses, list) or not all(isinstance(m, (int, float)) for m in masses):
        raise ConfigError("key 'model.masses' must be a list of numbers")
    alpha = _get(model, "model", "alpha", float, required=True)
    kappa = _get(model, "model", "kappa", float, required=True)
    ir_cutoff = _get(model, "model", "ir_cutoff", float, default=0.0)

    prof = raw.get("profile", {})
    if not isinstance(prof, dict):
        raise ConfigError("section [profile] must be a table")
    profile = CutoffProfile(
        kind=_get(prof, "profile", "kind", str, default="sharp-flat"),
        Lambda=_get(prof, "profile", "Lambda", float, default=1.0),
        sigma_floor=_get(prof, "profile", "sigma_floor", float, default=ir_cutoff),
        scale=_get(prof, "profile", "scale", float, default=1.0),
    )

    gridsec = raw.get("grid")
    if not isinstance(gridsec, dict):
        raise ConfigError("missing table [grid]")
    n = _get(gridsec, "grid", "n", int, required=True)
    L = _get(gridsec, "grid", "L", float, required=True)

    pot = raw.get("potential", {})
    if not isinstance(pot, dict):
        raise ConfigError("section [potential] must be a table")
    family = _get(pot, "potential", "family", str, default="gaussian-well")
    if family == "gaussian-well":
        potential = ExternalPotential(
            family=family,
            v0=_get(pot, "potential", "v0", float, default=0.0),
            w=_get(pot, "potential", "w", float, default=1.0),
        )
    else:
        table_r = pot.get("table_r")
        table_v = pot.get("table_v")
        if not isinstance(table_r, list) or not isinstance(table_v, list):
            raise ConfigError("keys 'potential.table_r'/'potential.table_v' must be lists")
        potential = ExternalPotential(
            family=family,
            delta=_get(pot, "potential", "delta", float, default=1.0),
            table_r=np.asarray(table_r, dtype=float),
            table_v=np.asarray(table_v, dtype=float),
        )

    seedsec = raw.get("seed", {})
    if not isinstance(seedsec, dict):
        raise ConfigError("section [seed] must be a table")
    seed = _get(seedsec, "seed", "master", int, default=20260810)

    try:
        params = ModelParams(d=d, N=N, masses=tuple(float(m) for m in masses),
                             alpha=alpha, kappa=kappa, ir_cutoff=ir_cutoff,
                             profiles=(profile,))
        grid = Grid(dims=d * N, n=n, L=L)
    except ModelError as err:
        raise ConfigError(str(err)) from err
    return RunConfig(raw=raw, params=params, grid=grid, potential=potential, seed=seed)
