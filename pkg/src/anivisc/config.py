"""JSON run configuration: defaults, validation, object construction."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .experiment import InitialDataSpec, SweepConfig
from .grid import Grid
from .solvers import StepperConfig

DEFAULT_CONFIG = {
    "grid": {"n_h": 64, "n_v": 64, "m": 2},
    "stepper": {"dt": 4e-3, "t_end": 1.0, "scheme": "rk4", "snapshot_stride": 4},
    "initial_data": {"profile": "default", "amplitude": 1.0},
    "sweep": {"m_values": [1, 2, 3, 4], "cbar": 0.05},
    "seed": 0,
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path=None) -> dict:
    """Defaults merged with the JSON file at ``path`` (if given)."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        user = json.loads(Path(path).read_text())
        cfg = _merge(cfg, user)
    return cfg


def grid_from(cfg: dict, *, unit: bool = False) -> Grid:
    g = cfg["grid"]
    return Grid(int(g["n_h"]), int(g["n_v"]), 0 if unit else int(g.get("m", 0)))


def stepper_from(cfg: dict) -> StepperConfig:
    s = cfg["stepper"]
    return StepperConfig(
        dt=float(s["dt"]),
        t_end=float(s["t_end"]),
        scheme=s.get("scheme", "rk4"),
        snapshot_stride=int(s.get("snapshot_stride", 4)),
        dealias=bool(s.get("dealias", True)),
    )


def initial_data_from(cfg: dict) -> InitialDataSpec:
    d = cfg["initial_data"]
    return InitialDataSpec(profile=d.get("profile", "default"), amplitude=float(d.get("amplitude", 1.0)))


def sweep_from(cfg: dict) -> SweepConfig:
    s = cfg["sweep"]
    return SweepConfig(
        m_values=tuple(int(m) for m in s["m_values"]),
        grid=grid_from(cfg, unit=True),
        stepper=stepper_from(cfg),
        cbar=float(s.get("cbar", 0.05)),
        seed=int(cfg.get("seed", 0)),
    )
