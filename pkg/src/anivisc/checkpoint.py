"""Binary checkpoint files for velocity states.

Layout (all little endian):

  bytes 0..3    magic "ANSH"
  u32           format version (currently 1)
  u32 x 3       n_h, n_v, m
  f64           time
  3 component blocks, each n_h*n_h*n_v complex coefficients stored as
  interleaved (re, im) f64 pairs in xi1-major (C) order.

Trajectory directories additionally carry an ``index.json`` mapping
snapshot times to checkpoint file names.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .field import SpectralField, VelocityState
from .grid import Grid

MAGIC = b"ANSH"
VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


def write_checkpoint(path, state: VelocityState) -> None:
    g = state.grid
    header = _HEADER.pack(MAGIC, VERSION, g.n_h, g.n_v, g.m, state.t)
    with open(path, "wb") as fh:
        fh.write(header)
        for comp in state.components():
            fh.write(np.ascontiguousarray(comp.coeffs, dtype="<c16").tobytes())


def read_checkpoint(path) -> VelocityState:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, n_h, n_v, m, t = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        grid = Grid(n_h, n_v, m)
        comps = []
        count = grid.npoints
        for _ in range(3):
            data = np.frombuffer(fh.read(16 * count), dtype="<c16", count=count)
            comps.append(SpectralField(grid, data.reshape(grid.shape).astype(np.complex128)))
    return VelocityState(*comps, t=t)


def write_trajectory_index(outdir, times, filenames, meta: dict | None = None) -> Path:
    outdir = Path(outdir)
    index = {
        "format": "anivisc-trajectory",
        "version": VERSION,
        "snapshots": [
            {"t": float(t), "file": str(name)} for t, name in zip(times, filenames)
        ],
    }
    if meta:
        index["meta"] = meta
    path = outdir / "index.json"
    path.write_text(json.dumps(index, indent=2, sort_keys=True))
    return path
