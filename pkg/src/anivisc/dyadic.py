"""Dyadic frequency analysis: band truncations, Besov-type norms,
time-block norms, paraproduct splitting and the heat-flow norm.

Vertical truncations act on the physical vertical wavenumber |xi_3|
(which carries the 2**-m scale on stretched grids), horizontal ones on
|xi_h|.  The band operator at index q is the multiplier

    chi(|xi| / 2**(q+1)) - chi(|xi| / 2**q)

with chi the radial cutoff below; the lowpass at q is chi(|xi| / 2**q).
On a torus the zero-frequency plane is reached by no band, so it is
kept as a separate mean mode and enters every norm with weight one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .field import SpectralField, VelocityState, forward_coeffs, hermitize, inverse_samples
from .grid import Grid


class CutoffProfile:
    """Radial cutoff: 1 on [0, 1], quintic smoothstep down to 0 on [1, 2].

    The quintic smoothstep has vanishing first and second derivatives at
    both seams, so the profile is C^2 and monotone on [1, 2].
    """

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        out = np.ones_like(t)
        out[t >= 2.0] = 0.0
        mid = (t > 1.0) & (t < 2.0)
        u = t[mid] - 1.0
        out[mid] = 1.0 - u**3 * (10.0 + u * (-15.0 + 6.0 * u))
        return out if out.ndim else float(out)


DEFAULT_CUTOFF = CutoffProfile()


# -- multipliers and index ranges ------------------------------------------


def band_multiplier(kabs: np.ndarray, q: int, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> np.ndarray:
    return cutoff(kabs / 2.0 ** (q + 1)) - cutoff(kabs / 2.0**q)


def lowpass_multiplier(kabs: np.ndarray, q: int, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> np.ndarray:
    return cutoff(kabs / 2.0**q)


def _index_range(kabs: np.ndarray) -> list[int]:
    kpos = kabs[kabs > 0]
    if kpos.size == 0:
        return []
    lo = int(math.floor(math.log2(kpos.min()))) - 2
    hi = int(math.ceil(math.log2(kpos.max()))) + 1
    out = []
    for q in range(lo, hi + 1):
        if np.any((kpos > 2.0**q) & (kpos < 2.0 ** (q + 2))):
            out.append(q)
    return out


def vertical_q_range(grid: Grid) -> list[int]:
    """Indices q whose vertical band meets a nonzero grid frequency."""
    return _index_range(grid.k3_abs_1d)


def horizontal_j_range(grid: Grid) -> list[int]:
    return _index_range(grid.kh_abs_2d)


# -- block operators ---------------------------------------------------------


def vertical_block(f: SpectralField, q: int, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> SpectralField:
    mult = band_multiplier(f.grid.k3_abs_1d, q, cutoff)[None, None, :]
    return SpectralField(f.grid, mult * f.coeffs)


def vertical_lowpass(f: SpectralField, q: int, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> SpectralField:
    mult = lowpass_multiplier(f.grid.k3_abs_1d, q, cutoff)[None, None, :]
    return SpectralField(f.grid, mult * f.coeffs)


def horizontal_block(f: SpectralField, j: int, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> SpectralField:
    mult = band_multiplier(f.grid.kh_abs_2d, j, cutoff)[:, :, None]
    return SpectralField(f.grid, mult * f.coeffs)


def horizontal_lowpass(f: SpectralField, j: int, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> SpectralField:
    mult = lowpass_multiplier(f.grid.kh_abs_2d, j, cutoff)[:, :, None]
    return SpectralField(f.grid, mult * f.coeffs)


def vertical_mean_mode(f: SpectralField) -> SpectralField:
    out = np.zeros_like(f.coeffs)
    out[:, :, 0] = f.coeffs[:, :, 0]
    return SpectralField(f.grid, out)


def horizontal_mean_mode(f: SpectralField) -> SpectralField:
    out = np.zeros_like(f.coeffs)
    out[0, 0, :] = f.coeffs[0, 0, :]
    return SpectralField(f.grid, out)


@dataclass
class DyadicDecomposition:
    """Band-limited blocks of a field along one axis, plus the mean mode."""

    source: SpectralField
    axis: str  # "v" or "h"
    blocks: dict[int, SpectralField]
    mean_mode: SpectralField

    def reconstruct(self) -> SpectralField:
        total = self.mean_mode.coeffs.copy()
        for blk in self.blocks.values():
            total = total + blk.coeffs
        return SpectralField(self.source.grid, total)


def decompose_vertical(f: SpectralField, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> DyadicDecomposition:
    blocks = {q: vertical_block(f, q, cutoff) for q in vertical_q_range(f.grid)}
    return DyadicDecomposition(f, "v", blocks, vertical_mean_mode(f))


def decompose_horizontal(f: SpectralField, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> DyadicDecomposition:
    blocks = {j: horizontal_block(f, j, cutoff) for j in horizontal_j_range(f.grid)}
    return DyadicDecomposition(f, "h", blocks, horizontal_mean_mode(f))


# -- Besov norms --------------------------------------------------------------


@dataclass(frozen=True)
class BesovSpec:
    """Norm selector: anisotropic double sum (kind="anisotropic") over
    horizontal index j and vertical index q with weights 2**(j*s + q*s_prime),
    or the vertical-only sum (kind="vertical", s ignored)."""

    s: float
    s_prime: float
    kind: str = "anisotropic"

    def __post_init__(self):
        if self.kind not in ("anisotropic", "vertical"):
            raise ValueError(f"unknown Besov kind {self.kind!r}")


@lru_cache(maxsize=32)
def _vertical_mult_sq(n_h: int, n_v: int, m: int) -> tuple[tuple[int, ...], np.ndarray]:
    grid = Grid(n_h, n_v, m)
    qs = vertical_q_range(grid)
    mv = np.stack([band_multiplier(grid.k3_abs_1d, q) for q in qs]) if qs else np.zeros((0, n_v))
    arr = mv**2
    arr.flags.writeable = False
    return tuple(qs), arr


@lru_cache(maxsize=32)
def _horizontal_mult_sq(n_h: int, n_v: int, m: int) -> tuple[tuple[int, ...], np.ndarray]:
    grid = Grid(n_h, n_v, m)
    js = horizontal_j_range(grid)
    if js:
        mh = np.stack([band_multiplier(grid.kh_abs_2d, j) for j in js])
    else:
        mh = np.zeros((0, n_h, n_h))
    arr = (mh**2).reshape(len(js), -1)
    arr.flags.writeable = False
    return tuple(js), arr


def _power_sum(fields) -> tuple[Grid, np.ndarray]:
    if isinstance(fields, VelocityState):
        fields = fields.components()
    if isinstance(fields, SpectralField):
        fields = (fields,)
    grid = fields[0].grid
    power = np.zeros(grid.shape)
    for f in fields:
        if f.grid != grid:
            raise ValueError("fields live on different grids")
        power += np.abs(f.coeffs) ** 2
    return grid, power


@dataclass
class BlockTable:
    """Unweighted per-block L2 norms of one snapshot."""

    kind: str
    q_values: tuple[int, ...]
    j_values: tuple[int, ...] | None
    vq: np.ndarray | None        # vertical kind: (nq,) full-field vertical blocks
    vmean: float | None          # vertical kind: xi3 = 0 plane
    jq: np.ndarray | None        # anisotropic: (nj, nq)
    hq: np.ndarray | None        # anisotropic: horizontal-mean line x vertical bands
    jv: np.ndarray | None        # anisotropic: horizontal bands x vertical-mean plane
    s00: float | None            # anisotropic: both means


def block_table(fields, spec: BesovSpec) -> BlockTable:
    grid, power = _power_sum(fields)
    vol = grid.volume
    qs, mv2 = _vertical_mult_sq(grid.n_h, grid.n_v, grid.m)
    if spec.kind == "vertical":
        ev = power.sum(axis=(0, 1))
        vq = np.sqrt(vol * (mv2 @ ev))
        vmean = float(np.sqrt(vol * power[:, :, 0].sum()))
        return BlockTable("vertical", qs, None, vq, vmean, None, None, None, None)
    js, mh2 = _horizontal_mult_sq(grid.n_h, grid.n_v, grid.m)
    flat = power.reshape(-1, grid.n_v)
    jq = np.sqrt(vol * (mh2 @ flat @ mv2.T))
    hq = np.sqrt(vol * (mv2 @ power[0, 0, :]))
    jv = np.sqrt(vol * (mh2 @ power.reshape(-1, grid.n_v)[:, 0]))
    s00 = float(np.sqrt(vol * power[0, 0, 0]))
    return BlockTable("anisotropic", qs, js, None, None, jq, hq, jv, s00)


def _weighted_sum(table: BlockTable, spec: BesovSpec) -> float:
    wq = 2.0 ** (spec.s_prime * np.asarray(table.q_values, dtype=float))
    if table.kind == "vertical":
        return float(wq @ table.vq + table.vmean)
    wj = 2.0 ** (spec.s * np.asarray(table.j_values, dtype=float))
    return float(wj @ table.jq @ wq + wq @ table.hq + wj @ table.jv + table.s00)


def besov_norm(fields, spec: BesovSpec) -> float:
    """l1 sum over dyadic indices of weighted block L2 norms.

    ``fields`` may be a scalar field, a velocity state, or a sequence of
    fields treated as one vector (block norms add in quadrature).
    """
    table = block_table(fields, spec)
    if table.kind != spec.kind:
        raise ValueError("block table kind does not match spec")
    return _weighted_sum(table, spec)


# -- time series and Chemin-Lerner norms -------------------------------------


@dataclass
class NormTimeSeries:
    """Per-snapshot unweighted block norms over a time interval."""

    kind: str
    times: np.ndarray
    q_values: tuple[int, ...]
    j_values: tuple[int, ...] | None
    vq: np.ndarray | None      # (nq, nt)
    vmean: np.ndarray | None   # (nt,)
    jq: np.ndarray | None      # (nj, nq, nt)
    hq: np.ndarray | None      # (nq, nt)
    jv: np.ndarray | None      # (nj, nt)
    s00: np.ndarray | None     # (nt,)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size >= 2 and np.any(np.diff(t) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        self.times = t

    def window(self, i0: int, i1: int) -> "NormTimeSeries":
        """Sub-series over snapshot indices [i0, i1] inclusive."""
        sl = slice(i0, i1 + 1)
        pick = lambda a: None if a is None else a[..., sl]
        return NormTimeSeries(
            self.kind, self.times[sl], self.q_values, self.j_values,
            pick(self.vq), pick(self.vmean), pick(self.jq),
            pick(self.hq), pick(self.jv), pick(self.s00),
        )


class BlockNormCollector:
    """Accumulates block-norm snapshots for a trajectory."""

    def __init__(self, kind: str):
        self.kind = kind
        self._times: list[float] = []
        self._tables: list[BlockTable] = []

    def add(self, t: float, fields) -> None:
        spec = BesovSpec(0.0, 0.0, self.kind)
        self._times.append(float(t))
        self._tables.append(block_table(fields, spec))

    def series(self) -> NormTimeSeries:
        if not self._tables:
            raise ValueError("empty norm series")
        first = self._tables[0]
        stack = lambda name: (
            None if getattr(first, name) is None
            else np.stack([np.asarray(getattr(tb, name)) for tb in self._tables], axis=-1)
        )
        return NormTimeSeries(
            self.kind, np.asarray(self._times), first.q_values, first.j_values,
            stack("vq"), stack("vmean"), stack("jq"), stack("hq"),
            stack("jv"), stack("s00"),
        )


def _time_norm(values: np.ndarray, times: np.ndarray, r) -> np.ndarray:
    """L^r time norm along the last axis (trapezoid quadrature for finite r)."""
    if np.isinf(r):
        return values.max(axis=-1)
    if r == 1:
        return np.trapezoid(values, times, axis=-1)
    if r == 2:
        return np.sqrt(np.trapezoid(values**2, times, axis=-1))
    raise ValueError(f"unsupported time exponent r={r}")


def chemin_lerner_norm(series: NormTimeSeries, r, spec: BesovSpec) -> float:
    """Time-block norm: the L^r time norm is taken per dyadic block
    before the weighted block sum."""
    if series.kind != spec.kind:
        raise ValueError("series kind does not match spec")
    if series.times.size == 0 or (series.times.size < 2 and not np.isinf(r)):
        raise ValueError("need at least 2 snapshots (1 for r = inf)")
    wq = 2.0 ** (spec.s_prime * np.asarray(series.q_values, dtype=float))
    if series.kind == "vertical":
        return float(
            wq @ _time_norm(series.vq, series.times, r)
            + _time_norm(series.vmean, series.times, r)
        )
    wj = 2.0 ** (spec.s * np.asarray(series.j_values, dtype=float))
    return float(
        wj @ _time_norm(series.jq, series.times, r) @ wq
        + wq @ _time_norm(series.hq, series.times, r)
        + wj @ _time_norm(series.jv, series.times, r)
        + _time_norm(series.s00, series.times, r)
    )


# -- Bony paraproduct ----------------------------------------------------------


def bony_vertical_decompose(
    a: SpectralField, b: SpectralField, cutoff: CutoffProfile = DEFAULT_CUTOFF
) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Split a*b into (low a x band b), (low b x band a) and the
    comparable-band remainder.

    The vertical mean modes ride in the lowpass factors; the product of
    the two means is assigned to the remainder, making the three terms
    sum to the pointwise product exactly.  Products are not dealiased
    (aliasing cancels in the sum).
    """
    a._check_same_grid(b)
    grid = a.grid
    qs = vertical_q_range(grid)
    kv = grid.k3_abs_1d

    def phys(coeffs):
        return inverse_samples(coeffs).real

    band_a = {q: band_multiplier(kv, q, cutoff)[None, None, :] * a.coeffs for q in qs}
    band_b = {q: band_multiplier(kv, q, cutoff)[None, None, :] * b.coeffs for q in qs}
    phys_band_a = {q: phys(c) for q, c in band_a.items()}
    phys_band_b = {q: phys(c) for q, c in band_b.items()}

    t1 = np.zeros(grid.shape)
    t2 = np.zeros(grid.shape)
    for q in qs:
        low = lowpass_multiplier(kv, q - 1, cutoff)[None, None, :]
        t1 += phys(low * a.coeffs) * phys_band_b[q]
        t2 += phys(low * b.coeffs) * phys_band_a[q]

    rem = np.zeros(grid.shape)
    for q in qs:
        for qp in qs:
            if abs(q - qp) <= 1:
                rem += phys_band_a[q] * phys_band_b[qp]
    mean_a = np.zeros_like(a.coeffs)
    mean_a[:, :, 0] = a.coeffs[:, :, 0]
    mean_b = np.zeros_like(b.coeffs)
    mean_b[:, :, 0] = b.coeffs[:, :, 0]
    rem += phys(mean_a) * phys(mean_b)

    make = lambda arr: SpectralField(grid, hermitize(forward_coeffs(arr)))
    return make(t1), make(t2), make(rem)


# -- heat-flow norm -------------------------------------------------------------


def geometric_times(t_min: float, t_max: float, n: int) -> np.ndarray:
    return np.geomspace(t_min, t_max, n)


def heat_flow_norm(f: SpectralField, s: float, p: float, r, times: np.ndarray) -> float:
    """Discrete L^r(dt/t) norm of t**(-s/2) ||exp(t*Laplacian) f||_Lp.

    Requires s < 0 and a geometric time grid; the quadrature for finite
    r is trapezoidal in log t.  Sup norms are evaluated on a 2x
    oversampled physical grid.
    """
    if s >= 0:
        raise ValueError("heat-flow norm requires s < 0")
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two time samples")
    ratios = times[1:] / times[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-8):
        raise ValueError("time samples must form a geometric grid")
    vals = np.empty(times.size)
    for i, t in enumerate(times):
        flowed = SpectralField(f.grid, np.exp(-t * f.grid.k_sq) * f.coeffs)
        oversample = 2 if np.isinf(p) or p != 2 else 1
        vals[i] = t ** (-s / 2.0) * flowed.lp_norm(p, oversample=oversample)
    if np.isinf(r):
        return float(vals.max())
    logt = np.log(times)
    return float(np.trapezoid(vals**r, logt) ** (1.0 / r))
