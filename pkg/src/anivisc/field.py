"""Spectral scalar and vector fields with the basic Fourier-side operators.

A field stores the full complex spectrum of a real scalar on a
:class:`~anivisc.grid.Grid`.  The forward transform divides by the total
point count so the zero mode equals the mean of the field and Parseval
reads  ||f||_L2^2 = volume * sum |coeff|^2.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.fft

from .grid import Grid


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by the ANIVISC_THREADS env var."""
    cap = os.environ.get("ANIVISC_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = max(1, min(n, int(cap)))
    return n


def _fftn(a: np.ndarray, axes) -> np.ndarray:
    return scipy.fft.fftn(a, axes=axes, workers=fft_workers())


def _ifftn(a: np.ndarray, axes) -> np.ndarray:
    return scipy.fft.ifftn(a, axes=axes, workers=fft_workers())


def forward_coeffs(samples: np.ndarray) -> np.ndarray:
    """Physical samples -> normalized spectrum (zero mode = mean)."""
    samples = np.asarray(samples)
    npts = np.prod(samples.shape[-3:])
    return _fftn(samples.astype(np.complex128), axes=(-3, -2, -1)) / npts


def inverse_samples(coeffs: np.ndarray) -> np.ndarray:
    """Normalized spectrum -> physical samples (complex; take .real for fields)."""
    return _ifftn(coeffs, axes=(-3, -2, -1)) * np.prod(coeffs.shape[-3:])


def hermitize(coeffs: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian-symmetric part so the physical field is real."""
    flipped = coeffs[..., ::-1, ::-1, ::-1]
    flipped = np.roll(flipped, shift=(1, 1, 1), axis=(-3, -2, -1))
    return 0.5 * (coeffs + np.conj(flipped))


@dataclass
class SpectralField:
    """Complex Fourier coefficients of a real scalar field."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    # -- construction ---------------------------------------------------

    @classmethod
    def from_physical(cls, grid: Grid, samples: np.ndarray) -> "SpectralField":
        samples = np.asarray(samples)
        try:
            samples = np.broadcast_to(samples, grid.shape)
        except ValueError:
            raise ValueError(
                f"sample shape {samples.shape} does not match grid {grid.shape}"
            ) from None
        return cls(grid, forward_coeffs(samples))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    # -- transforms -------------------------------------------------------

    def to_physical(self) -> np.ndarray:
        return inverse_samples(self.coeffs).real

    def hermitized(self) -> "SpectralField":
        return SpectralField(self.grid, hermitize(self.coeffs))

    # -- differential operators -------------------------------------------

    def derivative(self, axis: int) -> "SpectralField":
        """Spectral derivative along axis 1, 2 or 3."""
        if axis not in (1, 2, 3):
            raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
        k = (self.grid.k1, self.grid.k2, self.grid.k3)[axis - 1]
        return SpectralField(self.grid, 1j * k * self.coeffs)

    def horizontal_laplacian(self) -> "SpectralField":
        return SpectralField(self.grid, -self.grid.kh_sq * self.coeffs)

    def inverse_horizontal_laplacian(self) -> "SpectralField":
        """Inverse of the horizontal Laplacian on horizontal-mean-free fields."""
        total = np.linalg.norm(self.coeffs)
        mean_part = np.linalg.norm(self.coeffs[0, 0, :])
        if mean_part > 1e-12 * max(total, 1e-300):
            raise ValueError(
                "inverse horizontal Laplacian applied to a field with "
                f"nonzero horizontal mean (relative content {mean_part / max(total, 1e-300):.2e})"
            )
        out = -self.grid.inv_kh_sq * self.coeffs
        out[0, 0, :] = 0.0
        return SpectralField(self.grid, out)

    def dealias(self) -> "SpectralField":
        return SpectralField(self.grid, np.where(self.grid.dealias_mask, self.coeffs, 0.0))

    # -- norms --------------------------------------------------------------

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coeffs) ** 2)))

    def linf_norm(self, oversample: int = 1) -> float:
        if oversample == 1:
            return float(np.max(np.abs(self.to_physical())))
        fine = Grid(self.grid.n_h * oversample, self.grid.n_v * oversample, self.grid.m)
        return float(np.max(np.abs(spectral_inject(self, fine).to_physical())))

    def lp_norm(self, p: float, oversample: int = 1) -> float:
        """L^p norm via collocation quadrature (p = inf uses the sup norm)."""
        if p == 2 and oversample == 1:
            return self.l2_norm()
        if np.isinf(p):
            return self.linf_norm(oversample=oversample)
        f = self
        if oversample != 1:
            fine = Grid(self.grid.n_h * oversample, self.grid.n_v * oversample, self.grid.m)
            f = spectral_inject(self, fine)
        vals = np.abs(f.to_physical()) ** p
        return float((vals.mean() * self.grid.volume) ** (1.0 / p))

    def mean(self) -> float:
        return float(self.coeffs[0, 0, 0].real)

    # -- arithmetic -----------------------------------------------------------

    def _check_same_grid(self, other: "SpectralField") -> None:
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, scalar * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


def multiply(f: SpectralField, g: SpectralField, dealias: bool = True) -> SpectralField:
    """Pseudo-spectral pointwise product; Hermitian symmetry re-imposed."""
    f._check_same_grid(g)
    prod = inverse_samples(f.coeffs).real * inverse_samples(g.coeffs).real
    coeffs = hermitize(forward_coeffs(prod))
    if dealias:
        coeffs = np.where(f.grid.dealias_mask, coeffs, 0.0)
    return SpectralField(f.grid, coeffs)


def spectral_inject(f: SpectralField, fine: Grid) -> SpectralField:
    """Embed a field into a finer grid of the same periods by index copy."""
    g = f.grid
    if fine.m != g.m or fine.n_h < g.n_h or fine.n_v < g.n_v:
        raise ValueError("target grid must refine the source grid at equal periods")
    out = np.zeros(fine.shape, dtype=np.complex128)
    ih = np.fft.fftfreq(g.n_h, 1.0 / g.n_h).astype(int)
    iv = np.fft.fftfreq(g.n_v, 1.0 / g.n_v).astype(int)
    out[np.ix_(ih % fine.n_h, ih % fine.n_h, iv % fine.n_v)] = f.coeffs
    return SpectralField(fine, hermitize(out))


def slowly_varying_embed(f: SpectralField, m: int) -> SpectralField:
    """Exact spectral relabeling x3 -> 2**-m x3 onto the stretched grid.

    The coefficient array is unchanged; only the vertical period (and
    hence the physical vertical wavenumbers) is rescaled, so no
    interpolation error enters.
    """
    if int(m) != m or m < 0:
        raise ValueError(f"stretch exponent must be a nonnegative integer, got {m}")
    if f.grid.m != 0:
        raise ValueError("embedding expects a field on the unit-period grid")
    return SpectralField(Grid(f.grid.n_h, f.grid.n_v, int(m)), f.coeffs.copy())


def unstretch(f: SpectralField) -> SpectralField:
    """Relabel a stretched-grid field back onto the unit-period grid.

    Inverse view of :func:`slowly_varying_embed`; used to report norms
    per unit vertical length so values are comparable across stretch
    exponents.
    """
    return SpectralField(f.grid.unit(), f.coeffs.copy())


@dataclass
class VelocityState:
    """Three spectral components plus a time stamp."""

    u1: SpectralField
    u2: SpectralField
    u3: SpectralField
    t: float = 0.0

    def __post_init__(self) -> None:
        if not (self.u1.grid == self.u2.grid == self.u3.grid):
            raise ValueError("velocity components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    @classmethod
    def from_arrays(cls, grid: Grid, stacked: np.ndarray, t: float = 0.0) -> "VelocityState":
        return cls(
            SpectralField(grid, stacked[0].copy()),
            SpectralField(grid, stacked[1].copy()),
            SpectralField(grid, stacked[2].copy()),
            t,
        )

    def stacked(self) -> np.ndarray:
        return np.stack([self.u1.coeffs, self.u2.coeffs, self.u3.coeffs])

    def components(self) -> tuple[SpectralField, SpectralField, SpectralField]:
        return (self.u1, self.u2, self.u3)

    def divergence(self) -> SpectralField:
        g = self.grid
        coeffs = 1j * (
            g.k1 * self.u1.coeffs + g.k2 * self.u2.coeffs + g.k3 * self.u3.coeffs
        )
        return SpectralField(g, coeffs)

    def divergence_residual(self) -> float:
        """Divergence norm relative to the gradient scale of the field."""
        num = self.divergence().l2_norm()
        g = self.grid
        scale = np.sqrt(
            g.volume
            * float(
                np.sum(
                    g.k_sq
                    * (
                        np.abs(self.u1.coeffs) ** 2
                        + np.abs(self.u2.coeffs) ** 2
                        + np.abs(self.u3.coeffs) ** 2
                    )
                )
            )
        )
        return num / max(scale, 1e-300)

    def l2_norm(self) -> float:
        return float(
            np.sqrt(self.u1.l2_norm() ** 2 + self.u2.l2_norm() ** 2 + self.u3.l2_norm() ** 2)
        )

    def __sub__(self, other: "VelocityState") -> "VelocityState":
        return VelocityState(
            self.u1 - other.u1, self.u2 - other.u2, self.u3 - other.u3, self.t
        )


def leray_project(
    v1: SpectralField, v2: SpectralField, v3: SpectralField, t: float = 0.0
) -> VelocityState:
    """Orthogonal projection onto divergence-free fields.

    Removes the full-gradient part xi (xi . v)/|xi|^2; the zero mode is
    untouched (a constant field is divergence free).
    """
    v1._check_same_grid(v2)
    v1._check_same_grid(v3)
    g = v1.grid
    ksq = g.k_sq.copy()
    ksq[0, 0, 0] = 1.0
    dot = (g.k1 * v1.coeffs + g.k2 * v2.coeffs + g.k3 * v3.coeffs) / ksq
    return VelocityState(
        SpectralField(g, v1.coeffs - g.k1 * dot),
        SpectralField(g, v2.coeffs - g.k2 * dot),
        SpectralField(g, v3.coeffs - g.k3 * dot),
        t,
    )


def leray_project_state(state: VelocityState) -> VelocityState:
    return leray_project(state.u1, state.u2, state.u3, state.t)
