"""Periodic grids for the horizontally-viscous Navier-Stokes laboratory.

The domain is a 3-periodic box: the two horizontal axes have period
2*pi, the vertical axis has period 2*pi * 2**m for a stretch exponent
m >= 0.  Arrays are indexed (x1, x2, x3) with numpy FFT ordering on
every axis; the wavenumber on axis i is the integer FFT index times
2*pi / period_i, so horizontal wavenumbers are integers and vertical
wavenumbers are integers times 2**-m.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=64)
def _axis_indices(n: int) -> np.ndarray:
    # integer FFT indices 0, 1, ..., n/2-1, -n/2, ..., -1
    idx = np.fft.fftfreq(n, d=1.0 / n)
    idx.flags.writeable = False
    return idx


@dataclass(frozen=True)
class Grid:
    """Collocation grid on T^2 x (stretched) T_v.

    Parameters
    ----------
    n_h : int
        Points per horizontal axis; power of two, at least 4.
    n_v : int
        Points on the vertical axis; power of two, at least 4.
    m : int
        Vertical stretch exponent; the vertical period is 2*pi * 2**m.
    """

    n_h: int
    n_v: int
    m: int = 0

    def __post_init__(self) -> None:
        if self.n_h < 4 or not _is_power_of_two(self.n_h):
            raise ValueError(f"n_h must be a power of two >= 4, got {self.n_h}")
        if self.n_v < 4 or not _is_power_of_two(self.n_v):
            raise ValueError(f"n_v must be a power of two >= 4, got {self.n_v}")
        if self.m < 0 or int(self.m) != self.m:
            raise ValueError(f"stretch exponent m must be a nonnegative integer, got {self.m}")

    # -- geometry -----------------------------------------------------------

    @property
    def len_h(self) -> float:
        return TWO_PI

    @property
    def len_v(self) -> float:
        return TWO_PI * 2.0**self.m

    @property
    def eps(self) -> float:
        """Vertical slowness parameter 2**-m (also the vertical wavenumber unit)."""
        return 2.0**-self.m

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_h, self.n_h, self.n_v)

    @property
    def npoints(self) -> int:
        return self.n_h * self.n_h * self.n_v

    @property
    def volume(self) -> float:
        return self.len_h * self.len_h * self.len_v

    @property
    def min_spacing(self) -> float:
        return min(self.len_h / self.n_h, self.len_v / self.n_v)

    def unit(self) -> "Grid":
        """The same grid with stretch removed (vertical period 2*pi)."""
        return Grid(self.n_h, self.n_v, 0)

    # -- wavenumbers --------------------------------------------------------

    @property
    def index_h(self) -> np.ndarray:
        return _axis_indices(self.n_h)

    @property
    def index_v(self) -> np.ndarray:
        return _axis_indices(self.n_v)

    @property
    def k1(self) -> np.ndarray:
        return _grid_arrays(self.n_h, self.n_v, self.m).k1

    @property
    def k2(self) -> np.ndarray:
        return _grid_arrays(self.n_h, self.n_v, self.m).k2

    @property
    def k3(self) -> np.ndarray:
        return _grid_arrays(self.n_h, self.n_v, self.m).k3

    @property
    def kh_sq(self) -> np.ndarray:
        """|xi_h|^2, broadcast shape (n_h, n_h, 1)."""
        return _grid_arrays(self.n_h, self.n_v, self.m).kh_sq

    @property
    def k_sq(self) -> np.ndarray:
        return _grid_arrays(self.n_h, self.n_v, self.m).k_sq

    @property
    def inv_kh_sq(self) -> np.ndarray:
        """1/|xi_h|^2 with the xi_h = 0 column set to zero."""
        return _grid_arrays(self.n_h, self.n_v, self.m).inv_kh_sq

    @property
    def kh_abs_2d(self) -> np.ndarray:
        """|xi_h| as a 2D (n_h, n_h) array."""
        return _grid_arrays(self.n_h, self.n_v, self.m).kh_abs_2d

    @property
    def k3_abs_1d(self) -> np.ndarray:
        """|xi_3| along the vertical axis, shape (n_v,)."""
        return _grid_arrays(self.n_h, self.n_v, self.m).k3_abs_1d

    @property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask keeping |index| <= n//3 on every axis (2/3 rule)."""
        return _grid_arrays(self.n_h, self.n_v, self.m).dealias_mask

    def meshes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical coordinates x1, x2, x3 broadcast to the grid shape."""
        x1 = np.arange(self.n_h) * (self.len_h / self.n_h)
        x3 = np.arange(self.n_v) * (self.len_v / self.n_v)
        return (
            x1[:, None, None],
            x1[None, :, None],
            x3[None, None, :],
        )


class _GridArrays:
    __slots__ = (
        "k1", "k2", "k3", "kh_sq", "k_sq", "inv_kh_sq",
        "kh_abs_2d", "k3_abs_1d", "dealias_mask",
    )

    def __init__(self, n_h: int, n_v: int, m: int) -> None:
        idx_h = _axis_indices(n_h)
        idx_v = _axis_indices(n_v)
        scale_v = 2.0**-m
        self.k1 = idx_h[:, None, None].copy()
        self.k2 = idx_h[None, :, None].copy()
        self.k3 = (scale_v * idx_v)[None, None, :].copy()
        self.kh_sq = self.k1**2 + self.k2**2
        self.k_sq = self.kh_sq + self.k3**2
        inv = np.zeros_like(self.kh_sq)
        nz = self.kh_sq > 0
        inv[nz] = 1.0 / self.kh_sq[nz]
        self.inv_kh_sq = inv
        self.kh_abs_2d = np.sqrt(idx_h[:, None] ** 2 + idx_h[None, :] ** 2)
        self.k3_abs_1d = np.abs(scale_v * idx_v)
        keep_h = np.abs(idx_h) <= n_h // 3
        keep_v = np.abs(idx_v) <= n_v // 3
        self.dealias_mask = (
            keep_h[:, None, None] & keep_h[None, :, None] & keep_v[None, None, :]
        )
        for name in self.__slots__:
            getattr(self, name).flags.writeable = False


@lru_cache(maxsize=32)
def _grid_arrays(n_h: int, n_v: int, m: int) -> _GridArrays:
    return _GridArrays(n_h, n_v, m)
