"""Time integration of the horizontally-viscous 3D system, the per-slice
2D Navier-Stokes ensemble, the linear vertical-velocity transport, and
the explicit pressure / forcing fields of the approximate solution.

All steppers use an integrating-factor scheme: the horizontal diffusion
is applied through the exact multiplier exp(-|xi_h|^2 dt) and only the
advection is integrated explicitly (RK4 by default, RK2 optional).  The
advective term is evaluated in rotational form curl(u) x u; after the
divergence-free projection this coincides exactly with the convection
form, at two-thirds the transform count.  Products are formed
pseudo-spectrally and dealiased by the 2/3 rule; Hermitian symmetry is
re-imposed after every product.

The slice ensemble and the transport equation share one time loop so
the transport sees the advecting slices at the exact Runge-Kutta stage
times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .field import (
    SpectralField,
    VelocityState,
    fft_workers,
    forward_coeffs,
    hermitize,
    inverse_samples,
    leray_project,
    slowly_varying_embed,
)
from .grid import Grid


class CFLError(RuntimeError):
    """Advective stability bound violated; carries an advised time step."""

    def __init__(self, dt: float, advised: float):
        super().__init__(
            f"time step {dt:.3e} exceeds the advective CFL bound; "
            f"use dt <= {advised:.3e}"
        )
        self.advised_dt = advised


class TrajectoryMismatch(ValueError):
    """Trajectories are not aligned in time or configuration."""


@dataclass
class StepperConfig:
    """Time-stepping parameters shared by all solvers."""

    dt: float
    t_end: float
    scheme: str = "rk4"
    snapshot_stride: int = 4
    dealias: bool = True

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.scheme not in ("rk4", "rk2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        n = round(self.t_end / self.dt)
        if n < 1 or abs(n * self.dt - self.t_end) > 1e-8 * self.t_end:
            raise ValueError("t_end must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt)

    def matches(self, other: "StepperConfig") -> bool:
        return (
            self.dt == other.dt
            and self.t_end == other.t_end
            and self.scheme == other.scheme
            and self.snapshot_stride == other.snapshot_stride
            and self.dealias == other.dealias
        )


CFL_SAFETY = 0.5
_MEAN_TOL = 1e-12


def _cfl_bound(grid: Grid, max_speed: float) -> float:
    if max_speed <= 0.0:
        return np.inf
    return CFL_SAFETY * grid.min_spacing / max_speed


def _check_mean_free(state: VelocityState) -> None:
    scale = max(state.l2_norm(), 1e-300)
    vol_sqrt = np.sqrt(state.grid.volume)
    for comp in state.components():
        if abs(comp.coeffs[0, 0, 0]) * vol_sqrt > _MEAN_TOL * scale:
            raise ValueError("initial velocity must have zero mean in every component")


# --------------------------------------------------------------------------
# 3D solver  (d/dt u + u.grad u - Lap_h u = -grad p,  div u = 0)
# --------------------------------------------------------------------------


@dataclass
class Trajectory:
    grid: Grid
    cfg: StepperConfig
    times: np.ndarray
    states: list[VelocityState] | None
    dissipation: np.ndarray  # cumulative int_0^t ||grad_h u||_L2^2
    max_divergence: float


class NshStepper:
    """One-step integrator for the 3D system on its (possibly stretched) grid."""

    def __init__(self, grid: Grid, cfg: StepperConfig, nonlinear: bool = True):
        self.grid = grid
        self.cfg = cfg
        self.nonlinear = nonlinear
        self.e_half = np.exp(-grid.kh_sq * (0.5 * cfg.dt))
        self.e_full = self.e_half**2
        self.dissipation = 0.0
        self.max_divergence = 0.0
        self._mask = grid.dealias_mask if cfg.dealias else None

    def _advection(self, U: np.ndarray) -> tuple[np.ndarray, float]:
        """-P(curl u x u), dealiased; also returns max |u| for the CFL check."""
        g = self.grid
        w = fft_workers()
        up = np.empty((3,) + g.shape)
        for c in range(3):
            up[c] = (scipy.fft.ifftn(U[c], axes=(0, 1, 2), workers=w) * g.npoints).real
        om = np.empty_like(up)
        curl = (
            1j * (g.k2 * U[2] - g.k3 * U[1]),
            1j * (g.k3 * U[0] - g.k1 * U[2]),
            1j * (g.k1 * U[1] - g.k2 * U[0]),
        )
        for c in range(3):
            om[c] = (scipy.fft.ifftn(curl[c], axes=(0, 1, 2), workers=w) * g.npoints).real
        cross = np.empty_like(up)
        cross[0] = om[1] * up[2] - om[2] * up[1]
        cross[1] = om[2] * up[0] - om[0] * up[2]
        cross[2] = om[0] * up[1] - om[1] * up[0]
        N = np.empty_like(U)
        for c in range(3):
            N[c] = scipy.fft.fftn(cross[c], axes=(0, 1, 2), workers=w) / g.npoints
        N = hermitize(N)
        if self._mask is not None:
            N *= self._mask
        # divergence-free projection (also removes the gradient part of the
        # rotational-form nonlinearity, recovering the convection form)
        ksq = g.k_sq.copy()
        ksq[0, 0, 0] = 1.0
        dot = (g.k1 * N[0] + g.k2 * N[1] + g.k3 * N[2]) / ksq
        N[0] -= g.k1 * dot
        N[1] -= g.k2 * dot
        N[2] -= g.k3 * dot
        return -N, float(np.max(np.abs(up)))

    def _diss_rate(self, U: np.ndarray) -> float:
        g = self.grid
        return float(g.volume * np.sum(g.kh_sq * (np.abs(U) ** 2).sum(axis=0)))

    def _track_divergence(self, U: np.ndarray) -> None:
        g = self.grid
        div = np.abs(g.k1 * U[0] + g.k2 * U[1] + g.k3 * U[2]) ** 2
        res = np.sqrt(g.volume * float(div.sum()))
        self.max_divergence = max(self.max_divergence, res)

    def step(self, U: np.ndarray) -> np.ndarray:
        dt = self.cfg.dt
        eh, ef = self.e_half, self.e_full
        if not self.nonlinear:
            self.dissipation += 0.5 * dt * (self._diss_rate(U) + self._diss_rate(ef * U))
            return ef * U
        n1, speed = self._advection(U)
        bound = _cfl_bound(self.grid, speed)
        if dt > bound:
            raise CFLError(dt, bound)
        if self.cfg.scheme == "rk2":
            y2 = ef * (U + dt * n1)
            n2, _ = self._advection(y2)
            diss = 0.5 * dt * (self._diss_rate(U) + self._diss_rate(y2))
            out = ef * U + (0.5 * dt) * (ef * n1 + n2)
        else:
            y2 = eh * (U + (0.5 * dt) * n1)
            n2, _ = self._advection(y2)
            y3 = eh * U + (0.5 * dt) * n2
            n3, _ = self._advection(y3)
            y4 = ef * U + dt * (eh * n3)
            n4, _ = self._advection(y4)
            diss = (dt / 6.0) * (
                self._diss_rate(U)
                + 2.0 * self._diss_rate(y2)
                + 2.0 * self._diss_rate(y3)
                + self._diss_rate(y4)
            )
            out = ef * U + (dt / 6.0) * (ef * n1 + 2.0 * eh * (n2 + n3) + n4)
        self.dissipation += diss
        self._track_divergence(out)
        return out


def solve_nsh(
    state0: VelocityState,
    cfg: StepperConfig,
    *,
    nonlinear: bool = True,
    project_initial: bool = True,
    on_snapshot=None,
    store: bool = True,
) -> Trajectory:
    """Integrate the horizontally-viscous system.

    The initial state is dealiased and, by default, Leray-projected; a
    nonzero mean is rejected (the mean is conserved, so a mean-free
    evolution is assumed throughout).  ``project_initial=False`` steps
    the given state as-is, which is how the stepper's action on
    individual Fourier modes is probed.  Snapshots are collected every
    ``snapshot_stride`` steps and on the final step.
    """
    grid = state0.grid
    _check_mean_free(state0)
    U = state0.stacked()
    if cfg.dealias:
        U *= grid.dealias_mask
    stepper = NshStepper(grid, cfg, nonlinear=nonlinear)
    if project_initial:
        ksq = grid.k_sq.copy()
        ksq[0, 0, 0] = 1.0
        dot = (grid.k1 * U[0] + grid.k2 * U[1] + grid.k3 * U[2]) / ksq
        U[0] -= grid.k1 * dot
        U[1] -= grid.k2 * dot
        U[2] -= grid.k3 * dot

    times = [0.0]
    states = [VelocityState.from_arrays(grid, U, 0.0)] if store else None
    diss = [0.0]
    if on_snapshot is not None:
        on_snapshot(0.0, VelocityState.from_arrays(grid, U, 0.0), 0.0)
    for i in range(1, cfg.n_steps + 1):
        U = stepper.step(U)
        t = i * cfg.dt
        if i % cfg.snapshot_stride == 0 or i == cfg.n_steps:
            times.append(t)
            diss.append(stepper.dissipation)
            if store:
                states.append(VelocityState.from_arrays(grid, U, t))
            if on_snapshot is not None:
                on_snapshot(t, VelocityState.from_arrays(grid, U, t), stepper.dissipation)
    return Trajectory(
        grid, cfg, np.asarray(times), states, np.asarray(diss), stepper.max_divergence
    )


# --------------------------------------------------------------------------
# hybrid representation: spectral in the horizontal, collocated in x3
# --------------------------------------------------------------------------


def fft2h(phys: np.ndarray) -> np.ndarray:
    n = phys.shape[-3]
    return scipy.fft.fft2(phys.astype(np.complex128), axes=(-3, -2), workers=fft_workers()) / (n * n)


def ifft2h(spec: np.ndarray) -> np.ndarray:
    n = spec.shape[-3]
    return (scipy.fft.ifft2(spec, axes=(-3, -2), workers=fft_workers()) * (n * n)).real


def hermitize_h(spec: np.ndarray) -> np.ndarray:
    flipped = spec[..., ::-1, ::-1, :]
    flipped = np.roll(flipped, shift=(1, 1), axis=(-3, -2))
    return 0.5 * (spec + np.conj(flipped))


def hybrid_to_field(grid: Grid, hyb: np.ndarray) -> SpectralField:
    coeffs = scipy.fft.fft(hyb, axis=-1, workers=fft_workers()) / grid.n_v
    return SpectralField(grid, hermitize(coeffs))


def field_to_hybrid(f: SpectralField) -> np.ndarray:
    return scipy.fft.ifft(f.coeffs, axis=-1, workers=fft_workers()) * f.grid.n_v


@dataclass
class SliceEnsemble:
    """A 2D divergence-free horizontal field for every vertical collocation
    point, stored spectrally in the horizontal and pointwise in x3."""

    grid: Grid
    uh: np.ndarray  # (2, n_h, n_h, n_v), spectral in axes (1, 2)

    def __post_init__(self) -> None:
        if self.uh.shape != (2, self.grid.n_h, self.grid.n_h, self.grid.n_v):
            raise ValueError("slice ensemble shape mismatch")

    @classmethod
    def from_physical(cls, grid: Grid, samples: np.ndarray) -> "SliceEnsemble":
        return cls(grid, fft2h(np.asarray(samples, dtype=float)))

    @classmethod
    def from_fields(cls, u1: SpectralField, u2: SpectralField) -> "SliceEnsemble":
        return cls(u1.grid, np.stack([field_to_hybrid(u1), field_to_hybrid(u2)]))

    def to_fields(self) -> tuple[SpectralField, SpectralField]:
        return (
            hybrid_to_field(self.grid, self.uh[0]),
            hybrid_to_field(self.grid, self.uh[1]),
        )

    def to_physical(self) -> np.ndarray:
        return ifft2h(self.uh)

    def divergence_residual(self) -> float:
        g = self.grid
        div = 1j * (g.k1 * self.uh[0] + g.k2 * self.uh[1])
        scale = np.sqrt(float(np.sum(g.kh_sq * (np.abs(self.uh) ** 2).sum(axis=0))))
        return float(np.sqrt(np.sum(np.abs(div) ** 2))) / max(scale, 1e-300)


@dataclass
class SliceTrajectory:
    grid: Grid
    cfg: StepperConfig
    times: np.ndarray
    snapshots: list[np.ndarray]          # hybrid (2, n, n, n_v) arrays
    dissipation_per_slice: np.ndarray    # (n_t, n_v) cumulative per-slice
    initial: np.ndarray

    def ensemble(self, i: int) -> SliceEnsemble:
        return SliceEnsemble(self.grid, self.snapshots[i])


@dataclass
class ScalarTrajectory:
    grid: Grid
    cfg: StepperConfig
    times: np.ndarray
    snapshots: list[np.ndarray]          # hybrid (n, n, n_v) arrays

    def fields(self) -> list[SpectralField]:
        return [hybrid_to_field(self.grid, s) for s in self.snapshots]


class SliceTransportStepper:
    """Coupled stepper: 2D Navier-Stokes per slice plus the passive
    transport-diffusion of the vertical velocity component by the slices."""

    def __init__(self, grid: Grid, cfg: StepperConfig):
        if grid.m != 0:
            raise ValueError("the slice system lives on the unit-period grid")
        self.grid = grid
        self.cfg = cfg
        self.e_half = np.exp(-grid.kh_sq * (0.5 * cfg.dt))
        self.e_full = self.e_half**2
        keep = np.abs(grid.index_h) <= grid.n_h // 3
        self._mask = (keep[:, None, None] & keep[None, :, None]) if cfg.dealias else None
        self.dissipation_per_slice = np.zeros(grid.n_v)

    def _rhs(self, uh: np.ndarray, w3: np.ndarray | None):
        g = self.grid
        up = ifft2h(uh)
        om = ifft2h(1j * (g.k1 * uh[1] - g.k2 * uh[0]))
        adv = np.stack([-om * up[1], om * up[0]])
        N = hermitize_h(fft2h(adv))
        if self._mask is not None:
            N *= self._mask
        dot = (g.k1 * N[0] + g.k2 * N[1]) * g.inv_kh_sq
        N[0] -= g.k1 * dot
        N[1] -= g.k2 * dot
        n_w3 = None
        if w3 is not None:
            gradp = ifft2h(np.stack([1j * g.k1 * w3, 1j * g.k2 * w3]))
            n_w3 = -hermitize_h(fft2h(up[0] * gradp[0] + up[1] * gradp[1]))
            if self._mask is not None:
                n_w3 *= self._mask
        return -N, n_w3, float(np.max(np.abs(up)))

    def _diss_per_slice(self, uh: np.ndarray) -> np.ndarray:
        g = self.grid
        return g.len_h**2 * np.sum(g.kh_sq * (np.abs(uh) ** 2).sum(axis=0), axis=(0, 1))

    def step(self, uh: np.ndarray, w3: np.ndarray | None):
        dt = self.cfg.dt
        eh, ef = self.e_half, self.e_full
        nu1, nw1, speed = self._rhs(uh, w3)
        bound = _cfl_bound(self.grid, speed)
        if dt > bound:
            raise CFLError(dt, bound)
        has_w = w3 is not None
        if self.cfg.scheme == "rk2":
            u2 = ef * (uh + dt * nu1)
            v2 = ef * (w3 + dt * nw1) if has_w else None
            nu2, nw2, _ = self._rhs(u2, v2)
            diss = 0.5 * dt * (self._diss_per_slice(uh) + self._diss_per_slice(u2))
            uh_n = ef * uh + (0.5 * dt) * (ef * nu1 + nu2)
            w3_n = ef * w3 + (0.5 * dt) * (ef * nw1 + nw2) if has_w else None
        else:
            u2 = eh * (uh + (0.5 * dt) * nu1)
            v2 = eh * (w3 + (0.5 * dt) * nw1) if has_w else None
            nu2, nw2, _ = self._rhs(u2, v2)
            u3 = eh * uh + (0.5 * dt) * nu2
            v3 = eh * w3 + (0.5 * dt) * nw2 if has_w else None
            nu3, nw3, _ = self._rhs(u3, v3)
            u4 = ef * uh + dt * (eh * nu3)
            v4 = ef * w3 + dt * (eh * nw3) if has_w else None
            nu4, nw4, _ = self._rhs(u4, v4)
            diss = (dt / 6.0) * (
                self._diss_per_slice(uh)
                + 2.0 * self._diss_per_slice(u2)
                + 2.0 * self._diss_per_slice(u3)
                + self._diss_per_slice(u4)
            )
            uh_n = ef * uh + (dt / 6.0) * (ef * nu1 + 2.0 * eh * (nu2 + nu3) + nu4)
            w3_n = (
                ef * w3 + (dt / 6.0) * (ef * nw1 + 2.0 * eh * (nw2 + nw3) + nw4)
                if has_w
                else None
            )
        self.dissipation_per_slice += diss
        return uh_n, w3_n


def _project_slices(grid: Grid, uh: np.ndarray) -> np.ndarray:
    dot = (grid.k1 * uh[0] + grid.k2 * uh[1]) * grid.inv_kh_sq
    out = uh.copy()
    out[0] -= grid.k1 * dot
    out[1] -= grid.k2 * dot
    return out


def solve_slices_and_transport(
    initial: SliceEnsemble,
    w3_0: np.ndarray | SpectralField | None,
    cfg: StepperConfig,
    *,
    on_snapshot=None,
    store: bool = True,
) -> tuple[SliceTrajectory, ScalarTrajectory | None]:
    """Advance the slice ensemble and (optionally) the transported vertical
    component in one loop, so both see identical stage values."""
    grid = initial.grid
    stepper = SliceTransportStepper(grid, cfg)
    uh = _project_slices(grid, initial.uh.copy())
    if cfg.dealias and stepper._mask is not None:
        uh *= stepper._mask
    w3 = None
    if w3_0 is not None:
        w3 = field_to_hybrid(w3_0) if isinstance(w3_0, SpectralField) else w3_0.copy()
        if cfg.dealias and stepper._mask is not None:
            w3 = w3 * stepper._mask
    uh0 = uh.copy()

    times = [0.0]
    snaps_u = [uh.copy()] if store else []
    snaps_w = [w3.copy()] if (store and w3 is not None) else []
    diss = [stepper.dissipation_per_slice.copy()]
    if on_snapshot is not None:
        on_snapshot(0.0, uh, w3)
    for i in range(1, cfg.n_steps + 1):
        uh, w3 = stepper.step(uh, w3)
        t = i * cfg.dt
        if i % cfg.snapshot_stride == 0 or i == cfg.n_steps:
            times.append(t)
            diss.append(stepper.dissipation_per_slice.copy())
            if store:
                snaps_u.append(uh.copy())
                if w3 is not None:
                    snaps_w.append(w3.copy())
            if on_snapshot is not None:
                on_snapshot(t, uh, w3)
    traj_u = SliceTrajectory(
        grid, cfg, np.asarray(times), snaps_u, np.asarray(diss), uh0
    )
    traj_w = (
        ScalarTrajectory(grid, cfg, np.asarray(times), snaps_w)
        if w3 is not None
        else None
    )
    return traj_u, traj_w


def solve_ns2d_slices(
    initial: SliceEnsemble, cfg: StepperConfig, *, on_snapshot=None, store: bool = True
) -> SliceTrajectory:
    """Each vertical collocation point evolves under 2D Navier-Stokes on T^2,
    independently of every other slice."""
    traj, _ = solve_slices_and_transport(
        initial, None, cfg, on_snapshot=on_snapshot, store=store
    )
    return traj


def solve_transport_w3(
    uh_traj: SliceTrajectory, w3_0: SpectralField | np.ndarray, cfg: StepperConfig
) -> ScalarTrajectory:
    """Solve d/dt w3 + u_h . grad_h w3 - Lap_h w3 = 0 along a stored slice
    trajectory.

    The advecting ensemble is re-advanced from the trajectory's initial
    state with the same scheme (deterministically identical), so the
    transport sees exact stage values rather than interpolants.  The
    configurations must match.
    """
    if not uh_traj.cfg.matches(cfg):
        raise TrajectoryMismatch("transport config differs from the slice trajectory")
    _, traj_w = solve_slices_and_transport(
        SliceEnsemble(uh_traj.grid, uh_traj.initial.copy()), w3_0, cfg, store=True
    )
    return traj_w


# --------------------------------------------------------------------------
# reconstruction, pressures, assembly, forcing
# --------------------------------------------------------------------------


def reconstruct_wh(w3: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Horizontal components - grad_h (Lap_h)^-1 d3 w3 of the transport field.

    Requires d3 w3 to have zero horizontal mean; the pair (w_h, w3) is
    then divergence free exactly in spectrum.
    """
    g = w3.grid
    total = np.linalg.norm(w3.coeffs) * max(np.abs(g.k3).max(), 1.0)
    bad = np.linalg.norm(g.k3[0, 0, :] * w3.coeffs[0, 0, :])
    if bad > 1e-12 * max(total, 1e-300):
        raise ValueError("d3 w3 has a nonzero horizontal mean; cannot reconstruct w_h")
    base = -g.k3 * w3.coeffs * g.inv_kh_sq
    return (
        SpectralField(g, g.k1 * base),
        SpectralField(g, g.k2 * base),
    )


def _dealias_h_mask(grid: Grid) -> np.ndarray:
    keep = np.abs(grid.index_h) <= grid.n_h // 3
    return keep[:, None, None] & keep[None, :, None]


def compute_p0(uh: SliceEnsemble, dealias: bool = True) -> SpectralField:
    """Per-slice pressure sum_{i,j<=2} d_i d_j (-Lap_h)^-1 (u^i u^j)."""
    g = uh.grid
    up = uh.to_physical()
    t11 = hermitize_h(fft2h(up[0] * up[0]))
    t12 = hermitize_h(fft2h(up[0] * up[1]))
    t22 = hermitize_h(fft2h(up[1] * up[1]))
    if dealias:
        mask = _dealias_h_mask(g)
        t11, t12, t22 = t11 * mask, t12 * mask, t22 * mask
    p0 = -(g.k1**2 * t11 + 2.0 * g.k1 * g.k2 * t12 + g.k2**2 * t22) * g.inv_kh_sq
    return hybrid_to_field(g, p0)


def compute_p1(
    uh: SliceEnsemble,
    wh1: SpectralField,
    wh2: SpectralField,
    w3: SpectralField,
    dealias: bool = True,
) -> tuple[SpectralField, SpectralField]:
    """Pressure of the transport system, split into the part built from the
    horizontal transport components and the part built from w3."""
    g = uh.grid
    up = uh.to_physical()
    mask = _dealias_h_mask(g) if dealias else None

    def hprod(a, b):
        out = hermitize_h(fft2h(a * b))
        return out * mask if mask is not None else out

    w1p, w2p, w3p = wh1.to_physical(), wh2.to_physical(), w3.to_physical()
    p1h = -(
        g.k1**2 * hprod(up[0], w1p)
        + g.k1 * g.k2 * (hprod(up[0], w2p) + hprod(up[1], w1p))
        + g.k2**2 * hprod(up[1], w2p)
    ) * g.inv_kh_sq
    s1 = hybrid_to_field(g, hprod(up[0], w3p))
    s2 = hybrid_to_field(g, hprod(up[1], w3p))
    p13 = SpectralField(
        g, -g.k3 * (g.k1 * s1.coeffs + g.k2 * s2.coeffs) * g.inv_kh_sq
    )
    return hybrid_to_field(g, p1h), p13


def approx_pre_image(
    uh: SliceEnsemble, w3_hybrid: np.ndarray, eps: float, t: float = 0.0
) -> VelocityState:
    """The unit-period triple (u_h + eps w_h, w3) before vertical stretching."""
    g = uh.grid
    u1f, u2f = uh.to_fields()
    w3f = hybrid_to_field(g, w3_hybrid)
    wh1, wh2 = reconstruct_wh(w3f)
    return VelocityState(
        SpectralField(g, u1f.coeffs + eps * wh1.coeffs),
        SpectralField(g, u2f.coeffs + eps * wh2.coeffs),
        w3f,
        t,
    )


def assemble_uapp(
    uh: SliceEnsemble, w3_hybrid: np.ndarray, m: int, t: float = 0.0
) -> VelocityState:
    """Approximate velocity on the stretched grid: the slowly-varying
    embedding of (u_h + eps w_h, w3) with eps = 2**-m."""
    pre = approx_pre_image(uh, w3_hybrid, 2.0**-m, t)
    return VelocityState(
        slowly_varying_embed(pre.u1, m),
        slowly_varying_embed(pre.u2, m),
        slowly_varying_embed(pre.u3, m),
        t,
    )


def _mult_dealias(f: SpectralField, gphys: np.ndarray, mask: np.ndarray) -> np.ndarray:
    prod = inverse_samples(f.coeffs).real * gphys
    return np.where(mask, hermitize(forward_coeffs(prod)), 0.0)


def compute_forcing_F(
    uh: SliceEnsemble,
    w3_hybrid: np.ndarray,
    p0: SpectralField,
    p1h: SpectralField,
    p13: SpectralField,
    m: int,
) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Forcing triple of the remainder equation, embedded on the stretched
    grid:

        eps [ w_h . grad_h (w_h, 0) + w3 d3 (w_h, 0) ]
        + [ w . grad (u_h, w3) ]
        + (0, 0, [ d3 (p0 + eps p1) ])

    with every product dealiased on the unit grid before embedding.
    """
    g = uh.grid
    eps = 2.0**-m
    mask = g.dealias_mask
    u1f, u2f = uh.to_fields()
    w3f = hybrid_to_field(g, w3_hybrid)
    wh1, wh2 = reconstruct_wh(w3f)
    w1p, w2p, w3p = wh1.to_physical(), wh2.to_physical(), w3f.to_physical()

    def wgrad(f: SpectralField) -> np.ndarray:
        """w . grad f, dealiased, spectral."""
        acc = _mult_dealias(f.derivative(1), w1p, mask)
        acc += _mult_dealias(f.derivative(2), w2p, mask)
        acc += _mult_dealias(f.derivative(3), w3p, mask)
        return acc

    f1 = eps * wgrad(wh1) + wgrad(u1f)
    f2 = eps * wgrad(wh2) + wgrad(u2f)
    p_total = SpectralField(g, p0.coeffs + eps * (p1h.coeffs + p13.coeffs))
    f3 = wgrad(w3f) + p_total.derivative(3).coeffs
    return (
        slowly_varying_embed(SpectralField(g, f1), m),
        slowly_varying_embed(SpectralField(g, f2), m),
        slowly_varying_embed(SpectralField(g, f3), m),
    )


def wh_momentum_residual(
    uh: SliceEnsemble,
    w3_hybrid: np.ndarray,
    p1h: SpectralField,
    p13: SpectralField,
) -> tuple[SpectralField, SpectralField]:
    """Residual of the horizontal momentum equation satisfied by the
    reconstructed transport components,

        rho = d/dt w_h + u_h . grad_h w_h - Lap_h w_h + grad_h p1 ,

    evaluated instantaneously by substituting the w3 equation (no time
    differencing).  It vanishes for vanishing transport data but carries a
    rotational part in general; it is reported and enters residual-based
    verifications as an order-eps correction alongside the forcing.
    """
    g = uh.grid
    mask = g.dealias_mask
    hmask = _dealias_h_mask(g)
    up = uh.to_physical()
    w3f = hybrid_to_field(g, w3_hybrid)
    wh1, wh2 = reconstruct_wh(w3f)

    # grad_h (Lap_h)^-1 d3 of the dealiased horizontal advection of w3
    gw = np.stack([1j * g.k1 * w3_hybrid, 1j * g.k2 * w3_hybrid])
    gwp = ifft2h(gw)
    adv3 = hermitize_h(fft2h(up[0] * gwp[0] + up[1] * gwp[1])) * hmask
    adv3_full = hybrid_to_field(g, adv3)
    base = 1j * g.k3 * adv3_full.coeffs * (-g.inv_kh_sq)
    rho1 = 1j * g.k1 * base
    rho2 = 1j * g.k2 * base

    for c, whc in ((0, wh1), (1, wh2)):
        acc = _mult_dealias(whc.derivative(1), up[0], mask)
        acc += _mult_dealias(whc.derivative(2), up[1], mask)
        if c == 0:
            rho1 = rho1 + acc
        else:
            rho2 = rho2 + acc
    p1 = SpectralField(g, p1h.coeffs + p13.coeffs)
    rho1 = rho1 + p1.derivative(1).coeffs
    rho2 = rho2 + p1.derivative(2).coeffs
    return SpectralField(g, rho1), SpectralField(g, rho2)


def effective_forcing(
    uh: SliceEnsemble, w3_hybrid: np.ndarray, m: int
) -> tuple[tuple[SpectralField, SpectralField, SpectralField], float]:
    """Forcing triple plus the reconstruction correction, embedded; also
    returns the divergence-free content of the correction (reported)."""
    g = uh.grid
    u1f, u2f = uh.to_fields()
    w3f = hybrid_to_field(g, w3_hybrid)
    wh1, wh2 = reconstruct_wh(w3f)
    p0 = compute_p0(uh)
    p1h, p13 = compute_p1(uh, wh1, wh2, w3f)
    F = compute_forcing_F(uh, w3_hybrid, p0, p1h, p13, m)
    rho1, rho2 = wh_momentum_residual(uh, w3_hybrid, p1h, p13)
    rho_rot = leray_project(rho1, rho2, SpectralField.zeros(g)).l2_norm()
    G = (
        SpectralField(F[0].grid, F[0].coeffs + slowly_varying_embed(rho1, m).coeffs),
        SpectralField(F[1].grid, F[1].coeffs + slowly_varying_embed(rho2, m).coeffs),
        F[2],
    )
    return G, rho_rot
