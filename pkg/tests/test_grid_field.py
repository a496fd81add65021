"""Core spectral operators: transforms, derivatives, projection,
dealiasing, the vertical embedding."""

import numpy as np
import pytest

from anivisc.field import (
    SpectralField,
    VelocityState,
    hermitize,
    leray_project,
    multiply,
    slowly_varying_embed,
    spectral_inject,
    unstretch,
)
from anivisc.grid import Grid


def white_noise(grid, seed=0):
    rng = np.random.default_rng(seed)
    return SpectralField.from_physical(grid, rng.standard_normal(grid.shape))


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            Grid(3, 16)
        with pytest.raises(ValueError):
            Grid(16, 17)
        with pytest.raises(ValueError):
            Grid(16, 16, -1)

    def test_geometry(self):
        g = Grid(16, 32, 2)
        assert g.len_v == pytest.approx(2 * np.pi * 4)
        assert g.eps == 0.25
        assert g.shape == (16, 16, 32)
        # vertical wavenumbers are integers scaled by 2 pi / period
        assert g.k3.max() == pytest.approx(0.25 * 15)

    def test_unit_relabel(self):
        assert Grid(16, 32, 3).unit() == Grid(16, 32, 0)


class TestTransforms:
    def test_single_mode_coefficients(self):
        # sin(x3) -> coefficients -i/2 at +1 and +i/2 at -1
        g = Grid(8, 16, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(x3))
        assert f.coeffs[0, 0, 1] == pytest.approx(-0.5j, abs=1e-14)
        assert f.coeffs[0, 0, -1] == pytest.approx(0.5j, abs=1e-14)
        assert np.max(np.abs(f.to_physical() - np.broadcast_to(np.sin(x3), g.shape))) < 1e-13

    def test_constant_field(self):
        g = Grid(8, 8, 0)
        f = SpectralField.from_physical(g, np.ones(g.shape))
        assert f.coeffs[0, 0, 0] == pytest.approx(1.0)
        assert np.sum(np.abs(f.coeffs)) == pytest.approx(1.0)

    @pytest.mark.parametrize("n_h,n_v", [(16, 16), (32, 32), (64, 64)])
    def test_round_trip_white_noise(self, n_h, n_v):
        g = Grid(n_h, n_v, 0)
        rng = np.random.default_rng(1)
        samples = rng.standard_normal(g.shape)
        f = SpectralField.from_physical(g, samples)
        assert np.max(np.abs(f.to_physical() - samples)) < 1e-12 * np.max(np.abs(samples))

    def test_round_trip_128(self):
        g = Grid(128, 128, 0)
        rng = np.random.default_rng(2)
        samples = rng.standard_normal(g.shape)
        f = SpectralField.from_physical(g, samples)
        assert np.max(np.abs(f.to_physical() - samples)) < 1e-12 * np.max(np.abs(samples))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SpectralField.from_physical(Grid(8, 8, 0), np.zeros((4, 4, 4)))

    def test_parseval_l2(self):
        g = Grid(16, 16, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(x3))
        assert f.l2_norm() == pytest.approx(np.sqrt(g.volume / 2), rel=1e-13)


class TestDerivatives:
    def test_sin_x1(self):
        g = Grid(16, 8, 0)
        x1, _, _ = g.meshes()
        f = SpectralField.from_physical(g, np.sin(x1))
        df = f.derivative(1).to_physical()
        assert np.max(np.abs(df - np.broadcast_to(np.cos(x1), g.shape))) < 1e-13

    def test_constant(self):
        g = Grid(8, 8, 0)
        f = SpectralField.from_physical(g, np.ones(g.shape))
        for axis in (1, 2, 3):
            assert f.derivative(axis).l2_norm() == 0.0

    def test_scaled_vertical_wavenumber(self):
        # sin(2 x3) on the len_v = 4 pi grid differentiates to 2 cos(2 x3)
        g = Grid(8, 16, 1)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(2 * x3))
        df = f.derivative(3).to_physical()
        assert np.max(np.abs(df - np.broadcast_to(2 * np.cos(2 * x3), g.shape))) < 1e-12

    def test_bad_axis(self):
        g = Grid(8, 8, 0)
        with pytest.raises(ValueError):
            SpectralField.zeros(g).derivative(0)


class TestHorizontalLaplacian:
    def test_single_mode(self):
        g = Grid(16, 8, 0)
        x1, _, _ = g.meshes()
        f = SpectralField.from_physical(g, np.sin(x1))
        lap = f.horizontal_laplacian()
        assert np.max(np.abs(lap.to_physical() + np.broadcast_to(np.sin(x1), g.shape))) < 1e-13
        # inverse(laplacian(f)) = f, and the inverse alone carries -1/|xi_h|^2
        back = lap.inverse_horizontal_laplacian()
        assert np.max(np.abs(back.to_physical() - np.broadcast_to(np.sin(x1), g.shape))) < 1e-13
        inv = f.inverse_horizontal_laplacian()
        assert np.max(np.abs(inv.to_physical() + np.broadcast_to(np.sin(x1), g.shape))) < 1e-13

    def test_two_mode(self):
        g = Grid(16, 8, 0)
        x1, x2, _ = g.meshes()
        f = SpectralField.from_physical(g, np.sin(x1 + x2))
        lap = f.horizontal_laplacian().to_physical()
        assert np.max(np.abs(lap + 2 * np.broadcast_to(np.sin(x1 + x2), g.shape))) < 1e-12

    def test_kernel_rejected(self):
        g = Grid(8, 16, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(x3))
        assert f.horizontal_laplacian().l2_norm() == 0.0
        with pytest.raises(ValueError):
            f.inverse_horizontal_laplacian()


def dense_leray_oracle(grid, comps):
    """Brute-force projection u_hat - xi (xi . u_hat)/|xi|^2 by explicit loops."""
    out = [c.copy() for c in comps]
    idx_h = np.fft.fftfreq(grid.n_h, 1 / grid.n_h).astype(int)
    idx_v = np.fft.fftfreq(grid.n_v, 1 / grid.n_v).astype(int)
    for a, k1 in enumerate(idx_h):
        for b, k2 in enumerate(idx_h):
            for c, kv in enumerate(idx_v):
                k3 = kv * grid.eps
                ksq = k1 * k1 + k2 * k2 + k3 * k3
                if ksq == 0:
                    continue
                dot = (k1 * comps[0][a, b, c] + k2 * comps[1][a, b, c] + k3 * comps[2][a, b, c]) / ksq
                out[0][a, b, c] -= k1 * dot
                out[1][a, b, c] -= k2 * dot
                out[2][a, b, c] -= k3 * dot
    return out


class TestLeray:
    def test_annihilates_gradients(self):
        g = Grid(8, 8, 0)
        x1, _, x3 = g.meshes()
        phi = SpectralField.from_physical(g, np.sin(x1) * np.sin(x3))
        st = leray_project(phi.derivative(1), phi.derivative(2), phi.derivative(3))
        assert st.l2_norm() < 1e-14 * phi.l2_norm()

    def test_divergence_free_unchanged(self):
        g = Grid(8, 8, 0)
        _, x2, _ = g.meshes()
        f = SpectralField.from_physical(g, np.cos(x2))
        st = leray_project(f, SpectralField.zeros(g), SpectralField.zeros(g))
        assert np.max(np.abs(st.u1.coeffs - f.coeffs)) < 1e-15

    def test_against_dense_oracle(self):
        g = Grid(4, 4, 0)
        x1, _, _ = g.meshes()
        v1 = SpectralField.from_physical(g, np.sin(x1))
        v2 = white_noise(g, 5)
        v3 = white_noise(g, 6)
        st = leray_project(v1, v2, v3)
        oracle = dense_leray_oracle(g, [v1.coeffs.copy(), v2.coeffs.copy(), v3.coeffs.copy()])
        for got, want in zip(st.components(), oracle):
            assert np.max(np.abs(got.coeffs - want)) < 1e-14

    def test_idempotent(self):
        g = Grid(16, 16, 0)
        st = leray_project(white_noise(g, 7), white_noise(g, 8), white_noise(g, 9))
        st2 = leray_project(*st.components())
        for a, b in zip(st.components(), st2.components()):
            assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-12 * np.max(np.abs(a.coeffs))

    def test_commutes_with_derivative(self):
        g = Grid(16, 16, 0)
        comps = [white_noise(g, s) for s in (10, 11, 12)]
        left = leray_project(*[c.derivative(3) for c in comps])
        right_state = leray_project(*comps)
        right = [c.derivative(3) for c in right_state.components()]
        for a, b in zip(left.components(), right):
            assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-12 * max(np.max(np.abs(a.coeffs)), 1e-300)

    def test_divergence_residual(self):
        g = Grid(16, 16, 0)
        st = leray_project(white_noise(g, 13), white_noise(g, 14), white_noise(g, 15))
        assert st.divergence_residual() < 1e-13


class TestDealias:
    def test_supported_inside_ball_unchanged(self):
        g = Grid(16, 16, 0)
        c = np.zeros(g.shape, dtype=np.complex128)
        c[5, 0, 0] = 0.5j
        c[-5, 0, 0] = -0.5j
        f = SpectralField(g, c)
        assert np.array_equal(f.dealias().coeffs, f.coeffs)

    def test_nyquist_mode_zeroed(self):
        g = Grid(16, 16, 0)
        c = np.zeros(g.shape, dtype=np.complex128)
        c[8, 0, 0] = 1.0
        f = SpectralField(g, c)
        assert f.dealias().l2_norm() == 0.0

    def test_idempotent_exact(self):
        g = Grid(16, 16, 0)
        f = white_noise(g, 20)
        once = f.dealias()
        assert np.array_equal(once.coeffs, once.dealias().coeffs)

    def test_product_against_padded_oracle(self):
        # dealiased pseudo-spectral product of in-ball fields equals the
        # alias-free product computed on a 2x zero-padded grid
        g = Grid(16, 16, 0)
        rng = np.random.default_rng(21)
        f = white_noise(g, 22).dealias()
        h = white_noise(g, 23).dealias()
        prod = multiply(f, h)

        fine = Grid(32, 32, 0)
        ff = spectral_inject(f, fine)
        hf = spectral_inject(h, fine)
        exact = ff.to_physical() * hf.to_physical()
        exact_spec = np.fft.fftn(exact) / fine.npoints
        idx = np.fft.fftfreq(g.n_h, 1 / g.n_h).astype(int)
        idxv = np.fft.fftfreq(g.n_v, 1 / g.n_v).astype(int)
        coarse = exact_spec[np.ix_(idx % 32, idx % 32, idxv % 32)]
        oracle = SpectralField(g, coarse).dealias()
        assert np.max(np.abs(prod.coeffs - oracle.coeffs)) < 1e-13 * np.max(np.abs(oracle.coeffs))


class TestEmbed:
    def test_x3_independent_unchanged(self):
        g = Grid(8, 8, 0)
        x1, _, _ = g.meshes()
        f = SpectralField.from_physical(g, np.cos(x1))
        out = slowly_varying_embed(f, 3)
        assert out.grid.m == 3
        assert np.array_equal(out.coeffs, f.coeffs)

    def test_single_mode_relabels(self):
        g = Grid(8, 16, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(x3))
        out = slowly_varying_embed(f, 1)
        _, _, y3 = out.grid.meshes()
        assert np.max(np.abs(out.to_physical() - np.broadcast_to(np.sin(y3 / 2), out.grid.shape))) < 1e-13
        assert np.sum(np.abs(out.coeffs) > 1e-14) == 2

    def test_l2_scaling_by_quadrature(self):
        # ||[f]_eps||_L2 = eps^{-1/2} ||f||_L2, with both sides evaluated by
        # physical-space quadrature on their own grids
        g = Grid(8, 16, 0)
        f = white_noise(g, 30)
        m = 2
        out = slowly_varying_embed(f, m)
        q_unit = np.sqrt(np.mean(f.to_physical() ** 2) * g.volume)
        q_str = np.sqrt(np.mean(out.to_physical() ** 2) * out.grid.volume)
        assert q_str / q_unit == pytest.approx(2.0 ** (m / 2), rel=1e-12)

    def test_rejects_bad_input(self):
        g = Grid(8, 8, 1)
        f = SpectralField.zeros(g)
        with pytest.raises(ValueError):
            slowly_varying_embed(f, 1)
        with pytest.raises(ValueError):
            slowly_varying_embed(SpectralField.zeros(Grid(8, 8, 0)), -1)

    def test_unstretch_inverts(self):
        g = Grid(8, 16, 0)
        f = white_noise(g, 31)
        assert np.array_equal(unstretch(slowly_varying_embed(f, 2)).coeffs, f.coeffs)


class TestHermitian:
    def test_hermitize_projects(self):
        g = Grid(8, 8, 0)
        rng = np.random.default_rng(40)
        c = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        h = hermitize(c)
        f = SpectralField(g, h)
        phys = np.fft.ifftn(h) * g.npoints
        assert np.max(np.abs(phys.imag)) < 1e-12 * np.max(np.abs(phys.real))
        assert np.max(np.abs(hermitize(h) - h)) < 1e-15

    def test_product_enforces_symmetry(self):
        g = Grid(16, 16, 0)
        f = white_noise(g, 41)
        h = white_noise(g, 42)
        prod = multiply(f, h)
        assert np.max(np.abs(prod.coeffs - hermitize(prod.coeffs))) == 0.0
