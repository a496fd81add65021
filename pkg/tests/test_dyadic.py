"""Dyadic blocks, Besov-type norms, time-block norms, the paraproduct
splitting and the heat-flow norm."""

import numpy as np
import pytest

from anivisc.dyadic import (
    BesovSpec,
    BlockNormCollector,
    CutoffProfile,
    DEFAULT_CUTOFF,
    NormTimeSeries,
    besov_norm,
    bony_vertical_decompose,
    chemin_lerner_norm,
    decompose_vertical,
    geometric_times,
    heat_flow_norm,
    horizontal_block,
    vertical_block,
    vertical_q_range,
)
from anivisc.field import SpectralField, hermitize
from anivisc.grid import Grid

B012 = BesovSpec(0.0, 0.5, "vertical")


def white_noise(grid, seed=0):
    rng = np.random.default_rng(seed)
    return SpectralField.from_physical(grid, rng.standard_normal(grid.shape))


class TestCutoff:
    def test_plateau_and_support(self):
        chi = CutoffProfile()
        assert chi(0.0) == 1.0
        assert chi(1.0) == 1.0
        assert chi(2.0) == 0.0
        assert chi(3.5) == 0.0

    def test_monotone_and_c2(self):
        chi = CutoffProfile()
        t = np.linspace(1.0, 2.0, 2001)
        v = chi(t)
        assert np.all(np.diff(v) <= 1e-15)
        # curvature has no jump at the seams: successive second differences
        # change by O(h * sup|chi'''|), not O(1)
        tt = np.linspace(0.9, 2.1, 4801)
        vv = chi(tt)
        d2 = np.diff(vv, 2) / (tt[1] - tt[0]) ** 2
        assert np.max(np.abs(np.diff(d2))) < 0.1


class TestBlocks:
    def test_power_of_two_mode_single_block(self):
        g = Grid(4, 32, 0)
        c = np.zeros(g.shape, dtype=np.complex128)
        c[0, 0, 4] = -0.5j
        c[0, 0, -4] = 0.5j
        f = SpectralField(g, c)  # sin(4 x3), exact in spectrum
        blk = vertical_block(f, 1)
        assert np.array_equal(blk.coeffs, f.coeffs)
        for q in vertical_q_range(g):
            if q != 1:
                assert vertical_block(f, q).l2_norm() == 0.0

    def test_constant_goes_to_mean(self):
        g = Grid(4, 16, 0)
        f = SpectralField.from_physical(g, np.ones(g.shape))
        dec = decompose_vertical(f)
        for blk in dec.blocks.values():
            assert blk.l2_norm() == 0.0
        assert np.max(np.abs(dec.mean_mode.coeffs - f.coeffs)) == 0.0

    def test_frequency_three_two_blocks(self):
        # |xi_3| = 3 is shared by q = 0 and q = 1 with cutoff-determined
        # weights that sum to one
        g = Grid(4, 32, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(3 * x3))
        chi = DEFAULT_CUTOFF
        w0 = chi(3 / 2) - chi(3.0)
        w1 = chi(3 / 4) - chi(3 / 2)
        b0 = vertical_block(f, 0)
        b1 = vertical_block(f, 1)
        assert b0.l2_norm() == pytest.approx(w0 * f.l2_norm(), rel=1e-12)
        assert b1.l2_norm() == pytest.approx(w1 * f.l2_norm(), rel=1e-12)
        assert w0 + w1 == pytest.approx(1.0)
        scale = np.max(np.abs(f.coeffs))
        assert np.max(np.abs(b0.coeffs + b1.coeffs - f.coeffs)) < 1e-13 * scale
        for q in vertical_q_range(g):
            if q not in (0, 1):
                assert vertical_block(f, q).l2_norm() < 1e-13 * f.l2_norm()

    @pytest.mark.parametrize("m", [0, 2])
    def test_partition_of_unity(self, m):
        g = Grid(8, 32, m)
        f = white_noise(g, 3)
        rec = decompose_vertical(f).reconstruct()
        assert np.max(np.abs(rec.coeffs - f.coeffs)) < 1e-12 * np.max(np.abs(f.coeffs))

    def test_almost_orthogonality_exact(self):
        g = Grid(4, 64, 0)
        f = white_noise(g, 4)
        for q in vertical_q_range(g):
            for qp in vertical_q_range(g):
                if abs(q - qp) >= 2:
                    double = vertical_block(vertical_block(f, q), qp)
                    assert double.l2_norm() == 0.0

    def test_horizontal_block(self):
        g = Grid(32, 4, 0)
        x1, _, _ = g.meshes()
        f = SpectralField.from_physical(g, np.sin(4 * x1))
        blk = horizontal_block(f, 1)
        assert np.max(np.abs(blk.coeffs - f.coeffs)) < 1e-15


class TestBesovNorm:
    def test_single_mode_value(self):
        g = Grid(8, 64, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(4 * x3))
        val = besov_norm(f, B012)
        assert val == pytest.approx(np.sqrt(2) * np.sqrt(g.volume / 2), rel=1e-12)

    def test_zero(self):
        g = Grid(8, 16, 0)
        assert besov_norm(SpectralField.zeros(g), B012) == 0.0

    def test_two_isolated_blocks(self):
        g = Grid(4, 128, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(4 * x3) + np.sin(32 * x3))
        val = besov_norm(f, B012)
        expected = (np.sqrt(2) + 4.0) * np.sqrt(g.volume / 2)
        assert val == pytest.approx(expected, rel=1e-12)

    def test_scaling_exact(self):
        g = Grid(8, 32, 0)
        f = white_noise(g, 5)
        for spec in (B012, BesovSpec(1.0, 0.5, "anisotropic")):
            a = besov_norm(2.75 * f, spec)
            b = 2.75 * besov_norm(f, spec)
            assert a == pytest.approx(b, rel=1e-13)

    def test_index_shift_single_mode(self):
        g = Grid(4, 64, 0)
        _, _, x3 = g.meshes()
        f1 = SpectralField.from_physical(g, np.sin(4 * x3))
        f2 = SpectralField.from_physical(g, np.sin(8 * x3))
        assert f1.l2_norm() == pytest.approx(f2.l2_norm(), rel=1e-13)
        ratio = besov_norm(f2, B012) / besov_norm(f1, B012)
        assert ratio == pytest.approx(np.sqrt(2), rel=1e-12)

    def test_vector_besov(self):
        g = Grid(8, 32, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(4 * x3))
        z = SpectralField.zeros(g)
        single = besov_norm(f, B012)
        vec = besov_norm([f, f, z], B012)
        assert vec == pytest.approx(np.sqrt(2) * single, rel=1e-12)

    def test_x3_independent_anisotropic(self):
        # purely horizontal field: only the vertical-mean row contributes,
        # with horizontal dyadic weights
        g = Grid(32, 8, 0)
        x1, _, _ = g.meshes()
        f = SpectralField.from_physical(g, np.sin(4 * x1))
        # |xi_h| = 4 sits in the j = 1 band alone, weighted 2^(j s)
        for s in (0.0, 1.0):
            val = besov_norm(f, BesovSpec(s, 0.5, "anisotropic"))
            assert val == pytest.approx(2.0**s * f.l2_norm(), rel=1e-12)


class TestCheminLerner:
    def _const_series(self, f, times):
        col = BlockNormCollector("vertical")
        for t in times:
            col.add(t, f)
        return col.series()

    def test_constant_r_inf_equals_besov(self):
        g = Grid(8, 32, 0)
        f = white_noise(g, 6)
        s = self._const_series(f, [0.0, 0.3, 1.0])
        assert chemin_lerner_norm(s, np.inf, B012) == pytest.approx(
            besov_norm(f, B012), rel=1e-13
        )

    def test_constant_r2_scales_sqrt_t(self):
        g = Grid(8, 32, 0)
        f = white_noise(g, 7)
        s = self._const_series(f, np.linspace(0, 2.0, 9))
        assert chemin_lerner_norm(s, 2, B012) == pytest.approx(
            np.sqrt(2.0) * besov_norm(f, B012), rel=1e-12
        )

    def test_exponential_decay_closed_form(self):
        # f(t) = exp(-t) sin(4 x3) on [0, 1], r = 2: time factor
        # sqrt((1 - e^{-2})/2), trapezoid converged at 1e3 snapshots
        g = Grid(4, 32, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(4 * x3))
        col = BlockNormCollector("vertical")
        for t in np.linspace(0.0, 1.0, 1001):
            col.add(t, np.exp(-t) * f)
        val = chemin_lerner_norm(col.series(), 2, B012)
        expected = np.sqrt(2) * f.l2_norm() * np.sqrt((1 - np.exp(-2)) / 2)
        assert val == pytest.approx(expected, abs=1e-4 * expected)

    def test_preconditions(self):
        g = Grid(4, 16, 0)
        f = white_noise(g, 8)
        s = self._const_series(f, [0.0])
        assert chemin_lerner_norm(s, np.inf, B012) > 0
        with pytest.raises(ValueError):
            chemin_lerner_norm(s, 2, B012)
        col = BlockNormCollector("vertical")
        with pytest.raises(ValueError):
            col.series()

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            NormTimeSeries(
                "vertical", np.array([0.0, 0.0]), (0,), None,
                np.zeros((1, 2)), np.zeros(2), None, None, None, None,
            )


class TestBony:
    def test_constant_factor(self):
        g = Grid(8, 32, 0)
        b = white_noise(g, 9)
        c = SpectralField.from_physical(g, 2.5 * np.ones(g.shape))
        t1, t2, r = bony_vertical_decompose(c, b)
        total = t1.coeffs + t2.coeffs + r.coeffs
        assert np.max(np.abs(total - 2.5 * b.coeffs)) < 1e-12 * np.max(np.abs(b.coeffs))

    def test_separated_frequencies_classify(self):
        g = Grid(4, 128, 0)
        _, _, x3 = g.meshes()
        a = SpectralField.from_physical(g, np.sin(4 * x3))
        b = SpectralField.from_physical(g, np.sin(32 * x3))
        t1, t2, r = bony_vertical_decompose(a, b)
        ab = a.to_physical() * b.to_physical()
        scale = np.max(np.abs(ab))
        assert np.max(np.abs(t1.to_physical() - ab)) < 1e-12 * scale
        assert t2.l2_norm() < 1e-12 * scale
        assert r.l2_norm() < 1e-12 * scale

    def test_identity_random(self):
        g = Grid(16, 32, 0)
        a = white_noise(g, 10)
        b = white_noise(g, 11)
        t1, t2, r = bony_vertical_decompose(a, b)
        ab = a.to_physical() * b.to_physical()
        total = t1.to_physical() + t2.to_physical() + r.to_physical()
        assert np.max(np.abs(total - ab)) <= 1e-11 * np.max(np.abs(ab))


class TestHeatFlow:
    def test_zero(self):
        g = Grid(4, 16, 0)
        val = heat_flow_norm(SpectralField.zeros(g), -1.0, np.inf, np.inf, geometric_times(1e-3, 1.0, 40))
        assert val == 0.0

    def test_single_mode_closed_form(self):
        # |xi| = 4: t^(1/2) e^{-16 t} peaks at t = 1/32
        g = Grid(8, 32, 0)
        _, _, x3 = g.meshes()
        f = SpectralField.from_physical(g, np.sin(4 * x3))
        val = heat_flow_norm(f, -1.0, np.inf, np.inf, geometric_times(1e-4, 1.0, 400))
        expected = (1 / 32) ** 0.5 * np.exp(-0.5)
        assert val == pytest.approx(expected, rel=2e-2)

    def test_requires_negative_s(self):
        g = Grid(4, 16, 0)
        with pytest.raises(ValueError):
            heat_flow_norm(SpectralField.zeros(g), 0.5, 2, 2, geometric_times(1e-3, 1, 10))

    def test_requires_geometric_grid(self):
        g = Grid(4, 16, 0)
        with pytest.raises(ValueError):
            heat_flow_norm(SpectralField.zeros(g), -1.0, 2, 2, np.array([0.1, 0.2, 0.25]))

    def test_two_sided_comparison_with_spectral_sum(self):
        # for s = -1, p = r = 2 the squared heat-flow norm equals
        # (vol/2) sum |f_hat|^2 / |xi|^2, an independent spectral oracle
        g = Grid(8, 8, 0)
        rng = np.random.default_rng(12)
        ratios = []
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            c = np.zeros(g.shape, dtype=np.complex128)
            c[1:4, 1:4, 1:4] = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
            f = SpectralField(g, hermitize(c))
            val = heat_flow_norm(f, -1.0, 2, 2, geometric_times(1e-5, 1e2, 600))
            ksq = g.k_sq.copy()
            ksq[0, 0, 0] = 1.0
            oracle = np.sqrt(0.5 * g.volume * np.sum(np.abs(f.coeffs) ** 2 / ksq))
            ratios.append(val / oracle)
        ratios = np.asarray(ratios)
        assert ratios.min() > 0.9
        assert ratios.max() < 1.1
