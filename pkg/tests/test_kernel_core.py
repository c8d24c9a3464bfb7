import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermalcat import fock_oracle as fo
from thermalcat import kernel_core as kc


def thermal_state(V, d):
    return kc.PhaseSpaceState.from_terms([kc.ThermalKernel(V, d, [1], [1])])


def parity_cat(V, d, phi, sign):
    """(1 + sign e^{i phi n}) rho_th (1 + sign e^{-i phi n}), normalized."""
    e = np.exp(1j * phi)
    terms = [kc.ThermalKernel(V, d, [1], [1]),
             kc.ThermalKernel(V, d, [e], [e]),
             kc.ThermalKernel(V, d, [e], [1], sign),
             kc.ThermalKernel(V, d, [1], [e], sign)]
    return kc.PhaseSpaceState.from_terms(terms).normalize()


def rotated_thermal_fock(V, d, phi, sign, cutoff=50):
    rho = fo.thermal_fock(V, d, cutoff=cutoff).matrix
    ph = np.exp(1j * phi * np.arange(rho.shape[0]))
    U = np.diag(ph)
    m = rho + U @ rho @ U.conj().T + sign * (U @ rho) + sign * (rho @ U.conj().T)
    m = m / np.trace(m)
    return fo.FockDensityMatrix(m, (rho.shape[0],))


class TestKernelBasics:
    def test_thermal_trace_is_one(self):
        k = kc.ThermalKernel(3.0, 1.0 + 0.5j, [1], [1])
        assert kc.kernel_trace(k) == pytest.approx(1.0, abs=1e-14)

    def test_sigma_trace(self):
        # mirrored kernel: exp(-2 d^2/V)/V
        k = kc.ThermalKernel(4.0, 1.0, [-1], [1])
        want = math.exp(-2.0 / 4.0) / 4.0
        assert kc.kernel_trace(k) == pytest.approx(want, abs=1e-15)
        assert kc.kernel_trace(k) == pytest.approx(0.15163266492815836, abs=1e-12)

    def test_pure_sigma_trace(self):
        k = kc.ThermalKernel(1.0, 0.8, [-1], [1])
        assert kc.kernel_trace(k) == pytest.approx(math.exp(-2 * 0.64), abs=1e-15)

    def test_invalid_variance(self):
        with pytest.raises(ValueError):
            kc.ThermalKernel(0.5, 0.0, [1], [1])

    def test_scale_length_mismatch(self):
        with pytest.raises(ValueError):
            kc.ThermalKernel(2.0, 0.0, [1, 1], [1])

    def test_published_accessors(self):
        k = kc.ThermalKernel(3.0, 0.7j, [1, -1], [1, 1], weight=0.5j)
        assert k.variance == 3.0
        assert k.center == 0.7j
        assert np.allclose(k.left_scales, [1, -1])
        assert np.allclose(k.right_scales, [1, 1])
        assert k.weight == 0.5j
        assert k.n_modes == 2

    def test_v_equal_one_collapses(self):
        k = kc.ThermalKernel(1.0, 0.9, [1], [1])
        assert k.n_vars == 0
        assert k.variance == 1.0


class TestWignerValues:
    def test_thermal_peak(self):
        for V in (1.0, 2.0, 7.0):
            st_ = thermal_state(V, 1.3 - 0.4j)
            got = kc.state_wigner(st_, 1.3 - 0.4j)
            assert got == pytest.approx(2.0 / (math.pi * V), abs=1e-14)

    def test_vacuum_origin(self):
        assert kc.state_wigner(thermal_state(1.0, 0.0), 0.0) == pytest.approx(
            2.0 / math.pi, abs=1e-15)

    def test_coherent_gaussian(self):
        a = 0.7 - 0.3j
        st_ = thermal_state(1.0, a)
        for b in (0.0, 0.2 + 0.5j, -1.0j):
            want = (2.0 / math.pi) * math.exp(-2 * abs(b - a) ** 2)
            assert kc.state_wigner(st_, b) == pytest.approx(want, abs=1e-14)

    def test_cross_kernel_vs_oracle(self):
        V, d, phi = 3.0, 1.0, math.pi
        k = kc.ThermalKernel(V, d, [np.exp(1j * phi)], [1])
        rho = fo.thermal_fock(V, d, cutoff=50).matrix
        ph = np.exp(1j * phi * np.arange(rho.shape[0]))
        cross = fo.FockDensityMatrix(ph[:, None] * rho, (rho.shape[0],))
        got = kc.kernel_wigner(k, 0.0)
        want = fo.fock_wigner(cross, 0.0)
        assert abs(got - want) < 1e-8

    def test_odd_cat_origin_value(self):
        # any V, d: the minus combination pins W(0) = -2/pi
        for (V, d) in [(5.0, 1.3), (2.0, 0.4), (50.0, 3.0)]:
            st_ = parity_cat(V, d, math.pi, -1.0)
            assert kc.state_wigner(st_, 0.0) == pytest.approx(-2 / math.pi, abs=1e-12)

    def test_thermal_origin_value(self):
        V = 9.0
        assert kc.state_wigner(thermal_state(V, 0.0), 0.0) == pytest.approx(
            2.0 / (math.pi * V), abs=1e-15)

    def test_wigner_bound_sampled(self):
        st_ = parity_cat(4.0, 1.1, math.pi / 2, -1.0)
        xs = np.linspace(-3, 3, 13)
        pts = (xs[:, None] + 1j * xs[None, :]).ravel()[:, None]
        vals = kc._wigner_batch(st_, pts)
        assert vals.min() >= -2.0 / math.pi - 1e-9

    def test_hermiticity_violation_raises(self):
        # a lone cross term has no conjugate partner
        bad = kc.PhaseSpaceState.from_terms(
            [kc.ThermalKernel(3.0, 1.0, [1j], [1])])
        with pytest.raises(ValueError, match="residue"):
            kc.state_wigner(bad, 0.3)

    def test_cat_grid_vs_oracle(self):
        for (V, d, phi) in [(1.0, 1.0, math.pi), (3.0, 1.0, math.pi / 16),
                            (3.0, 0.0, math.pi / 2)]:
            st_ = parity_cat(V, d, phi, -1.0)
            mf = rotated_thermal_fock(V, d, phi, -1.0)
            xs = np.linspace(-2, 2, 5)
            for x in xs:
                for y in xs:
                    got = kc.state_wigner(st_, x + 1j * y)
                    want = fo.fock_wigner(mf, x + 1j * y).real
                    assert abs(got - want) < 1e-8

    def test_grid_integral_normalized(self):
        st_ = parity_cat(3.0, 1.0, math.pi, -1.0)
        lim = 1.0 + 6 * math.sqrt(3.0)
        n = 161
        xs = np.linspace(-lim, lim, n)
        pts = np.stack(np.meshgrid(xs, xs, indexing="ij"), -1).reshape(-1, 2)
        vals = kc._wigner_batch(st_, (pts[:, 0] + 1j * pts[:, 1])[:, None])
        step = xs[1] - xs[0]
        assert vals.sum() * step * step == pytest.approx(1.0, abs=1e-3)


class TestStateAlgebra:
    def test_normalize(self):
        st_ = kc.PhaseSpaceState.from_terms(
            [kc.ThermalKernel(3.0, 0.5, [1], [1], weight=0.7)])
        nn = st_.normalize()
        assert abs(nn.trace() - 1.0) < 1e-12

    def test_trace_zero_rejected(self):
        st_ = kc.PhaseSpaceState.from_terms(
            [kc.ThermalKernel(2.0, 0.0, [1], [1], weight=1.0),
             kc.ThermalKernel(2.0, 0.0, [1], [1], weight=-1.0)])
        with pytest.raises(ValueError):
            st_.normalize()

    def test_adjoint_involution(self):
        k = kc.ThermalKernel(3.0, 1.0, [np.exp(0.3j)], [1], weight=0.2 - 0.1j)
        kk = k.adjoint().adjoint()
        assert k.allclose(kk, atol=0.0)

    def test_tensor_product_wigner_factorizes(self):
        a = thermal_state(3.0, 1.0)
        b = thermal_state(1.0, -0.5j)
        ab = a.tensor(b)
        for (p, q) in [(0.3, 0.1j), (1.0, -0.2)]:
            w = kc.state_wigner(ab, (p, q))
            assert w == pytest.approx(
                kc.state_wigner(a, p) * kc.state_wigner(b, q), abs=1e-13)

    def test_kernel_product_swap_trace(self):
        # int P_d(a) P_{-d}(b) |a,b><b,a| plus adjoint: trace is real
        ka = kc.kernel_product(
            kc.ThermalKernel(3.0, 1.0, [1, 0], [0, 1]),
            kc.ThermalKernel(3.0, -1.0, [0, 1], [1, 0]))
        st_ = kc.PhaseSpaceState.from_terms([ka, ka.adjoint()])
        tr = st_.trace()
        assert abs(tr.imag) < 1e-14
        assert tr.real > 0


class TestGaussianOps:
    def test_bs_5050_coherent(self):
        a = 0.9
        st_ = kc.PhaseSpaceState.from_terms([kc.ThermalKernel(1.0, a, [1, 0], [1, 0])])
        out = kc.apply_beam_splitter(st_, 0, 1, math.pi / 2)
        k = out.terms[0]
        assert k.ket_offsets[0] == pytest.approx(a / math.sqrt(2), abs=1e-14)
        assert k.ket_offsets[1] == pytest.approx(-a / math.sqrt(2), abs=1e-14)

    def test_bs_theta_zero_identity(self):
        st_ = parity_cat(2.0, 0.7, math.pi, 1.0).tensor(thermal_state(1.0, 0.0))
        out = kc.apply_beam_splitter(st_, 0, 1, 0.0)
        for ka, kb in zip(st_.terms, out.terms):
            assert ka.allclose(kb, atol=0.0)

    def test_bs_conserves_trace_purity_photons(self):
        st_ = parity_cat(3.0, 1.0, math.pi, -1.0).tensor(thermal_state(2.0, 0.5))
        out = kc.apply_beam_splitter(st_, 0, 1, 1.1, 0.3)
        assert abs(out.trace() - st_.trace()) < 1e-12
        assert kc.hs_overlap(out, out) == pytest.approx(
            kc.hs_overlap(st_, st_), abs=1e-12)
        n_in = sum(kc.moments(st_, m).mean_photon for m in (0, 1))
        n_out = sum(kc.moments(out, m).mean_photon for m in (0, 1))
        assert n_out == pytest.approx(n_in, abs=1e-10)

    def test_phase_shift_period(self):
        st_ = thermal_state(3.0, 1.5)
        out = kc.apply_phase_shift(kc.apply_phase_shift(st_, 0, math.pi), 0, math.pi)
        for p in (0.2, 1j, 1.0 - 0.3j):
            assert kc.state_wigner(out, p) == pytest.approx(
                kc.state_wigner(st_, p), abs=1e-13)

    def test_phase_shift_rotates_wigner(self):
        st_ = thermal_state(2.0, 1.0)
        out = kc.apply_phase_shift(st_, 0, math.pi / 3)
        rot = np.exp(1j * math.pi / 3)
        for p in (0.2, 0.5 + 0.1j):
            assert kc.state_wigner(out, p * rot) == pytest.approx(
                kc.state_wigner(st_, p), abs=1e-13)

    def test_displacement_recenters_thermal(self):
        st_ = thermal_state(3.0, 1.5)
        out = kc.apply_displacement(st_, 0, -1.5)
        ref = thermal_state(3.0, 0.0)
        for p in (0.0, 0.3 + 0.2j, -1.0, 2j):
            assert kc.state_wigner(out, p) == pytest.approx(
                kc.state_wigner(ref, p), abs=1e-10)

    def test_displacement_covariance_on_cat(self):
        st_ = parity_cat(2.0, 0.6, math.pi / 2, -1.0)
        g = 0.4 - 0.3j
        out = kc.apply_displacement(st_, 0, g)
        for p in (0.0, 0.5, -0.2 + 0.7j):
            assert kc.state_wigner(out, p + g) == pytest.approx(
                kc.state_wigner(st_, p), abs=1e-12)

    def test_parity_is_pi_phase(self):
        st_ = parity_cat(2.0, 0.6, math.pi / 2, 1.0)
        a = kc.apply_parity(st_, 0)
        b = kc.apply_phase_shift(st_, 0, math.pi)
        for ka, kb in zip(a.terms, b.terms):
            assert ka.allclose(kb, atol=1e-15)


class TestPartialTrace:
    def test_product_reduces_to_factor(self):
        a = parity_cat(3.0, 1.0, math.pi, -1.0)
        b = thermal_state(2.0, 0.4j)
        red = kc.partial_trace(a.tensor(b), [0])
        for p in (0.0, 0.5, 1j):
            assert kc.state_wigner(red, p) == pytest.approx(
                kc.state_wigner(a, p), abs=1e-12)

    def test_entangled_reduction_vs_oracle(self):
        # int P_+d(a) P_+d(b) (|a,b><b,a| + h.c.), reduced mode vs oracle
        V, d = 3.0, 1.0
        ka = kc.kernel_product(
            kc.ThermalKernel(V, d, [1, 0], [0, 1]),
            kc.ThermalKernel(V, d, [0, 1], [1, 0]))
        st_ = kc.PhaseSpaceState.from_terms([ka, ka.adjoint()]).normalize()
        red = kc.partial_trace(st_, [0])
        rho = fo.thermal_fock(V, d, cutoff=50).matrix
        dim = rho.shape[0]
        big = np.kron(rho, rho)
        swap = np.zeros((dim * dim, dim * dim))
        for i in range(dim):
            for j in range(dim):
                swap[i * dim + j, j * dim + i] = 1.0
        m = swap @ big
        m = m + m.conj().T
        m = m / np.trace(m)
        mf = fo.FockDensityMatrix(m, (dim, dim))
        red_f = fo.partial_trace(mf, [0])
        for p in (0.0, 0.5, 1.0 + 0.3j):
            assert kc.state_wigner(red, p) == pytest.approx(
                fo.fock_wigner(red_f, p).real, abs=1e-8)


class TestMarginals:
    def test_vacuum_marginal(self):
        mix = kc.marginal_distribution(thermal_state(1.0, 0.0), 0, 0.0)
        xs = np.linspace(-3, 3, 31)
        assert np.max(np.abs(mix(xs) - np.exp(-xs ** 2) / math.sqrt(math.pi))) < 1e-14
        assert mix.integral() == pytest.approx(1.0, abs=1e-14)

    def test_thermal_marginal_stats(self):
        mix = kc.marginal_distribution(thermal_state(5.0, 0.8), 0, 0.0)
        assert mix.mean() == pytest.approx(math.sqrt(2) * 0.8, abs=1e-12)
        assert mix.variance() == pytest.approx(2.5, abs=1e-12)

    def test_marginal_vs_oracle_angles(self):
        st_ = parity_cat(3.0, 1.0, math.pi, -1.0)
        mf = rotated_thermal_fock(3.0, 1.0, math.pi, -1.0)
        xs = np.linspace(-5, 5, 41)
        for ang in (0.0, math.pi / 2, math.pi / 3):
            mix = kc.marginal_distribution(st_, 0, ang)
            want = fo.quadrature_density(mf, xs, ang)
            assert np.max(np.abs(mix(xs) - want)) < 1e-8

    def test_marginal_nonnegative_unit(self):
        for st_ in (parity_cat(2.0, 1.2, math.pi / 2, -1.0),
                    parity_cat(5.0, 0.5, math.pi / 16, 1.0)):
            for ang in (0.0, 0.7, math.pi / 2):
                mix = kc.marginal_distribution(st_, 0, ang)
                assert mix.integral() == pytest.approx(1.0, abs=1e-12)
                xs = np.linspace(-8, 8, 400)
                assert mix(xs).min() > -1e-12

    def test_convention_conversion(self):
        st_ = thermal_state(4.0, 1.1)
        m38 = kc.marginal_distribution(st_, 0, 0.0)
        mf1 = kc.marginal_distribution(
            st_, 0, 0.0, convention=kc.QuadratureConvention.ALPHA_REAL)
        us = np.linspace(-3, 3, 17)
        assert np.allclose(mf1(us), math.sqrt(2) * m38(math.sqrt(2) * us),
                           rtol=0, atol=1e-13)
        assert mf1.integral() == pytest.approx(1.0, abs=1e-12)

    def test_cdf_against_quadrature(self):
        from scipy.integrate import quad
        mix = kc.marginal_distribution(parity_cat(3.0, 1.0, math.pi, -1.0),
                                       0, math.pi / 2)
        for x in (-1.0, 0.0, 0.35):
            want, _ = quad(lambda u: mix(u), -20, x, limit=300)
            assert mix.cdf(x) == pytest.approx(want, abs=1e-9)

    def test_second_mode_marginal(self):
        ab = thermal_state(2.0, 0.3).tensor(thermal_state(6.0, -1.0))
        mix = kc.marginal_distribution(ab, 1, 0.0)
        assert mix.mean() == pytest.approx(-math.sqrt(2), abs=1e-12)
        assert mix.variance() == pytest.approx(3.0, abs=1e-12)


class TestFringeMetrics:
    def test_visibility_exact_at_pi(self):
        fm = kc.fringe_metrics(parity_cat(100.0, 100.0, math.pi, -1.0), math.pi / 2)
        assert fm.has_fringes
        assert abs(fm.visibility - 1.0) < 1e-9
        assert fm.spacing == pytest.approx(math.pi / (math.sqrt(2) * 100), rel=1e-12)

    def test_spacing_matches_pure_cat(self):
        s_hot = kc.fringe_metrics(
            parity_cat(1000.0, 300.0, math.pi, -1.0), math.pi / 2).spacing
        s_pure = kc.fringe_metrics(
            parity_cat(1.0, 300.0, math.pi, -1.0), math.pi / 2).spacing
        assert abs(s_hot - s_pure) / s_pure < 1e-6

    def test_small_phi_axis(self):
        phi = math.pi / 1000
        fm = kc.fringe_metrics(parity_cat(5.0, 2000.0, phi, -1.0), phi / 2)
        assert fm.has_fringes
        # honest measurement: central modulation depth misses 1 by ~1.5e-5
        assert fm.visibility > 0.99998
        want = 2 * math.pi / (2 * math.sqrt(2) * 2000 * math.sin(phi / 2))
        assert fm.spacing == pytest.approx(want, rel=1e-9)

    def test_no_fringes_for_thermal(self):
        fm = kc.fringe_metrics(thermal_state(5.0, 1.0), math.pi / 2)
        assert not fm.has_fringes
        assert math.isnan(fm.visibility)

    def test_tuple_unpacking(self):
        v, spacing = kc.fringe_metrics(
            parity_cat(100.0, 100.0, math.pi, -1.0), math.pi / 2)
        assert v == pytest.approx(1.0, abs=1e-9)
        assert spacing > 0


class TestMomentsOverlap:
    def test_thermal_moments(self):
        V, d = 5.0, 0.8
        m = kc.moments(thermal_state(V, d), 0)
        assert m.mean_photon == pytest.approx((V - 1) / 2 + d * d, abs=1e-10)
        assert m.purity == pytest.approx(1.0 / V, abs=1e-12)

    def test_vacuum_moments(self):
        m = kc.moments(thermal_state(1.0, 0.0), 0)
        assert m.mean_photon == pytest.approx(0.0, abs=1e-12)
        assert m.quad_variance == pytest.approx(0.5, abs=1e-12)

    def test_overlap_identities(self):
        vac = thermal_state(1.0, 0.0)
        th = thermal_state(5.0, 0.0)
        assert kc.hs_overlap(vac, vac) == pytest.approx(1.0, abs=1e-13)
        assert kc.hs_overlap(th, th) == pytest.approx(0.2, abs=1e-13)
        c1, c2 = thermal_state(1.0, 1.1), thermal_state(1.0, -1.1)
        assert kc.hs_overlap(c1, c2) == pytest.approx(math.exp(-4 * 1.21), abs=1e-13)
        assert kc.hs_overlap(c1, c2) == pytest.approx(kc.hs_overlap(c2, c1), abs=1e-15)

    def test_overlap_vs_oracle(self):
        a = parity_cat(3.0, 1.0, math.pi, -1.0)
        b = thermal_state(2.0, 0.5)
        ma = rotated_thermal_fock(3.0, 1.0, math.pi, -1.0).matrix
        mb = fo.thermal_fock(2.0, 0.5, cutoff=50).matrix
        n = min(ma.shape[0], mb.shape[0])
        want = np.trace(ma[:n, :n] @ mb[:n, :n]).real
        assert kc.hs_overlap(a, b) == pytest.approx(want, abs=1e-8)


class TestMinWigner:
    def test_odd_cat_min(self):
        st_ = parity_cat(5.0, 1.3, math.pi, -1.0)
        res = kc.min_wigner(st_, [(-2, 2), (-2, 2)])
        assert res.value == pytest.approx(-2 / math.pi, abs=1e-9)
        assert abs(res.point[0]) < 1e-5

    def test_even_hot_cat_nonnegative(self):
        st_ = parity_cat(100.0, 0.0, math.pi, 1.0)
        res = kc.min_wigner(st_, [(-3, 3), (-3, 3)])
        assert res.value >= -1e-9

    def test_region_without_support_warns(self):
        st_ = thermal_state(1.0, 0.0)
        with pytest.warns(UserWarning, match="support"):
            kc.min_wigner(st_, [(40, 41), (40, 41)], grid_points=11)

    def test_callable_target(self):
        f = kc.wigner_evaluator(parity_cat(5.0, 1.3, math.pi, -1.0))
        res = kc.min_wigner(f, [(-2, 2), (-2, 2)])
        assert res.value == pytest.approx(-2 / math.pi, abs=1e-9)


class TestTemperatureMap:
    def test_zero_temperature(self):
        assert kc.temperature_map(1.0) == 0.0

    def test_unit_temperature_anchor(self):
        V = (math.e + 1) / (math.e - 1)
        assert V == pytest.approx(2.163953413738653, abs=1e-15)
        assert kc.temperature_map(V) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_sub_vacuum(self):
        with pytest.raises(ValueError):
            kc.temperature_map(0.99)

    @given(st.floats(min_value=1.0 + 1e-9, max_value=1e6))
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, V):
        tau = kc.temperature_map(V)
        assert kc.variance_from_temperature(tau) == pytest.approx(V, rel=1e-12)


class TestSerialization:
    def test_round_trip_wigner(self):
        st_ = parity_cat(3.0, 1.0, math.pi / 2, -1.0)
        back = kc.state_from_json(kc.state_to_json(st_))
        assert back.modes == st_.modes
        for p in (0.0, 0.4 - 0.2j, 1j):
            assert kc.state_wigner(back, p) == kc.state_wigner(st_, p)

    def test_round_trip_multivar(self):
        ka = kc.kernel_product(
            kc.ThermalKernel(3.0, 1.0, [1, 0], [0, 1]),
            kc.ThermalKernel(2.0, -1.0, [0, 1], [1, 0]))
        st_ = kc.PhaseSpaceState.from_terms([ka, ka.adjoint()])
        back = kc.state_from_json(kc.state_to_json(st_))
        for (p, q) in [(0.1, 0.2), (1j, -0.4j)]:
            assert kc.state_wigner(back, (p, q)) == kc.state_wigner(st_, (p, q))

    def test_rejects_unknown_version(self):
        st_ = thermal_state(2.0, 0.0)
        doc = kc.state_to_json(st_).replace('"version": 1', '"version": 9')
        with pytest.raises(ValueError):
            kc.state_from_json(doc)


@st.composite
def cat_params(draw):
    V = draw(st.floats(min_value=1.0, max_value=20.0))
    d = draw(st.floats(min_value=-2.0, max_value=2.0))
    phi = draw(st.sampled_from([math.pi, math.pi / 2, math.pi / 7, 2.1]))
    sign = draw(st.sampled_from([1.0, -1.0]))
    return V, d, phi, sign


class TestProperties:
    @given(cat_params())
    @settings(max_examples=25, deadline=None)
    def test_normalized_cat_invariants(self, params):
        V, d, phi, sign = params
        try:
            st_ = parity_cat(V, d, phi, sign)
        except ValueError:
            # fully destructive interference (trace ~ 0) is legitimately rejected
            return
        assert abs(st_.trace() - 1.0) < 1e-10
        mix = kc.marginal_distribution(st_, 0, 0.35)
        assert abs(mix.integral() - 1.0) < 1e-10
        xs = np.linspace(-6 - 2 * abs(d), 6 + 2 * abs(d), 101)
        assert mix(xs).min() > -1e-10
        w0 = kc.state_wigner(st_, 0.31 - 0.12j)
        assert w0 >= -2 / math.pi - 1e-9

    @given(st.floats(min_value=0.0, max_value=2 * math.pi),
           st.floats(min_value=0.0, max_value=2 * math.pi))
    @settings(max_examples=20, deadline=None)
    def test_bs_preserves_invariants(self, theta, phi):
        st_ = parity_cat(3.0, 0.8, math.pi, -1.0).tensor(thermal_state(1.5, 0.2))
        out = kc.apply_beam_splitter(st_, 0, 1, theta, phi)
        assert abs(out.trace() - 1.0) < 1e-12
        n_in = sum(kc.moments(st_, m).mean_photon for m in (0, 1))
        n_out = sum(kc.moments(out, m).mean_photon for m in (0, 1))
        assert n_out == pytest.approx(n_in, abs=1e-10)
