import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wrmf import finite_volume as fv
from wrmf.landscape import E, ModelParams, global_maximizers
from wrmf.phase import order_parameter, pressure, two_component_eos
from wrmf.special import f, u

# frozen oracles (tests/oracles.py): 200-digit single sums, 40-digit double sums
F_V_1_0_5 = 0.683512504065003666489
F_V_1_1_10 = 1.46539505256670586917
F_V_2_M1_20 = 0.2756842769813349788322
LOG_XI_V3 = {
    (1.0, 0.0, 0.0): 4.541084770775444977021,
    (1.0, 1.0, -0.5): 8.352730890227002221795,
    (2.0, 1.5, 1.5): 14.16150326918437042611,
}

axv_st = st.tuples(st.floats(0.1, 5.0), st.floats(-3.0, 3.0), st.floats(1.0, 2000.0))


class TestSingleSeries:
    def test_high_precision_oracle(self):
        assert fv.f_V(1.0, 0.0, 5.0) == pytest.approx(F_V_1_0_5, rel=1e-14)
        assert fv.f_V(1.0, 1.0, 10.0) == pytest.approx(F_V_1_1_10, rel=1e-14)
        assert fv.f_V(2.0, -1.0, 20.0) == pytest.approx(F_V_2_M1_20, rel=1e-14)

    def test_free_gas(self):
        for x in (-1.0, 0.0, 1.5):
            assert fv.f_V(1e-12, x, 30.0) == pytest.approx(math.exp(x), abs=1e-8)

    def test_sandwich_example(self):
        val = fv.f_V(1.0, 1.0, 10.0)
        assert f(1.0, 0.95) <= val <= f(1.0, 1.05)

    @given(axv_st)
    @settings(max_examples=60)
    def test_sandwich_and_distance_bound(self, axv):
        a, x, V = axv
        val = fv.f_V(a, x, V)
        s = a / (2 * V)
        assert f(a, x - s) * (1 - 1e-13) <= val <= f(a, x + s) * (1 + 1e-13)
        # V0 = 1
        assert abs(val - f(a, x)) <= s * u(a, x + a / 2.0) * (1 + 1e-12)

    def test_u_V_half_over_V_example(self):
        assert abs(fv.u_V(1.0, 1.0, 100.0) - 1.0) <= 1.0 / 200.0

    def test_u_V_rate(self):
        errs = [abs(fv.u_V(1.0, 1.0, V) - 1.0) for V in (10.0, 100.0, 1000.0)]
        for V, e in zip((10.0, 100.0, 1000.0), errs):
            assert e <= 1 / (2 * V)
        assert errs[0] > errs[1] > errs[2]

    def test_u_V_is_derivative(self):
        h = 1e-6
        for a, x, V in [(1.0, 0.3, 20.0), (3.0, -1.0, 100.0)]:
            fd = (fv.f_V(a, x + h, V) - fv.f_V(a, x - h, V)) / (2 * h)
            assert fv.u_V(a, x, V) == pytest.approx(fd, abs=1e-6)

    def test_moment_derivatives(self):
        h = 1e-5
        a, x, V = 1.5, 0.7, 40.0
        fd1 = (fv.u_V(a, x + h, V) - fv.u_V(a, x - h, V)) / (2 * h)
        fd2 = (fv.u_V_prime(a, x + h, V) - fv.u_V_prime(a, x - h, V)) / (2 * h)
        assert fv.u_V_prime(a, x, V) == pytest.approx(fd1, rel=1e-7)
        assert fv.u_V_second(a, x, V) == pytest.approx(fd2, rel=1e-5, abs=1e-9)

    @given(axv_st)
    @settings(max_examples=80)
    def test_u_V_bounds(self, axv):
        a, x, V = axv
        s = a / (2 * V)
        uv = fv.u_V(a, x, V)
        assert u(a, x - s) * (1 - 1e-12) <= uv <= u(a, x + s) * (1 + 1e-12)
        assert abs(uv - u(a, x)) <= 1 / (2 * V)
        up = fv.u_V_prime(a, x, V)
        assert 0.0 <= up <= uv * (1 + 1e-12)

    @pytest.mark.parametrize("a", [0.5, 2.0])
    def test_u_V_second_bounded(self, a):
        xs = np.linspace(-3, 3, 13)
        ref = max(abs(fv.u_V_second(a, float(x), 10.0)) for x in xs)
        for V in (100.0, 1000.0):
            assert max(abs(fv.u_V_second(a, float(x), V)) for x in xs) <= 1.5 * ref

    def test_truncation_certified(self):
        st_ = fv.truncation(1.0, 2.0, 500.0)
        assert st_.tail_bound <= 1e-14
        peak = math.ceil(500.0 * u(1.0, 2.0 + 1.0 / 1000.0))
        assert st_.n_max >= peak

    def test_invalid(self):
        with pytest.raises(ValueError):
            fv.f_V(1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            fv.f_V(-1.0, 0.0, 1.0)


class TestMode:
    def test_mode_interval_example(self):
        lo, hi = fv.mode_bounds(1.0, 1.0, 100.0)
        vu = 100.0 * u(1.0, 1.005)
        assert lo >= vu - 1 - 1e-9 and hi <= vu + 1e-9
        assert lo <= fv.mode(1.0, 1.0, 100.0) <= hi

    def test_brute_force(self):
        # argmax over n <= 50 of n ln V - ln n! + x n - a n^2 / 2V, V = 1, a = 1, x = 0
        assert fv.mode(1.0, 0.0, 1.0) == 0
        n = np.arange(0, 51)
        from scipy.special import gammaln

        logs = n * math.log(7.0) + 0.4 * n - gammaln(n + 1) - 2.0 * n**2 / 14.0
        assert fv.mode(2.0, 0.4, 7.0) == int(np.argmax(logs))

    @given(axv_st)
    @settings(max_examples=20)
    def test_mode_near_mean(self, axv):
        a, x, V = axv
        fv.mode_bounds(a, x, V)
        m = fv.series_moments(a, x, V)
        assert abs(m.mode - m.mean) <= 1.0


FV_POINTS = [
    ModelParams(1.0, 2.0, 0.0),
    ModelParams(1.0, 2.0, 2.0),
    ModelParams(2.0, 0.3, 1.1),
    ModelParams(0.5, 3.0, 3.0),
    ModelParams(3.0, 0.0, 0.0),
]


class TestLandscapeV:
    def test_symmetry(self):
        p = ModelParams(1.0, 1.7, 1.7)
        for y in (0.0, 0.5, 2.0):
            assert fv.E_V(p, y, 30.0) == pytest.approx(fv.E_V(p, -y, 30.0), rel=1e-15)

    def test_distance_bound_on_landscape(self):
        p = ModelParams(1.0, 2.0, 2.0)
        yb = order_parameter(1.0, 2.0)
        bound = 2 * (1 / 100) * u(1.0, 2.0 + yb + 0.01)
        for y in np.linspace(-3, 3, 13):
            assert abs(fv.E_V(p, float(y), 50.0) - E(p, float(y))) <= bound

    def test_derivatives(self):
        p = ModelParams(1.2, 0.4, 0.9)
        h = 1e-5
        for y in (-1.0, 0.2, 1.5):
            fd1 = (fv.E_V(p, y + h, 25.0) - fv.E_V(p, y - h, 25.0)) / (2 * h)
            fd2 = (fv.E_V1(p, y + h, 25.0) - fv.E_V1(p, y - h, 25.0)) / (2 * h)
            assert fv.E_V1(p, y, 25.0) == pytest.approx(fd1, abs=1e-7)
            assert fv.E_V2(p, y, 25.0) == pytest.approx(fd2, abs=1e-6)

    @pytest.mark.parametrize("p", [ModelParams(1.0, 2.0, 0.0), ModelParams(1.0, 2.0, 2.0)])
    def test_maximizer_rate(self, p):
        ys = max(global_maximizers(p).maximizers)
        Vs = np.array([50.0, 100.0, 200.0, 400.0])
        errs = np.array([abs(fv.y_star_V(p, V) - ys) for V in Vs])
        C = errs * Vs
        assert np.all(np.diff(errs) < 0)
        # the fitted constant is stable: spread under 10%
        assert C.max() / C.min() < 1.1
        slope = np.polyfit(np.log(Vs), np.log(errs), 1)[0]
        assert slope <= -0.9


class TestPartitionFunction:
    @pytest.mark.parametrize("key", sorted(LOG_XI_V3))
    def test_double_sum_oracle(self, key):
        assert fv.log_Xi_series(ModelParams(*key), 3.0) == pytest.approx(LOG_XI_V3[key], rel=1e-13)

    def test_free_gas(self):
        p = ModelParams(1e-12, 0.5, -0.3)
        V = 40.0
        assert fv.log_Xi_series(p, V) == pytest.approx(V * (math.exp(0.5) + math.exp(-0.3)), rel=1e-6)

    def test_integral_example(self):
        p = ModelParams(1.0, 1.0, 0.0)
        s, q = fv.log_Xi_series(p, 20.0), fv.log_Xi_integral(p, 20.0)
        assert abs(s - q) <= 1e-8 * abs(s)

    @pytest.mark.parametrize("p", FV_POINTS)
    @pytest.mark.parametrize("V", [10.0, 100.0])
    def test_representations_agree(self, p, V):
        s, q = fv.log_Xi_series(p, V), fv.log_Xi_integral(p, V)
        assert abs(s - q) <= 1e-8 * (1 + abs(s))

    def test_symmetric_peaks(self):
        p = ModelParams(1.0, 2.0, 2.0)
        peaks = fv._landscape_peaks(p, 100.0)
        assert len(peaks) == 2
        assert peaks[0] == pytest.approx(-peaks[1], rel=1e-10)
        assert fv.E_V(p, peaks[0], 100.0) == pytest.approx(fv.E_V(p, peaks[1], 100.0), rel=1e-14)

    def test_laplace(self):
        p = ModelParams(1.0, 2.0, 0.0)
        gaps = [abs(fv.log_Xi_series(p, V) - fv.laplace_log_Xi(p, V)) for V in (25.0, 100.0, 400.0)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-2

    def test_thermodynamic_limit(self):
        p = ModelParams(1.0, 2.0, 0.0)
        target = pressure(p)
        F = [fv.F_Lambda(p, V) for V in (50.0, 100.0, 200.0, 400.0, 800.0)]
        errs = [abs(x - target) for x in F]
        assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))
        assert abs(2 * F[-1] - F[-2] - target) <= 1e-3
        assert errs[-1] <= 5e-3
        assert fv.limit_pressure(p) == pytest.approx(target, rel=1e-15)


class TestDerivativesF:
    def test_R_point(self):
        p = ModelParams(1.0, 2.0, 0.0)
        ys = global_maximizers(p).maximizers[0]
        F0, _ = fv.F_derivatives(p, 200.0)
        assert abs(F0 - u(1.0, 2.0 + ys)) <= 5e-3

    def test_M_point(self):
        p = ModelParams(1.0, 2.0, 2.0)
        yb = order_parameter(1.0, 2.0)
        mix = 0.5 * (u(1.0, 2.0 - yb) + u(1.0, 2.0 + yb))
        F0, F1 = fv.F_derivatives(p, 200.0)
        assert abs(F0 - mix) <= 5e-3 and abs(F1 - mix) <= 5e-3

    @pytest.mark.parametrize("p", FV_POINTS[:3])
    def test_finite_difference_of_log_Xi(self, p):
        V, h = 60.0, 1e-4

        def F(m0, m1):
            return fv.log_Xi_series(ModelParams(p.a, m0, m1), V) / V

        def d0(k):
            return (F(p.mu0 + k, p.mu1) - F(p.mu0 - k, p.mu1)) / (2 * k)

        def d1(k):
            return (F(p.mu0, p.mu1 + k) - F(p.mu0, p.mu1 - k)) / (2 * k)

        # one Richardson step, the third derivative is of order V near coexistence
        fd0 = (4 * d0(h / 2) - d0(h)) / 3
        fd1 = (4 * d1(h / 2) - d1(h)) / 3
        for method in ("quadrature", "series"):
            F0, F1 = fv.F_derivatives(p, V, method)
            assert F0 == pytest.approx(fd0, abs=1e-6)
            assert F1 == pytest.approx(fd1, abs=1e-6)

    def test_bad_method(self):
        with pytest.raises(ValueError):
            fv.F_derivatives(ModelParams(1.0, 0.0, 0.0), 10.0, "simpson")


class TestCorrelations:
    def test_effective_mu_converges(self):
        p = ModelParams(1.0, 2.0, 0.0)
        ys = global_maximizers(p).maximizers[0]
        lim0 = 2.0 - u(1.0, 0.0 - ys)
        lim1 = 0.0 - u(1.0, 2.0 + ys)
        gaps = []
        for V in (100.0, 400.0):
            m0, m1 = fv.effective_mu(p, V, 1, 1)
            gaps.append(max(abs(m0 - lim0), abs(m1 - lim1)))
        assert gaps[1] < gaps[0]

    def test_effective_mu_free(self):
        p = ModelParams(1e-12, 0.3, -0.2)
        m0, m1 = fv.effective_mu(p, 50.0, 2, 3)
        assert m0 == pytest.approx(0.3, abs=1e-8) and m1 == pytest.approx(-0.2, abs=1e-8)

    def test_effective_mu_degenerate(self):
        p = ModelParams(1.0, 1.0, 0.5)
        V = 40.0
        F0, F1 = fv.F_derivatives(p, V, "series")
        m0, m1 = fv.effective_mu(p, V, 0, 0)
        assert m0 == pytest.approx(1.0 - F1, rel=1e-14)
        assert m1 == pytest.approx(0.5 - F0, rel=1e-14)

    def test_effective_mu_methods_agree(self):
        p = ModelParams(1.0, 1.2, 0.4)
        a = fv.effective_mu(p, 30.0, 2, 1, "series")
        b = fv.effective_mu(p, 30.0, 2, 1, "quadrature")
        assert a == pytest.approx(b, abs=1e-9)

    def test_effective_mu_invalid(self):
        with pytest.raises(ValueError):
            fv.effective_mu(ModelParams(1.0, 0.0, 0.0), 10.0, -1, 0)

    def test_correlation_values(self):
        p = ModelParams(1.0, 2.0, 0.0)
        assert fv.correlation_fn(p, 50.0, 0, 0) == 1.0
        free = ModelParams(1e-12, 0.3, -0.2)
        assert fv.correlation_fn(free, 50.0, 2, 1) == pytest.approx(math.exp(0.6 - 0.2), rel=1e-8)

    def test_correlation_poisson_limit(self):
        p = ModelParams(1.0, 2.0, 0.0)
        pt = two_component_eos(p)[0]
        k = fv.correlation_fn(p, 400.0, 2, 1)
        assert k == pytest.approx(pt.z0**2 * pt.z1, rel=0.01)

    def test_report(self):
        p = ModelParams(1.0, 2.0, 0.0)
        rep = fv.finite_volume_report(p, 100.0)
        assert rep.F_Lambda == fv.F_Lambda(p, 100.0)
        assert abs(rep.u_V0 - u(1.0, 2.0 + rep.y_star_V)) <= 1 / 200
        assert rep.mu_tilde0 < 2.0 and rep.mu_tilde1 < 0.0
