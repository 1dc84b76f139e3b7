import numpy as np
import pytest

from hiernet.model import StepSizeSchedule
from hiernet.inference import (
    chi2_quantile,
    chi2_tail,
    ci_z_infinity,
    confidence_region,
    normal_quantile,
    pseudo_inverse,
)
from hiernet.inference import test_statistic as structure_test
from hiernet.asymptotics import RegimeError
from hiernet.spectral import (
    Regime,
    build_example2,
    build_sim_network,
    from_user_spectral,
)


class TestPseudoInverse:
    def test_identity(self):
        pinv, rank = pseudo_inverse(np.eye(4))
        assert rank == 4
        assert np.abs(pinv - np.eye(4)).max() < 1e-12

    def test_diagonal_with_zero(self):
        pinv, rank = pseudo_inverse(np.diag([2.0, 0.0]))
        assert rank == 1
        assert np.abs(pinv - np.diag([0.5, 0.0])).max() < 1e-12

    def test_rank_one_ones_matrix(self):
        m = np.ones((4, 4))
        pinv, rank = pseudo_inverse(m)
        assert rank == 1
        assert np.abs(pinv - m / 16.0).max() < 1e-12

    def test_penrose_conditions_engineered_rank(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            n = rng.integers(3, 8)
            r = rng.integers(1, n)
            basis = np.linalg.qr(rng.normal(size=(n, n)))[0][:, :r]
            vals = rng.uniform(0.5, 3.0, size=r)
            m = (basis * vals) @ basis.T
            m = 0.5 * (m + m.T)
            pinv, rank = pseudo_inverse(m)
            assert rank == r
            assert np.abs(m @ pinv @ m - m).max() < 1e-9
            assert np.abs(pinv @ m @ pinv - pinv).max() < 1e-9
            assert np.abs(m @ pinv - (m @ pinv).T).max() < 1e-9
            assert np.abs(pinv @ m - (pinv @ m).T).max() < 1e-9

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            pseudo_inverse(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestChiSquare:
    def test_tail_at_zero(self):
        for dof in (1, 3, 10):
            assert chi2_tail(0.0, dof) == 1.0

    def test_quantile_reference_value(self):
        assert chi2_quantile(0.95, 1) == pytest.approx(3.8414588206941236, rel=1e-8)

    def test_against_independent_gamma_oracle(self):
        # regularized upper incomplete gamma via mpmath, evaluated fresh
        mpmath = pytest.importorskip("mpmath")
        for x, dof in [(0.5, 1), (2.3, 2), (7.81, 3), (31.4, 20)]:
            ref = float(mpmath.gammainc(dof / 2.0, x / 2.0, mpmath.inf, regularized=True))
            assert chi2_tail(x, dof) == pytest.approx(ref, rel=1e-8)

    def test_round_trip(self):
        for p in (0.01, 0.5, 0.95, 0.999):
            for dof in (1, 3, 7):
                assert chi2_tail(chi2_quantile(p, dof), dof) == pytest.approx(
                    1 - p, abs=1e-6
                )

    def test_normal_quantile(self):
        assert normal_quantile(0.975) == pytest.approx(1.959963985, rel=1e-7)
        assert normal_quantile(0.5) == 0.0
        assert normal_quantile(0.025) == pytest.approx(-1.959963985, rel=1e-7)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            chi2_tail(1.0, 0)
        with pytest.raises(ValueError):
            chi2_quantile(1.0, 3)


@pytest.fixture(scope="module")
def ex2():
    return build_example2(2, 2, 0.6, 0.3)


class TestTestStatistic:
    def test_synchronized_state_gives_zero(self, ex2):
        _, spec = ex2
        sched = StepSizeSchedule(gamma=1.0, c=2.0)
        out = structure_test(np.full(4, 0.37), 10**4, sched, spec)
        # exactly synchronized input: zero residual up to float cancellation
        assert out.statistic < 1e-9
        assert out.p_value > 1.0 - 1e-9
        assert not out.degenerate
        assert out.dof == 3

    def test_polarized_state_is_degenerate(self, ex2):
        _, spec = ex2
        sched = StepSizeSchedule(gamma=1.0, c=2.0)
        out = structure_test(np.zeros(4), 10**4, sched, spec)
        assert out.degenerate
        assert out.mixing_proxy == 0.0

    def test_regimes_select_scale(self, ex2):
        _, spec = ex2
        z = np.array([0.5, 0.45, 0.52, 0.48])
        sub = structure_test(z, 10**4, StepSizeSchedule(gamma=0.75, c=0.8), spec)
        assert sub.regime is Regime.SUBPOLYNOMIAL
        crit = structure_test(z, 10**4, StepSizeSchedule(gamma=1.0, c=2.0), spec)
        assert crit.regime is Regime.CRITICAL_SUBCRITICAL
        assert sub.statistic != crit.statistic

    def test_unsupported_regime_refused(self):
        _, spec = build_sim_network(0.9, 0.5)
        with pytest.raises(RegimeError):
            structure_test(np.full(4, 0.4), 10**4, StepSizeSchedule(gamma=1.0, c=2.0), spec)

    def test_invariant_to_user_scale_freedom(self, ex2):
        net, spec = ex2
        p = spec.left_matrix.copy()
        q = spec.right_matrix.copy()
        p[0, :] = p[0, :] * 0.25
        q[:, 0] = q[:, 0] * 4.0
        rescaled = from_user_spectral(net, spec.eigenvalues, spec.block_orders, p, q)
        sched = StepSizeSchedule(gamma=1.0, c=2.0)
        z = np.array([0.41, 0.52, 0.47, 0.33])
        a = structure_test(z, 5000, sched, spec)
        b = structure_test(z, 5000, sched, rescaled)
        assert a.statistic == pytest.approx(b.statistic, rel=1e-10)
        assert a.dof == b.dof

    def test_boundary_regime_scale(self):
        _, spec = build_example2(2, 2, 0.75, 0.3)  # tau = 0.75 = 1 - 1/4
        sched = StepSizeSchedule(gamma=1.0, c=2.0)
        z = np.array([0.5, 0.45, 0.52, 0.48])
        out = structure_test(z, 10**4, sched, spec)
        assert out.regime is Regime.CRITICAL_BOUNDARY
        assert out.dof >= 1


class TestConfidenceInterval:
    def test_polarized_gives_zero_width_at_boundary(self, ex2):
        _, spec = ex2
        sched = StepSizeSchedule(gamma=0.9, c=1.0)
        ci = ci_z_infinity(np.zeros(4), 5000, sched, spec)
        assert ci.center == 0.0 and ci.lower == 0.0 and ci.upper == 0.0
        ci = ci_z_infinity(np.ones(4), 5000, sched, spec)
        assert ci.center == 1.0 and ci.lower == 1.0 and ci.upper == 1.0

    def test_width_scales_with_n(self, ex2):
        _, spec = ex2
        sched = StepSizeSchedule(gamma=0.9, c=1.0)
        z = np.full(4, 0.5)
        w1 = np.diff(
            [ci_z_infinity(z, 1000, sched, spec).lower, ci_z_infinity(z, 1000, sched, spec).upper]
        )[0]
        w2 = np.diff(
            [ci_z_infinity(z, 16000, sched, spec).lower, ci_z_infinity(z, 16000, sched, spec).upper]
        )[0]
        assert w2 == pytest.approx(w1 * 16.0 ** -(0.9 - 0.5), rel=1e-9)

    def test_clipped_to_unit_interval(self, ex2):
        _, spec = ex2
        sched = StepSizeSchedule(gamma=0.9, c=1.0)
        ci = ci_z_infinity(np.full(4, 0.98), 10, sched, spec, level=0.999)
        assert 0.0 <= ci.lower <= ci.center <= ci.upper <= 1.0

    def test_level_domain(self, ex2):
        _, spec = ex2
        with pytest.raises(ValueError):
            ci_z_infinity(np.full(4, 0.5), 100, StepSizeSchedule(gamma=0.9, c=1.0), spec, level=1.5)


class TestConfidenceRegion:
    @staticmethod
    def builder(theta):
        return build_example2(2, 2, theta[0], theta[1])

    def test_level_near_one_accepts_everything(self):
        z = np.array([0.5005, 0.4995, 0.501, 0.499])
        sched = StepSizeSchedule(gamma=1.0, c=2.0)
        grid = [(a, b) for a in (0.5, 0.6) for b in (0.2, 0.3)]
        low, _ = confidence_region(grid, self.builder, z, 10**4, sched, level=0.05)
        high, _ = confidence_region(grid, self.builder, z, 10**4, sched, level=1 - 1e-9)
        assert len(high) == len(grid)
        assert set(low) <= set(high)

    def test_regions_nest_with_level(self):
        z = np.array([0.52, 0.48, 0.55, 0.45])
        sched = StepSizeSchedule(gamma=1.0, c=2.0)
        grid = [(a, b) for a in np.linspace(0.4, 0.8, 5) for b in (0.1, 0.2, 0.3)]
        acc_90, surf = confidence_region(grid, self.builder, z, 10**4, sched, level=0.90)
        acc_99, _ = confidence_region(grid, self.builder, z, 10**4, sched, level=0.99)
        assert set(acc_90) <= set(acc_99)
        # grid points whose spectrum exceeds the critical boundary are invalid
        flags = {p.theta: p.valid for p in surf}
        assert flags[(0.8, 0.1)] is False

    def test_invalid_points_flagged_not_accepted(self):
        z = np.array([0.52, 0.48, 0.55, 0.45])
        sched = StepSizeSchedule(gamma=1.0, c=2.0)
        grid = [(0.6, 0.3), (0.3, 0.6)]  # second violates beta < alpha
        accepted, surface = confidence_region(grid, self.builder, z, 10**4, sched)
        flags = {p.theta: p.valid for p in surface}
        assert flags[(0.3, 0.6)] is False
        assert (0.3, 0.6) not in accepted

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            confidence_region(
                [], self.builder, np.full(4, 0.5), 100, StepSizeSchedule(gamma=1.0, c=2.0)
            )

    def test_all_degenerate_rejected(self):
        sched = StepSizeSchedule(gamma=1.0, c=2.0)
        with pytest.raises(ValueError, match="degenerate"):
            confidence_region(
                [(0.6, 0.3)], self.builder, np.zeros(4), 10**4, sched
            )
