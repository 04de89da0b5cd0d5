import numpy as np
import pytest

from oucutoff.cutoff import (
    COEFFICIENT_RTOL,
    CutoffReport,
    cutoff_time,
    dichotomy_sweep,
    mean_condition,
    observable_precutoff,
    rate_analysis,
    window_profile,
)
from oucutoff.errors import (
    DegenerateInitialStateError,
    DomainError,
    GenericityError,
    OutOfScopeError,
)
from oucutoff.linalg import mat_exp
from oucutoff.models import JacobiParams, jacobi_system
from oucutoff.noise import (
    AlphaStable,
    Brownian,
    CompoundPoisson,
    Drift,
    IsotropicGaussian,
    RngStream,
    Sum,
)
from oucutoff.ou import build_system, sigma_inf, sigma_t, stationary_mean

from helpers import random_stable


def brownian_system(a, sigma=None):
    a = np.asarray(a, dtype=float)
    sig = np.eye(a.shape[0]) if sigma is None else np.asarray(sigma, dtype=float)
    return build_system(a, sig, Brownian(dim=sig.shape[1]))


class TestRateAnalysis:
    def test_single_active_mode(self):
        sys_ = brownian_system(np.diag([1.0, 2.0]))
        ra = rate_analysis(sys_, [0.0, 1.0])
        assert ra.rho_x == pytest.approx(2.0, abs=1e-12)
        assert ra.active.tolist() == [1]

    def test_dominant_mode_wins(self):
        sys_ = brownian_system(np.diag([1.0, 2.0]))
        ra = rate_analysis(sys_, [1.0, 1.0])
        assert ra.rho_x == pytest.approx(1.0, abs=1e-12)
        assert ra.active.tolist() == [0, 1]

    def test_jacobi_chain_rate(self):
        sys_ = jacobi_system(JacobiParams(m=5, kappa=1.0, gamma=0.01))
        ra = rate_analysis(sys_, np.ones(10))
        assert abs(ra.rho_x - 0.0263377) <= 1e-4

    def test_envelope_pinches_the_decay(self):
        rng = np.random.default_rng(60)
        checked = 0
        for _ in range(50):
            m = int(rng.integers(2, 6))
            sys_ = brownian_system(random_stable(rng, m))
            if not sys_.generic:
                continue
            x = rng.standard_normal(m)
            ra = rate_analysis(sys_, x)
            assert ra.c1 > 0 and ra.c1 <= ra.c2
            sub = ra.grid[ra.grid * ra.rho_x < 500.0][::10]
            for t in sub:
                val = np.linalg.norm(mat_exp(-sys_.A, t) @ x)
                lo = ra.c1 * np.exp(-ra.rho_x * t)
                hi = ra.c2 * np.exp(-ra.rho_x * t)
                assert lo * (1 - 1e-9) <= val <= hi * (1 + 1e-9)
            checked += 1
        assert checked >= 40

    def test_rate_invariant_under_scaling(self):
        sys_ = jacobi_system(JacobiParams(m=3, kappa=1.0, gamma=0.05))
        x = np.arange(1.0, 7.0)
        base = rate_analysis(sys_, x)
        for c in (1e-6, -3.0, 1e6):
            ra = rate_analysis(sys_, c * x)
            assert ra.rho_x == pytest.approx(base.rho_x, rel=1e-12)
            assert ra.active.tolist() == base.active.tolist()

    def test_coefficient_tolerance_scales_with_state(self):
        sys_ = brownian_system(np.diag([1.0, 2.0]))
        ra = rate_analysis(sys_, [0.0, 5.0])
        assert ra.coefficient_tol == pytest.approx(COEFFICIENT_RTOL * 5.0)

    def test_requires_generic_and_nonzero(self):
        defective = brownian_system([[1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(GenericityError):
            rate_analysis(defective, [1.0, 0.0])
        ok = brownian_system(np.diag([1.0, 2.0]))
        with pytest.raises(DomainError):
            rate_analysis(ok, [0.0, 0.0])


class TestCutoffTime:
    def test_reference_values(self):
        assert cutoff_time(1.0, np.exp(-1.0)) == pytest.approx(1.0, rel=1e-12)
        assert cutoff_time(2.0, 0.01) == pytest.approx(np.log(100.0) / 2, rel=1e-12)
        # the slow Jacobi rate pushes the 1e-3 cutoff time out to ~262
        assert cutoff_time(0.0263377, 1e-3) == pytest.approx(262.27, abs=0.01)

    def test_monotonicity(self):
        assert cutoff_time(2.0, 0.1) < cutoff_time(1.0, 0.1)
        assert cutoff_time(1.0, 0.01) > cutoff_time(1.0, 0.1)

    def test_domain(self):
        for rho, eps in ((0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (1.0, 1.0), (1.0, 2.0)):
            with pytest.raises(DomainError):
                cutoff_time(rho, eps)


EPS_GRID = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


class TestDichotomyExact:
    def setup_method(self):
        self.sys = brownian_system(np.diag([1.0, 2.0]))
        self.x = np.array([1.0, 0.0])

    def test_verdict_pattern(self):
        rep = dichotomy_sweep(self.sys, self.x, 2.0, EPS_GRID, (0.5, 2.0), 0)
        assert rep.exact_route
        assert rep.verdicts[2.0] == "vanishing"
        assert rep.verdicts[0.5] == "diverging"
        assert rep.rho_x == pytest.approx(1.0)

    def test_supercritical_ratio_scale(self):
        # at delta = 2 the ratio tracks eps^{delta - 1} = eps
        rep = dichotomy_sweep(self.sys, self.x, 2.0, EPS_GRID, (2.0,), 0)
        ratios = [c.ratio for c in rep.cells]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] < 1e-2
        slope = np.polyfit(np.log(EPS_GRID), np.log(ratios), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.05)

    def test_subcritical_slope(self):
        rep = dichotomy_sweep(self.sys, self.x, 2.0, EPS_GRID, (0.5,), 0)
        ratios = [c.ratio for c in rep.cells]
        slope = np.polyfit(np.log(EPS_GRID), np.log(ratios), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.05)

    def test_zero_state_uses_noise_rate(self):
        rep = dichotomy_sweep(self.sys, np.zeros(2), 2.0, EPS_GRID, (0.5, 2.0), 0)
        assert rep.rho_x == pytest.approx(2.0 * self.sys.rho_min)
        assert rep.verdicts[2.0] == "vanishing"

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            dichotomy_sweep(self.sys, self.x, 2.0, (1e-2, 1e-1), (2.0,), 0)
        with pytest.raises(DomainError):
            dichotomy_sweep(self.sys, self.x, 2.0, EPS_GRID, (1.0,), 0)
        with pytest.raises(DomainError):
            dichotomy_sweep(self.sys, self.x, 2.0, EPS_GRID, (-0.5,), 0)

    def test_ratio_table_accessor(self):
        rep = dichotomy_sweep(self.sys, self.x, 2.0, EPS_GRID[:4], (2.0,), 0)
        table = rep.ratio_table()
        assert set(table) == {(e, 2.0) for e in EPS_GRID[:4]}


class TestDichotomyMonteCarlo:
    def make_system(self):
        noise = Sum(parts=(
            CompoundPoisson(dim=2, rate=2.0, jumps=IsotropicGaussian(std=0.7)),
            Drift(gamma=[0.6, -0.2]),
        ))
        return build_system(np.diag([1.0, 2.0]), np.eye(2), noise)

    def test_uncentred_noise_uses_lower_mean_route(self):
        sys_ = self.make_system()
        rep = dichotomy_sweep(sys_, [1.0, 0.5], 2.0, (1e-1, 1e-2, 1e-3, 1e-4),
                              (0.5, 2.0), 400, RngStream(61))
        assert not rep.exact_route
        assert {c.route for c in rep.cells if c.delta < 1} == {"lower_mean"}
        assert rep.verdicts[0.5] == "diverging"
        assert rep.verdicts[2.0] == "vanishing"
        assert rep.lower_route_rho is not None

    def test_centred_noise_falls_back_to_lower_shift(self):
        sys_ = build_system(np.diag([1.0, 2.0]), np.eye(2),
                            CompoundPoisson(dim=2, rate=2.0,
                                            jumps=IsotropicGaussian(std=0.7)))
        rep = dichotomy_sweep(sys_, [1.0, 0.5], 2.0, (1e-1, 1e-2, 1e-3, 1e-4),
                              (0.5,), 300, RngStream(62))
        assert {c.route for c in rep.cells} == {"lower_shift"}

    def test_degenerate_initial_state_rejected(self):
        sys_ = self.make_system()
        x = stationary_mean(sys_)
        with pytest.raises(DegenerateInitialStateError):
            dichotomy_sweep(sys_, x, 2.0, EPS_GRID, (0.5, 2.0), 300, RngStream(63))

    def test_zero_state_rejected_off_exact_branch(self):
        sys_ = self.make_system()
        with pytest.raises(DomainError):
            dichotomy_sweep(sys_, np.zeros(2), 2.0, EPS_GRID, (2.0,), 300,
                            RngStream(64))

    def test_thread_count_does_not_change_results(self):
        sys_ = self.make_system()
        args = (sys_, [1.0, 0.5], 2.0, (1e-1, 1e-2, 1e-3, 1e-4), (0.5, 2.0), 300)
        a = dichotomy_sweep(*args, RngStream(65), threads=1)
        b = dichotomy_sweep(*args, RngStream(65), threads=8)
        assert [c.ratio for c in a.cells] == [c.ratio for c in b.cells]
        assert [c.route for c in a.cells] == [c.route for c in b.cells]


class TestCorollaryBranches:
    def test_spd_with_active_ground_mode(self):
        sys_ = brownian_system(np.diag([1.0, 1.5, 4.0]))
        ra = rate_analysis(sys_, [1.0, 0.3, 0.2])
        assert ra.rho_x == pytest.approx(1.0, abs=1e-12)
        rep = dichotomy_sweep(sys_, [1.0, 0.3, 0.2], 2.0, EPS_GRID, (0.5, 2.0), 0)
        assert rep.verdicts == {0.5: "diverging", 2.0: "vanishing"}

    def test_state_orthogonal_to_ground_mode(self):
        # lambda_2 = 1.5 < 2 lambda_1 = 2: with <x, v_1> = 0 the rate is 1.5
        sys_ = brownian_system(np.diag([1.0, 1.5, 4.0]))
        ra = rate_analysis(sys_, [0.0, 1.0, 1.0])
        assert ra.rho_x == pytest.approx(1.5, abs=1e-12)


class TestWindowProfile:
    def test_exact_profile_shape(self):
        sys_ = brownian_system(np.diag([1.0, 2.0]))
        x = np.array([1.0, 0.0])
        rho = 1.0
        eps_grid = (1e-2, 1e-3, 1e-4, 1e-5)
        r_grid = (-10.0 / rho, -2.0, 0.0, 2.0, 10.0 / rho)
        wp = window_profile(sys_, x, eps_grid, r_grid, 0)
        assert wp.exact_route
        # profile decreases along the offset axis
        sups = [wp.per_r[r][1] for r in r_grid]
        infs = [wp.per_r[r][0] for r in r_grid]
        assert all(b < a for a, b in zip(sups, sups[1:]))
        assert all(b < a for a, b in zip(infs, infs[1:]))
        # far-side proxies for the liminf/limsup limits
        assert wp.per_r[10.0][1] < 0.01
        assert wp.per_r[-10.0][0] > 100.0

    def test_negative_times_clamp(self):
        sys_ = brownian_system(np.diag([1.0, 2.0]))
        wp = window_profile(sys_, [1.0, 0.0], (1e-1,), (-1000.0,), 0)
        assert wp.cells[0].t == 0.0

    def test_monte_carlo_route_runs(self):
        noise = Sum(parts=(
            CompoundPoisson(dim=2, rate=2.0, jumps=IsotropicGaussian(std=0.7)),
            Drift(gamma=[0.6, -0.2]),
        ))
        sys_ = build_system(np.diag([1.0, 2.0]), np.eye(2), noise)
        wp = window_profile(sys_, [1.0, 0.5], (1e-1, 1e-2, 1e-3), (-1.0, 1.0),
                            300, RngStream(66))
        assert not wp.exact_route and wp.mc_n == 300
        assert all(c.route in ("upper_shift", "upper_disint") for c in wp.cells)
        assert wp.per_r[-1.0][1] > wp.per_r[1.0][0]


class TestObservablePrecutoff:
    def test_exact_gaussian_second_moment(self):
        sys_ = brownian_system([[1.0]])
        rep = observable_precutoff(sys_, [1.0], 2.0, EPS_GRID, 2.0, 0)
        assert rep.exact_route
        assert rep.verdict == "vanishing"
        ratios = [c.ratio for c in rep.cells]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))

    def test_scalar_moment_gap_identity(self):
        # at x = 0 with centred noise the second-moment gap is exactly
        # |Sigma_t - Sigma_inf| = e^{-2 a t} / (2 a)
        a = 1.3
        sys_ = brownian_system([[a]])
        for t in (0.4, 1.0, 3.0):
            gap = abs(sigma_t(sys_, t)[0, 0] - sigma_inf(sys_)[0, 0])
            assert gap == pytest.approx(np.exp(-2 * a * t) / (2 * a), rel=1e-10)

    def test_alpha_stable_first_moment_ratio_decreases(self):
        sys_ = build_system(np.diag([1.0, 1.5]), np.eye(2),
                            AlphaStable(dim=2, alpha=1.5, scale=0.5))
        rep = observable_precutoff(sys_, [1.0, 1.0], 1.0,
                                   (1e-1, 1e-2, 1e-3, 1e-4), 2.0, 100_000,
                                   RngStream(67))
        assert not rep.exact_route
        cells = rep.cells
        for a, b in zip(cells, cells[1:]):
            slack = 5.0 * (a.se / a.eps + b.se / b.eps)
            assert b.ratio <= a.ratio + slack

    def test_delta_must_exceed_one(self):
        sys_ = brownian_system([[1.0]])
        with pytest.raises(OutOfScopeError):
            observable_precutoff(sys_, [1.0], 2.0, EPS_GRID, 0.9, 0)

    def test_moment_order_validated(self):
        sys_ = build_system(np.diag([1.0, 1.5]), np.eye(2),
                            AlphaStable(dim=2, alpha=1.5))
        with pytest.raises(DomainError):
            observable_precutoff(sys_, [1.0, 0.0], 1.6, EPS_GRID, 2.0, 100,
                                 RngStream(0))


def test_mean_condition():
    sys_ = build_system(np.diag([1.0, 2.0]), np.eye(2), Drift(gamma=[2.0, 4.0]))
    sm = stationary_mean(sys_)
    assert not mean_condition(sys_, sm)
    assert mean_condition(sys_, sm + np.array([0.1, 0.0]))


def test_report_is_self_describing():
    sys_ = brownian_system(np.diag([1.0, 2.0]))
    rep = dichotomy_sweep(sys_, [1.0, 0.0], 2.0, EPS_GRID[:4], (0.5, 2.0), 0)
    assert isinstance(rep, CutoffReport)
    assert rep.thresholds["vanish_final"] == 0.1
    assert rep.thresholds["diverge_final"] == 10.0
    assert rep.mean_condition_ok  # Brownian: stationary mean is zero, x is not
    assert len(rep.cells) == 8
