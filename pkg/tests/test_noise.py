import numpy as np
import pytest
from scipy.stats import ks_2samp

from oucutoff.errors import DimensionError, DomainError, ValidationError
from oucutoff.noise import (
    AlphaStable,
    Brownian,
    CompoundPoisson,
    Drift,
    FixedAtoms,
    IsotropicGaussian,
    RngStream,
    Sum,
    max_moment_order,
    noise_from_dict,
    noise_mean,
    sample_increment,
    sample_increments,
)


class TestSpecValidation:
    def test_alpha_range_enforced(self):
        for alpha in (0.9, 1.0, 2.0, 2.5):
            with pytest.raises(DomainError):
                AlphaStable(dim=1, alpha=alpha)
        AlphaStable(dim=1, alpha=1.5)  # ok

    def test_atom_weights_must_sum_to_one(self):
        with pytest.raises(DomainError):
            FixedAtoms(points=[[1.0], [2.0]], weights=[0.5, 0.6])
        with pytest.raises(DomainError):
            FixedAtoms(points=[[1.0]], weights=[-1.0])

    def test_sum_dims_must_agree(self):
        with pytest.raises(DimensionError):
            Sum(parts=(Brownian(dim=2), Drift(gamma=[1.0])))

    def test_atom_dim_must_match_process(self):
        with pytest.raises(DimensionError):
            CompoundPoisson(dim=2, rate=1.0,
                            jumps=FixedAtoms(points=[[1.0]], weights=[1.0]))

    def test_dt_must_be_positive(self):
        rng = RngStream(0)
        for dt in (0.0, -1.0, np.nan):
            with pytest.raises(DomainError):
                sample_increment(Brownian(dim=1), dt, rng)


class TestExactCases:
    def test_drift_is_deterministic(self):
        out = sample_increment(Drift(gamma=[1.0, 2.0]), 0.5, RngStream(1))
        assert np.array_equal(out, [0.5, 1.0])

    def test_means(self):
        assert np.array_equal(noise_mean(Brownian(dim=3)), np.zeros(3))
        cp = CompoundPoisson(dim=2, rate=2.0,
                             jumps=FixedAtoms(points=[[1.0, 0.0]], weights=[1.0]))
        assert np.allclose(noise_mean(cp), [2.0, 0.0])
        mix = Sum(parts=(Brownian(dim=1), Drift(gamma=[0.3])))
        assert np.allclose(noise_mean(mix), [0.3])
        assert np.array_equal(noise_mean(AlphaStable(dim=2, alpha=1.5)), np.zeros(2))

    def test_moment_orders(self):
        assert max_moment_order(Brownian(dim=1)) == np.inf
        assert max_moment_order(AlphaStable(dim=1, alpha=1.7)) == 1.7
        assert max_moment_order(Sum(parts=(Brownian(dim=1),
                                           AlphaStable(dim=1, alpha=1.2)))) == 1.2


class TestDeterminism:
    def test_identical_stream_state_reproduces_bits(self):
        spec = Sum(parts=(Brownian(dim=2),
                          CompoundPoisson(dim=2, rate=3.0,
                                          jumps=IsotropicGaussian(std=0.5))))
        rng = RngStream(seed=99, stream=7, counter=3)
        a = sample_increments(spec, 0.7, 1000, rng)
        b = sample_increments(spec, 0.7, 1000, rng)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        rng = RngStream(5)
        a = sample_increments(Brownian(dim=1), 1.0, 100, rng.substream(0))
        b = sample_increments(Brownian(dim=1), 1.0, 100, rng.substream(1))
        assert not np.array_equal(a, b)

    def test_counter_offset_changes_output(self):
        rng = RngStream(5)
        a = sample_increments(Brownian(dim=1), 1.0, 8, rng)
        b = sample_increments(Brownian(dim=1), 1.0, 8, rng.with_counter(1))
        assert not np.array_equal(a, b)


class TestMomentChecks:
    def test_brownian_mean_and_variance(self):
        draws = sample_increments(Brownian(dim=1), 1.0, 1_000_000, RngStream(21))
        assert abs(draws.mean()) <= 4e-3
        assert abs(draws.var() - 1.0) <= 1e-2

    def test_alpha_near_two_matches_gaussian_quartiles(self):
        # the alpha -> 2 limit of a standard symmetric stable law is
        # N(0, 2 scale^2); quartiles agree to 2%
        scale = 0.7
        draws = sample_increments(AlphaStable(dim=1, alpha=1.999, scale=scale),
                                  1.0, 400_000, RngStream(22))[:, 0]
        got = np.percentile(draws, [25, 75])
        want = 0.6744897501960817 * scale * np.sqrt(2.0) * np.array([-1.0, 1.0])
        assert np.all(np.abs(got - want) <= 0.02 * np.abs(want))

    def test_empirical_means_match_exact_means(self):
        specs = [
            Brownian(dim=2),
            CompoundPoisson(dim=2, rate=1.5,
                            jumps=FixedAtoms(points=[[1.0, 0.0], [0.0, 2.0]],
                                             weights=[0.25, 0.75])),
            Drift(gamma=[0.4, -0.2]),
        ]
        for i, spec in enumerate(specs):
            draws = sample_increments(spec, 1.0, 1_000_000, RngStream(23 + i))
            se = draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0])
            gap = np.abs(draws.mean(axis=0) - noise_mean(spec))
            # the 1e-9 term absorbs summation roundoff in the deterministic case
            assert np.all(gap <= 5.0 * se + 1e-9 * (1.0 + np.abs(noise_mean(spec))))

    def test_stable_median_is_centred(self):
        draws = sample_increments(AlphaStable(dim=2, alpha=1.5), 1.0, 1_000_000,
                                  RngStream(27))
        assert np.all(np.abs(np.median(draws, axis=0)) <= 0.01)

    def test_stable_scaling_in_dt(self):
        # median absolute deviation scales like dt^{1/alpha}
        alpha = 1.4
        a = sample_increments(AlphaStable(dim=1, alpha=alpha), 1.0, 200_000,
                              RngStream(28))
        b = sample_increments(AlphaStable(dim=1, alpha=alpha), 2.0, 200_000,
                              RngStream(29))
        ratio = np.median(np.abs(b)) / np.median(np.abs(a))
        assert abs(ratio - 2.0 ** (1.0 / alpha)) <= 0.03


class TestAdditivity:
    @pytest.mark.parametrize("spec", [
        Brownian(dim=1),
        AlphaStable(dim=1, alpha=1.5, scale=0.8),
        CompoundPoisson(dim=1, rate=3.0, jumps=IsotropicGaussian(std=1.0)),
    ], ids=["brownian", "stable", "poisson"])
    def test_increment_over_2dt_matches_sum_of_two(self, spec):
        n, dt = 100_000, 0.35
        rng = RngStream(31)
        whole = sample_increments(spec, 2 * dt, n, rng.substream(0))
        halves = sample_increments(spec, dt, n, rng.substream(1)) \
            + sample_increments(spec, dt, n, rng.substream(2))
        for d in range(whole.shape[1]):
            assert ks_2samp(whole[:, d], halves[:, d]).pvalue > 0.01


def test_jump_cap_enforced():
    cp = CompoundPoisson(dim=1, rate=1e9, jumps=IsotropicGaussian(std=1.0))
    with pytest.raises(DomainError):
        sample_increment(cp, 1.0, RngStream(40))


def test_wire_format_roundtrip():
    spec = Sum(parts=(
        Brownian(dim=2),
        AlphaStable(dim=2, alpha=1.5, scale=2.0),
        CompoundPoisson(dim=2, rate=0.7,
                        jumps=FixedAtoms(points=[[1.0, 2.0]], weights=[1.0])),
        Drift(gamma=[0.1, 0.2]),
    ))
    back = noise_from_dict(spec.to_dict())
    assert back.to_dict() == spec.to_dict()
    a = sample_increments(spec, 0.5, 64, RngStream(41))
    b = sample_increments(back, 0.5, 64, RngStream(41))
    assert np.array_equal(a, b)


def test_wire_format_rejects_unknown():
    with pytest.raises(ValidationError):
        noise_from_dict({"type": "levy_flight", "dim": 1})
    with pytest.raises(ValidationError):
        noise_from_dict({"dim": 1})
