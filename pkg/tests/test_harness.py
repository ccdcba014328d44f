import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovbandit.besov import BesovParams
from besovbandit.config import InstanceConfig, StrategyConfig
from besovbandit.harness import (
    RESULTS_HEADER,
    DomainViolation,
    EpisodeResult,
    episode_seed,
    episode_streams,
    fit_loglog,
    lower_bound_game,
    phase_diagram,
    results_csv,
    run_episode,
    sweep_rates,
    target_exponent,
)
from besovbandit.instances import NoiseModel, ObjectiveInstance, build_theta, choose_j_noiseless, make_instance
from besovbandit.strategies import Strategy, doo_optimize, grid_explore_commit, random_search

BP = BesovParams(1.0, 2.0, 2.0, 1.0, 1)


def constant_instance(value=0.0, max_value=0.0):
    return ObjectiveInstance(lambda x: value, max_value, np.zeros(1), NoiseModel(), "const", 1)


class Outside(Strategy):
    name = "outside"

    def next_query(self, trace, rng):
        return np.array([1.5])


class TestSeeds:
    def test_pinned(self):
        assert episode_seed(0, 16, 0) == 6192166547663441477
        assert episode_seed(12345, 1024, 7) == 1828960782031732150
        assert episode_seed(2**64 - 1, 2, 0) == 12859645445789163360

    def test_distinct(self):
        seeds = {episode_seed(0, T, r) for T in (16, 32, 64) for r in range(50)}
        assert len(seeds) == 150

    def test_streams_independent(self):
        a, b = episode_streams(5)
        assert a.random() != b.random()
        a2, _ = episode_streams(5)
        assert episode_streams(5)[0].random() == a2.random()


class TestRunEpisode:
    @pytest.mark.parametrize("factory", [random_search, lambda d: doo_optimize(1.0, 1.0, d)])
    def test_flat(self, factory):
        _, rep = run_episode(factory(1), constant_instance(), 40, 0)
        assert rep.cumulative_regret == 0.0 and rep.simple_regret == 0.0

    def test_theta_random_two_valued(self):
        for seed in range(20):
            inst = make_instance("theta-member", {"bp": BP, "level": 10}, rng_seed=seed)
            _, rep = run_episode(random_search(1), inst, 32, seed)
            assert rep.simple_regret in (0.0, inst.max_value)

    def test_bitwise_replay(self):
        inst = make_instance("tent-peak", {"apex": [0.3], "height": 0.5}, NoiseModel.gaussian(0.2))
        t1, r1 = run_episode(grid_explore_commit(100, 1, True), inst, 100, 9)
        t2, r2 = run_episode(grid_explore_commit(100, 1, True), inst, 100, 9)
        np.testing.assert_array_equal(t1.y, t2.y)
        np.testing.assert_array_equal(r1.instantaneous, r2.instantaneous)

    def test_regret_uses_true_f(self):
        inst = make_instance("tent-peak", {"apex": [0.3], "height": 0.5}, NoiseModel.gaussian(1.0))
        tr, rep = run_episode(random_search(1), inst, 50, 1)
        true_gaps = inst.max_value - inst(tr.x)
        np.testing.assert_allclose(rep.instantaneous, true_gaps, atol=1e-15)
        assert not np.allclose(tr.y, inst(tr.x))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**63), T=st.integers(2, 200))
    def test_additivity(self, seed, T):
        inst = make_instance("tent-peak", {"apex": "random", "height": 0.4, "s": 0.7}, rng_seed=seed % 997)
        _, rep = run_episode(random_search(1), inst, T, seed)
        assert np.all(rep.instantaneous >= 0)
        assert rep.cumulative_regret == pytest.approx(float(np.sum(rep.instantaneous)), abs=1e-9)
        assert rep.simple_regret == rep.instantaneous[-1]

    def test_domain_violation(self):
        with pytest.raises(DomainViolation):
            run_episode(Outside(1), constant_instance(), 3, 0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            run_episode(random_search(2), constant_instance(), 3, 0)

    def test_negative_gaps_clamped(self):
        _, rep = run_episode(random_search(1), constant_instance(1.0, 0.9), 5, 0)
        assert rep.clamped == 5
        assert rep.cumulative_regret == 0.0


class TestFit:
    def test_exact_line(self):
        assert fit_loglog([(10, 100), (100, 1000)])[0] == pytest.approx(1.0, abs=1e-12)

    def test_constant(self):
        slope, _, r2 = fit_loglog([(10, 5), (100, 5)])
        assert slope == pytest.approx(0.0, abs=1e-12)
        assert 0.0 <= r2 <= 1.0

    def test_noisy_power_law(self):
        rng = np.random.default_rng(0)
        Ts = 2.0 ** np.arange(4, 12)
        pts = [(T, T**-0.5 * (1 + 0.01 * rng.normal())) for T in Ts]
        assert fit_loglog(pts)[0] == pytest.approx(-0.5, abs=0.05)

    def test_rejects_bad_points(self):
        with pytest.raises(ValueError):
            fit_loglog([(10, 0.0), (100, 1.0)])
        with pytest.raises(ValueError):
            fit_loglog([(10, 1.0)])


class TestSweep:
    def test_linear_cumulative(self):
        fit = sweep_rates(lambda T, d: random_search(d), lambda T, s: constant_instance(0.0, 0.3),
                          [8, 16, 64, 256], 2, 0, "cumulative", 1.0, 0.01)
        assert fit.slope == pytest.approx(1.0, abs=1e-6)
        assert fit.within_tolerance

    def test_flat_simple(self):
        fit = sweep_rates(lambda T, d: random_search(d), lambda T, s: constant_instance(0.0, 0.3),
                          [8, 16, 64], 1, 0, "simple", 0.0, 0.01)
        assert fit.slope == pytest.approx(0.0, abs=1e-9)

    def test_zero_regret_excluded(self):
        with pytest.warns(RuntimeWarning):
            fit = sweep_rates(lambda T, d: random_search(d), lambda T, s: constant_instance(),
                              [8, 16], 1, 0, "simple")
        assert fit.excluded == [8, 16]
        assert math.isnan(fit.slope)

    def test_order_invariance(self):
        def make(T, seed):
            return make_instance("tent-peak", {"apex": "random", "height": 0.5}, rng_seed=seed)

        a = sweep_rates(lambda T, d: random_search(d), make, [16, 64, 32], 3, 1, "cumulative")
        b = sweep_rates(lambda T, d: random_search(d), make, [32, 16, 64], 3, 1, "cumulative")
        assert a.slope == b.slope and a.mean_regret == b.mean_regret
        assert [(e.T, e.rep) for e in a.episodes] == [(e.T, e.rep) for e in b.episodes]

    def test_parallel_matches_serial(self):
        strat = StrategyConfig("random_search", {})
        inst = InstanceConfig.from_dict({"kind": "tent-peak", "apex": "random", "s": 0.5, "height": 0.5})
        serial = sweep_rates(strat.build, inst.build, [16, 32, 64], 4, 7, "cumulative", workers=1)
        parallel = sweep_rates(strat.build, inst.build, [16, 32, 64], 4, 7, "cumulative", workers=2)
        assert serial.summary() == parallel.summary()
        assert results_csv("x", serial.episodes) == results_csv("x", parallel.episodes)

    def test_validation(self):
        with pytest.raises(ValueError):
            sweep_rates(lambda T, d: random_search(d), lambda T, s: constant_instance(), [8], 0, 0)
        with pytest.raises(ValueError):
            sweep_rates(lambda T, d: random_search(d), lambda T, s: constant_instance(), [8], 1, 0, "median")


class TestLowerBound:
    def test_T128(self):
        game = lower_bound_game(lambda T, d: random_search(d), 128, BP)
        assert game["level"] == 8 == math.ceil(math.log2(256))
        assert game["observed_regret"] == build_theta(8, BP, "haar").peak
        assert game["ratio"] >= 1.0

    @pytest.mark.parametrize("factory", [lambda T, d: grid_explore_commit(T, d), lambda T, d: doo_optimize(0.5, 1.0, d)])
    def test_doubling(self, factory):
        prev = None
        for T in (8, 16, 32, 64):
            game = lower_bound_game(factory, T, BP)
            peak = build_theta(choose_j_noiseless(T, 1), BP, "haar").peak
            assert game["observed_regret"] == peak
            if prev is not None:
                dj = game["level"] - prev["level"]
                assert game["observed_regret"] == pytest.approx(prev["observed_regret"] * 2.0 ** (-0.5 * dj))
            prev = game

    def test_floor_formula(self):
        game = lower_bound_game(lambda T, d: random_search(d), 32, BP)
        floor = 2.0 ** (2 * -0.5) * 32**-0.5
        assert game["floor_without_probability"] == pytest.approx(floor)
        assert game["theoretical_floor"] == pytest.approx(floor / 4)

    def test_2d(self):
        bp = BesovParams(1.5, 2.0, 2.0, 1.0, 2)
        game = lower_bound_game(lambda T, d: grid_explore_commit(T, d), 32, bp)
        assert game["family_size"] >= 64
        assert game["ratio"] >= 1.0


class TestPhaseDiagram:
    def test_examples(self):
        rows = phase_diagram(1, [1], [Fraction(1, 2), 0, 1])
        assert rows[0]["alpha"] == Fraction(1, 4)
        assert rows[1]["alpha"] == Fraction(1, 3)
        assert rows[2]["feasible"] is False

    @given(
        sn=st.integers(1, 60), sd=st.integers(1, 20), pn=st.integers(0, 20), pd=st.integers(1, 20), d=st.integers(1, 3)
    )
    def test_level_sets(self, sn, sd, pn, pd, d):
        sigma, inv_p = Fraction(sn, sd), Fraction(pn, pd)
        row = phase_diagram(d, [sigma], [inv_p])[0]
        s = sigma - d * inv_p
        assert row["feasible"] == (s > 0)
        if s > 0:
            assert row["alpha"] == s / (2 * s + d)
            assert row["noiseless_exponent"] == sigma / d - inv_p

    def test_targets(self):
        assert target_exponent("simple", False, 0.5, 1) == -0.5
        assert target_exponent("cumulative", False, 0.5, 1) == 0.5
        assert target_exponent("cumulative", True, 1.0, 1) == pytest.approx(2 / 3)
        assert target_exponent("simple", True, 1.0, 1) == pytest.approx(-1 / 3)


def test_results_csv_header_and_format():
    ep = EpisodeResult(16, 0, 5, 0.1, 1 / 3, "s", "i,with comma")
    text = results_csv("exp", [ep])
    lines = text.splitlines()
    assert lines[0] == RESULTS_HEADER == "experiment,strategy,instance,T,rep,seed,simple_regret,cumulative_regret"
    assert lines[1] == 'exp,s,"i,with comma",16,0,5,0.10000000000000001,0.33333333333333331'
