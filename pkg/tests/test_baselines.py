"""Distance-based and sampling baselines."""

import pytest

from apcdenoise.baselines import (
    denoise_gibbs,
    denoise_identity,
    denoise_l1,
    denoise_l2,
    denoise_two_stage,
)
from apcdenoise.denoise import denoise_course
from apcdenoise.model import DenoiseConfig, compute_occupancy, validate_course
from conftest import make_course, random_noisy_course
from oracles import oracle_distance


def reversed_course(course):
    """Swap boardings with alightings and reverse the stop order.

    This maps the feasible set onto itself, so distance objectives must agree.
    """
    obs = course.observed_counts()
    boards = [c.alighting for c in reversed(obs)]
    alights = [c.boarding for c in reversed(obs)]
    return make_course(boards, alights, capacity=course.capacity)


class TestL1:
    def test_valid_course_untouched(self):
        c = make_course([5, 3, 0], [0, 2, 6])
        r = denoise_l1(c)
        assert r.objective_value == pytest.approx(0.0)
        assert [(x.boarding, x.alighting) for x in r.counts] == [(5, 0), (3, 2), (0, 6)]

    def test_minimal_single_step_fix(self):
        # one passenger short on the alighting side: cheapest fix costs 1
        r = denoise_l1(make_course([5, 0, 0], [0, 0, 6]))
        assert r.objective_value == pytest.approx(1.0)
        assert validate_course(
            make_course([5, 0, 0], [0, 0, 6]).with_observed(r.counts)
        ).all_ok

    def test_matches_enumeration(self, rng):
        cfg_cost = 0
        for k in range(12):
            c = random_noisy_course(rng, n_hi=4, course_id=f"l1-{k}")
            r = denoise_l1(c)
            assert r.objective_value == pytest.approx(
                oracle_distance(c, DenoiseConfig(), power=1), abs=1e-9
            )
            cfg_cost += 1
        assert cfg_cost == 12

    def test_reversal_symmetry(self, rng):
        for k in range(10):
            c = random_noisy_course(rng, n_hi=5, course_id=f"rev-{k}")
            assert denoise_l1(c).objective_value == pytest.approx(
                denoise_l1(reversed_course(c)).objective_value
            )


class TestL2:
    def test_valid_course_untouched(self):
        r = denoise_l2(make_course([5, 3, 0], [0, 2, 6]))
        assert r.objective_value == pytest.approx(0.0)

    def test_spreads_corrections(self):
        # imbalance of two; splitting 1+1 over two stops costs 2, one stop costs 4
        c = make_course([2, 0, 0], [0, 0, 0])
        r = denoise_l2(c)
        assert r.objective_value == pytest.approx(2.0)
        report = validate_course(c.with_observed(r.counts))
        assert report.all_ok

    def test_matches_enumeration(self, rng):
        for k in range(12):
            c = random_noisy_course(rng, n_hi=4, course_id=f"l2-{k}")
            assert denoise_l2(c).objective_value == pytest.approx(
                oracle_distance(c, DenoiseConfig(), power=2), abs=1e-9
            )

    def test_never_cheaper_than_l1_on_unit_moves(self, rng):
        # each unit move costs at least 1 under both norms
        for k in range(10):
            c = random_noisy_course(rng, course_id=f"cmp-{k}")
            assert denoise_l2(c).objective_value >= denoise_l1(c).objective_value - 1e-9


class TestTwoStage:
    def test_equals_full_method_without_ticketing(self, rng):
        for k in range(8):
            c = random_noisy_course(rng, n_hi=5, course_id=f"ts-{k}")
            a = denoise_two_stage(c)
            b = denoise_course(c)
            assert a.stage1_value == pytest.approx(b.stage1_value)
            assert a.stage2_value == pytest.approx(b.stage2_value)
            assert a.counts == b.counts

    def test_ticketing_stripped_by_default(self):
        c = make_course([5, 0, 0], [0, 0, 6], ticketing=[(6, 0), None, None])
        r = denoise_two_stage(c)
        assert not r.ticketing_dropped
        bare = denoise_course(make_course([5, 0, 0], [0, 0, 6]))
        assert r.counts == bare.counts

    def test_opt_in_ticketing(self):
        c = make_course([5, 0, 0], [0, 0, 6], ticketing=[(6, 0), None, None])
        r = denoise_two_stage(c, include_ticketing=True)
        assert r.counts[0].boarding >= 6


class TestGibbs:
    def test_seed_reproducible(self, rng):
        c = random_noisy_course(rng, course_id="g0")
        assert denoise_gibbs(c, seed=7).counts == denoise_gibbs(c, seed=7).counts

    def test_seeds_decorrelate(self, rng):
        c = random_noisy_course(rng, count_hi=30, capacity=40, course_id="g1")
        draws = {denoise_gibbs(c, seed=s).counts for s in range(8)}
        assert len(draws) > 1

    def test_output_always_feasible(self, rng):
        for k in range(40):
            c = random_noisy_course(rng, n_hi=8, course_id=f"gf-{k}")
            r = denoise_gibbs(c, seed=k)
            report = validate_course(c.with_observed(r.counts))
            assert report.balanced and report.within_bounds and report.endpoints_ok

    def test_concentrates_on_observations_when_valid(self):
        c = make_course([5, 3, 0], [0, 2, 6])
        exact = [(5, 0), (3, 2), (0, 6)]
        hits = sum(
            1
            for s in range(100)
            if [(x.boarding, x.alighting) for x in denoise_gibbs(c, seed=s).counts]
            == exact
        )
        # the observed vector is the modal draw, not merely an occasional one
        assert hits > 30

    def test_iteration_count_guard(self):
        with pytest.raises(ValueError):
            denoise_gibbs(make_course([1, 0], [0, 1]), iterations=0)

    def test_opt_in_ticketing_floors(self):
        c = make_course([5, 0, 0], [0, 0, 6], ticketing=[(4, 0), None, None])
        for s in range(10):
            r = denoise_gibbs(c, seed=s, include_ticketing=True)
            assert r.counts[0].boarding >= 4


class TestIdentity:
    def test_passes_observations_through(self):
        c = make_course([5, 3, 2], [0, 2, 6])  # not even balanced
        r = denoise_identity(c)
        assert [(x.boarding, x.alighting) for x in r.counts] == [(5, 0), (3, 2), (2, 6)]
        assert r.occupancy.after_stop == compute_occupancy(c.observed_counts()).after_stop

    def test_descriptive_scores_for_valid_input(self):
        r = denoise_identity(make_course([5, 3, 0], [0, 2, 6]))
        assert r.stage1_value == pytest.approx(1.0)
        assert r.quality == pytest.approx(1.0)
