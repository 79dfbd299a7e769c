"""Noise scenario generation."""

import dataclasses

import pytest

from apcdenoise.model import validate_course
from apcdenoise.simulate import (
    SCENARIO_KINDS,
    Scenario,
    SimulatedPair,
    dataset_metadata,
    default_scenarios,
    distort,
    scenario_suite,
    synthetic_truths,
)


def counts_of(course):
    return [(c.boarding, c.alighting) for c in course.observed_counts()]


@pytest.fixture(scope="module")
def truths():
    return synthetic_truths(8, 321)


def test_synthetic_truths_are_valid(truths):
    assert len(truths) == 8
    ids = set()
    for t in truths:
        assert validate_course(t).all_ok
        assert t.capacity == 60
        ids.add(t.course_id)
    assert len(ids) == 8


def test_synthetic_truths_deterministic():
    a = synthetic_truths(4, 5)
    b = synthetic_truths(4, 5)
    assert [counts_of(t) for t in a] == [counts_of(t) for t in b]


def test_suite_shape(truths):
    suite = scenario_suite(truths, seed=11)
    assert set(suite) == set(SCENARIO_KINDS)
    for pairs in suite.values():
        assert len(pairs) == len(truths)
    assert scenario_suite([], seed=11) == {k: [] for k in SCENARIO_KINDS}


def test_suite_deterministic(truths):
    a = scenario_suite(truths, seed=11)
    b = scenario_suite(truths, seed=11)
    for kind in SCENARIO_KINDS:
        for pa, pb in zip(a[kind], b[kind]):
            assert counts_of(pa.noisy) == counts_of(pb.noisy)


def test_seed_changes_noise(truths):
    a = scenario_suite(truths, seed=11)
    b = scenario_suite(truths, seed=12)
    assert any(
        counts_of(pa.noisy) != counts_of(pb.noisy)
        for pa, pb in zip(a["gaussian"], b["gaussian"])
    )


def test_scenarios_draw_independent_streams(truths):
    """Changing one scenario's parameters must not disturb the others."""
    tweaked = [
        dataclasses.replace(s, outlier_count=3) if s.kind == "outliers" else s
        for s in default_scenarios()
    ]
    a = scenario_suite(truths, seed=11)
    b = scenario_suite(truths, seed=11, scenarios=tweaked)
    for kind in ("gaussian", "overestimate", "underestimate", "slope"):
        for pa, pb in zip(a[kind], b[kind]):
            assert counts_of(pa.noisy) == counts_of(pb.noisy)


def test_truth_courses_never_mutated(truths):
    before = [counts_of(t) for t in truths]
    scenario_suite(truths, seed=31)
    assert [counts_of(t) for t in truths] == before


class TestDistort:
    def test_gaussian_without_noise_is_identity(self, truths):
        pair = distort(truths[0], Scenario("gaussian", noise_ratio=0.0), seed=1)
        assert counts_of(pair.noisy) == counts_of(pair.truth)

    def test_overestimate_adds_within_range(self, truths):
        sc = Scenario("overestimate", noise_ratio=0.0, add_min=1, add_max=5)
        pair = distort(truths[0], sc, seed=2)
        for (tb, ta), (nb, na) in zip(counts_of(pair.truth), counts_of(pair.noisy)):
            assert tb + 1 <= nb <= tb + 5
            assert ta + 1 <= na <= ta + 5

    def test_underestimate_subtracts_and_clamps(self, truths):
        sc = Scenario("underestimate", noise_ratio=0.0, add_min=1, add_max=5)
        pair = distort(truths[0], sc, seed=3)
        for (tb, ta), (nb, na) in zip(counts_of(pair.truth), counts_of(pair.noisy)):
            assert max(0, tb - 5) <= nb <= max(0, tb - 1)
            assert na <= ta

    def test_slope_pulls_toward_pivot(self, truths):
        truth = truths[0]
        sc = Scenario("slope", noise_ratio=0.0, slope=0.5)
        pair = distort(truth, sc, seed=4)
        flat = [v for pair_ in counts_of(truth) for v in pair_]
        pivot = sum(v for v in flat if v) / max(1, sum(1 for v in flat if v))
        for t, n in zip(counts_of(pair.truth), counts_of(pair.noisy)):
            for side in (0, 1):
                moved = n[side] - t[side]
                assert moved * (pivot - t[side]) >= 0 or moved == 0

    def test_outliers_overwrite_exact_cells(self):
        from conftest import make_course

        # every cell nonzero so an overwrite is always visible
        truth = make_course([3, 4, 5, 6, 7, 8], [2, 3, 4, 5, 6, 7], capacity=100)
        sc = Scenario("outliers", noise_ratio=0.0, outlier_count=2)
        pair = distort(truth, sc, seed=5)
        changed = [
            (t, n)
            for tp, np_ in zip(counts_of(pair.truth), counts_of(pair.noisy))
            for t, n in ((tp[0], np_[0]), (tp[1], np_[1]))
            if t != n
        ]
        assert len(changed) == 2
        for _, noisy_value in changed:
            assert noisy_value in (0, 200)  # either wiped or pinned at twice capacity

    def test_same_seed_same_draw(self, truths):
        sc = Scenario("gaussian", noise_ratio=0.25)
        a = distort(truths[0], sc, seed=9)
        b = distort(truths[0], sc, seed=9)
        assert counts_of(a.noisy) == counts_of(b.noisy)

    def test_ticketing_copied_from_truth(self, truths):
        sc = Scenario("gaussian", noise_ratio=0.3)
        pair = distort(truths[0], sc, seed=6, ticketing_from_truth=True)
        for stop, truth_counts in zip(pair.noisy.stops, counts_of(pair.truth)):
            assert stop.ticketing is not None
            assert (stop.ticketing.boarding, stop.ticketing.alighting) == truth_counts


class TestScenarioValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Scenario("fog")

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"noise_ratio": -0.1},
            {"add_min": 6, "add_max": 5},
            {"slope": 1.5},
            {"outlier_count": -1},
        ],
    )
    def test_bad_parameters(self, kwargs):
        with pytest.raises(ValueError):
            Scenario("gaussian", **kwargs)


def test_pair_requires_matching_shape(truths):
    other = synthetic_truths(1, 99, min_stops=3, max_stops=3)[0]
    with pytest.raises(ValueError):
        SimulatedPair(truth=truths[0], noisy=other)


def test_metadata_records_draw_parameters():
    sc = Scenario("outliers", outlier_count=2)
    meta = dataset_metadata(sc, seed=42)
    assert meta["scenario"] == "outliers"
    assert meta["master_seed"] == 42
    assert meta["params"]["outlier_count"] == 2
    assert "numpy" in meta["generator"]
