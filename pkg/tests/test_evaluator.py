"""Error metrics, ranking and the benchmark driver."""

import csv
import io
import json

import pytest

import apcdenoise.evaluate as evaluate
from apcdenoise.baselines import denoise_identity
from apcdenoise.evaluate import (
    METHOD_NAMES,
    BenchmarkReport,
    bias_delta,
    benchmark,
    mae,
    rank_sum,
)
from apcdenoise.model import DenoiseConfig
from apcdenoise.simulate import SimulatedPair, scenario_suite, synthetic_truths
from conftest import make_course


def course_pair(truth_counts, estimate_counts, capacity=10):
    """A reference course and a candidate counts vector for it."""
    from apcdenoise.model import StopCounts

    boards_t, alights_t = zip(*truth_counts)
    truth = make_course(list(boards_t), list(alights_t), capacity=capacity)
    estimate = [StopCounts(b, a) for b, a in estimate_counts]
    return truth, estimate


class TestMae:
    def test_perfect_estimate(self):
        pair = course_pair([(5, 0), (0, 5)], [(5, 0), (0, 5)])
        assert mae([pair]) == (0.0, 0.0, 0.0)

    def test_single_offset(self):
        # 3 passengers too many at the first stop, only the occupancy between
        # the stops carries the error: |3| and |0| average to 1.5
        truth, est = course_pair([(5, 0), (0, 5)], [(8, 0), (0, 8)])
        b, a, occ = mae([(truth, est)])
        assert b == pytest.approx(1.5)
        assert a == pytest.approx(1.5)
        assert occ == pytest.approx(1.5)

    def test_occupancy_error_persists_downstream(self):
        truth, est = course_pair(
            [(4, 0), (2, 1), (0, 3), (0, 2)],
            [(6, 0), (2, 1), (0, 3), (0, 4)],
        )
        b, a, occ = mae([(truth, est)])
        assert b == pytest.approx(0.5)
        assert a == pytest.approx(0.5)
        assert occ == pytest.approx(1.5)  # +2 on three of four prefixes

    def test_mismatched_shapes_are_skipped(self):
        from apcdenoise.model import StopCounts

        ok = course_pair([(5, 0), (0, 5)], [(5, 0), (0, 5)])
        short_truth = make_course([5, 0], [0, 5])
        long_est = [StopCounts(5, 0), StopCounts(0, 0), StopCounts(0, 5)]
        assert mae([ok, (short_truth, long_est)]) == (0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            mae([(short_truth, long_est)])


class TestBiasDelta:
    def test_signed_and_absolute(self):
        # +2 at one of two stops on each side, so every mean is 1.0
        ref, cand = course_pair([(5, 0), (0, 5)], [(7, 0), (0, 7)])
        stats = bias_delta([(ref, cand)])
        assert stats["boardings"][0] == pytest.approx(1.0)
        assert stats["boardings"][1] == pytest.approx(1.0)
        assert stats["occupancy"][0] == pytest.approx(1.0)

    def test_opposite_errors_cancel_in_bias_only(self):
        ref, cand = course_pair(
            [(5, 0), (5, 5), (0, 5)], [(6, 0), (4, 5), (0, 5)]
        )
        stats = bias_delta([(ref, cand)])
        assert stats["boardings"][0] == pytest.approx(0.0)
        assert stats["boardings"][1] == pytest.approx(2 / 3)

    def test_abs_bounds_signed(self, rng):
        from conftest import random_noisy_course

        pairs = []
        for k in range(6):
            a = random_noisy_course(rng, n_lo=4, n_hi=4, course_id=f"a{k}")
            b = random_noisy_course(rng, n_lo=4, n_hi=4, course_id=f"b{k}")
            pairs.append((a, b.observed_counts()))
        for signed, absolute in bias_delta(pairs).values():
            assert abs(signed) <= absolute + 1e-12


class TestRankSum:
    def test_plain_ordering(self):
        table = {"d1": {"a": 1.0, "b": 2.0}, "d2": {"a": 3.0, "b": 4.0}}
        assert rank_sum(table) == {"a": 2, "b": 4}

    def test_ties_share_the_better_rank(self):
        table = {"d1": {"a": 1.0, "b": 1.0, "c": 2.0}}
        assert rank_sum(table) == {"a": 1, "b": 1, "c": 3}

    def test_identical_methods_all_rank_first(self):
        table = {f"d{i}": {"a": 5.0, "b": 5.0} for i in range(4)}
        assert rank_sum(table) == {"a": 4, "b": 4}

    def test_method_sets_must_agree(self):
        with pytest.raises(ValueError):
            rank_sum({"d1": {"a": 1.0}, "d2": {"a": 1.0, "b": 2.0}})

    def test_sum_is_conserved_without_ties(self):
        table = {
            "d1": {"a": 1.0, "b": 2.0, "c": 3.0},
            "d2": {"a": 3.0, "b": 1.0, "c": 2.0},
        }
        sums = rank_sum(table)
        assert sum(sums.values()) == 2 * (1 + 2 + 3)


@pytest.fixture(scope="module")
def small_report():
    truths = synthetic_truths(3, 71, capacity=30, min_stops=4, max_stops=6)
    suite = scenario_suite(truths, seed=13)
    datasets = {k: suite[k] for k in ("gaussian", "outliers")}
    return benchmark(datasets, ["l1", "gibbs"], config=DenoiseConfig(), seed=0)


class TestBenchmark:
    def test_baseline_always_included_first(self, small_report):
        methods = [r.method for r in small_report.rows if r.dataset == "gaussian"]
        assert methods[0] == "baseline"
        assert set(methods) == {"baseline", "l1", "gibbs"}

    def test_row_counts_and_failures(self, small_report):
        assert len(small_report.rows) == 2 * 3
        assert all(r.failures == 0 for r in small_report.rows)
        assert all(r.mean_runtime_ms >= 0.0 for r in small_report.rows)

    def test_rank_sums_cover_requested_methods(self, small_report):
        assert set(small_report.rank_sums) == {"baseline", "l1", "gibbs"}
        assert all(v >= 2 for v in small_report.rank_sums.values())

    def test_identity_on_clean_data_scores_zero(self):
        truths = synthetic_truths(2, 5, capacity=30, min_stops=4, max_stops=4)
        pairs = [SimulatedPair(t, t) for t in truths]
        report = benchmark({"clean": pairs}, ["l1"], seed=0)
        for row in report.rows:
            assert row.mae_occupancy == pytest.approx(0.0)
            assert row.mae_boardings == pytest.approx(0.0)

    def test_unknown_method_rejected(self):
        truths = synthetic_truths(1, 5, min_stops=4, max_stops=4)
        pairs = [SimulatedPair(t, t) for t in truths]
        with pytest.raises(ValueError):
            benchmark({"d": pairs}, ["voodoo"], seed=0)

    def test_render_formats(self, small_report):
        text = small_report.render_text()
        assert "rank sum" in text
        assert "gaussian" in text and "baseline" in text

        rows = list(csv.DictReader(io.StringIO(small_report.render_csv())))
        assert len(rows) == len(small_report.rows)
        assert rows[0]["dataset"] == small_report.rows[0].dataset

        blob = json.loads(small_report.to_json())
        assert blob["rank_sums"] == small_report.rank_sums
        assert len(blob["rows"]) == len(small_report.rows)

    def test_report_roundtrips_through_row_dicts(self, small_report):
        blob = json.loads(small_report.to_json())
        rebuilt = BenchmarkReport(
            rows=tuple(evaluate.MetricRow(**r) for r in blob["rows"]),
            rank_sums=dict(blob["rank_sums"]),
        )
        assert rebuilt.render_csv() == small_report.render_csv()


def test_benchmark_counts_method_failures(monkeypatch):
    real_registry = evaluate.method_registry

    def registry(config, seed):
        reg = real_registry(config, seed)
        calls = {"n": 0}

        def flaky(course):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("boom")
            return denoise_identity(course, config)

        reg["flaky"] = flaky
        return reg

    monkeypatch.setattr(evaluate, "method_registry", registry)
    truths = synthetic_truths(3, 8, capacity=30, min_stops=4, max_stops=4)
    pairs = [SimulatedPair(t, t) for t in truths]
    report = benchmark({"d": pairs}, ["flaky"], seed=0)
    flaky_row = next(r for r in report.rows if r.method == "flaky")
    assert flaky_row.failures == 1
    # surviving courses are clean, so means ignore the failed one entirely
    assert flaky_row.mae_occupancy == pytest.approx(0.0)
