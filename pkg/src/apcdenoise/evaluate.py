"""Metrics and benchmark tables for comparing reconstruction methods.

Three metric families, all per stop and pooled over courses:

  mae         mean absolute error of boardings, alightings and the
              occupancy profile against a reference;
  bias_delta  signed mean and absolute mean of candidate minus
              reference (positive occupancy bias means the candidate
              exceeds the reference);
  rank_sum    per-dataset competition ranking of methods by occupancy
              MAE (rank 1 best, ties share the lower rank), summed
              across datasets.

benchmark() drives every method over every dataset, timing each
course's solve (model build plus solve, I/O excluded) and recording
failures, and renders text/CSV/JSON reports.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .baselines import (
    denoise_gibbs,
    denoise_identity,
    denoise_l1,
    denoise_l2,
    denoise_two_stage,
)
from .denoise import STATUS_FAILED, DenoiseResult, denoise_course
from .model import Course, DenoiseConfig, StopCounts, compute_occupancy
from .simulate import SimulatedPair

logger = logging.getLogger(__name__)

METHOD_NAMES = ("baseline", "proposed", "l1", "l2", "two-stage", "gibbs")


@dataclass(frozen=True)
class MetricRow:
    """One dataset/method cell of the benchmark tables."""

    dataset: str
    method: str
    mae_boardings: float
    mae_alightings: float
    mae_occupancy: float
    mean_bias_boardings: float
    mean_bias_alightings: float
    mean_bias_occupancy: float
    mean_abs_delta_boardings: float
    mean_abs_delta_alightings: float
    mean_abs_delta_occupancy: float
    mean_runtime_ms: float
    failures: int = 0


Pair = tuple[Course, Sequence[StopCounts]]


def _deltas(pairs: Sequence[Pair]) -> Optional[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Stop-level candidate-minus-reference differences, pooled.

    Courses whose stop count does not match their candidate are skipped
    with a diagnostic rather than poisoning the batch.
    """
    boards: list[np.ndarray] = []
    alights: list[np.ndarray] = []
    occs: list[np.ndarray] = []
    for reference, candidate in pairs:
        if len(candidate) != reference.n_stops:
            logger.warning(
                "skipping course %s: candidate has %d stops, reference %d",
                reference.course_id,
                len(candidate),
                reference.n_stops,
            )
            continue
        ref = reference.observed_counts()
        boards.append(
            np.array([c.boarding - r.boarding for c, r in zip(candidate, ref)], float)
        )
        alights.append(
            np.array([c.alighting - r.alighting for c, r in zip(candidate, ref)], float)
        )
        occ_c = compute_occupancy(candidate).after_stop
        occ_r = compute_occupancy(ref).after_stop
        occs.append(np.array(occ_c, float) - np.array(occ_r, float))
    if not boards:
        return None
    return np.concatenate(boards), np.concatenate(alights), np.concatenate(occs)


def mae(pairs: Sequence[Pair]) -> tuple[float, float, float]:
    """Mean absolute error over all stops and courses, per quantity."""
    deltas = _deltas(pairs)
    if deltas is None:
        raise ValueError("no comparable courses")
    return tuple(float(np.abs(d).mean()) for d in deltas)  # type: ignore[return-value]


def bias_delta(pairs: Sequence[Pair]) -> dict[str, tuple[float, float]]:
    """Per quantity: (signed mean, absolute mean) of candidate minus reference."""
    deltas = _deltas(pairs)
    if deltas is None:
        raise ValueError("no comparable courses")
    return {
        name: (float(d.mean()), float(np.abs(d).mean()))
        for name, d in zip(("boardings", "alightings", "occupancy"), deltas)
    }


def rank_sum(table: Mapping[str, Mapping[str, float]]) -> dict[str, int]:
    """Sum of per-dataset competition ranks by occupancy MAE, per method.

    Rank 1 is the lowest MAE; tied methods share the lower rank (the
    next method gets the position count, not the next integer).
    """
    datasets = list(table)
    if not datasets:
        return {}
    methods = list(table[datasets[0]])
    sums = {m: 0 for m in methods}
    for ds in datasets:
        row = table[ds]
        missing = [m for m in methods if m not in row] + [
            m for m in row if m not in sums
        ]
        if missing:
            raise ValueError(f"dataset {ds!r}: method set mismatch ({missing})")
        for m in methods:
            sums[m] += 1 + sum(1 for other in methods if row[other] < row[m])
    return sums


def method_registry(
    config: DenoiseConfig, seed: int
) -> dict[str, Callable[[Course], DenoiseResult]]:
    """Name -> solver callables as benchmarked.

    "proposed" runs without priors or ticketing, matching the published
    comparison where neither is available; "baseline" is the undenoised
    observation.
    """
    return {
        "baseline": lambda c: denoise_identity(c, config),
        "proposed": lambda c: denoise_course(c, None, config),
        "l1": lambda c: denoise_l1(c, config),
        "l2": lambda c: denoise_l2(c, config),
        "two-stage": lambda c: denoise_two_stage(c, config),
        "gibbs": lambda c: denoise_gibbs(c, config, seed=seed),
    }


@dataclass(frozen=True)
class BenchmarkReport:
    """All benchmark rows plus the derived rank-sum line and renderers."""

    rows: tuple[MetricRow, ...]
    rank_sums: dict[str, int] = field(default_factory=dict)

    def render_text(self) -> str:
        if not self.rows:
            return "(empty benchmark)\n"
        headers = [
            "dataset",
            "method",
            "mae_board",
            "mae_alight",
            "mae_occ",
            "bias_occ",
            "absd_occ",
            "ms/course",
            "failures",
        ]
        lines = [headers]
        for r in self.rows:
            lines.append(
                [
                    r.dataset,
                    r.method,
                    f"{r.mae_boardings:.2f}",
                    f"{r.mae_alightings:.2f}",
                    f"{r.mae_occupancy:.2f}",
                    f"{r.mean_bias_occupancy:+.2f}",
                    f"{r.mean_abs_delta_occupancy:.2f}",
                    f"{r.mean_runtime_ms:.1f}",
                    str(r.failures),
                ]
            )
        widths = [max(len(row[i]) for row in lines) for i in range(len(headers))]
        out = []
        for idx, row in enumerate(lines):
            out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
            if idx == 0:
                out.append("  ".join("-" * w for w in widths))
        if self.rank_sums:
            out.append("")
            out.append("rank sum (occupancy MAE, lower is better):")
            for m, s in sorted(self.rank_sums.items(), key=lambda kv: kv[1]):
                out.append(f"  {m}: {s}")
        return "\n".join(out) + "\n"

    def render_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        fields = list(MetricRow.__dataclass_fields__)
        writer.writerow(fields)
        for r in self.rows:
            d = asdict(r)
            writer.writerow([d[f] for f in fields])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"rows": [asdict(r) for r in self.rows], "rank_sums": self.rank_sums},
            indent=2,
            sort_keys=True,
        )


def benchmark(
    datasets: Mapping[str, Sequence[SimulatedPair]],
    methods: Sequence[str],
    config: DenoiseConfig = DenoiseConfig(),
    seed: int = 0,
) -> BenchmarkReport:
    """Run every method on every dataset and aggregate the tables.

    MAE compares each method's output to the truth; bias/abs-delta
    compare it to the noisy observation (how much denoising changed the
    data). A method failure on a course is counted and excluded from
    that method's means. The undenoised baseline is always included so
    rank sums have their reference column.
    """
    registry = method_registry(config, seed)
    unknown = [m for m in methods if m not in registry]
    if unknown:
        raise ValueError(f"unknown methods: {unknown}; known: {sorted(registry)}")
    ordered = ["baseline"] + [m for m in methods if m != "baseline"]

    rows: list[MetricRow] = []
    occ_table: dict[str, dict[str, float]] = {}
    for ds_name, pairs in datasets.items():
        for m in ordered:
            solve = registry[m]
            outputs: list[tuple[SimulatedPair, DenoiseResult]] = []
            failures = 0
            elapsed: list[float] = []
            for pair in pairs:
                t0 = time.perf_counter()
                try:
                    result = solve(pair.noisy)
                except Exception:
                    logger.warning(
                        "%s failed on course %s", m, pair.noisy.course_id, exc_info=True
                    )
                    failures += 1
                    continue
                finally:
                    dt = time.perf_counter() - t0
                if result.status == STATUS_FAILED:
                    failures += 1
                    continue
                elapsed.append(dt)
                outputs.append((pair, result))
            if not outputs:
                logger.warning("%s produced no output on dataset %s", m, ds_name)
                continue
            vs_truth = [(p.truth, r.counts) for p, r in outputs]
            vs_noisy = [
                (p.noisy, r.counts) for p, r in outputs
            ]
            mb, ma, mo = mae(vs_truth)
            deltas = bias_delta(vs_noisy)
            rows.append(
                MetricRow(
                    dataset=ds_name,
                    method=m,
                    mae_boardings=mb,
                    mae_alightings=ma,
                    mae_occupancy=mo,
                    mean_bias_boardings=deltas["boardings"][0],
                    mean_bias_alightings=deltas["alightings"][0],
                    mean_bias_occupancy=deltas["occupancy"][0],
                    mean_abs_delta_boardings=deltas["boardings"][1],
                    mean_abs_delta_alightings=deltas["alightings"][1],
                    mean_abs_delta_occupancy=deltas["occupancy"][1],
                    mean_runtime_ms=1000.0 * float(np.mean(elapsed)),
                    failures=failures,
                )
            )
            occ_table.setdefault(ds_name, {})[m] = rows[-1].mae_occupancy

    complete = {
        ds: row for ds, row in occ_table.items() if set(row) == set(ordered)
    }
    sums = rank_sum(complete) if complete else {}
    return BenchmarkReport(tuple(rows), sums)
