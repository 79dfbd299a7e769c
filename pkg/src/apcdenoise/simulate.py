"""Seeded measurement-distortion scenarios for benchmark datasets.

Starting from clean ground-truth courses, each scenario produces a noisy
twin dataset: systematic overestimation or underestimation, a slope that
inflates low counts and deflates high ones, gross outliers, or plain
Gaussian noise. Every scenario except the pure-Gaussian one applies its
bias first and Gaussian noise second. Distortion is purely observational;
no passenger demand is modeled.

Randomness comes from numpy's default PCG64 generator. Dataset seeds are
derived per (master seed, scenario, course index), so regenerating one
scenario never disturbs another and a fixed master seed reproduces every
dataset bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import Course, Stop, StopCounts, TicketingCounts

SCENARIO_KINDS = ("gaussian", "overestimate", "underestimate", "slope", "outliers")

# Fixed stream ids per scenario kind: seeds must not depend on the order
# or the subset of scenarios requested.
_KIND_STREAM = {kind: i for i, kind in enumerate(SCENARIO_KINDS)}

GENERATOR_NAME = "numpy PCG64 (numpy.random.default_rng)"


@dataclass(frozen=True)
class Scenario:
    """One distortion recipe and its parameters.

    Parameters irrelevant to a kind are simply unused: a single type
    keeps scenario files and metadata uniform.
    """

    kind: str
    noise_ratio: float = 0.10
    add_min: int = 1
    add_max: int = 5
    slope: float = 0.3
    outlier_count: int = 1

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.noise_ratio < 0:
            raise ValueError("noise_ratio must be >= 0")
        if self.add_min > self.add_max:
            raise ValueError("add_min must be <= add_max")
        if not 0 < self.slope < 1:
            raise ValueError("slope must be in (0, 1)")
        if self.outlier_count < 0:
            raise ValueError("outlier_count must be >= 0")


@dataclass(frozen=True)
class SimulatedPair:
    """A clean course and its distorted twin (same stops, same capacity)."""

    truth: Course
    noisy: Course

    def __post_init__(self) -> None:
        same_stops = tuple(s.stop_id for s in self.truth.stops) == tuple(
            s.stop_id for s in self.noisy.stops
        )
        if not same_stops or self.truth.capacity != self.noisy.capacity:
            raise ValueError("truth and noisy courses must share stops and capacity")


def default_scenarios() -> tuple[Scenario, ...]:
    return tuple(Scenario(kind) for kind in SCENARIO_KINDS)


def distort(
    truth: Course,
    scenario: Scenario,
    seed: int,
    *,
    ticketing_from_truth: bool = False,
) -> SimulatedPair:
    """Distort one course's counts; deterministic per seed.

    Per count: (a) the scenario's bias, then (b) Gaussian noise with
    standard deviation noise_ratio times the count, rounded and clamped
    at zero. Counts overwritten by the outlier transform skip step (b):
    they are meant to land exactly on 2 x capacity or 0. The gaussian
    kind applies only step (b).
    """
    n = truth.n_stops
    obs = truth.observed_counts()
    counts = np.array(
        [c.boarding for c in obs] + [c.alighting for c in obs], dtype=np.int64
    )
    rng = np.random.default_rng(seed)
    skip_noise = np.zeros(2 * n, dtype=bool)

    if scenario.kind == "overestimate":
        counts += rng.integers(scenario.add_min, scenario.add_max + 1, size=2 * n)
    elif scenario.kind == "underestimate":
        counts -= rng.integers(scenario.add_min, scenario.add_max + 1, size=2 * n)
        counts = np.maximum(counts, 0)
    elif scenario.kind == "slope":
        nonzero = counts[counts > 0]
        pivot = float(nonzero.mean()) if nonzero.size else 0.0
        counts = counts + np.rint(scenario.slope * (pivot - counts)).astype(np.int64)
    elif scenario.kind == "outliers":
        chosen = rng.choice(2 * n, size=min(scenario.outlier_count, 2 * n), replace=False)
        high = rng.random(chosen.size) < 0.5
        counts[chosen] = np.where(high, 2 * truth.capacity, 0)
        skip_noise[chosen] = True

    noise = np.rint(rng.normal(0.0, scenario.noise_ratio * counts)).astype(np.int64)
    counts = np.where(skip_noise, counts, np.maximum(counts + noise, 0))

    noisy = truth.with_observed(
        [StopCounts(int(counts[i]), int(counts[n + i])) for i in range(n)]
    )
    if ticketing_from_truth:
        noisy = replace(
            noisy,
            stops=tuple(
                replace(s, ticketing=TicketingCounts(c.boarding, c.alighting))
                for s, c in zip(noisy.stops, obs)
            ),
        )
    return SimulatedPair(truth, noisy)


def _course_seed(master_seed: int, kind: str, course_index: int) -> int:
    stream = np.random.SeedSequence([master_seed, _KIND_STREAM[kind], course_index])
    return int(stream.generate_state(1, np.uint64)[0])


def scenario_suite(
    truths: Sequence[Course],
    seed: int,
    *,
    scenarios: Optional[Sequence[Scenario]] = None,
    ticketing_from_truth: bool = False,
) -> dict[str, list[SimulatedPair]]:
    """All scenario datasets from one master seed, keyed by kind."""
    chosen = tuple(scenarios) if scenarios is not None else default_scenarios()
    return {
        sc.kind: [
            distort(
                course,
                sc,
                _course_seed(seed, sc.kind, i),
                ticketing_from_truth=ticketing_from_truth,
            )
            for i, course in enumerate(truths)
        ]
        for sc in chosen
    }


def dataset_metadata(scenario: Scenario, seed: int) -> dict:
    """Sidecar contents making a dataset reproducible: seed, params, generator."""
    return {
        "scenario": scenario.kind,
        "master_seed": seed,
        "params": {
            "noise_ratio": scenario.noise_ratio,
            "add_min": scenario.add_min,
            "add_max": scenario.add_max,
            "slope": scenario.slope,
            "outlier_count": scenario.outlier_count,
        },
        "generator": GENERATOR_NAME,
    }


def synthetic_truths(
    count: int,
    seed: int,
    *,
    min_stops: int = 8,
    max_stops: int = 12,
    capacity: int = 60,
    lines: Sequence[str] = ("L1", "L2"),
) -> list[Course]:
    """Clean, consistent demo courses with a rise-then-drain load shape.

    Boarding pressure dominates the first half of the course and
    alighting the second, occupancy never exceeds the vehicle bound, and
    whoever is still aboard leaves at the terminus. Useful as benchmark
    ground truth where no operator data exists.
    """
    rng = np.random.default_rng(seed)
    courses: list[Course] = []
    for k in range(count):
        n = int(rng.integers(min_stops, max_stops + 1))
        u = capacity  # stay below the load-factor bound so truths validate
        occ = 0
        stops: list[Stop] = []
        for i in range(n):
            ramp = 1.0 - i / (n - 1)
            z = 0 if i == 0 else int(rng.binomial(occ, 0.15 + 0.7 * (1.0 - ramp)))
            occ -= z
            if i == n - 1:
                z += occ
                occ = 0
                y = 0
            else:
                headroom = u - occ
                y = int(rng.binomial(min(headroom, 25), 0.2 + 0.6 * ramp))
                occ += y
            stops.append(Stop(f"s{i + 1:02d}", StopCounts(y, z)))
        line = lines[k % len(lines)]
        direction = "out" if (k // len(lines)) % 2 == 0 else "back"
        courses.append(
            Course(
                f"course-{k + 1:03d}",
                line,
                direction,
                datetime(2024, 1, 1, 6, 0) + timedelta(minutes=30 * k),
                capacity,
                tuple(stops),
            )
        )
    return courses
