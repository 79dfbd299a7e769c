"""Shared course generators and the acceptance summary hook."""

from __future__ import annotations

from datetime import datetime

import numpy as np
import pytest

from apcdenoise.model import Course, Stop, StopCounts, TicketingCounts


def make_course(
    boardings,
    alightings,
    capacity: int = 10,
    ticketing=None,
    course_id: str = "c1",
    line_id: str = "L1",
    direction: str = "out",
) -> Course:
    """Course literal from two count lists (and optional ticketing pairs).

    ticketing, when given, is a list of (boarding, alighting) pairs of
    the same length; None entries leave the stop without ticketing and
    None inside a pair leaves that side absent.
    """
    stops = []
    for i, (y, z) in enumerate(zip(boardings, alightings)):
        tick = None
        if ticketing is not None and ticketing[i] is not None:
            tb, ta = ticketing[i]
            tick = TicketingCounts(tb, ta)
        stops.append(Stop(f"s{i + 1}", StopCounts(y, z), tick))
    return Course(
        course_id, line_id, direction, datetime(2024, 3, 1, 8, 0), capacity, tuple(stops)
    )


def random_noisy_course(
    rng: np.random.Generator,
    *,
    n_lo: int = 2,
    n_hi: int = 6,
    capacity: int = 10,
    count_hi: int = 8,
    ticketing_prob: float = 0.0,
    course_id: str = "c1",
) -> Course:
    """Unconstrained random counts; usually violates the consistency rules."""
    n = int(rng.integers(n_lo, n_hi + 1))
    boards = rng.integers(0, count_hi + 1, size=n)
    alights = rng.integers(0, count_hi + 1, size=n)
    ticketing = None
    if ticketing_prob > 0 and rng.random() < ticketing_prob:
        ticketing = []
        for i in range(n):
            if rng.random() < 0.4:
                tb = int(rng.integers(0, count_hi + 1)) if rng.random() < 0.8 else None
                ta = int(rng.integers(0, count_hi + 1)) if rng.random() < 0.3 else None
                ticketing.append((tb, ta))
            else:
                ticketing.append(None)
    return make_course(
        [int(b) for b in boards],
        [int(a) for a in alights],
        capacity=capacity,
        ticketing=ticketing,
        course_id=course_id,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(123)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion" in nodeid and report.when == "call":
                rows.append((nodeid.split("::")[-1], outcome == "passed"))
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok in sorted(rows):
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}")
