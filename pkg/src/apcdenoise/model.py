"""Domain model for transit passenger-count denoising.

A course is a single vehicle run along a line: an ordered sequence of
stops, each carrying boarding/alighting counts observed by onboard
counting sensors and, optionally, counts derived from ticket
validations. Observed counts are frequently inconsistent (more
passengers leave than ever boarded, occupancy drifts negative or past
the vehicle capacity); the rest of the package reconciles them.

All types here are immutable value objects, safe to share between
threads without locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from itertools import accumulate
from typing import Optional, Sequence


@dataclass(frozen=True)
class StopCounts:
    """Passengers boarding and alighting at one stop."""

    boarding: int
    alighting: int

    def __post_init__(self) -> None:
        if self.boarding < 0 or self.alighting < 0:
            raise ValueError(
                f"counts must be nonnegative, got ({self.boarding}, {self.alighting})"
            )


@dataclass(frozen=True)
class TicketingCounts:
    """Fare-validation counts for one stop.

    Either side may be absent: boardings come straight from validations,
    alightings only exist when some upstream reconstruction provided
    them. A present value of 0 is a real observation ("nobody validated
    here") and yields a vacuous lower bound, while None asserts nothing.
    """

    boarding: Optional[int] = None
    alighting: Optional[int] = None

    def __post_init__(self) -> None:
        for label, v in (("boarding", self.boarding), ("alighting", self.alighting)):
            if v is not None and v < 0:
                raise ValueError(f"ticketing {label} must be nonnegative, got {v}")

    @property
    def any_present(self) -> bool:
        return self.boarding is not None or self.alighting is not None


@dataclass(frozen=True)
class Stop:
    """One stop of a course.

    ``observed`` holds the sensor counts and is None for courses whose
    vehicle carries no counting cells; such courses cannot be denoised
    but still serve as ticketing history when estimating priors.
    ``ticketing`` holds counts from fare validation and is None where no
    ticketing data exists for the stop.
    """

    stop_id: str
    observed: Optional[StopCounts]
    ticketing: Optional[TicketingCounts] = None

    def __post_init__(self) -> None:
        if not self.stop_id:
            raise ValueError("stop_id must be non-empty")


@dataclass(frozen=True)
class Course:
    """An ordered run of a vehicle along a line, with per-stop counts."""

    course_id: str
    line_id: str
    direction: str
    departure_time: datetime
    capacity: int
    stops: tuple[Stop, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "stops", tuple(self.stops))
        if len(self.stops) < 2:
            raise ValueError(f"a course needs at least 2 stops, got {len(self.stops)}")
        if self.capacity <= 0:
            raise ValueError(f"capacity must be a positive integer, got {self.capacity}")
        flags = [s.observed is not None for s in self.stops]
        # Sensor presence is a property of the vehicle, not of single stops.
        if any(flags) and not all(flags):
            raise ValueError("observed counts must be present at every stop or at none")

    @property
    def n_stops(self) -> int:
        return len(self.stops)

    @property
    def has_observed(self) -> bool:
        return self.stops[0].observed is not None

    @property
    def has_ticketing(self) -> bool:
        return any(s.ticketing is not None and s.ticketing.any_present for s in self.stops)

    def observed_counts(self) -> list[StopCounts]:
        if not self.has_observed:
            raise ValueError(f"course {self.course_id} has no observed counts")
        return [s.observed for s in self.stops]  # type: ignore[misc]

    def with_observed(self, counts: Sequence[StopCounts]) -> "Course":
        """Copy of the course with its observed counts replaced."""
        if len(counts) != self.n_stops:
            raise ValueError("counts length must match the stop list")
        stops = tuple(
            Stop(s.stop_id, c, s.ticketing) for s, c in zip(self.stops, counts)
        )
        return Course(
            self.course_id,
            self.line_id,
            self.direction,
            self.departure_time,
            self.capacity,
            stops,
        )


@dataclass(frozen=True)
class DenoiseConfig:
    """Tunables shared by the denoiser, the baselines and the simulator.

    load_factor
        Occupancy may exceed seated-plus-standing nominal capacity during
        peaks; the effective bound is round(load_factor * capacity).
    count_cap_factor
        Single-stop counts are considered physically impossible above
        count_cap_factor * L_max; observed values beyond it are clamped
        before building similarity targets.
    alpha_floor, alpha_ratio
        Half margin of the triangular similarity around an observed
        count: max(alpha_floor, alpha_ratio * observed).
    lex_slack
        Numerical slack used when pinning an earlier stage's objective
        while optimizing the next one.
    """

    load_factor: float = 1.4
    count_cap_factor: float = 2.0
    alpha_floor: int = 5
    alpha_ratio: float = 0.5
    feasibility_tolerance: float = 1e-6
    integrality_tolerance: float = 1e-6
    lex_slack: float = 1e-6

    def __post_init__(self) -> None:
        if self.load_factor < 1.0:
            raise ValueError("load_factor must be >= 1")
        if self.count_cap_factor < 1.0:
            raise ValueError("count_cap_factor must be >= 1")
        if self.alpha_floor < 1:
            raise ValueError("alpha_floor must be >= 1")
        if not 0.0 < self.alpha_ratio <= 1.0:
            raise ValueError("alpha_ratio must be in (0, 1]")
        for name in ("feasibility_tolerance", "integrality_tolerance", "lex_slack"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def max_load(self, capacity: int) -> int:
        """Effective occupancy and per-count upper bound for a vehicle."""
        return int(round(self.load_factor * capacity))

    def count_cap(self, capacity: int) -> int:
        """Hard cap applied to observed counts before denoising."""
        return int(round(self.count_cap_factor * self.max_load(capacity)))


@dataclass(frozen=True)
class OccupancyProfile:
    """Vehicle occupancy right after each stop."""

    after_stop: tuple[int, ...]


def compute_occupancy(counts: Sequence[StopCounts]) -> OccupancyProfile:
    """Running sum of boardings minus alightings.

    Accepts any counts, including inconsistent ones, so the profile may
    go negative; validity is judged separately by validate_course.
    """
    if not counts:
        raise ValueError("counts must be non-empty")
    return OccupancyProfile(
        tuple(accumulate(c.boarding - c.alighting for c in counts))
    )


@dataclass(frozen=True)
class Violation:
    """One violated consistency rule, pointing at a stop where relevant."""

    constraint: str
    stop_index: Optional[int]
    detail: str


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of checking a course's observed counts.

    ticketing_ok is None when the course carries no ticketing data.
    """

    balanced: bool
    within_bounds: bool
    endpoints_ok: bool
    ticketing_ok: Optional[bool]
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def all_ok(self) -> bool:
        return not self.violations


def validate_course(course: Course, config: DenoiseConfig = DenoiseConfig()) -> ValidityReport:
    """Check a course's observed counts against the consistency rules.

    Rules: total boardings equal total alightings; every count and every
    occupancy lies in [0, L_max]; nobody alights at the first stop or
    boards at the last; observed counts dominate ticketing counts where
    ticketing is present.
    """
    counts = course.observed_counts()
    l_max = config.max_load(course.capacity)
    violations: list[Violation] = []

    total_b = sum(c.boarding for c in counts)
    total_a = sum(c.alighting for c in counts)
    balanced = total_b == total_a
    if not balanced:
        violations.append(
            Violation("balance", None, f"boardings {total_b} != alightings {total_a}")
        )

    within = True
    for i, c in enumerate(counts):
        for label, v in (("boarding", c.boarding), ("alighting", c.alighting)):
            if not 0 <= v <= l_max:
                within = False
                violations.append(
                    Violation("count-range", i, f"{label} {v} outside [0, {l_max}]")
                )
    for i, occ in enumerate(compute_occupancy(counts).after_stop):
        if not 0 <= occ <= l_max:
            within = False
            violations.append(
                Violation("occupancy-range", i, f"occupancy {occ} outside [0, {l_max}]")
            )

    endpoints_ok = True
    if counts[0].alighting != 0:
        endpoints_ok = False
        violations.append(
            Violation("endpoint", 0, f"alighting {counts[0].alighting} at first stop")
        )
    if counts[-1].boarding != 0:
        endpoints_ok = False
        violations.append(
            Violation(
                "endpoint",
                course.n_stops - 1,
                f"boarding {counts[-1].boarding} at last stop",
            )
        )

    ticketing_ok: Optional[bool] = None
    if course.has_ticketing:
        ticketing_ok = True
        for i, (stop, c) in enumerate(zip(course.stops, counts)):
            t = stop.ticketing
            if t is None:
                continue
            if t.boarding is not None and c.boarding < t.boarding:
                ticketing_ok = False
                violations.append(
                    Violation(
                        "ticketing", i, f"boarding {c.boarding} < ticketing {t.boarding}"
                    )
                )
            if t.alighting is not None and c.alighting < t.alighting:
                ticketing_ok = False
                violations.append(
                    Violation(
                        "ticketing",
                        i,
                        f"alighting {c.alighting} < ticketing {t.alighting}",
                    )
                )

    return ValidityReport(
        balanced=balanced,
        within_bounds=within,
        endpoints_ok=endpoints_ok,
        ticketing_ok=ticketing_ok,
        violations=tuple(violations),
    )
