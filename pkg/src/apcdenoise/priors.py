"""Historical boarding/alighting shape priors per line and direction.

Two sources describe where passengers get on and off along a line:
counting-sensor history (where vehicles carried them) and ticketing
history. Each yields per-stop proportions of the total flow; the two
are blended with weight r = share of history courses that carried
sensors, so lines with sparse sensor coverage lean on ticketing.

Proportions are passenger-weighted: counts are summed over the whole
history before normalizing, so a nearly empty course does not get the
same vote as a packed one, and invalid (unbalanced) courses still
contribute the spatial information they carry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Course


@dataclass(frozen=True)
class Priors:
    """Blended per-stop flow proportions for one line and direction.

    p_board and p_alight each sum to 1. r is the share of history
    courses with sensor data among courses with any data at all;
    history_size counts the contributing courses and skipped_courses
    the ones dropped for not matching the reference stop sequence.
    """

    line_id: str
    direction: str
    stop_ids: tuple[str, ...]
    p_board: tuple[float, ...]
    p_alight: tuple[float, ...]
    r: float
    history_size: int
    skipped_courses: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "stop_ids", tuple(self.stop_ids))
        object.__setattr__(self, "p_board", tuple(self.p_board))
        object.__setattr__(self, "p_alight", tuple(self.p_alight))
        if not len(self.stop_ids) == len(self.p_board) == len(self.p_alight):
            raise ValueError("stop_ids, p_board and p_alight must have equal length")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must be in [0, 1], got {self.r}")
        if any(p < 0 for p in self.p_board) or any(p < 0 for p in self.p_alight):
            raise ValueError("proportions must be nonnegative")


def _normalize(totals: np.ndarray) -> Optional[np.ndarray]:
    s = totals.sum()
    if s <= 0:
        return None
    return totals / s


def _blend(
    r: float, apc: Optional[np.ndarray], tick: Optional[np.ndarray]
) -> Optional[np.ndarray]:
    """r-weighted blend, falling back to whichever source has data."""
    if apc is not None and tick is not None:
        return r * apc + (1.0 - r) * tick
    if apc is not None:
        return apc
    return tick


def compute_priors(
    history: Sequence[Course], line_id: str, direction: str
) -> Optional[Priors]:
    """Aggregate a history of courses into flow-shape priors.

    Courses of other lines/directions are ignored; courses whose stop
    sequence deviates from the first matching course's are skipped and
    counted. Returns None when no course carries any usable data or
    when some quantity (boardings or alightings) has zero total in both
    sources, since proportions of nothing would be arbitrary.
    """
    matching = [
        c for c in history if c.line_id == line_id and c.direction == direction
    ]
    if not matching:
        return None
    stop_ids = tuple(s.stop_id for s in matching[0].stops)
    n = len(stop_ids)

    apc_board = np.zeros(n)
    apc_alight = np.zeros(n)
    tick_board = np.zeros(n)
    tick_alight = np.zeros(n)
    n_apc = 0
    n_any = 0
    skipped = 0

    for course in matching:
        if tuple(s.stop_id for s in course.stops) != stop_ids:
            skipped += 1
            continue
        has_apc = course.has_observed
        has_tick = course.has_ticketing
        if not has_apc and not has_tick:
            continue
        n_any += 1
        if has_apc:
            n_apc += 1
            for i, stop in enumerate(course.stops):
                apc_board[i] += stop.observed.boarding  # type: ignore[union-attr]
                apc_alight[i] += stop.observed.alighting  # type: ignore[union-attr]
        if has_tick:
            for i, stop in enumerate(course.stops):
                t = stop.ticketing
                if t is None:
                    continue
                if t.boarding is not None:
                    tick_board[i] += t.boarding
                if t.alighting is not None:
                    tick_alight[i] += t.alighting

    if n_any == 0:
        return None
    r = n_apc / n_any

    p_board = _blend(r, _normalize(apc_board), _normalize(tick_board))
    p_alight = _blend(r, _normalize(apc_alight), _normalize(tick_alight))
    if p_board is None or p_alight is None:
        return None

    return Priors(
        line_id=line_id,
        direction=direction,
        stop_ids=stop_ids,
        p_board=tuple(p_board),
        p_alight=tuple(p_alight),
        r=r,
        history_size=n_any,
        skipped_courses=skipped,
    )
