"""Course interchange files and run configuration.

CSV is the canonical format: one row per stop, courses grouped by
course_id and ordered by stop_seq. JSON mirrors the rows one-to-one
(a top-level array of objects with the same keys) so tooling can pick
either. Empty ticketing cells mean "no ticketing data", a 0 means
"zero validations observed"; the two are different inputs downstream.
Observation columns may also be empty, but then for every stop of the
course: sensor presence is a vehicle property.

Loading never aborts the batch over one bad course; malformed courses
are collected with a reason instead. Numbers are written with Python's
default formatting, which uses "." as the decimal separator regardless
of locale.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .model import Course, DenoiseConfig, Stop, StopCounts, TicketingCounts

COLUMNS = (
    "course_id",
    "line_id",
    "direction",
    "departure_time",
    "stop_seq",
    "stop_id",
    "board_obs",
    "alight_obs",
    "board_tick",
    "alight_tick",
    "capacity",
)


@dataclass(frozen=True)
class CourseFileRecord:
    """One file row: a single stop of a single course."""

    course_id: str
    line_id: str
    direction: str
    departure_time: str
    stop_seq: int
    stop_id: str
    board_obs: Optional[int]
    alight_obs: Optional[int]
    board_tick: Optional[int]
    alight_tick: Optional[int]
    capacity: int


@dataclass(frozen=True)
class RejectedCourse:
    course_id: str
    reason: str


def _opt_int(raw: object, column: str) -> Optional[int]:
    if raw is None or raw == "":
        return None
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise ValueError(f"bad {column} value {raw!r}") from None
    if value < 0:
        raise ValueError(f"negative {column} value {value}")
    return value


def _record_from_cells(cells: Mapping[str, object]) -> CourseFileRecord:
    missing = [c for c in COLUMNS if c not in cells]
    if missing:
        raise ValueError(f"missing columns {missing}")
    capacity = _opt_int(cells["capacity"], "capacity")
    stop_seq = _opt_int(cells["stop_seq"], "stop_seq")
    if capacity is None or stop_seq is None:
        raise ValueError("stop_seq and capacity are required")
    return CourseFileRecord(
        course_id=str(cells["course_id"]),
        line_id=str(cells["line_id"]),
        direction=str(cells["direction"]),
        departure_time=str(cells["departure_time"]),
        stop_seq=stop_seq,
        stop_id=str(cells["stop_id"]),
        board_obs=_opt_int(cells["board_obs"], "board_obs"),
        alight_obs=_opt_int(cells["alight_obs"], "alight_obs"),
        board_tick=_opt_int(cells["board_tick"], "board_tick"),
        alight_tick=_opt_int(cells["alight_tick"], "alight_tick"),
        capacity=capacity,
    )


def _course_from_records(records: list[CourseFileRecord]) -> Course:
    records = sorted(records, key=lambda r: r.stop_seq)
    seqs = [r.stop_seq for r in records]
    if len(set(seqs)) != len(seqs):
        raise ValueError("duplicate stop_seq")
    if seqs != list(range(1, len(seqs) + 1)):
        raise ValueError("stop_seq not contiguous from 1")
    head = records[0]
    for name in ("line_id", "direction", "departure_time", "capacity"):
        values = {getattr(r, name) for r in records}
        if len(values) > 1:
            raise ValueError(f"inconsistent {name} within course")
    try:
        departure = datetime.fromisoformat(head.departure_time)
    except ValueError:
        raise ValueError(f"bad departure_time {head.departure_time!r}") from None

    stops = []
    for r in records:
        if (r.board_obs is None) != (r.alight_obs is None):
            raise ValueError(f"stop {r.stop_id}: board_obs and alight_obs must come together")
        observed = None if r.board_obs is None else StopCounts(r.board_obs, r.alight_obs)
        ticketing = None
        if r.board_tick is not None or r.alight_tick is not None:
            ticketing = TicketingCounts(r.board_tick, r.alight_tick)
        stops.append(Stop(r.stop_id, observed, ticketing))
    return Course(
        course_id=head.course_id,
        line_id=head.line_id,
        direction=head.direction,
        departure_time=departure,
        capacity=head.capacity,
        stops=tuple(stops),
    )


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt is not None:
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {fmt!r}, expected csv or json")
        return fmt
    return "json" if path.suffix.lower() == ".json" else "csv"


def _read_rows(path: Path, fmt: str) -> list[Mapping[str, object]]:
    if fmt == "json":
        data = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise ValueError("JSON course file must be a top-level array of row objects")
        return data
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_courses(
    path: Union[str, Path], fmt: Optional[str] = None
) -> tuple[list[Course], list[RejectedCourse]]:
    """Read courses from a CSV or JSON file.

    The format is inferred from the file suffix unless given. Unreadable
    or unparsable files raise; individual malformed courses are returned
    as rejects, in input order, without stopping the rest of the batch.
    """
    path = Path(path)
    rows = _read_rows(path, _infer_format(path, fmt))

    grouped: dict[str, list[CourseFileRecord]] = {}
    broken: dict[str, str] = {}
    for row in rows:
        course_id = str(row.get("course_id", ""))
        if course_id in broken:
            continue
        try:
            record = _record_from_cells(row)
        except ValueError as exc:
            broken[course_id] = str(exc)
            grouped.pop(course_id, None)
            continue
        grouped.setdefault(course_id, []).append(record)

    courses: list[Course] = []
    rejects = [RejectedCourse(cid, reason) for cid, reason in broken.items()]
    for course_id, records in grouped.items():
        try:
            courses.append(_course_from_records(records))
        except ValueError as exc:
            rejects.append(RejectedCourse(course_id, str(exc)))
    return courses, rejects


def records_from_course(course: Course) -> list[CourseFileRecord]:
    out = []
    for seq, stop in enumerate(course.stops, start=1):
        tick = stop.ticketing
        out.append(
            CourseFileRecord(
                course_id=course.course_id,
                line_id=course.line_id,
                direction=course.direction,
                departure_time=course.departure_time.isoformat(),
                stop_seq=seq,
                stop_id=stop.stop_id,
                board_obs=None if stop.observed is None else stop.observed.boarding,
                alight_obs=None if stop.observed is None else stop.observed.alighting,
                board_tick=None if tick is None else tick.boarding,
                alight_tick=None if tick is None else tick.alighting,
                capacity=course.capacity,
            )
        )
    return out


def write_courses(
    courses: Iterable[Course], path: Union[str, Path], fmt: Optional[str] = None
) -> None:
    """Write courses in the canonical column order; see load_courses."""
    path = Path(path)
    fmt = _infer_format(path, fmt)
    records = [r for c in courses for r in records_from_course(c)]
    if fmt == "json":
        rows = [
            {name: getattr(r, name) for name in COLUMNS} for r in records
        ]
        path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for r in records:
            writer.writerow(
                ["" if (v := getattr(r, name)) is None else v for name in COLUMNS]
            )


def read_config_entries(path: Union[str, Path]) -> dict[str, str]:
    """Parse a key=value configuration file.

    Blank lines and lines starting with # are skipped; values keep
    everything after the first '='.
    """
    entries: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def apply_config(base: DenoiseConfig, entries: Mapping[str, str]) -> DenoiseConfig:
    """Override config fields from string values, coercing to field types."""
    known = {f.name: f for f in fields(base)}
    unknown = sorted(set(entries) - set(known))
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}; known: {sorted(known)}")
    overrides = {}
    for key, raw in entries.items():
        kind = type(getattr(base, key))
        try:
            overrides[key] = kind(raw)
        except ValueError:
            raise ValueError(f"config key {key}: cannot parse {raw!r} as {kind.__name__}") from None
    return replace(base, **overrides)


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, str]] = None,
    base: DenoiseConfig = DenoiseConfig(),
) -> DenoiseConfig:
    """Config file first, explicit overrides second, defaults underneath."""
    config = base
    if path is not None:
        config = apply_config(config, read_config_entries(path))
    if overrides:
        config = apply_config(config, overrides)
    return config
