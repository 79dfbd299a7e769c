"""Wire formats for the denoising service.

Each model mirrors one domain type and carries converters both ways, so
route handlers stay free of field-by-field plumbing. Validation beyond
types (balance, endpoint zeros and so on) is the domain model's job; a
request that passes here can still produce per-course failures in the
response.
"""

from __future__ import annotations

from datetime import datetime
from typing import Optional

from pydantic import BaseModel, Field

from ..denoise import DenoiseResult
from ..evaluate import METHOD_NAMES, MetricRow
from ..model import Course, DenoiseConfig, Stop, StopCounts, TicketingCounts
from ..priors import Priors
from ..simulate import SCENARIO_KINDS, SimulatedPair


class StopCountsModel(BaseModel):
    boarding: int = Field(ge=0)
    alighting: int = Field(ge=0)

    @classmethod
    def from_domain(cls, counts: StopCounts) -> "StopCountsModel":
        return cls(boarding=counts.boarding, alighting=counts.alighting)

    def to_domain(self) -> StopCounts:
        return StopCounts(self.boarding, self.alighting)


class TicketingModel(BaseModel):
    boarding: Optional[int] = Field(default=None, ge=0)
    alighting: Optional[int] = Field(default=None, ge=0)

    @classmethod
    def from_domain(cls, counts: TicketingCounts) -> "TicketingModel":
        return cls(boarding=counts.boarding, alighting=counts.alighting)

    def to_domain(self) -> TicketingCounts:
        return TicketingCounts(self.boarding, self.alighting)


class StopModel(BaseModel):
    stop_id: str
    observed: Optional[StopCountsModel] = None
    ticketing: Optional[TicketingModel] = None

    @classmethod
    def from_domain(cls, stop: Stop) -> "StopModel":
        return cls(
            stop_id=stop.stop_id,
            observed=None if stop.observed is None else StopCountsModel.from_domain(stop.observed),
            ticketing=None if stop.ticketing is None else TicketingModel.from_domain(stop.ticketing),
        )

    def to_domain(self) -> Stop:
        return Stop(
            self.stop_id,
            None if self.observed is None else self.observed.to_domain(),
            None if self.ticketing is None else self.ticketing.to_domain(),
        )


class CourseModel(BaseModel):
    course_id: str
    line_id: str
    direction: str
    departure_time: datetime
    capacity: int = Field(gt=0)
    stops: list[StopModel] = Field(min_length=2)

    @classmethod
    def from_domain(cls, course: Course) -> "CourseModel":
        return cls(
            course_id=course.course_id,
            line_id=course.line_id,
            direction=course.direction,
            departure_time=course.departure_time,
            capacity=course.capacity,
            stops=[StopModel.from_domain(s) for s in course.stops],
        )

    def to_domain(self) -> Course:
        return Course(
            course_id=self.course_id,
            line_id=self.line_id,
            direction=self.direction,
            departure_time=self.departure_time,
            capacity=self.capacity,
            stops=tuple(s.to_domain() for s in self.stops),
        )


class ConfigModel(BaseModel):
    """DenoiseConfig on the wire; defaults match the domain defaults."""

    load_factor: float = 1.4
    count_cap_factor: float = 2.0
    alpha_floor: int = 5
    alpha_ratio: float = 0.5
    feasibility_tolerance: float = 1e-6
    integrality_tolerance: float = 1e-6
    lex_slack: float = 1e-6

    @classmethod
    def from_domain(cls, config: DenoiseConfig) -> "ConfigModel":
        return cls(**{name: getattr(config, name) for name in cls.model_fields})

    def to_domain(self) -> DenoiseConfig:
        return DenoiseConfig(**self.model_dump())


class PriorsModel(BaseModel):
    line_id: str
    direction: str
    stop_ids: list[str]
    p_board: list[float]
    p_alight: list[float]
    r: float = Field(ge=0.0, le=1.0)
    history_size: int
    skipped_courses: int = 0

    @classmethod
    def from_domain(cls, priors: Priors) -> "PriorsModel":
        return cls(**{name: getattr(priors, name) for name in cls.model_fields})

    def to_domain(self) -> Priors:
        return Priors(
            line_id=self.line_id,
            direction=self.direction,
            stop_ids=tuple(self.stop_ids),
            p_board=tuple(self.p_board),
            p_alight=tuple(self.p_alight),
            r=self.r,
            history_size=self.history_size,
            skipped_courses=self.skipped_courses,
        )


class ResultModel(BaseModel):
    course_id: str
    status: str
    quality: float
    stage1_value: float
    stage2_value: float
    stage3_value: Optional[float] = None
    objective_value: Optional[float] = None
    ticketing_dropped: bool
    counts: list[StopCountsModel]
    occupancy: list[int]

    @classmethod
    def from_domain(cls, course_id: str, result: DenoiseResult) -> "ResultModel":
        return cls(
            course_id=course_id,
            status=result.status,
            quality=result.quality,
            stage1_value=result.stage1_value,
            stage2_value=result.stage2_value,
            stage3_value=result.stage3_value,
            objective_value=result.objective_value,
            ticketing_dropped=result.ticketing_dropped,
            counts=[StopCountsModel.from_domain(c) for c in result.counts],
            occupancy=list(result.occupancy.after_stop),
        )


class DenoiseRequest(BaseModel):
    courses: list[CourseModel]
    method: str = "proposed"
    seed: int = 0
    config: Optional[ConfigModel] = None
    priors: Optional[PriorsModel] = None
    priors_history: Optional[list[CourseModel]] = None


class DenoiseResponse(BaseModel):
    results: list[ResultModel]
    failures: int


class PriorsRequest(BaseModel):
    history: list[CourseModel]
    line_id: str
    direction: str


class PriorsResponse(BaseModel):
    priors: Optional[PriorsModel]


class PairModel(BaseModel):
    truth: CourseModel
    noisy: CourseModel

    @classmethod
    def from_domain(cls, pair: SimulatedPair) -> "PairModel":
        return cls(
            truth=CourseModel.from_domain(pair.truth),
            noisy=CourseModel.from_domain(pair.noisy),
        )

    def to_domain(self) -> SimulatedPair:
        return SimulatedPair(self.truth.to_domain(), self.noisy.to_domain())


class SimulateRequest(BaseModel):
    truths: list[CourseModel]
    scenarios: Optional[list[str]] = None
    seed: int = 0
    ticketing_from_truth: bool = False


class SimulateResponse(BaseModel):
    datasets: dict[str, list[PairModel]]
    metadata: dict[str, dict]


class EvaluateRequest(BaseModel):
    truth: list[CourseModel]
    candidates: dict[str, list[CourseModel]]


class EvalRowModel(BaseModel):
    candidate: str
    mae_boardings: float
    mae_alightings: float
    mae_occupancy: float
    mean_bias_boardings: float
    mean_bias_alightings: float
    mean_bias_occupancy: float
    compared_courses: int


class EvaluateResponse(BaseModel):
    rows: list[EvalRowModel]
    rank_sums: dict[str, int]


class MetricRowModel(BaseModel):
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

    @classmethod
    def from_domain(cls, row: MetricRow) -> "MetricRowModel":
        return cls(**{name: getattr(row, name) for name in cls.model_fields})

    def to_domain(self) -> MetricRow:
        return MetricRow(**self.model_dump())


class BenchmarkRequest(BaseModel):
    datasets: dict[str, list[PairModel]]
    methods: list[str] = Field(default_factory=lambda: list(METHOD_NAMES))
    seed: int = 0
    config: Optional[ConfigModel] = None


class BenchmarkResponse(BaseModel):
    rows: list[MetricRowModel]
    rank_sums: dict[str, int]


class DumpModelRequest(BaseModel):
    course: CourseModel
    stage: int = Field(ge=1, le=3)
    priors: Optional[PriorsModel] = None
    config: Optional[ConfigModel] = None


class DumpModelResponse(BaseModel):
    stage: int
    stages_executed: int
    lp: str


class HealthResponse(BaseModel):
    status: str
    version: str


class DefaultsResponse(BaseModel):
    config: ConfigModel
    methods: list[str] = Field(default_factory=lambda: list(METHOD_NAMES))
    scenarios: list[str] = Field(default_factory=lambda: list(SCENARIO_KINDS))
