"""HTTP service exposing the denoising pipeline.

All computation endpoints are stateless POSTs carrying complete inputs,
so any instance can serve any request. Handlers are plain synchronous
functions: the solver work is CPU bound and runs in the framework's
thread pool, one request per course batch.

Domain validation errors surface as 400 with the original message;
anything that validates may still yield per-course "failed" entries in
a denoise response rather than failing the batch.
"""

from __future__ import annotations

from typing import Callable, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..baselines import denoise_gibbs, denoise_identity, denoise_l1, denoise_l2, denoise_two_stage
from ..denoise import STATUS_FAILED, DenoiseResult, denoise_course, stage_problems
from ..evaluate import METHOD_NAMES, benchmark, bias_delta, mae, rank_sum
from ..model import Course, DenoiseConfig
from ..priors import Priors, compute_priors
from ..simulate import SCENARIO_KINDS, Scenario, dataset_metadata, scenario_suite
from ..solver.problem import to_lp_text
from .schemas import (
    BenchmarkRequest,
    BenchmarkResponse,
    ConfigModel,
    DefaultsResponse,
    DenoiseRequest,
    DenoiseResponse,
    DumpModelRequest,
    DumpModelResponse,
    EvalRowModel,
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    MetricRowModel,
    PairModel,
    PriorsModel,
    PriorsRequest,
    PriorsResponse,
    ResultModel,
    SimulateRequest,
    SimulateResponse,
)


def _config(model: Optional[ConfigModel]) -> DenoiseConfig:
    return DenoiseConfig() if model is None else model.to_domain()


def _priors_lookup(req: DenoiseRequest) -> Callable[[Course], Optional[Priors]]:
    """Per-course priors: an explicit object wins, else history is grouped."""
    if req.priors is not None:
        fixed = req.priors.to_domain()
        return lambda course: fixed
    if req.priors_history is not None:
        history = [c.to_domain() for c in req.priors_history]
        cache: dict[tuple[str, str], Optional[Priors]] = {}

        def lookup(course: Course) -> Optional[Priors]:
            key = (course.line_id, course.direction)
            if key not in cache:
                cache[key] = compute_priors(history, *key)
            return cache[key]

        return lookup
    return lambda course: None


def create_app() -> FastAPI:
    app = FastAPI(title="apcdenoise", version=__version__)

    @app.exception_handler(ValueError)
    async def domain_error(request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/api/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/api/defaults", response_model=DefaultsResponse)
    def defaults() -> DefaultsResponse:
        return DefaultsResponse(config=ConfigModel())

    @app.post("/api/denoise", response_model=DenoiseResponse)
    def denoise(req: DenoiseRequest) -> DenoiseResponse:
        config = _config(req.config)
        courses = [c.to_domain() for c in req.courses]
        for course in courses:
            if not course.has_observed:
                raise HTTPException(400, f"course {course.course_id} has no observed counts")
        priors_for = _priors_lookup(req)

        def solve(course: Course) -> DenoiseResult:
            if req.method == "proposed":
                return denoise_course(course, priors_for(course), config)
            if req.method == "baseline":
                return denoise_identity(course, config)
            if req.method == "l1":
                return denoise_l1(course, config)
            if req.method == "l2":
                return denoise_l2(course, config)
            if req.method == "two-stage":
                return denoise_two_stage(course, config)
            if req.method == "gibbs":
                return denoise_gibbs(course, config, seed=req.seed)
            raise HTTPException(400, f"unknown method {req.method!r}; known: {sorted(METHOD_NAMES)}")

        results = [ResultModel.from_domain(c.course_id, solve(c)) for c in courses]
        failures = sum(1 for r in results if r.status == STATUS_FAILED)
        return DenoiseResponse(results=results, failures=failures)

    @app.post("/api/priors", response_model=PriorsResponse)
    def priors(req: PriorsRequest) -> PriorsResponse:
        history = [c.to_domain() for c in req.history]
        estimated = compute_priors(history, req.line_id, req.direction)
        return PriorsResponse(
            priors=None if estimated is None else PriorsModel.from_domain(estimated)
        )

    @app.post("/api/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        truths = [c.to_domain() for c in req.truths]
        scenarios = None
        if req.scenarios is not None:
            unknown = sorted(set(req.scenarios) - set(SCENARIO_KINDS))
            if unknown:
                raise HTTPException(400, f"unknown scenarios {unknown}; known: {list(SCENARIO_KINDS)}")
            scenarios = [Scenario(kind=k) for k in req.scenarios]
        suite = scenario_suite(
            truths, req.seed, scenarios=scenarios, ticketing_from_truth=req.ticketing_from_truth
        )
        by_kind = {s.kind: s for s in (scenarios or [Scenario(kind=k) for k in SCENARIO_KINDS])}
        return SimulateResponse(
            datasets={
                kind: [PairModel.from_domain(p) for p in pairs] for kind, pairs in suite.items()
            },
            metadata={kind: dataset_metadata(by_kind[kind], req.seed) for kind in suite},
        )

    @app.post("/api/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        truth_by_id = {c.course_id: c.to_domain() for c in req.truth}
        rows = []
        occ_table: dict[str, float] = {}
        for name, models in req.candidates.items():
            pairs = []
            for model in models:
                course = model.to_domain()
                reference = truth_by_id.get(course.course_id)
                if reference is not None:
                    pairs.append((reference, course.observed_counts()))
            if not pairs:
                raise HTTPException(400, f"candidate {name!r} shares no course_id with the truth")
            mae_b, mae_a, mae_o = mae(pairs)
            biases = bias_delta(pairs)
            rows.append(
                EvalRowModel(
                    candidate=name,
                    mae_boardings=mae_b,
                    mae_alightings=mae_a,
                    mae_occupancy=mae_o,
                    mean_bias_boardings=biases["boardings"][0],
                    mean_bias_alightings=biases["alightings"][0],
                    mean_bias_occupancy=biases["occupancy"][0],
                    compared_courses=len(pairs),
                )
            )
            occ_table[name] = mae_o
        return EvaluateResponse(rows=rows, rank_sums=rank_sum({"eval": occ_table}))

    @app.post("/api/benchmark", response_model=BenchmarkResponse)
    def run_benchmark(req: BenchmarkRequest) -> BenchmarkResponse:
        datasets = {
            name: [p.to_domain() for p in pairs] for name, pairs in req.datasets.items()
        }
        report = benchmark(datasets, req.methods, _config(req.config), seed=req.seed)
        return BenchmarkResponse(
            rows=[MetricRowModel.from_domain(r) for r in report.rows],
            rank_sums=dict(report.rank_sums),
        )

    @app.post("/api/dump-model", response_model=DumpModelResponse)
    def dump_model(req: DumpModelRequest) -> DumpModelResponse:
        course = req.course.to_domain()
        priors_obj = None if req.priors is None else req.priors.to_domain()
        problems = stage_problems(course, priors_obj, _config(req.config))
        if req.stage > len(problems):
            raise HTTPException(
                400,
                f"stage {req.stage} was not executed for course {course.course_id}"
                f" ({len(problems)} stage(s); stage 3 needs matching priors)",
            )
        lp = to_lp_text(problems[req.stage - 1], name=f"{course.course_id}-stage{req.stage}")
        return DumpModelResponse(stage=req.stage, stages_executed=len(problems), lp=lp)

    return app


app = create_app()
