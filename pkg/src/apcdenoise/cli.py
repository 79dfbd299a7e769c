"""Command line client for the denoising service.

Every subcommand is a thin client: it reads and writes local files and
sends the actual work to the HTTP API. By default the app is run
in-process (no server needed); --server points the same requests at a
running instance instead.

Exit codes: 0 success, 1 partial (some courses were rejected or failed),
2 fatal (unreadable inputs, bad arguments, service errors).
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import click
import httpx

from . import __version__
from .course_files import RejectedCourse, load_config, load_courses, write_courses
from .evaluate import METHOD_NAMES, BenchmarkReport, MetricRow
from .model import Course, StopCounts
from .service.schemas import ConfigModel, CourseModel

# CLI shorthand for the two long scenario names.
_SCENARIO_ALIASES = {"over": "overestimate", "under": "underestimate"}
_SCENARIO_CHOICES = ("gaussian", "over", "under", "slope", "outliers", "all")


class Fatal(click.ClickException):
    exit_code = 2


class ServiceClient:
    """POSTs to a running server, or to the in-process app without one."""

    def __init__(self, server: Optional[str] = None) -> None:
        self._server = server

    def request(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        try:
            if self._server is not None:
                with httpx.Client(base_url=self._server, timeout=600.0) as client:
                    response = client.request(method, path, json=payload)
            else:
                response = asyncio.run(self._in_process(method, path, payload))
        except httpx.HTTPError as exc:
            raise Fatal(f"service unreachable: {exc}") from exc
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise Fatal(f"service error ({response.status_code}): {detail}")
        return response.json()

    async def _in_process(
        self, method: str, path: str, payload: Optional[dict]
    ) -> httpx.Response:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://apcdenoise") as client:
            return await client.request(method, path, json=payload)


def common_options(fn):
    fn = click.option(
        "--seed", type=int, default=0, show_default=True, help="Seed for the seeded commands."
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="key=value file overriding tuning defaults.",
    )(fn)
    fn = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override one config key; beats --config.",
    )(fn)
    fn = click.option(
        "--server",
        default=None,
        metavar="URL",
        help="Base URL of a running service; default runs in-process.",
    )(fn)
    return fn


def _config_payload(config_path: Optional[Path], overrides: Sequence[str]) -> Optional[dict]:
    if config_path is None and not overrides:
        return None
    pairs = {}
    for item in overrides:
        if "=" not in item:
            raise Fatal(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        pairs[key.strip()] = value.strip()
    try:
        config = load_config(config_path, pairs)
    except (OSError, ValueError) as exc:
        raise Fatal(str(exc)) from exc
    return ConfigModel.from_domain(config).model_dump(mode="json")


def _load(path: Path, what: str) -> tuple[list[Course], list[RejectedCourse]]:
    try:
        courses, rejects = load_courses(path)
    except (OSError, ValueError) as exc:
        raise Fatal(f"cannot read {what} file {path}: {exc}") from exc
    for reject in rejects:
        click.echo(f"{what}: rejected course {reject.course_id}: {reject.reason}", err=True)
    if not courses:
        raise Fatal(f"{what} file {path} contains no usable courses")
    return courses, rejects


def _course_payload(courses: Sequence[Course]) -> list[dict]:
    return [CourseModel.from_domain(c).model_dump(mode="json") for c in courses]


def _write_json(path: Path, obj: object) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@click.group()
@click.version_option(__version__)
def cli() -> None:
    """Reconcile transit passenger-count data against its constraints."""


@cli.command("denoise")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Course file (CSV or JSON).")
@click.option("--method", type=click.Choice(sorted(METHOD_NAMES)), default="proposed", show_default=True)
@click.option("--priors-history", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="History courses for stage-III priors.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Denoised course file.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Per-course JSON report.")
@common_options
def denoise_cmd(input_path, method, priors_history, out_path, report_path, seed, config_path, overrides, server) -> None:
    """Denoise every course in a file."""
    courses, rejects = _load(input_path, "input")
    skipped = [c.course_id for c in courses if not c.has_observed]
    courses = [c for c in courses if c.has_observed]
    if not courses:
        raise Fatal("no course in the input carries observed counts")
    payload = {
        "courses": _course_payload(courses),
        "method": method,
        "seed": seed,
        "config": _config_payload(config_path, overrides),
    }
    if priors_history is not None:
        history, _ = _load(priors_history, "history")
        payload["priors_history"] = _course_payload(history)
    body = ServiceClient(server).request("POST", "/api/denoise", payload)

    denoised = []
    for course, row in zip(courses, body["results"]):
        counts = [StopCounts(c["boarding"], c["alighting"]) for c in row["counts"]]
        denoised.append(course.with_observed(counts))
    write_courses(denoised, out_path)
    if report_path is not None:
        _write_json(
            report_path,
            {
                "method": method,
                "seed": seed,
                "failures": body["failures"],
                "results": body["results"],
                "rejected": [{"course_id": r.course_id, "reason": r.reason} for r in rejects],
                "skipped_no_observed": skipped,
            },
        )
    click.echo(f"denoised {len(denoised)} course(s) -> {out_path}")
    if body["failures"] or rejects or skipped:
        sys.exit(1)


@cli.command("priors")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help="History course file.")
@click.option("--line", required=True, help="Line id to aggregate.")
@click.option("--direction", required=True, help="Direction to aggregate.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@common_options
def priors_cmd(input_path, line, direction, out_path, seed, config_path, overrides, server) -> None:
    """Estimate flow-shape priors from history."""
    history, rejects = _load(input_path, "history")
    body = ServiceClient(server).request(
        "POST",
        "/api/priors",
        {"history": _course_payload(history), "line_id": line, "direction": direction},
    )
    if body["priors"] is None:
        click.echo(f"no usable history for line {line!r} direction {direction!r}", err=True)
        sys.exit(1)
    _write_json(out_path, body["priors"])
    click.echo(f"priors for {line}/{direction} -> {out_path}")
    if rejects:
        sys.exit(1)


@cli.command("simulate")
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Clean ground-truth course file.")
@click.option("--scenario", type=click.Choice(_SCENARIO_CHOICES), default="all", show_default=True)
@click.option("--out-dir", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--ticketing-from-truth", is_flag=True, help="Attach the true counts as ticketing data.")
@common_options
def simulate_cmd(truth_path, scenario, out_dir, ticketing_from_truth, seed, config_path, overrides, server) -> None:
    """Generate noisy benchmark datasets from clean courses."""
    truths, rejects = _load(truth_path, "truth")
    kinds = None
    if scenario != "all":
        kinds = [_SCENARIO_ALIASES.get(scenario, scenario)]
    payload = {
        "truths": _course_payload(truths),
        "scenarios": kinds,
        "seed": seed,
        "ticketing_from_truth": ticketing_from_truth,
    }
    body = ServiceClient(server).request("POST", "/api/simulate", payload)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_courses(truths, out_dir / "truth.csv")
    for kind, pairs in sorted(body["datasets"].items()):
        noisy = [CourseModel.model_validate(p["noisy"]).to_domain() for p in pairs]
        write_courses(noisy, out_dir / f"{kind}.csv")
        _write_json(out_dir / f"{kind}.meta.json", body["metadata"][kind])
    click.echo(f"wrote {len(body['datasets'])} dataset(s) under {out_dir}")
    if rejects:
        sys.exit(1)


@cli.command("eval")
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--candidates", "candidate_paths", required=True, multiple=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Denoised course files; repeat per candidate.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@common_options
def eval_cmd(truth_path, candidate_paths, out_dir, seed, config_path, overrides, server) -> None:
    """Compare denoised files against ground truth."""
    truths, rejects = _load(truth_path, "truth")
    candidates = {}
    for path in candidate_paths:
        name = Path(path).stem
        if name in candidates:
            raise Fatal(f"duplicate candidate name {name!r}; rename one file")
        courses, more_rejects = _load(path, f"candidate {name}")
        rejects.extend(more_rejects)
        candidates[name] = _course_payload(courses)
    body = ServiceClient(server).request(
        "POST", "/api/evaluate", {"truth": _course_payload(truths), "candidates": candidates}
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    rows = body["rows"]
    header = list(rows[0])
    lines = [",".join(header)]
    lines += [",".join(str(row[k]) for k in header) for row in rows]
    (out_dir / "metrics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out_dir / "rank_sums.json", body["rank_sums"])
    click.echo(f"evaluated {len(rows)} candidate(s) -> {out_dir}")
    if rejects:
        sys.exit(1)


@cli.command("bench")
@click.option("--suite", "suite_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path), help="Directory produced by simulate.")
@click.option("--methods", default="all", show_default=True, help="Comma-separated method names, or 'all'.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@common_options
def bench_cmd(suite_dir, methods, out_dir, seed, config_path, overrides, server) -> None:
    """Run every method over a simulated suite and rank them."""
    truth_file = suite_dir / "truth.csv"
    if not truth_file.exists():
        raise Fatal(f"suite {suite_dir} has no truth.csv")
    truths, rejects = _load(truth_file, "truth")
    truth_by_id = {c.course_id: c for c in truths}

    datasets = {}
    for dataset_file in sorted(suite_dir.glob("*.csv")):
        if dataset_file.name == "truth.csv":
            continue
        noisy, more_rejects = _load(dataset_file, f"dataset {dataset_file.stem}")
        rejects.extend(more_rejects)
        pairs = []
        for course in noisy:
            truth = truth_by_id.get(course.course_id)
            if truth is None:
                click.echo(f"{dataset_file.stem}: no truth for {course.course_id}", err=True)
                continue
            pairs.append(
                {
                    "truth": CourseModel.from_domain(truth).model_dump(mode="json"),
                    "noisy": CourseModel.from_domain(course).model_dump(mode="json"),
                }
            )
        if pairs:
            datasets[dataset_file.stem] = pairs
    if not datasets:
        raise Fatal(f"suite {suite_dir} has no dataset files")

    wanted = list(METHOD_NAMES) if methods == "all" else [m.strip() for m in methods.split(",")]
    payload = {
        "datasets": datasets,
        "methods": wanted,
        "seed": seed,
        "config": _config_payload(config_path, overrides),
    }
    body = ServiceClient(server).request("POST", "/api/benchmark", payload)

    report = BenchmarkReport(
        rows=tuple(MetricRow(**row) for row in body["rows"]),
        rank_sums=dict(body["rank_sums"]),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(report.render_text(), encoding="utf-8")
    (out_dir / "report.csv").write_text(report.render_csv(), encoding="utf-8")
    (out_dir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    click.echo(report.render_text())
    click.echo(f"benchmark reports -> {out_dir}")
    if rejects or any(row["failures"] for row in body["rows"]):
        sys.exit(1)


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(host, port) -> None:
    """Run the HTTP service; point other commands at it with --server."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


@cli.command("dump-model")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Course file containing the course.")
@click.option("--course-id", required=True)
@click.option("--stage", type=click.IntRange(1, 3), required=True)
@click.option("--priors-history", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@common_options
def dump_model_cmd(input_path, course_id, stage, priors_history, out_path, seed, config_path, overrides, server) -> None:
    """Export one stage of a course's optimization model as LP text."""
    courses, _ = _load(input_path, "input")
    matches = [c for c in courses if c.course_id == course_id]
    if not matches:
        raise Fatal(f"course {course_id!r} not found in {input_path}")
    course = matches[0]
    client = ServiceClient(server)

    priors_payload = None
    if priors_history is not None:
        history, _ = _load(priors_history, "history")
        body = client.request(
            "POST",
            "/api/priors",
            {
                "history": _course_payload(history),
                "line_id": course.line_id,
                "direction": course.direction,
            },
        )
        priors_payload = body["priors"]
        if priors_payload is None:
            raise Fatal(f"history has no usable priors for {course.line_id}/{course.direction}")

    body = client.request(
        "POST",
        "/api/dump-model",
        {
            "course": CourseModel.from_domain(course).model_dump(mode="json"),
            "stage": stage,
            "priors": priors_payload,
            "config": _config_payload(config_path, overrides),
        },
    )
    Path(out_path).write_text(body["lp"], encoding="utf-8")
    click.echo(f"stage {stage} model of {course_id} -> {out_path}")


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
