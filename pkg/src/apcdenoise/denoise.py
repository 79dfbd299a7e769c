"""Three-stage count reconciliation for one course.

The denoiser searches for integer boarding/alighting vectors that
satisfy flow conservation, occupancy bounds, endpoint rules and
(optionally) ticketing lower bounds, while staying similar to the
observed counts. Similarity per count is triangular: 1 at the observed
value, falling linearly to 0 at distance alpha, flat 0 beyond. The flat
tail is the point of the design: an absurd observation costs the same
no matter how far the solution moves from it, so outliers get absorbed
instead of dragging the whole course.

Stages, each solved as a MILP and pinned before the next:

  1. maximize the minimal similarity across all 2N counts;
  2. maximize the sum of similarities;
  3. when priors for the line/direction exist, minimize the total
     absolute deviation from prior-shaped counts p * S, where S is the
     (decided) total number of passengers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .model import (
    Course,
    DenoiseConfig,
    OccupancyProfile,
    StopCounts,
    compute_occupancy,
    validate_course,
)
from .priors import Priors
from .solver import (
    LinearConstraint,
    Objective,
    ProblemSpec,
    VariableSpec,
    freeze_stage,
    solve_milp,
    with_objective,
)

STATUS_OK = "ok"
STATUS_OK_WITHOUT_TICKETING = "ok-without-ticketing"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class SimilaritySpec:
    """Triangular similarity parameters for one count.

    center is the observed count clamped into the physically plausible
    range; half_margin is the distance at which similarity reaches 0.
    """

    center: int
    half_margin: float

    def evaluate(self, value: float) -> float:
        return max(0.0, 1.0 - abs(value - self.center) / self.half_margin)


@dataclass(frozen=True)
class DenoiseResult:
    """Outcome of denoising one course.

    stage3_value is None when no priors were supplied. objective_value
    carries the single-stage objective of the distance-minimizing
    baselines and is None for the staged methods.
    """

    counts: tuple[StopCounts, ...]
    occupancy: OccupancyProfile
    stage1_value: float
    stage2_value: float
    stage3_value: Optional[float]
    quality: float
    ticketing_dropped: bool
    status: str
    objective_value: Optional[float] = None


def half_margin(observed_count: int, config: DenoiseConfig) -> float:
    """Half margin of the triangular similarity around an observation."""
    if observed_count < 0:
        raise ValueError("observed_count must be nonnegative")
    return float(max(config.alpha_floor, config.alpha_ratio * observed_count))


def build_similarities(course: Course, config: DenoiseConfig) -> list[SimilaritySpec]:
    """Similarity parameters for all 2N counts, boardings then alightings.

    Centers are clamped to the count cap; the half margin is computed
    from the raw observation so absurd counts keep a wide margin and a
    correspondingly weak pull.
    """
    cap = config.count_cap(course.capacity)
    observed = course.observed_counts()
    raw = [c.boarding for c in observed] + [c.alighting for c in observed]
    return [
        SimilaritySpec(min(obs, cap), half_margin(obs, config)) for obs in raw
    ]


def quality_score(result: DenoiseResult, n_stops: int) -> float:
    """Mean similarity of the result's counts, in [0, 1]."""
    if result.status == STATUS_FAILED:
        raise ValueError("failed results have no quality score")
    return result.stage2_value / (2 * n_stops)


# ---------------------------------------------------------------------------
# Problem construction


def count_variables(n: int, l_max: int) -> list[VariableSpec]:
    """Integral count variables, boardings then alightings per stop."""
    names = [f"board_{i + 1}" for i in range(n)] + [f"alight_{i + 1}" for i in range(n)]
    return [VariableSpec(name, 0.0, float(l_max), integral=True) for name in names]


def flow_constraints(
    n: int,
    l_max: int,
    ticketing: Optional[Sequence[tuple[int, int]]] = None,
) -> list[LinearConstraint]:
    """Consistency rows over count variables indexed 0..2N-1.

    Boardings occupy indices 0..N-1, alightings N..2N-1. ticketing is a
    list of (count index, lower bound) pairs; zero bounds are implied by
    the variable bounds and may be omitted by the caller.
    """
    rows: list[LinearConstraint] = []
    board = list(range(n))
    alight = [n + i for i in range(n)]

    balance = tuple((j, 1.0) for j in board) + tuple((j, -1.0) for j in alight)
    rows.append(LinearConstraint(balance, "=", 0.0, "balance"))
    rows.append(LinearConstraint(((alight[0], 1.0),), "=", 0.0, "no_first_alight"))
    rows.append(LinearConstraint(((board[-1], 1.0),), "=", 0.0, "no_last_board"))

    # Occupancy after the last stop equals the balance gap, so the
    # prefix rows stop one short of it.
    for i in range(n - 1):
        prefix = tuple((board[k], 1.0) for k in range(i + 1)) + tuple(
            (alight[k], -1.0) for k in range(i + 1)
        )
        rows.append(LinearConstraint(prefix, ">=", 0.0, f"occ_lo_{i + 1}"))
        rows.append(LinearConstraint(prefix, "<=", float(l_max), f"occ_hi_{i + 1}"))

    for j, bound in ticketing or ():
        side = "board" if j < n else "alight"
        stop = (j % n) + 1
        rows.append(
            LinearConstraint(((j, 1.0),), ">=", float(bound), f"tick_{side}_{stop}")
        )
    return rows


def _ticketing_bounds(course: Course) -> list[tuple[int, int]]:
    """Positive ticketing lower bounds as (count index, value) pairs."""
    n = course.n_stops
    out: list[tuple[int, int]] = []
    for i, stop in enumerate(course.stops):
        t = stop.ticketing
        if t is None:
            continue
        if t.boarding is not None and t.boarding > 0:
            out.append((i, t.boarding))
        if t.alighting is not None and t.alighting > 0:
            out.append((n + i, t.alighting))
    return out


def _count_label(j: int, n: int) -> str:
    side = "board" if j < n else "alight"
    return f"{side}_{(j % n) + 1}"


def _similarity_rows(
    j: int,
    h: int,
    b: int,
    spec: SimilaritySpec,
    l_max: int,
    count_cap: int,
    n: int,
) -> list[LinearConstraint]:
    """Linearization of H_j = max(0, 1 - |x_j - c|/alpha) at the optimum.

    The three binary-guarded rows make the piecewise shape exact: with
    the far flag off, H is capped by both slopes of the triangle (which
    go negative beyond the margin, forcing the flag on); with it on, H
    is capped at 0 and the slope rows are released by M.

    The two hull rows repeat the upper envelope of max(0, triangle)
    over the count box without involving the flag. They are implied by
    the integer model but not by its relaxation, where the flag can sit
    at a tiny fraction and inflate H; without them the node bounds are
    vacuous and the search degenerates into enumeration.
    """
    c = float(spec.center)
    a = spec.half_margin
    m_big = (count_cap + c) / a + 1.0
    label = _count_label(j, n)
    rows = [
        LinearConstraint(
            ((h, 1.0), (j, 1.0 / a), (b, -m_big)), "<=", 1.0 + c / a, f"sim_right_{label}"
        ),
        LinearConstraint(
            ((h, 1.0), (j, -1.0 / a), (b, -m_big)), "<=", 1.0 - c / a, f"sim_left_{label}"
        ),
        LinearConstraint(((h, 1.0), (b, 1.0)), "<=", 1.0, f"sim_far_{label}"),
    ]
    if c > 0:
        if c <= a:
            rows.append(
                LinearConstraint(((h, 1.0), (j, -1.0 / a)), "<=", 1.0 - c / a, f"hull_left_{label}")
            )
        else:
            rows.append(
                LinearConstraint(((h, 1.0), (j, -1.0 / c)), "<=", 0.0, f"hull_left_{label}")
            )
    right = l_max - c
    if right > 0:
        if right <= a:
            rows.append(
                LinearConstraint(((h, 1.0), (j, 1.0 / a)), "<=", 1.0 + c / a, f"hull_right_{label}")
            )
        else:
            rows.append(
                LinearConstraint(
                    ((h, 1.0), (j, 1.0 / right)), "<=", l_max / right, f"hull_right_{label}"
                )
            )
    return rows


@dataclass(frozen=True)
class _Layout:
    """Variable index blocks of the staged problem."""

    n: int
    with_deviation: bool

    @property
    def t(self) -> int:
        return 6 * self.n

    def h(self, j: int) -> int:
        return 2 * self.n + j

    def b(self, j: int) -> int:
        return 4 * self.n + j

    def dev(self, j: int) -> int:
        return 6 * self.n + 1 + j

    @property
    def n_variables(self) -> int:
        return 8 * self.n + 1 if self.with_deviation else 6 * self.n + 1


def _build_base_problem(
    course: Course,
    config: DenoiseConfig,
    similarities: Sequence[SimilaritySpec],
    prior_shape: Optional[np.ndarray],
    include_ticketing: bool,
) -> tuple[ProblemSpec, _Layout]:
    n = course.n_stops
    l_max = config.max_load(course.capacity)
    cap = config.count_cap(course.capacity)
    lay = _Layout(n, prior_shape is not None)

    variables = count_variables(n, l_max)
    for j in range(2 * n):
        variables.append(VariableSpec(f"sim_{_count_label(j, n)}", 0.0, 1.0))
    for j in range(2 * n):
        variables.append(VariableSpec(f"far_{_count_label(j, n)}", 0.0, 1.0, integral=True))
    variables.append(VariableSpec("minsim", 0.0, 1.0))
    if prior_shape is not None:
        for j in range(2 * n):
            variables.append(VariableSpec(f"dev_{_count_label(j, n)}", 0.0, np.inf))

    ticketing = _ticketing_bounds(course) if include_ticketing else None
    rows = flow_constraints(n, l_max, ticketing)
    for j, spec in enumerate(similarities):
        rows.extend(_similarity_rows(j, lay.h(j), lay.b(j), spec, l_max, cap, n))
    for j in range(2 * n):
        rows.append(
            LinearConstraint(
                ((lay.t, 1.0), (lay.h(j), -1.0)), "<=", 0.0, f"minsim_{_count_label(j, n)}"
            )
        )
    if prior_shape is not None:
        # dev_j >= |x_j - p_j * S| with S = total boardings, kept linear
        # by expanding p_j * S over the boarding variables.
        for j in range(2 * n):
            base = [(k, -prior_shape[j]) for k in range(n)]
            plus = [(j, 1.0)] + [(k, c) for k, c in base] + [(lay.dev(j), -1.0)]
            minus = [(j, -1.0)] + [(k, -c) for k, c in base] + [(lay.dev(j), -1.0)]
            label = _count_label(j, n)
            rows.append(_merged_row(plus, "<=", 0.0, f"dev_hi_{label}"))
            rows.append(_merged_row(minus, "<=", 0.0, f"dev_lo_{label}"))

    problem = ProblemSpec(
        tuple(variables),
        tuple(rows),
        Objective("max", ((lay.t, 1.0),)),
    )
    return problem, lay


def _merged_row(
    terms: Sequence[tuple[int, float]], sense: str, rhs: float, name: str
) -> LinearConstraint:
    """Constraint with duplicate variable indices summed together."""
    acc: dict[int, float] = {}
    for idx, coef in terms:
        acc[idx] = acc.get(idx, 0.0) + coef
    merged = tuple((idx, coef) for idx, coef in acc.items() if coef != 0.0)
    return LinearConstraint(merged, sense, rhs, name)  # type: ignore[arg-type]


def _make_repair_hook(
    lay: _Layout,
    similarities: Sequence[SimilaritySpec],
    prior_shape: Optional[np.ndarray],
) -> Callable[[np.ndarray], Optional[np.ndarray]]:
    """Complete integral count blocks into full feasible assignments.

    Node relaxations often fix the counts long before the far flags and
    similarity variables settle, because the flags can stay fractional
    and prop up inflated similarities. Rebuilding the auxiliaries
    exactly from the counts hands branch and bound a true incumbent and
    collapses that part of the tree.
    """
    two_n = 2 * lay.n
    centers = np.array([s.center for s in similarities], dtype=float)
    margins = np.array([s.half_margin for s in similarities], dtype=float)

    def repair(values: np.ndarray) -> Optional[np.ndarray]:
        x = values[:two_n]
        rounded = np.rint(x)
        if np.max(np.abs(x - rounded)) > 1e-7:
            return None
        tri = 1.0 - np.abs(rounded - centers) / margins
        sim = np.maximum(tri, 0.0)
        out = np.empty(lay.n_variables)
        out[:two_n] = rounded
        out[two_n : 2 * two_n] = sim
        out[2 * two_n : 3 * two_n] = (tri < 0.0).astype(float)
        out[lay.t] = sim.min()
        if prior_shape is not None:
            total = rounded[: lay.n].sum()
            out[3 * two_n + 1 :] = np.abs(rounded - prior_shape * total)
        return out

    return repair


@dataclass
class _StageOutcome:
    counts: np.ndarray
    stage1: float
    stage2: float
    stage3: Optional[float]
    problems: list[ProblemSpec]


# The staged MILPs are solved by methods that exploit their structure
# instead of raw branch and bound; see _run_stages. A small numerical
# cushion keeps boundary counts inside their windows when a threshold
# was itself computed in floating point.
_EDGE = 1e-9


def _tent_matrix(similarities: Sequence[SimilaritySpec], u: int) -> np.ndarray:
    """Clamped triangular similarities tabulated on the count grid 0..u."""
    grid = np.arange(u + 1, dtype=float)
    return np.stack(
        [
            np.maximum(0.0, 1.0 - np.abs(grid - s.center) / s.half_margin)
            for s in similarities
        ]
    )


def _count_windows(
    course: Course,
    tents: np.ndarray,
    config: DenoiseConfig,
    include_ticketing: bool,
    threshold: float,
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Per-count integer intervals admissible at a similarity threshold.

    A count with similarity >= threshold > 0 must lie within
    alpha * (1 - threshold) of its center; at threshold <= 0 the whole
    box is admissible. Endpoint rules and ticketing lower bounds shrink
    the intervals further. None when some interval is empty.
    """
    n = course.n_stops
    u = tents.shape[1] - 1
    lo = np.zeros(2 * n, dtype=np.int64)
    hi = np.full(2 * n, u, dtype=np.int64)
    if threshold > _EDGE:
        for j in range(2 * n):
            inside = np.flatnonzero(tents[j] >= threshold - _EDGE)
            if inside.size == 0:
                return None
            lo[j], hi[j] = inside[0], inside[-1]
    # Nobody boards at the last stop or alights at the first.
    for j in (n - 1, n):
        if lo[j] > 0:
            return None
        hi[j] = 0
    if include_ticketing:
        for j, bound in _ticketing_bounds(course):
            lo[j] = max(lo[j], bound)
            if lo[j] > hi[j]:
                return None
    return lo, hi


def _flow_feasible(lo: np.ndarray, hi: np.ndarray, n: int, u: int) -> bool:
    """Whether some integer count vector in the windows is consistent.

    Sweeps backwards over stops maintaining the interval of occupancies
    from which the remaining stops can still reach zero; every integer
    in the interval is reachable because each stop's net exchange spans
    an integer interval. Exactness rests on that, so no tolerance is
    involved.
    """
    r_lo, r_hi = 0, 0
    for i in reversed(range(n)):
        d_max = hi[i] - lo[n + i]
        d_min = lo[i] - hi[n + i]
        r_lo = max(0, r_lo - d_max)
        r_hi = min(u, r_hi - d_min)
        if r_lo > r_hi:
            return False
    return r_lo <= 0 <= r_hi


def _stage1_threshold(
    course: Course,
    tents: np.ndarray,
    config: DenoiseConfig,
    include_ticketing: bool,
) -> Optional[float]:
    """Exact optimum of stage I: the best worst-case similarity.

    Feasibility at a threshold is monotone (higher thresholds only
    shrink the windows), and the objective can only take similarity
    values attained at integer counts, so a binary search over those
    candidate values finds the optimum exactly.
    """
    u = tents.shape[1] - 1

    def feasible(t: float) -> bool:
        w = _count_windows(course, tents, config, include_ticketing, t)
        return w is not None and _flow_feasible(*w, course.n_stops, u)

    if not feasible(0.0):
        return None
    values = np.unique(tents)
    lo_i, hi_i = 0, len(values) - 1
    while lo_i < hi_i:
        mid = (lo_i + hi_i + 1) // 2
        if feasible(float(values[mid])):
            lo_i = mid
        else:
            hi_i = mid - 1
    return float(values[lo_i])


def occupancy_dp(
    gains: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    n: int,
    u: int,
) -> Optional[tuple[float, np.ndarray]]:
    """Maximize a separable count objective over windowed consistent vectors.

    gains[j, v] is the reward for setting count j (boardings 0..n-1,
    then alightings) to v; lo/hi are inclusive per-count windows. State:
    occupancy after each stop (an integer in [0, u]). Each stop
    contributes its boarding and alighting in two half-steps, so the
    transition is a running max over one count at a time. Ties take the
    smallest count value. Returns (optimal total, counts) or None when
    no windowed vector is consistent.

    This is the workhorse behind the similarity-sum stage and the
    distance-minimizing reference methods; it is exact for any gains,
    including nonconcave ones.
    """
    neg = -np.inf
    v = np.arange(u + 1)
    mid = np.arange(2 * u + 1)
    p_from = mid[:, None] - v[None, :]  # occupancy before boarding
    valid = (p_from >= 0) & (p_from <= u)
    p_clip = np.clip(p_from, 0, u)
    q_from = v[:, None] + v[None, :]  # intermediate occupancy before alighting

    dp = np.full(u + 1, neg)
    dp[0] = 0.0
    board_arg: list[np.ndarray] = []
    alight_arg: list[np.ndarray] = []
    for i in range(n):
        gy = np.where((v >= lo[i]) & (v <= hi[i]), gains[i], neg)
        gz = np.where((v >= lo[n + i]) & (v <= hi[n + i]), gains[n + i], neg)
        stepped = np.where(valid, dp[p_clip] + gy[None, :], neg)
        mid_best = stepped.max(axis=1)
        board_arg.append(stepped.argmax(axis=1))
        landed = mid_best[q_from] + gz[None, :]
        dp = landed.max(axis=1)
        alight_arg.append(landed.argmax(axis=1))

    total = dp[0]
    if not np.isfinite(total):
        return None
    counts = np.zeros(2 * n, dtype=np.int64)
    occ = 0
    for i in reversed(range(n)):
        z = int(alight_arg[i][occ])
        between = occ + z
        y = int(board_arg[i][between])
        counts[i] = y
        counts[n + i] = z
        occ = between - y
    return float(total), counts


def _run_stages(
    course: Course,
    config: DenoiseConfig,
    similarities: Sequence[SimilaritySpec],
    prior_shape: Optional[np.ndarray],
    include_ticketing: bool,
) -> Optional[_StageOutcome]:
    """Solve the staged problems; None when stage I is infeasible.

    The stage MILPs are built for inspection and for stage III, but
    stages I and II are solved by exact specialized methods: branch and
    bound on the raw models is hopeless because their relaxations let
    fractional counts keep every similarity near 1. Stage I reduces to
    a parametric feasibility search and stage II to a separable
    maximization over occupancy states; both provably reach the same
    optima as the MILPs. Stage III (priors distance) keeps branch and
    bound, helped by count bounds tightened to the stage-I windows and
    a warm start from the stage-II solution.
    """
    n = course.n_stops
    u = config.max_load(course.capacity)
    problem, lay = _build_base_problem(
        course, config, similarities, prior_shape, include_ticketing
    )
    problems = [problem]

    tents = _tent_matrix(similarities, u)
    stage1 = _stage1_threshold(course, tents, config, include_ticketing)
    if stage1 is None:
        return None

    pinned = freeze_stage(
        problem, ((lay.t, 1.0),), stage1, "max", config.lex_slack, "stage1_pin"
    )
    sum_terms = tuple((lay.h(j), 1.0) for j in range(2 * lay.n))
    problem2 = with_objective(pinned, Objective("max", sum_terms))
    problems.append(problem2)

    windows = _count_windows(
        course, tents, config, include_ticketing, stage1 - config.lex_slack
    )
    assert windows is not None  # stage-I windows were feasible and these are wider
    stage2_out = occupancy_dp(tents, *windows, n, u)
    assert stage2_out is not None
    stage2, counts = stage2_out

    stage3: Optional[float] = None
    if prior_shape is not None:
        pinned2 = freeze_stage(
            problem2, sum_terms, stage2, "max", config.lex_slack, "stage2_pin"
        )
        dev_terms = tuple((lay.dev(j), 1.0) for j in range(2 * lay.n))
        problem3 = with_objective(pinned2, Objective("min", dev_terms))
        problems.append(problem3)
        third = _solve_stage3(
            problem3, lay, windows, counts, similarities, prior_shape, stage1, config
        )
        if third is None:
            return None
        stage3, counts = third

    return _StageOutcome(counts, stage1, stage2, stage3, problems)


def _solve_stage3(
    problem3: ProblemSpec,
    lay: _Layout,
    windows: tuple[np.ndarray, np.ndarray],
    stage2_counts: np.ndarray,
    similarities: Sequence[SimilaritySpec],
    prior_shape: np.ndarray,
    stage1: float,
    config: DenoiseConfig,
) -> Optional[tuple[float, np.ndarray]]:
    """Branch-and-bound solve of the prior-distance stage.

    The solved problem narrows each count variable to its stage-I
    window (implied by the pin constraints, so no optimum is lost) and,
    when the pinned minimal similarity is positive, fixes the far flags
    to 0 since any far count would break the pin.
    """
    lo, hi = windows
    two_n = 2 * lay.n
    variables = list(problem3.variables)
    for j in range(two_n):
        variables[j] = VariableSpec(
            variables[j].name, float(lo[j]), float(hi[j]), integral=True
        )
    if stage1 - config.lex_slack > 0:
        for j in range(two_n):
            spec = variables[lay.b(j)]
            variables[lay.b(j)] = VariableSpec(spec.name, 0.0, 0.0, integral=True)
    tightened = ProblemSpec(tuple(variables), problem3.constraints, problem3.objective)

    repair = _make_repair_hook(lay, similarities, prior_shape)
    warm = repair(np.asarray(stage2_counts, dtype=float))
    result = solve_milp(
        tightened,
        feasibility_tolerance=config.feasibility_tolerance,
        integrality_tolerance=config.integrality_tolerance,
        repair_hook=repair,
        initial_solution=warm,
    )
    if not result.values:
        return None
    counts = np.rint(np.asarray(result.values[:two_n])).astype(np.int64)
    return result.objective_value, counts


# ---------------------------------------------------------------------------
# Public pipeline


def _prior_shape(course: Course, priors: Optional[Priors]) -> Optional[np.ndarray]:
    """Per-count proportion targets aligned with the course's stops."""
    if priors is None:
        return None
    if priors.line_id != course.line_id or priors.direction != course.direction:
        raise ValueError(
            f"priors for {priors.line_id}/{priors.direction} do not apply to "
            f"course {course.course_id} ({course.line_id}/{course.direction})"
        )
    stop_ids = tuple(s.stop_id for s in course.stops)
    if tuple(priors.stop_ids) != stop_ids:
        raise ValueError(
            f"priors stop sequence does not match course {course.course_id}"
        )
    return np.array(list(priors.p_board) + list(priors.p_alight), dtype=float)


def _prior_distance(counts: Sequence[StopCounts], shape: np.ndarray) -> float:
    x = np.array([c.boarding for c in counts] + [c.alighting for c in counts], float)
    total = sum(c.boarding for c in counts)
    return float(np.abs(x - shape * total).sum())


def denoise_course(
    course: Course,
    priors: Optional[Priors] = None,
    config: DenoiseConfig = DenoiseConfig(),
) -> DenoiseResult:
    """Reconcile one course's observed counts.

    Already-valid courses are returned unchanged: similarity 1 demands
    an exact match with the observation, so the observed vector is the
    unique point where every similarity reaches 1, and no other point
    can do better in the lexicographic order.

    When the problem is infeasible with ticketing lower bounds, the
    whole pipeline reruns without them and the result says so; with the
    bounds gone the all-zero vector is always feasible, so failure is
    reserved for malformed inputs.
    """
    n = course.n_stops
    shape = _prior_shape(course, priors)
    observed = tuple(course.observed_counts())

    if validate_course(course, config).all_ok:
        stage3 = _prior_distance(observed, shape) if shape is not None else None
        return DenoiseResult(
            counts=observed,
            occupancy=compute_occupancy(observed),
            stage1_value=1.0,
            stage2_value=float(2 * n),
            stage3_value=stage3,
            quality=1.0,
            ticketing_dropped=False,
            status=STATUS_OK,
        )

    similarities = build_similarities(course, config)
    had_ticketing = bool(_ticketing_bounds(course))
    outcome = _run_stages(course, config, similarities, shape, had_ticketing)
    dropped = False
    if outcome is None and had_ticketing:
        dropped = True
        outcome = _run_stages(course, config, similarities, shape, False)

    if outcome is None:
        return DenoiseResult(
            counts=observed,
            occupancy=compute_occupancy(observed),
            stage1_value=0.0,
            stage2_value=0.0,
            stage3_value=None,
            quality=0.0,
            ticketing_dropped=dropped,
            status=STATUS_FAILED,
        )

    counts = tuple(
        StopCounts(int(outcome.counts[i]), int(outcome.counts[n + i])) for i in range(n)
    )
    return DenoiseResult(
        counts=counts,
        occupancy=compute_occupancy(counts),
        stage1_value=outcome.stage1,
        stage2_value=outcome.stage2,
        stage3_value=outcome.stage3,
        quality=outcome.stage2 / (2 * n),
        ticketing_dropped=dropped,
        status=STATUS_OK_WITHOUT_TICKETING if dropped else STATUS_OK,
    )


def stage_problems(
    course: Course,
    priors: Optional[Priors] = None,
    config: DenoiseConfig = DenoiseConfig(),
) -> list[ProblemSpec]:
    """The staged problems exactly as the pipeline solves them.

    Intended for model dumps and debugging: earlier stages must be
    solved to know the pin values of later ones, so this runs the full
    pipeline (including the ticketing fallback) and returns one problem
    per executed stage.
    """
    shape = _prior_shape(course, priors)
    similarities = build_similarities(course, config)
    had_ticketing = bool(_ticketing_bounds(course))
    outcome = _run_stages(course, config, similarities, shape, had_ticketing)
    if outcome is None and had_ticketing:
        outcome = _run_stages(course, config, similarities, shape, False)
    if outcome is None:
        problem, _ = _build_base_problem(course, config, similarities, shape, had_ticketing)
        return [problem]
    return outcome.problems
