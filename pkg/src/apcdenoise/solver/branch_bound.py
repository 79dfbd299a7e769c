"""Best-bound branch and bound over the bounded-variable simplex.

Nodes are LP relaxations with tightened bounds on the integral
variables. The frontier is a heap keyed on the parent relaxation
value, so the node with the most promising bound is expanded first;
ties fall back to insertion order, which keeps runs deterministic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .problem import (
    STATUS_INFEASIBLE,
    STATUS_ITERATION_LIMIT,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    ProblemSpec,
    SolveResult,
)
from .simplex import build_standard_form, simplex_solve

# Candidate integer assignments produced by a repair hook. Values must
# cover every variable; the solver recomputes the objective itself.
RepairHook = Callable[[np.ndarray], Optional[np.ndarray]]


@dataclass(order=True)
class _Node:
    bound: float
    order: int
    lo: np.ndarray = field(compare=False)
    hi: np.ndarray = field(compare=False)


def solve_milp(
    problem: ProblemSpec,
    *,
    feasibility_tolerance: float = 1e-6,
    integrality_tolerance: float = 1e-6,
    node_limit: int = 100_000,
    pivot_limit: int = 50_000,
    repair_hook: RepairHook | None = None,
    initial_solution: np.ndarray | None = None,
) -> SolveResult:
    """Minimize or maximize over the mixed-integer feasible set.

    The optional repair hook sees each node relaxation's variable
    values whenever the integral block is already integral, and may
    return a full feasible assignment to seed or improve the incumbent.
    initial_solution, when given and feasible, seeds the incumbent so
    pruning starts immediately.
    """
    form = build_standard_form(problem)
    ns = form.n_struct
    int_idx = np.flatnonzero(form.integral)

    root_lo = form.lo[:ns].copy()
    root_hi = form.hi[:ns].copy()
    # Integral variables need finite bounds for enumeration to terminate;
    # ProblemSpec validation enforces that, asserted here for safety.
    assert np.isfinite(root_lo[int_idx]).all() and np.isfinite(root_hi[int_idx]).all()
    root_lo[int_idx] = np.ceil(root_lo[int_idx] - integrality_tolerance)
    root_hi[int_idx] = np.floor(root_hi[int_idx] + integrality_tolerance)

    status, x, obj = simplex_solve(
        form,
        root_lo,
        root_hi,
        feasibility_tolerance=feasibility_tolerance,
        pivot_limit=pivot_limit,
    )
    if status == STATUS_UNBOUNDED:
        return SolveResult(STATUS_UNBOUNDED, (), float("nan"))
    if status == STATUS_ITERATION_LIMIT:
        return SolveResult(STATUS_ITERATION_LIMIT, (), float("nan"))
    if status == STATUS_INFEASIBLE:
        return SolveResult(STATUS_INFEASIBLE, (), float("nan"))

    best_x: np.ndarray | None = None
    best_obj = math.inf
    counter = 0
    heap: list[_Node] = []
    heapq.heappush(heap, _Node(obj, counter, root_lo, root_hi))
    nodes = 0
    limit_hit = False

    def try_incumbent(values: np.ndarray, objective: float) -> None:
        nonlocal best_x, best_obj
        if objective < best_obj - 1e-9:
            best_obj = objective
            best_x = values.copy()

    def consider_repair(values: np.ndarray) -> None:
        if repair_hook is None:
            return
        candidate = repair_hook(values)
        if candidate is None:
            return
        if not _is_feasible(form, candidate, feasibility_tolerance, integrality_tolerance):
            return
        try_incumbent(candidate, float(form.cost[:ns] @ candidate))

    if initial_solution is not None:
        seed = np.asarray(initial_solution, dtype=float)
        if _is_feasible(form, seed, feasibility_tolerance, integrality_tolerance):
            try_incumbent(seed, float(form.cost[:ns] @ seed))

    while heap:
        node = heapq.heappop(heap)
        if node.bound >= best_obj - 1e-9:
            break  # best-bound order: nothing left can improve
        nodes += 1
        if nodes > node_limit:
            limit_hit = True
            break

        status, x, obj = simplex_solve(
            form,
            node.lo,
            node.hi,
            feasibility_tolerance=feasibility_tolerance,
            pivot_limit=pivot_limit,
        )
        if status == STATUS_ITERATION_LIMIT:
            limit_hit = True
            break
        if status != STATUS_OPTIMAL:
            continue
        if obj >= best_obj - 1e-9:
            continue

        xs = x[:ns]
        frac = np.abs(xs[int_idx] - np.round(xs[int_idx]))
        fractional = int_idx[frac > integrality_tolerance]
        if fractional.size == 0:
            values = xs.copy()
            values[int_idx] = np.round(values[int_idx])
            try_incumbent(values, float(form.cost[:ns] @ values))
            consider_repair(values)
            continue
        consider_repair(xs)

        j = int(fractional[0])
        split = math.floor(xs[j])
        down_lo, down_hi = node.lo.copy(), node.hi.copy()
        down_hi[j] = split
        up_lo, up_hi = node.lo.copy(), node.hi.copy()
        up_lo[j] = split + 1
        for child_lo, child_hi in ((down_lo, down_hi), (up_lo, up_hi)):
            if child_lo[j] > child_hi[j]:
                continue
            counter += 1
            heapq.heappush(heap, _Node(obj, counter, child_lo, child_hi))

    if best_x is None:
        if limit_hit:
            return SolveResult(STATUS_ITERATION_LIMIT, (), float("nan"))
        return SolveResult(STATUS_INFEASIBLE, (), float("nan"))
    value = float(form.cost[:ns] @ best_x)
    if form.maximize:
        value = -value
    status = STATUS_ITERATION_LIMIT if limit_hit else STATUS_OPTIMAL
    return SolveResult(status, tuple(best_x), value)


def _is_feasible(
    form,
    values: np.ndarray,
    feasibility_tolerance: float,
    integrality_tolerance: float,
) -> bool:
    ns = form.n_struct
    if values.shape != (ns,):
        return False
    lo, hi = form.lo[:ns], form.hi[:ns]
    if np.any(values < lo - feasibility_tolerance) or np.any(values > hi + feasibility_tolerance):
        return False
    ints = values[form.integral]
    if np.any(np.abs(ints - np.round(ints)) > integrality_tolerance):
        return False
    slack = form.b - form.A[:, :ns] @ values
    slo, shi = form.lo[ns:], form.hi[ns:]
    scale = 1.0 + np.abs(form.b)
    if np.any(slack < slo - feasibility_tolerance * scale):
        return False
    if np.any(slack > shi + feasibility_tolerance * scale):
        return False
    return True
