"""Two-phase primal simplex for linear programs with variable bounds.

Dense-tableau implementation sized for the problems this package
builds (a few hundred variables). Every row is turned into an equality
by a slack variable whose bounds encode the original sense; rows whose
slack cannot sit within its bounds at the initial point get an
artificial variable, and phase I minimizes the artificial sum.

Nonbasic variables rest on one of their bounds (or at zero when free).
The entering rule is Dantzig's (most violating reduced cost, lowest
index on ties); after a streak of degenerate steps both the entering
and the leaving rules switch to Bland's least-index rule, which cannot
cycle. All choices are deterministic, so repeated solves of the same
problem are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import (
    STATUS_INFEASIBLE,
    STATUS_ITERATION_LIMIT,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    ProblemSpec,
    SolveResult,
)

_AT_LOWER = 0
_AT_UPPER = 1
_FREE = 2
_BASIC = 3

# Dual feasibility threshold for reduced costs; kept well below the
# 1e-6 objective tolerances promised to callers.
_DUAL_TOL = 1e-9
_PIVOT_TOL = 1e-9
_RATIO_TIE = 1e-9
_DEGENERATE_STEP = 1e-9
_BLAND_AFTER = 30
_REFRESH_EVERY = 128


@dataclass
class StandardForm:
    """Equality system [A_struct | I_slack] x = b with bounds on all columns."""

    A: np.ndarray  # m x (n_struct + m)
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    cost: np.ndarray  # minimization costs over structural + slack columns
    n_struct: int
    maximize: bool
    integral: np.ndarray  # bool mask over structural columns


def build_standard_form(problem: ProblemSpec) -> StandardForm:
    n = problem.n_variables
    m = len(problem.constraints)
    A = np.zeros((m, n + m))
    b = np.empty(m)
    lo = np.empty(n + m)
    hi = np.empty(n + m)
    for j, v in enumerate(problem.variables):
        lo[j] = v.lower
        hi[j] = v.upper
    for i, con in enumerate(problem.constraints):
        for j, coef in con.terms:
            A[i, j] += coef
        A[i, n + i] = 1.0
        b[i] = con.rhs
        if con.sense == "<=":
            lo[n + i], hi[n + i] = 0.0, np.inf
        elif con.sense == ">=":
            lo[n + i], hi[n + i] = -np.inf, 0.0
        else:
            lo[n + i], hi[n + i] = 0.0, 0.0
    cost = np.zeros(n + m)
    maximize = problem.objective.sense == "max"
    for j, coef in problem.objective.terms:
        cost[j] += -coef if maximize else coef
    integral = np.array([v.integral for v in problem.variables], dtype=bool)
    return StandardForm(A, b, lo, hi, cost, n, maximize, integral)


def solve_lp(
    problem: ProblemSpec,
    *,
    feasibility_tolerance: float = 1e-6,
    pivot_limit: int = 50_000,
) -> SolveResult:
    """Solve the LP relaxation (integrality markers are ignored)."""
    form = build_standard_form(problem)
    status, x, obj = simplex_solve(
        form,
        form.lo[: form.n_struct],
        form.hi[: form.n_struct],
        feasibility_tolerance=feasibility_tolerance,
        pivot_limit=pivot_limit,
    )
    if status != STATUS_OPTIMAL:
        return SolveResult(status, (), float("nan"))
    value = -obj if form.maximize else obj
    return SolveResult(STATUS_OPTIMAL, tuple(x[: form.n_struct]), value)


def simplex_solve(
    form: StandardForm,
    struct_lo: np.ndarray,
    struct_hi: np.ndarray,
    *,
    feasibility_tolerance: float,
    pivot_limit: int,
) -> tuple[str, np.ndarray, float]:
    """Solve min cost*x over the standard form with overridden structural bounds.

    Returns (status, values over structural+slack columns, minimization
    objective). Branch and bound calls this directly with per-node bounds.
    """
    m, n_tot = form.A.shape
    ns = form.n_struct
    lo = form.lo.copy()
    hi = form.hi.copy()
    lo[:ns] = struct_lo
    hi[:ns] = struct_hi
    if np.any(lo > hi + feasibility_tolerance):
        return STATUS_INFEASIBLE, np.empty(0), float("nan")
    # A stage pin can push lo past hi by tolerance noise; treat as fixed.
    hi = np.maximum(hi, lo)

    x = np.zeros(n_tot)
    finite_lo = np.isfinite(lo)
    finite_hi = np.isfinite(hi)
    x[:] = np.where(finite_lo, lo, np.where(finite_hi, hi, 0.0))
    vstat = np.where(
        finite_lo, _AT_LOWER, np.where(finite_hi, _AT_UPPER, _FREE)
    ).astype(np.int8)

    # Tentative slack values with every structural column on its bound.
    resid = form.b - form.A[:, :ns] @ x[:ns]
    basis = np.empty(m, dtype=np.int64)
    art_rows: list[int] = []
    art_resid: list[float] = []
    for i in range(m):
        s = ns + i
        v = resid[i]
        if lo[s] - feasibility_tolerance <= v <= hi[s] + feasibility_tolerance:
            basis[i] = s
            x[s] = min(max(v, lo[s]), hi[s])
            vstat[s] = _BASIC
        else:
            near = lo[s] if v < lo[s] else hi[s]
            x[s] = near
            vstat[s] = _AT_LOWER if near == lo[s] else _AT_UPPER
            art_rows.append(i)
            art_resid.append(v - near)

    n_art = len(art_rows)
    n_all = n_tot + n_art
    W = np.hstack([form.A, np.zeros((m, n_art))]) if n_art else form.A.copy()
    beta = form.b.astype(float).copy()
    x = np.concatenate([x, np.zeros(n_art)])
    vstat = np.concatenate([vstat, np.full(n_art, _AT_LOWER, dtype=np.int8)])
    lo_all = np.concatenate([lo, np.zeros(n_art)])
    hi_all = np.concatenate([hi, np.zeros(n_art)])
    for k, (i, r) in enumerate(zip(art_rows, art_resid)):
        art = n_tot + k
        sign = 1.0 if r >= 0 else -1.0
        W[i, art] = sign
        basis[i] = art
        x[art] = abs(r)
        vstat[art] = _BASIC
        hi_all[art] = np.inf
        if sign < 0:
            W[i] = -W[i]
            beta[i] = -beta[i]

    cost_all = np.concatenate([form.cost, np.zeros(n_art)])
    if n_art:
        phase_cost = np.zeros(n_all)
        phase_cost[n_tot:] = 1.0
        phase = 1
    else:
        phase_cost = cost_all
        phase = 2

    d = phase_cost - phase_cost[basis] @ W
    enterable_width = hi_all - lo_all  # fixed columns never enter

    degen_streak = 0
    bland = False
    iters = 0

    def refresh_values() -> None:
        nb = np.flatnonzero((vstat != _BASIC) & (x != 0.0))
        xb = beta - W[:, nb] @ x[nb] if nb.size else beta.copy()
        x[basis] = xb

    while True:
        iters += 1
        if iters > pivot_limit:
            return STATUS_ITERATION_LIMIT, np.empty(0), float("nan")
        if iters % _REFRESH_EVERY == 0:
            refresh_values()
            d = phase_cost - phase_cost[basis] @ W

        can_inc = ((vstat == _AT_LOWER) | (vstat == _FREE)) & (d < -_DUAL_TOL)
        can_dec = ((vstat == _AT_UPPER) | (vstat == _FREE)) & (d > _DUAL_TOL)
        eligible = (can_inc | can_dec) & (enterable_width > 0)
        if not eligible.any():
            # Current point is optimal for the active phase.
            if phase == 1:
                refresh_values()
                infeas = x[n_tot:].sum()
                if infeas > feasibility_tolerance * (1.0 + abs(form.b).max(initial=0.0)):
                    return STATUS_INFEASIBLE, np.empty(0), float("nan")
                _expel_artificials(W, beta, basis, vstat, x, n_tot)
                hi_all[n_tot:] = 0.0
                enterable_width = hi_all - lo_all
                phase = 2
                phase_cost = cost_all
                d = phase_cost - phase_cost[basis] @ W
                degen_streak = 0
                bland = False
                continue
            refresh_values()
            obj = float(phase_cost @ x)
            return STATUS_OPTIMAL, x[:n_tot], obj

        if bland:
            q = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, np.abs(d), -np.inf)
            q = int(np.argmax(score))
        sigma = 1.0 if (vstat[q] == _AT_LOWER or (vstat[q] == _FREE and d[q] < 0)) else -1.0

        col = sigma * W[:, q]
        xb = x[basis]
        lims = np.full(m, np.inf)
        pos = col > _PIVOT_TOL
        neg = col < -_PIVOT_TOL
        if pos.any():
            lims[pos] = (xb[pos] - lo_all[basis[pos]]) / col[pos]
        if neg.any():
            lims[neg] = (hi_all[basis[neg]] - xb[neg]) / (-col[neg])
        np.maximum(lims, 0.0, out=lims)
        own = hi_all[q] - lo_all[q] if vstat[q] != _FREE else np.inf
        row_min = float(lims.min()) if m else np.inf
        delta = min(row_min, own)
        if not np.isfinite(delta):
            if phase == 1:
                # Phase I objective is bounded below; this is numerical noise.
                return STATUS_ITERATION_LIMIT, np.empty(0), float("nan")
            return STATUS_UNBOUNDED, np.empty(0), float("nan")

        if own <= row_min + _RATIO_TIE:
            # The entering variable hits its opposite bound first: flip it.
            x[basis] -= own * col
            if vstat[q] == _AT_LOWER:
                x[q] = hi_all[q]
                vstat[q] = _AT_UPPER
            else:
                x[q] = lo_all[q]
                vstat[q] = _AT_LOWER
            degen_streak = degen_streak + 1 if own <= _DEGENERATE_STEP else 0
            bland = degen_streak >= _BLAND_AFTER
            continue

        tie = np.flatnonzero(lims <= delta + _RATIO_TIE)
        if bland:
            r = int(tie[np.argmin(basis[tie])])
        else:
            piv_sizes = np.abs(W[tie, q])
            r = int(tie[np.argmax(piv_sizes)])
        leave = int(basis[r])

        x[basis] -= delta * col
        x[q] += sigma * delta
        x[leave] = lo_all[leave] if col[r] > 0 else hi_all[leave]
        vstat[leave] = _AT_LOWER if col[r] > 0 else _AT_UPPER

        piv = W[r, q]
        W[r] /= piv
        beta[r] /= piv
        colw = W[:, q].copy()
        colw[r] = 0.0
        W -= np.outer(colw, W[r])
        beta -= colw * beta[r]
        basis[r] = q
        vstat[q] = _BASIC
        d = d - d[q] * W[r]

        degen_streak = degen_streak + 1 if delta <= _DEGENERATE_STEP else 0
        bland = degen_streak >= _BLAND_AFTER


def _expel_artificials(
    W: np.ndarray,
    beta: np.ndarray,
    basis: np.ndarray,
    vstat: np.ndarray,
    x: np.ndarray,
    n_tot: int,
) -> None:
    """Pivot zero-level artificials out of the basis where possible.

    Rows whose artificial cannot leave are linearly dependent on the
    others; the artificial stays basic, pinned to zero by its bounds,
    and simply re-states the redundant row.
    """
    m = W.shape[0]
    for r in range(m):
        if basis[r] < n_tot:
            continue
        candidates = np.flatnonzero(np.abs(W[r, :n_tot]) > 1e-7)
        candidates = candidates[vstat[candidates] != _BASIC]
        if candidates.size == 0:
            continue
        q = int(candidates[0])
        leave = int(basis[r])
        piv = W[r, q]
        W[r] /= piv
        beta[r] /= piv
        colw = W[:, q].copy()
        colw[r] = 0.0
        W -= np.outer(colw, W[r])
        beta -= colw * beta[r]
        basis[r] = q
        vstat[q] = _BASIC
        vstat[leave] = _AT_LOWER
        x[leave] = 0.0
