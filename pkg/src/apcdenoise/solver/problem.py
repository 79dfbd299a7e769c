"""Declarative description of bounded mixed-integer linear programs.

Variables are referenced by index everywhere (constraint terms,
objective terms), which keeps the structures trivially serializable and
cheap to copy. Problems are immutable; staged optimization builds new
problems by appending pin constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

Sense = Literal["<=", "=", ">="]
ObjSense = Literal["min", "max"]

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_ITERATION_LIMIT = "iteration-limit"


@dataclass(frozen=True)
class VariableSpec:
    """One decision variable with inclusive bounds.

    Integral variables must have finite bounds; branch and bound relies
    on a finite search box.
    """

    name: str
    lower: float
    upper: float
    integral: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variable name must be non-empty")
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError(f"{self.name}: bounds must not be NaN")
        if self.lower > self.upper:
            raise ValueError(
                f"{self.name}: lower bound {self.lower} exceeds upper {self.upper}"
            )
        if self.integral and not (
            math.isfinite(self.lower) and math.isfinite(self.upper)
        ):
            raise ValueError(f"{self.name}: integral variables need finite bounds")


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coef * var) <sense> rhs, terms given as (variable index, coef)."""

    terms: tuple[tuple[int, float], ...]
    sense: Sense
    rhs: float
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple((int(i), float(c)) for i, c in self.terms))
        if self.sense not in ("<=", "=", ">="):
            raise ValueError(f"unknown sense {self.sense!r}")


@dataclass(frozen=True)
class Objective:
    sense: ObjSense
    terms: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple((int(i), float(c)) for i, c in self.terms))
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown objective sense {self.sense!r}")


@dataclass(frozen=True)
class ProblemSpec:
    variables: tuple[VariableSpec, ...]
    constraints: tuple[LinearConstraint, ...]
    objective: Objective

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = len(self.variables)
        for con in self.constraints:
            for idx, _ in con.terms:
                if not 0 <= idx < n:
                    raise ValueError(f"constraint {con.name!r} references variable {idx}")
        for idx, _ in self.objective.terms:
            if not 0 <= idx < n:
                raise ValueError(f"objective references variable {idx}")

    @property
    def n_variables(self) -> int:
        return len(self.variables)


@dataclass(frozen=True)
class SolveResult:
    """Solver outcome; values are meaningful only when status is optimal."""

    status: str
    values: tuple[float, ...]
    objective_value: float


def freeze_stage(
    problem: ProblemSpec,
    objective_terms: Sequence[tuple[int, float]],
    achieved: float,
    sense: ObjSense,
    slack: float,
    name: str = "stage_pin",
) -> ProblemSpec:
    """Pin a solved stage's objective before optimizing the next stage.

    For a maximized stage the pin is terms >= achieved - slack, for a
    minimized one terms <= achieved + slack. The slack keeps the pinned
    problem feasible under floating-point noise.
    """
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    if sense == "max":
        pin = LinearConstraint(tuple(objective_terms), ">=", achieved - slack, name)
    else:
        pin = LinearConstraint(tuple(objective_terms), "<=", achieved + slack, name)
    return ProblemSpec(problem.variables, problem.constraints + (pin,), problem.objective)


def with_objective(problem: ProblemSpec, objective: Objective) -> ProblemSpec:
    return ProblemSpec(problem.variables, problem.constraints, objective)


def _num(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _term_str(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    lead = "" if first and sign == "" else f"{sign} "
    return f"{lead}{_num(mag)} {name}"


def _expr(terms: Iterable[tuple[int, float]], names: Sequence[str]) -> str:
    parts = []
    for i, c in terms:
        if c == 0:
            continue
        parts.append(_term_str(c, names[i], first=not parts))
    return " ".join(parts) if parts else "0 " + names[0]


def to_lp_text(problem: ProblemSpec, name: str = "model") -> str:
    """Render the problem in the conventional LP text format.

    One constraint per line, explicit Bounds section, integral variables
    listed under Generals. The output is accepted by mainstream solvers
    and is mainly meant for eyeballing a model.
    """
    names = [v.name for v in problem.variables]
    lines = [f"\\ {name}"]
    lines.append("Maximize" if problem.objective.sense == "max" else "Minimize")
    lines.append(f" obj: {_expr(problem.objective.terms, names)}")
    lines.append("Subject To")
    for k, con in enumerate(problem.constraints):
        label = con.name or f"c{k}"
        lines.append(f" {label}: {_expr(con.terms, names)} {con.sense} {_num(con.rhs)}")
    lines.append("Bounds")
    for v in problem.variables:
        lo = "-inf" if math.isinf(v.lower) else _num(v.lower)
        hi = "+inf" if math.isinf(v.upper) else _num(v.upper)
        lines.append(f" {lo} <= {v.name} <= {hi}")
    generals = [v.name for v in problem.variables if v.integral]
    if generals:
        lines.append("Generals")
        lines.append(" " + " ".join(generals))
    lines.append("End")
    return "\n".join(lines) + "\n"
