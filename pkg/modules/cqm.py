"""
Constrained Quadratic Models

Binary constrained quadratic models built on dimod. The builder keeps every
term as a plain record so that fixed variables can be substituted out, while
evaluation and constraint activity are computed by dimod's model.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import dimod

from .errors import LengthMismatch

logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-9

Linear = Dict[int, float]
Quadratic = Dict[Tuple[int, int], float]


class Sense(Enum):
    """Constraint comparison; values match dimod's sense strings."""
    LE = '<='
    EQ = '=='
    GE = '>='


@dataclass(frozen=True)
class Constraint:
    """A labelled linear or quadratic constraint: lhs sense rhs."""
    label: str
    linear: Mapping[int, float]
    quadratic: Mapping[Tuple[int, int], float]
    sense: Sense
    rhs: float

    @property
    def variables(self) -> List[int]:
        """Variables referenced by the constraint, sorted."""
        found = set(self.linear)
        for u, v in self.quadratic:
            found.update((u, v))
        return sorted(found)


@dataclass(frozen=True)
class ConstraintReport:
    """Outcome of one constraint for one assignment."""
    label: str
    lhs: float
    sense: Sense
    rhs: float
    violation: float
    satisfied: bool


def _pair(u: int, v: int) -> Tuple[int, int]:
    return (u, v) if u < v else (v, u)


def _substitute(linear: Mapping[int, float], quadratic: Mapping[Tuple[int, int], float],
                fixed: Mapping[int, int]) -> Tuple[Linear, Quadratic, float]:
    """Replace fixed variables by their values; returns (linear, quadratic, constant)."""
    new_linear: Linear = {}
    new_quadratic: Quadratic = {}
    constant = 0.0
    for v, bias in linear.items():
        if v in fixed:
            constant += bias * fixed[v]
        else:
            new_linear[v] = new_linear.get(v, 0.0) + bias
    for (u, v), bias in quadratic.items():
        if u in fixed and v in fixed:
            constant += bias * fixed[u] * fixed[v]
        elif u in fixed:
            if fixed[u]:
                new_linear[v] = new_linear.get(v, 0.0) + bias
        elif v in fixed:
            if fixed[v]:
                new_linear[u] = new_linear.get(u, 0.0) + bias
        else:
            new_quadratic[(u, v)] = bias
    return new_linear, new_quadratic, constant


class CqmModel:
    """
    Binary CQM with a fixed variable count.

    Variables are the integers 0..num_variables-1. Fixed variables keep their
    index so that assignments always have the full length; after reduction
    they no longer appear in any term.
    """

    def __init__(self, num_variables: int, linear: Mapping[int, float],
                 quadratic: Mapping[Tuple[int, int], float], offset: float,
                 constraints: Sequence[Constraint], fixed: Optional[Mapping[int, int]] = None):
        self.num_variables = num_variables
        self.linear = dict(linear)
        self.quadratic = dict(quadratic)
        self.offset = float(offset)
        self.constraints = tuple(constraints)
        self.fixed = dict(fixed or {})
        self._cqm = None

    @property
    def num_constraints(self) -> int:
        """Number of constraints, including ones made constant by fixing."""
        return len(self.constraints)

    @property
    def free_variables(self) -> List[int]:
        """Variables that are not fixed."""
        return [v for v in range(self.num_variables) if v not in self.fixed]

    @property
    def cqm(self) -> dimod.ConstrainedQuadraticModel:
        """The dimod model over the free variables, built on first use."""
        if self._cqm is None:
            self._cqm = self._to_dimod()
        return self._cqm

    def constraint(self, label: str) -> Constraint:
        """Look up a constraint by label."""
        for constraint in self.constraints:
            if constraint.label == label:
                return constraint
        raise KeyError(f"Unknown constraint '{label}'")

    def _to_dimod(self) -> dimod.ConstrainedQuadraticModel:
        cqm = dimod.ConstrainedQuadraticModel()
        linear = {v: 0.0 for v in self.free_variables}
        for constraint in self.constraints:
            for v in constraint.variables:
                linear.setdefault(v, 0.0)
        for v, bias in self.linear.items():
            linear[v] = linear.get(v, 0.0) + bias
        cqm.set_objective(dimod.BinaryQuadraticModel(linear, self.quadratic, self.offset, 'BINARY'))
        for constraint in self.constraints:
            terms = [(v, bias) for v, bias in constraint.linear.items()]
            terms += [(u, v, bias) for (u, v), bias in constraint.quadratic.items()]
            cqm.add_constraint_from_iterable(terms, constraint.sense.value,
                                             rhs=constraint.rhs, label=constraint.label)
        return cqm


class CqmBuilder:
    """Accumulates objective terms and constraints for a binary CQM."""

    def __init__(self, num_variables: int):
        if num_variables < 0:
            raise ValueError(f"Variable count must be non-negative, got {num_variables}")
        self.num_variables = num_variables
        self.linear: Linear = {}
        self.quadratic: Quadratic = {}
        self.offset = 0.0
        self.constraints: List[Constraint] = []
        self.fixed: Dict[int, int] = {}
        self._labels = set()

    def _check_variable(self, v: int) -> None:
        if not 0 <= v < self.num_variables:
            raise ValueError(f"Variable {v} out of range 0..{self.num_variables - 1}")

    def _collect(self, linear: Iterable[Tuple[int, float]],
                 quadratic: Iterable[Tuple[int, int, float]]) -> Tuple[Linear, Quadratic]:
        lin: Linear = {}
        quad: Quadratic = {}
        for v, bias in linear:
            self._check_variable(v)
            lin[v] = lin.get(v, 0.0) + bias
        for u, v, bias in quadratic:
            self._check_variable(u)
            self._check_variable(v)
            if u == v:
                raise ValueError(f"Quadratic term on a single variable {v}")
            key = _pair(u, v)
            quad[key] = quad.get(key, 0.0) + bias
        return lin, quad

    def add_linear(self, v: int, bias: float) -> None:
        """Add a linear objective term."""
        lin, _ = self._collect([(v, bias)], [])
        self.linear[v] = self.linear.get(v, 0.0) + lin[v]

    def add_quadratic(self, u: int, v: int, bias: float) -> None:
        """Add a quadratic objective term."""
        _, quad = self._collect([], [(u, v, bias)])
        for key, value in quad.items():
            self.quadratic[key] = self.quadratic.get(key, 0.0) + value

    def add_constraint(self, label: str, sense: Sense, rhs: float,
                       linear: Iterable[Tuple[int, float]] = (),
                       quadratic: Iterable[Tuple[int, int, float]] = ()) -> Constraint:
        """
        Add a constraint.

        Args:
            label: Unique constraint label
            sense: Comparison between lhs and rhs
            rhs: Right-hand side
            linear: (variable, bias) terms
            quadratic: (u, v, bias) terms

        Returns:
            The stored constraint
        """
        if label in self._labels:
            raise ValueError(f"Constraint label '{label}' already used")
        lin, quad = self._collect(linear, quadratic)
        constraint = Constraint(label, lin, quad, sense, float(rhs))
        self._labels.add(label)
        self.constraints.append(constraint)
        return constraint

    def fix(self, v: int, value: int) -> None:
        """Record a fixed value for a variable."""
        self._check_variable(v)
        if value not in (0, 1):
            raise ValueError(f"Binary variable {v} cannot be fixed to {value}")
        self.fixed[v] = value

    def build(self, reduce: bool = True) -> CqmModel:
        """Create the model, substituting fixed variables when reduce is set."""
        model = CqmModel(self.num_variables, self.linear, self.quadratic, self.offset,
                         self.constraints, self.fixed)
        return reduce_model(model) if reduce else model


def fix_variable(model: CqmModel, v: int, value: int) -> CqmModel:
    """
    Fix one variable without touching the terms; see reduce_model.

    Args:
        model: Source model
        v: Variable index
        value: 0 or 1

    Returns:
        New model with the extra fixed assignment
    """
    if not 0 <= v < model.num_variables:
        raise ValueError(f"Variable {v} out of range")
    if value not in (0, 1):
        raise ValueError(f"Binary variable {v} cannot be fixed to {value}")
    fixed = dict(model.fixed)
    fixed[v] = value
    return CqmModel(model.num_variables, model.linear, model.quadratic, model.offset,
                    model.constraints, fixed)


def reduce_model(model: CqmModel) -> CqmModel:
    """
    Substitute every fixed variable into offsets.

    The objective constant goes to the offset and constraint constants move to
    the right-hand side, so evaluations on assignments that agree with the
    fixed values are unchanged.
    """
    if not model.fixed:
        return model
    linear, quadratic, constant = _substitute(model.linear, model.quadratic, model.fixed)
    constraints = []
    for constraint in model.constraints:
        lin, quad, const = _substitute(constraint.linear, constraint.quadratic, model.fixed)
        constraints.append(Constraint(constraint.label, lin, quad, constraint.sense,
                                      constraint.rhs - const))
    return CqmModel(model.num_variables, linear, quadratic, model.offset + constant,
                    constraints, model.fixed)


def _sample(model: CqmModel, assignment: Sequence[int]) -> Dict[int, int]:
    if len(assignment) != model.num_variables:
        raise LengthMismatch(
            f"Assignment has {len(assignment)} values, model has {model.num_variables} variables"
        )
    return {v: int(assignment[v]) for v in model.cqm.variables}


def evaluate_objective(model: CqmModel, assignment: Sequence[int]) -> float:
    """
    Evaluate the objective on an assignment.

    Args:
        model: CQM
        assignment: 0/1 values, one per variable

    Returns:
        Linear plus quadratic objective value
    """
    sample = _sample(model, assignment)
    if not sample:
        return model.offset
    return float(model.cqm.objective.energy(sample))


def _violation(sense: Sense, lhs: float, rhs: float) -> float:
    activity = lhs - rhs
    if sense is Sense.LE:
        return max(0.0, activity)
    if sense is Sense.GE:
        return max(0.0, -activity)
    return abs(activity)


def check_feasibility(model: CqmModel, assignment: Sequence[int]) -> List[ConstraintReport]:
    """
    Evaluate every constraint on an assignment.

    Args:
        model: CQM
        assignment: 0/1 values, one per variable

    Returns:
        One report per constraint, in model order
    """
    sample = _sample(model, assignment)
    if sample:
        activity = {data.label: float(data.lhs_energy)
                    for data in model.cqm.iter_constraint_data(sample)}
    else:
        activity = {}

    reports = []
    for constraint in model.constraints:
        lhs = activity.get(constraint.label, 0.0)
        violation = _violation(constraint.sense, lhs, constraint.rhs)
        tolerance = FEASIBILITY_TOLERANCE * max(1.0, abs(constraint.rhs))
        reports.append(ConstraintReport(constraint.label, lhs, constraint.sense, constraint.rhs,
                                        violation, violation <= tolerance))
    return reports


def is_feasible(reports: Iterable[ConstraintReport]) -> bool:
    """True when every constraint report is satisfied."""
    return all(report.satisfied for report in reports)


def penalized_energy(model: CqmModel, assignment: Sequence[int], penalty_weight: float) -> float:
    """
    Objective plus weighted squared constraint violations.

    Args:
        model: CQM
        assignment: 0/1 values, one per variable
        penalty_weight: Positive weight applied to the violation sum

    Returns:
        Scalar energy used by penalty-based samplers
    """
    if penalty_weight <= 0:
        raise ValueError(f"Penalty weight must be positive, got {penalty_weight}")
    energy = evaluate_objective(model, assignment)
    penalty = sum(report.violation ** 2 for report in check_feasibility(model, assignment))
    return energy + penalty_weight * penalty


def respects_fixed(model: CqmModel, assignment: Sequence[int]) -> bool:
    """Check that an assignment agrees with the model's fixed variables."""
    if len(assignment) != model.num_variables:
        raise LengthMismatch(
            f"Assignment has {len(assignment)} values, model has {model.num_variables} variables"
        )
    return all(int(assignment[v]) == value for v, value in model.fixed.items())


def default_penalty_weight(model: CqmModel) -> float:
    """Ten times the largest objective coefficient times the variable count."""
    biases = [abs(b) for b in model.linear.values()] + [abs(b) for b in model.quadratic.values()]
    largest = max(biases, default=0.0) or 1.0
    return 10.0 * largest * max(model.num_variables, 1)


def _format_terms(linear: Mapping[int, float], quadratic: Mapping[Tuple[int, int], float]) -> str:
    parts = [f"{bias:+g}*x{v}" for v, bias in sorted(linear.items())]
    parts += [f"{bias:+g}*x{u}*x{v}" for (u, v), bias in sorted(quadratic.items())]
    return ' '.join(parts) if parts else '0'


def dump_model(model: CqmModel) -> str:
    """
    Plain-text listing of a model for debugging.

    One line per objective term, constraint and fixed variable. Not meant to be
    parsed back.
    """
    lines = [f"variables {model.num_variables}", f"offset {model.offset:g}"]
    for v, bias in sorted(model.linear.items()):
        lines.append(f"linear x{v} {bias:g}")
    for (u, v), bias in sorted(model.quadratic.items()):
        lines.append(f"quadratic x{u} x{v} {bias:g}")
    for constraint in model.constraints:
        terms = _format_terms(constraint.linear, constraint.quadratic)
        lines.append(f"constraint {constraint.label}: {terms} {constraint.sense.value} {constraint.rhs:g}")
    for v, value in sorted(model.fixed.items()):
        lines.append(f"fixed x{v} = {value}")
    return '\n'.join(lines) + '\n'
