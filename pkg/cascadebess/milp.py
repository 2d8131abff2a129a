import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Literal, Mapping

import numpy as np
from loguru import logger
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from cascadebess.constants import FEASIBILITY_TOL, INTEGRALITY_TOL, ZERO_TOL
from cascadebess.errors import SolverError, ValidationError

Backend = Literal["highs", "bnb"]


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


def var_name(prefix: str, index: int) -> str:
    """Name of the `index`-th variable of a family, e.g. `p_ch_3`."""
    return f"{prefix}_{index}"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lower: float = 0.0
    upper: float = math.inf

    @property
    def is_binary(self) -> bool:
        return self.kind is VarKind.BINARY


@dataclass(frozen=True)
class Constraint:
    """A linear constraint `sum(coefs[j] * x[j]) <sense> rhs` over variable indices."""

    name: str
    coefs: dict[int, float]
    sense: Sense
    rhs: float

    def activity(self, x: np.ndarray) -> float:
        return float(sum(coef * x[j] for j, coef in self.coefs.items()))

    def violation(self, x: np.ndarray) -> float:
        lhs = self.activity(x)
        match self.sense:
            case Sense.LE:
                return max(0.0, lhs - self.rhs)
            case Sense.GE:
                return max(0.0, self.rhs - lhs)
            case Sense.EQ:
                return abs(lhs - self.rhs)


@dataclass(frozen=True)
class Violation:
    """A constraint, bound or integrality requirement an assignment fails."""

    name: str
    kind: Literal["constraint", "bound", "integrality", "missing"]
    magnitude: float


class MilpProblem:
    """
    A mixed-integer linear program in a solver-neutral form.

    The objective is always minimised. Variables are referenced by their position in
    `variables`; `index` translates names.

    Args:
        name (str): Problem name, used in the LP text dump.
        meta (dict, optional): Free-form tags carried over to the solution.
    """

    def __init__(self, name: str = "problem", meta: Mapping[str, Any] | None = None) -> None:
        self.name = name
        self.meta: dict[str, Any] = dict(meta or {})
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self._index: dict[str, int] = {}

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(name='{self.name}', variables={len(self.variables)}, binaries={len(self.binaries)}, constraints={len(self.constraints)})"

    def add_variable(
        self,
        name: str,
        kind: VarKind = VarKind.CONTINUOUS,
        lower: float = 0.0,
        upper: float = math.inf,
    ) -> int:
        if name in self._index:
            raise ValidationError(f"variable '{name}' declared twice")
        if kind is VarKind.BINARY:
            lower, upper = 0.0, 1.0
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        self._index[name] = len(self.variables) - 1
        return self._index[name]

    def add_binary(self, name: str) -> int:
        return self.add_variable(name, VarKind.BINARY)

    def add_constraint(
        self, name: str, coefs: Mapping[int, float], sense: Sense, rhs: float
    ) -> Constraint:
        constraint = Constraint(name, {j: float(v) for j, v in coefs.items() if v != 0.0}, sense, float(rhs))
        self.constraints.append(constraint)
        return constraint

    def set_objective(self, coefs: Mapping[int, float], constant: float = 0.0) -> None:
        self.objective = {j: float(v) for j, v in coefs.items() if v != 0.0}
        self.objective_constant = float(constant)

    def index(self, name: str) -> int:
        return self._index[name]

    def variable(self, name: str) -> Variable:
        return self.variables[self._index[name]]

    @property
    def binaries(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.is_binary]

    def validate(self) -> None:
        """
        Check that the problem is well formed.

        Raises:
            ValidationError: On undeclared variable references, non-finite coefficients,
                inverted bounds or binaries with bounds other than {0, 1}.
        """
        n = len(self.variables)
        for v in self.variables:
            if math.isnan(v.lower) or math.isnan(v.upper) or v.lower > v.upper:
                raise ValidationError(f"variable '{v.name}' has invalid bounds [{v.lower}, {v.upper}]")
            if v.is_binary and (v.lower, v.upper) != (0.0, 1.0):
                raise ValidationError(f"binary variable '{v.name}' must have bounds [0, 1]")

        def check_terms(owner: str, coefs: Mapping[int, float]) -> None:
            for j, coef in coefs.items():
                if not 0 <= j < n:
                    raise ValidationError(f"{owner} references undeclared variable #{j}")
                if not math.isfinite(coef):
                    raise ValidationError(f"{owner} has a non-finite coefficient on '{self.variables[j].name}'")

        check_terms("objective", self.objective)
        for con in self.constraints:
            check_terms(f"constraint '{con.name}'", con.coefs)
            if not math.isfinite(con.rhs):
                raise ValidationError(f"constraint '{con.name}' has a non-finite right-hand side")

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(coef * x[j] for j, coef in self.objective.items())) + self.objective_constant

    def vector(self, assignment: Mapping[str, float]) -> np.ndarray:
        """Order a name -> value mapping as a vector in variable order (missing names are NaN)."""
        return np.array([assignment.get(v.name, math.nan) for v in self.variables], dtype=float)

    def arrays(self):
        """
        Dense objective, sparse constraint matrix and bounds.

        Returns:
            tuple: (c, A, row_lower, row_upper, lower, upper, integrality)
        """
        n = len(self.variables)
        c = np.zeros(n)
        for j, coef in self.objective.items():
            c[j] = coef
        rows, cols, data = [], [], []
        row_lower = np.empty(len(self.constraints))
        row_upper = np.empty(len(self.constraints))
        for i, con in enumerate(self.constraints):
            for j, coef in con.coefs.items():
                rows.append(i)
                cols.append(j)
                data.append(coef)
            row_lower[i] = -np.inf if con.sense is Sense.LE else con.rhs
            row_upper[i] = np.inf if con.sense is Sense.GE else con.rhs
        A = sparse.csr_matrix((data, (rows, cols)), shape=(len(self.constraints), n))
        lower = np.array([v.lower for v in self.variables])
        upper = np.array([v.upper for v in self.variables])
        integrality = np.array([1 if v.is_binary else 0 for v in self.variables])
        return c, A, row_lower, row_upper, lower, upper, integrality

    def to_lp_text(self) -> str:
        """
        Render the problem in CPLEX LP text format for cross-checking with external solvers.
        """

        def fmt(value: float) -> str:
            return f"{value:.12g}"

        def expr(coefs: Mapping[int, float]) -> str:
            if not coefs:
                return "0"
            parts = []
            for j, coef in sorted(coefs.items()):
                sign = "-" if coef < 0 else "+"
                parts.append(f"{sign} {fmt(abs(coef))} {self.variables[j].name}")
            text = " ".join(parts)
            return text[2:] if text.startswith("+ ") else text

        lines = [f"\\ Problem: {self.name}"]
        if self.objective_constant:
            lines.append(f"\\ Objective constant: {fmt(self.objective_constant)}")
        lines += ["Minimize", f" obj: {expr(self.objective)}", "Subject To"]
        for con in self.constraints:
            lines.append(f" {con.name}: {expr(con.coefs)} {con.sense.value} {fmt(con.rhs)}")
        lines.append("Bounds")
        for v in self.variables:
            if v.is_binary:
                continue
            upper = "+inf" if math.isinf(v.upper) else fmt(v.upper)
            lower = "-inf" if math.isinf(v.lower) else fmt(v.lower)
            lines.append(f" {lower} <= {v.name} <= {upper}")
        binaries = [self.variables[j].name for j in self.binaries]
        if binaries:
            lines.append("Binaries")
            lines.extend(f" {name}" for name in binaries)
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class MilpSolution:
    """
    Result of `solve`.

    Attributes:
        status (SolveStatus): Solve outcome.
        objective_value (float): Objective at `assignment` (NaN unless optimal).
        assignment (dict[str, float]): Variable name -> value (empty unless optimal).
        meta (dict): Tags copied from the problem.
    """

    status: SolveStatus
    objective_value: float = math.nan
    assignment: dict[str, float] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(status='{self.status.value}', objective_value={self.objective_value:.6f}, variables={len(self.assignment)})"

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def values(self, prefix: str, n: int) -> np.ndarray:
        """Values of the variable family `prefix_0 .. prefix_{n-1}`."""
        return np.array([self.assignment[var_name(prefix, i)] for i in range(n)], dtype=float)


def _snap_binaries(x: np.ndarray, binaries: list[int]) -> np.ndarray:
    x = x.copy()
    if binaries:
        x[binaries] = np.round(x[binaries])
    return x


def _polish(problem: MilpProblem, x: np.ndarray, arrays) -> np.ndarray:
    """Fix binaries at their rounded values and re-solve the LP for a clean vertex."""
    binaries = problem.binaries
    x = _snap_binaries(x, binaries)
    if not binaries:
        return x
    c, A, row_lower, row_upper, lower, upper, _ = arrays
    lower, upper = lower.copy(), upper.copy()
    lower[binaries] = x[binaries]
    upper[binaries] = x[binaries]
    result = _lp(c, A, row_lower, row_upper, lower, upper)
    if result.status != 0:
        return x
    return _snap_binaries(result.x, binaries)


def _lp(c, A, row_lower, row_upper, lower, upper):
    """Solve the LP relaxation `min c x, row_lower <= A x <= row_upper, lower <= x <= upper`."""
    kwargs: dict[str, Any] = {"bounds": np.column_stack([lower, upper]), "method": "highs"}
    if A.shape[0]:
        eq = row_lower == row_upper
        if eq.any():
            kwargs["A_eq"] = A[np.flatnonzero(eq)]
            kwargs["b_eq"] = row_upper[eq]
        upper_rows = ~eq & np.isfinite(row_upper)
        lower_rows = ~eq & np.isfinite(row_lower)
        blocks, rhs = [], []
        if upper_rows.any():
            blocks.append(A[np.flatnonzero(upper_rows)])
            rhs.append(row_upper[upper_rows])
        if lower_rows.any():
            blocks.append(-A[np.flatnonzero(lower_rows)])
            rhs.append(-row_lower[lower_rows])
        if blocks:
            kwargs["A_ub"] = sparse.vstack(blocks).tocsr()
            kwargs["b_ub"] = np.concatenate(rhs)
    return linprog(c, **kwargs)


def _solve_highs(problem: MilpProblem, arrays) -> tuple[SolveStatus, np.ndarray | None]:
    c, A, row_lower, row_upper, lower, upper, integrality = arrays
    constraints = [LinearConstraint(A, row_lower, row_upper)] if A.shape[0] else None
    result = milp(
        c,
        integrality=integrality,
        bounds=Bounds(lower, upper),
        constraints=constraints,
        options={"mip_rel_gap": 0.0, "presolve": True},
    )
    match result.status:
        case 0:
            return SolveStatus.OPTIMAL, _polish(problem, result.x, arrays)
        case 2:
            return SolveStatus.INFEASIBLE, None
        case 3:
            return SolveStatus.UNBOUNDED, None
        case _:
            raise SolverError(f"HiGHS failed on '{problem.name}': {result.message}")


def _solve_bnb(
    problem: MilpProblem, arrays, node_limit: int = 200_000
) -> tuple[SolveStatus, np.ndarray | None]:
    """
    Depth-first branch-and-bound over LP relaxations.

    Branches on the lowest-index fractional binary and explores the 0 branch before the 1
    branch, so the search path (and with it the returned optimum) is deterministic.
    """
    c, A, row_lower, row_upper, lower, upper, _ = arrays
    binaries = problem.binaries
    best_value = math.inf
    best_x: np.ndarray | None = None
    stack = [(lower.copy(), upper.copy())]
    nodes = 0

    while stack:
        node_lower, node_upper = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise SolverError(f"branch-and-bound node limit ({node_limit}) reached on '{problem.name}'")
        result = _lp(c, A, row_lower, row_upper, node_lower, node_upper)
        if result.status == 2:
            continue
        if result.status == 3:
            return SolveStatus.UNBOUNDED, None
        if result.status != 0:
            raise SolverError(f"LP relaxation failed on '{problem.name}': {result.message}")
        if result.fun >= best_value - ZERO_TOL:
            continue

        x = result.x
        fractional = [j for j in binaries if abs(x[j] - round(x[j])) > INTEGRALITY_TOL]
        if not fractional:
            best_value, best_x = result.fun, x
            continue

        j = fractional[0]
        one_lower, one_upper = node_lower.copy(), node_upper.copy()
        one_lower[j] = 1.0
        zero_lower, zero_upper = node_lower.copy(), node_upper.copy()
        zero_upper[j] = 0.0
        stack.append((one_lower, one_upper))
        stack.append((zero_lower, zero_upper))

    logger.trace("branch-and-bound on {} explored {} nodes", problem.name, nodes)
    if best_x is None:
        return SolveStatus.INFEASIBLE, None
    return SolveStatus.OPTIMAL, _polish(problem, best_x, arrays)


def solve(problem: MilpProblem, backend: Backend = "highs") -> MilpSolution:
    """
    Solve a MILP to proven optimality.

    Args:
        problem (MilpProblem): The problem to solve (minimisation).
        backend (str, optional): `highs` for the HiGHS MILP solver shipped with scipy,
            `bnb` for the built-in branch-and-bound over LP relaxations.

    Raises:
        ValidationError: If the problem is malformed or the backend is unknown.
        SolverError: On numeric breakdown.
    """
    problem.validate()
    arrays = problem.arrays()
    match backend:
        case "highs":
            status, x = _solve_highs(problem, arrays)
        case "bnb":
            status, x = _solve_bnb(problem, arrays)
        case _:
            raise ValidationError(f"unknown solver backend '{backend}'")

    if status is not SolveStatus.OPTIMAL or x is None:
        return MilpSolution(status=status, meta=dict(problem.meta))
    assignment = {v.name: float(x[j]) for j, v in enumerate(problem.variables)}
    return MilpSolution(
        status=SolveStatus.OPTIMAL,
        objective_value=problem.objective_value(x),
        assignment=assignment,
        meta=dict(problem.meta),
    )


def check_solution(
    problem: MilpProblem, solution: MilpSolution, tol: float = FEASIBILITY_TOL
) -> list[Violation]:
    """
    Re-evaluate every constraint, bound and integrality requirement against an assignment.

    Returns:
        list[Violation]: Everything violated by more than `tol` (empty on success).
    """
    x = problem.vector(solution.assignment)
    violations: list[Violation] = []
    for j, v in enumerate(problem.variables):
        if math.isnan(x[j]):
            violations.append(Violation(v.name, "missing", math.inf))
            continue
        excess = max(v.lower - x[j], x[j] - v.upper, 0.0)
        if excess > tol:
            violations.append(Violation(v.name, "bound", float(excess)))
        if v.is_binary:
            gap = abs(x[j] - round(x[j]))
            if gap > tol:
                violations.append(Violation(v.name, "integrality", float(gap)))
    if any(v.kind == "missing" for v in violations):
        return violations
    for con in problem.constraints:
        excess = con.violation(x)
        if excess > tol:
            violations.append(Violation(con.name, "constraint", excess))
    return violations


__all__ = [
    "VarKind",
    "Sense",
    "SolveStatus",
    "Variable",
    "Constraint",
    "Violation",
    "MilpProblem",
    "MilpSolution",
    "var_name",
    "solve",
    "check_solution",
]
