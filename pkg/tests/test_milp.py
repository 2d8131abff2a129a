import math

import numpy as np
import pytest
from examples import enumerate_milp

from cascadebess.errors import ValidationError
from cascadebess.milp import (
    MilpProblem,
    MilpSolution,
    Sense,
    SolveStatus,
    check_solution,
    solve,
)

BACKENDS = ["highs", "bnb"]


def single_variable() -> MilpProblem:
    problem = MilpProblem("single")
    x = problem.add_variable("x", lower=0.0, upper=1.0)
    problem.set_objective({x: -1.0})
    return problem


def pick_one() -> MilpProblem:
    problem = MilpProblem("pick_one")
    x = problem.add_binary("x")
    y = problem.add_binary("y")
    problem.set_objective({x: -1.0, y: -1.0})
    problem.add_constraint("one", {x: 1.0, y: 1.0}, Sense.LE, 1.0)
    return problem


def knapsack() -> MilpProblem:
    problem = MilpProblem("knapsack")
    items = [problem.add_binary(f"take_{i}") for i in range(3)]
    problem.set_objective(dict(zip(items, [-5.0, -4.0, -3.0])))
    problem.add_constraint("weight", dict(zip(items, [2.0, 3.0, 1.0])), Sense.LE, 4.0)
    return problem


def random_problem(rng: np.random.Generator, n_binary: int, n_continuous: int, n_rows: int) -> MilpProblem:
    """Bounded, always feasible (zero satisfies every row) mixed problem."""
    problem = MilpProblem("random")
    binaries = [problem.add_binary(f"b_{i}") for i in range(n_binary)]
    continuous = [problem.add_variable(f"c_{i}", upper=float(rng.uniform(0.5, 3.0))) for i in range(n_continuous)]
    variables = binaries + continuous
    problem.set_objective({j: float(rng.normal()) for j in variables})
    for r in range(n_rows):
        coefs = {j: float(rng.normal()) for j in variables if rng.random() < 0.6}
        problem.add_constraint(f"row_{r}", coefs, Sense.LE, float(rng.uniform(0.0, 2.0)))
    for k, (b, c) in enumerate(zip(binaries, continuous)):
        problem.add_constraint(f"link_{k}", {c: 1.0, b: -3.0}, Sense.LE, 0.0)
    return problem


@pytest.mark.parametrize("backend", BACKENDS)
def test_continuous(backend):
    solution = solve(single_variable(), backend)
    assert solution.status is SolveStatus.OPTIMAL
    assert solution.assignment["x"] == pytest.approx(1.0)
    assert solution.objective_value == pytest.approx(-1.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_pick_one(backend):
    solution = solve(pick_one(), backend)
    assert solution.objective_value == pytest.approx(-1.0)
    assert solution.assignment["x"] + solution.assignment["y"] == pytest.approx(1.0)
    assert {solution.assignment["x"], solution.assignment["y"]} == {0.0, 1.0}


@pytest.mark.parametrize("backend", BACKENDS)
def test_knapsack(backend):
    solution = solve(knapsack(), backend)
    assert solution.objective_value == pytest.approx(-8.0)
    assert solution.values("take", 3).tolist() == [1.0, 0.0, 1.0]


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible(backend):
    problem = single_variable()
    problem.add_constraint("too_much", {problem.index("x"): 1.0}, Sense.GE, 2.0)
    solution = solve(problem, backend)
    assert solution.status is SolveStatus.INFEASIBLE
    assert not solution.is_optimal
    assert solution.assignment == {}
    assert math.isnan(solution.objective_value)


def test_meta_is_carried():
    problem = MilpProblem("tagged", meta={"start": 4})
    problem.add_variable("x", upper=1.0)
    assert solve(problem).meta == {"start": 4}


def test_duplicate_variable():
    problem = single_variable()
    with pytest.raises(ValidationError):
        problem.add_variable("x")


def test_unknown_backend():
    with pytest.raises(ValidationError):
        solve(single_variable(), backend="cplex")


def test_validate_rejects():
    problem = single_variable()
    problem.add_constraint("ghost", {5: 1.0}, Sense.LE, 1.0)
    with pytest.raises(ValidationError):
        problem.validate()

    problem = MilpProblem()
    problem.add_variable("x", lower=2.0, upper=1.0)
    with pytest.raises(ValidationError):
        solve(problem)

    problem = single_variable()
    problem.add_constraint("nan", {0: 1.0}, Sense.LE, math.nan)
    with pytest.raises(ValidationError):
        problem.validate()


def test_check_solution_clean():
    problem = knapsack()
    assert check_solution(problem, solve(problem)) == []


def test_check_solution_bound():
    problem = single_variable()
    tampered = MilpSolution(SolveStatus.OPTIMAL, -1.5, {"x": 1.5})
    violations = check_solution(problem, tampered)
    assert len(violations) == 1
    assert violations[0].kind == "bound"
    assert violations[0].magnitude == pytest.approx(0.5)


def test_check_solution_integrality():
    problem = pick_one()
    tampered = MilpSolution(SolveStatus.OPTIMAL, -1.0, {"x": 0.5, "y": 0.5})
    kinds = {(v.name, v.kind) for v in check_solution(problem, tampered)}
    assert kinds == {("x", "integrality"), ("y", "integrality")}


def test_check_solution_constraint_and_missing():
    problem = pick_one()
    violations = check_solution(problem, MilpSolution(SolveStatus.OPTIMAL, -2.0, {"x": 1.0, "y": 1.0}))
    assert [(v.name, v.kind, v.magnitude) for v in violations] == [("one", "constraint", 1.0)]
    violations = check_solution(problem, MilpSolution(SolveStatus.OPTIMAL, -1.0, {"x": 1.0}))
    assert [(v.name, v.kind) for v in violations] == [("y", "missing")]


def test_lp_text():
    text = knapsack().to_lp_text()
    lines = text.splitlines()
    assert lines[0] == "\\ Problem: knapsack"
    assert "Minimize" in lines
    assert " obj: - 5 take_0 - 4 take_1 - 3 take_2" in lines
    assert " weight: 2 take_0 + 3 take_1 + 1 take_2 <= 4" in lines
    assert lines[lines.index("Binaries") + 1] == " take_0"
    assert lines[-1] == "End"


def test_lp_text_bounds():
    text = single_variable().to_lp_text()
    assert " 0 <= x <= 1" in text.splitlines()
    assert "Binaries" not in text


def test_deterministic():
    rng = np.random.default_rng(3)
    problem = random_problem(rng, 6, 6, 5)
    for backend in BACKENDS:
        first = solve(problem, backend)
        second = solve(problem, backend)
        assert first.assignment == second.assignment


def test_bnb_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(25):
        problem = random_problem(rng, int(rng.integers(1, 9)), int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        solution = solve(problem, "bnb")
        assert solution.is_optimal
        assert solution.objective_value == pytest.approx(enumerate_milp(problem), abs=1e-6)


def test_backends_agree():
    rng = np.random.default_rng(0)
    for _ in range(40):
        problem = random_problem(rng, int(rng.integers(1, 9)), int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        highs = solve(problem, "highs")
        bnb = solve(problem, "bnb")
        assert highs.is_optimal and bnb.is_optimal
        assert bnb.objective_value == pytest.approx(highs.objective_value, abs=1e-6)
        assert check_solution(problem, highs) == []
        assert check_solution(problem, bnb) == []
