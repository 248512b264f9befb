import numpy as np
import pytest
import scipy.sparse as sp

from psskit.approx import SemialgSet, build_outer_problem
from psskit.certify import Block, ConicProblem, svec_to_matrix
from psskit.errors import InputError
from psskit.fixtures import disk_set
from psskit.moments import Box
from psskit.solve import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    SolverSettings,
    lp_problem,
    psd_violation,
    solve_conic,
    solve_lp,
)


def test_lp_single_bound():
    sol = solve_lp([1.0], [[1.0]], [1.0])
    assert sol.status == OPTIMAL
    assert sol.primal[0] == pytest.approx(1.0, abs=1e-7)


def test_lp_lower_bound_three():
    sol = solve_lp([1.0], np.array([[1.0]]), [3.0])
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


def test_lp_unbounded_is_reported():
    sol = solve_lp([1.0], [[0.0]], [0.0])
    assert sol.status == UNBOUNDED
    assert not sol.ok


def test_lp_infeasible_is_reported():
    # x >= 1 and -x >= 0
    sol = solve_lp([1.0], [[1.0], [-1.0]], [1.0, 0.0])
    assert sol.status == INFEASIBLE


def test_lp_shape_checks():
    with pytest.raises(InputError):
        lp_problem([1.0, 2.0], [[1.0]], [1.0])
    with pytest.raises(InputError):
        lp_problem([1.0], [[1.0]], [1.0, 2.0])


def test_min_trace_with_fixed_corner():
    # 2x2 PSD block, P11 = 1; minimize trace
    blocks = [Block("P", "psd", 2, 0)]
    # svec order: P11, sqrt2*P12, P22
    A = sp.csr_matrix(np.array([[1.0, 0.0, 0.0]]))
    problem = ConicProblem(np.array([1.0, 0.0, 1.0]), A, np.array([1.0]), blocks)
    sol = solve_conic(problem)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-7)
    P = svec_to_matrix(sol.primal, 2)
    np.testing.assert_allclose(P, [[1, 0], [0, 0]], atol=1e-6)


def test_degree_zero_outer_gives_box_volume():
    K = SemialgSet(2, [], Box([-1, 0], [2, 1]))
    problem, _, _ = build_outer_problem(K, 0, rescale="off")
    sol = solve_conic(problem)
    assert sol.objective == pytest.approx(3.0, rel=1e-7)


def test_optimal_solution_meets_equalities_and_cones():
    problem, _, _ = build_outer_problem(disk_set(), 4)
    sol = solve_conic(problem)
    assert sol.status == OPTIMAL
    assert np.abs(problem.A @ sol.primal - problem.b).max() <= 1e-6
    assert psd_violation(problem, sol.primal) <= 1e-6
    assert sol.gap <= 1e-6
    dobj = -problem.b @ sol.dual
    assert abs(sol.objective - dobj) <= 1e-6 * max(1.0, abs(sol.objective))


def test_settings_surface_in_diagnostics():
    s = SolverSettings(tol_feas=1e-7, max_iter=50)
    sol = solve_lp([1.0], [[1.0]], [2.0], s)
    d = sol.diagnostics()
    assert d["settings"]["tol_feas"] == 1e-7 and d["settings"]["max_iter"] == 50
    assert d["near_optimal"] is False


def test_iteration_cap_gives_failure_status():
    problem, _, _ = build_outer_problem(disk_set(), 6)
    sol = solve_conic(problem, SolverSettings(max_iter=2))
    assert not sol.ok
    assert sol.raw_status


def test_settings_from_dict_rejects_unknown():
    with pytest.raises(InputError):
        SolverSettings.from_dict({"tolerance": 1})
    assert SolverSettings.from_dict({"max_iter": 10}).max_iter == 10
