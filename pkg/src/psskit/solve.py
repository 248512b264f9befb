"""Conic solver adapter.

Problems in the standard form of :class:`~psskit.certify.ConicProblem` are
handed to Clarabel, an interior-point solver for zero, nonnegative and PSD
cones. Linear programs are expressed in the same form (free block plus a
nonnegative slack block) and take the same route.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import clarabel
import numpy as np
import scipy.sparse as sp

from .certify import Block, ConicProblem, svec_to_matrix
from .errors import InputError

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
NEAR_OPTIMAL = "near-optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"

_STATUS = {
    "Solved": OPTIMAL,
    "AlmostSolved": NEAR_OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}


@dataclass
class SolverSettings:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 200
    verbose: bool = False
    # supernodal factorization; much faster than qdldl on dense PSD scaling blocks
    linear_solver: str = "faer"

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolverSettings":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConicSolution:
    primal: np.ndarray
    dual: np.ndarray
    status: str
    objective: float
    gap: float
    iterations: int
    primal_residual: float = float("nan")
    solve_time: float = 0.0
    raw_status: str = ""
    settings: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, NEAR_OPTIMAL)

    def diagnostics(self) -> dict:
        return {
            "status": self.status,
            "raw_status": self.raw_status,
            "objective": self.objective,
            "gap": self.gap,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "solve_time": self.solve_time,
            "near_optimal": self.status == NEAR_OPTIMAL,
            "settings": self.settings,
        }


def _cone_rows(problem: ConicProblem):
    """Stack ``A x = b`` with ``-x[block] in K`` rows in Clarabel's ``Ax + s = b`` form."""
    parts = [problem.A.tocsc()]
    rhs = [problem.b]
    cones = [clarabel.ZeroConeT(problem.n_rows)] if problem.n_rows else []
    n = problem.n_vars
    for blk in problem.blocks:
        if blk.kind == "free":
            continue
        sel = sp.csc_matrix(
            (-np.ones(blk.length), (np.arange(blk.length), blk.offset + np.arange(blk.length))),
            shape=(blk.length, n),
        )
        parts.append(sel)
        rhs.append(np.zeros(blk.length))
        if blk.kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(blk.length))
        elif blk.kind == "psd":
            cones.append(clarabel.PSDTriangleConeT(blk.size))
        else:
            raise InputError(f"unknown cone kind {blk.kind!r} in block {blk.name}")
    return sp.vstack(parts, format="csc"), np.concatenate(rhs), cones


def solve_conic(problem: ConicProblem, settings: SolverSettings | None = None) -> ConicSolution:
    """Solve a standard-form conic problem.

    Infeasible and unbounded problems come back with that status; nothing is
    raised for them here.
    """
    settings = settings or SolverSettings()
    A, b, cones = _cone_rows(problem)
    n = problem.n_vars
    P = sp.csc_matrix((n, n))
    opts = clarabel.DefaultSettings()
    opts.verbose = settings.verbose
    opts.max_iter = settings.max_iter
    opts.tol_feas = settings.tol_feas
    opts.tol_gap_abs = settings.tol_gap
    opts.tol_gap_rel = settings.tol_gap
    opts.direct_solve_method = settings.linear_solver
    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(P, np.asarray(problem.c, float), A, b, cones, opts)
    sol = solver.solve()
    elapsed = time.perf_counter() - t0

    raw = str(sol.status).split(".")[-1]
    status = _STATUS.get(raw, NUMERICAL_FAILURE)
    x = np.array(sol.x)
    z = np.array(sol.z)
    pobj = float(problem.c @ x)
    dobj = float(-b @ z)
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
    resid = float(np.abs(problem.A @ x - problem.b).max()) if problem.n_rows else 0.0
    logger.debug("clarabel %s in %d iterations, obj %.10g", raw, sol.iterations, pobj)
    return ConicSolution(
        primal=x,
        dual=z[: problem.n_rows],
        status=status,
        objective=pobj,
        gap=gap,
        iterations=int(sol.iterations),
        primal_residual=resid,
        solve_time=elapsed,
        raw_status=raw,
        settings=settings.to_dict(),
    )


def lp_problem(objective: Sequence[float], G, h: Sequence[float]) -> ConicProblem:
    """Standard form of ``min c.z s.t. G z >= h``: ``G z - s = h`` with ``s >= 0``."""
    c = np.asarray(objective, dtype=float)
    G = sp.csr_matrix(G)
    h = np.asarray(h, dtype=float)
    m, k = G.shape
    if k != len(c):
        raise InputError(f"LP rows have {k} columns, objective has {len(c)} entries")
    if len(h) != m:
        raise InputError(f"LP has {m} rows but {len(h)} right-hand sides")
    A = sp.hstack([G, -sp.identity(m)], format="csr")
    blocks = [Block("z", "free", k, 0), Block("slack", "nonneg", m, k)]
    return ConicProblem(np.concatenate([c, np.zeros(m)]), A, h, blocks)


def solve_lp(
    objective: Sequence[float],
    G,
    h: Sequence[float],
    settings: SolverSettings | None = None,
) -> ConicSolution:
    """Minimize ``objective . z`` subject to ``G z >= h``.

    The returned primal holds only ``z``; slacks are dropped.
    """
    problem = lp_problem(objective, G, h)
    sol = solve_conic(problem, settings)
    sol.primal = sol.primal[: len(objective)]
    return sol


def psd_violation(problem: ConicProblem, x: np.ndarray) -> float:
    """Largest cone-membership violation across blocks (0 when every block is inside its cone)."""
    worst = 0.0
    for blk in problem.blocks:
        v = np.asarray(x)[blk.offset : blk.offset + blk.length]
        if blk.kind == "nonneg":
            worst = max(worst, float(-v.min(initial=0.0)))
        elif blk.kind == "psd":
            M = svec_to_matrix(v, blk.size)
            scale = max(1.0, float(np.abs(M).max()))
            worst = max(worst, float(-np.linalg.eigvalsh(M).min()) / scale)
    return max(worst, 0.0)
