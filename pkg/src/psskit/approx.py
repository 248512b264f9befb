"""Outer and inner polynomial superlevel-set approximations.

All four computations minimize the integral of ``p`` over the box ``B``:

* :func:`outer_pss` -- ``p >= 0`` on ``B`` and ``p >= 1`` on ``K``, so ``{p >= 1}``
  contains ``K``.
* :func:`inner_pss` -- ``p >= 1`` on each ``{g_j <= 0}`` inside ``B``, so
  ``{p <= 1}`` lies inside ``K``.
* :func:`fit_points` -- linear program for a finite point cloud, with
  positivity on ``B`` enforced on a grid only.
* :func:`bounding_box` -- coordinate extremes of ``K`` by SOS relaxation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .certify import (
    AffineTarget,
    ConicProblem,
    assemble,
    certificate_residual,
    extract_certificates,
    half_degree,
    sos_constraint,
)
from .errors import InputError, SolverError, UnboundedSetError
from .moments import Box, l1_norm, objective_vector
from .poly import MultiPoly, _basis, monomial_matrix
from .solve import UNBOUNDED, ConicSolution, SolverSettings, solve_conic, solve_lp

logger = logging.getLogger(__name__)

OUTER, INNER, FIT = "outer", "inner", "fit"


@dataclass(frozen=True)
class SemialgSet:
    """``{x : g_i(x) >= 0 for all i}``, optionally paired with a bounding box."""

    dim: int
    generators: tuple[MultiPoly, ...]
    box: Box | None = None
    name: str = ""

    def __init__(self, dim, generators=(), box=None, name=""):
        gens = tuple(generators)
        for i, g in enumerate(gens):
            if g.dim != dim:
                raise InputError(f"generator {i} has dimension {g.dim}, set has {dim}")
            if g.degree() == 0:
                raise InputError(f"generator {i} is constant; constant generators are not allowed")
        if box is not None and box.dim != dim:
            raise InputError(f"box dimension {box.dim} does not match set dimension {dim}")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "name", name)

    @property
    def m(self) -> int:
        return len(self.generators)

    def require_box(self) -> Box:
        if self.box is None:
            raise InputError("this computation needs a bounding box; run bounding_box first")
        return self.box

    def with_box(self, box: Box) -> "SemialgSet":
        return SemialgSet(self.dim, self.generators, box, self.name)

    def max_half_degree(self) -> int:
        return max((half_degree(g) for g in self.generators), default=0)

    def contains(self, X, tol: float = 0.0) -> np.ndarray:
        """Membership of each row of ``X`` (closed set, ``g_i >= -tol``)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        inside = np.ones(X.shape[0], dtype=bool)
        for g in self.generators:
            inside &= g(X) >= -tol
        return inside

    def violation(self, X) -> np.ndarray:
        """``max_i(-g_i(x))`` per row; positive where the point is outside."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.generators:
            return np.full(X.shape[0], -np.inf)
        return np.max([-g(X) for g in self.generators], axis=0)

    def to_json(self) -> dict:
        out = {"dim": self.dim, "generators": [g.to_json() for g in self.generators]}
        if self.box is not None:
            out["box"] = self.box.to_json()
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, obj) -> "SemialgSet":
        try:
            dim = int(obj["dim"])
            gens = [MultiPoly.from_json(g) for g in obj.get("generators", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed set JSON: {exc}") from exc
        box = Box.from_json(obj["box"]) if obj.get("box") else None
        return cls(dim, gens, box, obj.get("name", ""))


@dataclass
class PssResult:
    p: MultiPoly
    w: float
    kind: str
    degree: int
    order: int | None
    box: Box
    certified: bool
    rescaled: bool = False
    residual: float = float("nan")
    certificates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def superlevel(self, X) -> np.ndarray:
        """Membership in ``U(p) = {x in B : p(x) >= 1}``."""
        X = np.atleast_2d(X)
        return self.box.contains(X) & (self.p(X) >= 1.0)

    def sublevel(self, X) -> np.ndarray:
        """Membership in ``V(p) = {x in B : p(x) <= 1}``."""
        X = np.atleast_2d(X)
        return self.box.contains(X) & (self.p(X) <= 1.0)

    @property
    def near_optimal(self) -> bool:
        return self.diagnostics.get("status") == "near-optimal"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "degree": self.degree,
            "order": self.order,
            "w": self.w,
            "box": self.box.to_json(),
            "certified": self.certified,
            "rescaled": self.rescaled,
            "certificate_residual": self.residual,
            "polynomial": self.p.to_json(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json(cls, obj) -> "PssResult":
        try:
            return cls(
                p=MultiPoly.from_json(obj["polynomial"]),
                w=float(obj["w"]),
                kind=obj["kind"],
                degree=int(obj["degree"]),
                order=obj.get("order"),
                box=Box.from_json(obj["box"]),
                certified=bool(obj.get("certified", False)),
                rescaled=bool(obj.get("rescaled", False)),
                residual=float(obj.get("certificate_residual", float("nan"))),
                diagnostics=obj.get("diagnostics", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed result JSON: {exc}") from exc


# -- helpers ------------------------------------------------------------------


class _Frame:
    """Working coordinates: identity, or the affine map of ``B`` onto ``[-1, 1]^n``."""

    def __init__(self, box: Box, rescale: bool):
        self.box = box
        self.rescale = rescale
        n = box.dim
        if rescale:
            self.c, self.h = box.center, box.half_width
            self.work_box = Box.symmetric(n)
        else:
            self.c, self.h = np.zeros(n), np.ones(n)
            self.work_box = box

    @property
    def jacobian(self) -> float:
        return float(np.prod(self.h))

    def to_work(self, g: MultiPoly) -> MultiPoly:
        return g.affine_substitute(self.c, self.h) if self.rescale else g

    def to_original(self, q: MultiPoly) -> MultiPoly:
        return q.affine_substitute(-self.c / self.h, 1.0 / self.h) if self.rescale else q

    def points_to_work(self, X: np.ndarray) -> np.ndarray:
        return (X - self.c) / self.h


def _resolve_rescale(rescale, n: int) -> bool:
    if rescale is None or rescale == "auto":
        # unscaled monomials on a box like [1.5, 4] amplify solver tolerance
        # into visible negativity of p near the far corner, even in 1-D
        return True
    if isinstance(rescale, str):
        if rescale not in ("on", "off"):
            raise InputError(f"rescale must be on/off/auto, got {rescale!r}")
        return rescale == "on"
    return bool(rescale)


def default_order(d: int, generators: Sequence[MultiPoly] = ()) -> int:
    """``ceil(d/2)``, raised to what the generators (and box quadratics) need."""
    return max(math.ceil(d / 2), 1, max((half_degree(g) for g in generators), default=0))


def _check_degree(d: int) -> None:
    if int(d) != d or d < 0:
        raise InputError(f"degree must be a nonnegative integer, got {d}")


def _solve_or_raise(problem: ConicProblem, settings: SolverSettings | None, what: str) -> ConicSolution:
    sol = solve_conic(problem, settings)
    if not sol.ok:
        raise SolverError(f"{what}: solver returned {sol.status} ({sol.raw_status})", sol.diagnostics())
    if sol.status != "optimal":
        logger.warning("%s: solver converged only to loose tolerance (near-optimal)", what)
    return sol


def _sos_result(kind, problem, sol, frame, d, r, extra=None) -> PssResult:
    z = problem.free_values(sol.primal)
    q = MultiPoly.from_coefficients(frame.box.dim, z, d)
    p = frame.to_original(q)
    residual = certificate_residual(problem, sol.primal)
    diag = sol.diagnostics()
    diag.update(
        n_vars=problem.n_vars,
        n_rows=problem.n_rows,
        blocks=[(b.name, b.size) for b in problem.blocks if b.kind == "psd"],
        l1_norm_original=l1_norm(p, frame.box),
        **(extra or {}),
    )
    certs = {
        tag: [G.gram.tolist() for G in grams]
        for tag, grams in extract_certificates(problem, sol.primal).items()
    }
    return PssResult(
        p=p,
        w=sol.objective * frame.jacobian,
        kind=kind,
        degree=d,
        order=r,
        box=frame.box,
        certified=True,
        rescaled=frame.rescale,
        residual=residual,
        certificates=certs,
        diagnostics=diag,
    )


# -- the four computations -----------------------------------------------------


def build_outer_problem(K: SemialgSet, d: int, r: int | None = None, rescale="auto", include_box=False):
    """Assemble the outer problem; returns ``(problem, frame, r)``."""
    _check_degree(d)
    B = K.require_box()
    frame = _Frame(B, _resolve_rescale(rescale, K.dim))
    box_gens = frame.work_box.quadratics()
    set_gens = [frame.to_work(g) for g in K.generators]
    if not set_gens:
        set_gens = list(box_gens)
    elif include_box:
        set_gens = set_gens + list(box_gens)
    r = default_order(d, set_gens) if r is None else int(r)
    n = K.dim
    constraints = [
        sos_constraint(AffineTarget.coefficients_of(n, d), box_gens, r, "B"),
        sos_constraint(AffineTarget.coefficients_of(n, d, offset=1.0), set_gens, r, "K"),
    ]
    problem = assemble(objective_vector(frame.work_box, n, d), constraints)
    return problem, frame, r


def outer_pss(
    K: SemialgSet,
    d: int,
    r: int | None = None,
    *,
    rescale="auto",
    include_box: bool = False,
    settings: SolverSettings | None = None,
) -> PssResult:
    """Minimum-integral polynomial ``p`` of degree ``d`` with ``{p >= 1} ⊇ K``.

    Parameters
    ----------
    K : SemialgSet
        Set with a bounding box.
    d : int
        Degree of ``p``.
    r : int, optional
        Relaxation order; defaults to ``ceil(d/2)`` raised to the generators' needs.
    rescale : {"auto", "on", "off"} or bool
        Solve in coordinates where ``B`` is ``[-1, 1]^n`` (auto: always).
    include_box : bool
        Also certify ``p >= 1`` using the box quadratics as extra generators,
        i.e. on ``K ∩ B`` rather than on ``K``.
    """
    problem, frame, r = build_outer_problem(K, d, r, rescale, include_box)
    sol = _solve_or_raise(problem, settings, f"outer PSS (d={d}, r={r})")
    return _sos_result(OUTER, problem, sol, frame, d, r, {"include_box": include_box})


def build_inner_problem(K: SemialgSet, d: int, r: int | None = None, rescale="auto"):
    """Assemble the inner problem; returns ``(problem, frame, r)``."""
    _check_degree(d)
    B = K.require_box()
    frame = _Frame(B, _resolve_rescale(rescale, K.dim))
    box_gens = frame.work_box.quadratics()
    pieces = [[-frame.to_work(g)] + box_gens for g in K.generators]
    r = default_order(d, [g for piece in pieces for g in piece]) if r is None else int(r)
    n = K.dim
    constraints = [sos_constraint(AffineTarget.coefficients_of(n, d), box_gens, r, "B")]
    for j, gens in enumerate(pieces, start=1):
        constraints.append(
            sos_constraint(AffineTarget.coefficients_of(n, d, offset=1.0), gens, r, f"K{j}")
        )
    problem = assemble(objective_vector(frame.work_box, n, d), constraints)
    return problem, frame, r


def inner_pss(
    K: SemialgSet,
    d: int,
    r: int | None = None,
    *,
    rescale="auto",
    settings: SolverSettings | None = None,
) -> PssResult:
    """Polynomial ``p`` of degree ``d`` with ``{x in B : p(x) <= 1} ⊆ K``.

    ``p >= 1`` is certified on each ``{g_j <= 0} ∩ B``; the strict inequality
    of the complement is relaxed to the closed one.
    """
    problem, frame, r = build_inner_problem(K, d, r, rescale)
    sol = _solve_or_raise(problem, settings, f"inner PSS (d={d}, r={r})")
    return _sos_result(INNER, problem, sol, frame, d, r)


def bounding_box(
    generators: Sequence[MultiPoly],
    n: int,
    r: int | None = None,
    *,
    settings: SolverSettings | None = None,
    margin: float = 1e-7,
) -> Box:
    """Outer bounding box of ``{g_i >= 0}`` from SOS lower/upper bounds on each ``x_j``.

    For the lower end, the largest ``y`` such that ``x_j - y`` has a certificate
    on the set; the upper end is symmetric. Raises :class:`UnboundedSetError`
    when a relaxation is unbounded.

    Each end is pushed outward by ``margin`` times the box width, so that
    solver-tolerance error cannot cut off boundary points of the set.
    """
    gens = list(generators)
    if not gens:
        raise UnboundedSetError("no generators: the set is all of R^n")
    # one order above the generators' minimum; the minimum alone is often loose
    r = max(half_degree(g) for g in gens) + 1 if r is None else int(r)
    lo, hi = [], []
    for j in range(n):
        xj = MultiPoly.variable(n, j)
        one = MultiPoly.constant(n, 1.0)
        ends = []
        for sign, label in ((1.0, "lower"), (-1.0, "upper")):
            # sign * (x_j - y) >= 0 on K; maximize sign * y
            target = AffineTarget(n, ((0, one.scale(-sign)),), xj.scale(sign))
            con = sos_constraint(target, gens, r, f"x{j + 1}.{label}")
            problem = assemble([-sign], [con])
            sol = solve_conic(problem, settings)
            if sol.status == UNBOUNDED or not sol.ok:
                raise UnboundedSetError(
                    f"{label} bound of x{j + 1}: relaxation {sol.status}; set may be unbounded",
                    sol.diagnostics(),
                )
            ends.append(float(problem.free_values(sol.primal)[0]))
        pad = margin * max(ends[1] - ends[0], 1.0)
        lo.append(ends[0] - pad)
        hi.append(ends[1] + pad)
    return Box(lo, hi)


def grid_points(box: Box, per_axis: int) -> np.ndarray:
    """Row-major regular grid (last coordinate varies fastest), endpoints included."""
    if per_axis < 2:
        raise InputError(f"grid needs at least 2 points per axis, got {per_axis}")
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.a, box.b)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def fit_points(
    points,
    B: Box,
    d: int,
    grid: int = 50,
    *,
    rescale="auto",
    settings: SolverSettings | None = None,
) -> PssResult:
    """Linear-programming PSS through a finite point cloud.

    Minimizes the integral of ``p`` subject to ``p >= 1`` at every point and
    ``p >= 0`` at the ``grid**n`` grid nodes of ``B``. The points are contained
    in ``{p >= 1}`` exactly; nonnegativity between grid nodes is not guaranteed.
    """
    _check_degree(d)
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[1] != B.dim:
        raise InputError(f"points have dimension {X.shape[1]}, box has {B.dim}")
    outside = ~B.contains(X)
    if outside.any():
        raise InputError(f"{int(outside.sum())} points lie outside the box, e.g. {X[outside][0]}")
    frame = _Frame(B, _resolve_rescale(rescale, B.dim))
    basis = _basis(B.dim, d)
    Z = grid_points(frame.work_box, grid)
    Phi_pts = monomial_matrix(frame.points_to_work(X), basis)
    Phi_grid = monomial_matrix(Z, basis)
    G = np.vstack([Phi_pts, Phi_grid])
    h = np.concatenate([np.ones(len(X)), np.zeros(len(Z))])
    sol = solve_lp(objective_vector(frame.work_box, B.dim, d), G, h, settings)
    if not sol.ok:
        raise SolverError(f"point fit (d={d}): solver returned {sol.status}", sol.diagnostics())
    q = MultiPoly.from_coefficients(B.dim, sol.primal, d)
    p = frame.to_original(q)
    # interior-point solutions sit a hair below 1 at active points; a positive
    # rescale restores p(x_i) >= 1 exactly and keeps the sign on the grid
    lift = 1.0
    for _ in range(4):
        low = float(np.min(p(X)))
        if low >= 1.0 or low <= 0.0:
            break
        step = (1.0 + 1e-12) / low
        p, lift = p.scale(step), lift * step
    diag = sol.diagnostics()
    diag.update(n_points=len(X), grid_per_axis=grid, lift=lift, l1_norm_original=l1_norm(p, B))
    return PssResult(
        p=p,
        w=sol.objective * frame.jacobian * lift,
        kind=FIT,
        degree=d,
        order=None,
        box=B,
        certified=False,
        rescaled=frame.rescale,
        diagnostics=diag,
    )


# -- verification ---------------------------------------------------------------


@dataclass
class ContainmentReport:
    kind: str
    grid_per_axis: int | None
    n_grid: int
    min_p_on_set: float = float("nan")
    min_p_on_box: float = float("nan")
    max_violation: float = float("nan")
    vol_level_set: float = float("nan")
    vol_level_set_se: float = float("nan")
    vol_set: float = float("nan")
    vol_set_se: float = float("nan")
    w: float = float("nan")
    tol: float = 1e-6
    passed: bool = False

    def to_json(self) -> dict:
        return dict(self.__dict__)


def default_grid(n: int) -> int | None:
    return 400 if n <= 2 else 60 if n == 3 else None


def _mc_fraction(mask: np.ndarray, vol: float) -> tuple[float, float]:
    frac = float(mask.mean())
    return frac * vol, vol * math.sqrt(max(frac * (1 - frac), 0.0) / len(mask))


def containment_check(
    result: PssResult,
    K: SemialgSet | None = None,
    grid_per_axis: int | None = None,
    *,
    points=None,
    mc_samples: int = 1_000_000,
    seed: int = 0,
    tol: float = 1e-6,
) -> ContainmentReport:
    """Grid and Monte-Carlo check of the containment a result promises.

    Outer: minimum of ``p`` over grid nodes in ``K`` (should be ``>= 1 - tol``)
    and over all nodes (``>= -tol``). Inner: largest generator violation over
    nodes in ``{p <= 1}`` (``<= tol``). Fit: minimum of ``p`` at ``points``.
    Volumes of the level set and of ``K`` are estimated from ``mc_samples``
    uniform points in ``B``.
    """
    B = result.box
    n = B.dim
    if grid_per_axis is None:
        grid_per_axis = default_grid(n)
    rng = np.random.default_rng(seed)
    if grid_per_axis is None:
        nodes = rng.uniform(B.lower, B.upper, size=(mc_samples, n))
    else:
        nodes = grid_points(B, grid_per_axis)
    pv = result.p(nodes)
    rep = ContainmentReport(result.kind, grid_per_axis, len(nodes), w=result.w, tol=tol)
    rep.min_p_on_box = float(pv.min())

    mc = rng.uniform(B.lower, B.upper, size=(mc_samples, n))
    p_mc = result.p(mc)
    vol_B = B.volume()
    if result.kind == INNER:
        rep.vol_level_set, rep.vol_level_set_se = _mc_fraction(p_mc <= 1.0, vol_B)
    else:
        rep.vol_level_set, rep.vol_level_set_se = _mc_fraction(p_mc >= 1.0, vol_B)
    if K is not None:
        rep.vol_set, rep.vol_set_se = _mc_fraction(K.contains(mc), vol_B)

    if result.kind == OUTER:
        if K is None:
            raise InputError("outer containment check needs the set K")
        inK = K.contains(nodes)
        rep.min_p_on_set = float(pv[inK].min()) if inK.any() else float("inf")
        rep.passed = rep.min_p_on_set >= 1 - tol and rep.min_p_on_box >= -tol
    elif result.kind == INNER:
        if K is None:
            raise InputError("inner containment check needs the set K")
        inV = pv <= 1.0
        rep.max_violation = float(K.violation(nodes[inV]).max()) if inV.any() else -float("inf")
        rep.passed = rep.max_violation <= tol and rep.min_p_on_box >= -tol
    else:
        if points is None:
            raise InputError("fit containment check needs the fitted points")
        rep.min_p_on_set = float(result.p(np.atleast_2d(points)).min())
        rep.passed = rep.min_p_on_set >= 1 - tol
    return rep
