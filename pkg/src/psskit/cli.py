"""Command-line front end.

Every run writes its artifacts plus ``manifest.json`` into ``--out``. Exit
codes: 0 ok, 2 input error, 3 solver or sampling failure, 4 a containment or
positivity check failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .approx import (
    OUTER,
    PssResult,
    bounding_box,
    build_inner_problem,
    build_outer_problem,
    containment_check,
    default_grid,
    fit_points,
    grid_points,
    inner_pss,
    outer_pss,
)
from .errors import CheckFailure, InputError, PsskitError
from .fixtures import load_points, load_set
from .moments import Box
from .poly import MultiPoly
from .sampler import PolyDensity, uniform_sample
from .solve import SolverSettings

logger = logging.getLogger("psskit")

TASKS = ("bbox", "outer", "inner", "fit", "sample", "eval-grid")


@dataclass
class ProblemSpec:
    task: str
    set: str | None = None
    points: str | None = None
    poly: str | None = None
    box: list | None = None
    degree: int | None = None
    order: int | None = None
    grid: int | None = None
    fit_grid: int = 50
    seed: int = 0
    n_samples: int = 1000
    mc_samples: int = 1_000_000
    rescale: str = "auto"
    include_box: bool = False
    check: bool = True
    export_problem: bool = False
    solver: dict = field(default_factory=dict)
    out: str = "psskit-out"

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown spec keys: {sorted(unknown)}")
        if "task" not in d:
            raise InputError("spec needs a task")
        return cls(**d)

    def validate(self) -> None:
        if self.task not in TASKS:
            raise InputError(f"task must be one of {TASKS}, got {self.task!r}")
        needs = {
            "bbox": ["set"],
            "outer": ["set", "degree"],
            "inner": ["set", "degree"],
            "fit": ["points", "degree"],
            "sample": ["set"],
            "eval-grid": ["poly"],
        }[self.task]
        missing = [k for k in needs if getattr(self, k) is None]
        if missing:
            raise InputError(f"task {self.task} needs --{', --'.join(m.replace('_', '-') for m in missing)}")
        if self.task == "sample" and self.poly is None and self.degree is None:
            raise InputError("task sample needs --poly (an outer result) or --degree")
        for name in ("degree", "order"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 0):
                raise InputError(f"{name} must be a nonnegative integer, got {v}")
        if self.grid is not None and self.grid < 2:
            raise InputError(f"grid needs at least 2 points per axis, got {self.grid}")
        if self.n_samples < 0 or self.seed < 0:
            raise InputError("n-samples and seed must be nonnegative")
        if self.rescale not in ("on", "off", "auto"):
            raise InputError(f"rescale must be on, off or auto, got {self.rescale!r}")
        SolverSettings.from_dict(self.solver)


# -- file formats ---------------------------------------------------------------


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def eval_grid(p: MultiPoly, box: Box, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major grid nodes and ``p`` at them."""
    X = grid_points(box, resolution)
    return X, p(X)


def write_grid_csv(path: Path, p: MultiPoly, box: Box, resolution: int) -> None:
    """Columns ``x1..xn, p, indicator`` with ``indicator = 1{p >= 1}``."""
    X, pv = eval_grid(p, box, resolution)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(box.dim)] + ["p", "indicator"])
        for row, v in zip(X, pv):
            w.writerow([repr(float(c)) for c in row] + [repr(float(v)), int(v >= 1.0)])


def write_samples_csv(path: Path, X: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(X.shape[1])])
        for row in X:
            w.writerow([repr(float(c)) for c in row])


def _stable_result(res: PssResult) -> dict:
    """Result JSON without wall-clock fields, so repeated runs are byte-identical."""
    obj = res.to_json()
    diag = dict(obj["diagnostics"])
    diag.pop("solve_time", None)
    obj["diagnostics"] = diag
    return obj


def _parse_box(spec_box) -> Box | None:
    if spec_box is None:
        return None
    if isinstance(spec_box, str):
        try:
            lo, hi = spec_box.split(":")
            return Box([float(v) for v in lo.split(",")], [float(v) for v in hi.split(",")])
        except ValueError:
            raise InputError(f"box must look like 'a1,a2:b1,b2', got {spec_box!r}") from None
    if isinstance(spec_box, dict):
        return Box.from_json(spec_box)
    lo, hi = spec_box
    return Box(lo, hi)


def _load_result(path: str) -> PssResult:
    try:
        return PssResult.from_json(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read result file {path}: {exc}") from None


# -- runner ---------------------------------------------------------------------


class _Run:
    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.out = Path(spec.out)
        self.timings: dict[str, float] = {}
        self.artifacts: list[str] = []
        self.settings = SolverSettings.from_dict(spec.solver)
        self.check_failed = False

    def timed(self, name, fn, *args, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kw)
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def emit(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def check(self, res: PssResult, K, points=None):
        if not self.spec.check:
            return
        grid = self.spec.grid if self.spec.grid is not None else default_grid(res.box.dim)
        rep = self.timed(
            "containment_check",
            containment_check,
            res,
            K,
            grid,
            points=points,
            mc_samples=self.spec.mc_samples,
            seed=self.spec.seed,
        )
        report = rep.to_json()
        report["near_optimal"] = res.near_optimal
        write_json(self.emit("report.json"), report)
        if not rep.passed:
            self.check_failed = True

    def grid_csv(self, res: PssResult):
        grid = self.spec.grid if self.spec.grid is not None else default_grid(res.box.dim)
        if grid is not None:
            self.timed("grid_csv", write_grid_csv, self.emit("grid.csv"), res.p, res.box, grid)

    def run(self):
        s = self.spec
        getattr(self, "task_" + s.task.replace("-", "_"))()

    def task_bbox(self):
        K = load_set(self.spec.set)
        box = self.timed("solve", bounding_box, K.generators, K.dim, self.spec.order, settings=self.settings)
        write_json(self.emit("box.json"), box.to_json())

    def _sos(self, kind):
        s = self.spec
        K = load_set(s.set)
        box = _parse_box(s.box)
        if box is not None:
            K = K.with_box(box)
        if s.export_problem:
            if kind == "outer":
                problem, _, _ = build_outer_problem(K, s.degree, s.order, s.rescale, s.include_box)
            else:
                problem, _, _ = build_inner_problem(K, s.degree, s.order, s.rescale)
            self.emit("problem.txt").write_text(problem.to_text())
        if kind == "outer":
            res = self.timed(
                "solve", outer_pss, K, s.degree, s.order,
                rescale=s.rescale, include_box=s.include_box, settings=self.settings,
            )
        else:
            res = self.timed("solve", inner_pss, K, s.degree, s.order, rescale=s.rescale, settings=self.settings)
        write_json(self.emit("result.json"), _stable_result(res))
        self.grid_csv(res)
        self.check(res, K)
        return K, res

    def task_outer(self):
        self._sos("outer")

    def task_inner(self):
        self._sos("inner")

    def task_fit(self):
        s = self.spec
        X = load_points(s.points)
        box = _parse_box(s.box)
        if box is None:
            lo, hi = X.min(axis=0), X.max(axis=0)
            pad = 0.1 * np.where(hi > lo, hi - lo, 1.0)
            box = Box(lo - pad, hi + pad)
        res = self.timed("solve", fit_points, X, box, s.degree, s.fit_grid, rescale=s.rescale, settings=self.settings)
        write_json(self.emit("result.json"), _stable_result(res))
        self.grid_csv(res)
        self.check(res, None, points=X)

    def task_sample(self):
        s = self.spec
        K = load_set(s.set)
        if s.poly is not None:
            res = _load_result(s.poly)
        else:
            res = self.timed(
                "solve", outer_pss, K, s.degree, s.order,
                rescale=s.rescale, include_box=s.include_box, settings=self.settings,
            )
            write_json(self.emit("result.json"), _stable_result(res))
        if res.kind != OUTER:
            raise InputError(f"sampling needs an outer result, got {res.kind!r}")
        pd = PolyDensity.from_result(res)
        batch = self.timed("sample", uniform_sample, K, pd, s.n_samples, s.seed)
        write_samples_csv(self.emit("samples.csv"), batch.samples)
        report = batch.report()
        # acceptance-rate estimate from a Monte-Carlo volume of K
        rng = np.random.default_rng(s.seed)
        B = res.box
        U = rng.uniform(B.lower, B.upper, size=(s.mc_samples, B.dim))
        frac = float(K.contains(U).mean())
        vol = frac * B.volume()
        vol_se = B.volume() * float(np.sqrt(frac * (1 - frac) / s.mc_samples))
        report.update(
            mass=pd.mass,
            gamma_estimate=vol / pd.mass,
            gamma_estimate_se=vol_se / pd.mass,
            vol_set_estimate=vol,
            degree=res.degree,
            order=res.order,
            near_optimal=res.near_optimal,
        )
        write_json(self.emit("report.json"), report)

    def task_eval_grid(self):
        s = self.spec
        res = _load_result(s.poly)
        box = _parse_box(s.box) or res.box
        grid = s.grid if s.grid is not None else (default_grid(box.dim) or 20)
        self.timed("grid_csv", write_grid_csv, self.emit("grid.csv"), res.p, box, grid)


def _versions() -> dict:
    import clarabel
    import scipy

    return {
        "psskit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "clarabel": getattr(clarabel, "__version__", "unknown"),
    }


def _inputs_hash(spec: ProblemSpec) -> str:
    h = hashlib.sha256()
    d = asdict(spec)
    d.pop("out")
    h.update(json.dumps(d, sort_keys=True).encode())
    for key in ("set", "points", "poly"):
        v = getattr(spec, key)
        if v is not None and Path(v).is_file():
            h.update(Path(v).read_bytes())
    return h.hexdigest()


def run(spec: ProblemSpec) -> int:
    """Execute one task; returns the process exit code."""
    spec.validate()
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    job = _Run(spec)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    status, message = 0, "ok"
    try:
        job.run()
        if job.check_failed:
            raise CheckFailure("containment check failed; see report.json")
    except PsskitError as exc:
        status, message = exc.exit_code, str(exc)
        logger.error("%s", exc)
    manifest = {
        "task": spec.task,
        "spec": asdict(spec),
        "inputs_sha256": _inputs_hash(spec),
        "versions": _versions(),
        "seed": spec.seed,
        "solver_settings": job.settings.to_dict(),
        "timings": job.timings,
        "started_at": started,
        "artifacts": job.artifacts,
        "exit_code": status,
        "message": message,
    }
    write_json(out / "manifest.json", manifest)
    return status


def _apply_thread_cap() -> None:
    cap = os.environ.get("PSSKIT_THREADS")
    if not cap:
        return
    try:
        k = int(cap)
    except ValueError:
        raise InputError(f"PSSKIT_THREADS must be a positive integer, got {cap!r}") from None
    if k < 1:
        raise InputError(f"PSSKIT_THREADS must be a positive integer, got {cap!r}")
    # the factorization backend reads this when its pool first starts
    os.environ["RAYON_NUM_THREADS"] = str(k)
    from threadpoolctl import threadpool_limits

    threadpool_limits(k)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="psskit", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON spec file; command-line flags override its keys")
    ap.add_argument("--task", choices=TASKS)
    ap.add_argument("--set", help="set JSON path or bundled name (example6_1, oneD, disk, pid)")
    ap.add_argument("--points", help="point CSV path, or the bundled 'gaussian-points'")
    ap.add_argument("--poly", help="result JSON from an earlier run")
    ap.add_argument("--box", help="box override as 'a1,a2:b1,b2' (use --box=... for negative values)")
    ap.add_argument("--degree", type=int)
    ap.add_argument("--order", type=int, help="relaxation order r (default ceil(d/2), raised as needed)")
    ap.add_argument("--grid", type=int, help="grid points per axis for CSV output and checks")
    ap.add_argument("--fit-grid", type=int, help="positivity grid per axis for the point fit")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--n-samples", type=int)
    ap.add_argument("--mc-samples", type=int)
    ap.add_argument("--solver-tol", type=float, help="feasibility and gap tolerance")
    ap.add_argument("--max-iter", type=int)
    ap.add_argument("--rescale", choices=("on", "off", "auto"))
    ap.add_argument("--include-box", action="store_true", default=None,
                    help="outer: add the box quadratics to the set's generators")
    ap.add_argument("--no-check", dest="check", action="store_false", default=None,
                    help="skip the containment check")
    ap.add_argument("--export-problem", action="store_true", default=None,
                    help="also write the conic problem in sparse text form")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def spec_from_args(args: argparse.Namespace) -> ProblemSpec:
    base: dict = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(base, dict):
            raise InputError("config must be a JSON object")
    flags = {
        "task": args.task, "set": args.set, "points": args.points, "poly": args.poly,
        "box": args.box, "degree": args.degree, "order": args.order, "grid": args.grid,
        "fit_grid": args.fit_grid, "seed": args.seed, "n_samples": args.n_samples,
        "mc_samples": args.mc_samples, "rescale": args.rescale, "include_box": args.include_box,
        "check": args.check, "export_problem": args.export_problem, "out": args.out,
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    solver = dict(base.get("solver", {}))
    if args.solver_tol is not None:
        solver.update(tol_feas=args.solver_tol, tol_gap=args.solver_tol)
    if args.max_iter is not None:
        solver["max_iter"] = args.max_iter
    base["solver"] = solver
    return ProblemSpec.from_dict(base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_thread_cap()
        spec = spec_from_args(args)
        spec.validate()
    except PsskitError as exc:
        print(f"psskit: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
