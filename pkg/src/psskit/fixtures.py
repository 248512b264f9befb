"""Bundled example sets and the point-cloud generator.

The JSON/CSV files under ``psskit/data`` are produced by :func:`write_bundled`;
tests check that the files and these builders agree.
"""

from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .approx import SemialgSet
from .errors import InputError
from .moments import Box
from .poly import MultiPoly

GAUSSIAN_MEANS = np.array([[0.4, 0.3], [-0.3, -0.5], [-0.5, 0.4]])
GAUSSIAN_VARIANCE = 0.1
GAUSSIAN_SEED = 20170301


def example6_1_set() -> SemialgSet:
    """Planar stabilizability region: four generators of degree 1, 1, 2, 3."""
    x1, x2 = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
    g = [
        1 + 2 * x2,
        2 - 4 * x1 - 3 * x2,
        10 - 28 * x1 - 5 * x2 - 24 * x1 * x2 - 18 * x2**2,
        1 - x2 - 8 * x1**2 - 2 * x1 * x2 - x2**2 - 8 * x1**2 * x2 - 6 * x1 * x2**2,
    ]
    return SemialgSet(2, g, Box([-0.8, -0.5], [0.6, 1.0]), name="example6_1")


def one_d_set() -> SemialgSet:
    """``[1 + sqrt(0.5), 3]`` written as two polynomial inequalities on ``[1.5, 4]``."""
    x = MultiPoly.variable(1, 0)
    return SemialgSet(1, [(x - 1) ** 2 - 0.5, 3 - x], Box([1.5], [4.0]), name="oneD")


def disk_set() -> SemialgSet:
    x1, x2 = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
    return SemialgSet(2, [1 - x1**2 - x2**2], Box([-1.2, -1.2], [1.2, 1.2]), name="disk")


# plant N(s)/D(s), coefficients in ascending powers of s
PID_NUM = (-1.0, -1.0, -2.0, 1.0)
PID_DEN = (1.0, -8.0, 65.0, 26.0, 32.0, 2.0, 1.0)


def pid_closed_loop(x) -> np.ndarray:
    """Ascending coefficients of ``s D(s) + (kI + kP s + kD s^2) N(s)`` at gains mapped from ``x``."""
    x = np.asarray(x, dtype=float)
    kI, kP, kD = 25 * (x[0] - 1), 10 * (x[1] - 1.5), 10 * (x[2] - 1)
    out = np.zeros(8)
    out[1:] += PID_DEN
    out[:6] += np.convolve([kI, kP, kD], PID_NUM)
    return out


def _det(M: list[list[MultiPoly]], n: int) -> MultiPoly:
    """Laplace expansion along the first row, skipping zero entries."""
    size = len(M)
    if size == 1:
        return M[0][0]
    total = MultiPoly.zero(n)
    for j, entry in enumerate(M[0]):
        if entry.is_zero():
            continue
        minor = [row[:j] + row[j + 1 :] for row in M[1:]]
        term = entry * _det(minor, n)
        total = total + term if j % 2 == 0 else total - term
    return total


def hurwitz_generators(coeffs: list[MultiPoly]) -> list[MultiPoly]:
    """Lienard-Chipart conditions for ``sum_k coeffs[k] s**k`` (leading coefficient a positive constant).

    With ``c_k`` the coefficient of ``s**(deg - k)``, the polynomial is Hurwitz
    iff ``c_deg, c_{deg-2}, ... > 0`` and the even-order Hurwitz minors are
    positive. Conditions that are positive constants are dropped.
    """
    deg = len(coeffs) - 1
    n = coeffs[0].dim
    c = [coeffs[deg - k] for k in range(deg + 1)]

    def at(k):
        return c[k] if 0 <= k <= deg else MultiPoly.zero(n)

    gens = [c[k] for k in range(deg, 0, -2)]
    H = [[at(2 * (j + 1) - (i + 1)) for j in range(deg)] for i in range(deg)]
    for order in range(2, deg, 2):
        gens.append(_det([row[:order] for row in H[:order]], n))
    out = []
    for g in gens:
        if g.degree() > 0:
            out.append(g)
        elif g.coeff((0,) * n) <= 0:
            raise InputError("a Hurwitz condition fails identically; the set is empty")
    return out


def pid_set() -> SemialgSet:
    """Stabilizing PID gains of a sixth-order plant, gains scaled into ``[-1, 1]^3``."""
    xs = [MultiPoly.variable(3, i) for i in range(3)]
    kI, kP, kD = 25 * (xs[0] - 1), 10 * (xs[1] - 1.5), 10 * (xs[2] - 1)
    zero = MultiPoly.zero(3)
    coeffs = [zero] * 8
    for k, dk in enumerate(PID_DEN):
        coeffs[k + 1] = coeffs[k + 1] + dk
    for i, kk in enumerate((kI, kP, kD)):
        for k, nk in enumerate(PID_NUM):
            coeffs[i + k] = coeffs[i + k] + kk.scale(nk)
    gens = hurwitz_generators(coeffs)
    # normalize each generator by its largest coefficient for conditioning
    gens = [g.scale(1.0 / g.max_abs_coeff()) for g in gens]
    return SemialgSet(3, gens, Box([-1.0] * 3, [1.0] * 3), name="pid")


def gaussian_points(n_points: int = 100, seed: int = GAUSSIAN_SEED, box: Box | None = None) -> np.ndarray:
    """Planar Gaussian-mixture cloud; draws that leave the box are redrawn."""
    box = box or Box([-1.0, -1.0], [1.0, 1.0])
    rng = np.random.default_rng(seed)
    out = np.empty((n_points, 2))
    k = 0
    std = np.sqrt(GAUSSIAN_VARIANCE)
    while k < n_points:
        mean = GAUSSIAN_MEANS[rng.integers(len(GAUSSIAN_MEANS))]
        pt = mean + std * rng.standard_normal(2)
        if box.contains(pt[None, :])[0]:
            out[k] = pt
            k += 1
    return out


BUILDERS = {
    "example6_1": example6_1_set,
    "oneD": one_d_set,
    "disk": disk_set,
    "pid": pid_set,
}


def _data_dir():
    return resources.files("psskit") / "data"


def load_set(name_or_path: str | Path) -> SemialgSet:
    """A bundled set by name (``example6_1``, ``oneD``, ``disk``, ``pid``) or a JSON path."""
    key = str(name_or_path)
    if key.endswith(".json") and Path(key).exists():
        return SemialgSet.from_json(json.loads(Path(key).read_text()))
    stem = Path(key).stem if key.endswith(".json") else key
    if stem == "unit-disk":
        stem = "disk"
    if stem not in BUILDERS:
        raise InputError(f"no set file or bundled set named {key!r}; bundled: {sorted(BUILDERS)}")
    return SemialgSet.from_json(json.loads((_data_dir() / f"{stem}.json").read_text()))


def parse_points_csv(text: str) -> np.ndarray:
    """Points from CSV text with an optional header row of column names."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if rows and not _is_numeric(rows[0]):
        rows = rows[1:]
    try:
        X = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise InputError(f"malformed point CSV: {exc}") from None
    if X.ndim != 2 or not len(X):
        raise InputError("point CSV has no rows")
    return X


def load_points(name_or_path: str | Path) -> np.ndarray:
    key = str(name_or_path)
    if Path(key).exists():
        return parse_points_csv(Path(key).read_text())
    if key in ("gaussian-points", "gaussian-points.csv"):
        return parse_points_csv((_data_dir() / "gaussian-points.csv").read_text())
    raise InputError(f"no point file {key!r}")


def _is_numeric(row) -> bool:
    try:
        [float(v) for v in row]
    except ValueError:
        return False
    return True


def write_points_csv(X: np.ndarray, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(X.shape[1])])
    for row in X:
        w.writerow([repr(float(v)) for v in row])


def write_bundled(directory: str | Path) -> None:
    """Regenerate every bundled data file into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, build in BUILDERS.items():
        (directory / f"{name}.json").write_text(json.dumps(build().to_json(), indent=1) + "\n")
    with open(directory / "gaussian-points.csv", "w") as fh:
        write_points_csv(gaussian_points(), fh)
