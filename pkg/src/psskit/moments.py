"""Lebesgue moments of axis-aligned boxes and the L1 objective vector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .poly import Monomial, MultiPoly, monomial_basis


@dataclass(frozen=True)
class Box:
    """Hyperrectangle ``[a, b]`` with ``a_i < b_i``."""

    a: tuple[float, ...]
    b: tuple[float, ...]

    def __init__(self, a: Sequence[float], b: Sequence[float]):
        a = tuple(float(v) for v in np.atleast_1d(a))
        b = tuple(float(v) for v in np.atleast_1d(b))
        if len(a) != len(b) or not a:
            raise InputError(f"box bounds have mismatched lengths {len(a)} and {len(b)}")
        if any(not lo < hi for lo, hi in zip(a, b)):
            raise InputError(f"box needs a < b componentwise, got a={a}, b={b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return len(self.a)

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.b)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, X, tol: float = 0.0) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)

    def quadratics(self) -> list[MultiPoly]:
        """The generators ``(x_j - a_j)(b_j - x_j)``, one per coordinate."""
        out = []
        for j in range(self.dim):
            xj = MultiPoly.variable(self.dim, j)
            out.append((xj - self.a[j]) * (self.b[j] - xj))
        return out

    def inflate(self, fraction: float) -> "Box":
        pad = fraction * (self.upper - self.lower) / 2
        return Box(self.lower - pad, self.upper + pad)

    def to_json(self) -> dict:
        return {"a": list(self.a), "b": list(self.b)}

    @classmethod
    def from_json(cls, obj) -> "Box":
        try:
            return cls(obj["a"], obj["b"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed box JSON: {exc}") from exc

    @classmethod
    def symmetric(cls, n: int, half: float = 1.0) -> "Box":
        return cls([-half] * n, [half] * n)


def box_moment(B: Box, alpha: Monomial) -> float:
    """Integral of ``x**alpha`` over ``B``."""
    if len(alpha) != B.dim:
        raise InputError(f"monomial length {len(alpha)} does not match box dimension {B.dim}")
    out = 1.0
    for lo, hi, e in zip(B.a, B.b, alpha):
        out *= (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
    return out


def l1_norm(p: MultiPoly, B: Box) -> float:
    """Signed integral of ``p`` over ``B`` (equals the L1 norm when ``p >= 0`` on ``B``)."""
    if p.dim != B.dim:
        raise InputError(f"polynomial dimension {p.dim} does not match box dimension {B.dim}")
    return float(sum(c * box_moment(B, a) for a, c in p.items()))


def objective_vector(B: Box, n: int, d: int) -> np.ndarray:
    """Moments ``y_alpha`` over ``monomial_basis(n, d)`` so that ``l1_norm(p, B) = <p, y>``."""
    if B.dim != n:
        raise InputError(f"box dimension {B.dim} does not match n={n}")
    return np.array([box_moment(B, a) for a in monomial_basis(n, d)])
