"""Sparse multivariate polynomials with real coefficients.

Monomials are exponent tuples. All orderings use the graded order of
:func:`monomial_key`: total degree first, then descending lexicographic
exponents, so that ``x1`` precedes ``x2`` and ``x1**2`` precedes ``x1*x2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError

Monomial = tuple[int, ...]

# canonicalization threshold; anything larger is kept as-is
_ZERO = 1e-300


def monomial_key(alpha: Monomial) -> tuple:
    return (sum(alpha), tuple(-e for e in alpha))


@lru_cache(maxsize=None)
def _basis(n: int, k: int) -> tuple[Monomial, ...]:
    out = []
    for deg in range(k + 1):
        for combo in combinations_with_replacement(range(n), deg):
            exps = [0] * n
            for v in combo:
                exps[v] += 1
            out.append(tuple(exps))
    return tuple(out)


def monomial_basis(n: int, k: int) -> list[Monomial]:
    """All monomials in ``n`` variables of total degree at most ``k``.

    Returned in increasing graded order; the length is ``C(n + k, n)``.
    """
    if n < 1 or k < 0:
        raise InputError(f"monomial_basis needs n >= 1 and k >= 0, got n={n}, k={k}")
    return list(_basis(n, k))


def basis_size(n: int, k: int) -> int:
    return math.comb(n + k, n)


class MultiPoly:
    """Immutable sparse polynomial ``sum_alpha c_alpha x**alpha`` in ``dim`` variables.

    Terms with coefficient magnitude below 1e-300 are dropped on construction.
    The zero polynomial has degree 0.
    """

    __slots__ = ("_dim", "_terms", "_cache")

    def __init__(self, dim: int, terms: Mapping[Sequence[int], float] | None = None):
        if dim < 1:
            raise InputError(f"polynomial dimension must be >= 1, got {dim}")
        acc: dict[Monomial, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != dim:
                raise InputError(f"monomial {alpha} has length {len(alpha)}, expected {dim}")
            if any(e < 0 for e in alpha):
                raise InputError(f"negative exponent in monomial {alpha}")
            acc[alpha] = acc.get(alpha, 0.0) + float(c)
        self._dim = dim
        self._terms = {
            a: acc[a] for a in sorted(acc, key=monomial_key) if abs(acc[a]) >= _ZERO
        }
        self._cache = None

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, dim: int, c: float) -> "MultiPoly":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def variable(cls, dim: int, i: int) -> "MultiPoly":
        alpha = [0] * dim
        alpha[i] = 1
        return cls(dim, {tuple(alpha): 1.0})

    @classmethod
    def zero(cls, dim: int) -> "MultiPoly":
        return cls(dim, {})

    @classmethod
    def from_coefficients(cls, dim: int, coeffs: Sequence[float], degree: int) -> "MultiPoly":
        """Build from a dense coefficient vector over ``monomial_basis(dim, degree)``."""
        basis = _basis(dim, degree)
        if len(coeffs) != len(basis):
            raise InputError(f"expected {len(basis)} coefficients, got {len(coeffs)}")
        return cls(dim, dict(zip(basis, np.asarray(coeffs, dtype=float).tolist())))

    # -- accessors ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def coeff(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def degree(self) -> int:
        return max((sum(a) for a in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficients(self, degree: int | None = None) -> np.ndarray:
        """Dense coefficient vector over ``monomial_basis(dim, degree)``."""
        degree = self.degree() if degree is None else degree
        if self.degree() > degree and not self.is_zero():
            raise InputError(f"polynomial of degree {self.degree()} does not fit degree {degree}")
        return np.array([self.coeff(a) for a in _basis(self._dim, degree)])

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "MultiPoly") -> None:
        if other._dim != self._dim:
            raise InputError(f"dimension mismatch: {self._dim} vs {other._dim}")

    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return MultiPoly.constant(self._dim, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = dict(self._terms)
        for a, c in other._terms.items():
            acc[a] = acc.get(a, 0.0) + c
        return MultiPoly(self._dim, acc)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def scale(self, c: float) -> "MultiPoly":
        return MultiPoly(self._dim, {a: c * v for a, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict[Monomial, float] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                key = tuple(x + y for x, y in zip(a, b))
                acc[key] = acc.get(key, 0.0) + ca * cb
        return MultiPoly(self._dim, acc)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "MultiPoly":
        if k < 0:
            raise InputError("negative powers are not polynomials")
        out = MultiPoly.constant(self._dim, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self._dim == other._dim and self._terms == other._terms

    def __hash__(self):
        return hash((self._dim, tuple(self._terms.items())))

    def allclose(self, other: "MultiPoly", atol: float = 1e-12) -> bool:
        self._check(other)
        return (self - other).max_abs_coeff() <= atol

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- evaluation --------------------------------------------------------

    def _arrays(self):
        if self._cache is None:
            exps = np.array(list(self._terms), dtype=np.int64).reshape(-1, self._dim)
            coeffs = np.fromiter(self._terms.values(), dtype=float, count=len(self._terms))
            self._cache = (exps, coeffs)
        return self._cache

    def __call__(self, x) -> float | np.ndarray:
        """Evaluate at a point (returns float) or at rows of an ``(m, dim)`` array."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[-1] != self._dim:
            raise InputError(f"point has dimension {X.shape[-1]}, polynomial has {self._dim}")
        exps, coeffs = self._arrays()
        if not len(coeffs):
            out = np.zeros(X.shape[0])
        else:
            # bound the (rows x terms) work array to a few MB
            step = max(1, 2_000_000 // len(coeffs))
            out = np.concatenate(
                [_eval_rows(X[s : s + step], exps, coeffs) for s in range(0, X.shape[0], step)]
            ) if X.shape[0] else np.zeros(0)
        return float(out[0]) if single else out

    def evaluate(self, x) -> float | np.ndarray:
        return self(x)

    # -- calculus and substitutions --------------------------------------

    def affine_substitute(self, shift: Sequence[float], scale: Sequence[float]) -> "MultiPoly":
        """Return ``q(t) = p(shift + scale * t)`` (componentwise affine map)."""
        shift = np.asarray(shift, dtype=float)
        scale = np.asarray(scale, dtype=float)
        n = self._dim
        maxdeg = max((max(a) for a in self._terms), default=0)
        # binomial expansion of (s + h t)^k per variable
        expansions = []
        for v in range(n):
            rows = []
            for k in range(maxdeg + 1):
                rows.append([
                    math.comb(k, j) * shift[v] ** (k - j) * scale[v] ** j for j in range(k + 1)
                ])
            expansions.append(rows)
        acc: dict[Monomial, float] = {}
        for alpha, c in self._terms.items():
            partial = {(): c}
            for v, k in enumerate(alpha):
                nxt = {}
                for pre, val in partial.items():
                    for j, w in enumerate(expansions[v][k]):
                        if w != 0.0:
                            nxt[pre + (j,)] = val * w
                partial = nxt
            for key, val in partial.items():
                acc[key] = acc.get(key, 0.0) + val
        return MultiPoly(n, acc)

    def integrate(self, a: Sequence[float], b: Sequence[float]) -> float:
        """Definite integral over the box ``[a, b]``."""
        from .moments import Box, l1_norm

        return l1_norm(self, Box(a, b))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dim": self._dim,
            "terms": [{"exps": list(a), "coeff": c} for a, c in self._terms.items()],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "MultiPoly":
        try:
            dim = int(obj["dim"])
            terms = {tuple(t["exps"]): float(t["coeff"]) for t in obj["terms"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed polynomial JSON: {exc}") from exc
        return cls(dim, terms)

    def __repr__(self) -> str:
        if not self._terms:
            return f"MultiPoly(dim={self._dim}, 0)"
        parts = []
        for a, c in self._terms.items():
            mono = "*".join(
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}" for i, e in enumerate(a) if e
            )
            parts.append(f"{c:.6g}" + (f"*{mono}" if mono else ""))
        return f"MultiPoly(dim={self._dim}, " + " + ".join(parts) + ")"


def _eval_rows(X: np.ndarray, exps: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    maxdeg = int(exps.max())
    mono = np.ones((X.shape[0], len(coeffs)))
    for v in range(X.shape[1]):
        powers = np.vander(X[:, v], maxdeg + 1, increasing=True)
        mono *= powers[:, exps[:, v]]
    return mono @ coeffs


def monomial_matrix(X, basis: Sequence[Monomial]) -> np.ndarray:
    """Rows ``[x**alpha for alpha in basis]`` for each row ``x`` of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    exps = np.array(basis, dtype=np.int64).reshape(-1, X.shape[1])
    maxdeg = int(exps.max(initial=0))
    out = np.ones((X.shape[0], len(exps)))
    for v in range(X.shape[1]):
        out *= np.vander(X[:, v], maxdeg + 1, increasing=True)[:, exps[:, v]]
    return out


def variables(dim: int) -> list[MultiPoly]:
    return [MultiPoly.variable(dim, i) for i in range(dim)]


def polynomial_sum(polys: Iterable[MultiPoly], dim: int) -> MultiPoly:
    acc: dict[Monomial, float] = {}
    for p in polys:
        for a, c in p.items():
            acc[a] = acc.get(a, 0.0) + c
    return MultiPoly(dim, acc)


@dataclass(frozen=True)
class GramDecomposition:
    """Symmetric Gram matrix over ``monomial_basis(n, basis_degree)``."""

    basis_degree: int
    gram: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.gram, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise InputError(f"Gram matrix must be square, got shape {G.shape}")
        object.__setattr__(self, "gram", G)


def expand_gram(g: GramDecomposition, n: int) -> MultiPoly:
    """Expand ``pi^T P pi`` into a polynomial, ``pi = monomial_basis(n, basis_degree)``."""
    basis = _basis(n, g.basis_degree)
    if g.gram.shape[0] != len(basis):
        raise InputError(
            f"Gram size {g.gram.shape[0]} does not match basis size {len(basis)} "
            f"for n={n}, degree {g.basis_degree}"
        )
    G = 0.5 * (g.gram + g.gram.T)
    acc: dict[Monomial, float] = {}
    N = len(basis)
    for i in range(N):
        for j in range(i, N):
            c = G[i, j] if i == j else 2.0 * G[i, j]
            if c == 0.0:
                continue
            key = tuple(x + y for x, y in zip(basis[i], basis[j]))
            acc[key] = acc.get(key, 0.0) + c
    return MultiPoly(n, acc)
