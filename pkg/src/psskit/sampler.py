"""Uniform sampling on a semialgebraic set by rejection from a polynomial density.

Proposals come from the density ``p / mass`` on the box, generated one
coordinate at a time from closed-form conditional CDFs; a proposal ``xi`` is
kept when it lies in ``K`` and ``u * p(xi) <= 1`` for ``u ~ U[0, 1]``. Because
``p >= 1`` on ``K``, accepted points are exactly uniform on ``K`` and the
expected acceptance rate is ``vol(K) / mass``.

Random streams: sample ``i`` under seed ``s`` draws all its randomness from a
Philox generator keyed by ``(s, i)``, consumed in fixed-size chunks, so any
sample can be reproduced on its own and batches can be split freely.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .approx import SemialgSet, PssResult
from .errors import DegenerateFiber, InputError, SamplingError
from .moments import Box, l1_norm
from .poly import MultiPoly

logger = logging.getLogger(__name__)

MAX_DEGENERATE_RETRIES = 1000
CHUNK = 16


@dataclass(frozen=True)
class PolyDensity:
    """Density proportional to ``p`` on ``box``; ``p`` must be certified nonnegative there."""

    p: MultiPoly
    box: Box
    certified: bool = True

    def __post_init__(self):
        if not self.certified:
            raise InputError(
                "only SOS-certified polynomials define a valid density; "
                "grid-fitted (LP) results are not accepted"
            )
        if self.p.dim != self.box.dim:
            raise InputError(f"density dimension {self.p.dim} != box dimension {self.box.dim}")
        if not self.mass > 0:
            raise InputError(f"density has nonpositive mass {self.mass}")

    @property
    def mass(self) -> float:
        return l1_norm(self.p, self.box)

    @property
    def dim(self) -> int:
        return self.box.dim

    @classmethod
    def from_result(cls, result: PssResult) -> "PolyDensity":
        if not result.certified:
            return cls(result.p, result.box, False)
        if result.kind != "outer":
            raise InputError(f"a dominating density needs an outer result, got {result.kind!r}")
        return cls(result.p, result.box, result.certified)

    def pdf(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.where(self.box.contains(X), self.p(X), 0.0) / self.mass


@dataclass
class UnivariateCdf:
    """``F(t) = sum_k coeffs[k] t**k`` on ``[lo, hi]`` (an antiderivative, not normalized)."""

    coeffs: np.ndarray
    lo: float
    hi: float

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coeffs)

    @property
    def total(self) -> float:
        return float(self(self.hi) - self(self.lo))


class _Terms:
    """Per-term tables for the conditional CDFs of a polynomial density."""

    def __init__(self, p: MultiPoly, box: Box):
        self.n = box.dim
        self.exps, self.coeffs = p._arrays()
        if not len(self.coeffs):
            self.exps = np.zeros((0, self.n), dtype=np.int64)
        lo, hi = box.lower, box.upper
        # moment[j, l] = integral of x_l ** alpha_{j,l} over [a_l, b_l]
        e1 = self.exps + 1
        moment = (hi**e1 - lo**e1) / e1
        # suffix[j, i] = prod over l > i of moment[j, l]
        suffix = np.ones((len(self.coeffs), self.n))
        for i in range(self.n - 2, -1, -1):
            suffix[:, i] = suffix[:, i + 1] * moment[:, i + 1]
        self.suffix = suffix
        self.maxdeg = int(self.exps.max(initial=0)) + 1
        self.lo, self.hi = lo, hi

    def cdf_coeffs(self, i: int, prefix_factor: np.ndarray) -> np.ndarray:
        """Coefficient rows of ``F`` for axis ``i``; ``prefix_factor`` is ``(m, T)``."""
        a = self.exps[:, i]
        gamma = prefix_factor * (self.coeffs * self.suffix[:, i] / (a + 1))
        out = np.zeros((prefix_factor.shape[0], self.maxdeg + 1))
        np.add.at(out.T, a + 1, gamma.T)
        return out


def _horner(C: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    for k in range(C.shape[1] - 1, -1, -1):
        out = out * t + C[:, k]
    return out


def _bisect_rows(C: np.ndarray, w: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Leftmost ``t`` in ``[lo, hi]`` with ``F(t) >= w`` for each coefficient row."""
    a = np.full(len(w), lo)
    b = np.full(len(w), hi)
    # bracket width at which further halving cannot change the result
    floor = 2 * np.finfo(float).eps * max(abs(lo), abs(hi), hi - lo)
    while np.any(b - a > floor):
        mid = 0.5 * (a + b)
        below = _horner(C, mid) < w
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    at_lo = _horner(C, np.full(len(w), lo)) >= w
    return np.where(at_lo, lo, b)


def marginal_cdf(p: MultiPoly, box: Box, i: int, prefix=()) -> UnivariateCdf:
    """Conditional CDF of coordinate ``i`` (0-based) given fixed values of coordinates ``< i``.

    Integrates ``p`` over coordinates ``> i`` on the box and takes an
    antiderivative in ``x_i``; all integrals are closed-form monomial moments.
    """
    if not 0 <= i < box.dim:
        raise InputError(f"axis {i} outside 0..{box.dim - 1}")
    prefix = np.asarray(prefix, dtype=float).reshape(-1)
    if len(prefix) != i:
        raise InputError(f"axis {i} needs {i} prefix values, got {len(prefix)}")
    T = _Terms(p, box)
    factor = np.ones((1, len(T.coeffs)))
    for l in range(i):
        factor *= prefix[l] ** T.exps[:, l]
    C = np.trim_zeros(T.cdf_coeffs(i, factor)[0], "b")
    F = UnivariateCdf(C if len(C) else np.zeros(1), box.a[i], box.b[i])
    if not F.total > 0:
        raise DegenerateFiber(f"density vanishes on the axis-{i} fiber at {prefix.tolist()}")
    return F


def invert_cdf(F: UnivariateCdf, w: float, interval: tuple[float, float] | None = None) -> float:
    """Leftmost root of ``F(t) = w`` on the interval, by bisection.

    ``F`` must be nondecreasing there and ``F(lo) <= w <= F(hi)``; on a plateau
    the left end is returned.
    """
    lo, hi = interval if interval is not None else (F.lo, F.hi)
    Flo, Fhi = float(F(lo)), float(F(hi))
    slack = 1e-12 * max(abs(Fhi - Flo), 1e-300)
    if not (Flo - slack <= w <= Fhi + slack):
        raise InputError(f"level {w} outside the CDF range [{Flo}, {Fhi}]")
    return float(_bisect_rows(F.coeffs[None, :], np.array([w]), lo, hi)[0])


def _transform(T: _Terms, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map uniforms ``(m, n)`` to density draws; second output flags usable rows."""
    m = U.shape[0]
    X = np.empty((m, T.n))
    ok = np.ones(m, dtype=bool)
    factor = np.ones((m, len(T.coeffs)))
    for i in range(T.n):
        C = T.cdf_coeffs(i, factor)
        Flo = _horner(C, np.full(m, T.lo[i]))
        Fhi = _horner(C, np.full(m, T.hi[i]))
        span = Fhi - Flo
        ok &= span > 0
        w = Flo + U[:, i] * np.where(span > 0, span, 0.0)
        X[:, i] = _bisect_rows(C, w, T.lo[i], T.hi[i])
        factor = factor * X[:, i : i + 1] ** T.exps[:, i]
    return X, ok


def draw_poly_density(pd: PolyDensity, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the density ``pd.p / pd.mass`` by sequential conditional inversion."""
    T = _Terms(pd.p, pd.box)
    m = 1 if size is None else int(size)
    U = rng.random((m, T.n))
    X, ok = _transform(T, U)
    for _ in range(MAX_DEGENERATE_RETRIES):
        if ok.all():
            break
        bad = ~ok
        X[bad], ok[bad] = _transform(T, rng.random((int(bad.sum()), T.n)))
    else:
        raise SamplingError("density is degenerate on sampled fibers after 1000 retries")
    return X[0] if size is None else X


def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, index)``."""
    if seed < 0 or index < 0:
        raise InputError("seed and sample index must be nonnegative")
    return np.random.Generator(np.random.Philox(key=np.array([index, seed], dtype=np.uint64)))


@dataclass
class SampleBatch:
    samples: np.ndarray
    proposals: int
    accepted: int
    in_set_rejections: int
    outside_rejections: int
    degenerate: int = 0
    seed: int = 0
    rejected: np.ndarray | None = field(default=None, repr=False)

    @property
    def empirical_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else float("nan")

    def report(self) -> dict:
        return {
            "accepted": self.accepted,
            "proposals": self.proposals,
            "empirical_rate": self.empirical_rate,
            "in_set_rejections": self.in_set_rejections,
            "outside_rejections": self.outside_rejections,
            "degenerate_draws": self.degenerate,
            "seed": self.seed,
        }


def uniform_sample(
    K: SemialgSet,
    pd: PolyDensity,
    N: int,
    seed: int = 0,
    *,
    keep_rejected: bool = False,
    first_index: int = 0,
) -> SampleBatch:
    """``N`` i.i.d. uniform points on ``K`` by rejection from ``pd``.

    ``pd.p`` must satisfy ``p >= 1`` on ``K`` (an outer result). Sample ``k``
    uses stream ``(seed, first_index + k)``. Aborts when the acceptance rate is
    below 1e-4 after 1e5 proposals.
    """
    if N < 0:
        raise InputError("N must be nonnegative")
    if K.dim != pd.dim:
        raise InputError(f"set dimension {K.dim} != density dimension {pd.dim}")
    T = _Terms(pd.p, pd.box)
    n = pd.dim
    streams = [sample_stream(seed, first_index + k) for k in range(N)]
    out = np.empty((N, n))
    pending = np.arange(N)
    proposals = in_rej = out_rej = degenerate = 0
    degenerate_per = np.zeros(N, dtype=int)
    rejected = []
    while len(pending):
        U = np.stack([streams[k].random((CHUNK, n + 1)) for k in pending])
        X, ok = _transform(T, U[:, :, :n].reshape(-1, n))
        u = U[:, :, n].reshape(-1)
        inK = K.contains(X) & ok
        keep = inK & (u * pd.p(X) <= 1.0)
        X = X.reshape(len(pending), CHUNK, n)
        ok, inK, keep = (a.reshape(len(pending), CHUNK) for a in (ok, inK, keep))
        still = []
        for row, k in enumerate(pending):
            hits = np.flatnonzero(keep[row])
            stop = hits[0] + 1 if len(hits) else CHUNK
            used_ok = ok[row, :stop]
            used_in = inK[row, :stop]
            n_deg = int((~used_ok).sum())
            degenerate += n_deg
            degenerate_per[k] += n_deg
            proposals += int(used_ok.sum())
            n_in_rej = int(used_in.sum()) - (1 if len(hits) else 0)
            in_rej += n_in_rej
            out_rej += int((used_ok & ~used_in).sum())
            if keep_rejected:
                mask = used_ok.copy()
                if len(hits):
                    mask[hits[0]] = False
                rejected.append(X[row, :stop][mask])
            if len(hits):
                out[k] = X[row, hits[0]]
            else:
                if degenerate_per[k] > MAX_DEGENERATE_RETRIES:
                    raise SamplingError(f"sample {k}: density degenerate after 1000 retries")
                still.append(k)
        pending = np.array(still, dtype=int)
        accepted = N - len(pending)
        if proposals >= 100_000 and accepted / proposals < 1e-4:
            raise SamplingError(
                f"acceptance rate {accepted / proposals:.2e} after {proposals} proposals; "
                "the dominating polynomial is too loose (raise the degree)"
            )
    return SampleBatch(
        samples=out,
        proposals=proposals,
        accepted=N,
        in_set_rejections=in_rej,
        outside_rejections=out_rej,
        degenerate=degenerate,
        seed=seed,
        rejected=np.concatenate(rejected) if keep_rejected and rejected else None,
    )


def acceptance_rate(
    K: SemialgSet,
    pd: PolyDensity,
    vol: float | Callable[[SemialgSet], float],
) -> float:
    """Theoretical acceptance rate ``vol(K) / mass``."""
    v = vol(K) if callable(vol) else float(vol)
    return v / pd.mass
