"""Lowering of SOS positivity certificates to a standard-form conic program.

A certificate states ``target = s_0 + sum_i s_i g_i`` with every ``s_i`` a sum of
squares, written through its Gram matrix over a monomial basis. Coefficient
matching over ``monomial_basis(n, 2r)`` gives linear equality rows; each Gram
matrix is a PSD block of the decision vector.

Decision vector layout (fixed order, deterministic):

    [ free variables | block_1 | block_2 | ... ]

PSD blocks are stored as the scaled upper triangle in column-major order
(off-diagonal entries multiplied by sqrt(2)), which makes the vectorization an
isometry and matches the triangle convention of common conic solvers.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, RelaxationOrderError
from .poly import GramDecomposition, Monomial, MultiPoly, _basis, expand_gram

SQRT2 = math.sqrt(2.0)


def half_degree(g: MultiPoly) -> int:
    return math.ceil(g.degree() / 2)


@dataclass(frozen=True)
class AffineTarget:
    """Polynomial ``const + sum_k z[k] * polys[k]`` that is affine in the free variables ``z``."""

    dim: int
    linear: tuple[tuple[int, MultiPoly], ...]
    const: MultiPoly

    @classmethod
    def coefficients_of(cls, n: int, d: int, offset: float = 0.0, first_var: int = 0):
        """Target ``p(x) - offset`` where ``p``'s coefficients are free variables."""
        basis = _basis(n, d)
        linear = tuple((first_var + k, MultiPoly(n, {a: 1.0})) for k, a in enumerate(basis))
        return cls(n, linear, MultiPoly.constant(n, -offset))

    def degree(self) -> int:
        return max([self.const.degree()] + [q.degree() for _, q in self.linear])

    def evaluate(self, z: Sequence[float]) -> MultiPoly:
        acc = self.const
        for k, q in self.linear:
            acc = acc + q.scale(float(z[k]))
        return acc


@dataclass(frozen=True)
class PositivityConstraint:
    """``target >= 0`` on ``{g >= 0 for g in generators}``, certified at relaxation order ``r``."""

    target: AffineTarget
    generators: tuple[MultiPoly, ...]
    order: int
    tag: str

    @property
    def dim(self) -> int:
        return self.target.dim

    def multiplier_degrees(self) -> list[int]:
        """Basis degree of each Gram block: ``r`` for s_0, ``r - r_i`` for s_i."""
        return [self.order] + [self.order - half_degree(g) for g in self.generators]

    def block_sizes(self) -> list[int]:
        return [math.comb(self.dim + k, self.dim) for k in self.multiplier_degrees()]

    def n_rows(self) -> int:
        return math.comb(self.dim + 2 * self.order, self.dim)


def sos_constraint(
    target: AffineTarget,
    generators: Sequence[MultiPoly],
    r: int,
    tag: str,
) -> PositivityConstraint:
    """Validate and package one positivity certificate.

    Raises :class:`RelaxationOrderError` when ``2r`` is below the target degree
    or below the degree of some generator.
    """
    n = target.dim
    gens = tuple(generators)
    for i, g in enumerate(gens):
        if g.dim != n:
            raise InputError(f"{tag}: generator {i} has dimension {g.dim}, expected {n}")
        if g.degree() == 0:
            raise InputError(f"{tag}: generator {i} is constant; drop it from the set description")
        if r < half_degree(g):
            raise RelaxationOrderError(
                f"{tag}: relaxation order below minimum: r={r} < {half_degree(g)} "
                f"required by generator {i} (degree {g.degree()}): {g!r}"
            )
    if 2 * r < target.degree():
        raise RelaxationOrderError(
            f"{tag}: relaxation order below minimum: 2r={2 * r} < target degree {target.degree()}"
        )
    return PositivityConstraint(target, gens, int(r), tag)


@dataclass(frozen=True)
class Block:
    name: str
    kind: str  # "free" | "nonneg" | "psd"
    size: int  # matrix side for psd, vector length otherwise
    offset: int
    basis_degree: int = -1

    @property
    def length(self) -> int:
        return self.size * (self.size + 1) // 2 if self.kind == "psd" else self.size


@dataclass
class ConicProblem:
    """``min c.x  s.t.  A x = b,  x[block] in cone(block)`` for each block."""

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    blocks: list[Block]
    constraints: list[PositivityConstraint] = field(default_factory=list)
    row_labels: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def block(self, name: str) -> Block:
        for blk in self.blocks:
            if blk.name == name:
                return blk
        raise KeyError(name)

    def index(self, name: str, i: int = 0, j: int | None = None) -> int:
        """Flat index of entry ``(i, j)`` of a block (``j`` is ignored for vector blocks)."""
        blk = self.block(name)
        if blk.kind != "psd":
            return blk.offset + i
        j = i if j is None else j
        i, j = min(i, j), max(i, j)
        return blk.offset + j * (j + 1) // 2 + i

    def layout_table(self) -> list[tuple[str, int, int, int]]:
        """Every ``(block, row, col, flat_index)``; PSD blocks list the upper triangle."""
        out = []
        for blk in self.blocks:
            if blk.kind == "psd":
                for j in range(blk.size):
                    for i in range(j + 1):
                        out.append((blk.name, i, j, blk.offset + j * (j + 1) // 2 + i))
            else:
                out.extend((blk.name, i, 0, blk.offset + i) for i in range(blk.size))
        return out

    def matrix(self, x: np.ndarray, name: str) -> np.ndarray:
        """Unpack a PSD block of ``x`` into a symmetric matrix."""
        blk = self.block(name)
        return svec_to_matrix(np.asarray(x)[blk.offset : blk.offset + blk.length], blk.size)

    def free_values(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [np.asarray(x)[b.offset : b.offset + b.length] for b in self.blocks if b.kind == "free"]
        )

    # -- sparse text export -------------------------------------------------

    def to_text(self) -> str:
        """Serialize to the sparse text format (see ``read_problem_text``)."""
        buf = io.StringIO()
        A = self.A.tocoo()
        order = np.lexsort((A.col, A.row))
        buf.write("PSSKIT-CONIC 1\n")
        buf.write(f"VARS {self.n_vars}\nROWS {self.n_rows}\n")
        buf.write(f"BLOCKS {len(self.blocks)}\n")
        for blk in self.blocks:
            buf.write(f"{blk.kind} {blk.size} {blk.name}\n")
        nz_c = np.flatnonzero(self.c)
        buf.write(f"OBJ {len(nz_c)}\n")
        for k in nz_c:
            buf.write(f"{k} {float(self.c[k])!r}\n")
        buf.write(f"A {A.nnz}\n")
        for k in order:
            buf.write(f"{A.row[k]} {A.col[k]} {float(A.data[k])!r}\n")
        nz_b = np.flatnonzero(self.b)
        buf.write(f"RHS {len(nz_b)}\n")
        for k in nz_b:
            buf.write(f"{k} {float(self.b[k])!r}\n")
        buf.write("END\n")
        return buf.getvalue()


def read_problem_text(text: str) -> ConicProblem:
    """Parse the sparse text format.

    Layout::

        PSSKIT-CONIC 1
        VARS <nvars>
        ROWS <nrows>
        BLOCKS <k>
        <kind> <size> <name>        # k lines, kind in free|nonneg|psd
        OBJ <nnz>
        <col> <value>               # nnz lines
        A <nnz>
        <row> <col> <value>         # nnz lines, triplets
        RHS <nnz>
        <row> <value>
        END

    PSD blocks occupy ``size*(size+1)/2`` entries in scaled column-major
    upper-triangle order.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    it = iter(lines)
    try:
        if next(it).split()[0] != "PSSKIT-CONIC":
            raise InputError("not a psskit conic problem file")
        nvars = int(next(it).split()[1])
        nrows = int(next(it).split()[1])
        nblocks = int(next(it).split()[1])
        blocks, offset = [], 0
        for _ in range(nblocks):
            kind, size, name = next(it).split(maxsplit=2)
            blk = Block(name, kind, int(size), offset)
            blocks.append(blk)
            offset += blk.length
        c = np.zeros(nvars)
        for _ in range(int(next(it).split()[1])):
            k, v = next(it).split()
            c[int(k)] = float(v)
        nnz = int(next(it).split()[1])
        rows, cols, vals = [], [], []
        for _ in range(nnz):
            r, k, v = next(it).split()
            rows.append(int(r))
            cols.append(int(k))
            vals.append(float(v))
        b = np.zeros(nrows)
        for _ in range(int(next(it).split()[1])):
            r, v = next(it).split()
            b[int(r)] = float(v)
        if next(it) != "END":
            raise InputError("missing END marker")
    except (StopIteration, ValueError, IndexError) as exc:
        raise InputError(f"malformed conic problem text: {exc}") from exc
    if offset != nvars:
        raise InputError(f"block lengths sum to {offset}, header says {nvars} variables")
    A = sp.csr_matrix((vals, (rows, cols)), shape=(nrows, nvars))
    return ConicProblem(c, A, b, blocks)


def svec_to_matrix(v: np.ndarray, N: int) -> np.ndarray:
    M = np.zeros((N, N))
    k = 0
    for j in range(N):
        for i in range(j + 1):
            M[i, j] = M[j, i] = v[k] if i == j else v[k] / SQRT2
            k += 1
    return M


def matrix_to_svec(M: np.ndarray) -> np.ndarray:
    N = M.shape[0]
    out = []
    for j in range(N):
        for i in range(j + 1):
            out.append(M[i, j] if i == j else SQRT2 * M[i, j])
    return np.array(out)


def assemble(
    objective: Sequence[float],
    constraints: Sequence[PositivityConstraint],
) -> ConicProblem:
    """Build the conic problem for free variables ``z`` with objective ``<objective, z>``.

    Every constraint's target must be affine in the same ``z``.
    """
    objective = np.asarray(objective, dtype=float)
    n_free = len(objective)
    dims = {con.dim for con in constraints}
    if len(dims) > 1:
        raise InputError(f"constraints disagree on dimension: {sorted(dims)}")
    for con in constraints:
        for k, _ in con.target.linear:
            if not 0 <= k < n_free:
                raise InputError(f"{con.tag}: free variable {k} outside 0..{n_free - 1}")

    blocks = [Block("z", "free", n_free, 0)]
    offset = n_free
    for con in constraints:
        for s, (deg, size) in enumerate(zip(con.multiplier_degrees(), con.block_sizes())):
            blk = Block(f"{con.tag}.s{s}", "psd", size, offset, deg)
            blocks.append(blk)
            offset += blk.length

    rows, cols, vals = [], [], []
    rhs: list[float] = []
    labels: list[str] = []
    row0 = 0
    blk_iter = iter(blocks[1:])
    for con in constraints:
        n = con.dim
        row_of = {a: row0 + i for i, a in enumerate(_basis(n, 2 * con.order))}
        rhs.extend([0.0] * len(row_of))
        labels.extend(f"{con.tag}:{a}" for a in row_of)
        # target(z) - certificate = 0  <=>  lin(z) - cert = -const
        for k, q in con.target.linear:
            for a, c in q.items():
                rows.append(row_of[a])
                cols.append(k)
                vals.append(c)
        for a, c in con.target.const.items():
            rhs[row_of[a]] -= c
        gens = (MultiPoly.constant(n, 1.0),) + con.generators
        for g in gens:
            blk = next(blk_iter)
            basis = _basis(n, blk.basis_degree)
            g_terms = list(g.items())
            for j in range(blk.size):
                for i in range(j + 1):
                    w = 1.0 if i == j else SQRT2
                    col = blk.offset + j * (j + 1) // 2 + i
                    mij = tuple(x + y for x, y in zip(basis[i], basis[j]))
                    for beta, gc in g_terms:
                        key = tuple(x + y for x, y in zip(mij, beta))
                        rows.append(row_of[key])
                        cols.append(col)
                        vals.append(-w * gc)
        row0 += len(row_of)

    A = sp.csr_matrix((vals, (rows, cols)), shape=(row0, offset))
    A.sum_duplicates()
    A.sort_indices()
    c = np.zeros(offset)
    c[:n_free] = objective
    return ConicProblem(c, A, np.array(rhs), blocks, list(constraints), labels)


def extract_certificates(problem: ConicProblem, x: np.ndarray) -> dict[str, list[GramDecomposition]]:
    """Gram matrices of every multiplier, keyed by constraint tag."""
    out: dict[str, list[GramDecomposition]] = {}
    for con in problem.constraints:
        grams = []
        for s, deg in enumerate(con.multiplier_degrees()):
            grams.append(GramDecomposition(deg, problem.matrix(x, f"{con.tag}.s{s}")))
        out[con.tag] = grams
    return out


def constraint_residual(con: PositivityConstraint, z: np.ndarray, grams: Sequence[GramDecomposition]) -> float:
    """Max coefficient mismatch of ``target - (s_0 + sum s_i g_i)`` rebuilt from the Grams."""
    n = con.dim
    rebuilt = expand_gram(grams[0], n)
    for g, G in zip(con.generators, grams[1:]):
        rebuilt = rebuilt + expand_gram(G, n) * g
    return (con.target.evaluate(z) - rebuilt).max_abs_coeff()


def certificate_residual(problem: ConicProblem, x: np.ndarray) -> float:
    """Worst coefficient mismatch over all certificates of a solved problem."""
    z = problem.free_values(x)
    certs = extract_certificates(problem, x)
    return max(
        (constraint_residual(con, z, certs[con.tag]) for con in problem.constraints),
        default=0.0,
    )


def min_gram_eigenvalue(problem: ConicProblem, x: np.ndarray) -> float:
    vals = [
        np.linalg.eigvalsh(problem.matrix(x, b.name)).min()
        for b in problem.blocks
        if b.kind == "psd"
    ]
    return float(min(vals, default=0.0))
