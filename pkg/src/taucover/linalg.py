"""Exact linear algebra over the rationals or a prime field.

Scalars over QQ are Python ints or Fractions (integral Fractions are folded
back to int).  Over GF(p) they are ints in [0, p).  All elimination goes
through a sparse Gauss-Jordan kernel working on dict rows, which keeps the
large intertwining systems cheap.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InconsistentSystem, ParseError, PreconditionError


class Field:
    """Common interface; subclasses fix the scalar arithmetic."""

    name = "field"
    characteristic = 0

    def coerce(self, x) -> int | Fraction:
        raise NotImplementedError

    def norm(self, x):
        return x

    def inv(self, x):
        raise NotImplementedError

    def parse(self, text: str):
        try:
            if "/" in text:
                p, q = text.split("/")
                return self.coerce(Fraction(int(p), int(q)))
            return self.coerce(int(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad scalar {text!r}") from exc

    def __repr__(self) -> str:
        return self.name


class Rationals(Field):
    name = "QQ"

    def coerce(self, x):
        if isinstance(x, bool):
            return int(x)
        if isinstance(x, int):
            return x
        if isinstance(x, Fraction):
            return x.numerator if x.denominator == 1 else x
        if isinstance(x, str):
            return self.parse(x)
        raise TypeError(f"cannot coerce {x!r} into QQ")

    def norm(self, x):
        if type(x) is Fraction and x.denominator == 1:
            return x.numerator
        return x

    def inv(self, x):
        if x == 1 or x == -1:
            return x
        if x == 0:
            raise ZeroDivisionError("inverse of zero")
        if type(x) is int:
            return Fraction(1, x)
        return self.norm(1 / x)

    def __eq__(self, other):
        return isinstance(other, Rationals)

    def __hash__(self):
        return hash("QQ")


class PrimeField(Field):
    """GF(p).  Experimental: decomposition over it may be inconclusive."""

    def __init__(self, p: int):
        if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
            raise PreconditionError(f"{p} is not prime")
        self.p = p
        self.characteristic = p
        self.name = f"GF({p})"

    def coerce(self, x):
        if isinstance(x, Fraction):
            return (x.numerator * pow(x.denominator, -1, self.p)) % self.p
        if isinstance(x, str):
            return self.parse(x)
        return int(x) % self.p

    def norm(self, x):
        return x % self.p

    def inv(self, x):
        if x % self.p == 0:
            raise ZeroDivisionError("inverse of zero")
        return pow(x, -1, self.p)

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self):
        return hash(("GF", self.p))


QQ = Rationals()


def GF(p: int) -> PrimeField:
    return PrimeField(p)


# ---------------------------------------------------------------------------
# sparse kernel


class Echelon:
    """Reduced row-echelon form of a sparse row system.

    ``pivots`` is the increasing list of pivot columns; ``rows[c]`` is the
    normalized row whose pivot is ``c``.
    """

    __slots__ = ("ncols", "pivots", "rows", "field")

    def __init__(self, ncols: int, pivots: list[int], rows: dict[int, dict], field: Field):
        self.ncols = ncols
        self.pivots = pivots
        self.rows = rows
        self.field = field

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def free_columns(self, upto: int | None = None) -> list[int]:
        n = self.ncols if upto is None else upto
        piv = set(self.pivots)
        return [c for c in range(n) if c not in piv]

    def nullspace(self, upto: int | None = None) -> list[dict[int, object]]:
        """Basis of the solution space of the homogeneous system, as sparse vectors."""
        n = self.ncols if upto is None else upto
        F = self.field
        by_free: dict[int, dict] = {c: {c: 1} for c in self.free_columns(n)}
        for p in self.pivots:
            if p >= n:
                continue
            for c, v in self.rows[p].items():
                if c != p and c in by_free:
                    by_free[c][p] = F.norm(-v)
        return [by_free[c] for c in sorted(by_free)]


def sparse_rref(rows: Iterable[dict[int, object]], ncols: int, field: Field = QQ) -> Echelon:
    """Gauss-Jordan elimination on dict rows (column -> nonzero scalar).

    Columns are processed left to right; at each column the sparsest
    candidate row becomes the pivot row.
    """
    F = field
    work: dict[int, dict] = {}
    colidx: dict[int, set] = defaultdict(set)
    for i, r in enumerate(rows):
        r = {c: F.norm(v) for c, v in r.items() if v != 0}
        if r:
            work[i] = r
            for c in r:
                colidx[c].add(i)
    pivots: list[int] = []
    prow: dict[int, dict] = {}
    done: set = set()
    for c in range(ncols):
        cands = [i for i in colidx.get(c, ()) if i not in done]
        if not cands:
            continue
        i0 = min(cands, key=lambda i: (len(work[i]), i))
        r0 = work[i0]
        s = F.inv(r0[c])
        if s != 1:
            for k in r0:
                r0[k] = F.norm(r0[k] * s)
        items = list(r0.items())
        for i in list(colidx[c]):
            if i == i0:
                continue
            r = work[i]
            f = r[c]
            for k, v in items:
                old = r.get(k)
                new = F.norm(-f * v) if old is None else F.norm(old - f * v)
                if new == 0:
                    if old is not None:
                        del r[k]
                        colidx[k].discard(i)
                else:
                    if old is None:
                        colidx[k].add(i)
                    r[k] = new
        done.add(i0)
        pivots.append(c)
        prow[c] = r0
    return Echelon(ncols, pivots, prow, F)


def sparse_nullspace(rows: Iterable[dict[int, object]], ncols: int, field: Field = QQ) -> list[dict]:
    """Basis of the solutions of a sparse homogeneous system.

    Pivots are chosen Markowitz-style (short rows, then short columns) to keep
    fill-in low; the basis is read off by back-substitution, one vector per
    free column in increasing order.
    """
    F = field
    work: dict[int, dict] = {}
    colidx: dict[int, set] = defaultdict(set)
    heap: list = []
    for i, r in enumerate(rows):
        r = {c: v for c, v in r.items() if v != 0}
        if r:
            work[i] = r
            for c in r:
                colidx[c].add(i)
            heap.append((len(r), i))
    # over Q with integer data the elimination stays fraction-free
    integral = F.characteristic == 0 and all(type(v) is int for r in work.values() for v in r.values())
    heapq.heapify(heap)
    order: list[tuple[int, dict]] = []
    while heap:
        n, i0 = heapq.heappop(heap)
        r0 = work.get(i0)
        if r0 is None or len(r0) != n:
            continue
        del work[i0]
        c0 = min(r0, key=lambda c: (len(colidx[c]), c))
        if not integral:
            s = F.inv(r0[c0])
            if s != 1:
                for k in r0:
                    r0[k] = F.norm(r0[k] * s)
        p0 = r0[c0]
        for k in r0:
            colidx[k].discard(i0)
        items = list(r0.items())
        for i in list(colidx[c0]):
            r = work[i]
            f = r[c0]
            if integral and p0 != 1:
                g = math.gcd(p0, f)
                a, f = p0 // g, f // g
                if a != 1:
                    for k in r:
                        r[k] *= a
            for k, v in items:
                old = r.get(k)
                new = -f * v if old is None else old - f * v
                if not integral:
                    new = F.norm(new)
                if new == 0:
                    if old is not None:
                        del r[k]
                        colidx[k].discard(i)
                else:
                    if old is None:
                        colidx[k].add(i)
                    r[k] = new
            if integral and r:
                g = math.gcd(*r.values())
                if g > 1:
                    for k in r:
                        r[k] //= g
            if r:
                heapq.heappush(heap, (len(r), i))
            else:
                del work[i]
        order.append((c0, r0))
    pivcols = {c for c, _ in order}
    free = [c for c in range(ncols) if c not in pivcols]
    basis = []
    for f in free:
        x = {f: 1}
        for c, r in reversed(order):
            acc = 0
            for k, v in r.items():
                if k != c:
                    xv = x.get(k)
                    if xv:
                        acc += v * xv
            if acc != 0:
                acc = F.norm(-acc * F.inv(r[c])) if integral else F.norm(-acc)
                if acc != 0:
                    x[c] = acc
        basis.append(x)
    return basis


# ---------------------------------------------------------------------------
# dense matrices


class Matrix:
    """Immutable dense matrix; entries are exact field scalars."""

    __slots__ = ("rows", "nrows", "ncols", "field")

    def __init__(self, rows: Sequence[Sequence], ncols: int | None = None, field: Field = QQ):
        self.rows = tuple(tuple(field.coerce(x) for x in r) for r in rows)
        self.nrows = len(self.rows)
        if ncols is None:
            if not self.rows:
                raise ValueError("empty matrix needs an explicit column count")
            ncols = len(self.rows[0])
        self.ncols = ncols
        self.field = field
        if any(len(r) != ncols for r in self.rows):
            raise ValueError("ragged matrix")

    @classmethod
    def _raw(cls, rows: tuple, nrows: int, ncols: int, field: Field) -> "Matrix":
        m = object.__new__(cls)
        m.rows = rows
        m.nrows = nrows
        m.ncols = ncols
        m.field = field
        return m

    @classmethod
    def zeros(cls, n: int, m: int, field: Field = QQ) -> "Matrix":
        return cls._raw(tuple((0,) * m for _ in range(n)), n, m, field)

    @classmethod
    def identity(cls, n: int, field: Field = QQ) -> "Matrix":
        return cls._raw(tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n)), n, n, field)

    @classmethod
    def from_columns(cls, cols: Sequence[Sequence], nrows: int, field: Field = QQ) -> "Matrix":
        return cls._raw(tuple(tuple(c[i] for c in cols) for i in range(nrows)), nrows, len(cols), field)

    @classmethod
    def from_sparse_columns(cls, cols: Sequence[dict], nrows: int, field: Field = QQ) -> "Matrix":
        rows = [[0] * len(cols) for _ in range(nrows)]
        for j, col in enumerate(cols):
            for i, v in col.items():
                rows[i][j] = v
        return cls._raw(tuple(map(tuple, rows)), nrows, len(cols), field)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other) -> bool:
        return isinstance(other, Matrix) and self.shape == other.shape and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.shape, self.rows))

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(x) for x in r) for r in self.rows)
        return f"Matrix({self.nrows}x{self.ncols}: {body})"

    def is_zero(self) -> bool:
        return all(x == 0 for r in self.rows for x in r)

    def column(self, j: int) -> tuple:
        return tuple(r[j] for r in self.rows)

    def columns(self) -> list[tuple]:
        return [self.column(j) for j in range(self.ncols)]

    def T(self) -> "Matrix":
        return Matrix._raw(tuple(zip(*self.rows)) if self.nrows else tuple(() for _ in range(self.ncols)),
                           self.ncols, self.nrows, self.field)

    def __add__(self, other: "Matrix") -> "Matrix":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} + {other.shape}")
        F = self.field
        return Matrix._raw(tuple(tuple(F.norm(a + b) for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows)),
                           self.nrows, self.ncols, F)

    def __neg__(self) -> "Matrix":
        F = self.field
        return Matrix._raw(tuple(tuple(F.norm(-a) for a in r) for r in self.rows), self.nrows, self.ncols, F)

    def __sub__(self, other: "Matrix") -> "Matrix":
        return self + (-other)

    def scale(self, c) -> "Matrix":
        F = self.field
        c = F.coerce(c)
        return Matrix._raw(tuple(tuple(F.norm(c * a) for a in r) for r in self.rows), self.nrows, self.ncols, F)

    def __matmul__(self, other: "Matrix") -> "Matrix":
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        F = self.field
        m = other.ncols
        srows = [[(j, b) for j, b in enumerate(r) if b != 0] for r in other.rows]
        zero = (0,) * m
        out = []
        for r in self.rows:
            acc = None
            for k, a in enumerate(r):
                if a == 0 or not srows[k]:
                    continue
                if acc is None:
                    acc = [0] * m
                for j, b in srows[k]:
                    acc[j] += a * b
            out.append(zero if acc is None else tuple(F.norm(x) for x in acc))
        return Matrix._raw(tuple(out), self.nrows, m, F)

    def apply(self, v: Sequence) -> tuple:
        F = self.field
        return tuple(F.norm(sum(a * b for a, b in zip(r, v) if a != 0 and b != 0)) for r in self.rows)

    def trace(self):
        return self.field.norm(sum(self.rows[i][i] for i in range(min(self.nrows, self.ncols))))

    def sparse_rows(self) -> list[dict]:
        return [{j: x for j, x in enumerate(r) if x != 0} for r in self.rows]

    # -- elimination-based operations

    def echelon(self) -> Echelon:
        return sparse_rref(self.sparse_rows(), self.ncols, self.field)

    def rref(self) -> tuple["Matrix", list[int]]:
        e = self.echelon()
        rows = []
        for c in e.pivots:
            r = [0] * self.ncols
            for k, v in e.rows[c].items():
                r[k] = v
            rows.append(tuple(r))
        rows += [(0,) * self.ncols] * (self.nrows - len(rows))
        return Matrix._raw(tuple(rows), self.nrows, self.ncols, self.field), list(e.pivots)

    def rank(self) -> int:
        return self.echelon().rank

    def nullspace(self) -> list[tuple]:
        """Basis of {v : self v = 0} as column tuples."""
        vecs = self.echelon().nullspace()
        return [tuple(v.get(i, 0) for i in range(self.ncols)) for v in vecs]

    def kernel_matrix(self) -> "Matrix":
        return Matrix.from_columns(self.nullspace(), self.ncols, self.field)

    def column_space(self) -> "Matrix":
        """Matrix whose columns are an independent subset of the columns spanning the image."""
        piv = self.echelon().pivots
        return Matrix.from_columns([self.column(j) for j in piv], self.nrows, self.field)

    def solve(self, b: "Matrix") -> "Matrix":
        """One solution X of self @ X == b; raises InconsistentSystem otherwise."""
        if b.nrows != self.nrows:
            raise ValueError("right-hand side has wrong row count")
        n = self.ncols
        rows = []
        for r, s in zip(self.rows, b.rows):
            row = {j: x for j, x in enumerate(r) if x != 0}
            row.update((n + j, x) for j, x in enumerate(s) if x != 0)
            rows.append(row)
        e = sparse_rref(rows, n + b.ncols, self.field)
        if e.pivots and e.pivots[-1] >= n:
            raise InconsistentSystem("linear system has no solution")
        out = [[0] * b.ncols for _ in range(n)]
        for p in e.pivots:
            for k, v in e.rows[p].items():
                if k >= n:
                    out[p][k - n] = v
        return Matrix._raw(tuple(map(tuple, out)), n, b.ncols, self.field)

    def inverse(self) -> "Matrix":
        if self.nrows != self.ncols:
            raise PreconditionError("only square matrices are invertible")
        if self.rank() != self.nrows:
            raise InconsistentSystem("matrix is singular")
        return self.solve(Matrix.identity(self.nrows, self.field))

    def hstack(self, *others: "Matrix") -> "Matrix":
        mats = (self,) + others
        return Matrix._raw(tuple(tuple(x for m in mats for x in m.rows[i]) for i in range(self.nrows)),
                           self.nrows, sum(m.ncols for m in mats), self.field)

    def vstack(self, *others: "Matrix") -> "Matrix":
        mats = (self,) + others
        return Matrix._raw(tuple(r for m in mats for r in m.rows), sum(m.nrows for m in mats),
                           self.ncols, self.field)

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "Matrix":
        return Matrix._raw(tuple(tuple(self.rows[i][j] for j in cols) for i in rows), len(rows), len(cols),
                           self.field)

    def power(self, k: int) -> "Matrix":
        out = Matrix.identity(self.nrows, self.field)
        base = self
        while k:
            if k & 1:
                out = out @ base
            base = base @ base
            k >>= 1
        return out


def block_diagonal(blocks: Sequence[Matrix], field: Field = QQ) -> Matrix:
    n = sum(b.nrows for b in blocks)
    m = sum(b.ncols for b in blocks)
    rows = [[0] * m for _ in range(n)]
    i0 = j0 = 0
    for b in blocks:
        for i, r in enumerate(b.rows):
            rows[i0 + i][j0:j0 + b.ncols] = r
        i0 += b.nrows
        j0 += b.ncols
    return Matrix._raw(tuple(map(tuple, rows)), n, m, field)


def coordinates(basis: Matrix, vectors: Matrix) -> Matrix:
    """Coefficients X with basis @ X == vectors, for a basis of independent columns."""
    return basis.solve(vectors)


def in_span(vectors: Sequence[dict], target: dict, ncols: int, field: Field = QQ) -> bool:
    """Whether the sparse vector ``target`` lies in the span of ``vectors``."""
    if not any(v != 0 for v in target.values()):
        return True
    e = sparse_rref(vectors, ncols, field)
    r = dict(target)
    for p in e.pivots:
        f = r.get(p)
        if f:
            for k, v in e.rows[p].items():
                nv = field.norm(r.get(k, 0) - f * v)
                if nv == 0:
                    r.pop(k, None)
                else:
                    r[k] = nv
    return not any(v != 0 for v in r.values())
