"""Finite-dimensional representations of bound quivers.

A representation stores only its nonzero vertex spaces and the matrices of
arrows between them (column vectors; M(a) maps M(source) to M(target)).
Homomorphisms are per-vertex matrices.  The Auslander-Reiten translate is
computed as D Tr from a minimal projective presentation, the transpose
living over the opposite algebra.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import sympy

from .errors import FieldTooSmall, Inconclusive, ParseError, PreconditionError, ShapeMismatch
from .linalg import Matrix, in_span, sparse_nullspace, sparse_rref
from .quiver import BoundQuiver, LinComb, Path

ISO_POOL = 17  # random coefficients are drawn from {0, ..., 16}
ISO_BUDGET = 64


class Rep:
    __slots__ = ("bq", "dims", "maps", "cache")

    def __init__(self, bq: BoundQuiver, dims: dict, maps: dict | None = None, check: bool = True):
        self.bq = bq
        F = bq.field
        Q = bq.quiver
        self.dims = {}
        for x, n in dims.items():
            if x not in Q.vertex_index:
                raise ShapeMismatch(f"unknown vertex {x}")
            if n < 0:
                raise ShapeMismatch("negative dimension")
            if n:
                self.dims[x] = n
        self.maps = {}
        maps = maps or {}
        for a in maps:
            if a not in Q.arrows:
                raise ShapeMismatch(f"unknown arrow {a}")
        for a, (s, t) in Q.arrows.items():
            ds, dt = self.dims.get(s, 0), self.dims.get(t, 0)
            if not ds or not dt:
                continue
            m = maps.get(a)
            if m is None:
                m = Matrix.zeros(dt, ds, F)
            if not isinstance(m, Matrix):
                m = Matrix(m, ds, F)
            if m.shape != (dt, ds):
                raise ShapeMismatch(f"arrow {a} needs a {dt}x{ds} matrix, got {m.shape}")
            self.maps[a] = m
        self.cache = {}
        if check:
            self.check_relations()

    # -- access

    def dim(self, x) -> int:
        return self.dims.get(x, 0)

    def mat(self, a) -> Matrix:
        m = self.maps.get(a)
        if m is None:
            s, t = self.bq.arrows[a]
            return Matrix.zeros(self.dim(t), self.dim(s), self.bq.field)
        return m

    @property
    def total_dim(self) -> int:
        return sum(self.dims.values())

    def dim_vector(self) -> tuple:
        return tuple(self.dims.get(x, 0) for x in self.bq.vertices)

    def support(self) -> list:
        return [x for x in self.bq.vertices if x in self.dims]

    def is_zero(self) -> bool:
        return not self.dims

    def eval_path(self, p: Path) -> Matrix:
        if not p.arrows:
            return Matrix.identity(self.dim(p.source), self.bq.field)
        m = self.mat(p.arrows[0])
        for a in p.arrows[1:]:
            m = self.mat(a) @ m
        return m

    def eval(self, lc: LinComb) -> Matrix | None:
        out = None
        for p, c in lc.items():
            term = self.eval_path(p).scale(c)
            out = term if out is None else out + term
        return out

    def check_relations(self) -> None:
        for rho in self.bq.relations:
            p0 = next(iter(rho))
            if not self.dim(p0.source) or not self.dim(p0.target):
                continue
            if not self.eval(rho).is_zero():
                raise ShapeMismatch(f"relation {rho} does not hold")

    def __repr__(self):
        dv = ",".join(f"{x}:{n}" for x, n in self.dims.items())
        return f"Rep({dv})"

    def same_as(self, other: "Rep") -> bool:
        return self.bq is other.bq and self.dims == other.dims and all(
            self.maps[a] == other.maps[a] for a in self.maps)

    def to_text(self, algebra_ref: str = "<algebra>") -> str:
        lines = [f"module over {algebra_ref}"]
        for x in self.support():
            lines.append(f"dim {x} {self.dims[x]}")
        for a, m in self.maps.items():
            if not m.is_zero():
                rows = "; ".join(" ".join(str(v) for v in r) for r in m.rows)
                lines.append(f"map {a} {rows}")
        return "\n".join(lines) + "\n"


def zero_rep(bq: BoundQuiver) -> Rep:
    return Rep(bq, {}, {}, check=False)


class RepMap:
    """Homomorphism of representations: one matrix per common support vertex."""

    __slots__ = ("source", "target", "mats")

    def __init__(self, source: Rep, target: Rep, mats: dict, check: bool = False):
        self.source = source
        self.target = target
        F = source.bq.field
        self.mats = {}
        for x in source.dims:
            if x in target.dims:
                m = mats.get(x)
                if m is None:
                    m = Matrix.zeros(target.dims[x], source.dims[x], F)
                if m.shape != (target.dims[x], source.dims[x]):
                    raise ShapeMismatch(f"map at {x} has shape {m.shape}")
                self.mats[x] = m
        if check:
            self.check()

    def at(self, x) -> Matrix:
        m = self.mats.get(x)
        if m is None:
            return Matrix.zeros(self.target.dim(x), self.source.dim(x), self.source.bq.field)
        return m

    def check(self) -> None:
        for a, (s, t) in self.source.bq.arrows.items():
            lhs = self.target.mat(a) @ self.at(s)
            rhs = self.at(t) @ self.source.mat(a)
            if lhs != rhs:
                raise ShapeMismatch(f"map does not commute with arrow {a}")

    def __matmul__(self, other: "RepMap") -> "RepMap":
        """Composition self . other."""
        mats = {}
        for x in other.source.dims:
            if x in self.target.dims and x in other.target.dims:
                mats[x] = self.mats[x] @ other.mats[x]
        return RepMap(other.source, self.target, mats)

    def __add__(self, other: "RepMap") -> "RepMap":
        return RepMap(self.source, self.target, {x: m + other.mats[x] for x, m in self.mats.items()})

    def scale(self, c) -> "RepMap":
        return RepMap(self.source, self.target, {x: m.scale(c) for x, m in self.mats.items()})

    def is_zero(self) -> bool:
        return all(m.is_zero() for m in self.mats.values())

    def is_iso(self) -> bool:
        if self.source.dims != self.target.dims:
            return False
        return all(m.rank() == m.nrows for m in self.mats.values())

    def inverse(self) -> "RepMap":
        return RepMap(self.target, self.source, {x: m.inverse() for x, m in self.mats.items()})

    def flat(self) -> dict:
        out = {}
        for x, m in self.mats.items():
            for i, r in enumerate(m.rows):
                for j, v in enumerate(r):
                    if v != 0:
                        out[(x, i, j)] = v
        return out


def identity_map(M: Rep) -> RepMap:
    return RepMap(M, M, {x: Matrix.identity(n, M.bq.field) for x, n in M.dims.items()})


def combine(maps: Sequence[RepMap], coeffs: Sequence) -> RepMap:
    F = maps[0].source.bq.field
    out = {}
    for x in maps[0].mats:
        acc = None
        for f, c in zip(maps, coeffs):
            if c == 0:
                continue
            t = f.mats[x].scale(c)
            acc = t if acc is None else acc + t
        out[x] = acc if acc is not None else Matrix.zeros(*maps[0].mats[x].shape, F)
    return RepMap(maps[0].source, maps[0].target, out)


# ---------------------------------------------------------------------------
# Hom spaces


def hom_space(M: Rep, N: Rep) -> list[RepMap]:
    """Basis of Hom(M, N) as the solution space of the intertwining equations.

    Results are memoized on M (modules are treated as immutable).
    """
    if M.bq is not N.bq:
        raise ShapeMismatch("modules over different algebras")
    memo = M.cache.setdefault("hom", {})
    hit = memo.get(id(N))
    if hit is not None and hit[0] is N:
        return list(hit[1])
    basis = _hom_space(M, N)
    memo[id(N)] = (N, basis)
    return list(basis)


def _hom_space(M: Rep, N: Rep) -> list[RepMap]:
    F = M.bq.field
    common = [x for x in M.bq.vertices if x in M.dims and x in N.dims]
    if not common:
        return []
    off = {}
    n = 0
    for x in common:
        off[x] = n
        n += N.dims[x] * M.dims[x]
    rows = []
    for a, (s, t) in M.bq.arrows.items():
        ms, nt = M.dim(s), N.dim(t)
        if not ms or not nt:
            continue
        # N(a) f_s - f_t M(a) = 0, an nt x ms system
        Na = N.maps.get(a) if s in off else None
        Ma = M.maps.get(a) if t in off else None
        if Na is not None:
            na_rows = [[(k, v) for k, v in enumerate(r) if v != 0] for r in Na.rows]
        if Ma is not None:
            ma_cols = [[(k, Ma.rows[k][j]) for k in range(Ma.nrows) if Ma.rows[k][j] != 0] for j in range(ms)]
        mts = M.dim(t)
        for i in range(nt):
            for j in range(ms):
                row = {}
                if Na is not None:
                    base = off[s]
                    for k, v in na_rows[i]:
                        idx = base + k * ms + j
                        row[idx] = row.get(idx, 0) + v
                if Ma is not None:
                    base = off[t]
                    for k, v in ma_cols[j]:
                        idx = base + i * mts + k
                        row[idx] = row.get(idx, 0) - v
                row = {k: F.norm(v) for k, v in row.items() if v != 0}
                if row:
                    rows.append(row)
    basis = []
    for vec in sparse_nullspace(rows, n, F):
        mats = {}
        for x in common:
            r, c = N.dims[x], M.dims[x]
            o = off[x]
            mats[x] = Matrix._raw(tuple(tuple(vec.get(o + i * c + j, 0) for j in range(c)) for i in range(r)),
                                  r, c, F)
        basis.append(RepMap(M, N, mats))
    return basis


def hom_dim(M: Rep, N: Rep) -> int:
    return len(hom_space(M, N))


def end_dim(M: Rep) -> int:
    return hom_dim(M, M)


# ---------------------------------------------------------------------------
# sub- and quotient representations


def _coords(basis: Matrix, vectors: Matrix) -> Matrix:
    return basis.solve(vectors)


def subrep(M: Rep, bases: dict) -> tuple[Rep, RepMap]:
    """Subrepresentation spanned by invariant subspaces (independent columns)."""
    dims = {x: b.ncols for x, b in bases.items() if b.ncols}
    maps = {}
    for a, (s, t) in M.bq.arrows.items():
        if dims.get(s) and dims.get(t):
            maps[a] = _coords(bases[t], M.mat(a) @ bases[s])
        elif dims.get(s):
            if not (M.mat(a) @ bases[s]).is_zero():
                raise ShapeMismatch(f"subspace is not invariant under {a}")
    S = Rep(M.bq, dims, maps, check=False)
    incl = RepMap(S, M, {x: bases[x] for x in dims})
    return S, incl


def _complement(B: Matrix, n: int) -> tuple[list[int], Matrix | None]:
    """Coordinates not hit by the pivots of span(B) and the reduction matrix to them."""
    F = B.field
    if B.ncols == 0:
        return list(range(n)), None
    ech = sparse_rref(B.T().sparse_rows(), n, F)
    piv = set(ech.pivots)
    free = [j for j in range(n) if j not in piv]
    # q(v) = (v - sum_p v_p row_p) restricted to free coordinates
    rows = []
    for j in free:
        r = [0] * n
        r[j] = 1
        for p in ech.pivots:
            v = ech.rows[p].get(j)
            if v:
                r[p] = F.norm(-v)
        rows.append(tuple(r))
    return free, Matrix._raw(tuple(rows), len(free), n, F)


def quotient(M: Rep, bases: dict) -> tuple[Rep, RepMap]:
    """Quotient of M by invariant subspaces; returns it with the projection."""
    F = M.bq.field
    proj = {}
    incl = {}
    dims = {}
    for x, n in M.dims.items():
        B = bases.get(x)
        if B is None:
            B = Matrix.zeros(n, 0, F)
        free, Qm = _complement(B, n)
        if Qm is None:
            Qm = Matrix.identity(n, F)
        dims[x] = len(free)
        proj[x] = Qm
        incl[x] = Matrix.from_columns([tuple(1 if i == j else 0 for i in range(n)) for j in free], n, F)
    maps = {}
    for a, (s, t) in M.bq.arrows.items():
        if dims.get(s) and dims.get(t):
            maps[a] = proj[t] @ M.mat(a) @ incl[s]
    C = Rep(M.bq, dims, maps, check=False)
    return C, RepMap(M, C, {x: proj[x] for x in dims if dims[x]})


def kernel(f: RepMap) -> tuple[Rep, RepMap]:
    M = f.source
    F = M.bq.field
    bases = {}
    for x, n in M.dims.items():
        if x in f.mats:
            bases[x] = f.mats[x].kernel_matrix()
        else:
            bases[x] = Matrix.identity(n, F)
    return subrep(M, bases)


def image(f: RepMap) -> tuple[Rep, RepMap]:
    bases = {x: m.column_space() for x, m in f.mats.items()}
    return subrep(f.target, bases)


def cokernel(f: RepMap) -> tuple[Rep, RepMap]:
    bases = {x: m.column_space() for x, m in f.mats.items()}
    return quotient(f.target, bases)


def radical_bases(M: Rep) -> dict:
    """Per vertex, a basis of rad M = sum of images of incoming arrows."""
    F = M.bq.field
    out = {}
    for x, n in M.dims.items():
        blocks = [M.maps[a] for a in M.bq.quiver.in_arrows[x] if a in M.maps]
        if blocks:
            out[x] = blocks[0].hstack(*blocks[1:]).column_space()
        else:
            out[x] = Matrix.zeros(n, 0, F)
    return out


def top(M: Rep) -> tuple[Rep, RepMap]:
    return quotient(M, radical_bases(M))


def top_dims(M: Rep) -> dict:
    return {x: M.dims[x] - b.ncols for x, b in radical_bases(M).items() if M.dims[x] - b.ncols}


def top_lifts(M: Rep) -> list[tuple[Hashable, tuple]]:
    """Vectors whose images form a basis of the top, vertex by vertex."""
    out = []
    for x, B in radical_bases(M).items():
        free, _ = _complement(B, M.dims[x])
        n = M.dims[x]
        out += [(x, tuple(1 if i == j else 0 for i in range(n))) for j in free]
    out.sort(key=lambda xv: M.bq.quiver.vertex_index[xv[0]])
    return out


# ---------------------------------------------------------------------------
# direct sums


@dataclass
class DirectSum:
    rep: Rep
    parts: list
    offsets: list  # offsets[i][x] = first coordinate of part i at vertex x

    def injection(self, i: int) -> RepMap:
        P = self.parts[i]
        F = P.bq.field
        mats = {}
        for x, n in P.dims.items():
            N = self.rep.dims[x]
            o = self.offsets[i][x]
            mats[x] = Matrix._raw(tuple(tuple(1 if r == o + c else 0 for c in range(n)) for r in range(N)), N, n, F)
        return RepMap(P, self.rep, mats)

    def projection(self, i: int) -> RepMap:
        P = self.parts[i]
        F = P.bq.field
        mats = {}
        for x, n in P.dims.items():
            N = self.rep.dims[x]
            o = self.offsets[i][x]
            mats[x] = Matrix._raw(tuple(tuple(1 if c == o + r else 0 for c in range(N)) for r in range(n)), n, N, F)
        return RepMap(self.rep, P, mats)


def direct_sum(parts: Sequence[Rep], bq: BoundQuiver | None = None) -> DirectSum:
    if bq is None:
        if not parts:
            raise PreconditionError("empty direct sum needs the algebra")
        bq = parts[0].bq
    F = bq.field
    dims: dict = {}
    offsets = []
    for P in parts:
        o = {}
        for x, n in P.dims.items():
            o[x] = dims.get(x, 0)
            dims[x] = o[x] + n
        offsets.append(o)
    maps = {}
    for a, (s, t) in bq.arrows.items():
        if not dims.get(s) or not dims.get(t):
            continue
        rows = [[0] * dims[s] for _ in range(dims[t])]
        for P, o in zip(parts, offsets):
            m = P.maps.get(a)
            if m is None:
                continue
            for i, r in enumerate(m.rows):
                for j, v in enumerate(r):
                    if v != 0:
                        rows[o[t] + i][o[s] + j] = v
        maps[a] = Matrix._raw(tuple(map(tuple, rows)), dims[t], dims[s], F)
    return DirectSum(Rep(bq, dims, maps, check=False), list(parts), offsets)


# ---------------------------------------------------------------------------
# projectives, injectives, simples


def projective(bq: BoundQuiver, x) -> Rep:
    cache = bq.__dict__.setdefault("_projectives", {})
    if x in cache:
        return cache[x]
    B = bq.basis
    F = bq.field
    dims = {y: len(B.paths(x, y)) for y in bq.vertices}
    maps = {}
    for a, (s, t) in bq.arrows.items():
        if not dims[s] or not dims[t]:
            continue
        idx = B.index(x, t)
        cols = []
        for p in B.paths(x, s):
            red = B.reduce_path(Path(x, t, p.arrows + (a,)))
            cols.append({idx[q]: c for q, c in red.items()})
        maps[a] = Matrix.from_sparse_columns(cols, dims[t], F)
    P = Rep(bq, dims, maps, check=False)
    cache[x] = P
    return P


def simple(bq: BoundQuiver, x) -> Rep:
    return Rep(bq, {x: 1}, {}, check=False)


def dual(M: Rep) -> Rep:
    """The vector-space dual, a representation of the opposite algebra."""
    op = M.bq.opposite()
    return Rep(op, dict(M.dims), {a: m.T() for a, m in M.maps.items()}, check=False)


def dual_map(f: RepMap) -> RepMap:
    return RepMap(dual(f.target), dual(f.source), {x: m.T() for x, m in f.mats.items()})


def injective(bq: BoundQuiver, x) -> Rep:
    return dual(projective(bq.opposite(), x))


def is_projective(M: Rep) -> bool:
    td = top_dims(M)
    return M.total_dim == sum(n * projective(M.bq, x).total_dim for x, n in td.items())


def projective_vertex(M: Rep):
    """The vertex x with M isomorphic to P_x, or None."""
    td = top_dims(M)
    if len(td) == 1:
        (x, n), = td.items()
        if n == 1 and projective(M.bq, x).total_dim == M.total_dim:
            return x
    return None


class ProjSum:
    """Direct sum of indecomposable projectives P_{g_1} + ... + P_{g_k}."""

    def __init__(self, bq: BoundQuiver, gens: Sequence):
        self.bq = bq
        self.gens = list(gens)
        self.ds = direct_sum([projective(bq, g) for g in self.gens], bq)
        self.rep = self.ds.rep

    def split(self, z, vec: Sequence) -> list[dict]:
        """Decompose a vector of rep(z) into path combinations, one per summand."""
        out = []
        B = self.bq.basis
        for i, g in enumerate(self.gens):
            paths = B.paths(g, z)
            o = self.ds.offsets[i].get(z, 0)
            out.append({p: vec[o + k] for k, p in enumerate(paths) if vec[o + k] != 0})
        return out

    def vector(self, z, comps: Sequence[dict]) -> list:
        vec = [0] * self.rep.dim(z)
        B = self.bq.basis
        for i, lc in enumerate(comps):
            idx = B.index(self.gens[i], z)
            o = self.ds.offsets[i].get(z, 0)
            for p, c in lc.items():
                vec[o + idx[p]] += c
        return vec


def proj_map(src: ProjSum, tgt: ProjSum, elems: Sequence[Sequence[dict]]) -> RepMap:
    """Map sending the generator of the i-th source summand to sum_j elems[i][j] in P_{t_j}.

    elems[i][j] combines paths from t_j to s_i.
    """
    bq = src.bq
    B = bq.basis
    F = bq.field
    mats = {}
    for z in src.rep.dims:
        if z not in tgt.rep.dims:
            continue
        cols = []
        for i, s in enumerate(src.gens):
            for q in B.paths(s, z):
                comps = []
                for j in range(len(tgt.gens)):
                    prod = {}
                    for p, c in elems[i][j].items():
                        qp = q.after(p)
                        prod[qp] = prod.get(qp, 0) + c
                    comps.append(B.reduce(prod))
                cols.append(tgt.vector(z, comps))
        mats[z] = Matrix.from_columns([tuple(F.norm(v) for v in c) for c in cols], tgt.rep.dims[z], F)
    return RepMap(src.rep, tgt.rep, mats)


@dataclass
class Presentation:
    """Minimal projective presentation P1 -> P0 -> M -> 0."""

    module: Rep
    P0: ProjSum
    P1: ProjSum
    elems: list  # elems[j][i]: path combination x_i -> y_j, image of the j-th generator of P1
    epi: RepMap

    def map(self) -> RepMap:
        return proj_map(self.P1, self.P0, self.elems)


def projective_cover(M: Rep) -> tuple[ProjSum, RepMap]:
    lifts = top_lifts(M)
    P0 = ProjSum(M.bq, [x for x, _ in lifts])
    B = M.bq.basis
    F = M.bq.field
    mats = {}
    for z in P0.rep.dims:
        if z not in M.dims:
            continue
        cols = []
        for (x, v) in lifts:
            vcol = Matrix.from_columns([v], M.dims[x], F)
            for q in B.paths(x, z):
                cols.append((M.eval_path(q) @ vcol).column(0))
        mats[z] = Matrix.from_columns(cols, M.dims[z], F)
    return P0, RepMap(P0.rep, M, mats)


def min_proj_presentation(M: Rep) -> Presentation:
    P0, epi = projective_cover(M)
    K, incl = kernel(epi)
    lifts = top_lifts(K)
    P1 = ProjSum(M.bq, [y for y, _ in lifts])
    elems = []
    for y, w in lifts:
        vec = incl.at(y).apply(w)
        elems.append(P0.split(y, vec))
    return Presentation(M, P0, P1, elems, epi)


def transpose(M: Rep) -> Rep:
    """Auslander-Bridger transpose, a module over the opposite algebra."""
    pres = min_proj_presentation(M)
    op = M.bq.opposite()
    if not pres.P1.gens:
        return zero_rep(op)
    src = ProjSum(op, pres.P0.gens)
    tgt = ProjSum(op, pres.P1.gens)
    elems = [[{p.reversed(): c for p, c in pres.elems[j][i].items()} for j in range(len(tgt.gens))]
             for i in range(len(src.gens))]
    elems = [[op.basis.reduce(e) for e in row] for row in elems]
    C, _ = cokernel(proj_map(src, tgt, elems))
    return C


def tau(M: Rep) -> Rep:
    return dual(transpose(M))


def tau_inverse(M: Rep) -> Rep:
    return transpose(dual(M))


# ---------------------------------------------------------------------------
# decomposition and isomorphism


def _trace_radical_dim(E: list[RepMap]) -> int:
    F = E[0].source.bq.field
    n = len(E)
    gram = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            t = sum((E[i].mats[x] @ E[j].mats[x]).trace() for x in E[i].mats)
            gram[i][j] = gram[j][i] = F.norm(t)
    return n - Matrix(gram, n, F).rank()


def is_local(M: Rep, E: list[RepMap] | None = None) -> bool:
    """Local endomorphism ring with residue field K (trace-form test, characteristic 0)."""
    if M.is_zero():
        return False
    E = hom_space(M, M) if E is None else E
    if len(E) == 1:
        return True
    if M.bq.field.characteristic:
        raise FieldTooSmall("trace-form radical needs characteristic zero")
    return len(E) - _trace_radical_dim(E) == 1


def _min_poly(phi: RepMap) -> list:
    """Coefficients (low degree first, monic) of the minimal polynomial of phi."""
    M = phi.source
    F = M.bq.field
    powers = [identity_map(M)]
    vecs = [powers[0].flat()]
    keys: dict = {}

    def col(k):
        if k not in keys:
            keys[k] = len(keys)
        return keys[k]

    while True:
        nxt = phi @ powers[-1]
        nv = nxt.flat()
        # solve sum c_i vec_i = nv
        cols = [{col(k): v for k, v in vec.items()} for vec in vecs]
        target = {col(k): v for k, v in nv.items()}
        n = len(vecs)
        rows_map: dict = {}
        for j, c in enumerate(cols):
            for r, v in c.items():
                rows_map.setdefault(r, {})[j] = v
        for r, v in target.items():
            rows_map.setdefault(r, {})[n] = v
        ech = sparse_rref(list(rows_map.values()), n + 1, F)
        if not ech.pivots or ech.pivots[-1] != n:
            coeffs = [0] * n
            for p in ech.pivots:
                coeffs[p] = ech.rows[p].get(n, 0)
            return [F.norm(-c) for c in coeffs] + [1]
        powers.append(nxt)
        vecs.append(nv)


def _poly_eval(coeffs: Sequence, phi: RepMap) -> RepMap:
    M = phi.source
    acc = None
    for c in reversed(coeffs):
        acc = identity_map(M).scale(c) if acc is None else (phi @ acc) + identity_map(M).scale(c)
    return acc if acc is not None else RepMap(M, M, {})


def _split_factor(coeffs: list, field) -> list | None:
    """A proper primary factor p^m of the polynomial, or None if it is primary."""
    x = sympy.Symbol("x")
    expr = sum(sympy.Rational(int(getattr(c, "numerator", c)), int(getattr(c, "denominator", 1))) * x**i
               for i, c in enumerate(coeffs))
    if field.characteristic:
        poly = sympy.Poly(expr, x, modulus=field.characteristic)
    else:
        poly = sympy.Poly(expr, x, domain="QQ")
    _, facs = poly.factor_list()
    if len(facs) < 2:
        return None
    f, m = facs[0]
    prim = (f**m).all_coeffs()[::-1]
    out = []
    for c in prim:
        r = sympy.Rational(c) if not field.characteristic else int(c) % field.characteristic
        if field.characteristic:
            out.append(field.coerce(int(r)))
        else:
            from fractions import Fraction
            out.append(field.coerce(Fraction(int(r.p), int(r.q))))
    return out


@dataclass
class Summand:
    rep: Rep
    inclusion: RepMap  # summand -> M


def decompose(M: Rep, seed: int = 0, trials: int = 32) -> list[Summand]:
    """Krull-Schmidt decomposition by Fitting splitting of endomorphisms."""
    if M.is_zero():
        return []
    rng = random.Random(seed)
    return _decompose(M, identity_map(M), rng, trials)


def _decompose(M: Rep, incl: RepMap, rng: random.Random, trials: int) -> list[Summand]:
    E = hom_space(M, M)
    if len(E) == 1:
        return [Summand(M, incl)]
    char0 = M.bq.field.characteristic == 0
    if char0 and len(E) - _trace_radical_dim(E) == 1:
        return [Summand(M, incl)]
    candidates = list(E)
    for _ in range(trials):
        candidates.append(combine(E, [rng.randrange(ISO_POOL) for _ in E]))
    for phi in candidates:
        mp = _min_poly(phi)
        fac = _split_factor(mp, M.bq.field)
        if fac is None:
            continue
        psi = _poly_eval(fac, phi)
        K, ki = kernel(psi)
        I, ii = image(psi)
        if K.is_zero() or I.is_zero():
            continue
        return _decompose(K, incl @ ki, rng, trials) + _decompose(I, incl @ ii, rng, trials)
    if char0:
        raise FieldTooSmall("no splitting endomorphism found; the residue algebra is not split over Q")
    raise FieldTooSmall("decomposition over a small prime field is inconclusive")


def is_indecomposable(M: Rep, seed: int = 0) -> bool:
    return len(decompose(M, seed)) == 1


@dataclass
class IsoResult:
    verdict: str  # 'yes', 'no' or 'inconclusive'
    witness: RepMap | None = None
    seed: int = 0
    reason: str = ""

    def __bool__(self) -> bool:
        if self.verdict == "inconclusive":
            raise Inconclusive(f"isomorphism test inconclusive (seed {self.seed}): {self.reason}")
        return self.verdict == "yes"


def is_isomorphic(M: Rep, N: Rep, seed: int = 0, budget: int = ISO_BUDGET,
                  indecomposable: bool | None = None) -> IsoResult:
    """Randomized search for an isomorphism, with an exact fallback for indecomposables."""
    if M.bq is not N.bq:
        raise ShapeMismatch("modules over different algebras")
    if M.dims != N.dims:
        return IsoResult("no", seed=seed, reason="dimension vectors differ")
    if M.is_zero():
        return IsoResult("yes", RepMap(M, N, {}), seed)
    H = hom_space(M, N)
    if not H:
        return IsoResult("no", seed=seed, reason="no homomorphisms")
    for f in H:
        if f.is_iso():
            return IsoResult("yes", f, seed)
    rng = random.Random(seed)
    tries = 0
    if len(H) > 1:
        for _ in range(budget):
            tries += 1
            f = combine(H, [rng.randrange(ISO_POOL) for _ in H])
            if f.is_iso():
                return IsoResult("yes", f, seed)
    H2 = hom_space(N, M)
    if not H2:
        return IsoResult("no", seed=seed, reason="no homomorphisms back")
    if len(hom_space(M, M)) != len(H) or len(hom_space(N, N)) != len(H2) or len(H) != len(H2):
        return IsoResult("no", seed=seed, reason="Hom dimensions differ")
    if indecomposable is None:
        try:
            indecomposable = is_local(M)
        except FieldTooSmall:
            indecomposable = False
    if indecomposable:
        # in a local ring the non-units form an ideal: an iso exists iff some g.f is a unit
        for f in H:
            for g in H2:
                if (g @ f).is_iso():
                    return IsoResult("yes", f, seed)
        return IsoResult("no", seed=seed, reason="all round trips lie in the radical")
    try:
        dm, dn = decompose(M, seed), decompose(N, seed)
    except FieldTooSmall as exc:
        return IsoResult("inconclusive", seed=seed, reason=str(exc))
    if len(dm) != len(dn):
        return IsoResult("no", seed=seed, reason="different numbers of summands")
    used = set()
    for s in dm:
        for k, t in enumerate(dn):
            if k not in used and is_isomorphic(s.rep, t.rep, seed, budget, indecomposable=True).verdict == "yes":
                used.add(k)
                break
        else:
            return IsoResult("no", seed=seed, reason="summands do not match")
    # Krull-Schmidt: matching indecomposable summands already decide the question
    return IsoResult("yes", seed=seed, reason=f"summands match pairwise; no global witness after {tries} trials")


def group_isoclasses(reps: Iterable[Rep], seed: int = 0) -> list[tuple[Rep, int]]:
    out: list[list] = []
    for R in reps:
        for entry in out:
            if is_isomorphic(entry[0], R, seed, indecomposable=True).verdict == "yes":
                entry[1] += 1
                break
        else:
            out.append([R, 1])
    return [(R, n) for R, n in out]


# ---------------------------------------------------------------------------
# Fac and approximations


def fac_contains(U: Rep | Sequence[Rep], X: Rep) -> bool:
    """Whether X is a quotient of a finite direct sum of copies of U."""
    Us = [U] if isinstance(U, Rep) else list(U)
    if X.is_zero():
        return True
    for x, n in X.dims.items():
        cols = []
        for Ui in Us:
            if not Ui.dim(x):
                continue
            for h in hom_space(Ui, X):
                cols += h.at(x).columns()
        if not cols or Matrix.from_columns(cols, n, X.bq.field).rank() < n:
            return False
    return True


@dataclass
class Approximation:
    """Minimal left approximation X -> W = U_{i_1} + ... + U_{i_k}."""

    map: RepMap
    target: DirectSum
    copies: list  # (index into the candidate list, Hom basis index)


def min_left_approx(X: Rep, Us: Sequence[Rep]) -> Approximation:
    """Minimal left add(Us)-approximation of X; Us are pairwise non-isomorphic indecomposables."""
    homs = [hom_space(X, U) for U in Us]
    copies = [(i, k) for i, H in enumerate(homs) for k in range(len(H))]
    between = {}

    def hom_between(i, j):
        if (i, j) not in between:
            between[(i, j)] = hom_space(Us[i], Us[j])
        return between[(i, j)]

    order = sorted(copies, key=lambda c: (-Us[c[0]].total_dim, c))
    current = list(copies)
    for c in order:
        rest = [d for d in current if d != c]
        i = c[0]
        target = homs[i][c[1]].flat()
        gens = []
        for d in rest:
            f = homs[d[0]][d[1]]
            for h in hom_between(d[0], i):
                gens.append((h @ f).flat())
        keys: dict = {}
        for g in gens + [target]:
            for k in g:
                keys.setdefault(k, len(keys))
        if in_span([{keys[k]: v for k, v in g.items()} for g in gens],
                   {keys[k]: v for k, v in target.items()}, len(keys), X.bq.field):
            current = rest
    ds = direct_sum([Us[i] for i, _ in current], X.bq)
    F = X.bq.field
    mats = {}
    for x, n in X.dims.items():
        if x not in ds.rep.dims:
            continue
        blocks = [homs[i][k].at(x) for i, k in current if Us[i].dim(x)]
        mats[x] = blocks[0].vstack(*blocks[1:]) if blocks else Matrix.zeros(0, n, F)
    return Approximation(RepMap(X, ds.rep, mats), ds, current)


# ---------------------------------------------------------------------------
# text format


def parse_module(text: str, bq: BoundQuiver) -> Rep:
    """Read ``dim <vertex> <n>`` and ``map <arrow> <row>; <row>; ...`` lines."""
    F = bq.field
    vertices = {str(v): v for v in bq.vertices}
    arrows = {str(a): a for a in bq.arrows}
    dims: dict = {}
    rows_of: dict = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split(None, 2)
        kw = toks[0]
        if kw == "module":
            continue
        if kw == "dim":
            if len(toks) != 3 or toks[1] not in vertices:
                raise ParseError("expected: dim <vertex> <n>", ln, 1)
            try:
                dims[vertices[toks[1]]] = int(toks[2])
            except ValueError:
                raise ParseError(f"bad dimension {toks[2]!r}", ln, len(toks[0]) + len(toks[1]) + 3) from None
        elif kw == "map":
            if len(toks) != 3 or toks[1] not in arrows:
                raise ParseError("expected: map <arrow> <rows>", ln, 1)
            try:
                rows = [[F.parse(x) for x in r.split()] for r in toks[2].split(";")]
            except ParseError:
                raise ParseError("bad matrix entry", ln, len(toks[0]) + len(toks[1]) + 3) from None
            rows_of[arrows[toks[1]]] = (ln, rows)
        else:
            raise ParseError(f"unknown keyword {kw!r}", ln, 1)
    maps = {}
    for a, (ln, rows) in rows_of.items():
        s, t = bq.arrows[a]
        ds, dt = dims.get(s, 0), dims.get(t, 0)
        if len(rows) != dt or any(len(r) != ds for r in rows):
            raise ParseError(f"map {a} must be {dt}x{ds}", ln, 1)
        if ds and dt:
            maps[a] = Matrix(rows, ds, F)
    try:
        return Rep(bq, dims, maps)
    except ShapeMismatch as exc:
        raise ParseError(str(exc)) from None


def load_module(path: str, bq: BoundQuiver) -> Rep:
    with open(path) as fh:
        return parse_module(fh.read(), bq)
