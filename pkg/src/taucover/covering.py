"""Galois coverings given by gradings on arrows, realized on finite windows.

A grading assigns a group element w(a) to every arrow.  The cover has
vertices (x, g) and arrows (a, g): (source a, g) -> (target a, w(a) g); a
path a_1 ... a_l (traversal order) has weight w(a_l) ... w(a_1).  The group
acts on the right, (x, g).h = (x, gh), and translates are
M^h(x, g) = M(x, gh).  Covers are never built globally: a window is the ball
of a given radius around a fiber vertex, with relations lifted wherever all
their terms fit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterable, Sequence

from .errors import (BudgetExceeded, Inconclusive, NotHomogeneous, ParseError, PreconditionError,
                     WindowTooSmall)
from .groups import AbelianGroup, FreeElem, FreeGroup, Tower, make_group
from .linalg import Matrix
from .modules import (Rep, RepMap, cokernel, decompose, hom_dim, is_isomorphic,
                      min_left_approx, projective, projective_vertex, tau, fac_contains)
from .quiver import BoundQuiver, Path, Quiver, Walk, lincomb_str, spanning_tree
from .tilting import StPair, cached_transpose, mutate, same_pair, seed_pair

MAX_RADIUS = 64


def coord_str(g) -> str:
    if isinstance(g, FreeElem):
        return "1" if g.is_identity() else str(g).replace(" ", ".")
    return str(g)


@dataclass(frozen=True, repr=False)
class Lift:
    """A vertex (x, g) or an arrow (a, g) of a cover; for arrows g is the source coordinate."""

    base: Hashable
    coord: object

    def __str__(self):
        return f"{self.base}_{coord_str(self.coord)}"

    __repr__ = __str__


def root_of(v) -> Hashable:
    while isinstance(v, Lift):
        v = v.base
    return v


# ---------------------------------------------------------------------------
# gradings


class Grading:
    def __init__(self, base: BoundQuiver, group, weights: dict | None = None):
        self.base = base
        self.group = group
        self.weights = {}
        for a, w in (weights or {}).items():
            if a not in base.arrows:
                raise PreconditionError(f"weight given for unknown arrow {a}")
            self.weights[a] = group(w)
        self._opposite = None

    def weight(self, a):
        w = self.weights.get(a)
        return self.group.identity() if w is None else w

    def path_weight(self, p: Path):
        g = self.group.identity()
        for a in p.arrows:
            g = self.weight(a) * g
        return g

    def walk_weight(self, walk: Walk):
        g = self.group.identity()
        for a, s in walk.steps:
            w = self.weight(a)
            g = (w if s == 1 else w.inverse()) * g
        return g

    def opposite(self) -> "Grading":
        if self._opposite is None:
            op = Grading(self.base.opposite(), self.group, {a: w.inverse() for a, w in self.weights.items()})
            op._opposite = self
            self._opposite = op
        return self._opposite

    def to_text(self) -> str:
        if isinstance(self.group, FreeGroup):
            lines = ["group free " + " ".join(self.group.names)]
        else:
            lines = [f"group abelian {self.group.rank}"]
        for a in self.base.arrows:
            if a in self.weights and not self.weights[a].is_identity():
                w = self.weights[a]
                lines.append(f"weight {a} {w if isinstance(w, FreeElem) else ' '.join(map(str, w.vec))}")
        return "\n".join(lines) + "\n"


@dataclass
class HomogeneityReport:
    violations: list  # (relation, [(path, weight), ...])

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        out = []
        for rho, ws in self.violations:
            parts = ", ".join(f"{p}: {coord_str(w)}" for p, w in ws)
            out.append(f"relation {lincomb_str(rho)} mixes weights ({parts})")
        return out


def check_homogeneous(g: Grading) -> HomogeneityReport:
    bad = []
    for rho in g.base.relations:
        ws = [(p, g.path_weight(p)) for p in sorted(rho, key=Path.sort_key)]
        if len({w for _, w in ws}) > 1:
            bad.append((rho, ws))
    return HomogeneityReport(bad)


def quotient_grading(g: Grading, phi: Callable, group=None) -> Grading:
    """Compose the weights with a homomorphism phi (integer-valued maps land in Z)."""
    target = group or AbelianGroup(1)
    weights = {}
    for a in g.base.arrows:
        v = phi(g.weight(a))
        weights[a] = target((v,)) if isinstance(v, int) else v
    return Grading(g.base, target, weights)


def parse_grading(text: str, base: BoundQuiver) -> Grading:
    group = None
    weights = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kw, _, rest = line.partition(" ")
        if kw == "group":
            if group is not None:
                raise ParseError("group declared twice", ln, 1)
            try:
                group = make_group(rest)
            except ParseError as exc:
                raise ParseError(str(exc), ln, 7) from None
        elif kw == "weight":
            if group is None:
                raise ParseError("weight before group declaration", ln, 1)
            name, _, word = rest.strip().partition(" ")
            arrow = next((a for a in base.arrows if str(a) == name), None)
            if arrow is None:
                raise ParseError(f"unknown arrow {name!r}", ln, 8)
            if arrow in weights:
                raise ParseError(f"duplicate weight for {name}", ln, 8)
            try:
                weights[arrow] = group(word.strip())
            except ParseError as exc:
                raise ParseError(str(exc), ln, 9 + len(name)) from None
        else:
            raise ParseError(f"unknown keyword {kw!r}", ln, 1)
    if group is None:
        raise ParseError("missing group declaration")
    return Grading(base, group, weights)


def load_grading(path: str, base: BoundQuiver) -> Grading:
    with open(path) as fh:
        return parse_grading(fh.read(), base)


# ---------------------------------------------------------------------------
# windows


class CoverWindow:
    """The radius-R ball around (center, 1) in the cover defined by a grading."""

    def __init__(self, grading: Grading, center, radius: int, bq: BoundQuiver, dist: dict):
        self.grading = grading
        self.center = center
        self.radius = radius
        self.bq = bq
        self.dist = dist
        self._opposite = None

    @property
    def base(self) -> BoundQuiver:
        return self.grading.base

    @cached_property
    def bound(self) -> int:
        return local_bound(self.base)

    @property
    def vertices(self):
        return self.bq.vertices

    def __repr__(self):
        return f"CoverWindow(center={self.center}, radius={self.radius}, vertices={len(self.dist)})"

    def vertex(self, x, g=None) -> Lift:
        grp = self.grading.group
        return Lift(x, grp.identity() if g is None else grp(g))

    def find_vertex(self, label: str) -> Lift:
        for v in self.bq.vertices:
            if str(v) == label:
                return v
        raise PreconditionError(f"vertex {label} is not in the window")

    def fiber(self, x) -> list[Lift]:
        return [v for v in self.bq.vertices if v.base == x]

    def fiber_point(self, x) -> Lift:
        """(x, 1) when it lies in the window, else the fiber vertex nearest the center."""
        v = self.vertex(x)
        if v in self.dist:
            return v
        over = self.fiber(x)
        if not over:
            raise WindowTooSmall(f"no vertex over {x} in the window")
        return over[0]

    def is_interior(self, v) -> bool:
        return v in self.dist and self.dist[v] <= self.radius - self.bound

    def in_margin(self, v) -> bool:
        return v in self.dist and self.dist[v] <= self.radius - 2 * self.bound

    def require(self, M: Rep, where: str = "interior") -> None:
        test = self.is_interior if where == "interior" else self.in_margin
        bad = [v for v in M.dims if not test(v)]
        if bad:
            raise WindowTooSmall(f"support vertex {bad[0]} is outside the window {where} (radius {self.radius})")

    def opposite(self) -> "CoverWindow":
        if self._opposite is None:
            op = CoverWindow(self.grading.opposite(), self.center, self.radius, self.bq.opposite(), self.dist)
            op._opposite = self
            self._opposite = op
        return self._opposite

    def enlarged(self, radius: int) -> "CoverWindow":
        return build_window(self.grading, self.center, radius)


def build_window(g: Grading, center, radius: int) -> CoverWindow:
    base = g.base
    Q = base.quiver
    if center not in Q.vertex_index:
        raise PreconditionError(f"unknown center vertex {center}")
    N = local_bound(base)
    if radius < N:
        raise WindowTooSmall(f"radius {radius} is below the nilpotency bound {N}; the window has no interior")
    rep = check_homogeneous(g)
    if not rep.ok:
        raise NotHomogeneous("; ".join(rep.lines()))
    key = lambda a: str(a)
    start = Lift(center, g.group.identity())
    dist = {start: 0}
    order = [start]
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if dist[v] == radius:
            continue
        x, h = v.base, v.coord
        steps = [(a, 1) for a in Q.out_arrows[x]] + [(a, -1) for a in Q.in_arrows[x]]
        for a, s in sorted(steps, key=lambda st: (key(st[0]), -st[1])):
            if s == 1:
                u = Lift(Q.target(a), g.weight(a) * h)
            else:
                u = Lift(Q.source(a), g.weight(a).inverse() * h)
            if u not in dist:
                dist[u] = dist[v] + 1
                order.append(u)
                queue.append(u)
    arrows = {}
    for v in order:
        for a in sorted(Q.out_arrows[v.base], key=key):
            u = Lift(Q.target(a), g.weight(a) * v.coord)
            if u in dist:
                arrows[Lift(a, v.coord)] = (v, u)
    WQ = Quiver(order, arrows)
    relations = []
    for rho in base.relations:
        x = next(iter(rho)).source
        for v in order:
            if v.base != x:
                continue
            lifted = {}
            for p, c in rho.items():
                lp = _lift_path(p, v, g, arrows)
                if lp is None:
                    break
                lifted[lp] = c
            else:
                relations.append(lifted)
    name = f"window({base.name or 'A'}, {center}, {radius})"
    bq = BoundQuiver(WQ, relations, base.field, base.cap, name)
    bq.local_bound = N
    return CoverWindow(g, center, radius, bq, dist)


def local_bound(bq: BoundQuiver) -> int:
    """Nilpotency bound that holds away from window edges (a window's own bound is inflated there)."""
    return getattr(bq, "local_bound", None) or bq.nilpotency


def _lift_path(p: Path, start: Lift, g: Grading, arrows: dict) -> Path | None:
    h = start.coord
    out = []
    for a in p.arrows:
        b = Lift(a, h)
        if b not in arrows:
            return None
        out.append(b)
        h = g.weight(a) * h
    end = Lift(p.target, h)
    return Path(start, end, tuple(out))


@dataclass
class CoveringReport:
    failures: list  # (vertex, reason)
    checked: int

    @property
    def ok(self) -> bool:
        return not self.failures


def covering_check(cw: CoverWindow) -> CoveringReport:
    """Local bijections on arrows and bijectivity of the push-down on Hom spaces at interior vertices."""
    base = cw.base
    Q, WQ = base.quiver, cw.bq.quiver
    B = base.basis
    WB = cw.bq.basis
    failures = []
    checked = 0
    for v in cw.bq.vertices:
        if not cw.is_interior(v):
            continue
        checked += 1
        x = v.base
        outs = sorted(str(b.base) for b in WQ.out_arrows[v])
        ins = sorted(str(b.base) for b in WQ.in_arrows[v])
        if outs != sorted(map(str, Q.out_arrows[x])) or ins != sorted(map(str, Q.in_arrows[x])):
            failures.append((v, "arrow neighbourhood is not mapped bijectively"))
            continue
        for y in base.vertices:
            idx = B.index(x, y)
            rows = []
            for z in cw.fiber(y):
                for p in WB.paths(v, z):
                    red = B.reduce_path(Path(x, y, tuple(b.base for b in p.arrows)))
                    rows.append({idx[q]: c for q, c in red.items()})
            n = len(idx)
            rank = Matrix.from_sparse_columns(rows, n, base.field).rank() if rows else 0
            if len(rows) != n or rank != n:
                failures.append((v, f"paths to the fiber over {y}: {len(rows)} lifted, rank {rank}, expected {n}"))
    return CoveringReport(failures, checked)


def without_arrow(cw: CoverWindow, arrow: Lift) -> CoverWindow:
    """A copy of the window with one arrow (and the relations through it) removed."""
    Q = cw.bq.quiver
    if arrow not in Q.arrows:
        raise PreconditionError(f"arrow {arrow} is not in the window")
    arrows = {b: st for b, st in Q.arrows.items() if b != arrow}
    rels = [r for r in cw.bq.relations if all(arrow not in p.arrows for p in r)]
    bq = BoundQuiver(Quiver(Q.vertices, arrows), rels, cw.bq.field, cw.bq.cap, cw.bq.name + "-cut")
    return CoverWindow(cw.grading, cw.center, cw.radius, bq, cw.dist)


# ---------------------------------------------------------------------------
# push-down, pull-up, translates


def push_down_along(M: Rep, target: BoundQuiver, vertex_map: Callable, arrow_map: Callable) -> Rep:
    """Sum of the fibers of M over each target vertex, arrows assembled blockwise."""
    F = target.field
    offsets = {}
    dims: dict = {}
    for v in M.bq.vertices:
        n = M.dim(v)
        if not n:
            continue
        x = vertex_map(v)
        offsets[v] = dims.get(x, 0)
        dims[x] = offsets[v] + n
    grids = {}
    for b, m in M.maps.items():
        s, t = M.bq.arrows[b]
        a = arrow_map(b)
        xs, xt = target.arrows[a]
        grid = grids.get(a)
        if grid is None:
            grid = grids[a] = [[0] * dims[xs] for _ in range(dims[xt])]
        os, ot = offsets[s], offsets[t]
        for i, row in enumerate(m.rows):
            for j, val in enumerate(row):
                if val != 0:
                    grid[ot + i][os + j] = val
    maps = {a: Matrix._raw(tuple(map(tuple, grid)), len(grid), len(grid[0]), F) for a, grid in grids.items()}
    return Rep(target, dims, maps)


def push_down(M: Rep, cw: CoverWindow, check: bool = True) -> Rep:
    if check:
        cw.require(M, "interior")
    return push_down_along(M, cw.base, lambda v: v.base, lambda b: b.base)


def push_down_map(f: RepMap, cw: CoverWindow) -> RepMap:
    src, tgt = push_down(f.source, cw), push_down(f.target, cw)
    F = cw.base.field
    mats = {}
    for x in src.dims:
        if x not in tgt.dims:
            continue
        rows = [[0] * src.dims[x] for _ in range(tgt.dims[x])]
        so = to = 0
        soff, toff = {}, {}
        for v in cw.bq.vertices:
            if v.base != x:
                continue
            soff[v], toff[v] = so, to
            so += f.source.dim(v)
            to += f.target.dim(v)
        for v, m in f.mats.items():
            if v.base != x:
                continue
            for i, row in enumerate(m.rows):
                for j, val in enumerate(row):
                    rows[toff[v] + i][soff[v] + j] = val
        mats[x] = Matrix._raw(tuple(map(tuple, rows)), tgt.dims[x], src.dims[x], F)
    return RepMap(src, tgt, mats)


def translate(M: Rep, g, cw: CoverWindow, where: str = "window") -> Rep:
    """M^g, supported on supp(M).g^-1; 'where' is 'window' or 'interior'."""
    ginv = g.inverse()
    move = {v: Lift(v.base, v.coord * ginv) for v in M.dims}
    for v, u in move.items():
        ok = u in cw.dist if where == "window" else cw.is_interior(u)
        if not ok:
            raise WindowTooSmall(f"translate by {coord_str(g)} moves {v} outside the window {where}")
    maps = {Lift(b.base, b.coord * ginv): m for b, m in M.maps.items()}
    return Rep(cw.bq, {move[v]: n for v, n in M.dims.items()}, maps, check=False)


def pull_up(V: Rep, cw: CoverWindow) -> Rep:
    """V composed with the covering functor, restricted to the window."""
    if V.bq is not cw.base:
        raise PreconditionError("module is not over the base algebra")
    dims = {v: V.dim(v.base) for v in cw.bq.vertices}
    maps = {b: V.maps[b.base] for b in cw.bq.arrows if b.base in V.maps}
    return Rep(cw.bq, dims, maps)


def tau_window(M: Rep, cw: CoverWindow) -> Rep:
    cw.require(M, "margin")
    return tau(M)


def projective_at(cw: CoverWindow, v: Lift) -> Rep:
    P = projective(cw.bq, v)
    cw.require(P, "interior")
    return P


def overlap_elements(M: Rep, T: Rep) -> list:
    """All g with supp(M) meeting supp(T^g), i.e. g = h^-1 k for (x, h) in M and (x, k) in T."""
    by_base: dict = {}
    for v in T.dims:
        by_base.setdefault(v.base, []).append(v.coord)
    found = {}
    for v in M.dims:
        for k in by_base.get(v.base, ()):
            g = v.coord.inverse() * k
            found[g] = True
    return sorted(found, key=lambda g: g.sort_key())


# ---------------------------------------------------------------------------
# (G, tau)-rigidity


def is_tau_rigid_window(M: Rep, cw: CoverWindow) -> bool:
    return hom_dim(M, tau_window(M, cw)) == 0


def is_G_tau_rigid(M: Rep, cw: CoverWindow) -> bool:
    return not _twisted_homs(M, M, cw, stop_early=True)


def _twisted_homs(M: Rep, N: Rep, cw: CoverWindow, stop_early: bool = False) -> dict:
    """Nonzero dim Hom(M, tau(N)^g), keyed by g."""
    tN = tau_window(N, cw)
    out = {}
    for g in overlap_elements(M, tN):
        d = hom_dim(M, translate(tN, g, cw))
        if d:
            out[g] = d
            if stop_early:
                break
    return out


@dataclass
class NoHomReport:
    base_side: int
    cover_side: int
    terms: dict  # g -> dim Hom(M, tau(N)^g), nonzero terms only

    @property
    def equal(self) -> bool:
        return self.base_side == self.cover_side


def nohom_check(M: Rep, N: Rep, cw: CoverWindow) -> NoHomReport:
    """dim Hom(F M, tau F N) downstairs against the sum over g of dim Hom(M, tau(N)^g) upstairs."""
    down = hom_dim(push_down(M, cw), tau(push_down(N, cw)))
    terms = _twisted_homs(M, N, cw)
    return NoHomReport(down, sum(terms.values()), terms)


# ---------------------------------------------------------------------------
# orbit pairs and their mutation


def normalize(M: Rep, cw: CoverWindow) -> tuple[Rep, object]:
    """The orbit representative whose least support vertex sits at the window's fiber point.

    Returns (representative, g) with representative = M^g.
    """
    idx = cw.base.quiver.vertex_index
    x = min((v.base for v in M.dims), key=idx.__getitem__)
    k = min((v.coord for v in M.dims if v.base == x), key=lambda c: c.sort_key())
    g = cw.fiber_point(x).coord.inverse() * k
    if g.is_identity():
        return M, g
    return translate(M, g, cw), g


@dataclass
class OrbitPair:
    cw: CoverWindow
    reps: tuple  # normalized indecomposable window modules, one per orbit
    proj: tuple  # base vertices standing for orbits of projectives

    def __post_init__(self):
        self.reps = tuple(self.reps)
        idx = self.cw.base.quiver.vertex_index
        self.proj = tuple(sorted(set(self.proj), key=idx.__getitem__))

    @property
    def size(self) -> int:
        return len(self.reps) + len(self.proj)

    def position(self, k: int):
        if k < len(self.reps):
            return ("module", self.reps[k])
        if k < self.size:
            return ("vertex", self.proj[k - len(self.reps)])
        raise PreconditionError(f"position {k} out of range")

    def push_down(self) -> StPair:
        return StPair(self.cw.base, tuple(push_down(X, self.cw) for X in self.reps), self.proj)

    def label(self) -> str:
        mods = " + ".join("{" + ",".join(f"{v}:{n}" for v, n in X.dims.items()) + "}" for X in self.reps) or "0"
        return f"{mods} | {{{','.join(map(str, self.proj))}}}"


def lift_pair(p: StPair, cw: CoverWindow) -> OrbitPair:
    """Lift a pair whose module part is projective (such as (A, 0) or (0, A))."""
    reps = []
    for X in p.summands:
        x = projective_vertex(X)
        if x is None:
            raise PreconditionError("only pairs with projective module part have a canonical lift")
        reps.append(projective_at(cw, cw.fiber_point(x)))
    return OrbitPair(cw, tuple(reps), p.proj)


def _translates_near(X: Rep, Us: Sequence[Rep], cw: CoverWindow) -> list[Rep]:
    out = []
    for U in Us:
        for g in overlap_elements(X, U):
            out.append(translate(U, g, cw))
    return out


def orbit_support(Us: Iterable[Rep]) -> set:
    return {v.base for U in Us for v in U.dims}


def is_support_G_tilting(p: OrbitPair, seed: int = 0) -> bool:
    cw = p.cw
    for i, X in enumerate(p.reps):
        for Y in p.reps[:i]:
            if X.dims.keys() == Y.dims.keys() and is_isomorphic(X, Y, seed, indecomposable=True):
                raise PreconditionError("two representatives lie in the same orbit")
    if orbit_support(p.reps) & set(p.proj):
        return False
    for X in p.reps:
        for Y in p.reps:
            if _twisted_homs(X, Y, cw, stop_early=True):
                return False
    return p.size == len(cw.base.vertices)


@dataclass
class OrbitStep:
    pair: OrbitPair
    direction: str
    multiplicity: int = 0  # copies of the new orbit in the cokernel (left mutations)
    translates: list = field(default_factory=list)  # the g_k with cokernel = sum of Z^{g_k}


def orbit_direction(p: OrbitPair, k: int) -> str:
    kind, X = p.position(k)
    if kind == "vertex":
        return "right"
    U = [Y for i, Y in enumerate(p.reps) if i != k]
    cands = _translates_near(X, U, p.cw)
    return "right" if cands and fac_contains(cands, X) else "left"


def orbit_mutate_left(p: OrbitPair, k: int, seed: int = 0) -> OrbitStep:
    cw = p.cw
    kind, X = p.position(k)
    if kind != "module":
        raise PreconditionError("left mutation is only defined at module orbits")
    U = [Y for i, Y in enumerate(p.reps) if i != k]
    cands = _translates_near(X, U, cw)
    if cands and fac_contains(cands, X):
        raise PreconditionError("orbit lies in Fac of the rest; this is a right mutation")
    if cands:
        Yrep, _ = cokernel(min_left_approx(X, cands).map)
    else:
        Yrep = Rep(cw.bq, {}, {}, check=False)
    if Yrep.is_zero():
        support = orbit_support(U)
        proj = [x for x in cw.base.vertices if x not in support]
        return OrbitStep(OrbitPair(cw, tuple(U), tuple(proj)), "left")
    parts = [normalize(s.rep, cw) for s in decompose(Yrep, seed)]
    Z, _ = parts[0]
    for R, _ in parts[1:]:
        if not (R.dims.keys() == Z.dims.keys() and is_isomorphic(Z, R, seed, indecomposable=True)):
            raise Inconclusive("cokernel of the orbit approximation spans more than one orbit")
    cw.require(Z, "interior")
    gs = [g.inverse() for _, g in parts]
    return OrbitStep(OrbitPair(cw, tuple(U) + (Z,), p.proj), "left", len(parts), gs)


def orbit_dagger(p: OrbitPair) -> tuple[OrbitPair, dict]:
    """(T, P) -> (Tr T_np + P*, T_pr*) on the opposite window, with the position map."""
    cw = p.cw
    op = cw.opposite()
    nonproj, projv = [], []
    for i, X in enumerate(p.reps):
        v = projective_vertex(X)
        if v is None:
            nonproj.append(i)
        else:
            projv.append((i, v.base))
    reps = [normalize(cached_transpose(p.reps[i]), op)[0] for i in nonproj]
    reps += [projective_at(op, op.fiber_point(x)) for x in p.proj]
    q = OrbitPair(op, tuple(reps), tuple(x for _, x in projv))
    pos = {}
    for n, i in enumerate(nonproj):
        pos[i] = n
    for n, x in enumerate(p.proj):
        pos[len(p.reps) + n] = len(nonproj) + n
    for i, x in projv:
        pos[i] = len(q.reps) + q.proj.index(x)
    return q, pos


def orbit_mutate_right(p: OrbitPair, k: int, seed: int = 0) -> OrbitStep:
    d, pos = orbit_dagger(p)
    k2 = pos[k]
    if k2 >= len(d.reps):
        raise PreconditionError("position maps to a projective orbit of the dual pair")
    step = orbit_mutate_left(d, k2, seed)
    back, _ = orbit_dagger(step.pair)
    keep = [X for i, X in enumerate(p.reps) if i != k]
    pool = list(back.reps)
    ordered = []
    for X in keep:
        for n, Y in enumerate(pool):
            if X.dims == Y.dims and is_isomorphic(X, Y, seed, indecomposable=True):
                ordered.append(X)
                pool.pop(n)
                break
    return OrbitStep(OrbitPair(p.cw, tuple(ordered) + tuple(pool), back.proj), "right")


def orbit_mutate(p: OrbitPair, k: int, seed: int = 0) -> OrbitStep:
    if orbit_direction(p, k) == "left":
        return orbit_mutate_left(p, k, seed)
    return orbit_mutate_right(p, k, seed)


# ---------------------------------------------------------------------------
# lockstep exploration


@dataclass
class CommuteReport:
    ok: bool
    nodes: int
    checks: int
    radius: int
    failure: str = ""
    seed: int = 0


def _lockstep(g: Grading, start: StPair, center, radius: int, seed: int, depth: int | None,
              budget: int | None = None):
    """Breadth-first mutation downstairs with orbit mutation upstairs in step.

    Yields (depth, base pair, orbit pair, edge, new) where edge is
    (parent, position, base direction, cover direction) or None for the start.
    """
    cw = build_window(g, center, radius)
    up = lift_pair(start, cw)
    nodes = [start]
    buckets = {start.key(): [0]}
    yield 0, start, up, None, True
    frontier = [(0, start, up)]
    d = 0
    while frontier and (depth is None or d < depth):
        d += 1
        nxt = []
        for i, p, q in frontier:
            for k in range(p.size):
                p2, direction = mutate(p, k, seed)
                step = orbit_mutate(q, k, seed)
                j = next((c for c in buckets.get(p2.key(), []) if same_pair(p2, nodes[c], seed)), None)
                yield d, p2, step.pair, (i, k, direction, step.direction), j is None
                if j is None:
                    j = len(nodes)
                    nodes.append(p2)
                    buckets.setdefault(p2.key(), []).append(j)
                    nxt.append((j, p2, step.pair))
                    if budget is not None and len(nodes) > budget:
                        return
        frontier = nxt


def _compare(p: StPair, q: OrbitPair, edge, seed: int) -> str:
    if edge is not None and edge[2] != edge[3]:
        return f"direction mismatch at position {edge[1]}: base {edge[2]}, cover {edge[3]}"
    down = q.push_down()
    if not same_pair(down, p, seed):
        return f"push-down {down.label()} differs from {p.label()}"
    return ""


def verify_commute(g: Grading, start: StPair | None = None, depth: int = 2, center=None,
                   radius: int | None = None, seed: int = 0) -> CommuteReport:
    """Mutate downstairs and upstairs in step; every push-down must match the base node.

    The window radius starts at 3N + 1 and doubles (up to 64) whenever it is too small.
    """
    base = g.base
    start = start if start is not None else seed_pair(base)
    center = base.vertices[0] if center is None else center
    r = radius or 3 * base.nilpotency + 1
    while True:
        try:
            checks = nodes = 0
            for _, p, q, edge, new in _lockstep(g, start, center, r, seed, depth):
                checks += 1
                nodes += new
                why = _compare(p, q, edge, seed)
                if why:
                    return CommuteReport(False, nodes, checks, r, why, seed)
            return CommuteReport(True, nodes, checks, r, "", seed)
        except WindowTooSmall:
            if r >= MAX_RADIUS:
                raise
            r = min(2 * r, MAX_RADIUS)


@dataclass
class LiftResult:
    pair: OrbitPair
    depth: int
    radius: int


def lift_via_mutation_path(target: StPair, g: Grading, budget: int = 200, center=None,
                           radius: int | None = None, seed: int = 0) -> LiftResult:
    base = g.base
    center = base.vertices[0] if center is None else center
    r = radius or 3 * base.nilpotency + 1
    while True:
        try:
            for d, p, q, edge, _ in _lockstep(g, seed_pair(base), center, r, seed, None, budget):
                why = _compare(p, q, edge, seed)
                if why:
                    raise Inconclusive(f"lockstep divergence: {why}")
                if same_pair(p, target, seed):
                    return LiftResult(q, d, r)
            raise BudgetExceeded(f"target not reached within {budget} pairs")
        except WindowTooSmall:
            if r >= MAX_RADIUS:
                raise
            r = min(2 * r, MAX_RADIUS)


# ---------------------------------------------------------------------------
# strings


def check_string(bq: BoundQuiver, walk: Walk) -> None:
    if not bq.is_monomial():
        raise PreconditionError("string modules need monomial relations")
    walk.vertices(bq.quiver)
    for (a, s), (b, t) in zip(walk.steps, walk.steps[1:]):
        if a == b and s == -t:
            raise PreconditionError(f"walk is not reduced at {a}")
    rels = [next(iter(r)).arrows for r in bq.relations]
    run: list = []
    sign = 0
    for a, s in list(walk.steps) + [(None, 0)]:
        if s != sign and run:
            arrows = tuple(run) if sign == 1 else tuple(reversed(run))
            for r in rels:
                for i in range(len(arrows) - len(r) + 1):
                    if arrows[i:i + len(r)] == r:
                        raise PreconditionError(f"walk contains the zero path {'.'.join(map(str, r))}")
            run = []
        sign = s
        if a is not None:
            run.append(a)


def string_module(bq: BoundQuiver, walk: Walk) -> Rep:
    """One basis vector per visited vertex; direct letters act by 1 between neighbours."""
    check_string(bq, walk)
    vs = walk.vertices(bq.quiver)
    slot = []
    dims: dict = {}
    for v in vs:
        slot.append(dims.get(v, 0))
        dims[v] = slot[-1] + 1
    entries: dict = {}
    for n, (a, s) in enumerate(walk.steps):
        i, j = (n, n + 1) if s == 1 else (n + 1, n)  # a maps basis vector i to basis vector j
        entries.setdefault(a, []).append((slot[j], slot[i]))
    F = bq.field
    maps = {}
    for a, ones in entries.items():
        src, tgt = bq.arrows[a]
        rows = [[0] * dims[src] for _ in range(dims[tgt])]
        for r, c in ones:
            rows[r][c] = 1
        maps[a] = Matrix(rows, dims[src], F)
    return Rep(bq, dims, maps)


def lift_walk(walk: Walk, cw: CoverWindow, start: Lift | None = None) -> Walk:
    """The unique lift of a walk starting at a given fiber point (default (start, 1))."""
    g = cw.grading
    v = start if start is not None else cw.vertex(walk.start)
    if v.base != walk.start:
        raise PreconditionError(f"{v} does not lie over {walk.start}")
    if v not in cw.dist:
        raise WindowTooSmall(f"{v} is not in the window")
    first = v
    arrows = cw.bq.arrows
    steps = []
    for a, s in walk.steps:
        w = g.weight(a)
        if s == 1:
            b = Lift(a, v.coord)
            nxt = Lift(cw.base.quiver.target(a), w * v.coord)
        else:
            src = w.inverse() * v.coord
            b = Lift(a, src)
            nxt = Lift(cw.base.quiver.source(a), src)
        if b not in arrows:
            raise WindowTooSmall(f"lift of {a} at {v} leaves the window")
        steps.append((b, s))
        v = nxt
    return Walk(first, tuple(steps))


# ---------------------------------------------------------------------------
# towers of intermediate covers and fundamental domains


def coords_of(v, depth: int) -> tuple[Hashable, tuple[int, ...]]:
    """Unwrap a nested Lift of the given depth into (root, (t_1, ..., t_depth))."""
    ts = []
    for _ in range(depth):
        ts.append(v.coord.vec[0])
        v = v.base
    return v, tuple(reversed(ts))


def nested(x, coords: Sequence[int]):
    Z = AbelianGroup(1)
    for t in coords:
        x = Lift(x, Z((t,)))
    return x


def stage_grading(prev: CoverWindow | None, g: Grading, tower: Tower, i: int) -> Grading:
    """Z-grading whose windows are the stage-i cover over the stage-(i-1) one."""
    phi = tower.quotient_map(i)
    if i == 1:
        return quotient_grading(g, phi)
    Z = AbelianGroup(1)
    weights = {}
    for b, (s, t) in prev.bq.arrows.items():
        a, ts = coords_of(b, i - 1)
        _, tt = coords_of(t, i - 1)
        h = tower.coset_representative(tt).inverse() * g.weight(a) * tower.coset_representative(ts)
        weights[b] = Z((phi(h),))
    return Grading(prev.bq, Z, weights)


def tower_windows(g: Grading, tower: Tower, stages: int, center, radii: Sequence[int]) -> list[CoverWindow]:
    """Windows of the intermediate covers: the i-th is a window over the (i-1)-th."""
    if not isinstance(g.group, FreeGroup) or g.group != tower.group:
        raise PreconditionError("the tower needs the free grading it was built from")
    out = []
    prev = None
    for i in range(1, stages + 1):
        gi = stage_grading(prev, g, tower, i)
        cw = build_window(gi, nested(center, [0] * (i - 1)), radii[i - 1])
        out.append(cw)
        prev = cw
    return out


def push_down_tower(M: Rep, windows: Sequence[CoverWindow]) -> Rep:
    for cw in reversed(windows):
        M = push_down(M, cw)
    return M


def stage_map(tower: Tower, i: int) -> tuple[Callable, Callable]:
    """Vertex and arrow maps from the universal window to the stage-i cover."""

    def vmap(v):
        return nested(v.base, tower.coset_coordinates(v.coord, i))

    return vmap, vmap


@dataclass
class Domain:
    stage: int
    vertices: list  # window vertices in F_i, in window order
    base_lifts: dict  # base vertex -> group element g_x of F_0

    def __contains__(self, v) -> bool:
        return v in set(self.vertices)


def base_domain(g: Grading, center) -> dict:
    """F_0: lifts of the base vertices along a spanning tree, g_center = 1."""
    Q = g.base.quiver
    lifts = {center: g.group.identity()}
    tree = spanning_tree(Q, center)
    grown = True
    while grown:
        grown = False
        for a in tree:
            s, t = Q.arrows[a]
            if s in lifts and t not in lifts:
                lifts[t] = g.weight(a) * lifts[s]
                grown = True
            elif t in lifts and s not in lifts:
                lifts[s] = g.weight(a).inverse() * lifts[t]
                grown = True
    return lifts


def fundamental_domain(cw: CoverWindow, tower: Tower, i: int) -> Domain:
    """F_i = {(x, g_x a_1^t_1 ... a_i^t_i)} intersected with the window."""
    lifts = base_domain(cw.grading, cw.center)
    out = []
    for v in cw.bq.vertices:
        h = lifts[v.base].inverse() * v.coord
        if tower.coset_representative(tower.coset_coordinates(h, i)) == h:
            out.append(v)
    return Domain(i, out, lifts)


def union_stage(cw: CoverWindow, tower: Tower, radius: int, max_stage: int = 8) -> int | None:
    """Least i with every window vertex within the radius in F_i (None if beyond max_stage)."""
    near = [v for v in cw.bq.vertices if cw.dist[v] <= radius]
    for i in range(max_stage + 1):
        dom = set(fundamental_domain(cw, tower, i).vertices)
        if all(v in dom for v in near):
            return i
    return None


def lift_via_domain(M: Rep, stage_window: CoverWindow, universal: CoverWindow, tower: Tower, i: int) -> Rep:
    """Copy M onto the fundamental domain F_i of the universal window.

    Valid when every arrow acting nontrivially in M lifts to an arrow between
    the chosen representatives; otherwise the domain is too small.
    """
    vmap, amap = stage_map(tower, i)
    dom = fundamental_domain(universal, tower, i)
    rep = {}
    for v in dom.vertices:
        rep.setdefault(vmap(v), v)
    need = _required_stage(tower, M.total_dim)
    missing = [y for y in M.dims if y not in rep]
    if missing:
        raise PreconditionError(f"F_{i} in this window has no representative of {missing[0]}; "
                                f"estimated stage needed: {need}")
    dims = {rep[y]: n for y, n in M.dims.items()}
    maps = {}
    UQ = universal.bq.quiver
    for b, m in M.maps.items():
        if m.is_zero():
            continue
        s, t = M.bq.arrows[b]
        z = rep[s]
        a, _ = coords_of(b, i)
        lifted = Lift(a, z.coord)
        if lifted not in UQ.arrows or UQ.arrows[lifted][1] != rep[t]:
            raise PreconditionError(f"arrow {b} does not lift between representatives in F_{i}; "
                                    f"estimated stage needed: {need}")
        maps[lifted] = m
    return Rep(universal.bq, dims, maps)


def _required_stage(tower: Tower, r: int):
    try:
        return tower.stage_for_length(r)
    except PreconditionError:
        return "unknown"


def push_down_stage(N: Rep, stage_window: CoverWindow, tower: Tower, i: int) -> Rep:
    vmap, amap = stage_map(tower, i)
    return push_down_along(N, stage_window.bq, vmap, amap)
