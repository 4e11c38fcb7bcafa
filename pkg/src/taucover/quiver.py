"""Quivers, bound quivers and their finite-dimensional path algebras.

Paths are stored in traversal order (first arrow first); they print in the
usual composition order, so the path ``a`` then ``b`` prints as ``ba``.
Normal forms of the path algebra KQ/I come from length-graded linear algebra:
all paths shorter than the nilpotency bound are columns, all truncated
multiples p*rho*q of relations are rows, and the non-pivot paths of the
reduced echelon form (columns ordered longest first) are the normal basis.
"""

from __future__ import annotations

import itertools
import re
from collections import defaultdict, deque
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Sequence

from .errors import NotAdmissible, ParseError, PreconditionError
from .groups import AbelianGroup, FreeGroup, invert_word, reduce_word
from .linalg import QQ, Field, sparse_rref

DEFAULT_CAP = 32
PATH_LIMIT = 200_000


def _key(x) -> str:
    return str(x)


@dataclass(frozen=True)
class Path:
    source: Hashable
    target: Hashable
    arrows: tuple = ()

    def __len__(self) -> int:
        return len(self.arrows)

    def after(self, other: "Path") -> "Path":
        """Composition self . other (other is traversed first)."""
        if other.target != self.source:
            raise PreconditionError(f"cannot compose {self} after {other}")
        return Path(other.source, self.target, other.arrows + self.arrows)

    def reversed(self) -> "Path":
        """The same arrows read in the opposite quiver."""
        return Path(self.target, self.source, self.arrows[::-1])

    def __str__(self) -> str:
        if not self.arrows:
            return f"e{self.source}"
        names = [str(a) for a in reversed(self.arrows)]
        return "".join(names) if all(len(n) == 1 for n in names) else ".".join(names)

    def sort_key(self):
        return (-len(self.arrows), tuple(_key(a) for a in self.arrows))


LinComb = dict  # Path -> nonzero scalar


def lincomb_str(lc: LinComb) -> str:
    if not lc:
        return "0"
    parts = []
    for p, c in sorted(lc.items(), key=lambda kv: kv[0].sort_key()):
        parts.append(str(p) if c == 1 else f"-{p}" if c == -1 else f"{c}*{p}")
    return " + ".join(parts).replace("+ -", "- ")


class Quiver:
    def __init__(self, vertices: Sequence[Hashable], arrows: dict[Hashable, tuple[Hashable, Hashable]]):
        self.vertices = tuple(vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise PreconditionError("duplicate vertex")
        vset = set(self.vertices)
        self.arrows = dict(arrows)
        for a, (s, t) in self.arrows.items():
            if s not in vset or t not in vset:
                raise PreconditionError(f"arrow {a} has an unknown endpoint")
        self.out_arrows: dict = {v: [] for v in self.vertices}
        self.in_arrows: dict = {v: [] for v in self.vertices}
        for a, (s, t) in self.arrows.items():
            self.out_arrows[s].append(a)
            self.in_arrows[t].append(a)
        self.vertex_index = {v: i for i, v in enumerate(self.vertices)}

    def source(self, a) -> Hashable:
        return self.arrows[a][0]

    def target(self, a) -> Hashable:
        return self.arrows[a][1]

    def trivial(self, v) -> Path:
        return Path(v, v, ())

    def arrow_path(self, a) -> Path:
        s, t = self.arrows[a]
        return Path(s, t, (a,))

    def path(self, arrows: Sequence) -> Path:
        """Path from arrows in traversal order."""
        if not arrows:
            raise PreconditionError("use trivial() for trivial paths")
        for a, b in zip(arrows, arrows[1:]):
            if self.target(a) != self.source(b):
                raise PreconditionError(f"arrows {a}, {b} do not compose")
        return Path(self.source(arrows[0]), self.target(arrows[-1]), tuple(arrows))

    def paths_from(self, v, max_len: int) -> list[Path]:
        out = [Path(v, v, ())]
        frontier = [out[0]]
        for _ in range(max_len):
            nxt = []
            for p in frontier:
                for a in self.out_arrows[p.target]:
                    nxt.append(Path(v, self.target(a), p.arrows + (a,)))
            if len(out) + len(nxt) > PATH_LIMIT:
                raise NotAdmissible("path enumeration limit exceeded")
            out += nxt
            frontier = nxt
        return out

    def paths_exact(self, v, length: int) -> list[Path]:
        frontier = [Path(v, v, ())]
        for _ in range(length):
            frontier = [Path(v, self.target(a), p.arrows + (a,)) for p in frontier for a in self.out_arrows[p.target]]
            if len(frontier) > PATH_LIMIT:
                raise NotAdmissible("path enumeration limit exceeded")
        return frontier

    def opposite(self) -> "Quiver":
        return Quiver(self.vertices, {a: (t, s) for a, (s, t) in self.arrows.items()})

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        seen = {self.vertices[0]}
        queue = deque(seen)
        while queue:
            x = queue.popleft()
            for a in self.out_arrows[x] + self.in_arrows[x]:
                for y in self.arrows[a]:
                    if y not in seen:
                        seen.add(y)
                        queue.append(y)
        return len(seen) == len(self.vertices)


class BoundQuiver:
    """A quiver with an admissible ideal given by finitely many relations."""

    def __init__(self, quiver: Quiver, relations: Iterable[LinComb], field: Field = QQ,
                 cap: int = DEFAULT_CAP, name: str = ""):
        self.quiver = quiver
        self.field = field
        self.cap = cap
        self.name = name
        rels = []
        for rho in relations:
            rho = {p: field.coerce(c) for p, c in rho.items() if c != 0}
            if not rho:
                continue
            ends = {(p.source, p.target) for p in rho}
            if len(ends) != 1:
                raise NotAdmissible(f"relation {lincomb_str(rho)} is not a combination of parallel paths")
            if any(len(p) < 2 for p in rho):
                raise NotAdmissible(f"relation {lincomb_str(rho)} has a term of length < 2")
            rels.append(rho)
        self.relations = tuple(rels)
        self._opposite = None

    # -- convenience

    @property
    def vertices(self):
        return self.quiver.vertices

    @property
    def arrows(self):
        return self.quiver.arrows

    def __repr__(self):
        return f"BoundQuiver({self.name or len(self.vertices)})"

    def is_monomial(self) -> bool:
        return all(len(r) == 1 for r in self.relations)

    def opposite(self) -> "BoundQuiver":
        if self._opposite is None:
            op = BoundQuiver(self.quiver.opposite(),
                             [{p.reversed(): c for p, c in r.items()} for r in self.relations],
                             self.field, self.cap, self.name + "^op" if self.name else "")
            op._opposite = self
            self._opposite = op
        return self._opposite

    # -- admissibility

    @cached_property
    def nilpotency(self) -> int:
        return check_admissible(self)

    @cached_property
    def basis(self) -> "AlgebraBasis":
        return AlgebraBasis(self)

    def dim(self) -> int:
        return self.basis.dim()

    def in_ideal(self, lc: LinComb) -> bool:
        return not self.basis.reduce(lc)

    def to_text(self) -> str:
        lines = [f"vertex {v}" for v in self.vertices]
        lines += [f"arrow {a} {s} {t}" for a, (s, t) in self.arrows.items()]
        for r in self.relations:
            terms = []
            for p, c in r.items():
                word = ".".join(str(a) for a in reversed(p.arrows))
                terms.append(f"{c}*{word}")
            lines.append("relation " + " + ".join(terms))
        return "\n".join(lines) + "\n"


def _relation_multiples(bq: BoundQuiver, x, max_total: int, truncate: int | None,
                        paths: dict) -> Iterable[LinComb]:
    """All p*rho*q starting at x whose longest term has length <= max_total,
    with terms of length >= truncate dropped."""
    q_list = paths[x]
    for rho in bq.relations:
        s = next(iter(rho)).source
        t = next(iter(rho)).target
        longest = max(len(p) for p in rho)
        for q in q_list:
            if q.target != s or len(q) + longest > max_total:
                continue
            for p in paths[t]:
                if len(p) + len(q) + longest > max_total:
                    continue
                lc = {}
                for w, c in rho.items():
                    full = Path(x, p.target, q.arrows + w.arrows + p.arrows)
                    if truncate is not None and len(full) >= truncate:
                        continue
                    lc[full] = lc.get(full, 0) + c
                lc = {k: v for k, v in lc.items() if v != 0}
                if lc:
                    yield lc


def _span_test(candidates: list[Path], generators: list[LinComb], field: Field) -> bool:
    """Whether every candidate path lies in the span of the generators."""
    cols: dict[Path, int] = {}
    for g in generators:
        for p in g:
            cols.setdefault(p, len(cols))
    for p in candidates:
        if p not in cols:
            return False
    rows = [{cols[p]: c for p, c in g.items()} for g in generators]
    ech = sparse_rref(rows, len(cols), field)
    piv = {c: ech.rows[c] for c in ech.pivots}
    for p in candidates:
        r = {cols[p]: 1}
        # reduce r by the pivot rows
        for c in sorted(piv):
            f = r.get(c)
            if f:
                for k, v in piv[c].items():
                    nv = field.norm(r.get(k, 0) - f * v)
                    if nv == 0:
                        r.pop(k, None)
                    else:
                        r[k] = nv
        if r:
            return False
    return True


def check_admissible(bq: BoundQuiver) -> int:
    """Least N with every path of length N in the ideal; raises NotAdmissible past the cap."""
    Q = bq.quiver
    if not Q.arrows:
        return 1
    slack = max((max(len(p) for p in r) - min(len(p) for p in r) for r in bq.relations), default=0)
    for N in range(2, bq.cap + 1):
        exact = {x: Q.paths_exact(x, N) for x in Q.vertices}
        if not any(exact.values()):
            return N
        if not bq.relations:
            continue
        L = N + slack
        paths = {x: Q.paths_from(x, L) for x in Q.vertices}
        ok = True
        for x in Q.vertices:
            if not exact[x]:
                continue
            by_target: dict = defaultdict(list)
            for g in _relation_multiples(bq, x, L, None, paths):
                by_target[next(iter(g)).target].append(g)
            cands: dict = defaultdict(list)
            for p in exact[x]:
                cands[p.target].append(p)
            for y, ps in cands.items():
                if not _span_test(ps, by_target.get(y, []), bq.field):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return N
    raise NotAdmissible(f"no nilpotency bound up to {bq.cap}")


class AlgebraBasis:
    """Normal-form basis of KQ/I, one block e_y A e_x (paths x -> y) per pair."""

    def __init__(self, bq: BoundQuiver):
        self.bq = bq
        self.N = N = bq.nilpotency
        Q = bq.quiver
        F = bq.field
        paths = {x: Q.paths_from(x, N - 1) for x in Q.vertices}
        self._basis: dict[tuple, list[Path]] = {}
        self._index: dict[tuple, dict[Path, int]] = {}
        self._rewrite: dict[Path, dict] = {}
        for x in Q.vertices:
            by_target: dict = defaultdict(list)
            for p in paths[x]:
                by_target[p.target].append(p)
            rels: dict = defaultdict(list)
            for g in _relation_multiples(bq, x, 10**9, N, paths):
                rels[next(iter(g)).target].append(g)
            for y, ps in by_target.items():
                ps = sorted(ps, key=Path.sort_key)
                col = {p: i for i, p in enumerate(ps)}
                ech = sparse_rref([{col[p]: c for p, c in g.items()} for g in rels.get(y, [])], len(ps), F)
                piv = set(ech.pivots)
                normal = [p for i, p in enumerate(ps) if i not in piv]
                normal.sort(key=lambda p: (len(p), tuple(_key(a) for a in p.arrows)))
                self._basis[(x, y)] = normal
                self._index[(x, y)] = {p: i for i, p in enumerate(normal)}
                for c in ech.pivots:
                    self._rewrite[ps[c]] = {ps[k]: F.norm(-v) for k, v in ech.rows[c].items() if k != c}

    def paths(self, x, y) -> list[Path]:
        return self._basis.get((x, y), [])

    def index(self, x, y) -> dict[Path, int]:
        return self._index.get((x, y), {})

    def dim(self) -> int:
        return sum(len(v) for v in self._basis.values())

    def reduce_path(self, p: Path) -> dict:
        if len(p) >= self.N:
            return {}
        r = self._rewrite.get(p)
        if r is not None:
            return r
        return {p: 1}

    def reduce(self, lc: LinComb) -> dict:
        F = self.bq.field
        out: dict = {}
        for p, c in lc.items():
            for q, d in self.reduce_path(p).items():
                v = F.norm(out.get(q, 0) + c * d)
                if v == 0:
                    out.pop(q, None)
                else:
                    out[q] = v
        return out

    def multiply(self, left: LinComb, right: LinComb) -> dict:
        """Product left . right (right applied first)."""
        prod: dict = {}
        for p, c in left.items():
            for q, d in right.items():
                if q.target == p.source:
                    pq = p.after(q)
                    prod[pq] = prod.get(pq, 0) + c * d
        return self.reduce(prod)


# ---------------------------------------------------------------------------
# minimal relations


def minimal_relations(bq: BoundQuiver, max_terms: int = 12) -> list[tuple[LinComb, str]]:
    """Split the given relations into minimal ones; tags are 'monomial' or 'minimal'."""
    out: list[tuple[LinComb, str]] = []

    def split(rho: LinComb) -> None:
        terms = list(rho.items())
        if len(terms) == 1:
            out.append((rho, "monomial"))
            return
        if len(terms) > max_terms:
            raise PreconditionError(f"relation with {len(terms)} terms exceeds the term cap {max_terms}")
        for size in range(1, len(terms)):
            for sub in itertools.combinations(range(len(terms)), size):
                part = {terms[i][0]: terms[i][1] for i in sub}
                if bq.in_ideal(part):
                    rest = {terms[i][0]: terms[i][1] for i in range(len(terms)) if i not in sub}
                    split(part)
                    split(rest)
                    return
        out.append((rho, "minimal"))

    for rho in bq.relations:
        split(dict(rho))
    return out


def is_minimal_relation(bq: BoundQuiver, rho: LinComb) -> bool:
    if not bq.in_ideal(rho):
        return False
    terms = list(rho.items())
    for size in range(1, len(terms)):
        for sub in itertools.combinations(terms, size):
            if bq.in_ideal(dict(sub)):
                return False
    return True


# ---------------------------------------------------------------------------
# walks and the fundamental group


@dataclass(frozen=True)
class Walk:
    """A walk: start vertex plus steps (arrow, +1 forward / -1 backward) in traversal order."""

    start: Hashable
    steps: tuple = ()

    def vertices(self, quiver: Quiver) -> list:
        out = [self.start]
        for a, s in self.steps:
            src, tgt = quiver.arrows[a]
            here = out[-1]
            if s == 1:
                if src != here:
                    raise PreconditionError(f"step {a} does not leave {here}")
                out.append(tgt)
            else:
                if tgt != here:
                    raise PreconditionError(f"step {a}^-1 does not leave {here}")
                out.append(src)
        return out

    def end(self, quiver: Quiver):
        return self.vertices(quiver)[-1]

    def __str__(self):
        if not self.steps:
            return f"e{self.start}"
        return " ".join(str(a) if s == 1 else f"{a}^-1" for a, s in reversed(self.steps))


_STEP = re.compile(r"(.+?)(\^-1)?")


def parse_walk(text: str, quiver: Quiver, start=None) -> Walk:
    """Parse a walk written in composition order, e.g. ``a d^-1 b``."""
    toks = text.split()
    steps = []
    for tok in reversed(toks):
        m = _STEP.fullmatch(tok)
        name = m.group(1)
        arrow = _lookup_arrow(quiver, name)
        if arrow is None:
            raise ParseError(f"unknown arrow {name!r} in walk")
        steps.append((arrow, -1 if m.group(2) else 1))
    if not steps:
        if start is None:
            raise ParseError("empty walk needs a start vertex")
        return Walk(start, ())
    a, s = steps[0]
    first = quiver.source(a) if s == 1 else quiver.target(a)
    if start is not None and str(start) != str(first):
        raise PreconditionError(f"walk starts at {first}, not {start}")
    w = Walk(first, tuple(steps))
    w.vertices(quiver)
    return w


def _lookup_arrow(quiver: Quiver, name: str):
    if name in quiver.arrows:
        return name
    for a in quiver.arrows:
        if str(a) == name:
            return a
    return None


def spanning_tree(quiver: Quiver, root) -> list:
    """BFS spanning tree; ties between arrows are broken by arrow id."""
    seen = {root}
    queue = deque([root])
    tree = []
    while queue:
        x = queue.popleft()
        inc = sorted(set(quiver.out_arrows[x] + quiver.in_arrows[x]), key=_key)
        for a in inc:
            s, t = quiver.arrows[a]
            y = t if s == x else s
            if y not in seen:
                seen.add(y)
                tree.append(a)
                queue.append(y)
    if len(seen) != len(quiver.vertices):
        raise PreconditionError("quiver is not connected")
    return tree


@dataclass
class FundamentalGroup:
    base: Hashable
    tree: tuple
    chords: tuple
    relators: list  # reduced words over chord labels
    generators: tuple  # chords surviving simplification
    profile: str  # 'free', 'free-abelian' or 'undecidable-profile'
    group: object  # FreeGroup / AbelianGroup / None

    @property
    def rank(self) -> int:
        return len(self.generators)

    def chord_word(self, walk: Walk) -> tuple:
        """Word of a walk over chords, in composition order."""
        runs = [(a, s) for a, s in reversed(walk.steps) if a in self.chords]
        return reduce_word(runs)

    def homotopy_class(self, walk: Walk, quiver: Quiver):
        vs = walk.vertices(quiver)
        if vs[0] != self.base or vs[-1] != self.base:
            raise PreconditionError("walk is not closed at the base vertex")
        w = self.chord_word(walk)
        if self.profile == "undecidable-profile":
            return ("undecidable-profile", w)
        w = reduce_word((a, e) for a, e in w if a in self.generators)
        if self.profile == "free":
            return self.group(tuple((str(a), e) for a, e in w))
        vec = [0] * len(self.generators)
        for a, e in w:
            vec[self.generators.index(a)] += e
        return self.group(tuple(vec))


def fundamental_group(bq: BoundQuiver, base=None) -> FundamentalGroup:
    """Presentation of the fundamental group from a spanning tree and minimal relations."""
    Q = bq.quiver
    if base is None:
        base = Q.vertices[0]
    tree = spanning_tree(Q, base)
    tset = set(tree)
    chords = tuple(sorted((a for a in Q.arrows if a not in tset), key=_key))
    cset = set(chords)

    def pword(p: Path) -> tuple:
        return reduce_word((a, 1) for a in reversed(p.arrows) if a in cset)

    relators = []
    for rho, kind in minimal_relations(bq):
        if kind != "minimal":
            continue
        terms = sorted(rho, key=Path.sort_key)
        w0 = pword(terms[0])
        for t in terms[1:]:
            r = reduce_word(w0 + invert_word(pword(t)))
            if r:
                relators.append(r)
    gens, rels = _simplify(list(chords), relators)
    if not rels:
        profile, group = "free", FreeGroup([str(g) for g in gens])
    elif _all_commutators(gens, rels):
        profile, group = "free-abelian", AbelianGroup(len(gens))
    else:
        profile, group = "undecidable-profile", None
    return FundamentalGroup(base, tuple(tree), chords, relators, tuple(gens), profile, group)


def _simplify(gens: list, rels: list) -> tuple[list, list]:
    """Drop generators killed by single-letter relators."""
    rels = [r for r in rels if r]
    changed = True
    while changed:
        changed = False
        for r in rels:
            if len(r) == 1 and abs(r[0][1]) == 1:
                g = r[0][0]
                gens = [x for x in gens if x != g]
                rels = [reduce_word((a, e) for a, e in s if a != g) for s in rels]
                rels = [s for s in rels if s]
                changed = True
                break
    return gens, _dedupe(rels)


def _dedupe(rels: list) -> list:
    seen = set()
    out = []
    for r in rels:
        key = min(_rotations(r) + _rotations(invert_word(r)))
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def _rotations(r: tuple) -> list:
    return [tuple(map(str, r[i:] + r[:i])) for i in range(len(r))]


def _all_commutators(gens: list, rels: list) -> bool:
    pairs = set()
    for r in rels:
        if len(r) != 4 or any(abs(e) != 1 for _, e in r):
            return False
        (x, e1), (y, e2), (x2, e3), (y2, e4) = r
        if x != x2 or y != y2 or x == y or e1 != -e3 or e2 != -e4:
            return False
        pairs.add(frozenset((x, y)))
    need = {frozenset(p) for p in itertools.combinations(gens, 2)}
    return pairs == need


# ---------------------------------------------------------------------------
# text format


_TERM = re.compile(r"^(?:([+-]?\d+(?:/\d+)?)\*)?([^*]+)$")


def _parse_path_word(word: str, quiver: Quiver, line: int, col: int) -> Path:
    if "." in word:
        names = word.split(".")
    else:
        names = []
        i = 0
        ids = sorted((str(a) for a in quiver.arrows), key=len, reverse=True)
        while i < len(word):
            for a in ids:
                if word.startswith(a, i):
                    names.append(a)
                    i += len(a)
                    break
            else:
                raise ParseError(f"cannot read arrow at {word[i:]!r}", line, col + i)
    arrows = []
    for n in reversed(names):
        a = _lookup_arrow(quiver, n)
        if a is None:
            raise ParseError(f"unknown arrow {n!r}", line, col)
        arrows.append(a)
    try:
        return quiver.path(arrows)
    except PreconditionError as exc:
        raise ParseError(str(exc), line, col) from exc


def parse_algebra(text: str, field: Field = QQ, cap: int = DEFAULT_CAP, name: str = "") -> BoundQuiver:
    vertices: list = []
    arrows: dict = {}
    rel_lines: list = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]
        if not toks:
            continue
        kw = toks[0][0]
        if kw == "vertex":
            if len(toks) != 2:
                raise ParseError("expected: vertex <id>", ln, toks[0][1])
            if toks[1][0] in vertices:
                raise ParseError(f"duplicate vertex {toks[1][0]}", ln, toks[1][1])
            vertices.append(toks[1][0])
        elif kw == "arrow":
            if len(toks) != 4:
                raise ParseError("expected: arrow <id> <src> <tgt>", ln, toks[0][1])
            a, s, t = (x for x, _ in toks[1:])
            if a in arrows:
                raise ParseError(f"duplicate arrow {a}", ln, toks[1][1])
            for v, c in toks[2:]:
                if v not in vertices:
                    raise ParseError(f"unknown vertex {v}", ln, c)
            arrows[a] = (s, t)
        elif kw == "relation":
            rel_lines.append((ln, toks[1:]))
        else:
            raise ParseError(f"unknown keyword {kw!r}", ln, toks[0][1])
    Q = Quiver(vertices, arrows)
    relations = []
    for ln, toks in rel_lines:
        if not toks:
            raise ParseError("empty relation", ln, 1)
        rho: dict = {}
        sign = 1
        expect_term = True
        for tok, col in toks:
            if tok in ("+", "-"):
                sign = sign * (1 if tok == "+" else -1) if expect_term else (1 if tok == "+" else -1)
                expect_term = True
                continue
            if not expect_term:
                raise ParseError("missing operator between terms", ln, col)
            t = tok
            if t[0] in "+-" and not t[1:2].isdigit():
                sign *= -1 if t[0] == "-" else 1
                t = t[1:]
            m = _TERM.match(t)
            if not m:
                raise ParseError(f"bad term {tok!r}", ln, col)
            coef = field.parse(m.group(1)) if m.group(1) else 1
            path = _parse_path_word(m.group(2), Q, ln, col)
            rho[path] = field.norm(rho.get(path, 0) + sign * coef)
            sign = 1
            expect_term = False
        if expect_term:
            raise ParseError("relation ends with an operator", ln, toks[-1][1])
        relations.append(rho)
    try:
        return BoundQuiver(Q, relations, field, cap, name)
    except NotAdmissible:
        raise
    except PreconditionError as exc:
        raise ParseError(str(exc)) from exc


def load_algebra(path: str, field: Field = QQ, cap: int = DEFAULT_CAP) -> BoundQuiver:
    with open(path) as fh:
        return parse_algebra(fh.read(), field, cap, name=path)
