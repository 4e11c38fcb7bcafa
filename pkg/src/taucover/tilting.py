"""Support tau-tilting pairs and their mutation.

A pair (M, P) stores M as a list of pairwise non-isomorphic indecomposable
summands and P as a sorted tuple of vertices (P = sum of the projectives
P_x).  Mutation positions list the summands of M first, then the vertices
of P.  Left mutation uses minimal left approximations; right mutation is
reduced to a left mutation over the opposite algebra through the duality
(M, P) -> (Tr M_np + P*, M_pr*).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from .errors import BudgetExceeded, Inconclusive, PreconditionError
from .modules import (Rep, cokernel, decompose, direct_sum, fac_contains, hom_dim, is_isomorphic,
                      min_left_approx, projective, projective_vertex, tau, transpose)
from .quiver import BoundQuiver


def cached_tau(M: Rep) -> Rep:
    cache = _cache(M)
    if "tau" not in cache:
        cache["tau"] = tau(M)
    return cache["tau"]


def cached_transpose(M: Rep) -> Rep:
    cache = _cache(M)
    if "tr" not in cache:
        cache["tr"] = transpose(M)
    return cache["tr"]


def _cache(M: Rep) -> dict:
    return M.cache


@dataclass
class StPair:
    bq: BoundQuiver
    summands: tuple
    proj: tuple

    def __post_init__(self):
        self.summands = tuple(self.summands)
        idx = self.bq.quiver.vertex_index
        self.proj = tuple(sorted(set(self.proj), key=idx.__getitem__))

    @property
    def size(self) -> int:
        return len(self.summands) + len(self.proj)

    def module(self) -> Rep:
        return direct_sum(self.summands, self.bq).rep

    def dim_vectors(self) -> list[tuple]:
        return [X.dim_vector() for X in self.summands]

    def key(self) -> tuple:
        return (tuple(sorted(self.dim_vectors())), self.proj)

    def position(self, k: int):
        if k < len(self.summands):
            return ("module", self.summands[k])
        if k < self.size:
            return ("vertex", self.proj[k - len(self.summands)])
        raise PreconditionError(f"position {k} out of range")

    def label(self) -> str:
        mods = " + ".join("(" + ",".join(map(str, dv)) + ")" for dv in self.dim_vectors()) or "0"
        return f"{mods} | {{{','.join(map(str, self.proj))}}}"


def seed_pair(bq: BoundQuiver) -> StPair:
    return StPair(bq, tuple(projective(bq, x) for x in bq.vertices), ())


def bottom_pair(bq: BoundQuiver) -> StPair:
    return StPair(bq, (), tuple(bq.vertices))


def is_tau_rigid_module(M: Rep) -> bool:
    return hom_dim(M, tau(M)) == 0


def is_tau_rigid_pair(p: StPair) -> bool:
    for X in p.summands:
        if any(X.dim(x) for x in p.proj):
            return False
        tX = cached_tau(X)
        for Y in p.summands:
            if hom_dim(Y, tX):
                return False
    return True


def is_support_tau_tilting(p: StPair) -> bool:
    return p.size == len(p.bq.vertices) and is_tau_rigid_pair(p)


def same_pair(p: StPair, q: StPair, seed: int = 0) -> bool:
    if p.key() != q.key():
        return False
    used = set()
    for X in p.summands:
        for k, Y in enumerate(q.summands):
            if k in used or X.dims != Y.dims:
                continue
            if is_isomorphic(X, Y, seed, indecomposable=True):
                used.add(k)
                break
        else:
            return False
    return True


def contains_pair(big: StPair, small: StPair, seed: int = 0) -> bool:
    """Whether small is a direct summand of big."""
    if not set(small.proj) <= set(big.proj):
        return False
    used = set()
    for X in small.summands:
        for k, Y in enumerate(big.summands):
            if k not in used and X.dims == Y.dims and is_isomorphic(X, Y, seed, indecomposable=True):
                used.add(k)
                break
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# mutation


def _single_class(Y: Rep, seed: int) -> Rep:
    parts = decompose(Y, seed)
    Z = parts[0].rep
    for s in parts[1:]:
        if not is_isomorphic(Z, s.rep, seed, indecomposable=True):
            raise Inconclusive("mutation cokernel has more than one isomorphism class")
    return Z


def mutate_left(p: StPair, k: int, seed: int = 0) -> StPair:
    """Left mutation at the module summand in position k (requires it outside Fac of the rest)."""
    kind, X = p.position(k)
    if kind != "module":
        raise PreconditionError("left mutation is only defined at module summands")
    U = [Y for i, Y in enumerate(p.summands) if i != k]
    if U and fac_contains(U, X):
        raise PreconditionError("summand lies in Fac of the rest; this is a right mutation")
    if U:
        approx = min_left_approx(X, U)
        Yrep, _ = cokernel(approx.map)
    else:
        Yrep = zero_like(X)
    if Yrep.is_zero():
        support = set()
        for Z in U:
            support |= set(Z.dims)
        proj = [x for x in p.bq.vertices if x not in support]
        return StPair(p.bq, tuple(U), tuple(proj))
    Z = _single_class(Yrep, seed)
    return StPair(p.bq, tuple(U) + (Z,), p.proj)


def zero_like(X: Rep) -> Rep:
    return Rep(X.bq, {}, {}, check=False)


@dataclass
class Daggered:
    pair: StPair
    position_map: dict  # position in the original pair -> position in the daggered pair


def dagger(p: StPair) -> Daggered:
    """(M, P) -> (Tr M_np + P*, M_pr*) over the opposite algebra."""
    op = p.bq.opposite()
    nonproj, projv = [], []
    for i, X in enumerate(p.summands):
        x = projective_vertex(X)
        if x is None:
            nonproj.append(i)
        else:
            projv.append((i, x))
    summands = [cached_transpose(p.summands[i]) for i in nonproj]
    summands += [projective(op, x) for x in p.proj]
    q = StPair(op, tuple(summands), tuple(x for _, x in projv))
    pos = {}
    for n, i in enumerate(nonproj):
        pos[i] = n
    for n, x in enumerate(p.proj):
        pos[len(p.summands) + n] = len(nonproj) + n
    for i, x in projv:
        pos[i] = len(q.summands) + q.proj.index(x)
    return Daggered(q, pos)


def _realign(original: StPair, k: int, result: StPair, seed: int) -> StPair:
    """Order result's summands as in original (minus position k), new ones last."""
    keep = [X for i, X in enumerate(original.summands) if i != k]
    pool = list(result.summands)
    ordered = []
    for X in keep:
        for n, Y in enumerate(pool):
            if X.dims == Y.dims and is_isomorphic(X, Y, seed, indecomposable=True):
                ordered.append(X)
                pool.pop(n)
                break
    return StPair(result.bq, tuple(ordered) + tuple(pool), result.proj)


def mutate_right(p: StPair, k: int, seed: int = 0) -> StPair:
    d = dagger(p)
    k2 = d.position_map[k]
    if k2 >= len(d.pair.summands):
        raise PreconditionError("position maps to a projective vertex of the dual pair; use left mutation")
    q = mutate_left(d.pair, k2, seed)
    back = dagger(q).pair
    return _realign(p, k, back, seed)


def mutation_direction(p: StPair, k: int) -> str:
    kind, X = p.position(k)
    if kind == "vertex":
        return "right"
    U = [Y for i, Y in enumerate(p.summands) if i != k]
    return "right" if U and fac_contains(U, X) else "left"


def mutate(p: StPair, k: int, seed: int = 0) -> tuple[StPair, str]:
    direction = mutation_direction(p, k)
    if direction == "left":
        return mutate_left(p, k, seed), "left"
    return mutate_right(p, k, seed), "right"


def classify_direction(p: StPair, q: StPair) -> str:
    """'left' if q < p (Fac q inside Fac p), 'right' if p < q."""
    Mp, Mq = list(p.summands), list(q.summands)
    if all(fac_contains(Mp, X) for X in Mq) if Mp else not Mq:
        return "left"
    if all(fac_contains(Mq, X) for X in Mp) if Mq else not Mp:
        return "right"
    raise PreconditionError("pairs are not comparable")


# ---------------------------------------------------------------------------
# exchange graph


@dataclass
class MutationQuiver:
    bq: BoundQuiver
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)  # (i, j, position in i, 'left'/'right')
    complete: bool = True
    inconclusive: list = field(default_factory=list)

    def find(self, p: StPair, seed: int = 0) -> int | None:
        for i, q in enumerate(self.nodes):
            if same_pair(p, q, seed):
                return i
        return None

    def hasse_edges(self) -> list[tuple[int, int]]:
        """Edges oriented from the larger pair to the smaller one."""
        out = set()
        for i, j, _, d in self.edges:
            out.add((i, j) if d == "left" else (j, i))
        return sorted(out)

    def to_dot(self) -> str:
        lines = ["digraph mutation {", "  node [shape=box];"]
        for i, p in enumerate(self.nodes):
            lines.append(f'  n{i} [label="{p.label()}"];')
        seen = set()
        for i, j, _, d in sorted(self.edges):
            a, b = (i, j) if d == "left" else (j, i)
            if (a, b) in seen:
                continue
            seen.add((a, b))
            lines.append(f"  n{a} -> n{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def mutation_quiver(seed_p: StPair, budget: int = 1000, seed: int = 0) -> MutationQuiver:
    """Breadth-first exploration of the exchange graph from seed_p.

    Stops once more than ``budget`` pairs have been found (complete=False).
    """
    mq = MutationQuiver(seed_p.bq, [seed_p])
    queue = deque([0])
    buckets: dict = {seed_p.key(): [0]}
    while queue:
        i = queue.popleft()
        p = mq.nodes[i]
        for k in range(p.size):
            q, d = mutate(p, k, seed)
            j = None
            for cand in buckets.get(q.key(), []):
                if same_pair(q, mq.nodes[cand], seed):
                    j = cand
                    break
            if j is None:
                j = len(mq.nodes)
                mq.nodes.append(q)
                buckets.setdefault(q.key(), []).append(j)
                if len(mq.nodes) > budget:
                    mq.complete = False
                    mq.edges.append((i, j, k, d))
                    return mq
                queue.append(j)
            mq.edges.append((i, j, k, d))
    return mq


def is_tau_tilting_finite(bq: BoundQuiver, budget: int = 1000, seed: int = 0) -> tuple[str, int]:
    mq = mutation_quiver(seed_pair(bq), budget, seed)
    if mq.complete:
        return ("finite", len(mq.nodes))
    return ("unknown-exceeded", budget)


def require_finite(bq: BoundQuiver, budget: int) -> MutationQuiver:
    mq = mutation_quiver(seed_pair(bq), budget)
    if not mq.complete:
        raise BudgetExceeded(f"more than {budget} support tau-tilting pairs")
    return mq


def completions(mq: MutationQuiver, almost: StPair, seed: int = 0) -> list[int]:
    return [i for i, p in enumerate(mq.nodes) if contains_pair(p, almost, seed)]


def almost_complete_parts(p: StPair) -> list[StPair]:
    out = []
    for k in range(p.size):
        kind, _ = p.position(k)
        if kind == "module":
            out.append(StPair(p.bq, tuple(X for i, X in enumerate(p.summands) if i != k), p.proj))
        else:
            out.append(StPair(p.bq, p.summands, tuple(x for x in p.proj if x != p.proj[k - len(p.summands)])))
    return out
