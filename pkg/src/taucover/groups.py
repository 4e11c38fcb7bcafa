"""Finitely generated free and free-abelian groups, plus the tower of
conjugation-closed subgroups used to unwind a free covering stage by stage.

Free-group elements are reduced words stored as runs ``((label, exp), ...)``.
Labels are arbitrary hashables, which lets the tower reuse the same word
machinery for words over the generators of deeper stages.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

from .errors import ParseError, PreconditionError

Word = tuple  # tuple[tuple[Hashable, int], ...]


def reduce_word(runs: Iterable[tuple[Hashable, int]]) -> Word:
    """Freely reduce a sequence of (label, exponent) runs."""
    out: list[list] = []
    for lab, e in runs:
        if e == 0:
            continue
        if out and out[-1][0] == lab:
            out[-1][1] += e
            if out[-1][1] == 0:
                out.pop()
        else:
            out.append([lab, e])
    return tuple((lab, e) for lab, e in out)


def invert_word(w: Word) -> Word:
    return tuple((lab, -e) for lab, e in reversed(w))


def word_length(w: Word) -> int:
    return sum(abs(e) for _, e in w)


def word_str(w: Word) -> str:
    if not w:
        return "1"
    return " ".join(str(lab) if e == 1 else f"{lab}^{e}" for lab, e in w)


_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?")


def parse_word(text: str, names: Sequence[str]) -> Word:
    """Parse ``u v^-1 u^2`` (``1`` or empty is the identity)."""
    text = text.strip()
    if text in ("", "1", "e"):
        return ()
    runs = []
    for tok in text.split():
        m = _TOKEN.fullmatch(tok)
        if not m or m.group(1) not in names:
            raise ParseError(f"bad group word token {tok!r}")
        runs.append((m.group(1), int(m.group(2)) if m.group(2) else 1))
    return reduce_word(runs)


class FreeGroup:
    def __init__(self, names: Sequence[str]):
        if len(set(names)) != len(names):
            raise PreconditionError("duplicate generator names")
        self.names = tuple(names)

    @property
    def rank(self) -> int:
        return len(self.names)

    def __eq__(self, other):
        return isinstance(other, FreeGroup) and other.names == self.names

    def __hash__(self):
        return hash(("free", self.names))

    def __repr__(self):
        return f"FreeGroup({', '.join(self.names)})"

    def identity(self) -> "FreeElem":
        return FreeElem(self, ())

    def gen(self, name: str) -> "FreeElem":
        if name not in self.names:
            raise PreconditionError(f"unknown generator {name}")
        return FreeElem(self, ((name, 1),))

    def gens(self) -> list["FreeElem"]:
        return [self.gen(n) for n in self.names]

    def __call__(self, x) -> "FreeElem":
        if isinstance(x, FreeElem):
            return x
        if isinstance(x, str):
            return FreeElem(self, parse_word(x, self.names))
        return FreeElem(self, reduce_word(x))

    def random_element(self, rng: random.Random, max_length: int) -> "FreeElem":
        n = rng.randint(0, max_length)
        return FreeElem(self, reduce_word((rng.choice(self.names), rng.choice((1, -1))) for _ in range(n)))


@dataclass(frozen=True)
class FreeElem:
    group: FreeGroup = field(compare=False, hash=False, repr=False)
    word: Word

    def __mul__(self, other: "FreeElem") -> "FreeElem":
        return FreeElem(self.group, reduce_word(self.word + other.word))

    def inverse(self) -> "FreeElem":
        return FreeElem(self.group, invert_word(self.word))

    def __pow__(self, k: int) -> "FreeElem":
        base = self if k >= 0 else self.inverse()
        return FreeElem(self.group, reduce_word(base.word * abs(k)))

    def conj(self, by: "FreeElem", power: int = 1) -> "FreeElem":
        """by^power * self * by^-power."""
        p = by ** power
        return p * self * p.inverse()

    def is_identity(self) -> bool:
        return not self.word

    @property
    def length(self) -> int:
        return word_length(self.word)

    def exponent_sum(self, name: str) -> int:
        return sum(e for lab, e in self.word if lab == name)

    def sort_key(self):
        return (self.length, str(self))

    def __str__(self):
        return word_str(self.word)


class AbelianGroup:
    def __init__(self, rank: int):
        if rank < 0:
            raise PreconditionError("negative rank")
        self.rank = rank

    def __eq__(self, other):
        return isinstance(other, AbelianGroup) and other.rank == self.rank

    def __hash__(self):
        return hash(("abelian", self.rank))

    def __repr__(self):
        return f"AbelianGroup({self.rank})"

    def identity(self) -> "AbelianElem":
        return AbelianElem(self, (0,) * self.rank)

    def gen(self, i: int) -> "AbelianElem":
        return AbelianElem(self, tuple(1 if j == i else 0 for j in range(self.rank)))

    def __call__(self, x) -> "AbelianElem":
        if isinstance(x, AbelianElem):
            return x
        if isinstance(x, int):
            x = (x,)
        if isinstance(x, str):
            try:
                x = tuple(int(t) for t in x.replace(",", " ").split())
            except ValueError as exc:
                raise ParseError(f"bad abelian group element {x!r}") from exc
        x = tuple(x)
        if len(x) != self.rank:
            raise ParseError(f"expected {self.rank} coordinates, got {len(x)}")
        return AbelianElem(self, x)

    def random_element(self, rng: random.Random, bound: int) -> "AbelianElem":
        return AbelianElem(self, tuple(rng.randint(-bound, bound) for _ in range(self.rank)))


@dataclass(frozen=True)
class AbelianElem:
    group: AbelianGroup = field(compare=False, hash=False, repr=False)
    vec: tuple

    def __mul__(self, other: "AbelianElem") -> "AbelianElem":
        return AbelianElem(self.group, tuple(a + b for a, b in zip(self.vec, other.vec)))

    def inverse(self) -> "AbelianElem":
        return AbelianElem(self.group, tuple(-a for a in self.vec))

    def __pow__(self, k: int) -> "AbelianElem":
        return AbelianElem(self.group, tuple(k * a for a in self.vec))

    def is_identity(self) -> bool:
        return not any(self.vec)

    @property
    def length(self) -> int:
        return sum(abs(a) for a in self.vec)

    def sort_key(self):
        return (self.length, self.vec)

    def __str__(self):
        return ",".join(str(a) for a in self.vec)


def make_group(spec: str):
    """Build a group from ``free u v`` or ``abelian 2``."""
    parts = spec.split()
    if not parts:
        raise ParseError("empty group declaration")
    if parts[0] == "free":
        return FreeGroup(parts[1:])
    if parts[0] == "abelian" and len(parts) == 2 and parts[1].isdigit():
        return AbelianGroup(int(parts[1]))
    raise ParseError(f"unsupported group declaration {spec!r}; finite or torsion groups are rejected")


# ---------------------------------------------------------------------------
# the tower G = G_0 > G_1 > G_2 > ...


@dataclass(frozen=True)
class Conj:
    """Label of the generator a_i^j * x * a_i^-j of stage i (x a label of stage i-1)."""

    stage: int
    power: int
    inner: Hashable

    def __str__(self):
        return f"[{self.stage}:{self.power}:{self.inner}]"


@dataclass
class TowerStage:
    index: int
    chosen: Hashable  # label (of the previous stage) of the element a_i
    chosen_value: FreeElem
    tracked: dict  # label -> value of the tracked generators of this stage


class Tower:
    """Tower of subgroups of a free group, each the normal closure (inside the
    previous stage) of all generators but one.

    Stage i is generated by the conjugates a_i^j x a_i^-j of the remaining
    generators of stage i-1, for all integers j.  Generating sets are infinite,
    so only generators of word length at most ``track_length`` are tracked;
    they are the candidates when the next a_i is chosen.
    """

    def __init__(self, group: FreeGroup, choices: Sequence | None = None, track_length: int = 9):
        self.group = group
        self.track_length = track_length
        self._choices = list(choices or [])
        self._values: dict[Hashable, FreeElem] = {n: group.gen(n) for n in group.names}
        self.stages: list[TowerStage] = [
            TowerStage(0, None, group.identity(), {n: group.gen(n) for n in group.names})]

    # -- structure

    def value(self, label) -> FreeElem:
        v = self._values.get(label)
        if v is None:
            a = self.stage(label.stage).chosen_value
            v = (a ** label.power) * self.value(label.inner) * (a ** -label.power)
            self._values[label] = v
        return v

    def stage(self, i: int) -> TowerStage:
        while len(self.stages) <= i:
            self._grow()
        return self.stages[i]

    def a(self, i: int) -> FreeElem:
        return self.stage(i).chosen_value

    def _grow(self) -> None:
        prev = self.stages[-1]
        i = len(self.stages)
        if not prev.tracked:
            raise PreconditionError(f"no tracked generators left to choose a_{i}; raise track_length")
        ranked = sorted(prev.tracked.items(), key=lambda kv: (kv[1].length, str(kv[1])))
        if len(self._choices) >= i:
            want = self.group(self._choices[i - 1])
            hits = [lab for lab, v in prev.tracked.items() if v == want]
            if not hits:
                raise PreconditionError(f"chosen a_{i} = {want} is not a generator of stage {i - 1}")
            if want.length != ranked[0][1].length:
                raise PreconditionError(f"chosen a_{i} = {want} does not have minimal length")
            lab = hits[0]
        else:
            lab = ranked[0][0]
        a = prev.tracked[lab]
        tracked = {}
        for x, xv in prev.tracked.items():
            if x == lab:
                continue
            for sign in (1, -1):
                j = 0 if sign == 1 else -1
                while True:
                    v = (a ** j) * xv * (a ** -j)
                    if v.length > self.track_length and abs(j) > 0:
                        break
                    if v.length <= self.track_length:
                        c = Conj(i, j, x)
                        tracked[c] = v
                        self._values[c] = v
                    j += sign
                    if abs(j) > self.track_length:
                        break
        self.stages.append(TowerStage(i, lab, a, tracked))

    # -- algorithms

    def rewrite_tail(self, g: FreeElem, s: int) -> tuple[Word, list[int]]:
        """Write g = g_s * a_s^r_s * ... * a_1^r_1 with g_s a word over stage-s labels.

        Returns (word of g_s, [r_1, ..., r_s]).
        """
        word = g.word
        tails = []
        for i in range(1, s + 1):
            a = self.stage(i).chosen
            c = 0
            out = []
            for lab, e in word:
                if lab == a:
                    c += e
                else:
                    out.append((Conj(i, c, lab), e))
            word = reduce_word(out)
            tails.append(c)
        return word, tails

    def expand(self, word: Word, tails: Sequence[int]) -> FreeElem:
        """Inverse of rewrite_tail."""
        g = self.group.identity()
        for lab, e in word:
            g = g * self.value(lab) ** e
        for i in range(len(tails), 0, -1):
            g = g * self.a(i) ** tails[i - 1]
        return g

    def quotient_map(self, i: int) -> Callable[[FreeElem], int]:
        """The map G_{i-1} -> Z sending a_i to 1 and the other generators to 0."""
        a = self.stage(i).chosen

        def phi(g: FreeElem) -> int:
            word, tails = self.rewrite_tail(g, i - 1)
            if any(tails):
                raise PreconditionError(f"{g} does not lie in stage {i - 1}")
            return sum(e for lab, e in word if lab == a)

        return phi

    def coset_coordinates(self, g: FreeElem, i: int) -> tuple[int, ...]:
        """Coordinates (t_1, ..., t_i) with g in a_1^t_1 ... a_i^t_i G_i."""
        coords = []
        h = g
        for k in range(1, i + 1):
            t = self.quotient_map(k)(h)
            coords.append(t)
            h = self.a(k) ** -t * h
        return tuple(coords)

    def coset_representative(self, coords: Sequence[int]) -> FreeElem:
        g = self.group.identity()
        for k, t in enumerate(coords, start=1):
            g = g * self.a(k) ** t
        return g

    def stage_for_length(self, r: int) -> int:
        """Least m such that every tracked generator of stage m has length >= r."""
        if r > self.track_length:
            raise PreconditionError("length exceeds the tracked window")
        m = 0
        while True:
            st = self.stage(m)
            if all(v.length >= r for v in st.tracked.values()):
                return m
            m += 1
