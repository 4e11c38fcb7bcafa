import itertools

import pytest

from taucover.errors import NotAdmissible, ParseError
from taucover.quiver import (fundamental_group, is_minimal_relation, minimal_relations, parse_algebra,
                             parse_walk)

SQUARE = """
vertex 1
vertex 2
vertex 3
vertex 4
arrow a 1 2
arrow b 2 4
arrow c 1 3
arrow d 3 4
"""


def brute_paths(bq, max_len):
    """Every arrow sequence (composition order reversed: first arrow first) up to max_len."""
    arrows = bq.arrows
    out = [(v,) for v in bq.vertices]
    frontier = [[a] for a in arrows]
    for _ in range(max_len):
        out += [tuple(p) for p in frontier]
        nxt = []
        for p in frontier:
            for a, (s, _) in arrows.items():
                if s == arrows[p[-1]][1]:
                    nxt.append(p + [a])
        frontier = nxt
    return out


def test_example_parse(example):
    assert len(example.vertices) == 4 and len(example.arrows) == 5
    assert example.is_monomial()


def test_example_nilpotency_and_dim_by_enumeration(example):
    # oracle: count arrow sequences avoiding the factors "a then b" and "b then c"
    banned = {("a", "b"), ("b", "c")}
    survivors = [p for p in brute_paths(example, 6)
                 if len(p) == 1 and p[0] in example.vertices or not any(x in banned for x in zip(p, p[1:]))]
    longest = max(len(p) for p in survivors if p[0] in example.arrows)
    assert example.nilpotency == longest + 1 == 3
    assert example.dim() == len(survivors) == 11


def test_dual_numbers(dual):
    assert dual.nilpotency == 2
    assert dual.dim() == 2


def test_a2_dim(a2):
    assert a2.dim() == 3


def test_single_vertex_is_the_field():
    bq = parse_algebra("vertex p\n")
    assert bq.dim() == 1


def test_free_loop_not_admissible():
    bq = parse_algebra("vertex v\narrow x v v\n", cap=8)
    with pytest.raises(NotAdmissible):
        bq.nilpotency


def test_parse_error_location():
    with pytest.raises(ParseError) as info:
        parse_algebra("vertex 1\nvertex 2\narrow a 1 2\nrelation zz\n")
    assert info.value.line == 4


def test_non_parallel_relation_rejected():
    with pytest.raises((ParseError, NotAdmissible)):
        parse_algebra("vertex 1\nvertex 2\nvertex 3\narrow a 1 2\narrow b 2 3\narrow c 3 1\nrelation ba + cb\n")


def test_example_has_only_monomial_relations(example):
    assert {kind for _, kind in minimal_relations(example)} == {"monomial"}


def test_commutativity_square_minimal():
    sq = parse_algebra(SQUARE + "relation ba - dc\n")
    ((rho, kind),) = minimal_relations(sq)
    assert kind == "minimal" and len(rho) == 2
    assert is_minimal_relation(sq, rho)


def test_sum_of_monomials_splits():
    sq = parse_algebra(SQUARE + "relation ba\nrelation dc\n")
    ba, dc = (next(iter(r)) for r in sq.relations)
    assert not is_minimal_relation(sq, {ba: 1, dc: 1})
    split = parse_algebra(SQUARE + "relation ba + dc\nrelation ba\n")
    assert sorted(kind for _, kind in minimal_relations(split)) == ["monomial", "monomial", "monomial"]


def test_example_fundamental_group(example):
    pi = fundamental_group(example, "2")
    assert pi.profile == "free" and pi.rank == 2
    assert pi.rank == len(example.arrows) - len(example.vertices) + 1
    u = pi.homotopy_class(parse_walk("a d^-1 b", example.quiver, "2"), example.quiver)
    v = pi.homotopy_class(parse_walk("e^-1 c b", example.quiver, "2"), example.quiver)
    assert u.length == v.length == 1
    assert {str(x) for x in (u, v)} | {str(x.inverse()) for x in (u, v)} >= {str(g) for g in pi.group.gens()}


def test_tree_has_trivial_group():
    a3 = parse_algebra("vertex 1\nvertex 2\nvertex 3\narrow a 1 2\narrow b 2 3\n")
    assert fundamental_group(a3).rank == 0


def test_commutativity_relation_kills_the_chord():
    sq = parse_algebra(SQUARE + "relation ba - dc\n")
    pi = fundamental_group(sq, "1")
    assert pi.rank == 0
    # around the square: a, b forward, then d, c backward
    loop = parse_walk("c^-1 d^-1 b a", sq.quiver, "1")
    assert pi.homotopy_class(loop, sq.quiver).is_identity()


def test_backtrack_is_trivial(example):
    pi = fundamental_group(example, "1")
    w = parse_walk("a^-1 a", example.quiver, "1")
    assert pi.homotopy_class(w, example.quiver).is_identity()


def test_opposite_is_involutive(example):
    assert example.opposite().opposite() is example
    assert example.opposite().dim() == example.dim()


@pytest.mark.parametrize("n", [2, 3, 4])
def test_linear_quiver_dim(n):
    text = "".join(f"vertex {i}\n" for i in range(n))
    text += "".join(f"arrow a{i} {i} {i + 1}\n" for i in range(n - 1))
    bq = parse_algebra(text)
    assert bq.dim() == sum(1 for _ in itertools.combinations_with_replacement(range(n), 2))
