import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taucover.errors import ParseError
from taucover.groups import AbelianGroup, Conj, FreeGroup, Tower, make_group

G = FreeGroup(["u", "v"])
words = st.lists(st.tuples(st.sampled_from(["u", "v"]), st.sampled_from([1, -1])), max_size=12)


def test_free_group_basics():
    u, v = G.gens()
    assert (u * u.inverse()).is_identity()
    assert (u * v) * v.inverse() == u
    assert G.identity().length == 0
    assert G("u v u^-1").length == 3
    assert (u ** 3).length == 3


def test_abelian_basics():
    A = AbelianGroup(2)
    assert A((1, 0)) * A((0, 2)) == A((1, 2))
    assert A((3, -4)).length == 7


def test_finite_groups_rejected():
    with pytest.raises(ParseError):
        make_group("cyclic 3")


def test_quotient_map_stage_one():
    T = Tower(G, choices=["v"])
    phi = T.quotient_map(1)
    assert phi(G("v^2")) == 2
    assert phi(G("u")) == 0
    assert phi(G("v u v^-1")) == 0


def test_rewrite_tail_examples():
    T = Tower(G, choices=["v"])
    word, tails = T.rewrite_tail(G("u v^2"), 1)
    assert tails == [2] and word == ((Conj(1, 0, "u"), 1),)
    word, tails = T.rewrite_tail(G("v^3"), 1)
    assert tails == [3] and word == ()
    word, tails = T.rewrite_tail(G("v u v^-1 u"), 1)
    assert tails == [0]
    assert [T.value(lab) for lab, _ in word] == [G("v u v^-1"), G("u")]


def test_stage_for_length():
    T = Tower(G, choices=["v", "u"])
    assert T.stage_for_length(0) == 0
    assert T.stage_for_length(1) == 0
    assert T.stage_for_length(2) == 2


def test_default_choice_is_lexicographic():
    T = Tower(G)
    assert str(T.a(1)) == "u"


@settings(max_examples=200, deadline=None)
@given(words, st.integers(1, 3))
def test_rewrite_round_trip(runs, s):
    T = Tower(G, choices=["v", "u"])
    g = G(runs)
    word, tails = T.rewrite_tail(g, s)
    assert T.expand(word, tails) == g


@settings(max_examples=200, deadline=None)
@given(words, words)
def test_stage_one_map_is_additive(a, b):
    T = Tower(G, choices=["v", "u"])
    phi = T.quotient_map(1)
    g, h = G(a), G(b)
    assert phi(g * h) == phi(g) + phi(h)


@settings(max_examples=100, deadline=None)
@given(words, words)
def test_length_subadditive(a, b):
    g, h = G(a), G(b)
    assert (g * h).length <= g.length + h.length


def test_stage_two_map_is_additive_on_stage_one():
    T = Tower(G, choices=["v", "u"])
    phi = T.quotient_map(2)
    labels = list(T.stage(1).tracked)
    rng = random.Random(7)
    for _ in range(200):
        g, h = (T.expand(tuple((rng.choice(labels), rng.choice((1, -1))) for _ in range(rng.randint(0, 4))), [0])
                for _ in range(2))
        assert phi(g * h) == phi(g) + phi(h)


def test_tracked_generators_vanish_under_their_stage_map():
    T = Tower(G, choices=["v", "u"])
    for i in (1, 2):
        phi = T.quotient_map(i)
        for lab, val in T.stage(i).tracked.items():
            assert phi(val) == 0, lab
