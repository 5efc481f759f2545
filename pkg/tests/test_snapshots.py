"""Snapshot probabilities: exact counting, nothing else."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from setprob import (
    Snapshot,
    class_from_values,
    conditional_snapshot_prob,
    even_shift_permutation,
    identity_rv,
    joint_snapshot_prob,
    nat,
    ord_value,
    pad,
    snapshot,
    snapshot_prob,
)
from setprob.errors import ConditionNull, EmptySnapshot

IDENT = identity_rv()


def _ord_universe_classes():
    from setprob import ORDINAL_MODE, make_universe

    u = make_universe(ORDINAL_MODE, 3)
    return u.builtin_class("Even"), u.builtin_class("Odd"), \
        u.builtin_class("On"), u.builtin_class("Lim"), u.universe_class()


EVEN, ODD, ON, LIM, V = _ord_universe_classes()


# ---------------------------------------------------------------------------
# Snapshot mechanics


def test_snapshot_dedupes_and_orders():
    t = snapshot(nat(3), nat(1), nat(3), nat(2))
    assert len(t) == 3
    assert [s.code for s in t] == ["o0.1", "o0.2", "o0.3"]
    assert t == snapshot(nat(1), nat(2), nat(3))
    assert nat(2) in t and nat(9) not in t


def test_snapshot_immutable():
    t = snapshot(nat(1))
    with pytest.raises(AttributeError):
        t.states = ()


def test_snapshot_union_intersect():
    t = snapshot(nat(1), nat(2))
    assert t.union([nat(3)]) == snapshot(nat(1), nat(2), nat(3))
    assert t.intersect([nat(2), nat(9)]) == snapshot(nat(2))
    assert t.count(EVEN) == 1


# ---------------------------------------------------------------------------
# Event probability


def test_event_prob_direct_count():
    t = snapshot(*[nat(i) for i in range(5)])
    assert snapshot_prob(IDENT, EVEN, t) == Fraction(3, 5)


def test_event_prob_total_event():
    for states in ([nat(0)], [nat(1), pad(0), ord_value(2, 2)]):
        assert snapshot_prob(IDENT, V, Snapshot(states)) == 1


def test_event_prob_under_permutation():
    # The even-shift sends 0,1,2,3 to 2,0,4,1; three land in the evens.
    pi = even_shift_permutation()
    t = snapshot(*[nat(i) for i in range(4)])
    assert snapshot_prob(pi, EVEN, t) == Fraction(3, 4)


def test_event_prob_empty_snapshot():
    with pytest.raises(EmptySnapshot):
        snapshot_prob(IDENT, EVEN, Snapshot([]))


# ---------------------------------------------------------------------------
# Joint probability


def test_joint_total_is_one():
    t = snapshot(nat(0), nat(1), pad(0))
    assert joint_snapshot_prob(IDENT, V, IDENT, V, t) == 1


def test_joint_disjoint_same_variable():
    t = snapshot(nat(0), nat(1), nat(2))
    assert joint_snapshot_prob(IDENT, EVEN, IDENT, ODD, t) == 0


def test_joint_mixed_variables():
    # s even with pi(s) even: s=0 (goes to 2) and s=2 (goes to 4).
    pi = even_shift_permutation()
    t = snapshot(*[nat(i) for i in range(4)])
    assert joint_snapshot_prob(IDENT, EVEN, pi, EVEN, t) == Fraction(1, 2)


def test_joint_empty_snapshot():
    with pytest.raises(EmptySnapshot):
        joint_snapshot_prob(IDENT, V, IDENT, V, Snapshot([]))


# ---------------------------------------------------------------------------
# Conditional probability


def test_conditional_on_ordinals():
    t = snapshot(nat(0), nat(1), nat(2), ord_value(1, 0))
    assert conditional_snapshot_prob(IDENT, EVEN, IDENT, ON, t) == Fraction(3, 4)


def test_conditional_on_everything_is_plain_prob():
    t = snapshot(nat(0), nat(1), nat(2), pad(0))
    assert conditional_snapshot_prob(IDENT, EVEN, IDENT, V, t) == \
        snapshot_prob(IDENT, EVEN, t)


def test_conditional_null_condition():
    with pytest.raises(ConditionNull):
        conditional_snapshot_prob(IDENT, EVEN, IDENT, LIM,
                                  snapshot(nat(0), nat(1), nat(2)))


# ---------------------------------------------------------------------------
# Pointwise properties

ordinals = st.builds(ord_value, st.integers(0, 2), st.integers(0, 30))
states = st.one_of(ordinals, st.builds(pad, st.integers(0, 10)))
snapshots = st.lists(states, min_size=1, max_size=12).map(Snapshot)


@given(snapshots)
def test_additivity_even_odd(t):
    f_even = snapshot_prob(IDENT, EVEN, t)
    f_odd = snapshot_prob(IDENT, ODD, t)
    assert f_even + f_odd == snapshot_prob(IDENT, ON, t)


@given(snapshots)
def test_range_and_total(t):
    f = snapshot_prob(IDENT, EVEN, t)
    assert 0 <= f <= 1
    assert snapshot_prob(IDENT, V, t) == 1
    empty = class_from_values("nothing", [])
    assert snapshot_prob(IDENT, empty, t) == 0


@given(snapshots)
def test_monotone_subset(t):
    assert snapshot_prob(IDENT, LIM, t) <= snapshot_prob(IDENT, EVEN, t) \
        <= snapshot_prob(IDENT, ON, t)


@given(st.lists(st.integers(0, 20), min_size=2, max_size=8, unique=True))
def test_uniformity_of_diagonal_values(points):
    # Any two outcomes a diagonal variable takes inside the snapshot are
    # equally likely: each preimage is one state.
    t = Snapshot([nat(i) for i in points])
    values = [snapshot_prob(IDENT, class_from_values(f"at{i}", [nat(i)]), t)
              for i in points]
    assert all(v == Fraction(1, len(t)) for v in values)
