"""Snapshot-indexed rational expressions and forcing verdicts.

A germ is a finite expression tree that evaluates to an exact rational
at each snapshot: event frequencies, joint and conditional frequencies,
constants, arithmetic combinations, and finite sums.  Two germs denote
the same hyperrational whenever they agree on a set of snapshots the
ultrafilter keeps, so decidable comparisons work by forcing: a verdict
is Forced when the relation holds on every snapshot in the intersection
of a cited finite subset of the ambient filter base.  An empty citation
list marks a pointwise fact, true at every snapshot outright.

No floating point appears anywhere in this module; every evaluation is
a `fractions.Fraction`.
"""

from __future__ import annotations

import itertools
import random
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .errors import ConditionNull, DivisionUndefined, EmptySnapshot
from .filters import (
    TAG_FINENESS,
    TAG_INTERVAL,
    TAG_ORDER_GE,
    TAG_ORDER_LT,
    TAG_PARAMETRIC,
    TAG_RATIO,
    TAG_WEIGHT,
    Constraint,
    FilterBase,
    constraint_membership,
    expand_base,
    expand_parametric,
    fineness,
    find_witness,
    generate_witnesses,
)
from .snapshots import (
    Snapshot,
    conditional_snapshot_prob,
    joint_snapshot_prob,
    snapshot_prob,
)
from .universe import ClassSpec, RandomVariable, SetValue

NODE_CONST = "const"
NODE_EVENT = "event"
NODE_JOINT = "joint"
NODE_COND = "cond"
NODE_BINOP = "binop"
NODE_SUM = "star_sum"

_OPS: dict[str, Callable[[Fraction, Fraction], Fraction]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
}


@dataclass(frozen=True)
class Germ:
    """One rational-valued expression over snapshots."""

    node: str
    value: Fraction | None = None
    rv: RandomVariable | None = None
    cls: ClassSpec | None = None
    rv2: RandomVariable | None = None
    cls2: ClassSpec | None = None
    op: str | None = None
    left: "Germ | None" = None
    right: "Germ | None" = None
    terms: tuple["Germ", ...] = ()
    indices: tuple[SetValue, ...] = ()

    def eval_at(self, t: Snapshot) -> Fraction:
        """Exact value at one snapshot.

        Raises EmptySnapshot, ConditionNull, or DivisionUndefined when
        the expression has no value there.
        """
        if self.node == NODE_CONST:
            return self.value
        if self.node == NODE_EVENT:
            return snapshot_prob(self.rv, self.cls, t)
        if self.node == NODE_JOINT:
            return joint_snapshot_prob(self.rv, self.cls, self.rv2, self.cls2, t)
        if self.node == NODE_COND:
            return conditional_snapshot_prob(self.rv, self.cls, self.rv2, self.cls2, t)
        if self.node == NODE_BINOP:
            lv = self.left.eval_at(t)
            rv = self.right.eval_at(t)
            if self.op == "/":
                if rv == 0:
                    raise DivisionUndefined(
                        f"denominator {self.right.key()} vanishes at {t!r}")
                return lv / rv
            return _OPS[self.op](lv, rv)
        if self.node == NODE_SUM:
            if self.indices:
                return sum(
                    (term.eval_at(t)
                     for term, idx in zip(self.terms, self.indices) if idx in t),
                    Fraction(0))
            return sum((term.eval_at(t) for term in self.terms), Fraction(0))
        raise ValueError(f"unknown germ node {self.node}")

    def key(self) -> str:
        """Canonical structural key; equal keys mean equal germs."""
        if self.node == NODE_CONST:
            return f"q({self.value})"
        if self.node == NODE_EVENT:
            return f"ev({self.rv.name}:{self.cls.name})"
        if self.node == NODE_JOINT:
            return f"jt({self.rv.name}:{self.cls.name}&{self.rv2.name}:{self.cls2.name})"
        if self.node == NODE_COND:
            return f"cd({self.rv.name}:{self.cls.name}|{self.rv2.name}:{self.cls2.name})"
        if self.node == NODE_BINOP:
            return f"({self.left.key()}{self.op}{self.right.key()})"
        if self.node == NODE_SUM:
            if self.indices:
                return "sum(" + ",".join(
                    f"{idx.code}:{term.key()}"
                    for term, idx in zip(self.terms, self.indices)) + ")"
            return "sum(" + ",".join(term.key() for term in self.terms) + ")"
        raise ValueError(f"unknown germ node {self.node}")

    def describe(self) -> str:
        if self.node == NODE_CONST:
            return str(self.value)
        if self.node == NODE_EVENT:
            return f"Pr[{self.rv.name} in {self.cls.name}]"
        if self.node == NODE_JOINT:
            return (f"Pr[{self.rv.name} in {self.cls.name}, "
                    f"{self.rv2.name} in {self.cls2.name}]")
        if self.node == NODE_COND:
            return (f"Pr[{self.rv.name} in {self.cls.name} | "
                    f"{self.rv2.name} in {self.cls2.name}]")
        if self.node == NODE_BINOP:
            return f"({self.left.describe()} {self.op} {self.right.describe()})"
        if self.node == NODE_SUM:
            if self.indices:
                inner = ", ".join(
                    f"{idx.pretty()}:{term.describe()}"
                    for term, idx in zip(self.terms, self.indices))
                return f"partial-sum({inner})"
            return "(" + " (+) ".join(term.describe() for term in self.terms) + ")"
        raise ValueError(f"unknown germ node {self.node}")

    def __repr__(self):
        return f"Germ<{self.describe()}>"


def const_germ(q: Fraction | int) -> Germ:
    return Germ(NODE_CONST, value=Fraction(q))


def germ_of_event(rv: RandomVariable, cls: ClassSpec) -> Germ:
    return Germ(NODE_EVENT, rv=rv, cls=cls)


def joint_germ(rv1: RandomVariable, cls1: ClassSpec,
               rv2: RandomVariable, cls2: ClassSpec) -> Germ:
    return Germ(NODE_JOINT, rv=rv1, cls=cls1, rv2=rv2, cls2=cls2)


def conditional_germ(rv1: RandomVariable, cls1: ClassSpec,
                     rv2: RandomVariable, cls2: ClassSpec) -> Germ:
    return Germ(NODE_COND, rv=rv1, cls=cls1, rv2=rv2, cls2=cls2)


def germ_arith(op: str, left: Germ | Fraction | int, right: Germ | Fraction | int) -> Germ:
    if op not in ("+", "-", "*", "/"):
        raise ValueError(f"unsupported operation {op!r}")
    lg = left if isinstance(left, Germ) else const_germ(left)
    rg = right if isinstance(right, Germ) else const_germ(right)
    return Germ(NODE_BINOP, op=op, left=lg, right=rg)


def star_sum(terms: Iterable[Germ | Fraction | int],
             index: Iterable[SetValue] | None = None) -> Germ:
    """Finite sum germ; terms may be germs or plain rationals.

    Without an index the sum is pointwise over all terms.  With one,
    terms and index values pair up positionally and a term contributes
    at a snapshot only when its index value is present there, so the
    germ's value at T is the partial sum over the indices T contains.
    """
    gs = tuple(t if isinstance(t, Germ) else const_germ(t) for t in terms)
    if index is None:
        return Germ(NODE_SUM, terms=gs)
    idx = tuple(index)
    if len(idx) != len(gs):
        raise ValueError("index must pair with terms one for one")
    return Germ(NODE_SUM, terms=gs, indices=idx)


# ---------------------------------------------------------------------------
# Relations


_RELATIONS: dict[str, Callable[[Fraction, Fraction], bool]] = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "le": lambda a, b: a <= b,
    "lt": lambda a, b: a < b,
    "ge": lambda a, b: a >= b,
    "gt": lambda a, b: a > b,
    "abs_le": lambda a, b: abs(a) <= b,
}

_MIRROR = {"eq": "eq", "ne": "ne", "le": "ge", "lt": "gt", "ge": "le", "gt": "lt"}

_NEGATION = {"eq": "ne", "ne": "eq", "le": "gt", "lt": "ge", "ge": "lt", "gt": "le"}


def eval_relation(rel: str, a: Fraction, b: Fraction) -> bool:
    return _RELATIONS[rel](a, b)


FORCED = "forced"
FORCED_NOT = "forced_not"
UNDETERMINED = "undetermined"


@dataclass
class Verdict:
    """Outcome of a forcing comparison.

    `citations` is the finite constraint subset whose intersection
    carries the claim; empty citations mean the relation (or its
    negation, for forced_not) holds at every snapshot outright.
    """

    status: str
    relation: str
    lhs: Germ
    rhs: Germ
    rule: str = ""
    citations: tuple[Constraint, ...] = ()
    note: str = ""
    evidence: dict = field(default_factory=dict)

    @property
    def forced(self) -> bool:
        return self.status == FORCED

    def claim(self) -> str:
        rel = self.relation if self.status != FORCED_NOT else f"not {self.relation}"
        return f"{self.lhs.describe()} {rel} {self.rhs.describe()}"

    def summary(self) -> str:
        cites = "; ".join(c.describe() for c in self.citations) or "(pointwise)"
        return f"{self.status}: {self.claim()} [{self.rule}] cites {cites}"


_verdict_recorder: Callable[["Verdict", FilterBase], None] | None = None


def set_verdict_recorder(fn: Callable[[Verdict, FilterBase], None] | None) -> None:
    """Install a hook receiving every verdict `compare` produces."""
    global _verdict_recorder
    _verdict_recorder = fn


# ---------------------------------------------------------------------------
# Pattern helpers


def _is_identity(rv: RandomVariable) -> bool:
    return rv.name == "identity"


def _event_parts(g: Germ) -> tuple[RandomVariable, ClassSpec] | None:
    if g.node == NODE_EVENT:
        return g.rv, g.cls
    return None


def _identity_event_class(g: Germ) -> ClassSpec | None:
    if g.node == NODE_EVENT and _is_identity(g.rv):
        return g.cls
    return None


def _event_quotient(g: Germ) -> tuple[ClassSpec, ClassSpec] | None:
    """Matches Pr[id in A] / Pr[id in B]; the |T| factors cancel."""
    if g.node == NODE_BINOP and g.op == "/":
        num = _identity_event_class(g.left)
        den = _identity_event_class(g.right)
        if num is not None and den is not None:
            return num, den
    return None


def _identity_cond(g: Germ) -> tuple[ClassSpec, ClassSpec] | None:
    if g.node == NODE_COND and _is_identity(g.rv) and _is_identity(g.rv2):
        return g.cls, g.cls2
    return None


def _names_on(cls: ClassSpec) -> bool:
    return cls.name == "On"


def _under_on(cls: ClassSpec) -> bool:
    """The class is the ordinal class or declared inside it."""
    return cls.name == "On" or "On" in cls.subset_tags


def _const_value(g: Germ) -> Fraction | None:
    return g.value if g.node == NODE_CONST else None


def _completion_pin(fb: FilterBase, cls: ClassSpec, scan: int = 64) -> Constraint | None:
    """A fineness constraint pinning some member of cls, if the base has
    one (concretely or through the parametric fineness family).

    Cited alongside ratio and interval bounds so that audit witnesses
    keep the bounded quotient defined instead of vacuous.
    """
    for c in fb.constraints:
        if c.tag == TAG_FINENESS and cls.membership(c.x):
            return c
    if fb.has_parametric(TAG_FINENESS) is not None:
        pool: Iterable[SetValue]
        if fb.window is not None:
            pool = fb.window
        elif fb.universe is not None:
            pool = itertools.islice(fb.universe.enumerate_universe(), scan)
        else:
            pool = ()
        for x in pool:
            if cls.membership(x):
                return fineness(x)
    return None


def _ratio_bound(fb: FilterBase, cls_a: ClassSpec, cls_b: ClassSpec,
                 target: Fraction | None) -> tuple[Constraint, Fraction] | None:
    """Best available bound Pr-quotient <= 1/k for the pair.

    Concrete constraints give their own k.  A parametric family gives
    any k, so the parameter is chosen to undercut the target.
    """
    best = fb.find_ratio(cls_a, cls_b)
    if best is not None:
        return best, Fraction(1, best.param)
    fam = fb.has_parametric(TAG_RATIO, cls_a, cls_b)
    if fam is not None and target is not None and target > 0:
        k = max(1, -(-target.denominator // target.numerator))  # ceil(1/target)
        if Fraction(1, k) > target:
            k += 1
        return expand_parametric(fam, k), Fraction(1, k)
    return None


def _param_bound(fb: FilterBase, tag: str, target: Fraction | None
                 ) -> tuple[Constraint, Fraction] | None:
    """Best interval/weight bound 1/param, concrete or parametric."""
    best = fb.find_param(tag)
    if best is not None:
        return best, Fraction(1, best.param)
    fam = fb.has_parametric(tag)
    if fam is not None and target is not None and target > 0:
        k = max(1, -(-target.denominator // target.numerator))
        if Fraction(1, k) > target:
            k += 1
        return expand_parametric(fam, k), Fraction(1, k)
    return None


# ---------------------------------------------------------------------------
# compare


def compare(lhs: Germ | Fraction | int, rel: str, rhs: Germ | Fraction | int,
            fb: FilterBase, sample_count: int = 10) -> Verdict:
    """Decide a relation between two germs against a filter base.

    Tries, in order: exact rational comparison, structural identity,
    subset monotonicity with fineness witnesses, cited order
    constraints, ratio / weight / interval bounds, exhaustive checking
    over a small restricted window, and finally seeded sampling, which
    can only ever report undetermined.
    """
    lg = lhs if isinstance(lhs, Germ) else const_germ(lhs)
    rg = rhs if isinstance(rhs, Germ) else const_germ(rhs)
    if rel not in _RELATIONS:
        raise ValueError(f"unknown relation {rel!r}")
    verdict = _compare_inner(lg, rel, rg, fb, sample_count)
    if _verdict_recorder is not None:
        _verdict_recorder(verdict, fb)
    return verdict


def _compare_inner(lg: Germ, rel: str, rg: Germ, fb: FilterBase,
                   sample_count: int) -> Verdict:
    def made(status, rule, citations=(), note="", **evidence) -> Verdict:
        return Verdict(status, rel, lg, rg, rule=rule,
                       citations=tuple(citations), note=note, evidence=evidence)

    lv = _const_value(lg)
    rv = _const_value(rg)
    if lv is not None and rv is not None:
        holds = eval_relation(rel, lv, rv)
        return made(FORCED if holds else FORCED_NOT, "rational",
                    note="constants compare exactly")

    if rel != "abs_le" and lg.key() == rg.key():
        holds = rel in ("eq", "le", "ge")
        return made(FORCED if holds else FORCED_NOT, "structural",
                    note="both sides are the same germ")

    v = _subset_rule(lg, rel, rg, fb, made)
    if v is not None:
        return v
    v = _order_rule(lg, rel, rg, fb, made)
    if v is not None:
        return v
    v = _upper_bound_rules(lg, rel, rg, fb, made)
    if v is not None:
        return v
    if rel in _MIRROR:
        v = _upper_bound_rules(rg, _MIRROR[rel], lg, fb,
                               lambda s, rule, citations=(), note="", **ev: made(
                                   s, rule, citations, note, **ev))
        if v is not None:
            return v
    v = _window_exhaustive(lg, rel, rg, fb, made)
    if v is not None:
        return v
    return _sampled(lg, rel, rg, fb, made, sample_count)


def _subset_rule(lg: Germ, rel: str, rg: Germ, fb: FilterBase, made) -> Verdict | None:
    """Monotone comparison of two events of the same variable.

    With A inside B the frequency of A never exceeds that of B at any
    snapshot, which settles the lax relations outright.  The strict ones
    additionally need a pinned state witnessing B strictly bigger: a y
    in B outside A whose preimage the base forces into every snapshot.
    """
    lp = _event_parts(lg)
    rp = _event_parts(rg)
    if lp is None or rp is None:
        return None
    rv1, cls_a = lp
    rv2, cls_b = rp
    if rv1 != rv2:
        return None
    fwd = cls_a.is_subset_of(cls_b)
    bwd = cls_b.is_subset_of(cls_a)
    if fwd is True and bwd is True:
        holds = rel in ("eq", "le", "ge")
        return made(FORCED if holds else FORCED_NOT, "subset-antisym",
                    note=f"{cls_a.name} and {cls_b.name} contain each other")
    pin = sep = None
    if fwd is True:
        pin, sep = _strict_pin(fb, rv1, cls_a, cls_b)
    rpin = rsep = None
    if bwd is True:
        rpin, rsep = _strict_pin(fb, rv1, cls_b, cls_a)

    def strict(p, s, small: ClassSpec, big: ClassSpec, status):
        return made(status, "subset-strict", citations=(p,),
                    note=f"{s.pretty()} lies in {big.name} but not {small.name}",
                    separator=s.code)

    if fwd is True:
        if rel == "le":
            return made(FORCED, "subset-monotone",
                        note=f"{cls_a.name} is contained in {cls_b.name}")
        if rel == "gt":
            return made(FORCED_NOT, "subset-monotone",
                        note=f"{cls_a.name} is contained in {cls_b.name}")
        if pin is not None:
            if rel == "lt" or rel == "ne":
                return strict(pin, sep, cls_a, cls_b, FORCED)
            if rel == "ge" or rel == "eq":
                return strict(pin, sep, cls_a, cls_b, FORCED_NOT)
    if bwd is True:
        if rel == "ge":
            return made(FORCED, "subset-monotone",
                        note=f"{cls_b.name} is contained in {cls_a.name}")
        if rel == "lt":
            return made(FORCED_NOT, "subset-monotone",
                        note=f"{cls_b.name} is contained in {cls_a.name}")
        if rpin is not None:
            if rel == "gt" or rel == "ne":
                return strict(rpin, rsep, cls_b, cls_a, FORCED)
            if rel == "le" or rel == "eq":
                return strict(rpin, rsep, cls_b, cls_a, FORCED_NOT)
    return None


def _strict_pin(fb: FilterBase, rv: RandomVariable, small: ClassSpec,
                big: ClassSpec, scan: int = 256) -> tuple[Constraint | None, SetValue | None]:
    """A fineness constraint forcing a state that hits big but not small."""
    for c in fb.constraints:
        if c.tag == TAG_FINENESS:
            y = rv(c.x)
            if big.membership(y) and not small.membership(y):
                return c, c.x
    if fb.has_parametric(TAG_FINENESS) is None:
        return None, None
    pool: Iterable[SetValue]
    if fb.window is not None:
        pool = fb.window
    elif fb.universe is not None:
        pool = itertools.islice(fb.universe.enumerate_universe(), scan)
    else:
        pool = ()
    for x in pool:
        y = rv(x)
        if big.membership(y) and not small.membership(y):
            return fineness(x), x
    return None, None


def _order_rule(lg: Germ, rel: str, rg: Germ, fb: FilterBase, made) -> Verdict | None:
    """Comparisons carried directly by cited count-order constraints."""
    cls_a = _identity_event_class(lg)
    cls_b = _identity_event_class(rg)
    if cls_a is None or cls_b is None:
        return None
    lt_ab = fb.find_order(TAG_ORDER_LT, cls_a, cls_b)
    lt_ba = fb.find_order(TAG_ORDER_LT, cls_b, cls_a)
    ge_ab = fb.find_order(TAG_ORDER_GE, cls_a, cls_b)
    ge_ba = fb.find_order(TAG_ORDER_GE, cls_b, cls_a)
    note = "count order divides through by the snapshot size"
    if lt_ab is not None:
        if rel in ("lt", "le", "ne"):
            return made(FORCED, "order", citations=(lt_ab,), note=note)
        if rel in ("ge", "gt", "eq"):
            return made(FORCED_NOT, "order", citations=(lt_ab,), note=note)
    if lt_ba is not None:
        if rel in ("gt", "ge", "ne"):
            return made(FORCED, "order", citations=(lt_ba,), note=note)
        if rel in ("le", "lt", "eq"):
            return made(FORCED_NOT, "order", citations=(lt_ba,), note=note)
    if ge_ab is not None and ge_ba is not None:
        if rel == "eq":
            return made(FORCED, "order", citations=(ge_ab, ge_ba), note=note)
        if rel == "ne":
            return made(FORCED_NOT, "order", citations=(ge_ab, ge_ba), note=note)
    if ge_ab is not None:
        if rel == "ge":
            return made(FORCED, "order", citations=(ge_ab,), note=note)
        if rel == "lt":
            return made(FORCED_NOT, "order", citations=(ge_ab,), note=note)
    if ge_ba is not None:
        if rel == "le":
            return made(FORCED, "order", citations=(ge_ba,), note=note)
        if rel == "gt":
            return made(FORCED_NOT, "order", citations=(ge_ba,), note=note)
    return None


def _upper_bound_rules(lg: Germ, rel: str, rg: Germ, fb: FilterBase, made) -> Verdict | None:
    """Bounds of the shape (germ) <= 1/k supplied by cited constraints:
    ratio constraints for event quotients, weight for the ordinal mass,
    interval for limit mass and the parity imbalance under On."""
    target = _const_value(rg)
    if target is None:
        return None

    quotient = _event_quotient(lg)
    if quotient is not None:
        cls_a, cls_b = quotient
        found = _ratio_bound(fb, cls_a, cls_b, target)
        if found is not None:
            c, bound = found
            cites = [c]
            pin = _completion_pin(fb, cls_b)
            if pin is not None:
                cites.append(pin)
            note = (f"|{cls_a.name} hits| stays within 1/{c.param} of "
                    f"|{cls_b.name} hits|; the size factors cancel")
            return _bound_verdict(made, rel, bound, target, "ratio", cites, note)

    ev = _event_parts(lg)
    if ev is not None and _is_identity(ev[0]) and _under_on(ev[1]):
        found = _param_bound(fb, TAG_WEIGHT, target)
        if found is not None:
            c, bound = found
            note = "ordinal states carry at most 1/m of any admitted snapshot"
            if not _names_on(ev[1]):
                note += f"; {ev[1].name} sits inside On"
            return _bound_verdict(made, rel, bound, target, "weight", [c], note)

    cond = _identity_cond(lg)
    if cond is not None and cond[0].name == "Lim" and _names_on(cond[1]):
        found = _param_bound(fb, TAG_INTERVAL, target)
        if found is not None:
            c, bound = found
            cites = [c]
            pin = _completion_pin(fb, cond[1])
            if pin is not None:
                cites.append(pin)
            note = ("each ordinal run admits at most one limit point and "
                    "runs have more than l states")
            return _bound_verdict(made, rel, bound, target, "interval-limit",
                                  cites, note)

    if rel == "abs_le" and lg.node == NODE_BINOP and lg.op == "-":
        dl = _identity_cond(lg.left)
        dr = _identity_cond(lg.right)
        if dl is not None and dr is not None and _names_on(dl[1]) and _names_on(dr[1]):
            names = {dl[0].name, dr[0].name}
            if names == {"Even", "Odd"}:
                found = _param_bound(fb, TAG_INTERVAL, target)
                if found is not None:
                    c, bound = found
                    cites = [c]
                    pin = _completion_pin(fb, dl[1])
                    if pin is not None:
                        cites.append(pin)
                    note = ("parities alternate inside each run, so the "
                            "imbalance is at most one state per run")
                    if bound <= target:
                        return made(FORCED, "interval-parity", citations=cites,
                                    note=note, bound=str(bound))
    return None


def _bound_verdict(made, rel: str, bound: Fraction, target: Fraction,
                   rule: str, cites, note: str) -> Verdict | None:
    """Turn `value <= bound` into a verdict about `value rel target`."""
    ev = {"bound": str(bound)}
    if rel in ("le", "abs_le") and bound <= target:
        return made(FORCED, rule, cites, note, **ev)
    if rel == "lt" and bound < target:
        return made(FORCED, rule, cites, note, **ev)
    if rel == "ne" and bound < target:
        return made(FORCED, rule, cites, note, **ev)
    if rel == "gt" and bound <= target:
        return made(FORCED_NOT, rule, cites, note, **ev)
    if rel == "ge" and bound < target:
        return made(FORCED_NOT, rule, cites, note, **ev)
    if rel == "eq" and bound < target:
        return made(FORCED_NOT, rule, cites, note, **ev)
    return None


def _window_exhaustive(lg: Germ, rel: str, rg: Germ, fb: FilterBase, made,
                       cap: int = 14) -> Verdict | None:
    """Decide by enumerating every admissible snapshot of a small window.

    Snapshots where either side has no value are vacuous and skipped; a
    verdict needs at least one snapshot where both sides evaluate.
    """
    if fb.window is None or len(fb.window) > cap:
        return None
    concrete = [c for c in fb.constraints if c.tag != TAG_PARAMETRIC]
    mode = fb.universe.mode if fb.universe is not None else None
    states = list(fb.window)
    holds = fails = vacuous = 0
    for size in range(1, len(states) + 1):
        if fb.max_size is not None and size >= fb.max_size:
            break
        for combo in itertools.combinations(states, size):
            snap = Snapshot(combo)
            if not all(constraint_membership(c, snap, mode) for c in concrete):
                continue
            try:
                a = lg.eval_at(snap)
                b = rg.eval_at(snap)
            except (ConditionNull, DivisionUndefined, EmptySnapshot):
                vacuous += 1
                continue
            if eval_relation(rel, a, b):
                holds += 1
            else:
                fails += 1
    if holds and not fails:
        return made(FORCED, "window-exhaustive", citations=tuple(concrete),
                    note="checked every admissible snapshot of the window",
                    holds=holds, vacuous=vacuous)
    if fails and not holds:
        return made(FORCED_NOT, "window-exhaustive", citations=tuple(concrete),
                    note="relation failed at every admissible snapshot",
                    fails=fails, vacuous=vacuous)
    if holds and fails:
        return made(UNDETERMINED, "window-exhaustive",
                    note="relation splits the window's snapshots",
                    holds=holds, fails=fails, vacuous=vacuous)
    return None


def _sampled(lg: Germ, rel: str, rg: Germ, fb: FilterBase, made,
             sample_count: int) -> Verdict:
    """Last resort: evaluate on sampled witnesses.  Samples justify no
    forcing either way, so the status is always undetermined."""
    seed = zlib.crc32(f"{lg.key()}|{rel}|{rg.key()}".encode())
    rng = random.Random(seed)
    concrete = expand_base(fb)
    holds = fails = vacuous = 0
    for _ in range(sample_count):
        w = find_witness(concrete, fb.universe, rng=rng, window=fb.window,
                         max_size=fb.max_size, decorate=rng.randrange(0, 5))
        if w is None:
            break
        try:
            a = lg.eval_at(w)
            b = rg.eval_at(w)
        except (ConditionNull, DivisionUndefined, EmptySnapshot):
            vacuous += 1
            continue
        if eval_relation(rel, a, b):
            holds += 1
        else:
            fails += 1
    return made(UNDETERMINED, "sampled",
                note="no citable rule applies; sampled evidence only",
                holds=holds, fails=fails, vacuous=vacuous)


# ---------------------------------------------------------------------------
# Infinitesimal classification


APPROX_ZERO = "approx_zero"
NOT_APPROX_ZERO = "not_approx_zero"


@dataclass
class Classification:
    """Symbolic infinitesimality verdict for a germ.

    approx_zero means: for every k there is a citable finite subset of
    the base on whose intersection |germ| <= 1/k, so the germ is below
    every positive rational in the forcing order.  `sample_citations`
    shows the subset produced at one sample parameter.
    """

    status: str
    germ: Germ
    rule: str = ""
    note: str = ""
    sample_citations: tuple[Constraint, ...] = ()
    sample_parameter: int | None = None

    @property
    def approx_zero(self) -> bool:
        return self.status == APPROX_ZERO


def classify_infinitesimal(g: Germ, fb: FilterBase, sample_k: int = 3) -> Classification:
    """Decide approx-zero status from the base's parametric families.

    The decision is symbolic: no witness search runs.  A germ counts as
    approximately zero exactly when the base supplies, for every k, a
    finite citation set bounding it by 1/k.
    """
    v = _const_value(g)
    if v is not None:
        if v == 0:
            return Classification(APPROX_ZERO, g, rule="zero",
                                  note="the zero constant is below every 1/k")
        return Classification(NOT_APPROX_ZERO, g, rule="rational",
                              note=f"|{v}| exceeds 1/k for large k")

    if g.node == NODE_BINOP and g.op == "/" and g.left.key() == g.right.key():
        return Classification(NOT_APPROX_ZERO, g, rule="self-quotient",
                              note="the quotient is 1 wherever it is defined")
    if g.node == NODE_BINOP and g.op == "-" and g.left.key() == g.right.key():
        return Classification(APPROX_ZERO, g, rule="cancellation",
                              note="the difference vanishes wherever defined")

    quotient = _event_quotient(g)
    if quotient is not None:
        fam = fb.has_parametric(TAG_RATIO, quotient[0], quotient[1])
        if fam is not None:
            cites = [expand_parametric(fam, sample_k)]
            pin = _completion_pin(fb, quotient[1])
            if pin is not None:
                cites.append(pin)
            return Classification(
                APPROX_ZERO, g, rule="ratio-family",
                note="each k is carried by the ratio constraint at that k",
                sample_citations=tuple(cites), sample_parameter=sample_k)

    ev = _event_parts(g)
    if ev is not None:
        rv, cls = ev
        if _is_identity(rv) and _under_on(cls):
            fam = fb.has_parametric(TAG_WEIGHT)
            if fam is not None:
                return Classification(
                    APPROX_ZERO, g, rule="weight-family",
                    note="ordinal mass shrinks below 1/m for every m",
                    sample_citations=(expand_parametric(fam, sample_k),),
                    sample_parameter=sample_k)
        if rv.diagonal and cls.tier.is_finite and \
                fb.has_parametric(TAG_FINENESS) is not None:
            pins = _dilution_pins(fb, rv, cls, sample_k)
            if pins is not None:
                return Classification(
                    APPROX_ZERO, g, rule="fineness-dilution",
                    note=(f"{cls.name} meets at most {cls.tier.index} states, "
                          "while pinned snapshots grow without bound"),
                    sample_citations=tuple(pins), sample_parameter=sample_k)

    cond = _identity_cond(g)
    if cond is not None and cond[0].name == "Lim" and _names_on(cond[1]):
        fam = fb.has_parametric(TAG_INTERVAL)
        if fam is not None:
            cites = [expand_parametric(fam, sample_k)]
            pin = _completion_pin(fb, cond[1])
            if pin is not None:
                cites.append(pin)
            return Classification(
                APPROX_ZERO, g, rule="interval-family",
                note="limit mass under On shrinks below 1/l for every l",
                sample_citations=tuple(cites), sample_parameter=sample_k)

    return Classification(UNDETERMINED, g, rule="",
                          note="no parametric family in the base covers this germ")


def _dilution_pins(fb: FilterBase, rv: RandomVariable, cls: ClassSpec,
                   k: int, scan: int = 4096) -> list[Constraint] | None:
    """Fineness pins diluting a finite event below 1/k.

    The event hits at most `size` states of any snapshot; pinning
    k*size states outside the event's preimage keeps the frequency at
    or under 1/k.
    """
    size = cls.tier.index
    if size == 0:
        return []
    need = k * size
    pool: Iterable[SetValue]
    if fb.window is not None:
        pool = fb.window
    elif fb.universe is not None:
        pool = itertools.islice(fb.universe.enumerate_universe(), scan)
    else:
        return None
    pins: list[Constraint] = []
    for x in pool:
        if not cls.membership(rv(x)):
            pins.append(fineness(x))
            if len(pins) == need:
                return pins
    return None


def much_less(lhs: Germ, rhs: Germ, fb: FilterBase) -> Classification:
    """lhs is negligible against rhs when their quotient is approx-zero."""
    quotient = germ_arith("/", lhs, rhs)
    result = classify_infinitesimal(quotient, fb)
    result.note = f"compares {lhs.describe()} against {rhs.describe()}; " + result.note
    return result


# ---------------------------------------------------------------------------
# Verdict auditing


@dataclass
class AuditReport:
    verdict: Verdict
    requested: int
    evaluated: int
    vacuous: int
    failures: tuple[Snapshot, ...]

    @property
    def clean(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        return (f"audit[{self.verdict.rule}]: {self.evaluated} evaluated, "
                f"{self.vacuous} vacuous, {len(self.failures)} failures "
                f"over {self.requested} witnesses")


def audit_verdict(verdict: Verdict, fb: FilterBase, rng: random.Random,
                  witness_count: int = 100) -> AuditReport:
    """Re-verify a forced verdict on fresh witnesses of its citations.

    Every witness in the cited intersection must satisfy the claimed
    relation (the negated relation for forced_not).  Snapshots where a
    side has no value do not refute the claim: the comparison there is
    vacuous by construction.
    """
    if verdict.status == UNDETERMINED:
        raise ValueError("only forced verdicts carry an auditable claim")
    witnesses = generate_witnesses(
        list(verdict.citations), fb.universe, rng, witness_count,
        window=fb.window, max_size=fb.max_size)
    rel = verdict.relation
    expect = verdict.status == FORCED
    evaluated = vacuous = 0
    failures: list[Snapshot] = []
    for w in witnesses:
        try:
            a = verdict.lhs.eval_at(w)
            b = verdict.rhs.eval_at(w)
        except (ConditionNull, DivisionUndefined, EmptySnapshot):
            vacuous += 1
            continue
        evaluated += 1
        if eval_relation(rel, a, b) != expect:
            failures.append(w)
    return AuditReport(verdict, witness_count, evaluated, vacuous, tuple(failures))
