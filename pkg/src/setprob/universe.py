"""Desk-scale set-theoretic universe.

Provides the value space (hereditarily finite sets, ordinals below a
small multiple of omega, non-ordinal padding states, and intensional
power-class members), class specifications with declared cardinality
tiers, and random variables over the universe.

Values are immutable and carry a canonical code; equality, hashing and
snapshot ordering all reduce to code comparison, so two values are equal
iff their codes are byte-identical.  Cardinality tiers are declared
metadata, not computed: a class backed by a small enumerator may still
be declared infinite, which is how the desk model simulates cardinality
hypotheses between classes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

from .errors import BoundTooSmall, EnumerationExhausted, WrongMode

HF_MODE = "hf"
ORDINAL_MODE = "ordinal"

KIND_ORD = "ord"
KIND_PAD = "pad"
KIND_SET = "set"
KIND_INTENSION = "intension"

# Default number of enumerator elements scanned before concluding that a
# supposedly inexhaustible stream cannot deliver.
ENUM_SCAN_CAP = 20000


class SetValue:
    """A universe element with a canonical, byte-comparable code."""

    __slots__ = ("kind", "data", "code", "_key")

    def __init__(self, kind: str, data: tuple, code: str, key: tuple):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "code", code)
        object.__setattr__(self, "_key", key)

    def __setattr__(self, name, value):
        raise AttributeError("SetValue is immutable")

    def __eq__(self, other):
        return isinstance(other, SetValue) and self.code == other.code

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.code)

    def __lt__(self, other):
        return self._key < other._key

    def __le__(self, other):
        return self._key <= other._key

    def __gt__(self, other):
        return self._key > other._key

    def __ge__(self, other):
        return self._key >= other._key

    def __repr__(self):
        return f"SetValue({self.pretty()})"

    # -- kind probes ---------------------------------------------------

    @property
    def is_ordinal(self) -> bool:
        return self.kind == KIND_ORD

    @property
    def is_pad(self) -> bool:
        return self.kind == KIND_PAD

    @property
    def is_set(self) -> bool:
        return self.kind == KIND_SET

    @property
    def is_intension(self) -> bool:
        return self.kind == KIND_INTENSION

    @property
    def ord_parts(self) -> tuple[int, int]:
        """(a, b) for the ordinal w*a + b."""
        if not self.is_ordinal:
            raise WrongMode(f"not an ordinal: {self.pretty()}")
        return self.data

    @property
    def children(self) -> tuple["SetValue", ...]:
        if not self.is_set:
            raise WrongMode(f"not an extensional set: {self.pretty()}")
        return self.data

    def pretty(self) -> str:
        """Human-oriented rendering; codes stay canonical for machines."""
        if self.is_ordinal:
            a, b = self.data
            if a == 0:
                return str(b)
            head = "w" if a == 1 else f"w{a}"
            return head if b == 0 else f"{head}+{b}"
        if self.is_pad:
            return f"#{self.data[0]}"
        if self.is_set:
            return "{" + ",".join(c.pretty() for c in self.children) + "}"
        uid, base_name, contains, sub, notsub = self.data
        inner = ",".join(c.pretty() for c in contains)
        return f"I{uid}<{base_name}>{{{inner}}}"


def ord_value(a: int, b: int) -> SetValue:
    """The ordinal w*a + b as a pair code."""
    if a < 0 or b < 0:
        raise ValueError("ordinal parts must be non-negative")
    code = f"o{a}.{b}"
    return SetValue(KIND_ORD, (a, b), code, (0, a, b))


def nat(b: int) -> SetValue:
    """The finite ordinal b."""
    return ord_value(0, b)


def pad(k: int) -> SetValue:
    """The k-th non-ordinal padding state of an ordinal-mode universe."""
    if k < 0:
        raise ValueError("pad index must be non-negative")
    return SetValue(KIND_PAD, (k,), f"p{k}", (1, k))


def hf_set(children: Iterable[SetValue]) -> SetValue:
    """An extensional finite set; children are deduplicated and sorted."""
    uniq: dict[str, SetValue] = {}
    for c in children:
        uniq[c.code] = c
    kids = tuple(sorted(uniq.values(), key=lambda v: v._key))
    code = "{" + ",".join(c.code for c in kids) + "}"
    key = (2, len(kids), tuple(c._key for c in kids))
    return SetValue(KIND_SET, kids, code, key)


EMPTY_SET = hf_set(())


def _tag(text: str) -> str:
    return f"{len(text)}#{text}"


def intension_member(
    base_name: str,
    uid: int,
    contains: Iterable[SetValue] = (),
    subset_of: Iterable[str] = (),
    not_subset_of: Iterable[str] = (),
) -> SetValue:
    """A marked intensional member of a power class.

    Stands in for an infinite subset of the class named `base_name` that
    contains the marker values `contains`, is declared a subset of every
    class in `subset_of`, and declared not a subset of those in
    `not_subset_of`.  Membership questions about the value are answered
    from this stored intension, never by enumerating an extension.
    """
    cons = tuple(sorted({c.code: c for c in contains}.values(), key=lambda v: v._key))
    sub = tuple(sorted(set(subset_of) | {base_name}))
    notsub = tuple(sorted(set(not_subset_of)))
    code = (
        "i("
        + str(uid)
        + ","
        + _tag(base_name)
        + ",c"
        + str(len(cons))
        + "("
        + ",".join(c.code for c in cons)
        + "),s"
        + str(len(sub))
        + "("
        + "".join(_tag(n) for n in sub)
        + "),n"
        + str(len(notsub))
        + "("
        + "".join(_tag(n) for n in notsub)
        + "))"
    )
    key = (3, base_name, uid, tuple(c._key for c in cons))
    return SetValue(KIND_INTENSION, (uid, base_name, cons, sub, notsub), code, key)


# ---------------------------------------------------------------------------
# Canonical code parsing


class _Cursor:
    __slots__ = ("text", "pos")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, expected: str) -> None:
        if not self.text.startswith(expected, self.pos):
            raise ValueError(f"bad code at {self.pos}: expected {expected!r}")
        self.pos += len(expected)

    def int_until(self, stops: str) -> int:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in stops:
            self.pos += 1
        return int(self.text[start:self.pos])

    def tagged_name(self) -> str:
        length = self.int_until("#")
        self.take("#")
        name = self.text[self.pos:self.pos + length]
        if len(name) != length:
            raise ValueError("truncated name tag")
        self.pos += length
        return name


def _parse_value(cur: _Cursor) -> SetValue:
    ch = cur.peek()
    if ch == "o":
        cur.take("o")
        a = cur.int_until(".")
        cur.take(".")
        b = cur.int_until(",){")
        return ord_value(a, b)
    if ch == "p":
        cur.take("p")
        return pad(cur.int_until(",){"))
    if ch == "{":
        cur.take("{")
        kids = []
        if cur.peek() != "}":
            kids.append(_parse_value(cur))
            while cur.peek() == ",":
                cur.take(",")
                kids.append(_parse_value(cur))
        cur.take("}")
        return hf_set(kids)
    if ch == "i":
        cur.take("i(")
        uid = cur.int_until(",")
        cur.take(",")
        base_name = cur.tagged_name()
        cur.take(",c")
        n_cons = cur.int_until("(")
        cur.take("(")
        cons = []
        for i in range(n_cons):
            if i:
                cur.take(",")
            cons.append(_parse_value(cur))
        cur.take("),s")
        n_sub = cur.int_until("(")
        cur.take("(")
        sub = [cur.tagged_name() for _ in range(n_sub)]
        cur.take("),n")
        n_not = cur.int_until("(")
        cur.take("(")
        notsub = [cur.tagged_name() for _ in range(n_not)]
        cur.take("))")
        return intension_member(base_name, uid, cons, sub, notsub)
    raise ValueError(f"bad code at {cur.pos}: {cur.text!r}")


def parse_code(code: str) -> SetValue:
    """Inverse of the canonical encoding: parse_code(x.code) == x."""
    cur = _Cursor(code)
    value = _parse_value(cur)
    if cur.pos != len(code):
        raise ValueError(f"trailing garbage in code: {code!r}")
    return value


# ---------------------------------------------------------------------------
# Rank


def rank(x: SetValue) -> int:
    """Von Neumann rank of a hereditarily finite value.

    Only extensional set values have a rank here; ordinal, padding and
    intensional codes refuse with WrongMode.
    """
    if not x.is_set:
        raise WrongMode(f"rank undefined for {x.pretty()}")
    return _rank_of_code(x)


_RANK_CACHE: dict[str, int] = {}


def _rank_of_code(x: SetValue) -> int:
    got = _RANK_CACHE.get(x.code)
    if got is not None:
        return got
    if not x.is_set:
        raise WrongMode(f"rank undefined for {x.pretty()}")
    r = 0 if not x.children else 1 + max(_rank_of_code(c) for c in x.children)
    _RANK_CACHE[x.code] = r
    return r


# ---------------------------------------------------------------------------
# Cardinality tiers


@dataclass(frozen=True)
class CardinalityTier:
    """Declared size category: Finite(n) < Tier(k) < ProperClass.

    Tier(k) is the desk analogue of the k-th infinite cardinal.  The
    order is total; comparisons go through a sort key so mixed kinds
    compare correctly.
    """

    kind: str  # "finite" | "tier" | "proper"
    index: int = 0

    @staticmethod
    def finite(n: int) -> "CardinalityTier":
        return CardinalityTier("finite", n)

    @staticmethod
    def infinite(k: int) -> "CardinalityTier":
        return CardinalityTier("tier", k)

    @staticmethod
    def proper() -> "CardinalityTier":
        return CardinalityTier("proper", 0)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def is_infinite(self) -> bool:
        return self.kind != "finite"

    def successor(self) -> "CardinalityTier":
        """Tier of a power class over a class of this tier."""
        if self.kind == "tier":
            return CardinalityTier.infinite(self.index + 1)
        if self.kind == "proper":
            return CardinalityTier.proper()
        return CardinalityTier.finite(2 ** self.index)

    def _order_key(self) -> tuple[int, int]:
        return ({"finite": 0, "tier": 1, "proper": 2}[self.kind], self.index)

    def __lt__(self, other: "CardinalityTier") -> bool:
        return self._order_key() < other._order_key()

    def __le__(self, other: "CardinalityTier") -> bool:
        return self._order_key() <= other._order_key()

    def __gt__(self, other: "CardinalityTier") -> bool:
        return self._order_key() > other._order_key()

    def __ge__(self, other: "CardinalityTier") -> bool:
        return self._order_key() >= other._order_key()

    def describe(self) -> str:
        if self.kind == "finite":
            return f"finite({self.index})"
        if self.kind == "tier":
            return f"tier({self.index})"
        return "proper"


# ---------------------------------------------------------------------------
# Class specifications


class ClassSpec:
    """A class over the universe: name, membership, enumerator, tier.

    Identity is by name: constraints and germs refer to classes by name,
    so distinct classes in one context must carry distinct names.  The
    enumerator is a stateless generator factory; `enumerate` wraps it
    with deduplication and exclusion skipping.  `subset_tags` lists
    names of classes this one is declared to be contained in; for
    finite-tier classes containment is instead decided exactly by
    enumeration.
    """

    __slots__ = ("name", "membership", "_stream", "tier", "subset_tags", "meta")

    def __init__(
        self,
        name: str,
        membership: Callable[[SetValue], bool],
        stream: Callable[[], Iterator[SetValue]],
        tier: CardinalityTier,
        subset_tags: Iterable[str] = (),
        meta: dict | None = None,
    ):
        self.name = name
        self.membership = membership
        self._stream = stream
        self.tier = tier
        self.subset_tags = frozenset(subset_tags)
        self.meta = meta or {}

    def __eq__(self, other):
        return isinstance(other, ClassSpec) and self.name == other.name

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f"ClassSpec({self.name}, {self.tier.describe()})"

    def enumerate(self, exclusions: Iterable[SetValue] = ()) -> Iterator[SetValue]:
        """Distinct members in canonical stream order, skipping exclusions."""
        excl = {x.code for x in exclusions}
        seen: set[str] = set()
        for v in self._stream():
            if v.code in excl or v.code in seen:
                continue
            seen.add(v.code)
            yield v

    def members(self, limit: int | None = None) -> list[SetValue]:
        """Materialize members; finite-tier classes may be taken whole."""
        if limit is None:
            if not self.tier.is_finite:
                raise EnumerationExhausted(
                    f"refusing to materialize infinite-tier class {self.name}"
                )
            limit = self.tier.index
        return list(itertools.islice(self.enumerate(), limit))

    def take_fresh(
        self,
        count: int,
        exclusions: Iterable[SetValue] = (),
        predicate: Callable[[SetValue], bool] | None = None,
        scan_cap: int = ENUM_SCAN_CAP,
    ) -> list[SetValue]:
        """First `count` fresh members passing `predicate`.

        Raises EnumerationExhausted when the stream ends, or when
        `scan_cap` candidates were inspected without success.
        """
        out: list[SetValue] = []
        scanned = 0
        for v in self.enumerate(exclusions):
            scanned += 1
            if predicate is None or predicate(v):
                out.append(v)
                if len(out) == count:
                    return out
            if scanned >= scan_cap:
                break
        if len(out) < count:
            raise EnumerationExhausted(
                f"class {self.name}: needed {count} fresh elements, found {len(out)}"
            )
        return out

    def is_subset_of(self, other: "ClassSpec") -> bool | None:
        """True/False when decidable, None when unknown.

        Finite-tier classes are checked exactly by enumeration; infinite
        ones rely on declared subset tags.
        """
        if self.name == other.name:
            return True
        if other.name in self.subset_tags:
            return True
        if other.meta.get("is_universe"):
            return True
        if self.tier.is_finite:
            return all(other.membership(m) for m in self.members())
        return None


def class_from_values(
    name: str,
    values: Iterable[SetValue],
    tier: CardinalityTier | None = None,
    subset_tags: Iterable[str] = (),
) -> ClassSpec:
    """Extensional class over an explicit finite value set."""
    vals = tuple(sorted({v.code: v for v in values}.values(), key=lambda v: v._key))
    codes = frozenset(v.code for v in vals)
    spec_tier = tier if tier is not None else CardinalityTier.finite(len(vals))
    return ClassSpec(
        name,
        lambda x: x.code in codes,
        lambda: iter(vals),
        spec_tier,
        subset_tags,
        meta={"values": vals},
    )


def class_from_predicate(
    name: str,
    membership: Callable[[SetValue], bool],
    stream: Callable[[], Iterator[SetValue]],
    tier: CardinalityTier,
    subset_tags: Iterable[str] = (),
    meta: dict | None = None,
) -> ClassSpec:
    return ClassSpec(name, membership, stream, tier, subset_tags, meta)


def class_of_set(sv: SetValue, tier: CardinalityTier | None = None) -> ClassSpec:
    """The members of one extensional set, as a class."""
    return class_from_values(f"els{sv.code}", sv.children, tier)


# ---------------------------------------------------------------------------
# Power classes and finite-subset classes


def power_class(base: ClassSpec, name: str | None = None) -> ClassSpec:
    """The class of subsets of `base`.

    For a finite-tier base, members are actual extensional subsets and
    enumeration is size-then-lex over the base's canonical order.  For
    an infinite-tier base the enumerator yields finite subsets first
    (diagonal over growing prefixes); infinite members exist only as
    marked intensional values minted by witness builders, and their
    membership is decided from the stored intension.
    """
    cname = name if name is not None else f"P({base.name})"

    def member(x: SetValue) -> bool:
        if x.is_set:
            return all(base.membership(c) for c in x.children)
        if x.is_intension:
            uid, base_name, cons, sub, notsub = x.data
            if base.name in sub:
                return True
            if base.name in notsub:
                return False
            if any(not base.membership(c) for c in cons):
                return False
            return False  # untagged: unknown extension, answer conservatively
        return False

    if base.tier.is_finite:
        def stream() -> Iterator[SetValue]:
            ground = base.members()
            for size in range(len(ground) + 1):
                for combo in itertools.combinations(ground, size):
                    yield hf_set(combo)
    else:
        def stream() -> Iterator[SetValue]:
            yield EMPTY_SET
            prefix: list[SetValue] = []
            for v in base.enumerate():
                prefix.append(v)
                n = len(prefix)
                for size in range(1, n + 1):
                    for combo in itertools.combinations(prefix[: n - 1], size - 1):
                        yield hf_set(combo + (prefix[-1],))

    return ClassSpec(
        cname,
        member,
        stream,
        base.tier.successor(),
        meta={"power_base": base},
    )


def power_class_of_set(sv: SetValue) -> ClassSpec:
    """Subsets of one extensional set, as a class."""
    return power_class(class_of_set(sv), name=f"P{sv.code}")


def finite_subsets_class(base: ClassSpec, name: str | None = None) -> ClassSpec:
    """The class of finite subsets of `base`.

    Same extension as power_class for finite bases; for infinite bases
    intensional (infinite) members are excluded and the declared tier
    stays that of the base.
    """
    cname = name if name is not None else f"Fin({base.name})"
    inner = power_class(base, name=cname)

    def member(x: SetValue) -> bool:
        if not x.is_set:
            return False
        return all(base.membership(c) for c in x.children)

    tier = base.tier if base.tier.is_infinite else base.tier.successor()
    return ClassSpec(cname, member, inner._stream, tier, meta={"power_base": base})


# ---------------------------------------------------------------------------
# Random variables


class RandomVariable:
    """A state-to-outcome assignment over the universe.

    Diagonal variables are bijections with preimages produced on demand;
    they are the ones whose events enjoy exact pointwise uniformity.
    Identity is by name, mirroring ClassSpec.
    """

    __slots__ = ("name", "kind", "diagonal", "_apply", "_preimage")

    def __init__(
        self,
        name: str,
        kind: str,
        apply_fn: Callable[[SetValue], SetValue],
        preimage_fn: Callable[[SetValue], SetValue] | None,
        diagonal: bool,
    ):
        self.name = name
        self.kind = kind
        self._apply = apply_fn
        self._preimage = preimage_fn
        self.diagonal = diagonal

    def __eq__(self, other):
        return isinstance(other, RandomVariable) and self.name == other.name

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f"RandomVariable({self.name})"

    def __call__(self, x: SetValue) -> SetValue:
        return self._apply(x)

    def preimage(self, y: SetValue) -> SetValue:
        if self._preimage is None:
            raise WrongMode(f"variable {self.name} has no preimage map")
        return self._preimage(y)


def identity_rv() -> RandomVariable:
    return RandomVariable("identity", "identity", lambda x: x, lambda y: y, True)


def table_rv(
    mapping: dict[SetValue, SetValue],
    name: str,
    default_identity: bool = True,
) -> RandomVariable:
    """Explicit finite map with identity default off its support.

    When the mapping permutes its own support the variable is diagonal
    and carries an exact preimage map.
    """
    fwd = {k.code: v for k, v in mapping.items()}
    keys = {k.code for k in mapping}
    values = {v.code for v in mapping.values()}
    is_perm = default_identity and keys == values and len(values) == len(mapping)
    inv = {v.code: k for k, v in mapping.items()} if is_perm else None

    def apply_fn(x: SetValue) -> SetValue:
        got = fwd.get(x.code)
        if got is not None:
            return got
        if default_identity:
            return x
        raise WrongMode(f"variable {name} undefined at {x.pretty()}")

    def preimage_fn(y: SetValue) -> SetValue:
        got = inv.get(y.code)
        return got if got is not None else y

    return RandomVariable(
        name,
        "table",
        apply_fn,
        preimage_fn if is_perm else None,
        is_perm,
    )


def even_shift_permutation() -> RandomVariable:
    """The bijection of the naturals that shifts evens up and odds down.

    Even n goes to n+2, 1 goes to 0, odd n > 1 goes to n-2; everything
    outside the finite ordinals is fixed.  Its image of the even
    naturals is the evens without 0, a proper subclass of the evens.
    """

    def apply_fn(x: SetValue) -> SetValue:
        if not x.is_ordinal:
            return x
        a, b = x.ord_parts
        if a != 0:
            return x
        if b % 2 == 0:
            return nat(b + 2)
        if b == 1:
            return nat(0)
        return nat(b - 2)

    def preimage_fn(y: SetValue) -> SetValue:
        if not y.is_ordinal:
            return y
        a, b = y.ord_parts
        if a != 0:
            return y
        if b % 2 == 0:
            return nat(b - 2) if b >= 2 else nat(1)
        return nat(b + 2)

    return RandomVariable("even-shift", "permutation", apply_fn, preimage_fn, True)


def image_class(
    rv: RandomVariable,
    base: ClassSpec,
    name: str | None = None,
    subset_tags: Iterable[str] = (),
) -> ClassSpec:
    """The image of a class under a diagonal variable.

    Membership is exact via the preimage map; the tier is inherited
    because the variable is a bijection.
    """
    if not rv.diagonal:
        raise WrongMode("image_class needs a diagonal variable")
    cname = name if name is not None else f"{rv.name}[{base.name}]"
    return ClassSpec(
        cname,
        lambda y: base.membership(rv.preimage(y)),
        lambda: (rv(x) for x in base.enumerate()),
        base.tier,
        subset_tags,
    )


# ---------------------------------------------------------------------------
# Ordinal translation


def ordinal_add(gamma: SetValue, alpha: SetValue) -> SetValue:
    """Ordinal addition gamma + alpha on pair codes."""
    a1, b1 = gamma.ord_parts
    a2, b2 = alpha.ord_parts
    if a2 == 0:
        return ord_value(a1, b1 + b2)
    return ord_value(a1 + a2, b2)  # left finite part is absorbed


def translate_class(
    base: ClassSpec,
    alpha: SetValue,
    name: str | None = None,
    subset_tags: Iterable[str] = (),
    probe: int = 512,
) -> ClassSpec:
    """The pointwise translate {g + alpha : g in base}.

    Membership is exact for finite shifts.  For shifts with a limit part
    the required witness has an absorbed finite part, so membership
    falls back to an enumerator probe: exact for finite-tier bases,
    budgeted for infinite ones.
    """
    a2, b2 = alpha.ord_parts
    cname = name if name is not None else f"{base.name}+{alpha.code}"

    def member(x: SetValue) -> bool:
        if not x.is_ordinal:
            return False
        a, b = x.ord_parts
        if a2 == 0:
            return b >= b2 and base.membership(ord_value(a, b - b2))
        if b != b2 or a < a2:
            return False
        want = a - a2
        if base.tier.is_finite:
            return any(m.is_ordinal and m.ord_parts[0] == want for m in base.members())
        for m in itertools.islice(base.enumerate(), probe):
            if m.is_ordinal and m.ord_parts[0] == want:
                return True
        return False

    def stream() -> Iterator[SetValue]:
        seen: set[str] = set()
        for g in base.enumerate():
            if not g.is_ordinal:
                continue
            v = ordinal_add(g, alpha)
            if v.code not in seen:
                seen.add(v.code)
                yield v

    return ClassSpec(cname, member, stream, base.tier, subset_tags)


# ---------------------------------------------------------------------------
# Universe handles


_LEVEL_SIZES = [0, 1, 2, 4, 16, 65536]  # |V_0| .. |V_5|


def level_size(k: int) -> int:
    """|V_k|, the number of hereditarily finite sets of rank below k."""
    while len(_LEVEL_SIZES) <= k:
        _LEVEL_SIZES.append(2 ** _LEVEL_SIZES[-1])
    return _LEVEL_SIZES[k]


class UniverseHandle:
    """Configured universe: a mode, a bound, and the builtin classes.

    The universe itself is potentially infinite (ordinal mode) or merely
    large (HF mode); the handle enumerates it on demand and never
    materializes more than a query touches.
    """

    __slots__ = ("mode", "bound", "_by_rank")

    def __init__(self, mode: str, bound: int):
        self.mode = mode
        self.bound = bound
        self._by_rank: list[list[SetValue]] | None = None

    def __repr__(self):
        return f"UniverseHandle({self.mode}, {self.bound})"

    # -- HF levels -----------------------------------------------------

    def _materialized_ranks(self) -> list[list[SetValue]]:
        """Rank levels 0..3 are tiny and kept whole; higher ranks stay lazy."""
        if self._by_rank is None:
            levels = [[EMPTY_SET]]
            for r in range(1, 4):
                ground = [v for level in levels for v in level]
                top = levels[-1]
                top_codes = {v.code for v in top}
                fresh = []
                for size in range(1, len(ground) + 1):
                    for combo in itertools.combinations(ground, size):
                        if any(c.code in top_codes for c in combo):
                            fresh.append(hf_set(combo))
                fresh.sort(key=lambda v: v._key)
                levels.append(fresh)
            self._by_rank = levels
        return self._by_rank

    def level_members(self, k: int) -> Iterator[SetValue]:
        """Elements of rank exactly k, in size-then-canonical order."""
        if self.mode != HF_MODE:
            raise WrongMode("rank levels exist in HF mode only")
        if k <= 3:
            yield from self._materialized_ranks()[k]
            return
        # Lazily: subsets of V_k containing at least one rank-(k-1) element.
        ground = self._cumulative(k)
        top_codes = {v.code for v in self.level_members(k - 1)} if k - 1 <= 3 else None
        if top_codes is None:
            raise EnumerationExhausted(f"rank level {k} is out of desk range")
        for size in range(1, len(ground) + 1):
            for combo in itertools.combinations(ground, size):
                if any(c.code in top_codes for c in combo):
                    yield hf_set(combo)

    def _cumulative(self, k: int) -> list[SetValue]:
        """V_k as a sorted list; workable for k <= 4."""
        if k > 4:
            raise EnumerationExhausted(f"V_{k} is too large to materialize")
        levels = self._materialized_ranks()
        out = [v for level in levels[:k] for v in level]
        out.sort(key=lambda v: v._key)
        return out

    # -- enumeration ---------------------------------------------------

    def enumerate_universe(self) -> Iterator[SetValue]:
        """All states of the configured universe, in a fixed order.

        HF mode walks ranks upward; ordinal mode interleaves a diagonal
        walk of the ordinals below w*bound with the padding states.
        """
        if self.mode == HF_MODE:
            for k in range(self.bound):
                yield from self.level_members(k)
            return
        n = 0
        while True:
            for a in range(0, min(n, self.bound - 1) + 1):
                yield ord_value(a, n - a)
            yield pad(n)
            n += 1

    def pads(self) -> Iterator[SetValue]:
        if self.mode != ORDINAL_MODE:
            raise WrongMode("padding states exist in ordinal mode only")
        return (pad(k) for k in itertools.count())

    # -- builtin classes ----------------------------------------------

    def universe_class(self) -> ClassSpec:
        return ClassSpec(
            "V",
            lambda x: True,
            self.enumerate_universe,
            CardinalityTier.proper(),
            meta={"is_universe": True},
        )

    def _ordinal_stream(self, keep: Callable[[int, int], bool]) -> Callable[[], Iterator[SetValue]]:
        bound = self.bound

        def stream() -> Iterator[SetValue]:
            n = 0
            while True:
                for a in range(0, min(n, bound - 1) + 1):
                    b = n - a
                    if keep(a, b):
                        yield ord_value(a, b)
                n += 1

        return stream

    def builtin_class(self, name: str, **kw) -> ClassSpec:
        """Builtins: V, On, Even, Odd, Lim, Nat, RankLevel(k), plus the
        class builders PowerClass and FiniteSubsets applied via kw."""
        if name == "V":
            return self.universe_class()
        if name == "RankLevel":
            return self.rank_level_class(kw["k"])
        if name == "PowerClass":
            return power_class(kw["base"])
        if name == "FiniteSubsets":
            return finite_subsets_class(kw["base"])
        if self.mode != ORDINAL_MODE:
            raise WrongMode(f"builtin {name} needs an ordinal-mode universe")
        if name == "On":
            return ClassSpec(
                "On",
                lambda x: x.is_ordinal,
                self._ordinal_stream(lambda a, b: True),
                CardinalityTier.infinite(0),
                subset_tags={"V"},
            )
        if name == "Even":
            # Limit ordinals count as even: the finite distance from the
            # nearest limit below is what carries parity.
            return ClassSpec(
                "Even",
                lambda x: x.is_ordinal and x.ord_parts[1] % 2 == 0,
                self._ordinal_stream(lambda a, b: b % 2 == 0),
                CardinalityTier.infinite(0),
                subset_tags={"On", "V"},
            )
        if name == "Odd":
            return ClassSpec(
                "Odd",
                lambda x: x.is_ordinal and x.ord_parts[1] % 2 == 1,
                self._ordinal_stream(lambda a, b: b % 2 == 1),
                CardinalityTier.infinite(0),
                subset_tags={"On", "V"},
            )
        if name == "Lim":
            return ClassSpec(
                "Lim",
                lambda x: x.is_ordinal and x.ord_parts[1] == 0 and x.ord_parts[0] >= 1,
                self._ordinal_stream(lambda a, b: b == 0 and a >= 1),
                CardinalityTier.infinite(0),
                subset_tags={"On", "Even", "V"},
            )
        if name == "Nat":
            return ClassSpec(
                "Nat",
                lambda x: x.is_ordinal and x.ord_parts[0] == 0,
                self._ordinal_stream(lambda a, b: a == 0),
                CardinalityTier.infinite(0),
                subset_tags={"On", "V"},
            )
        raise KeyError(f"unknown builtin class {name}")

    def rank_level_class(self, k: int) -> ClassSpec:
        if self.mode != HF_MODE:
            raise WrongMode("rank levels exist in HF mode only")
        if k >= self.bound:
            raise BoundTooSmall(f"rank level {k} above universe bound {self.bound}")
        count = level_size(k + 1) - level_size(k)
        return ClassSpec(
            f"RankLevel({k})",
            lambda x: x.is_set and _rank_of_code(x) == k,
            lambda: self.level_members(k),
            CardinalityTier.finite(count),
            subset_tags={"V"},
        )


def make_universe(mode: str, bound: int) -> UniverseHandle:
    """Configure a universe.

    HF mode enumerates V_bound and needs bound >= 3 for any interesting
    structure.  Ordinal mode covers ordinals below w*bound; bound >= 1,
    with bound 1 giving the finite ordinals only (no limits).
    """
    if mode not in (HF_MODE, ORDINAL_MODE):
        raise ValueError(f"unknown universe mode {mode!r}")
    if mode == HF_MODE and bound < 3:
        raise BoundTooSmall(f"HF universe needs bound >= 3, got {bound}")
    if mode == ORDINAL_MODE and bound < 1:
        raise BoundTooSmall(f"ordinal universe needs bound >= 1, got {bound}")
    return UniverseHandle(mode, bound)
