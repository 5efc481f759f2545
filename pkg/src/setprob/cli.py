"""Command-line interface.

Subcommands: `run` executes a scenario file; `query` evaluates one
event or conditional germ against a base; `witness` drives the three
witness constructions; `check` runs the structural checks (FIP,
coherence, restriction, the non-restriction counterexample); `demo`
replays the canned demonstrations; `audit` re-verifies forced verdicts
on fresh witnesses.

Exit codes: 0 success, 1 a query or check failed, 2 input validation
failed, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction

from .bootstrap import TierConfig, TieredProb, coherence_check, \
    non_restriction_counterexample
from .errors import EngineError, ScenarioError
from .filters import (
    FilterBase,
    FipBudget,
    check_fip,
    constraint_membership,
    fineness,
    fineness_base,
    interval,
    order_ge,
    order_lt,
    ordinal_theorem_base,
    ordinal_witness,
    power_lift,
    powerset_prefilter_stage,
    powerset_witness_extend,
    ratio,
    superreg_constraints,
    superreg_witness,
    weight,
)
from .germs import (
    APPROX_ZERO,
    FORCED,
    Verdict,
    audit_verdict,
    classify_infinitesimal,
    compare,
    conditional_germ,
    germ_of_event,
    set_verdict_recorder,
)
from .scenario import (
    canonical_report_text,
    rational_str,
    report_csv,
    report_json,
    run_scenario,
)
from .snapshots import Snapshot
from .universe import (
    CardinalityTier,
    ClassSpec,
    HF_MODE,
    ORDINAL_MODE,
    UniverseHandle,
    class_from_predicate,
    class_of_set,
    even_shift_permutation,
    hf_set,
    identity_rv,
    image_class,
    make_universe,
    nat,
    ord_value,
    parse_code,
    power_class,
    translate_class,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_INTERNAL = 3


def _sliced_residue_class(name: str, modulus: int, span: int, tier_index: int,
                          subset_tags: tuple[str, ...]) -> ClassSpec:
    """Residue-class ordinals restricted to omega-blocks 0..span.

    The block span widens along the chain, so each class's successor
    owns a whole fresh block of states far from its predecessor.
    """
    def member(v, modulus=modulus, span=span):
        if not v.is_ordinal:
            return False
        a, b = v.ord_parts
        return a <= span and b % modulus == 0

    def stream(modulus=modulus, span=span):
        b = 0
        while True:
            for a in range(span + 1):
                yield ord_value(a, b)
            b += modulus

    return class_from_predicate(name, member, stream,
                                tier=CardinalityTier.infinite(tier_index),
                                subset_tags=subset_tags)


def registry_classes(universe: UniverseHandle) -> dict[str, ClassSpec]:
    """Named classes available to CLI queries and demos.

    The residue chain carries declared tiers that order it strictly:
    multiples of four in the first block, below the evens of the first
    two blocks, below all ordinals of the first three.
    """
    classes: dict[str, ClassSpec] = {"V": universe.universe_class()}
    if universe.mode == ORDINAL_MODE:
        for name in ("On", "Even", "Odd", "Lim", "Nat"):
            classes[name] = universe.builtin_class(name)
        classes["mult4_t0"] = _sliced_residue_class(
            "mult4_t0", 4, 0, 0, ("even_t1", "ord_t2", "Nat", "Even", "On", "V"))
        classes["even_t1"] = _sliced_residue_class(
            "even_t1", 2, 1, 1, ("ord_t2", "Even", "On", "V"))
        classes["ord_t2"] = _sliced_residue_class(
            "ord_t2", 1, 2, 2, ("On", "V"))
        classes["Nat_shift1"] = translate_class(
            classes["Nat"], nat(1), name="Nat_shift1",
            subset_tags=("Nat", "On", "V"))
        classes["pi_Even"] = image_class(
            even_shift_permutation(), classes["Even"], name="pi_Even",
            subset_tags=("Even", "On", "V"))
    else:
        for k in range(universe.bound - 1):
            classes[f"rank{k}"] = universe.rank_level_class(k)
    return classes


def _build_universe(args) -> UniverseHandle:
    if args.universe == HF_MODE:
        return make_universe(HF_MODE, getattr(args, "rank", None) or 5)
    return make_universe(ORDINAL_MODE, getattr(args, "omega_bound", None) or 3)


def _default_base(universe: UniverseHandle, name: str,
                  classes: dict[str, ClassSpec]) -> FilterBase:
    if name == "fineness":
        return fineness_base(universe)
    if name == "ordinal_theorem":
        pairs = [(classes["mult4_t0"], classes["even_t1"]),
                 (classes["even_t1"], classes["ord_t2"])]
        return ordinal_theorem_base(universe, pairs)
    raise ScenarioError(f"unknown base builder {name!r}")


# ---------------------------------------------------------------------------
# query


def _cmd_query(args) -> int:
    universe = _build_universe(args)
    classes = registry_classes(universe)
    if args.event not in classes:
        print(f"unknown class {args.event!r}; known: {sorted(classes)}",
              file=sys.stderr)
        return EXIT_VALIDATION
    rvs = {"identity": identity_rv(), "even_shift": even_shift_permutation()}
    if args.rv not in rvs:
        print(f"unknown variable {args.rv!r}", file=sys.stderr)
        return EXIT_VALIDATION
    rv = rvs[args.rv]
    if args.given is not None:
        if args.given not in classes:
            print(f"unknown class {args.given!r}", file=sys.stderr)
            return EXIT_VALIDATION
        germ = conditional_germ(rv, classes[args.event],
                                identity_rv(), classes[args.given])
    else:
        germ = germ_of_event(rv, classes[args.event])
    base = _default_base(universe, args.base, classes)
    rng = random.Random(args.seed)

    from .filters import expand_base, find_witness
    concrete = expand_base(base)
    samples = []
    for _ in range(3):
        w = find_witness(concrete, universe, rng=rng, window=base.window,
                         decorate=rng.randrange(0, 5))
        if w is None:
            break
        try:
            value = rational_str(germ.eval_at(w))
        except EngineError as exc:
            value = f"undefined ({type(exc).__name__})"
        samples.append({"snapshot": [s.code for s in w], "value": value})
    classification = classify_infinitesimal(germ, base)
    record = {
        "expression": germ.describe(),
        "universe": {"mode": universe.mode, "bound": universe.bound},
        "base": args.base,
        "seed": args.seed,
        "classification": classification.status,
        "classification_rule": classification.rule,
        "samples": samples,
    }
    if args.out == "json":
        print(json.dumps(record, indent=2))
    else:
        print("field,value")
        print(f"expression,{record['expression']}")
        print(f"classification,{record['classification']}")
        for i, s in enumerate(samples):
            print(f"sample{i},{s['value']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# witness


def _parse_pairs(text: str) -> list[list[str]]:
    return [part.split(":") for part in text.split(",") if part]


def _cmd_witness(args) -> int:
    universe = _build_universe(args)
    classes = registry_classes(universe)

    def cls(name: str) -> ClassSpec:
        if name not in classes:
            raise ScenarioError(f"unknown class {name!r}")
        return classes[name]

    pins = [parse_code(c) for c in (args.pins.split(",") if args.pins else [])]
    if args.construction == "superreg":
        pairs = [(cls(a), cls(b), int(n)) for a, b, n in _parse_pairs(args.pairs)]
        w = superreg_witness(pins, pairs)
        checks = superreg_constraints(pairs, pins)
    elif args.construction == "ordinal":
        pairs = [(cls(a), cls(b)) for a, b in _parse_pairs(args.pairs or "")]
        w = ordinal_witness(universe, pins, args.k, args.l, args.m, pairs)
        checks = [fineness(p) for p in pins]
        checks += [ratio(a, b, args.k) for a, b in pairs]
        checks += [interval(args.l), weight(args.m)]
    else:  # powerset
        sets = [[parse_code(code) for code in pair.split(":")]
                for pair in args.pairs.split(";") if pair]
        prior = fineness_base(universe)
        fb = powerset_prefilter_stage(universe, args.level, prior,
                                      [(a, b) for a, b in sets],
                                      rng=random.Random(args.seed))
        kept = [c for c in fb.constraints
                if c.tag in ("order_lt", "order_ge")]
        print(f"judgements kept: {len(kept)}")
        for c in kept:
            print("  " + c.describe())
        result = check_fip(fb, rng=random.Random(args.seed))
        print(f"fip: {result.status}")
        return EXIT_OK if result.witnessed else EXIT_FAILURE

    ok = all(constraint_membership(c, w, universe.mode) for c in checks)
    print(f"witness ({len(w)} states): " + " ".join(s.code for s in w))
    for c in checks:
        holds = constraint_membership(c, w, universe.mode)
        print(f"  {'ok  ' if holds else 'FAIL'} {c.describe()}")
    return EXIT_OK if ok else EXIT_FAILURE


# ---------------------------------------------------------------------------
# check


def _hf_lattice(universe: UniverseHandle) -> list:
    states = []
    for k in range(4):
        states.extend(universe.level_members(k))
    return states


def _cmd_check(args) -> int:
    budget = FipBudget(scan_cap=args.budget) if args.budget else FipBudget()
    if args.what == "fip":
        universe = _build_universe(args)
        classes = registry_classes(universe)
        if universe.mode == ORDINAL_MODE:
            base = _default_base(universe, "ordinal_theorem", classes)
        else:
            base = fineness_base(universe, _hf_lattice(universe)[:8])
        result = check_fip(base, budget)
        print(f"fip: {result.status} ({len(result.witnesses)} subsets witnessed)")
        return EXIT_OK if result.witnessed else EXIT_FAILURE

    if args.what == "coherence":
        universe = make_universe(HF_MODE, 5)
        config = TierConfig((4, 9, 17))
        window = _hf_lattice(universe)
        snap = Snapshot(window[:12])
        probe = window[:8]
        cls = class_from_predicate(
            "low_rank", lambda v: v.is_set and len(v.children) <= 1,
            lambda: iter(()), tier=CardinalityTier.proper())
        report = coherence_check(config, identity_rv(), cls, snap, probe)
        print(report.summary())
        return EXIT_OK if report.ok else EXIT_FAILURE

    if args.what == "restriction":
        universe = make_universe(HF_MODE, 5)
        config = TierConfig((4, 9, 17))
        tower = TieredProb(universe, config, _hf_lattice(universe))
        ok = True
        for tier in range(len(config.thresholds)):
            _, audit = tower.restricted(tier)
            print(f"tier {tier} (cap {tower.space_cap(tier)}): {audit.summary()}")
            ok = ok and audit.passed
        return EXIT_OK if ok else EXIT_FAILURE

    # counterexample
    universe = make_universe(HF_MODE, 5)
    config = TierConfig((4, 9, 17))
    demo = non_restriction_counterexample(universe, config, _hf_lattice(universe))
    print(demo.narrative())
    return EXIT_OK if demo.demonstrates_failure else EXIT_FAILURE


# ---------------------------------------------------------------------------
# demos


def _print_verdict(v: Verdict) -> None:
    print(v.summary())


def demo_euclidean(seed: int = 0) -> list[Verdict]:
    """Strict inclusion forces strictly smaller probability."""
    universe = make_universe(ORDINAL_MODE, 3)
    classes = registry_classes(universe)
    base = fineness_base(universe)
    ident = identity_rv()
    v = compare(germ_of_event(ident, classes["mult4_t0"]), "lt",
                germ_of_event(ident, classes["even_t1"]), base)
    return [v]


def demo_hume_failure(seed: int = 0) -> list[Verdict]:
    """A bijective shift of the evens has strictly smaller probability."""
    universe = make_universe(ORDINAL_MODE, 3)
    classes = registry_classes(universe)
    base = fineness_base(universe)
    ident = identity_rv()
    v = compare(germ_of_event(ident, classes["pi_Even"]), "lt",
                germ_of_event(ident, classes["Even"]), base)
    return [v]


def demo_translation_failure(seed: int = 0) -> list[Verdict]:
    """Shifting the naturals by one drops the first point, and with it
    a sliver of probability."""
    universe = make_universe(ORDINAL_MODE, 3)
    classes = registry_classes(universe)
    base = fineness_base(universe)
    ident = identity_rv()
    v = compare(germ_of_event(ident, classes["Nat_shift1"]), "lt",
                germ_of_event(ident, classes["Nat"]), base)
    return [v]


def chain_sets() -> list:
    """Four rank-4 sets realizing the worked pre-order chain: three in
    strict ascent, the last two equal in count but distinct as sets.

    Built from rank-3 elements only, so that no state of the ground
    witness is accidentally a subset of any of them, and each set
    difference is a singleton usable as a marker.
    """
    universe = make_universe(HF_MODE, 5)
    r3 = list(universe.level_members(3))
    a1 = hf_set(r3[0:2])
    a2 = hf_set(r3[0:3])
    a3 = hf_set(r3[0:5])
    a4 = hf_set(r3[0:4] + [r3[5]])
    return [a1, a2, a3, a4]


def demo_powerset_chain(seed: int = 0) -> tuple[bool, str]:
    """Reproduce the staged judgement chain P(A1)<P(A2)<P(A3)=P(A4)."""
    universe = make_universe(HF_MODE, 5)
    a1, a2, a3, a4 = chain_sets()
    els = [class_of_set(sv) for sv in (a1, a2, a3, a4)]
    slice_cs = [
        order_lt(els[0], els[1]), order_lt(els[1], els[2]),
        order_lt(els[0], els[2]), order_lt(els[0], els[3]),
        order_lt(els[1], els[3]),
        order_ge(els[2], els[3]), order_ge(els[3], els[2]),
    ]
    judgements = FilterBase(
        tuple(slice_cs + [power_lift(c) for c in slice_cs]),
        universe=universe, provenance="worked-chain")
    from .filters import find_witness
    f_minus = find_witness(slice_cs, universe, rng=random.Random(seed))
    if f_minus is None:
        return False, "no ground witness for the judgement slice"
    powers = [power_class(c) for c in els]
    extended = powerset_witness_extend(
        universe, f_minus, [[powers[0]], [powers[1]], [powers[2], powers[3]]],
        judgements)
    counts = [sum(1 for s in extended if p.membership(s)) for p in powers]
    ok = counts[0] < counts[1] < counts[2] == counts[3]
    lines = [
        f"ground witness: {len(f_minus)} states",
        f"extended witness: {len(extended)} states",
        "power-class counts: " + ", ".join(
            f"P(A{i + 1})={c}" for i, c in enumerate(counts)),
        "chain realized: " + ("yes" if ok else "NO"),
    ]
    return ok, "\n".join(lines)


def demo_pn_iteration(seed: int = 0) -> tuple[bool, str]:
    """One strict judgement lifted through three power-class levels."""
    universe = make_universe(HF_MODE, 5)
    low = _hf_lattice(universe)
    a = hf_set([low[0], low[1]])
    b = hf_set([low[0], low[1], low[2]])
    cls_a, cls_b = class_of_set(a), class_of_set(b)
    from .filters import find_witness
    lines = []
    ok = True
    current = order_lt(cls_a, cls_b)
    for n in range(4):
        w = find_witness([current], universe, rng=random.Random(seed + n))
        good = w is not None
        ok = ok and good
        label = "ground" if n == 0 else f"P^{n}"
        lines.append(f"{label}: {current.describe()} "
                     + (f"witnessed with {len(w)} states" if good else "NO WITNESS"))
        if n < 3:
            current = power_lift(current)
    return ok, "\n".join(lines)


_DEMOS = {
    "euclidean": demo_euclidean,
    "hume-failure": demo_hume_failure,
    "translation-failure": demo_translation_failure,
}


def _cmd_demo(args) -> int:
    if args.name in _DEMOS:
        verdicts = _DEMOS[args.name](args.seed)
        for v in verdicts:
            _print_verdict(v)
        return EXIT_OK if all(v.forced for v in verdicts) else EXIT_FAILURE
    if args.name == "powerset-chain":
        ok, text = demo_powerset_chain(args.seed)
    else:
        ok, text = demo_pn_iteration(args.seed)
    print(text)
    return EXIT_OK if ok else EXIT_FAILURE


# ---------------------------------------------------------------------------
# audit


def _cmd_audit(args) -> int:
    recorded: list[tuple[Verdict, FilterBase]] = []
    set_verdict_recorder(lambda v, fb: recorded.append((v, fb)))
    try:
        for name, fn in _DEMOS.items():
            for v in fn(args.seed):
                if not v.forced:
                    print(f"{name}: expected a forced verdict, got {v.status}")
                    return EXIT_FAILURE
    finally:
        set_verdict_recorder(None)

    rng = random.Random(args.seed)
    all_clean = True
    for v, fb in recorded:
        if v.status != FORCED:
            continue
        report = audit_verdict(v, fb, rng, witness_count=args.budget)
        print(report.summary() + " :: " + v.claim())
        all_clean = all_clean and report.clean

    universe = make_universe(HF_MODE, 5)
    config = TierConfig((4, 9, 17))
    demo = non_restriction_counterexample(universe, config, _hf_lattice(universe))
    print("counterexample: "
          + ("reproduced" if demo.demonstrates_failure else "FAILED"))
    all_clean = all_clean and demo.demonstrates_failure

    ordinal = make_universe(ORDINAL_MODE, 3)
    classes = registry_classes(ordinal)
    base = _default_base(ordinal, "ordinal_theorem", classes)
    cls_result = classify_infinitesimal(
        germ_of_event(identity_rv(), classes["On"]), base)
    print(f"Pr[On] classification: {cls_result.status}")
    all_clean = all_clean and cls_result.status == APPROX_ZERO

    print("audit: " + ("all clean" if all_clean else "FAILURES PRESENT"))
    return EXIT_OK if all_clean else EXIT_FAILURE


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="setprob",
        description="Exact non-Archimedean probability engine over finite "
                    "snapshots of a set-theoretic universe.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("path")
    p_run.add_argument("--out", choices=["json", "csv"], default="json")
    p_run.add_argument("--canonical", action="store_true",
                       help="strip timing fields from the report")

    p_query = sub.add_parser("query", help="evaluate one event germ")
    p_query.add_argument("--universe", choices=[HF_MODE, ORDINAL_MODE],
                         default=ORDINAL_MODE)
    p_query.add_argument("--rank", type=int, help="HF universe bound")
    p_query.add_argument("--omega-bound", type=int, dest="omega_bound",
                         help="ordinal universe block count")
    p_query.add_argument("--event", required=True)
    p_query.add_argument("--given")
    p_query.add_argument("--rv", default="identity")
    p_query.add_argument("--base", default="fineness",
                         choices=["fineness", "ordinal_theorem"])
    p_query.add_argument("--seed", type=int, default=0)
    p_query.add_argument("--out", choices=["json", "csv"], default="json")

    p_wit = sub.add_parser("witness", help="run a witness construction")
    p_wit.add_argument("construction", choices=["superreg", "powerset", "ordinal"])
    p_wit.add_argument("--universe", choices=[HF_MODE, ORDINAL_MODE],
                       default=ORDINAL_MODE)
    p_wit.add_argument("--rank", type=int)
    p_wit.add_argument("--omega-bound", type=int, dest="omega_bound")
    p_wit.add_argument("--pins", default="")
    p_wit.add_argument("--pairs", default="")
    p_wit.add_argument("--k", type=int, default=1)
    p_wit.add_argument("--l", type=int, default=1)
    p_wit.add_argument("--m", type=int, default=1)
    p_wit.add_argument("--level", type=int, default=4)
    p_wit.add_argument("--seed", type=int, default=0)

    p_check = sub.add_parser("check", help="structural checks")
    p_check.add_argument("what", choices=["fip", "coherence", "restriction",
                                          "counterexample"])
    p_check.add_argument("--universe", choices=[HF_MODE, ORDINAL_MODE],
                         default=ORDINAL_MODE)
    p_check.add_argument("--rank", type=int)
    p_check.add_argument("--omega-bound", type=int, dest="omega_bound")
    p_check.add_argument("--budget", type=int)

    p_demo = sub.add_parser("demo", help="canned demonstrations")
    p_demo.add_argument("name", choices=["euclidean", "hume-failure",
                                         "translation-failure",
                                         "powerset-chain", "pn-iteration"])
    p_demo.add_argument("--seed", type=int, default=0)

    p_audit = sub.add_parser("audit", help="re-verify forced verdicts")
    p_audit.add_argument("--budget", type=int, default=40,
                         help="witnesses per verdict")
    p_audit.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            report = run_scenario(args.path)
            if args.out == "csv":
                print(report_csv(report), end="")
            elif args.canonical:
                print(canonical_report_text(report))
            else:
                print(report_json(report))
            return EXIT_OK if report["ok"] else EXIT_FAILURE
        if args.command == "query":
            return _cmd_query(args)
        if args.command == "witness":
            return _cmd_witness(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "demo":
            return _cmd_demo(args)
        if args.command == "audit":
            return _cmd_audit(args)
        parser.error(f"unknown command {args.command!r}")
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EngineError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001 - the contract wants exit 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
