"""Scenario files: declarative batch runs with machine-readable reports.

A scenario is a JSON document naming a universe, optional tier
thresholds, class and variable definitions, a filter-base recipe, and a
query list.  Validation happens against `SCENARIO_SCHEMA` before
anything executes; unknown fields are rejected so that typos fail loud.

Reports render every rational as an exact "p/q" string and are
deterministic for a fixed scenario and seed, except for the timing
fields.  `canonical_report_text` strips those, which is what the
determinism tests compare.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import jsonschema

from .bootstrap import TierConfig, coherence_check
from .errors import (
    EngineError,
    ScenarioParseError,
    ScenarioValidationError,
)
from .filters import (
    FilterBase,
    FipBudget,
    check_fip,
    constraint_from_text,
    constraint_membership,
    fineness_base,
    ordinal_theorem_base,
    ordinal_witness,
    superreg_constraints,
    superreg_witness,
)
from .germs import (
    Germ,
    Verdict,
    classify_infinitesimal,
    compare,
    conditional_germ,
    const_germ,
    germ_arith,
    germ_of_event,
    joint_germ,
    star_sum,
)
from .snapshots import Snapshot
from .universe import (
    CardinalityTier,
    ClassSpec,
    RandomVariable,
    SetValue,
    UniverseHandle,
    class_from_predicate,
    class_from_values,
    even_shift_permutation,
    finite_subsets_class,
    identity_rv,
    image_class,
    make_universe,
    parse_code,
    power_class,
    table_rv,
    translate_class,
)

_TIER_SPEC = {
    "oneOf": [
        {"type": "object", "properties": {"finite": {"type": "integer", "minimum": 0}},
         "required": ["finite"], "additionalProperties": False},
        {"type": "object", "properties": {"infinite": {"type": "integer", "minimum": 0}},
         "required": ["infinite"], "additionalProperties": False},
        {"const": "proper"},
    ]
}

SCENARIO_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["universe"],
    "additionalProperties": False,
    "properties": {
        "universe": {
            "type": "object",
            "required": ["mode", "bound"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["hf", "ordinal"]},
                "bound": {"type": "integer", "minimum": 1},
            },
        },
        "seed": {"type": "integer"},
        "tiers": {"type": "array", "items": {"type": "integer", "minimum": 2},
                  "minItems": 1},
        "classes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "kind"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": ["values", "residue", "translate", "image",
                                      "power", "finite_subsets", "builtin"]},
                    "values": {"type": "array", "items": {"type": "string"}},
                    "modulus": {"type": "integer", "minimum": 1},
                    "residue": {"type": "integer", "minimum": 0},
                    "nat_only": {"type": "boolean"},
                    "span": {"type": "integer", "minimum": 0},
                    "base": {"type": "string"},
                    "shift": {"type": "string"},
                    "rv": {"type": "string"},
                    "builtin": {"type": "string"},
                    "level": {"type": "integer", "minimum": 0},
                    "subset_tags": {"type": "array", "items": {"type": "string"}},
                    "tier": _TIER_SPEC,
                },
            },
        },
        "variables": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "kind"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": ["identity", "even_shift", "table"]},
                    "mapping": {"type": "object",
                                "additionalProperties": {"type": "string"}},
                },
            },
        },
        "base": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "builder": {"enum": ["fineness", "ordinal_theorem", "empty"]},
                "window": {"type": "array", "items": {"type": "string"}},
                "max_size": {"type": "integer", "minimum": 1},
                "pairs": {"type": "array",
                          "items": {"type": "array", "items": {"type": "string"},
                                    "minItems": 2, "maxItems": 2}},
                "constraints": {"type": "array", "items": {"type": "string"}},
            },
        },
        "queries": {"type": "array", "items": {"$ref": "#/$defs/query"}},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "format": {"enum": ["json", "csv"]},
                "decimals": {"type": "boolean"},
            },
        },
    },
    "$defs": {
        "germ": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "const": {"type": "string"},
                "event": {
                    "type": "object",
                    "required": ["class"],
                    "additionalProperties": False,
                    "properties": {"rv": {"type": "string"},
                                   "class": {"type": "string"}},
                },
                "joint": {
                    "type": "object",
                    "required": ["class", "class2"],
                    "additionalProperties": False,
                    "properties": {
                        "rv": {"type": "string"}, "class": {"type": "string"},
                        "rv2": {"type": "string"}, "class2": {"type": "string"},
                    },
                },
                "cond": {
                    "type": "object",
                    "required": ["class", "given"],
                    "additionalProperties": False,
                    "properties": {
                        "rv": {"type": "string"}, "class": {"type": "string"},
                        "rv2": {"type": "string"}, "given": {"type": "string"},
                    },
                },
                "op": {
                    "type": "object",
                    "required": ["op", "left", "right"],
                    "additionalProperties": False,
                    "properties": {
                        "op": {"enum": ["+", "-", "*", "/"]},
                        "left": {"$ref": "#/$defs/germ"},
                        "right": {"$ref": "#/$defs/germ"},
                    },
                },
                "sum": {"type": "array", "items": {"$ref": "#/$defs/germ"}},
            },
        },
        "query": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["kind", "class", "snapshot"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "event"}, "rv": {"type": "string"},
                        "class": {"type": "string"},
                        "snapshot": {"type": "array", "items": {"type": "string"}},
                        "expect": {"type": "string"},
                    },
                },
                {
                    "type": "object",
                    "required": ["kind", "class", "class2", "snapshot"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "joint"}, "rv": {"type": "string"},
                        "class": {"type": "string"}, "rv2": {"type": "string"},
                        "class2": {"type": "string"},
                        "snapshot": {"type": "array", "items": {"type": "string"}},
                        "expect": {"type": "string"},
                    },
                },
                {
                    "type": "object",
                    "required": ["kind", "class", "given", "snapshot"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "conditional"}, "rv": {"type": "string"},
                        "class": {"type": "string"}, "rv2": {"type": "string"},
                        "given": {"type": "string"},
                        "snapshot": {"type": "array", "items": {"type": "string"}},
                        "expect": {"type": "string"},
                    },
                },
                {
                    "type": "object",
                    "required": ["kind", "lhs", "rel", "rhs"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "compare"},
                        "lhs": {"$ref": "#/$defs/germ"},
                        "rel": {"enum": ["eq", "ne", "le", "lt", "ge", "gt",
                                         "abs_le"]},
                        "rhs": {"$ref": "#/$defs/germ"},
                        "expect_status": {"enum": ["forced", "forced_not",
                                                   "undetermined"]},
                    },
                },
                {
                    "type": "object",
                    "required": ["kind", "germ"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "classify"},
                        "germ": {"$ref": "#/$defs/germ"},
                        "expect_status": {"enum": ["approx_zero", "not_approx_zero",
                                                   "undetermined"]},
                    },
                },
                {
                    "type": "object",
                    "required": ["kind", "builder"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "witness"},
                        "builder": {"enum": ["superreg", "ordinal"]},
                        "pins": {"type": "array", "items": {"type": "string"}},
                        "pairs": {"type": "array", "items": {"type": "array"}},
                        "k": {"type": "integer", "minimum": 1},
                        "l": {"type": "integer", "minimum": 1},
                        "m": {"type": "integer", "minimum": 1},
                    },
                },
                {
                    "type": "object",
                    "required": ["kind", "class", "snapshot", "probe"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "coherence"}, "rv": {"type": "string"},
                        "class": {"type": "string"},
                        "snapshot": {"type": "array", "items": {"type": "string"}},
                        "probe": {"type": "array", "items": {"type": "string"}},
                    },
                },
                {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "fip"},
                        "expect_status": {"enum": ["witnessed", "refuted",
                                                   "unknown"]},
                    },
                },
            ]
        },
    },
}


def rational_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Scenario context: resolved objects


@dataclass
class ScenarioContext:
    universe: UniverseHandle
    seed: int
    rng: random.Random
    tiers: TierConfig | None
    classes: dict[str, ClassSpec]
    variables: dict[str, RandomVariable]
    base: FilterBase

    def cls(self, name: str) -> ClassSpec:
        if name not in self.classes:
            raise ScenarioValidationError(f"unknown class {name!r}")
        return self.classes[name]

    def rv(self, name: str | None) -> RandomVariable:
        if name is None:
            return self.variables["identity"]
        if name not in self.variables:
            raise ScenarioValidationError(f"unknown variable {name!r}")
        return self.variables[name]

    def states(self, codes: list[str]) -> list[SetValue]:
        return [parse_code(c) for c in codes]


def _tier_from_spec(spec: Any) -> CardinalityTier | None:
    if spec is None:
        return None
    if spec == "proper":
        return CardinalityTier.proper()
    if "finite" in spec:
        return CardinalityTier.finite(spec["finite"])
    return CardinalityTier.infinite(spec["infinite"])


def _build_class(ctx: ScenarioContext, spec: dict) -> ClassSpec:
    name = spec["name"]
    kind = spec["kind"]
    tags = tuple(spec.get("subset_tags", ()))
    tier = _tier_from_spec(spec.get("tier"))
    if kind == "values":
        vals = [parse_code(c) for c in spec.get("values", [])]
        return class_from_values(name, vals, tier=tier, subset_tags=tags)
    if kind == "residue":
        m = spec["modulus"]
        r = spec.get("residue", 0) % m
        # Residue classes live in omega-block 0 by default; a span of s
        # widens them to blocks 0..s, and nat_only=False sweeps blocks.
        if "span" in spec:
            span = spec["span"]
        elif spec.get("nat_only", True):
            span = 0
        else:
            span = None

        def member(v: SetValue, m=m, r=r, span=span) -> bool:
            if not v.is_ordinal:
                return False
            a, b = v.ord_parts
            if span is not None and a > span:
                return False
            return b % m == r

        def stream(m=m, r=r, span=span):
            from .universe import ord_value
            if span is not None:
                b = r
                while True:
                    for a in range(span + 1):
                        yield ord_value(a, b)
                    b += m
            else:
                s = 0
                while True:
                    for a in range(s + 1):
                        yield ord_value(a, r + (s - a) * m)
                    s += 1

        return class_from_predicate(
            name, member, stream,
            tier=tier or CardinalityTier.infinite(0), subset_tags=tags)
    if kind == "translate":
        shift = parse_code(spec["shift"])
        return translate_class(ctx.cls(spec["base"]), shift, name=name,
                               subset_tags=tags)
    if kind == "image":
        return image_class(ctx.rv(spec["rv"]), ctx.cls(spec["base"]),
                           name=name, subset_tags=tags)
    if kind == "power":
        return power_class(ctx.cls(spec["base"]), name=name)
    if kind == "finite_subsets":
        return finite_subsets_class(ctx.cls(spec["base"]))
    if kind == "builtin":
        target = spec.get("builtin", name)
        if target == "RankLevel":
            return ctx.universe.builtin_class(target, k=spec["level"])
        return ctx.universe.builtin_class(target)
    raise ScenarioValidationError(f"unknown class kind {kind!r}")


def _build_variable(spec: dict) -> RandomVariable:
    kind = spec["kind"]
    if kind == "identity":
        return identity_rv()
    if kind == "even_shift":
        return even_shift_permutation()
    if kind == "table":
        mapping = {parse_code(k): parse_code(v)
                   for k, v in spec.get("mapping", {}).items()}
        return table_rv(mapping, spec["name"])
    raise ScenarioValidationError(f"unknown variable kind {kind!r}")


def _build_base(ctx: ScenarioContext, spec: dict | None) -> FilterBase:
    if spec is None:
        return fineness_base(ctx.universe)
    builder = spec.get("builder", "fineness")
    window = [parse_code(c) for c in spec["window"]] if "window" in spec else None
    if builder == "fineness":
        fb = fineness_base(ctx.universe, window)
    elif builder == "ordinal_theorem":
        pairs = [(ctx.cls(a), ctx.cls(b)) for a, b in spec.get("pairs", [])]
        fb = ordinal_theorem_base(ctx.universe, pairs)
    elif builder == "empty":
        fb = FilterBase((), universe=ctx.universe,
                        window=tuple(window) if window is not None else None)
    else:
        raise ScenarioValidationError(f"unknown base builder {builder!r}")
    extra = [constraint_from_text(text, ctx.classes)
             for text in spec.get("constraints", [])]
    if extra:
        fb = fb.with_constraints(extra)
    if "max_size" in spec:
        from dataclasses import replace
        fb = replace(fb, max_size=spec["max_size"])
    return fb


def build_germ(ctx: ScenarioContext, spec: dict) -> Germ:
    if "const" in spec:
        return const_germ(Fraction(spec["const"]))
    if "event" in spec:
        e = spec["event"]
        return germ_of_event(ctx.rv(e.get("rv")), ctx.cls(e["class"]))
    if "joint" in spec:
        e = spec["joint"]
        return joint_germ(ctx.rv(e.get("rv")), ctx.cls(e["class"]),
                          ctx.rv(e.get("rv2")), ctx.cls(e["class2"]))
    if "cond" in spec:
        e = spec["cond"]
        return conditional_germ(ctx.rv(e.get("rv")), ctx.cls(e["class"]),
                                ctx.rv(e.get("rv2")), ctx.cls(e["given"]))
    if "op" in spec:
        e = spec["op"]
        return germ_arith(e["op"], build_germ(ctx, e["left"]),
                          build_germ(ctx, e["right"]))
    if "sum" in spec:
        return star_sum([build_germ(ctx, g) for g in spec["sum"]])
    raise ScenarioValidationError(f"unrecognized germ spec: {sorted(spec)}")


# ---------------------------------------------------------------------------
# Query execution


def _verdict_record(v: Verdict) -> dict:
    return {
        "status": v.status,
        "relation": v.relation,
        "claim": v.claim(),
        "rule": v.rule,
        "citations": [c.describe() for c in v.citations],
        "note": v.note,
    }


def _run_query(ctx: ScenarioContext, q: dict) -> dict:
    kind = q["kind"]
    record: dict = {"kind": kind}
    started = time.perf_counter()
    if kind in ("event", "joint", "conditional"):
        snap = Snapshot(ctx.states(q["snapshot"]))
        if kind == "event":
            germ = germ_of_event(ctx.rv(q.get("rv")), ctx.cls(q["class"]))
        elif kind == "joint":
            germ = joint_germ(ctx.rv(q.get("rv")), ctx.cls(q["class"]),
                              ctx.rv(q.get("rv2")), ctx.cls(q["class2"]))
        else:
            germ = conditional_germ(ctx.rv(q.get("rv")), ctx.cls(q["class"]),
                                    ctx.rv(q.get("rv2")), ctx.cls(q["given"]))
        value = germ.eval_at(snap)
        record["expression"] = germ.describe()
        record["value"] = rational_str(value)
        if "expect" in q:
            record["assertion"] = "pass" if Fraction(q["expect"]) == value else "fail"
    elif kind == "compare":
        lhs = build_germ(ctx, q["lhs"])
        rhs = build_germ(ctx, q["rhs"])
        verdict = compare(lhs, q["rel"], rhs, ctx.base)
        record["verdict"] = _verdict_record(verdict)
        if "expect_status" in q:
            record["assertion"] = ("pass" if verdict.status == q["expect_status"]
                                   else "fail")
    elif kind == "classify":
        germ = build_germ(ctx, q["germ"])
        result = classify_infinitesimal(germ, ctx.base)
        record["expression"] = germ.describe()
        record["status"] = result.status
        record["rule"] = result.rule
        record["citations"] = [c.describe() for c in result.sample_citations]
        if "expect_status" in q:
            record["assertion"] = ("pass" if result.status == q["expect_status"]
                                   else "fail")
    elif kind == "witness":
        record.update(_run_witness_query(ctx, q))
    elif kind == "coherence":
        if ctx.tiers is None:
            raise ScenarioValidationError("coherence queries need tier thresholds")
        snap = Snapshot(ctx.states(q["snapshot"]))
        report = coherence_check(ctx.tiers, ctx.rv(q.get("rv")),
                                 ctx.cls(q["class"]), snap,
                                 ctx.states(q["probe"]))
        record["levels"] = [
            {"snapshot_size": lv.snapshot_size, "probe_size": lv.probe_size,
             "tier": lv.tier, "value": rational_str(lv.direct),
             "equal": lv.equal}
            for lv in report.levels
        ]
        record["assertion"] = "pass" if report.ok else "fail"
    elif kind == "fip":
        result = check_fip(ctx.base, FipBudget(), ctx.rng)
        record["status"] = result.status
        record["checked_subsets"] = len(result.witnesses)
        if "expect_status" in q:
            record["assertion"] = ("pass" if result.status == q["expect_status"]
                                   else "fail")
    else:
        raise ScenarioValidationError(f"unknown query kind {kind!r}")
    record["timing_ms"] = round((time.perf_counter() - started) * 1000, 3)
    return record


def _run_witness_query(ctx: ScenarioContext, q: dict) -> dict:
    builder = q.get("builder", "superreg")
    out: dict = {"builder": builder}
    if builder == "superreg":
        pins = ctx.states(q.get("pins", []))
        pairs = [(ctx.cls(a), ctx.cls(b), n) for a, b, n in q.get("pairs", [])]
        w = superreg_witness(pins, pairs)
        checks = superreg_constraints(pairs, pins)
    elif builder == "ordinal":
        pins = ctx.states(q.get("pins", []))
        pairs = [(ctx.cls(a), ctx.cls(b)) for a, b in q.get("pairs", [])]
        w = ordinal_witness(ctx.universe, pins, q.get("k", 1), q.get("l", 1),
                            q.get("m", 1), pairs)
        from .filters import fineness, interval, ratio, weight
        checks = [fineness(p) for p in pins]
        checks += [ratio(a, b, q.get("k", 1)) for a, b in pairs]
        checks += [interval(q.get("l", 1)), weight(q.get("m", 1))]
    else:
        raise ScenarioValidationError(f"unknown witness builder {builder!r}")
    memberships = [
        {"constraint": c.describe(),
         "holds": constraint_membership(c, w, ctx.universe.mode)}
        for c in checks
    ]
    out["witness"] = [s.code for s in w]
    out["size"] = len(w)
    out["memberships"] = memberships
    out["assertion"] = ("pass" if all(m["holds"] for m in memberships)
                        else "fail")
    return out


# ---------------------------------------------------------------------------
# Scenario entry points


def load_scenario(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"scenario is not valid JSON: {exc}") from exc
    validate_scenario(data)
    return data


def validate_scenario(data: dict) -> None:
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ScenarioValidationError(
            f"scenario rejected at {'/'.join(str(p) for p in exc.absolute_path)}: "
            f"{exc.message}") from exc


def build_context(data: dict) -> ScenarioContext:
    uni = make_universe(data["universe"]["mode"], data["universe"]["bound"])
    seed = data.get("seed", 0)
    tiers = TierConfig(tuple(data["tiers"])) if "tiers" in data else None
    ctx = ScenarioContext(
        universe=uni, seed=seed, rng=random.Random(seed), tiers=tiers,
        classes={}, variables={"identity": identity_rv()},
        base=FilterBase((), universe=uni),
    )
    for name in ("V", "On", "Even", "Odd", "Lim", "Nat"):
        try:
            ctx.classes[name] = uni.builtin_class(name)
        except EngineError:
            continue  # ordinal-only classes in HF mode
    for spec in data.get("classes", []):
        ctx.classes[spec["name"]] = _build_class(ctx, spec)
    for spec in data.get("variables", []):
        ctx.variables[spec["name"]] = _build_variable(spec)
    ctx.base = _build_base(ctx, data.get("base"))
    return ctx


def run_scenario_data(data: dict) -> dict:
    """Execute an already-validated scenario document."""
    started = time.perf_counter()
    ctx = build_context(data)
    records = []
    ok = True
    for q in data.get("queries", []):
        try:
            record = _run_query(ctx, q)
        except EngineError as exc:
            record = {"kind": q.get("kind"), "error": f"{type(exc).__name__}: {exc}"}
            ok = False
        if record.get("assertion") == "fail":
            ok = False
        records.append(record)
    return {
        "universe": dict(data["universe"]),
        "seed": ctx.seed,
        "query_count": len(records),
        "queries": records,
        "ok": ok,
        "timing_ms": round((time.perf_counter() - started) * 1000, 3),
    }


def run_scenario(path: str) -> dict:
    return run_scenario_data(load_scenario(path))


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False)


def canonical_report_text(report: dict) -> str:
    """Report JSON with timing fields removed, for determinism checks."""

    def strip(obj):
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items() if k != "timing_ms"}
        if isinstance(obj, list):
            return [strip(v) for v in obj]
        return obj

    return json.dumps(strip(report), indent=2, sort_keys=False)


def report_csv(report: dict) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["index", "kind", "value", "status", "assertion", "error"])
    for i, rec in enumerate(report["queries"]):
        status = rec.get("status") or rec.get("verdict", {}).get("status", "")
        writer.writerow([
            i, rec.get("kind", ""), rec.get("value", ""), status,
            rec.get("assertion", ""), rec.get("error", ""),
        ])
    return buf.getvalue()
