"""Exact non-Archimedean probability over finite snapshots.

Probabilities here are ratios of hit counts on finite test sets of
states, glued into hyperrational germs by a constructively maintained
filter base.  Everything is exact rational arithmetic; comparisons are
decided by forcing against cited constraint subsets, and every witness
construction can be re-audited after the fact.
"""

from .errors import (
    BoundTooSmall,
    ConditionNull,
    ConstructionFailed,
    DivisionUndefined,
    EmptySnapshot,
    EngineError,
    EnumerationExhausted,
    MarkerMissing,
    MissingSubsetBound,
    ScenarioError,
    ScenarioParseError,
    ScenarioValidationError,
    WrongMode,
)
from .universe import (
    CardinalityTier,
    ClassSpec,
    EMPTY_SET,
    HF_MODE,
    ORDINAL_MODE,
    RandomVariable,
    SetValue,
    UniverseHandle,
    class_from_predicate,
    class_from_values,
    class_of_set,
    even_shift_permutation,
    finite_subsets_class,
    hf_set,
    identity_rv,
    image_class,
    intension_member,
    level_size,
    make_universe,
    nat,
    ord_value,
    ordinal_add,
    pad,
    parse_code,
    power_class,
    power_class_of_set,
    rank,
    table_rv,
    translate_class,
)
from .snapshots import (
    Rational,
    Snapshot,
    conditional_snapshot_prob,
    joint_snapshot_prob,
    snapshot,
    snapshot_prob,
)
from .filters import (
    Constraint,
    FilterBase,
    FipBudget,
    FipResult,
    check_fip,
    constraint_from_text,
    constraint_membership,
    constraint_to_text,
    expand_base,
    expand_parametric,
    filter_base_from_text,
    filter_base_to_text,
    find_witness,
    fineness,
    fineness_base,
    generate_witnesses,
    interval,
    min_size,
    order_ge,
    order_lt,
    ordinal_theorem_base,
    ordinal_witness,
    parametric_fineness,
    parametric_interval,
    parametric_ratio,
    parametric_weight,
    power_lift,
    powerset_prefilter_stage,
    powerset_witness_extend,
    ratio,
    subset_bound,
    superreg_constraints,
    superreg_witness,
    weight,
)
from .germs import (
    APPROX_ZERO,
    AuditReport,
    Classification,
    FORCED,
    FORCED_NOT,
    Germ,
    NOT_APPROX_ZERO,
    UNDETERMINED,
    Verdict,
    audit_verdict,
    classify_infinitesimal,
    compare,
    conditional_germ,
    const_germ,
    germ_arith,
    germ_of_event,
    joint_germ,
    much_less,
    set_verdict_recorder,
    star_sum,
)
from .bootstrap import (
    CoherenceReport,
    RestrictionAudit,
    RestrictionCounterexample,
    TierConfig,
    TieredProb,
    audit_restricted_base,
    coherence_check,
    non_restriction_counterexample,
    restrict_base,
    restrict_constraint_set,
)
from .scenario import (
    SCENARIO_SCHEMA,
    canonical_report_text,
    rational_str,
    report_csv,
    report_json,
    run_scenario,
    run_scenario_data,
    validate_scenario,
)

__version__ = "0.1.0"
