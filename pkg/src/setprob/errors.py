"""Exception types shared across the engine.

Every deliberate failure raised by the library derives from EngineError,
so callers (and the CLI) can distinguish engine conditions from plain
programming errors.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine-level failures."""


class BoundTooSmall(EngineError):
    """Universe bound is below the workable minimum for its mode."""


class WrongMode(EngineError):
    """Operation is inconsistent with the universe mode of its inputs."""


class EmptySnapshot(EngineError):
    """A probability denominator was asked of an empty snapshot."""


class DivisionUndefined(EngineError):
    """A quotient germ's denominator evaluated to zero at a snapshot."""


class ConditionNull(DivisionUndefined):
    """The conditioning event has no states in the snapshot.

    A special case of a vanishing denominator: the conditional ratio is
    the joint over the condition, and the condition's count is zero.
    """


class EnumerationExhausted(EngineError):
    """An enumerator could not supply enough fresh elements."""


class MarkerMissing(EngineError):
    """A required separating element does not exist.

    Signals an inconsistent judgement slice: a strict order between two
    classes was asserted although one is contained in the other.
    """


class MissingSubsetBound(EngineError):
    """Restriction was attempted without the subset-size constraint.

    Without it the restricted constraint set may contain the empty set,
    so the restriction is refused rather than silently built.
    """


class ConstructionFailed(EngineError):
    """A witness construction could not satisfy its own constraints."""


class ScenarioError(EngineError):
    """Base class for scenario-file handling failures."""


class ScenarioParseError(ScenarioError):
    """Scenario file is not syntactically readable."""


class ScenarioValidationError(ScenarioError):
    """Scenario file is readable but violates the published schema."""
