"""Exception types shared across the analysis pipeline."""

from __future__ import annotations


class CrossfireError(Exception):
    """Base class for all errors raised by this package."""


class MalformedGraphError(CrossfireError):
    """An object graph violates a structural invariant (disconnected node,
    duplicate edge label, children under a leaf kind, ...)."""


class SnapshotParseError(CrossfireError):
    """Snapshot bytes are not syntactically valid JSON.

    Carries the character offset of the failure when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (offset {offset})")
        self.offset = offset


class SchemaError(CrossfireError):
    """Parsed JSON does not match the snapshot/manifest schema.

    Carries the dotted path of the offending field.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InputError(CrossfireError):
    """Operation inputs are inconsistent (mismatched test ids, variables, ...)."""


class ConfigError(CrossfireError):
    """A configuration value is out of its allowed range."""


class DataIntegrityError(CrossfireError):
    """Derived data contradicts itself, e.g. two different expected values
    for one deterministic location."""


class MaskLookupError(CrossfireError, KeyError):
    """Determinism mask queried for a (test, variable) it was not built for."""


class ScenarioError(CrossfireError):
    """A synthetic corpus plan is infeasible as specified."""


class OracleSizeError(CrossfireError):
    """Exact-cover oracle invoked on an instance above its enumeration cap."""
