class CkabError(Exception):
    """Base class for all errors raised by this package."""


class SpecificationError(CkabError):
    """A specification object violates a structural contract.

    Raised eagerly at construction/load time: undeclared dimensions or
    values, malformed value trees, arity mismatches, reserved names.
    """


class BuildError(CkabError):
    """Transition-system construction could not proceed."""
