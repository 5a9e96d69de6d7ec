"""Exception types shared across the package."""


class TanfieldError(Exception):
    """Base class for all package errors."""


class InputError(TanfieldError):
    """Malformed or inconsistent input: parse, topology, convexity, file format."""


class DegeneracyError(TanfieldError):
    """Geometric configuration on which the requested operation is undefined."""


class BoundaryAmbiguousError(DegeneracyError):
    """A sign test fell within tolerance of zero; the answer would depend on roundoff."""


class AliasingError(TanfieldError):
    """Consecutive path samples are too far apart to track the angle unambiguously."""


class OffPlaneError(TanfieldError):
    """A sample that should lie on a given great circle leaves its plane."""


class RuleViolationError(TanfieldError):
    """A computed quantity broke one of its defining identities."""


class ExtractionError(TanfieldError):
    """Sampled field data is inconsistent with the structure being extracted."""


class StallError(TanfieldError):
    """Relaxation could not decrease the energy after repeated step halving."""
