"""Exception hierarchy shared by all spx modules.

Every error carries a stable ``code`` string (used by the CLI for
machine-readable stderr output) and an exit-code category:
1 = configuration, 2 = solver/precondition, 3 = detector/protocol, 4 = I/O.
"""


class SpxError(Exception):
    code = "error"
    exit_code = 1


class ConfigError(SpxError):
    code = "config"
    exit_code = 1


# --- segmentation ---

class DimensionMismatch(SpxError):
    code = "dimension_mismatch"
    exit_code = 2


class UnknownLabel(SpxError):
    code = "unknown_label"
    exit_code = 2


class NonCanonicalLabel(SpxError):
    code = "non_canonical_label"
    exit_code = 2


# --- masking ---

class EmptyPixelSet(SpxError):
    code = "empty_pixel_set"
    exit_code = 2


class PartAbsent(SpxError):
    code = "part_absent"
    exit_code = 2


class NoBackgroundPixels(SpxError):
    code = "no_background_pixels"
    exit_code = 2


class LengthMismatch(SpxError):
    code = "length_mismatch"
    exit_code = 2


# --- detector ---

class ProtocolError(SpxError):
    code = "protocol_error"
    exit_code = 3


class DetectorTimeout(SpxError):
    code = "detector_timeout"
    exit_code = 3


class DetectorCrash(SpxError):
    code = "detector_crash"
    exit_code = 3


class VersionMismatch(SpxError):
    code = "version_mismatch"
    exit_code = 3


# --- attribution ---

class DegenerateCoalition(SpxError):
    code = "degenerate_coalition"
    exit_code = 2


class BudgetTooSmall(SpxError):
    code = "budget_too_small"
    exit_code = 2


class Underdetermined(SpxError):
    code = "underdetermined"
    exit_code = 2


class SingularSystem(SpxError):
    code = "singular_system"
    exit_code = 2


class TooManyParts(SpxError):
    code = "too_many_parts"
    exit_code = 2


# --- reporting ---

class PartMismatch(SpxError):
    code = "part_mismatch"
    exit_code = 2


class MissingErrors(SpxError):
    code = "missing_errors"
    exit_code = 2


class MixedAbstraction(SpxError):
    code = "mixed_abstraction"
    exit_code = 2


class UnsupportedLevel(SpxError):
    code = "unsupported_level"
    exit_code = 2


class EmptyInput(SpxError):
    code = "empty_input"
    exit_code = 2


class IOFailure(SpxError):
    code = "io_failure"
    exit_code = 4
