"""Exception hierarchy shared by all toolkit modules."""


class AiouError(Exception):
    """Base class for all toolkit errors."""


# -- map / metric level ------------------------------------------------------

class DegenerateMapError(AiouError):
    """An all-zero map was passed where L1 normalization is required."""


class DimensionMismatchError(AiouError):
    """Two maps (or a resampling request) disagree on spatial dimensions."""


# -- container / label I/O ---------------------------------------------------

class DuplicateNameError(AiouError):
    """A container holds (or would hold) two records with the same name."""


class BadMagicError(AiouError):
    """Byte stream does not start with the container magic."""


class UnsupportedVersionError(AiouError):
    """Container version byte is not one this reader understands."""


class TruncatedRecordError(AiouError):
    """Byte stream ended in the middle of a record."""


class MissingColumnError(AiouError):
    """Label CSV lacks a required column."""


class NonBinaryLabelError(AiouError):
    """A label cell holds something other than 0 or 1."""


class DuplicateImageIdError(AiouError):
    """Label CSV repeats an image id."""


# -- scoring -----------------------------------------------------------------

class NoMatchedImagesError(AiouError):
    """No image id is present in both map sets being scored."""


class UnknownAttributeError(AiouError):
    """Requested attribute is not a column of the label table."""


class EmptySetError(AiouError):
    """An aggregate was requested over an empty map set."""


# -- statistics --------------------------------------------------------------

class UndefinedMccError(AiouError):
    """A marginal of the contingency table is zero; MCC is undefined."""


class AllGroupsExcludedError(AiouError):
    """Every subgroup fell under the exclusion threshold."""


class NoPositivesError(AiouError):
    """Average precision needs at least one positive label."""


class DegenerateInputError(AiouError):
    """Rank correlation input is constant in one variable."""


# -- subsample planner -------------------------------------------------------

class UnattainableTargetError(AiouError):
    """Requested MCC lies outside the interval achievable under the box."""


class InfeasibleCapError(AiouError):
    """No subgroup sizes satisfy both the MCC target and the total cap."""
