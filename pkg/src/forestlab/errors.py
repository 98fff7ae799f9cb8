"""Exception types shared across the toolkit."""


class ForestLabError(Exception):
    """Base class for all domain errors raised by this package."""


# --- raster / mask -----------------------------------------------------------

class DecodeError(ForestLabError):
    """An image file could not be read or decoded."""


class DimensionMismatch(ForestLabError):
    """Two rasters or masks that must share dimensions do not."""

    def __init__(self, shape_a, shape_b, context=""):
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)
        msg = f"dimension mismatch: {self.shape_a} vs {self.shape_b}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class InvalidTarget(ForestLabError):
    """Resize target dimensions are not positive."""


class NonBinaryMask(ForestLabError):
    """Operation requires a binary {0,1} mask."""


class ChannelCountError(ForestLabError):
    """Operation requires a specific channel count (usually 3)."""


# --- perception --------------------------------------------------------------

class ConstantField(ForestLabError):
    """A scalar field has a single value; no threshold separates it."""


class MissingPrediction(ForestLabError):
    """A prediction directory lacks a mask for a pair id."""

    def __init__(self, pair_id):
        self.pair_id = pair_id
        super().__init__(f"no prediction mask found for pair id {pair_id!r}")


# --- metrics -----------------------------------------------------------------

class EmptyCorpus(ForestLabError):
    """Caption metric called with no candidates or an empty reference group."""


class EmptyInput(ForestLabError):
    """Confusion counts cover zero pixels."""


class IdMismatch(ForestLabError):
    """Evaluation inputs do not cover the same pair ids."""

    def __init__(self, offending_ids, context=""):
        self.offending_ids = sorted(offending_ids)
        msg = f"pair ids do not align: {self.offending_ids}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


# --- captions ----------------------------------------------------------------

class OutOfRange(ForestLabError):
    """A percentage fell outside [0, 100]."""


# --- datasets ----------------------------------------------------------------

class SchemaError(ForestLabError):
    """A manifest file does not match the expected schema."""


class DuplicateId(ForestLabError):
    """A pair id occurs more than once (in entries or across splits)."""


class DanglingSplitRef(ForestLabError):
    """A split references a pair id with no matching entry."""


class EmptyKeywords(ForestLabError):
    """Keyword filtering called with an empty keyword set."""


# --- agent -------------------------------------------------------------------

class DuplicateTool(ForestLabError):
    """A tool name was registered twice."""


class UnknownTool(ForestLabError):
    """A plan references a tool that is not registered."""


class InvalidPlan(ForestLabError):
    """A plan failed validation against the tool registry."""


class PlanTooLong(InvalidPlan):
    """A plan exceeds the configured maximum step count."""


class EndpointUnreachable(ForestLabError):
    """The completion endpoint could not be reached."""


class GroundingViolation(ForestLabError):
    """A generated answer quoted a number absent from every artifact."""


class ToolExecutionError(ForestLabError):
    """A tool handler failed; captured per-step, never corrupts the session."""
