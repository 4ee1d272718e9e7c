"""Exception hierarchy shared across the pipeline."""


class BfrbError(Exception):
    """Base class for all domain errors raised by this package."""


# --- ingest ---------------------------------------------------------------

class IngestError(BfrbError):
    pass


class MissingChannelError(IngestError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"required channel missing: {name}")


class NonMonotoneTimestampsError(IngestError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"timestamps not strictly increasing at row {index}")


class EmptyRecordingError(IngestError):
    pass


class UnknownBehaviorError(IngestError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown behavior name: {name!r}")


class NegativeDurationError(IngestError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"event end precedes start at row {row}")


class UnknownStageError(IngestError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown stage name: {name!r}")


class OverlappingStagesError(IngestError):
    def __init__(self, first, second):
        self.first = first
        self.second = second
        super().__init__(f"stages overlap: {first} / {second}")


class MissingBaselineIError(IngestError):
    def __init__(self):
        super().__init__("no baseline1 stage mark; normalization reference unavailable")


class EventOutOfRangeError(IngestError):
    def __init__(self, event):
        self.event = event
        super().__init__(f"behavior event outside recording span: {event}")


class StageOutOfRangeError(IngestError):
    def __init__(self, stage):
        self.stage = stage
        super().__init__(f"stage mark outside recording span: {stage}")


# --- preprocess -----------------------------------------------------------

class SessionMismatchError(BfrbError):
    pass


class InsufficientHrDataError(BfrbError):
    pass


class EmptySpanError(BfrbError):
    pass


# --- windowing ------------------------------------------------------------

class InsufficientNegativeSpaceError(BfrbError):
    def __init__(self, available, requested):
        self.available = available
        self.requested = requested
        super().__init__(
            f"only {available} eligible negative anchors, {requested} requested"
        )


# --- features -------------------------------------------------------------

class EmptyChannelError(BfrbError):
    pass


class InsufficientDataError(BfrbError):
    pass


class FeatureUnavailableError(BfrbError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"feature cannot be computed: {name}")


# --- models ---------------------------------------------------------------

class SingleClassInputError(BfrbError):
    pass


class SchemaMismatchError(BfrbError):
    pass


class NonFiniteFeatureError(BfrbError):
    pass


# --- evaluation -----------------------------------------------------------

class TooFewParticipantsError(BfrbError):
    pass


class TooFewSamplesError(BfrbError):
    def __init__(self, participant):
        self.participant = participant
        super().__init__(f"participant {participant} has too few vectors to stratify")


class SingleClassLabelsError(BfrbError):
    pass


class NoPositivesError(BfrbError):
    pass
