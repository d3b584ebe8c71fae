"""Exception hierarchy shared across the package.

Dataset errors signal malformed input files and map to CLI exit code 1;
analysis errors signal unusable-but-well-formed inputs and map to exit
code 2.
"""


class CrowdParetoError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, record_id: str | None = None):
        self.record_id = record_id
        if record_id is not None:
            message = f"{message} (record: {record_id})"
        super().__init__(message)


class DatasetError(CrowdParetoError):
    """A record in an input file violates the dataset schema."""


class MissingField(DatasetError):
    pass


class NonPositivePrice(DatasetError):
    pass


class NonMonotoneDates(DatasetError):
    pass


class UnknownRoundReference(DatasetError):
    pass


class AnalysisError(CrowdParetoError):
    """Inputs are well formed but an operation cannot proceed."""


class EmptyRound(AnalysisError):
    pass


class InsufficientHistory(AnalysisError):
    pass


class MissingFutures(AnalysisError):
    pass


class EmptyHistogram(AnalysisError):
    pass


class DegenerateRate(AnalysisError):
    pass


class ZeroPosteriorMass(AnalysisError):
    pass


class TooFewSamples(AnalysisError):
    pass


class TooFewRecords(AnalysisError):
    pass


class EmptySubset(AnalysisError):
    def __init__(self, round_id: str, alpha_s: float | None = None):
        self.alpha_s = alpha_s
        detail = f" at alpha_s={alpha_s}" if alpha_s is not None else ""
        super().__init__(f"subset is empty{detail}", record_id=round_id)


class InsufficientRounds(AnalysisError):
    pass


class TooFewPoints(AnalysisError):
    pass


class EmptyWindow(AnalysisError):
    pass


class ConfigInvalid(AnalysisError):
    pass
