"""Exception hierarchy shared by all modules."""


class OpoHeraldError(Exception):
    """Base class for package errors."""


class InputError(OpoHeraldError, ValueError):
    """A caller-supplied value violates a precondition."""


class CapacityError(OpoHeraldError):
    """A request would exceed a hard size limit; shard the run instead."""


class AnalysisError(OpoHeraldError):
    """An analysis step cannot produce a meaningful result."""


class DegenerateFitError(AnalysisError):
    """The normal equations of a fit are singular."""


class TagFileFormatError(OpoHeraldError):
    """A tag file has a bad magic number or an unsupported version."""


class TagFileCorruptionError(OpoHeraldError):
    """A tag file violates the non-decreasing timestamp contract."""

    def __init__(self, record_index: int, message: str = ""):
        self.record_index = record_index
        super().__init__(message or f"timestamps decrease at record {record_index}")


class ScenarioValidationError(OpoHeraldError):
    """A scenario config is invalid; ``problems`` lists every offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {p}" for p in self.problems))
