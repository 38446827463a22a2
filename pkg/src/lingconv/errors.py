"""Exception hierarchy shared across the toolkit."""


class LingconvError(Exception):
    """Base class for all toolkit errors."""


class MalformedRecord(LingconvError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class MissingCountry(LingconvError):
    pass


class UnknownFieldCode(LingconvError):
    pass


class EmptyPanel(LingconvError):
    pass


class MissingBaseYear(LingconvError):
    pass


class BadMagic(LingconvError):
    pass


class DimMismatch(LingconvError):
    pass


class DuplicateId(LingconvError):
    pass


class TruncatedFile(LingconvError):
    pass


class ZeroVector(LingconvError):
    pass


class BenchmarkTooSmall(LingconvError):
    pass


class MissingScore(LingconvError):
    pass


class MissingFlag(LingconvError):
    pass


class SingleYearPanel(LingconvError):
    pass


class NoConvergence(LingconvError):
    def __init__(self, message, iterations=None, last_change=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_change = last_change


class RankDeficient(LingconvError):
    pass


class TooFewClusters(LingconvError):
    pass


class MissingCLI(LingconvError):
    pass


class AllMissing(LingconvError):
    pass


class DegenerateSplit(LingconvError):
    pass
