"""Exception types shared across the toolkit."""


class UsfError(Exception):
    """Base class for all toolkit errors."""


class TokenError(UsfError):
    """A token is empty, contains whitespace, or is otherwise unusable."""


class FstBuildError(UsfError):
    """Reward-FST construction failed (empty vocabulary, unsegmentable word, ...)."""


class ParseError(UsfError):
    """A text artifact (FST, counts, n-best JSONL, ...) is malformed."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class InventoryError(UsfError):
    """A subword inventory violates its construction rules."""


class SegmentationError(UsfError):
    """A word cannot be segmented with the given inventory."""


class SegmentationOverflow(SegmentationError):
    """Segmentation enumeration exceeded the caller's cap."""

    def __init__(self, message: str, count: int):
        self.count = count
        super().__init__(message)


class ConfigError(UsfError):
    """Inconsistent parameters (level mismatch, missing score source, ...)."""
