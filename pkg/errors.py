from typing import Dict


class WatermarkError(Exception):
    """Base class for every failure raised by the toolkit"""

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> Dict:
        """Error body shared by the CLI and the HTTP facade"""
        return {"error": self.code, "detail": str(self)}


# Keyword resolution
class NoWords(WatermarkError):
    pass


class ExplicitKeywordAbsent(WatermarkError):
    pass


class BelowMinCount(WatermarkError):
    pass


class InvalidKeyword(WatermarkError):
    pass


class KeywordAbsent(WatermarkError):
    pass


# Watermark comparison
class KeywordMismatch(WatermarkError):
    pass


class EmptyOriginal(WatermarkError):
    pass


class MalformedWatermark(WatermarkError):
    pass


# Certifying authority store
class StorageFailure(WatermarkError):
    pass


class CorruptRecord(WatermarkError):
    pass


class EmptyInput(WatermarkError):
    pass


class RecordNotFound(WatermarkError):
    pass


class WatermarkMismatch(WatermarkError):
    pass


# Attacks and experiments
class InvalidAttackSpec(WatermarkError):
    pass


class DeleteExceedsText(WatermarkError):
    pass


class InvalidSuiteConfig(WatermarkError):
    pass


class CorpusFetchError(WatermarkError):
    pass


KEYWORD_ERRORS = (
    NoWords,
    ExplicitKeywordAbsent,
    BelowMinCount,
    InvalidKeyword,
    KeywordAbsent,
    WatermarkMismatch,
)
