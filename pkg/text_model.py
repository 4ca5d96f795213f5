import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

from errors import BelowMinCount, ExplicitKeywordAbsent, InvalidKeyword, NoWords

# Maximal runs of non-whitespace; str patterns use Unicode whitespace
WORD_PATTERN = re.compile(r"\S+")
# Leading/trailing characters that are neither letters nor digits
EDGE_PATTERN = re.compile(r"^[\W_]+|[\W_]+$")


class Token(NamedTuple):
    """One whitespace-delimited word of a document"""
    raw: str
    normalized: str
    index: int
    char_span: Tuple[int, int]

    @property
    def is_word(self) -> bool:
        return bool(self.normalized)

    @property
    def length(self) -> int:
        """Length used by the watermark: Unicode scalars of the normalized form"""
        return len(self.normalized)


@dataclass(frozen=True)
class FrequencyTable:
    """Occurrence count of every normalized word"""
    entries: Dict[str, int] = field(default_factory=dict)

    def __getitem__(self, word: str) -> int:
        return self.entries.get(word, 0)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def ranked(self) -> List[Tuple[str, int]]:
        """Words by descending count, ties in lexicographic order"""
        return sorted(self.entries.items(), key=lambda item: (-item[1], item[0]))


@dataclass(frozen=True)
class KeywordPolicy:
    """How the keyword anchoring a watermark is chosen"""
    mode: str = "auto"
    word: Optional[str] = None
    min_count: int = 1

    def __post_init__(self):
        if self.mode not in ("auto", "explicit"):
            raise InvalidKeyword(f"Unknown keyword mode: {self.mode}")
        if self.min_count < 1:
            raise InvalidKeyword("min_count must be a positive integer")
        if self.mode == "explicit":
            if not self.word or normalize(self.word) != self.word:
                raise InvalidKeyword(f"Explicit keyword must be given in normalized form: {self.word!r}")

    @classmethod
    def auto(cls, min_count: int = 1) -> "KeywordPolicy":
        return cls(mode="auto", min_count=min_count)

    @classmethod
    def explicit(cls, word: str, min_count: int = 1) -> "KeywordPolicy":
        return cls(mode="explicit", word=word, min_count=min_count)


def normalize(raw: str) -> str:
    """Lowercase a token and strip surrounding punctuation"""
    lowered = raw.lower()
    if lowered.isalnum():
        return lowered
    return EDGE_PATTERN.sub("", lowered)


def tokenize(text: str) -> List[Token]:
    """Split text on whitespace runs into indexed tokens"""
    return [
        Token(raw=match.group(), normalized=normalize(match.group()), index=i, char_span=match.span())
        for i, match in enumerate(WORD_PATTERN.finditer(text))
    ]


def word_count(text: str) -> int:
    """Number of tokens with a non-empty normalized form"""
    return sum(1 for token in tokenize(text) if token.is_word)


def frequency_table(text: str) -> FrequencyTable:
    """Count occurrences of each normalized word; punctuation-only tokens are skipped"""
    return frequency_table_from_tokens(tokenize(text))


def frequency_table_from_tokens(tokens: List[Token]) -> FrequencyTable:
    counts = Counter(token.normalized for token in tokens if token.is_word)
    return FrequencyTable(entries=dict(counts))


def top_words(text: str, n: int = 10) -> List[Tuple[str, int]]:
    """The n most frequent words, descending count then lexicographic"""
    return frequency_table(text).ranked()[:max(n, 0)]


def select_keyword(text: str, policy: KeywordPolicy) -> Tuple[str, int]:
    """Choose the keyword (and its count) according to the policy"""
    table = frequency_table(text)
    if not table.entries:
        raise NoWords("Document contains no words")

    if policy.mode == "explicit":
        keyword = policy.word
        count = table[keyword]
        if count == 0:
            raise ExplicitKeywordAbsent(f"Keyword '{keyword}' does not occur in the document")
    else:
        keyword, count = table.ranked()[0]

    if count < policy.min_count:
        raise BelowMinCount(
            f"Keyword '{keyword}' occurs {count} times, fewer than the required {policy.min_count}"
        )
    return keyword, count
