from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from errors import EmptyOriginal, KeywordAbsent, KeywordMismatch, MalformedWatermark
from text_model import Token, tokenize

Pair = Tuple[int, int]


class ComparisonMode(str, Enum):
    POSITIONAL_SYMBOL = "positional_symbol"
    POSITIONAL_DIGIT = "positional_digit"
    LCS_SYMBOL = "lcs_symbol"

    @classmethod
    def parse(cls, value) -> "ComparisonMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            choices = ", ".join(mode.value for mode in cls)
            raise ValueError(f"Unknown comparison mode '{value}' (choose from {choices})")


@dataclass(frozen=True)
class Watermark:
    """Preceding/next word lengths around every keyword occurrence"""
    keyword: str
    pairs: Tuple[Pair, ...] = ()

    @property
    def kw_count(self) -> int:
        return len(self.pairs)

    def symbols(self) -> List[int]:
        """Flattened length sequence, two symbols per occurrence"""
        return [length for pair in self.pairs for length in pair]

    def to_dict(self) -> Dict:
        return {
            "keyword": self.keyword,
            "kw_count": self.kw_count,
            "pairs": [[prev_len, next_len] for prev_len, next_len in self.pairs],
        }

    @classmethod
    def from_dict(cls, data, keyword: Optional[str] = None) -> "Watermark":
        """Parse the serialized form; a bare pair list needs the keyword"""
        if isinstance(data, list):
            if keyword is None:
                raise MalformedWatermark("A bare pair list needs a keyword")
            data = {"keyword": keyword, "pairs": data}
        if not isinstance(data, dict):
            raise MalformedWatermark("Watermark must be an object or a list of pairs")

        word = data.get("keyword", keyword)
        if not isinstance(word, str) or not word:
            raise MalformedWatermark("Watermark keyword is missing")
        if keyword is not None and word != keyword:
            raise MalformedWatermark(f"Watermark keyword '{word}' differs from '{keyword}'")

        raw_pairs = data.get("pairs")
        if not isinstance(raw_pairs, list):
            raise MalformedWatermark("Watermark pairs must be a list")
        pairs = []
        for entry in raw_pairs:
            if (
                not isinstance(entry, (list, tuple))
                or len(entry) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in entry)
            ):
                raise MalformedWatermark(f"Invalid watermark pair: {entry!r}")
            pairs.append((entry[0], entry[1]))

        if "kw_count" in data and data["kw_count"] != len(pairs):
            raise MalformedWatermark(
                f"kw_count {data['kw_count']} does not match {len(pairs)} pairs"
            )
        return cls(keyword=word, pairs=tuple(pairs))


@dataclass(frozen=True)
class Comparison:
    war: float
    wdr: float
    equal: bool
    mode: ComparisonMode


@dataclass(frozen=True)
class VerificationResult:
    tampered: bool
    comparison: Comparison
    kw_count_original: int
    kw_count_observed: int
    keyword: str

    def to_dict(self) -> Dict:
        """Verdict JSON shared by the CLI and the HTTP facade"""
        return {
            "tampered": self.tampered,
            "war": self.comparison.war,
            "wdr": self.comparison.wdr,
            "kw_count_original": self.kw_count_original,
            "kw_count_observed": self.kw_count_observed,
        }


def generate(text: str, keyword: str) -> Watermark:
    """Derive the zero-watermark of a text for a keyword"""
    return generate_from_tokens(tokenize(text), keyword)


def generate_from_tokens(tokens: Sequence[Token], keyword: str) -> Watermark:
    last = len(tokens) - 1
    pairs = []
    for i, token in enumerate(tokens):
        if token.normalized != keyword:
            continue
        # Missing neighbors at either end count as length 0
        prev_len = tokens[i - 1].length if i > 0 else 0
        next_len = tokens[i + 1].length if i < last else 0
        pairs.append((prev_len, next_len))

    if not pairs:
        raise KeywordAbsent(f"Keyword '{keyword}' does not occur in the text")
    return Watermark(keyword=keyword, pairs=tuple(pairs))


def digit_string(wm: Watermark) -> str:
    """Decimal rendering of every length, concatenated without separators"""
    return "".join(str(length) for length in wm.symbols())


def lcs_length(x: Sequence, y: Sequence) -> int:
    """Length of the longest common subsequence of two sequences"""
    if not x or not y:
        return 0
    previous = [0] * (len(y) + 1)
    for xi in x:
        current = [0]
        for j, yj in enumerate(y, start=1):
            if xi == yj:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def compare(original: Watermark, extracted: Watermark, mode=ComparisonMode.POSITIONAL_SYMBOL) -> Comparison:
    """Watermark accuracy (WAR) and distortion (WDR) of an extracted watermark"""
    mode = ComparisonMode.parse(mode)
    if original.keyword != extracted.keyword:
        raise KeywordMismatch(
            f"Cannot compare watermarks for '{original.keyword}' and '{extracted.keyword}'"
        )
    if original.kw_count == 0:
        raise EmptyOriginal("Original watermark has no pairs")

    if mode is ComparisonMode.POSITIONAL_DIGIT:
        reference, observed = digit_string(original), digit_string(extracted)
    else:
        reference, observed = original.symbols(), extracted.symbols()

    if mode is ComparisonMode.LCS_SYMBOL:
        detected = lcs_length(reference, observed)
    else:
        detected = sum(1 for a, b in zip(reference, observed) if a == b)

    war = detected / len(reference)
    return Comparison(
        war=war,
        wdr=1.0 - war,
        equal=original.pairs == extracted.pairs,
        mode=mode,
    )


def extract_and_verify(text: str, original: Watermark, mode=ComparisonMode.POSITIONAL_SYMBOL) -> VerificationResult:
    """Regenerate the watermark from a (possibly attacked) text and compare"""
    return verify_tokens(tokenize(text), original, mode)


def verify_tokens(tokens: Sequence[Token], original: Watermark, mode=ComparisonMode.POSITIONAL_SYMBOL) -> VerificationResult:
    try:
        extracted = generate_from_tokens(tokens, original.keyword)
    except KeywordAbsent:
        # Every occurrence deleted: an empty extracted watermark, not a failure
        extracted = Watermark(keyword=original.keyword)

    comparison = compare(original, extracted, mode)
    return VerificationResult(
        tampered=not comparison.equal,
        comparison=comparison,
        kw_count_original=original.kw_count,
        kw_count_observed=extracted.kw_count,
        keyword=original.keyword,
    )
