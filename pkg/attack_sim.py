import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import DeleteExceedsText, InvalidAttackSpec, NoWords, WatermarkError
from text_model import normalize, tokenize

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.PCG64"
MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class AttackSpec:
    """Seeded insertion/deletion/reorder volumes relative to the original word count"""
    insert_ratio: float = 0.0
    delete_ratio: float = 0.0
    reorder_ratio: float = 0.0
    seed: int = 0
    lexicon: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        errors = []
        for name in ("insert_ratio", "delete_ratio", "reorder_ratio"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                errors.append(f"{name} must be a finite number")
            elif value < 0:
                errors.append(f"{name} must not be negative")
        if not errors:
            if self.delete_ratio > 1:
                errors.append("delete_ratio must be at most 1")
            if self.reorder_ratio > 1:
                errors.append("reorder_ratio must be at most 1")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < MAX_SEED:
            errors.append("seed must be an unsigned 64-bit integer")
        if self.lexicon is not None and not isinstance(self.lexicon, tuple):
            object.__setattr__(self, "lexicon", tuple(self.lexicon))
        if errors:
            raise InvalidAttackSpec("; ".join(errors))

    @property
    def is_null(self) -> bool:
        return self.insert_ratio == 0 and self.delete_ratio == 0 and self.reorder_ratio == 0

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["lexicon"] = list(self.lexicon) if self.lexicon is not None else None
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "AttackSpec":
        if not isinstance(data, dict):
            raise InvalidAttackSpec("Attack spec must be a JSON object")
        unknown = set(data) - {"insert_ratio", "delete_ratio", "reorder_ratio", "seed", "lexicon"}
        if unknown:
            raise InvalidAttackSpec(f"Unknown attack fields: {', '.join(sorted(unknown))}")
        lexicon = data.get("lexicon")
        if lexicon is not None and (
            not isinstance(lexicon, list) or not all(isinstance(w, str) for w in lexicon)
        ):
            raise InvalidAttackSpec("lexicon must be a list of words")
        return cls(
            insert_ratio=data.get("insert_ratio", 0.0),
            delete_ratio=data.get("delete_ratio", 0.0),
            reorder_ratio=data.get("reorder_ratio", 0.0),
            seed=data.get("seed", 0),
            lexicon=tuple(lexicon) if lexicon is not None else None,
        )


@dataclass(frozen=True)
class AttackReport:
    inserted: int = 0
    deleted: int = 0
    transpositions: int = 0
    wc_before: int = 0
    wc_after: int = 0
    neighborhood_hits: int = 0
    rng_algorithm: str = RNG_ALGORITHM

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class AttackOutcome:
    """Result of one spec inside a suite; error is the failure code, if any"""
    spec: AttackSpec
    attacked_text: Optional[str] = None
    report: Optional[AttackReport] = None
    error: Optional[str] = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.error is None


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def edit_counts(n: int, spec: AttackSpec) -> Tuple[int, int, int]:
    """Insertions, deletions and transpositions for an n-word text"""
    return (
        round_half_up(spec.insert_ratio * n),
        round_half_up(spec.delete_ratio * n),
        round_half_up(spec.reorder_ratio * n / 2),
    )


def _clean_lexicon(words: Sequence[str]) -> List[str]:
    kept = [w for w in words if w and not any(ch.isspace() for ch in w) and normalize(w)]
    if len(kept) != len(words):
        logger.warning(f"Skipped {len(words) - len(kept)} lexicon entries without a word form")
    return kept


class _Edits:
    """Token list under attack plus the keyword-neighborhood bookkeeping

    An edit is a hit when it changes the (prev, next) length pair of some
    keyword occurrence, or adds or removes an occurrence.
    """

    def __init__(self, raw: List[str], keyword: Optional[str]):
        self.raw = raw
        self.norm = [normalize(w) for w in raw]
        self.keyword = keyword
        self.hits = 0
        self._original = self.signature() if keyword is not None else ()

    def at(self, i: int) -> Optional[str]:
        return self.norm[i] if 0 <= i < len(self.norm) else None

    def window(self, lo: int, hi: int) -> List[Optional[str]]:
        return [self.at(i) for i in range(lo, hi + 1)]

    def pairs(self, window: Sequence[Optional[str]]) -> List[Tuple[int, int]]:
        # The first and last entries are context only
        return [
            (len(window[i - 1] or ""), len(window[i + 1] or ""))
            for i in range(1, len(window) - 1)
            if window[i] == self.keyword
        ]

    def signature(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(self.pairs([None] + self.norm + [None]))

    def record(self, before: List[Tuple[int, int]], after: List[Tuple[int, int]]):
        if before != after:
            self.hits += 1

    def word_positions(self) -> np.ndarray:
        return np.array([i for i, w in enumerate(self.norm) if w], dtype=np.int64)

    def insert(self, rng: np.random.Generator, lexicon: List[str], k: int):
        if k == 0:
            return
        boundaries = rng.integers(0, len(self.raw) + 1, size=k)
        choices = rng.integers(0, len(lexicon), size=k)
        order = np.argsort(boundaries, kind="stable")

        raw, norm = [], []
        cursor = 0
        for idx in order:
            b = int(boundaries[idx])
            raw.extend(self.raw[cursor:b])
            norm.extend(self.norm[cursor:b])
            cursor = b
            word = lexicon[int(choices[idx])]
            word_norm = normalize(word)
            if self.keyword is not None:
                left = [norm[j] if j >= 0 else None for j in (len(norm) - 2, len(norm) - 1)]
                right = [self.at(b), self.at(b + 1)]
                self.record(self.pairs(left + right), self.pairs(left + [word_norm] + right))
            raw.append(word)
            norm.append(word_norm)
        raw.extend(self.raw[cursor:])
        norm.extend(self.norm[cursor:])
        self.raw, self.norm = raw, norm

    def delete(self, rng: np.random.Generator, k: int):
        if k == 0:
            return
        positions = self.word_positions()
        if k > len(positions):
            raise DeleteExceedsText(f"Cannot delete {k} words from a {len(positions)}-word text")
        doomed = set(int(p) for p in rng.choice(positions, size=k, replace=False))
        if self.keyword is not None:
            # Highest first so lower positions stay valid
            for p in sorted(doomed, reverse=True):
                before = self.window(p - 2, p + 2)
                del self.raw[p], self.norm[p]
                self.record(self.pairs(before), self.pairs(self.window(p - 2, p + 1)))
            return
        self.raw = [w for i, w in enumerate(self.raw) if i not in doomed]
        self.norm = [w for i, w in enumerate(self.norm) if i not in doomed]

    def transpose(self, rng: np.random.Generator, k: int) -> int:
        positions = self.word_positions()
        if len(positions) < 2:
            return 0
        for _ in range(k):
            i, j = sorted(int(p) for p in rng.choice(positions, size=2, replace=False))
            spans = [(i - 2, j + 2)] if j - i <= 2 else [(i - 2, i + 2), (j - 2, j + 2)]
            before = [self.window(lo, hi) for lo, hi in spans] if self.keyword is not None else None
            self.raw[i], self.raw[j] = self.raw[j], self.raw[i]
            self.norm[i], self.norm[j] = self.norm[j], self.norm[i]
            if before is not None:
                after = [self.window(lo, hi) for lo, hi in spans]
                self.record(
                    [pair for w in before for pair in self.pairs(w)],
                    [pair for w in after for pair in self.pairs(w)],
                )
        return k

    def settle(self) -> int:
        """Hits, or 0 when later edits restored every keyword pair"""
        if self.hits and self.signature() == self._original:
            logger.debug(f"{self.hits} keyword-neighborhood edits cancelled out")
            self.hits = 0
        return self.hits


def attack(text: str, spec: AttackSpec, instrument_keyword: Optional[str] = None) -> Tuple[str, AttackReport]:
    """Apply a reproducible insert -> delete -> reorder tampering attack"""
    tokens = tokenize(text)
    raw = [token.raw for token in tokens]
    own_words = [token.raw for token in tokens if token.is_word]
    n = len(own_words)
    if n == 0:
        raise NoWords("Cannot attack a text without words")

    k_insert, k_delete, k_reorder = edit_counts(n, spec)
    if spec.is_null or (k_insert, k_delete, k_reorder) == (0, 0, 0):
        return text, AttackReport(wc_before=n, wc_after=n)

    lexicon = _clean_lexicon(list(spec.lexicon)) if spec.lexicon is not None else own_words
    if k_insert and not lexicon:
        raise InvalidAttackSpec("Insertion lexicon contains no words")
    if k_delete > n + k_insert:
        raise DeleteExceedsText(f"Cannot delete {k_delete} words from {n + k_insert} words")

    keyword = normalize(instrument_keyword) if instrument_keyword else None
    rng = np.random.default_rng(spec.seed)
    edits = _Edits(raw, keyword)
    edits.insert(rng, lexicon, k_insert)
    edits.delete(rng, k_delete)
    transpositions = edits.transpose(rng, k_reorder)
    hits = edits.settle()

    report = AttackReport(
        inserted=k_insert,
        deleted=k_delete,
        transpositions=transpositions,
        wc_before=n,
        wc_after=n + k_insert - k_delete,
        neighborhood_hits=hits,
    )
    logger.info(
        f"Attack seed={spec.seed}: +{k_insert} -{k_delete} ~{transpositions}, "
        f"{n} -> {report.wc_after} words, {hits} neighborhood hits"
    )
    return " ".join(edits.raw), report


def attack_suite(text: str, specs: Sequence[AttackSpec], instrument_keyword: Optional[str] = None) -> List[AttackOutcome]:
    """Apply each spec independently to the original text, collecting failures"""
    outcomes = []
    for spec in specs:
        try:
            attacked, report = attack(text, spec, instrument_keyword)
            outcomes.append(AttackOutcome(spec=spec, attacked_text=attacked, report=report))
        except WatermarkError as e:
            logger.error(f"Attack seed={spec.seed} failed: {e}")
            outcomes.append(AttackOutcome(spec=spec, error=e.code, detail=str(e)))
    return outcomes
