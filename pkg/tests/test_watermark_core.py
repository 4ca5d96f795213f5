import time

import numpy as np
import pytest

from errors import EmptyOriginal, KeywordAbsent, KeywordMismatch, MalformedWatermark
from text_model import tokenize
from watermark_core import (
    ComparisonMode,
    Watermark,
    compare,
    digit_string,
    extract_and_verify,
    generate,
    lcs_length,
)

VOCABULARY = ["is", "and", "of", "in", "a", "the", "cat", "dog", "window", "extraordinary", "--", "And,", "IS."]


def brute_force_pairs(text, keyword):
    """Straight walk over a whitespace split, independent of the tokenizer"""
    def clean(word):
        word = word.lower()
        start, end = 0, len(word)
        while start < end and not (word[start].isalnum()):
            start += 1
        while end > start and not (word[end - 1].isalnum()):
            end -= 1
        return word[start:end]

    words = [clean(w) for w in text.split()]
    pairs = []
    for i, word in enumerate(words):
        if word == keyword:
            before = len(words[i - 1]) if i > 0 else 0
            after = len(words[i + 1]) if i + 1 < len(words) else 0
            pairs.append((before, after))
    return pairs


def random_text(rng, max_words=30):
    return " ".join(rng.choice(VOCABULARY, size=int(rng.integers(1, max_words + 1))))


def test_generate_sample(sample_text):
    wm = generate(sample_text, "is")
    assert wm.pairs == ((4, 1), (4, 3))
    assert wm.kw_count == 2
    assert wm.symbols() == [4, 1, 4, 3]


def test_generate_missing_predecessor():
    assert generate("is this fine", "is").pairs == ((0, 4),)


def test_generate_missing_successor():
    assert generate("this is", "is").pairs == ((4, 0),)


def test_generate_adjacent_occurrences_are_neighbors():
    assert generate("it is is ok", "is").pairs == ((2, 2), (2, 2))


def test_generate_punctuation_neighbor_has_zero_length():
    assert generate("wait -- and -- go", "and").pairs == ((0, 0),)


def test_generate_keyword_absent():
    with pytest.raises(KeywordAbsent):
        generate("hello world", "is")


def test_generate_does_not_modify_text(sample_text):
    before = bytes(sample_text, "utf-8")
    generate(sample_text, "is")
    assert bytes(sample_text, "utf-8") == before


def test_generate_is_deterministic(sample_text):
    assert generate(sample_text, "this") == generate(sample_text, "this")


def test_oracle_equivalence_and_length_law():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        text = random_text(rng)
        for keyword in ("is", "and", "of", "in"):
            expected = brute_force_pairs(text, keyword)
            if not expected:
                with pytest.raises(KeywordAbsent):
                    generate(text, keyword)
                continue
            wm = generate(text, keyword)
            assert list(wm.pairs) == expected
            assert len(wm.symbols()) == 2 * wm.kw_count
            checked += 1
    assert checked > 1000


def test_digit_string():
    assert digit_string(Watermark("is", ((4, 1), (4, 3)))) == "4143"
    assert digit_string(Watermark("is")) == ""
    assert digit_string(Watermark("is", ((12, 3),))) == "123"


def test_compare_identity():
    wm = Watermark("is", ((4, 1), (4, 3)))
    result = compare(wm, wm)
    assert result.war == 1.0
    assert result.wdr == 0.0
    assert result.equal


def test_compare_one_symbol_differs():
    result = compare(Watermark("is", ((4, 1), (4, 3))), Watermark("is", ((4, 1), (2, 3))))
    assert result.war == 0.75
    assert result.wdr == 0.25
    assert not result.equal


def test_compare_empty_extraction():
    result = compare(Watermark("is", ((4, 1), (4, 3))), Watermark("is"))
    assert result.war == 0.0
    assert result.wdr == 1.0
    assert not result.equal


def test_compare_digit_mode():
    original = Watermark("is", ((12, 3),))
    assert compare(original, Watermark("is", ((1, 23),)), ComparisonMode.POSITIONAL_DIGIT).war == 1.0
    assert not compare(original, Watermark("is", ((1, 23),)), "positional_digit").equal
    assert compare(original, Watermark("is", ((12, 4),)), "positional_digit").war == pytest.approx(2 / 3)


def test_compare_lcs_mode():
    original = Watermark("is", ((4, 1), (4, 3)))
    shifted = Watermark("is", ((4, 3),))
    assert compare(original, shifted, "positional_symbol").war == 0.25
    assert compare(original, shifted, "lcs_symbol").war == 0.5


def test_compare_errors():
    with pytest.raises(KeywordMismatch):
        compare(Watermark("is", ((1, 1),)), Watermark("of", ((1, 1),)))
    with pytest.raises(EmptyOriginal):
        compare(Watermark("is"), Watermark("is", ((1, 1),)))
    with pytest.raises(ValueError):
        compare(Watermark("is", ((1, 1),)), Watermark("is", ((1, 1),)), "fuzzy")


def test_wdr_formula():
    original = Watermark("and", tuple((i, i) for i in range(13)))
    result = compare(original, Watermark("and", ((0, 0), (1, 1))))
    assert result.war == 4 / 26
    assert abs(result.wdr - (1 - result.war)) < 1e-12
    assert round(1 - 0.1538, 4) == 0.8462


def test_lcs_dominates_positional():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n_orig = int(rng.integers(1, 12))
        n_ext = int(rng.integers(0, 12))
        original = Watermark("and", tuple(tuple(int(v) for v in p) for p in rng.integers(0, 6, size=(n_orig, 2))))
        extracted = Watermark("and", tuple(tuple(int(v) for v in p) for p in rng.integers(0, 6, size=(n_ext, 2))))
        positional = compare(original, extracted, "positional_symbol")
        lcs = compare(original, extracted, "lcs_symbol")
        assert lcs.war >= positional.war
        for result in (positional, lcs):
            assert 0.0 <= result.war <= 1.0
            assert abs(result.wdr - (1 - result.war)) < 1e-12
            if result.equal:
                assert result.war == 1.0


def test_lcs_length():
    assert lcs_length("AAXXXBBCCCD", "AABBCCC") == 7
    assert lcs_length([], [1, 2]) == 0
    assert lcs_length([1, 2, 3], [3, 2, 1]) == 1


def test_extract_and_verify_identity(sample_text):
    result = extract_and_verify(sample_text, generate(sample_text, "is"))
    assert not result.tampered
    assert result.comparison.war == 1.0
    assert result.comparison.wdr == 0.0
    assert result.kw_count_original == result.kw_count_observed == 2


def test_extract_and_verify_tampered(sample_text):
    result = extract_and_verify("this was a test and this is fun", generate(sample_text, "is"))
    assert result.tampered
    assert result.kw_count_observed == 1
    assert result.comparison.war == 0.25


def test_extract_and_verify_all_occurrences_deleted(sample_text):
    result = extract_and_verify("this was a test", generate(sample_text, "is"))
    assert result.tampered
    assert result.comparison.war == 0.0
    assert result.kw_count_observed == 0


def test_identity_on_random_texts():
    rng = np.random.default_rng(5)
    for _ in range(200):
        text = random_text(rng, max_words=60)
        for keyword in ("and", "of"):
            try:
                wm = generate(text, keyword)
            except KeywordAbsent:
                continue
            result = extract_and_verify(text, wm, "lcs_symbol")
            assert not result.tampered and result.comparison.war == 1.0 and result.comparison.wdr == 0.0


def test_neighbor_replacement_is_detected():
    rng = np.random.default_rng(9)
    for _ in range(200):
        words = list(rng.choice(["and", "cat", "window", "a", "of"], size=int(rng.integers(3, 25))))
        if "and" not in words:
            continue
        wm = generate(" ".join(words), "and")
        occurrences = [i for i, w in enumerate(words) if w == "and"]
        target = int(rng.choice(occurrences))
        neighbors = [i for i in (target - 1, target + 1) if 0 <= i < len(words) and words[i] != "and"]
        if not neighbors:
            continue
        position = int(rng.choice(neighbors))
        words[position] = "x" * (len(words[position]) + 1)
        result = extract_and_verify(" ".join(words), wm)
        assert result.tampered
        assert result.comparison.war < 1.0


def test_equal_keyword_counts_do_not_imply_equal_watermarks():
    original = "the cat and the dog sat in the hall"
    attacked = "the cat and a dog sat in the hall"
    wm = generate(original, "and")
    result = extract_and_verify(attacked, wm)
    assert result.kw_count_original == result.kw_count_observed
    assert result.tampered
    assert result.comparison.war == 0.5


def test_watermark_serialization():
    wm = Watermark("is", ((4, 1), (4, 3)))
    data = wm.to_dict()
    assert data == {"keyword": "is", "kw_count": 2, "pairs": [[4, 1], [4, 3]]}
    assert Watermark.from_dict(data) == wm
    assert Watermark.from_dict([[4, 1], [4, 3]], keyword="is") == wm


@pytest.mark.parametrize("data", [
    {"keyword": "is", "kw_count": 3, "pairs": [[4, 1]]},
    {"keyword": "is", "pairs": [[4]]},
    {"keyword": "is", "pairs": [[-1, 2]]},
    {"keyword": "is", "pairs": [[1.5, 2]]},
    {"pairs": [[1, 2]]},
    "nonsense",
])
def test_watermark_rejects_malformed(data):
    with pytest.raises(MalformedWatermark):
        Watermark.from_dict(data)


def test_generation_performance():
    rng = np.random.default_rng(1)
    words = rng.choice(["and", "of", "in", "the", "watermark", "text", "a", "documents"], size=100_000)
    text = " ".join(words)
    start = time.perf_counter()
    wm = generate(text, "and")
    elapsed = time.perf_counter() - start
    assert wm.kw_count == sum(1 for w in words if w == "and")
    assert elapsed < 1.0
