"""
Experiment samples.

Ten sample profiles carry the word counts and attack volumes of the original
tampering experiment together with the attacked word counts it reported.
The original texts are not redistributable, so samples are either synthesized
deterministically (offline, used by the tests) or downloaded from a JSON
manifest of public-domain books and trimmed to the profile word counts.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import requests

from attack_sim import AttackSpec, attack
from errors import CorpusFetchError
from text_model import tokenize, word_count

logger = logging.getLogger(__name__)

EXPERIMENT_KEYWORDS = ["and", "of", "in"]


@dataclass(frozen=True)
class SampleProfile:
    sample_id: str
    word_count: int
    insert_ratio: float
    delete_ratio: float
    attacked_word_count: int

    def attack_spec(self, seed: int) -> AttackSpec:
        return AttackSpec(insert_ratio=self.insert_ratio, delete_ratio=self.delete_ratio, seed=seed)


SAMPLE_PROFILES = [
    SampleProfile("sample01", 421, 0.26, 0.25, 425),
    SampleProfile("sample02", 179, 0.44, 0.54, 161),
    SampleProfile("sample03", 559, 0.49, 0.25, 696),
    SampleProfile("sample04", 2018, 0.14, 0.12, 2048),
    SampleProfile("sample05", 469, 0.57, 0.53, 491),
    SampleProfile("sample06", 7993, 0.09, 0.06, 8259),
    SampleProfile("sample07", 1824, 0.26, 0.16, 2008),
    SampleProfile("sample08", 16076, 0.09, 0.05, 16727),
    SampleProfile("sample09", 51800, 0.11, 0.07, 53603),
    SampleProfile("sample10", 67214, 0.07, 0.05, 68853),
]

# Function words first so "and", "of" and "in" dominate like real prose
VOCABULARY = (
    "the of and to in a is that for it as was with be by on not he this are or his from at which "
    "but have an they you were her she there been one all we their has would when will more if no "
    "out so said what up its about into than them can only other new some could time these two may "
    "then do first any my now such like our over man me even most made after also did many before "
    "must through back years where much your way well down should because each just those people "
    "how too little state good very make world still own see men work long get here between both "
    "life being under never day same another know while last might us great old year off come since "
    "against go came right used take three states himself few house use during without again place "
    "american around however home small found thought went say part once general high upon school "
    "every united left number course war until always away something fact though water less public "
    "put think almost hand enough far took head yet government system better set told nothing night "
    "end why called didn eyes find going look asked later knew point next program city business give "
    "group toward young days let room president side social given present several order national "
    "possible rather second face per among form important often things looked early white case john "
    "become large big need four within felt children along saw best church ever least power development "
    "light thing seemed family interest want members mind country area others done turned although open "
    "certificate authority extraordinary communication neighborhood responsibility understanding"
).split()

CONNECTORS = {"and", "of", "in", "the", "to", "a"}


def _zipf_weights(size: int, exponent: float = 1.0) -> np.ndarray:
    ranks = np.arange(1, size + 1, dtype=float)
    weights = 1.0 / ranks ** exponent
    return weights / weights.sum()


def synthesize_sample(n_words: int, seed: int = 0) -> str:
    """Deterministic English-like text with exactly n_words words"""
    if n_words <= 0:
        return ""
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(VOCABULARY), size=n_words, p=_zipf_weights(len(VOCABULARY)))
    # Every sample carries the experiment keywords
    for slot, keyword in enumerate(EXPERIMENT_KEYWORDS):
        index = VOCABULARY.index(keyword)
        if 3 * slot + 1 < n_words and index not in picks:
            picks[3 * slot + 1] = index
    sentence_lengths = rng.integers(8, 21, size=n_words // 8 + 2)

    words: List[str] = []
    sentence_start = True
    remaining = int(sentence_lengths[0])
    sentence_index = 0
    for position, pick in enumerate(picks):
        word = VOCABULARY[int(pick)]
        if sentence_start:
            word = word.capitalize()
            sentence_start = False
        remaining -= 1
        if remaining == 0 or position == n_words - 1:
            word += "."
            sentence_start = True
            sentence_index += 1
            remaining = int(sentence_lengths[sentence_index % len(sentence_lengths)])
        elif rng.random() < 0.06 and word.lower() not in CONNECTORS:
            word += ","
        words.append(word)

    # Paragraph breaks every ~120 words
    paragraphs = [" ".join(words[i:i + 120]) for i in range(0, len(words), 120)]
    return "\n\n".join(paragraphs) + "\n"


def trim_to_words(text: str, n_words: int) -> str:
    """Cut a text right after its n-th word, keeping the original layout"""
    count = 0
    for token in tokenize(text):
        if token.is_word:
            count += 1
            if count == n_words:
                return text[:token.char_span[1]] + "\n"
    return text


def strip_gutenberg_boilerplate(text: str) -> str:
    start = text.find("*** START OF")
    if start != -1:
        start = text.find("\n", start) + 1
    end = text.find("*** END OF")
    return text[max(start, 0):end if end != -1 else len(text)]


class SampleFetcher:
    """Downloads manifest texts over HTTP"""

    def __init__(self, timeout: int = 60):
        self.timeout = timeout
        self.session = requests.Session()
        self.session.headers.update({"User-Agent": "zero-watermark-toolkit corpus fetcher"})

    def fetch_text(self, url: str) -> str:
        try:
            response = self.session.get(url, timeout=self.timeout)
            response.raise_for_status()
        except requests.exceptions.RequestException as e:
            raise CorpusFetchError(f"Error fetching {url}: {e}")
        response.encoding = response.encoding or "utf-8"
        return response.text


def load_manifest(path: Union[str, Path]) -> List[Dict]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CorpusFetchError(f"Cannot read manifest {path}: {e}")
    entries = data.get("samples") if isinstance(data, dict) else None
    if not isinstance(entries, list) or not all(isinstance(e, dict) and "id" in e and "url" in e for e in entries):
        raise CorpusFetchError("Manifest needs a 'samples' list of {id, url} entries")
    return entries


def fetch_samples(manifest_path, out_dir, fetcher: Optional[SampleFetcher] = None) -> Dict[str, Path]:
    """Download each manifest text, trim it to its profile size and store it"""
    profiles = {profile.sample_id: profile for profile in SAMPLE_PROFILES}
    fetcher = fetcher or SampleFetcher()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = {}
    for entry in load_manifest(manifest_path):
        sample_id = str(entry["id"])
        target_words = entry.get("words") or (profiles[sample_id].word_count if sample_id in profiles else None)
        text = strip_gutenberg_boilerplate(fetcher.fetch_text(entry["url"]))
        if target_words:
            available = word_count(text)
            if available < target_words:
                raise CorpusFetchError(f"{sample_id}: source has {available} words, {target_words} needed")
            text = trim_to_words(text, target_words)
        path = out_dir / f"{sample_id}.txt"
        path.write_text(text, encoding="utf-8")
        written[sample_id] = path
        logger.info(f"Fetched {sample_id} ({word_count(text)} words) from {entry['url']}")
    return written


def build_suite(
    out_dir,
    seeds: Sequence[int] = (1, 2, 3, 4, 5),
    manifest_path=None,
    fetcher: Optional[SampleFetcher] = None,
) -> Path:
    """Write the ten samples and a suite config attacking each at its own volume"""
    out_dir = Path(out_dir)
    samples_dir = out_dir / "samples"
    samples_dir.mkdir(parents=True, exist_ok=True)

    if manifest_path is not None:
        paths = fetch_samples(manifest_path, samples_dir, fetcher)
    else:
        paths = {}
        for index, profile in enumerate(SAMPLE_PROFILES):
            path = samples_dir / f"{profile.sample_id}.txt"
            path.write_text(synthesize_sample(profile.word_count, seed=index), encoding="utf-8")
            paths[profile.sample_id] = path

    samples = []
    for profile in SAMPLE_PROFILES:
        if profile.sample_id not in paths:
            continue
        samples.append({
            "id": profile.sample_id,
            "path": str(paths[profile.sample_id].relative_to(out_dir)),
            "attacks": [profile.attack_spec(seed).to_dict() for seed in seeds],
        })
    config = {"samples": samples, "keywords": list(EXPERIMENT_KEYWORDS), "attacks": [], "mode": "positional_symbol"}
    config_path = out_dir / "suite.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote suite config with {len(samples)} samples to {config_path}")
    return config_path


def emulate_profiles(seed: int = 0) -> List[Dict]:
    """Attack a synthesized sample per profile and compare attacked word counts"""
    results = []
    for index, profile in enumerate(SAMPLE_PROFILES):
        text = synthesize_sample(profile.word_count, seed=index)
        _, report = attack(text, profile.attack_spec(seed))
        deviation = (report.wc_after - profile.attacked_word_count) / profile.attacked_word_count
        results.append({
            "sample_id": profile.sample_id,
            "word_count": report.wc_before,
            "expected_attacked": profile.attacked_word_count,
            "actual_attacked": report.wc_after,
            "deviation": deviation,
        })
    return results
