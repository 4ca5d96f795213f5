import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from attack_sim import AttackSpec, attack
from errors import InvalidSuiteConfig, WatermarkError
from text_model import normalize, tokenize
from watermark_core import ComparisonMode, extract_and_verify, generate_from_tokens

logger = logging.getLogger(__name__)


@dataclass
class TrialRow:
    """One (sample, keyword, attack) trial; error holds the failure code, if any"""
    sample_id: str
    keyword: str
    wc_o: Optional[int] = None
    wc_a: Optional[int] = None
    tamper_detected: Optional[bool] = None
    war: Optional[float] = None
    wdr: Optional[float] = None
    insert_ratio: float = 0.0
    delete_ratio: float = 0.0
    reorder_ratio: float = 0.0
    seed: int = 0
    neighborhood_hits: Optional[int] = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


CSV_COLUMNS = [f.name for f in fields(TrialRow)]


@dataclass
class SuiteConfig:
    samples: List[Tuple[str, Path]]
    keywords: List[str]
    attacks: List[AttackSpec] = field(default_factory=list)
    mode: ComparisonMode = ComparisonMode.POSITIONAL_SYMBOL
    max_workers: int = 1
    # Per-sample attack lists replace the shared ones for that sample
    sample_attacks: Dict[str, List[AttackSpec]] = field(default_factory=dict)

    def attacks_for(self, sample_id: str) -> List[AttackSpec]:
        return self.sample_attacks.get(sample_id, self.attacks)

    def __post_init__(self):
        if not self.samples:
            raise InvalidSuiteConfig("Suite needs at least one sample")
        if not self.keywords:
            raise InvalidSuiteConfig("Suite needs at least one keyword")
        for keyword in self.keywords:
            if not keyword or normalize(keyword) != keyword:
                raise InvalidSuiteConfig(f"Keyword '{keyword}' is not in normalized form")
        try:
            self.mode = ComparisonMode.parse(self.mode)
        except ValueError as e:
            raise InvalidSuiteConfig(str(e))
        if not isinstance(self.max_workers, int) or self.max_workers < 1:
            raise InvalidSuiteConfig("max_workers must be a positive integer")

    @classmethod
    def from_dict(cls, data: Dict, base_dir: Path = Path(".")) -> "SuiteConfig":
        if not isinstance(data, dict):
            raise InvalidSuiteConfig("Suite config must be a JSON object")
        samples = []
        sample_attacks = {}
        for entry in data.get("samples", []):
            if not isinstance(entry, dict) or "id" not in entry or "path" not in entry:
                raise InvalidSuiteConfig(f"Sample entries need 'id' and 'path': {entry!r}")
            sample_id = str(entry["id"])
            path = Path(entry["path"])
            samples.append((sample_id, path if path.is_absolute() else base_dir / path))
            if "attacks" in entry:
                sample_attacks[sample_id] = [AttackSpec.from_dict(spec) for spec in entry["attacks"]]
        return cls(
            samples=samples,
            keywords=list(data.get("keywords", [])),
            attacks=[AttackSpec.from_dict(spec) for spec in data.get("attacks", [])],
            mode=data.get("mode", ComparisonMode.POSITIONAL_SYMBOL.value),
            max_workers=data.get("max_workers", 1),
            sample_attacks=sample_attacks,
        )

    @classmethod
    def from_file(cls, path) -> "SuiteConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidSuiteConfig(f"Cannot read suite config {path}: {e}")
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> Dict:
        return {
            "samples": [
                {"id": sample_id, "path": str(path)}
                if sample_id not in self.sample_attacks
                else {"id": sample_id, "path": str(path), "attacks": [s.to_dict() for s in self.sample_attacks[sample_id]]}
                for sample_id, path in self.samples
            ],
            "keywords": list(self.keywords),
            "attacks": [spec.to_dict() for spec in self.attacks],
            "mode": self.mode.value,
            "max_workers": self.max_workers,
        }


def run_trial(
    text: str,
    keyword: str,
    spec: AttackSpec,
    mode=ComparisonMode.POSITIONAL_SYMBOL,
    sample_id: str = "",
) -> TrialRow:
    """Watermark the original, attack it, then extract and compare"""
    original = generate_from_tokens(tokenize(text), keyword)
    attacked, report = attack(text, spec, instrument_keyword=keyword)
    result = extract_and_verify(attacked, original, mode)
    return TrialRow(
        sample_id=sample_id,
        keyword=keyword,
        wc_o=result.kw_count_original,
        wc_a=result.kw_count_observed,
        tamper_detected=result.tampered,
        war=result.comparison.war,
        wdr=result.comparison.wdr,
        insert_ratio=spec.insert_ratio,
        delete_ratio=spec.delete_ratio,
        reorder_ratio=spec.reorder_ratio,
        seed=spec.seed,
        neighborhood_hits=report.neighborhood_hits,
    )


def _run_cell(cell) -> TrialRow:
    sample_id, text, keyword, spec, mode = cell
    try:
        return run_trial(text, keyword, spec, mode, sample_id=sample_id)
    except WatermarkError as e:
        logger.error(f"Trial {sample_id}/{keyword}/seed={spec.seed} failed: {e}")
        return TrialRow(
            sample_id=sample_id,
            keyword=keyword,
            insert_ratio=spec.insert_ratio,
            delete_ratio=spec.delete_ratio,
            reorder_ratio=spec.reorder_ratio,
            seed=spec.seed,
            error=e.code,
        )


def run_suite(config: SuiteConfig) -> List[TrialRow]:
    """Every sample x keyword x attack, in that order"""
    texts = {}
    for sample_id, path in config.samples:
        try:
            texts[sample_id] = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise InvalidSuiteConfig(f"Cannot read sample '{sample_id}' at {path}: {e}")

    cells = [
        (sample_id, texts[sample_id], keyword, spec, config.mode)
        for sample_id, _ in config.samples
        for keyword in config.keywords
        for spec in config.attacks_for(sample_id)
    ]
    if config.max_workers > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as executor:
            rows = list(executor.map(_run_cell, cells))
    else:
        rows = [_run_cell(cell) for cell in cells]

    failed = sum(1 for row in rows if not row.ok)
    logger.info(f"Suite finished: {len(rows)} trials, {failed} failed")
    return rows


def rows_frame(rows: Sequence[TrialRow]) -> pd.DataFrame:
    # object dtype keeps integer cells integral next to empty error cells
    return pd.DataFrame([asdict(row) for row in rows], columns=CSV_COLUMNS, dtype=object)


def emit_csv(rows: Sequence[TrialRow]) -> str:
    """Trial rows as CSV with a fixed snake_case header"""
    return rows_frame(rows).to_csv(index=False, lineterminator="\n")


def _ok_frame(rows: Sequence[TrialRow]) -> pd.DataFrame:
    frame = rows_frame([row for row in rows if row.ok])
    for column in ("war", "wdr"):
        frame[column] = frame[column].astype(float)
    return frame


def chart_series(rows: Sequence[TrialRow]) -> Dict[str, str]:
    """Per keyword, a (sample_id, wdr) CSV ordered by sample id"""
    frame = _ok_frame(rows)
    series = {}
    for keyword, group in frame.groupby("keyword", sort=False):
        points = group.groupby("sample_id", sort=True)["wdr"].mean().reset_index()
        series[keyword] = points.to_csv(index=False, lineterminator="\n")
    return series


def summarize(rows: Sequence[TrialRow]) -> str:
    """Per keyword: trials, failures, detection rate, median WAR, mean WDR"""
    columns = ["keyword", "trials", "errors", "detection_rate", "median_war", "mean_wdr"]
    all_rows = rows_frame(rows)
    ok = _ok_frame(rows)
    summary = []
    for keyword in all_rows["keyword"].drop_duplicates():
        group = ok[ok["keyword"] == keyword]
        summary.append({
            "keyword": keyword,
            "trials": int((all_rows["keyword"] == keyword).sum()),
            "errors": int((all_rows["keyword"] == keyword).sum() - len(group)),
            "detection_rate": float(group["tamper_detected"].astype(bool).mean()) if len(group) else None,
            "median_war": float(group["war"].median()) if len(group) else None,
            "mean_wdr": float(group["wdr"].mean()) if len(group) else None,
        })
    return pd.DataFrame(summary, columns=columns, dtype=object).to_csv(index=False, lineterminator="\n")
