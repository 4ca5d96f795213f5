import hashlib
import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Union

from errors import (
    CorruptRecord,
    EmptyInput,
    MalformedWatermark,
    RecordNotFound,
    StorageFailure,
    WatermarkMismatch,
)
from text_model import KeywordPolicy, select_keyword, tokenize
from watermark_core import (
    ComparisonMode,
    VerificationResult,
    Watermark,
    generate_from_tokens,
    verify_tokens,
)

logger = logging.getLogger(__name__)

Clock = Callable[[], datetime]
APPEND_ATTEMPTS = 5
RECORD_FIELDS = ("id", "author", "keyword", "watermark", "text_digest", "registered_at", "word_count", "kw_count")


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(moment: datetime) -> str:
    """RFC 3339 UTC timestamp with millisecond precision"""
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    moment = moment.astimezone(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%S.") + f"{moment.microsecond // 1000:03d}Z"


def parse_timestamp(value: str) -> datetime:
    return datetime.strptime(value, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)


def text_digest(text: str) -> str:
    """SHA-256 of the exact UTF-8 document bytes"""
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class WatermarkRecord:
    id: str
    author: str
    keyword: str
    watermark: Watermark
    text_digest: str
    registered_at: str
    word_count: int
    kw_count: int

    def to_dict(self) -> Dict:
        return {
            "id": self.id,
            "author": self.author,
            "keyword": self.keyword,
            "watermark": self.watermark.to_dict(),
            "text_digest": self.text_digest,
            "registered_at": self.registered_at,
            "word_count": self.word_count,
            "kw_count": self.kw_count,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Dict) -> "WatermarkRecord":
        if not isinstance(data, dict) or set(data) != set(RECORD_FIELDS):
            raise ValueError("record fields do not match the registry format")
        watermark = Watermark.from_dict(data["watermark"])
        record = cls(
            id=data["id"],
            author=data["author"],
            keyword=data["keyword"],
            watermark=watermark,
            text_digest=data["text_digest"],
            registered_at=data["registered_at"],
            word_count=data["word_count"],
            kw_count=data["kw_count"],
        )
        if record.kw_count != watermark.kw_count or record.keyword != watermark.keyword:
            raise ValueError("record keyword/kw_count disagree with its watermark")
        parse_timestamp(record.registered_at)
        return record


def resolve_owner(records: Iterable[WatermarkRecord]) -> WatermarkRecord:
    """Earliest registration wins; identical timestamps fall back to the smallest id"""
    records = list(records)
    if not records:
        raise EmptyInput("No records to resolve ownership from")
    return min(records, key=lambda r: (parse_timestamp(r.registered_at), r.id))


def load_records(path: Union[str, Path]) -> tuple:
    """Replay a JSON Lines store: (records, warnings, valid byte length)"""
    path = Path(path)
    if not path.exists():
        return [], [], 0

    data = path.read_bytes()
    lines = data.split(b"\n")
    records: List[WatermarkRecord] = []
    warnings: List[str] = []
    offset = 0
    valid_length = 0
    for number, line in enumerate(lines, start=1):
        is_last = number == len(lines)
        end = offset + len(line) + (0 if is_last else 1)
        if not line.strip():
            offset = end
            if not is_last:
                valid_length = end
            continue
        try:
            record = WatermarkRecord.from_dict(json.loads(line.decode("utf-8")))
        except (ValueError, KeyError, TypeError, MalformedWatermark) as e:
            # Only an unterminated final line may be a partial append
            trailing = is_last or all(not rest.strip() for rest in lines[number:])
            if trailing:
                message = f"Truncated record at line {number} of {path} ignored ({e})"
                logger.warning(message)
                warnings.append(message)
                break
            raise CorruptRecord(f"Malformed record at line {number} of {path}: {e}")
        records.append(record)
        offset = end
        valid_length = end
    return records, warnings, valid_length


class CertifyingAuthority:
    """Append-only JSON Lines registry of watermark records"""

    def __init__(
        self,
        store_path: Union[str, Path],
        archive_dir: Optional[Union[str, Path]] = None,
        clock: Optional[Clock] = None,
    ):
        self.store_path = Path(store_path)
        self.archive_dir = Path(archive_dir) if archive_dir else None
        self.clock = clock or utc_now
        self._lock = threading.Lock()
        self._load()
        logger.info(f"Opened registry {self.store_path} with {len(self._records)} records")

    @property
    def records(self) -> List[WatermarkRecord]:
        return self._current()

    def __len__(self) -> int:
        return len(self._current())

    def register(
        self,
        text: str,
        author: str,
        policy: Optional[KeywordPolicy] = None,
        claimed_watermark: Optional[Watermark] = None,
    ) -> WatermarkRecord:
        """Generate, stamp and durably append a watermark record"""
        policy = policy or KeywordPolicy.auto()
        tokens = tokenize(text)
        keyword, _ = select_keyword(text, policy)
        watermark = generate_from_tokens(tokens, keyword)
        if claimed_watermark is not None and claimed_watermark != watermark:
            raise WatermarkMismatch("Submitted watermark does not match the document")

        digest = text_digest(text)
        with self._lock:
            for _ in range(APPEND_ATTEMPTS):
                self._refresh()
                record = WatermarkRecord(
                    id=self._new_id(),
                    author=author,
                    keyword=keyword,
                    watermark=watermark,
                    text_digest=digest,
                    registered_at=self._stamp(),
                    word_count=sum(1 for token in tokens if token.is_word),
                    kw_count=watermark.kw_count,
                )
                if self._append(record):
                    break
            else:
                raise StorageFailure(f"{self.store_path} kept changing during append")
            self._records.append(record)
            self._ids.add(record.id)

        if self.archive_dir is not None:
            self._archive(text, digest)
        logger.info(f"Registered {record.id} for {author} (keyword '{keyword}', {record.kw_count} occurrences)")
        return record

    def find(
        self,
        author: Optional[str] = None,
        keyword: Optional[str] = None,
        text_digest: Optional[str] = None,
        record_id: Optional[str] = None,
    ) -> List[WatermarkRecord]:
        """Conjunctive filter over all records, in append order"""
        return [
            record for record in self._current()
            if (author is None or record.author == author)
            and (keyword is None or record.keyword == keyword)
            and (text_digest is None or record.text_digest == text_digest)
            and (record_id is None or record.id == record_id)
        ]

    def get(self, record_id: str) -> WatermarkRecord:
        matches = self.find(record_id=record_id)
        if not matches:
            raise RecordNotFound(f"No record with id '{record_id}'")
        return matches[0]

    def settle_dispute(self, digest: str) -> WatermarkRecord:
        """Owner of a document: the earliest record registered for its digest"""
        matches = self.find(text_digest=digest)
        if not matches:
            raise RecordNotFound(f"No registration for {digest}")
        return resolve_owner(matches)

    def verify(
        self,
        text: str,
        record_id: Optional[str] = None,
        watermark: Optional[Watermark] = None,
        mode=ComparisonMode.POSITIONAL_SYMBOL,
    ) -> VerificationResult:
        """Check a text against a stored record or a supplied watermark"""
        if record_id is not None:
            watermark = self.get(record_id).watermark
        if watermark is None:
            raise MalformedWatermark("Either a record id or a watermark is required")
        return verify_tokens(tokenize(text), watermark, mode)

    def _new_id(self) -> str:
        record_id = uuid.uuid4().hex
        while record_id in self._ids:
            record_id = uuid.uuid4().hex
        return record_id

    def _stamp(self) -> str:
        moment = self.clock()
        if self._records:
            latest = parse_timestamp(self._records[-1].registered_at)
            if moment.tzinfo is None:
                moment = moment.replace(tzinfo=timezone.utc)
            if moment.astimezone(timezone.utc) < latest:
                logger.warning(f"Clock went backwards ({format_timestamp(moment)}); reusing the latest timestamp")
                moment = latest
        return format_timestamp(moment)

    def _load(self):
        self._records, self.warnings, self._valid_length = load_records(self.store_path)
        self._seen_size = self._file_size()
        self._needs_newline = self._valid_length > 0 and not self._ends_with_newline()
        self._ids = {record.id for record in self._records}

    def _file_size(self) -> int:
        try:
            return self.store_path.stat().st_size
        except OSError:
            return 0

    def _refresh(self):
        """Adopt records appended to the store by other handles"""
        if self._file_size() == self._seen_size:
            return
        known = self._records
        self._load()
        if self._records[:len(known)] != known:
            raise CorruptRecord(f"{self.store_path} no longer starts with the records already read")
        adopted = len(self._records) - len(known)
        if adopted:
            logger.info(f"Adopted {adopted} records appended to {self.store_path} by another writer")

    def _current(self) -> List[WatermarkRecord]:
        with self._lock:
            self._refresh()
            return list(self._records)

    def _append(self, record: WatermarkRecord) -> bool:
        """Write one line; False when the file changed since the last refresh"""
        try:
            self.store_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.store_path, "ab") as f:
                size = f.tell()
                if size != self._seen_size:
                    return False
                if size != self._valid_length:
                    # Only an unterminated partial line lies past the valid prefix
                    f.truncate(self._valid_length)
                    logger.warning(f"Cut {size - self._valid_length} trailing bytes from {self.store_path}")
                if self._needs_newline:
                    f.write(b"\n")
                    self._needs_newline = False
                line = (record.to_line() + "\n").encode("utf-8")
                f.write(line)
                f.flush()
                os.fsync(f.fileno())
                self._valid_length = self._seen_size = f.tell()
        except OSError as e:
            raise StorageFailure(f"Could not append to {self.store_path}: {e}")
        return True

    def _ends_with_newline(self) -> bool:
        with open(self.store_path, "rb") as f:
            f.seek(self._valid_length - 1)
            return f.read(1) == b"\n"

    def _archive(self, text: str, digest: str):
        try:
            self.archive_dir.mkdir(parents=True, exist_ok=True)
            target = self.archive_dir / f"{digest.split(':', 1)[1]}.txt"
            if not target.exists():
                target.write_bytes(text.encode("utf-8"))
        except OSError as e:
            raise StorageFailure(f"Could not archive document: {e}")


def reload(store_path: Union[str, Path], archive_dir=None, clock: Optional[Clock] = None) -> CertifyingAuthority:
    """Open a store handle by replaying its file"""
    return CertifyingAuthority(store_path, archive_dir=archive_dir, clock=clock)
