"""Corpus ingestion and text normalization.

Records arrive as JSONL or CSV, are validated row by row, and normalized
into the text form every downstream stage works on. Invalid rows are
collected as rejects with a line number and reason, never silently
dropped.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .emoji import count_emoji
from .errors import EmptyCorpusError, IngestError, PipelineError

CSV_COLUMNS = ("ad_id", "title", "description", "posted_at", "locations", "declared_phone", "source")

# casefold+NFC can expose new foldable/composable text; bounded, not while-True,
# so a pathological input cannot loop forever
_NORMALIZE_ROUNDS = 4


@dataclass
class AdRecord:
    """One raw ad as ingested."""

    ad_id: str
    title: str
    description: str
    posted_at: datetime
    locations: list[str] = field(default_factory=list)
    declared_phone: str | None = None
    source: str = ""


@dataclass
class NormalizedAd:
    """Normalized view of one ad; original_text keeps the raw concatenation."""

    ad_id: str
    norm_text: str
    original_text: str
    emoji_count: int
    char_length: int


@dataclass
class Reject:
    """One dropped input row."""

    line: int
    reason: str


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp to aware UTC, truncated to seconds."""
    if not isinstance(value, str) or not value.strip():
        raise ValueError("timestamp must be a non-empty string")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def build_original_text(title: str, description: str) -> str:
    """Title and description joined with a single space; either may be empty."""
    if title and description:
        return f"{title} {description}"
    return title or description


def normalize_text(text: str) -> str:
    """Casefold, NFC-normalize, strip control chars, collapse whitespace.

    Applying this twice yields the same string: control characters are
    removed before the casefold/NFC fixpoint so their removal cannot
    expose a composition on a later pass.
    """
    s = "".join(ch for ch in text if ch.isspace() or unicodedata.category(ch) != "Cc")
    prev = None
    for _ in range(_NORMALIZE_ROUNDS):
        if s == prev:
            break
        prev = s
        s = unicodedata.normalize("NFC", s.casefold())
    return " ".join(s.split())


def normalize(record: AdRecord) -> NormalizedAd:
    """Build the normalized view of one record."""
    original = build_original_text(record.title, record.description)
    norm = normalize_text(original)
    return NormalizedAd(
        ad_id=record.ad_id,
        norm_text=norm,
        original_text=original,
        emoji_count=count_emoji(norm),
        char_length=len(norm),
    )


def _validate_fields(obj: dict, line: int, seen_ids: set[str]) -> AdRecord | Reject:
    ad_id = obj.get("ad_id")
    if not isinstance(ad_id, str) or not ad_id:
        return Reject(line, "missing or empty ad_id")
    if ad_id in seen_ids:
        return Reject(line, f"duplicate ad_id {ad_id!r}")

    title = obj.get("title", "")
    description = obj.get("description", "")
    if not isinstance(title, str) or not isinstance(description, str):
        return Reject(line, "title and description must be strings")
    if not title and not description:
        return Reject(line, "empty title and description")

    raw_ts = obj.get("posted_at")
    if raw_ts is None:
        return Reject(line, "missing posted_at")
    try:
        posted_at = parse_timestamp(raw_ts)
    except (ValueError, TypeError):
        return Reject(line, f"unparseable posted_at {raw_ts!r}")

    locations = obj.get("locations", [])
    if not isinstance(locations, list) or any(not isinstance(x, str) for x in locations):
        return Reject(line, "locations must be a list of strings")

    declared_phone = obj.get("declared_phone")
    if declared_phone is not None and not isinstance(declared_phone, str):
        return Reject(line, "declared_phone must be a string or null")
    if declared_phone == "":
        declared_phone = None

    source = obj.get("source", "")
    if not isinstance(source, str):
        return Reject(line, "source must be a string")

    seen_ids.add(ad_id)
    return AdRecord(
        ad_id=ad_id,
        title=title,
        description=description,
        posted_at=posted_at,
        locations=[loc for loc in locations if loc],
        declared_phone=declared_phone,
        source=source,
    )


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict | Reject]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                yield line_no, Reject(line_no, "invalid json")
                continue
            if not isinstance(obj, dict):
                yield line_no, Reject(line_no, "record is not an object")
                continue
            yield line_no, obj


def _iter_csv(path: Path) -> Iterator[tuple[int, dict | Reject]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty csv file")
        if set(reader.fieldnames) != set(CSV_COLUMNS):
            raise IngestError(
                f"{path}: csv header mismatch, expected columns {sorted(CSV_COLUMNS)}, "
                f"got {sorted(reader.fieldnames)}"
            )
        for row in reader:
            line_no = reader.line_num
            if None in row or any(v is None for v in row.values()):
                yield line_no, Reject(line_no, "csv row width mismatch")
                continue
            obj: dict = dict(row)
            obj["locations"] = [p.strip() for p in row["locations"].split(";") if p.strip()]
            yield line_no, obj


def ingest(path: str | Path, fmt: str = "jsonl") -> tuple[list[AdRecord], list[Reject]]:
    """Read a corpus file, returning valid records and per-line rejects.

    Raises IngestError on structural problems (unreadable file, bad CSV
    header) and EmptyCorpusError when no record survives validation.
    """
    path = Path(path)
    if fmt not in ("jsonl", "csv"):
        raise IngestError(f"unsupported corpus format {fmt!r}")
    if not path.exists():
        raise IngestError(f"corpus file not found: {path}")

    rows = _iter_jsonl(path) if fmt == "jsonl" else _iter_csv(path)
    records: list[AdRecord] = []
    rejects: list[Reject] = []
    seen_ids: set[str] = set()
    for line_no, obj in rows:
        if isinstance(obj, Reject):
            rejects.append(obj)
            continue
        result = _validate_fields(obj, line_no, seen_ids)
        if isinstance(result, Reject):
            rejects.append(result)
        else:
            records.append(result)
    if not records:
        raise EmptyCorpusError(f"{path}: no valid records ({len(rejects)} rejected)")
    return records, rejects


def record_to_dict(record: AdRecord) -> dict:
    return {
        "ad_id": record.ad_id,
        "title": record.title,
        "description": record.description,
        "posted_at": record.posted_at.isoformat(),
        "locations": list(record.locations),
        "declared_phone": record.declared_phone,
        "source": record.source,
    }


def normalized_to_dict(ad: NormalizedAd) -> dict:
    return {
        "ad_id": ad.ad_id,
        "norm_text": ad.norm_text,
        "original_text": ad.original_text,
        "emoji_count": ad.emoji_count,
        "char_length": ad.char_length,
    }


def normalized_from_dict(obj: dict) -> NormalizedAd:
    return NormalizedAd(
        ad_id=obj["ad_id"],
        norm_text=obj["norm_text"],
        original_text=obj["original_text"],
        emoji_count=obj["emoji_count"],
        char_length=obj["char_length"],
    )


def record_from_dict(obj: dict) -> AdRecord:
    return AdRecord(
        ad_id=obj["ad_id"],
        title=obj["title"],
        description=obj["description"],
        posted_at=parse_timestamp(obj["posted_at"]),
        locations=list(obj["locations"]),
        declared_phone=obj["declared_phone"],
        source=obj["source"],
    )


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    """Write dicts as one JSON object per line, sorted keys, no ASCII escapes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise PipelineError(
                        f"artifact {Path(path).name} line {lineno} is not valid json; "
                        "the file is corrupt, rerun the stage that wrote it"
                    ) from exc
    return out
