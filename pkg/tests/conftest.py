from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import pytest

from adgraph import corpus


def make_record(
    ad_id: str,
    text: str = "hello",
    title: str = "",
    posted: str = "2024-01-01T00:00:00+00:00",
    locations: list[str] | None = None,
    declared_phone: str | None = None,
    source: str = "site_a",
) -> corpus.AdRecord:
    return corpus.AdRecord(
        ad_id=ad_id,
        title=title,
        description=text,
        posted_at=corpus.parse_timestamp(posted),
        locations=locations or [],
        declared_phone=declared_phone,
        source=source,
    )


def make_norm(ad_id: str, text: str, **kw) -> corpus.NormalizedAd:
    return corpus.normalize(make_record(ad_id, text, **kw))


def ts(minute: int) -> datetime:
    return datetime(2024, 1, 1, 0, minute, tzinfo=timezone.utc)


def write_corpus(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def corpus_row(ad_id: str, description: str = "hello there", **kw) -> dict:
    row = {
        "ad_id": ad_id,
        "title": kw.pop("title", ""),
        "description": description,
        "posted_at": kw.pop("posted_at", "2024-01-01T00:00:00+00:00"),
        "locations": kw.pop("locations", []),
        "declared_phone": kw.pop("declared_phone", None),
        "source": kw.pop("source", "site_a"),
    }
    row.update(kw)
    return row


@pytest.fixture
def data_dir() -> Path:
    return Path(__file__).parent / "data"
