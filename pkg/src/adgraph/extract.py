"""Hard identifier extraction: phones (plain or obfuscated), emails,
social handles, urls.

Phone recovery uses an atom/chain model: ASCII digit runs and spelled
digit words are atoms; atoms chain when separated by at most three
characters of pure separators (whitespace, dash, dot, parens, emoji).
Homophone words (to, for, ate, o) count only next to a strong atom. A
chain of ten or more digits is a phone. Dense numeric text such as
dotted timestamps can satisfy these rules; they are applied verbatim,
with no context heuristics.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import NormalizedAd, Reject
from .emoji import is_emoji

KINDS = ("phone", "email", "social_handle", "url")

_DIGIT_WORDS = {
    "zero": "0", "oh": "0", "one": "1", "two": "2", "three": "3",
    "four": "4", "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9",
}
_HOMOPHONES = {"to": "2", "too": "2", "for": "4", "ate": "8", "o": "0"}
_SEPARATOR_CHARS = set("-–—.()")

_ATOM_RE = re.compile(r"[0-9]+|[A-Za-z]+")
_EMAIL_RE = re.compile(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,}")
_URL_RE = re.compile(r"https?://[^\s<>\"']+", re.IGNORECASE)
_PLATFORMS = {
    "snap": "snapchat", "snapchat": "snapchat",
    "insta": "instagram", "instagram": "instagram", "ig": "instagram",
    "telegram": "telegram", "tg": "telegram",
    "whatsapp": "whatsapp",
}
_HANDLE_RE = re.compile(
    r"\b(snapchat|snap|instagram|insta|ig|telegram|tg|whatsapp)\b"
    r"(?=[\s:.\-–—@]{0,4}([A-Za-z0-9_][A-Za-z0-9_.\-]{1,30}))",
    re.IGNORECASE,
)
_HANDLE_TOKEN_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.\-]{1,30}$")


@dataclass(frozen=True)
class Identifier:
    """One extracted identifier; start/end index original_text when known."""

    kind: str
    raw: str
    canonical: str
    start: int | None = None
    end: int | None = None


@dataclass(frozen=True)
class _Atom:
    start: int
    end: int
    digits: str
    strong: bool
    is_run: bool  # a literal digit run, one digit per char


def _is_separator(ch: str) -> bool:
    return ch.isspace() or ch in _SEPARATOR_CHARS or is_emoji(ch)


def _atoms(text: str) -> list[_Atom]:
    out = []
    for m in _ATOM_RE.finditer(text):
        tok = m.group()
        if tok[0].isdigit():
            out.append(_Atom(m.start(), m.end(), tok, True, True))
            continue
        word = tok.lower()
        if word in _DIGIT_WORDS:
            out.append(_Atom(m.start(), m.end(), _DIGIT_WORDS[word], True, False))
        elif word in _HOMOPHONES:
            out.append(_Atom(m.start(), m.end(), _HOMOPHONES[word], False, False))
    return out


def _chain(atoms: list[_Atom], text: str) -> list[list[_Atom]]:
    chains: list[list[_Atom]] = []
    cur: list[_Atom] = []
    for atom in atoms:
        if cur:
            gap = text[cur[-1].end : atom.start]
            if len(gap) <= 3 and all(_is_separator(ch) for ch in gap):
                cur.append(atom)
                continue
            chains.append(cur)
        cur = [atom]
    if cur:
        chains.append(cur)
    return chains


def _digit_char_spans(chain: list[_Atom]) -> list[tuple[int, int]]:
    spans = []
    for atom in chain:
        if atom.is_run:
            spans.extend((atom.start + i, atom.start + i + 1) for i in range(len(atom.digits)))
        else:
            spans.append((atom.start, atom.end))
    return spans


def deobfuscate_phone(text: str) -> list[tuple[str, tuple[int, int]]]:
    """All recovered digit chains of length >= 10, as (digits, (start, end)).

    Chains longer than 15 digits are split greedily into 10-digit
    numbers left to right; a remainder under 10 digits is dropped.
    """
    matches: list[tuple[str, tuple[int, int]]] = []
    for rough in _chain(_atoms(text), text):
        kept = [
            atom
            for i, atom in enumerate(rough)
            if atom.strong
            or (i > 0 and rough[i - 1].strong)
            or (i + 1 < len(rough) and rough[i + 1].strong)
        ]
        for chain in _chain(kept, text):
            digits = "".join(a.digits for a in chain)
            if len(digits) < 10:
                continue
            spans = _digit_char_spans(chain)
            if len(digits) <= 15:
                matches.append((digits, (spans[0][0], spans[-1][1])))
                continue
            pos = 0
            while len(digits) - pos >= 10:
                matches.append((digits[pos : pos + 10], (spans[pos][0], spans[pos + 9][1])))
                pos += 10
    return matches


def canonical_phone(digits: str) -> str | None:
    """Canonical digit string, or None if the length is out of range."""
    if not digits.isdigit():
        return None
    if len(digits) == 10:
        return digits
    if len(digits) == 11 and digits[0] == "1":
        return digits[1:]
    if 11 <= len(digits) <= 15:
        return digits
    return None


def canonical_url(raw: str) -> str:
    rest = raw
    m = re.match(r"(?i)(https?)://([^/?#]*)(.*)", rest, re.DOTALL)
    if not m:
        return raw.lower()
    scheme, netloc, tail = m.groups()
    return f"{scheme.lower()}://{netloc.lower()}{tail}"


def _scan_phones(text: str) -> list[Identifier]:
    out = []
    for digits, (start, end) in deobfuscate_phone(text):
        canonical = canonical_phone(digits)
        if canonical is not None:
            out.append(Identifier("phone", text[start:end], canonical, start, end))
    return out


def _scan_emails(text: str) -> list[Identifier]:
    return [
        Identifier("email", m.group(), m.group().lower(), m.start(), m.end())
        for m in _EMAIL_RE.finditer(text)
    ]


def _scan_handles(text: str) -> list[Identifier]:
    out = []
    for m in _HANDLE_RE.finditer(text):
        token = m.group(2).rstrip(".-")
        if len(token) < 2 or token.lower() in _PLATFORMS:
            continue
        platform = _PLATFORMS[m.group(1).lower()]
        end = m.start(2) + len(token)
        out.append(
            Identifier("social_handle", text[m.start() : end], f"{platform}:{token.lower()}", m.start(), end)
        )
    return out


def _scan_urls(text: str) -> list[Identifier]:
    out = []
    for m in _URL_RE.finditer(text):
        raw = m.group().rstrip(".,!?;:)’”")
        if "://" not in raw:
            continue
        out.append(Identifier("url", raw, canonical_url(raw), m.start(), m.start() + len(raw)))
    return out


def _scan_text(text: str) -> list[Identifier]:
    return _scan_phones(text) + _scan_emails(text) + _scan_handles(text) + _scan_urls(text)


def merge_identifiers(*groups: Iterable[Identifier]) -> list[Identifier]:
    """Dedupe by (kind, canonical); an entry with a span beats one without."""
    chosen: dict[tuple[str, str], Identifier] = {}
    for group in groups:
        for ident in group:
            key = (ident.kind, ident.canonical)
            held = chosen.get(key)
            if held is None or (held.start is None and ident.start is not None):
                chosen[key] = ident
    return sorted(chosen.values(), key=lambda x: (x.kind, x.canonical))


def extract_identifiers(declared_phone: str | None, normalized: NormalizedAd) -> list[Identifier]:
    """Rule-based identifiers for one ad.

    Scans original_text (spans reported), then norm_text for anything
    surviving only after normalization (span recovered by exact
    substring match when possible), then the declared phone field
    (never carries a span).
    """
    original_pass = _scan_text(normalized.original_text)

    norm_pass = []
    for ident in _scan_text(normalized.norm_text):
        idx = normalized.original_text.find(ident.raw)
        if idx >= 0:
            norm_pass.append(Identifier(ident.kind, ident.raw, ident.canonical, idx, idx + len(ident.raw)))
        else:
            norm_pass.append(Identifier(ident.kind, ident.raw, ident.canonical, None, None))

    declared_pass = []
    declared = declared_phone
    if declared:
        found = [canonical_phone(d) for d, _ in deobfuscate_phone(declared)]
        found = [c for c in found if c is not None]
        if not found:
            stripped = re.sub(r"[^0-9]", "", declared)
            canonical = canonical_phone(stripped)
            if canonical is not None:
                found = [canonical]
        declared_pass = [Identifier("phone", declared, c) for c in found]

    return merge_identifiers(original_pass, norm_pass, declared_pass)


def _canonicalize_span(
    original_text: str, start: int, end: int, label: str
) -> Identifier | None:
    span_text = original_text[start:end]
    if label == "phone":
        recovered = deobfuscate_phone(span_text)
        for digits, _ in recovered:
            canonical = canonical_phone(digits)
            if canonical is not None:
                return Identifier("phone", span_text, canonical, start, end)
        stripped = re.sub(r"[^0-9]", "", span_text)
        canonical = canonical_phone(stripped)
        if canonical is not None:
            return Identifier("phone", span_text, canonical, start, end)
        return None
    if label == "email":
        m = _EMAIL_RE.search(span_text)
        return Identifier("email", span_text, m.group().lower(), start, end) if m else None
    if label == "url":
        m = _URL_RE.search(span_text)
        return Identifier("url", span_text, canonical_url(m.group().rstrip(".,!?;:)")), start, end) if m else None
    if label == "social_handle":
        inner = _scan_handles(span_text)
        if inner:
            first = inner[0]
            return Identifier("social_handle", span_text, first.canonical, start, end)
        token = span_text.strip().lstrip("@")
        if not _HANDLE_TOKEN_RE.fullmatch(token):
            return None
        # platform keyword is often just before the span, not inside it
        window = original_text[max(0, start - 24) : start]
        platform = None
        for m in re.finditer(r"\b(snapchat|snap|instagram|insta|ig|telegram|tg|whatsapp)\b", window, re.IGNORECASE):
            platform = _PLATFORMS[m.group(1).lower()]
        if platform is None:
            return None
        return Identifier("social_handle", span_text, f"{platform}:{token.lower()}", start, end)
    return None


def import_annotations(
    path: str | Path, corpus: Mapping[str, NormalizedAd]
) -> tuple[dict[str, list[Identifier]], list[Reject]]:
    """Read span annotations (JSONL) and canonicalize them against the corpus.

    Each line holds {"ad_id": ..., "spans": [{"start", "end", "label"}]}.
    Unknown ads, malformed spans, and spans that cannot be canonicalized
    become rejects; everything else lands in the per-ad identifier map.
    """
    out: dict[str, list[Identifier]] = {}
    rejects: list[Reject] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                rejects.append(Reject(line_no, "invalid json"))
                continue
            if not isinstance(obj, dict):
                rejects.append(Reject(line_no, "annotation is not an object"))
                continue
            ad_id = obj.get("ad_id")
            if not isinstance(ad_id, str) or ad_id not in corpus:
                rejects.append(Reject(line_no, f"unknown ad_id {ad_id!r}"))
                continue
            spans = obj.get("spans")
            if not isinstance(spans, list):
                rejects.append(Reject(line_no, "missing spans list"))
                continue
            original = corpus[ad_id].original_text
            found: list[Identifier] = []
            for span in spans:
                if not isinstance(span, dict):
                    rejects.append(Reject(line_no, "span is not an object"))
                    continue
                start, end, label = span.get("start"), span.get("end"), span.get("label")
                if label not in KINDS:
                    rejects.append(Reject(line_no, f"unknown label {label!r}"))
                    continue
                if (
                    not isinstance(start, int)
                    or not isinstance(end, int)
                    or isinstance(start, bool)
                    or isinstance(end, bool)
                    or not (0 <= start < end <= len(original))
                ):
                    rejects.append(Reject(line_no, f"span out of range for {ad_id}"))
                    continue
                ident = _canonicalize_span(original, start, end, label)
                if ident is None:
                    rejects.append(
                        Reject(line_no, f"span {start}:{end} has no recoverable {label}")
                    )
                    continue
                found.append(ident)
            if found:
                out.setdefault(ad_id, [])
                out[ad_id] = merge_identifiers(out[ad_id], found)
    return out, rejects


def identifier_to_dict(ident: Identifier) -> dict:
    return {
        "kind": ident.kind,
        "raw": ident.raw,
        "canonical": ident.canonical,
        "start": ident.start,
        "end": ident.end,
    }


def identifier_from_dict(obj: dict) -> Identifier:
    return Identifier(
        kind=obj["kind"],
        raw=obj["raw"],
        canonical=obj["canonical"],
        start=obj.get("start"),
        end=obj.get("end"),
    )
