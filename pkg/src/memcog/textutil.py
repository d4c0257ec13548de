"""Deterministic text and JSON helpers used across the engine.

Everything here must stay pure: the byte-determinism guarantees of
serialization, digests, and link suggestion all route through this module.
"""

from __future__ import annotations

import hashlib
import json
import re
from datetime import date, datetime, timezone
from functools import lru_cache
from importlib import resources

_TOKEN_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9'&+-]*")
_DATE_RE = re.compile(r"(\d{4})-(\d{2})-(\d{2})")


@lru_cache(maxsize=None)
def _data_lines(name: str) -> tuple[str, ...]:
    text = resources.files("memcog").joinpath("data", name).read_text(encoding="utf-8")
    return tuple(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    return frozenset(_data_lines("stopwords.txt"))


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens with edge punctuation stripped, stop words removed."""
    out = []
    for match in _TOKEN_RE.finditer(text.lower()):
        tok = match.group(0).strip("'&+-")
        if tok and tok not in stopwords():
            out.append(tok)
    return out


def causal_cues() -> list[tuple[str, str]]:
    """(cue phrase, direction) pairs; direction says which side is the cause."""
    out = []
    for line in _data_lines("causal_cues.txt"):
        cue, _, direction = line.partition("\t")
        out.append((cue, direction or "other_is_cause"))
    return out


@lru_cache(maxsize=None)
def polarity_lexicon() -> dict[str, str]:
    """word -> 'pos' | 'neg'."""
    out = {}
    for line in _data_lines("polarity.txt"):
        word, _, pol = line.partition("\t")
        out[word] = pol or "pos"
    return out


def detail_polarity(text: str) -> set[str]:
    """Polarities of cue words present in the text ({'pos'}, {'neg'}, both, or empty)."""
    lex = polarity_lexicon()
    found = set()
    for match in _TOKEN_RE.finditer(text.lower()):
        pol = lex.get(match.group(0))
        if pol:
            found.add(pol)
    return found


def parse_date(value: str | None) -> date | None:
    """First ISO date embedded in the value, or None (recurrence patterns parse to None)."""
    if not value:
        return None
    m = _DATE_RE.search(value)
    if not m:
        return None
    try:
        return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    except ValueError:
        return None


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 timestamp; naive values are read as UTC so mixes compare."""
    parsed = datetime.fromisoformat(value)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed


def norm(text: str) -> str:
    """Case-folded, whitespace-collapsed form used for substring matching."""
    return " ".join(text.casefold().split())


def canonical_json(obj: object) -> str:
    """Compact, key-sorted JSON; the only form that ever gets digested."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def pretty_json(obj: object) -> str:
    """Key-sorted 2-space JSON with a trailing newline, for files on disk."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def digest(obj: object) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def ols_slope(values: list[float]) -> float:
    """Ordinary least-squares slope of values against their 0-based index."""
    n = len(values)
    if n < 2:
        raise ValueError("need at least two points")
    mean_x = (n - 1) / 2.0
    mean_y = sum(values) / n
    num = sum((i - mean_x) * (y - mean_y) for i, y in enumerate(values))
    den = sum((i - mean_x) ** 2 for i in range(n))
    return num / den
