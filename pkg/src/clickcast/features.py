"""Feature extraction: text statistics, key phrase counts, time features.

Tokenisation is deliberately simple and frozen: split on Unicode whitespace,
measure lengths in code points.  Phrase matching additionally strips leading
and trailing non-alphanumeric characters from each token and case-folds, so
"Mercado," matches the phrase "mercado" while "supermercado" does not.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .records import Dataset, KeyphraseEntry, LinkHourEntry

__all__ = [
    "FEATURE_GROUPS",
    "FeatureField",
    "FeatureSchema",
    "FeatureVector",
    "StyleFeatures",
    "TimeFeatures",
    "assemble_vector",
    "build_schema",
    "count_named_entities",
    "filter_keyphrases",
    "keyphrase_counts",
    "stylometric_features",
    "time_features",
]

FEATURE_GROUPS = ("base", "f1", "f2", "f3", "f4", "f5")

# Straight, curly, and angled quotation marks all count as quote characters.
QUOTE_CHARS = frozenset('"\'“”‘’«»')


@dataclass(frozen=True)
class StyleFeatures:
    word_count: int
    max_word_len: int
    min_word_len: int
    quote_count: int
    capital_letter_count: int
    named_entity_count: int


@dataclass(frozen=True)
class TimeFeatures:
    day_of_week: int
    hour_of_day: int
    hours_since_first_publication: int


def count_named_entities(title: str) -> int:
    """Count tokens that start uppercase, skipping the leading token.

    Tokens that are entirely-uppercase, punctuation-free acronyms of length
    at most two (EU, UN) are not counted.  This is a crude surface heuristic,
    not a tagger, and that is the point: it is cheap and deterministic.
    """
    count = 0
    for token in title.split()[1:]:
        if not token[0].isupper():
            continue
        if len(token) <= 2 and token.isalpha() and token.isupper():
            continue
        count += 1
    return count


def stylometric_features(title: str) -> StyleFeatures:
    """Compute the six surface statistics of a title."""
    tokens = title.split()
    lengths = [len(token) for token in tokens]
    return StyleFeatures(
        word_count=len(tokens),
        max_word_len=max(lengths, default=0),
        min_word_len=min(lengths, default=0),
        quote_count=sum(1 for ch in title if ch in QUOTE_CHARS),
        capital_letter_count=sum(1 for ch in title if ch.isupper()),
        named_entity_count=count_named_entities(title),
    )


def filter_keyphrases(
    entries: Iterable[KeyphraseEntry], min_confidence: float = 0.5
) -> list[KeyphraseEntry]:
    """Keep phrases at or above the confidence floor, dropping duplicates.

    Order is preserved and duplicate detection is case-insensitive; the
    first occurrence of a phrase wins.
    """
    kept: list[KeyphraseEntry] = []
    seen: set[str] = set()
    for entry in entries:
        if entry.confidence < min_confidence:
            continue
        key = entry.phrase.casefold()
        if key in seen:
            continue
        seen.add(key)
        kept.append(entry)
    return kept


def _match_token(token: str) -> str:
    """Normalise one token for phrase matching."""
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end].casefold()


def _match_tokens(text: str) -> list[str]:
    return [_match_token(token) for token in text.split()]


def _count_phrase(tokens: Sequence[str], phrase: Sequence[str]) -> int:
    """Count non-overlapping occurrences of a token sequence, left to right."""
    if not phrase:
        return 0
    first = phrase[0]
    k = len(phrase)
    count = 0
    i = 0
    limit = len(tokens) - k + 1
    while i < limit:
        if tokens[i] == first and list(tokens[i : i + k]) == list(phrase):
            count += 1
            i += k
        else:
            i += 1
    return count


def keyphrase_counts(
    text: str, phrases: Sequence[KeyphraseEntry | str]
) -> np.ndarray:
    """Per-phrase occurrence counts in ``text``.

    Matching is case-insensitive and token-based: a phrase of k words
    matches k consecutive tokens of the text.  Matches never overlap.
    """
    tokens = _match_tokens(text)
    counts = np.zeros(len(phrases), dtype=np.int64)
    for pos, item in enumerate(phrases):
        surface = item.phrase if isinstance(item, KeyphraseEntry) else item
        counts[pos] = _count_phrase(tokens, _match_tokens(surface))
    return counts


def time_features(entry_time: dt.datetime, first_pub: dt.datetime) -> TimeFeatures:
    """Day of week (Monday=0), hour of day, and whole hours since first seen."""
    if entry_time < first_pub:
        raise DataError(
            f"entry time {entry_time} precedes first publication {first_pub}"
        )
    elapsed = int((entry_time - first_pub).total_seconds() // 3600)
    return TimeFeatures(
        day_of_week=entry_time.weekday(),
        hour_of_day=entry_time.hour,
        hours_since_first_publication=elapsed,
    )


# -- schema and vector assembly ---------------------------------------------

@dataclass(frozen=True)
class FeatureField:
    """One logical feature: a numeric column or a one-hot nominal group."""

    name: str
    group: str
    kind: str  # "numeric" | "nominal"
    categories: tuple[str, ...] = ()

    def width(self) -> int:
        return len(self.categories) if self.kind == "nominal" else 1


@dataclass(frozen=True)
class FeatureVector:
    """Expanded numeric values plus a per-column missing mask."""

    values: np.ndarray
    missing_mask: np.ndarray


@dataclass(frozen=True)
class FeatureSchema:
    """The feature layout frozen at training time.

    The schema owns the ordered field list, the active groups, and the key
    phrase list, so a vector assembled under it always has the same width
    and column meaning regardless of which dataset the entry came from.
    """

    fields: tuple[FeatureField, ...]
    groups: frozenset[str]
    keyphrases: tuple[str, ...] = ()

    @cached_property
    def width(self) -> int:
        return sum(f.width() for f in self.fields)

    @cached_property
    def offsets(self) -> dict[str, int]:
        out: dict[str, int] = {}
        pos = 0
        for f in self.fields:
            out[f.name] = pos
            pos += f.width()
        return out

    @cached_property
    def column_names(self) -> tuple[str, ...]:
        names: list[str] = []
        for f in self.fields:
            if f.kind == "nominal":
                names.extend(f"{f.name}={c}" for c in f.categories)
            else:
                names.append(f.name)
        return tuple(names)

    @cached_property
    def _category_index(self) -> dict[str, dict[str, int]]:
        return {
            f.name: {c: i for i, c in enumerate(f.categories)}
            for f in self.fields
            if f.kind == "nominal"
        }

    @cached_property
    def _phrase_tokens(self) -> tuple[tuple[str, ...], ...]:
        return tuple(tuple(_match_tokens(p)) for p in self.keyphrases)

    def field_by_name(self, name: str) -> FeatureField:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)


def _validate_groups(groups: Iterable[str]) -> frozenset[str]:
    wanted = frozenset(groups)
    unknown = wanted - set(FEATURE_GROUPS)
    if unknown:
        raise ConfigError(f"unknown feature groups: {sorted(unknown)}")
    if not wanted:
        raise ConfigError("at least one feature group must be active")
    return wanted


def build_schema(
    dataset: Dataset,
    groups: Iterable[str],
    keyphrases: Sequence[KeyphraseEntry | str] = (),
) -> FeatureSchema:
    """Freeze a schema from the active groups and observed categories."""
    active = _validate_groups(groups)
    fields: list[FeatureField] = []
    if "base" in active:
        channels = tuple(sorted({str(e.channel_id) for e in dataset}, key=int))
        sections = tuple(sorted({e.section_tag for e in dataset}))
        subsections = tuple(sorted({e.subsection for e in dataset}))
        fields.append(FeatureField("channel_id", "base", "nominal", channels))
        fields.append(FeatureField("section", "base", "nominal", sections))
        fields.append(FeatureField("subsection", "base", "nominal", subsections))
        if "f5" not in active:
            # Hour of day belongs to the time group, but a baseline that is
            # blind to the strong hourly traffic cycle would be meaningless,
            # so the base block absorbs it whenever the time group is off.
            fields.append(FeatureField("hour_of_day", "base", "numeric"))
    if "f1" in active:
        fields.append(FeatureField("title_hits", "f1", "numeric"))
    if "f2" in active:
        for name in ("social_shares", "social_likes", "social_comments", "social_total"):
            fields.append(FeatureField(name, "f2", "numeric"))
    phrases: tuple[str, ...] = ()
    if "f3" in active:
        phrases = tuple(
            p.phrase if isinstance(p, KeyphraseEntry) else p for p in keyphrases
        )
        for phrase in phrases:
            fields.append(FeatureField(f"keyphrase:{phrase}", "f3", "numeric"))
    if "f4" in active:
        for name in (
            "word_count",
            "max_word_len",
            "min_word_len",
            "quote_count",
            "capital_letter_count",
            "named_entity_count",
        ):
            fields.append(FeatureField(name, "f4", "numeric"))
    if "f5" in active:
        for name in ("day_of_week", "hour_of_day", "hours_since_first_publication"):
            fields.append(FeatureField(name, "f5", "numeric"))
    return FeatureSchema(fields=tuple(fields), groups=active, keyphrases=phrases)


def assemble_vector(
    entry: LinkHourEntry,
    content=None,
    social=None,
    title_hits: int | None = None,
    schema: FeatureSchema | None = None,
    *,
    first_seen: dt.datetime | None = None,
    unseen_nominal: str = "error",
) -> FeatureVector:
    """Assemble one entry into the schema's expanded numeric layout.

    Optional inputs that are absent become zeros with the missing mask set.
    ``unseen_nominal`` selects what happens when a nominal value is not in
    the schema's category list: ``"error"`` raises, ``"zero"`` leaves the
    one-hot group all zero and masks it (the catch-all bucket used at
    prediction time).
    """
    if schema is None:
        raise ConfigError("assemble_vector requires a schema")
    if unseen_nominal not in ("error", "zero"):
        raise ConfigError(f"bad unseen_nominal mode {unseen_nominal!r}")
    values = np.zeros(schema.width, dtype=np.float64)
    mask = np.zeros(schema.width, dtype=bool)
    offsets = schema.offsets
    categories = schema._category_index

    def put_nominal(name: str, raw_value: str) -> None:
        index = categories[name].get(raw_value)
        start = offsets[name]
        if index is None:
            if unseen_nominal == "error":
                raise DataError(f"value {raw_value!r} not in categories of {name!r}")
            group_width = len(categories[name])
            mask[start : start + group_width] = True
            return
        values[start + index] = 1.0

    def put(name: str, value: float) -> None:
        values[offsets[name]] = float(value)

    def put_missing(name: str, width: int = 1) -> None:
        start = offsets[name]
        mask[start : start + width] = True

    groups = schema.groups
    if "base" in groups:
        put_nominal("channel_id", str(entry.channel_id))
        put_nominal("section", entry.section_tag)
        put_nominal("subsection", entry.subsection)
        if "f5" not in groups:
            put("hour_of_day", entry.timestamp.hour)
    if "f1" in groups:
        if title_hits is None:
            put_missing("title_hits")
        else:
            put("title_hits", title_hits)
    if "f2" in groups:
        if social is None:
            for name in (
                "social_shares",
                "social_likes",
                "social_comments",
                "social_total",
            ):
                put_missing(name)
        else:
            put("social_shares", social.shares)
            put("social_likes", social.likes)
            put("social_comments", social.comments)
            put("social_total", social.total)
    if "f3" in groups and schema.keyphrases:
        body = content.body if content is not None else ""
        text = entry.title + " " + body if body else entry.title
        tokens = _match_tokens(text)
        start = offsets[f"keyphrase:{schema.keyphrases[0]}"]
        for pos, phrase_tokens in enumerate(schema._phrase_tokens):
            values[start + pos] = _count_phrase(tokens, phrase_tokens)
    if "f4" in groups:
        style = stylometric_features(entry.title)
        put("word_count", style.word_count)
        put("max_word_len", style.max_word_len)
        put("min_word_len", style.min_word_len)
        put("quote_count", style.quote_count)
        put("capital_letter_count", style.capital_letter_count)
        put("named_entity_count", style.named_entity_count)
    if "f5" in groups:
        origin = first_seen if first_seen is not None else entry.timestamp
        clock = time_features(entry.timestamp, origin)
        put("day_of_week", clock.day_of_week)
        put("hour_of_day", clock.hour_of_day)
        put("hours_since_first_publication", clock.hours_since_first_publication)
    return FeatureVector(values=values, missing_mask=mask)
