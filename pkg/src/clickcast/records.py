"""Domain records and flat-file formats for hourly link-click data.

The canonical on-disk form is one bracketed record per line::

    [line] [YYYY-MM-DD HH:MM:SS] [channel] [section] [subsection] [news_id] [clicks] [title]

The first seven fields are free of brackets, so they are read by scanning
``[...]`` groups; the title is everything between the eighth ``[`` and the
final ``]`` of the line.  Titles may contain ``[`` and spaces but not ``]``
(a documented limitation of the format) and never span lines.

A tab-separated variant with a fixed header row carries the same eight
columns for interoperability with spreadsheet-ish tooling.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

from .errors import DataError, ParseError

__all__ = [
    "ArticleContent",
    "Dataset",
    "KeyphraseEntry",
    "LinkHourEntry",
    "SECTION_TAGS",
    "SUBSECTIONS",
    "SocialMetadata",
    "TIMESTAMP_FORMAT",
    "TSV_HEADER",
    "format_entry",
    "load_content",
    "load_dataset",
    "load_keyphrases",
    "parse_content",
    "parse_dataset",
    "parse_dataset_tsv",
    "parse_entry",
    "parse_keyphrases",
    "write_content",
    "write_dataset",
    "write_dataset_tsv",
    "write_keyphrases",
]

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

# Raw section labels appear in two languages in the wild; both map to one
# canonical tag.  Unknown labels are rejected at parse time.
SECTION_TAGS: Mapping[str, str] = {
    "geral": "general",
    "general": "general",
    "desporto": "sport",
    "sport": "sport",
    "economia": "economy",
    "economy": "economy",
    "tecnologia": "technology",
    "technology": "technology",
    "vida": "life",
    "life": "life",
}

SUBSECTIONS = frozenset({"manchete", "headlines", "related", "footer", "null"})

_FIELD_NAMES = (
    "line_number",
    "timestamp",
    "channel_id",
    "section",
    "subsection",
    "news_id",
    "clicks",
    "title",
)


@dataclass(frozen=True)
class LinkHourEntry:
    """One observed hour of one news link on one channel."""

    line_number: int
    timestamp: dt.datetime
    channel_id: int
    section: str
    subsection: str
    news_id: int
    clicks: int
    title: str
    section_tag: str = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.line_number < 1:
            raise DataError(f"line_number must be positive, got {self.line_number}")
        if self.clicks < 1:
            raise DataError(f"clicks must be at least 1, got {self.clicks}")
        tag = SECTION_TAGS.get(self.section.lower())
        if tag is None:
            raise DataError(f"unknown section {self.section!r}")
        if self.subsection not in SUBSECTIONS:
            raise DataError(f"unknown subsection {self.subsection!r}")
        if "]" in self.title:
            raise DataError("titles may not contain ']'")
        if "\n" in self.title or "\r" in self.title:
            raise DataError("titles may not span lines")
        object.__setattr__(self, "section_tag", tag)


@dataclass(frozen=True)
class SocialMetadata:
    """Share/like/comment counters for one link on a social platform."""

    shares: int
    likes: int
    comments: int
    total: int

    def __post_init__(self) -> None:
        for name in ("shares", "likes", "comments", "total"):
            if getattr(self, name) < 0:
                raise DataError(f"social count {name} must be >= 0")


@dataclass(frozen=True)
class KeyphraseEntry:
    """A key phrase with the confidence its extractor assigned to it."""

    phrase: str
    confidence: float

    def __post_init__(self) -> None:
        if not self.phrase.strip():
            raise DataError("key phrase must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise DataError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class ArticleContent:
    """Sidecar body text (and optional URL) for one news id."""

    news_id: int
    body: str
    url: str | None = None


class Dataset:
    """An immutable collection of entries plus per-link indexes.

    ``by_news_id`` maps every news id to the positions of its entries (in
    file order) and ``first_seen`` to the earliest timestamp the id was
    observed at.  Together the index groups partition ``range(len(d))``.
    """

    __slots__ = ("entries", "by_news_id", "first_seen")

    def __init__(self, entries: Iterable[LinkHourEntry]):
        object.__setattr__(self, "entries", tuple(entries))
        by_id: dict[int, list[int]] = {}
        first: dict[int, dt.datetime] = {}
        for pos, entry in enumerate(self.entries):
            by_id.setdefault(entry.news_id, []).append(pos)
            seen = first.get(entry.news_id)
            if seen is None or entry.timestamp < seen:
                first[entry.news_id] = entry.timestamp
        object.__setattr__(
            self, "by_news_id", {k: tuple(v) for k, v in by_id.items()}
        )
        object.__setattr__(self, "first_seen", first)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Dataset is immutable")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[LinkHourEntry]:
        return iter(self.entries)

    def __getitem__(self, pos: int) -> LinkHourEntry:
        return self.entries[pos]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Dataset) and self.entries == other.entries

    def __repr__(self) -> str:
        return f"Dataset({len(self.entries)} entries, {len(self.by_news_id)} links)"


def parse_entry(line: str) -> LinkHourEntry:
    """Parse one bracketed record line into a LinkHourEntry."""
    text = line.strip()
    fields: list[str] = []
    pos = 0
    for index in range(7):
        if pos >= len(text) or text[pos] != "[":
            raise ParseError(
                f"field {index + 1} ({_FIELD_NAMES[index]}): expected '[' in {text!r}"
            )
        end = text.find("]", pos + 1)
        if end < 0:
            raise ParseError(
                f"field {index + 1} ({_FIELD_NAMES[index]}): unterminated bracket in {text!r}"
            )
        fields.append(text[pos + 1 : end])
        pos = end + 1
        if pos >= len(text) or text[pos] != " ":
            raise ParseError(
                f"field {index + 1} ({_FIELD_NAMES[index]}): expected a single space "
                f"after ']' in {text!r}"
            )
        pos += 1
    if pos >= len(text) or text[pos] != "[" or not text.endswith("]"):
        raise ParseError(f"field 8 (title): expected '[...]' at end of {text!r}")
    title = text[pos + 1 : -1]

    def _int(raw: str, index: int) -> int:
        try:
            return int(raw)
        except ValueError:
            raise ParseError(
                f"field {index + 1} ({_FIELD_NAMES[index]}): {raw!r} is not an integer"
            ) from None

    try:
        timestamp = dt.datetime.strptime(fields[1], TIMESTAMP_FORMAT)
    except ValueError:
        raise ParseError(
            f"field 2 (timestamp): {fields[1]!r} does not match YYYY-MM-DD HH:MM:SS"
        ) from None

    return LinkHourEntry(
        line_number=_int(fields[0], 0),
        timestamp=timestamp,
        channel_id=_int(fields[2], 2),
        section=fields[3],
        subsection=fields[4],
        news_id=_int(fields[5], 5),
        clicks=_int(fields[6], 6),
        title=title,
    )


def format_entry(entry: LinkHourEntry) -> str:
    """Render one entry back to its bracketed line (no trailing newline)."""
    ts = entry.timestamp.strftime(TIMESTAMP_FORMAT)
    return (
        f"[{entry.line_number}] [{ts}] [{entry.channel_id}] [{entry.section}] "
        f"[{entry.subsection}] [{entry.news_id}] [{entry.clicks}] [{entry.title}]"
    )


def _content_lines(lines: Iterable[str]) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, stripped text) skipping blanks and comments."""
    for number, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        yield number, text


def parse_dataset(lines: Iterable[str]) -> Dataset:
    """Parse bracketed lines into a Dataset; the first bad line aborts."""
    entries = []
    for number, text in _content_lines(lines):
        try:
            entries.append(parse_entry(text))
        except DataError as exc:
            raise ParseError(f"line {number}: {exc}") from None
    return Dataset(entries)


def write_dataset(dataset: Dataset, stream: TextIO) -> None:
    for entry in dataset:
        stream.write(format_entry(entry) + "\n")


TSV_HEADER = "\t".join(_FIELD_NAMES)


def parse_dataset_tsv(lines: Iterable[str]) -> Dataset:
    """Parse the tab-separated variant (fixed header, same eight columns)."""
    iterator = iter(lines)
    try:
        header = next(iterator).rstrip("\r\n")
    except StopIteration:
        raise ParseError("empty tsv input, expected a header row") from None
    if header != TSV_HEADER:
        raise ParseError(f"bad tsv header {header!r}")
    entries = []
    for number, raw in enumerate(iterator, start=2):
        text = raw.rstrip("\r\n")
        if not text or text.startswith("#"):
            continue
        cols = text.split("\t")
        if len(cols) != 8:
            raise ParseError(f"line {number}: expected 8 columns, got {len(cols)}")
        try:
            timestamp = dt.datetime.strptime(cols[1], TIMESTAMP_FORMAT)
        except ValueError:
            raise ParseError(f"line {number}: bad timestamp {cols[1]!r}") from None
        try:
            entries.append(
                LinkHourEntry(
                    line_number=int(cols[0]),
                    timestamp=timestamp,
                    channel_id=int(cols[2]),
                    section=cols[3],
                    subsection=cols[4],
                    news_id=int(cols[5]),
                    clicks=int(cols[6]),
                    title=cols[7],
                )
            )
        except DataError as exc:
            raise ParseError(f"line {number}: {exc}") from None
    return Dataset(entries)


def write_dataset_tsv(dataset: Dataset, stream: TextIO) -> None:
    stream.write(TSV_HEADER + "\n")
    for e in dataset:
        if "\t" in e.title:
            raise DataError(
                f"title of news_id {e.news_id} contains a tab, not representable in tsv"
            )
        ts = e.timestamp.strftime(TIMESTAMP_FORMAT)
        stream.write(
            f"{e.line_number}\t{ts}\t{e.channel_id}\t{e.section}\t{e.subsection}"
            f"\t{e.news_id}\t{e.clicks}\t{e.title}\n"
        )


def load_dataset(path: str) -> Dataset:
    """Read a dataset file, sniffing bracketed vs tab-separated form."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.readlines()
    for raw in lines:
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        if text == TSV_HEADER:
            return parse_dataset_tsv(lines)
        break
    return parse_dataset(lines)


# -- key phrase list -------------------------------------------------------

def parse_keyphrases(lines: Iterable[str]) -> list[KeyphraseEntry]:
    """Parse ``phrase<TAB>confidence`` lines."""
    entries = []
    for number, text in _content_lines(lines):
        parts = text.split("\t")
        if len(parts) != 2:
            raise ParseError(f"line {number}: expected 'phrase<TAB>confidence'")
        phrase = parts[0].strip()
        try:
            confidence = float(parts[1])
        except ValueError:
            raise ParseError(
                f"line {number}: confidence {parts[1]!r} is not a number"
            ) from None
        try:
            entries.append(KeyphraseEntry(phrase=phrase, confidence=confidence))
        except DataError as exc:
            raise ParseError(f"line {number}: {exc}") from None
    return entries


def load_keyphrases(path: str) -> list[KeyphraseEntry]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_keyphrases(handle)


def write_keyphrases(entries: Sequence[KeyphraseEntry], stream: TextIO) -> None:
    for entry in entries:
        stream.write(f"{entry.phrase}\t{entry.confidence!r}\n")


# -- article content sidecar ------------------------------------------------

_BODY_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}


def _escape_body(body: str) -> str:
    out = body.replace("\\", "\\\\")
    return out.replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")


def _unescape_body(raw: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "\\" and i + 1 < len(raw):
            nxt = raw[i + 1]
            mapped = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt)
            if mapped is not None:
                out.append(mapped)
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def parse_content(lines: Iterable[str]) -> dict[int, ArticleContent]:
    """Parse ``news_id<TAB>url<TAB>body`` sidecar lines (body is escaped)."""
    contents: dict[int, ArticleContent] = {}
    for number, raw in enumerate(lines, start=1):
        text = raw.rstrip("\r\n")
        if not text.strip() or text.startswith("#"):
            continue
        parts = text.split("\t")
        if len(parts) != 3:
            raise ParseError(f"line {number}: expected 'news_id<TAB>url<TAB>body'")
        try:
            news_id = int(parts[0])
        except ValueError:
            raise ParseError(
                f"line {number}: news_id {parts[0]!r} is not an integer"
            ) from None
        url = parts[1] or None
        contents[news_id] = ArticleContent(
            news_id=news_id, body=_unescape_body(parts[2]), url=url
        )
    return contents


def load_content(path: str) -> dict[int, ArticleContent]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_content(handle)


def write_content(contents: Mapping[int, ArticleContent], stream: TextIO) -> None:
    for news_id in contents:
        item = contents[news_id]
        url = item.url or ""
        if "\t" in url or "\n" in url or "\r" in url:
            raise DataError(f"url of news_id {news_id} contains a separator")
        stream.write(f"{item.news_id}\t{url}\t{_escape_body(item.body)}\n")
