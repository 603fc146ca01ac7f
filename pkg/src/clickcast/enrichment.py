"""Enrichment lookups: title search hits and social share counters.

Each provider answers a single question per key and may answer "absent",
which is distinct from zero.  Fixture providers read a tab-separated file
once and never open a socket, so offline runs are fully deterministic.
Live providers speak a tiny HTTP GET protocol and degrade to absent (with
a logged warning) on any failure.  An append-only cache keeps one file per
provider kind so repeated runs skip the network entirely.
"""

from __future__ import annotations

import datetime as dt
import logging
import os
import tempfile
import urllib.error
import urllib.parse
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Protocol

from .errors import ConfigError, DataError, ParseError
from .records import ArticleContent, Dataset, SocialMetadata

__all__ = [
    "EnrichmentCache",
    "EnrichmentRecord",
    "FixtureSocialProvider",
    "FixtureTitleHitsProvider",
    "LiveSocialProvider",
    "LiveTitleHitsProvider",
    "ProviderConfig",
    "enrich_dataset",
    "make_social_provider",
    "make_title_provider",
]

logger = logging.getLogger(__name__)

# Fixture lookups carry a fixed timestamp so offline runs are byte-stable.
FIXTURE_EPOCH = dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc)

_MODES = ("fixture", "live", "fixture-then-live")


@dataclass(frozen=True)
class EnrichmentRecord:
    """Enrichment for one link: either part may be present."""

    key: str
    title_hits: int | None
    social: SocialMetadata | None
    fetched_at: dt.datetime

    def __post_init__(self) -> None:
        if self.title_hits is None and self.social is None:
            raise DataError("enrichment record carries neither hits nor social data")
        if self.title_hits is not None and self.title_hits < 0:
            raise DataError(f"title_hits must be >= 0, got {self.title_hits}")


@dataclass(frozen=True)
class ProviderConfig:
    mode: str
    fixture_path: str | None = None
    endpoint_url: str | None = None
    timeout_seconds: float = 10.0
    max_concurrent_requests: int = 1
    retry_count: int = 0

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ConfigError(f"unknown provider mode {self.mode!r}")
        if self.mode in ("fixture", "fixture-then-live") and not self.fixture_path:
            raise ConfigError(f"mode {self.mode!r} requires fixture_path")
        if self.mode in ("live", "fixture-then-live") and not self.endpoint_url:
            raise ConfigError(f"mode {self.mode!r} requires endpoint_url")
        if self.timeout_seconds <= 0:
            raise ConfigError("timeout_seconds must be positive")
        if self.max_concurrent_requests < 1:
            raise ConfigError("max_concurrent_requests must be >= 1")
        if self.retry_count < 0:
            raise ConfigError("retry_count must be >= 0")


class Provider(Protocol):
    def lookup(self, key: str) -> object | None: ...


def _load_fixture(path: str, n_value_columns: int) -> dict[str, tuple[int, ...]]:
    table: dict[str, tuple[int, ...]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            text = raw.rstrip("\r\n")
            if not text.strip() or text.startswith("#"):
                continue
            parts = text.split("\t")
            if len(parts) != 1 + n_value_columns:
                raise ParseError(
                    f"{path}: line {number}: expected {1 + n_value_columns} columns"
                )
            try:
                counts = tuple(int(p) for p in parts[1:])
            except ValueError:
                raise ParseError(
                    f"{path}: line {number}: counts must be integers"
                ) from None
            if any(c < 0 for c in counts):
                raise DataError(f"{path}: line {number}: counts must be >= 0")
            table[parts[0]] = counts
    return table


class FixtureTitleHitsProvider:
    """Title search hits from a ``title<TAB>count`` fixture file."""

    def __init__(self, path: str):
        self._table = _load_fixture(path, 1)

    def lookup(self, key: str) -> int | None:
        row = self._table.get(key)
        return row[0] if row is not None else None


class FixtureSocialProvider:
    """Social counters from a ``key<TAB>shares<TAB>likes<TAB>comments<TAB>total`` file."""

    def __init__(self, path: str):
        self._table = _load_fixture(path, 4)

    def lookup(self, key: str) -> SocialMetadata | None:
        row = self._table.get(key)
        if row is None:
            return None
        return SocialMetadata(shares=row[0], likes=row[1], comments=row[2], total=row[3])


def _http_get(endpoint_url: str, key: str, timeout: float, retries: int) -> str | None:
    joiner = "&" if "?" in endpoint_url else "?"
    url = endpoint_url + joiner + "q=" + urllib.parse.quote(key, safe="")
    for attempt in range(retries + 1):
        try:
            with urllib.request.urlopen(url, timeout=timeout) as response:
                return response.read().decode("utf-8")
        except (urllib.error.URLError, OSError, ValueError) as exc:
            if attempt == retries:
                logger.warning("enrichment lookup failed for %r: %s", key, exc)
                return None
    return None


class LiveTitleHitsProvider:
    """Live hit counts: GET endpoint?q=<key>, body is one integer."""

    def __init__(self, endpoint_url: str, timeout_seconds: float = 10.0, retry_count: int = 0):
        self.endpoint_url = endpoint_url
        self.timeout_seconds = timeout_seconds
        self.retry_count = retry_count

    def lookup(self, key: str) -> int | None:
        body = _http_get(self.endpoint_url, key, self.timeout_seconds, self.retry_count)
        if body is None:
            return None
        try:
            value = int(body.strip())
        except ValueError:
            logger.warning("malformed hit count %r for key %r", body.strip(), key)
            return None
        if value < 0:
            logger.warning("negative hit count for key %r", key)
            return None
        return value


class LiveSocialProvider:
    """Live social counters: body is four whitespace-separated integers."""

    def __init__(self, endpoint_url: str, timeout_seconds: float = 10.0, retry_count: int = 0):
        self.endpoint_url = endpoint_url
        self.timeout_seconds = timeout_seconds
        self.retry_count = retry_count

    def lookup(self, key: str) -> SocialMetadata | None:
        body = _http_get(self.endpoint_url, key, self.timeout_seconds, self.retry_count)
        if body is None:
            return None
        parts = body.split()
        if len(parts) != 4:
            logger.warning("malformed social record for key %r", key)
            return None
        try:
            shares, likes, comments, total = (int(p) for p in parts)
            return SocialMetadata(shares=shares, likes=likes, comments=comments, total=total)
        except (ValueError, DataError):
            logger.warning("malformed social record for key %r", key)
            return None


class _ChainProvider:
    """Try one provider, fall back to another on absent."""

    def __init__(self, first: Provider, second: Provider):
        self.first = first
        self.second = second

    def lookup(self, key: str):
        found = self.first.lookup(key)
        return found if found is not None else self.second.lookup(key)


def make_title_provider(config: ProviderConfig):
    if config.mode == "fixture":
        return FixtureTitleHitsProvider(config.fixture_path)
    live = LiveTitleHitsProvider(
        config.endpoint_url, config.timeout_seconds, config.retry_count
    )
    if config.mode == "live":
        return live
    return _ChainProvider(FixtureTitleHitsProvider(config.fixture_path), live)


def make_social_provider(config: ProviderConfig):
    if config.mode == "fixture":
        return FixtureSocialProvider(config.fixture_path)
    live = LiveSocialProvider(
        config.endpoint_url, config.timeout_seconds, config.retry_count
    )
    if config.mode == "live":
        return live
    return _ChainProvider(FixtureSocialProvider(config.fixture_path), live)


class EnrichmentCache:
    """Append-friendly cache, one file per provider kind.

    Rows mirror the fixture columns plus a ``fetched_at`` timestamp; when a
    key appears more than once the last row wins.  ``flush`` rewrites each
    file atomically (write to a temp file, then rename into place).
    """

    TITLE_FILE = "title_hits.cache"
    SOCIAL_FILE = "social.cache"

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self._titles: dict[str, tuple[int, dt.datetime]] = {}
        self._social: dict[str, tuple[SocialMetadata, dt.datetime]] = {}
        self._load()

    def _path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    @staticmethod
    def _parse_time(raw: str, where: str) -> dt.datetime:
        try:
            return dt.datetime.fromisoformat(raw)
        except ValueError:
            raise ParseError(f"{where}: bad fetched_at timestamp {raw!r}") from None

    def _load(self) -> None:
        path = self._path(self.TITLE_FILE)
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as handle:
                for number, raw in enumerate(handle, start=1):
                    text = raw.rstrip("\r\n")
                    if not text.strip():
                        continue
                    parts = text.split("\t")
                    if len(parts) != 3:
                        raise ParseError(f"{path}: line {number}: expected 3 columns")
                    fetched = self._parse_time(parts[2], f"{path}: line {number}")
                    self._titles[parts[0]] = (int(parts[1]), fetched)
        path = self._path(self.SOCIAL_FILE)
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as handle:
                for number, raw in enumerate(handle, start=1):
                    text = raw.rstrip("\r\n")
                    if not text.strip():
                        continue
                    parts = text.split("\t")
                    if len(parts) != 6:
                        raise ParseError(f"{path}: line {number}: expected 6 columns")
                    fetched = self._parse_time(parts[5], f"{path}: line {number}")
                    social = SocialMetadata(
                        shares=int(parts[1]),
                        likes=int(parts[2]),
                        comments=int(parts[3]),
                        total=int(parts[4]),
                    )
                    self._social[parts[0]] = (social, fetched)

    def get_title_hits(self, key: str) -> tuple[int, dt.datetime] | None:
        return self._titles.get(key)

    def get_social(self, key: str) -> tuple[SocialMetadata, dt.datetime] | None:
        return self._social.get(key)

    def put_title_hits(self, key: str, value: int, fetched_at: dt.datetime) -> None:
        self._titles[key] = (value, fetched_at)

    def put_social(self, key: str, value: SocialMetadata, fetched_at: dt.datetime) -> None:
        self._social[key] = (value, fetched_at)

    def flush(self) -> None:
        self._write(
            self.TITLE_FILE,
            (
                f"{key}\t{value}\t{fetched.isoformat()}\n"
                for key, (value, fetched) in self._titles.items()
            ),
        )
        self._write(
            self.SOCIAL_FILE,
            (
                f"{key}\t{s.shares}\t{s.likes}\t{s.comments}\t{s.total}\t{fetched.isoformat()}\n"
                for key, (s, fetched) in self._social.items()
            ),
        )

    def _write(self, name: str, lines: Iterable[str]) -> None:
        target = self._path(name)
        handle = tempfile.NamedTemporaryFile(
            "w", encoding="utf-8", dir=self.directory, delete=False
        )
        try:
            with handle:
                for line in lines:
                    handle.write(line)
            os.replace(handle.name, target)
        except BaseException:
            if os.path.exists(handle.name):
                os.unlink(handle.name)
            raise


def _now() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc)


def _is_fixture(provider: object) -> bool:
    return isinstance(provider, (FixtureTitleHitsProvider, FixtureSocialProvider))


def _fetch_all(
    keys: list[str], lookup: Callable[[str], object | None], max_concurrent: int
) -> dict[str, object | None]:
    if max_concurrent > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=max_concurrent) as pool:
            found = list(pool.map(lookup, keys))
        return dict(zip(keys, found))
    return {key: lookup(key) for key in keys}


def enrich_dataset(
    dataset: Dataset,
    title_provider: Provider | None = None,
    social_provider: Provider | None = None,
    cache: EnrichmentCache | None = None,
    content: Mapping[int, ArticleContent] | None = None,
    max_concurrent: int = 1,
) -> dict[int, EnrichmentRecord]:
    """Resolve enrichment for every distinct link of a dataset.

    Title hits are looked up by title, social counters by the article URL
    when the content sidecar supplies one, else by the news id.  Each
    distinct key is looked up at most once per run; the cache, when given,
    is consulted first and extended with fresh results.
    """
    titles: dict[int, str] = {}
    social_keys: dict[int, str] = {}
    for entry in dataset:
        if entry.news_id in titles:
            continue
        titles[entry.news_id] = entry.title
        item = content.get(entry.news_id) if content else None
        social_keys[entry.news_id] = (
            item.url if item is not None and item.url else str(entry.news_id)
        )

    hits: dict[str, tuple[int, dt.datetime]] = {}
    if title_provider is not None:
        wanted = sorted(set(titles.values()))
        missing = []
        for key in wanted:
            cached = cache.get_title_hits(key) if cache else None
            if cached is not None:
                hits[key] = cached
            else:
                missing.append(key)
        stamp = FIXTURE_EPOCH if _is_fixture(title_provider) else _now()
        fetched = _fetch_all(missing, title_provider.lookup, max_concurrent)
        for key in missing:
            value = fetched[key]
            if value is None:
                continue
            hits[key] = (value, stamp)
            if cache:
                cache.put_title_hits(key, value, stamp)

    socials: dict[str, tuple[SocialMetadata, dt.datetime]] = {}
    if social_provider is not None:
        wanted = sorted(set(social_keys.values()))
        missing = []
        for key in wanted:
            cached = cache.get_social(key) if cache else None
            if cached is not None:
                socials[key] = cached
            else:
                missing.append(key)
        stamp = FIXTURE_EPOCH if _is_fixture(social_provider) else _now()
        fetched = _fetch_all(missing, social_provider.lookup, max_concurrent)
        for key in missing:
            value = fetched[key]
            if value is None:
                continue
            socials[key] = (value, stamp)
            if cache:
                cache.put_social(key, value, stamp)

    if cache is not None:
        cache.flush()

    records: dict[int, EnrichmentRecord] = {}
    for news_id, title in titles.items():
        hit = hits.get(title)
        social = socials.get(social_keys[news_id])
        if hit is None and social is None:
            continue
        stamps = [part[1] for part in (hit, social) if part is not None]
        records[news_id] = EnrichmentRecord(
            key=str(news_id),
            title_hits=hit[0] if hit else None,
            social=social[0] if social else None,
            fetched_at=max(stamps),
        )
    return records
