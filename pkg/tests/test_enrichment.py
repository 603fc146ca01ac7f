"""Enrichment providers, the on-disk cache, and dataset-level resolution."""

from __future__ import annotations

import datetime as dt
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest

from clickcast import (
    ArticleContent,
    DataError,
    EnrichmentCache,
    EnrichmentRecord,
    ParseError,
    ProviderConfig,
    SocialMetadata,
    enrich_dataset,
    make_social_provider,
    make_title_provider,
    parse_dataset,
)
from clickcast.enrichment import (
    FIXTURE_EPOCH,
    FixtureSocialProvider,
    FixtureTitleHitsProvider,
    LiveSocialProvider,
    LiveTitleHitsProvider,
)


class CountingProvider:
    """Wraps a mapping and records every key it is asked for."""

    def __init__(self, table):
        self.table = table
        self.keys_seen = []

    def lookup(self, key):
        self.keys_seen.append(key)
        return self.table.get(key)


@pytest.fixture()
def hits_fixture(tmp_path):
    path = tmp_path / "hits.tsv"
    path.write_text("Barcelona vence\t12\nOutra coisa\t0\n", encoding="utf-8")
    return str(path)


@pytest.fixture()
def social_fixture(tmp_path):
    path = tmp_path / "social.tsv"
    path.write_text("http://ex/1\t3\t10\t2\t15\n42\t1\t1\t0\t2\n", encoding="utf-8")
    return str(path)


class TestFixtureProviders:
    def test_title_hit_and_miss(self, hits_fixture):
        provider = FixtureTitleHitsProvider(hits_fixture)
        assert provider.lookup("Barcelona vence") == 12
        assert provider.lookup("Outra coisa") == 0
        assert provider.lookup("desconhecido") is None

    def test_social_hit_and_miss(self, social_fixture):
        provider = FixtureSocialProvider(social_fixture)
        assert provider.lookup("http://ex/1") == SocialMetadata(3, 10, 2, 15)
        assert provider.lookup("nada") is None

    def test_negative_count_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("x\t-1\n", encoding="utf-8")
        with pytest.raises(DataError):
            FixtureTitleHitsProvider(str(path))

    def test_wrong_column_count_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("x\t1\t2\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 1"):
            FixtureTitleHitsProvider(str(path))

    def test_non_integer_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("x\tmany\n", encoding="utf-8")
        with pytest.raises(ParseError):
            FixtureTitleHitsProvider(str(path))

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "hits.tsv"
        path.write_text("# comment\n\nx\t5\n", encoding="utf-8")
        assert FixtureTitleHitsProvider(str(path)).lookup("x") == 5


class _Handler(BaseHTTPRequestHandler):
    def do_GET(self):
        parsed = urlparse(self.path)
        key = parse_qs(parsed.query).get("q", [""])[0]
        body = self.server.responses.get(key)
        if body is None:
            self.send_response(404)
            self.end_headers()
            return
        payload = body.encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # keep pytest output clean
        pass


@pytest.fixture()
def http_endpoint():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    server.responses = {
        "good title": "7",
        "negative": "-3",
        "garbled": "many hits",
        "social good": "3 10 2 15",
        "social short": "3 10",
    }
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/lookup"
    server.shutdown()
    thread.join()


class TestLiveProviders:
    def test_title_happy_path(self, http_endpoint):
        provider = LiveTitleHitsProvider(http_endpoint, timeout_seconds=5.0)
        assert provider.lookup("good title") == 7

    def test_social_happy_path(self, http_endpoint):
        provider = LiveSocialProvider(http_endpoint, timeout_seconds=5.0)
        assert provider.lookup("social good") == SocialMetadata(3, 10, 2, 15)

    def test_http_error_is_absent_with_warning(self, http_endpoint, caplog):
        provider = LiveTitleHitsProvider(http_endpoint, timeout_seconds=5.0)
        with caplog.at_level(logging.WARNING, logger="clickcast.enrichment"):
            assert provider.lookup("missing key") is None
        assert any("failed" in rec.message for rec in caplog.records)

    def test_unreachable_endpoint_is_absent_with_warning(self, caplog):
        provider = LiveTitleHitsProvider("http://127.0.0.1:1/x", timeout_seconds=0.5)
        with caplog.at_level(logging.WARNING, logger="clickcast.enrichment"):
            assert provider.lookup("anything") is None
        assert any("failed" in rec.message for rec in caplog.records)

    def test_malformed_bodies_are_absent(self, http_endpoint, caplog):
        hits = LiveTitleHitsProvider(http_endpoint, timeout_seconds=5.0)
        social = LiveSocialProvider(http_endpoint, timeout_seconds=5.0)
        with caplog.at_level(logging.WARNING, logger="clickcast.enrichment"):
            assert hits.lookup("garbled") is None
            assert hits.lookup("negative") is None
            assert social.lookup("social short") is None
        assert len(caplog.records) >= 3


class TestProviderConfig:
    def test_unknown_mode(self):
        with pytest.raises(Exception, match="mode"):
            ProviderConfig(mode="psychic")

    def test_fixture_requires_path(self):
        with pytest.raises(Exception, match="fixture_path"):
            ProviderConfig(mode="fixture")

    def test_live_requires_endpoint(self):
        with pytest.raises(Exception, match="endpoint_url"):
            ProviderConfig(mode="live")

    def test_chain_requires_both(self):
        with pytest.raises(Exception):
            ProviderConfig(mode="fixture-then-live", fixture_path="f.tsv")

    def test_bad_numbers(self):
        with pytest.raises(Exception):
            ProviderConfig(mode="live", endpoint_url="http://x", timeout_seconds=0)
        with pytest.raises(Exception):
            ProviderConfig(
                mode="live", endpoint_url="http://x", max_concurrent_requests=0
            )
        with pytest.raises(Exception):
            ProviderConfig(mode="live", endpoint_url="http://x", retry_count=-1)

    def test_factories_pick_fixture_then_live(self, hits_fixture, http_endpoint):
        config = ProviderConfig(
            mode="fixture-then-live",
            fixture_path=hits_fixture,
            endpoint_url=http_endpoint,
            timeout_seconds=5.0,
        )
        provider = make_title_provider(config)
        # Fixture answers win without touching the endpoint...
        assert provider.lookup("Barcelona vence") == 12
        # ...and fixture misses fall through to the live endpoint.
        assert provider.lookup("good title") == 7


class TestEnrichmentRecord:
    def test_needs_at_least_one_part(self):
        with pytest.raises(DataError):
            EnrichmentRecord(
                key="1", title_hits=None, social=None, fetched_at=FIXTURE_EPOCH
            )

    def test_negative_hits_rejected(self):
        with pytest.raises(DataError):
            EnrichmentRecord(
                key="1", title_hits=-1, social=None, fetched_at=FIXTURE_EPOCH
            )

    def test_negative_social_rejected(self):
        with pytest.raises(DataError):
            SocialMetadata(shares=-1, likes=0, comments=0, total=0)


def _dataset(lines):
    return parse_dataset(lines)


THREE_HOURS_ONE_LINK = [
    "[1] [2011-03-01 10:00:00] [1] [geral] [manchete] [7] [30] [Barcelona vence]",
    "[2] [2011-03-01 11:00:00] [1] [geral] [manchete] [7] [20] [Barcelona vence]",
    "[3] [2011-03-01 12:00:00] [1] [geral] [headlines] [7] [10] [Barcelona vence]",
]


class TestEnrichDataset:
    def test_no_providers_no_records(self):
        assert enrich_dataset(_dataset(THREE_HOURS_ONE_LINK)) == {}

    def test_duplicate_links_looked_up_once(self):
        provider = CountingProvider({"Barcelona vence": 12})
        records = enrich_dataset(
            _dataset(THREE_HOURS_ONE_LINK), title_provider=provider
        )
        assert provider.keys_seen == ["Barcelona vence"]
        assert records[7].title_hits == 12

    def test_social_key_prefers_url(self):
        provider = CountingProvider({})
        content = {7: ArticleContent(news_id=7, body="x", url="http://ex/7")}
        enrich_dataset(
            _dataset(THREE_HOURS_ONE_LINK),
            social_provider=provider,
            content=content,
        )
        assert provider.keys_seen == ["http://ex/7"]

    def test_social_key_falls_back_to_news_id(self):
        provider = CountingProvider({})
        enrich_dataset(_dataset(THREE_HOURS_ONE_LINK), social_provider=provider)
        assert provider.keys_seen == ["7"]

    def test_fixture_records_stamped_with_epoch(self, hits_fixture):
        provider = FixtureTitleHitsProvider(hits_fixture)
        records = enrich_dataset(
            _dataset(THREE_HOURS_ONE_LINK), title_provider=provider
        )
        assert records[7].fetched_at == FIXTURE_EPOCH

    def test_absent_everywhere_yields_no_record(self):
        records = enrich_dataset(
            _dataset(THREE_HOURS_ONE_LINK), title_provider=CountingProvider({})
        )
        assert records == {}

    def test_partial_parts_allowed(self, hits_fixture):
        records = enrich_dataset(
            _dataset(THREE_HOURS_ONE_LINK),
            title_provider=FixtureTitleHitsProvider(hits_fixture),
            social_provider=CountingProvider({}),
        )
        assert records[7].title_hits == 12
        assert records[7].social is None

    def test_concurrent_fetch_matches_serial(self):
        lines = [
            f"[{i}] [2011-03-01 10:00:00] [1] [geral] [manchete] [{i}] [5] [title {i}]"
            for i in range(1, 9)
        ]
        table = {f"title {i}": i for i in range(1, 9)}
        serial = enrich_dataset(
            _dataset(lines), title_provider=CountingProvider(table), max_concurrent=1
        )
        threaded = enrich_dataset(
            _dataset(lines), title_provider=CountingProvider(table), max_concurrent=4
        )
        assert {k: r.title_hits for k, r in serial.items()} == {
            k: r.title_hits for k, r in threaded.items()
        }


class TestCache:
    def test_round_trip(self, tmp_path):
        when = dt.datetime(2026, 8, 15, 12, 0, tzinfo=dt.timezone.utc)
        cache = EnrichmentCache(str(tmp_path / "cache"))
        cache.put_title_hits("t", 5, when)
        cache.put_social("u", SocialMetadata(1, 2, 3, 6), when)
        cache.flush()
        again = EnrichmentCache(str(tmp_path / "cache"))
        assert again.get_title_hits("t") == (5, when)
        assert again.get_social("u") == (SocialMetadata(1, 2, 3, 6), when)

    def test_warm_cache_skips_provider(self, tmp_path, hits_fixture):
        cache_dir = str(tmp_path / "cache")
        dataset = _dataset(THREE_HOURS_ONE_LINK)
        first = enrich_dataset(
            dataset,
            title_provider=FixtureTitleHitsProvider(hits_fixture),
            cache=EnrichmentCache(cache_dir),
        )
        cold = CountingProvider({})
        second = enrich_dataset(
            dataset, title_provider=cold, cache=EnrichmentCache(cache_dir)
        )
        assert cold.keys_seen == []
        assert second == first

    def test_malformed_cache_rejected(self, tmp_path):
        cache_dir = tmp_path / "cache"
        cache_dir.mkdir()
        (cache_dir / EnrichmentCache.TITLE_FILE).write_text(
            "key\t5\n", encoding="utf-8"
        )
        with pytest.raises(ParseError):
            EnrichmentCache(str(cache_dir))

    def test_bad_timestamp_rejected(self, tmp_path):
        cache_dir = tmp_path / "cache"
        cache_dir.mkdir()
        (cache_dir / EnrichmentCache.TITLE_FILE).write_text(
            "key\t5\tnot-a-time\n", encoding="utf-8"
        )
        with pytest.raises(ParseError):
            EnrichmentCache(str(cache_dir))
