"""Seeded synthetic click-log generator.

Generates a portal-style hourly click log whose distributional shape — not
its absolute numbers — matches real news traffic: a long-tailed per-link
popularity (log-normal base), a daily cycle with morning / lunch / late-
evening peaks, novelty decay with a configurable half-life, and placement
(subsection) multipliers that fade as links get demoted from the front
boxes.  Titles are built from a word pool seeded with a keyphrase list;
each keyphrase carries a hidden popularity multiplier, so keyphrase-count
features genuinely explain part of the target.

The generator emits a full working set: the dataset itself plus the side
files a pipeline needs (keyphrase list with confidences, article bodies,
title-hit and social-counter fixtures, and a ready-to-run config).  All
draws come from one seeded stream in a fixed order, so identical params
produce byte-identical files.
"""

from __future__ import annotations

import datetime as dt
import io
import os
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import yaml

from .model_io import atomic_write_text
from .records import (
    ArticleContent,
    Dataset,
    KeyphraseEntry,
    LinkHourEntry,
    SocialMetadata,
    write_content,
    write_dataset,
    write_keyphrases,
)

__all__ = [
    "BUNDLE_FILES",
    "DEFAULT_HOURLY_MULTIPLIERS",
    "DEFAULT_SUBSECTION_MULTIPLIERS",
    "SynthBundle",
    "SynthParams",
    "synth_bundle",
    "synth_generate",
    "write_bundle",
]

# Daily traffic cycle: quiet overnight, peaks at 09, 12, and 22.
DEFAULT_HOURLY_MULTIPLIERS: tuple[float, ...] = (
    0.35, 0.25, 0.20, 0.18, 0.20, 0.30,  # 00-05
    0.50, 0.75, 1.00, 1.35, 1.15, 1.20,  # 06-11
    1.30, 1.10, 1.05, 1.00, 1.00, 1.00,  # 12-17
    0.95, 0.90, 0.95, 1.05, 1.25, 0.80,  # 18-23
)

# Placement value: front-page box worth the most, page footer the least.
DEFAULT_SUBSECTION_MULTIPLIERS: Mapping[str, float] = {
    "manchete": 3.0,
    "headlines": 1.6,
    "related": 1.0,
    "null": 0.7,
    "footer": 0.4,
}

# Demotion ladder: every full day a link slides one rung down.
_DEMOTION_LADDER = ("manchete", "headlines", "related", "null", "footer")

_EPOCH = dt.datetime(2021, 6, 7, 0, 0, 0)  # a Monday

_CHANNELS = (1, 2, 3)
_CHANNEL_WEIGHTS = (0.5, 0.3, 0.2)
_SECTIONS = ("geral", "desporto", "economia", "tecnologia", "vida")
_SECTION_WEIGHTS = (0.35, 0.20, 0.15, 0.15, 0.15)
_START_SUBSECTIONS = ("manchete", "headlines", "related", "null")
_START_WEIGHTS = (0.15, 0.30, 0.35, 0.20)

# Phrases that carry a hidden popularity multiplier (confidence >= 0.5 in
# the emitted keyphrase file).
SIGNAL_PHRASES: tuple[str, ...] = (
    "crise financeira",
    "eleições legislativas",
    "festival de verão",
    "mercado imobiliário",
    "seleção nacional",
    "taxa de juro",
    "liga dos campeões",
    "salário mínimo",
    "greve geral",
    "energia solar",
    "inteligência artificial",
    "banco central",
    "campeonato do mundo",
    "vacinação infantil",
    "incêndios florestais",
    "orçamento do estado",
    "bolsa de lisboa",
    "novo estádio",
    "rede social",
    "telemóvel dobrável",
    "dieta mediterrânica",
    "turismo rural",
    "habitação jovem",
    "transportes públicos",
    "festival de cinema",
    "prémio literário",
    "derby lisboeta",
    "chuva intensa",
    "onda de calor",
    "combustíveis fósseis",
    "startup tecnológica",
    "reforma antecipada",
    "crédito à habitação",
    "mercado de transferências",
)

# Below-threshold phrases: present in the keyphrase file (confidence < 0.5)
# and sprinkled through bodies, but with no popularity effect.
DECOY_PHRASES: tuple[str, ...] = (
    "nota rápida",
    "edição impressa",
    "hora local",
    "fonte oficial",
    "resumo semanal",
    "leitura recomendada",
    "versão integral",
    "atualização contínua",
    "registo fotográfico",
    "arquivo histórico",
)

_FILLER_WORDS: tuple[str, ...] = (
    "governo", "anuncia", "novas", "medidas", "depois", "decisão", "sobre",
    "projeto", "nacional", "cidade", "região", "estudo", "revela", "aumento",
    "queda", "preços", "empresa", "apresenta", "resultados", "durante",
    "semana", "ministro", "defende", "plano", "contra", "futuro", "acordo",
    "entre", "partes", "milhões", "investimento", "obras", "hospital",
    "escola", "universidade", "relatório", "aponta", "crescimento", "setor",
    "autarquia", "aprova", "proposta", "debate", "público", "análise",
    "especialistas", "alertam", "possível", "mudança",
)


@dataclass(frozen=True)
class SynthParams:
    """Knobs of the generative model; defaults give ~13k link-hour rows."""

    n_links: int = 1217
    days: int = 15
    lognormal_mean: float = 3.0
    lognormal_sigma: float = 1.2
    hourly_multipliers: tuple[float, ...] = DEFAULT_HOURLY_MULTIPLIERS
    half_life_hours: float = 24.0
    subsection_multipliers: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_SUBSECTION_MULTIPLIERS)
    )
    phrase_effect_sigma: float = 0.8
    mean_extra_hours: float = 9.8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_links < 1:
            raise ValueError("n_links must be >= 1")
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if len(self.hourly_multipliers) != 24:
            raise ValueError("hourly_multipliers must have exactly 24 entries")
        if any(m <= 0 for m in self.hourly_multipliers):
            raise ValueError("hourly multipliers must be positive")
        if self.half_life_hours <= 0:
            raise ValueError("half_life_hours must be positive")
        unknown = set(self.subsection_multipliers) - set(_DEMOTION_LADDER)
        if unknown:
            raise ValueError(f"unknown subsection(s): {sorted(unknown)}")
        missing = set(_DEMOTION_LADDER) - set(self.subsection_multipliers)
        if missing:
            raise ValueError(f"subsection multiplier missing for: {sorted(missing)}")
        if any(m <= 0 for m in self.subsection_multipliers.values()):
            raise ValueError("subsection multipliers must be positive")
        if self.lognormal_sigma <= 0:
            raise ValueError("lognormal_sigma must be positive")
        if self.phrase_effect_sigma < 0:
            raise ValueError("phrase_effect_sigma must be >= 0")
        if self.mean_extra_hours < 0:
            raise ValueError("mean_extra_hours must be >= 0")


@dataclass(frozen=True)
class SynthBundle:
    """A generated dataset plus every side file a pipeline run needs."""

    dataset: Dataset
    keyphrases: tuple[KeyphraseEntry, ...]
    content: Mapping[int, ArticleContent]
    title_hits: Mapping[str, int]
    social: Mapping[str, SocialMetadata]
    params: SynthParams


def _pick(rng: np.random.Generator, options, weights) -> object:
    return options[int(rng.choice(len(options), p=weights))]


def _make_title(
    rng: np.random.Generator,
    phrases: tuple[str, ...],
    taken: set[str],
) -> str:
    """A unique headline embedding the link's phrases among filler words."""
    while True:
        words: list[str] = []
        words.extend(phrases[0].split())
        n_filler = int(rng.integers(2, 5))
        for _ in range(n_filler):
            words.append(str(rng.choice(_FILLER_WORDS)))
        for phrase in phrases[1:]:
            words.extend(phrase.split())
        words.append(str(rng.choice(_FILLER_WORDS)))
        title = " ".join(words)
        title = title[0].upper() + title[1:]
        if title not in taken:
            taken.add(title)
            return title


def _make_body(
    rng: np.random.Generator, title: str, phrases: tuple[str, ...]
) -> str:
    """Article body repeating the link's phrases a variable number of times."""
    parts: list[str] = [title + "."]
    for phrase in phrases:
        repeats = int(rng.integers(1, 4)) - 1  # 0..2 extra mentions
        for _ in range(repeats):
            lead = rng.choice(_FILLER_WORDS, size=3)
            parts.append(f"{' '.join(lead)} {phrase}.")
    if rng.random() < 0.3:
        decoy = str(rng.choice(DECOY_PHRASES))
        parts.append(f"em {decoy} desta edição.")
    tail = rng.choice(_FILLER_WORDS, size=int(rng.integers(8, 20)))
    parts.append(" ".join(tail) + ".")
    return " ".join(parts)


def synth_bundle(params: SynthParams = SynthParams()) -> SynthBundle:
    """Generate the dataset and all side files from one seeded stream."""
    rng = np.random.default_rng(params.seed)

    phrase_multipliers = {
        phrase: float(np.exp(rng.normal(0.0, params.phrase_effect_sigma)))
        for phrase in SIGNAL_PHRASES
    }
    keyphrases = [
        KeyphraseEntry(phrase=p, confidence=float(rng.uniform(0.5, 0.95)))
        for p in SIGNAL_PHRASES
    ] + [
        KeyphraseEntry(phrase=p, confidence=float(rng.uniform(0.05, 0.45)))
        for p in DECOY_PHRASES
    ]

    taken_titles: set[str] = set()
    raw_entries: list[tuple[dt.datetime, int, int, str, str, int, str]] = []
    content: dict[int, ArticleContent] = {}
    title_hits: dict[str, int] = {}
    social: dict[str, SocialMetadata] = {}

    ladder_index = {name: i for i, name in enumerate(_DEMOTION_LADDER)}
    for link in range(params.n_links):
        news_id = link + 1
        channel = int(_pick(rng, _CHANNELS, _CHANNEL_WEIGHTS))
        section = str(_pick(rng, _SECTIONS, _SECTION_WEIGHTS))
        n_phrases = int(rng.integers(1, 4))
        chosen = rng.choice(len(SIGNAL_PHRASES), size=n_phrases, replace=False)
        phrases = tuple(SIGNAL_PHRASES[int(i)] for i in chosen)
        title = _make_title(rng, phrases, taken_titles)

        raw_base = float(rng.lognormal(params.lognormal_mean, params.lognormal_sigma))
        base = raw_base
        for phrase in phrases:
            base *= phrase_multipliers[phrase]

        pub_day = int(rng.integers(0, params.days))
        pub_hour = int(rng.integers(0, 24))
        published = _EPOCH + dt.timedelta(days=pub_day, hours=pub_hour)
        start_sub = str(_pick(rng, _START_SUBSECTIONS, _START_WEIGHTS))
        lifetime = 1 + int(rng.poisson(params.mean_extra_hours))

        has_url = bool(rng.random() < 0.8)
        url = f"http://noticias.example/{news_id}" if has_url else None
        has_content = bool(rng.random() < 0.95)
        if has_content:
            content[news_id] = ArticleContent(
                news_id=news_id, body=_make_body(rng, title, phrases), url=url
            )

        total_clicks = 0
        start_level = ladder_index[start_sub]
        for age in range(lifetime):
            stamp = published + dt.timedelta(hours=age)
            level = min(start_level + age // 24, len(_DEMOTION_LADDER) - 1)
            subsection = _DEMOTION_LADDER[level]
            expected = (
                base
                * params.hourly_multipliers[stamp.hour]
                * float(params.subsection_multipliers[subsection])
                * 2.0 ** (-age / params.half_life_hours)
            )
            clicks = max(1, int(rng.poisson(expected)))
            total_clicks += clicks
            raw_entries.append(
                (stamp, channel, news_id, section, subsection, clicks, title)
            )

        # Fixtures are coarse, weak side channels rather than readouts of
        # realized traffic.  Hit counts are small integers with heavy ties
        # across links and only a damped power of pre-phrase popularity
        # behind them; social counters are driven purely by an independent
        # per-link buzz factor, so the keyphrase columns remain the only
        # strong carrier of per-link signal.
        if rng.random() < 0.97:
            hits_noise = float(rng.lognormal(0.0, 0.6))
            title_hits[title] = int(rng.poisson(1.1 * raw_base**0.1 * hits_noise))
        if rng.random() < 0.35:
            buzz = float(rng.lognormal(0.0, 1.2))
            shares = int(rng.poisson(1.5 * buzz))
            likes = int(rng.poisson(2.5 * buzz))
            comments = int(rng.poisson(0.5 * buzz))
            key = url if (has_content and url) else str(news_id)
            social[key] = SocialMetadata(
                shares=shares, likes=likes, comments=comments,
                total=shares + likes + comments,
            )

    raw_entries.sort(key=lambda r: (r[0], r[2]))
    entries = [
        LinkHourEntry(
            line_number=i,
            timestamp=stamp,
            channel_id=channel,
            section=section,
            subsection=subsection,
            news_id=news_id,
            clicks=clicks,
            title=title,
        )
        for i, (stamp, channel, news_id, section, subsection, clicks, title) in enumerate(
            raw_entries, start=1
        )
    ]
    return SynthBundle(
        dataset=Dataset(entries),
        keyphrases=tuple(keyphrases),
        content=content,
        title_hits=title_hits,
        social=social,
        params=params,
    )


def synth_generate(params: SynthParams = SynthParams()) -> Dataset:
    """Generate just the dataset (same stream as the full bundle)."""
    return synth_bundle(params).dataset


BUNDLE_FILES = {
    "dataset": "dataset.txt",
    "keyphrases": "keyphrases.tsv",
    "content": "content.tsv",
    "title_hits": "title_hits.tsv",
    "social": "social.tsv",
    "config": "config.yaml",
}


def _render(write, payload) -> str:
    buffer = io.StringIO()
    write(payload, buffer)
    return buffer.getvalue()


def write_bundle(bundle: SynthBundle, out_dir: str) -> dict[str, str]:
    """Write every bundle file into a directory; returns name -> path.

    The emitted config.yaml references the side files by relative path and
    selects fixture enrichment providers, so the directory is a complete,
    portable pipeline input.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {key: os.path.join(out_dir, name) for key, name in BUNDLE_FILES.items()}

    atomic_write_text(paths["dataset"], _render(write_dataset, bundle.dataset))
    atomic_write_text(paths["keyphrases"], _render(write_keyphrases, bundle.keyphrases))
    atomic_write_text(paths["content"], _render(write_content, bundle.content))
    hits_lines = [f"{title}\t{count}" for title, count in sorted(bundle.title_hits.items())]
    atomic_write_text(paths["title_hits"], "\n".join(hits_lines) + "\n")
    social_lines = [
        f"{key}\t{s.shares}\t{s.likes}\t{s.comments}\t{s.total}"
        for key, s in sorted(bundle.social.items())
    ]
    atomic_write_text(paths["social"], "\n".join(social_lines) + "\n")

    config = {
        "feature_groups": ["base", "f1", "f2", "f3", "f4", "f5"],
        "keyphrases_path": BUNDLE_FILES["keyphrases"],
        "content_path": BUNDLE_FILES["content"],
        "enrichment": {
            "title_hits": {
                "mode": "fixture",
                "fixture_path": BUNDLE_FILES["title_hits"],
            },
            "social": {"mode": "fixture", "fixture_path": BUNDLE_FILES["social"]},
            "cache_dir": "cache",
        },
        "target_scale": "log10",
        "outlier_policy": "all_to_one",
        "cv_folds": 10,
        "seed": bundle.params.seed,
    }
    atomic_write_text(paths["config"], yaml.safe_dump(config, sort_keys=False))
    return paths
