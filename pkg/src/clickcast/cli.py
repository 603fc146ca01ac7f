"""Command-line front end.

Subcommands: ``synth`` (generate a dataset or a full working directory),
``enrich`` (populate the enrichment cache), ``train`` (fit and serialize a
pipeline), ``predict`` (score a dataset file), ``evaluate`` (score a
predictions file against truths), ``cv`` (cross-validate), and ``ablate``
(the cumulative feature-group ladder).

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 I/O
error — each failure prints a one-line diagnostic on stderr.  Every output
file is written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import sys
from typing import Optional

import numpy as np

from .errors import DataError, ParseError
from .model_io import atomic_write_text
from .pipeline import (
    EnrichmentData,
    PipelineConfig,
    cross_validate,
    gather_enrichment,
    load_config,
    load_pipeline,
    predict_pipeline,
    run_ablation,
    train_pipeline,
)
from .evaluation import EvalReport, compute_metrics
from .records import Dataset, load_dataset, write_dataset
from .synth import SynthParams, synth_bundle, write_bundle

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="clickcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(
        dest="command", required=True, metavar="COMMAND", parser_class=_Parser
    )

    p = sub.add_parser("synth", help="generate a synthetic click log")
    p.add_argument("--out", help="write just the dataset file here")
    p.add_argument("--out-dir", help="write the dataset plus all side files here")
    p.add_argument("--links", type=int, help="number of distinct links")
    p.add_argument("--days", type=int, help="publication window in days")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("enrich", help="populate the enrichment cache")
    p.add_argument("--config", required=True, help="pipeline config file")
    p.add_argument("--data", required=True, help="dataset file")
    p.set_defaults(handler=_cmd_enrich)

    p = sub.add_parser("train", help="fit and serialize a pipeline")
    p.add_argument("--config", required=True, help="pipeline config file")
    p.add_argument("--data", required=True, help="training dataset file")
    p.add_argument("--out", required=True, help="pipeline file to write")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("predict", help="score a dataset file")
    p.add_argument("--model", required=True, help="trained pipeline file")
    p.add_argument("--data", required=True, help="dataset file to score")
    p.add_argument("--out", required=True, help="predictions file to write")
    p.add_argument("--config", help="config supplying enrichment providers")
    p.add_argument(
        "--round",
        action="store_true",
        help="round written predictions to whole clicks (output only)",
    )
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser(
        "evaluate", help="score predictions against truths"
    )
    p.add_argument("--data", required=True, help="dataset file with true clicks")
    p.add_argument("--predictions", required=True, help="predictions file")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("cv", help="run k-fold cross-validation")
    p.add_argument("--config", required=True, help="pipeline config file")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(handler=_cmd_cv)

    p = sub.add_parser(
        "ablate", help="cross-validate the feature-group ladder"
    )
    p.add_argument("--config", required=True, help="pipeline config file")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="also write the rows here")
    p.set_defaults(handler=_cmd_ablate)

    return parser


def _load_config_with_seed(path: str, seed: Optional[int]) -> PipelineConfig:
    config = load_config(path)
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    return config


def _report_text(report: EvalReport) -> str:
    return "\n".join(report.human_lines() + report.machine_lines()) + "\n"


def _emit(text: str, out_path: Optional[str]) -> None:
    sys.stdout.write(text)
    if out_path:
        atomic_write_text(out_path, text)


# -- handlers -------------------------------------------------------------------

def _cmd_synth(args) -> int:
    if bool(args.out) == bool(args.out_dir):
        raise _UsageError("synth needs exactly one of --out or --out-dir")
    kwargs = {"seed": args.seed}
    if args.links is not None:
        kwargs["n_links"] = args.links
    if args.days is not None:
        kwargs["days"] = args.days
    params = SynthParams(**kwargs)
    bundle = synth_bundle(params)
    if args.out_dir:
        paths = write_bundle(bundle, args.out_dir)
        print(
            f"wrote {len(bundle.dataset)} link-hour entries "
            f"({params.n_links} links) and side files to {args.out_dir}"
        )
        for name in sorted(paths):
            print(f"  {name}: {paths[name]}")
    else:
        buffer = io.StringIO()
        write_dataset(bundle.dataset, buffer)
        atomic_write_text(args.out, buffer.getvalue())
        print(
            f"wrote {len(bundle.dataset)} link-hour entries "
            f"({params.n_links} links) to {args.out}"
        )
    return 0


def _cmd_enrich(args) -> int:
    config = load_config(args.config)
    if config.title_hits_provider is None and config.social_provider is None:
        raise DataError("config names no enrichment providers to fetch from")
    if not config.cache_dir:
        raise DataError("enrich requires enrichment.cache_dir in the config")
    dataset = load_dataset(args.data)
    data = gather_enrichment(dataset, config)
    with_hits = sum(1 for r in data.records.values() if r.title_hits is not None)
    with_social = sum(1 for r in data.records.values() if r.social is not None)
    print(
        f"enriched {len(dataset.by_news_id)} links: title hits for {with_hits}, "
        f"social counters for {with_social}; cache at {config.cache_dir}"
    )
    return 0


def _cmd_train(args) -> int:
    config = _load_config_with_seed(args.config, args.seed)
    dataset = load_dataset(args.data)
    enrichment = gather_enrichment(dataset, config)
    pipeline = train_pipeline(dataset, enrichment, config)
    pipeline.save(args.out)
    stats = pipeline.stats
    print(
        f"trained on {stats['n_rows']} rows x {stats['n_features']} features "
        f"(max {stats['train_max_clicks']} clicks/hour); pipeline written to {args.out}"
    )
    return 0


def _cmd_predict(args) -> int:
    pipeline = load_pipeline(args.model)
    dataset = load_dataset(args.data)
    if args.config:
        enrichment = gather_enrichment(dataset, load_config(args.config))
    else:
        enrichment = EnrichmentData.empty()
    preds = predict_pipeline(pipeline, dataset, enrichment)
    lines = []
    for entry, value in zip(dataset, preds):
        rendered = str(int(round(value))) if args.round else repr(float(value))
        lines.append(f"{entry.line_number}\t{rendered}")
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {len(lines)} predictions to {args.out}")
    return 0


def _parse_predictions(path: str) -> dict[int, float]:
    out: dict[int, float] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            text = raw.rstrip("\r\n")
            if not text.strip() or text.startswith("#"):
                continue
            parts = text.split("\t")
            if len(parts) != 2:
                raise ParseError(
                    f"{path}: line {number}: expected line_number<TAB>prediction"
                )
            try:
                key = int(parts[0])
                value = float(parts[1])
            except ValueError:
                raise ParseError(
                    f"{path}: line {number}: bad line number or prediction"
                ) from None
            if key in out:
                raise DataError(f"{path}: line {number}: duplicate prediction for row {key}")
            out[key] = value
    return out


def _cmd_evaluate(args) -> int:
    dataset = load_dataset(args.data)
    preds_by_line = _parse_predictions(args.predictions)
    preds = np.zeros(len(dataset), dtype=np.float64)
    for i, entry in enumerate(dataset):
        if entry.line_number not in preds_by_line:
            raise DataError(f"no prediction for dataset row {entry.line_number}")
        preds[i] = preds_by_line.pop(entry.line_number)
    if preds_by_line:
        stray = sorted(preds_by_line)[0]
        raise DataError(f"prediction for unknown dataset row {stray}")
    truths = np.array([e.clicks for e in dataset], dtype=np.float64)
    report = compute_metrics(preds, truths)
    _emit(_report_text(report), args.out)
    return 0


def _cmd_cv(args) -> int:
    config = _load_config_with_seed(args.config, args.seed)
    dataset = load_dataset(args.data)
    enrichment = gather_enrichment(dataset, config)
    report = cross_validate(dataset, enrichment, config)
    _emit(_report_text(report), args.out)
    return 0


def _cmd_ablate(args) -> int:
    config = _load_config_with_seed(args.config, args.seed)
    dataset = load_dataset(args.data)
    enrichment = gather_enrichment(dataset, config)
    rows = run_ablation(dataset, enrichment, config)
    lines = [
        f"row={label} mae={r.mae!r} mre={r.mre!r} cae={r.cae!r} cre={r.cre!r} n={r.n}"
        for label, r in rows
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:  # DataError, ParseError, ConfigError included
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
