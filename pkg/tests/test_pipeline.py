"""Config parsing, training, prediction, cross-validation, and ablation."""

import dataclasses
import json

import numpy as np
import pytest

from clickcast import (
    ABLATION_LADDER,
    ConfigError,
    DataError,
    EnrichmentData,
    LearnerSpec,
    OutlierPolicy,
    ParseError,
    PipelineConfig,
    TargetScale,
    TrainedPipeline,
    cross_validate,
    default_learner_spec,
    fold_seed,
    kfold_split,
    load_config,
    load_pipeline,
    parse_config,
    run_ablation,
    save_pipeline,
    train_pipeline,
)
from clickcast.pipeline import PIPELINE_FORMAT, PIPELINE_VERSION


class TestParseConfig:
    def test_empty_mapping_gives_defaults(self):
        cfg = parse_config({})
        assert cfg.feature_groups == ("base", "f1", "f2", "f3", "f4", "f5")
        assert cfg.scale.kind == "log10"
        assert cfg.outlier_policy.kind == "all_to_one"
        assert cfg.cv_folds == 10 and cfg.seed == 0
        assert cfg.learner == default_learner_spec()

    def test_full_mapping(self):
        cfg = parse_config(
            {
                "feature_groups": ["base", "f1"],
                "keyphrases_path": "kp.tsv",
                "content_path": "content.tsv",
                "enrichment": {
                    "title_hits": {"mode": "fixture", "fixture_path": "hits.tsv"},
                    "social": {"mode": "fixture", "fixture_path": "social.tsv"},
                    "cache_dir": "cache",
                },
                "learner": {"kind": "m5p", "min_leaf_instances": 6},
                "target_scale": "ln",
                "outlier_policy": "none",
                "cv_folds": 5,
                "seed": 7,
            },
            base_dir="/data",
        )
        assert cfg.feature_groups == ("base", "f1")
        assert cfg.keyphrases_path == "/data/kp.tsv"
        assert cfg.content_path == "/data/content.tsv"
        assert cfg.title_hits_provider.fixture_path == "/data/hits.tsv"
        assert cfg.social_provider.fixture_path == "/data/social.tsv"
        assert cfg.cache_dir == "/data/cache"
        assert cfg.learner.params["min_leaf_instances"] == 6
        assert cfg.scale.kind == "ln"
        assert cfg.outlier_policy.kind == "none"
        assert cfg.cv_folds == 5 and cfg.seed == 7

    def test_absolute_paths_are_not_rebased(self):
        cfg = parse_config({"keyphrases_path": "/abs/kp.tsv"}, base_dir="/data")
        assert cfg.keyphrases_path == "/abs/kp.tsv"

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_config({"learner_spec": {"kind": "m5p"}})

    def test_unknown_enrichment_key(self):
        with pytest.raises(ConfigError, match="unknown key.*enrichment"):
            parse_config({"enrichment": {"cache": "x"}})

    def test_unknown_provider_key(self):
        with pytest.raises(ConfigError, match="title_hits"):
            parse_config({"enrichment": {"title_hits": {"mode": "fixture", "url": "x"}}})

    def test_feature_groups_must_be_a_list(self):
        with pytest.raises(ConfigError, match="feature_groups"):
            parse_config({"feature_groups": "base"})

    def test_unknown_feature_group(self):
        with pytest.raises(ConfigError, match="unknown feature groups"):
            parse_config({"feature_groups": ["base", "f9"]})

    def test_empty_feature_groups(self):
        with pytest.raises(ConfigError, match="at least one"):
            parse_config({"feature_groups": []})

    def test_cv_folds_must_be_integer(self):
        with pytest.raises(ConfigError, match="cv_folds"):
            parse_config({"cv_folds": "ten"})
        with pytest.raises(ConfigError, match="cv_folds"):
            parse_config({"cv_folds": True})

    def test_cv_folds_lower_bound(self):
        with pytest.raises(ConfigError, match="cv_folds"):
            parse_config({"cv_folds": 1})

    def test_non_mapping_config(self):
        with pytest.raises(ConfigError, match="mapping"):
            parse_config([1, 2])

    def test_bad_learner_block(self):
        with pytest.raises(ConfigError):
            parse_config({"learner": {"kind": "forest"}})

    def test_config_round_trip_through_to_config(self):
        cfg = parse_config(
            {
                "feature_groups": ["base", "f5"],
                "target_scale": "identity",
                "outlier_policy": "none",
                "cv_folds": 4,
                "seed": 3,
            }
        )
        again = parse_config(cfg.to_config())
        assert again.feature_groups == cfg.feature_groups
        assert again.scale == cfg.scale
        assert again.outlier_policy.kind == cfg.outlier_policy.kind
        assert again.cv_folds == cfg.cv_folds and again.seed == cfg.seed
        assert again.learner == cfg.learner


class TestLoadConfig:
    def test_yaml_file_with_relative_paths(self, tmp_path):
        (tmp_path / "config.yaml").write_text(
            "feature_groups: [base, f1]\nkeyphrases_path: kp.tsv\nseed: 5\n"
        )
        cfg = load_config(tmp_path / "config.yaml")
        assert cfg.keyphrases_path == str(tmp_path / "kp.tsv")
        assert cfg.seed == 5

    def test_empty_file_gives_defaults(self, tmp_path):
        (tmp_path / "config.yaml").write_text("")
        assert load_config(tmp_path / "config.yaml").cv_folds == 10

    def test_invalid_yaml_raises_parse_error(self, tmp_path):
        (tmp_path / "config.yaml").write_text("feature_groups: [base\n")
        with pytest.raises(ParseError, match="invalid config"):
            load_config(tmp_path / "config.yaml")

    def test_non_mapping_yaml_rejected(self, tmp_path):
        (tmp_path / "config.yaml").write_text("- base\n- f1\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(tmp_path / "config.yaml")


class TestDefaultLearner:
    def test_shape(self):
        spec = default_learner_spec()
        assert spec.kind == "additive"
        assert spec.params == {
            "iterations": 10,
            "shrinkage": 1.0,
            "subsample_fraction": 0.5,
        }
        assert spec.base.kind == "bagging"
        assert spec.base.params == {"rounds": 10}
        assert spec.base.base.kind == "m5p"


class TestFoldSeed:
    def test_deterministic(self):
        assert fold_seed(0, 3) == fold_seed(0, 3)

    def test_varies_with_fold_and_master(self):
        seeds = {fold_seed(0, i) for i in range(10)}
        assert len(seeds) == 10
        assert fold_seed(1, 0) != fold_seed(0, 0)


class TestTrainPredict:
    def test_train_then_predict_in_click_space(self, small_dataset, small_enrichment, fast_config):
        pipeline = train_pipeline(small_dataset, small_enrichment, fast_config)
        preds = pipeline.predict(small_dataset, small_enrichment)
        assert preds.shape == (len(small_dataset),)
        assert np.all(preds >= 1.0)
        truths = np.array([e.clicks for e in small_dataset], dtype=float)
        assert np.corrcoef(preds, truths)[0, 1] > 0.5

    def test_stats_capture_shape_and_max(self, small_dataset, small_enrichment, fast_config):
        pipeline = train_pipeline(small_dataset, small_enrichment, fast_config)
        assert pipeline.stats["n_rows"] == len(small_dataset)
        assert pipeline.stats["n_features"] == pipeline.schema.width
        max_clicks = max(e.clicks for e in small_dataset)
        assert pipeline.stats["train_max_clicks"] == max_clicks
        assert pipeline.policy.train_max_clicks == max_clicks

    def test_empty_dataset_rejected(self, fast_config):
        from clickcast import Dataset

        with pytest.raises(DataError, match="empty"):
            train_pipeline(Dataset(entries=()), EnrichmentData.empty(), fast_config)

    def test_train_indices_subset(self, small_dataset, small_enrichment, fast_config):
        half = list(range(0, len(small_dataset), 2))
        pipeline = train_pipeline(
            small_dataset, small_enrichment, fast_config, train_indices=half
        )
        assert pipeline.stats["n_rows"] == len(half)

    def test_train_indices_out_of_range(self, small_dataset, small_enrichment, fast_config):
        with pytest.raises(DataError, match="out of range"):
            train_pipeline(
                small_dataset,
                small_enrichment,
                fast_config,
                train_indices=[0, len(small_dataset)],
            )

    def test_empty_train_indices(self, small_dataset, small_enrichment, fast_config):
        with pytest.raises(DataError, match="empty index set"):
            train_pipeline(small_dataset, small_enrichment, fast_config, train_indices=[])

    def test_predict_without_enrichment_masks_missing(self, small_dataset, small_enrichment, fast_config):
        pipeline = train_pipeline(small_dataset, small_enrichment, fast_config)
        preds = pipeline.predict(small_dataset.entries[:5], None)
        assert preds.shape == (5,)
        assert np.all(preds >= 1.0)

    def test_predict_empty_sequence(self, small_dataset, small_enrichment, fast_config):
        pipeline = train_pipeline(small_dataset, small_enrichment, fast_config)
        assert pipeline.predict([], None).shape == (0,)

    def test_overflow_warning_with_policy_none(self, caplog):
        # A linear fit extrapolated far outside its training range overflows
        # the click ceiling; the pipeline must clamp and warn, not crash.
        from clickcast import Dataset, LinkHourEntry

        entries = []
        import datetime as dt

        t0 = dt.datetime(2011, 3, 1, 0, 0, 0)
        for hour in range(24):
            entries.append(
                LinkHourEntry(
                    line_number=hour + 1,
                    timestamp=t0 + dt.timedelta(hours=hour),
                    channel_id=1,
                    section="geral",
                    subsection="manchete",
                    news_id=1,
                    clicks=2 ** (hour + 1),
                    title=f"headline number {hour}",
                )
            )
        dataset = Dataset(entries=tuple(entries))
        config = PipelineConfig(
            feature_groups=("base", "f5"),
            learner=LearnerSpec(kind="linear"),
            scale=TargetScale("log10"),
            outlier_policy=OutlierPolicy("none"),
            cv_folds=2,
        )
        pipeline = train_pipeline(dataset, None, config)
        future = [
            dataclasses.replace(
                entries[-1], timestamp=t0 + dt.timedelta(hours=20000), clicks=1
            )
        ]
        import logging

        with caplog.at_level(logging.WARNING, logger="clickcast.pipeline"):
            preds = pipeline.predict(future, None, first_seen={1: t0})
        assert preds[0] == pytest.approx(1e300)
        assert any("clamped" in record.message for record in caplog.records)


class TestSaveLoadPipeline:
    def test_round_trip_predictions_are_bit_identical(
        self, tmp_path, small_dataset, small_enrichment, fast_config
    ):
        pipeline = train_pipeline(small_dataset, small_enrichment, fast_config)
        path = tmp_path / "pipeline.json"
        pipeline.save(path)
        reloaded = TrainedPipeline.load(path)
        a = pipeline.predict(small_dataset, small_enrichment)
        b = reloaded.predict(small_dataset, small_enrichment)
        np.testing.assert_array_equal(a, b)

    def test_round_trip_preserves_components(
        self, tmp_path, small_dataset, small_enrichment, fast_config
    ):
        pipeline = train_pipeline(small_dataset, small_enrichment, fast_config)
        path = tmp_path / "pipeline.json"
        save_pipeline(pipeline, path)
        reloaded = load_pipeline(path)
        assert reloaded.schema == pipeline.schema
        assert reloaded.scale == pipeline.scale
        assert reloaded.policy == pipeline.policy
        assert reloaded.learner == pipeline.learner
        assert reloaded.stats == dict(pipeline.stats)

    def test_document_format_marker(self, tmp_path, small_dataset, small_enrichment, fast_config):
        pipeline = train_pipeline(small_dataset, small_enrichment, fast_config)
        path = tmp_path / "pipeline.json"
        pipeline.save(path)
        document = json.loads(path.read_text())
        assert document["format"] == PIPELINE_FORMAT
        assert document["version"] == PIPELINE_VERSION

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text(json.dumps({"format": "other", "version": 1}))
        with pytest.raises(DataError, match=PIPELINE_FORMAT):
            load_pipeline(path)

    def test_wrong_version_rejected(self, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text(json.dumps({"format": PIPELINE_FORMAT, "version": 0}))
        with pytest.raises(DataError, match="unsupported version"):
            load_pipeline(path)

    def test_malformed_json_raises_parse_error(self, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text("{ nope")
        with pytest.raises(ParseError):
            load_pipeline(path)

    def test_saving_twice_is_byte_identical(
        self, tmp_path, small_dataset, small_enrichment, fast_config
    ):
        pipeline = train_pipeline(small_dataset, small_enrichment, fast_config)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        pipeline.save(a)
        pipeline.save(b)
        assert a.read_bytes() == b.read_bytes()


class TestCrossValidate:
    def test_report_covers_every_row(self, small_dataset, small_enrichment, fast_config):
        report = cross_validate(small_dataset, small_enrichment, fast_config)
        assert report.n == len(small_dataset)
        assert report.mae > 0.0

    def test_deterministic(self, small_dataset, small_enrichment, fast_config):
        a = cross_validate(small_dataset, small_enrichment, fast_config)
        b = cross_validate(small_dataset, small_enrichment, fast_config)
        assert a.machine_lines() == b.machine_lines()
        np.testing.assert_array_equal(a.ae, b.ae)

    def test_seed_changes_fold_assignment(self, small_dataset, small_enrichment, fast_config):
        a = cross_validate(small_dataset, small_enrichment, fast_config)
        b = cross_validate(
            small_dataset, small_enrichment, dataclasses.replace(fast_config, seed=1)
        )
        assert a.mae != b.mae

    def test_config_echo_records_the_run(self, small_dataset, small_enrichment, fast_config):
        report = cross_validate(small_dataset, small_enrichment, fast_config)
        assert report.config_echo["cv_folds"] == fast_config.cv_folds
        assert report.config_echo["target_scale"] == fast_config.scale.kind

    def test_fold_reproducible_as_standalone_run(
        self, small_dataset, small_enrichment, fast_config
    ):
        # Re-training fold 0's complement with the fold's seed substream must
        # reproduce the cross-validation predictions on that fold exactly.
        from clickcast import build_schema, filter_keyphrases, load_keyphrases

        report = cross_validate(small_dataset, small_enrichment, fast_config)
        n = len(small_dataset)
        folds = kfold_split(n, fast_config.cv_folds, fast_config.seed)
        fold = folds[0]
        train_idx = np.setdiff1d(np.arange(n), fold)
        phrases = tuple(
            e.phrase
            for e in filter_keyphrases(load_keyphrases(fast_config.keyphrases_path))
        )
        schema = build_schema(small_dataset, fast_config.feature_groups, phrases)
        pipeline = train_pipeline(
            small_dataset,
            small_enrichment,
            fast_config,
            schema=schema,
            train_indices=train_idx,
            seed_override=fold_seed(fast_config.seed, 0),
        )
        fold_entries = [small_dataset[int(i)] for i in fold]
        preds = pipeline.predict(
            fold_entries, small_enrichment, first_seen=small_dataset.first_seen
        )
        truths = np.array([e.clicks for e in fold_entries], dtype=float)
        np.testing.assert_array_equal(np.abs(preds - truths), report.ae[fold])

    def test_empty_dataset_rejected(self, fast_config):
        from clickcast import Dataset

        with pytest.raises(DataError):
            cross_validate(Dataset(entries=()), None, fast_config)


class TestAblation:
    def test_ladder_labels_in_order(self):
        assert [label for label, _ in ABLATION_LADDER] == [
            "Base",
            "Base+F1",
            "Base+F1+F2",
            "Base+F1+F2+F3",
            "Base+F1+F2+F3+F4",
            "All",
        ]

    def test_ladder_is_cumulative(self):
        previous: tuple[str, ...] = ()
        for _, groups in ABLATION_LADDER:
            assert set(previous) <= set(groups)
            previous = groups

    def test_run_ablation_returns_labeled_reports(
        self, small_dataset, small_enrichment, fast_config
    ):
        rows = run_ablation(small_dataset, small_enrichment, fast_config)
        assert [label for label, _ in rows] == [label for label, _ in ABLATION_LADDER]
        for _, report in rows:
            assert report.n == len(small_dataset)

    def test_feature_groups_change_the_result(
        self, small_dataset, small_enrichment, fast_config
    ):
        rows = dict(run_ablation(small_dataset, small_enrichment, fast_config))
        assert rows["Base"].mae != rows["All"].mae
