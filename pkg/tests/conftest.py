"""Shared fixtures: one small synthetic bundle written to disk per session."""

from __future__ import annotations

import dataclasses

import pytest

from clickcast import SynthParams, load_dataset, synth_bundle, write_bundle
from clickcast.pipeline import gather_enrichment, load_config


@pytest.fixture(scope="session")
def small_bundle():
    return synth_bundle(SynthParams(n_links=120, days=7, seed=11))


@pytest.fixture(scope="session")
def bundle_dir(small_bundle, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    write_bundle(small_bundle, str(out))
    return out


@pytest.fixture(scope="session")
def small_config(bundle_dir):
    return load_config(str(bundle_dir / "config.yaml"))


@pytest.fixture(scope="session")
def small_dataset(bundle_dir):
    return load_dataset(str(bundle_dir / "dataset.txt"))


@pytest.fixture(scope="session")
def small_enrichment(small_dataset, small_config):
    # Cache writes land inside the session tmp bundle directory.
    return gather_enrichment(small_dataset, small_config)


@pytest.fixture(scope="session")
def fast_config(small_config):
    """Small-tree config for pipeline-level tests that train models."""
    from clickcast import LearnerSpec

    return dataclasses.replace(
        small_config,
        learner=LearnerSpec(kind="m5p", params={"min_leaf_instances": 32}),
        cv_folds=5,
    )
