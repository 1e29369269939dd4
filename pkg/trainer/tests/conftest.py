"""Shared fixtures: a small on-disk dataset built once per session."""

from dataclasses import replace

import pytest


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """60 s synthetic feature dataset (6000 records)."""
    from aecnet import datagen

    path = tmp_path_factory.mktemp("data") / "train_60s.aecd"
    manifest = replace(datagen.Manifest(), seed=3, duration_s=60.0)
    datagen.build_dataset(manifest, path)
    return path
