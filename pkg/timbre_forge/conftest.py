"""Pytest fixtures."""

# pylint: disable=redefined-outer-name

import numpy as np
import pytest

from timbre_forge.audio.clip import write_wav
from timbre_forge.audio.manifest import split_dataset
from timbre_forge.model.bundle import VariantFlags, build_model
from timbre_forge.tests.factories import sine

DOMAIN_TONES = {"flute": 660.0, "cello": 220.0}


@pytest.fixture
def rng():
    """A seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def wav_tree(tmp_path):
    """Write four half-second tones per domain and return {domain: [paths]}."""
    tree = {}
    for name, frequency in DOMAIN_TONES.items():
        paths = []
        for index in range(4):
            path = tmp_path / "data" / name / f"{name}_{index}.wav"
            write_wav(sine(frequency * (1 + 0.05 * index), 0.5), path)
            paths.append(str(path))
        tree[name] = paths
    return tree


@pytest.fixture
def domain_dirs(wav_tree, tmp_path):
    """Same recordings as ``wav_tree``, given as the data root with one sub-directory per domain."""
    return tmp_path / "data"


@pytest.fixture(scope="session")
def bundle():
    """A two-domain model shared by read-only tests."""
    return build_model(["flute", "cello"], VariantFlags(), seed=0)


TRAINING_TONES = {"flute": 660.0, "cello": 220.0, "oboe": 495.0, "horn": 330.0}


@pytest.fixture
def make_manifest(tmp_path):
    """
    Build a manifest of synthetic tones long enough for 128-frame excerpts.

    Each domain gets ``files`` recordings, which split_dataset assigns 2/1/1
    for the default of four.
    """

    def _make(domains=("flute", "cello"), files=4, seconds=1.7, seed=0):
        tree = {}
        for name in domains:
            base = TRAINING_TONES.get(name, 440.0)
            tree[name] = []
            for index in range(files):
                path = tmp_path / "train_data" / name / f"{name}_{index}.wav"
                if not path.exists():
                    write_wav(sine(base * (1 + 0.03 * index), seconds), path)
                tree[name].append(str(path))
        return split_dataset(tree, seed)

    return _make
