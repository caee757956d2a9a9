import os

import hypothesis
import numpy as np
import pytest

from imbalance_toolkit.tools.data_tools import Dataset, generate_imbalance_data

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fast"))


def blobs(counts, n_features=2, separation=6.0, seed=0):
    """Well-separated Gaussian blobs, class c centred at c * separation on every axis."""
    rng = np.random.default_rng(seed)
    features = np.vstack([rng.normal(c * separation, 1.0, size=(n, n_features)) for c, n in enumerate(counts)])
    labels = np.repeat(np.arange(len(counts)), counts)
    return Dataset(features, labels)


@pytest.fixture
def binary_blobs():
    """90:10 separable two-class data."""
    return blobs([90, 10])


@pytest.fixture
def three_class_blobs():
    """20:5:2 three-class data."""
    return blobs([40, 10, 4], seed=1)


@pytest.fixture
def snippet_split():
    """200 samples, 9:1, half held out."""
    return generate_imbalance_data(n_samples=200, class_weights=(0.9, 0.1), test_fraction=0.5, seed=7)


@pytest.fixture
def tiny_dataset():
    """Fixed 40-row binary dataset with overlapping classes."""
    rng = np.random.default_rng(2024)
    features = np.vstack([rng.normal(0.0, 1.0, size=(30, 2)), rng.normal(1.0, 1.0, size=(10, 2))])
    labels = np.repeat([0, 1], [30, 10])
    return Dataset(features, labels)
