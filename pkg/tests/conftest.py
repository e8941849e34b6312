"""
Pytest configuration and fixtures for unit tests.
"""
import os
from typing import List
from unittest.mock import patch

import numpy as np
import pytest


# =============================================================================
# Settings Fixtures
# =============================================================================

@pytest.fixture(autouse=True)
def isolated_settings(tmp_path):
    """Point GRDA_OUT at a temporary directory and drop cached settings."""
    from config.settings import get_settings

    with patch.dict(os.environ, {"GRDA_OUT": str(tmp_path / "grda_out"), "GRDA_LOG_LEVEL": "WARNING"}):
        get_settings.cache_clear()
        yield get_settings()
    get_settings.cache_clear()


@pytest.fixture
def test_settings(isolated_settings):
    """Settings instance with test values."""
    return isolated_settings


# =============================================================================
# Graph Fixtures
# =============================================================================

@pytest.fixture
def chain3():
    from graphs.domain_graph import make_chain
    return make_chain(3)


@pytest.fixture
def clique3():
    from graphs.domain_graph import make_clique
    return make_clique(3)


@pytest.fixture
def star4():
    from graphs.domain_graph import make_star
    return make_star(4)


# =============================================================================
# Dataset Fixtures
# =============================================================================

@pytest.fixture
def small_dg():
    """Six-domain DG-style dataset with two sources."""
    from tasks.dg_task import generate_dg
    return generate_dg(n_domains=6, per_domain=40, n_sources=2, seed=3)


@pytest.fixture
def small_chain3():
    from tasks.dg_task import Chain3TaskBuilder
    return Chain3TaskBuilder(per_domain=40, seed=1).build()


@pytest.fixture
def small_embeddings(small_dg):
    from graphs.embeddings import pretrain_embeddings
    return pretrain_embeddings(small_dg.graph, k=2, lr=0.05, steps=100, seed=0)


@pytest.fixture
def fast_config():
    """Tiny network and a handful of iterations; enough to exercise every code path."""
    from storage.models import TrainConfig
    return TrainConfig(
        epochs=2,
        batch_size=8,
        iterations_per_epoch=3,
        hidden_width=8,
        encoding_dim=8,
        lr=1e-3,
        disc_lr=1e-3,
        seed=0,
    )


@pytest.fixture
def mini_split():
    """Four western states: sources CA and OR, targets NV and AZ."""
    from config.tpt_splits import TptSplit
    return TptSplit(
        name="mini",
        source=("CA", "OR"),
        target=("NV", "AZ"),
        edges=(("CA", "OR"), ("CA", "NV"), ("CA", "AZ"), ("NV", "OR"), ("AZ", "NV")),
    )


def make_tpt_records(states: List[str], years: range, seed: int = 0):
    """Seasonal temperature curves with a per-state offset and noise."""
    from tasks.tpt_task import TptRecord

    rng = np.random.default_rng(seed)
    months = np.arange(12)
    records = []
    for k, state in enumerate(states):
        offset = 40.0 + 5.0 * k
        for year in years:
            temps = offset + 20.0 * np.sin((months - 3) * np.pi / 6) + rng.normal(0, 1.5, size=12)
            records.append(TptRecord(state, year, tuple(float(t) for t in temps)))
    return records


@pytest.fixture
def mini_tpt_records(mini_split):
    return make_tpt_records(mini_split.states, range(2000, 2012))


# =============================================================================
# Density Fixtures
# =============================================================================

@pytest.fixture
def interpolation_density():
    """Three-domain densities with the middle row the average of the ends."""
    from services.density import DensityEstimate

    p0 = np.array([0.5, 0.3, 0.2, 0.0])
    p2 = np.array([0.0, 0.2, 0.3, 0.5])
    return DensityEstimate(np.vstack([p0, 0.5 * (p0 + p2), p2]))


@pytest.fixture
def equal_density():
    from services.density import DensityEstimate

    row = np.array([0.1, 0.2, 0.3, 0.4])
    return DensityEstimate(np.vstack([row, row, row]))
