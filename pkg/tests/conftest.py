from __future__ import annotations

import numpy as np
import pytest

from fracmanifold.counterexample import build_example_system
from fracmanifold.lp_operator import manifold_graph, prepare
from fracmanifold.spectral import jordanize, transform_system

#: order used for the saddle pipeline (see the README for why not 0.5)
SADDLE_ALPHA = 0.8


@pytest.fixture(scope="session")
def saddle():
    return build_example_system(SADDLE_ALPHA)


@pytest.fixture(scope="session")
def saddle_tsys(saddle):
    return transform_system(saddle, jordanize(saddle.A, saddle.alpha, 1.0))


@pytest.fixture(scope="session")
def saddle_prepared(saddle_tsys):
    """Operator configuration and measured contraction for the saddle."""
    return prepare(saddle_tsys, n_pairs=100, seed=0)


@pytest.fixture(scope="session")
def saddle_graph(saddle_prepared):
    cfg, _ = saddle_prepared
    return manifold_graph(cfg.system, cfg, 21)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
