"""Shared fixtures, including the session-wide reference training run."""

import numpy as np
import pytest

from naestudio.deconstruct import extract
from naestudio.model import NaeConfig, init_model
from naestudio.stft import analyze
from naestudio.toy import toy_mixture, toy_stft_params
from naestudio.training import TrainConfig, train

REFERENCE_LAYERS = (3, 9)
REFERENCE_SEED = 0
REFERENCE_ITERATIONS = 3000


@pytest.fixture(scope="session")
def toy():
    return toy_mixture()


@pytest.fixture(scope="session")
def toy_params():
    return toy_stft_params()


@pytest.fixture(scope="session")
def toy_spec(toy, toy_params):
    return analyze(toy.samples, toy_params)


@pytest.fixture(scope="session")
def reference_run(toy_spec):
    """The frozen toy training run shared by regression and acceptance tests."""
    model = init_model(
        NaeConfig(input_dim=toy_spec.num_bins, layer_sizes=REFERENCE_LAYERS, seed=REFERENCE_SEED)
    )
    model, report = train(
        model, toy_spec, TrainConfig(iterations=REFERENCE_ITERATIONS, log_every=500)
    )
    assert not report.aborted
    return model, report


@pytest.fixture(scope="session")
def reference_model(reference_run):
    return reference_run[0]


@pytest.fixture(scope="session")
def reference_set(reference_model, toy_spec):
    return extract(reference_model, toy_spec)


def outer_density(cset) -> float:
    """Fraction of outer activation entries above 10% of the layer maximum."""
    acts = cset.outer_activations
    return float((acts > 0.1 * acts.max()).mean())


def best_assignment_cosines(latent: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Cosine similarities of the best one-to-one unit/envelope pairing."""
    from scipy.optimize import linear_sum_assignment

    def cosine(a, b):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        return float(a @ b / (na * nb)) if na > 0 and nb > 0 else 0.0

    sim = np.array([[cosine(li, tj) for tj in truth] for li in latent])
    rows, cols = linear_sum_assignment(-sim)
    return sim[rows, cols]
