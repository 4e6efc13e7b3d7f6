import numpy as np
import pytest

from ktula import make_double_well, make_quadratic, make_neural_net_objective, synthetic_nn_spec


def points_in_ball(n, d, radius, seed):
    """Seeded points with |theta| <= radius, spread over all magnitudes."""
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n, d))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-30)
    radii = radius * rng.uniform(0.0, 1.0, size=(n, 1))
    return dirs * radii


@pytest.fixture(scope="session")
def nn_spec_small():
    return synthetic_nn_spec(d1=3, input_dim=3, n_points=8, seed=314, eta=0.5)


@pytest.fixture(scope="session")
def nn_model_small(nn_spec_small):
    return make_neural_net_objective(nn_spec_small)


@pytest.fixture(scope="session")
def bundled_models(nn_model_small):
    return [
        make_double_well(1),
        make_double_well(2),
        make_double_well(5),
        make_quadratic(3, 2.0),
        nn_model_small,
    ]
