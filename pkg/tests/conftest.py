import pytest

from simnet import OptimizerConfig, build_similarity_tensor, generate_planted

# Session-scoped planted corpora: the 8x50 one mirrors the end-to-end
# experiments, the 4x12 one keeps unit-level pipeline tests fast.


@pytest.fixture(scope="session")
def planted_ds():
    return generate_planted(8, 50, 0.10, seed=7)


@pytest.fixture(scope="session")
def planted_tensor(planted_ds):
    return build_similarity_tensor(planted_ds)


@pytest.fixture(scope="session")
def small_ds():
    return generate_planted(4, 12, 0.10, seed=3)


@pytest.fixture(scope="session")
def small_tensor(small_ds):
    return build_similarity_tensor(small_ds)


@pytest.fixture(scope="session")
def fast_cfg():
    return OptimizerConfig(iterations=25, learning_rate=0.05, threshold=0.85,
                           seed=2)
