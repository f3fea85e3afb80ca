import pytest

from poseguard.dataset import SplitSpec, stratified_split
from poseguard.mlp import train_mlp
from poseguard.svm import train_svm
from poseguard.synthgen import generate_dataset

BENCHMARK_SEED = 42


@pytest.fixture(scope="session")
def benchmark_samples():
    return generate_dataset(452, 218, seed=BENCHMARK_SEED)


@pytest.fixture(scope="session")
def benchmark_split(benchmark_samples):
    return stratified_split(benchmark_samples, SplitSpec(seed=BENCHMARK_SEED))


@pytest.fixture(scope="session")
def trained_svm(benchmark_split):
    train, _, _ = benchmark_split
    return train_svm(train)


@pytest.fixture(scope="session")
def trained_mlp(benchmark_split):
    train, val, _ = benchmark_split
    model, _ = train_mlp(train, val)
    return model
