import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles.py / instances.py

import convshrink as cs

DATA_DIR = Path(__file__).parent.parent / "src" / "convshrink" / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def cifar5(data_dir) -> cs.NetworkSpec:
    return cs.load_network(data_dir / "backbone_cifar5.json")


@pytest.fixture(scope="session")
def edge_device(data_dir) -> cs.DeviceProfile:
    return cs.load_device(data_dir / "device_edge_board.json")


@pytest.fixture(scope="session")
def catalog() -> cs.OperatorCatalog:
    return cs.default_catalog()


@pytest.fixture(scope="session")
def cifar5_profile(cifar5, catalog) -> cs.AccuracyProfile:
    return cs.synthetic_profile(cifar5, catalog, seed=7)
