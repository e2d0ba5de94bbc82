import numpy as np
import pytest

from stdpsim.idx import IdxDataset, write_idx


def synthetic_digits(n: int, seed: int) -> IdxDataset:
    """Ten fixed random stroke patterns with pixel noise; label = pattern index."""
    rng = np.random.default_rng(1234)
    protos = (rng.random((10, 28, 28)) < 0.15) * 255
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n).astype(np.uint8)
    noise = rng.random((n, 28, 28)) < 0.05
    images = np.where(noise, 255 - protos[labels], protos[labels]).astype(np.uint8)
    return IdxDataset(images, labels)


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    write_idx(synthetic_digits(60, 0), d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    write_idx(synthetic_digits(30, 1), d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte")
    return d


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "tiny.cfg"
    p.write_text("n_exc = 10\nn_train = 60\nn_assign = 60\nn_test = 30\nt_sim = 100\n"
                 "metrics_interval = 20\ndse_mem = 30000\ndse_n_add = 5\ndse_n_train = 30\n")
    return p
