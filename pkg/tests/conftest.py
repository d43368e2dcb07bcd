import numpy as np
import pytest

from mvlrecm import MultiViewDataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_dataset(rng, n=30, dims=(2, 3), n_classes=2):
    """Well-separated blobs seen through random linear views."""
    labels = rng.integers(1, n_classes + 1, size=n)
    labels[:n_classes] = np.arange(1, n_classes + 1)
    base = rng.standard_normal((n_classes, 4)) * 5
    latent = base[labels - 1] + rng.standard_normal((n, 4))
    views = [latent @ rng.standard_normal((4, d)) for d in dims]
    return MultiViewDataset(views, labels)


@pytest.fixture
def toy(rng):
    return small_dataset(rng)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import NOTES, VERDICTS
    except ImportError:
        return
    if VERDICTS or NOTES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])
        for line in NOTES:
            terminalreporter.write_line(line)
