import numpy as np
import pytest

from ingsub.sim import RngStream


@pytest.fixture
def rng():
    return RngStream(20240611, 0)


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict(capsys):
    """Print a one-line PASS/FAIL verdict that survives output capture."""

    def emit(label: str, ok: bool, detail: str = "") -> bool:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else ""))
        return ok

    return emit
