import numpy as np
import pytest

from tokencluster import TokenSet


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def vit_b32_tokens(rng):
    """12 frames of 7x7 patch tokens at width 512."""
    return TokenSet(rng.standard_normal((12, 49, 512)).astype(np.float32), 7, 7)



def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
