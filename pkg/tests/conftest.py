import numpy as np
import pytest
from hypothesis import settings

from qpufsim import RngStream

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng(request):
    # one stream per test so results don't depend on test ordering
    key = sum(map(ord, request.node.name))
    return RngStream(20260101, key).generator()


def three_sigma_ok(freq, probs, n):
    """Per-outcome binomial 3-sigma check (with a floor for tiny probabilities)."""
    sigma = np.sqrt(np.maximum(probs * (1 - probs), 1e-12) / n)
    return np.all(np.abs(freq - probs) <= 3 * sigma + 1.0 / n)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, (ok, detail) in sorted(mod.RESULTS.items(), key=lambda kv: (int(kv[0].split()[0]), kv[0])):
        terminalreporter.write_line(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
