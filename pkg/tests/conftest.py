import numpy as np
import pytest
from hypothesis import settings

from krylovlab import kernels

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    """Each available kernel backend in turn."""
    return kernels.backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(RESULTS):
        parts = RESULTS[crit]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {crit:2d}: {verdict}")
        for part, ok, detail in parts:
            extra = f" ({detail})" if detail else ""
            terminalreporter.write_line(f"    {'PASS' if ok else 'FAIL'} {part}{extra}")
