import numpy as np
import pytest

from selfdistill.config import ExperimentConfig


def finite_difference(fn, x, step=1e-5):
    """Central differences of scalar ``fn`` with respect to every entry of ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        hi = fn(x)
        x[idx] = orig - step
        lo = fn(x)
        x[idx] = orig
        grad[idx] = (hi - lo) / (2 * step)
    return grad


def assert_grad_close(analytic, numeric, rtol=1e-4, atol=1e-8):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.abs(numeric), np.abs(analytic))
    err = np.abs(analytic - numeric)
    ok = (err <= atol) | (err <= rtol * denom)
    assert ok.all(), f"max rel err {np.max(err / np.maximum(denom, 1e-300)):.3e}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """A config small enough for harness tests to run in about a second."""
    return ExperimentConfig().replace(
        generations=3,
        dataset={"k": 3, "d": 4, "n_train": 120, "n_test": 90, "cluster_spread": 3.0, "subclusters": 1},
        model={"hidden": [8], "cross_hidden": [6, 6]},
        train={"epochs": 4, "batch_size": 32},
    )


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records one PASS/FAIL line, then asserts ``ok``.

    A test that raises before reporting is recorded as FAIL.
    """
    seen = []
    lines = request.config.stash[ACCEPTANCE]

    def report(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        seen.append(n)
        lines.append(line)
        print(line)
        assert ok, line

    yield report
    if not seen:
        n = int(request.node.name.split("_")[1])
        lines.append(f"FAIL criterion {n}: raised before reporting")
