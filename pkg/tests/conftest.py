import numpy as np
import pytest

from parensemble import kernels
from parensemble.dataio import make_dataset
from parensemble.synth import synthetic_arrays

BACKENDS = ["numpy"] + (["numba"] if kernels.numba_available() else [])


@pytest.fixture(scope="session", autouse=True)
def _compiled():
    kernels.warmup()


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = kernels.set_backend(request.param)
    if request.param == "numba":
        kernels.warmup()
    yield request.param
    kernels.set_backend(prev)


@pytest.fixture
def blobs():
    def make(n=200, n_features=4, n_classes=2, sep=3.0, seed=0):
        x, y = synthetic_arrays(n, n_features, n_classes, sep, seed)
        return make_dataset(x, y, n_classes)
    return make


@pytest.fixture
def write_csv(tmp_path):
    def write(text, name="data.csv"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p
    return write


def rows_of(d):
    return [tuple(r) for r in np.asarray(d.features).tolist()]


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL/SKIP line per acceptance criterion, then enforce it."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(n, ok, detail, gate=True):
        status = "PASS" if ok else ("FAIL" if gate else "INFO-FAIL")
        line = f"criterion {n:>2}: {status}  {detail}"
        lines[n] = line
        print(line)
        if gate:
            assert ok, line

    def skip(n, detail):
        lines[n] = f"criterion {n:>2}: SKIP  {detail}"
        print(lines[n])
        pytest.skip(detail)

    record.skip = skip
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
