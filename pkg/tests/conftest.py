import pytest

from genericlab.experiments import PerturbationSpec, catalog_chart, make_rng, perturb_metric
from genericlab.tensor import curvature_audit

AUDIT_TOL = 1e-10
_audit = {}


def pytest_sessionstart(session):
    ctx = curvature_audit()
    _audit["ctx"] = ctx
    _audit["record"] = ctx.__enter__()


def pytest_sessionfinish(session, exitstatus):
    record = _audit["record"]
    _audit["ctx"].__exit__(None, None, None)
    if record["max_residual"] > AUDIT_TOL and session.exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    record = _audit.get("record")
    if record is None:
        return
    ok = record["max_residual"] <= AUDIT_TOL
    terminalreporter.write_line(
        f"curvature symmetry audit over the whole run: {'PASS' if ok else 'FAIL'} "
        f"({record['count']} tensors, worst residual {record['max_residual']:.2e}, limit {AUDIT_TOL:g})"
    )


@pytest.fixture
def session_audit():
    return _audit["record"]


@pytest.fixture
def rng():
    return make_rng(20240611)


@pytest.fixture(scope="session")
def perturbed_minkowski():
    return perturb_metric(catalog_chart("minkowski4"), PerturbationSpec(seed=7, amplitude=0.05, degree=3))


@pytest.fixture
def minkowski4():
    return catalog_chart("minkowski4")


@pytest.fixture
def ppwave():
    return catalog_chart("ppwave4")


@pytest.fixture
def desitter():
    return catalog_chart("desitter4")
