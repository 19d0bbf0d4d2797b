"""One test per reproduction criterion; each prints its PASS/FAIL line."""

import pytest

from commbreak import acceptance


@pytest.fixture(scope="module")
def results():
    return {c.number: c for c in acceptance.run_all()}


@pytest.mark.parametrize("number, name", [
    (1, "model exactness"),
    (2, "observed-error margins"),
    (3, "breakdown percentages"),
    (4, "simulator convergence"),
    (5, "overlap invariance"),
    (6, "estimator round trip"),
    (7, "what-if claims"),
    (8, "property suites"),
])
def test_criterion(results, number, name, capsys):
    c = results[number]
    with capsys.disabled():
        print("\n" + c.line())
    assert c.name == name
    assert c.passed, c.line()
