import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgease import experiments as E
from dgease.analysis import ErrorReport


def rep(p, n, l2, dg, dofs=None):
    h = 1 / math.sqrt(n)
    return ErrorReport(p, n, dofs or n * (p + 1) * (p + 2) // 2, h, h, l2, dg, dg, {})


@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
@settings(max_examples=30)
def test_rate_criteria(dl2, ddg):
    reps = [rep(1, n, n ** -(1 + dl2 / 2), n ** -(0.5 + ddg / 2)) for n in (16, 64, 256)]
    crit = E.rate_criteria("t", reps, [1])
    assert [c.passed for c in crit] == [True, True]
    assert crit[0].measured == pytest.approx(2 + dl2, abs=1e-3)


def test_rate_criteria_fail():
    reps = [rep(1, n, n ** -0.5, n ** -0.5) for n in (16, 64)]
    crit = E.rate_criteria("t", reps, [1])
    assert not crit[0].passed and crit[1].passed


def test_exponential_criteria():
    reps = [rep(p, 16, 10.0 ** -p, 1.0) for p in range(1, 9)]
    fit, steps = E.exponential_criteria("t", reps)
    assert fit.passed and steps.passed and steps.measured == pytest.approx(10.0)
    flat = [rep(p, 16, 1e-2 / (1 + 0.5 * (p > 3)), 1.0) for p in range(1, 9)]
    fit, mono = E.exponential_criteria("t", flat, steps=False)
    assert not (fit.passed and mono.passed)


def test_step_reductions_floor():
    assert E.step_reductions([1e-6, 1e-8, 1e-10, 2e-10]) == pytest.approx([100.0, 100.0])


def test_bundle_and_outputs(tmp_path):
    b = E.Bundle("demo", studies={"h": [rep(1, 16, 1e-2, 1e-1), rep(1, 64, 2.5e-3, 5e-2)]})
    b.criteria = [E.Criterion("a", "x", 1.0, True), E.Criterion("b", "y", 2.0, False)]
    assert not b.passed and b.failed() == ["b"]
    paths = E.write_outputs(b, tmp_path)
    assert {p.rsplit(".", 1)[1] for p in paths} == {"csv", "svg", "json"}
    summary = json.loads((tmp_path / "demo-summary.json").read_text())
    assert summary["criteria"][1] == {"name": "b", "target": "y", "measured": 2.0, "pass": False}
    assert b.criteria[0].line().startswith("PASS")


def test_check_polynomial():
    b = E.check_polynomial()
    assert b.passed


def test_run_example_rejects():
    with pytest.raises(ValueError):
        E.run_example(7)
