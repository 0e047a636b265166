import io
import math

import numpy as np
import pytest
from conftest import random_irreducible_counts, stub_model
from hypothesis import given, settings
from hypothesis import strategies as st

from medent.comorbidity import (
    NO_COOCCURRENCE,
    DegenerateMarginalError,
    alrr_from_rr,
    asymmetric_pairs,
    comorbidity_report,
    empirical_measures,
    model_alrr,
    model_phi,
    model_relative_risk,
    phi_coefficient,
    write_report,
)
from medent.cooccur import CodeIndex, PrevalenceTable, build_prevalence, generated_codes
from medent.maxent import fit

# ln(4/3) to 30 digits (decimal module)
LOG_4_3 = 0.287682072451780927439219005994


@pytest.fixture(scope="module")
def worked():
    return fit(np.array([[2, 1], [1, 2]]), CodeIndex(("F_A00", "F_A01")))


def test_relative_risk_independence():
    # P[a, a] = p_a * p_a
    m = stub_model([[0.0625, 0.9375], [0.5, 0.5]], ("a", "b"), stationary=[0.25, 0.25])
    assert model_relative_risk(m, "a", "a") == 1.0
    assert model_alrr(m, "a", "a") == 0.0


def test_relative_risk_ten():
    codes = tuple(f"c{i}" for i in range(10))
    m = stub_model(np.full((10, 10), 0.1), codes)
    assert model_relative_risk(m, "c0", "c3") == pytest.approx(10, rel=1e-14)
    assert model_alrr(m, "c0", "c3") == pytest.approx(math.log(10), rel=1e-14)


def test_alrr_folds_over_and_under_representation():
    assert alrr_from_rr(10) == pytest.approx(2.302585092994046, abs=1e-15)
    assert alrr_from_rr(0.1) == pytest.approx(alrr_from_rr(10), abs=1e-15)
    assert alrr_from_rr(1) == 0
    assert alrr_from_rr(0) is NO_COOCCURRENCE
    assert not NO_COOCCURRENCE


def test_phi_examples():
    assert phi_coefficient(0.06, 0.2, 0.3) == pytest.approx(0, abs=1e-16)
    assert phi_coefficient(0.5, 0.5, 0.5) == 1
    assert phi_coefficient(0, 0.5, 0.5) == -1
    with pytest.raises(DegenerateMarginalError):
        phi_coefficient(0.5, 1.0, 0.5)
    with pytest.raises(DegenerateMarginalError):
        phi_coefficient(0, 0.0, 0.5)


def test_empirical_examples():
    prev = PrevalenceTable(1000, {"A": 100, "B": 50}, {("A", "B"): 10})
    assert empirical_measures(prev, "A", "B").err == 2
    assert empirical_measures(prev, "B", "A").err == 2

    indep = PrevalenceTable(100, {"A": 20, "B": 50}, {("B", "A"): 10})
    e = empirical_measures(indep, "A", "B")
    assert e.err == 1 and e.alrr == 0 and e.phi == 0

    none = PrevalenceTable(100, {"A": 20, "B": 50}, {})
    e = empirical_measures(none, "A", "B")
    assert e.err == 0 and e.alrr is NO_COOCCURRENCE and e.phi < 0


def test_empirical_degenerate():
    prev = PrevalenceTable(10, {"A": 10, "B": 5}, {("A", "B"): 5})
    with pytest.raises(DegenerateMarginalError):
        empirical_measures(prev, "A", "B")


def test_worked_model(worked):
    assert model_relative_risk(worked, "F_A00", "F_A01") == pytest.approx(4 / 3, abs=1e-12)
    assert model_alrr(worked, "F_A00", "F_A01") == pytest.approx(LOG_4_3, abs=1e-12)
    assert model_phi(worked, "F_A00", "F_A01") == pytest.approx(1 / 3, abs=1e-12)


def test_unknown_code(worked):
    with pytest.raises(KeyError, match="F_Z99"):
        model_relative_risk(worked, "F_A00", "F_Z99")


def test_report_threshold_above_everything(worked):
    assert comorbidity_report(worked, threshold=100.0).pairs == []


def test_symmetric_model_has_no_asymmetric_pairs(worked):
    assert asymmetric_pairs(worked, 1e-9) == []
    table = comorbidity_report(worked, asymmetric_gap=1e-9)
    assert table.asymmetric == []


def test_report_sorted_and_truncated():
    rng = np.random.default_rng(12)
    model = fit(random_irreducible_counts(rng, 6, density=0.7), CodeIndex(generated_codes(6)))
    table = comorbidity_report(model, top_m=7, measure="rr")
    values = [r.rr for r in table.pairs]
    assert len(values) == 7 and values == sorted(values, reverse=True)
    full = comorbidity_report(model, top_m=1000, measure="alrr")
    assert all(r.alrr is not NO_COOCCURRENCE for r in full.pairs)


def test_write_report_format(worked):
    buf = io.StringIO()
    write_report(comorbidity_report(worked, measure="rr"), buf)
    # diagonal pairs are not reported
    assert buf.getvalue() == (
        "disease_i,disease_j,measure,value\n"
        "F_A00,F_A01,rr,1.33333\n"
        "F_A01,F_A00,rr,1.33333\n"
    )


def test_empirical_report_uses_err_label():
    prev = build_prevalence([("F_A", "F_B"), ("F_B",), ("F_C", "F_A")])
    buf = io.StringIO()
    write_report(comorbidity_report(prev=prev, source="empirical", measure="rr"), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "disease_i,disease_j,measure,value"
    assert lines[1] == "F_A,F_C,err,1.5"


def test_alrr_composition_on_fitted_model():
    rng = np.random.default_rng(77)
    model = fit(random_irreducible_counts(rng, 10, density=0.5), CodeIndex(generated_codes(10)))
    for i in model.index.codes:
        for j in model.index.codes:
            rr = model_relative_risk(model, i, j)
            m = model_alrr(model, i, j)
            if rr > 0:
                assert abs(m - abs(math.log(rr))) <= 1e-12
            else:
                assert m is NO_COOCCURRENCE


histories_st = st.lists(
    st.lists(st.sampled_from(["F_A", "F_B", "F_C", "F_D"]), min_size=1, max_size=4, unique=True),
    min_size=2, max_size=30,
)


@settings(max_examples=150, deadline=None)
@given(histories_st)
def test_empirical_phi_symmetric_and_bounded(histories):
    prev = build_prevalence(histories)
    codes = sorted(prev.per_code)
    for i in codes:
        for j in codes:
            try:
                a = empirical_measures(prev, i, j)
            except DegenerateMarginalError:
                continue
            b = empirical_measures(prev, j, i)
            assert a.phi == pytest.approx(b.phi, abs=1e-15)
            assert -1 - 1e-12 <= a.phi <= 1 + 1e-12
            assert a.err == b.err
