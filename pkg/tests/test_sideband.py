import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvfeedback.sideband import (
    AnalysisFrequency,
    ContractError,
    NoiseSpectrum,
    QuadratureCombo,
    db_to_variance,
    duan_sum,
    is_entangled,
    physicality_check,
    variance_to_db,
)


@pytest.mark.parametrize("db, expected, tol", [
    (0.0, 1.0, 0.0),
    (3.0103, 0.500, 1e-4),
    (2.7, 0.5370, 1e-4),
])
def test_db_to_variance(db, expected, tol):
    assert db_to_variance(db) == pytest.approx(expected, abs=tol)


def test_variance_to_db():
    assert variance_to_db(1.0) == 0.0
    assert variance_to_db(0.5370) == pytest.approx(2.700, abs=1e-3)
    with pytest.raises(ContractError):
        variance_to_db(0.0)
    with pytest.raises(ContractError):
        variance_to_db(-1.0)


def test_db_rejects_nonfinite():
    with pytest.raises(ContractError):
        db_to_variance(float("nan"))


@given(st.floats(-30, 30))
def test_db_round_trip(db):
    assert variance_to_db(db_to_variance(db)) == pytest.approx(db, abs=1e-12)


@pytest.mark.parametrize("vs, vd, expected, entangled", [
    (1.0, 1.0, 2.0, False),
    (0.5370, 0.6166, 1.154, True),
    (0.6026, 0.6918, 1.294, True),
])
def test_duan_sum(vs, vd, expected, entangled):
    d = duan_sum(vs, vd)
    assert d == pytest.approx(expected, abs=1e-3)
    assert is_entangled(d) is entangled


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(1e-6, 1.0))
def test_duan_symmetric_and_monotone(a, b, h):
    assert duan_sum(a, b) == duan_sum(b, a)
    assert duan_sum(a + h, b) > duan_sum(a, b)
    assert duan_sum(a, b + h) > duan_sum(a, b)


def test_duan_rejects_nonpositive():
    with pytest.raises(ContractError):
        duan_sum(0.0, 1.0)


def test_physicality_examples():
    assert physicality_check(np.eye(2)).passed
    assert physicality_check(np.diag([0.5, 2.0])).passed
    report = physicality_check(np.diag([0.5, 0.5]))
    assert not report.passed
    assert report.worst_eigenvalue == pytest.approx(-0.5)


def test_physicality_rejects_asymmetric():
    with pytest.raises(ContractError):
        physicality_check(np.array([[1.0, 0.2], [0.0, 1.0]]))


def test_combo_vectors():
    modes = ("1", "2")
    s = QuadratureCombo.amplitude_sum("1", "2").vector(modes)
    d = QuadratureCombo.phase_difference("1", "2").vector(modes)
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(s, [r, r, 0, 0])
    np.testing.assert_allclose(d, [0, 0, r, -r])
    with pytest.raises(ContractError):
        QuadratureCombo({"1": (0.0, 0.0)})
    with pytest.raises(ContractError):
        QuadratureCombo.amplitude_sum("1", "3").vector(modes)


def test_vacuum_spectrum_gives_unit_combos():
    vac = NoiseSpectrum.vacuum(("a", "b"))
    assert vac.variance(QuadratureCombo.amplitude_sum("a", "b")) == pytest.approx(1.0)
    assert vac.variance(QuadratureCombo.phase_difference("a", "b")) == pytest.approx(1.0)


def test_analysis_frequency():
    f = AnalysisFrequency.from_hz(2e6)
    assert f.omega == pytest.approx(2 * math.pi * 2e6)
    assert f.hz == pytest.approx(2e6)
    with pytest.raises(ValueError):
        AnalysisFrequency(-1.0)
