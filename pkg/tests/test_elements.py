import math

import numpy as np
import pytest

from cvfeedback.elements import (
    BeamSplitterParams,
    DetectionParams,
    NopaParams,
    ThreePortSample,
    beam_splitter,
    cascade,
    detector_chain,
    excess_noise,
    loss_channel,
    nopa_cavity,
    nopa_transfer,
    phase_shift,
    sample_transfer,
    squeezed_spectra,
)
from cvfeedback.network import spectrum_of
from cvfeedback.sideband import NoiseSpectrum, ParameterError, QuadratureCombo, physicality_check

from netgen import OMEGA, random_element

SUM = QuadratureCombo.amplitude_sum("out1", "out2")
DIFF = QuadratureCombo.phase_difference("out1", "out2")
ASUM_DIFF = QuadratureCombo.amplitude_difference("out1", "out2")
PSUM = QuadratureCombo.phase_sum("out1", "out2")


def nopa(x=0.186, eta=0.9, ratio=0.2, phase=math.pi, n_ex=0.0):
    return NopaParams(OMEGA / ratio, eta, x, phase, n_ex)


def output_spectrum(t, ports):
    s = spectrum_of(t)
    idx = [s.modes.index(p) for p in ports]
    n = s.n_modes
    idx += [n + k for k in idx]
    return NoiseSpectrum(s.matrix[np.ix_(idx, idx)], tuple(ports))


def test_beam_splitter_matrix():
    a = beam_splitter(BeamSplitterParams(0.5)).mode_matrix()
    np.testing.assert_allclose(np.abs(a), np.full((2, 2), 1 / math.sqrt(2)))
    one = beam_splitter(1.0).mode_matrix()
    np.testing.assert_allclose(one, [[1, 0], [0, -1]])
    with pytest.raises(ParameterError):
        BeamSplitterParams(1.2)


def test_beam_splitter_on_squeezed_input():
    # a single-mode squeezed input on port 1: X variance 0.5370, Y variance 1/0.5370
    v = 0.5370317963702527
    bs = beam_splitter(0.75)
    q_in = np.diag([v, 1.0, 1 / v, 1.0])
    from cvfeedback.elements import _to_ops, _to_quads

    sq = _to_quads(2) @ bs.matrix @ _to_ops(2)
    out = (sq @ q_in @ sq.conj().T).real
    assert out[0, 0] == pytest.approx(0.75 * v + 0.25, abs=1e-12)
    assert out[0, 0] == pytest.approx(0.6528, abs=1e-4)


def test_sample_amplitudes():
    s = sample_transfer(ThreePortSample(0.75, 0.14, 0.11))
    amps = [abs(s.element(p, "front")) for p in ("trans", "refl", "loss")]
    np.testing.assert_allclose(amps, [0.8660, 0.3742, 0.3317], atol=1e-4)
    assert sum(a * a for a in amps) == pytest.approx(1.0, abs=1e-12)
    assert s.commutator_defect() < 1e-12


def test_sample_edge_cases():
    ident = sample_transfer(ThreePortSample(1.0, 0.0, 0.0))
    assert abs(ident.element("trans", "front")) == pytest.approx(1.0)
    mirror = sample_transfer(ThreePortSample(0.0, 1.0, 0.0))
    assert abs(mirror.element("refl", "front")) == pytest.approx(1.0)
    with pytest.raises(ParameterError, match="budget"):
        ThreePortSample(0.5, 0.6, 0.11)
    with pytest.raises(ParameterError, match="degenerate"):
        sample_transfer(ThreePortSample(0.0, 0.0, 1.0))


def test_phase_shift():
    np.testing.assert_allclose(phase_shift(0.0).matrix, np.eye(2))
    twice = phase_shift(math.pi).matrix @ phase_shift(math.pi).matrix
    np.testing.assert_allclose(twice, np.eye(2), atol=1e-15)
    # quarter-turn swaps a squeezed X onto Y
    from cvfeedback.elements import _to_ops, _to_quads

    sq = (_to_quads(1) @ phase_shift(math.pi / 2).matrix @ _to_ops(1)).real
    out = sq @ np.diag([0.5, 2.0]) @ sq.T
    np.testing.assert_allclose(out, np.diag([2.0, 0.5]), atol=1e-12)


def test_detector_chain():
    np.testing.assert_allclose(detector_chain(DetectionParams(1.0), ("1",)).mode_matrix(),
                               [[1, 0], [0, -1]])
    eta = 0.7
    assert eta * 0.537 + (1 - eta) == pytest.approx(0.676, abs=1e-4)
    d = detector_chain(DetectionParams(eta), ("1",))
    s = output_spectrum(d, ("out1",))
    np.testing.assert_allclose(s.matrix, np.eye(2), atol=1e-12)
    with pytest.raises(ParameterError):
        DetectionParams(0.0)


def test_nopa_blocked_pump_is_vacuum():
    t = nopa_transfer(nopa(x=0.0, eta=1.0), OMEGA)
    s = output_spectrum(t, ("out1", "out2"))
    np.testing.assert_allclose(s.matrix, np.eye(4), atol=1e-12)


def test_nopa_squeezing_matches_closed_form_example():
    t = nopa_transfer(nopa(), OMEGA)
    s = output_spectrum(t, ("out1", "out2"))
    assert s.variance(SUM) == pytest.approx(0.537, abs=1e-3)
    # oracle: 1 + 0.9*4*0.186 / (0.814**2 + 0.2**2)
    assert s.variance(ASUM_DIFF) == pytest.approx(1.95304, abs=1e-5)
    assert s.variance(DIFF) == pytest.approx(s.variance(SUM), abs=1e-12)
    assert s.variance(PSUM) == pytest.approx(s.variance(ASUM_DIFF), abs=1e-12)
    assert s.variance(SUM) * s.variance(ASUM_DIFF) >= 1.0


@pytest.mark.parametrize("seed", range(20))
def test_nopa_matches_closed_form_random(seed):
    rng = np.random.default_rng(seed)
    p = NopaParams(OMEGA / rng.uniform(0.05, 3), rng.uniform(0.2, 1.0), rng.uniform(0, 0.98))
    minus, plus = squeezed_spectra(p, OMEGA)
    s = output_spectrum(nopa_transfer(p, OMEGA), ("out1", "out2"))
    assert s.variance(SUM) == pytest.approx(minus, abs=1e-9)
    assert s.variance(DIFF) == pytest.approx(minus, abs=1e-9)
    assert s.variance(ASUM_DIFF) == pytest.approx(plus, abs=1e-9)


def test_nopa_above_threshold():
    with pytest.raises(ParameterError, match="threshold"):
        nopa(x=1.0)


def test_excess_noise_adds_only_to_phase_difference():
    base = output_spectrum(nopa_transfer(nopa(), OMEGA), ("out1", "out2"))
    noisy = output_spectrum(nopa_transfer(nopa(n_ex=0.08), OMEGA), ("out1", "out2"))
    assert noisy.variance(DIFF) - base.variance(DIFF) == pytest.approx(0.08, abs=1e-12)
    for c in (SUM, ASUM_DIFF, PSUM):
        assert noisy.variance(c) == pytest.approx(base.variance(c), abs=1e-12)
    assert excess_noise(0.3).commutator_defect() < 1e-12


def _conj_partner_defect(build):
    """Lower blocks at W must equal conj of upper blocks at -W."""
    plus, minus = build(OMEGA), build(-OMEGA)
    a, b, c, d = plus.blocks()
    am, bm, _, _ = minus.blocks()
    return max(np.abs(c - bm.conj()).max(), np.abs(d - am.conj()).max())


def test_block_conjugate_structure():
    for t in (beam_splitter(0.3), phase_shift(0.7), sample_transfer(ThreePortSample(.5, .3, .2)),
              detector_chain(0.6), excess_noise(0.2)):
        a, b, c, d = t.blocks()
        assert np.abs(c - b.conj()).max() < 1e-12
        assert np.abs(d - a.conj()).max() < 1e-12
    p = nopa(x=0.5, phase=0.4)
    assert _conj_partner_defect(lambda w: nopa_transfer(p, w)) < 1e-12
    # at zero sideband frequency the plain conjugate structure holds
    a, b, c, d = nopa_transfer(p, 0.0).blocks()
    assert np.abs(d - a.conj()).max() < 1e-12


def test_random_dilations_preserve_commutators():
    rng = np.random.default_rng(7)
    for _ in range(200):
        assert random_element(rng).commutator_defect() < 1e-9


def test_passive_elements_keep_vacuum():
    rng = np.random.default_rng(3)
    for t in (beam_splitter(rng.uniform()), phase_shift(1.1), loss_channel(0.3),
              sample_transfer(ThreePortSample(0.6, 0.3, 0.1)), nopa_cavity(nopa(x=0.0), OMEGA)):
        s = spectrum_of(t)
        np.testing.assert_allclose(s.matrix, np.eye(2 * t.n_out), atol=1e-12)


def test_cascade_composes_like_matrix_product():
    first = beam_splitter(0.3)
    second = phase_shift(0.4, ("out1",), ("x",))
    c = cascade(first, second, {"out1": "out1"})
    assert c.outputs == ("out2", "x")
    expected = np.exp(0.4j) * first.element("out1", "in1")
    assert c.element("x", "in1") == pytest.approx(expected)
    assert c.element("out2", "in2") == pytest.approx(first.element("out2", "in2"))


def test_spectra_are_physical():
    rng = np.random.default_rng(11)
    for _ in range(50):
        assert physicality_check(spectrum_of(random_element(rng))).passed
