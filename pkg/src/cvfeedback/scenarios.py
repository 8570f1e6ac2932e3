"""Computable reproductions of the squeezing budget and feedback predictions.

All squeezing values quoted in dB are *detected* values, i.e. after the
detection efficiency ``cfg.detection.efficiency``. The source is calibrated so
that its detected spectrum hits the target dB values; the cavity itself is
therefore squeezed more strongly than what is seen at the detectors.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .elements import (
    DetectionParams,
    NopaParams,
    ThreePortSample,
    detector_chain,
    loss_channel,
    nopa_transfer,
    sample_transfer,
)
from .network import InstabilityError, Network, measure_combo, solve, stability_margin
from .sideband import (
    AnalysisFrequency,
    ContractError,
    NoiseSpectrum,
    ParameterError,
    QuadratureCombo,
    db_to_variance,
    duan_sum,
    is_entangled,
    variance_to_db,
)

DEFAULT_FREQUENCY_HZ = 2e6
DEFAULT_SIDEBAND_RATIO = 0.2  # analysis frequency / kappa_total
DEFAULT_KAPPA = 2 * math.pi * DEFAULT_FREQUENCY_HZ / DEFAULT_SIDEBAND_RATIO

# Pinned by calibrate_source on the detected targets 2.7 / 2.1 dB at efficiency 0.7.
DEFAULT_PUMP_PARAMETER = 0.3345578427222805
DEFAULT_EXCESS_NOISE = 0.11366172213032738
# Pinned by calibrate_feedback_efficiency: 0.30 dB enhancement at R = 0.14.
DEFAULT_FEEDBACK_EFFICIENCY = 0.2366

SUM = QuadratureCombo.amplitude_sum("1", "2")
DIFF = QuadratureCombo.phase_difference("1", "2")


class CalibrationError(ValueError):
    """Target squeezing is out of reach of the source model."""


class UnphysicalDetectionError(ValueError):
    """Detected variance is below what the stated efficiency allows."""


# ------------------------------------------------------------------- config


@dataclass(frozen=True)
class FeedbackSettings:
    """Loop closing the sample reflection back into the source.

    ``efficiency`` is the power mode-matching of the returned beam into the
    cavity mode; ``delay`` is the sideband propagation delay in seconds.
    """

    enabled: bool = True
    detuning: float = 0.0
    efficiency: float = DEFAULT_FEEDBACK_EFFICIENCY
    delay: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ParameterError(f"feedback efficiency must lie in [0, 1], got {self.efficiency}")
        if not math.isfinite(self.detuning):
            raise ParameterError("feedback detuning must be finite")
        if self.delay < 0:
            raise ParameterError("feedback delay must be >= 0")


@dataclass(frozen=True)
class AnalysisSettings:
    frequency_hz: float = DEFAULT_FREQUENCY_HZ

    def __post_init__(self):
        AnalysisFrequency.from_hz(self.frequency_hz)

    @property
    def frequency(self):
        return AnalysisFrequency.from_hz(self.frequency_hz)


@dataclass(frozen=True)
class ClassicalSettings:
    """Carrier-level cavity model and the piezo triangle scan."""

    m3_reflectivity: float = 0.96
    scan_amplitude: float = 10.0  # volts, peak of the triangle
    scan_period: float = 1.0  # seconds
    volts_to_radians: float = 1.0
    scan_duration: float = 2.0
    samples: int = 2001

    def __post_init__(self):
        if not 0.0 <= self.m3_reflectivity <= 1.0:
            raise ParameterError("m3_reflectivity must lie in [0, 1]")
        if self.scan_period <= 0 or self.scan_duration <= 0:
            raise ParameterError("scan period and duration must be positive")
        if int(self.samples) != self.samples or self.samples < 2:
            raise ParameterError("samples must be an integer >= 2")


@dataclass(frozen=True)
class CalibrationTargets:
    """Detected squeezing of the bare source used to pin the pump and excess noise."""

    sum_db: float = 2.7
    diff_db: float = 2.1


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 2:
            raise ParameterError("sweep steps must be an integer >= 2")
        if self.start == self.stop:
            raise ParameterError("sweep start and stop must differ")

    def values(self):
        return np.linspace(self.start, self.stop, int(self.steps))


def _default_nopa():
    return NopaParams(
        kappa_total=DEFAULT_KAPPA,
        escape_efficiency=0.9,
        pump_parameter=DEFAULT_PUMP_PARAMETER,
        pump_phase=math.pi,
        excess_phase_noise=DEFAULT_EXCESS_NOISE,
    )


@dataclass(frozen=True)
class ScenarioConfig:
    nopa: NopaParams = field(default_factory=_default_nopa)
    sample: ThreePortSample = ThreePortSample(0.75, 0.14, 0.11)
    feedback: FeedbackSettings = FeedbackSettings()
    detection: DetectionParams = DetectionParams(0.7)
    analysis: AnalysisSettings = AnalysisSettings()
    classical: ClassicalSettings = ClassicalSettings()
    calibration: CalibrationTargets = CalibrationTargets()
    sweep: SweepSpec | None = None

    def replace(self, path, value):
        """Copy with one dotted field (``"sample.r"``) changed."""
        section, _, key = path.partition(".")
        if section not in {f.name for f in dataclasses.fields(self)} or not key:
            raise ContractError(f"unknown config path {path!r}")
        current = getattr(self, section)
        if current is None or key not in {f.name for f in dataclasses.fields(current)}:
            raise ContractError(f"unknown config path {path!r}")
        return dataclasses.replace(self, **{section: dataclasses.replace(current, **{key: value})})

    def with_reflectivity(self, r):
        """Trade reflectivity against transmission at fixed sample loss."""
        t = 1.0 - self.sample.l - r
        return dataclasses.replace(self, sample=ThreePortSample(max(t, 0.0), r, self.sample.l))


# ------------------------------------------------------------- networks


def _source(net, cfg, pump=None, excess=None):
    p = cfg.nopa
    if pump is not None or excess is not None:
        p = dataclasses.replace(
            p,
            pump_parameter=p.pump_parameter if pump is None else pump,
            excess_phase_noise=p.excess_phase_noise if excess is None else excess,
        )
    net.add("nopa", partial(nopa_transfer, p))
    net.vacuum("nopa.loss1", "nopa.loss2", "nopa.anc")


def _detect(net, cfg, feed):
    det = detector_chain(cfg.detection)
    net.add("det", det)
    for k in "12":
        net.connect(feed(k), f"det.in{k}")
        net.vacuum(f"det.vac{k}")
        net.probe(f"det.out{k}", k)


def source_network(cfg, pump=None, excess=None):
    """Source followed directly by detection."""
    net = Network()
    _source(net, cfg, pump, excess)
    net.vacuum("nopa.in1", "nopa.in2")
    _detect(net, cfg, lambda k: f"nopa.out{k}")
    return net


def eot_network(cfg, closed, pump=None, excess=None):
    """Source, sample and detection; ``closed`` returns the sample reflection.

    With the loop open the reflected ports end on unused sinks.
    """
    net = Network()
    _source(net, cfg, pump, excess)
    smp = sample_transfer(cfg.sample)
    fb = cfg.feedback
    for k in "12":
        net.add(f"sample{k}", smp)
        net.connect(f"nopa.out{k}", f"sample{k}.front")
        net.vacuum(f"sample{k}.back", f"sample{k}.loss")
        if closed:
            net.add(f"match{k}", loss_channel(fb.efficiency))
            net.vacuum(f"match{k}.vac")
            net.connect(f"sample{k}.refl", f"match{k}.in", phase=fb.detuning, delay=fb.delay)
            net.connect(f"match{k}.out", f"nopa.in{k}")
        else:
            net.vacuum(f"nopa.in{k}")
            net.probe(f"sample{k}.refl", f"refl{k}")
    _detect(net, cfg, lambda k: f"sample{k}.trans")
    return net


def stability_frequencies(cfg):
    # the cavity response is flat outside two decades either side of kappa
    kappa = cfg.nopa.kappa_total
    return np.concatenate([[0.0], kappa * np.logspace(-2, 2, 21)])


def _solve_checked(net, cfg):
    margin, where = stability_margin(net, stability_frequencies(cfg))
    if margin >= 1.0:
        raise InstabilityError(
            f"feedback-induced instability / oscillation threshold: loop gain {margin:.4g} "
            f"at {where / (2 * math.pi):.4g} Hz"
        )
    return solve(net, cfg.analysis.frequency)


@dataclass(frozen=True)
class Entanglement:
    sum_db: float
    diff_db: float
    duan: float

    @property
    def entangled(self):
        return is_entangled(self.duan)


def _entanglement(result):
    vs = measure_combo(result, SUM)
    vd = measure_combo(result, DIFF)
    return Entanglement(variance_to_db(vs), variance_to_db(vd), duan_sum(vs, vd))


# ------------------------------------------------------------ scenarios


def source_entanglement(cfg):
    """Detected squeezing of the bare source and its Duan sum."""
    return _entanglement(solve(source_network(cfg), cfg.analysis.frequency))


def open_loop_transmission(v_db, t):
    """Squeezing left after a beam splitter of power transmissivity ``t``.

    ``-10 lg(1 - t (1 - 10^(-v/10)))``.
    """
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"transmissivity must lie in [0, 1], got {t}")
    v = db_to_variance(v_db)
    return variance_to_db(1.0 - t * (1.0 - v))


def printed_transmission_formula(v_db, t):
    """``-10 lg(1 - t 10^(-v/10))``: uncorrected variant, kept for comparison only."""
    return -10.0 * math.log10(1.0 - t * db_to_variance(v_db))


@dataclass(frozen=True)
class FeedbackResult:
    sum_db: float
    diff_db: float
    duan: float
    enhancement_db: float
    open_loop: Entanglement


def feedback_eot(cfg):
    """Transmitted entanglement with the feedback loop closed and open."""
    open_ = _entanglement(solve(eot_network(cfg, closed=False), cfg.analysis.frequency))
    if not cfg.feedback.enabled:
        return FeedbackResult(open_.sum_db, open_.diff_db, open_.duan, 0.0, open_)
    closed = _entanglement(_solve_checked(eot_network(cfg, closed=True), cfg))
    return FeedbackResult(closed.sum_db, closed.diff_db, closed.duan,
                          closed.sum_db - open_.sum_db, open_)


def d2_intensity(theta, m3_reflectivity, sample_reflectivity):
    """Carrier power reflected by the M3/sample cavity, relative to the input."""
    r1 = math.sqrt(m3_reflectivity)
    r2 = math.sqrt(sample_reflectivity)
    ph = np.exp(1j * np.asarray(theta, dtype=float))
    out = np.abs((-r1 + r2 * ph) / (1.0 - r1 * r2 * ph)) ** 2
    return float(out) if out.ndim == 0 else out


def circulating_power(theta, m3_reflectivity, sample_reflectivity):
    """Intracavity power of the M3/sample cavity relative to the input."""
    r1 = math.sqrt(m3_reflectivity)
    r2 = math.sqrt(sample_reflectivity)
    ph = np.exp(1j * np.asarray(theta, dtype=float))
    out = (1.0 - m3_reflectivity) / np.abs(1.0 - r1 * r2 * ph) ** 2
    return float(out) if out.ndim == 0 else out


def _map(fn, values, jobs):
    if jobs and jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, values))
    return [fn(v) for v in values]


def _sweep_values(cfg, parameter, default):
    spec = cfg.sweep
    if spec is None:
        return default.values()
    if spec.parameter != parameter:
        raise ContractError(f"this scenario sweeps {parameter!r}, not {spec.parameter!r}")
    return spec.values()


def detuning_sweep(cfg, jobs=1):
    """Rows ``(theta, d2_intensity, sum_db)`` over the loop detuning."""
    thetas = _sweep_values(cfg, "feedback.detuning",
                           SweepSpec("feedback.detuning", -math.pi, math.pi, 201))

    def point(theta):
        c = cfg.replace("feedback.detuning", float(theta))
        res = feedback_eot(c)
        d2 = d2_intensity(theta, cfg.classical.m3_reflectivity, cfg.sample.r)
        return float(theta), d2, res.sum_db, res.duan

    return _map(point, thetas, jobs)


def reflectivity_sweep(cfg, jobs=1):
    """Rows ``(R, T, sum_db_on, sum_db_off, gap_db, duan_on)`` at fixed sample loss."""
    rs = _sweep_values(cfg, "sample.r", SweepSpec("sample.r", 0.0, 0.5, 51))

    def point(r):
        c = cfg.with_reflectivity(float(r))
        res = feedback_eot(c)
        return (float(r), c.sample.t, res.sum_db, res.open_loop.sum_db,
                res.sum_db - res.open_loop.sum_db, res.duan)

    return _map(point, rs, jobs)


def triangle_wave(t, amplitude, period):
    """Symmetric triangle between ``-amplitude`` and ``+amplitude`` starting at the trough."""
    phase = np.mod(np.asarray(t, dtype=float) / period, 1.0)
    return amplitude * (4.0 * np.abs(phase - 0.5) - 1.0) * -1.0


def cavity_scan(cfg):
    """Time trace ``(t, drive_voltage, circulating_power)`` of a piezo scan."""
    c = cfg.classical
    t = np.linspace(0.0, c.scan_duration, int(c.samples))
    volts = triangle_wave(t, c.scan_amplitude, c.scan_period)
    power = circulating_power(c.volts_to_radians * volts, c.m3_reflectivity, cfg.sample.r)
    return t, volts, power


def snl_calibration(cfg):
    """Closed-loop spectrum with the pump blocked; must be the vacuum."""
    net = eot_network(cfg, closed=cfg.feedback.enabled, pump=0.0, excess=0.0)
    res = solve(net, cfg.analysis.frequency)
    return _restrict(res.spectrum, ("1", "2"))


def _restrict(spectrum, modes):
    n = spectrum.n_modes
    idx = [spectrum.modes.index(m) for m in modes]
    idx = idx + [n + k for k in idx]
    return NoiseSpectrum(spectrum.matrix[np.ix_(idx, idx)], tuple(modes))


def detection_correction(detected_db, efficiency):
    """Infer the squeezing before a detector of the given efficiency."""
    if not 0.0 < efficiency <= 1.0:
        raise ParameterError("efficiency must lie in (0, 1]")
    v_det = db_to_variance(detected_db)
    if not v_det > 1.0 - efficiency:
        raise UnphysicalDetectionError(
            f"unphysical detected value for stated efficiency: variance {v_det:.6g} "
            f"<= {1.0 - efficiency:.6g}"
        )
    return variance_to_db((v_det - (1.0 - efficiency)) / efficiency)


@dataclass(frozen=True)
class SourceCalibration:
    pump_parameter: float
    excess_phase_noise: float
    achieved_sum_db: float
    achieved_diff_db: float


def _s_minus(x, escape_efficiency, sideband_ratio):
    return 1.0 - escape_efficiency * 4.0 * x / ((1.0 + x) ** 2 + sideband_ratio ** 2)


def calibrate_source(target_sum_db, target_diff_db, escape_efficiency=0.9,
                     sideband_ratio=DEFAULT_SIDEBAND_RATIO):
    """Fit pump parameter and excess phase noise to two squeezing targets.

    The pump parameter is found by Brent root finding on the closed-form
    squeezed spectrum, which is monotone in the pump on ``[0, 1)``.
    """
    supremum = variance_to_db(_s_minus(1.0, escape_efficiency, sideband_ratio))
    if target_sum_db >= supremum:
        raise CalibrationError(
            f"target {target_sum_db} dB is infeasible: supremum is {supremum:.4f} dB at x -> 1"
        )
    if target_sum_db < 0:
        raise CalibrationError("target squeezing must be >= 0 dB")
    v_sum = db_to_variance(target_sum_db)
    if target_sum_db == 0:
        x = 0.0
    else:
        x = brentq(lambda y: _s_minus(y, escape_efficiency, sideband_ratio) - v_sum,
                   0.0, 1.0 - 1e-15, xtol=1e-15, rtol=1e-15)
    achieved = _s_minus(x, escape_efficiency, sideband_ratio)
    n_ex = db_to_variance(target_diff_db) - achieved
    if n_ex < -1e-15:
        raise CalibrationError("phase-difference target exceeds the amplitude-sum target; "
                               "excess noise would be negative")
    n_ex = max(n_ex, 0.0)
    return SourceCalibration(x, n_ex, variance_to_db(achieved), variance_to_db(achieved + n_ex))


def calibrate_detected_source(cfg):
    """Calibrate the source so that the *detected* spectrum hits ``cfg.calibration``."""
    eff = cfg.detection.efficiency
    omega = cfg.analysis.frequency.omega
    return calibrate_source(
        detection_correction(cfg.calibration.sum_db, eff),
        detection_correction(cfg.calibration.diff_db, eff),
        cfg.nopa.escape_efficiency,
        omega / cfg.nopa.kappa_total,
    )


def calibrated_config(cfg):
    """``cfg`` with pump parameter and excess noise refitted to its targets."""
    cal = calibrate_detected_source(cfg)
    return dataclasses.replace(cfg, nopa=dataclasses.replace(
        cfg.nopa, pump_parameter=cal.pump_parameter, excess_phase_noise=cal.excess_phase_noise))


def calibrate_feedback_efficiency(cfg, target_db=0.3):
    """Return-path efficiency giving ``target_db`` of feedback enhancement."""
    def gap(e):
        return feedback_eot(cfg.replace("feedback.efficiency", e)).enhancement_db - target_db

    if gap(1.0) < 0:
        raise CalibrationError(f"enhancement {target_db} dB unreachable even at unit efficiency")
    return brentq(gap, 0.0, 1.0, xtol=1e-12)


OBJECTIVES = ("max_sum_squeezing", "min_d2_intensity")


@dataclass(frozen=True)
class DetuningOptimum:
    theta: float
    value: float
    degenerate: bool


def optimize_detuning(cfg, objective="max_sum_squeezing", grid=64, xtol=1e-6):
    """Locate the best loop detuning on ``(-pi, pi]``.

    A coarse grid picks the bracket, then golden-section search refines it.
    """
    if objective == "max_sum_squeezing":
        def f(theta):
            return -feedback_eot(cfg.replace("feedback.detuning", float(theta))).sum_db
    elif objective == "min_d2_intensity":
        def f(theta):
            return d2_intensity(theta, cfg.classical.m3_reflectivity, cfg.sample.r)
    else:
        raise ContractError(f"objective must be one of {OBJECTIVES}, got {objective!r}")

    thetas = -math.pi + 2 * math.pi * (np.arange(grid) + 1) / grid
    values = np.array([f(t) for t in thetas])
    if not np.all(np.isfinite(values)):
        raise ContractError("objective is not finite over the detuning range")
    if values.max() - values.min() < 1e-12:
        return DetuningOptimum(0.0, float(values[0]), True)
    k = int(np.argmin(values))
    step = 2 * math.pi / grid
    lo, mid, hi = thetas[k] - step, thetas[k], thetas[k] + step
    res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", tol=xtol / max(abs(mid), 1.0))
    theta = float(np.angle(np.exp(1j * res.x)))
    if theta <= -math.pi:
        theta += 2 * math.pi
    value = float(res.fun)
    if objective == "max_sum_squeezing":
        value = -value
    return DetuningOptimum(theta, value, False)
