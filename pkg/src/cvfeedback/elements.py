"""Optical elements as Bogoliubov transfers on the doubled sideband basis.

A transfer acts on ``(a_1(W) ... a_M(W), a_1^dag(-W) ... a_M^dag(-W))``. Every
loss channel carries an explicit vacuum port, so each element is a complete
dilation obeying ``T eta T^dag = eta`` with ``eta = diag(I, -I)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .sideband import ContractError, ParameterError

BUDGET_TOL = 1e-9


@dataclass(frozen=True)
class BogoliubovTransfer:
    """Linear map from labelled input ports to labelled output ports.

    Each port carries one optical mode. ``matrix`` has shape
    ``(2 * len(outputs), 2 * len(inputs))``.
    """

    matrix: np.ndarray
    inputs: tuple
    outputs: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2 * len(self.outputs), 2 * len(self.inputs)):
            raise ContractError(
                f"matrix shape {m.shape} does not match {len(self.outputs)} outputs "
                f"x {len(self.inputs)} inputs"
            )
        if len(set(self.inputs)) != len(self.inputs) or len(set(self.outputs)) != len(self.outputs):
            raise ContractError("port labels must be unique")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def n_in(self):
        return len(self.inputs)

    @property
    def n_out(self):
        return len(self.outputs)

    def blocks(self):
        """Return ``(A, B, C, D)`` with ``matrix = [[A, B], [C, D]]``."""
        no, ni = self.n_out, self.n_in
        m = self.matrix
        return m[:no, :ni], m[:no, ni:], m[no:, :ni], m[no:, ni:]

    def mode_matrix(self):
        """Annihilation-to-annihilation block ``A``."""
        return self.blocks()[0]

    def commutator_defect(self):
        """Max-abs deviation of ``T eta T^dag`` from ``eta``; needs a square dilation."""
        if self.n_in != self.n_out:
            raise ContractError("commutator check needs as many outputs as inputs")
        eta = _eta(self.n_in)
        return float(np.abs(self.matrix @ eta @ self.matrix.conj().T - eta).max())

    def element(self, out_port, in_port):
        """Annihilation amplitude from ``in_port`` to ``out_port``."""
        return self.matrix[self.outputs.index(out_port), self.inputs.index(in_port)]

    def renamed(self, prefix):
        return BogoliubovTransfer(
            self.matrix,
            tuple(prefix + p for p in self.inputs),
            tuple(prefix + p for p in self.outputs),
        )


def _eta(n):
    return np.diag(np.concatenate([np.ones(n), -np.ones(n)]))


def from_mode_matrix(u, inputs, outputs):
    """Lift a passive mode matrix ``U`` to ``[[U, 0], [0, conj(U)]]``."""
    u = np.asarray(u, dtype=complex)
    z = np.zeros_like(u)
    return BogoliubovTransfer(np.block([[u, z], [z, u.conj()]]), inputs, outputs)


def from_quadrature_map(s, inputs, outputs):
    """Convert a real map on ``(X..., Y...)`` to the doubled operator basis."""
    s = np.asarray(s, dtype=float)
    no, ni = len(outputs), len(inputs)
    return BogoliubovTransfer(_to_ops(no) @ s @ _to_quads(ni), inputs, outputs)


def _to_quads(n):
    eye = np.eye(n)
    return np.block([[eye, eye], [-1j * eye, 1j * eye]])


def _to_ops(n):
    eye = np.eye(n)
    return 0.5 * np.block([[eye, 1j * eye], [eye, -1j * eye]])


def direct_sum(*transfers):
    """Place transfers side by side; port labels must not collide."""
    inputs = sum((t.inputs for t in transfers), ())
    outputs = sum((t.outputs for t in transfers), ())
    ni, no = len(inputs), len(outputs)
    m = np.zeros((2 * no, 2 * ni), dtype=complex)
    r = c = 0
    for t in transfers:
        a, b, cc, d = t.blocks()
        rows = slice(r, r + t.n_out)
        cols = slice(c, c + t.n_in)
        rows_d = slice(no + r, no + r + t.n_out)
        cols_d = slice(ni + c, ni + c + t.n_in)
        m[rows, cols], m[rows, cols_d] = a, b
        m[rows_d, cols], m[rows_d, cols_d] = cc, d
        r += t.n_out
        c += t.n_in
    return BogoliubovTransfer(m, inputs, outputs)


def cascade(first, second, links):
    """Feed outputs of ``first`` into inputs of ``second``.

    ``links`` maps output labels of ``first`` to input labels of ``second``.
    The result takes the inputs of ``first`` followed by the unlinked inputs
    of ``second``, and emits the unlinked outputs of ``first`` followed by the
    outputs of ``second``.
    """
    if set(links) - set(first.outputs) or set(links.values()) - set(second.inputs):
        raise ContractError("cascade links reference unknown ports")
    free_in = tuple(p for p in second.inputs if p not in links.values())
    free_out = tuple(p for p in first.outputs if p not in links)
    inputs = first.inputs + free_in
    outputs = free_out + second.outputs
    if len(set(inputs)) != len(inputs) or len(set(outputs)) != len(outputs):
        raise ContractError("cascade would produce duplicate port labels")

    # route: second's inputs drawn from first's outputs or from new free inputs
    n_mid = first.n_out + len(free_in)
    route = np.zeros((second.n_in, n_mid))
    for j, port in enumerate(second.inputs):
        if port in free_in:
            route[j, first.n_out + free_in.index(port)] = 1.0
        else:
            src = next(k for k, v in links.items() if v == port)
            route[j, first.outputs.index(src)] = 1.0
    mid = direct_sum(first, _identity(free_in, "__pass__"))
    route_d = np.block([[route, np.zeros_like(route)], [np.zeros_like(route), route]])
    through = second.matrix @ route_d @ mid.matrix

    keep = [first.outputs.index(p) for p in free_out]
    keep_rows = keep + [first.n_out + k for k in keep]
    kept = first.matrix[keep_rows]
    kept = np.hstack([kept[:, :first.n_in], np.zeros((len(keep_rows), len(free_in))),
                      kept[:, first.n_in:], np.zeros((len(keep_rows), len(free_in)))])
    nk = len(free_out)
    m = np.vstack([kept[:nk], through[:second.n_out], kept[nk:], through[second.n_out:]])
    return BogoliubovTransfer(m, inputs, outputs)


def _identity(ports, prefix=""):
    n = len(ports)
    return from_mode_matrix(np.eye(n), tuple(prefix + p for p in ports),
                            tuple(prefix + p for p in ports))


def identity(ports=("in",)):
    """Pass-through on the given ports (same labels on both sides)."""
    return _identity(tuple(ports))


# ---------------------------------------------------------------- parameters


@dataclass(frozen=True)
class BeamSplitterParams:
    transmissivity: float

    def __post_init__(self):
        if not 0.0 <= self.transmissivity <= 1.0:
            raise ParameterError(f"transmissivity must lie in [0, 1], got {self.transmissivity}")


@dataclass(frozen=True)
class ThreePortSample:
    """Lossy partially reflecting sample: power fractions T + R + L = 1."""

    t: float
    r: float
    l: float  # noqa: E741

    def __post_init__(self):
        problems = [f"{k} = {v} is negative" for k, v in
                    (("t", self.t), ("r", self.r), ("l", self.l)) if v < 0]
        if abs(self.t + self.r + self.l - 1.0) > BUDGET_TOL:
            problems.append(f"t + r + l = {self.t + self.r + self.l:.12g} != 1")
        if problems:
            raise ParameterError("sample budget invalid: " + "; ".join(problems))


@dataclass(frozen=True)
class NopaParams:
    """Below-threshold nondegenerate parametric amplifier.

    Attributes
    ----------
    kappa_total : float
        Total cavity amplitude decay rate in rad/s.
    escape_efficiency : float
        ``kappa_out / kappa_total``.
    pump_parameter : float
        Gain normalized to ``kappa_total``; threshold at 1.
    pump_phase : float
        Pump phase in radians; pi selects deamplification.
    excess_phase_noise : float
        Classical noise (shot-noise units) added to ``(Y1 - Y2)/sqrt2`` at the output.
    """

    kappa_total: float
    escape_efficiency: float = 0.9
    pump_parameter: float = 0.0
    pump_phase: float = math.pi
    excess_phase_noise: float = 0.0

    def __post_init__(self):
        if not self.kappa_total > 0:
            raise ParameterError("kappa_total must be positive")
        if not 0.0 < self.escape_efficiency <= 1.0:
            raise ParameterError("escape_efficiency must lie in (0, 1]")
        if self.pump_parameter >= 1.0:
            raise ParameterError(
                f"pump_parameter {self.pump_parameter} is at or above the oscillation threshold 1"
            )
        if self.pump_parameter < 0:
            raise ParameterError("pump_parameter must be >= 0")
        if self.excess_phase_noise < 0:
            raise ParameterError("excess_phase_noise must be >= 0")


@dataclass(frozen=True)
class DetectionParams:
    efficiency: float

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ParameterError(f"detection efficiency must lie in (0, 1], got {self.efficiency}")


# ------------------------------------------------------------------ elements


def beam_splitter(p, inputs=("in1", "in2"), outputs=("out1", "out2")):
    """Real splitter ``[[sqrt T, sqrt(1-T)], [sqrt(1-T), -sqrt T]]``."""
    if not isinstance(p, BeamSplitterParams):
        p = BeamSplitterParams(p)
    t = math.sqrt(p.transmissivity)
    r = math.sqrt(1.0 - p.transmissivity)
    return from_mode_matrix([[t, r], [r, -t]], inputs, outputs)


def loss_channel(transmissivity, inputs=("in", "vac"), outputs=("out", "dump")):
    """Attenuator as a splitter whose second input is a vacuum port."""
    return beam_splitter(BeamSplitterParams(transmissivity), inputs, outputs)


def phase_shift(theta, inputs=("in",), outputs=("out",)):
    if not math.isfinite(theta):
        raise ParameterError("phase must be finite")
    return from_mode_matrix([[np.exp(1j * theta)]], inputs, outputs)


def sample_transfer(s):
    """Sample as absorption/scattering loss followed by a T/R splitter.

    Ports: inputs ``front`` (cavity side), ``back``, ``loss``; outputs
    ``trans``, ``refl``, ``loss``. From ``front`` the amplitudes are
    ``(sqrt T, sqrt R, sqrt L)``.
    """
    if s.l >= 1.0 - BUDGET_TOL:
        raise ParameterError("degenerate sample: all light is lost (l = 1)")
    t_split = min(1.0, s.t / (1.0 - s.l))
    absorb = loss_channel(1.0 - s.l, inputs=("front", "loss"), outputs=("lossy", "loss"))
    split = beam_splitter(BeamSplitterParams(t_split), inputs=("lossy", "back"),
                          outputs=("trans", "refl"))
    t = cascade(absorb, split, {"lossy": "lossy"})
    return _reorder(t, ("front", "back", "loss"), ("trans", "refl", "loss"))


def _reorder(t, inputs, outputs):
    ci = [t.inputs.index(p) for p in inputs]
    co = [t.outputs.index(p) for p in outputs]
    ni, no = t.n_in, t.n_out
    m = t.matrix[np.ix_(co + [no + k for k in co], ci + [ni + k for k in ci])]
    return BogoliubovTransfer(m, inputs, outputs)


def detector_chain(p, modes=("1", "2")):
    """Independent efficiency loss on each detected mode.

    Ports per mode ``k``: inputs ``in{k}``, ``vac{k}``; outputs ``out{k}``, ``dump{k}``.
    """
    if not isinstance(p, DetectionParams):
        p = DetectionParams(p)
    parts = [loss_channel(p.efficiency, inputs=(f"in{k}", f"vac{k}"),
                          outputs=(f"out{k}", f"dump{k}")) for k in modes]
    return direct_sum(*parts)


def excess_noise(n_ex):
    """Add classical noise of variance ``n_ex`` to ``(Y1 - Y2)/sqrt2``.

    Dilated as a controlled-phase shear between the difference mode and an
    ancilla in vacuum, which leaves every X quadrature untouched.
    """
    if n_ex < 0:
        raise ParameterError("excess noise must be >= 0")
    g = math.sqrt(n_ex) / math.sqrt(2.0)
    shear = np.zeros((3, 3))
    shear[0, 2] = shear[2, 0] = g
    shear[1, 2] = shear[2, 1] = -g
    s = np.block([[np.eye(3), np.zeros((3, 3))], [shear, np.eye(3)]])
    return from_quadrature_map(s, ("in1", "in2", "anc"), ("out1", "out2", "anc"))


def nopa_cavity(p, omega):
    """Two-mode parametric cavity without the excess-noise stage.

    Solves ``(k + iW) a_1 = eps a_2^dag + sqrt(2 k_out) A_1 + sqrt(2 k_loss) B_1``
    (and 1 <-> 2) with ``eps = x k e^{i phase}``; outputs
    ``A_out = sqrt(2 k_out) a - A_in`` and ``B_out = sqrt(2 k_loss) a - B_in``.
    """
    kappa = p.kappa_total
    k_out = p.escape_efficiency * kappa
    k_loss = kappa - k_out
    eps = p.pump_parameter * kappa * np.exp(1j * p.pump_phase)
    lam = kappa + 1j * omega

    # intracavity vector c = (a1, a2, a1dag, a2dag); M c = K u
    m = lam * np.eye(4, dtype=complex)
    m[0, 3] = m[1, 2] = -eps
    m[2, 1] = m[3, 0] = -np.conj(eps)
    # input vector u = (A1, A2, B1, B2, A1dag, A2dag, B1dag, B2dag)
    couple = np.zeros((4, 8))
    go, gl = math.sqrt(2 * k_out), math.sqrt(2 * k_loss)
    for j in range(2):
        couple[j, j] = go
        couple[j, 2 + j] = gl
        couple[2 + j, 4 + j] = go
        couple[2 + j, 6 + j] = gl
    cav = np.linalg.solve(m, couple)

    # outputs (Aout1, Aout2, Bout1, Bout2, daggers...)
    emit = np.zeros((8, 4))
    for j in range(2):
        emit[j, j] = go
        emit[2 + j, j] = gl
        emit[4 + j, 2 + j] = go
        emit[6 + j, 2 + j] = gl
    t = emit @ cav - np.eye(8)
    return BogoliubovTransfer(t, ("in1", "in2", "loss1", "loss2"),
                              ("out1", "out2", "loss1", "loss2"))


def nopa_transfer(p, f):
    """Parametric source: cavity followed by the excess phase-noise stage.

    ``f`` is an :class:`AnalysisFrequency` or an angular frequency in rad/s.
    Ports: inputs ``in1, in2, loss1, loss2, anc``; outputs
    ``out1, out2, loss1, loss2, anc``.
    """
    return _nopa_transfer(p, float(getattr(f, "omega", f)))


@functools.lru_cache(maxsize=4096)
def _nopa_transfer(p, omega):
    # sweeps rebuild the same source many times; transfers are immutable
    cav = nopa_cavity(p, omega)
    noise = excess_noise(p.excess_phase_noise)
    cav = BogoliubovTransfer(cav.matrix, cav.inputs, ("c1", "c2", "loss1", "loss2"))
    noise = BogoliubovTransfer(noise.matrix, ("c1", "c2", "anc"), ("out1", "out2", "anc"))
    t = cascade(cav, noise, {"c1": "c1", "c2": "c2"})
    return _reorder(t, ("in1", "in2", "loss1", "loss2", "anc"),
                    ("out1", "out2", "loss1", "loss2", "anc"))


def squeezed_spectra(p, omega):
    """Closed-form output variances ``(S_minus, S_plus)`` of the bare cavity."""
    w = omega / p.kappa_total
    x = p.pump_parameter
    gain = p.escape_efficiency * 4.0 * x
    return 1.0 - gain / ((1.0 + x) ** 2 + w ** 2), 1.0 + gain / ((1.0 - x) ** 2 + w ** 2)
