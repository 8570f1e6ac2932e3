"""Port-graph assembly and frequency-domain loop closure.

Every port carries one mode. Element input values ``x`` obey
``x = A x + B u`` for vacuum sources ``u``; the solver inverts ``I - A``
directly, which sums every round trip of any feedback loop exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elements import BogoliubovTransfer, _to_quads
from .sideband import ContractError, NoiseSpectrum

CONDITION_LIMIT = 1e12


class NetworkStructureError(ContractError):
    """Dangling, doubly driven, or unknown ports."""


class InstabilityError(ArithmeticError):
    """The closed loop has reached its effective oscillation threshold."""


@dataclass(frozen=True)
class Connection:
    source: str
    target: str
    phase: float = 0.0
    delay: float = 0.0  # sideband propagation delay in seconds


@dataclass
class Network:
    """Directed graph of elements joined port to port.

    Elements are either a :class:`BogoliubovTransfer` or a callable taking the
    angular analysis frequency and returning one. Endpoints are written
    ``"element.port"``; bare names (no dot) refer to network sources and sinks.
    """

    elements: dict = field(default_factory=dict)
    sources: list = field(default_factory=list)
    sinks: list = field(default_factory=list)
    connections: list = field(default_factory=list)

    def add(self, name, element):
        if "." in name or name in self.elements or name in self.sources or name in self.sinks:
            raise NetworkStructureError(f"bad or duplicate element name {name!r}")
        self.elements[name] = element
        return self

    def add_source(self, name):
        if "." in name or name in self.sources or name in self.elements:
            raise NetworkStructureError(f"bad or duplicate source name {name!r}")
        self.sources.append(name)
        return self

    def add_sink(self, name):
        if "." in name or name in self.sinks or name in self.elements:
            raise NetworkStructureError(f"bad or duplicate sink name {name!r}")
        self.sinks.append(name)
        return self

    def connect(self, source, target, phase=0.0, delay=0.0):
        self.connections.append(Connection(source, target, float(phase), float(delay)))
        return self

    def vacuum(self, *ports):
        """Drive element input ports with fresh vacuum sources.

        Each source is named after its port with ``.`` replaced by ``:``.
        """
        for port in ports:
            name = port.replace(".", ":")
            self.add_source(name)
            self.connect(name, port)
        return self

    def probe(self, port, name=None):
        """Expose an element output port as a sink (default name as in :meth:`vacuum`)."""
        name = name or port.replace(".", ":")
        self.add_sink(name)
        self.connect(port, name)
        return self

    def realize(self, omega):
        return {name: (el if isinstance(el, BogoliubovTransfer) else el(omega))
                for name, el in self.elements.items()}


@dataclass(frozen=True)
class LoopSolveResult:
    total_transfer: BogoliubovTransfer
    loop_condition: float
    spectrum: NoiseSpectrum


def _split(endpoint):
    name, _, port = endpoint.partition(".")
    return name, port


class _Assembly:
    """Index bookkeeping shared by :func:`solve` and :func:`loop_gain_margin`."""

    def __init__(self, net, omega):
        self.omega = omega
        self.transfers = net.realize(omega)
        self.slots = [(name, p) for name, t in self.transfers.items() for p in t.inputs]
        self.slot_index = {s: k for k, s in enumerate(self.slots)}
        self.net = net
        self._validate()

    def _validate(self):
        net, tr = self.net, self.transfers
        driven, feeding = {}, {}
        for c in net.connections:
            if c.source in net.sources:
                src = c.source
            else:
                name, port = _split(c.source)
                if name not in tr or port not in tr[name].outputs:
                    raise NetworkStructureError(f"unknown output endpoint {c.source!r}")
                src = (name, port)
            if c.target in net.sinks:
                dst = c.target
            else:
                name, port = _split(c.target)
                if name not in tr or port not in tr[name].inputs:
                    raise NetworkStructureError(f"unknown input endpoint {c.target!r}")
                dst = (name, port)
            if src in feeding:
                raise NetworkStructureError(f"output {c.source!r} feeds more than one connection")
            if dst in driven:
                raise NetworkStructureError(f"input {c.target!r} is driven twice")
            feeding[src] = c
            driven[dst] = c
        dangling = [f"{n}.{p}" for n, p in self.slots if (n, p) not in driven]
        dangling += [s for s in net.sinks if s not in driven]
        if dangling:
            raise NetworkStructureError("dangling input ports: " + ", ".join(dangling))
        self.driven = driven

    def matrices(self):
        m, s, k = len(self.slots), len(self.net.sources), len(self.net.sinks)
        a = np.zeros((2 * m, 2 * m), dtype=complex)
        b = np.zeros((2 * m, 2 * s), dtype=complex)
        c = np.zeros((2 * k, 2 * m), dtype=complex)
        d = np.zeros((2 * k, 2 * s), dtype=complex)
        for dst, conn in self.driven.items():
            fa = np.exp(1j * (conn.phase + self.omega * conn.delay))
            fd = np.exp(1j * (-conn.phase + self.omega * conn.delay))
            if isinstance(dst, tuple):
                rows, x_mat, u_mat = self.slot_index[dst], a, b
                row_d = m + rows
            else:
                rows, x_mat, u_mat = self.net.sinks.index(dst), c, d
                row_d = k + rows
            if conn.source in self.net.sources:
                j = self.net.sources.index(conn.source)
                u_mat[rows, j] += fa
                u_mat[row_d, s + j] += fd
                continue
            name, port = _split(conn.source)
            t = self.transfers[name]
            o = t.outputs.index(port)
            # an element's input slots are contiguous
            n = t.n_in
            lo = self.slot_index[(name, t.inputs[0])] if n else 0
            x_mat[rows, lo:lo + n] += fa * t.matrix[o, :n]
            x_mat[rows, m + lo:m + lo + n] += fa * t.matrix[o, n:]
            x_mat[row_d, lo:lo + n] += fd * t.matrix[t.n_out + o, :n]
            x_mat[row_d, m + lo:m + lo + n] += fd * t.matrix[t.n_out + o, n:]
        return a, b, c, d


def _omega(f):
    omega = float(getattr(f, "omega", f))
    if not (math.isfinite(omega) and omega >= 0):
        raise ContractError(f"analysis frequency must be >= 0, got {omega}")
    return omega


def solve(net, f):
    """Close all loops of ``net`` at analysis frequency ``f`` and return sink spectra.

    Raises
    ------
    NetworkStructureError
        For dangling or doubly-driven ports.
    InstabilityError
        When ``cond(I - A)`` exceeds ``CONDITION_LIMIT``.
    """
    asm = _Assembly(net, _omega(f))
    a, b, c, d = asm.matrices()
    if a.size:
        lhs = np.eye(a.shape[0]) - a
        cond = float(np.linalg.cond(lhs))
        if not cond <= CONDITION_LIMIT:
            raise InstabilityError(
                f"feedback-induced instability / oscillation threshold: cond(I - A) = {cond:.3g}"
            )
        total = c @ np.linalg.solve(lhs, b) + d
    else:
        cond = 1.0
        total = d
    transfer = BogoliubovTransfer(total, tuple(net.sources), tuple(net.sinks))
    return LoopSolveResult(transfer, cond, spectrum_of(transfer))


def spectrum_of(transfer):
    """Quadrature spectrum at the outputs of ``transfer`` for vacuum inputs."""
    q = _to_quads(transfer.n_out) @ transfer.matrix
    s = 0.5 * (q @ q.conj().T).real
    return NoiseSpectrum(0.5 * (s + s.T), transfer.outputs)


def measure_combo(r, combo):
    """Variance of ``combo`` over the sinks of a solved network."""
    missing = set(combo.coefficients) - set(r.spectrum.modes)
    if missing:
        raise ContractError(f"combo references non-sink modes: {sorted(missing)}")
    return r.spectrum.variance(combo)


def loop_gain_margin(net, f):
    """Spectral radius of the internal loop matrix; 0 for loop-free networks."""
    a = _Assembly(net, _omega(f)).matrices()[0]
    if not a.size:
        return 0.0
    return float(np.abs(np.linalg.eigvals(a)).max())


def stability_margin(net, omegas):
    """Largest loop spectral radius over ``omegas`` and where it occurs.

    A value below 1 everywhere on the frequency axis rules out any
    encirclement in the Nyquist sense, so the closed loop is stable.
    """
    worst, where = 0.0, 0.0
    for w in omegas:
        rho = loop_gain_margin(net, w)
        if rho > worst:
            worst, where = rho, float(w)
    return worst, where
