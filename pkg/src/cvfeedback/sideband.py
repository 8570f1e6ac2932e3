"""Conventions shared by every module: units, noise spectra, entanglement tests.

Quadratures are ``X = a + a^dag`` and ``Y = -i (a - a^dag)`` so the vacuum
variance is 1 and the shot-noise limit sits at 1 in every spectrum.
Quadrature vectors are ordered ``(X_1 ... X_N, Y_1 ... Y_N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PHYSICALITY_TOL = 1e-9
SYMMETRY_TOL = 1e-12


class ContractError(ValueError):
    """Raised when an argument breaks a documented precondition."""


class ParameterError(ValueError):
    """Raised when element or scenario parameters are out of range."""


def db_to_variance(db):
    """Convert squeezing in dB (positive = below shot noise) to linear variance."""
    db = np.asarray(db, dtype=float)
    if not np.all(np.isfinite(db)):
        raise ContractError("squeezing value must be finite")
    out = 10.0 ** (-db / 10.0)
    return float(out) if out.ndim == 0 else out


def variance_to_db(v):
    """Inverse of :func:`db_to_variance`. Raises for nonpositive variance."""
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise ContractError(f"variance must be positive, got {v}")
    out = -10.0 * np.log10(v)
    return float(out) if out.ndim == 0 else out


def duan_sum(v_sum, v_diff):
    """Sum of the ``(X1+X2)/sqrt2`` and ``(Y1-Y2)/sqrt2`` variances.

    Values strictly below 2 certify inseparability (see :func:`is_entangled`).
    """
    if not (v_sum > 0 and v_diff > 0):
        raise ContractError("both variances must be positive")
    return float(v_sum) + float(v_diff)


ENTANGLEMENT_TOLERANCE = 1e-9


def is_entangled(duan_value):
    # the boundary 2 itself, up to round-off, is reported as separable
    return duan_value < 2.0 - ENTANGLEMENT_TOLERANCE


def symplectic_form(n_modes):
    """Canonical antisymmetric form for the ``(X..., Y...)`` ordering."""
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class AnalysisFrequency:
    """Sideband angular frequency in rad/s."""

    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega >= 0):
            raise ParameterError(f"analysis frequency must be >= 0, got {self.omega}")

    @classmethod
    def from_hz(cls, hz):
        return cls(2.0 * math.pi * float(hz))

    @property
    def hz(self):
        return self.omega / (2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureCombo:
    """Real linear combination of quadratures, divided by ``normalization``.

    ``coefficients`` maps a mode label to its ``(weight_on_X, weight_on_Y)``.
    """

    coefficients: dict
    normalization: float = 1.0

    def __post_init__(self):
        if not any(wx != 0 or wy != 0 for wx, wy in self.coefficients.values()):
            raise ContractError("combo needs at least one nonzero coefficient")
        if self.normalization == 0:
            raise ContractError("normalization must be nonzero")

    @classmethod
    def amplitude_sum(cls, first, second):
        """``(X1 + X2)/sqrt(2)``."""
        return cls({first: (1.0, 0.0), second: (1.0, 0.0)}, math.sqrt(2.0))

    @classmethod
    def phase_difference(cls, first, second):
        """``(Y1 - Y2)/sqrt(2)``."""
        return cls({first: (0.0, 1.0), second: (0.0, -1.0)}, math.sqrt(2.0))

    @classmethod
    def amplitude_difference(cls, first, second):
        return cls({first: (1.0, 0.0), second: (-1.0, 0.0)}, math.sqrt(2.0))

    @classmethod
    def phase_sum(cls, first, second):
        return cls({first: (0.0, 1.0), second: (0.0, 1.0)}, math.sqrt(2.0))

    def vector(self, modes):
        """Coefficient row over the quadrature basis of ``modes``."""
        modes = list(modes)
        n = len(modes)
        vec = np.zeros(2 * n)
        for label, (wx, wy) in self.coefficients.items():
            if label not in modes:
                raise ContractError(f"combo references unknown mode {label!r}")
            k = modes.index(label)
            vec[k] = wx
            vec[n + k] = wy
        return vec / self.normalization


@dataclass(frozen=True)
class NoiseSpectrum:
    """Symmetric quadrature noise matrix at one analysis frequency.

    Parameters
    ----------
    matrix : ndarray, shape (2N, 2N)
        Symmetrized spectral densities in shot-noise units.
    modes : tuple of str
        Labels of the N modes, in matrix order.
    """

    matrix: np.ndarray
    modes: tuple = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ContractError(f"spectrum must be square with even size, got {m.shape}")
        if not np.allclose(m, m.T, rtol=0, atol=SYMMETRY_TOL * max(1.0, np.abs(m).max())):
            raise ContractError("spectrum matrix is not symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if not self.modes:
            object.__setattr__(self, "modes", tuple(f"m{k}" for k in range(m.shape[0] // 2)))
        elif len(self.modes) != m.shape[0] // 2:
            raise ContractError("mode labels do not match matrix size")

    @property
    def n_modes(self):
        return self.matrix.shape[0] // 2

    @classmethod
    def vacuum(cls, modes):
        modes = tuple(modes)
        return cls(np.eye(2 * len(modes)), modes)

    def variance(self, combo):
        c = combo.vector(self.modes)
        return float(c @ self.matrix @ c)


@dataclass(frozen=True)
class PhysicalityReport:
    passed: bool
    worst_eigenvalue: float

    def __bool__(self):
        return self.passed


def physicality_check(spectrum, tol=PHYSICALITY_TOL):
    """Test the uncertainty condition ``S + i*Sigma >= 0``.

    Accepts a :class:`NoiseSpectrum` or a bare symmetric array.
    """
    if isinstance(spectrum, NoiseSpectrum):
        s = spectrum.matrix
    else:
        s = np.asarray(spectrum, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise ContractError(f"spectrum must be square with even size, got {s.shape}")
        if not np.allclose(s, s.T, rtol=0, atol=SYMMETRY_TOL * max(1.0, np.abs(s).max())):
            raise ContractError("spectrum matrix is not symmetric")
    sigma = symplectic_form(s.shape[0] // 2)
    worst = float(np.linalg.eigvalsh(s + 1j * sigma).min())
    return PhysicalityReport(worst >= -tol, worst)
