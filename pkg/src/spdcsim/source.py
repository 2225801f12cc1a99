"""
Two-qubit polarization states from a Sagnac-loop source.

Basis ordering is fixed to (HH, HV, VH, VV): the first letter is arm 1, the
second arm 2, and |H> = (1, 0), |V> = (0, 1).

Waveplate convention: a retarder with fast axis at angle ``theta`` from
horizontal is ``R(-theta) diag(1, exp(i delta)) R(theta)`` with
``R(t) = [[cos t, sin t], [-sin t, cos t]]`` and the global phase dropped.
A HWP at 45 degrees swaps H and V; two QWPs at equal angle make a HWP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

BASIS = ("HH", "HV", "VH", "VV")

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_TOL = 1e-10

_S = 1 / math.sqrt(2)
BELL_VECTORS = {
    "phi+": np.array([_S, 0, 0, _S], dtype=complex),
    "phi-": np.array([_S, 0, 0, -_S], dtype=complex),
    "psi+": np.array([0, _S, _S, 0], dtype=complex),
    "psi-": np.array([0, _S, -_S, 0], dtype=complex),
}
_ALIASES = {"φ+": "phi+", "φ-": "phi-", "ψ+": "psi+", "ψ-": "psi-",
            "φ⁺": "phi+", "φ⁻": "phi-", "ψ⁺": "psi+", "ψ⁻": "psi-"}


def canonical_bell_label(label: str) -> str:
    key = _ALIASES.get(label, label).lower().replace("plus", "+").replace("minus", "-")
    if key not in BELL_VECTORS:
        raise DomainError(f"unknown Bell state {label!r}; expected one of {sorted(BELL_VECTORS)}")
    return key


def check_density_matrix(rho, hermitian_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, eigen_tol=EIGEN_TOL):
    """Raise DomainError unless ``rho`` is a Hermitian, unit-trace, PSD 4x4 matrix."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise DomainError(f"density matrix must be 4x4, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > hermitian_tol:
        raise DomainError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise DomainError(f"density matrix trace {tr.real:.15g} != 1")
    low = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if low < -eigen_tol:
        raise DomainError(f"density matrix has negative eigenvalue {low:.3g}")


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        check_density_matrix(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_vector(cls, psi):
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def trusted(cls, matrix, tol=1e-9):
        """Symmetrise and renormalise a nearly-physical matrix before validating."""
        m = np.asarray(matrix, dtype=complex)
        m = (m + m.conj().T) / 2
        m = m / np.trace(m).real
        check_density_matrix(m, tol, tol, tol)
        state = object.__new__(cls)
        m.setflags(write=False)
        object.__setattr__(state, "matrix", m)
        return state

    def allclose(self, other, atol=1e-12):
        return np.allclose(self.matrix, other.matrix, atol=atol, rtol=0)


@dataclass(frozen=True)
class SourceImperfections:
    phase: float = 0.0  # relative phase between |HV> and |VH>, rad
    hv_share: float = 0.5  # p, probability weight of |HV>
    white_noise: float = 0.0  # w

    def __post_init__(self):
        if not 0.0 <= self.hv_share <= 1.0:
            raise DomainError(f"HV share {self.hv_share} outside [0, 1]")
        if not 0.0 <= self.white_noise <= 1.0:
            raise DomainError(f"white-noise weight {self.white_noise} outside [0, 1]")
        if not math.isfinite(self.phase):
            raise DomainError("phase must be finite")


def apply_white_noise(state: TwoQubitState, w: float) -> TwoQubitState:
    """(1 - w) rho + w I/4."""
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"white-noise weight {w} outside [0, 1]")
    return TwoQubitState((1 - w) * state.matrix + w * np.eye(4) / 4)


def sagnac_state(imperfections: SourceImperfections = SourceImperfections()) -> TwoQubitState:
    p, phi = imperfections.hv_share, imperfections.phase
    psi = np.array([0, math.sqrt(p), np.exp(1j * phi) * math.sqrt(1 - p), 0], dtype=complex)
    pure = TwoQubitState(np.outer(psi, psi.conj()))
    return apply_white_noise(pure, imperfections.white_noise)


def bell_state(label: str) -> TwoQubitState:
    return TwoQubitState.from_vector(BELL_VECTORS[canonical_bell_label(label)])


def bell_vector(label: str) -> np.ndarray:
    return BELL_VECTORS[canonical_bell_label(label)].copy()


RETARDANCE = {"HWP": math.pi, "QWP": math.pi / 2}


def jones_matrix(plate: str, angle: float) -> np.ndarray:
    try:
        delta = RETARDANCE[plate.upper()]
    except KeyError:
        raise ConfigurationError(f"unknown waveplate {plate!r}; expected HWP or QWP") from None
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, s], [-s, c]])
    return rot.T @ np.diag([1.0, np.exp(1j * delta)]) @ rot


def local_unitary(arm: int, u: np.ndarray) -> np.ndarray:
    if arm == 1:
        return np.kron(u, np.eye(2))
    if arm == 2:
        return np.kron(np.eye(2), u)
    raise ConfigurationError(f"arm must be 1 or 2, got {arm}")


def waveplate_transform(state: TwoQubitState, arm: int, plate: str, angle: float) -> TwoQubitState:
    """Apply a HWP/QWP with fast axis at ``angle`` (rad) to one arm."""
    U = local_unitary(arm, jones_matrix(plate, angle))
    return TwoQubitState.trusted(U @ state.matrix @ U.conj().T)


# Settings that turn the phi=0 / phi=pi Sagnac outputs into each Bell state.
BELL_PREPARATION = {
    "psi+": (0.0, ()),
    "psi-": (math.pi, ()),
    "phi+": (0.0, ((1, "HWP", math.pi / 4),)),
    "phi-": (math.pi, ((1, "HWP", math.pi / 4),)),
}


def prepare_bell(label: str, imperfections: SourceImperfections = SourceImperfections()):
    """Sagnac output with the phase and waveplates that target ``label``.

    ``imperfections.phase`` is added on top of the nominal 0 or pi.  The
    HWP at 45 degrees maps psi- to -phi-, equal up to global phase.
    """
    phase, plates = BELL_PREPARATION[canonical_bell_label(label)]
    imp = SourceImperfections(phase + imperfections.phase, imperfections.hv_share,
                              imperfections.white_noise)
    state = sagnac_state(imp)
    for arm, plate, angle in plates:
        state = waveplate_transform(state, arm, plate, angle)
    return state
