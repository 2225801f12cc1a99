"""
Polarization tomography: simulated counts, linear inversion, maximum
likelihood, and the figures of merit used to grade entangled sources.

Single-qubit analyser states (arm order as in ``source.BASIS``):
H = (1, 0), V = (0, 1), D = (1, 1)/sqrt2, A = (1, -1)/sqrt2,
R = (1, -i)/sqrt2, L = (1, i)/sqrt2.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, SpanError
from .source import TwoQubitState

_S = 1 / math.sqrt(2)
ANALYSER_STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, -1j * _S], dtype=complex),
    "L": np.array([_S, 1j * _S], dtype=complex),
}
LABELS = tuple(ANALYSER_STATES)


@dataclass(frozen=True)
class MeasurementSetting:
    arm1: str
    arm2: str

    def __post_init__(self):
        for lab in (self.arm1, self.arm2):
            if lab not in ANALYSER_STATES:
                raise DomainError(f"unknown analyser label {lab!r}; expected one of {LABELS}")

    @property
    def vector(self):
        return np.kron(ANALYSER_STATES[self.arm1], ANALYSER_STATES[self.arm2])

    def __str__(self):
        return self.arm1 + self.arm2


DEFAULT_SETTINGS = tuple(MeasurementSetting(a, b) for a, b in itertools.product(LABELS, LABELS))


@dataclass(frozen=True)
class TomographyRecord:
    setting: MeasurementSetting
    count: int
    n_pairs: float  # expected pairs per setting, N

    def __post_init__(self):
        if self.count < 0:
            raise DomainError("counts must be non-negative")
        if not self.n_pairs > 0:
            raise DomainError("acquisition scale N must be positive")


@dataclass(frozen=True)
class CountRates:
    coincidences: float
    signal: float
    idler: float

    def __post_init__(self):
        if min(self.coincidences, self.signal, self.idler) < 0:
            raise DomainError("count rates must be non-negative")
        if self.coincidences > min(self.signal, self.idler):
            raise DomainError("coincidence rate exceeds a singles rate")


def projector(setting: MeasurementSetting) -> np.ndarray:
    v = setting.vector
    return np.outer(v, v.conj())


def _as_matrix(state):
    return state.matrix if isinstance(state, TwoQubitState) else np.asarray(state, dtype=complex)


def _vectors(settings):
    return np.array([s.vector for s in settings])


def _probabilities(rho, vectors):
    return np.einsum("ki,ij,kj->k", vectors.conj(), rho, vectors).real


def simulate_counts(state, settings: Sequence[MeasurementSetting] = DEFAULT_SETTINGS,
                    n_pairs: float = 1e5, seed=None, accidental: float = 0.0,
                    rng: Optional[np.random.Generator] = None):
    """Poisson counts with mean N [(1 - a) Tr(rho P) + a/4] per setting."""
    if not n_pairs > 0:
        raise DomainError("N must be positive")
    if not 0.0 <= accidental < 1.0:
        raise DomainError(f"accidental fraction {accidental} outside [0, 1)")
    rho = _as_matrix(state)
    p = np.clip(_probabilities(rho, _vectors(settings)), 0.0, None)
    mean = n_pairs * ((1 - accidental) * p + accidental / 4)
    rng = rng if rng is not None else np.random.default_rng(seed)
    counts = rng.poisson(mean)
    return [TomographyRecord(s, int(n), float(n_pairs)) for s, n in zip(settings, counts)]


def noiseless_records(state, settings=DEFAULT_SETTINGS, n_pairs=1e6):
    """Records whose counts equal N Tr(rho P) rounded to integers."""
    rho = _as_matrix(state)
    p = np.clip(_probabilities(rho, _vectors(settings)), 0.0, None)
    return [TomographyRecord(s, int(round(n_pairs * q)), float(n_pairs)) for s, q in zip(settings, p)]


_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
_PAULI2 = np.array([np.kron(a, b) for a in _PAULI for b in _PAULI])


def _unpack(records):
    vectors = _vectors([r.setting for r in records])
    counts = np.array([r.count for r in records], dtype=float)
    scale = np.array([r.n_pairs for r in records], dtype=float)
    return vectors, counts, scale


def linear_inversion(records) -> np.ndarray:
    """Least-squares Tr(rho P_k) = n_k / N_k in the Pauli basis, trace set to 1.

    The result is Hermitian but may have negative eigenvalues.
    """
    vectors, counts, scale = _unpack(records)
    design = np.einsum("ki,pij,kj->kp", vectors.conj(), _PAULI2, vectors).real / 4
    if np.linalg.matrix_rank(design) < 16:
        raise SpanError("measurement settings do not span the 16-dimensional operator space")
    coeffs, *_ = np.linalg.lstsq(design, counts / scale, rcond=None)
    rho = np.einsum("p,pij->ij", coeffs, _PAULI2) / 4
    rho = (rho + rho.conj().T) / 2
    tr = np.trace(rho).real
    if tr <= 0:
        raise DomainError("linear inversion produced non-positive trace")
    return rho / tr


def psd_projection(rho) -> np.ndarray:
    """Nearest-by-clipping physical matrix: negative eigenvalues set to zero."""
    rho = (np.asarray(rho) + np.asarray(rho).conj().T) / 2
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0, None)
    out = (vecs * vals) @ vecs.conj().T
    return out / np.trace(out).real


def log_likelihood(state, records) -> float:
    """Poisson log-likelihood sum n log(N p) - N p (constant log n! dropped)."""
    vectors, counts, scale = _unpack(records)
    return _loglik(_as_matrix(state), vectors, counts, scale)


def _loglik(rho, vectors, counts, scale):
    mu = scale * _probabilities(rho, vectors)
    pos = counts > 0
    if np.any(mu[pos] <= 0):
        return -math.inf
    return float(np.sum(counts[pos] * np.log(mu[pos])) - np.sum(mu))


_J = np.eye(4)[::-1]
_LOWER = np.tril(np.ones((4, 4), dtype=bool))


def _factor(rho):
    """Lower-triangular T with T^dagger T = rho (rho positive definite)."""
    low = np.linalg.cholesky(_J @ rho @ _J)
    return _J @ low.conj().T @ _J


def _rho_from(t):
    m = t.conj().T @ t
    return m / np.trace(m).real


_QUIET_STEPS = 10


@dataclass
class MLEResult:
    state: TwoQubitState
    log_likelihood: float
    iterations: int
    converged: bool


def mle_reconstruct(records, max_iterations: int = 10_000, tol: float = 1e-10,
                    initial=None) -> MLEResult:
    """Maximum-likelihood state under rho = T^dag T / Tr(T^dag T).

    T is lower triangular with a real diagonal (16 real parameters).  Gradient
    ascent with Barzilai-Borwein trial steps and Armijo backtracking.  Stops
    once the log-likelihood gain per recorded count stays below ``tol`` for
    ten consecutive steps, or at ``max_iterations`` (``converged`` is then
    False and a RuntimeWarning is issued).
    """
    vectors, counts, scale = _unpack(records)
    if initial is None:
        initial = psd_projection(linear_inversion(records))
    rho0 = 0.99 * _as_matrix(initial) + 0.01 * np.eye(4) / 4
    t = _factor((rho0 + rho0.conj().T) / 2)

    def value(t):
        return _loglik(_rho_from(t), vectors, counts, scale)

    def gradient(t):
        norm = np.trace(t.conj().T @ t).real
        rho = _rho_from(t)
        p = _probabilities(rho, vectors)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(counts > 0, counts / np.where(p > 0, p, np.inf), 0.0) - scale
        G = vectors.T @ (w[:, None] * vectors.conj())
        GM = (G - np.trace(G @ rho).real * np.eye(4)) / norm
        g = 2 * t @ GM
        g = np.where(_LOWER, g, 0)
        g[np.diag_indices(4)] = g.diagonal().real
        return g

    total = max(1.0, float(np.sum(counts)))
    L = value(t)
    g = gradient(t)
    step = 1.0 / max(1.0, float(np.sum(counts)))
    converged = False
    quiet = 0
    it = 0
    for it in range(1, max_iterations + 1):
        gg = float(np.vdot(g, g).real)
        if gg == 0.0:
            converged = True
            break
        while True:
            tn = t + step * g
            Ln = value(tn)
            if Ln >= L + 1e-4 * step * gg:
                break
            step *= 0.5
            if step < 1e-300:
                break
        if not Ln >= L:
            converged = True
            break
        tn = tn / math.sqrt(np.trace(tn.conj().T @ tn).real)
        gn = gradient(tn)
        s = (tn - t).ravel()
        y = (gn - g).ravel()
        sy = float(np.vdot(s, y).real)
        ss = float(np.vdot(s, s).real)
        step = ss / -sy if sy < 0 else 2 * step
        gain = Ln - L
        t, L, g = tn, Ln, gn
        # BB steps occasionally gain little mid-run; require a quiet streak
        quiet = quiet + 1 if gain < tol * total else 0
        if quiet >= _QUIET_STEPS:
            converged = True
            break
    if not converged:
        warnings.warn(f"MLE stopped at the iteration cap ({max_iterations})", RuntimeWarning,
                      stacklevel=2)
    return MLEResult(TwoQubitState.trusted(_rho_from(t)), L, it, converged)


# ---------------------------------------------------------------------------
# figures of merit


def purity(state) -> float:
    rho = _as_matrix(state)
    return float(np.trace(rho @ rho).real)


_YY = np.kron(_PAULI[2], _PAULI[2])


def concurrence(state) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4)."""
    rho = _as_matrix(state)
    # The l_i are the singular values of W^T (Y x Y) W with rho = W W^dagger.
    # This avoids square roots of near-zero eigenvalues of rho * rho_tilde,
    # which cost ~1e-8 accuracy for pure states.
    vals, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = vecs * np.sqrt(np.clip(vals, 0, None))
    lam = np.linalg.svd(w.T @ _YY @ w, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def _pure_vector(target, tol=1e-9):
    if isinstance(target, TwoQubitState) or np.ndim(target) == 2:
        m = _as_matrix(target)
        if abs(purity(m) - 1) > tol:
            raise DomainError(
                "fidelity target must be pure; mixed-target (Uhlmann) fidelity is not provided"
            )
        vals, vecs = np.linalg.eigh(m)
        return vecs[:, -1]
    v = np.asarray(target, dtype=complex)
    return v / np.linalg.norm(v)


def fidelity(state, target) -> float:
    """<psi|rho|psi> for a pure target given as a vector or projector."""
    v = _pure_vector(target)
    return float(np.vdot(v, _as_matrix(state) @ v).real)


def trace_distance(a, b) -> float:
    d = _as_matrix(a) - _as_matrix(b)
    return float(0.5 * np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2)).sum())


def coincidence_to_single_ratio(rates: CountRates) -> float:
    """eta_c = S_c / sqrt(S_s S_i)."""
    if rates.signal <= 0 or rates.idler <= 0:
        raise DomainError("singles rates must be positive")
    return rates.coincidences / math.sqrt(rates.signal * rates.idler)


def normalized_source_metric(brightness_khz_per_mw, length_mm, efficiency) -> float:
    """Brightness per mm of crystal with detection loss removed: B / (L eta^2)."""
    if not brightness_khz_per_mw > 0 or not length_mm > 0:
        raise DomainError("brightness and crystal length must be positive")
    if not 0 < efficiency <= 1:
        raise DomainError(f"detection efficiency {efficiency} outside (0, 1]")
    return brightness_khz_per_mw / (length_mm * efficiency**2)


def metrics(state, target=None) -> dict:
    out = {"purity": purity(state), "concurrence": concurrence(state)}
    if target is not None:
        out["fidelity"] = fidelity(state, target)
    return out


def bootstrap_errors(state, records, target=None, resamples=100, seed=0,
                     max_iterations=2000, tol=1e-10) -> dict:
    """One-sigma spreads of P, C (and F) from parametric bootstrap.

    Resample ``k`` draws Poisson counts from ``state`` with its own generator
    spawned from ``seed`` at index ``k``, so results do not depend on the
    order the resamples are processed in.
    """
    rho = _as_matrix(state)
    settings = [r.setting for r in records]
    scales = [r.n_pairs for r in records]
    vectors = _vectors(settings)
    p = np.clip(_probabilities(rho, vectors), 0.0, None)
    streams = np.random.SeedSequence(seed).spawn(resamples)
    samples = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        counts = rng.poisson(np.asarray(scales) * p)
        boot = [TomographyRecord(s, int(n), N) for s, n, N in zip(settings, counts, scales)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = mle_reconstruct(boot, max_iterations=max_iterations, tol=tol, initial=rho).state
        samples.append(metrics(est, target))
    keys = samples[0].keys() if samples else ()
    return {k: float(np.std([s[k] for s in samples], ddof=1)) if resamples > 1 else 0.0 for k in keys}
