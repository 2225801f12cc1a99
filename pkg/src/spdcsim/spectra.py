"""
Normalised SPDC/SHG spectra, joint spectral amplitudes, Schmidt purity and
Hong-Ou-Mandel curves.

Spectra follow the sinc^2(dk L / 2) law; absolute rates are not modelled, so
every curve is normalised to unit peak.  JSAs live on angular-frequency grids
(rad/s); wavelengths are converted at the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import ConfigurationError, DomainError
from .phasematching import mismatch_array

# sinc^2(x) = 1/2 at x = 1.39155737...
_SINC2_HALF = 1.3915573782515103

DEFAULT_SPECTRUM_POINTS = 2048
DEFAULT_JSA_POINTS = 256
DEFAULT_PUMP_FWHM_NM = 0.01
MIN_JSA_POINTS = 64


def sinc(x):
    """sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def um_to_omega(lam_um):
    return 2 * np.pi * SPEED_OF_LIGHT / (np.asarray(lam_um, dtype=float) * 1e-6)


def omega_to_um(omega):
    return 2 * np.pi * SPEED_OF_LIGHT / np.asarray(omega, dtype=float) * 1e6


@dataclass
class SpectrumCurve:
    abscissa: np.ndarray
    ordinate: np.ndarray
    abscissa_unit: str = "nm"
    ordinate_label: str = "normalized rate"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.ordinate = np.asarray(self.ordinate, dtype=float)
        if self.abscissa.shape != self.ordinate.shape or self.abscissa.ndim != 1:
            raise ConfigurationError("abscissa and ordinate must be 1-D arrays of equal length")
        if self.abscissa.size > 1 and np.any(np.diff(self.abscissa) <= 0):
            raise ConfigurationError("abscissa must be strictly increasing")
        if np.any(self.ordinate < 0):
            raise ConfigurationError("ordinates must be non-negative")

    def peak(self) -> float:
        """Peak position refined by a parabola through the three top samples."""
        y, x = self.ordinate, self.abscissa
        k = int(np.argmax(y))
        if k == 0 or k == len(y) - 1:
            return float(x[k])
        y0, y1, y2 = y[k - 1], y[k], y[k + 1]
        denom = y0 - 2 * y1 + y2
        if denom == 0:
            return float(x[k])
        shift = 0.5 * (y0 - y2) / denom
        return float(x[k] + shift * (x[k + 1] - x[k - 1]) / 2)

    def fwhm(self) -> float:
        """Full width at half maximum by linear interpolation of the two crossings."""
        y, x = self.ordinate, self.abscissa
        k = int(np.argmax(y))
        half = y[k] / 2
        left = k
        while left > 0 and y[left] >= half:
            left -= 1
        right = k
        while right < len(y) - 1 and y[right] >= half:
            right += 1
        if y[left] >= half or y[right] >= half:
            raise DomainError("curve does not fall below half maximum on both sides of the peak")
        xl = x[left] + (half - y[left]) * (x[left + 1] - x[left]) / (y[left + 1] - y[left])
        xr = x[right - 1] + (half - y[right - 1]) * (x[right] - x[right - 1]) / (y[right] - y[right - 1])
        return float(xr - xl)


def _check_length(length_mm):
    if not length_mm > 0:
        raise DomainError(f"crystal length must be positive, got {length_mm} mm")


def phase_matching_intensity(crystal, spec, pump, signal, idler, length_mm, temperature):
    """Unnormalised sinc^2(dk L/2) at the given wavelength arrays (um)."""
    _check_length(length_mm)
    dk = mismatch_array(crystal, spec, pump, signal, idler, temperature)
    return sinc(dk * length_mm / 2) ** 2


def _triples(signal, pump_um):
    if pump_um is None:
        return signal / 2, signal, signal
    if np.any(signal <= pump_um):
        raise DomainError("signal wavelengths must exceed the pump wavelength")
    return np.full_like(signal, pump_um), signal, 1.0 / (1.0 / pump_um - 1.0 / signal)


def generation_rate_spectrum(crystal, spec, pump_um: Optional[float], signal_range_um, length_mm,
                             temperature, points=DEFAULT_SPECTRUM_POINTS) -> SpectrumCurve:
    """Normalised pair-generation rate versus signal wavelength.

    ``pump_um=None`` tracks degeneracy: at each sampled wavelength the pump
    sits at half of it, which is how an SHG scan of a tunable laser maps the
    phase-matching curve.  A number holds the pump fixed (CW) and derives
    the idler from energy conservation.
    """
    _check_length(length_mm)
    if points < 3:
        raise ConfigurationError("need at least 3 spectrum points")
    lo, hi = signal_range_um
    lam = np.linspace(lo, hi, int(points))
    rate = phase_matching_intensity(crystal, spec, *_triples(lam, pump_um), length_mm, temperature)
    peak = rate.max()
    if peak <= 0:
        raise DomainError("spectrum vanishes over the whole range")
    meta = {
        "crystal": crystal.name,
        "interaction": spec.polarizations,
        "kind": spec.kind,
        "length_mm": float(length_mm),
        "temperature_c": float(temperature),
        "pump_nm": "degenerate" if pump_um is None else float(pump_um) * 1e3,
    }
    return SpectrumCurve(lam * 1e3, rate / peak, "nm", "normalized rate", meta)


def shg_tuning_curve(crystal, spec, fundamental_range_um, length_mm, temperature,
                     points=DEFAULT_SPECTRUM_POINTS) -> SpectrumCurve:
    """Normalised SH intensity versus fundamental wavelength (lambda_SH = lambda/2)."""
    curve = generation_rate_spectrum(crystal, spec, None, fundamental_range_um, length_mm,
                                     temperature, points)
    curve.metadata["process"] = "shg"
    curve.metadata.pop("pump_nm")
    curve.ordinate_label = "normalized SH intensity"
    return curve


# ---------------------------------------------------------------------------
# joint spectral amplitude


@dataclass
class JointSpectralAmplitude:
    omega_s: np.ndarray  # rad/s
    omega_i: np.ndarray  # rad/s
    amplitude: np.ndarray  # [signal index, idler index]
    pump_center: float = float("nan")  # rad/s
    pump_bandwidth: float = float("nan")  # rad/s, intensity FWHM
    length_mm: float = float("nan")
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega_s = np.asarray(self.omega_s, dtype=float)
        self.omega_i = np.asarray(self.omega_i, dtype=float)
        self.amplitude = np.asarray(self.amplitude, dtype=complex)
        if self.amplitude.shape != (self.omega_s.size, self.omega_i.size):
            raise ConfigurationError("amplitude shape must be (len(omega_s), len(omega_i))")

    def normalized(self):
        norm = np.linalg.norm(self.amplitude)
        if norm == 0:
            raise DomainError("JSA is identically zero")
        return JointSpectralAmplitude(self.omega_s, self.omega_i, self.amplitude / norm,
                                      self.pump_center, self.pump_bandwidth, self.length_mm,
                                      dict(self.metadata))


def _pm_fwhm_omega(crystal, spec, omega_p, length_mm, temperature):
    """FWHM (rad/s) of sinc^2 along the anti-diagonal for a CW pump."""
    w0 = omega_p / 2
    h = 1e-5 * w0
    lp = omega_to_um(omega_p)
    ws = np.array([w0 + h, w0 - h])
    dk = mismatch_array(crystal, spec, np.full(2, lp), omega_to_um(ws), omega_to_um(omega_p - ws),
                        temperature)
    slope = (dk[0] - dk[1]) / (2 * h)  # rad/mm per rad/s
    if slope == 0:
        raise ConfigurationError("phase matching is flat to first order; give an explicit grid half-width")
    return 2 * (2 * _SINC2_HALF / (length_mm * abs(slope)))


def joint_spectral_amplitude(crystal, spec, pump_center_um, pump_fwhm_nm=DEFAULT_PUMP_FWHM_NM,
                             length_mm=20.0, temperature=30.0, points=DEFAULT_JSA_POINTS,
                             half_width=None, span=4.0) -> JointSpectralAmplitude:
    """Gaussian pump envelope times sinc phase matching on a common grid.

    The signal and idler share one frequency grid centred on half the pump
    frequency, so ``f(w_i, w_s)`` is the transpose and the anti-diagonal is
    exactly the energy-conservation ridge.  ``pump_fwhm_nm`` is the FWHM of
    the pump intensity spectrum.  The default half-width is ``span`` times
    the larger of the phase-matching and pump bandwidths.
    """
    _check_length(length_mm)
    if points < MIN_JSA_POINTS:
        raise ConfigurationError(f"JSA grid needs at least {MIN_JSA_POINTS} points per axis")
    if not pump_fwhm_nm > 0:
        raise DomainError("pump bandwidth must be positive")
    omega_p = float(um_to_omega(pump_center_um))
    pump_fwhm = 2 * np.pi * SPEED_OF_LIGHT * (pump_fwhm_nm * 1e-9) / (pump_center_um * 1e-6) ** 2
    pm_fwhm = _pm_fwhm_omega(crystal, spec, omega_p, length_mm, temperature)
    minimum = span * max(pm_fwhm, pump_fwhm)
    if half_width is None:
        half_width = minimum
    elif half_width < span * pm_fwhm:
        raise ConfigurationError(
            f"grid half-width {half_width:.4g} rad/s is below {span:g} phase-matching bandwidths"
        )
    w0 = omega_p / 2
    offsets = (np.arange(points) - (points - 1) / 2) * (2 * half_width / (points - 1))
    omega = w0 + offsets
    ws, wi = np.meshgrid(omega, omega, indexing="ij")
    detuning = offsets[:, None] + offsets[None, :]
    sigma = pump_fwhm / (2 * math.sqrt(2 * math.log(2)))
    envelope = np.exp(-detuning**2 / (4 * sigma**2))
    dk = mismatch_array(crystal, spec, omega_to_um(ws + wi), omega_to_um(ws), omega_to_um(wi),
                        temperature)
    f = envelope * sinc(dk * length_mm / 2)
    meta = {
        "crystal": crystal.name,
        "interaction": spec.polarizations,
        "kind": spec.kind,
        "temperature_c": float(temperature),
        "pump_center_nm": float(pump_center_um) * 1e3,
        "pump_fwhm_nm": float(pump_fwhm_nm),
        "phase_matching_fwhm_rad_s": float(pm_fwhm),
    }
    jsa = JointSpectralAmplitude(omega, omega.copy(), f, omega_p, pump_fwhm, float(length_mm), meta)
    return jsa.normalized()


def schmidt_purity(jsa) -> float:
    """sum(s^4) / sum(s^2)^2 over the singular values of the amplitude matrix."""
    matrix = jsa.amplitude if isinstance(jsa, JointSpectralAmplitude) else np.asarray(jsa)
    s = np.linalg.svd(matrix, compute_uv=False)
    s2 = s**2
    total = s2.sum()
    if total == 0:
        raise DomainError("JSA is identically zero")
    return float(np.sum(s2**2) / total**2)


def default_delays_ps(jsa, points=401):
    """Symmetric delay grid covering a quarter of the grid's aliasing period."""
    step = jsa.omega_s[1] - jsa.omega_s[0]
    half = np.pi / (2 * step)
    return np.linspace(-half, half, points) * 1e12


def hom_curve(jsa: JointSpectralAmplitude, delays_ps=None):
    """Coincidence probability versus relative delay and the dip visibility.

    P(tau) = 1/2 [1 - Re sum f(ws, wi) f*(wi, ws) exp(i (ws - wi) tau)] with
    the JSA normalised to unit Frobenius norm.
    """
    if jsa.omega_s.shape != jsa.omega_i.shape or not np.array_equal(jsa.omega_s, jsa.omega_i):
        raise ConfigurationError("HOM needs signal and idler on a common frequency grid")
    f = jsa.normalized().amplitude
    if delays_ps is None:
        delays_ps = default_delays_ps(jsa)
    tau = np.asarray(delays_ps, dtype=float) * 1e-12
    g = f * np.conj(f.T)
    w = jsa.omega_s
    n = w.size
    steps = np.diff(w)
    if n > 1 and np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        # uniform grid: w_s - w_i depends only on the index offset
        offsets = np.arange(-(n - 1), n)
        weights = np.array([np.trace(g, offset=o) for o in offsets])
        dw = -offsets * steps[0]
        overlap = np.exp(1j * np.outer(tau, dw)) @ weights
    else:
        diff = w[:, None] - w[None, :]
        overlap = np.array([np.sum(g * np.exp(1j * diff * t)) for t in tau])
    prob = np.clip(0.5 * (1.0 - overlap.real), 0.0, 1.0)
    pmax = prob.max()
    visibility = float((pmax - prob.min()) / pmax) if pmax > 0 else 0.0
    curve = SpectrumCurve(np.asarray(delays_ps, dtype=float), prob, "ps", "coincidence probability",
                          {"visibility": visibility, **jsa.metadata})
    return curve, visibility
