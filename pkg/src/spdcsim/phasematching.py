"""
Wavevector mismatch for birefringent (BPM), quasi- (QPM) and non-critical
(NCPM) phase matching, degenerate-wavelength solving, poling periods and
effective-nonlinearity bookkeeping.

Units: wavelengths in microns, temperatures in Celsius, mismatches in rad/mm,
poling periods in microns, nonlinear coefficients in pm/V.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .dispersion import AXES, CrystalModel, refractive_index
from .errors import ConfigurationError, DomainError, NoRootError, RangeError

NCPM = "ncpm"
QPM = "qpm"
BPM = "bpm"
KINDS = (NCPM, QPM, BPM)

_REL_TOL_ENERGY = 1e-9


@dataclass(frozen=True)
class WavelengthTriple:
    """Pump, signal and idler wavelengths (um) obeying 1/lp = 1/ls + 1/li."""

    pump: float
    signal: float
    idler: float

    def __post_init__(self):
        lp, ls, li = self.pump, self.signal, self.idler
        if min(lp, ls, li) <= 0:
            raise DomainError(f"wavelengths must be positive, got {(lp, ls, li)}")
        if lp >= min(ls, li):
            raise DomainError("pump wavelength must be shorter than signal and idler")
        lhs, rhs = 1.0 / lp, 1.0 / ls + 1.0 / li
        if abs(lhs - rhs) > _REL_TOL_ENERGY * lhs:
            raise DomainError(
                f"energy conservation violated: 1/lp = {lhs:.12g}, 1/ls + 1/li = {rhs:.12g}"
            )

    @classmethod
    def from_pump_signal(cls, pump, signal):
        if signal <= pump:
            raise DomainError("signal must be longer than the pump")
        return cls(pump, signal, 1.0 / (1.0 / pump - 1.0 / signal))

    @classmethod
    def from_signal_idler(cls, signal, idler):
        return cls(1.0 / (1.0 / signal + 1.0 / idler), signal, idler)

    @classmethod
    def degenerate(cls, wavelength):
        return cls(wavelength / 2.0, wavelength, wavelength)


@dataclass(frozen=True)
class BPMGeometry:
    theta: float
    phi: float = 0.0
    walkoff: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise DomainError(f"polar angle {self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise DomainError(f"azimuth {self.phi} outside [0, 2pi)")


@dataclass(frozen=True)
class InteractionSpec:
    """How the three waves couple.

    ``polarizations`` is the (pump, signal, idler) triple.  For NCPM and QPM
    each entry is a principal axis (``"yyz"``); for BPM each entry is ``o``
    or ``e`` relative to a uniaxial optic axis.
    """

    kind: str
    polarizations: str
    propagation: Optional[str] = None
    geometry: Optional[BPMGeometry] = None
    poling_period: Optional[float] = None
    order: Optional[int] = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ConfigurationError(f"unknown phase-matching kind {self.kind!r}")
        pol = self.polarizations
        if len(pol) != 3:
            raise ConfigurationError(f"polarization triple must have 3 entries, got {pol!r}")
        if kind == BPM:
            if any(p not in "oe" for p in pol):
                raise ConfigurationError("BPM polarizations are 'o'/'e' labels, e.g. 'eoo'")
            if self.poling_period is not None or self.order is not None:
                raise ConfigurationError("BPM takes no poling period or order")
            return
        if any(p not in AXES for p in pol):
            raise ConfigurationError(f"polarizations {pol!r} must be principal axes x/y/z")
        prop = self.propagation
        if prop is None:
            free = [a for a in AXES if a not in pol]
            if len(free) != 1:
                raise ConfigurationError(
                    f"cannot infer propagation axis for {pol!r}; give it explicitly"
                )
            prop = free[0]
            object.__setattr__(self, "propagation", prop)
        if prop not in AXES:
            raise ConfigurationError(f"propagation {prop!r} is not a principal axis")
        if prop in pol:
            raise ConfigurationError(
                f"polarization along the propagation axis {prop} is not a transverse field"
            )
        if self.geometry is not None:
            raise ConfigurationError(f"{kind.upper()} takes no BPM geometry")
        if kind == QPM:
            if self.poling_period is None or self.poling_period <= 0:
                raise ConfigurationError("QPM needs a positive poling period")
            if self.order is None:
                object.__setattr__(self, "order", 1)
            if self.order < 1:
                raise ConfigurationError("QPM order must be >= 1")
        elif self.poling_period is not None or self.order is not None:
            raise ConfigurationError("NCPM takes no poling period or order")

    def swapped(self):
        """Same interaction with signal and idler roles exchanged."""
        p = self.polarizations
        return InteractionSpec(
            self.kind, p[0] + p[2] + p[1], self.propagation, self.geometry,
            self.poling_period, self.order,
        )


class Mismatch(NamedTuple):
    delta_k: float  # rad/mm, signed: k_p - k_s - k_i [- K]
    per_2pi: float  # cycles/mm
    magnitude: float  # rad/mm


def _bpm_index(crystal, label, lam, T, theta):
    if crystal.symmetry != "uniaxial":
        raise ConfigurationError(
            "BPM index surfaces are implemented for uniaxial crystals only"
        )
    no = refractive_index(crystal, "x", lam, T)
    if label == "o":
        return no
    ne = refractive_index(crystal, "z", lam, T)
    c, s = math.cos(theta), math.sin(theta)
    return 1.0 / np.sqrt(c * c / no**2 + s * s / ne**2)


def wavevector(crystal, polarization, wavelength, temperature, spec=None):
    """k = 2 pi n / lambda in rad/um."""
    if spec is not None and spec.kind == BPM:
        n = _bpm_index(crystal, polarization, wavelength, temperature, spec.geometry.theta)
    else:
        n = refractive_index(crystal, polarization, wavelength, temperature)
    return 2 * np.pi * n / np.asarray(wavelength, dtype=float)


def bulk_mismatch(crystal, spec, pump, signal, idler, temperature):
    """Signed k_p - k_s - k_i in rad/mm, vectorised over wavelength arrays."""
    if spec.kind == BPM and spec.geometry is None:
        raise ConfigurationError("BPM mismatch needs a BPMGeometry")
    a, b, g = spec.polarizations
    dk = (
        wavevector(crystal, a, pump, temperature, spec)
        - wavevector(crystal, b, signal, temperature, spec)
        - wavevector(crystal, g, idler, temperature, spec)
    )
    return 1e3 * dk


def mismatch_array(crystal, spec, pump, signal, idler, temperature):
    """Total signed mismatch (rad/mm) including any grating vector."""
    dk = bulk_mismatch(crystal, spec, pump, signal, idler, temperature)
    if spec.kind == QPM:
        # sign[cos] poling carries both +K and -K harmonics; the one opposing
        # the bulk mismatch is the phase-matching one
        K = 1e3 * 2 * np.pi * spec.order / spec.poling_period
        dk = dk - np.where(dk >= 0, K, -K)
    return dk


def wavevector_mismatch(crystal: CrystalModel, spec: InteractionSpec,
                        wavelengths: WavelengthTriple, temperature: float) -> Mismatch:
    dk = float(
        mismatch_array(
            crystal, spec, wavelengths.pump, wavelengths.signal, wavelengths.idler, temperature
        )
    )
    return Mismatch(dk, dk / (2 * np.pi), abs(dk))


def degenerate_mismatch(crystal, spec, wavelength, temperature):
    """Mismatch (rad/mm) for the degenerate triple (lambda/2 -> lambda + lambda)."""
    lam = np.asarray(wavelength, dtype=float)
    return mismatch_array(crystal, spec, lam / 2, lam, lam, temperature)


def find_degenerate_ncpm(crystal, spec, temperature, bracket=(0.9, 1.3),
                         samples=64, xtol=1e-13):
    """Degenerate wavelength (um) where the NCPM mismatch vanishes.

    The bracket is scanned on ``samples`` points; the first sign change is
    polished with Brent's method.  Several sign changes raise a warning.
    """
    if spec.kind != NCPM:
        raise ConfigurationError("find_degenerate_ncpm needs an NCPM interaction")
    lo, hi = sorted(float(b) for b in bracket)
    if not lo < hi:
        raise DomainError("bracket must have distinct endpoints")
    grid = np.linspace(lo, hi, samples + 1)
    values = degenerate_mismatch(crystal, spec, grid, temperature)
    sign = np.sign(values)
    exact = np.flatnonzero(sign == 0)
    crossings = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    roots = [grid[i] for i in exact]
    if crossings.size:
        f = lambda lam: float(degenerate_mismatch(crystal, spec, lam, temperature))
        roots += [brentq(f, grid[i], grid[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
                  for i in crossings]
    if not roots:
        raise NoRootError(
            f"NCPM mismatch keeps one sign over [{lo:g}, {hi:g}] um at {temperature:g} C "
            f"(from {values[0]:.4g} to {values[-1]:.4g} rad/mm)"
        )
    roots.sort()
    if len(roots) > 1:
        warnings.warn(
            f"{len(roots)} NCPM roots in [{lo:g}, {hi:g}] um; returning {roots[0]:.6f}",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(roots[0])


@dataclass
class TuningCurve:
    temperatures: list = field(default_factory=list)
    wavelengths: list = field(default_factory=list)  # um
    slopes: list = field(default_factory=list)  # um per C
    errors: dict = field(default_factory=dict)  # temperature -> message

    def rows(self):
        return list(zip(self.temperatures, self.wavelengths, self.slopes))


def ncpm_tuning_curve(crystal, spec, temperatures: Sequence[float], bracket=(0.9, 1.3)) -> TuningCurve:
    """lambda_c(T) over ``temperatures``; unsolvable points land in ``errors``."""
    curve = TuningCurve()
    for T in sorted(temperatures):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                lam = find_degenerate_ncpm(crystal, spec, T, bracket)
        except (NoRootError, RangeError) as exc:
            curve.errors[T] = str(exc)
            continue
        curve.temperatures.append(float(T))
        curve.wavelengths.append(lam)
    if len(curve.temperatures) >= 2:
        curve.slopes = [float(s) for s in np.gradient(curve.wavelengths, curve.temperatures)]
    else:
        curve.slopes = [float("nan")] * len(curve.temperatures)
    return curve


def tuning_slope(crystal, spec, temperature, bracket=(0.9, 1.3), dT=1.0):
    """d(lambda_c)/dT in um/C by a central difference over +-dT."""
    lo = find_degenerate_ncpm(crystal, spec, temperature - dT, bracket)
    hi = find_degenerate_ncpm(crystal, spec, temperature + dT, bracket)
    return (hi - lo) / (2 * dT)


def qpm_period(crystal, polarizations, wavelengths: WavelengthTriple, temperature,
               order=1, propagation=None) -> float:
    """First-principles poling period (um) that cancels the bulk mismatch."""
    if order < 1:
        raise DomainError("QPM order must be >= 1")
    probe = InteractionSpec(NCPM, polarizations, propagation)
    dk = float(bulk_mismatch(crystal, probe, wavelengths.pump, wavelengths.signal,
                             wavelengths.idler, temperature))
    if dk == 0.0:
        raise DomainError("bulk mismatch is zero: the interaction is already phase matched")
    return 2 * np.pi * order / (abs(dk) * 1e-3)


def grating_coefficient(m: int) -> float:
    """Fourier weight G_m = 2/(m pi) sin(m pi/2) of a 50% duty-cycle grating."""
    if int(m) != m or m <= 0:
        raise DomainError(f"grating order must be a positive integer, got {m}")
    m = int(m)
    if m % 2 == 0:
        return 0.0
    # sin(m pi/2) is exactly +-1 for odd m; avoid the rounding of math.sin
    return (1.0 if m % 4 == 1 else -1.0) * 2.0 / (m * math.pi)


def effective_nonlinearity(kind, *, d_p=None, order=None, d22=None, geometry=None) -> float:
    """d_eff in pm/V.

    ``bpm``: BBO-type d22 cos^2(theta + rho) cos(3 phi); ``qpm``: d_p G_m;
    ``ncpm``: d_p with no reduction.
    """
    kind = kind.lower()
    if kind == BPM:
        if d22 is None or geometry is None:
            raise ConfigurationError("BPM d_eff needs d22 and a BPMGeometry")
        return d22 * math.cos(geometry.theta + geometry.walkoff) ** 2 * math.cos(3 * geometry.phi)
    if kind == QPM:
        if d_p is None or order is None:
            raise ConfigurationError("QPM d_eff needs d_p and the grating order")
        return d_p * grating_coefficient(order)
    if kind == NCPM:
        if d_p is None:
            raise ConfigurationError("NCPM d_eff needs d_p")
        return float(d_p)
    raise ConfigurationError(f"unknown phase-matching kind {kind!r}")


def brightness_ratio(d_eff_a: float, d_eff_b: float) -> float:
    """Pair-rate ratio (d_a/d_b)^2 at equal length and phase matching."""
    if d_eff_b == 0:
        raise DomainError("reference d_eff is zero")
    return (d_eff_a / d_eff_b) ** 2


_VOIGT = {("x", "x"): 1, ("y", "y"): 2, ("z", "z"): 3,
          ("y", "z"): 4, ("z", "y"): 4, ("x", "z"): 5, ("z", "x"): 5,
          ("x", "y"): 6, ("y", "x"): 6}


def contracted_d_label(polarizations: str) -> str:
    """Voigt label d_{pump, (signal idler)} for a principal-axis triple, e.g. yyz -> d24."""
    a, b, g = polarizations
    return f"d{AXES.index(a) + 1}{_VOIGT[(b, g)]}"


@dataclass(frozen=True)
class TechniqueRow:
    technique: str
    d_eff: float
    brightness_vs_qpm1: float
    note: str = ""


def compare_techniques(d_p, d22, geometry: BPMGeometry, orders=(1, 3)):
    """d_eff and brightness relative to first-order QPM for each technique."""
    ref = effective_nonlinearity(QPM, d_p=d_p, order=1)
    rows = [TechniqueRow("BPM", effective_nonlinearity(BPM, d22=d22, geometry=geometry), 0.0,
                         "d22 cos^2(theta+rho) cos(3phi)")]
    for m in orders:
        rows.append(TechniqueRow(f"QPM m={m}", effective_nonlinearity(QPM, d_p=d_p, order=m), 0.0,
                                 f"d_p G_{m}"))
    rows.append(TechniqueRow("NCPM", effective_nonlinearity(NCPM, d_p=d_p), 0.0, "d_p"))
    return [TechniqueRow(r.technique, r.d_eff, brightness_ratio(r.d_eff, ref), r.note) for r in rows]
