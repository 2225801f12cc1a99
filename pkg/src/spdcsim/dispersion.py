"""
Temperature-dependent refractive indices of nonlinear crystals.

Crystals are described by small text files (see ``crystals/*.crystal`` and
``docs/crystal-format.md``).  Each principal axis carries a room-temperature
dispersion formula plus an additive thermal correction

    dn(lambda, T) = sum_k (T - T_ref)**k * sum_m c[k][m] / lambda**m

with wavelengths in microns.  At ``T == T_ref`` the correction vanishes
identically, so the index equals the bare dispersion formula.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ConfigurationError, CrystalFileError, RangeError

AXES = ("x", "y", "z")

# n**2 = A + sum_j B_j / (1 - C_j / lam**2) - F * lam**2
NORMALIZED_POLE = "normalized-pole"
# n**2 = A + sum_j B_j / (lam**2 - C_j) - F * lam**2
SHIFTED_POLE = "shifted-pole"
# n**2 = 1 + sum_j B_j * lam**2 / (lam**2 - C_j)
SELLMEIER = "sellmeier"
# n = coefficients[0], used for mocks and test fixtures
CONSTANT = "constant"

FORMS = (NORMALIZED_POLE, SHIFTED_POLE, SELLMEIER, CONSTANT)

ArrayLike = Union[float, np.ndarray]


def _pole_terms(coefficients):
    if len(coefficients) < 2 or len(coefficients) % 2:
        raise ConfigurationError(
            "pole forms need [A, B1, C1, ..., F] (an even number of coefficients)"
        )
    A, F = coefficients[0], coefficients[-1]
    pairs = list(zip(coefficients[1:-1:2], coefficients[2:-1:2]))
    return A, pairs, F


def _validate_form(form, coefficients):
    if form not in FORMS:
        raise ConfigurationError(f"unknown dispersion form {form!r}; expected one of {FORMS}")
    if form in (NORMALIZED_POLE, SHIFTED_POLE):
        _pole_terms(coefficients)
    elif form == SELLMEIER:
        if not coefficients or len(coefficients) % 2:
            raise ConfigurationError("sellmeier form needs [B1, C1, B2, C2, ...]")
    elif form == CONSTANT and len(coefficients) != 1:
        raise ConfigurationError("constant form takes exactly one coefficient")


@dataclass(frozen=True)
class SellmeierAxisModel:
    form: str
    coefficients: tuple[float, ...]
    temp_coefficients: tuple[tuple[float, ...], ...] = ()
    range_um: tuple[float, float] = (0.2, 5.0)
    reference_temperature_c: float = 25.0
    citation: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(
            self,
            "temp_coefficients",
            tuple(tuple(float(c) for c in row) for row in self.temp_coefficients),
        )
        object.__setattr__(self, "range_um", (float(self.range_um[0]), float(self.range_um[1])))
        _validate_form(self.form, self.coefficients)
        lo, hi = self.range_um
        if not 0 < lo < hi:
            raise ConfigurationError(f"invalid wavelength range {self.range_um}")

    def base_index(self, lam):
        """Index from the dispersion formula alone (no thermal correction)."""
        lam = np.asarray(lam, dtype=float)
        l2 = lam * lam
        c = self.coefficients
        if self.form == CONSTANT:
            return np.full_like(lam, c[0])
        if self.form == SELLMEIER:
            n2 = np.ones_like(lam)
            for B, C in zip(c[0::2], c[1::2]):
                n2 = n2 + B * l2 / (l2 - C)
            return np.sqrt(n2)
        A, pairs, F = _pole_terms(c)
        n2 = A - F * l2
        for B, C in pairs:
            if self.form == NORMALIZED_POLE:
                n2 = n2 + B / (1.0 - C / l2)
            else:
                n2 = n2 + B / (l2 - C)
        return np.sqrt(n2)

    def thermal_shift(self, lam, temperature):
        lam = np.asarray(lam, dtype=float)
        dT = float(temperature) - self.reference_temperature_c
        shift = np.zeros_like(lam)
        if dT == 0.0:
            return shift
        inv = 1.0 / lam
        for k, row in enumerate(self.temp_coefficients, start=1):
            poly = np.zeros_like(lam)
            for m, a in enumerate(row):
                poly = poly + a * inv**m
            shift = shift + dT**k * poly
        return shift

    def index(self, lam, temperature):
        return self.base_index(lam) + self.thermal_shift(lam, temperature)


@dataclass(frozen=True)
class NonlinearCoefficient:
    label: str
    value_pm_per_v: float
    citation: str

    def __post_init__(self):
        if not self.citation.strip():
            raise ConfigurationError(f"nonlinear coefficient {self.label} has no citation")


@dataclass(frozen=True)
class CrystalModel:
    """A named crystal: one dispersion model per principal axis plus d_ij data.

    For uniaxial crystals ``axes["y"]`` is the same object as ``axes["x"]``
    (ordinary index) and ``axes["z"]`` is the extraordinary index.
    """

    name: str
    axes: dict
    d_coefficients: tuple[NonlinearCoefficient, ...] = ()
    transparency_um: tuple[float, float] = (0.2, 5.0)
    temperature_range_c: tuple[float, float] = (0.0, 200.0)
    symmetry: str = "biaxial"
    citation: str = ""
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.symmetry not in ("biaxial", "uniaxial"):
            raise ConfigurationError(f"unknown symmetry {self.symmetry!r}")
        axes = dict(self.axes)
        if self.symmetry == "uniaxial":
            if "x" not in axes or "z" not in axes:
                raise ConfigurationError("uniaxial crystals need ordinary (x) and extraordinary (z) axes")
            axes["y"] = axes["x"]
        missing = [a for a in AXES if a not in axes]
        if missing:
            raise ConfigurationError(f"crystal {self.name} missing axis models {missing}")
        object.__setattr__(self, "axes", {a: axes[a] for a in AXES})

    def d(self, label: str) -> float:
        for coeff in self.d_coefficients:
            if coeff.label == label:
                return coeff.value_pm_per_v
        raise ConfigurationError(f"crystal {self.name} has no nonlinear coefficient {label}")

    def axis_model(self, axis: str) -> SellmeierAxisModel:
        try:
            return self.axes[axis]
        except KeyError:
            raise ConfigurationError(
                f"unknown axis {axis!r} for crystal {self.name}; expected x, y or z"
            ) from None


def _check_range(crystal, axis, model, lam, temperature):
    lam = np.asarray(lam, dtype=float)
    lo, hi = model.range_um
    if lam.size:
        if np.any(~np.isfinite(lam)):
            raise RangeError(f"non-finite wavelength for {crystal.name} axis {axis}")
        if lam.min() < lo:
            raise RangeError(
                f"wavelength {lam.min():.6g} um below lower bound {lo:g} um "
                f"of {crystal.name} axis {axis}"
            )
        if lam.max() > hi:
            raise RangeError(
                f"wavelength {lam.max():.6g} um above upper bound {hi:g} um "
                f"of {crystal.name} axis {axis}"
            )
    tlo, thi = crystal.temperature_range_c
    if not tlo <= temperature <= thi:
        raise RangeError(
            f"temperature {temperature:g} C outside [{tlo:g}, {thi:g}] C for {crystal.name}"
        )


def refractive_index(crystal: CrystalModel, axis: str, wavelength: ArrayLike, temperature: float):
    """Principal index n(lambda, T) along ``axis``; wavelength in microns, T in Celsius."""
    model = crystal.axis_model(axis)
    _check_range(crystal, axis, model, wavelength, temperature)
    n = model.index(wavelength, temperature)
    return float(n) if np.ndim(n) == 0 else n


DERIVATIVE_STEP_UM = 1e-4


def index_derivative(crystal, axis, wavelength, temperature, step=DERIVATIVE_STEP_UM):
    """dn/dlambda in 1/um by a central difference of half-width ``step``.

    The stencil must fit inside the axis validity range.
    """
    model = crystal.axis_model(axis)
    lam = np.asarray(wavelength, dtype=float)
    lo, hi = model.range_um
    if np.any(lam - step < lo) or np.any(lam + step > hi):
        raise RangeError(
            f"wavelength within {step:g} um of the [{lo:g}, {hi:g}] um bound "
            f"of {crystal.name} axis {axis}; no room for differencing"
        )
    _check_range(crystal, axis, model, lam, temperature)
    d = (model.index(lam + step, temperature) - model.index(lam - step, temperature)) / (2 * step)
    return float(d) if np.ndim(d) == 0 else d


# ---------------------------------------------------------------------------
# crystal files

_AXIS_KEYS = (
    "form",
    "coefficients",
    "temp_coefficients",
    "range_um",
    "reference_temperature_c",
    "citation",
)
_TOP_KEYS = ("name", "symmetry", "citation", "transparency_um", "temperature_range_c")


def _floats(text, key, path, lineno):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise CrystalFileError(f"{key}: expected comma-separated numbers, got {text!r}", path, lineno) from None


def _pair(text, key, path, lineno):
    vals = _floats(text, key, path, lineno)
    if len(vals) != 2:
        raise CrystalFileError(f"{key}: expected two numbers", path, lineno)
    return vals


def parse_crystal(text: str, path=None) -> CrystalModel:
    """Parse the ``key = value`` crystal format.  Unknown keys are rejected."""
    top: dict = {}
    axes: dict = {}
    d_entries = []
    seen: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CrystalFileError(f"expected 'key = value', got {line!r}", path, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise CrystalFileError(f"duplicate key {key!r} (first on line {seen[key]})", path, lineno)
        seen[key] = lineno
        parts = key.split(".")
        if len(parts) == 1 and key in _TOP_KEYS:
            if key in ("transparency_um", "temperature_range_c"):
                top[key] = _pair(value, key, path, lineno)
            else:
                top[key] = value
        elif len(parts) == 3 and parts[0] == "axes" and parts[1] in AXES and parts[2] in _AXIS_KEYS:
            ax, sub = parts[1], parts[2]
            entry = axes.setdefault(ax, {})
            if sub == "form":
                entry[sub] = value
            elif sub == "citation":
                entry[sub] = value
            elif sub == "coefficients":
                entry[sub] = _floats(value, key, path, lineno)
            elif sub == "temp_coefficients":
                entry[sub] = tuple(_floats(row, key, path, lineno) for row in value.split(";"))
            elif sub == "range_um":
                entry[sub] = _pair(value, key, path, lineno)
            else:
                entry[sub] = _floats(value, key, path, lineno)[0]
        elif len(parts) == 2 and parts[0] == "d_coefficients":
            if "|" not in value:
                raise CrystalFileError(f"{key}: expected 'value | citation'", path, lineno)
            num, cite = (s.strip() for s in value.split("|", 1))
            try:
                d_entries.append(NonlinearCoefficient(parts[1], float(num), cite))
            except ValueError as exc:
                raise CrystalFileError(f"{key}: {exc}", path, lineno) from None
        else:
            raise CrystalFileError(f"unknown key {key!r}", path, lineno)

    if "name" not in top:
        raise CrystalFileError("missing required key 'name'", path)
    models = {}
    for ax, entry in axes.items():
        for req in ("form", "coefficients"):
            if req not in entry:
                raise CrystalFileError(f"axis {ax} missing '{req}'", path)
        try:
            models[ax] = SellmeierAxisModel(**entry)
        except (ConfigurationError, TypeError) as exc:
            raise CrystalFileError(f"axis {ax}: {exc}", path, seen.get(f"axes.{ax}.coefficients")) from None
    kwargs = {k: top[k] for k in _TOP_KEYS if k in top}
    try:
        return CrystalModel(axes=models, d_coefficients=tuple(d_entries), source=path, **kwargs)
    except ConfigurationError as exc:
        raise CrystalFileError(str(exc), path) from None


def _fmt(values):
    return ", ".join(repr(float(v)) for v in values)


def dump_crystal(crystal: CrystalModel) -> str:
    lines = [f"name = {crystal.name}", f"symmetry = {crystal.symmetry}"]
    if crystal.citation:
        lines.append(f"citation = {crystal.citation}")
    lines.append(f"transparency_um = {_fmt(crystal.transparency_um)}")
    lines.append(f"temperature_range_c = {_fmt(crystal.temperature_range_c)}")
    axes = ("x", "z") if crystal.symmetry == "uniaxial" else AXES
    for ax in axes:
        m = crystal.axes[ax]
        p = f"axes.{ax}"
        lines.append("")
        lines.append(f"{p}.form = {m.form}")
        lines.append(f"{p}.coefficients = {_fmt(m.coefficients)}")
        if m.temp_coefficients:
            lines.append(f"{p}.temp_coefficients = " + "; ".join(_fmt(r) for r in m.temp_coefficients))
        lines.append(f"{p}.range_um = {_fmt(m.range_um)}")
        lines.append(f"{p}.reference_temperature_c = {m.reference_temperature_c!r}")
        if m.citation:
            lines.append(f"{p}.citation = {m.citation}")
    if crystal.d_coefficients:
        lines.append("")
    for d in crystal.d_coefficients:
        lines.append(f"d_coefficients.{d.label} = {d.value_pm_per_v!r} | {d.citation}")
    return "\n".join(lines) + "\n"


def load_crystal(name_or_path) -> CrystalModel:
    """Load a bundled crystal by name (``"KTP"``) or any crystal file by path."""
    p = Path(name_or_path)
    if p.suffix == ".crystal" or p.exists():
        try:
            text = p.read_text()
        except OSError as exc:
            raise CrystalFileError(f"cannot read crystal file: {exc}", str(p)) from None
        return parse_crystal(text, path=str(p))
    pkg = resources.files("spdcsim") / "crystals" / f"{str(name_or_path).upper()}.crystal"
    if not pkg.is_file():
        raise ConfigurationError(
            f"no bundled crystal named {name_or_path!r}; available: {', '.join(bundled_crystals())}"
        )
    return parse_crystal(pkg.read_text(), path=f"<bundled {pkg.name}>")


def bundled_crystals():
    root = resources.files("spdcsim") / "crystals"
    return sorted(p.name[: -len(".crystal")] for p in root.iterdir() if p.name.endswith(".crystal"))


def constant_crystal(name="mock", nx=1.5, ny=1.5, nz=1.5, range_um=(0.2, 5.0)):
    """Dispersionless crystal, handy for tests and sanity checks."""
    axes = {
        a: SellmeierAxisModel(CONSTANT, (n,), range_um=range_um)
        for a, n in zip(AXES, (nx, ny, nz))
    }
    return CrystalModel(name=name, axes=axes)


def group_index(crystal, axis, wavelength, temperature):
    """n_g = n - lambda dn/dlambda."""
    n = refractive_index(crystal, axis, wavelength, temperature)
    return n - np.asarray(wavelength) * index_derivative(crystal, axis, wavelength, temperature)


__all__ = [
    "AXES",
    "FORMS",
    "SellmeierAxisModel",
    "NonlinearCoefficient",
    "CrystalModel",
    "refractive_index",
    "index_derivative",
    "group_index",
    "parse_crystal",
    "dump_crystal",
    "load_crystal",
    "bundled_crystals",
    "constant_crystal",
]
