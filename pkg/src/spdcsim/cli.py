"""
Command-line front end.

Every subcommand reads its parameters from built-in defaults, then an
optional ``--config`` file (YAML or JSON mapping of option names), then
command-line flags, later sources winning.  Wavelength flags are in nm.

Exit codes: 0 success, 1 usage/configuration error, 2 computation error.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dispersion import load_crystal
from .errors import ConfigurationError, NoRootError, SpdcError
from .io import (curve_to_csv, curve_to_dict, dumps_json, jsa_to_csv, jsa_to_dict, load_jsa,
                 load_state, records_from_csv, records_to_csv, state_to_dict, write_atomic)
from .phasematching import (BPMGeometry, InteractionSpec, WavelengthTriple, compare_techniques,
                            contracted_d_label, find_degenerate_ncpm, ncpm_tuning_curve, qpm_period,
                            tuning_slope, wavevector_mismatch)
from .source import (SourceImperfections, bell_vector, canonical_bell_label, prepare_bell,
                     waveplate_transform)
from .spectra import (generation_rate_spectrum, hom_curve, joint_spectral_amplitude,
                      schmidt_purity, shg_tuning_curve)
from .tomography import (bootstrap_errors, metrics, mle_reconstruct, simulate_counts)

EXIT_USAGE = 1
EXIT_COMPUTE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_OPTICS = {
    "crystal": "KTP",
    "interaction": "yyz",
    "propagation": None,
    "temperature": 30.0,
    "bracket_nm": "900:1300",
}

DEFAULTS = {
    "find-ncpm": {**_OPTICS, "temps": None},
    "tuning-curve": {**_OPTICS, "temps": "20:40:5"},
    "spectrum": {**_OPTICS, "length_mm": 20.0, "pump_nm": None, "center_nm": None,
                 "window_nm": 3.0, "points": 2048},
    "shg": {**_OPTICS, "length_mm": 20.0, "center_nm": None, "window_nm": 3.0, "points": 2048},
    "jsa": {**_OPTICS, "length_mm": 20.0, "pump_nm": None, "pump_fwhm_nm": 0.01, "points": 256},
    "hom": {**_OPTICS, "jsa": None, "length_mm": 20.0, "pump_nm": None, "pump_fwhm_nm": 0.01,
            "points": 256, "delays_ps": None},
    "qpm-period": {"crystal": "KTP", "interaction": "yzy", "propagation": None,
                   "temperature": 30.0, "signal_nm": 1550.0, "idler_nm": None, "pump_nm": None,
                   "order": 1},
    "compare-pm": {"crystal": "KTP", "interaction": "yyz", "d_p": None, "bpm_crystal": "BBO",
                   "d22": None, "theta_deg": 0.0, "phi_deg": 0.0, "walkoff_deg": 0.0,
                   "orders": "1,3"},
    "source-sim": {"bell": "psi+", "preset": None, "phase": 0.0, "hv_share": 0.5,
                   "white_noise": 0.0, "waveplates": [], "n_pairs": 1e5, "accidental": 0.0,
                   "seed": 0, "bootstrap": 100},
    "tomo": {"counts": None, "target": "psi+", "bootstrap": 100, "seed": 0},
    "metrics": {"state": None, "target": "psi+"},
}

# (phase, hv_share, white_noise); "imperfect" lands P, C and F near 0.99
PRESETS = {
    "ideal": {"phase": 0.0, "hv_share": 0.5, "white_noise": 0.0},
    "imperfect": {"phase": 0.06, "hv_share": 0.5, "white_noise": 0.006},
}

_TYPES = {
    "crystal": str, "interaction": str, "propagation": str, "temperature": float,
    "bracket_nm": str, "temps": str, "length_mm": float, "pump_nm": float, "center_nm": float,
    "window_nm": float, "points": int, "pump_fwhm_nm": float, "jsa": str, "delays_ps": str,
    "signal_nm": float, "idler_nm": float, "order": int, "d_p": float, "bpm_crystal": str,
    "d22": float, "theta_deg": float, "phi_deg": float, "walkoff_deg": float, "orders": str,
    "bell": str, "preset": str, "phase": float, "hv_share": float, "white_noise": float,
    "n_pairs": float, "accidental": float, "seed": int, "bootstrap": int, "counts": str,
    "target": str, "state": str,
}

_HELP = {
    "crystal": "bundled crystal name or path to a .crystal file",
    "interaction": "polarization triple (pump, signal, idler), e.g. yyz",
    "propagation": "propagation axis (inferred when unique)",
    "temperature": "crystal temperature in C",
    "bracket_nm": "search bracket LO:HI in nm",
    "temps": "temperature sweep START:STOP:STEP in C (inclusive)",
    "length_mm": "crystal length in mm",
    "pump_nm": "pump wavelength in nm (spectrum: omit to track degeneracy)",
    "center_nm": "window centre in nm (default: degenerate NCPM wavelength)",
    "window_nm": "half-width of the wavelength window in nm",
    "points": "number of samples (per axis for JSAs)",
    "pump_fwhm_nm": "pump intensity FWHM in nm",
    "jsa": "JSA file (JSON or CSV) written by the jsa subcommand",
    "delays_ps": "delay grid START:STOP:COUNT in ps (default: automatic)",
    "signal_nm": "signal wavelength in nm",
    "idler_nm": "idler wavelength in nm (default: degenerate or from the pump)",
    "order": "QPM order m",
    "d_p": "nonlinear coefficient for QPM/NCPM in pm/V (default: from the crystal)",
    "bpm_crystal": "crystal used for the BPM row",
    "d22": "d22 for the BPM row in pm/V (default: from the BPM crystal)",
    "theta_deg": "BPM polar angle in degrees",
    "phi_deg": "BPM azimuth in degrees",
    "walkoff_deg": "BPM walk-off angle in degrees (an input, never computed)",
    "orders": "comma-separated QPM orders to tabulate",
    "bell": "target Bell state: psi+, psi-, phi+, phi-",
    "preset": "imperfection preset: " + ", ".join(PRESETS),
    "phase": "extra relative phase in rad",
    "hv_share": "probability weight of |HV>",
    "white_noise": "white-noise weight w",
    "n_pairs": "expected pairs per tomography setting",
    "accidental": "flat accidental fraction a",
    "seed": "master random seed",
    "bootstrap": "number of bootstrap resamples for error bars",
    "counts": "tomography counts CSV",
    "target": "Bell state used for the fidelity",
    "state": "density-matrix JSON file",
}

SUMMARIES = {
    "find-ncpm": "solve the degenerate NCPM wavelength",
    "tuning-curve": "degenerate NCPM wavelength versus temperature",
    "spectrum": "normalised pair-generation spectrum",
    "shg": "normalised SHG tuning curve",
    "jsa": "joint spectral amplitude",
    "hom": "Hong-Ou-Mandel curve and visibility",
    "qpm-period": "QPM poling period",
    "compare-pm": "d_eff and brightness of BPM/QPM/NCPM",
    "source-sim": "simulate the Sagnac source through tomography",
    "tomo": "reconstruct a state from a counts CSV",
    "metrics": "purity/concurrence/fidelity of a density-matrix JSON",
}


def build_parser():
    parser = _Parser(prog="spdcsim", description="SPDC phase-matching and entangled-source toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, defaults in DEFAULTS.items():
        p = sub.add_parser(name, help=SUMMARIES[name], description=SUMMARIES[name])
        p.add_argument("--config", help="YAML/JSON file of option values")
        p.add_argument("--show-config", action="store_true", help="print the effective config to stderr")
        p.add_argument("-o", "--output", help="output file (format from --format or suffix)")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        for key, default in defaults.items():
            if key == "waveplates":
                p.add_argument("--waveplate", dest="waveplates", action="append", default=None,
                               metavar="ARM:PLATE:DEG", help="waveplate on one arm, e.g. 1:HWP:45; repeatable")
            else:
                flag = "--" + key.replace("_", "-")
                help_text = _HELP[key] + (f" (default: {default})" if default is not None else "")
                p.add_argument(flag, dest=key, type=_TYPES[key], default=None, help=help_text)
    return parser


def effective_config(command, args) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config:
        try:
            loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a mapping")
        for key, value in loaded.items():
            k = str(key).replace("-", "_")
            if k not in cfg:
                raise UsageError(f"unknown config key {key!r} for {command}")
            cfg[k] = value
    for key in DEFAULTS[command]:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    preset = cfg.get("preset")
    if preset:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        explicit = {k for k in PRESETS[preset] if getattr(args, k, None) is not None}
        cfg.update({k: v for k, v in PRESETS[preset].items() if k not in explicit})
    return cfg


def parse_range(text, what, count=False):
    """``START:STOP:STEP`` inclusive (or ``START:STOP:COUNT`` with count=True)."""
    try:
        parts = [float(v) for v in str(text).split(":")]
    except ValueError:
        raise UsageError(f"{what}: expected START:STOP:STEP, got {text!r}") from None
    if len(parts) == 2 and not count:
        return parts
    if len(parts) != 3:
        raise UsageError(f"{what}: expected three colon-separated numbers, got {text!r}")
    start, stop, step = parts
    if count:
        if step < 2 or step != int(step):
            raise UsageError(f"{what}: COUNT must be an integer >= 2")
        return list(np.linspace(start, stop, int(step)))
    if step <= 0 or stop < start:
        raise UsageError(f"{what}: need STEP > 0 and STOP >= START")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def _crystal(cfg, key="crystal"):
    return load_crystal(cfg[key])


def _ncpm_spec(cfg):
    return InteractionSpec("ncpm", cfg["interaction"], cfg["propagation"])


def _bracket_um(cfg):
    lo, hi = parse_range(cfg["bracket_nm"], "bracket")
    return lo * 1e-3, hi * 1e-3


def _fmt(x, digits=6):
    return f"{x:.{digits}f}"


class Output:
    """Collects stdout text and the optional output file for one run."""

    def __init__(self, args, default_format="json"):
        self.path = args.output
        fmt = args.format
        if fmt is None and self.path:
            suffix = Path(self.path).suffix.lower().lstrip(".")
            fmt = suffix if suffix in ("csv", "json") else None
        self.format = fmt or default_format
        self.lines = []

    def say(self, key, value):
        self.lines.append(f"{key}: {value}")

    def emit(self, csv_text=None, json_obj=None, inline=True):
        """Write the payload to ``--output``; without one, print it only if ``inline``."""
        text = csv_text if self.format == "csv" and csv_text is not None else dumps_json(json_obj)
        if self.path:
            write_atomic(self.path, text)
            self.say("wrote", self.path)
        elif inline:
            self.lines.append(text.rstrip("\n"))


def _rows_csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) if isinstance(v, (float, int, np.floating)) else str(v)
                           for v in row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_find_ncpm(cfg, out):
    crystal, spec = _crystal(cfg), _ncpm_spec(cfg)
    bracket = _bracket_um(cfg)
    if cfg["temps"]:
        return _tuning(crystal, spec, bracket, cfg, out)
    T = cfg["temperature"]
    lam = find_degenerate_ncpm(crystal, spec, T, bracket)
    residual = wavevector_mismatch(crystal, spec, WavelengthTriple.degenerate(lam), T).magnitude
    slope = tuning_slope(crystal, spec, T, bracket)
    report = {
        "crystal": crystal.name,
        "interaction": spec.polarizations,
        "propagation": spec.propagation,
        "temperature_c": T,
        "lambda_c_nm": lam * 1e3,
        "pump_nm": lam * 1e3 / 2,
        "residual_rad_per_mm": residual,
        "tuning_slope_nm_per_c": slope * 1e3,
    }
    out.say("lambda_c_nm", _fmt(lam * 1e3, 4))
    out.say("residual_rad_per_mm", f"{residual:.3e}")
    out.say("tuning_slope_nm_per_c", _fmt(slope * 1e3, 5))
    header = ["temperature_c", "lambda_c_nm", "residual_rad_per_mm", "tuning_slope_nm_per_c"]
    out.emit(_rows_csv(header, [[T, lam * 1e3, residual, slope * 1e3]]), report)


def _tuning(crystal, spec, bracket, cfg, out):
    temps = parse_range(cfg["temps"], "temps")
    curve = ncpm_tuning_curve(crystal, spec, temps, bracket)
    rows = [[T, lam * 1e3, s * 1e3] for T, lam, s in curve.rows()]
    for T, msg in curve.errors.items():
        out.say(f"no_root_at_{T:g}C", msg)
    out.say("points", len(rows))
    report = {"crystal": crystal.name, "interaction": spec.polarizations,
              "rows": [dict(zip(("temperature_c", "lambda_c_nm", "slope_nm_per_c"), r)) for r in rows],
              "errors": {repr(float(k)): v for k, v in curve.errors.items()}}
    out.emit(_rows_csv(["temperature_c", "lambda_c_nm", "slope_nm_per_c"], rows), report)
    if not rows:
        raise NoRootError("no temperature in the sweep has an NCPM root")


def cmd_tuning_curve(cfg, out):
    _tuning(_crystal(cfg), _ncpm_spec(cfg), _bracket_um(cfg), cfg, out)


def _window(cfg, crystal, spec):
    center = cfg["center_nm"]
    if center is None:
        center = find_degenerate_ncpm(crystal, spec, cfg["temperature"], _bracket_um(cfg)) * 1e3
    half = cfg["window_nm"]
    return (center - half) * 1e-3, (center + half) * 1e-3


def _spectrum_common(curve, out):
    out.say("peak_nm", _fmt(curve.peak(), 4))
    out.say("fwhm_nm", _fmt(curve.fwhm(), 4))
    out.emit(curve_to_csv(curve), curve_to_dict(curve), inline=False)


def cmd_spectrum(cfg, out):
    crystal, spec = _crystal(cfg), _ncpm_spec(cfg)
    pump = cfg["pump_nm"] * 1e-3 if cfg["pump_nm"] is not None else None
    curve = generation_rate_spectrum(crystal, spec, pump, _window(cfg, crystal, spec),
                                     cfg["length_mm"], cfg["temperature"], cfg["points"])
    _spectrum_common(curve, out)


def cmd_shg(cfg, out):
    crystal, spec = _crystal(cfg), _ncpm_spec(cfg)
    curve = shg_tuning_curve(crystal, spec, _window(cfg, crystal, spec), cfg["length_mm"],
                             cfg["temperature"], cfg["points"])
    _spectrum_common(curve, out)


def _build_jsa(cfg):
    crystal, spec = _crystal(cfg), _ncpm_spec(cfg)
    pump = cfg["pump_nm"]
    if pump is None:
        pump = find_degenerate_ncpm(crystal, spec, cfg["temperature"], _bracket_um(cfg)) * 1e3 / 2
    return joint_spectral_amplitude(crystal, spec, pump * 1e-3, cfg["pump_fwhm_nm"],
                                    cfg["length_mm"], cfg["temperature"], cfg["points"])


def cmd_jsa(cfg, out):
    jsa = _build_jsa(cfg)
    out.say("schmidt_purity", _fmt(schmidt_purity(jsa), 6))
    out.say("grid_points", jsa.omega_s.size)
    out.emit(jsa_to_csv(jsa) if out.format == "csv" else None, jsa_to_dict(jsa), inline=False)


def cmd_hom(cfg, out):
    jsa = load_jsa(cfg["jsa"]) if cfg["jsa"] else _build_jsa(cfg)
    delays = parse_range(cfg["delays_ps"], "delays", count=True) if cfg["delays_ps"] else None
    curve, vis = hom_curve(jsa, delays)
    out.say("visibility", _fmt(vis, 6))
    out.say("p_min", f"{curve.ordinate.min():.3e}")
    out.emit(curve_to_csv(curve), curve_to_dict(curve), inline=False)


def cmd_qpm_period(cfg, out):
    crystal = _crystal(cfg)
    ls = cfg["signal_nm"] * 1e-3
    if cfg["pump_nm"] is not None:
        triple = WavelengthTriple.from_pump_signal(cfg["pump_nm"] * 1e-3, ls)
    elif cfg["idler_nm"] is not None:
        triple = WavelengthTriple.from_signal_idler(ls, cfg["idler_nm"] * 1e-3)
    else:
        triple = WavelengthTriple.degenerate(ls)
    period = qpm_period(crystal, cfg["interaction"], triple, cfg["temperature"], cfg["order"],
                        cfg["propagation"])
    report = {"crystal": crystal.name, "interaction": cfg["interaction"], "order": cfg["order"],
              "temperature_c": cfg["temperature"], "pump_nm": triple.pump * 1e3,
              "signal_nm": triple.signal * 1e3, "idler_nm": triple.idler * 1e3,
              "poling_period_um": period}
    out.say("poling_period_um", _fmt(period, 4))
    out.emit(_rows_csv(list(report), [list(report.values())]), report)


def cmd_compare_pm(cfg, out):
    crystal = _crystal(cfg)
    d_p = cfg["d_p"]
    label = contracted_d_label(cfg["interaction"])
    if d_p is None:
        d_p = crystal.d(label)
    d22 = cfg["d22"]
    if d22 is None:
        d22 = load_crystal(cfg["bpm_crystal"]).d("d22")
    try:
        orders = [int(m) for m in str(cfg["orders"]).split(",") if m.strip()]
    except ValueError:
        raise UsageError(f"orders: expected comma-separated integers, got {cfg['orders']!r}") from None
    geometry = BPMGeometry(math.radians(cfg["theta_deg"]), math.radians(cfg["phi_deg"]) % (2 * math.pi),
                           math.radians(cfg["walkoff_deg"]))
    rows = compare_techniques(d_p, d22, geometry, orders)
    out.say("d_p_label", label)
    for r in rows:
        out.say(f"{r.technique}", f"d_eff={r.d_eff:.6f} pm/V brightness_vs_qpm1={r.brightness_vs_qpm1:.6f}")
    table = [[r.technique, r.d_eff, r.brightness_vs_qpm1, r.note] for r in rows]
    report = {"d_p_pm_per_v": d_p, "d_p_label": label, "d22_pm_per_v": d22,
              "rows": [dict(zip(("technique", "d_eff_pm_per_v", "brightness_vs_qpm1", "formula"), t))
                       for t in table]}
    out.emit(_rows_csv(["technique", "d_eff_pm_per_v", "brightness_vs_qpm1", "formula"], table), report)


def _parse_waveplate(text):
    try:
        arm, plate, deg = str(text).split(":")
        return int(arm), plate.upper(), math.radians(float(deg))
    except ValueError:
        raise UsageError(f"waveplate: expected ARM:PLATE:DEG, got {text!r}") from None


def _state_report(state, target_label, errors=None, extra=None):
    m = metrics(state, bell_vector(target_label))
    block = dict(m)
    block["target"] = target_label
    block["errors"] = errors or {}
    report = state_to_dict(state, block)
    if extra:
        report.update(extra)
    return m, report


def cmd_source_sim(cfg, out):
    label = canonical_bell_label(cfg["bell"])
    imp = SourceImperfections(cfg["phase"], cfg["hv_share"], cfg["white_noise"])
    state = prepare_bell(label, imp)
    for wp in cfg["waveplates"] or []:
        state = waveplate_transform(state, *_parse_waveplate(wp))
    records = simulate_counts(state, n_pairs=cfg["n_pairs"], seed=cfg["seed"],
                              accidental=cfg["accidental"])
    result = mle_reconstruct(records)
    target = bell_vector(label)
    errors = {}
    if cfg["bootstrap"] > 1:
        errors = bootstrap_errors(result.state, records, target, cfg["bootstrap"], cfg["seed"])
    truth = metrics(state, target)
    m, report = _state_report(result.state, label, errors, {
        "simulation": {"bell": label, "phase": cfg["phase"], "hv_share": cfg["hv_share"],
                       "white_noise": cfg["white_noise"], "accidental": cfg["accidental"],
                       "n_pairs": cfg["n_pairs"], "seed": cfg["seed"],
                       "waveplates": list(cfg["waveplates"] or []),
                       "mle_converged": result.converged, "mle_iterations": result.iterations,
                       "true_metrics": truth},
    })
    for k in ("purity", "concurrence", "fidelity"):
        err = errors.get(k)
        out.say(k, _fmt(m[k], 4) + (f" +- {err:.4f}" if err is not None else ""))
    out.format = "json"
    out.emit(None, report)


def cmd_tomo(cfg, out):
    if not cfg["counts"]:
        raise UsageError("tomo needs --counts")
    records = records_from_csv(Path(cfg["counts"]).read_text())
    label = canonical_bell_label(cfg["target"])
    result = mle_reconstruct(records)
    errors = {}
    if cfg["bootstrap"] > 1:
        errors = bootstrap_errors(result.state, records, bell_vector(label), cfg["bootstrap"], cfg["seed"])
    m, report = _state_report(result.state, label, errors,
                              {"reconstruction": {"mle_converged": result.converged,
                                                  "mle_iterations": result.iterations,
                                                  "log_likelihood": result.log_likelihood}})
    for k in ("purity", "concurrence", "fidelity"):
        out.say(k, _fmt(m[k], 4))
    out.format = "json"
    out.emit(None, report)


def cmd_metrics(cfg, out):
    if not cfg["state"]:
        raise UsageError("metrics needs --state")
    label = canonical_bell_label(cfg["target"])
    state = load_state(cfg["state"])
    m = metrics(state, bell_vector(label))
    for k, v in m.items():
        out.say(k, _fmt(v, 6))
    out.emit(_rows_csv(list(m) + ["target"], [list(m.values()) + [label]]), {**m, "target": label})


COMMANDS = {
    "find-ncpm": cmd_find_ncpm,
    "tuning-curve": cmd_tuning_curve,
    "spectrum": cmd_spectrum,
    "shg": cmd_shg,
    "jsa": cmd_jsa,
    "hom": cmd_hom,
    "qpm-period": cmd_qpm_period,
    "compare-pm": cmd_compare_pm,
    "source-sim": cmd_source_sim,
    "tomo": cmd_tomo,
    "metrics": cmd_metrics,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args.command, args)
        if args.show_config:
            print(json.dumps(cfg, indent=2, sort_keys=True), file=sys.stderr)
        out = Output(args, "csv" if args.command == "tuning-curve" else "json")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](cfg, out)
    except (UsageError, ConfigurationError, FileNotFoundError) as exc:
        print(f"spdcsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpdcError, ValueError, ArithmeticError) as exc:
        print(f"spdcsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    try:
        print("\n".join(out.lines))
        sys.stdout.flush()
    except BrokenPipeError:
        # the reader (e.g. ``head``) went away; silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return 0


if __name__ == "__main__":
    sys.exit(main())
