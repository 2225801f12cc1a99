"""
File formats: spectrum curves and JSAs (CSV or JSON), density matrices
(JSON) and tomography counts (CSV).  Floats are written with ``repr`` so
they round-trip exactly and never depend on the locale.  Files are written
atomically (temporary file in the target directory, then rename).
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .source import BASIS, TwoQubitState
from .spectra import JointSpectralAmplitude, SpectrumCurve
from .tomography import MeasurementSetting, TomographyRecord

FORMAT_VERSION = 1


def write_atomic(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _clean(value):
    """Plain-Python copy of metadata (numpy scalars -> float/int)."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _r(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# curves


def curve_to_dict(curve: SpectrumCurve) -> dict:
    return {
        "format": "spectrum-curve",
        "version": FORMAT_VERSION,
        "abscissa_unit": curve.abscissa_unit,
        "ordinate_label": curve.ordinate_label,
        "metadata": _clean(curve.metadata),
        "abscissa": curve.abscissa.tolist(),
        "ordinate": curve.ordinate.tolist(),
    }


def curve_from_dict(data: dict) -> SpectrumCurve:
    return SpectrumCurve(data["abscissa"], data["ordinate"], data.get("abscissa_unit", "nm"),
                         data.get("ordinate_label", ""), data.get("metadata", {}))


def curve_to_csv(curve: SpectrumCurve) -> str:
    buf = io.StringIO()
    for key, value in sorted(_clean(curve.metadata).items()):
        buf.write(f"# {key}: {json.dumps(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"abscissa_{curve.abscissa_unit}", "ordinate"])
    for x, y in zip(curve.abscissa, curve.ordinate):
        writer.writerow([_r(x), _r(y)])
    return buf.getvalue()


def _split_header(text):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = json.loads(value)
        elif line.strip():
            body.append(line)
    return meta, list(csv.reader(body))


def curve_from_csv(text: str) -> SpectrumCurve:
    meta, rows = _split_header(text)
    header, rows = rows[0], rows[1:]
    unit = header[0].split("_", 1)[1] if "_" in header[0] else ""
    data = np.array(rows, dtype=float).reshape(-1, 2)
    return SpectrumCurve(data[:, 0], data[:, 1], unit, header[1], meta)


# ---------------------------------------------------------------------------
# joint spectral amplitudes


def jsa_to_dict(jsa: JointSpectralAmplitude) -> dict:
    return {
        "format": "joint-spectral-amplitude",
        "version": FORMAT_VERSION,
        "omega_unit": "rad/s",
        "omega_s": jsa.omega_s.tolist(),
        "omega_i": jsa.omega_i.tolist(),
        "real": jsa.amplitude.real.tolist(),
        "imag": jsa.amplitude.imag.tolist(),
        "pump_center_rad_s": float(jsa.pump_center),
        "pump_bandwidth_rad_s": float(jsa.pump_bandwidth),
        "length_mm": float(jsa.length_mm),
        "metadata": _clean(jsa.metadata),
    }


def jsa_from_dict(data: dict) -> JointSpectralAmplitude:
    if data.get("format") != "joint-spectral-amplitude":
        raise ConfigurationError("not a joint-spectral-amplitude file")
    amp = np.asarray(data["real"], dtype=float) + 1j * np.asarray(data["imag"], dtype=float)
    return JointSpectralAmplitude(data["omega_s"], data["omega_i"], amp,
                                  data.get("pump_center_rad_s", float("nan")),
                                  data.get("pump_bandwidth_rad_s", float("nan")),
                                  data.get("length_mm", float("nan")), data.get("metadata", {}))


def jsa_to_csv(jsa: JointSpectralAmplitude) -> str:
    buf = io.StringIO()
    meta = dict(_clean(jsa.metadata))
    meta.update(pump_center_rad_s=float(jsa.pump_center),
                pump_bandwidth_rad_s=float(jsa.pump_bandwidth), length_mm=float(jsa.length_mm))
    for key, value in sorted(meta.items()):
        buf.write(f"# {key}: {json.dumps(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["omega_s_rad_s", "omega_i_rad_s", "real", "imaginary"])
    for a, ws in enumerate(jsa.omega_s):
        for b, wi in enumerate(jsa.omega_i):
            z = jsa.amplitude[a, b]
            writer.writerow([_r(ws), _r(wi), _r(z.real), _r(z.imag)])
    return buf.getvalue()


def jsa_from_csv(text: str) -> JointSpectralAmplitude:
    meta, rows = _split_header(text)
    data = np.array(rows[1:], dtype=float)
    ws = np.unique(data[:, 0])
    wi = np.unique(data[:, 1])
    amp = (data[:, 2] + 1j * data[:, 3]).reshape(ws.size, wi.size)
    return JointSpectralAmplitude(ws, wi, amp, meta.pop("pump_center_rad_s", float("nan")),
                                  meta.pop("pump_bandwidth_rad_s", float("nan")),
                                  meta.pop("length_mm", float("nan")), meta)


def load_jsa(path) -> JointSpectralAmplitude:
    text = Path(path).read_text()
    if str(path).endswith(".csv"):
        return jsa_from_csv(text)
    return jsa_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# density matrices


def state_to_dict(state, metrics: dict | None = None) -> dict:
    m = state.matrix if isinstance(state, TwoQubitState) else np.asarray(state)
    out = {
        "format": "density-matrix",
        "version": FORMAT_VERSION,
        "basis": list(BASIS),
        "real": m.real.tolist(),
        "imag": m.imag.tolist(),
    }
    if metrics is not None:
        out["metrics"] = _clean(metrics)
    return out


def state_from_dict(data: dict) -> TwoQubitState:
    if list(data.get("basis", [])) != list(BASIS):
        raise ConfigurationError(f"density matrix basis must be {list(BASIS)}, got {data.get('basis')}")
    real = np.asarray(data["real"], dtype=float)
    imag = np.asarray(data["imag"], dtype=float)
    if real.shape != (4, 4) or imag.shape != (4, 4):
        raise ConfigurationError("density matrix real/imag parts must be 4x4")
    # validated by the constructor at the stored precision
    return TwoQubitState.trusted(real + 1j * imag)


def load_state(path) -> TwoQubitState:
    return state_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# tomography counts

RECORD_COLUMNS = ("setting_arm1", "setting_arm2", "count", "N")


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for r in records:
        writer.writerow([r.setting.arm1, r.setting.arm2, r.count, _r(r.n_pairs)])
    return buf.getvalue()


def records_from_csv(text: str):
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
        raise ConfigurationError(f"counts CSV must have columns {','.join(RECORD_COLUMNS)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            out.append(TomographyRecord(MeasurementSetting(row["setting_arm1"], row["setting_arm2"]),
                                        int(row["count"]), float(row["N"])))
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"counts CSV line {lineno}: {exc}") from None
    return out
