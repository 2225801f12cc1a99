import json
import subprocess
import sys
from pathlib import Path

import pytest

from spdcsim.cli import main, parse_range, UsageError
from spdcsim.dispersion import dump_crystal, load_crystal

CONFIGS = Path(__file__).resolve().parent.parent / "acceptance_configs"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def kv(text):
    return dict(line.split(": ", 1) for line in text.splitlines() if ": " in line)


def test_find_ncpm(capsys):
    code, out, _ = run(["find-ncpm", "--config", CONFIGS / "find_ncpm.yaml"], capsys)
    assert code == 0
    values = kv(out)
    assert abs(float(values["lambda_c_nm"]) - 1079.63) < 0.5


def test_temps_sweep_rows(tmp_path, capsys):
    out_file = tmp_path / "sweep.csv"
    code, _, _ = run(["find-ncpm", "--temps", "20:40:5", "-o", out_file], capsys)
    assert code == 0
    lines = out_file.read_text().splitlines()
    assert lines[0] == "temperature_c,lambda_c_nm,slope_nm_per_c"
    assert len(lines) == 1 + 5


def test_malformed_crystal(tmp_path, capsys):
    text = dump_crystal(load_crystal("KTP")).splitlines()
    text[7] = "axes.x.colour = blue"
    bad = tmp_path / "bad.crystal"
    bad.write_text("\n".join(text) + "\n")
    code, _, err = run(["find-ncpm", "--crystal", bad], capsys)
    assert code == 1
    assert f"{bad}:8:" in err and "colour" in err


def test_missing_crystal(capsys):
    code, _, err = run(["find-ncpm", "--crystal", "unobtainium"], capsys)
    assert code == 1 and "no bundled crystal" in err


def test_no_root_exit_code(tmp_path, capsys):
    mock = tmp_path / "mock.crystal"
    mock.write_text("name = mock\n" + "".join(
        f"axes.{a}.form = constant\naxes.{a}.coefficients = {n}\n" for a, n in zip("xyz", (1.5, 1.5, 1.6))))
    code, _, err = run(["find-ncpm", "--crystal", mock], capsys)
    assert code == 2 and "one sign" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1
    capsys.readouterr()
    code, _, err = run(["find-ncpm", "--bracket-nm", "900"], capsys)
    assert code == 1


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("crystal: KTP\nlenght_mm: 3\n")
    code, _, err = run(["find-ncpm", "--config", cfg], capsys)
    assert code == 1 and "lenght_mm" in err


def test_precedence_and_show_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("temperature: 40\nlength_mm: 10\n")
    code, _, err = run(["spectrum", "--config", cfg, "--length-mm", "40", "--show-config"], capsys)
    assert code == 0
    shown = json.loads(err)
    assert shown["temperature"] == 40 and shown["length_mm"] == 40.0 and shown["points"] == 2048


def test_spectrum_stdout(capsys):
    code, out, _ = run(["spectrum", "--config", CONFIGS / "spectrum.yaml"], capsys)
    assert code == 0
    assert float(kv(out)["fwhm_nm"]) == pytest.approx(0.318, rel=0.15)


def test_zero_length(capsys):
    code, _, err = run(["spectrum", "--length-mm", "0"], capsys)
    assert code == 2 and "length" in err


def test_shg_csv(tmp_path, capsys):
    path = tmp_path / "shg.csv"
    code, out, _ = run(["shg", "--points", "513", "-o", path], capsys)
    assert code == 0
    body = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    assert body[0] == "abscissa_nm,ordinate" and len(body) == 514


def test_jsa_then_hom(tmp_path, capsys):
    jsa_file = tmp_path / "jsa.json"
    code, out, _ = run(["jsa", "--config", CONFIGS / "jsa.yaml", "--points", "128", "-o", jsa_file], capsys)
    assert code == 0 and "schmidt_purity" in out
    code, out, _ = run(["hom", "--jsa", jsa_file, "-o", tmp_path / "hom.csv"], capsys)
    assert code == 0
    assert float(kv(out)["visibility"]) >= 0.99


def test_qpm_period(capsys):
    code, out, _ = run(["qpm-period", "--config", CONFIGS / "qpm_period.yaml"], capsys)
    assert code == 0
    assert float(kv(out)["poling_period_um"]) == pytest.approx(47.9162, abs=1e-4)


def test_compare_pm(capsys, tmp_path):
    path = tmp_path / "cmp.json"
    code, _, _ = run(["compare-pm", "--config", CONFIGS / "compare_pm.yaml", "-o", path], capsys)
    assert code == 0
    rows = {r["technique"]: r for r in json.loads(path.read_text())["rows"]}
    assert rows["NCPM"]["brightness_vs_qpm1"] == pytest.approx(2.4674011002723395, abs=1e-12)
    assert rows["QPM m=3"]["brightness_vs_qpm1"] == pytest.approx(1 / 9, abs=1e-15)
    assert rows["BPM"]["d_eff_pm_per_v"] == 2.2


def test_source_sim_tomo_metrics(tmp_path, capsys):
    rho = tmp_path / "rho.json"
    code, out, _ = run(["source-sim", "--bell", "phi-", "--bootstrap", "3", "--seed", "4",
                        "--waveplate", "2:HWP:0", "-o", rho], capsys)
    assert code == 0
    report = json.loads(rho.read_text())
    assert report["metrics"]["target"] == "phi-"
    code, out, _ = run(["metrics", "--state", rho, "--target", "phi+"], capsys)
    assert code == 0 and float(kv(out)["fidelity"]) > 0.99  # HWP at 0 turns phi- into phi+

    from spdcsim.io import records_to_csv
    from spdcsim.source import bell_state
    from spdcsim.tomography import simulate_counts
    counts = tmp_path / "counts.csv"
    counts.write_text(records_to_csv(simulate_counts(bell_state("psi-"), seed=1)))
    code, out, _ = run(["tomo", "--counts", counts, "--target", "psi-", "--bootstrap", "0"], capsys)
    assert code == 0 and float(kv(out)["fidelity"]) > 0.99


def test_bad_waveplate(capsys):
    code, _, err = run(["source-sim", "--waveplate", "1:HWP", "--bootstrap", "0"], capsys)
    assert code == 1


@pytest.mark.parametrize("argv", [
    ["find-ncpm", "--temps", "20:30:5", "--format", "csv"],
    ["spectrum", "--points", "301"],
    ["jsa", "--points", "64", "--format", "csv"],
    ["hom", "--points", "64"],
    ["source-sim", "--bootstrap", "4", "--seed", "9", "--preset", "imperfect"],
])
def test_deterministic_files(tmp_path, capsys, argv):
    outputs = []
    for k in range(2):
        path = tmp_path / f"out{k}"
        assert main(argv + ["-o", str(path)]) == 0
        outputs.append(path.read_bytes())
    capsys.readouterr()
    assert outputs[0] == outputs[1]


def test_parse_range():
    assert parse_range("20:40:5", "t") == [20.0, 25.0, 30.0, 35.0, 40.0]
    assert parse_range("0:1:0.1", "t")[-1] == 1.0
    assert len(parse_range("-1:1:11", "d", count=True)) == 11
    with pytest.raises(UsageError):
        parse_range("5:1:1", "t")


def test_entry_point_subprocess():
    proc = subprocess.run([sys.executable, "-m", "spdcsim", "compare-pm"], capture_output=True, text=True)
    assert proc.returncode == 0 and "NCPM" in proc.stdout


def test_imperfect_preset_regime(tmp_path, capsys):
    path = tmp_path / "rho.json"
    code, _, _ = run(["source-sim", "--config", CONFIGS / "source_sim_imperfect.yaml", "--bootstrap", "0",
                      "-o", path], capsys)
    assert code == 0
    m = json.loads(path.read_text())["metrics"]
    for key in ("purity", "concurrence", "fidelity"):
        assert 0.98 <= m[key] <= 1.0
