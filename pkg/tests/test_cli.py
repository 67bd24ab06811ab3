import csv
import io
import json
import math
import re
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from pointpaul import cli
from pointpaul.config import ConfigError, load, merge, normalize, parse_quantity

PCB = {"geometry": {"a": "650um", "b": "3.24mm"},
       "drive": {"v_rf": "300V", "frequency": "8.07MHz", "epsilon": 0.0},
       "species": {"preset": "88Sr+"}}

UNIT_SUFFIX = re.compile(r"_(m|um|j|ev|per_m|per_m2|rad_per_s|khz|s|mps|n|ratio|dimensionless|"
                         r"flag|count|index|path)$")


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    with open(path, newline="") as fh:
        first = fh.readline()
        rows = list(csv.reader(fh))
    return first, rows[0], rows[1:]


class TestConfig:
    @given(x=st.floats(1e-3, 1e3))
    def test_units(self, x):
        assert parse_quantity(f"{x!r}um", "length") == pytest.approx(x * 1e-6, rel=1e-15)
        assert parse_quantity(f"{x!r} MHz", "frequency") == pytest.approx(x * 1e6, rel=1e-15)
        assert parse_quantity(x, "voltage") == x

    def test_bad_units(self):
        with pytest.raises(ConfigError, match="allowed"):
            parse_quantity("3 V", "length", "geometry.a")
        with pytest.raises(ConfigError):
            parse_quantity("abc", "length")
        with pytest.raises(ConfigError):
            parse_quantity(True, "length")
        with pytest.raises(ConfigError):
            parse_quantity("inf", "length")

    def test_unknown_key_named(self):
        bad = merge(PCB, {"geometry": {"c": "1mm"}})
        with pytest.raises(ConfigError, match="'c'"):
            normalize(bad)

    def test_radius_order(self):
        with pytest.raises(ConfigError, match="geometry"):
            normalize(merge(PCB, {"geometry": {"a": "4mm"}}))

    def test_custom_species(self):
        norm = normalize(merge(PCB, {"species": {"mass_amu": 40, "charge_e": 1}}))
        assert norm["species"] == {"mass_amu": 40.0, "charge_e": 1.0}
        with pytest.raises(ConfigError):
            normalize(merge(PCB, {"species": {"preset": "99X+"}}))

    def test_normalized_is_fixed_point(self):
        n1 = normalize(PCB)
        assert normalize(n1) == n1
        assert n1["geometry"]["a"] == pytest.approx(650e-6)

    def test_json_error_location(self, tmp_path):
        p = write(tmp_path, "c.json", '{\n "geometry": }')
        with pytest.raises(ConfigError, match="line 2"):
            load(p)


class TestCharacterize:
    def test_fabricated_trap(self, tmp_path, capsys):
        code, out, _ = run(capsys, "characterize", write(tmp_path, "c.json", PCB))
        assert code == 0
        rep = json.loads(out)
        res = rep["results"]
        assert res["z0_um"] == pytest.approx(960, abs=2)
        assert res["omega_rho_over_omega_z_ratio"] == pytest.approx(0.5, abs=0.01)
        assert all(UNIT_SUFFIX.search(k) for k in res), [k for k in res if not UNIT_SUFFIX.search(k)]
        assert rep["tool"] == "pointpaul" and rep["command"] == "characterize"

    def test_round_trip(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", PCB)
        _, first, _ = run(capsys, "characterize", cfg)
        rep = write(tmp_path, "r.json", first)
        other = write(tmp_path, "o.json", merge(PCB, {"drive": {"v_rf": "10V"}}))
        _, again, _ = run(capsys, "characterize", other, "--overrides", rep)
        assert again == first
        _, direct, _ = run(capsys, "characterize", rep)
        assert direct == first

    def test_overrides_merge(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", PCB)
        ov = write(tmp_path, "o.json", {"drive": {"epsilon": 0.52}})
        _, out, _ = run(capsys, "characterize", cfg, "--overrides", ov)
        assert json.loads(out)["results"]["z0_um"] == pytest.approx(600, abs=15)

    def test_config_errors_exit_2(self, tmp_path, capsys):
        bad = write(tmp_path, "b.json", merge(PCB, {"geometry": {"a": "5mm"}}))
        code, out, err = run(capsys, "characterize", bad)
        assert code == 2 and out == "" and "geometry" in err
        code, _, err = run(capsys, "characterize", str(tmp_path / "missing.json"))
        assert code == 2
        beyond = write(tmp_path, "e.json", merge(PCB, {"drive": {"epsilon": 0.9}}))
        code, _, err = run(capsys, "characterize", beyond)
        assert code == 2 and "epsilon" in err

    def test_usage_error_exit_2(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["optimize"])
        assert info.value.code == 2


class TestOptimize:
    def test_unit_height(self, capsys):
        code, out, _ = run(capsys, "optimize", "--height", "1")
        res = json.loads(out)["results"]
        assert code == 0 and res["converged_flag"] is True
        assert res["a_over_z0_ratio"] == pytest.approx(0.651679, rel=1e-4)
        assert res["d_over_d4rod_ratio"] == pytest.approx(0.019703, rel=1e-4)

    def test_units_and_bad_height(self, capsys):
        _, out, _ = run(capsys, "optimize", "--height", "960um")
        assert json.loads(out)["results"]["a_m"] == pytest.approx(625.6e-6, abs=0.5e-6)
        assert run(capsys, "optimize", "--height=-1mm")[0] == 2
        assert run(capsys, "optimize", "--height", "1V")[0] == 2


class TestTables:
    def test_sweep(self, tmp_path, capsys):
        out_csv = str(tmp_path / "s.csv")
        code, out, _ = run(capsys, "sweep-epsilon", "--from", "0", "--to", "0.8",
                           "--steps", "81", "--output", out_csv)
        assert code == 0
        first, header, rows = read_csv(out_csv)
        assert first.startswith("# config_sha256=")
        assert header == cli.SWEEP_HEADER
        assert len(rows) == 81
        res = json.loads(out)["results"]
        assert res["cusp_epsilon_dimensionless"] == pytest.approx(0.7, abs=0.05)
        with open(out_csv, "rb") as fh:
            fh.readline()
            assert fh.readline().endswith(b"\r\n")

    def test_sweep_to_stdout(self, capsys):
        code, out, _ = run(capsys, "sweep-epsilon", "--steps", "5")
        lines = out.splitlines()
        assert code == 0 and lines[0].startswith("#") and len(lines) == 7

    def test_sweep_marks_invalid(self, capsys):
        _, out, _ = run(capsys, "sweep-epsilon", "--from", "0.7", "--to", "0.9", "--steps", "5")
        rows = list(csv.reader(io.StringIO(out)))[2:]
        assert [r[-1] for r in rows] == ["1", "1", "1", "0", "0"]
        assert rows[-1][1] == "nan"

    def test_fieldmap(self, tmp_path, capsys):
        out_csv = str(tmp_path / "f.csv")
        code, _, _ = run(capsys, "fieldmap", "--n", "6", "--output", out_csv)
        _, header, rows = read_csv(out_csv)
        assert code == 0 and header == cli.FIELD_HEADER and len(rows) == 36
        assert all(float(r[5]) >= 0 for r in rows)

    def test_simulate_zero_voltage_constant(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", merge(PCB, {"drive": {"v_rf": 0}}))
        out_csv = str(tmp_path / "t.csv")
        code, _, _ = run(capsys, "simulate", "--config", cfg, "--duration", "2us",
                         "--output", out_csv)
        _, header, rows = read_csv(out_csv)
        assert code == 0 and header == cli.TRAJ_HEADER
        assert len({r[2] for r in rows}) == 1

    def test_simulate_reports_frequencies(self, tmp_path, capsys):
        code, out, _ = run(capsys, "simulate", "--duration", "300us",
                           "--output", str(tmp_path / "t.csv"))
        res = json.loads(out)["results"]
        assert res["omega_z_measured_rad_per_s"] == pytest.approx(
            res["omega_z_predicted_rad_per_s"], rel=0.02)
        assert res["micromotion_sideband_ratio"] == pytest.approx(
            res["q_dimensionless"] / 2, rel=0.1)

    def test_escape_exit_3_leaves_no_file(self, tmp_path, capsys):
        out_csv = tmp_path / "t.csv"
        code, _, err = run(capsys, "simulate", "--displacement", "2mm", "--duration", "200us",
                           "--output", str(out_csv))
        assert code == 3 and "left" in err
        assert list(tmp_path.iterdir()) == []

    def test_bad_dt_exit_2(self, capsys):
        assert run(capsys, "simulate", "--dt", "1us")[0] == 2

    def test_crystal(self, tmp_path, capsys):
        out_csv = str(tmp_path / "c.csv")
        code, out, _ = run(capsys, "crystal", "--n", "3", "--output", out_csv)
        res = json.loads(out)["results"]
        _, header, rows = read_csv(out_csv)
        assert code == 0 and res["planar_flag"] is True and header == cli.CRYSTAL_HEADER
        assert len(rows) == 3


def test_partial_output_removed(tmp_path):
    def rows():
        yield [1.0, 2.0]
        raise RuntimeError("boom")

    target = tmp_path / "x.csv"
    with pytest.raises(RuntimeError):
        cli.write_csv(str(target), ["a_m", "b_m"], rows(), "0" * 64)
    assert list(tmp_path.iterdir()) == []


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "pointpaul.cli", "optimize", "--height", "1mm"],
                         capture_output=True, text=True, check=True).stdout
    assert json.loads(out)["results"]["b_over_z0_ratio"] == pytest.approx(3.57668, rel=1e-4)
