import csv
import io
import json
import subprocess
import sys

import pytest

from steiner.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def run_json(argv, capsys):
    code, out, err = run(argv + ["--format", "json"], capsys)
    assert code == 0, err
    return json.loads(out)


def csv_rows(text):
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


class TestVolumes:
    def test_spiral_csv(self, capsys):
        code, out, _ = run(["volumes", "--family", "spiral", "--kmax", "100"], capsys)
        assert code == 0
        assert out.startswith("# config: ")
        rows = csv_rows(out)
        assert len(rows) == 101
        assert float(rows[1]["V_k"]) == pytest.approx(2.0, rel=1e-15)
        assert {"k", "V_k", "logV_k", "m_k"} <= set(rows[0])

    def test_box_csv(self, capsys):
        code, out, _ = run(["volumes", "--family", "box", "--sides", "1,0.5,0.25"], capsys)
        rows = csv_rows(out)
        assert code == 0 and len(rows) == 4
        assert float(rows[-1]["V_k"]) == pytest.approx(0.125)

    def test_json_has_config_echo(self, capsys):
        d = run_json(["volumes", "--family", "bridge", "--kmax", "10"], capsys)
        assert d["config"]["family"] == "bridge" and d["config"]["kmax"] == 10
        assert len(d["result"]["logV"]) == 11
        assert d["result"]["ulc"]["passed"]

    def test_global_format_flag(self, capsys):
        code, out, _ = run(["--format", "json", "volumes", "--kmax", "3"], capsys)
        assert code == 0 and json.loads(out)["result"]["source"] == "spiral"

    def test_out_file(self, tmp_path, capsys):
        target = tmp_path / "v.csv"
        code, out, _ = run(["volumes", "--kmax", "5", "--out", str(target)], capsys)
        assert code == 0 and out == ""
        assert len(csv_rows(target.read_text())) == 6


class TestUserFiles:
    @pytest.mark.parametrize("name,text", [
        ("seq.json", "[1, 2, 1.5]"),
        ("seq.json", '{"values": [1, 2, 1.5]}'),
        ("seq.csv", "k,V_k\n0,1\n1,2\n2,1.5\n"),
    ])
    def test_layouts(self, tmp_path, capsys, name, text):
        path = tmp_path / name
        path.write_text(text)
        d = run_json(["volumes", "--family", "user", "--file", str(path)], capsys)
        assert d["result"]["logV"][0] == 0.0 and len(d["result"]["logV"]) == 3

    def test_interchange_roundtrip(self, tmp_path, capsys):
        d = run_json(["volumes", "--family", "box", "--sides", "1,0.5"], capsys)
        path = tmp_path / "seq.json"
        path.write_text(json.dumps(d["result"]))
        e = run_json(["volumes", "--family", "user", "--file", str(path)], capsys)
        assert e["result"]["logV"] == d["result"]["logV"]

    def test_bad_v0(self, tmp_path, capsys):
        path = tmp_path / "seq.json"
        path.write_text("[2, 1, 0.5]")
        code, out, err = run(["volumes", "--family", "user", "--file", str(path)], capsys)
        assert code == 2 and out == "" and "V_0" in err

    @pytest.mark.parametrize("text", ["not json", '{"foo": 1}', "[1, -1]"])
    def test_bad_content(self, tmp_path, capsys, text):
        path = tmp_path / "seq.json"
        path.write_text(text)
        assert run(["volumes", "--family", "user", "--file", str(path)], capsys)[0] == 2

    def test_missing_file(self, tmp_path, capsys):
        argv = ["volumes", "--family", "user", "--file", str(tmp_path / "nope.json")]
        assert run(argv, capsys)[0] == 2


class TestAnalyze:
    def test_spiral(self, capsys):
        d = run_json(["analyze", "--family", "spiral", "--kmax", "2000"], capsys)["result"]
        assert d["rho_hat"] == pytest.approx(0.667, abs=0.01)
        assert d["classification"] == "GC"

    def test_counterexample_class(self, capsys):
        argv = ["analyze", "--family", "box", "--rule", "power_law", "--param", "1.25"]
        assert run_json(argv, capsys)["result"]["gao_vitale"] == "violated"

    def test_counterexample_command(self, capsys):
        d = run_json(["counterexample"], capsys)["result"]
        assert d["gao_vitale"] == "violated"
        assert d["decay_exponent"] == pytest.approx(-0.25, abs=0.05)

    def test_short_sequence(self, tmp_path, capsys):
        path = tmp_path / "seq.json"
        path.write_text("[1, 1, 0.4, 0.1, 0.02]")
        d = run_json(["analyze", "--family", "user", "--file", str(path)], capsys)["result"]
        assert d["classification"] == "Inconclusive"
        assert "window" in d["diagnostics"]["error"]

    def test_box_needs_rule(self, capsys):
        assert run(["analyze", "--family", "box"], capsys)[0] == 2


class TestEvalZeros:
    def test_eval_spiral(self, capsys):
        d = run_json(["eval", "--family", "spiral", "--z", "0.5", "--degree", "300"], capsys)
        row = d["result"]["points"][0]
        assert row["closed_form_rel_delta"] <= 1e-10
        assert row["re_f"] == pytest.approx(2.4943072521618821758, rel=1e-12)

    def test_eval_complex_points(self, capsys):
        argv = ["eval", "--family", "bridge", "--z", "1+1i", "--z", "-2", "--degree", "200"]
        rows = run_json(argv, capsys)["result"]["points"]
        assert len(rows) == 2 and rows[0]["im_z"] == 1.0
        assert all(r["closed_form_rel_delta"] <= 1e-10 for r in rows)

    def test_eval_csv(self, capsys):
        code, out, _ = run(["eval", "--family", "box", "--sides", "1,0.5,0.25", "--z", "0.5",
                            "--format", "csv"], capsys)
        rows = csv_rows(out)
        assert code == 0 and float(rows[0]["re_f"]) == 2.109375

    def test_zeros_box(self, capsys):
        code, out, _ = run(["zeros", "--family", "box", "--sides", "1,0.5,0.25",
                            "--format", "csv"], capsys)
        assert code == 0
        re = sorted(float(r["re"]) for r in csv_rows(out))
        assert re == pytest.approx([-4, -2, -1], abs=1e-8)

    def test_zeros_json(self, capsys):
        d = run_json(["zeros", "--family", "spiral", "--degree", "40"], capsys)["result"]
        assert len(d["zeros"]) == 40
        assert d["zeros"][0]["re"] == pytest.approx(-1.15648163, rel=1e-7)

    def test_nonconvergence_exit(self, capsys):
        code, out, err = run(["eval", "--family", "spiral", "--z", "1e6", "--degree", "50"], capsys)
        assert code == 3 and out == "" and "converge" in err

    def test_bad_complex(self, capsys):
        assert run(["eval", "--z", "abc"], capsys)[0] == 2


class TestMC:
    def test_tsirelson(self, capsys):
        argv = ["mc", "tsirelson", "--sides", "1,0.5,0.25", "--lambda", "0.5",
                "--samples", "1000000", "--seed", "7"]
        d = run_json(argv, capsys)["result"]
        assert abs(d["value"] - 2.109375) <= 4 * d["stderr"]
        assert d["seed"] == 7 and d["n"] == 1_000_000 and d["exact"] == 2.109375

    @pytest.mark.parametrize("method", ["tube", "wills"])
    def test_other_methods(self, capsys, method):
        argv = ["mc", method, "--sides", "1,0.5,0.25", "--samples", "100000", "--seed", "3"]
        d = run_json(argv, capsys)["result"]
        assert abs(d["z_score"]) <= 4

    def test_reproducible_bytes(self, capsys):
        argv = ["mc", "wills", "--sides", "1,2", "--samples", "20000", "--seed", "5",
                "--workers", "3", "--format", "json"]
        a = run(argv, capsys)[1]
        b = run(argv, capsys)[1]
        assert a == b

    def test_too_few_samples(self, capsys):
        assert run(["mc", "tube", "--sides", "1", "--samples", "10"], capsys)[0] == 2

    def test_missing_sides(self, capsys):
        assert run(["mc", "tube"], capsys)[0] == 2

    def test_ess_warning_on_stderr(self, capsys):
        argv = ["mc", "wills", "--sides", "3,3,3", "--samples", "20000",
                "--proposal-scale", "0.2"]
        code, _, err = run(argv, capsys)
        assert code == 0 and "effective sample size" in err


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"], capsys)[0] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "steiner", "volumes", "--kmax", "2"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and len(csv_rows(res.stdout)) == 3
