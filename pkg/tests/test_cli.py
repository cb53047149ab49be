import json
import subprocess
import sys

import pytest

from lstm_varinit.cli import main
from lstm_varinit.variance import baseline_profile, table1_config

SMALL_BENCH = {
    "name": "tiny",
    "dataset": {"synth": {"kind": "sine", "count": 12, "T": 8, "n_features": 1,
                          "noise_var": 0.01, "seed": 1, "test_count": 6}},
    "initializers": ["proposed-1", "normalized"],
    "train": {"epochs": 3},
    "seeds": [0, 1],
}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestInitCheck:
    def test_catalog_name(self, capsys):
        code, out, _ = run(capsys, "init-check", "--config", "proposed-3", "--n", "6")
        assert code == 0 and "satisfied" in out

    def test_catalog_file(self, capsys, tmp_path):
        p = tmp_path / "p3.json"
        p.write_text(table1_config(3, 6).to_json())
        code, out, _ = run(capsys, "init-check", "--config", str(p), "--json")
        report = json.loads(out)
        assert code == 0 and report["equality_residual"] < 1e-12

    def test_baseline_violated(self, capsys, tmp_path):
        p = tmp_path / "norm.json"
        p.write_text(baseline_profile(1).to_json())
        code, out, _ = run(capsys, "init-check", "--config", str(p))
        assert code == 1 and "violated: equality" in out
        assert "delta2" in out

    def test_retarget(self, capsys, tmp_path):
        p = tmp_path / "p1.json"
        p.write_text(table1_config(1, 1).to_json())
        code, out, _ = run(capsys, "init-check", "--config", str(p), "--n", "6")
        assert code == 0 and "N=6" in out

    def test_malformed(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{var_wf: 1")
        code, _, err = run(capsys, "init-check", "--config", str(p))
        assert code == 2 and "malformed" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "init-check", "--config", str(tmp_path / "nope.json"))
        assert code == 2

    def test_zero_vf_undefined(self, capsys, tmp_path):
        d = table1_config(1, 1).to_dict()
        d["var_vf"] = 0.0
        p = tmp_path / "z.json"
        p.write_text(json.dumps(d))
        code, out, _ = run(capsys, "init-check", "--config", str(p))
        assert code == 1 and "undefined" in out

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["init-check"])
        assert info.value.code == 2


class TestVarProbe:
    def test_table_and_json(self, capsys, tmp_path):
        out_json = tmp_path / "r.json"
        code, out, _ = run(capsys, "var-probe", "--config", "proposed-1", "--trials", "2000",
                           "--json-out", str(out_json))
        assert code == 0 and "est Var(h)" in out
        assert json.loads(out_json.read_text())["single_step"]["trials"] == 2000

    def test_steps_block(self, capsys):
        code, out, _ = run(capsys, "var-probe", "--config", "proposed-2", "--trials", "1000",
                           "--steps", "5")
        assert code == 0 and "Var(c) trajectory" in out and "step    5" in out

    def test_too_few_trials(self, capsys):
        code, _, err = run(capsys, "var-probe", "--config", "proposed-1", "--trials", "999")
        assert code == 2 and "1000" in err

    @pytest.mark.xfail(strict=True, reason="single-step Var(h) is about 6 for this config; see decisions ledger")
    def test_proposed1_variance_band(self, capsys, tmp_path):
        out_json = tmp_path / "r.json"
        run(capsys, "var-probe", "--config", "proposed-1", "--trials", "100000", "--json-out", str(out_json))
        est = json.loads(out_json.read_text())["single_step"]["est_var_h"]
        assert 0.95 <= est <= 1.05

    def test_deterministic(self, capsys):
        _, a, _ = run(capsys, "var-probe", "--config", "proposed-4", "--trials", "3000", "--seed", "5")
        _, b, _ = run(capsys, "var-probe", "--config", "proposed-4", "--trials", "3000", "--seed", "5")
        assert a == b


class TestGradcheck:
    def test_defaults(self, capsys):
        code, out, _ = run(capsys, "gradcheck")
        assert code == 0 and "max relative error" in out

    @pytest.mark.parametrize("kind", ["traditional", "peephole"])
    def test_kinds(self, capsys, kind):
        code, _, _ = run(capsys, "gradcheck", "--kind", kind, "--act", "identity", "--m", "2", "--t", "3")
        assert code == 0

    def test_corrupted(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--corrupt")
        assert code == 1 and "wf" in out

    def test_zero_size(self, capsys):
        code, _, _ = run(capsys, "gradcheck", "--m", "0")
        assert code == 2


class TestBench:
    def test_runs_and_summarizes(self, capsys, tmp_path):
        spec = tmp_path / "tiny.json"
        spec.write_text(json.dumps(SMALL_BENCH))
        code, out, _ = run(capsys, "bench", str(spec), "--output-dir", str(tmp_path / "out"))
        assert code == 0 and out.splitlines()[1].startswith("proposed-1")
        assert (tmp_path / "out" / "summary.csv").exists()

    def test_divergence_exit(self, capsys, tmp_path):
        spec = dict(SMALL_BENCH, activation="identity", train={"epochs": 5, "learning_rate": 5.0},
                    initializers=["normalized"])
        p = tmp_path / "div.json"
        p.write_text(json.dumps(spec))
        code, out, _ = run(capsys, "bench", str(p), "--output-dir", str(tmp_path / "o"))
        assert code == 1

    def test_bad_spec(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(dict(SMALL_BENCH, colour="blue")))
        code, _, err = run(capsys, "bench", str(p))
        assert code == 2 and "colour" in err


class TestSynthCommand:
    def test_ucr(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        code, _, _ = run(capsys, "synth", "--kind", "sine", "--count", "4", "--T", "5", "--out", str(out))
        assert code == 0 and len(out.read_text().splitlines()) == 4

    def test_panel(self, capsys, tmp_path):
        out = tmp_path / "p.csv"
        code, _, _ = run(capsys, "synth", "--kind", "ar1", "--count", "3", "--T", "4", "--n-features", "6",
                         "--noise-var", "0.1", "--out", str(out))
        lines = out.read_text().splitlines()
        assert code == 0 and lines[0] == "subject_id,t,f1,f2,f3,f4,f5,f6" and len(lines) == 13

    def test_byte_identical(self, capsys, tmp_path):
        for name in ("a.csv", "b.csv"):
            run(capsys, "synth", "--kind", "memory", "--count", "5", "--T", "6", "--noise-var", "0.1",
                "--seed", "3", "--out", str(tmp_path / name))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_invalid(self, capsys, tmp_path):
        code, _, _ = run(capsys, "synth", "--kind", "sine", "--count", "1", "--out", str(tmp_path / "x"))
        assert code == 2


def test_console_module_entry():
    r = subprocess.run([sys.executable, "-m", "lstm_varinit.cli", "init-check", "--config", "proposed-1"],
                       capture_output=True, text=True)
    assert r.returncode == 0
