import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from queuekit import cli
from queuekit.modelfile import ModelFileError, parse_document, validate_document
from queuekit.report import to_json

MODELS = Path(__file__).resolve().parent.parent / "models"
MM1 = {"version": "1", "models": [{"kind": "queue", "model": "MM1", "beta": 1, "delta": 2}]}
SYM2 = {"kind": "polling", "name": "sym", "lam": [0.25, 0.25], "b1": [1, 1], "b2": [2, 2],
        "s1": [0.5, 0.5], "s2": [0.25, 0.25]}


def write(tmp_path, doc, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSchema:
    def test_minimal_document_is_valid(self):
        assert validate_document(MM1) == []

    def test_negative_rate_path(self):
        doc = json.loads(json.dumps(MM1))
        doc["models"][0]["beta"] = -1
        paths = [p for p, _ in validate_document(doc)]
        assert "models[0].beta" in paths

    def test_missing_field(self):
        entry = dict(SYM2)
        del entry["s2"]
        problems = validate_document({"version": "1", "models": [entry]})
        assert any("s2" in msg for _, msg in problems)

    def test_unknown_field_rejected(self):
        doc = {"version": "1", "models": [dict(MM1["models"][0], colour="blue")]}
        assert validate_document(doc)

    def test_duplicate_names(self):
        e = dict(MM1["models"][0], name="a")
        with pytest.raises(ModelFileError) as exc:
            parse_document({"version": "1", "models": [e, e]})
        assert exc.value.violations[0][0] == "models[1].name"

    def test_sim_overrides(self):
        mf = parse_document(MM1, seed=9, horizon=5000)
        assert mf.sim.seed == 9 and mf.sim.horizon == 5000
        assert mf.models[0]["name"] == "queue-0"

    def test_bad_sim_block(self):
        with pytest.raises(ModelFileError):
            parse_document(dict(MM1, sim={"horizon": 50}))

    @pytest.mark.parametrize("path", sorted(MODELS.glob("*.json")), ids=lambda p: p.name)
    def test_shipped_examples_are_valid(self, path):
        assert validate_document(json.loads(path.read_text())) == []

    def test_schema_command(self, capsys):
        code, out, _ = run(["schema"], capsys)
        assert code == 0 and json.loads(out)["$schema"].startswith("https://json-schema.org")


class TestCommands:
    def test_analyze(self, tmp_path, capsys):
        code, out, _ = run(["analyze", write(tmp_path, MM1)], capsys)
        assert code == 0
        block = json.loads(out)["models"][0]
        assert block["metrics"]["L"]["value"] == 1.0
        assert block["metrics"]["W"]["units"] and block["metrics"]["W"]["source"]

    def test_schema_violation_exit(self, tmp_path, capsys):
        doc = json.loads(json.dumps(MM1))
        doc["models"][0]["beta"] = -1
        code, out, err = run(["analyze", write(tmp_path, doc)], capsys)
        assert code == 1 and "models[0].beta" in err and out == ""

    def test_unreadable_inputs(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(["analyze", str(bad)], capsys)[0] == 1
        assert run(["analyze", str(tmp_path / "missing.json")], capsys)[0] == 1

    def test_usage_error(self, capsys):
        assert run(["analyze"], capsys)[0] == 1
        assert run(["frobnicate", "x"], capsys)[0] == 1

    def test_unstable_model_reported(self, tmp_path, capsys):
        doc = {"version": "1", "models": [{"kind": "queue", "model": "MM1", "beta": 3, "delta": 2}]}
        code, out, _ = run(["analyze", write(tmp_path, doc)], capsys)
        assert code == 0
        err = json.loads(out)["models"][0]["errors"][0]
        assert err["error"] == "unstable" and err["verdict"] == "transient" and err["rho"] == 1.5
        assert run(["validate", write(tmp_path, doc), "--horizon", "2000"], capsys)[0] == 2

    def test_validate_pass_and_bias_breach(self, tmp_path, capsys):
        doc = {"version": "1", "models": [{"kind": "tandem", "lambda": 1, "mu1": 2, "mu2": 3}]}
        path = write(tmp_path, doc)
        code, out, _ = run(["validate", path, "--horizon", "100000"], capsys)
        assert code == 0
        deltas = json.loads(out)["models"][0]["deltas"]
        assert deltas and all(d["within_tolerance"] for d in deltas.values())
        assert run(["validate", path, "--horizon", "100000", "--bias", "0.5"], capsys)[0] == 2

    def test_internal_error_exit(self, tmp_path, capsys, monkeypatch):
        def boom(mf):
            raise RuntimeError("boom")
        monkeypatch.setattr(cli, "run_analyze", boom)
        code, _, err = run(["analyze", write(tmp_path, MM1)], capsys)
        assert code == 3 and "internal error" in err

    @pytest.mark.parametrize("path", sorted(MODELS.glob("*.json")), ids=lambda p: p.name)
    def test_shipped_examples_analyze(self, path, capsys):
        code, out, _ = run(["analyze", str(path)], capsys)
        assert code == 0 and json.loads(out)["models"]

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "queuekit.cli", "schema"], capture_output=True, text=True)
        assert proc.returncode == 0 and json.loads(proc.stdout)


class TestReports:
    def test_json_round_trip_preserves_floats(self, tmp_path, capsys):
        doc = {"version": "1", "models": [dict(SYM2), {"kind": "queue", "model": "MMm", "beta": 1, "delta": 1, "m": 2}]}
        _, out, _ = run(["analyze", write(tmp_path, doc)], capsys)
        data = json.loads(out)
        assert to_json(data) == out
        q = next(b for b in data["models"] if b["kind"] == "queue")
        assert q["metrics"]["W"]["value"] == 4 / 3

    def test_non_finite_values_are_strings(self):
        assert to_json({"x": float("inf"), "y": float("nan")}) == '{\n  "x": "inf",\n  "y": "nan"\n}\n'

    def test_csv_one_row_per_metric(self, tmp_path, capsys):
        path = write(tmp_path, {"version": "1", "models": [dict(SYM2), MM1["models"][0]]})
        _, js, _ = run(["analyze", path], capsys)
        _, text, _ = run(["analyze", path, "--format", "csv"], capsys)
        rows = list(csv.DictReader(io.StringIO(text)))
        expected = sum(len(b.get(s, {})) for b in json.loads(js)["models"]
                       for s in ("metrics", "residuals", "estimates", "deltas"))
        assert len(rows) == expected
        assert {r["section"] for r in rows} <= {"metrics", "residuals", "estimates", "deltas"}

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, stdout, _ = run(["analyze", write(tmp_path, MM1), "--out", str(out)], capsys)
        assert code == 0 and stdout == "" and json.loads(out.read_text())

    def test_byte_identical_runs(self, tmp_path, capsys):
        path = write(tmp_path, {"version": "1", "models": [dict(SYM2), MM1["models"][0]],
                                "sim": {"seed": 4, "horizon": 20000}})
        for verb in ("analyze", "simulate", "validate"):
            a, b = tmp_path / f"{verb}-a.json", tmp_path / f"{verb}-b.json"
            cli.main([verb, path, "--out", str(a)])
            cli.main([verb, path, "--out", str(b)])
            assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_simulation(self, tmp_path, capsys):
        path = write(tmp_path, MM1)
        _, a, _ = run(["simulate", path, "--horizon", "20000", "--seed", "1"], capsys)
        _, b, _ = run(["simulate", path, "--horizon", "20000", "--seed", "2"], capsys)
        assert a != b
