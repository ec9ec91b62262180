"""Command-line interface: artifacts, headers, exit codes, determinism."""

import json
import subprocess
import sys

import pytest

from sparsebump.cli import main
from sparsebump.dyadic import instance_from_dict


def run_cli(*argv):
    return main(list(argv))


def read(path):
    return path.read_text()


class TestGen:
    def test_writes_valid_instance_json(self, tmp_path):
        out = tmp_path / "inst.json"
        assert run_cli("gen", "--depth", "3", "--out", str(out)) == 0
        data = json.loads(read(out))
        inst = instance_from_dict(data)
        assert inst.pair.geometry.depth == 3
        assert data["meta"]["config"]["cmd"] == "gen"
        assert len(data["meta"]["config_hash"]) == 16

    def test_depth_zero_single_leaf(self, tmp_path):
        out = tmp_path / "inst.json"
        assert run_cli("gen", "--depth", "0", "--out", str(out)) == 0
        data = json.loads(read(out))
        assert len(data["sigma_leaves"]) == 1
        inst = instance_from_dict(data)
        assert len(inst.family.cubes) == 1

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            run_cli("gen", "--depth", "4", "--seed", "3", "--out", str(out))
        assert read(a) == read(b)


class TestConstants:
    @pytest.fixture()
    def instance_file(self, tmp_path, instance_a):
        path = tmp_path / "inst.json"
        path.write_text(instance_a.dumps())
        return path

    def test_rows_and_header(self, tmp_path, instance_file):
        out = tmp_path / "constants.csv"
        assert run_cli("constants", "--in", str(instance_file),
                       "--out", str(out)) == 0
        lines = read(out).splitlines()
        assert lines[0].startswith("# config ")
        assert lines[1].startswith("# config_hash ")
        assert lines[2] == "name,value"
        rows = dict(ln.split(",") for ln in lines[3:])
        assert float(rows["a_p"]) == pytest.approx(4.0)
        assert float(rows["testing_p"]) == pytest.approx((23.0625 / 1.75) ** 0.5,
                                                         rel=1e-12)
        assert float(rows["op_norm_p2"]) > float(rows["testing_p"]) - 1e-9
        assert list(rows) == sorted(rows)

    def test_inadmissible_bumps_rejected(self, tmp_path, instance_file):
        spec = tmp_path / "bumps.json"
        spec.write_text(json.dumps(
            {"psi": {"family": "log_power", "eps": 0.0},
             "phi": {"family": "log_loglog", "eps": 1.0}}))
        assert run_cli("constants", "--in", str(instance_file),
                       "--bumps", str(spec), "--out", "-") == 2

    def test_missing_file_is_usage_error(self):
        assert run_cli("constants", "--in", "/nonexistent.json") == 2


class TestCheck:
    def test_random_corpus_all_suites_pass(self, tmp_path):
        out = tmp_path / "check.csv"
        assert run_cli("check", "--suite", "all", "--trials", "10",
                       "--seed", "4", "--out", str(out)) == 0
        lines = read(out).splitlines()
        assert lines[2] == "name,lhs,rhs,bound,ratio,pass"
        body = lines[3:]
        assert body == sorted(body)
        assert any("prop32" in ln for ln in body)
        assert any("cov" in ln for ln in body)
        assert any("scale_testing" in ln for ln in body)

    def test_single_instance_file(self, tmp_path, instance_a):
        path = tmp_path / "inst.json"
        path.write_text(instance_a.dumps())
        out = tmp_path / "check.csv"
        assert run_cli("check", "--in", str(path), "--suite", "lemmas",
                       "--out", str(out)) == 0
        assert any(ln.startswith("file_prop33") for ln in read(out).splitlines())

    def test_unknown_suite_is_usage_error(self):
        assert run_cli("check", "--suite", "bogus") == 2


class TestSearch:
    def test_sweep_artifact(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run_cli("search", "--objective", "main_theorem", "--depths", "2",
                       "--steps", "40", "--out", str(out)) == 0
        lines = read(out).splitlines()
        assert lines[2] == "depth,best_ratio,evaluations,seconds"
        depth, ratio, evals, seconds = lines[3].split(",")
        assert depth == "2"
        assert float(ratio) > 0.0
        assert seconds == "0"  # byte-stable default

    def test_result_out_replayable(self, tmp_path):
        res = tmp_path / "result.json"
        assert run_cli("search", "--objective", "main_theorem", "--depths", "2",
                       "--steps", "40", "--out", str(tmp_path / "s.csv"),
                       "--result-out", str(res)) == 0
        payload = json.loads(read(res))
        inst = instance_from_dict(payload["result"]["best_instance"])
        assert inst.pair.geometry.depth == 2

    def test_unknown_objective_is_usage_error(self):
        assert run_cli("search", "--objective", "bogus") == 2


class TestReport:
    def test_merges_with_provenance(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run_cli("check", "--suite", "cov", "--trials", "3", "--seed", "1",
                "--out", str(a))
        run_cli("check", "--suite", "cov", "--trials", "3", "--seed", "1",
                "--out", str(b))
        out = tmp_path / "merged.csv"
        assert run_cli("report", "--in", str(a), str(b), "--out", str(out)) == 0
        lines = read(out).splitlines()
        assert lines[0] == "file,config_hash,schema,row"
        assert any(ln.endswith(",DUPLICATE") for ln in lines[1:])

    def test_no_inputs_is_usage_error(self):
        assert run_cli("report") == 2


class TestDeterminism:
    def test_artifacts_byte_identical_across_processes(self, tmp_path):
        outputs = []
        for tag in ("one", "two"):
            d = tmp_path / tag
            d.mkdir()
            cmds = [
                ["gen", "--depth", "3", "--seed", "5", "--out", str(d / "g.json")],
                ["check", "--suite", "cov", "--trials", "4", "--seed", "5",
                 "--out", str(d / "c.csv")],
                ["search", "--objective", "main_theorem", "--depths", "2",
                 "--steps", "30", "--out", str(d / "s.csv")],
            ]
            for cmd in cmds:
                proc = subprocess.run([sys.executable, "-m", "sparsebump.cli"] + cmd)
                assert proc.returncode == 0
            outputs.append([read(d / n) for n in ("g.json", "c.csv", "s.csv")])
        assert outputs[0] == outputs[1]
