import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from subdrift.cli import run
from subdrift.report import result_payload

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

EXPECTED = {
    "verify_zoo_s8": 0, "verify_lazy_bd50_double": 0, "verify_identity_geometric": 2, "bad_beta": 1,
    "verify_domproc_subsampled": 0, "verify_domproc_nested": 0, "plan_poly_zoo_s4": 0, "plan_rate_zoo_s4": 0,
    "classify_tame": 0, "construct_tame": 0, "construct_tame_out_of_scope": 1, "estimate_moment_zoo_s4": 0,
    "bound_sweep_geometric": 0, "domproc_alpha_beta": 0, "domproc_sharpness": 0, "domproc_y_tail": 0,
    "domproc_y_u": 0, "domproc_moment_scaling": 0, "domproc_pathwise": 0, "wnorm_lazy_bd50": 0,
    "wnorm_lazy_bd50_csv": 0, "wnorm_swap": 2,
}


def command_of(path: Path) -> str:
    return yaml.safe_load(path.read_text())["command"]


def invoke(args):
    out, err = io.StringIO(), io.StringIO()
    code = run(args, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write_cfg(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def test_every_shipped_config_is_covered():
    assert {p.stem for p in CONFIGS.glob("*.yaml")} == set(EXPECTED)


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_shipped_config_exit_codes(name, tmp_path):
    path = CONFIGS / f"{name}.yaml"
    out = tmp_path / "report.json"
    code, _, err = invoke([command_of(path), "--config", str(path), "--out", str(out)])
    assert code == EXPECTED[name], err
    if code != 1 or name == "construct_tame_out_of_scope":
        report = json.loads(out.read_text())
        assert report["command"] == command_of(path)
        assert len(report["config_sha256"]) == 64
        assert {"numpy", "scipy", "numba", "python"} <= set(report["versions"])


def test_bad_beta_names_field_and_line():
    code, _, err = invoke(["verify-drift", "--config", str(CONFIGS / "bad_beta.yaml")])
    assert code == 1
    assert "drift.beta (line 7)" in err and "less than 1" in err


def test_out_of_scope_report(tmp_path):
    out = tmp_path / "r.json"
    code, _, _ = invoke(["construct-tame", "--config", str(CONFIGS / "construct_tame_out_of_scope.yaml"),
                         "--out", str(out)])
    report = json.loads(out.read_text())
    assert code == 1 and report["verdict"] == "OUT_OF_SCOPE" and report["error"]["type"] == "ScopeError"


def _base_doc():
    return yaml.safe_load((CONFIGS / "classify_tame.yaml").read_text())


def test_missing_seed_is_rejected(tmp_path):
    doc = _base_doc()
    doc.pop("master_seed")
    code, _, err = invoke(["classify-tame", "--config", str(write_cfg(tmp_path, doc))])
    assert code == 1 and "master_seed" in err


def test_unknown_key_is_rejected(tmp_path):
    doc = _base_doc()
    doc["bogus_option"] = 3
    code, _, err = invoke(["classify-tame", "--config", str(write_cfg(tmp_path, doc))])
    assert code == 1 and "bogus_option" in err


def test_command_mismatch_is_rejected():
    code, _, err = invoke(["verify-drift", "--config", str(CONFIGS / "classify_tame.yaml")])
    assert code == 1 and "classify-tame" in err


def test_missing_config_file(tmp_path):
    code, _, _ = invoke(["classify-tame", "--config", str(tmp_path / "nope.yaml")])
    assert code == 1


@pytest.mark.parametrize("csv_text,needle", [
    ("a,b\n0.5,0.5\n", "shape"),
    ("a,b\n0.5,x\n0.5,0.5\n", "non-numeric"),
    ("a,b\n0.6,0.5\n0.5,0.5\n", "sums to"),
    ("a,b\n", "header row"),
])
def test_matrix_csv_errors(tmp_path, csv_text, needle):
    (tmp_path / "m.csv").write_text(csv_text)
    doc = yaml.safe_load((CONFIGS / "wnorm_swap.yaml").read_text())
    doc["kernel"]["matrix"] = "m.csv"
    code, out, err = invoke(["wnorm-diagnostic", "--config", str(write_cfg(tmp_path, doc))])
    assert code == 1
    assert needle in err


def test_unknown_label_in_pairs(tmp_path):
    doc = yaml.safe_load((CONFIGS / "wnorm_swap.yaml").read_text())
    doc["pairs"] = [["a", "zzz"]]
    (tmp_path / "swap.csv").write_text((CONFIGS / "swap.csv").read_text())
    code, _, err = invoke(["wnorm-diagnostic", "--config", str(write_cfg(tmp_path, doc))])
    assert code == 1 and "zzz" in err


@pytest.mark.parametrize("name", ["domproc_sharpness", "bound_sweep_geometric", "estimate_moment_zoo_s4"])
def test_results_do_not_depend_on_workers(name, tmp_path):
    path = CONFIGS / f"{name}.yaml"
    payloads = []
    for workers in (1, 4):
        out = tmp_path / f"w{workers}.json"
        code, _, _ = invoke([command_of(path), "--config", str(path), "--workers", str(workers), "--out", str(out)])
        assert code == 0
        payloads.append(result_payload(json.loads(out.read_text())))
    assert payloads[0] == payloads[1]


def test_report_refeeds_as_config(tmp_path):
    path = CONFIGS / "domproc_pathwise.yaml"
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert invoke(["domproc-experiment", "--config", str(path), "--out", str(first)])[0] == 0
    assert invoke(["domproc-experiment", "--config", str(first), "--out", str(second)])[0] == 0
    a, b = json.loads(first.read_text()), json.loads(second.read_text())
    assert result_payload(a) == result_payload(b)
    assert a["config_sha256"] == b["config_sha256"]


def test_csv_output_writes_table_and_report(tmp_path):
    out = tmp_path / "table.csv"
    code, _, _ = invoke(["bound-sweep", "--config", str(CONFIGS / "bound_sweep_geometric.yaml"),
                         "--format", "csv", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[0] == "state" and len(lines) == 7
    assert json.loads((tmp_path / "table.json").read_text())["verdict"] == "PASS"


def test_json_to_stdout():
    code, out, _ = invoke(["classify-tame", "--config", str(CONFIGS / "classify_tame.yaml")])
    assert code == 0 and json.loads(out)["verdict"] == "PASS"


def test_bad_workers_flag():
    assert invoke(["classify-tame", "--config", str(CONFIGS / "classify_tame.yaml"), "--workers", "0"])[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "subdrift", "domproc-experiment", "--config",
                           str(CONFIGS / "domproc_alpha_beta.yaml")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verdict"] == "PASS"
