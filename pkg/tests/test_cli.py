import csv
import io
import json

import pytest

from folnerlab import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_cfg(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_fluctuations_family_S(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"schema": cli.SCHEMA_VERSION, "family": "S", "params": [5]})
    code, out, _ = run(capsys, "fluctuations", "--config", cfg)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["count"] == "5"


def test_columns_follow_schema(capsys):
    cols = cli.load_columns()
    assert set(cols) == set(cli.EXPERIMENTS)
    code, out, _ = run(capsys, "slow-rate")
    assert code == 0 and out.splitlines()[0].split(",") == cols["slow-rate"]


def test_eta_validation(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"schema": cli.SCHEMA_VERSION, "eta": "1/10", "observables": 1,
                               "systems": [{"type": "torus", "d": 1, "N": 8}]})
    code, _, err = run(capsys, "verify-main-bound", "--config", cfg)
    assert code == cli.EXIT_USAGE and "eta" in err and "u(eps)/2" in err


@pytest.mark.parametrize("data,field", [
    ({"schema": "other/9"}, "schema"),
    ({"schema": cli.SCHEMA_VERSION, "eps": []}, "eps"),
    ({"schema": cli.SCHEMA_VERSION, "systems": [{"type": "torus"}]}, "systems"),
    ({"schema": cli.SCHEMA_VERSION, "experiment": "learn"}, "experiment"),
])
def test_bad_config(capsys, tmp_path, data, field):
    code, _, err = run(capsys, "verify-main-bound", "--config", write_cfg(tmp_path, data))
    assert code == cli.EXIT_USAGE and field in err


def test_usage_errors(capsys):
    assert run(capsys, "no-such-experiment")[0] == cli.EXIT_USAGE
    assert run(capsys, "learn", "--seed", "-1")[0] == cli.EXIT_USAGE


def test_budget_exit(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"schema": cli.SCHEMA_VERSION, "schedule": {"type": "bs12"},
                               "modulus": "sound", "n": [6], "eps": ["1/2"]})
    code, _, _ = run(capsys, "modulus", "--config", cfg, "--budget-elements", "100")
    assert code == cli.EXIT_BUDGET


def test_failing_cells_exit_one(capsys, tmp_path):
    # the stated Z^2 box modulus is too small
    cfg = write_cfg(tmp_path, {"schema": cli.SCHEMA_VERSION, "n": [1], "eps": ["1/2"]})
    code, out, _ = run(capsys, "modulus", "--config", cfg)
    assert code == cli.EXIT_FAIL and out.strip().endswith("fail")


def test_outputs_and_json_mirror(capsys, tmp_path):
    code, _, _ = run(capsys, "metastability", "--out", str(tmp_path), "--format", "both")
    rows = list(csv.DictReader(open(tmp_path / "metastability.csv")))
    data = json.loads((tmp_path / "metastability.json").read_text())
    assert code == 0 and data["rows"] == rows


@pytest.mark.parametrize("kind", ["upcrossings", "rate-from-limit", "learn"])
def test_deterministic(capsys, tmp_path, kind):
    outs = []
    for i in range(2):
        d = tmp_path / str(i)
        run(capsys, kind, "--seed", "7", "--out", str(d), "--format", "both")
        outs.append(((d / f"{kind}.csv").read_bytes(), (d / f"{kind}.json").read_bytes()))
    assert outs[0] == outs[1]
