import json
import os
import subprocess
import sys

import numpy as np
import pytest

from qcap import channels as ch
from qcap.cli import main
from qcap.fileio import emit_channel_set


@pytest.fixture
def channel_files(tmp_path):
    paths = {}
    sets = {
        "id": ch.CompoundSet("identity", (ch.identity_channel(2),)),
        "eras": ch.CompoundSet("erasure", (ch.erasure_channel(0.25),)),
        "deph": ch.CompoundSet("dephasing-pair",
                               (ch.dephasing_channel(0.1, "z"), ch.dephasing_channel(0.1, "x"))),
    }
    for key, cset in sets.items():
        p = str(tmp_path / f"{key}.json")
        emit_channel_set(cset, p)
        paths[key] = p
    return paths


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


def test_cmd_info(channel_files, capsys):
    code, out = run_cli(["info", channel_files["deph"]], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == "info"
    assert doc["results"]["n_channels"] == 2
    assert abs(doc["results"]["channels"][0]["coherent_information"] - 0.531004406410719) < 1e-9


def test_cmd_icap_identity(channel_files, capsys):
    code, out = run_cli(["icap", channel_files["id"], "--l", "1", "--restarts", "2"], capsys)
    assert code == 0
    assert abs(json.loads(out)["results"]["value"] - 1.0) < 1e-3


def test_cmd_oneshot(channel_files, capsys):
    code, out = run_cli(["oneshot", channel_files["id"], "--k", "1", "--trials", "3"], capsys)
    assert code == 0
    res = json.loads(out)["results"]
    assert res["ok"] and abs(res["mc_mean"] - 1.0) < 1e-9


def test_cmd_oneshot_identity_16(tmp_path, capsys):
    path = str(tmp_path / "id16.json")
    emit_channel_set(ch.CompoundSet("id16", (ch.identity_channel(16),)), path)
    code, out = run_cli(["oneshot", path, "--k", "2", "--trials", "5"], capsys)
    assert code == 0
    res = json.loads(out)["results"]
    assert abs(res["rhs"] - (1 - np.sqrt(2) / 2)) < 1e-9
    assert abs(res["mc_mean"] - 1.0) < 1e-9


def test_cmd_typical(channel_files, capsys):
    code, out = run_cli(["typical", channel_files["deph"], "--l", "2", "--delta", "0.1"], capsys)
    assert code == 0
    res = json.loads(out)["results"]
    assert [c["rank"] for c in res["channels"]] == [2, 2]
    assert all(abs(c["mass"] - 0.5) < 1e-9 for c in res["channels"])


def test_cmd_bsst(channel_files, capsys):
    code, out = run_cli(["bsst", channel_files["eras"], "--l-list", "2,3",
                         "--rho-diag", "0.9,0.1"], capsys)
    assert code == 0
    res = json.loads(out)["results"]
    assert len(res["values"]) == 2
    assert abs(res["target"] - 0.2344977967946407) < 1e-9


def test_cmd_direct(channel_files, capsys):
    code, out = run_cli(["direct", channel_files["id"], "--l", "2", "--delta", "1.5",
                         "--epsilon", "0.5", "--trials", "2"], capsys)
    assert code == 0
    res = json.loads(out)["results"]
    assert res["k_l"] == 2 and res["linkage_ok"]
    assert abs(res["min_fidelity_true"] - 1.0) < 1e-6


def test_cmd_verify_empty(capsys):
    code, out = run_cli(["verify", "--profile", "empty"], capsys)
    assert code == 0
    assert json.loads(out)["results"]["failed"] == 0


def test_exit_code_on_input_error(tmp_path, capsys):
    bad = str(tmp_path / "bad.json")
    with open(bad, "w") as fh:
        fh.write('{"schema_version": 2}')
    assert main(["info", bad]) == 1


def test_exit_code_on_budget(channel_files, capsys):
    assert main(["bsst", channel_files["eras"], "--l-list", "9", "--budget-dim", "64"]) == 1


def test_out_flag_and_seed_reproducibility(channel_files, tmp_path, capsys):
    out1 = str(tmp_path / "a.json")
    out2 = str(tmp_path / "b.json")
    for out in (out1, out2):
        assert main(["oneshot", channel_files["deph"], "--k", "1", "--trials", "3",
                     "--seed", "7", "--out", out]) == 0
    assert open(out1, "rb").read() == open(out2, "rb").read()


def test_csv_format(channel_files, capsys):
    code, out = run_cli(["typical", channel_files["deph"], "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "section,l,channel,quantity,value"


def test_reports_byte_identical_across_thread_settings(channel_files, tmp_path):
    # same seed, different BLAS thread counts: byte-identical reports
    outs = []
    for threads in ("1", "2"):
        env = dict(os.environ, OMP_NUM_THREADS=threads, OPENBLAS_NUM_THREADS=threads)
        proc = subprocess.run(
            [sys.executable, "-m", "qcap.cli", "oneshot", channel_files["deph"],
             "--k", "1", "--trials", "3", "--seed", "11"],
            capture_output=True, env=env, check=True)
        outs.append(proc.stdout)
    assert outs[0] == outs[1]


def test_budget_env_override(channel_files, capsys, monkeypatch):
    monkeypatch.setenv("QCAP_BUDGET_DIM", "64")
    assert main(["bsst", channel_files["eras"], "--l-list", "9"]) == 1
    monkeypatch.setenv("QCAP_BUDGET_DIM", "8192")
    code, out = run_cli(["bsst", channel_files["eras"], "--l-list", "2"], capsys)
    assert code == 0
    assert json.loads(out)["budget_dim"] == 8192


def test_emit_timings_flag(channel_files, capsys):
    code, out = run_cli(["info", channel_files["id"], "--emit-timings"], capsys)
    assert code == 0
    assert "timings_ms" in json.loads(out)
    code, out = run_cli(["info", channel_files["id"]], capsys)
    assert "timings_ms" not in json.loads(out)
