import json
import subprocess
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from kernbench.cli import main as cli_main
from kernbench.plotting import PlotSpec, emit_plot
from kernbench.report import load_report
from kernbench.service import create_app
from kernbench.submit import run_local, write_script
from conftest import gemm_experiment, solve_breakdown_experiment


@pytest.fixture(scope="module")
def report_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("reports") / "fixture.kbr"
    exp = gemm_experiment(n=24, nreps=4, seed=1)
    from kernbench.experiment import RangeSpec, SymbolicCall
    exp.range = RangeSpec("n", 8, 8, 32)
    exp.calls = [SymbolicCall("dgemm", (
        "N", "N", "n", "n", "n", "1", "A", "n", "B", "n", "0", "C", "n",
    ))]
    run_local(exp, str(path))
    return str(path)


def test_cli_validate_ok(tmp_path):
    exp_file = tmp_path / "e.kbe"
    exp_file.write_text(gemm_experiment(n=8, nreps=2).serialize())
    assert cli_main(["validate", str(exp_file)]) == 0


def test_cli_validate_bad_exits_1(tmp_path, capsys):
    exp_file = tmp_path / "e.kbe"
    exp_file.write_text(
        "#KERNBENCH EXPERIMENT v1\nnreps: 2\ncall: dgetrf 4 4 A 2\nseed: 0\n"
    )
    assert cli_main(["validate", str(exp_file)]) == 1
    assert "below the row count" in capsys.readouterr().err


def test_cli_usage_error_exits_2():
    with pytest.raises(SystemExit) as err:
        cli_main(["stats"])  # missing report argument
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        cli_main(["frobnicate"])
    assert err.value.code == 2


def test_cli_missing_file_exits_1(capsys):
    assert cli_main(["validate", "/nonexistent/exp.kbe"]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_run_and_stats(tmp_path, capsys):
    exp_file = tmp_path / "e.kbe"
    exp_file.write_text(gemm_experiment(n=8, nreps=3).serialize())
    out = tmp_path / "r.kbr"
    assert cli_main(["run", str(exp_file), "--out", str(out)]) == 0
    rep = load_report(str(out))
    assert len(rep.raw) == 3
    capsys.readouterr()
    assert cli_main(["stats", str(out), "--metric", "cycles",
                     "--stat", "mean", "--keep-first"]) == 0
    table = capsys.readouterr().out
    assert table.splitlines()[0] == "range-value,metric,statistic,value"
    assert len(table.strip().splitlines()) == 2


def test_cli_kernels(capsys):
    assert cli_main(["kernels"]) == 0
    names = capsys.readouterr().out.split()
    assert "dgemm" in names and "dtrtri" in names
    assert cli_main(["kernels", "--verbose"]) == 0
    assert "transA" in capsys.readouterr().out


def test_cli_plot_deterministic(report_path, tmp_path, capsys):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for out in (a, b):
        assert cli_main(["plot", report_path, "--metric", "gflops",
                         "--stat", "min", "--stat", "max", "--stat", "median",
                         "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("<svg ")
    sidecar = (tmp_path / "a.svg.csv").read_text()
    assert sidecar.splitlines()[0] == "series,statistic,range-value,value"


def test_plot_bar_style_for_unranged(tmp_path):
    exp = gemm_experiment(n=8, nreps=3)
    out = tmp_path / "r.kbr"
    run_local(exp, str(out))
    rep = load_report(str(out))
    svg, sidecar = emit_plot([rep], PlotSpec(metric="time", stats=("mean",)))
    assert "<rect" in svg and "</svg>" in svg
    svg2, _ = emit_plot([rep], PlotSpec(metric="time", stats=("mean",)))
    assert svg == svg2


def test_plot_breakdown_series(tmp_path):
    exp = solve_breakdown_experiment(n=16, nrhs=4)
    out = tmp_path / "r.kbr"
    run_local(exp, str(out))
    rep = load_report(str(out))
    _svg, sidecar = emit_plot(
        [rep], PlotSpec(metric="cycles", stats=("median",), breakdown=True,
                        labels=("run",), style="bar"),
    )
    names = {row.split(",")[0] for row in sidecar.splitlines()[1:]}
    assert names == {"run", "run/call0:dgetrf", "run/call1:dtrsm",
                     "run/call2:dtrsm"}


def test_write_script_backends(tmp_path):
    exp = gemm_experiment(n=8, nreps=2)
    handle = write_script(exp, str(tmp_path / "sh"), backend="shell-script")
    script = Path(handle.script_path).read_text()
    assert script.startswith("#!/bin/sh")
    handle = write_script(exp, str(tmp_path / "batch"),
                          backend="batch-template", job_name="gemmjob")
    script = Path(handle.script_path).read_text()
    assert "#BATCH job-name=gemmjob" in script
    assert "#BATCH cores=" in script and "#BATCH time-limit=" in script
    proc = subprocess.run(["sh", handle.script_path], capture_output=True)
    assert proc.returncode == 0, proc.stderr
    rep = load_report(str(tmp_path / "batch" / "report.kbr"))
    assert len(rep.raw) == 2


# -- HTTP service

@pytest.fixture
def client(tmp_path):
    app = create_app(report_dir=str(tmp_path / "store"))
    with TestClient(app) as c:
        yield c, app


def test_api_kernels_and_shapes(client):
    c, _app = client
    names = {k["name"] for k in c.get("/api/kernels").json()["kernels"]}
    assert {"dgemm", "dtrsm", "dgesv", "sgemm"} <= names
    r = c.post("/api/shapes", json={
        "kernel": "dgemm",
        "flags": {"transA": "N", "transB": "N"},
        "dims": {"m": 3, "n": 4, "k": 5},
    })
    assert r.json()["operands"]["A"] == {"rows": 3, "cols": 5, "min_ld": 3}
    r = c.post("/api/shapes", json={
        "kernel": "dgemm",
        "flags": {"transA": "T", "transB": "N"},
        "dims": {"m": 3, "n": 4, "k": 5},
    })
    assert r.json()["operands"]["A"] == {"rows": 5, "cols": 3, "min_ld": 5}
    assert c.post("/api/shapes", json={"kernel": "nope"}).status_code == 404
    assert c.post("/api/shapes", json={
        "kernel": "dgemm", "flags": {}, "dims": {},
    }).status_code == 400


def test_api_validate(client):
    c, _app = client
    good = gemm_experiment(n=8, nreps=2).serialize()
    assert c.post("/api/validate", json={"experiment": good}).json() == {
        "valid": True, "diagnostics": [],
    }
    bad = "#KERNBENCH EXPERIMENT v1\nnreps: 1\nseed: 0\n"
    res = c.post("/api/validate", json={"experiment": bad}).json()
    assert res["valid"] is False and res["diagnostics"]
    assert c.post("/api/validate", json={}).status_code == 400


def test_api_job_lifecycle_and_reports(client):
    c, app = client
    exp = gemm_experiment(n=12, nreps=3, seed=4).serialize()
    r = c.post("/api/jobs", json={"experiment": exp, "name": "lifecycle"})
    assert r.status_code == 202
    jid = r.json()["id"]
    app.state.runner.wait_idle()
    job = c.get(f"/api/jobs/{jid}").json()
    assert job["state"] == "done"
    rid = job["report_id"]
    listing = c.get("/api/reports").json()["reports"]
    assert {"id": rid, "name": "lifecycle"} in listing
    text = c.get(f"/api/reports/{rid}").text
    assert text.startswith("#KERNBENCH EXPERIMENT v1")
    r = c.get(f"/api/reports/{rid}/series",
              params={"metric": "gflops", "stat": "median",
                      "discard_first": "false"})
    body = r.json()
    assert body["range_var"] is None
    assert len(body["series"]["total"]) == 1
    assert body["series"]["total"][0]["y"] > 0


def test_api_rejects_invalid_submissions(client):
    c, _app = client
    assert c.post("/api/jobs", json={}).status_code == 400
    assert c.post("/api/jobs", json={"experiment": "garbage"}).status_code == 400
    bad = "#KERNBENCH EXPERIMENT v1\nnreps: 1\nseed: 0\n"  # no calls
    assert c.post("/api/jobs", json={"experiment": bad}).status_code == 400


def test_api_404s_and_param_errors(client):
    c, _app = client
    assert c.get("/api/jobs/missing").status_code == 404
    assert c.get("/api/reports/missing").status_code == 404
    assert c.get("/api/reports/missing/series").status_code == 404


def test_report_store_index_persists(tmp_path):
    exp = gemm_experiment(n=8, nreps=2)
    out = tmp_path / "r.kbr"
    run_local(exp, str(out))
    store_dir = tmp_path / "store"
    from kernbench.service import ReportStore
    store = ReportStore(str(store_dir))
    stored = store.add("persisted", out.read_text())
    index = json.loads((store_dir / "index.json").read_text())
    assert index[stored.id]["name"] == "persisted"
    again = ReportStore(str(store_dir))
    assert again.list() == [{"id": stored.id, "name": "persisted"}]
    assert again.get(stored.id).experiment.nreps == 2
