"""HTTP service: kernel catalog, validation, job execution, report access.

A single worker thread executes submitted experiments strictly in FIFO
order; finished reports land in a flat directory indexed by
``index.json``.  The bundled web interface, when present, is served from
the package's ``webui`` directory.
"""

from __future__ import annotations

import json
import queue
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .errors import KernbenchError
from .experiment import Experiment, validate
from .kernels import REGISTRY
from .report import MachineSpec, Report, STATISTICS, parse_report, series
from .signatures import DataArg, DimArg, FlagArg, FlagSwitch, LdArg, PathArg, ScalarArg, derive_shapes
from .submit import default_sampler_cmd, run_local

DEFAULT_PORT = 8091


def _rule_json(rule):
    if isinstance(rule, FlagSwitch):
        return {"flag": rule.flag, "cases": dict(rule.cases)}
    return rule


def _arg_json(spec) -> dict:
    out = {"name": spec.name, "kind": spec.kind}
    if isinstance(spec, FlagArg):
        out["allowed"] = list(spec.allowed)
    elif isinstance(spec, LdArg):
        out["of"] = spec.of
    elif isinstance(spec, DataArg):
        out["rows"] = _rule_json(spec.rows)
        out["cols"] = _rule_json(spec.cols)
        out["ld"] = spec.ld
        out["structure"] = _rule_json(spec.structure)
    return out


def signature_catalog() -> list[dict]:
    out = []
    for name in sorted(REGISTRY):
        sig = REGISTRY[name]
        out.append({
            "name": sig.name,
            "dtype": sig.dtype,
            "description": sig.description,
            "args": [_arg_json(a) for a in sig.args],
        })
    return out


@dataclass
class StoredReport:
    id: str
    name: str
    path: str


class ReportStore:
    """Flat directory of report files plus a JSON index."""

    def __init__(self, root: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "index.json"
        self._lock = threading.Lock()
        if self.index_path.exists():
            self._index = json.loads(self.index_path.read_text(encoding="utf-8"))
        else:
            self._index = {}
            self._write_index()

    def _write_index(self) -> None:
        self.index_path.write_text(
            json.dumps(self._index, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def add(self, name: str, text: str) -> StoredReport:
        parse_report(text)  # refuse to store anything unparseable
        with self._lock:
            rid = uuid.uuid4().hex[:12]
            path = self.root / f"{rid}.kbr"
            path.write_text(text, encoding="utf-8")
            self._index[rid] = {"name": name, "file": path.name}
            self._write_index()
        return StoredReport(rid, name, str(path))

    def list(self) -> list[dict]:
        with self._lock:
            return [
                {"id": rid, "name": entry["name"]}
                for rid, entry in sorted(self._index.items())
            ]

    def get_text(self, rid: str) -> str:
        with self._lock:
            entry = self._index.get(rid)
        if entry is None:
            raise KeyError(rid)
        return (self.root / entry["file"]).read_text(encoding="utf-8")

    def get(self, rid: str) -> Report:
        return parse_report(self.get_text(rid))


@dataclass
class Job:
    id: str
    name: str
    experiment_text: str
    state: str = "queued"  # queued | running | done | failed
    error: str | None = None
    report_id: str | None = None


class JobRunner:
    """Strict FIFO execution on one worker thread."""

    def __init__(self, store: ReportStore, machine: MachineSpec, sampler_cmd=None):
        self.store = store
        self.machine = machine
        self.sampler_cmd = sampler_cmd
        self.jobs: dict[str, Job] = {}
        self._queue: "queue.Queue[str | None]" = queue.Queue()
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        if self._thread is None or not self._thread.is_alive():
            self._thread = threading.Thread(target=self._loop, daemon=True)
            self._thread.start()

    def stop(self) -> None:
        if self._thread is not None and self._thread.is_alive():
            self._queue.put(None)
            self._thread.join(timeout=10)

    def enqueue(self, name: str, experiment_text: str) -> Job:
        job = Job(id=uuid.uuid4().hex[:12], name=name, experiment_text=experiment_text)
        with self._lock:
            self.jobs[job.id] = job
        self._queue.put(job.id)
        return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            return self.jobs[job_id]

    def wait_idle(self, timeout: float | None = None) -> None:
        """Block until every queued job has finished; test helper."""
        self._queue.join()
        _ = timeout

    def _loop(self) -> None:
        while True:
            job_id = self._queue.get()
            if job_id is None:
                self._queue.task_done()
                return
            job = self.get(job_id)
            with self._lock:
                job.state = "running"
            try:
                exp = Experiment.deserialize(job.experiment_text)
                out_path = self.store.root / f"job_{job.id}.tmp"
                run_local(exp, str(out_path), self.machine, self.sampler_cmd)
                stored = self.store.add(job.name, out_path.read_text(encoding="utf-8"))
                out_path.unlink()
                with self._lock:
                    job.state = "done"
                    job.report_id = stored.id
            except Exception as exc:
                with self._lock:
                    job.state = "failed"
                    job.error = str(exc)
            finally:
                self._queue.task_done()


def create_app(
    report_dir: str = "reports",
    machine: MachineSpec | None = None,
    sampler_cmd=None,
    webui_dir: str | None = None,
) -> FastAPI:
    machine = machine or MachineSpec()
    store = ReportStore(report_dir)
    runner = JobRunner(store, machine, sampler_cmd or default_sampler_cmd())

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        runner.start()
        yield
        runner.stop()

    app = FastAPI(title="kernbench", version="0.1.0", lifespan=lifespan)
    app.state.store = store
    app.state.runner = runner
    app.state.machine = machine

    @app.get("/api/kernels")
    def kernels():
        return {"kernels": signature_catalog()}

    @app.post("/api/shapes")
    def shapes(payload: dict = Body(...)):
        """Operand shapes and minimal leading dimensions for concrete
        flag/dim values; the call editor uses this for ld autofill."""
        name = payload.get("kernel")
        if name not in REGISTRY:
            raise HTTPException(404, f"unknown kernel {name!r}")
        sig = REGISTRY[name]
        bindings: dict[str, object] = {}
        for spec in sig.args:
            if isinstance(spec, FlagArg):
                bindings[spec.name] = payload.get("flags", {}).get(spec.name)
            elif isinstance(spec, DimArg):
                val = payload.get("dims", {}).get(spec.name)
                if not isinstance(val, int):
                    raise HTTPException(400, f"dim {spec.name!r} must be an integer")
                bindings[spec.name] = val
        try:
            derived = derive_shapes(sig, bindings)
        except KernbenchError as exc:
            raise HTTPException(400, str(exc))
        return {
            "operands": {
                n: {"rows": s.rows, "cols": s.cols, "min_ld": s.min_ld}
                for n, s in derived.items()
            }
        }

    @app.post("/api/validate")
    def validate_experiment(payload: dict = Body(...)):
        text = payload.get("experiment")
        if not isinstance(text, str):
            raise HTTPException(400, "missing experiment text")
        try:
            exp = Experiment.deserialize(text)
        except KernbenchError as exc:
            return {"valid": False, "diagnostics": [str(exc)]}
        diags = validate(exp)
        return {"valid": not diags, "diagnostics": diags}

    @app.post("/api/jobs", status_code=202)
    def submit_job(payload: dict = Body(...)):
        text = payload.get("experiment")
        if not isinstance(text, str):
            raise HTTPException(400, "missing experiment text")
        try:
            exp = Experiment.deserialize(text)
        except KernbenchError as exc:
            raise HTTPException(400, str(exc))
        diags = validate(exp)
        if diags:
            raise HTTPException(400, "; ".join(diags))
        job = runner.enqueue(payload.get("name", "experiment"), text)
        return {"id": job.id, "state": job.state}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        try:
            job = runner.get(job_id)
        except KeyError:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return {
            "id": job.id,
            "name": job.name,
            "state": job.state,
            "error": job.error,
            "report_id": job.report_id,
        }

    @app.get("/api/reports")
    def reports():
        return {"reports": store.list()}

    @app.get("/api/reports/{report_id}", response_class=PlainTextResponse)
    def report_text(report_id: str):
        try:
            return store.get_text(report_id)
        except KeyError:
            raise HTTPException(404, f"unknown report {report_id!r}")

    @app.get("/api/reports/{report_id}/series")
    def report_series(
        report_id: str,
        metric: str = "time",
        stat: str = "median",
        discard_first: bool = True,
        breakdown: bool = False,
    ):
        try:
            rep = store.get(report_id)
        except KeyError:
            raise HTTPException(404, f"unknown report {report_id!r}")
        if metric not in rep.metric_names():
            raise HTTPException(400, f"unknown metric {metric!r}")
        if stat not in STATISTICS:
            raise HTTPException(400, f"unknown statistic {stat!r}")
        try:
            named = series(rep, metric, stat, discard_first, machine,
                           breakdown=breakdown)
        except KernbenchError as exc:
            raise HTTPException(409, str(exc))
        rng = rep.experiment.range
        return {
            "metric": metric,
            "statistic": stat,
            "range_var": rng.var if rng else None,
            "series": {
                key: [{"x": x, "y": y} for x, y in pts]
                for key, pts in named.items()
            },
        }

    ui_dir = Path(webui_dir) if webui_dir else Path(__file__).parent / "webui"
    if ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="webui")

    return app
