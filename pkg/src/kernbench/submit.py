"""Experiment submission: local execution, shell scripts, batch scripts."""

from __future__ import annotations

import os
import shutil
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import ExperimentError, SubmitError
from .experiment import Experiment, unroll, validate
from .report import MachineSpec, REPORT_SEPARATOR, parse_report
from .sampler import ResultLine

BACKENDS = ("local", "shell-script", "batch-template")

BATCH_TEMPLATE = """\
#!/bin/sh
#BATCH job-name={job_name}
#BATCH cores={cores}
#BATCH time-limit={time_limit}
"""


def default_sampler_cmd() -> list[str]:
    return [sys.executable, "-m", "kernbench.sampler"]


@dataclass
class JobHandle:
    backend: str
    report_path: str | None = None
    script_path: str | None = None
    diagnostics: list[str] = field(default_factory=list)


def _check_sampler(sampler_cmd: Sequence[str]) -> None:
    exe = sampler_cmd[0]
    if shutil.which(exe) is None and not Path(exe).exists():
        raise SubmitError(f"sampler executable missing: {exe!r}")


def _metadata(exp: Experiment, machine: MachineSpec, setup_lines: int) -> dict[str, str]:
    meta = {
        "timer": f"clock-fallback frequency_hz={machine.frequency_hz:g}",
        "counters-available": "false",
    }
    if setup_lines:
        meta["setup-lines"] = str(setup_lines)
    return meta


def run_local(
    exp: Experiment,
    out_path: str,
    machine: MachineSpec | None = None,
    sampler_cmd: Sequence[str] | None = None,
) -> JobHandle:
    """Run the sampler locally, one process per thread-count stream."""
    machine = machine or MachineSpec()
    sampler_cmd = list(sampler_cmd or default_sampler_cmd())
    _check_sampler(sampler_cmd)
    diags = validate(exp)
    if diags:
        raise ExperimentError("invalid experiment: " + "; ".join(diags))

    streams = unroll(exp)
    parts = [exp.serialize(), REPORT_SEPARATOR + "\n"]
    for key, value in _metadata(exp, machine, streams[0].setup_lines).items():
        parts.append(f"{key}: {value}\n")
    for stream in streams:
        env = dict(os.environ)
        env["KERNBENCH_NTHREADS"] = str(stream.nthreads)
        env["KERNBENCH_SEED"] = str(exp.seed)
        env["KERNBENCH_FREQ_HZ"] = f"{machine.frequency_hz:g}"
        proc = subprocess.run(
            sampler_cmd,
            input="\n".join(stream.commands) + "\n",
            capture_output=True,
            text=True,
            env=env,
        )
        if proc.returncode != 0:
            raise SubmitError(
                f"sampler exited with status {proc.returncode}: {proc.stderr.strip()}"
            )
        parts.append(f"segment: nthreads={stream.nthreads}\n")
        for line in proc.stdout.splitlines():
            if line.strip():
                ResultLine.parse(line)  # fail early on malformed output
                parts.append(line.strip() + "\n")
    text = "".join(parts)
    parse_report(text)  # sanity: the report must round-trip
    Path(out_path).write_text(text, encoding="utf-8")
    return JobHandle(backend="local", report_path=str(out_path))


def write_script(
    exp: Experiment,
    out_dir: str,
    backend: str = "shell-script",
    machine: MachineSpec | None = None,
    sampler_cmd: Sequence[str] | None = None,
    job_name: str = "kernbench",
    cores: int | None = None,
    time_limit: str = "01:00:00",
) -> JobHandle:
    """Write a self-contained run script plus the unrolled stream files.

    ``batch-template`` prepends a substitutable batch header; in either
    case running the script produces ``report.kbr`` inside ``out_dir``.
    """
    if backend not in ("shell-script", "batch-template"):
        raise SubmitError(f"unknown script backend {backend!r}")
    machine = machine or MachineSpec()
    sampler_cmd = list(sampler_cmd or default_sampler_cmd())
    diags = validate(exp)
    if diags:
        raise ExperimentError("invalid experiment: " + "; ".join(diags))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    streams = unroll(exp)
    (out / "experiment.kbe").write_text(exp.serialize(), encoding="utf-8")

    lines = []
    if backend == "batch-template":
        max_nt = max(s.nthreads for s in streams)
        lines.append(
            BATCH_TEMPLATE.format(
                job_name=job_name, cores=cores or max_nt, time_limit=time_limit
            ).rstrip("\n")
        )
    else:
        lines.append("#!/bin/sh")
    lines.append("set -e")
    lines.append('cd "$(dirname "$0")"')
    lines.append("report=report.kbr")
    lines.append("cat experiment.kbe > $report")
    lines.append(f'echo "{REPORT_SEPARATOR}" >> $report')
    for key, value in _metadata(exp, machine, streams[0].setup_lines).items():
        lines.append(f'echo "{key}: {value}" >> $report')
    quoted = " ".join(f"'{c}'" for c in sampler_cmd)
    for i, stream in enumerate(streams):
        stream_file = f"stream_{i}_nt{stream.nthreads}.txt"
        (out / stream_file).write_text(
            "\n".join(stream.commands) + "\n", encoding="utf-8"
        )
        lines.append(f'echo "segment: nthreads={stream.nthreads}" >> $report')
        lines.append(
            f"KERNBENCH_NTHREADS={stream.nthreads} KERNBENCH_SEED={exp.seed} "
            f"KERNBENCH_FREQ_HZ={machine.frequency_hz:g} "
            f"{quoted} < {stream_file} >> $report"
        )
    script = out / "run.sh"
    script.write_text("\n".join(lines) + "\n", encoding="utf-8")
    script.chmod(0o755)
    return JobHandle(backend=backend, script_path=str(script))


def submit(
    exp: Experiment,
    backend: str,
    out_path: str,
    machine: MachineSpec | None = None,
    sampler_cmd: Sequence[str] | None = None,
    **script_kwargs,
) -> JobHandle:
    if backend == "local":
        return run_local(exp, out_path, machine, sampler_cmd)
    if backend in ("shell-script", "batch-template"):
        return write_script(exp, out_path, backend, machine, sampler_cmd, **script_kwargs)
    raise SubmitError(f"unknown backend {backend!r}, expected one of {BACKENDS}")
