"""Report parsing, the reduced view, metrics and statistics.

Raw measurements are accessed through the hierarchy
range value -> repetition -> inner value -> call; the reduced view sums
the inner range and the call axis (a parallel block is already one
measurement).  Metrics combine cycle counts with flop counts and machine
information; statistics combine repetitions.

Statistic conventions: median uses the midpoint rule (average of the two
central values for even length); standard deviation is the population
form (divide by n).
"""

from __future__ import annotations

import math
import statistics as pystats
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ReportError
from .experiment import Experiment
from .expressions import evaluate
from .kernels import flop_count, lookup_signature
from .sampler import ResultLine
from .signatures import DimArg, FlagArg, LdArg

REPORT_SEPARATOR = "%%%"

STATISTICS = ("min", "max", "mean", "median", "std")

_BASE_METRICS = ("cycles", "time", "gflops", "flops-per-cycle", "efficiency")


@dataclass(frozen=True)
class MachineSpec:
    """Clock frequency and nominal peak performance of the machine."""

    name: str = "default"
    frequency_hz: float = 1e9
    peak_flops_per_cycle_double: float = 8.0
    peak_flops_per_cycle_single: float = 16.0

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise ValueError("frequency must be positive")
        if self.peak_flops_per_cycle_double <= 0 or self.peak_flops_per_cycle_single <= 0:
            raise ValueError("peak flops/cycle must be positive")

    def peak(self, dtype: str) -> float:
        return (
            self.peak_flops_per_cycle_single
            if dtype == "single"
            else self.peak_flops_per_cycle_double
        )

    def serialize(self) -> str:
        return (
            f"name: {self.name}\n"
            f"frequency_hz: {self.frequency_hz:g}\n"
            f"peak_flops_per_cycle_double: {self.peak_flops_per_cycle_double:g}\n"
            f"peak_flops_per_cycle_single: {self.peak_flops_per_cycle_single:g}\n"
        )

    @classmethod
    def deserialize(cls, text: str) -> "MachineSpec":
        fields = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise ReportError(f"machine spec line {lineno}: expected '<field>: <value>'")
            fields[key.strip()] = value.strip()
        try:
            return cls(
                name=fields.get("name", "default"),
                frequency_hz=float(fields.get("frequency_hz", 1e9)),
                peak_flops_per_cycle_double=float(
                    fields.get("peak_flops_per_cycle_double", 8.0)
                ),
                peak_flops_per_cycle_single=float(
                    fields.get("peak_flops_per_cycle_single", 16.0)
                ),
            )
        except ValueError as exc:
            raise ReportError(f"bad machine spec: {exc}") from None

    @classmethod
    def load(cls, path: str) -> "MachineSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.deserialize(fh.read())


@dataclass
class Measurement:
    cycles: int
    counters: list[int] = field(default_factory=list)
    flops: int = 0


# coordinate: (range value | None, rep, inner value | None, call index | None)
Coord = tuple


@dataclass
class Report:
    experiment: Experiment
    raw: dict[Coord, Measurement]
    failures: set[Coord]
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def dtype(self) -> str:
        return self.experiment.dtype()

    def range_values(self) -> list:
        return self.experiment.range_values()

    def counter_names(self) -> tuple[str, ...]:
        return self.experiment.counters

    def metric_names(self) -> list[str]:
        return list(_BASE_METRICS) + [
            f"counter{k}" for k in range(len(self.experiment.counters))
        ]

    # -- reduced view

    def reduce(self) -> tuple[dict[tuple, Measurement], set[tuple]]:
        """(range value, rep) -> summed Measurement, plus failed coordinates."""
        exp = self.experiment
        out: dict[tuple, Measurement] = {}
        failed: set[tuple] = set()
        ncounters = len(exp.counters)
        for v in exp.range_values():
            for r in range(exp.nreps):
                if exp.parrange is not None:
                    coord = (v, r, None, None)
                    meas = self.raw[coord]
                    out[(v, r)] = meas
                    if coord in self.failures:
                        failed.add((v, r))
                    continue
                total = Measurement(0, [0] * ncounters, 0)
                for iv in exp.inner_values():
                    for ci in range(len(exp.calls)):
                        coord = (v, r, iv, ci)
                        meas = self.raw[coord]
                        total.cycles += meas.cycles
                        total.flops += meas.flops
                        for k in range(ncounters):
                            total.counters[k] += meas.counters[k]
                        if coord in self.failures:
                            failed.add((v, r))
                out[(v, r)] = total
        return out, failed

    def reduce_per_call(self) -> tuple[dict[tuple, Measurement], set[tuple]]:
        """(range value, rep, call index) -> Measurement summed over the inner range."""
        exp = self.experiment
        if exp.parrange is not None:
            raise ReportError("per-call breakdown is undefined for a parallel range")
        out: dict[tuple, Measurement] = {}
        failed: set[tuple] = set()
        ncounters = len(exp.counters)
        for v in exp.range_values():
            for r in range(exp.nreps):
                for ci in range(len(exp.calls)):
                    total = Measurement(0, [0] * ncounters, 0)
                    for iv in exp.inner_values():
                        coord = (v, r, iv, ci)
                        meas = self.raw[coord]
                        total.cycles += meas.cycles
                        total.flops += meas.flops
                        for k in range(ncounters):
                            total.counters[k] += meas.counters[k]
                        if coord in self.failures:
                            failed.add((v, r, ci))
                    out[(v, r, ci)] = total
        return out, failed

    def failure_summary(self) -> list[Coord]:
        return sorted(self.failures, key=lambda c: tuple(-1 if x is None else x for x in c))


# ---------------------------------------------------------------------------
# metrics and statistics

def apply_metric(
    meas: Measurement,
    metric: str,
    machine: MachineSpec | None = None,
    dtype: str = "double",
) -> float | None:
    """One metric value from one measurement; None marks an undefined value."""
    machine = machine or MachineSpec()
    if metric == "cycles":
        return float(meas.cycles)
    if metric == "time":
        return meas.cycles / machine.frequency_hz
    if metric == "gflops":
        if meas.cycles == 0:
            return None
        return meas.flops / (meas.cycles / machine.frequency_hz) / 1e9
    if metric == "flops-per-cycle":
        if meas.cycles == 0:
            return None
        return meas.flops / meas.cycles
    if metric == "efficiency":
        if meas.cycles == 0:
            return None
        return meas.flops / meas.cycles / machine.peak(dtype)
    if metric.startswith("counter"):
        k = int(metric[len("counter"):])
        if k >= len(meas.counters):
            raise ReportError(f"metric {metric}: only {len(meas.counters)} counters")
        return float(meas.counters[k])
    raise ReportError(f"unknown metric {metric!r}")


def apply_statistic(
    values: Sequence[float], stat: str, discard_first: bool = False
) -> float:
    """Combine repetition values; ``discard_first`` drops index 0 only."""
    vals = list(values[1:]) if discard_first else list(values)
    vals = [v for v in vals if v is not None]
    if not vals:
        raise ReportError("no values left after discarding the first repetition")
    if stat == "min":
        return min(vals)
    if stat == "max":
        return max(vals)
    if stat == "mean":
        return math.fsum(vals) / len(vals)
    if stat == "median":
        return pystats.median(vals)
    if stat == "std":
        mean = math.fsum(vals) / len(vals)
        return math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / len(vals))
    raise ReportError(f"unknown statistic {stat!r}")


def series(
    report: Report,
    metric: str,
    stat: str,
    discard_first: bool = True,
    machine: MachineSpec | None = None,
    breakdown: bool = False,
) -> dict[str, list[tuple]]:
    """Per-range-value statistic of the reduced metric.

    Returns named series: ``{"total": [(range value, value), ...]}``, plus
    one series per call when ``breakdown`` is set.  Undefined values
    (zero-cycle measurements, all-failed repetitions) appear as None gaps.
    """
    exp = report.experiment
    out: dict[str, list[tuple]] = {}
    reduced, failed = report.reduce()
    out["total"] = _one_series(exp, reduced, failed, metric, stat, discard_first,
                               machine, report.dtype, call_index=None)
    if breakdown:
        per_call, call_failed = report.reduce_per_call()
        for ci, call in enumerate(exp.calls):
            key = f"call{ci}:{call.kernel}"
            out[key] = _one_series(exp, per_call, call_failed, metric, stat,
                                   discard_first, machine, report.dtype,
                                   call_index=ci)
    return out


def _one_series(exp, reduced, failed, metric, stat, discard_first, machine,
                dtype, call_index):
    points = []
    for v in exp.range_values():
        vals = []
        for r in range(exp.nreps):
            key = (v, r) if call_index is None else (v, r, call_index)
            if key in failed:
                vals.append(None)
            else:
                vals.append(apply_metric(reduced[key], metric, machine, dtype))
        try:
            points.append((v, apply_statistic(vals, stat, discard_first)))
        except ReportError:
            points.append((v, None))
    return points


def stats_table(
    report: Report,
    metrics: Sequence[str],
    stats: Sequence[str],
    discard_first: bool = True,
    machine: MachineSpec | None = None,
) -> str:
    """Comma-separated export: range-value, metric, statistic, value."""
    rows = ["range-value,metric,statistic,value"]
    for metric in metrics:
        for stat in stats:
            for v, val in series(report, metric, stat, discard_first, machine)["total"]:
                vtext = "" if v is None else str(v)
                sval = "" if val is None else repr(val)
                rows.append(f"{vtext},{metric},{stat},{sval}")
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# report file parsing

def write_report(
    experiment: Experiment,
    segments: Sequence[tuple[int, Sequence[ResultLine]]],
    metadata: dict[str, str],
) -> str:
    """Render a report file: experiment text, separator, metadata, segments."""
    parts = [experiment.serialize(), REPORT_SEPARATOR + "\n"]
    for key, value in metadata.items():
        parts.append(f"{key}: {value}\n")
    for nthreads, lines in segments:
        parts.append(f"segment: nthreads={nthreads}\n")
        for line in lines:
            parts.append(line.format() + "\n")
    return "".join(parts)


def parse_report(text: str) -> Report:
    """Parse a report file into the access hierarchy.

    The line count of every segment must match the experiment's iteration
    space; flop counts are attached from the signatures at parse time.
    """
    if "\n" + REPORT_SEPARATOR + "\n" not in "\n" + text:
        raise ReportError(f"missing {REPORT_SEPARATOR!r} separator")
    exp_text, _, rest = text.partition("\n" + REPORT_SEPARATOR + "\n")
    if text.startswith(REPORT_SEPARATOR + "\n"):
        exp_text, rest = "", text[len(REPORT_SEPARATOR) + 1:]
    exp = Experiment.deserialize(exp_text)

    metadata: dict[str, str] = {}
    segments: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(rest.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("segment:"):
            spec = line[len("segment:"):].strip()
            if not spec.startswith("nthreads="):
                raise ReportError(f"malformed segment line {line!r}")
            segments.append((int(spec[len("nthreads="):]), []))
        elif segments:
            segments[-1][1].append(line)
        else:
            key, sep, value = line.partition(":")
            if not sep:
                raise ReportError(f"malformed metadata line {line!r}")
            metadata[key.strip()] = value.strip()

    if isinstance(exp.nthreads, str):
        groups = [(v, [v]) for v in exp.range_values()]
    else:
        groups = [(exp.nthreads, exp.range_values())]
    if len(segments) != len(groups):
        raise ReportError(
            f"expected {len(groups)} segments, found {len(segments)}"
        )

    setup = int(metadata.get("setup-lines", "0"))
    ncounters = len(exp.counters)
    raw_map: dict[Coord, Measurement] = {}
    failures: set[Coord] = set()
    flops_cache: dict[tuple, int] = {}

    for (nthreads, range_values), (seg_nt, seg_lines) in zip(groups, segments):
        if seg_nt != nthreads:
            raise ReportError(
                f"segment thread count {seg_nt} does not match expected {nthreads}"
            )
        expected = setup + exp.expected_result_lines(range_values)
        if len(seg_lines) != expected:
            raise ReportError(
                f"segment nthreads={seg_nt}: expected {expected} result lines, "
                f"found {len(seg_lines)}"
            )
        lines = [ResultLine.parse(l) for l in seg_lines[setup:]]
        it = iter(lines)
        for v in range_values:
            for r in range(exp.nreps):
                if exp.parrange is not None:
                    line = next(it)
                    flops = sum(
                        _call_flops(exp, ci, v, iv, flops_cache)
                        for iv in exp.inner_values()
                        for ci in range(len(exp.calls))
                    )
                    coord = (v, r, None, None)
                    raw_map[coord] = _to_measurement(line, ncounters, flops)
                    if line.failed:
                        failures.add(coord)
                else:
                    for iv in exp.inner_values():
                        for ci in range(len(exp.calls)):
                            line = next(it)
                            coord = (v, r, iv, ci)
                            flops = _call_flops(exp, ci, v, iv, flops_cache)
                            raw_map[coord] = _to_measurement(line, ncounters, flops)
                            if line.failed:
                                failures.add(coord)
    return Report(exp, raw_map, failures, metadata)


def _to_measurement(line: ResultLine, ncounters: int, flops: int) -> Measurement:
    counters = list(line.counters)
    if len(counters) < ncounters:
        counters += [0] * (ncounters - len(counters))
    return Measurement(line.cycles, counters[:ncounters], flops)


def _call_flops(exp: Experiment, ci: int, v, iv, cache: dict) -> int:
    key = (ci, v, iv)
    if key in cache:
        return cache[key]
    call = exp.calls[ci]
    sig = lookup_signature(call.kernel)
    bindings = exp.bindings_at(v, iv)
    scalars: dict[str, object] = {}
    for spec, tok in zip(sig.args, call.args):
        if isinstance(spec, FlagArg):
            scalars[spec.name] = tok
        elif isinstance(spec, (DimArg, LdArg)):
            scalars[spec.name] = evaluate(tok, bindings)
    flops = flop_count(sig, scalars)
    cache[key] = flops
    return flops


def load_report(path: str) -> Report:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_report(fh.read())
