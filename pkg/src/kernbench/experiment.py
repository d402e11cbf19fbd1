"""Declarative experiment model: validation, memory planning, unrolling.

An :class:`Experiment` describes symbolic kernel calls over an optional
parameter range, repetitions, and an optional inner (sum or parallel)
range, plus vary-specs that give repetitions/iterations their own disjoint
operand instances.  ``unroll`` turns it into fully concrete sampler
command streams, one per thread-count value.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence, Union

from .errors import ExperimentError
from .expressions import ExpressionError, evaluate, free_variables, parse_expression
from .kernels import REGISTRY, flop_count, lookup_signature
from .signatures import (
    DataArg,
    DimArg,
    FlagArg,
    LdArg,
    PathArg,
    ScalarArg,
    Signature,
    derive_shapes,
    resolve_rule,
)

FILE_HEADER = "#KERNBENCH EXPERIMENT v1"
ALLOC_CAP_ELEMS = 2**30  # per operand


@dataclass(frozen=True)
class RangeSpec:
    var: str
    start: int
    step: int
    stop: int

    def __post_init__(self):
        if self.step <= 0:
            raise ExperimentError(f"range {self.var}: step must be positive")
        if self.stop < self.start:
            raise ExperimentError(f"range {self.var}: stop below start")

    def values(self) -> list[int]:
        return list(range(self.start, self.stop + 1, self.step))

    def format(self) -> str:
        return f"{self.var} {self.start}:{self.step}:{self.stop}"

    @classmethod
    def parse(cls, text: str) -> "RangeSpec":
        try:
            var, spec = text.split()
            start, step, stop = spec.split(":")
            return cls(var, int(start), int(step), int(stop))
        except ValueError:
            raise ExperimentError(
                f"malformed range {text!r}, expected '<var> <start>:<step>:<stop>'"
            ) from None


@dataclass(frozen=True)
class VarySpec:
    operand: str
    with_: frozenset[str]  # subset of {"rep", <inner-range variable>}
    along: int = 1  # 0 = vertical stacking, 1 = horizontal
    pad: str = "0"  # expression, elements

    def format(self) -> str:
        with_part = ",".join(sorted(self.with_))
        return f"{self.operand} with {with_part} along {self.along} pad {self.pad}"

    @classmethod
    def parse(cls, text: str) -> "VarySpec":
        tokens = text.split()
        if (
            len(tokens) != 7
            or tokens[1] != "with"
            or tokens[3] != "along"
            or tokens[5] != "pad"
        ):
            raise ExperimentError(
                f"malformed vary {text!r}, expected "
                "'<operand> with <dims> along <0|1> pad <expr>'"
            )
        return cls(
            operand=tokens[0],
            with_=frozenset(tokens[2].split(",")),
            along=int(tokens[4]),
            pad=tokens[6],
        )


@dataclass(frozen=True)
class SymbolicCall:
    kernel: str
    args: tuple[str, ...]  # raw tokens in signature order

    def format(self) -> str:
        return " ".join((self.kernel,) + self.args)


@dataclass
class Experiment:
    calls: list[SymbolicCall] = field(default_factory=list)
    backend: str = "local"
    machine: str = "default"
    nthreads: Union[int, str] = 1
    range: RangeSpec | None = None
    nreps: int = 1
    sumrange: RangeSpec | None = None
    parrange: RangeSpec | None = None
    counters: tuple[str, ...] = ()
    params: dict[str, int] = field(default_factory=dict)
    vary: dict[str, VarySpec] = field(default_factory=dict)
    seed: int = 0

    # -- iteration space helpers

    @property
    def inner(self) -> RangeSpec | None:
        return self.sumrange or self.parrange

    def range_values(self) -> list:
        return self.range.values() if self.range else [None]

    def inner_values(self) -> list:
        return self.inner.values() if self.inner else [None]

    def nthreads_values(self) -> list[int]:
        if isinstance(self.nthreads, str):
            if self.range is None or self.range.var != self.nthreads:
                raise ExperimentError(
                    "symbolic nthreads requires a range over the same variable"
                )
            return self.range.values()
        return [self.nthreads]

    def bindings_at(self, range_value=None, inner_value=None) -> dict[str, int]:
        b = dict(self.params)
        if self.range is not None and range_value is not None:
            b[self.range.var] = range_value
        if self.inner is not None and inner_value is not None:
            b[self.inner.var] = inner_value
        return b

    def allowed_variables(self) -> set[str]:
        names = set(self.params)
        if self.range is not None:
            names.add(self.range.var)
        if self.inner is not None:
            names.add(self.inner.var)
        return names

    def dtype(self) -> str:
        dtypes = {lookup_signature(c.kernel).dtype for c in self.calls}
        return "single" if dtypes == {"single"} else "double"

    def result_lines_per_rep(self) -> int:
        if self.parrange is not None:
            return 1
        return len(self.inner_values()) * len(self.calls)

    def expected_result_lines(self, range_values=None) -> int:
        values = self.range_values() if range_values is None else range_values
        return len(values) * self.nreps * self.result_lines_per_rep()

    def call_lines_total(self) -> int:
        return (
            len(self.range_values())
            * self.nreps
            * len(self.inner_values())
            * len(self.calls)
        )

    # -- serialization

    def serialize(self) -> str:
        lines = [FILE_HEADER]
        lines.append(f"backend: {self.backend}")
        lines.append(f"machine: {self.machine}")
        lines.append(f"nthreads: {self.nthreads}")
        if self.range is not None:
            lines.append(f"range: {self.range.format()}")
        lines.append(f"nreps: {self.nreps}")
        if self.sumrange is not None:
            lines.append(f"sumrange: {self.sumrange.format()}")
        if self.parrange is not None:
            lines.append(f"parrange: {self.parrange.format()}")
        if self.counters:
            lines.append(f"counters: {' '.join(self.counters)}")
        for name in sorted(self.params):
            lines.append(f"param: {name} {self.params[name]}")
        lines.append(f"seed: {self.seed}")
        for call in self.calls:
            lines.append(f"call: {call.format()}")
        for operand in sorted(self.vary):
            lines.append(f"vary: {self.vary[operand].format()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "Experiment":
        lines = text.splitlines()
        if not lines or lines[0].strip() != FILE_HEADER:
            raise ExperimentError(f"missing header {FILE_HEADER!r}")
        exp = cls()
        for lineno, raw in enumerate(lines[1:], start=2):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise ExperimentError(f"line {lineno}: expected '<field>: <value>'")
            key = key.strip()
            value = value.strip()
            try:
                if key == "backend":
                    exp.backend = value
                elif key == "machine":
                    exp.machine = value
                elif key == "nthreads":
                    exp.nthreads = int(value) if value.isdigit() else value
                elif key == "range":
                    exp.range = RangeSpec.parse(value)
                elif key == "nreps":
                    exp.nreps = int(value)
                elif key == "sumrange":
                    exp.sumrange = RangeSpec.parse(value)
                elif key == "parrange":
                    exp.parrange = RangeSpec.parse(value)
                elif key == "counters":
                    exp.counters = tuple(value.split())
                elif key == "param":
                    name, val = value.split()
                    exp.params[name] = int(val)
                elif key == "seed":
                    exp.seed = int(value)
                elif key == "call":
                    tokens = value.split()
                    if not tokens:
                        raise ExperimentError("empty call")
                    exp.calls.append(SymbolicCall(tokens[0], tuple(tokens[1:])))
                elif key == "vary":
                    spec = VarySpec.parse(value)
                    exp.vary[spec.operand] = spec
                else:
                    raise ExperimentError(f"unknown field {key!r}")
            except (ValueError, ExperimentError) as exc:
                raise ExperimentError(f"line {lineno}: {exc}") from None
        return exp


def load_experiment(path: str) -> Experiment:
    with open(path, "r", encoding="utf-8") as fh:
        return Experiment.deserialize(fh.read())


# ---------------------------------------------------------------------------
# argument classification

def _scalar_is_literal(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def eval_scalar_token(token: str, bindings: Mapping[str, int]) -> float:
    if _scalar_is_literal(token):
        return float(token)
    return float(evaluate(token, bindings))


def _check_points(exp: Experiment) -> list[tuple]:
    """(range value, inner value) pairs at which consistency is verified."""
    rvals = exp.range_values()
    ivals = exp.inner_values()
    if len(rvals) * len(ivals) <= 1024:
        return [(v, iv) for v in rvals for iv in ivals]
    rpick = sorted({rvals[0], rvals[-1]})
    ipick = sorted({ivals[0], ivals[-1]}, key=lambda x: (x is not None, x))
    return [(v, iv) for v in rpick for iv in ipick]


# ---------------------------------------------------------------------------
# validation

def validate(exp: Experiment) -> list[str]:
    """All experiment-level diagnostics; an empty list means valid."""
    diags: list[str] = []

    if exp.nreps < 1:
        diags.append("nreps must be at least 1")
    if exp.sumrange is not None and exp.parrange is not None:
        diags.append("one inner range: sumrange and parrange cannot both be set")
    if not exp.calls:
        diags.append("experiment has no calls")

    if isinstance(exp.nthreads, str):
        if exp.range is None or exp.range.var != exp.nthreads:
            diags.append(
                f"nthreads variable {exp.nthreads!r} requires a range over that variable"
            )
        elif exp.range.start < 1:
            diags.append("thread-count range values must be at least 1")
    elif exp.nthreads < 1:
        diags.append("nthreads must be at least 1")

    allowed = exp.allowed_variables()
    sigs: list[Signature | None] = []
    for ci, call in enumerate(exp.calls):
        label = f"call {ci} ({call.kernel})"
        try:
            sig = lookup_signature(call.kernel)
        except Exception as exc:
            diags.append(f"{label}: {exc}")
            sigs.append(None)
            continue
        sigs.append(sig)
        if len(call.args) != len(sig.args):
            diags.append(
                f"{label}: expected {len(sig.args)} arguments, got {len(call.args)}"
            )
            sigs[-1] = None
            continue
        for spec, tok in zip(sig.args, call.args):
            if isinstance(spec, FlagArg):
                if not (len(tok) == 1 and tok in spec.allowed):
                    diags.append(
                        f"{label}: flag {spec.name} must be one of "
                        f"{list(spec.allowed)}, got {tok!r}"
                    )
            elif isinstance(spec, (DimArg, LdArg)):
                try:
                    expr = parse_expression(tok)
                except ExpressionError as exc:
                    diags.append(f"{label}: argument {spec.name}: {exc}")
                    continue
                extra = free_variables(expr) - allowed
                if extra:
                    diags.append(
                        f"{label}: argument {spec.name} uses unknown "
                        f"variables {sorted(extra)}"
                    )
            elif isinstance(spec, ScalarArg) and not _scalar_is_literal(tok):
                try:
                    expr = parse_expression(tok)
                except ExpressionError as exc:
                    diags.append(f"{label}: scalar {spec.name}: {exc}")
                    continue
                extra = free_variables(expr) - allowed
                if extra:
                    diags.append(
                        f"{label}: scalar {spec.name} uses unknown "
                        f"variables {sorted(extra)}"
                    )

    operand_calls = _operand_usages(exp, sigs)
    inner_var = exp.inner.var if exp.inner else None
    for name, vspec in exp.vary.items():
        if name not in operand_calls:
            diags.append(f"vary: operand {name!r} does not appear in any call")
        if vspec.along not in (0, 1):
            diags.append(f"vary {name}: along must be 0 or 1")
        legal_with = {"rep"} | ({inner_var} if inner_var else set())
        bad = vspec.with_ - legal_with
        if bad:
            diags.append(f"vary {name}: unknown vary dimensions {sorted(bad)}")
        try:
            expr = parse_expression(vspec.pad)
            extra = free_variables(expr) - allowed
            if extra:
                diags.append(f"vary {name}: pad uses unknown variables {sorted(extra)}")
        except ExpressionError as exc:
            diags.append(f"vary {name}: pad: {exc}")

    for name, usages in operand_calls.items():
        dtypes = {sigs[ci].dtype for ci, _spec in usages if sigs[ci]}
        if len(dtypes) > 1:
            diags.append(f"operand {name!r} is used with conflicting data types")

    if diags:
        return diags

    # point-wise shape / ld / expression consistency
    for v, iv in _check_points(exp):
        bindings = exp.bindings_at(v, iv)
        where = _point_label(exp, v, iv)
        for ci, (call, sig) in enumerate(zip(exp.calls, sigs)):
            label = f"call {ci} ({call.kernel}){where}"
            scalars: dict[str, object] = {}
            bad = False
            for spec, tok in zip(sig.args, call.args):
                if isinstance(spec, FlagArg):
                    scalars[spec.name] = tok
                elif isinstance(spec, (DimArg, LdArg)):
                    try:
                        val = evaluate(tok, bindings)
                    except ExpressionError as exc:
                        diags.append(f"{label}: argument {spec.name}: {exc}")
                        bad = True
                        continue
                    if isinstance(spec, DimArg) and val < 0:
                        diags.append(f"{label}: dim {spec.name} is negative ({val})")
                        bad = True
                    scalars[spec.name] = val
                elif isinstance(spec, ScalarArg) and not _scalar_is_literal(tok):
                    try:
                        evaluate(tok, bindings)
                    except ExpressionError as exc:
                        diags.append(f"{label}: scalar {spec.name}: {exc}")
            if bad:
                continue
            try:
                shapes = derive_shapes(sig, scalars)
            except Exception as exc:
                diags.append(f"{label}: {exc}")
                continue
            for spec in sig.data_args:
                if spec.ld is None or spec.name in exp.vary:
                    continue  # vary overrides the leading dimension
                shape = shapes[spec.name]
                if shape.rows == 0 or shape.cols == 0:
                    continue  # zero-extent operand, ld is irrelevant
                ld = scalars[spec.ld]
                if ld < shape.min_ld:
                    diags.append(
                        f"{label}: argument {spec.ld} = {ld} is below the row "
                        f"count {shape.rows} of operand {spec.name}"
                    )
    if diags:
        return diags

    for v in _plan_check_values(exp):
        try:
            plan_memory(exp, v)
        except Exception as exc:
            diags.append(f"memory plan at {_point_label(exp, v, None) or 'base'}: {exc}")
    return diags


def _point_label(exp: Experiment, v, iv) -> str:
    parts = []
    if exp.range is not None and v is not None:
        parts.append(f"{exp.range.var}={v}")
    if exp.inner is not None and iv is not None:
        parts.append(f"{exp.inner.var}={iv}")
    return f" at {', '.join(parts)}" if parts else ""


def _plan_check_values(exp: Experiment) -> list:
    rvals = exp.range_values()
    if len(rvals) <= 1024:
        return rvals
    return sorted({rvals[0], rvals[-1]})


def _operand_usages(
    exp: Experiment, sigs: Sequence[Signature | None]
) -> dict[str, list[tuple[int, DataArg]]]:
    """operand name -> [(call index, DataArg spec)] in first-use order."""
    usages: dict[str, list[tuple[int, DataArg]]] = {}
    for ci, (call, sig) in enumerate(zip(exp.calls, sigs)):
        if sig is None or len(call.args) != len(sig.args):
            continue
        for spec, tok in zip(sig.args, call.args):
            if isinstance(spec, DataArg):
                usages.setdefault(tok, []).append((ci, spec))
    return usages


# ---------------------------------------------------------------------------
# memory planning

@dataclass(frozen=True)
class OperandPlan:
    name: str
    dtype: str
    total: int  # allocated elements
    count: int = 1  # vary-instance count (1 = not varying)
    stride: int = 0  # element offset between instances
    ld_override: int | None = None  # leading dimension forced by the plan
    rows: int = 0  # per-instance window (maxima over the iteration space)
    cols: int = 0
    pad: int = 0
    along: int = 1
    with_dims: tuple[str, ...] = ()  # subset of ("rep", inner var), rep first

    def instance_offset(self, index: int) -> int:
        return index * self.stride


@dataclass(frozen=True)
class MemoryPlan:
    operands: dict[str, OperandPlan]
    order: tuple[str, ...]  # allocation order (first use)


def plan_memory(exp: Experiment, range_value=None) -> MemoryPlan:
    """Single-block allocation plan for every operand at one range value.

    Varying operands become one block subdivided into ``count`` pairwise
    disjoint instances: horizontal stacking (along=1) keeps the natural
    leading dimension and places instances at ``i * (rows*cols + pad)``;
    vertical stacking (along=0) interleaves instances row-wise with
    ``ld = count * (rows + pad)`` and instance ``i`` at row offset
    ``i * (rows + pad)``.
    """
    sigs = [lookup_signature(c.kernel) for c in exp.calls]
    usages = _operand_usages(exp, sigs)
    inner_var = exp.inner.var if exp.inner else None
    ivals = exp.inner_values()

    plans: dict[str, OperandPlan] = {}
    for name, uses in usages.items():
        dtypes = {sigs[ci].dtype for ci, _ in uses}
        dtype = dtypes.pop() if len(dtypes) == 1 else "double"
        vspec = exp.vary.get(name)

        rows_max = cols_max = extent_max = 0
        for iv in ivals:
            bindings = exp.bindings_at(range_value, iv)
            for ci, spec in uses:
                call, sig = exp.calls[ci], sigs[ci]
                scalars: dict[str, object] = {}
                for aspec, tok in zip(sig.args, call.args):
                    if isinstance(aspec, FlagArg):
                        scalars[aspec.name] = tok
                    elif isinstance(aspec, (DimArg, LdArg)):
                        scalars[aspec.name] = evaluate(tok, bindings)
                shape = derive_shapes(sig, scalars)[spec.name]
                rows_max = max(rows_max, shape.rows)
                cols_max = max(cols_max, shape.cols)
                ld = scalars[spec.ld] if spec.ld else shape.min_ld
                extent_max = max(extent_max, shape.min_elements,
                                 ld * (shape.cols - 1) + shape.rows
                                 if shape.rows and shape.cols else 0)

        if vspec is None:
            plan = OperandPlan(name, dtype, total=max(extent_max, 1),
                               rows=rows_max, cols=cols_max)
        else:
            count = 1
            with_dims = []
            if "rep" in vspec.with_:
                count *= exp.nreps
                with_dims.append("rep")
            if inner_var and inner_var in vspec.with_:
                count *= len(ivals)
                with_dims.append(inner_var)
            pad = evaluate(vspec.pad, exp.bindings_at(range_value))
            if pad < 0:
                raise ExperimentError(f"vary {name}: negative pad {pad}")
            rows_i = max(rows_max, 1)
            cols_i = max(cols_max, 1)
            if vspec.along == 1:
                stride = rows_i * cols_i + pad
                plan = OperandPlan(
                    name, dtype, total=count * stride, count=count, stride=stride,
                    ld_override=rows_i, rows=rows_i, cols=cols_i, pad=pad,
                    along=1, with_dims=tuple(with_dims),
                )
            else:
                ld = count * (rows_i + pad)
                plan = OperandPlan(
                    name, dtype, total=ld * cols_i, count=count,
                    stride=rows_i + pad, ld_override=ld, rows=rows_i, cols=cols_i,
                    pad=pad, along=0, with_dims=tuple(with_dims),
                )
        if plan.total > ALLOC_CAP_ELEMS:
            raise ExperimentError(
                f"operand {name!r} needs {plan.total} elements, "
                f"above the allocation cap {ALLOC_CAP_ELEMS}"
            )
        plans[name] = plan
    return MemoryPlan(plans, tuple(plans))


# ---------------------------------------------------------------------------
# unrolling

@dataclass
class UnrolledStream:
    nthreads: int
    commands: list[str]
    setup_lines: int = 0  # result lines produced by data-setup calls
    range_values: tuple = ()


def _vary_index(plan: OperandPlan, rep: int, inner_index: int, n_inner: int) -> int:
    # rep is the outer dimension, the inner-range variable the inner one
    if "rep" in plan.with_dims and len(plan.with_dims) == 2:
        return rep * n_inner + inner_index
    if plan.with_dims == ("rep",):
        return rep
    if len(plan.with_dims) == 1:
        return inner_index
    return 0


def unroll(exp: Experiment) -> list[UnrolledStream]:
    """Fully concrete sampler streams, one per thread-count value."""
    sigs = [lookup_signature(c.kernel) for c in exp.calls]
    if isinstance(exp.nthreads, str):
        groups = [(v, [v]) for v in exp.range_values()]
    else:
        groups = [(exp.nthreads, exp.range_values())]

    streams = []
    for nthreads, range_values in groups:
        plans = {v: plan_memory(exp, v) for v in range_values}
        first = plans[range_values[0]]
        commands: list[str] = []
        setup_lines = 0
        if exp.counters:
            commands.append("set_counters " + " ".join(exp.counters))

        alloc_sizes = {
            name: max(plans[v].operands[name].total for v in range_values)
            for name in first.order
        }
        prefix = {"double": "d", "single": "s"}
        for name in first.order:
            plan = first.operands[name]
            commands.append(f"{prefix[plan.dtype]}malloc {name} {alloc_sizes[name]}")

        # symmetric-pd operands get an explicit positive definite fill;
        # the resulting result lines are counted as setup
        spd = _spd_operands(exp, sigs)
        if spd:
            plan0 = plans[range_values[0]]
            for name in spd:
                op = plan0.operands[name]
                n = op.rows
                ld = op.ld_override or n
                for i in range(op.count):
                    off = op.instance_offset(i)
                    tok = f"{name}+{off}" if off else name
                    commands.append(f"dporand {n} {tok} {ld}")
                    setup_lines += 1
            commands.append("go")

        ivals = exp.inner_values()
        n_inner = len(ivals)
        for v in range_values:
            plan = plans[v]
            for rep in range(exp.nreps):
                if exp.parrange is not None:
                    commands.append("{omp")
                for ii, iv in enumerate(ivals):
                    bindings = exp.bindings_at(v, iv)
                    for call, sig in zip(exp.calls, sigs):
                        commands.append(
                            _emit_call(call, sig, bindings, plan, rep, ii, n_inner)
                        )
                if exp.parrange is not None:
                    commands.append("}")
            commands.append("go")
        streams.append(
            UnrolledStream(nthreads, commands, setup_lines, tuple(range_values))
        )
    return streams


def _spd_operands(exp: Experiment, sigs: Sequence[Signature]) -> list[str]:
    names = []
    for call, sig in zip(exp.calls, sigs):
        for spec, tok in zip(sig.args, call.args):
            if isinstance(spec, DataArg) and tok not in names:
                flags = {
                    a.name: t for a, t in zip(sig.args, call.args)
                    if isinstance(a, FlagArg)
                }
                if resolve_rule(spec.structure, flags) == "symmetric-pd":
                    names.append(tok)
    return names


def _emit_call(
    call: SymbolicCall,
    sig: Signature,
    bindings: Mapping[str, int],
    plan: MemoryPlan,
    rep: int,
    inner_index: int,
    n_inner: int,
) -> str:
    tokens = [call.kernel]
    for spec, tok in zip(sig.args, call.args):
        if isinstance(spec, FlagArg) or isinstance(spec, PathArg):
            tokens.append(tok)
        elif isinstance(spec, DimArg):
            tokens.append(str(evaluate(tok, bindings)))
        elif isinstance(spec, LdArg):
            op = plan.operands.get(_data_token(call, sig, spec.of))
            if op is not None and op.ld_override is not None:
                tokens.append(str(op.ld_override))
            else:
                tokens.append(str(evaluate(tok, bindings)))
        elif isinstance(spec, ScalarArg):
            tokens.append(
                tok if _scalar_is_literal(tok) else str(evaluate(tok, bindings))
            )
        else:  # DataArg
            op = plan.operands[tok]
            if op.count > 1 or op.ld_override is not None:
                idx = _vary_index(op, rep, inner_index, n_inner)
                off = op.instance_offset(idx)
                tokens.append(f"{tok}+{off}" if off else tok)
            else:
                tokens.append(tok)
    return " ".join(tokens)


def _data_token(call: SymbolicCall, sig: Signature, data_arg_name: str) -> str:
    for spec, tok in zip(sig.args, call.args):
        if isinstance(spec, DataArg) and spec.name == data_arg_name:
            return tok
    return ""
