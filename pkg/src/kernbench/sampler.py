"""Low-level command-stream sampler.

Reads commands (one per line), buffers kernel calls, and on ``go`` executes
and times them, printing one result line per sequential call and one per
parallel block.  Runs stand-alone via ``python -m kernbench.sampler``;
stream text goes in on stdin, result lines come out on stdout.

Environment:
  KERNBENCH_NTHREADS   worker-pool size for parallel blocks / threaded gemm
  KERNBENCH_SEED       RNG seed for allocation fills and random kernels
  KERNBENCH_FREQ_HZ    cycle-clock frequency for the timer fallback
"""

from __future__ import annotations

import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ArgumentError,
    CapacityError,
    KernbenchError,
    NumericalFailure,
    StreamError,
)
from .kernels import (
    DTYPES,
    ExecContext,
    KernelCallConcrete,
    execute_kernel,
    lookup_signature,
)
from .signatures import DataArg, DimArg, FlagArg, LdArg, PathArg, ScalarArg, derive_shapes

DEFAULT_FREQ_HZ = 1_000_000_000.0
DEFAULT_ARENA_CAP = 2**31  # elements per dtype, per call


# ---------------------------------------------------------------------------
# commands

@dataclass(frozen=True)
class Malloc:
    dtype: str
    name: str
    nelems: int


@dataclass(frozen=True)
class Offset:
    dtype: str
    src: str
    offset: int
    new: str


@dataclass(frozen=True)
class Free:
    name: str


@dataclass(frozen=True)
class Call:
    kernel: str
    tokens: tuple[str, ...]
    lineno: int = 0


@dataclass(frozen=True)
class ParBegin:
    pass


@dataclass(frozen=True)
class ParEnd:
    pass


@dataclass(frozen=True)
class SetCounters:
    names: tuple[str, ...]


@dataclass(frozen=True)
class Go:
    pass


Command = object

_MALLOC = {"dmalloc": "double", "smalloc": "single"}
_OFFSET = {"doffset": "double", "soffset": "single"}


def parse_command(line: str, lineno: int = 0) -> Command | None:
    """Parse one stream line; returns None for blanks and ``#`` comments."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    tokens = stripped.split()
    head = tokens[0]
    try:
        if head in _MALLOC:
            if len(tokens) != 3:
                raise ValueError("expected: <dtype>malloc <name> <nelems>")
            return Malloc(_MALLOC[head], tokens[1], int(tokens[2]))
        if head in _OFFSET:
            if len(tokens) != 4:
                raise ValueError("expected: <dtype>offset <src> <offset> <new>")
            return Offset(_OFFSET[head], tokens[1], int(tokens[2]), tokens[3])
        if head == "free":
            if len(tokens) != 2:
                raise ValueError("expected: free <name>")
            return Free(tokens[1])
        if head == "{omp":
            if len(tokens) != 1:
                raise ValueError("'{omp' takes no arguments")
            return ParBegin()
        if head == "}":
            if len(tokens) != 1:
                raise ValueError("'}' takes no arguments")
            return ParEnd()
        if head == "set_counters":
            return SetCounters(tuple(tokens[1:]))
        if head == "go":
            if len(tokens) != 1:
                raise ValueError("'go' takes no arguments")
            return Go()
        return Call(head, tuple(tokens[1:]), lineno)
    except ValueError as exc:
        raise StreamError(f"line {lineno}: malformed command: {exc}") from None


def parse_stream(text: str) -> list[Command]:
    commands = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        cmd = parse_command(line, lineno)
        if cmd is not None:
            commands.append(cmd)
    return commands


# ---------------------------------------------------------------------------
# timing and counters

class CycleTimer:
    """Monotonic cycle counter.

    Backed by the monotonic nanosecond clock scaled by the configured
    frequency; the backend name is recorded in report metadata.  A true
    hardware cycle-counter backend can be substituted via the same
    interface.
    """

    backend = "clock-fallback"

    def __init__(self, frequency_hz: float = DEFAULT_FREQ_HZ):
        if frequency_hz <= 0:
            raise ValueError("frequency must be positive")
        self.frequency_hz = float(frequency_hz)

    def read(self) -> int:
        return int(time.perf_counter_ns() * self.frequency_hz / 1e9)

    def describe(self) -> str:
        return f"{self.backend} frequency_hz={self.frequency_hz:g}"


def read_cycles(frequency_hz: float = DEFAULT_FREQ_HZ) -> int:
    """Monotonically nondecreasing cycle count (module-level convenience)."""
    return int(time.perf_counter_ns() * frequency_hz / 1e9)


class CounterProvider:
    """Pluggable hardware-counter backend."""

    available = False

    def configure(self, names: Sequence[str]) -> None:
        self.names = tuple(names)

    def read(self) -> list[int]:
        raise NotImplementedError


class NullCounterProvider(CounterProvider):
    """Portable no-op provider: reports zeros and flags itself unavailable."""

    available = False

    def __init__(self):
        self.names: tuple[str, ...] = ()

    def read(self) -> list[int]:
        return [0] * len(self.names)


# ---------------------------------------------------------------------------
# memory

class DynamicArena:
    """Bump allocator for unnamed buffers; reset between calls.

    Buffers handed out within one call are pairwise disjoint.  On growth a
    fresh backing array is used, so earlier views of the same call stay
    valid and disjoint.
    """

    def __init__(self, dtype: np.dtype, cap_elems: int = DEFAULT_ARENA_CAP):
        self.dtype = np.dtype(dtype)
        self.cap = cap_elems
        self.buf = np.empty(0, dtype=self.dtype)
        self.offset = 0
        self.call_total = 0

    def reset(self) -> None:
        self.offset = 0
        self.call_total = 0

    def draw(self, n: int) -> np.ndarray:
        if self.call_total + n > self.cap:
            raise CapacityError(
                f"dynamic arena exhausted: {self.call_total + n} > cap {self.cap}"
            )
        if self.offset + n > self.buf.size:
            self.buf = np.empty(max(n, 2 * self.buf.size, 1 << 16), dtype=self.dtype)
            self.offset = 0
        view = self.buf[self.offset : self.offset + n]
        self.offset += n
        self.call_total += n
        return view


class MemoryManager:
    """Named regions plus per-dtype dynamic arenas."""

    def __init__(self, ctx: ExecContext, arena_cap: int = DEFAULT_ARENA_CAP):
        self.ctx = ctx
        self.named: dict[str, np.ndarray] = {}
        self.arenas = {dt: DynamicArena(np_dt, arena_cap) for dt, np_dt in DTYPES.items()}

    def malloc(self, dtype: str, name: str, nelems: int) -> None:
        if name in self.named:
            raise StreamError(f"variable {name!r} already allocated")
        region = np.empty(nelems, dtype=DTYPES[dtype])
        # fill with uniform (0,1) so uninitialized operands are numerically benign
        ints = self.ctx.rng.integers(1, 1 << 53, size=nelems)
        region[:] = ints / float(1 << 53)
        self.named[name] = region

    def offset(self, dtype: str, src: str, offset: int, new: str) -> None:
        if src not in self.named:
            raise StreamError(f"unknown variable {src!r} in offset")
        base = self.named[src]
        if base.dtype != DTYPES[dtype]:
            raise StreamError(f"offset dtype mismatch for {src!r}")
        if not 0 <= offset <= base.size:
            raise StreamError(f"offset {offset} outside variable {src!r} (size {base.size})")
        if new in self.named:
            raise StreamError(f"variable {new!r} already allocated")
        self.named[new] = base[offset:]

    def free(self, name: str) -> None:
        if name not in self.named:
            raise StreamError(f"unknown variable {name!r} in free")
        del self.named[name]

    def reset_arenas(self) -> None:
        for arena in self.arenas.values():
            arena.reset()

    def resolve(self, token: str, need_elems: int, dtype: str) -> np.ndarray:
        """Resolve a data-argument token to a memory region.

        ``identifier`` = named region, ``name+K`` = offset view into a named
        region, bare unsigned integer = dynamic buffer of that many elements.
        """
        if token.isdigit():
            return self.arenas[dtype].draw(int(token))
        name, plus, off = token.partition("+")
        region = self.named.get(name)
        if region is None:
            raise StreamError(f"unknown variable {name!r}")
        if plus:
            if not off.isdigit():
                raise StreamError(f"malformed offset token {token!r}")
            k = int(off)
            if k > region.size:
                raise StreamError(f"offset {k} outside variable {name!r}")
            region = region[k:]
        if region.dtype != DTYPES[dtype]:
            raise StreamError(f"variable {name!r} has wrong dtype for this kernel")
        if region.size < need_elems:
            raise CapacityError(
                f"variable token {token!r} has {region.size} elements, need {need_elems}"
            )
        return region


# ---------------------------------------------------------------------------
# result lines

@dataclass
class ResultLine:
    cycles: int
    counters: list[int] = field(default_factory=list)
    failed: bool = False

    def format(self) -> str:
        parts = [str(self.cycles)] + [str(c) for c in self.counters]
        if self.failed:
            parts.append("FAILED")
        return " ".join(parts)

    @classmethod
    def parse(cls, line: str) -> "ResultLine":
        tokens = line.split()
        if not tokens:
            raise ValueError("empty result line")
        failed = tokens[-1] == "FAILED"
        if failed:
            tokens = tokens[:-1]
        return cls(int(tokens[0]), [int(t) for t in tokens[1:]], failed)


@dataclass
class _Unit:
    calls: list[Call]
    parallel: bool
    first_index: int  # index of the first buffered call, for diagnostics


class Sampler:
    """Executes parsed command streams."""

    def __init__(
        self,
        nthreads: int = 1,
        seed: int = 0,
        timer: CycleTimer | None = None,
        counter_provider: CounterProvider | None = None,
        arena_cap: int = DEFAULT_ARENA_CAP,
    ):
        self.nthreads = max(1, int(nthreads))
        self.ctx = ExecContext(seed=seed, nthreads=self.nthreads)
        self.timer = timer or CycleTimer()
        self.counters = counter_provider or NullCounterProvider()
        self.counters.configure(())
        self.memory = MemoryManager(self.ctx, arena_cap)
        self._block_pool: ThreadPoolExecutor | None = None

    @property
    def block_pool(self) -> ThreadPoolExecutor:
        if self._block_pool is None:
            self._block_pool = ThreadPoolExecutor(max_workers=self.nthreads)
        return self._block_pool

    def close(self) -> None:
        if self._block_pool is not None:
            self._block_pool.shutdown(wait=True)
        self.ctx.close()

    # -- resolution

    def _resolve_call(self, call: Call, index: int) -> KernelCallConcrete:
        sig = lookup_signature(call.kernel)
        if len(call.tokens) != len(sig.args):
            raise StreamError(
                f"call {index} ({call.kernel}): expected {len(sig.args)} arguments, "
                f"got {len(call.tokens)}"
            )
        # scalar pass: flags/dims/lds first so shapes can be derived
        scalars: dict[str, object] = {}
        for spec, tok in zip(sig.args, call.tokens):
            if isinstance(spec, FlagArg):
                scalars[spec.name] = tok
            elif isinstance(spec, (DimArg, LdArg)):
                try:
                    scalars[spec.name] = int(tok)
                except ValueError:
                    raise StreamError(
                        f"call {index} ({call.kernel}): argument {spec.name} "
                        f"must be an integer, got {tok!r}"
                    ) from None
        try:
            shapes = derive_shapes(sig, scalars)
        except ArgumentError as exc:
            raise StreamError(f"call {index} ({call.kernel}): {exc}") from None

        self.memory.reset_arenas()
        values = []
        for spec, tok in zip(sig.args, call.tokens):
            if isinstance(spec, DataArg):
                shape = shapes[spec.name]
                ld = scalars[spec.ld] if spec.ld else shape.min_ld
                need = ld * (shape.cols - 1) + shape.rows if shape.rows and shape.cols else 0
                try:
                    values.append(self.memory.resolve(tok, need, sig.dtype))
                except (StreamError, CapacityError) as exc:
                    raise StreamError(f"call {index} ({call.kernel}): {exc}") from None
            elif isinstance(spec, ScalarArg):
                try:
                    values.append(float(tok))
                except ValueError:
                    raise StreamError(
                        f"call {index} ({call.kernel}): bad scalar {tok!r}"
                    ) from None
            elif isinstance(spec, PathArg):
                values.append(tok)
            else:
                values.append(scalars[spec.name])
        return KernelCallConcrete(call.kernel, tuple(values))

    # -- execution

    def _run_units(self, units: list[_Unit]) -> list[ResultLine]:
        lines = []
        for unit in units:
            concrete = [
                self._resolve_call(c, unit.first_index + i)
                for i, c in enumerate(unit.calls)
            ]
            if not unit.parallel:
                for conc in concrete:
                    failed = False
                    t0 = self.timer.read()
                    try:
                        execute_kernel(conc, self.ctx)
                    except NumericalFailure:
                        failed = True
                    t1 = self.timer.read()
                    lines.append(ResultLine(t1 - t0, self.counters.read(), failed))
            else:
                failures = []

                def task(conc=None):
                    try:
                        execute_kernel(conc, self.ctx)
                    except NumericalFailure as exc:
                        failures.append(exc)

                t0 = self.timer.read()
                futures = [self.block_pool.submit(task, conc) for conc in concrete]
                for f in futures:
                    f.result()
                t1 = self.timer.read()
                lines.append(ResultLine(t1 - t0, self.counters.read(), bool(failures)))
        return lines

    def run_stream(self, commands: Sequence[Command]) -> list[ResultLine]:
        lines: list[ResultLine] = []
        units: list[_Unit] = []
        buffered = 0
        par: _Unit | None = None
        for cmd in commands:
            if isinstance(cmd, Malloc):
                self.memory.malloc(cmd.dtype, cmd.name, cmd.nelems)
            elif isinstance(cmd, Offset):
                self.memory.offset(cmd.dtype, cmd.src, cmd.offset, cmd.new)
            elif isinstance(cmd, Free):
                self.memory.free(cmd.name)
            elif isinstance(cmd, SetCounters):
                if par is not None:
                    raise StreamError("set_counters not allowed inside a parallel block")
                self.counters.configure(cmd.names)
            elif isinstance(cmd, ParBegin):
                if par is not None:
                    raise StreamError("nested parallel blocks are not allowed")
                par = _Unit([], True, buffered)
            elif isinstance(cmd, ParEnd):
                if par is None:
                    raise StreamError("'}' without matching '{omp'")
                units.append(par)
                par = None
            elif isinstance(cmd, Call):
                if par is not None:
                    par.calls.append(cmd)
                else:
                    units.append(_Unit([cmd], False, buffered))
                buffered += 1
            elif isinstance(cmd, Go):
                if par is not None:
                    raise StreamError("'go' not allowed inside a parallel block")
                lines.extend(self._run_units(units))
                units = []
                buffered = 0
            else:
                raise StreamError(f"unknown command {cmd!r}")
        if par is not None:
            raise StreamError("unterminated parallel block")
        return lines

    def run_text(self, text: str) -> list[ResultLine]:
        return self.run_stream(parse_stream(text))


def main(argv: Sequence[str] | None = None) -> int:
    nthreads = int(os.environ.get("KERNBENCH_NTHREADS", "1"))
    seed = int(os.environ.get("KERNBENCH_SEED", "0"))
    freq = float(os.environ.get("KERNBENCH_FREQ_HZ", str(DEFAULT_FREQ_HZ)))
    sampler = Sampler(nthreads=nthreads, seed=seed, timer=CycleTimer(freq))
    try:
        lines = sampler.run_text(sys.stdin.read())
    except KernbenchError as exc:
        print(f"kernbench-sampler: {exc}", file=sys.stderr)
        return 1
    finally:
        sampler.close()
    for line in lines:
        print(line.format())
    return 0


if __name__ == "__main__":
    sys.exit(main())
