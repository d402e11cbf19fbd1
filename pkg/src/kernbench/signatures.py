"""Kernel signature schema and shape/leading-dimension derivation.

A :class:`Signature` describes one kernel: the ordered argument specs, the
data type, and a flop-count function over the dim/flag bindings.  Data
operand shapes are written as integer expressions over dim argument names;
where a shape depends on a flag (``transA``, ``side``, ...) a
:class:`FlagSwitch` selects the expression per flag character.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

from .errors import ArgumentError
from .expressions import evaluate

Bindings = Mapping[str, object]


@dataclass(frozen=True)
class FlagSwitch:
    """Choose a value by the character bound to ``flag``."""

    flag: str
    cases: Mapping[str, str]

    def select(self, bindings: Bindings) -> str:
        ch = bindings.get(self.flag)
        if ch not in self.cases:
            raise ArgumentError(f"illegal value {ch!r} for flag {self.flag!r}")
        return self.cases[ch]


ShapeRule = Union[str, FlagSwitch]


def resolve_rule(rule: ShapeRule, bindings: Bindings) -> str:
    return rule.select(bindings) if isinstance(rule, FlagSwitch) else rule


def eval_shape(rule: ShapeRule, bindings: Bindings) -> int:
    expr = resolve_rule(rule, bindings)
    dims = {k: v for k, v in bindings.items() if isinstance(v, int)}
    return evaluate(expr, dims)


@dataclass(frozen=True)
class FlagArg:
    name: str
    allowed: str  # nonempty set of legal characters

    kind = "flag"


@dataclass(frozen=True)
class DimArg:
    name: str

    kind = "dim"


@dataclass(frozen=True)
class ScalarArg:
    name: str

    kind = "scalar"


@dataclass(frozen=True)
class LdArg:
    name: str
    of: str  # data operand this leading dimension serves

    kind = "ld"


@dataclass(frozen=True)
class DataArg:
    name: str
    rows: ShapeRule
    cols: ShapeRule = "1"
    ld: str | None = None  # name of the LdArg, None = contiguous/vector
    structure: Union[str, FlagSwitch] = "general"

    kind = "data"


@dataclass(frozen=True)
class PathArg:
    name: str

    kind = "path"


ArgSpec = Union[FlagArg, DimArg, ScalarArg, LdArg, DataArg, PathArg]


@dataclass(frozen=True)
class Signature:
    name: str
    dtype: str  # "single" or "double"
    args: tuple[ArgSpec, ...]
    flops: Callable[[Bindings], int]
    description: str = ""
    impl: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        names = [a.name for a in self.args]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate argument names in signature {self.name}")

    @property
    def data_args(self) -> tuple[DataArg, ...]:
        return tuple(a for a in self.args if isinstance(a, DataArg))

    def arg(self, name: str) -> ArgSpec:
        for a in self.args:
            if a.name == name:
                return a
        raise KeyError(name)


@dataclass(frozen=True)
class OperandShape:
    rows: int
    cols: int
    min_ld: int

    @property
    def min_elements(self) -> int:
        """Column-major capacity requirement at the minimal leading dimension."""
        if self.rows == 0 or self.cols == 0:
            return 0
        return self.min_ld * (self.cols - 1) + self.rows


def check_bindings(sig: Signature, bindings: Bindings) -> None:
    """Validate flag characters and dim values against the signature."""
    for a in sig.args:
        if isinstance(a, FlagArg):
            v = bindings.get(a.name)
            if not (isinstance(v, str) and len(v) == 1 and v in a.allowed):
                raise ArgumentError(
                    f"{sig.name}: flag {a.name!r} must be one of "
                    f"{list(a.allowed)}, got {v!r}"
                )
        elif isinstance(a, DimArg):
            v = bindings.get(a.name)
            if not isinstance(v, int) or v < 0:
                raise ArgumentError(
                    f"{sig.name}: dim {a.name!r} must be a nonnegative integer, got {v!r}"
                )


def derive_shapes(sig: Signature, bindings: Bindings) -> dict[str, OperandShape]:
    """Rows, cols and minimal ld for every data operand of ``sig``.

    ``bindings`` maps every flag argument to its character and every dim
    argument to its integer value; flag-dependent transposition and side
    rules are applied.  ``min_ld`` equals the operand's row count (at least
    1 so degenerate zero-extent operands keep a legal leading dimension).
    """
    check_bindings(sig, bindings)
    shapes = {}
    for a in sig.data_args:
        rows = eval_shape(a.rows, bindings)
        cols = eval_shape(a.cols, bindings)
        if rows < 0 or cols < 0:
            raise ArgumentError(f"{sig.name}: negative extent for operand {a.name!r}")
        shapes[a.name] = OperandShape(rows=rows, cols=cols, min_ld=max(rows, 1))
    return shapes
