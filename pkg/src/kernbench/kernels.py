"""Signature registry and self-contained reference kernels.

All matrix kernels operate on column-major storage with explicit leading
dimensions, on top of flat float buffers.  No external BLAS/LAPACK library
is linked; the implementations here are straightforward vectorized
renditions of the textbook algorithms and are verified against independent
oracles in the test suite.

Flop-count conventions (exact, including low-order terms):

====================  =====================================================
kernel                flops
====================  =====================================================
gemm                  2 m n k
gemv                  2 m n
axpy                  2 n
trsv                  n^2
trsm / trmm           m^2 n  (left),  m n^2  (right)
syrk                  n (n+1) k
getrf (m x n)         sum_j [ (m-1-j) + 2 (m-1-j)(n-1-j) ],  j < min(m,n)
gesv                  getrf(n, n) + 2 n^2 nrhs
trti2 / trtri         sum_q [ 1 + q + q^2 ],  q = 0 .. n-1
memset/gerand/...     0
====================  =====================================================
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ArgumentError, CapacityError, NumericalFailure, UnknownKernelError
from .signatures import (
    DataArg,
    DimArg,
    FlagArg,
    FlagSwitch,
    LdArg,
    OperandShape,
    PathArg,
    ScalarArg,
    Signature,
    check_bindings,
    derive_shapes,
)

DTYPES = {"single": np.float32, "double": np.float64}


class ExecContext:
    """Execution-time environment for kernels: RNG and worker pool.

    The RNG is a 64-bit counter-based generator (Philox) so that runs with
    the same seed reproduce identical memory contents.  The pool is used
    only by the row-split path of gemm and is created lazily.
    """

    def __init__(self, seed: int = 0, nthreads: int = 1):
        self.seed = seed
        self.nthreads = max(1, int(nthreads))
        self.rng = np.random.Generator(np.random.Philox(key=seed))
        self._pool: ThreadPoolExecutor | None = None

    @property
    def pool(self) -> ThreadPoolExecutor | None:
        if self.nthreads <= 1:
            return None
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.nthreads)
        return self._pool

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None


def _uniform_open(rng: np.random.Generator, shape, dtype=np.float64) -> np.ndarray:
    """Uniform samples strictly inside (0, 1)."""
    ints = rng.integers(1, 1 << 53, size=shape)
    return (ints / float(1 << 53)).astype(dtype, copy=False)


def _as_matrix(region: np.ndarray, rows: int, cols: int, ld: int) -> np.ndarray:
    if rows == 0 or cols == 0:
        return np.empty((rows, cols), dtype=region.dtype)
    need = ld * (cols - 1) + rows
    base = region[:need]
    itemsize = region.itemsize
    return np.lib.stride_tricks.as_strided(
        base, shape=(rows, cols), strides=(itemsize, ld * itemsize)
    )


# ---------------------------------------------------------------------------
# triangular building blocks (operate on dense views, referencing only the
# indicated triangle)

def _solve_tri(T: np.ndarray, lower: bool, unit: bool, B: np.ndarray) -> None:
    """B := T^-1 B in place; T is logically triangular."""
    q = T.shape[0]
    if lower:
        for i in range(q):
            if not unit:
                B[i] = B[i] / T[i, i]
            if i + 1 < q:
                B[i + 1 :] -= T[i + 1 :, i][:, None] * B[i][None, :]
    else:
        for i in reversed(range(q)):
            if not unit:
                B[i] = B[i] / T[i, i]
            if i:
                B[:i] -= T[:i, i][:, None] * B[i][None, :]


def _mul_tri(T: np.ndarray, lower: bool, unit: bool, B: np.ndarray) -> None:
    """B := T B in place; T is logically triangular."""
    q = T.shape[0]
    if lower:
        for i in reversed(range(q)):
            acc = B[i].copy() if unit else T[i, i] * B[i]
            if i:
                acc += T[i, :i] @ B[:i]
            B[i] = acc
    else:
        for i in range(q):
            acc = B[i].copy() if unit else T[i, i] * B[i]
            if i + 1 < q:
                acc += T[i, i + 1 :] @ B[i + 1 :]
            B[i] = acc


def _tri_matvec(T: np.ndarray, lower: bool, unit: bool, x: np.ndarray) -> np.ndarray:
    """Return T @ x for a logically triangular T."""
    strict = np.tril(T, -1) if lower else np.triu(T, 1)
    y = strict @ x
    y += x if unit else T.diagonal() * x
    return y


def _lu_inplace(A: np.ndarray) -> list[int]:
    """Right-looking LU with partial pivoting; returns the pivot rows."""
    m, n = A.shape
    piv = []
    for j in range(min(m, n)):
        p = j + int(np.argmax(np.abs(A[j:, j])))
        if A[p, j] == 0:
            raise NumericalFailure(f"exactly zero pivot column at elimination step {j}")
        piv.append(p)
        if p != j:
            A[[j, p], :] = A[[p, j], :]
        A[j + 1 :, j] /= A[j, j]
        if j + 1 < n:
            A[j + 1 :, j + 1 :] -= np.outer(A[j + 1 :, j], A[j, j + 1 :])
    return piv


def _trti2_inplace(uplo: str, unit: bool, A: np.ndarray) -> None:
    n = A.shape[0]
    if uplo == "L":
        for j in reversed(range(n)):
            if not unit:
                if A[j, j] == 0:
                    raise NumericalFailure(f"zero diagonal at {j} in triangular inverse")
                A[j, j] = 1.0 / A[j, j]
                scal = -A[j, j]
            else:
                scal = -1.0
            if j + 1 < n:
                x = A[j + 1 :, j]
                x[:] = _tri_matvec(A[j + 1 :, j + 1 :], True, unit, x)
                x *= scal
    else:
        for j in range(n):
            if not unit:
                if A[j, j] == 0:
                    raise NumericalFailure(f"zero diagonal at {j} in triangular inverse")
                A[j, j] = 1.0 / A[j, j]
                scal = -A[j, j]
            else:
                scal = -1.0
            if j:
                x = A[:j, j]
                x[:] = _tri_matvec(A[:j, :j], False, unit, x)
                x *= scal


# ---------------------------------------------------------------------------
# kernel implementations

def _k_gemm(ctx, transA, transB, m, n, k, alpha, A, B, beta, C):
    opA = A if transA == "N" else A.T
    opB = B if transB == "N" else B.T

    def block(r0, r1):
        tmp = opA[r0:r1] @ opB
        Cb = C[r0:r1]
        if beta == 0:
            Cb[:] = alpha * tmp
        else:
            Cb *= beta
            Cb += alpha * tmp

    nt = ctx.nthreads if ctx is not None else 1
    pool = ctx.pool if ctx is not None else None
    if nt > 1 and pool is not None and m >= 2 * nt:
        step = -(-m // nt)
        futures = [pool.submit(block, r0, min(r0 + step, m)) for r0 in range(0, m, step)]
        for f in futures:
            f.result()
    else:
        block(0, m)


def _k_trsm(ctx, side, uplo, transA, diag, m, n, alpha, A, B):
    if m == 0 or n == 0:
        return
    unit = diag == "U"
    lower = uplo == "L"
    if transA == "N":
        Aop, low = A, lower
    else:
        Aop, low = A.T, not lower
    if alpha == 0:
        B[:] = 0
        return
    if alpha != 1:
        B *= alpha
    if side == "L":
        _solve_tri(Aop, low, unit, B)
    else:
        _solve_tri(Aop.T, not low, unit, B.T)


def _k_trmm(ctx, side, uplo, transA, diag, m, n, alpha, A, B):
    if m == 0 or n == 0:
        return
    unit = diag == "U"
    lower = uplo == "L"
    if transA == "N":
        Aop, low = A, lower
    else:
        Aop, low = A.T, not lower
    if alpha == 0:
        B[:] = 0
        return
    if side == "L":
        _mul_tri(Aop, low, unit, B)
    else:
        _mul_tri(Aop.T, not low, unit, B.T)
    if alpha != 1:
        B *= alpha


def _k_trsv(ctx, uplo, trans, diag, n, A, x):
    if n == 0:
        return
    _k_trsm(ctx, "L", uplo, trans, diag, n, 1, 1.0, A, x.reshape(n, 1))


def _k_syrk(ctx, uplo, trans, n, k, alpha, A, beta, C):
    if n == 0:
        return
    op = A if trans == "N" else A.T
    W = op @ op.T if k else np.zeros((n, n), dtype=C.dtype)
    idx = np.tril_indices(n) if uplo == "L" else np.triu_indices(n)
    C[idx] = beta * C[idx] + alpha * W[idx]


def _k_getrf(ctx, m, n, A):
    _lu_inplace(A)  # pivot vector kept internal


def _k_gesv(ctx, n, nrhs, A, B):
    piv = _lu_inplace(A)
    for j, p in enumerate(piv):
        if p != j:
            B[[j, p], :] = B[[p, j], :]
    _solve_tri(A, True, True, B)
    _solve_tri(A, False, False, B)


def _k_trti2(ctx, uplo, diag, n, A):
    _trti2_inplace(uplo, diag == "U", A)


_TRTRI_NB = 64


def _k_trtri(ctx, uplo, diag, n, A):
    unit = diag == "U"
    nb = _TRTRI_NB
    if n == 0:
        return
    if uplo == "L":
        start = ((n - 1) // nb) * nb
        for j in range(start, -1, -nb):
            jb = min(nb, n - j)
            if j + jb < n:
                _mul_tri(A[j + jb :, j + jb :], True, unit, A[j + jb :, j : j + jb])
                blk = A[j + jb :, j : j + jb]
                blk *= -1.0
                _solve_tri(A[j : j + jb, j : j + jb].T, False, unit, blk.T)
            _trti2_inplace("L", unit, A[j : j + jb, j : j + jb])
    else:
        for j in range(0, n, nb):
            jb = min(nb, n - j)
            if j:
                _mul_tri(A[:j, :j], False, unit, A[:j, j : j + jb])
                blk = A[:j, j : j + jb]
                blk *= -1.0
                _solve_tri(A[j : j + jb, j : j + jb].T, True, unit, blk.T)
            _trti2_inplace("U", unit, A[j : j + jb, j : j + jb])


def _k_axpy(ctx, n, alpha, X, Y):
    Y += alpha * X


def _k_gemv(ctx, trans, m, n, alpha, A, X, beta, Y):
    op = A if trans == "N" else A.T
    tmp = op @ X
    if beta == 0:
        Y[:] = alpha * tmp
    else:
        Y *= beta
        Y += alpha * tmp


def _k_memset(ctx, value, n, X):
    X[:] = value


def _k_gerand(ctx, m, n, A):
    A[:, :] = _uniform_open(ctx.rng, (m, n), dtype=A.dtype)


def _k_porand(ctx, n, A):
    G = _uniform_open(ctx.rng, (n, n), dtype=np.float64)
    W = G.T @ G
    sym = np.tril(W) + np.tril(W, -1).T  # mirror so the result is exactly symmetric
    sym[np.diag_indices(n)] += n
    A[:, :] = sym


def _k_readfile(ctx, path, n, X):
    wire = "<f4" if X.dtype == np.float32 else "<f8"
    data = np.fromfile(path, dtype=wire, count=n)
    if data.size < n:
        raise ArgumentError(f"file {path!r} holds {data.size} elements, need {n}")
    X[:] = data


def _k_writefile(ctx, path, n, X):
    wire = "<f4" if X.dtype == np.float32 else "<f8"
    np.ascontiguousarray(X).astype(wire).tofile(path)


# ---------------------------------------------------------------------------
# flop-count formulas (see the table in the module docstring)

def _fl_gemm(b):
    return 2 * b["m"] * b["n"] * b["k"]


def _fl_trsm(b):
    m, n = b["m"], b["n"]
    return m * m * n if b["side"] == "L" else m * n * n


def _fl_trsv(b):
    return b["n"] * b["n"]


def _fl_syrk(b):
    return b["n"] * (b["n"] + 1) * b["k"]


def _getrf_flops(m: int, n: int) -> int:
    return sum((m - 1 - j) + 2 * (m - 1 - j) * (n - 1 - j) for j in range(min(m, n)))


def _fl_getrf(b):
    return _getrf_flops(b["m"], b["n"])


def _fl_gesv(b):
    n = b["n"]
    return _getrf_flops(n, n) + 2 * n * n * b["nrhs"]


def _trtri_flops(n: int) -> int:
    return sum(1 + q + q * q for q in range(n))


def _fl_trtri(b):
    return _trtri_flops(b["n"])


def _fl_axpy(b):
    return 2 * b["n"]


def _fl_gemv(b):
    return 2 * b["m"] * b["n"]


def _fl_zero(b):
    return 0


# ---------------------------------------------------------------------------
# registry

def _build_registry() -> dict[str, Signature]:
    sigs = []

    def mm_args():
        return (
            FlagArg("transA", "NT"),
            FlagArg("transB", "NT"),
            DimArg("m"),
            DimArg("n"),
            DimArg("k"),
            ScalarArg("alpha"),
            DataArg("A", FlagSwitch("transA", {"N": "m", "T": "k"}),
                    FlagSwitch("transA", {"N": "k", "T": "m"}), ld="ldA"),
            LdArg("ldA", of="A"),
            DataArg("B", FlagSwitch("transB", {"N": "k", "T": "n"}),
                    FlagSwitch("transB", {"N": "n", "T": "k"}), ld="ldB"),
            LdArg("ldB", of="B"),
            ScalarArg("beta"),
            DataArg("C", "m", "n", ld="ldC"),
            LdArg("ldC", of="C"),
        )

    for dt, prefix in (("double", "d"), ("single", "s")):
        sigs.append(Signature(
            prefix + "gemm", dt, mm_args(), _fl_gemm,
            "general matrix-matrix multiply C := alpha op(A) op(B) + beta C",
            impl=_k_gemm,
        ))
        sigs.append(Signature(
            prefix + "memset", dt,
            (ScalarArg("value"), DimArg("n"), DataArg("X", "n")),
            _fl_zero, "fill a buffer with a single value", impl=_k_memset,
        ))
        sigs.append(Signature(
            prefix + "gerand", dt,
            (DimArg("m"), DimArg("n"), DataArg("A", "m", "n", ld="ldA"),
             LdArg("ldA", of="A")),
            _fl_zero, "fill a matrix with uniform random values in (0,1)",
            impl=_k_gerand,
        ))

    tri_struct = FlagSwitch("uplo", {"L": "lower", "U": "upper"})
    sigs += [
        Signature(
            "dtrsm", "double",
            (FlagArg("side", "LR"), FlagArg("uplo", "LU"), FlagArg("transA", "NT"),
             FlagArg("diag", "NU"), DimArg("m"), DimArg("n"), ScalarArg("alpha"),
             DataArg("A", FlagSwitch("side", {"L": "m", "R": "n"}),
                     FlagSwitch("side", {"L": "m", "R": "n"}), ld="ldA",
                     structure=tri_struct),
             LdArg("ldA", of="A"),
             DataArg("B", "m", "n", ld="ldB"), LdArg("ldB", of="B")),
            _fl_trsm, "triangular solve with multiple right-hand sides",
            impl=_k_trsm,
        ),
        Signature(
            "dtrmm", "double",
            (FlagArg("side", "LR"), FlagArg("uplo", "LU"), FlagArg("transA", "NT"),
             FlagArg("diag", "NU"), DimArg("m"), DimArg("n"), ScalarArg("alpha"),
             DataArg("A", FlagSwitch("side", {"L": "m", "R": "n"}),
                     FlagSwitch("side", {"L": "m", "R": "n"}), ld="ldA",
                     structure=tri_struct),
             LdArg("ldA", of="A"),
             DataArg("B", "m", "n", ld="ldB"), LdArg("ldB", of="B")),
            _fl_trsm, "triangular matrix-matrix multiply", impl=_k_trmm,
        ),
        Signature(
            "dtrsv", "double",
            (FlagArg("uplo", "LU"), FlagArg("trans", "NT"), FlagArg("diag", "NU"),
             DimArg("n"),
             DataArg("A", "n", "n", ld="ldA", structure=tri_struct),
             LdArg("ldA", of="A"), DataArg("x", "n")),
            _fl_trsv, "triangular solve with a single right-hand side",
            impl=_k_trsv,
        ),
        Signature(
            "dsyrk", "double",
            (FlagArg("uplo", "LU"), FlagArg("trans", "NT"), DimArg("n"), DimArg("k"),
             ScalarArg("alpha"),
             DataArg("A", FlagSwitch("trans", {"N": "n", "T": "k"}),
                     FlagSwitch("trans", {"N": "k", "T": "n"}), ld="ldA"),
             LdArg("ldA", of="A"), ScalarArg("beta"),
             DataArg("C", "n", "n", ld="ldC"), LdArg("ldC", of="C")),
            _fl_syrk, "symmetric rank-k update", impl=_k_syrk,
        ),
        Signature(
            "dgetrf", "double",
            (DimArg("m"), DimArg("n"), DataArg("A", "m", "n", ld="ldA"),
             LdArg("ldA", of="A")),
            _fl_getrf,
            "LU factorization with partial pivoting (pivot vector internal)",
            impl=_k_getrf,
        ),
        Signature(
            "dgesv", "double",
            (DimArg("n"), DimArg("nrhs"),
             DataArg("A", "n", "n", ld="ldA"), LdArg("ldA", of="A"),
             DataArg("B", "n", "nrhs", ld="ldB"), LdArg("ldB", of="B")),
            _fl_gesv, "solve a general linear system via LU", impl=_k_gesv,
        ),
        Signature(
            "dtrti2", "double",
            (FlagArg("uplo", "LU"), FlagArg("diag", "NU"), DimArg("n"),
             DataArg("A", "n", "n", ld="ldA", structure=tri_struct),
             LdArg("ldA", of="A")),
            _fl_trtri, "unblocked triangular inversion", impl=_k_trti2,
        ),
        Signature(
            "dtrtri", "double",
            (FlagArg("uplo", "LU"), FlagArg("diag", "NU"), DimArg("n"),
             DataArg("A", "n", "n", ld="ldA", structure=tri_struct),
             LdArg("ldA", of="A")),
            _fl_trtri, "blocked triangular inversion", impl=_k_trtri,
        ),
        Signature(
            "daxpy", "double",
            (DimArg("n"), ScalarArg("alpha"), DataArg("X", "n"), DataArg("Y", "n")),
            _fl_axpy, "y := alpha x + y", impl=_k_axpy,
        ),
        Signature(
            "dgemv", "double",
            (FlagArg("trans", "NT"), DimArg("m"), DimArg("n"), ScalarArg("alpha"),
             DataArg("A", "m", "n", ld="ldA"), LdArg("ldA", of="A"),
             DataArg("X", FlagSwitch("trans", {"N": "n", "T": "m"})),
             ScalarArg("beta"),
             DataArg("Y", FlagSwitch("trans", {"N": "m", "T": "n"}))),
            _fl_gemv, "general matrix-vector multiply", impl=_k_gemv,
        ),
        Signature(
            "dporand", "double",
            (DimArg("n"),
             DataArg("A", "n", "n", ld="ldA", structure="symmetric-pd"),
             LdArg("ldA", of="A")),
            _fl_zero,
            "fill with a random symmetric positive definite matrix (G^T G + n I)",
            impl=_k_porand,
        ),
        Signature(
            "dreadfile", "double",
            (PathArg("path"), DimArg("n"), DataArg("X", "n")),
            _fl_zero, "read raw little-endian values from a file", impl=_k_readfile,
        ),
        Signature(
            "dwritefile", "double",
            (PathArg("path"), DimArg("n"), DataArg("X", "n")),
            _fl_zero, "write raw little-endian values to a file", impl=_k_writefile,
        ),
    ]
    return {s.name: s for s in sigs}


REGISTRY: dict[str, Signature] = _build_registry()


def lookup_signature(name: str) -> Signature:
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownKernelError(f"unknown kernel {name!r}") from None


@dataclass
class KernelCallConcrete:
    """A kernel name plus fully concrete argument values in signature order.

    Data arguments are flat numpy arrays (the resolved memory regions).
    """

    name: str
    values: tuple


def bind_arguments(sig: Signature, values: Sequence) -> dict[str, object]:
    if len(values) != len(sig.args):
        raise ArgumentError(
            f"{sig.name}: expected {len(sig.args)} arguments, got {len(values)}"
        )
    bindings: dict[str, object] = {}
    for spec, val in zip(sig.args, values):
        if isinstance(spec, (DimArg, LdArg)):
            if not isinstance(val, (int, np.integer)):
                raise ArgumentError(f"{sig.name}: {spec.name} must be an integer")
            bindings[spec.name] = int(val)
        elif isinstance(spec, ScalarArg):
            bindings[spec.name] = float(val)
        elif isinstance(spec, FlagArg):
            bindings[spec.name] = str(val)
        elif isinstance(spec, PathArg):
            bindings[spec.name] = str(val)
        else:  # DataArg: keep the region itself
            bindings[spec.name] = val
    return bindings


def flop_count(sig: Signature, bindings: Mapping[str, object]) -> int:
    """Flop count of one call under the given flag/dim bindings."""
    check_bindings(sig, bindings)
    return int(sig.flops(bindings))


def execute_kernel(call: KernelCallConcrete, ctx: ExecContext | None = None) -> None:
    """Execute a concrete call on its resolved memory regions, in place."""
    sig = lookup_signature(call.name)
    bindings = bind_arguments(sig, call.values)
    scalars = {k: v for k, v in bindings.items() if not isinstance(v, np.ndarray)}
    check_bindings(sig, scalars)
    shapes = derive_shapes(sig, scalars)
    dtype = DTYPES[sig.dtype]

    kwargs: dict[str, object] = {}
    for spec in sig.args:
        if isinstance(spec, LdArg):
            continue  # baked into the operand views
        val = bindings[spec.name]
        if isinstance(spec, DataArg):
            region = np.asarray(val)
            if region.ndim != 1 or region.dtype != dtype:
                raise ArgumentError(
                    f"{sig.name}: operand {spec.name} must be a flat {sig.dtype} buffer"
                )
            shape = shapes[spec.name]
            ld = int(bindings[spec.ld]) if spec.ld else shape.min_ld
            if shape.rows and shape.cols and ld < shape.min_ld:
                raise ArgumentError(
                    f"{sig.name}: ld for {spec.name} is {ld}, below row count {shape.rows}"
                )
            need = ld * (shape.cols - 1) + shape.rows if shape.rows and shape.cols else 0
            if region.size < need:
                raise CapacityError(
                    f"{sig.name}: operand {spec.name} needs {need} elements, "
                    f"region has {region.size}"
                )
            if spec.ld is None:
                kwargs[spec.name] = region[: shape.rows]
            else:
                kwargs[spec.name] = _as_matrix(region, shape.rows, shape.cols, ld)
        else:
            kwargs[spec.name] = val

    if ctx is None:
        ctx = ExecContext()
    sig.impl(ctx, **kwargs)
