"""Apply ``Op(a)`` to grid functions.

The double integral is collapsed to the Kohn-Nirenberg form and discretized
on the grid::

    (Op(a) f)(x_j) = (dxi / 2pi)^n * sum_k a(x_j, xi_k) fhat(xi_k) exp(i <x_j, xi_k>)

For symbols without x-dependence this is a Fourier multiplier and goes through
the inverse FFT instead of the O(N^(2n)) sum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, ParameterError, PathError
from .grid import GridFunction, forward_transform, inverse_transform
from .symbols import Symbol

__all__ = ["ApplyOptions", "apply_multiplier", "apply_op", "apply_op_direct",
           "op_norm_witness", "NormWitness"]

log = logging.getLogger(__name__)

PATHS = ("auto", "multiplier", "full")


@dataclass(frozen=True)
class ApplyOptions:
    path: str = "auto"
    chunk: int = 256

    def __post_init__(self):
        if self.path not in PATHS:
            raise ParameterError(f"path must be one of {PATHS}, got {self.path!r}")
        if int(self.chunk) != self.chunk or self.chunk < 1:
            raise ParameterError("chunk must be a positive integer")


def _check(a: Symbol, f: GridFunction):
    if f.domain != "space":
        raise ParameterError("Op(a) acts on spatial grid functions")
    if a.n != f.spec.n:
        raise ParameterError(f"symbol dimension {a.n} != grid dimension {f.spec.n}")


def _symbol_values(a: Symbol, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = np.asarray(a.evaluate(x, xi), dtype=np.complex128)
    vals = np.broadcast_to(vals, np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]))
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(np.argwhere(bad)[0])
        xb = np.broadcast_to(x, vals.shape + x.shape[-1:])[idx]
        xib = np.broadcast_to(xi, vals.shape + xi.shape[-1:])[idx]
        raise EvaluationError(
            f"{a.identifier} returned {vals[idx]} at x={xb.tolist()}, xi={xib.tolist()}"
        )
    return vals


def apply_multiplier(a: Symbol, f: GridFunction) -> GridFunction:
    """``F^-1[a(xi) fhat]`` for an x-independent symbol."""
    _check(a, f)
    if not a.x_independent:
        raise PathError(f"{a.identifier} depends on x; use the full path")
    spec = f.spec
    xi = spec.frequencies()
    mult = _symbol_values(a, np.zeros(spec.n), xi)
    fhat = forward_transform(f)
    return inverse_transform(fhat.with_values(mult * fhat.values))


def apply_op(a: Symbol, f: GridFunction, opts: ApplyOptions | None = None) -> GridFunction:
    """Quadrature of the Kohn-Nirenberg integral.

    ``path='auto'`` takes the multiplier route iff the symbol is declared
    x-independent.  The full path evaluates ``a`` on ``chunk`` spatial rows at
    a time; each output entry is one reduction over the frequency nodes in
    row-major ``k`` order.
    """
    opts = opts or ApplyOptions()
    _check(a, f)
    path = opts.path
    if path == "auto":
        path = "multiplier" if a.x_independent else "full"
    if path == "multiplier":
        return apply_multiplier(a, f)

    spec = f.spec
    fhat = forward_transform(f).values.reshape(-1)
    x = spec.nodes().reshape(-1, spec.n)
    xi = spec.frequencies().reshape(-1, spec.n)
    weight = (spec.dxi / (2 * np.pi)) ** spec.n
    out = np.empty(x.shape[0], dtype=np.complex128)
    for start in range(0, x.shape[0], opts.chunk):
        xs = x[start:start + opts.chunk]
        sym = _symbol_values(a, xs[:, None, :], xi[None, :, :])
        phase = np.exp(1j * (xs @ xi.T))
        out[start:start + opts.chunk] = np.sum(sym * fhat[None, :] * phase, axis=1)
    return GridFunction(spec, weight * out.reshape(spec.shape), "space", f.label)


def apply_op_direct(a: Symbol, f: GridFunction) -> GridFunction:
    """Un-collapsed double sum over (xi_k, y_m); O(N^(3n)), debugging only (N <= 64)."""
    _check(a, f)
    spec = f.spec
    if spec.N > 64:
        raise ParameterError("apply_op_direct is limited to N <= 64")
    x = spec.nodes().reshape(-1, spec.n)
    xi = spec.frequencies().reshape(-1, spec.n)
    u = f.values.reshape(-1)
    inner = spec.cell_volume * (np.exp(-1j * (xi @ x.T)) @ u)     # integral over y
    sym = _symbol_values(a, x[:, None, :], xi[None, :, :])
    outer = (sym * np.exp(1j * (x @ xi.T))) @ inner
    out = (spec.dxi / (2 * np.pi)) ** spec.n * outer
    return GridFunction(spec, out.reshape(spec.shape), "space", f.label)


@dataclass
class NormWitness:
    value: float
    argmax: int | None
    label: str | None
    ratios: list
    skipped: int


def op_norm_witness(a: Symbol, family: Sequence[GridFunction],
                    norm: Callable[[GridFunction], float],
                    opts: ApplyOptions | None = None) -> NormWitness:
    """Largest ``norm(Op(a) f) / norm(f)`` over the family; zero-norm members are skipped."""
    if not family:
        raise ParameterError("empty family")
    best, arg, ratios, skipped = -np.inf, None, [], 0
    for i, f in enumerate(family):
        nf = float(norm(f))
        if not nf > 0:
            skipped += 1
            ratios.append(None)
            continue
        r = float(norm(apply_op(a, f, opts))) / nf
        ratios.append(r)
        if r > best:
            best, arg = r, i
    if arg is None:
        log.warning("every family member has zero norm")
        return NormWitness(float("nan"), None, None, ratios, skipped)
    return NormWitness(best, arg, family[arg].label, ratios, skipped)
