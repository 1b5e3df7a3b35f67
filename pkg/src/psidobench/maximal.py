"""Maximal operators on grid functions: Hardy-Littlewood ``M``, ``M_q`` and the sharp function.

Cubes are grid-aligned: a cube of side ``s`` cells starting at index ``i``
covers nodes ``i .. i+s-1`` on every axis, clipped to the domain; averages are
taken over the clipped set.  The supremum over "all cubes containing x"
becomes a maximum over a finite :class:`CubeFamilySpec`.

Window sums are grown one side length at a time (``W_s = W_{s-1} + border``),
so for nonnegative integrands no cancellation occurs.  The maximum over the
``s^n`` placements containing a node is a separable sliding maximum computed
with the van Herk / Gil-Werman block scheme in O(N^n) per side length.

With ``placement='centered-only'`` only odd cubes centred at the node are used;
the classical comparability ``M_centered <= M <= 2^n M_centered`` relates the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ParameterError
from .grid import GridFunction, GridSpec

__all__ = [
    "Cube",
    "CubeFamilySpec",
    "cube_average",
    "hardy_littlewood",
    "q_maximal",
    "sharp_maximal",
    "sliding_max",
]

PLACEMENTS = ("all-containing", "centered-only")


@dataclass(frozen=True)
class Cube:
    """Grid cube: ``start`` node index per axis and ``side`` in cells."""

    start: tuple
    side: int

    @classmethod
    def from_interval(cls, spec: GridSpec, lo: float, hi: float) -> "Cube":
        """Nodes with every coordinate in ``[lo, hi]``."""
        first = int(np.ceil((lo + spec.L) / spec.dx - 1e-9))
        last = int(np.floor((hi + spec.L) / spec.dx + 1e-9))
        return cls((first,) * spec.n, last - first + 1)

    def slices(self, spec: GridSpec) -> tuple:
        out = []
        for a in self.start:
            lo, hi = max(a, 0), min(a + self.side, spec.N)
            if hi <= lo:
                return ()
            out.append(slice(lo, hi))
        return tuple(out)


@dataclass(frozen=True)
class CubeFamilySpec:
    """Finite cube family.

    ``window`` is the maximal half-width ``W`` in cells (default ``N/2``).
    All-containing families use every side ``1 .. 2W``; centred families use
    odd sides ``2r+1`` for ``r = 0 .. W``.  ``dyadic`` restricts the sharp
    function to power-of-two sides (half-widths when centred).
    """

    window: int | None = None
    placement: str = "all-containing"
    dyadic: bool = True

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise ParameterError(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")
        if self.window is not None and (int(self.window) != self.window or self.window < 1):
            raise ParameterError(f"window must be a positive integer, got {self.window!r}")

    def resolve(self, spec: GridSpec) -> int:
        W = spec.N // 2 if self.window is None else int(self.window)
        if W > spec.N // 2:
            raise ParameterError(f"window W={W} exceeds N/2={spec.N // 2}")
        return W

    def sides(self, spec: GridSpec, dyadic: bool = False) -> list[int]:
        W = self.resolve(spec)
        if self.placement == "all-containing":
            if dyadic:
                return [1 << e for e in range(0, (2 * W).bit_length()) if 1 << e <= 2 * W]
            return list(range(1, 2 * W + 1))
        if dyadic:
            radii = [0] + [1 << e for e in range(0, W.bit_length()) if 1 << e <= W]
        else:
            radii = list(range(0, W + 1))
        return [2 * r + 1 for r in radii]

    def to_dict(self):
        return {"window": self.window, "placement": self.placement, "dyadic": self.dyadic}


def cube_average(f: GridFunction, Q: Cube) -> complex:
    """Mean of the samples in ``Q`` (clipped to the grid)."""
    sl = Q.slices(f.spec)
    if not sl or Q.side < 1:
        raise ParameterError(f"cube {Q} has no nodes inside the grid")
    return complex(np.mean(f.values[sl]))


# ---------------------------------------------------------------------------
# sliding maximum


def sliding_max(a: np.ndarray, s: int, axis: int = -1) -> np.ndarray:
    """``out[i] = max(a[i:i+s])`` along ``axis`` (van Herk / Gil-Werman)."""
    a = np.moveaxis(np.asarray(a), axis, -1)
    n = a.shape[-1]
    if s < 1 or s > n:
        raise ParameterError(f"window {s} incompatible with length {n}")
    if s == 1:
        return np.moveaxis(a.copy(), -1, axis)
    nb = -(-n // s)
    pad = nb * s - n
    ap = np.concatenate([a, np.full(a.shape[:-1] + (pad,), -np.inf)], axis=-1)
    blocks = ap.reshape(a.shape[:-1] + (nb, s))
    g = np.maximum.accumulate(blocks, axis=-1).reshape(ap.shape)
    h = np.maximum.accumulate(blocks[..., ::-1], axis=-1)[..., ::-1].reshape(ap.shape)
    m = n - s + 1
    out = np.maximum(h[..., :m], g[..., s - 1:s - 1 + m])
    return np.moveaxis(out, -1, axis)


# ---------------------------------------------------------------------------
# running window sums over all starts in [-P, N-1] per axis


class _WindowSums:
    """Window sums of side s for every start, grown incrementally in s."""

    def __init__(self, g: np.ndarray, pad: int):
        self.n = g.ndim
        self.N = g.shape[0]
        self.P = pad
        width = [(pad, pad)] * self.n
        self.g = np.pad(g, width)
        self.s = 0
        starts = self.N + pad                      # starts -P .. N-1
        self.sums = np.zeros((starts,) * self.n, dtype=g.dtype)
        if self.n == 2:
            self.rows = np.zeros((self.g.shape[0], starts), dtype=g.dtype)  # run sums along axis 1
            self.cols = np.zeros((starts, self.g.shape[1]), dtype=g.dtype)  # run sums along axis 0

    def grow(self):
        s = self.s + 1
        m = self.N + self.P
        g = self.g
        if self.n == 1:
            self.sums = self.sums + g[s - 1:s - 1 + m]
        else:
            # L-shaped border: new row (length s) and new column (length s-1)
            self.rows = self.rows + g[:, s - 1:s - 1 + m]
            self.sums = self.sums + self.rows[s - 1:s - 1 + m, :] + self.cols[:, s - 1:s - 1 + m]
            self.cols = self.cols + g[s - 1:s - 1 + m, :]
        self.s = s
        return self.sums

    def counts(self):
        s, N, P = self.s, self.N, self.P
        i = np.arange(-P, N)
        # starts lying wholly outside the grid are never read; keep them finite
        c = np.maximum(np.minimum(i + s, N) - np.maximum(i, 0), 1).astype(float)
        if self.n == 1:
            return c
        return np.multiply.outer(c, c)


def _max_over_placements(avg: np.ndarray, s: int, P: int, N: int, centered: bool) -> np.ndarray:
    """For each node j: max of ``avg`` over the starts of side-s cubes containing j."""
    n = avg.ndim
    if centered:
        r = (s - 1) // 2
        sl = tuple(slice(P - r, P - r + N) for _ in range(n))
        return avg[sl]
    sl = tuple(slice(P - s + 1, P + N) for _ in range(n))
    out = avg[sl]
    for ax in range(n):
        out = sliding_max(out, s, axis=ax)
    return out


def _maximal_of(g: np.ndarray, fam: CubeFamilySpec, spec: GridSpec) -> np.ndarray:
    sides = fam.sides(spec)
    smax = max(sides)
    P = smax - 1
    ws = _WindowSums(g, P)
    centered = fam.placement == "centered-only"
    out = np.zeros(spec.shape)
    wanted = set(sides)
    for s in range(1, smax + 1):
        sums = ws.grow()
        if s not in wanted:
            continue
        avg = np.maximum(sums, 0.0) / ws.counts()
        out = np.maximum(out, _max_over_placements(avg, s, P, spec.N, centered))
    return out


def hardy_littlewood(f: GridFunction, fam: CubeFamilySpec | None = None) -> GridFunction:
    """``(M f)(x_j)``: largest mean of ``|f|`` over family cubes containing ``x_j``."""
    fam = fam or CubeFamilySpec()
    vals = _maximal_of(np.abs(f.values), fam, f.spec)
    return GridFunction(f.spec, vals, "space", f.label)


def q_maximal(f: GridFunction, q: float, fam: CubeFamilySpec | None = None) -> GridFunction:
    """``(M_q f) = (M |f|^q)^(1/q)``."""
    if not q >= 1:
        raise ParameterError(f"q must be >= 1, got {q!r}")
    if q == 1:
        return hardy_littlewood(f, fam)
    fam = fam or CubeFamilySpec()
    vals = _maximal_of(np.abs(f.values) ** q, fam, f.spec) ** (1.0 / q)
    return GridFunction(f.spec, vals, "space", f.label)


# ---------------------------------------------------------------------------
# sharp maximal function

_CHUNK_ELEMS = 1 << 21


def _oscillations(f: np.ndarray, s: int, spec: GridSpec, centered: bool) -> np.ndarray:
    """Mean of ``|f - f_Q|`` over every side-s cube start needed for the grid nodes."""
    n = spec.n
    N = spec.N
    r = (s - 1) // 2
    # starts in original coordinates
    lo = -r if centered else -(s - 1)
    hi = N - 1 - r if centered else N - 1
    padl, padr = -lo, hi + s - N
    fp = np.pad(f, [(padl, max(padr, 0))] * n)
    mp = np.pad(np.ones(spec.shape), [(padl, max(padr, 0))] * n)
    nstarts = hi - lo + 1
    if n == 1:
        fw = sliding_window_view(fp, s)[:nstarts]
        mw = sliding_window_view(mp, s)[:nstarts]
        cnt = mw.sum(axis=-1)
        mean = fw.sum(axis=-1) / cnt
        return (np.abs(fw - mean[:, None]) * mw).sum(axis=-1) / cnt
    fw = sliding_window_view(fp, (s, s))[:nstarts, :nstarts]
    mw = sliding_window_view(mp, (s, s))[:nstarts, :nstarts]
    out = np.empty((nstarts, nstarts))
    step = max(1, _CHUNK_ELEMS // (nstarts * s * s))
    for a in range(0, nstarts, step):
        fb, mb = fw[a:a + step], mw[a:a + step]
        cnt = mb.sum(axis=(-2, -1))
        mean = fb.sum(axis=(-2, -1)) / cnt
        out[a:a + step] = (np.abs(fb - mean[..., None, None]) * mb).sum(axis=(-2, -1)) / cnt
    return out


def sharp_maximal(f: GridFunction, fam: CubeFamilySpec | None = None,
                  dyadic: bool | None = None) -> GridFunction:
    """``f^#(x_j)``: largest mean oscillation ``mean_Q |f - f_Q|`` over cubes containing ``x_j``.

    Side lengths default to the dyadic subfamily (``fam.dyadic``); pass
    ``dyadic=False`` for every side.  Cost is O(N^n s^n) per side ``s``.
    """
    fam = fam or CubeFamilySpec()
    spec = f.spec
    dyadic = fam.dyadic if dyadic is None else dyadic
    centered = fam.placement == "centered-only"
    out = np.zeros(spec.shape)
    for s in fam.sides(spec, dyadic=dyadic):
        osc = _oscillations(f.values, s, spec, centered)
        best = osc
        if not centered:
            for ax in range(spec.n):
                best = sliding_max(best, s, axis=ax)
        out = np.maximum(out, best)
    return GridFunction(spec, out, "space", f.label)
