"""Uniform grids on the truncated box [-L, L)^n, discrete Fourier pair, test families.

Conventions
-----------
Spatial nodes are ``x_j = -L + j*dx`` with ``dx = 2L/N``; frequency nodes are
``xi_k = (pi/L)*k`` for ``k = -N/2 .. N/2-1``.  The forward transform is the
Riemann sum of ``u(y) exp(-i<y, xi>)`` and the inverse carries the
``(2*pi)^-n`` factor on the frequency side::

    uhat(xi_k) = dx^n   * sum_m u(x_m) exp(-i <x_m, xi_k>)
    u(x_j)     = (dxi/2pi)^n * sum_k uhat(xi_k) exp(+i <x_j, xi_k>)

Both are evaluated with an FFT; the offset ``-L`` becomes the sign ``(-1)^k``.
Values are stored row-major with axis 0 first, frequency arrays in increasing
``k`` order (not FFT order).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError, SamplingError

__all__ = [
    "GridSpec",
    "GridFunction",
    "TestFamilySpec",
    "make_grid",
    "sample",
    "forward_transform",
    "inverse_transform",
    "generate_family",
    "save_psbf",
    "load_psbf",
    "export_csv",
]

FAMILY_KINDS = ("gaussian-pack", "smooth-bump", "bandlimited-random")

# exp(-t^2/2) < 1.3e-14 beyond t = 8: spatial and spectral cut-off for Gaussians
_GAUSS_CUTOFF = 8.0
_SUPPORT_TOL = 1e-12
# Kaiser-Bessel window I0(beta sqrt(1 - (xi/B)^2)) on |xi| < B: its inverse
# transform stays below 1e-13 of its peak once |x| B > 1.05 beta (beta = 32)
_KAISER_BETA = 32.0
_KAISER_REACH = 1.05
_MAGIC = b"PSBF1"


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[-L, L)^n`` with ``N`` points per axis."""

    n: int
    L: float
    N: int

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dxi(self) -> float:
        return math.pi / self.L

    @property
    def xi_max(self) -> float:
        """Largest frequency magnitude on an axis, ``pi*N/(2L)``."""
        return self.dxi * (self.N // 2)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.n

    def axis_nodes(self) -> np.ndarray:
        return -self.L + np.arange(self.N) * self.dx

    def axis_frequencies(self) -> np.ndarray:
        return self.dxi * np.arange(-(self.N // 2), self.N // 2)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(N,)*n + (n,)``."""
        axes = np.meshgrid(*([self.axis_nodes()] * self.n), indexing="ij")
        return np.stack(axes, axis=-1)

    def frequencies(self) -> np.ndarray:
        """Frequency coordinates, shape ``(N,)*n + (n,)``."""
        axes = np.meshgrid(*([self.axis_frequencies()] * self.n), indexing="ij")
        return np.stack(axes, axis=-1)

    def index_of(self, x: Sequence[float]) -> tuple[int, ...]:
        """Nearest node index to the point ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.rint((x + self.L) / self.dx).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, self.N - 1))

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "N": self.N}


def make_grid(n: int, L: float, N: int) -> GridSpec:
    """Validate parameters and build a :class:`GridSpec`."""
    if n not in (1, 2):
        raise ParameterError(f"dimension n must be 1 or 2, got {n!r}")
    if not (isinstance(L, (int, float)) and math.isfinite(L) and L > 0):
        raise ParameterError(f"half extent L must be positive and finite, got {L!r}")
    if int(N) != N or N < 16:
        raise ParameterError(f"points per axis N must be an integer >= 16, got {N!r}")
    if N % 2:
        raise ParameterError(f"points per axis N must be even, got {N}")
    return GridSpec(int(n), float(L), int(N))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples on the spatial (or frequency) nodes of a grid.

    The array is made read-only on construction.
    """

    spec: GridSpec
    values: np.ndarray
    domain: str = "space"
    label: str = field(default="", compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.shape != self.spec.shape:
            if vals.size != self.spec.size:
                raise ParameterError(
                    f"expected {self.spec.size} samples, got {vals.size}"
                )
            vals = vals.reshape(self.spec.shape)
        if self.domain not in ("space", "frequency"):
            raise ParameterError(f"unknown domain {self.domain!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values, label: str | None = None) -> "GridFunction":
        return GridFunction(self.spec, values, self.domain,
                            self.label if label is None else label)

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def _check(self, other: "GridFunction"):
        if other.spec != self.spec or other.domain != self.domain:
            raise ParameterError("grid functions live on different grids")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self.with_values(self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self.with_values(self.values - other.values)
        return NotImplemented

    def __mul__(self, c):
        if isinstance(c, (int, float, complex, np.number)):
            return self.with_values(c * self.values)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def sample(spec: GridSpec, f: Callable[[np.ndarray], np.ndarray], label: str = "") -> GridFunction:
    """Evaluate ``f`` at every spatial node.

    ``f`` receives the node array of shape ``(N,)*n + (n,)`` and must return
    an array broadcastable to ``(N,)*n``.
    """
    x = spec.nodes()
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(f(x), dtype=np.complex128), spec.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise SamplingError(
            f"evaluator returned {vals[idx]} at node {idx} (x = {x[idx].tolist()})"
        )
    return GridFunction(spec, vals, "space", label)


def _sign_pattern(spec: GridSpec) -> np.ndarray:
    k = np.arange(-(spec.N // 2), spec.N // 2)
    s = np.where(k % 2, -1.0, 1.0)
    out = s
    for _ in range(spec.n - 1):
        out = np.multiply.outer(out, s)
    return out


def forward_transform(f: GridFunction) -> GridFunction:
    """Riemann-sum Fourier transform onto the frequency grid."""
    if f.domain != "space":
        raise ParameterError("forward_transform expects a spatial grid function")
    spec = f.spec
    uhat = np.fft.fftshift(np.fft.fftn(f.values))
    uhat *= _sign_pattern(spec) * spec.cell_volume
    return GridFunction(spec, uhat, "frequency", f.label)


def inverse_transform(g: GridFunction) -> GridFunction:
    """Exact inverse of :func:`forward_transform`."""
    if g.domain != "frequency":
        raise ParameterError("inverse_transform expects a frequency grid function")
    spec = g.spec
    u = np.fft.ifftn(np.fft.ifftshift(g.values * _sign_pattern(spec)))
    u /= spec.cell_volume
    return GridFunction(spec, u, "space", g.label)


# ---------------------------------------------------------------------------
# test families


@dataclass(frozen=True)
class TestFamilySpec:
    """Parameters of a deterministic family of smooth, interior-supported functions.

    ``params`` keys (all optional, defaults scale with ``L``):

    ``width_range``     (lo, hi) Gaussian sigma or bump radius
    ``center_range``    (lo, hi) per-axis centre coordinates
    ``freq_range``      (lo, hi) modulation magnitude
    ``band_fraction``   bandlimited-random only: band edge as a fraction of ``xi_max``
    ``terms``           bandlimited-random only: number of shifted window copies
    ``beta``            bandlimited-random only: Kaiser-Bessel shape parameter
    ``normalize``       scale each member to unit sup-norm on the grid (default True)

    Bandlimited members are built in frequency: a separable Kaiser-Bessel
    window of per-axis half-width ``band / sqrt(n)`` times a random sum of
    phase shifts, so the spectrum vanishes exactly outside the band and the
    spatial tails fall below 1e-12 within ``1.05 * beta * sqrt(n) / band``
    of the shift centres.
    """

    __test__ = False  # not a pytest class

    kind: str
    count: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "count": self.count, "seed": self.seed,
                "params": {k: list(v) if isinstance(v, tuple) else v
                           for k, v in self.params.items()}}


def _defaults(kind: str, L: float) -> dict:
    if kind == "gaussian-pack":
        return {"width_range": (L / 48, L / 24), "center_range": (-L / 8, L / 8),
                "freq_range": (0.0, 3.0)}
    if kind == "smooth-bump":
        return {"width_range": (L / 16, L / 6), "center_range": (-L / 8, L / 8),
                "freq_range": (0.0, 0.0)}
    return {"center_range": (-L / 40, L / 40), "band_fraction": 0.5, "terms": 4,
            "beta": _KAISER_BETA}


def _pair(params: dict, key: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in params[key])
    if lo > hi:
        raise ParameterError(f"{key} must satisfy lo <= hi, got ({lo}, {hi})")
    return lo, hi


def _random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    if n == 1:
        return np.array([rng.choice([-1.0, 1.0])])
    theta = rng.uniform(0.0, 2.0 * np.pi)
    return np.array([np.cos(theta), np.sin(theta)])


def generate_family(spec: GridSpec, fam: TestFamilySpec) -> list[GridFunction]:
    """Generate ``fam.count`` functions, deterministic in ``fam.seed``.

    Gaussian-pack and smooth-bump members depend only on ``(L, seed, params)``
    so a family regenerated on a finer grid samples the same functions.
    """
    if fam.kind not in FAMILY_KINDS:
        raise ParameterError(f"unknown family kind {fam.kind!r}; expected one of {FAMILY_KINDS}")
    if int(fam.count) != fam.count or fam.count < 1:
        raise ParameterError(f"family count must be a positive integer, got {fam.count!r}")
    params = {**_defaults(fam.kind, spec.L), **fam.params}
    clo, chi = _pair(params, "center_range")
    half = spec.L / 2
    cmax = max(abs(clo), abs(chi))
    if fam.kind == "bandlimited-random":
        frac = float(params["band_fraction"])
        if not 0 < frac <= 1:
            raise ParameterError("band_fraction must lie in (0, 1]")
        axis_band = frac * spec.xi_max / math.sqrt(spec.n)
        beta = float(params["beta"])
        reach = _KAISER_REACH * beta / axis_band
    else:
        wlo, whi = _pair(params, "width_range")
        if wlo <= 0:
            raise ParameterError("width_range must be positive")
        reach = _GAUSS_CUTOFF * whi if fam.kind == "gaussian-pack" else whi
    if cmax + reach > half + 1e-12:
        raise ParameterError(
            f"{fam.kind} support reaches {cmax + reach:.4g} > L/2 = {half:.4g}; "
            + ("widen band_fraction or refine the grid" if fam.kind == "bandlimited-random"
               else "shrink width_range or center_range")
        )

    rng = np.random.default_rng(np.uint64(fam.seed % 2**64))
    x = spec.nodes()
    normalize = bool(params.get("normalize", True))
    if fam.kind == "bandlimited-random":
        xi = spec.frequencies()
        t = np.clip(1.0 - (xi / axis_band) ** 2, 0.0, None)
        window = np.prod(np.where(np.abs(xi) < axis_band, np.i0(beta * np.sqrt(t)), 0.0),
                         axis=-1)
    out = []
    for i in range(fam.count):
        if fam.kind == "bandlimited-random":
            k = int(params["terms"])
            shifts = rng.uniform(clo, chi, size=(k, spec.n))
            amps = rng.normal(size=k) + 1j * rng.normal(size=k)
            phases = np.exp(-1j * (xi.reshape(-1, spec.n) @ shifts.T)) @ amps
            spectrum = window * phases.reshape(spec.shape)
            vals = inverse_transform(GridFunction(spec, spectrum, "frequency")).values
        else:
            w = rng.uniform(wlo, whi)
            c = rng.uniform(clo, chi, size=spec.n)
            r2 = np.sum((x - c) ** 2, axis=-1)
            flo, fhi = _pair(params, "freq_range")
            omega = rng.uniform(flo, fhi) * _random_direction(rng, spec.n)
            if fam.kind == "gaussian-pack":
                phase = rng.uniform(0, 2 * np.pi)
                vals = np.exp(-r2 / (2 * w * w) + 1j * (x @ omega + phase))
            else:
                t = r2 / (w * w)
                inside = t < 1.0
                env = np.zeros(spec.shape)
                env[inside] = np.exp(-1.0 / (1.0 - t[inside]))
                vals = env * np.exp(1j * (x @ omega))
        sup = np.max(np.abs(vals))
        if normalize and sup > 0:
            vals = vals / sup
        g = GridFunction(spec, vals, "space", f"{fam.kind}[{i}]")
        _check_support(g)
        out.append(g)
    return out


def _check_support(g: GridFunction):
    spec = g.spec
    outside = np.any(np.abs(spec.nodes()) > spec.L / 2 + 1e-12, axis=-1)
    mag = np.abs(g.values)
    if outside.any() and mag[outside].max() > _SUPPORT_TOL * mag.max():
        raise ParameterError(f"{g.label} is not confined to [-L/2, L/2]^n")


# ---------------------------------------------------------------------------
# serialization


def save_psbf(path, f: GridFunction):
    """Write ``f`` as PSBF1: magic, int64 n, float64 L, int64 N, then (re, im) pairs.

    All numbers little-endian, 64-bit.
    """
    spec = f.spec
    inter = np.empty(spec.size * 2, dtype="<f8")
    flat = f.values.reshape(-1)
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qdq", spec.n, spec.L, spec.N))
        fh.write(inter.tobytes())


def load_psbf(path) -> GridFunction:
    data = Path(path).read_bytes()
    if not data.startswith(_MAGIC):
        raise ParameterError(f"{path}: not a PSBF1 file")
    off = len(_MAGIC)
    n, L, N = struct.unpack_from("<qdq", data, off)
    spec = make_grid(n, L, N)
    off += struct.calcsize("<qdq")
    inter = np.frombuffer(data, dtype="<f8", offset=off)
    if inter.size != 2 * spec.size:
        raise ParameterError(f"{path}: expected {2 * spec.size} floats, found {inter.size}")
    return GridFunction(spec, inter[0::2] + 1j * inter[1::2])


def export_csv(path, f: GridFunction):
    """Write one row per node: integer indices, coordinates, re, im."""
    spec = f.spec
    coords = spec.nodes() if f.domain == "space" else spec.frequencies()
    axes = "ij"[: spec.n]
    names = "xy"[: spec.n] if f.domain == "space" else ["xi1", "xi2"][: spec.n]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*axes, *names, "re", "im"])
        for idx in np.ndindex(*spec.shape):
            v = f.values[idx]
            w.writerow([*idx, *(repr(float(c)) for c in coords[idx]),
                        repr(float(v.real)), repr(float(v.imag))])
