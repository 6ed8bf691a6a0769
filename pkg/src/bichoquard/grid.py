"""Periodic 4-D sample grids and Fourier-multiplier operators.

A :class:`Field` holds N^4 real samples of a function on the box
[-L/2, L/2)^4.  Transforms are forward-unnormalized and inverse-divided by
N^4 (the numpy/scipy convention), and the last axis is the fastest index.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ZeroFieldError

__all__ = [
    "Grid",
    "Field",
    "WrapAroundWarning",
    "mass_sq",
    "inner",
    "seminorms",
    "apply_operator",
    "gradient",
    "dilate",
    "rescale_mass",
    "support_radius",
    "save_snapshot",
    "load_snapshot",
]

DIM = 4
SNAPSHOT_MAGIC = b"BCH4"
SNAPSHOT_VERSION = 1


class WrapAroundWarning(UserWarning):
    """Dilation is likely to pull periodic images into the box."""


@dataclass(frozen=True)
class Grid:
    n: int
    length: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2 or self.n % 2:
            raise ValueError(f"points per axis must be a positive even integer, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"box length must be positive, got {self.length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**DIM

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * DIM

    @cached_property
    def x(self) -> np.ndarray:
        """1-D node coordinates -L/2 + j h."""
        return -0.5 * self.length + self.h * np.arange(self.n)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order; index N/2 holds the Nyquist mode -N/2."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def xi(self) -> np.ndarray:
        return 2.0 * np.pi * self.wavenumbers / self.length

    @cached_property
    def xi_odd(self) -> np.ndarray:
        """First-derivative symbol with the Nyquist entry zeroed."""
        xi = self.xi.copy()
        xi[self.n // 2] = 0.0
        return xi

    @cached_property
    def xi_half(self) -> np.ndarray:
        """Non-negative frequencies along the rfft axis, Nyquist included."""
        return 2.0 * np.pi * np.arange(self.n // 2 + 1) / self.length

    @cached_property
    def k2(self) -> np.ndarray:
        """|xi|^2 on the rfft layout (full Nyquist frequency)."""
        full = self.xi**2
        half = self.xi_half**2
        return (
            full[:, None, None, None]
            + full[None, :, None, None]
            + full[None, None, :, None]
            + half[None, None, None, :]
        )

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full spectrum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(
            self.x.reshape([-1 if a == b else 1 for b in range(DIM)]) for a in range(DIM)
        )

    def radius(self) -> np.ndarray:
        r2 = sum(c**2 for c in self.coords())
        return np.sqrt(r2)

    def sample(self, func) -> "Field":
        """Field of ``func(x1, x2, x3, x4)`` evaluated on broadcast coordinates."""
        vals = np.broadcast_to(func(*self.coords()), self.shape)
        return Field(self, vals)

    def radial(self, profile) -> "Field":
        return Field(self, profile(self.radius()))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def constant(self, value: float) -> "Field":
        return Field(self, np.full(self.shape, float(value)))

    def random(self, rng: np.random.Generator, *, width: float = 1.5, modes: int = 6) -> "Field":
        """Smooth localized random field: a Gaussian envelope times a random low-mode sum."""
        coords = self.coords()
        total = np.zeros(self.shape)
        for _ in range(modes):
            k = rng.normal(size=DIM) * 0.8
            phase = rng.uniform(0, 2 * np.pi)
            total = total + rng.normal() * np.cos(sum(ki * c for ki, c in zip(k, coords)) + phase)
        shift = rng.normal(size=DIM) * 0.3
        env = np.exp(-sum((c - s) ** 2 for c, s in zip(coords, shift)) / (2 * width**2))
        return Field(self, (total + rng.normal()) * env)

    def rfft(self, data: np.ndarray) -> np.ndarray:
        return sfft.rfftn(data, axes=range(DIM))

    def irfft(self, spec: np.ndarray) -> np.ndarray:
        return sfft.irfftn(spec, s=self.shape, axes=range(DIM))

    def spectral_sum(self, spec: np.ndarray, multiplier=None) -> float:
        """h^4 N^-4 sum_k m(k) |u_k|^2 over the full spectrum, from rfft coefficients."""
        p = spec.real**2 + spec.imag**2
        if multiplier is not None:
            p = p * multiplier
        total = float(np.sum(p * self.rfft_weights))
        return total * self.cell_volume / self.n**DIM


class Field:
    """Immutable real samples on a :class:`Grid`."""

    __slots__ = ("grid", "data")

    def __init__(self, grid: Grid, data):
        arr = np.array(data, dtype=np.float64, copy=True)
        if arr.shape != grid.shape:
            raise ValueError(f"expected shape {grid.shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field samples must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.data = arr

    @classmethod
    def _wrap(cls, grid, arr):
        # trusted fast path: skip the copy and finiteness scan
        obj = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.float64)
        arr.setflags(write=False)
        obj.grid = grid
        obj.data = arr
        return obj

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.data
        return other

    def __add__(self, other):
        return Field._wrap(self.grid, self.data + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field._wrap(self.grid, self.data - self._other(other))

    def __rsub__(self, other):
        return Field._wrap(self.grid, self._other(other) - self.data)

    def __mul__(self, other):
        return Field._wrap(self.grid, self.data * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field._wrap(self.grid, self.data / self._other(other))

    def __neg__(self):
        return Field._wrap(self.grid, -self.data)

    def __repr__(self):
        return f"Field(n={self.grid.n}, L={self.grid.length}, max|u|={np.max(np.abs(self.data)):.6g})"

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data)))


def mass_sq(u: Field) -> float:
    """Discrete L^2 mass h^4 sum u^2."""
    return float(np.dot(u.data.ravel(), u.data.ravel())) * u.grid.cell_volume


def inner(u: Field, v: Field) -> float:
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return float(np.dot(u.data.ravel(), v.data.ravel())) * u.grid.cell_volume


def seminorms(u: Field) -> tuple[float, float]:
    """Return (||Delta u||^2, ||grad u||^2) by Parseval."""
    g = u.grid
    spec = g.rfft(u.data)
    p = (spec.real**2 + spec.imag**2) * g.rfft_weights
    k2 = g.k2
    scale = g.cell_volume / g.n**DIM
    a = float(np.sum(p * k2 * k2)) * scale
    b = float(np.sum(p * k2)) * scale
    return a, b


def _symbol(grid: Grid, symbol: str, beta: float = 0.0) -> np.ndarray:
    k2 = grid.k2
    if symbol == "laplacian":
        return -k2
    if symbol == "bilaplacian":
        return k2 * k2
    if symbol == "biharmonic_plus_beta":
        if beta < 0:
            raise ValueError(f"beta must be non-negative, got {beta}")
        return k2 * k2 + beta * k2
    raise ValueError(f"unknown symbol {symbol!r}")


def apply_operator(u: Field, symbol: str, beta: float = 0.0) -> Field:
    """Apply Delta, Delta^2 or Delta^2 - beta Delta as a Fourier multiplier."""
    g = u.grid
    spec = g.rfft(u.data)
    spec *= _symbol(g, symbol, beta)
    return Field._wrap(g, g.irfft(spec))


def gradient(u: Field) -> tuple[Field, ...]:
    """Spectral partial derivatives (odd symbol, Nyquist dropped)."""
    g = u.grid
    spec = g.rfft(u.data)
    out = []
    for axis in range(DIM):
        if axis == DIM - 1:
            sym = g.xi_half.copy()
            sym[-1] = 0.0
        else:
            sym = g.xi_odd
        shape = [1] * DIM
        shape[axis] = -1
        out.append(Field._wrap(g, g.irfft(spec * (1j * sym.reshape(shape)))))
    return tuple(out)


def support_radius(u: Field, tail: float = 1e-6) -> float:
    """Smallest radius (about the box centre) holding all but ``tail`` of the mass."""
    g = u.grid
    r = g.radius().ravel()
    w = u.data.ravel() ** 2
    total = w.sum()
    if total == 0:
        return 0.0
    order = np.argsort(r)
    cum = np.cumsum(w[order])
    idx = int(np.searchsorted(cum, (1.0 - tail) * total))
    return float(r[order[min(idx, r.size - 1)]])


def _interp_matrix(grid: Grid, targets: np.ndarray) -> np.ndarray:
    """Rows evaluate the real trigonometric interpolant at ``targets``."""
    n = grid.n
    x0 = -0.5 * grid.length
    k = np.arange(-(n // 2) + 1, n // 2)
    xi = 2.0 * np.pi * k / grid.length
    diff = targets[:, None] - grid.x[None, :]
    mat = np.cos(diff[:, :, None] * xi[None, None, :]).sum(axis=2)
    nyq = np.pi / grid.h
    mat += np.cos(nyq * (targets - x0))[:, None] * np.cos(nyq * (grid.x - x0))[None, :]
    return mat / n


def dilate(u: Field, s: float, *, warn: bool = True) -> Field:
    """Samples of x -> u(e^s x) by separable trigonometric interpolation.

    Multiply by e^{2s} to obtain the mass-preserving scaling.
    """
    if s == 0:
        return u
    g = u.grid
    if warn:
        radius = support_radius(u)
        limit = 0.45 * g.length
        grown = radius * np.exp(-s)
        wrapped = s > 0 and g.length - 0.5 * g.length * np.exp(s) < radius
        if grown > limit or wrapped:
            warnings.warn(
                f"dilation by s={s:.4g} moves mass (radius {radius:.3g}) into the periodic "
                f"overlap of a box of length {g.length:g}",
                WrapAroundWarning,
                stacklevel=2,
            )
    mat = _interp_matrix(g, np.exp(s) * g.x)
    data = u.data
    for axis in range(DIM):
        data = np.moveaxis(np.tensordot(mat, data, axes=([1], [axis])), 0, axis)
    return Field._wrap(g, data)


def rescale_mass(u: Field, c: float) -> Field:
    """Return (c / ||u||) u."""
    if not c > 0:
        raise ValueError(f"target mass must be positive, got {c}")
    m = mass_sq(u)
    if m == 0:
        raise ZeroFieldError("cannot rescale the zero field")
    norm = np.sqrt(m)
    # already on the sphere up to roundoff: keep the projection idempotent
    if abs(norm - c) <= 4 * np.finfo(float).eps * c:
        return u
    return Field._wrap(u.grid, u.data * (c / norm))


def save_snapshot(u: Field, path) -> Path:
    """Write the 'BCH4' little-endian snapshot format."""
    path = Path(path)
    g = u.grid
    header = SNAPSHOT_MAGIC + struct.pack("<IId", SNAPSHOT_VERSION, g.n, g.length)
    body = np.ascontiguousarray(u.data, dtype="<f8").tobytes()
    try:
        path.write_bytes(header + body)
    except OSError as exc:
        raise OSError(f"could not write snapshot {path}: {exc}") from exc
    return path


def load_snapshot(path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a BCH4 snapshot")
    version, n, length = struct.unpack_from("<IId", raw, 4)
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    grid = Grid(n, length)
    count = n**DIM
    body = np.frombuffer(raw, dtype="<f8", count=count, offset=20)
    if body.size != count:
        raise ValueError(f"{path}: truncated snapshot")
    return Field(grid, body.reshape(grid.shape))
