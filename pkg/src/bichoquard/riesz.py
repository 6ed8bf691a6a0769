"""Free-space Riesz potential I_mu * g = int g(y) |x - y|^-mu dy on a grid.

The discrete operator is h^4 sum_j K(x_i - x_j) g_j with K(d) = |d|^-mu away
from the origin.  Near the origin the default "corrected" rule adds
lattice-zeta weights on a radius-2 stencil so smooth integrands converge at
O(h^(10 - mu)); the "cell_average" rule only replaces K(0) by the mean of
|x|^-mu over one cell and is O(h^2).  The fast path embeds the N^4 samples in
a (2N)^4 zero-padded array so the circular FFT convolution reproduces the
free-space sum exactly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.integrate import nquad

from .errors import GridTooLargeError
from .grid import DIM, Field, Grid
from .lattice import corrected_weights

__all__ = [
    "RieszKernel",
    "origin_cell_average",
    "convolve",
    "choquard_pairing",
    "direct_convolve",
    "DIRECT_MAX_N",
]

DIRECT_MAX_N = 10
QUADRATURES = ("corrected", "cell_average")


@lru_cache(maxsize=16)
def _unit_cube_integral(mu: float) -> float:
    """int over [-1/2, 1/2]^4 of |y|^-mu.

    Splitting the cube into the 8 pyramids over its faces and integrating the
    radial factor exactly leaves a smooth integral over the face [-1, 1]^3.
    """
    if mu == 0:
        return 1.0
    face, _ = nquad(
        lambda a, b, c: (1.0 + a * a + b * b + c * c) ** (-0.5 * mu),
        [[0.0, 1.0]] * 3,
        opts={"epsabs": 0.0, "epsrel": 1e-12},
    )
    return 8.0 * 8.0 * face * 0.5 ** (4.0 - mu) / (4.0 - mu)


def origin_cell_average(mu: float, h: float) -> float:
    """Mean of |x|^-mu over the cell [-h/2, h/2]^4."""
    return _unit_cube_integral(float(mu)) * h ** (-mu)


def _offsets(n: int, h: float) -> np.ndarray:
    """Signed displacements of a length-2n periodic axis, index n taken as +n."""
    j = np.arange(2 * n)
    return np.where(j <= n, j, j - 2 * n) * h


def _stencil(mu: float, h: float, quadrature: str) -> dict:
    """Offset -> kernel value for lattice offsets whose weight differs from |d|^-mu."""
    if quadrature == "cell_average":
        return {(0,) * DIM: origin_cell_average(mu, h)}
    scale = h ** (-mu)
    out = {}
    for offset, c in corrected_weights(mu).items():
        r2 = sum(a * a for a in offset)
        base = r2 ** (-0.5 * mu) if r2 else 0.0
        out[offset] = scale * (base + c)
    return out


@lru_cache(maxsize=2)
def _kernel_spectrum(n: int, length: float, mu: float, quadrature: str) -> np.ndarray:
    h = length / n
    d2 = _offsets(n, h) ** 2
    r2 = (
        d2[:, None, None, None]
        + d2[None, :, None, None]
        + d2[None, None, :, None]
        + d2[None, None, None, :]
    )
    r2[0, 0, 0, 0] = 1.0
    kern = r2 ** (-0.5 * mu)
    del r2
    for offset, value in _stencil(mu, h, quadrature).items():
        kern[tuple(a % (2 * n) for a in offset)] = value
    spec = sfft.rfftn(kern, axes=range(DIM))
    del kern
    # the kernel is even, so its transform is real up to roundoff
    out = np.ascontiguousarray(spec.real)
    out.setflags(write=False)
    return out


class RieszKernel:
    """The discrete kernel |x|^-mu for a given grid, tabulated lazily."""

    def __init__(self, grid: Grid, mu: float, quadrature: str = "corrected"):
        mu = float(mu)
        if not 0.0 < mu < 4.0:
            raise ValueError(f"mu must lie in (0, 4), got {mu}")
        if quadrature not in QUADRATURES:
            raise ValueError(f"quadrature must be one of {QUADRATURES}, got {quadrature!r}")
        self.grid = grid
        self.mu = mu
        self.quadrature = quadrature
        self._near = _stencil(mu, grid.h, quadrature)
        table = np.full((5,) * DIM, np.nan)
        for offset, value in self._near.items():
            table[tuple(a + 2 for a in offset)] = value
        self._near_table = table

    def __repr__(self):
        return (
            f"RieszKernel(n={self.grid.n}, L={self.grid.length}, mu={self.mu}, "
            f"quadrature={self.quadrature!r})"
        )

    @property
    def origin_value(self) -> float:
        return self._near[(0,) * DIM]

    def value(self, displacement) -> np.ndarray:
        """Kernel at lattice displacements (array with trailing axis of length 4)."""
        d = np.asarray(displacement, dtype=float)
        r2 = np.sum(d * d, axis=-1)
        out = np.empty_like(r2)
        zero = r2 == 0
        out[~zero] = r2[~zero] ** (-0.5 * self.mu)
        out[zero] = self.origin_value
        steps = np.rint(d / self.grid.h).astype(int)
        near = np.all(np.abs(steps) <= 2, axis=-1)
        if np.any(near):
            idx = steps[near] + 2
            vals = self._near_table[tuple(idx.T)]
            sub = out[near]
            hit = ~np.isnan(vals)
            sub[hit] = vals[hit]
            out[near] = sub
        return out

    @property
    def spectrum(self) -> np.ndarray:
        g = self.grid
        return _kernel_spectrum(g.n, g.length, self.mu, self.quadrature)

    def convolve_array(self, data: np.ndarray) -> np.ndarray:
        g = self.grid
        n = g.n
        padded = sfft.rfftn(data, s=(2 * n,) * DIM, axes=range(DIM))
        padded *= self.spectrum
        full = sfft.irfftn(padded, s=(2 * n,) * DIM, axes=range(DIM), overwrite_x=True)
        return full[:n, :n, :n, :n] * g.cell_volume

    def pairing_array(self, conv: np.ndarray, other: np.ndarray) -> float:
        """h^4 sum (I * g) h, given the convolution already evaluated."""
        return float(np.dot(conv.ravel(), other.ravel())) * self.grid.cell_volume


def convolve(kernel: RieszKernel, g: Field) -> Field:
    """I_mu * g on the grid nodes (free space, no periodic images)."""
    if g.grid != kernel.grid:
        raise ValueError("field and kernel grids differ")
    return Field._wrap(g.grid, kernel.convolve_array(g.data))


def choquard_pairing(kernel: RieszKernel, g: Field, h: Field) -> float:
    """int (I_mu * g) h dx."""
    if h.grid != kernel.grid:
        raise ValueError("field and kernel grids differ")
    return kernel.pairing_array(convolve(kernel, g).data, h.data)


def direct_convolve(kernel: RieszKernel, g: Field) -> Field:
    """Reference O(N^8) double sum with the same discrete kernel."""
    grid = kernel.grid
    if grid.n > DIRECT_MAX_N:
        raise GridTooLargeError(
            f"direct convolution is limited to N <= {DIRECT_MAX_N}, got N={grid.n}"
        )
    if g.grid != grid:
        raise ValueError("field and kernel grids differ")
    pts = np.stack(np.meshgrid(*([grid.x] * DIM), indexing="ij"), axis=-1).reshape(-1, DIM)
    vals = g.data.ravel()
    out = np.empty(len(pts))
    chunk = 512
    for start in range(0, len(pts), chunk):
        block = pts[start : start + chunk]
        kern = kernel.value(block[:, None, :] - pts[None, :, :])
        out[start : start + chunk] = kern @ vals
    return Field._wrap(grid, out.reshape(grid.shape) * grid.cell_volume)
