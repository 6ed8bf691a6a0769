"""Regularized lattice sums over Z^4 used to correct singular quadrature.

``epstein_zeta(s)`` is the analytic continuation of sum_{j != 0} |j|^-s and
``quartic_zeta(s)`` that of sum_{j != 0} Q(j) |j|^-s with the cubic harmonic
Q(j) = sum_i j_i^4 - |j|^4 / 2.  Both use the Ewald (theta-function) split,
which converges like exp(-pi |j|^2).
"""

from functools import lru_cache

import mpmath as mp
import numpy as np

DIM = 4
_SHELL_MAX = 20


@lru_cache(maxsize=1)
def _shells():
    r = np.arange(-5, 6)
    pts = np.stack(np.meshgrid(r, r, r, r, indexing="ij")).reshape(DIM, -1)
    n2 = np.sum(pts**2, axis=0)
    keep = (n2 > 0) & (n2 <= _SHELL_MAX)
    pts, n2 = pts[:, keep], n2[keep]
    quartic = np.sum(pts**4, axis=0) - 0.5 * n2.astype(float) ** 2
    out = []
    for v in np.unique(n2):
        sel = n2 == v
        out.append((int(v), int(sel.sum()), float(quartic[sel].sum())))
    return tuple(out)


def _is_nonpositive_even(s):
    return s <= 0 and float(s) == int(s) and int(s) % 2 == 0


def epstein_zeta(s: float) -> float:
    s = float(s)
    if s == DIM:
        raise ValueError("Epstein zeta of Z^4 has a pole at s = 4")
    if s == 0:
        return -1.0
    if _is_nonpositive_even(s):
        return 0.0
    s_mp = mp.mpf(s)
    total = mp.mpf(2) / (s_mp - DIM) - mp.mpf(2) / s_mp
    for v, count, _ in _shells():
        x = mp.pi * v
        total += count * (
            x ** (-s_mp / 2) * mp.gammainc(s_mp / 2, x)
            + x ** (-(DIM - s_mp) / 2) * mp.gammainc((DIM - s_mp) / 2, x)
        )
    return float(total * mp.pi ** (s_mp / 2) / mp.gamma(s_mp / 2))


def quartic_zeta(s: float) -> float:
    s = float(s)
    if _is_nonpositive_even(s):
        return 0.0
    s_mp = mp.mpf(s)
    dual = DIM + 8 - s_mp
    total = mp.mpf(0)
    for v, _, weight in _shells():
        if weight == 0:
            continue
        x = mp.pi * v
        total += weight * (
            x ** (-s_mp / 2) * mp.gammainc(s_mp / 2, x) + x ** (-dual / 2) * mp.gammainc(dual / 2, x)
        )
    return float(total * mp.pi ** (s_mp / 2) / mp.gamma(s_mp / 2))


@lru_cache(maxsize=32)
def corrected_weights(mu: float) -> dict:
    """Dimensionless kernel corrections c(j) for the punctured trapezoidal rule.

    With weights h^-mu (|j|^-mu + c(j)) the rule integrates |x|^-mu g(x)
    to O(h^(10 - mu)) for smooth g.  Keys are offset tuples.
    """
    z0 = epstein_zeta(mu)
    z2 = epstein_zeta(mu - 2)
    z4 = epstein_zeta(mu - 4)
    zq = quartic_zeta(mu)
    m4 = (zq + 0.5 * z4) / 4.0
    m22 = (z4 - 4.0 * m4) / 12.0

    corr: dict = {}

    def add(offset, value):
        corr[offset] = corr.get(offset, 0.0) + value

    origin = (0,) * DIM

    def unit(i, a):
        e = [0] * DIM
        e[i] = a
        return tuple(e)

    add(origin, -z0)
    # second moment: Laplacian stencil
    lap = -z2 / 8.0
    for i in range(DIM):
        add(unit(i, 1), lap)
        add(unit(i, -1), lap)
    add(origin, -2 * DIM * lap)
    # fourth moments, minus the O(h^2) error of the Laplacian stencil
    a4 = -(m4 / 24.0 - z2 / 96.0)
    for i in range(DIM):
        for a, c in ((2, 1.0), (1, -4.0), (0, 6.0), (-1, -4.0), (-2, 1.0)):
            add(unit(i, a) if a else origin, a4 * c)
    a22 = -(6.0 * m22 / 24.0)
    stencil = ((-1, 1.0), (0, -2.0), (1, 1.0))
    for i in range(DIM):
        for k in range(i + 1, DIM):
            for a, ca in stencil:
                for b, cb in stencil:
                    e = [0] * DIM
                    e[i] = a
                    e[k] = b
                    add(tuple(e), a22 * ca * cb)
    return corr
