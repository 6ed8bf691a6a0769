"""Modified Adams functions, their norms, and the mountain-pass scan g_n(t).

The profile (with Lg = log n and the cutoff phi of :class:`CutoffSpec`) is

    sqrt(Lg / 8 pi^2) + (1 - n^2 r^2) / sqrt(32 pi^2 Lg)   for r <= 1/n,
    -log r / sqrt(8 pi^2 Lg)                              for 1/n < r <= 1,
    -phi(r) log r / sqrt(8 pi^2 Lg)                       for 1 < r < 2,

and zero beyond r = 2.  Radial integrals use |S^3| = 2 pi^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import hyp2f1

from .errors import BoxTooSmallError
from .grid import Field, Grid, mass_sq

__all__ = [
    "CutoffSpec",
    "AdamsProfile",
    "MountainScan",
    "cutoff_moments",
    "adams_norms",
    "normalized_adams",
    "c_mu",
    "spherical_mean_kernel",
    "radial_rule",
    "radial_pairing",
    "RadialPairing",
    "mountain_scan",
    "CSV_COLUMNS",
]

SPHERE = 2.0 * math.pi**2
CSV_COLUMNS = (
    "n", "M1", "M2", "M3", "l2_closed", "l2_quad", "grad_closed", "grad_quad",
    "lap_closed", "lap_quad", "t_n", "gmax", "bound",
)


def _q(x):
    """e^{-1/x} for x > 0 with its first two derivatives; zero otherwise."""
    x = np.asarray(x, dtype=float)
    pos = x > 1e-3  # e^{-1000} underflows anyway
    xs = np.where(pos, x, 1.0)
    q = np.where(pos, np.exp(-1.0 / xs), 0.0)
    q1 = q / xs**2
    q2 = q * (1.0 / xs**4 - 2.0 / xs**3)
    return q, np.where(pos, q1, 0.0), np.where(pos, q2, 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    """phi = q(2 - t) / (q(2 - t) + q(t - 1)), q(x) = e^{-1/x} 1_{x>0}.

    ``kind="one"`` replaces phi by 1 on [1, 2] (a test-only cutoff).
    """

    kind: str = "mollifier"
    epsabs: float = 1e-13

    def __post_init__(self):
        if self.kind not in ("mollifier", "one"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")

    def derivatives(self, t):
        """(phi, phi', phi'') on [0, inf)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "one":
            one = np.where(t < 2, 1.0, 0.0) if t.ndim else float(t < 2)
            return one, np.zeros_like(t), np.zeros_like(t)
        a, a1, a2 = _q(2.0 - t)
        b, b1, b2 = _q(t - 1.0)
        # d/dt of q(2 - t) flips the sign of odd derivatives
        a1 = -a1
        s, s1, s2 = a + b, a1 + b1, a2 + b2
        s = np.where(s > 0, s, 1.0)
        phi = a / s
        d1 = (a1 * s - a * s1) / s**2
        d2 = (a2 * s - a * s2) / s**2 - 2.0 * s1 * d1 / s
        return phi, d1, d2

    def __call__(self, t):
        return self.derivatives(t)[0]


def _quad(func, a, b, eps):
    val, _ = quad(func, a, b, epsabs=eps, epsrel=1e-13, limit=400)
    return val


def cutoff_moments(cutoff: CutoffSpec = CutoffSpec(), *, corrected=False):
    """(M1, M2, M3) as displayed; ``corrected=True`` also returns the Delta moment.

    The displayed M3 integrand is (phi'' log r + (-phi + 3 phi' + 2 r phi'
    + 3 r phi' log r)/r^2) r^3.  The Laplacian of phi log r in R^4 is
    phi'' log r + (2 phi + 2 r phi' + 3 r phi' log r)/r^2, and the norm needs
    its square; the corrected moment integrates that square.
    """

    def parts(r):
        p, d1, d2 = (float(v) for v in cutoff.derivatives(r))
        return p, d1, d2, math.log(r)

    def m1(r):
        p, _, _, lg = parts(r)
        return p * p * r**3 * lg * lg

    def m2(r):
        p, d1, _, lg = parts(r)
        return (d1 * lg + p / r) ** 2 * r**3

    def m3(r):
        p, d1, d2, lg = parts(r)
        return (d2 * lg + (-p + 3 * d1 + 2 * r * d1 + 3 * r * d1 * lg) / r**2) * r**3

    def m3c(r):
        p, d1, d2, lg = parts(r)
        return (d2 * lg + (2 * p + 2 * r * d1 + 3 * r * d1 * lg) / r**2) ** 2 * r**3

    eps = cutoff.epsabs
    out = tuple(_quad(f, 1.0, 2.0, eps) for f in (m1, m2, m3))
    if corrected:
        return out + (_quad(m3c, 1.0, 2.0, eps),)
    return out


@dataclass
class AdamsProfile:
    n: float
    cutoff: CutoffSpec
    M1: float
    M2: float
    M3: float
    M3_corrected: float
    closed: tuple
    quadrature: tuple
    matching: dict = field(default_factory=dict)

    @property
    def breakpoints(self):
        return (1.0 / self.n, 1.0, 2.0)

    @property
    def log_n(self):
        return math.log(self.n)

    def closed_corrected_lap(self) -> float:
        return 1.0 + (4.0 + self.M3_corrected) / (4.0 * self.log_n)

    def relative_gaps(self) -> dict:
        return {
            k: abs(q / c - 1.0)
            for k, c, q in zip(("l2", "grad", "lap"), self.closed, self.quadrature)
        }

    # the profile and its radial derivatives

    def value(self, r):
        return _profile(self.n, self.cutoff, r)[0]

    def derivative(self, r):
        return _profile(self.n, self.cutoff, r)[1]

    def laplacian(self, r):
        w, w1, w2 = _profile(self.n, self.cutoff, r)
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lap = w2 + 3.0 * np.where(r > 0, w1 / np.where(r > 0, r, 1.0), 0.0)
        # at r = 0 the inner quadratic has Laplacian 8 w'' / 2
        return np.where(r > 0, lap, 4.0 * w2)


def _profile(n, cutoff, r):
    """(w, w', w'') of the unnormalized profile at radii r."""
    r = np.asarray(r, dtype=float)
    lg = math.log(n)
    a = 1.0 / math.sqrt(8 * math.pi**2 * lg)
    b = 1.0 / math.sqrt(32 * math.pi**2 * lg)
    inner = r <= 1.0 / n
    middle = (r > 1.0 / n) & (r <= 1.0)
    outer = (r > 1.0) & (r < 2.0)
    rs = np.where(r > 0, r, 1.0)
    lr = np.log(rs)
    phi, d1, d2 = cutoff.derivatives(np.where(outer, r, 1.5))
    w = np.select(
        [inner, middle, outer],
        [math.sqrt(lg / (8 * math.pi**2)) + (1 - n * n * r * r) * b, -lr * a, -phi * lr * a],
        0.0,
    )
    w1 = np.select(
        [inner, middle, outer],
        [-2 * n * n * r * b, -a / rs, -(d1 * lr + phi / rs) * a],
        0.0,
    )
    w2 = np.select(
        [inner, middle, outer],
        [-2 * n * n * b * np.ones_like(r), a / rs**2, -(d2 * lr + 2 * d1 / rs - phi / rs**2) * a],
        0.0,
    )
    return w, w1, w2


def _closed_norms(n, m1, m2, m3):
    lg = math.log(n)
    l2 = (1 + 32 * m1) / (128 * lg) - 1 / (96 * n**4) - 1 / (192 * n**4 * lg)
    grad = (1 + 2 * m2) / (8 * lg) - 1 / (12 * n**2 * lg)
    lap = 1 + (4 + m3) / (4 * lg)
    return l2, grad, lap


def _quadrature_norms(n, cutoff):
    eps = 1e-15
    panels = ((0.0, 1.0 / n), (1.0 / n, 1.0), (1.0, 2.0))

    def integrate(func):
        total = 0.0
        for lo, hi in panels:
            if hi - lo > 0:
                total += _quad(lambda r: float(func(r)) * r**3, lo, hi, eps)
        return SPHERE * total

    def w(r):
        return _profile(n, cutoff, r)[0] ** 2

    def dw(r):
        return _profile(n, cutoff, r)[1] ** 2

    def lap(r):
        v, v1, v2 = _profile(n, cutoff, r)
        return (v2 + 3 * v1 / r) ** 2 if r > 0 else (4 * v2) ** 2

    return integrate(w), integrate(dw), integrate(lap)


def adams_norms(n, cutoff: CutoffSpec = CutoffSpec()) -> AdamsProfile:
    """Closed-form and radial-quadrature norms of the modified Adams function."""
    if not n >= 2:
        raise ValueError(f"n must be at least 2, got {n}")
    m1, m2, m3, m3c = cutoff_moments(cutoff, corrected=True)
    closed = _closed_norms(n, m1, m2, m3)
    quadv = _quadrature_norms(n, cutoff)
    lg = math.log(n)
    r0 = 1.0 / n
    matching = {
        "inner_value": math.sqrt(lg / (8 * math.pi**2)) + (1 - n * n * r0 * r0) / math.sqrt(32 * math.pi**2 * lg),
        "outer_value": -math.log(r0) / math.sqrt(8 * math.pi**2 * lg),
        "inner_slope": -2 * n * n * r0 / math.sqrt(32 * math.pi**2 * lg),
        "outer_slope": -1.0 / (r0 * math.sqrt(8 * math.pi**2 * lg)),
    }
    return AdamsProfile(n, cutoff, m1, m2, m3, m3c, closed, quadv, matching)


def normalized_adams(grid: Grid, n, c, cutoff: CutoffSpec = CutoffSpec()) -> Field:
    """c w_n / ||w_n|| sampled on the grid, normalized by the grid mass."""
    if 0.5 * grid.length < 2.0 + grid.h:
        raise BoxTooSmallError(
            f"the profile is supported in |x| <= 2 but the box half-width is {0.5 * grid.length:g}"
        )
    raw = grid.radial(lambda r: _profile(n, cutoff, r)[0])
    return Field._wrap(grid, raw.data * (c / math.sqrt(mass_sq(raw))))


def c_mu(mu) -> float:
    """24 pi^4 / ((4 - mu)(5 - mu)(6 - mu)(7 - mu)(8 - mu))."""
    if not 0 < mu < 4:
        raise ValueError(f"mu must lie in (0, 4), got {mu}")
    return 24 * math.pi**4 / ((4 - mu) * (5 - mu) * (6 - mu) * (7 - mu) * (8 - mu))


def spherical_mean_kernel(r, rho, mu):
    """Mean of |x - y|^-mu over |x| = r, |y| = rho in R^4."""
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    big = np.maximum(r, rho)
    small = np.minimum(r, rho)
    z = (small / big) ** 2
    if mu == 2:
        return big**-2.0 * np.ones_like(z)
    return big**-mu * hyp2f1(0.5 * mu, 0.5 * mu - 1.0, 2.0, z)


def radial_rule(n, *, nodes=16, log_width=0.25):
    """Composite Gauss rule for int_0^2 g(r) r^3 dr with breakpoints 1/n, 1.

    Panels are linear on [0, 1/n] and [1, 2] and uniform in log r between.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    rs, ws = [], []

    def linear(lo, hi, pieces):
        edges = np.linspace(lo, hi, pieces + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            r = a + 0.5 * (x + 1) * (b - a)
            rs.append(r)
            ws.append(0.5 * (b - a) * w * r**3)

    linear(0.0, 1.0 / n, 2)
    lo, hi = -math.log(n), 0.0
    pieces = max(1, math.ceil((hi - lo) / log_width))
    edges = np.linspace(lo, hi, pieces + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        y = a + 0.5 * (x + 1) * (b - a)
        r = np.exp(y)
        rs.append(r)
        ws.append(0.5 * (b - a) * w * r**4)
    linear(1.0, 2.0, 4)
    return np.concatenate(rs), np.concatenate(ws)


def _ball_potential(r, mu):
    """int_0^2 K(r, rho) rho^3 d rho, the spherical-mean kernel against the ball."""
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        f = lambda rho: float(spherical_mean_kernel(ri, rho, mu)) * rho**3
        out[i] = _quad(f, 0.0, ri, 1e-14) + _quad(f, ri, 2.0, 1e-14)
    return out


class RadialPairing:
    """Precomputed quadrature for int int F(x) F(y) |x - y|^-mu dx dy, F radial in |x| < 2.

    The diagonal singularity of the spherical-mean kernel is subtracted:
    sum_i w_i F_i [sum_j w_j (F_j - F_i) K_ij + F_i int_0^2 K(r_i, rho) rho^3].
    """

    def __init__(self, r, weights, mu):
        self.r = r
        self.weights = weights
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = spherical_mean_kernel(r[:, None], r[None, :], mu)
        np.fill_diagonal(kern, 0.0)
        self.kern = kern
        self.row = kern @ weights
        self.ball = _ball_potential(r, mu)

    def __call__(self, values) -> float:
        fw = values * self.weights
        coupled = self.kern @ fw - values * self.row
        total = float(fw @ coupled) + float(np.sum(fw * values * self.ball))
        return SPHERE**2 * total


def radial_pairing(values, r, weights, mu) -> float:
    return RadialPairing(r, weights, mu)(values)


@dataclass
class MountainScan:
    n: float
    t_n: float
    gmax: float
    bound: float
    bound_ok: bool
    t_admissible: float
    t: np.ndarray
    g: np.ndarray
    sign_changes: int

    def row(self, profile: AdamsProfile | None = None) -> dict:
        out = {"n": self.n, "t_n": self.t_n, "gmax": self.gmax, "bound": self.bound_ok}
        if profile is not None:
            out.update(
                M1=profile.M1, M2=profile.M2, M3=profile.M3,
                l2_closed=profile.closed[0], l2_quad=profile.quadrature[0],
                grad_closed=profile.closed[1], grad_quad=profile.quadrature[1],
                lap_closed=profile.closed[2], lap_quad=profile.quadrature[2],
            )
        return out


def mountain_scan(cfg, n, t_grid=None, *, cutoff: CutoffSpec = CutoffSpec(), nodes=16) -> MountainScan:
    """max_t g_n(t) with g_n(t) = J(t w_n(t^{1/2} x)) on the radial rule.

    w_n is normalized to mass c by the same radial rule.  The t range is cut
    at the overflow guard t max w_n <= T_max of the nonlinearity.
    """
    mu, beta, c, nl = cfg.mu, cfg.beta, cfg.c, cfg.nl
    r, wts = radial_rule(n, nodes=nodes)
    w, w1, w2 = _profile(n, cutoff, r)
    lap = w2 + 3 * w1 / r
    norm = math.sqrt(SPHERE * float(np.sum(w * w * wts)))
    scale = c / norm
    w, w1, lap = w * scale, w1 * scale, lap * scale
    # supplement the kinked Laplacian norm with the exact radial quadrature
    prof = _quadrature_norms(n, cutoff)
    a_norm = prof[2] * scale**2
    b_norm = prof[1] * scale**2
    pairing = RadialPairing(r, wts, mu)
    peak = float(np.max(np.abs(w)))
    t_adm = nl.t_max / peak if math.isfinite(nl.t_max) else math.inf

    def g(t):
        v = t * w
        F = nl.F(v)
        fmax = float(np.max(np.abs(F)))
        local = 0.5 * t * t * a_norm + 0.5 * beta * t * b_norm
        if fmax == 0:
            return local
        d_scaled = pairing(F / fmax)
        log_term = (0.5 * mu - 4) * math.log(t) + 2 * math.log(fmax) + math.log(0.5 * d_scaled)
        if log_term > 700:
            return -math.inf
        return local - math.exp(log_term)

    if t_grid is None:
        top = t_adm
        if not math.isfinite(top):
            top = 1.0
            for _ in range(60):
                if g(top) < 0:
                    break
                top *= 2
        t_grid = np.geomspace(1e-3 * top, top, 200)
    t_grid = np.asarray(t_grid, dtype=float)
    t_grid = t_grid[(t_grid > 0) & (t_grid <= t_adm)]
    if t_grid.size < 3:
        raise ValueError(f"fewer than three admissible t values below {t_adm:.6g}")
    vals = np.array([g(t) for t in t_grid])
    i = int(np.argmax(vals))
    t_n, gmax = float(t_grid[i]), float(vals[i])
    if 0 < i < t_grid.size - 1:
        res = minimize_scalar(
            lambda t: -g(t),
            bracket=(t_grid[i - 1], t_grid[i], t_grid[i + 1]),
            method="golden",
            tol=1e-10,
        )
        if -res.fun >= gmax:
            t_n, gmax = float(res.x), float(-res.fun)
    finite = vals[np.isfinite(vals)]
    steps = np.sign(np.diff(finite))
    steps = steps[steps != 0]
    changes = int(np.count_nonzero(np.diff(steps)))
    bound = (8 - mu) / 16
    return MountainScan(n, t_n, gmax, bound, gmax < bound, t_adm, t_grid, vals, changes)
