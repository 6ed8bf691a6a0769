"""Energy, Pohozaev functional, fiber map and the reduced functional.

Writing H(u, s)(x) = e^{2s} u(e^s x), the change of variables y = e^s x turns
every fiber quantity into an amplitude scaling of u on the original grid:

    ||Delta H||^2 = e^{4s} A,   ||grad H||^2 = e^{2s} B,
    int (I * F(H)) F(H) = e^{(mu - 8)s} D(e^{2s} u),

so no spatial resampling is needed along a fiber.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import FiberError, OverflowGuardError, ZeroFieldError
from .grid import Field, Grid, apply_operator, inner, mass_sq, seminorms
from .nonlin import Nonlinearity
from .riesz import RieszKernel

__all__ = [
    "ProblemConfig",
    "FiberDiagnostics",
    "FiberMap",
    "energy",
    "energy_parts",
    "euler_gradient",
    "pohozaev",
    "lagrange_multiplier",
    "fiber_value",
    "fiber_derivative",
    "fiber_second",
    "fiber_maximize",
    "psi_scan",
    "reduced_energy",
    "reduced_gradient",
    "reduced_state",
    "alpha_surface",
]

S_FLOOR = -30.0
SCAN_POINTS = 64


@dataclass(frozen=True)
class ProblemConfig:
    beta: float
    mu: float
    c: float
    nl: Nonlinearity | None
    kernel: RieszKernel

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if not 0 < self.mu < 4:
            raise ValueError(f"mu must lie in (0, 4), got {self.mu}")
        if not self.c > 0:
            raise ValueError(f"mass c must be positive, got {self.c}")
        if self.kernel.mu != float(self.mu):
            raise ValueError("kernel exponent differs from mu")

    @classmethod
    def create(cls, grid: Grid, *, mu, beta=0.0, c=1.0, nl=None, quadrature="corrected"):
        return cls(float(beta), float(mu), float(c), nl, RieszKernel(grid, mu, quadrature))

    @property
    def grid(self) -> Grid:
        return self.kernel.grid

    @property
    def degree(self):
        return None if self.nl is None else self.nl.homogeneous_degree

    def with_(self, **changes) -> "ProblemConfig":
        vals = {"beta": self.beta, "mu": self.mu, "c": self.c, "nl": self.nl, "kernel": self.kernel}
        vals.update(changes)
        return ProblemConfig(**vals)


@dataclass
class _Terms:
    """Nonlocal pairings at one amplitude-scaled field v."""

    D: float
    E: float
    Q: float = math.nan
    R: float = math.nan
    conv: np.ndarray | None = None


def _nonlocal(cfg: ProblemConfig, v: np.ndarray, *, second=False, keep_conv=False) -> _Terms:
    if cfg.nl is None:
        zero = np.zeros_like(v) if keep_conv else None
        return _Terms(0.0, 0.0, 0.0, 0.0, zero)
    k = cfg.kernel
    nl = cfg.nl
    with np.errstate(over="ignore", invalid="ignore"):
        F = nl.F(v)
        f = nl.f(v)
        conv = k.convolve_array(F)
        fv = f * v
        t = _Terms(k.pairing_array(conv, F), k.pairing_array(conv, fv))
        if second:
            t.Q = k.pairing_array(k.convolve_array(fv), fv)
            t.R = k.pairing_array(conv, nl.fprime(v) * v * v)
    if not all(math.isfinite(x) for x in (t.D, t.E, t.Q if second else 0.0, t.R if second else 0.0)):
        peak = float(np.max(np.abs(v)))
        raise OverflowGuardError(
            f"nonlocal pairings overflow at max|u| = {peak:.6g}", limit=nl.t_max, value=peak
        )
    if keep_conv:
        t.conv = conv
    return t


def energy_parts(cfg: ProblemConfig, u: Field) -> dict:
    """A, B, D, E and the mass of u."""
    a, b = seminorms(u)
    t = _nonlocal(cfg, u.data)
    return {"A": a, "B": b, "D": t.D, "E": t.E, "mass": mass_sq(u)}


def energy(cfg: ProblemConfig, u: Field) -> float:
    a, b = seminorms(u)
    d = _nonlocal(cfg, u.data).D
    return 0.5 * a + 0.5 * cfg.beta * b - 0.5 * d


def euler_gradient(cfg: ProblemConfig, u: Field) -> Field:
    """L^2 representative Delta^2 u - beta Delta u - (I * F(u)) f(u)."""
    lin = apply_operator(u, "biharmonic_plus_beta", cfg.beta)
    if cfg.nl is None:
        return lin
    t = _nonlocal(cfg, u.data, keep_conv=True)
    return Field._wrap(u.grid, lin.data - t.conv * cfg.nl.f(u.data))


def _pohozaev_from(cfg, a, b, d, e):
    return 2.0 * a + cfg.beta * b + 0.5 * (8.0 - cfg.mu) * d - 2.0 * e


def pohozaev(cfg: ProblemConfig, u: Field) -> float:
    p = energy_parts(cfg, u)
    return _pohozaev_from(cfg, p["A"], p["B"], p["D"], p["E"])


def lagrange_multiplier(cfg: ProblemConfig, u: Field) -> tuple[float, float]:
    """(lambda_direct, lambda_pohozaev); they coincide when P(u) = 0."""
    p = energy_parts(cfg, u)
    m = p["mass"]
    if m == 0:
        raise ZeroFieldError("the Lagrange multiplier is undefined for the zero field")
    direct = (p["A"] + cfg.beta * p["B"] - p["E"]) / m
    poho = (0.5 * cfg.beta * p["B"] - 0.25 * (8.0 - cfg.mu) * p["D"]) / m
    return direct, poho


@dataclass
class FiberDiagnostics:
    s_samples: list
    g_values: list
    gprime_values: list
    s_u: float
    g_at_su: float
    gprime_at_su: float
    curvature_at_su: float
    multimodal_flag: bool
    sign_changes: int = 1
    s_max: float = math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        d["s_max"] = None if math.isinf(self.s_max) else self.s_max
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class FiberMap:
    """g_u(s) = J(H(u, s)) and its s-derivatives, evaluated by amplitude scaling.

    For a homogeneous nonlinearity of degree p every nonlocal pairing is a
    power of e^{2s} times its value at s = 0, so one convolution serves the
    whole fiber.  Otherwise values are cached per s.
    """

    def __init__(self, cfg: ProblemConfig, u: Field):
        self.cfg = cfg
        self.u = u
        self.mass = mass_sq(u)
        if self.mass == 0:
            raise ZeroFieldError("the fiber of the zero field is trivial")
        self.A, self.B = seminorms(u)
        self.peak = u.max_abs()
        nl = cfg.nl
        self.s_max = math.inf
        if nl is not None and math.isfinite(nl.t_max):
            self.s_max = 0.5 * math.log(nl.t_max / self.peak)
        self.degree = cfg.degree
        self._base = None
        self._cache: dict = {}
        self.samples: dict = {}

    def _guard(self, s):
        if s > self.s_max:
            raise OverflowGuardError(
                f"fiber parameter s={s:.6g} exceeds the overflow limit s <= {self.s_max:.6g}",
                limit=self.cfg.nl.t_max,
                value=math.exp(2 * s) * self.peak,
                s_range=(-math.inf, self.s_max),
            )

    def terms(self, s: float, *, second=False) -> _Terms:
        """Nonlocal pairings D, E (and Q, R) of e^{2s} u on the grid."""
        s = float(s)
        self._guard(s)
        cfg = self.cfg
        if self.degree is not None:
            if self._base is None:
                self._base = _nonlocal(cfg, self.u.data, keep_conv=True)
            p = self.degree
            d = math.exp(4.0 * p * s) * self._base.D if self._base.D else 0.0
            return _Terms(d, p * d, p * p * d, (p - 1) * p * d)
        hit = self._cache.get(s)
        if hit is None or (second and math.isnan(hit.Q)):
            hit = _nonlocal(cfg, math.exp(2.0 * s) * self.u.data, second=second)
            self._cache[s] = hit
        return hit

    def _prefactor(self, s):
        return math.exp((self.cfg.mu - 8.0) * s)

    def value(self, s: float) -> float:
        t = self.terms(s)
        return (
            0.5 * math.exp(4 * s) * self.A
            + 0.5 * self.cfg.beta * math.exp(2 * s) * self.B
            - 0.5 * self._prefactor(s) * t.D
        )

    def derivative(self, s: float) -> float:
        """g_u'(s) = P(H(u, s))."""
        t = self.terms(s)
        e = self._prefactor(s)
        val = _pohozaev_from(self.cfg, math.exp(4 * s) * self.A, math.exp(2 * s) * self.B, e * t.D, e * t.E)
        self.samples[float(s)] = val
        return val

    def second(self, s: float) -> float:
        t = self.terms(s, second=True)
        e = self._prefactor(s)
        mu = self.cfg.mu
        return (
            8 * math.exp(4 * s) * self.A
            + 2 * self.cfg.beta * math.exp(2 * s) * self.B
            - 0.5 * (8 - mu) ** 2 * e * t.D
            + (28 - 4 * mu) * e * t.E
            - 4 * e * t.Q
            - 4 * e * t.R
        )

    def psi(self, s: float) -> float:
        """Pairing of F(e^{2s}u) and Fbar(e^{2s}u), each divided by e^{2s(3 - mu/4)}."""
        cfg = self.cfg
        if cfg.nl is None:
            return 0.0
        s = float(s)
        self._guard(s)
        a = math.exp(2 * s)
        kappa = 3.0 - 0.25 * cfg.mu
        v = a * self.u.data
        F = cfg.nl.F(v)
        Fb = cfg.nl.Fbar(v, cfg.mu)
        scale = a ** (-2 * kappa)
        return cfg.kernel.pairing_array(cfg.kernel.convolve_array(F), Fb) * scale

    # root finding

    def _bracket(self, start=0.0):
        s0 = float(start)
        d0 = self.derivative(s0)
        if d0 == 0:
            return s0, s0
        step = 0.25
        if d0 > 0:
            lo = s0
            while True:
                hi = min(s0 + step, self.s_max)
                if hi <= lo:
                    raise FiberError(f"g' stays positive up to the overflow limit s={self.s_max:.6g}")
                try:
                    if self.derivative(hi) <= 0:
                        return lo, hi
                except OverflowGuardError:
                    # the pairings overflow before g' turns; pull the limit in
                    self.s_max = lo + 0.5 * (hi - lo)
                    if hi - lo < 1e-6:
                        raise FiberError(
                            f"g' stays positive up to the overflow limit s={self.s_max:.6g}"
                        ) from None
                    step = self.s_max - s0
                    continue
                lo = hi
                step *= 2
        hi = s0
        while True:
            lo = max(s0 - step, S_FLOOR)
            if self.derivative(lo) >= 0:
                return lo, hi
            if lo <= S_FLOOR:
                raise FiberError(f"g' stays negative down to s={S_FLOOR}")
            hi = lo
            step *= 2

    def maximize(self, *, start=0.0, scan=None, span=6.0) -> FiberDiagnostics:
        lo, hi = self._bracket(start)
        if lo == hi:
            s_u = lo
        else:
            s_u = brentq(self.derivative, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        gp = self.derivative(s_u)
        g = self.value(s_u)
        curv = self.second(s_u)
        if scan is None:
            scan = self.degree is not None or self.cfg.nl is None
        changes = 1
        if scan:
            top = min(s_u + span, self.s_max)
            grid = np.linspace(max(s_u - span, S_FLOOR), top, SCAN_POINTS)
            vals = []
            for s in grid:
                try:
                    vals.append(self.derivative(s))
                except OverflowGuardError:
                    break
            vals = np.array(vals)
            signs = np.sign(vals[vals != 0])
            changes = int(np.count_nonzero(np.diff(signs)))
        order = sorted(self.samples)
        return FiberDiagnostics(
            s_samples=order,
            g_values=[self.value(s) for s in order],
            gprime_values=[self.samples[s] for s in order],
            s_u=float(s_u),
            g_at_su=float(g),
            gprime_at_su=float(gp),
            curvature_at_su=float(curv),
            multimodal_flag=changes > 1,
            sign_changes=changes,
            s_max=self.s_max,
        )


def fiber_value(cfg, u, s) -> float:
    return FiberMap(cfg, u).value(s)


def fiber_derivative(cfg, u, s) -> float:
    return FiberMap(cfg, u).derivative(s)


def fiber_second(cfg, u, s) -> float:
    return FiberMap(cfg, u).second(s)


def fiber_maximize(cfg, u, **kw) -> FiberDiagnostics:
    return FiberMap(cfg, u).maximize(**kw)


def psi_scan(cfg, u, s_list) -> list:
    if mass_sq(u) == 0:
        return [0.0 for _ in s_list]
    fm = FiberMap(cfg, u)
    return [fm.psi(s) for s in s_list]


@dataclass
class ReducedState:
    value: float
    gradient: Field
    raw_gradient: Field
    s_u: float
    fiber: FiberDiagnostics
    A: float
    B: float
    D: float
    multiplier: float = field(default=0.0)


def reduced_state(cfg: ProblemConfig, u: Field, *, shift=0.0, scan=False, start=0.0) -> ReducedState:
    """I(H(u, shift)) together with its tangent gradient at u.

    ``shift`` composes with the scaling without resampling: the fiber of
    H(u, shift) is the fiber of u translated by ``shift``.
    """
    fm = FiberMap(cfg, u)
    diag = fm.maximize(start=start + shift, scan=scan)
    s = diag.s_u
    a = math.exp(2 * s)
    g = u.grid
    lin = g.rfft(u.data)
    k2 = g.k2
    lin *= math.exp(4 * s) * k2 * k2 + cfg.beta * math.exp(2 * s) * k2
    G = g.irfft(lin)
    if cfg.nl is not None:
        if fm.degree is not None:
            p = fm.degree
            base = fm._base
            # conv(F(a u)) f(a u) a = a^{2p} conv(F(u)) f(u)
            G -= fm._prefactor(s) * a ** (2 * p) * base.conv * cfg.nl.f(u.data)
        else:
            t = _nonlocal(cfg, a * u.data, keep_conv=True)
            G -= fm._prefactor(s) * a * t.conv * cfg.nl.f(a * u.data)
    raw = Field._wrap(g, G)
    m = fm.mass
    coef = inner(raw, u) / m
    tangent = Field._wrap(g, G - coef * u.data)
    t = fm.terms(s)
    return ReducedState(
        value=diag.g_at_su,
        gradient=tangent,
        raw_gradient=raw,
        s_u=s - shift,
        fiber=diag,
        A=fm.A,
        B=fm.B,
        D=t.D,
        multiplier=coef,
    )


def reduced_energy(cfg, u, *, shift=0.0) -> float:
    """I(u) = max_s J(H(u, s)); with ``shift``, I(H(u, shift))."""
    fm = FiberMap(cfg, u)
    return fm.maximize(start=shift, scan=False).g_at_su


def reduced_gradient(cfg, u) -> Field:
    return reduced_state(cfg, u).gradient


def alpha_surface(cfg, u, t_list, s_list) -> dict:
    """alpha(t, s) = J(H(t u, s)) and d alpha / dt = <J'(H), H>/t on a (t, s) table."""
    t_arr = np.asarray(t_list, dtype=float)
    s_arr = np.asarray(s_list, dtype=float)
    alpha = np.empty((t_arr.size, s_arr.size))
    dadt = np.empty_like(alpha)
    a0, b0 = seminorms(u)
    for i, t in enumerate(t_arr):
        fm = FiberMap(cfg, Field._wrap(u.grid, t * u.data))
        for j, s in enumerate(s_arr):
            alpha[i, j] = fm.value(s)
            e = fm._prefactor(s)
            deriv = (
                math.exp(4 * s) * t * t * a0
                + cfg.beta * math.exp(2 * s) * t * t * b0
                - e * fm.terms(s).E
            )
            dadt[i, j] = deriv / t
    return {"t": t_arr, "s": s_arr, "alpha": alpha, "dalpha_dt": dadt}
