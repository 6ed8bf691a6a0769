"""Nonlinearities f(t) = |t|^(p-2) t exp(alpha0 t^2) and their primitives.

``alpha0 = 0`` is the pure power.  The critical Adams rate is 32 pi^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

import numpy as np

from .errors import ConfigError, OverflowGuardError

__all__ = [
    "CRITICAL_ALPHA",
    "EXP_BUDGET",
    "Nonlinearity",
    "ConditionParams",
    "ConditionResult",
    "ConditionReport",
    "check_conditions",
    "parse_nonlinearity",
]

CRITICAL_ALPHA = 32.0 * np.pi**2
EXP_BUDGET = 700.0
SERIES_LIMIT = 30.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_TAIL_PANELS = (0.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0)


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    p: float
    alpha0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("power", "expcrit"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if not self.p > 2:
            raise ValueError(f"the exponent p must exceed 2, got {self.p}")
        if self.kind == "power" and self.alpha0 != 0:
            raise ValueError("a pure power has alpha0 = 0")
        if self.kind == "expcrit" and not self.alpha0 > 0:
            raise ValueError("expcrit needs alpha0 > 0")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "alpha0", float(self.alpha0))

    @classmethod
    def power(cls, p):
        return cls("power", p)

    @classmethod
    def expcrit(cls, p, alpha0=CRITICAL_ALPHA):
        return cls("expcrit", p, alpha0)

    @property
    def parity(self) -> str:
        # |t|^(p-2) t is odd for every p
        return "odd"

    @property
    def homogeneous_degree(self):
        """p when F(a t) = a^p F(t) for a > 0, otherwise None."""
        return self.p if self.kind == "power" else None

    @property
    def t_max(self) -> float:
        """Largest |t| with alpha0 t^2 inside the double-precision exponent budget."""
        if self.alpha0 == 0:
            return np.inf
        return float(np.sqrt(EXP_BUDGET / self.alpha0))

    def spec_string(self) -> str:
        if self.kind == "power":
            return f"power:p={self.p:.17g}"
        return f"expcrit:p={self.p:.17g},alpha0={self.alpha0:.17g}"

    def guard(self, t) -> None:
        if self.alpha0 == 0:
            return
        peak = float(np.max(np.abs(t))) if np.size(t) else 0.0
        if peak > self.t_max:
            raise OverflowGuardError(
                f"|t| = {peak:.6g} exceeds the overflow guard {self.t_max:.6g} "
                f"for alpha0 = {self.alpha0:.6g}",
                limit=self.t_max,
                value=peak,
            )

    def _exp(self, t):
        if self.alpha0 == 0:
            return 1.0
        return np.exp(self.alpha0 * t * t)

    def f(self, t):
        t = np.asarray(t, dtype=float)
        self.guard(t)
        a = np.abs(t)
        return a ** (self.p - 2) * t * self._exp(t)

    def fprime(self, t):
        t = np.asarray(t, dtype=float)
        self.guard(t)
        a = np.abs(t)
        return a ** (self.p - 2) * self._exp(t) * (self.p - 1 + 2 * self.alpha0 * t * t)

    def F(self, t):
        """Primitive int_0^|t| f, even in t."""
        t = np.asarray(t, dtype=float)
        self.guard(t)
        a = np.abs(t)
        if self.alpha0 == 0:
            return a**self.p / self.p
        x = self.alpha0 * a * a
        out = np.empty_like(a)
        small = x <= SERIES_LIMIT
        if np.any(small):
            out[small] = a[small] ** self.p * _series(x[small], self.p)
        if np.any(~small):
            out[~small] = _tail_quadrature(x[~small], self.p, self.alpha0)
        return out

    def Fbar(self, t, mu):
        """f(t) t - (2 - mu/4) F(t)."""
        t = np.asarray(t, dtype=float)
        return self.f(t) * t - (2.0 - 0.25 * mu) * self.F(t)

    def Fbar_prime(self, t, mu):
        t = np.asarray(t, dtype=float)
        return self.fprime(t) * t + (0.25 * mu - 1.0) * self.f(t)


def _series(x, p):
    """sum_k x^k / (k! (p + 2k)) for x <= SERIES_LIMIT."""
    term = np.ones_like(x)
    total = term / p
    k = 0
    while True:
        k += 1
        term = term * x / k
        contrib = term / (p + 2 * k)
        total = total + contrib
        if np.all(contrib <= 1e-17 * total):
            return total


def _tail_quadrature(x, p, alpha0):
    """(1/2) alpha0^(-p/2) e^x int_0^x (x - z)^(p/2 - 1) e^-z dz, composite Gauss."""
    a = 0.5 * p
    acc = np.zeros_like(x)
    for lo, hi in zip(_TAIL_PANELS[:-1], _TAIL_PANELS[1:]):
        upper = np.minimum(hi, x)
        width = upper - lo
        live = width > 0
        if not np.any(live):
            break
        w = np.where(live, width, 0.0)
        z = lo + 0.5 * (_GL_NODES[None, :] + 1.0) * w[:, None]
        vals = np.clip(x[:, None] - z, 0.0, None) ** (a - 1) * np.exp(-z)
        acc += 0.5 * w * (vals @ _GL_WEIGHTS)
    return 0.5 * alpha0 ** (-a) * np.exp(x) * acc


def parse_nonlinearity(text: str) -> Nonlinearity:
    """Parse ``power:p=4`` or ``expcrit:p=4,alpha0=315.827``."""
    text = text.strip()
    kind, sep, rest = text.partition(":")
    kind = kind.strip().lower()
    if not sep or kind not in ("power", "expcrit"):
        raise ConfigError(f"nonlinearity must look like 'power:p=4', got {text!r}", token=text)
    values = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or key not in ("p", "alpha0"):
            raise ConfigError(f"unknown nonlinearity parameter {item!r}", token=item)
        try:
            dec = Decimal(val.strip())
        except InvalidOperation:
            raise ConfigError(f"malformed number {val.strip()!r} in {text!r}", token=val) from None
        if not dec.is_finite():
            raise ConfigError(f"non-finite number {val.strip()!r}", token=val)
        values[key] = float(dec)
    if "p" not in values:
        raise ConfigError(f"missing p in {text!r}", token=text)
    try:
        if kind == "power":
            if values.get("alpha0", 0.0) != 0.0:
                raise ConfigError("power nonlinearity takes no alpha0", token="alpha0")
            return Nonlinearity.power(values["p"])
        return Nonlinearity.expcrit(values["p"], values.get("alpha0", CRITICAL_ALPHA))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), token=text) from None


@dataclass(frozen=True)
class ConditionParams:
    mu: float
    theta: float
    nu: float
    varrho: float = 1.0
    M0: float = 1.0
    R0: float = 1.0

    @property
    def admissible(self) -> bool:
        return self.theta > 3 - 0.25 * self.mu and self.nu > 2 - 0.25 * self.mu


@dataclass
class ConditionResult:
    passed: bool
    witness: float | tuple | None = None
    detail: str = ""
    proxy: bool = False


@dataclass
class ConditionReport:
    params: ConditionParams
    results: dict = field(default_factory=dict)

    @property
    def admissible(self) -> bool:
        return self.params.admissible

    def passed(self, *names) -> bool:
        names = names or tuple(self.results)
        return all(self.results[n].passed for n in names)

    def failures(self):
        return {k: v for k, v in self.results.items() if not v.passed}

    def as_dict(self):
        return {
            "params": self.params.__dict__,
            "admissible": self.admissible,
            "results": {
                k: {"passed": v.passed, "witness": v.witness, "detail": v.detail, "proxy": v.proxy}
                for k, v in self.results.items()
            },
        }


def default_samples(nl: Nonlinearity, count: int = 400) -> np.ndarray:
    top = min(nl.t_max, 50.0)
    pos = np.geomspace(1e-3, top, count)
    return pos


def check_conditions(nl: Nonlinearity, params: ConditionParams, samples=None) -> ConditionReport:
    """Finite-sample verification of the growth hypotheses (f1)-(f7)."""
    mu = params.mu
    kappa = 3 - 0.25 * mu
    t = np.sort(np.abs(np.asarray(default_samples(nl) if samples is None else samples, float)))
    t = t[(t > 0) & (t <= nl.t_max)]
    rep = ConditionReport(params)
    res = rep.results

    def first(mask, values):
        idx = np.nonzero(mask)[0]
        return None if idx.size == 0 else float(values[idx[0]])

    # (f1): parity and f = o(|t|^nu) at the origin
    odd_bad = np.abs(nl.f(-t) + nl.f(t)) > 0
    small = np.geomspace(1e-8, 1e-3, 12)
    ratio = np.abs(nl.f(small)) / small**params.nu
    # a positive log-log slope near 0 means the ratio vanishes like a power
    slopes = np.diff(np.log(ratio)) / np.diff(np.log(small))
    decay = bool(np.all(slopes > 1e-6))
    res["f1"] = ConditionResult(
        not np.any(odd_bad) and decay and params.nu > 2 - 0.25 * mu,
        first(odd_bad, t) if np.any(odd_bad) else None,
        f"odd parity, |f(t)|/|t|^nu -> 0 (nu={params.nu:g} vs 2-mu/4={2 - 0.25 * mu:g})",
        proxy=True,
    )

    # (f2) is a statement about the growth class; decide it structurally
    crit = nl.kind == "expcrit" and np.isclose(nl.alpha0, CRITICAL_ALPHA, rtol=1e-12)
    res["f2"] = ConditionResult(bool(crit), None, f"exponential rate alpha0={nl.alpha0:g} vs 32 pi^2")

    # (f3)
    F = nl.F(t)
    tf = t * nl.f(t)
    bad = (params.theta * F > tf * (1 + 1e-13)) | (F <= 0)
    res["f3"] = ConditionResult(
        not np.any(bad) and params.theta > kappa,
        first(bad, t),
        f"0 < theta F(t) <= t f(t), theta={params.theta:g} vs 3-mu/4={kappa:g}",
    )

    # (f4)
    sel = t >= params.R0
    bad4 = F[sel] > params.M0 * np.abs(nl.f(t[sel]))
    res["f4"] = ConditionResult(not np.any(bad4), first(bad4, t[sel]), f"F <= M0 |f| for |t| >= R0={params.R0:g}")

    # (f5) liminf proxy on the largest admissible samples
    if nl.kind == "expcrit" and crit:
        top = t[-max(5, len(t) // 20) :]
        q = nl.f(top) / np.exp(CRITICAL_ALPHA * top**2)
        ok = bool(np.all(q >= params.varrho - 1e-12))
        res["f5"] = ConditionResult(ok, None if ok else float(top[np.argmin(q)]), "f(t) e^(-32 pi^2 t^2) >= varrho", proxy=True)
    else:
        res["f5"] = ConditionResult(False, None, "needs critical exponential growth", proxy=True)

    # (f6) pointwise on a product grid, both signs; divided through by F(s) Fbar(t) > 0
    ts = np.concatenate([-t[::-1], t])[:: max(1, len(t) // 40)]
    Fv, Fbv = nl.F(ts), nl.Fbar(ts, mu)
    with np.errstate(over="ignore", invalid="ignore"):
        tail = nl.Fbar_prime(ts, mu) * ts / Fbv - kappa  # function of t
        mix = (Fbv - Fv) / Fbv  # function of t
        ratio_s = Fbv / Fv  # function of s
        margin = tail[None, :] + ratio_s[:, None] * mix[None, :]
    bad6 = ~(margin > 0) | ~(Fv > 0)[:, None] | ~(Fbv > 0)[None, :]
    w6 = None
    if np.any(bad6):
        i, j = np.argwhere(bad6)[0]
        w6 = (float(ts[i]), float(ts[j]))
    res["f6"] = ConditionResult(
        not np.any(bad6), w6, "(3-mu/4) F(s) Fbar(t) < F(s) Fbar'(t) t + Fbar(s)(Fbar(t) - F(t))"
    )

    # (f7)
    q_pos = nl.Fbar(t, mu) / t**kappa
    q_neg = nl.Fbar(-t, mu) / t**kappa
    tol = 1e-12 * np.abs(q_pos[1:])
    bad_pos = np.diff(q_pos) < -tol
    bad_neg = np.diff(q_neg) < -tol  # as t grows, -t decreases: Fbar/|t|^k must grow
    w7 = first(bad_pos, t[1:]) if np.any(bad_pos) else first(bad_neg, -t[1:])
    res["f7"] = ConditionResult(not (np.any(bad_pos) or np.any(bad_neg)), w7, "Fbar(t)/|t|^(3-mu/4) monotone")
    return rep
