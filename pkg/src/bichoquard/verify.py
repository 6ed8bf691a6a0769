"""Seeded inequality suite on random localized fields.

Must-hold checks (violations are failures): the interpolation inequality
||grad u||^2 <= ||Delta u|| ||u|| and the Cauchy-Schwarz bound for the Riesz
pairing of |g| and |h|.  Reported constants: the Gagliardo-Nirenberg ratio
B_p, the Hardy-Littlewood-Sobolev ratio C(mu, r, t) with r = t = 8/(8 - mu),
and the Adams integral int (e^{alpha u^2} - 1) at ||Delta u|| = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Grid, mass_sq, seminorms
from .nonlin import CRITICAL_ALPHA, EXP_BUDGET
from .riesz import RieszKernel

__all__ = ["VerifyResult", "field_family", "lp_norm", "verify_fields", "run_verify", "plane_wave_equality"]

# relative slack for inequalities that are exact up to roundoff
ROUNDOFF = 1e-12


def lp_norm(u: np.ndarray, p: float, cell_volume: float) -> float:
    return float(np.sum(np.abs(u) ** p) * cell_volume) ** (1.0 / p)


def field_family(grid: Grid, count: int, seed: int) -> list[Field]:
    """Seeded random localized fields; the same seed gives the same continuum fields on any grid."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        width = rng.uniform(0.8, 2.0)
        modes = int(rng.integers(1, 7))
        out.append(grid.random(rng, width=width, modes=modes))
    return out


@dataclass
class VerifyResult:
    n: int
    length: float
    mu: float
    p: float
    fields: int
    interpolation_max_ratio: float
    interpolation_violations: list = field(default_factory=list)
    cs_max_ratio: float = 0.0
    cs_violations: list = field(default_factory=list)
    gn_max: float = 0.0
    hls_max: float = 0.0
    adams_max: float = 0.0
    adams_overflow: int = 0

    @property
    def violations(self) -> int:
        return len(self.interpolation_violations) + len(self.cs_violations)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "length": self.length,
            "mu": self.mu,
            "p": self.p,
            "fields": self.fields,
            "interpolation": {"max_ratio": self.interpolation_max_ratio,
                              "violations": self.interpolation_violations},
            "cauchy_schwarz": {"max_ratio": self.cs_max_ratio, "violations": self.cs_violations},
            "gagliardo_nirenberg": {"B_p": self.gn_max},
            "hls": {"r": 8.0 / (8.0 - self.mu), "t": 8.0 / (8.0 - self.mu), "C": self.hls_max},
            "adams": {"alpha": CRITICAL_ALPHA, "C": self.adams_max, "overflowed": self.adams_overflow},
            "violations": self.violations,
        }


def verify_fields(grid: Grid, mu: float, p: float, fields, *, quadrature="corrected",
                  alpha=CRITICAL_ALPHA) -> VerifyResult:
    kernel = RieszKernel(grid, mu, quadrature)
    hv = grid.cell_volume
    r = 8.0 / (8.0 - mu)
    res = VerifyResult(n=grid.n, length=grid.length, mu=mu, p=p, fields=len(fields),
                       interpolation_max_ratio=0.0)
    for i, u in enumerate(fields):
        A, B = seminorms(u)
        m = mass_sq(u)
        # (a) B <= sqrt(A m)
        bound = math.sqrt(A * m)
        ratio = B / bound if bound > 0 else 0.0
        res.interpolation_max_ratio = max(res.interpolation_max_ratio, ratio)
        if ratio > 1 + ROUNDOFF:
            res.interpolation_violations.append({"field": i, "ratio": ratio})

        # (b) pairing of |g| with |h|, g = u and h = the next field
        g = np.abs(u.data)
        h = np.abs(fields[(i + 1) % len(fields)].data)
        kg = kernel.convolve_array(g)
        kh = kernel.convolve_array(h)
        gg = kernel.pairing_array(kg, g)
        hh = kernel.pairing_array(kh, h)
        gh = kernel.pairing_array(kg, h)
        cs = gh / math.sqrt(gg * hh) if gg > 0 and hh > 0 else 0.0
        res.cs_max_ratio = max(res.cs_max_ratio, cs)
        if cs > 1 + ROUNDOFF:
            res.cs_violations.append({"field": i, "ratio": cs})

        # (d) HLS ratio on the same pair
        denom = lp_norm(g, r, hv) * lp_norm(h, r, hv)
        if denom > 0:
            res.hls_max = max(res.hls_max, abs(gh) / denom)

        # (c) Gagliardo-Nirenberg ratio
        if A > 0:
            gn = lp_norm(u.data, p, hv) / (A ** (0.5 * (p - 2) / p) * m ** (1.0 / p))
            res.gn_max = max(res.gn_max, gn)

        # (e) Adams integral at ||Delta u|| = 1
        if A > 0:
            v2 = u.data * u.data / A
            expo = alpha * v2
            if float(expo.max()) > EXP_BUDGET:
                res.adams_overflow += 1
            else:
                res.adams_max = max(res.adams_max, float(np.sum(np.expm1(expo)) * hv))
    return res


def plane_wave_equality(grid: Grid, k: int = 1) -> float:
    """|B - sqrt(A m)| / B for cos(2 pi k x_1 / L), which sits on a single Fourier shell."""
    xi = 2 * math.pi * k / grid.length
    u = grid.sample(lambda x1, x2, x3, x4: np.cos(xi * x1))
    A, B = seminorms(u)
    return abs(B - math.sqrt(A * mass_sq(u))) / B


def run_verify(mu: float = 2.0, p: float = 4.0, *, count: int = 200, seed: int = 0,
               grids=((16, 12.0), (24, 12.0)), quadrature="corrected") -> dict:
    """Run the suite on each grid with the same seeded continuum fields.

    Returns a dict with per-grid results, the relative spread of B_p and C
    across grids, the plane-wave equality residual, the Adams growth flag
    and the violation witnesses (field index, grid, ratio).
    """
    per_grid = []
    witnesses = []
    for n, length in grids:
        grid = Grid(int(n), float(length))
        fields = field_family(grid, count, seed)
        res = verify_fields(grid, mu, p, fields, quadrature=quadrature)
        per_grid.append(res)
        for kind, items in (("interpolation", res.interpolation_violations),
                            ("cauchy_schwarz", res.cs_violations)):
            for item in items:
                witnesses.append({"kind": kind, "grid": [grid.n, grid.length], **item,
                                  "field_data": fields[item["field"]]})

    def spread(values):
        values = np.asarray(values, dtype=float)
        return float((values.max() - values.min()) / values.max()) if values.max() > 0 else 0.0

    adams = [r.adams_max for r in per_grid]
    return {
        "mu": mu,
        "p": p,
        "fields": count,
        "seed": seed,
        "grids": [r.to_dict() for r in per_grid],
        "violations": sum(r.violations for r in per_grid),
        "interpolation": {"max_ratio": max(r.interpolation_max_ratio for r in per_grid),
                          "plane_wave_residual": plane_wave_equality(Grid(*grids[0]))},
        "cauchy_schwarz": {"max_ratio": max(r.cs_max_ratio for r in per_grid)},
        "gagliardo_nirenberg": {"B_p": [r.gn_max for r in per_grid],
                                "spread": spread([r.gn_max for r in per_grid])},
        "hls": {"C": [r.hls_max for r in per_grid], "spread": spread([r.hls_max for r in per_grid])},
        "adams": {"C": adams,
                  "growth_suspected": bool(len(adams) > 1 and adams[-1] > 1.05 * adams[0])},
        "witnesses": witnesses,
    }
