"""Normalized ground states by descent of the reduced functional on S(c).

J is unbounded below on the mass sphere, so the objective is the reduced
functional I(u) = max_s J(H(u, s)), which is bounded below by E(c) and
invariant under the scaling H.  Iterates move along preconditioned
Polak-Ribiere directions in the tangent space of S(c), are retracted by mass
rescaling, and the step is chosen by a Wolfe line search on I.

The discrete functionals are covariant under a change of grid spacing, so the
iterate only fixes a shape in lattice units; the physical scale comes from
s_u.  The returned state H(u, s_u) is therefore the same samples on a grid of
spacing e^{-s_u} h, exact and free of resampling.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .adams import normalized_adams
from .errors import FiberError, OverflowGuardError
from .functional import ProblemConfig, energy_parts, reduced_state
from .grid import Field, Grid, dilate, load_snapshot, mass_sq, rescale_mass
from .nonlin import ConditionParams, check_conditions

__all__ = [
    "SolveSettings",
    "GroundStateReport",
    "solve_ground_state",
    "sweep_mass",
    "sweep_beta",
    "refine_check",
    "initial_guess",
    "pde_residual",
    "recenter",
    "scaled_state",
    "scaled_parts",
    "spectral_tail",
]

log = logging.getLogger(__name__)

# strong-Wolfe curvature fraction and the relative roundoff allowance on I for accepted steps
_CURVATURE = 0.3
_FLAT = 1e-12
# spectral weight of Delta u beyond 2/3 of the Nyquist radius that marks a grid-scale state
_TAIL_WARN = 1e-6


@dataclass(frozen=True)
class SolveSettings:
    max_iterations: int = 2000
    tol_grad: float = 1e-8
    tol_p: float = 1e-6
    armijo_slope: float = 1e-4
    armijo_factor: float = 0.5
    armijo_max: int = 40
    init: str = "gaussian"
    width: float = 1.5
    max_step: float = 8.0
    time_limit: float = math.inf
    finalize: str = "rescale"

    def __post_init__(self):
        if not (self.tol_grad > 0 and self.tol_p > 0):
            raise ValueError("tolerances must be positive")
        if not self.width > 0:
            raise ValueError("the Gaussian width must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.finalize not in ("rescale", "dilate"):
            raise ValueError(f"finalize must be 'rescale' or 'dilate', got {self.finalize!r}")


@dataclass
class GroundStateReport:
    E: float
    lambda_direct: float
    lambda_pohozaev: float
    pohozaev_value: float
    pohozaev_residual: float
    pde_residual: float
    grad_residual: float
    mass: float
    mass_error: float
    A: float
    B: float
    D: float
    iterations: int
    beta_star_estimate: float
    converged: bool
    s_u: float = 0.0
    box: float = math.nan
    spectral_tail: float = math.nan
    min_over_max: float = math.nan
    s_u_history: list = field(default_factory=list)
    value_history: list = field(default_factory=list)
    grad_history: list = field(default_factory=list)
    mass_history: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def initial_guess(cfg: ProblemConfig, settings: SolveSettings) -> Field:
    """Field from ``gaussian[:width]``, ``adams:n`` or ``snapshot:path``, on S(c)."""
    grid = cfg.grid
    kind, _, arg = settings.init.partition(":")
    if kind == "gaussian":
        width = float(arg) if arg else settings.width
        u = grid.radial(lambda r: np.exp(-0.5 * r * r / width**2))
    elif kind == "adams":
        u = normalized_adams(grid, float(arg), cfg.c)
    elif kind == "snapshot":
        u = load_snapshot(arg)
        if u.grid != grid:
            raise ValueError(f"snapshot grid {u.grid} differs from {grid}")
    else:
        raise ValueError(f"unknown initial guess {settings.init!r}")
    return rescale_mass(u, cfg.c)


def recenter(u: Field, s: float, c: float) -> Field:
    """Resample u to H(u, s) = e^{2s} u(e^s x) on the same grid and restore the mass."""
    v = dilate(u, s, warn=True)
    return rescale_mass(Field._wrap(u.grid, math.exp(2 * s) * v.data), c)


def scaled_state(u: Field, s: float) -> Field:
    """H(u, s) without resampling: the samples e^{2s} u on the grid of spacing e^{-s} h.

    Every discrete functional of the package is covariant under this change
    of spacing, so the result is the exact image of u under the scaling.
    """
    g = u.grid
    return Field._wrap(Grid(g.n, g.length * math.exp(-s)), math.exp(2 * s) * u.data)


def pde_residual(cfg: ProblemConfig, u: Field, lam: float, s: float = 0.0) -> tuple[float, float]:
    """||Delta^2 w - beta Delta w - lambda w - (I * F(w)) f(w)|| / ||Delta^2 w|| for w = H(u, s).

    Evaluated in the frame of u, so no resampling is involved; returns the
    relative residual and ||Delta^2 w||.
    """
    g = u.grid
    v = math.exp(2 * s) * u.data
    spec = g.rfft(v)
    k2 = g.k2
    e2 = math.exp(2 * s)
    bil = e2 * e2 * math.sqrt(g.spectral_sum(spec, (k2 * k2) ** 2))
    res = g.irfft(spec * (e2 * e2 * k2 * k2 + cfg.beta * e2 * k2)) - lam * v
    if cfg.nl is not None:
        conv = cfg.kernel.convolve_array(cfg.nl.F(v))
        res = res - math.exp((cfg.mu - 4) * s) * conv * cfg.nl.f(v)
    norm = math.sqrt(mass_sq(Field._wrap(g, res)))
    # both norms pick up the same factor e^{-2s} from the change of variables
    return norm / bil, bil * math.exp(-2 * s)


def scaled_parts(cfg: ProblemConfig, u: Field, s: float) -> dict:
    """A, B, D, E and mass of H(u, s), evaluated in the frame of u."""
    parts = energy_parts(cfg, Field._wrap(u.grid, math.exp(2 * s) * u.data))
    w = math.exp((cfg.mu - 8) * s)
    return {
        "A": parts["A"],
        "B": parts["B"] * math.exp(-2 * s),
        "D": parts["D"] * w,
        "E": parts["E"] * w,
        "mass": parts["mass"] * math.exp(-4 * s),
    }


def spectral_tail(u: Field) -> float:
    """Fraction of ||Delta u||^2 carried by |xi| above 2/3 of the axis Nyquist frequency."""
    g = u.grid
    k2 = g.k2
    spec = g.rfft(u.data)
    total = g.spectral_sum(spec, k2 * k2)
    if total == 0:
        return 0.0
    # lattice shells can sit exactly on the cut; nudge it so the split does not
    # depend on roundoff in the grid spacing
    cut = (2.0 / 3.0 * math.pi / g.h) ** 2 * (1 + 1e-9)
    return g.spectral_sum(spec, np.where(k2 > cut, k2 * k2, 0.0)) / total


def _precondition(u: Field, grad: Field, s: float, beta: float, sigma: float) -> np.ndarray:
    g = u.grid
    k2 = g.k2
    spec = g.rfft(grad.data)
    spec /= math.exp(4 * s) * k2 * k2 + beta * math.exp(2 * s) * k2 + sigma
    return g.irfft(spec)


def _tangent(u: Field, d: np.ndarray, m: float) -> np.ndarray:
    return d - (float(np.dot(d.ravel(), u.data.ravel())) * u.grid.cell_volume / m) * u.data


def _state(cfg, u, s_hint):
    return reduced_state(cfg, u, start=s_hint)


def _grad_scale(u: Field, s: float) -> float:
    """||e^{4s} Delta^2 u||, the size of the leading term of the reduced gradient."""
    g = u.grid
    k2 = g.k2
    return math.exp(4 * s) * math.sqrt(g.spectral_sum(g.rfft(u.data), (k2 * k2) ** 2))


def _admissibility_warnings(cfg: ProblemConfig) -> list:
    nl = cfg.nl
    if nl is None:
        return ["no nonlinearity: the reduced functional has no interior maximum"]
    theta = nl.p
    nu = 0.5 * (nl.p - 1 + 2 - 0.25 * cfg.mu)
    params = ConditionParams(mu=cfg.mu, theta=theta, nu=nu)
    out = []
    if not params.admissible:
        out.append(
            f"p={nl.p:g} is not admissible for mu={cfg.mu:g}: need theta > {3 - 0.25 * cfg.mu:g}"
        )
    rep = check_conditions(nl, params)
    bad = sorted(k for k, v in rep.results.items() if not v.passed and k in ("f3", "f6", "f7"))
    if rep.results["f6"].passed is False and rep.results["f7"].passed is False:
        out.append("neither (f6) nor (f7) holds on the sample grid")
    elif bad:
        out.append("conditions failing on the sample grid: " + ", ".join(bad))
    return out


def _line_search(cfg, u, st, d, slope, step, settings):
    """Step along the retracted curve t -> rescale(u + t d) to a strong-Wolfe point.

    phi(t) = I(rescale(u + t d)) and phi'(t) = <G(t), dR/dt>.  Safeguarded
    secant steps on phi' inside a bracket; a point is accepted when the
    Armijo decrease holds (or phi rises by no more than the roundoff
    allowance ``_FLAT`` relative to I) and |phi'(t)| <= _CURVATURE |phi'(0)|.  Without a
    curvature point within ``armijo_max`` evaluations, the best Armijo point
    seen is returned.  Returns (t, field, state) or None.
    """
    c = cfg.c
    cv = u.grid.cell_volume
    phi0 = st.value
    lo, dlo = 0.0, slope
    hi, dhi = None, None
    best = None
    t = step
    for count in range(1, settings.armijo_max + 1):
        x = u.data + t * d
        trial = rescale_mass(Field._wrap(u.grid, x), c)
        try:
            tst = _state(cfg, trial, st.s_u)
        except (OverflowGuardError, FiberError):
            hi, dhi = t, None
            t = lo + settings.armijo_factor * (t - lo)
            continue
        nx2 = float(np.dot(x.ravel(), x.ravel())) * cv
        xd = float(np.dot(x.ravel(), d.ravel())) * cv
        dr = (c / math.sqrt(nx2)) * (d - (xd / nx2) * x)
        dphi = float(np.dot(tst.gradient.data.ravel(), dr.ravel())) * cv
        ok = (tst.value <= phi0 + settings.armijo_slope * t * slope
              or tst.value <= phi0 + _FLAT * max(1.0, abs(phi0)))
        if ok:
            if best is None or tst.value < best[2].value:
                best = (t, trial, tst)
            if abs(dphi) <= _CURVATURE * abs(slope):
                log.debug("line search: %d evaluations", count)
                return t, trial, tst
        if ok and dphi < 0:
            if hi is None:
                # still descending: secant extrapolation, at least 1.5x and at most 4x
                t_new = 4.0 * t
                if dphi > dlo:
                    t_new = min(t_new, t - dphi * (t - lo) / (dphi - dlo))
                lo, dlo = t, dphi
                t = max(t_new, 1.5 * t)
                continue
            lo, dlo = t, dphi
        else:
            hi, dhi = t, dphi
        # secant on phi' inside [lo, hi] when the upper end carries a positive slope
        if dhi is not None and dhi > 0:
            t_new = lo - dlo * (hi - lo) / (dhi - dlo)
        else:
            t_new = lo + settings.armijo_factor * (hi - lo)
        width = hi - lo
        t = min(max(t_new, lo + 0.1 * width), hi - 0.1 * width)
    return best


def solve_ground_state(cfg: ProblemConfig, settings: SolveSettings = SolveSettings(), *, u0: Field | None = None):
    """Minimize I over S(c); return (u*, GroundStateReport) with u* = H(u, s_u).

    The iterate never leaves the grid of ``cfg``; only the returned state is
    scaled, either exactly onto a grid of spacing e^{-s_u} h (``rescale``) or
    by trigonometric resampling on the original grid (``dilate``).
    """
    t_start = time.perf_counter()
    warnings_ = _admissibility_warnings(cfg)
    c = cfg.c
    if u0 is not None:
        if u0.grid.n != cfg.grid.n:
            raise ValueError(f"initial field has N={u0.grid.n}, the problem N={cfg.grid.n}")
        # only the lattice shape matters: a scaled state from another box is reused as is
        u = rescale_mass(Field(cfg.grid, u0.data), c)
    else:
        u = initial_guess(cfg, settings)
    st = _state(cfg, u, 0.0)

    values, grads, s_hist, masses = [], [], [], []
    prev_grad = prev_pre = direction = prev_slope = None
    tau = 1.0
    converged_inner = False
    it = 0
    for it in range(settings.max_iterations + 1):
        m = mass_sq(u)
        rel = math.sqrt(mass_sq(st.gradient)) / _grad_scale(u, st.s_u)
        values.append(st.value)
        grads.append(rel)
        s_hist.append(st.s_u)
        masses.append(m)
        if rel <= settings.tol_grad:
            converged_inner = True
            break
        if it == settings.max_iterations or time.perf_counter() - t_start > settings.time_limit:
            break

        sigma = max(abs(st.multiplier), 1e-3 * math.exp(4 * st.s_u))
        pre = _tangent(u, _precondition(u, st.gradient, st.s_u, cfg.beta, sigma), m)
        gdata = st.gradient.data
        if direction is not None:
            # Polak-Ribiere+ in the preconditioned inner product
            num = float(np.dot(gdata.ravel(), (pre - prev_pre).ravel()))
            den = float(np.dot(prev_grad.ravel(), prev_pre.ravel()))
            beta_cg = max(0.0, num / den) if den > 0 else 0.0
            d = -pre + beta_cg * _tangent(u, direction, m)
        else:
            d = -pre
        slope = float(np.dot(gdata.ravel(), d.ravel())) * u.grid.cell_volume
        if not slope < 0:
            d = -pre
            slope = float(np.dot(gdata.ravel(), d.ravel())) * u.grid.cell_volume

        if prev_slope is not None:
            tau = tau * prev_slope / slope
        accepted = _line_search(cfg, u, st, d, slope, min(tau, settings.max_step), settings)
        if accepted is None:
            if direction is not None:
                prev_grad = prev_pre = direction = prev_slope = None
                tau = 1.0
                continue
            warnings_.append(f"line search failed at iteration {it}")
            break
        step, trial, tst = accepted
        log.debug("iteration %d: I=%.15g step=%.3g rel=%.3g", it, tst.value, step, rel)
        prev_grad, prev_pre, direction = gdata, pre, d
        prev_slope = slope
        u, st = trial, tst
        tau = step

    tail = spectral_tail(u)
    if tail > _TAIL_WARN:
        warnings_.append(
            f"grid-scale state: {tail:.3g} of ||Delta u||^2 sits above 2/3 of the Nyquist radius; "
            "the discrete minimizer is not a resolved approximation"
        )
    s_final = st.s_u
    if settings.finalize == "rescale":
        ustar = scaled_state(u, s_final)
        frame, s_frame = u, s_final
    else:
        ustar = u
        for _ in range(6):
            if abs(s_final) < 1e-12:
                break
            ustar = recenter(ustar, s_final, c)
            s_final = _state(cfg, ustar, 0.0).s_u
        frame, s_frame = ustar, 0.0
    # sign normalization: max |u| is attained where u > 0
    if frame.data.flat[int(np.argmax(np.abs(frame.data)))] < 0:
        ustar = -ustar
        frame = -frame

    parts = scaled_parts(cfg, frame, s_frame)
    A, B, D, E_ = parts["A"], parts["B"], parts["D"], parts["E"]
    mass = parts["mass"]
    energy_val = 0.5 * A + 0.5 * cfg.beta * B - 0.5 * D
    lam_d = (A + cfg.beta * B - E_) / mass
    lam_p = (0.5 * cfg.beta * B - 0.25 * (8 - cfg.mu) * D) / mass
    P = 2 * A + cfg.beta * B + 0.5 * (8 - cfg.mu) * D - 2 * E_
    p_rel = abs(P) / (2 * A)
    pde_rel, _ = pde_residual(cfg, frame, lam_d, s_frame)
    mass_err = abs(mass - c * c)
    peak = float(np.max(ustar.data))
    low = float(np.min(ustar.data))
    converged = bool(
        converged_inner
        and p_rel <= settings.tol_p
        and pde_rel <= 10 * settings.tol_grad
        and mass_err <= 1e-10
    )
    if converged_inner and not converged:
        warnings_.append(
            f"tangent residual met but final checks failed: P={p_rel:.3g}, PDE={pde_rel:.3g}, "
            f"mass error={mass_err:.3g}"
        )
    if not converged_inner:
        warnings_.append(
            f"not converged after {it} iterations: tangent residual {grads[-1]:.3g} > {settings.tol_grad:g}"
        )
    report = GroundStateReport(
        E=energy_val,
        lambda_direct=lam_d,
        lambda_pohozaev=lam_p,
        pohozaev_value=P,
        pohozaev_residual=p_rel,
        pde_residual=pde_rel,
        grad_residual=grads[-1],
        mass=mass,
        mass_error=mass_err,
        A=A,
        B=B,
        D=D,
        iterations=it,
        beta_star_estimate=(8 - cfg.mu) * D / (2 * (A + 2 * B + mass)),
        converged=converged,
        s_u=s_final if settings.finalize == "rescale" else 0.0,
        box=ustar.grid.length,
        spectral_tail=tail,
        min_over_max=low / peak if peak > 0 else math.nan,
        s_u_history=s_hist,
        value_history=values,
        grad_history=grads,
        mass_history=masses,
        warnings=warnings_,
        seconds=time.perf_counter() - t_start,
    )
    log.info(
        "solve c=%g beta=%g: E=%.12g lambda=%.12g iterations=%d converged=%s",
        c, cfg.beta, energy_val, lam_d, it, converged,
    )
    return ustar, report


def _sweep_row(key, value, report):
    return {
        key: value,
        "E": report.E,
        "lambda_direct": report.lambda_direct,
        "lambda_pohozaev": report.lambda_pohozaev,
        "pohozaev_residual": report.pohozaev_residual,
        "pde_residual": report.pde_residual,
        "beta_star_estimate": report.beta_star_estimate,
        "iterations": report.iterations,
        "converged": report.converged,
    }


def _failed_row(key, value, exc):
    return {key: value, "E": math.nan, "lambda_direct": math.nan, "lambda_pohozaev": math.nan,
            "pohozaev_residual": math.nan, "pde_residual": math.nan, "beta_star_estimate": math.nan,
            "iterations": 0, "converged": False, "error": str(exc)}


def sweep_mass(cfg: ProblemConfig, c_list, settings: SolveSettings = SolveSettings(), *, slack=1e-6):
    """Warm-started continuation in c; returns (rows, states)."""
    c_list = [float(x) for x in c_list]
    if any(b <= a for a, b in zip(c_list, c_list[1:])):
        raise ValueError("c_list must be strictly increasing")
    rows, states = [], []
    prev = None
    for c in c_list:
        sub = cfg.with_(c=c)
        try:
            u, rep = solve_ground_state(sub, settings, u0=prev)
        except Exception as exc:  # noqa: BLE001 - a failed mass is recorded, the sweep goes on
            log.warning("sweep: c=%g failed: %s", c, exc)
            rows.append(_failed_row("c", c, exc))
            states.append(None)
            continue
        rows.append(_sweep_row("c", c, rep))
        states.append(u)
        prev = u
    for i, row in enumerate(rows):
        row["nonincreasing"] = ""
        row["strict_decrease"] = ""
        if i == 0:
            continue
        e0, e1 = rows[i - 1]["E"], row["E"]
        if math.isnan(e0) or math.isnan(e1):
            continue
        row["nonincreasing"] = bool(e1 <= e0 + slack * abs(e0))
        if rows[i - 1]["lambda_direct"] < 0:
            row["strict_decrease"] = bool(e1 < e0)
    return rows, states


def sweep_beta(cfg: ProblemConfig, beta_list, settings: SolveSettings = SolveSettings(), *, warm=False):
    """Solve for each beta; beta_star_estimate is a diagnostic built from each state."""
    beta_list = [float(b) for b in beta_list]
    if any(b < 0 for b in beta_list):
        raise ValueError("beta values must be non-negative")
    rows, states = [], []
    prev = None
    for b in beta_list:
        try:
            u, rep = solve_ground_state(cfg.with_(beta=b), settings, u0=prev if warm else None)
        except Exception as exc:  # noqa: BLE001
            log.warning("sweep: beta=%g failed: %s", b, exc)
            rows.append(_failed_row("beta", b, exc))
            states.append(None)
            continue
        rows.append(_sweep_row("beta", b, rep))
        states.append(u)
        prev = u
    return rows, states


def refine_check(cfg: ProblemConfig, settings: SolveSettings, n_list):
    """E(c) on grids of the same box with increasing N."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("N list must be increasing")
    rows = []
    for n in n_list:
        grid = Grid(n, cfg.grid.length)
        sub = ProblemConfig.create(grid, mu=cfg.mu, beta=cfg.beta, c=cfg.c, nl=cfg.nl,
                                   quadrature=cfg.kernel.quadrature)
        _, rep = solve_ground_state(sub, settings)
        row = {"N": n, "E": rep.E, "lambda_direct": rep.lambda_direct, "converged": rep.converged}
        if rows:
            row["rel_change"] = abs(rep.E - rows[-1]["E"]) / abs(rep.E)
        else:
            row["rel_change"] = math.nan
        rows.append(row)
    return rows
