import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.special import gamma

from bichoquard.adams import (
    CSV_COLUMNS,
    CutoffSpec,
    RadialPairing,
    adams_norms,
    c_mu,
    cutoff_moments,
    mountain_scan,
    normalized_adams,
    radial_rule,
)
from bichoquard.errors import BoxTooSmallError
from bichoquard.grid import Grid, mass_sq, seminorms
from bichoquard.nonlin import Nonlinearity


@pytest.fixture(scope="module")
def moments():
    return cutoff_moments(corrected=True)


def test_cutoff_shape():
    # [TRIVIAL] phi = 1 on [0, 1], 0 beyond 2, values in [0, 1], decreasing between
    phi = CutoffSpec()
    t = np.linspace(0, 3, 301)
    v = phi(t)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(v[t <= 1] == 1) and np.all(v[t >= 2] == 0)
    assert np.all(np.diff(v) <= 0)


def test_constant_cutoff_moment_matches_antiderivative():
    # [DERIVED] int_1^2 r^3 log^2 r dr = [r^4 (log^2 r / 4 - log r / 8 + 1/32)]_1^2
    M1, _, _ = cutoff_moments(CutoffSpec("one"))
    lg = math.log(2)
    assert M1 == pytest.approx(16 * (lg**2 / 4 - lg / 8 + 1 / 32) - 1 / 32, rel=1e-12)


def test_moments_signs(moments):
    # [TRIVIAL] M1, M2 have positive integrands; the printed M3 integrand does not
    M1, M2, M3, M3c = moments
    assert M1 > 0 and M2 > 0 and M3c > 0
    assert M3 == pytest.approx(-7.4153780652566, rel=1e-12)


def test_moments_stable_under_tighter_quadrature(moments):
    # [TRIVIAL] convergence check
    tight = cutoff_moments(CutoffSpec(epsabs=1e-15), corrected=True)
    assert np.allclose(tight, moments, rtol=0, atol=1e-10)


@pytest.mark.parametrize("n", [10, 100, 1e4])
def test_l2_and_gradient_displays_exact(n):
    # [PAPER] the explicit terms of the L^2 and gradient displays match radial quadrature
    gaps = adams_norms(n).relative_gaps()
    assert gaps["l2"] < 1e-8 and gaps["grad"] < 1e-8


@pytest.mark.parametrize("n", [10, 100, 1e4])
def test_laplacian_display_with_corrected_moment(n):
    # [DERIVED] 1 + (4 + M3)/(4 log n) is exact when M3 is the moment of the
    # squared radial Laplacian; the printed M3 integrand gives a different constant
    p = adams_norms(n)
    assert p.closed_corrected_lap() == pytest.approx(p.quadrature[2], rel=1e-8)
    assert p.relative_gaps()["lap"] > 0.5


@pytest.mark.parametrize("n", [10, 1e3, 1e6])
def test_c1_matching(n):
    # [TRIVIAL] inner and outer branches meet with equal value and slope at r = 1/n
    m = adams_norms(n).matching
    assert m["inner_value"] == pytest.approx(m["outer_value"], rel=1e-12)
    assert m["inner_slope"] == pytest.approx(m["outer_slope"], rel=1e-12)
    assert m["inner_value"] == pytest.approx(math.sqrt(math.log(n) / (8 * math.pi**2)), rel=1e-12)


def test_l2_trend(moments):
    # [PAPER] log n ||w_n||^2 -> (1 + 32 M1)/128, approached monotonically
    limit = (1 + 32 * moments[0]) / 128
    gaps = [abs(math.log(n) * adams_norms(n).quadrature[0] - limit) for n in (1e2, 1e4, 1e6)]
    assert gaps[0] > gaps[1] - 1e-15 and gaps[1] >= gaps[2] - 1e-15
    assert gaps[-1] < 1e-12


def test_profile_support():
    # [TRIVIAL] identically zero for r >= 2
    p = adams_norms(50)
    r = np.linspace(2.0, 5.0, 40)
    assert not np.any(p.value(r)) and not np.any(p.laplacian(r))


@pytest.mark.parametrize("c", [0.5, 1.3])
def test_normalized_adams_mass(c):
    # [TRIVIAL] grid normalization
    u = normalized_adams(Grid(16, 8.0), 10, c)
    assert mass_sq(u) == pytest.approx(c * c, rel=1e-12)


def test_normalized_adams_needs_room():
    with pytest.raises(BoxTooSmallError):
        normalized_adams(Grid(8, 4.0), 10, 1.0)


def test_grid_norms_converge_to_radial_quadrature():
    # [DERIVED] two resolutions of the 4-D grid quadrature, error ratio >= 2
    p = adams_norms(2)
    errs = []
    for n in (12, 24):
        raw = Grid(n, 6.0).radial(p.value)
        _, B = seminorms(raw)
        errs.append((abs(mass_sq(raw) / p.quadrature[0] - 1), abs(B / p.quadrature[1] - 1)))
    assert errs[0][0] >= 2 * errs[1][0] and errs[0][1] >= 2 * errs[1][1]


def test_normalized_gradient_and_laplacian_asymptotics(moments):
    # [PAPER] ||grad w_n||^2 ~ 16 c^2 (1 + 2 M2)/(1 + 32 M1);
    # ||Delta w_n||^2 ~ 128 c^2 ((4 + M3)/4 + log n)/(1 + 32 M1), at n = 1e4 within 2%
    M1, M2, _, M3c = moments
    n = 1e4
    p = adams_norms(n)
    l2, grad, lap = p.quadrature
    assert grad / l2 == pytest.approx(16 * (1 + 2 * M2) / (1 + 32 * M1), rel=2e-2)
    assert lap / l2 == pytest.approx(128 * ((4 + M3c) / 4 + math.log(n)) / (1 + 32 * M1), rel=2e-2)


def test_c_mu():
    # [PAPER] arithmetic of the displayed constant
    assert c_mu(2.0) == pytest.approx(math.pi**4 / 30, rel=1e-15)
    assert c_mu(1e-12) == pytest.approx(24 * math.pi**4 / 6720, rel=1e-10)
    mus = np.linspace(0.05, 3.95, 60)
    assert np.all(np.diff([c_mu(m) for m in mus]) > 0)
    with pytest.raises(ValueError):
        c_mu(4.0)


@pytest.mark.parametrize("mu", [1.0, 2.0, 3.0])
def test_radial_pairing_gaussian(mu):
    # [DERIVED] pairing of e^{-a|x|^2} with itself:
    # (pi/a)^2 ... reduces by scaling to 2^{-4} (2 pi)^2 2 pi^2 2^{(4-mu)/2 - 1} Gamma((4-mu)/2) a^{mu/2-4}
    r, w = radial_rule(10, nodes=16)
    a = 9.0
    exact = 2**-4 * (2 * math.pi) ** 2 * 2 * math.pi**2 * 2 ** ((4 - mu) / 2 - 1) * gamma((4 - mu) / 2)
    exact *= a ** (0.5 * mu - 4)
    # the subtracted diagonal leaves an O(1e-6) quadrature error for mu >= 2,
    # far below the O(1e-1) margins the mountain scan decides on
    assert RadialPairing(r, w, mu)(np.exp(-a * r * r)) == pytest.approx(exact, rel=2e-6)


def _cfg(nl, mu=2.0):
    return SimpleNamespace(mu=mu, beta=0.0, c=1.0, nl=nl)


def test_mountain_shape_for_power():
    # [PAPER] g_n > 0 for small t, < 0 for large t, one interior maximum
    scan = mountain_scan(_cfg(Nonlinearity.power(4)), 100)
    assert scan.g[0] > 0 and scan.g[-1] < 0
    assert scan.sign_changes == 1
    assert 0 < scan.t_n < scan.t[-1]
    assert scan.gmax >= np.max(scan.g)


def test_mountain_guard_limits_t_for_critical_growth():
    scan = mountain_scan(_cfg(Nonlinearity.expcrit(4)), 100)
    assert math.isfinite(scan.t_admissible)
    assert np.all(scan.t <= scan.t_admissible)
    assert scan.bound == pytest.approx(6 / 16)


def test_mountain_row_columns():
    p = adams_norms(100)
    row = mountain_scan(_cfg(Nonlinearity.power(4)), 100).row(p)
    assert set(row) == set(CSV_COLUMNS)
