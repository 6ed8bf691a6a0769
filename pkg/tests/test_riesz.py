import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from bichoquard.errors import GridTooLargeError
from bichoquard.grid import Field, Grid
from bichoquard.riesz import RieszKernel, choquard_pairing, convolve, direct_convolve, origin_cell_average

MUS = [1.0, 2.0, 3.0]


@pytest.fixture(scope="module")
def tiny():
    return Grid(6, 6.0)


@pytest.mark.parametrize("mu", MUS)
@pytest.mark.parametrize("quadrature", ["corrected", "cell_average"])
def test_fast_matches_direct_sum(tiny, mu, quadrature):
    # [DERIVED] O(N^8) double sum with the same discrete kernel
    kern = RieszKernel(tiny, mu, quadrature)
    g = tiny.random(np.random.default_rng(int(mu)), width=1.0)
    fast = convolve(kern, g).data
    ref = direct_convolve(kern, g).data
    assert np.max(np.abs(fast - ref)) < 1e-11 * np.max(np.abs(ref))


def test_single_cell_gives_kernel_translate(tiny):
    # [TRIVIAL] a unit-weight cell at node j returns w K(x - x_j) h^4
    kern = RieszKernel(tiny, 2.0)
    data = np.zeros(tiny.shape)
    j = (2, 3, 1, 4)
    data[j] = 2.5
    out = convolve(kern, Field(tiny, data)).data
    pts = np.stack(np.meshgrid(*([tiny.x] * 4), indexing="ij"), axis=-1)
    disp = pts - np.array([tiny.x[i] for i in j])
    expected = 2.5 * kern.value(disp) * tiny.cell_volume
    assert np.max(np.abs(out - expected)) < 1e-12 * np.max(expected)
    assert np.allclose(direct_convolve(kern, Field(tiny, data)).data, expected, rtol=1e-12, atol=0)


def test_zero_field_gives_zero(tiny):
    # [TRIVIAL]
    kern = RieszKernel(tiny, 2.0)
    assert not np.any(direct_convolve(kern, tiny.zeros()).data)
    assert np.max(np.abs(convolve(kern, tiny.zeros()).data)) == 0.0


def test_direct_sum_refuses_large_grids():
    with pytest.raises(GridTooLargeError):
        direct_convolve(RieszKernel(Grid(12, 6.0), 2.0), Grid(12, 6.0).zeros())


def test_kernel_symmetric_and_positive():
    # [TRIVIAL] K(x) = K(-x) > 0
    g = Grid(8, 4.0)
    kern = RieszKernel(g, 2.5)
    d = np.random.default_rng(0).integers(-3, 4, size=(50, 4)) * g.h
    assert np.array_equal(kern.value(d), kern.value(-d))
    assert np.all(kern.value(d) > 0) and math.isfinite(kern.origin_value)


@pytest.mark.parametrize("mu", MUS)
def test_origin_cell_average_matches_split_oracle(mu):
    # [DERIVED] exact integral over the inscribed ball 2 pi^2 (h/2)^{4-mu}/(4-mu)
    # plus Monte Carlo of the bounded integrand on the rest of the cell
    h = 0.5
    ball = 2 * math.pi**2 * (h / 2) ** (4 - mu) / (4 - mu)
    pts = np.random.default_rng(7).uniform(-h / 2, h / 2, size=(400000, 4))
    r2 = np.sum(pts**2, axis=1)
    outside = np.where(r2 > (h / 2) ** 2, r2 ** (-mu / 2), 0.0)
    oracle = (ball + np.mean(outside) * h**4) / h**4
    assert origin_cell_average(mu, h) == pytest.approx(oracle, rel=2e-3)


@pytest.mark.parametrize("mu", MUS)
def test_gaussian_origin_value(mu):
    # [DERIVED] (I_mu * e^{-|x|^2})(0) = 2 pi^2 int_0^inf e^{-r^2} r^{3-mu} dr
    oracle = 2 * math.pi**2 * quad(lambda r: math.exp(-r * r) * r ** (3 - mu), 0, np.inf)[0]
    assert oracle == pytest.approx(math.pi**2 * gamma((4 - mu) / 2), rel=1e-12)
    errs = []
    for n in (32, 48):
        g = Grid(n, 16.0)
        val = convolve(RieszKernel(g, mu), g.radial(lambda r: np.exp(-r * r))).data[(n // 2,) * 4]
        errs.append(abs(val / oracle - 1))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0]


def test_linearity_and_amplitude_scaling(tiny):
    # [TRIVIAL]
    kern = RieszKernel(tiny, 2.0)
    rng = np.random.default_rng(3)
    a, b = tiny.random(rng), tiny.random(rng)
    lhs = convolve(kern, a + b).data
    rhs = convolve(kern, a).data + convolve(kern, b).data
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(lhs))
    p = choquard_pairing(kern, a, b)
    assert choquard_pairing(kern, 3.0 * a, 3.0 * b) == pytest.approx(9.0 * p, rel=1e-14)


@pytest.mark.parametrize("mu", MUS)
def test_pairing_symmetric(mu):
    # [TRIVIAL]
    g = Grid(8, 8.0)
    kern = RieszKernel(g, mu)
    rng = np.random.default_rng(5)
    a, b = g.random(rng), g.random(rng)
    assert choquard_pairing(kern, a, b) == pytest.approx(choquard_pairing(kern, b, a), rel=1e-12)


@pytest.mark.parametrize("mu", MUS)
def test_cauchy_schwarz_and_positivity(mu):
    # [PAPER] pairing(|g|,|h|)^2 <= pairing(|g|,|g|) pairing(|h|,|h|); pairing(g,g) > 0
    g = Grid(8, 8.0)
    kern = RieszKernel(g, mu)
    rng = np.random.default_rng(11)
    fields = [g.random(rng, width=rng.uniform(0.8, 2.0)) for _ in range(21)]
    for u, v in zip(fields, fields[1:]):
        assert choquard_pairing(kern, u, u) > 0
        gu, gv = Field(g, np.abs(u.data)), Field(g, np.abs(v.data))
        uv = choquard_pairing(kern, gu, gv)
        assert uv**2 <= choquard_pairing(kern, gu, gu) * choquard_pairing(kern, gv, gv) * (1 + 1e-12)


@pytest.mark.parametrize("mu", [2.0, 3.0])
def test_padded_spectrum_is_positive(mu):
    # [DERIVED] positive circulant spectrum makes the discrete form positive definite
    assert np.min(RieszKernel(Grid(8, 8.0), mu).spectrum.real) > 0


def test_invalid_parameters():
    with pytest.raises(ValueError):
        RieszKernel(Grid(4, 2.0), 4.0)
    with pytest.raises(ValueError):
        RieszKernel(Grid(4, 2.0), 2.0, "midpoint")
