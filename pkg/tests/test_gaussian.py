"""Oracle tests for the Gaussian probability helpers."""
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from pmsdist._gauss import (
    bvn_cdf,
    gauss_prob_edges,
    gaussian_rect,
    gl_panels,
    norm_pdf,
    psd_factor,
    ray_halfline_prob,
    sym_pinv,
)


def test_bvn_cdf_against_scipy():
    pts = (-2.0, -0.5, 0.0, 1.0, 2.5)
    for rho in (-0.99, -0.5, 0.0, 0.3, 0.95):
        cov = np.array([[1.0, rho], [rho, 1.0]])
        for h in pts:
            for k in pts:
                want = multivariate_normal(cov=cov).cdf([h, k])
                got = bvn_cdf(h, k, rho)
                assert abs(got - want) < 1e-6, (h, k, rho)


def test_bvn_cdf_degenerate_correlation():
    # rho = 1: P(X <= h, X <= k) = Phi(min(h, k))
    assert abs(bvn_cdf(0.3, 1.2, 1.0) - ndtr(0.3)) < 1e-14
    # rho = -1: P(X <= h, -X <= k) = max(0, Phi(h) + Phi(k) - 1)
    assert abs(bvn_cdf(0.3, 1.2, -1.0) - max(0.0, ndtr(0.3) + ndtr(1.2) - 1.0)) < 1e-14
    assert bvn_cdf(-1.0, 0.5, -1.0) == 0.0


def test_bvn_cdf_marginal_reduction():
    # independence and a +inf-like argument recover one-dimensional values
    assert abs(bvn_cdf(0.7, 9.0, 0.0) - ndtr(0.7) * ndtr(9.0)) < 1e-12
    assert abs(bvn_cdf(30.0, 0.7, 0.4) - ndtr(0.7)) < 1e-12


def _ray_halfline_oracle(center, slope, B, u, sd, n=4_000_001):
    """Dense-trapezoid reference for P(z <= u, |center + slope z| >= B)."""
    z = np.linspace(-8.5 * sd, 8.5 * sd, n)
    keep = (z <= u) & (np.abs(center + slope * z) >= B)
    return np.trapezoid(np.where(keep, norm_pdf(z, sd), 0.0), z)


@pytest.mark.parametrize("center,slope,B,u", [
    (-9.99, 1.0, 1.96, 0.0),
    (2.0, 1.0, 1.96, 0.0),
    (0.0, 1.0, 1.5, 0.7),
    (0.5, -2.0, 1.0, 1.2),
    (0.5, 0.0, 1.0, 0.3),     # zero slope: indicator times half-line mass
    (0.5, 0.0, 0.2, 0.3),
    (1.0, 0.7, 0.0, -0.4),    # B = 0: the constraint is vacuous
])
def test_ray_halfline_prob_against_trapezoid(center, slope, B, u):
    want = _ray_halfline_oracle(center, slope, B, u, 1.3)
    got = ray_halfline_prob(center, slope, B, u, 1.3)
    assert abs(got - want) < 1e-6


def test_ray_halfline_prob_infinite_halfline():
    # u = +inf integrates the rays over the whole line
    got = ray_halfline_prob(0.8, 1.0, 1.5, np.inf, 1.0)
    want = ndtr(-(1.5 + 0.8)) + 1.0 - ndtr(1.5 - 0.8)
    assert abs(got - want) < 1e-12


def test_ray_halfline_prob_vector_B():
    B = np.array([0.5, 1.0, 2.0])
    got = ray_halfline_prob(0.3, 1.0, B, 0.9, 1.0)
    single = [ray_halfline_prob(0.3, 1.0, b, 0.9, 1.0) for b in B]
    assert np.allclose(got, single, atol=1e-14)
    # monotone nonincreasing in the band half-width
    assert got[0] >= got[1] >= got[2]


def test_gaussian_rect_full_rank_matches_scipy():
    rng = np.random.Generator(np.random.Philox(5))
    for k in (1, 2):
        M = rng.standard_normal((k, k + 1))
        cov = M @ M.T + 0.2 * np.eye(k)
        u = rng.standard_normal(k)
        want = multivariate_normal(cov=cov).cdf(u) if k > 1 else ndtr(u[0] / np.sqrt(cov[0, 0]))
        got, se = gaussian_rect(u, cov, rng=rng, n_samples=1000)
        assert se == 0.0  # closed form for k <= 2
        assert abs(got - want) < 5e-7


def test_gaussian_rect_singular_rank_one():
    # Z = (xi, 2 xi): P(xi <= a, 2 xi <= b) = Phi(min(a, b/2))
    cov = np.array([[1.0, 2.0], [2.0, 4.0]])
    rng = np.random.Generator(np.random.Philox(5))
    got, se = gaussian_rect(np.array([0.5, 0.4]), cov, rng=rng, n_samples=100)
    assert se == 0.0
    assert abs(got - ndtr(0.2)) < 1e-12


def test_gaussian_rect_zero_matrix_is_indicator():
    rng = np.random.Generator(np.random.Philox(5))
    got, _ = gaussian_rect(np.array([0.1, -0.1]), np.zeros((2, 2)), rng=rng, n_samples=100)
    assert got == 0.0
    got, _ = gaussian_rect(np.array([0.1, 0.0]), np.zeros((2, 2)), rng=rng, n_samples=100)
    assert got == 1.0


def test_gaussian_rect_monte_carlo_k3():
    rng = np.random.Generator(np.random.Philox(17))
    M = rng.standard_normal((3, 4))
    cov = M @ M.T + 0.3 * np.eye(3)
    u = np.array([0.4, -0.2, 1.1])
    want = multivariate_normal(cov=cov).cdf(u)
    got, se = gaussian_rect(u, cov, rng=np.random.Generator(np.random.Philox(3)),
                            n_samples=400_000)
    assert se > 0.0
    assert abs(got - want) < 4 * se + 1e-4


def test_gl_panels_integrates_polynomials_exactly():
    edges = np.array([0.0, 0.3, 1.0])
    x, w = gl_panels(edges, 6)
    # degree-7 polynomial is exact under 6-node Gauss-Legendre
    assert abs(np.sum(w * x ** 7) - 1.0 / 8.0) < 1e-14
    assert abs(np.sum(w) - 1.0) < 1e-14


def test_gauss_prob_edges_equal_mass():
    edges = gauss_prob_edges(-2.0, 1.5, 8, 0.3, 1.2)
    assert edges[0] == -2.0 and edges[-1] == 1.5
    masses = np.diff(ndtr((edges - 0.3) / 1.2))
    assert np.allclose(masses, masses[0], rtol=1e-9)


def test_psd_factor_reconstructs():
    rng = np.random.Generator(np.random.Philox(11))
    M = rng.standard_normal((3, 2))
    cov = M @ M.T  # rank 2
    L = psd_factor(cov)
    assert L.shape == (3, 2)
    assert np.allclose(L @ L.T, cov, atol=1e-12)


def test_sym_pinv_properties():
    rng = np.random.Generator(np.random.Philox(13))
    M = rng.standard_normal((4, 2))
    S = M @ M.T  # rank 2, singular
    g = sym_pinv(S)
    assert np.allclose(S @ g @ S, S, atol=1e-10)
    assert np.allclose(g @ S @ g, g, atol=1e-10)
    assert np.allclose(g, np.linalg.pinv(S), atol=1e-10)


def test_norm_pdf_matches_quadrature():
    val, _ = quad(lambda x: norm_pdf(x, 0.7), -np.inf, np.inf)
    assert abs(val - 1.0) < 1e-10
