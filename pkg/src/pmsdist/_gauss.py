"""Internal Gaussian / quadrature numerics used by the distribution modules.

Everything here is generic probability plumbing: normal cdfs, bivariate
rectangle probabilities, rank-aware lower-orthant probabilities for possibly
singular Gaussian vectors, and composite Gauss-Legendre panel rules.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr, ndtri, owens_t

# Standard-normal mass beyond |x| = 9 is ~1.1e-19; quadrature ranges are
# truncated there and the discarded mass is accounted for by callers.
TAIL_CUT = 9.0

_leggauss_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    try:
        return _leggauss_cache[n]
    except KeyError:
        xw = leggauss(n)
        _leggauss_cache[n] = xw
        return xw


def norm_pdf(x, sd=1.0):
    """Density of N(0, sd^2) at x, safe for sd arrays broadcast against x."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x / sd) ** 2) / (sd * np.sqrt(2.0 * np.pi))


def gl_panels(edges: np.ndarray, nodes_per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on consecutive intervals.

    Parameters
    ----------
    edges : increasing 1-D array of panel boundaries, length m+1.
    nodes_per_panel : GL nodes per panel.

    Returns
    -------
    nodes, weights : flat arrays of length m * nodes_per_panel. Summing
        ``f(nodes) * weights`` approximates the integral of f over
        [edges[0], edges[-1]].
    """
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(nodes_per_panel)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def split_edges(lo: float, hi: float, n_panels: int, breaks=()) -> np.ndarray:
    """Equal-width panel edges on [lo, hi] with extra mandatory break points.

    Break points outside (lo, hi) are ignored.  Duplicate/near-duplicate
    edges are merged so panels never degenerate.
    """
    base = np.linspace(lo, hi, n_panels + 1)
    extra = [b for b in np.atleast_1d(np.asarray(breaks, dtype=float)) if lo < b < hi]
    if not extra:
        return base
    edges = np.unique(np.concatenate([base, np.asarray(extra)]))
    # drop edges closer than a sliver of the range to their neighbor
    keep = np.concatenate([[True], np.diff(edges) > 1e-13 * max(hi - lo, 1.0)])
    edges = edges[keep]
    edges[0], edges[-1] = lo, hi
    return edges


def gauss_prob_edges(lo: float, hi: float, n_panels: int, mean: float = 0.0,
                     sd: float = 1.0) -> np.ndarray:
    """Panel edges on [lo, hi] that split N(mean, sd^2) mass about equally."""
    a = ndtr((lo - mean) / sd)
    b = ndtr((hi - mean) / sd)
    if b - a < 1e-14:  # interval in an extreme tail: fall back to equal width
        return np.linspace(lo, hi, n_panels + 1)
    probs = np.linspace(a, b, n_panels + 1)
    edges = mean + sd * ndtri(np.clip(probs, 1e-300, 1.0 - 1e-16))
    edges[0], edges[-1] = lo, hi
    return np.maximum.accumulate(edges)


def bvn_cdf(h, k, rho: float) -> np.ndarray:
    """P(X <= h, Y <= k) for standard bivariate normal (X, Y) with corr rho.

    Deterministic evaluation through Owen's T function; h and k may be
    arrays (broadcast), rho is a scalar.  Accuracy ~1e-14.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    h, k = np.broadcast_arrays(h, k)
    rho = float(min(1.0, max(-1.0, rho)))

    if rho >= 1.0 - 1e-15:
        return ndtr(np.minimum(h, k))
    if rho <= -1.0 + 1e-15:
        return np.clip(ndtr(h) + ndtr(k) - 1.0, 0.0, 1.0)

    out = np.empty(h.shape, dtype=float)
    neg_inf = (h == -np.inf) | (k == -np.inf)
    h_inf = (h == np.inf)
    k_inf = (k == np.inf)
    finite = ~(neg_inf | h_inf | k_inf)

    out[neg_inf] = 0.0
    # one argument at +inf: marginal cdf of the other
    m = h_inf & ~neg_inf
    out[m] = ndtr(k[m])
    m = k_inf & ~neg_inf & ~h_inf
    out[m] = ndtr(h[m])

    if np.any(finite):
        hf = h[finite]
        kf = k[finite]
        r = np.sqrt(1.0 - rho * rho)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ah = (kf - rho * hf) / (hf * r)
            ak = (hf - rho * kf) / (kf * r)
        th = owens_t(hf, ah)
        tk = owens_t(kf, ak)
        # T(0, a) -> arctan(a)/(2*pi) with a = +/-inf by the sign of the
        # other coordinate; both-zero handled in closed form below.
        zh = hf == 0.0
        zk = kf == 0.0
        th = np.where(zh, 0.25 * np.sign(kf), th)
        tk = np.where(zk, 0.25 * np.sign(hf), tk)
        beta = np.where(
            (hf * kf < 0.0) | ((hf * kf == 0.0) & ((hf < 0.0) | (kf < 0.0))),
            0.5,
            0.0,
        )
        val = 0.5 * (ndtr(hf) + ndtr(kf)) - th - tk - beta
        both0 = zh & zk
        if np.any(both0):
            val = np.where(both0, 0.25 + np.arcsin(rho) / (2.0 * np.pi), val)
        out[finite] = np.clip(val, 0.0, 1.0)
    return out


def psd_factor(cov: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Factor L (k x r) with cov ~= L @ L.T for a symmetric PSD matrix.

    Eigenvalues below rel_tol times the largest are treated as exact zeros,
    so r is the numerical rank.
    """
    cov = np.asarray(cov, dtype=float)
    lam, vec = np.linalg.eigh(0.5 * (cov + cov.T))
    lmax = max(float(lam[-1]), 0.0)
    keep = lam > max(lmax * rel_tol, 1e-300)
    return vec[:, keep] * np.sqrt(lam[keep])


def sym_pinv(mat: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues below rel_tol times the largest count as zero (the
    documented generalized-inverse convention of the package).
    """
    mat = np.asarray(mat, dtype=float)
    lam, vec = np.linalg.eigh(0.5 * (mat + mat.T))
    lmax = max(float(np.max(np.abs(lam))), 0.0)
    keep = np.abs(lam) > max(lmax * rel_tol, 1e-300)
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / lam[keep]
    return (vec * inv) @ vec.T


def _rank1_interval(load: np.ndarray, upper: np.ndarray) -> tuple[float, float, bool]:
    """Feasible standard-normal interval for {load * xi <= upper} coordinatewise.

    Returns (lo, hi, feasible); coordinates with negligible loading require
    upper >= 0 outright.
    """
    scale = float(np.max(np.abs(load))) if load.size else 0.0
    tol = 1e-13 * max(scale, 1.0)
    lo, hi = -np.inf, np.inf
    for li, ui in zip(load, upper):
        if abs(li) <= tol:
            if ui < 0.0:
                return 0.0, 0.0, False
        elif li > 0.0:
            hi = min(hi, ui / li)
        else:
            lo = max(lo, ui / li)
    return lo, hi, True


def ray_halfline_prob(center: float, slope: float, B, u: float, sd: float):
    """P(z <= u, |center + slope*z| >= B) for z ~ N(0, sd^2).

    ``B`` may be an array of nonnegative thresholds; the two-ray region in z
    is intersected with the half-line (-inf, u] in closed form.
    """
    B = np.asarray(B, dtype=float)
    phi_u = ndtr(u / sd)
    if slope == 0.0:
        return np.where(np.abs(center) >= B, phi_u, 0.0)
    # near-denormal slopes push the breakpoints to +/-inf, which the normal
    # cdf saturates correctly
    with np.errstate(over="ignore"):
        z_hi = (B - center) / slope
        z_lo = (-B - center) / slope
        if slope < 0.0:
            z_hi, z_lo = z_lo, z_hi
        upper = np.maximum(phi_u - ndtr(z_hi / sd), 0.0)
        lower = ndtr(np.minimum(u, z_lo) / sd)
    return upper + lower


def gaussian_rect(upper: np.ndarray, cov: np.ndarray, *, rng=None,
                  n_samples: int = 200_000) -> tuple[float, float]:
    """Lower-orthant probability P(Z <= upper) for Z ~ N(0, cov), cov PSD.

    Deterministic closed forms for numerical rank 0, rank 1, and full-rank
    2x2 covariances; seeded Monte Carlo otherwise.  Returns (probability,
    standard_error); the deterministic paths report standard_error 0.
    """
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    k = upper.size
    L = psd_factor(cov)
    r = L.shape[1]
    if r == 0:
        return (1.0 if np.all(upper >= 0.0) else 0.0), 0.0
    if r == 1:
        lo, hi, ok = _rank1_interval(L[:, 0], upper)
        if not ok:
            return 0.0, 0.0
        return float(np.clip(ndtr(hi) - ndtr(lo), 0.0, 1.0)), 0.0
    if r == 2 and k == 2:
        s0 = np.sqrt(cov[0, 0])
        s1 = np.sqrt(cov[1, 1])
        rho = cov[0, 1] / (s0 * s1)
        return float(bvn_cdf(upper[0] / s0, upper[1] / s1, rho)), 0.0
    if rng is None:
        rng = np.random.Generator(np.random.Philox(key=np.array([0, 0], dtype=np.uint64)))
    hits = 0
    total = 0
    chunk = 65_536
    while total < n_samples:
        b = min(chunk, n_samples - total)
        z = rng.standard_normal((b, r)) @ L.T
        hits += int(np.sum(np.all(z <= upper[None, :], axis=1)))
        total += b
    p = hits / total
    se = np.sqrt(max(p * (1.0 - p), 1.0 / total) / total)
    return float(p), float(se)
