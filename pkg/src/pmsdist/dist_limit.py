"""Large-sample limit cdf of the post-selection estimator under local drift.

For a parameter sequence theta + gamma/sqrt(n) the scaled estimation error
sqrt(n) A (theta_tilde - theta - gamma/sqrt(n)) converges in distribution;
this module evaluates the limit cdf, its density when one exists, and the
constants (p_star, shift vectors beta, scalar drifts nu) that parameterize
both.

Two independent evaluation paths are provided.  The primary path works
through the probabilistic representation of the limit: independent scalar
Gaussians W_p (variance sigma^2 xi_p^2) drive partial sums
Z_p = sum_{r <= p} xi_r^{-2} C_r W_r, and each mixture term is the joint
probability P(Z_p <= u_p, |W_p + nu_p| >= c_p sigma xi_p) times later-stage
interval factors.  Joint probabilities reduce to closed bivariate-normal
forms for scalar targets, to deterministic one-dimensional quadrature of
conditional orthants for two-dimensional targets, and to seeded sampling
beyond that.  The secondary path (`cdf_limit_via_integral`) evaluates the
mixture-of-shifted-Gaussians integral form directly, with its own shift
constants, and exists purely to cross-check the first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ._gauss import (
    TAIL_CUT,
    bvn_cdf,
    gaussian_rect,
    gl_panels,
    gauss_prob_edges,
    norm_pdf,
    psd_factor,
    ray_halfline_prob,
    split_edges,
)
from .dist_exact import AccuracyBudget, CdfResult, delta
from .errors import DensityUndefinedError, ValidationError
from .regression_core import LimitQuantities, order_of
from .selection import GeneralToSpecific

__all__ = [
    "LocalAlternative",
    "LocalShiftConstants",
    "LimitCdfTermTrace",
    "OscillationReport",
    "local_shift_constants",
    "cdf_limit",
    "cdf_limit_via_integral",
    "pdf_limit",
    "limit_nonconstancy_scan",
    "full_model_gaussian_cdf",
    "sample_zw",
]

_ZERO_SD_REL = 1e-12


@dataclass(frozen=True)
class LocalAlternative:
    """Local parameter drift: true coefficients theta + gamma/sqrt(n), scale sigma."""

    theta: np.ndarray
    gamma: np.ndarray
    sigma: float

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if theta.ndim != 1 or gamma.shape != theta.shape:
            raise ValidationError("theta and gamma must be vectors of equal length")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(gamma))):
            raise ValidationError("theta and gamma must be finite")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError("sigma must be positive")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def P(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class LocalShiftConstants:
    """p_star together with the shift vectors beta(p) and drift scalars nu_p.

    beta maps p in {p_star, ..., P} to the k-vector shift of the order-p
    mixture component; nu maps p in {p_star+1, ..., P} to the scalar drift
    of the order-p trailing coordinate."""

    p_star: int
    beta: dict[int, np.ndarray]
    nu: dict[int, float]


@dataclass(frozen=True)
class LimitCdfTermTrace:
    """Per-order breakdown of the limit cdf value.

    core_values holds the orthant/joint-probability component of each term,
    delta_products the product of later-stage interval factors, and
    term_values their products; total is the sum of term_values."""

    orders: tuple[int, ...]
    term_values: tuple[float, ...]
    delta_products: tuple[float, ...]
    core_values: tuple[float, ...]

    @property
    def total(self) -> float:
        return float(sum(self.term_values))


@dataclass(frozen=True)
class OscillationReport:
    """Values of gamma -> limit cdf over a grid, and their max-min spread."""

    gamma_grid: np.ndarray
    values: np.ndarray
    oscillation: float
    t: np.ndarray


def local_shift_constants(Q: np.ndarray, A: np.ndarray, theta, gamma,
                          O: int = 0) -> LocalShiftConstants:
    """Shift constants of the limit distribution under drift gamma.

    For p between p_star = max(order(theta), O) and P the mixture component
    of order p is shifted by

        beta(p) = A ( Q[p,p]^{-1} Q[p, p+1:] gamma[p+1:] ; -gamma[p+1:] ),

    so beta(P) = 0 and beta(0) = -A gamma, and for p > p_star the trailing
    coordinate of the order-p fit drifts by

        nu_p = gamma_p + ( Q[p,p]^{-1} Q[p, p+1:] gamma[p+1:] )_p.
    """
    Q = np.asarray(Q, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    P = Q.shape[0]
    if A.shape[1] != P or theta.shape != (P,) or gamma.shape != (P,):
        raise ValidationError("dimension mismatch between Q, A, theta, gamma")
    if not (0 <= O < P):
        raise ValidationError(f"O must lie in [0, P), got {O}")
    p_star = max(order_of(theta), O)
    beta: dict[int, np.ndarray] = {}
    nu: dict[int, float] = {}
    for p in range(p_star, P + 1):
        vec = np.zeros(P)
        if p < P:
            vec[p:] = -gamma[p:]
        if 0 < p < P:
            head = np.linalg.solve(Q[:p, :p], Q[:p, p:] @ gamma[p:])
            vec[:p] = head
        beta[p] = A @ vec
        if p > p_star:
            if p == P:
                nu[p] = float(gamma[P - 1])
            else:
                head = np.linalg.solve(Q[:p, :p], Q[:p, p:] @ gamma[p:])
                nu[p] = float(gamma[p - 1] + head[p - 1])
    return LocalShiftConstants(p_star=p_star, beta=beta, nu=nu)


def _nu_all(Q: np.ndarray, gamma: np.ndarray, lo: int) -> np.ndarray:
    """nu_p for every p in (lo, P], stored at index p of a (P+1,) array."""
    P = Q.shape[0]
    out = np.full(P + 1, np.nan)
    for p in range(lo + 1, P + 1):
        if p == P:
            out[p] = gamma[P - 1]
        else:
            head = np.linalg.solve(Q[:p, :p], Q[:p, p:] @ gamma[p:])
            out[p] = gamma[p - 1] + head[p - 1]
    return out


# ---------------------------------------------------------------------------
# primary engine: representation-based, vectorized over rows of T
# ---------------------------------------------------------------------------

def _rect_rows(U: np.ndarray, cov: np.ndarray, *, seed: int, n_samples: int):
    """P(N(0, cov) <= u) for every row u of U; (values, se, sampled_flag)."""
    m, k = U.shape
    L = psd_factor(cov)
    r = L.shape[1]
    if r == 0:
        return np.all(U >= 0.0, axis=1).astype(float), np.zeros(m), False
    if r == 1:
        load = L[:, 0]
        tol = 1e-13 * max(float(np.max(np.abs(load))), 1.0)
        pos, neg = load > tol, load < -tol
        zero = ~(pos | neg)
        hi = np.min(U[:, pos] / load[pos], axis=1) if pos.any() else np.full(m, np.inf)
        lo = np.max(U[:, neg] / load[neg], axis=1) if neg.any() else np.full(m, -np.inf)
        feas = np.all(U[:, zero] >= 0.0, axis=1) if zero.any() else np.ones(m, bool)
        vals = np.where(feas, np.maximum(ndtr(hi) - ndtr(lo), 0.0), 0.0)
        return vals, np.zeros(m), False
    if k == 2:
        s = np.sqrt(np.diag(cov))
        rho = float(np.clip(cov[0, 1] / (s[0] * s[1]), -1.0, 1.0))
        vals = bvn_cdf(U[:, 0] / s[0], U[:, 1] / s[1], rho)
        return np.asarray(vals, dtype=float), np.zeros(m), False
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    X = rng.standard_normal((n_samples, r)) @ L.T
    vals = np.empty(m)
    se = np.empty(m)
    for j in range(m):
        hit = np.all(X <= U[j], axis=1)
        vals[j] = hit.mean()
        se[j] = np.sqrt(vals[j] * (1.0 - vals[j]) / n_samples)
    return vals, se, True


def _interval_prob_cond(V: np.ndarray, load: np.ndarray) -> np.ndarray:
    """P(load * xi <= v coordinatewise), xi standard normal, rows of V."""
    tol = 1e-13 * max(float(np.max(np.abs(load))), 1.0)
    pos, neg = load > tol, load < -tol
    zero = ~(pos | neg)
    n = V.shape[0]
    hi = np.min(V[:, pos] / load[pos], axis=1) if pos.any() else np.full(n, np.inf)
    lo = np.max(V[:, neg] / load[neg], axis=1) if neg.any() else np.full(n, -np.inf)
    feas = np.all(V[:, zero] >= 0.0, axis=1) if zero.any() else np.ones(n, bool)
    return np.where(feas, np.maximum(ndtr(hi) - ndtr(lo), 0.0), 0.0)


def _cond_breakpoints(u: np.ndarray, g: np.ndarray, load: np.ndarray) -> list[float]:
    """x-values where the conditional interval formula changes regime.

    The conditional upper bounds are (u_i - g_i x) / load_i; crossings of two
    bounds and sign flips of zero-loading coordinates are the only kinks.
    """
    k = u.size
    tol = 1e-13 * max(float(np.max(np.abs(load))), 1.0)
    breaks: list[float] = []
    idx = [i for i in range(k) if abs(load[i]) > tol]
    for a_pos in range(len(idx)):
        for b_pos in range(a_pos + 1, len(idx)):
            i, j = idx[a_pos], idx[b_pos]
            den = g[i] / load[i] - g[j] / load[j]
            if abs(den) > 1e-13:
                breaks.append((u[i] / load[i] - u[j] / load[j]) / den)
    for i in range(k):
        if abs(load[i]) <= tol and abs(g[i]) > 1e-13:
            breaks.append(u[i] / g[i])
    return [b for b in breaks if np.isfinite(b)]


def _joint_rows(U: np.ndarray, cov_z: np.ndarray, cov_zw: np.ndarray,
                var_w: float, nu: float, B: float, sigma: float, *,
                seed: int, budget: AccuracyBudget, level: int):
    """P(Z <= u_row, |W + nu| >= B) for centered joint Gaussians (Z, W).

    Z is k-variate with covariance cov_z, W scalar with variance var_w,
    Cov(Z, W) = cov_zw.  Returns (values, se, sampled_flag, quad_flag).
    """
    m, k = U.shape
    sw = np.sqrt(var_w)
    w_lo, w_hi = -nu - B, -nu + B
    if k == 1:
        sz2 = float(cov_z[0, 0])
        if sz2 <= _ZERO_SD_REL ** 2 * var_w:
            ray = ndtr(w_lo / sw) + 1.0 - ndtr(w_hi / sw)
            return np.where(U[:, 0] >= 0.0, ray, 0.0), np.zeros(m), False, False
        sz = np.sqrt(sz2)
        rho = float(np.clip(cov_zw[0] / (sz * sw), -1.0, 1.0))
        h = U[:, 0] / sz
        vals = (np.asarray(bvn_cdf(h, np.full(m, w_lo / sw), rho))
                + ndtr(h)
                - np.asarray(bvn_cdf(h, np.full(m, w_hi / sw), rho)))
        return np.clip(vals, 0.0, 1.0), np.zeros(m), False, False

    slope = cov_zw / var_w
    S = cov_z - np.outer(cov_zw, cov_zw) / var_w
    L = psd_factor(S)
    r = L.shape[1]
    if r == 0:
        # Z is carried entirely by W: coordinatewise half-lines in w
        tol = 1e-13 * max(float(np.max(np.abs(slope))), 1.0)
        pos, neg = slope > tol, slope < -tol
        zero = ~(pos | neg)
        hi = np.min(U[:, pos] / slope[pos], axis=1) if pos.any() else np.full(m, np.inf)
        lo = np.max(U[:, neg] / slope[neg], axis=1) if neg.any() else np.full(m, -np.inf)
        feas = np.all(U[:, zero] >= 0.0, axis=1) if zero.any() else np.ones(m, bool)
        seg1 = np.maximum(ndtr(np.minimum(hi, w_lo) / sw) - ndtr(lo / sw), 0.0)
        seg2 = np.maximum(ndtr(hi / sw) - ndtr(np.maximum(lo, w_hi) / sw), 0.0)
        return np.where(feas, seg1 + seg2, 0.0), np.zeros(m), False, False

    if r == 1 or (r == 2 and k == 2):
        # deterministic quadrature in x = w / sw over the two rays
        x_lo, x_hi = w_lo / sw, w_hi / sw
        n_panels = budget.z_panels * (2 ** level)
        g = slope * sw
        if r == 2:
            sd = np.sqrt(np.diag(S))
            rho_s = float(np.clip(S[0, 1] / (sd[0] * sd[1]), -1.0, 1.0))
        vals = np.empty(m)
        for j in range(m):
            u = U[j]
            segs = []
            if x_lo > -TAIL_CUT:
                segs.append((-TAIL_CUT, min(x_lo, TAIL_CUT)))
            if x_hi < TAIL_CUT:
                segs.append((max(x_hi, -TAIL_CUT), TAIL_CUT))
            acc = 0.0
            for a, bnd in segs:
                if bnd <= a:
                    continue
                breaks = (_cond_breakpoints(u, g, L[:, 0]) if r == 1 else ())
                edges = split_edges(a, bnd, n_panels, breaks=breaks)
                x, wq = gl_panels(edges, budget.nodes_per_panel)
                V = u[None, :] - np.outer(x, g)
                if r == 1:
                    inner = _interval_prob_cond(V, L[:, 0])
                else:
                    inner = np.asarray(bvn_cdf(V[:, 0] / sd[0], V[:, 1] / sd[1], rho_s))
                acc += float(np.sum(wq * norm_pdf(x) * inner))
            vals[j] = acc
        return vals, np.zeros(m), False, True

    # high-rank fallback: seeded joint sampling, one draw reused per call
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    n = budget.n_z
    w = sw * rng.standard_normal(n)
    Z = np.outer(w, slope) + rng.standard_normal((n, r)) @ L.T
    in_rays = (w <= w_lo) | (w >= w_hi)
    vals = np.empty(m)
    se = np.empty(m)
    for j in range(m):
        hit = in_rays & np.all(Z <= U[j], axis=1)
        vals[j] = hit.mean()
        se[j] = np.sqrt(vals[j] * (1.0 - vals[j]) / n)
    return vals, se, True, False


def _ab1_values(limits: LimitQuantities, p_star: int, nu: np.ndarray,
                sigma: float, c_of: np.ndarray, T: np.ndarray,
                budget: AccuracyBudget, level: int):
    """All representation terms for each row of T.

    Returns (terms (n_orders, m), se_rows (m,), tails (n_orders,),
    cores (n_orders, m), orders, quad_used).
    """
    P, k = limits.P, limits.k
    m = T.shape[0]
    orders = list(range(p_star, P + 1))

    d_fac = {}
    for q in range(p_star + 1, P + 1):
        xq = limits.xi(q)
        d_fac[q] = float(delta(sigma * xq, nu[q], c_of[q] * sigma * xq))
    tails = np.ones(len(orders))
    for i, p in enumerate(orders):
        prod = 1.0
        for q in range(p + 1, P + 1):
            prod *= d_fac[q]
        tails[i] = prod

    shift = {P: np.zeros(k)}
    for p in range(P - 1, p_star - 1, -1):
        r = p + 1
        shift[p] = shift[r] + limits.C(r) * (nu[r] / limits.xi(r) ** 2)

    terms = np.zeros((len(orders), m))
    cores = np.zeros((len(orders), m))
    se_rows = np.zeros(m)
    quad_used = False

    U0 = T + shift[p_star][None, :]
    if p_star == 0:
        core0 = np.all(U0 >= 0.0, axis=1).astype(float)
        se0 = np.zeros(m)
    else:
        cov0 = sigma ** 2 * limits.omega(p_star)
        core0, se0, _ = _rect_rows(U0, cov0, seed=budget.seed + 977,
                                   n_samples=budget.n_z)
    cores[0] = core0
    terms[0] = core0 * tails[0]
    se_rows += se0 * tails[0]

    for i, p in enumerate(range(p_star + 1, P + 1), start=1):
        U = T + shift[p][None, :]
        xi_p = limits.xi(p)
        vals, se, sampled, quad = _joint_rows(
            U, sigma ** 2 * limits.omega(p), sigma ** 2 * limits.C(p),
            sigma ** 2 * xi_p ** 2, nu[p], c_of[p] * sigma * xi_p, sigma,
            seed=budget.seed + 1000 + p, budget=budget, level=level)
        cores[i] = vals
        terms[i] = vals * tails[i]
        se_rows += se * tails[i]
        quad_used = quad_used or quad
    return terms, se_rows, tails, cores, np.array(orders), quad_used


def _cdf_limit_rows(limits: LimitQuantities, p_star: int, nu: np.ndarray,
                    sigma: float, c_of: np.ndarray, T: np.ndarray,
                    budget: AccuracyBudget):
    """Totals with refinement control; returns (totals, errs, trace parts)."""
    terms, se, tails, cores, orders, quad = _ab1_values(
        limits, p_star, nu, sigma, c_of, T, budget, level=0)
    totals = terms.sum(axis=0)
    gap = np.zeros_like(totals)
    level = 0
    if quad:
        for level in range(1, budget.max_refinements + 1):
            terms2, se2, tails2, cores2, _, _ = _ab1_values(
                limits, p_star, nu, sigma, c_of, T, budget, level=level)
            totals2 = terms2.sum(axis=0)
            gap = np.abs(totals2 - totals)
            terms, se, tails, cores, totals = terms2, se2, tails2, cores2, totals2
            if float(np.max(gap)) < 0.5 * budget.tol:
                break
    errs = gap + 3.0 * se
    return totals, errs, terms, tails, cores, orders, level


def cdf_limit(limits: LimitQuantities, alt: LocalAlternative, t,
              rule: GeneralToSpecific,
              budget: AccuracyBudget | None = None) -> CdfResult:
    """Limit cdf of the scaled post-selection error at t, under drift alt.

    Evaluates the probabilistic representation term by term (see module
    docstring); the result's term_trace carries the per-order breakdown.
    """
    budget = budget or AccuracyBudget()
    P, k, O = limits.P, limits.k, limits.O
    if alt.P != P:
        raise ValidationError("alternative dimension does not match limits")
    rule.validate_for(P, O)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.shape != (k,):
        raise ValidationError(f"t must have length k={k}")
    p_star = max(order_of(alt.theta), O)
    nu = _nu_all(limits.Q, alt.gamma, p_star)
    c_of = np.zeros(P + 1)
    for p in range(O + 1, P + 1):
        c_of[p] = rule.c(p, O)
    totals, errs, terms, tails, cores, orders, level = _cdf_limit_rows(
        limits, p_star, nu, alt.sigma, c_of, t[None, :], budget)
    total = float(totals[0])
    trace = LimitCdfTermTrace(
        orders=tuple(int(p) for p in orders),
        term_values=tuple(float(v) for v in terms[:, 0]),
        delta_products=tuple(float(v) for v in tails),
        core_values=tuple(float(v) for v in cores[:, 0]))
    clamped = not (0.0 <= total <= 1.0)
    return CdfResult(value=float(np.clip(total, 0.0, 1.0)),
                     abs_error=float(errs[0]),
                     method=f"representation;level={level};n_z={budget.n_z};"
                            f"seed={budget.seed};k={k}",
                     clamped=clamped, term_trace=trace)


# ---------------------------------------------------------------------------
# secondary engine: direct mixture-integral path (cross-check)
# ---------------------------------------------------------------------------

def cdf_limit_via_integral(limits: LimitQuantities, alt: LocalAlternative, t,
                           rule: GeneralToSpecific,
                           budget: AccuracyBudget | None = None) -> CdfResult:
    """Limit cdf evaluated through the shifted-Gaussian mixture integral.

    Independent of `cdf_limit`: uses the direct shift vectors beta(p) and
    the conditional-spread constants (b, zeta) instead of the joint (Z, W)
    covariance, so transcription errors in either path surface as
    disagreement.  Scalar targets are deterministic; k >= 2 expectations
    use seeded sampling.
    """
    budget = budget or AccuracyBudget()
    P, k, O = limits.P, limits.k, limits.O
    if alt.P != P:
        raise ValidationError("alternative dimension does not match limits")
    rule.validate_for(P, O)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.shape != (k,):
        raise ValidationError(f"t must have length k={k}")
    sigma = alt.sigma
    consts = local_shift_constants(limits.Q, limits.A, alt.theta, alt.gamma, O)
    p_star = consts.p_star

    d_fac = {q: float(delta(sigma * limits.xi(q), consts.nu[q],
                            rule.c(q, O) * sigma * limits.xi(q)))
             for q in range(p_star + 1, P + 1)}

    def tail(p: int) -> float:
        prod = 1.0
        for q in range(p + 1, P + 1):
            prod *= d_fac[q]
        return prod

    err = 0.0
    se_total = 0.0
    u0 = t - consts.beta[p_star]
    if p_star == 0:
        core = 1.0 if np.all(u0 >= 0.0) else 0.0
    else:
        rng = np.random.Generator(np.random.Philox(
            key=np.array([budget.seed + 31, 0], dtype=np.uint64)))
        core, core_se = gaussian_rect(u0, sigma ** 2 * limits.omega(p_star),
                                      rng=rng, n_samples=budget.n_z)
        se_total += core_se * tail(p_star)
    total = core * tail(p_star)

    for p in range(p_star + 1, P + 1):
        u = t - consts.beta[p]
        xi_p, zeta_p = limits.xi(p), limits.zeta(p)
        b_p = limits.b(p)
        nu_p = consts.nu[p]
        B = rule.c(p, O) * sigma * xi_p
        cov_z = sigma ** 2 * limits.omega(p)
        if k == 1:
            var_z = float(cov_z[0, 0])
            if var_z <= (_ZERO_SD_REL * sigma) ** 2:
                val = (1.0 - float(delta(sigma * zeta_p, nu_p, B))) if u[0] >= 0 else 0.0
            elif zeta_p <= _ZERO_SD_REL * xi_p:
                val = float(ray_halfline_prob(nu_p, float(b_p[0]), np.array([B]),
                                              float(u[0]), np.sqrt(var_z))[0])
            else:
                sd_z = np.sqrt(var_z)
                z_hi = min(float(u[0]), TAIL_CUT * sd_z)
                if z_hi <= -TAIL_CUT * sd_z:
                    val = 0.0
                else:
                    n_panels = budget.z_panels * (2 ** budget.max_refinements)
                    edges = gauss_prob_edges(-TAIL_CUT * sd_z, z_hi, n_panels, 0.0, sd_z)
                    z, wq = gl_panels(edges, budget.nodes_per_panel)
                    inner = 1.0 - np.asarray(delta(sigma * zeta_p,
                                                   nu_p + b_p[0] * z, B))
                    val = float(np.sum(wq * norm_pdf(z, sd_z) * inner))
                err += float(ndtr(-TAIL_CUT))
        else:
            rng = np.random.Generator(np.random.Philox(
                key=np.array([budget.seed + 63, p], dtype=np.uint64)))
            L = psd_factor(cov_z)
            Z = rng.standard_normal((budget.n_z, L.shape[1])) @ L.T
            ind = np.all(Z <= u[None, :], axis=1)
            a = nu_p + Z @ b_p
            g = np.where(ind, 1.0 - np.asarray(delta(sigma * zeta_p, a, B)), 0.0)
            val = float(np.mean(g))
            se_total += float(np.std(g) / np.sqrt(budget.n_z)) * tail(p)
        total += val * tail(p)

    clamped = not (0.0 <= total <= 1.0)
    return CdfResult(value=float(np.clip(total, 0.0, 1.0)),
                     abs_error=float(err + 3.0 * se_total),
                     method=f"mixture-integral;n_z={budget.n_z};seed={budget.seed};k={k}",
                     clamped=clamped)


def _mvn_pdf(v: np.ndarray, cov: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise DensityUndefinedError("component covariance is singular")
    q = float(v @ np.linalg.solve(cov, v))
    k = v.size
    return float(np.exp(-0.5 * q - 0.5 * logdet - 0.5 * k * np.log(2.0 * np.pi)))


def pdf_limit(limits: LimitQuantities, alt: LocalAlternative, t,
              rule: GeneralToSpecific) -> float:
    """Density of the limit distribution at t.

    Defined when p_star > 0 and the first p_star target columns have full
    row rank (every mixture component is then absolutely continuous);
    otherwise raises DensityUndefinedError.
    """
    P, k, O = limits.P, limits.k, limits.O
    if alt.P != P:
        raise ValidationError("alternative dimension does not match limits")
    rule.validate_for(P, O)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.shape != (k,):
        raise ValidationError(f"t must have length k={k}")
    sigma = alt.sigma
    consts = local_shift_constants(limits.Q, limits.A, alt.theta, alt.gamma, O)
    p_star = consts.p_star
    if p_star == 0 or np.linalg.matrix_rank(limits.A[:, :p_star]) < k:
        raise DensityUndefinedError(
            "density requires p_star > 0 and a full-row-rank leading target block")

    d_fac = {q: float(delta(sigma * limits.xi(q), consts.nu[q],
                            rule.c(q, O) * sigma * limits.xi(q)))
             for q in range(p_star + 1, P + 1)}

    def tail(p: int) -> float:
        prod = 1.0
        for q in range(p + 1, P + 1):
            prod *= d_fac[q]
        return prod

    val = _mvn_pdf(t - consts.beta[p_star],
                   sigma ** 2 * limits.omega(p_star)) * tail(p_star)
    for p in range(p_star + 1, P + 1):
        v = t - consts.beta[p]
        a = consts.nu[p] + float(limits.b(p) @ v)
        B = rule.c(p, O) * sigma * limits.xi(p)
        one_minus = 1.0 - float(delta(sigma * limits.zeta(p), a, B))
        val += one_minus * _mvn_pdf(v, sigma ** 2 * limits.omega(p)) * tail(p)
    return float(val)


def full_model_gaussian_cdf(limits: LimitQuantities, sigma: float, t) -> float:
    """Cdf of N(0, sigma^2 A Q^{-1} A') at t: the no-selection-effect limit."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    val, _ = gaussian_rect(t, sigma ** 2 * limits.omega(limits.P))
    return float(val)


def limit_nonconstancy_scan(limits: LimitQuantities, theta, sigma: float, t,
                            rule: GeneralToSpecific, gamma_grid,
                            budget: AccuracyBudget | None = None) -> OscillationReport:
    """Max-minus-min of gamma -> limit cdf at t over a grid of drifts.

    A strictly positive oscillation exhibits the dependence of the limit on
    the drift direction; uncorrelated designs report ~0.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    grid = np.atleast_2d(np.asarray(gamma_grid, dtype=float))
    if grid.shape[1] != limits.P:
        raise ValidationError("gamma grid width must equal P")
    values = np.empty(grid.shape[0])
    for i, gamma in enumerate(grid):
        alt = LocalAlternative(theta=theta, gamma=gamma, sigma=sigma)
        values[i] = cdf_limit(limits, alt, t, rule, budget).value
    return OscillationReport(gamma_grid=grid, values=values,
                             oscillation=float(values.max() - values.min()),
                             t=np.atleast_1d(np.asarray(t, dtype=float)))


def sample_zw(limits: LimitQuantities, sigma: float, n_draws: int,
              seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw (W, Z) from the representation underlying the limit cdf.

    W has independent columns W_r ~ N(0, sigma^2 xi_r^2), r = 1..P, and
    Z[:, p-1, :] = sum_{r <= p} xi_r^{-2} C_r W_r is the order-p partial
    sum.  Returns (W of shape (n, P), Z of shape (n, P, k)).
    """
    P, k = limits.P, limits.k
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    W = rng.standard_normal((n_draws, P))
    for r in range(1, P + 1):
        W[:, r - 1] *= sigma * limits.xi(r)
    Z = np.zeros((n_draws, P, k))
    acc = np.zeros((n_draws, k))
    for r in range(1, P + 1):
        acc = acc + np.outer(W[:, r - 1], limits.C(r) / limits.xi(r) ** 2)
        Z[:, r - 1, :] = acc
    return W, Z
