"""Exact finite-sample cdf of the post-selection estimator's scaled error.

Evaluates, for the general-to-specific procedure, the distribution function

    G(t) = P( sqrt(n) A (theta_tilde - theta) <= t ),

through its explicit finite-n formula: a mixture over candidate orders p of
shifted (possibly singular) Gaussian measures, each weighted by products of
normal interval probabilities integrated against the density of the
residual-scale ratio sigma_hat/sigma.

Evaluation strategy
-------------------
The outer scale integral runs over equal-mass Gauss-Legendre panels of the
chi-based ratio density, truncated where the tail mass drops below 1e-10.
For scalar targets (k = 1) every inner integral is deterministic: closed
interval arithmetic when the conditional spread vanishes, panel quadrature
otherwise.  For k >= 2 the inner z-integral uses seeded Gaussian sampling
(the integrand depends on z only through the orthant indicator and the
scalar b'z), with the scale integral folded per sample either exactly
(vanishing conditional spread, via a cumulative lookup table) or by a
matrix of interval probabilities over the scale nodes.  Results carry an
abs_error that combines quadrature refinement, truncated mass, and three
sampling standard errors; identical query + budget + seed replays
bit-identically.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr
from scipy.stats import chi as _chi

from ._gauss import (
    TAIL_CUT,
    gaussian_rect,
    gauss_prob_edges,
    gl_panels,
    norm_pdf,
    ray_halfline_prob,
)
from .errors import ValidationError
from .regression_core import (
    RegressionProblem,
    eta,
    projection_quantities,
)
from .selection import GeneralToSpecific

__all__ = [
    "CdfQuery",
    "CdfResult",
    "AccuracyBudget",
    "SigmaRatioDensity",
    "delta",
    "sigma_ratio_pdf",
    "cdf_exact",
    "cdf_exact_decomposed",
    "DecomposedCdf",
]

# Numerical-rank style cutoffs for the degenerate branches of the formula.
_ZERO_VAR_REL = 1e-24   # variance this small (relative) counts as a point mass
_ZERO_SD_REL = 1e-12


def delta(s: float, a, b):
    """Probability that N(0, s^2) lies within distance b of a.

    Computed as Phi((b-a)/s) - Phi((-b-a)/s), clipped below at 0 (negative
    b) and symmetric in the sign of a; a = +/-inf gives 0.  For s = 0 the
    normal degenerates at zero and the value is the indicator of |a| < b.
    ``a`` and ``b`` may be arrays (broadcast); ``s`` is a nonnegative
    scalar.
    """
    if not (s >= 0.0):
        raise ValidationError(f"spread s must be nonnegative, got {s!r}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if s == 0.0:
        out = (np.abs(a) < b).astype(float)
        return out if out.ndim else float(out)
    with np.errstate(invalid="ignore", over="ignore"):
        out = ndtr((b - a) / s) - ndtr((-b - a) / s)
    # +/-inf - inf produces NaN only if b is infinite, which is outside the
    # contract; infinite a saturates both cdfs the same way -> 0.
    out = np.where(np.isinf(a), 0.0, out)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SigmaRatioDensity:
    """Density of sigma_hat/sigma: sqrt(chi^2_dof / dof)."""

    dof: int

    def __post_init__(self):
        if not (isinstance(self.dof, (int, np.integer)) and self.dof >= 1):
            raise ValidationError(f"dof must be a positive integer, got {self.dof!r}")
        object.__setattr__(self, "dof", int(self.dof))

    @property
    def _dist(self):
        return _chi(df=self.dof, scale=1.0 / np.sqrt(self.dof))

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        return self._dist.pdf(s)

    def ppf(self, q):
        return self._dist.ppf(q)

    def cdf(self, s):
        return self._dist.cdf(s)

    def mode(self) -> float:
        """Maximizer of the density: sqrt((dof-1)/dof) for dof >= 2."""
        if self.dof < 2:
            raise ValidationError("mode formula needs dof >= 2")
        return float(np.sqrt((self.dof - 1) / self.dof))


def sigma_ratio_pdf(dof: int, s) -> float | np.ndarray:
    """Density of (chi^2_dof / dof)^(1/2) at s > 0."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0.0):
        raise ValidationError("s must be positive")
    out = SigmaRatioDensity(dof).pdf(s_arr)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AccuracyBudget:
    """Accuracy settings for the cdf evaluators.

    tol is the absolute quadrature target; refinement doubles panel counts
    until successive totals differ by less than tol/2 or max_refinements is
    hit (the result is then flagged).  n_z Gaussian samples drive each
    k >= 2 inner integral; seed keys every random stream.
    """

    tol: float = 1e-5
    n_z: int = 100_000
    seed: int = 0
    max_refinements: int = 3
    s_panels: int = 12
    z_panels: int = 12
    nodes_per_panel: int = 12

    def __post_init__(self):
        if not (self.tol > 0 and self.n_z >= 100 and self.max_refinements >= 0
                and self.s_panels >= 2 and self.z_panels >= 2
                and self.nodes_per_panel >= 2 and self.seed >= 0):
            raise ValidationError("invalid accuracy budget")


@dataclass(frozen=True)
class CdfQuery:
    """Point query for the finite-sample cdf: target A, argument t, parameters."""

    A: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    sigma: float
    rule: GeneralToSpecific

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        k, P = A.shape
        if np.linalg.matrix_rank(A) < k:
            raise ValidationError("A must have full row rank")
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if t.shape != (k,):
            raise ValidationError(f"t must have length k={k}")
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (P,) or not np.all(np.isfinite(theta)):
            raise ValidationError(f"theta must be a finite vector of length {P}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError("sigma must be positive")
        if not isinstance(self.rule, GeneralToSpecific):
            raise ValidationError("exact cdf is defined for the general-to-specific rule")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass(frozen=True)
class CdfResult:
    """A cdf value with an accuracy bound and an evaluation descriptor."""

    value: float
    abs_error: float
    method: str
    clamped: bool = False
    warning: str | None = None
    term_trace: object | None = None


@dataclass(frozen=True)
class DecomposedCdf:
    """Per-order decomposition: conditional cdfs and selection probabilities."""

    orders: tuple[int, ...]
    conditional: np.ndarray      # G(t | p) for each order
    weights: np.ndarray          # pi(p), all positive, summing to ~1
    total: float
    abs_error: float
    method: str


class _ExactEngine:
    """Assembles the finite-n mixture formula for one (problem, query) pair."""

    def __init__(self, problem: RegressionProblem, query: CdfQuery, budget: AccuracyBudget):
        if query.A.shape[1] != problem.P:
            raise ValidationError("query A width does not match problem dimension")
        query.rule.validate_for(problem.P, problem.O)
        # the query's (theta, sigma) override the problem's: all mean-value
        # quantities below must come from the query's parameter point
        if not np.array_equal(problem.theta, query.theta):
            problem = RegressionProblem(X=problem.X, theta=query.theta,
                                        sigma=problem.sigma, O=problem.O)
        self.problem = problem
        self.query = query
        self.budget = budget
        P, O, n = problem.P, problem.O, problem.n
        self.k = query.A.shape[0]
        self.sqrt_n = np.sqrt(n)
        self.ratio = SigmaRatioDensity(problem.dof)
        self.pq = [None] + [projection_quantities(problem, query.A, p) for p in range(1, P + 1)]
        # sqrt(n) * (trailing coordinate of the order-q mean vector)
        self.m = np.zeros(P + 1)
        for q in range(1, P + 1):
            self.m[q] = self.sqrt_n * self.pq[q].eta_np[q - 1]
        # orthant shifts sqrt(n) A (eta(p) - theta) for each admissible order
        self.shift = {p: self.sqrt_n * (query.A @ (eta(problem, p) - query.theta))
                      for p in range(O, P + 1)}
        # covariance (up to sigma^2) of the order-p Gaussian on the target scale
        gram = problem.gram
        self.omega = {}
        for p in range(max(O, 1), P + 1):
            Ap = query.A[:, :p]
            om = Ap @ np.linalg.solve(gram[:p, :p], Ap.T)
            self.omega[p] = 0.5 * (om + om.T)
        self.c = np.zeros(P + 1)
        for p in range(O + 1, P + 1):
            self.c[p] = query.rule.c(p, O)
        self.sigma = query.sigma
        self._z_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    # ---- sampled z draws for k >= 2 terms (one draw per order, reused
    # across refinement levels so refinement measures quadrature only) ----
    def _z_sample(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """(z, a) with z ~ N(0, sigma^2 A[p] G_p^{-1} A[p]') and a = m_p + b_p z."""
        if p not in self._z_cache:
            rng = np.random.Generator(np.random.Philox(
                key=np.array([self.budget.seed, p], dtype=np.uint64)))
            gram_p = self.problem.gram[:p, :p]
            L = np.linalg.cholesky(gram_p)
            Ap = self.query.A[:, :p]
            M = self.sigma * solve_triangular(L, Ap.T, lower=True)   # (p, k)
            xi = rng.standard_normal((self.budget.n_z, p))
            z = xi @ M
            a = self.m[p] + z @ self.pq[p].b_np
            self._z_cache[p] = (z, a)
        return self._z_cache[p]

    # ---- scale grid ----
    def _s_grid(self, n_panels: int, breaks=()):
        q_lo, q_hi = 1e-12, 1.0 - 1e-10
        edges = self.ratio.ppf(np.linspace(q_lo, q_hi, n_panels + 1))
        if len(breaks):
            extra = [b for b in breaks if edges[0] < b < edges[-1]]
            if extra:
                edges = np.unique(np.concatenate([edges, np.asarray(extra)]))
        s, w = gl_panels(edges, self.budget.nodes_per_panel)
        return s, w * self.ratio.pdf(s), q_lo + (1.0 - q_hi)

    def _tail_products(self, s: np.ndarray):
        """prod_{q > p} Delta factors at each scale node, for p = O..P."""
        P, O = self.problem.P, self.problem.O
        tail = {P: np.ones_like(s)}
        for p in range(P - 1, O - 1, -1):
            q = p + 1
            d = delta(self.sigma * self.pq[q].xi_np, self.m[q],
                      s * self.c[q] * self.sigma * self.pq[q].xi_np)
            tail[p] = tail[q] * d
        return tail

    # ---- first (lowest-order) term ----
    def _core_orthant(self, u: np.ndarray) -> tuple[float, float]:
        O = self.problem.O
        if O == 0:
            return (1.0 if np.all(u >= 0.0) else 0.0), 0.0
        rng = np.random.Generator(np.random.Philox(
            key=np.array([self.budget.seed, 10_000], dtype=np.uint64)))
        return gaussian_rect(u, self.sigma ** 2 * self.omega[O], rng=rng,
                             n_samples=self.budget.n_z)

    # ---- deterministic k = 1 inner integrals ----
    def _term_k1(self, p: int, u: float, n_panels: int, z_panels: int):
        """(value, error) of the order-p term for scalar targets."""
        sig = self.sigma
        xi, zeta, b = self.pq[p].xi_np, self.pq[p].zeta_np, float(self.pq[p].b_np[0])
        mp = self.m[p]
        cssx = self.c[p] * sig * xi
        var_z = sig ** 2 * self.omega[p][0, 0]
        err = 0.0

        if var_z <= _ZERO_VAR_REL * sig ** 2:
            # degenerate target block: z is a point mass at 0
            s, w, trunc = self._s_grid(n_panels)
            tail = self._tail_products(s)[p]
            inner = 1.0 - delta(sig * zeta, mp, s * cssx)
            val = float(np.sum(w * tail * inner)) if u >= 0.0 else 0.0
            return val, err + trunc

        sd_z = np.sqrt(var_z)
        if zeta <= _ZERO_SD_REL * xi:
            # conditional spread vanishes: the inner expectation is a
            # two-ray interval probability, exact at every scale node; the
            # scale integrand kinks where a ray endpoint crosses u.
            breaks = []
            if cssx > 0:
                if abs(b) > 0:
                    breaks.append(abs(mp + b * u) / cssx)
                else:
                    breaks.append(abs(mp) / cssx)
            s, w, trunc = self._s_grid(n_panels, breaks=breaks)
            tail = self._tail_products(s)[p]
            B = s * cssx
            pz = self._ray_halfline_prob(mp, b, B, u, sd_z)
            val = float(np.sum(w * tail * pz))
            return val, err + trunc

        # smooth case: panel quadrature in z against the scale-node matrix
        s, w, trunc = self._s_grid(n_panels)
        tail = self._tail_products(s)[p]
        wt = w * tail
        t0 = float(np.sum(wt))
        z_hi = min(u, TAIL_CUT * sd_z)
        if z_hi <= -TAIL_CUT * sd_z:
            return 0.0, err + trunc + float(ndtr(-TAIL_CUT))
        edges = gauss_prob_edges(-TAIL_CUT * sd_z, z_hi, z_panels, 0.0, sd_z)
        z, vw = gl_panels(edges, self.budget.nodes_per_panel)
        vw = vw * norm_pdf(z, sd_z)
        dmat = delta(sig * zeta, (mp + b * z)[:, None], (s * cssx)[None, :])
        val = float(np.sum(vw) * t0 - vw @ dmat @ wt)
        return val, err + trunc + float(ndtr(-TAIL_CUT))

    @staticmethod
    def _ray_halfline_prob(mp: float, b: float, B: np.ndarray, u: float, sd_z: float):
        """P(z <= u, |mp + b z| >= B) for z ~ N(0, sd_z^2), vector of B >= 0."""
        return ray_halfline_prob(mp, b, B, u, sd_z)

    # ---- sampled k >= 2 inner integrals ----
    def _term_sampled(self, p: int, u: np.ndarray, n_panels: int):
        """(value, pi_value, error, se) of the order-p term via z sampling."""
        sig = self.sigma
        xi, zeta = self.pq[p].xi_np, self.pq[p].zeta_np
        cssx = self.c[p] * sig * xi
        z, a = self._z_sample(p)
        ind = np.all(z <= u[None, :], axis=1)
        N = z.shape[0]

        if zeta <= _ZERO_SD_REL * xi:
            # exact scale integral per sample via a cumulative lookup:
            # 1 - Delta degenerates to the indicator {s <= |a|/(c sigma xi)}
            s_d = self.ratio.ppf(np.linspace(1e-12, 1.0 - 1e-10, 4097))
            f_d = self._tail_products(s_d)[p] * self.ratio.pdf(s_d)
            M = np.concatenate([[0.0], np.cumsum(0.5 * (f_d[1:] + f_d[:-1]) * np.diff(s_d))])
            if cssx > 0:
                s_star = np.abs(a) / cssx
                vals = np.interp(s_star, s_d, M)
            else:  # c_p = 0 can only occur at the protected order, not here
                vals = np.full(N, M[-1])
            interp_slop = 1e-7
        else:
            s, w, trunc = self._s_grid(n_panels)
            wt = w * self._tail_products(s)[p]
            t0 = float(np.sum(wt))
            vals = np.empty(N)
            B = s * cssx
            chunk = 8192
            for lo in range(0, N, chunk):
                hi = min(lo + chunk, N)
                dmat = delta(sig * zeta, a[lo:hi, None], B[None, :])
                vals[lo:hi] = t0 - dmat @ wt
            interp_slop = 0.0

        term_vals = np.where(ind, vals, 0.0)
        value = float(np.mean(term_vals))
        pi_value = float(np.mean(vals))
        se = float(np.std(term_vals) / np.sqrt(N))
        return value, pi_value, interp_slop, se

    # ---- one full assembly at a given refinement level ----
    def assemble(self, level: int):
        b = self.budget
        n_panels = b.s_panels * (2 ** level)
        z_panels = b.z_panels * (2 ** level)
        P, O = self.problem.P, self.problem.O
        t = self.query.t

        s, w, trunc = self._s_grid(n_panels)
        tail = self._tail_products(s)
        orders = list(range(O, P + 1))
        terms = np.zeros(len(orders))
        pis = np.zeros(len(orders))
        err = trunc
        se_total = 0.0

        u0 = t - self.shift[O]
        core, core_se = self._core_orthant(u0)
        w_tail = float(np.sum(w * tail[O]))
        terms[0] = core * w_tail
        pis[0] = w_tail
        se_total += core_se * w_tail

        for i, p in enumerate(range(O + 1, P + 1), start=1):
            u = t - self.shift[p]
            if self.k == 1:
                val, e = self._term_k1(p, float(u[0]), n_panels, z_panels)
                pi_val, e_pi = self._term_k1(p, np.inf, n_panels, z_panels)
                terms[i], pis[i] = val, pi_val
                err += e
            else:
                val, pi_val, e, se = self._term_sampled(p, u, n_panels)
                terms[i], pis[i] = val, pi_val
                err += e
                se_total += se
        return terms, pis, err, se_total, np.array(orders)

    def evaluate(self):
        b = self.budget
        totals: list[float] = []
        warning = None
        for level in range(b.max_refinements + 1):
            terms, pis, err, se_total, orders = self.assemble(level)
            totals.append(float(np.sum(terms)))
            if len(totals) >= 2 and abs(totals[-1] - totals[-2]) < 0.5 * b.tol:
                break
        total = totals[-1]
        refine_gap = abs(totals[-1] - totals[-2]) if len(totals) >= 2 else 0.0
        if refine_gap >= 0.5 * b.tol:
            warning = "refinement budget exhausted before reaching tol"
        pi_defect = abs(1.0 - float(np.sum(pis)))
        abs_error = refine_gap + err + pi_defect + 3.0 * se_total
        return terms, pis, orders, total, abs_error, level, warning

    def method_string(self, level: int) -> str:
        b = self.budget
        return (f"mixture-formula;s_panels={b.s_panels * 2 ** level};"
                f"nodes={b.nodes_per_panel};levels={level};"
                f"n_z={b.n_z};seed={b.seed};k={self.k}")


def cdf_exact(problem: RegressionProblem, query: CdfQuery,
              budget: AccuracyBudget | None = None) -> CdfResult:
    """Finite-sample cdf of sqrt(n) A (theta_tilde - theta) at query.t.

    The design, sample size and protected order come from ``problem``; the
    parameter point (theta, sigma), target matrix, argument and rule come
    from ``query`` (the problem's own theta/sigma are ignored, which makes
    parameter sweeps cheap).  See the module docstring for the evaluation
    strategy and error accounting.
    """
    budget = budget or AccuracyBudget()
    engine = _ExactEngine(problem, query, budget)
    terms, pis, orders, total, abs_error, level, warning = engine.evaluate()
    clamped = not (0.0 <= total <= 1.0)
    value = float(np.clip(total, 0.0, 1.0))
    return CdfResult(value=value, abs_error=float(abs_error),
                     method=engine.method_string(level),
                     clamped=clamped, warning=warning)


def cdf_exact_decomposed(problem: RegressionProblem, query: CdfQuery,
                         budget: AccuracyBudget | None = None) -> DecomposedCdf:
    """Per-order split of the exact cdf: (G(t|p), pi(p)) with Sum G*pi = G(t)."""
    budget = budget or AccuracyBudget()
    engine = _ExactEngine(problem, query, budget)
    terms, pis, orders, total, abs_error, level, warning = engine.evaluate()
    conditional = np.clip(np.divide(terms, pis, out=np.zeros_like(terms),
                                    where=pis > 0), 0.0, 1.0)
    return DecomposedCdf(orders=tuple(int(p) for p in orders),
                         conditional=conditional, weights=pis,
                         total=float(np.clip(total, 0.0, 1.0)),
                         abs_error=float(abs_error),
                         method=engine.method_string(level))
