"""Seeded brute-force oracle: simulate, select, estimate, tally.

Each replication r draws its errors from a counter-based stream keyed by
(master_seed, r), so results are bit-identical however the work is split
across processes.  Replications are processed in fixed-size chunks by
vectorized kernels (one per selection-rule family) that reproduce the
scalar selection/estimation pipeline; per-chunk integer tallies are merged
in chunk order.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ValidationError
from .regression_core import RegressionProblem, xi_n
from .selection import (
    GeneralToSpecific,
    InformationCriterion,
    SubsetMask,
    Thresholding,
    ic_threshold,
)

__all__ = [
    "CHUNK",
    "SimulationPlan",
    "EmpiricalCdf",
    "simulate_response",
    "empirical_cdf",
    "estimator_error_probability",
    "dump_replications",
]

CHUNK = 8192


@dataclass(frozen=True)
class SimulationPlan:
    """Everything one simulation study needs: problem, rule, target, size, seed."""

    problem: RegressionProblem
    rule: object
    A: np.ndarray
    replications: int
    master_seed: int

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        k, P = A.shape
        if P != self.problem.P:
            raise ValidationError("target width must equal the problem dimension")
        if np.linalg.matrix_rank(A) < k:
            raise ValidationError("A must have full row rank")
        if not (isinstance(self.replications, (int, np.integer)) and self.replications >= 1):
            raise ValidationError("replications must be a positive integer")
        if not (isinstance(self.master_seed, (int, np.integer)) and self.master_seed >= 0):
            raise ValidationError("master_seed must be a nonnegative integer")
        if isinstance(self.rule, GeneralToSpecific):
            self.rule.validate_for(self.problem.P, self.problem.O)
        elif isinstance(self.rule, InformationCriterion):
            if self.rule.family[0].P != self.problem.P:
                raise ValidationError("mask family does not match problem dimension")
        elif isinstance(self.rule, Thresholding):
            if len(self.rule.cutoff) != self.problem.P:
                raise ValidationError("cutoff length must equal the problem dimension")
        else:
            raise ValidationError(f"unsupported rule {type(self.rule).__name__}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "master_seed", int(self.master_seed))

    @property
    def k(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class EmpiricalCdf:
    """Empirical distribution of the scaled estimation error over a grid.

    estimates[i] is the fraction of valid replications with the error
    coordinatewise below grid[i]; conditional maps each selected model to
    the within-model fractions, and model_counts to its tally, so that
    sum_p conditional[p] * model_counts[p] / valid == estimates exactly.
    """

    grid: np.ndarray
    estimates: np.ndarray
    standard_errors: np.ndarray
    model_counts: dict
    conditional: dict
    replications: int
    valid: int
    degenerate_count: int


def _rng(master: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        key=np.array([master, rep], dtype=np.uint64)))


def simulate_response(problem: RegressionProblem, seed) -> np.ndarray:
    """One response draw Y = X theta + sigma * eps, eps ~ N(0, I_n).

    ``seed`` is either a (master_seed, replication_index) pair — the keying
    used by every plan-driven routine here — or a bare integer, read as
    (seed, 0).  Identical keys reproduce Y bit-for-bit.
    """
    master, rep = seed if isinstance(seed, (tuple, list)) else (seed, 0)
    eps = _rng(int(master), int(rep)).standard_normal(problem.n)
    return problem.X @ problem.theta + problem.sigma * eps


def _draw_errors(problem: RegressionProblem, master: int, lo: int, hi: int) -> np.ndarray:
    """Stacked eps rows for replications lo..hi-1, one keyed stream each."""
    out = np.empty((hi - lo, problem.n))
    for i, rep in enumerate(range(lo, hi)):
        out[i] = _rng(master, rep).standard_normal(problem.n)
    return out


class _Kernel:
    """Vectorized per-chunk selection + estimation for one plan."""

    def __init__(self, plan: SimulationPlan):
        self.plan = plan
        pr = plan.problem
        self.n, self.P, self.k = pr.n, plan.A.shape[1], plan.k
        self.sqrt_n = np.sqrt(pr.n)
        self.A_theta = plan.A @ pr.theta
        # solve maps: coef(p) = Xmat[p] @ Y with Xmat[p] = R_p^{-1} Q_p'
        self.Xmat = [np.zeros((0, self.n))]
        for p in range(1, self.P + 1):
            q, r = pr._qr[p - 1]
            self.Xmat.append(solve_triangular(r, q.T, lower=False))
        self.Qf = pr._qr[self.P - 1][0]
        rule = plan.rule
        if isinstance(rule, GeneralToSpecific):
            self.mode = "g2s"
            self.xi = np.array([xi_n(pr, p) for p in range(1, self.P + 1)])
            self.rdiag = np.array([pr._qr[p - 1][1][p - 1, p - 1] for p in range(1, self.P + 1)])
            self.qcol = np.stack([pr._qr[p - 1][0][:, p - 1] for p in range(1, self.P + 1)], axis=1)
            self.crit = np.asarray(rule.critical, dtype=float)
        elif isinstance(rule, InformationCriterion):
            self.mode = "ic"
            self.masks = sorted(rule.family, key=lambda m: m.sort_key())
            self.mask_q = []
            self.mask_map = []
            for mask in self.masks:
                idx = list(mask.indices)
                if idx:
                    q, r = np.linalg.qr(pr.X[:, idx], mode="reduced")
                    self.mask_q.append(q)
                    self.mask_map.append((idx, solve_triangular(r, q.T, lower=False)))
                else:
                    self.mask_q.append(np.zeros((self.n, 0)))
                    self.mask_map.append(([], np.zeros((0, self.n))))
            self.cards = np.array([m.cardinality for m in self.masks])
        else:
            self.mode = "threshold"
            self.cutoff = np.asarray(rule.cutoff, dtype=float)
            self.ginv_sqrt = np.sqrt(np.diag(np.linalg.inv(pr.gram)))
            self._mask_cache: dict[tuple, tuple] = {}

    # -- shared pieces -----------------------------------------------------
    def _sigma_hat(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rss = np.maximum(np.einsum("ij,ij->i", Y, Y)
                         - np.einsum("ij,ij->i", Y @ self.Qf, Y @ self.Qf), 0.0)
        sig = np.sqrt(rss / self.plan.problem.dof)
        return sig, sig > 0.0

    def _coef_rows(self, Y: np.ndarray, p: int) -> np.ndarray:
        return Y @ self.Xmat[p].T if p else np.zeros((Y.shape[0], 0))

    # -- per-rule chunk runs ------------------------------------------------
    def run(self, lo: int, hi: int, want_raw: bool):
        pr = self.plan.problem
        eps = _draw_errors(pr, self.plan.master_seed, lo, hi)
        Y = (pr.X @ pr.theta)[None, :] + pr.sigma * eps
        sig, ok = self._sigma_hat(Y)
        B = Y.shape[0]
        if self.mode == "g2s":
            keys, loss, est = self._run_g2s(Y, sig, ok)
        elif self.mode == "ic":
            keys, loss, est, ok = self._run_ic(Y, sig, ok, want_raw)
        else:
            keys, loss, est = self._run_threshold(Y, sig, ok)
        return {
            "lo": lo, "B": B, "keys": keys, "loss": loss, "ok": ok,
            "sigma": sig, "est": est if want_raw else None,
        }

    def _run_g2s(self, Y, sig, ok):
        pr = self.plan.problem
        O, P = pr.O, self.P
        num = (Y @ self.qcol) / self.rdiag           # trailing coefficient, (B, P)
        with np.errstate(divide="ignore", invalid="ignore"):
            T = self.sqrt_n * num / (sig[:, None] * self.xi[None, :])
        sat = np.ones((Y.shape[0], P - O + 1), dtype=bool)
        if P > O:
            sat[:, 1:] = np.abs(T[:, O:]) >= self.crit[None, :]
        p_hat = P - sat[:, ::-1].argmax(axis=1)
        p_hat = np.where(ok, p_hat, O)
        loss = np.zeros((Y.shape[0], self.k))
        est = np.zeros((Y.shape[0], self.P))
        for p in range(O, P + 1):
            rows = p_hat == p
            if not rows.any():
                continue
            coef = self._coef_rows(Y[rows], p)
            est[rows, :p] = coef
            loss[rows] = self.sqrt_n * (coef @ self.plan.A[:, :p].T - self.A_theta)
        return [int(p) for p in p_hat], loss, est

    def _run_ic(self, Y, sig, ok, want_raw):
        pr = self.plan.problem
        yy = np.einsum("ij,ij->i", Y, Y)
        vals = np.empty((len(self.masks), Y.shape[0]))
        for i, (mask, q) in enumerate(zip(self.masks, self.mask_q)):
            proj = Y @ q
            rss = np.maximum(yy - np.einsum("ij,ij->i", proj, proj), 0.0)
            with np.errstate(divide="ignore"):
                vals[i] = np.log(rss) + self.cards[i] * self.plan.rule.upsilon_n / pr.n
            ok = ok & (rss > 0.0)
        choice = vals.argmin(axis=0)
        loss = np.zeros((Y.shape[0], self.k))
        est = np.zeros((Y.shape[0], self.P))
        for i, mask in enumerate(self.masks):
            rows = choice == i
            if not rows.any():
                continue
            idx, xmat = self.mask_map[i]
            coef = Y[rows] @ xmat.T
            if idx:
                est[np.ix_(rows, idx)] = coef
            a_est = coef @ self.plan.A[:, idx].T if idx else np.zeros((rows.sum(), self.k))
            loss[rows] = self.sqrt_n * (a_est - self.A_theta)
        keys = [self.masks[i] for i in choice]
        return keys, loss, est, ok

    def _mask_solve(self, bits: tuple):
        if bits not in self._mask_cache:
            idx = [i for i, b in enumerate(bits) if b]
            if idx:
                q, r = np.linalg.qr(self.plan.problem.X[:, idx], mode="reduced")
                self._mask_cache[bits] = (idx, solve_triangular(r, q.T, lower=False))
            else:
                self._mask_cache[bits] = ([], np.zeros((0, self.n)))
        return self._mask_cache[bits]

    def _run_threshold(self, Y, sig, ok):
        coef = self._coef_rows(Y, self.P)
        with np.errstate(divide="ignore", invalid="ignore"):
            T = self.sqrt_n * coef / (sig[:, None] * self.ginv_sqrt[None, :])
        keep = np.abs(T) >= self.cutoff[None, :]
        keep[~ok] = False
        loss = np.zeros((Y.shape[0], self.k))
        est = np.zeros((Y.shape[0], self.P))
        keys: list[SubsetMask] = [None] * Y.shape[0]
        uniq, inv = np.unique(keep, axis=0, return_inverse=True)
        for u_i in range(uniq.shape[0]):
            bits = tuple(int(b) for b in uniq[u_i])
            rows = inv == u_i
            idx, xmat = self._mask_solve(bits)
            sub = Y[rows] @ xmat.T
            if idx:
                est[np.ix_(rows, idx)] = sub
            a_est = sub @ self.plan.A[:, idx].T if idx else np.zeros((rows.sum(), self.k))
            loss[rows] = self.sqrt_n * (a_est - self.A_theta)
            mask = SubsetMask(bits=bits)
            for j in np.nonzero(rows)[0]:
                keys[j] = mask
        return keys, loss, est


def _chunk_bounds(replications: int):
    return [(lo, min(lo + CHUNK, replications)) for lo in range(0, replications, CHUNK)]


def _cdf_chunk(plan: SimulationPlan, lo: int, hi: int, grid: np.ndarray, want_raw: bool):
    out = _Kernel(plan).run(lo, hi, want_raw)
    loss, ok, keys = out["loss"], out["ok"], out["keys"]
    below = np.all(loss[:, None, :] <= grid[None, :, :], axis=2)  # (B, m)
    below[~ok] = False
    counts = below.sum(axis=0).astype(np.int64)
    joint: dict = {}
    model: dict = {}
    for j, key in enumerate(keys):
        if not ok[j]:
            continue
        model[key] = model.get(key, 0) + 1
        if key in joint:
            joint[key] += below[j].astype(np.int64)
        else:
            joint[key] = below[j].astype(np.int64)
    res = {"counts": counts, "joint": joint, "model": model,
           "degenerate": int((~ok).sum())}
    if want_raw:
        res["raw"] = (lo, keys, out["est"], out["sigma"], ok)
    return res


def _merge_cdf(plan: SimulationPlan, grid: np.ndarray, chunks: list[dict]) -> EmpiricalCdf:
    m = grid.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    joint: dict = {}
    model: dict = {}
    degenerate = 0
    for ch in chunks:
        counts += ch["counts"]
        degenerate += ch["degenerate"]
        for key, val in ch["model"].items():
            model[key] = model.get(key, 0) + val
        for key, val in ch["joint"].items():
            if key in joint:
                joint[key] += val
            else:
                joint[key] = val.copy()
    valid = plan.replications - degenerate
    est = counts / valid if valid else np.zeros(m)
    se = np.sqrt(est * (1.0 - est) / valid) if valid else np.full(m, np.nan)
    conditional = {key: joint[key] / model[key] for key in joint}
    return EmpiricalCdf(grid=grid, estimates=est, standard_errors=se,
                        model_counts=model, conditional=conditional,
                        replications=plan.replications, valid=valid,
                        degenerate_count=degenerate)


def _grid_array(grid, k: int) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(grid, dtype=float))
    if arr.size == 0:
        raise ValidationError("grid must be non-empty")
    if arr.shape[1] != k:
        raise ValidationError(f"grid rows must have length k={k}")
    return arr


def empirical_cdf(plan: SimulationPlan, grid, workers: int | None = None) -> EmpiricalCdf:
    """Empirical cdf of sqrt(n) A (theta_tilde - theta) over the given grid.

    ``grid`` is a sequence of k-vectors.  ``workers`` > 1 distributes the
    fixed-size replication chunks over processes; results are identical for
    any worker count.
    """
    grid_arr = _grid_array(grid, plan.k)
    bounds = _chunk_bounds(plan.replications)
    if workers and workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_cdf_chunk, [plan] * len(bounds),
                                 [b[0] for b in bounds], [b[1] for b in bounds],
                                 [grid_arr] * len(bounds), [False] * len(bounds)))
    else:
        chunks = [_cdf_chunk(plan, lo, hi, grid_arr, False) for lo, hi in bounds]
    return _merge_cdf(plan, grid_arr, chunks)


def _err_chunk(plan: SimulationPlan, lo: int, hi: int, t: np.ndarray,
               ref: float, delta: float, aux_scheme: str, budget):
    from .cdf_estimators import g_check_values

    pr = plan.problem
    kernel = _Kernel(plan)
    eps = _draw_errors(pr, plan.master_seed, lo, hi)
    Y = (pr.X @ pr.theta)[None, :] + pr.sigma * eps
    sig, ok = kernel._sigma_hat(Y)
    # auxiliary order estimate: all-coordinate scan with a diverging cutoff
    if aux_scheme == "sqrt_log_n":
        c_aux = float(np.sqrt(np.log(pr.n)))
    elif aux_scheme == "bic":
        c_aux = ic_threshold(pr.n, pr.P, float(np.log(pr.n)))
    else:
        raise ValidationError(f"unknown auxiliary scheme {aux_scheme!r}")
    if kernel.mode != "g2s":
        raise ValidationError("estimator error study needs a general-to-specific plan")
    num = (Y @ kernel.qcol) / kernel.rdiag
    with np.errstate(divide="ignore", invalid="ignore"):
        T = kernel.sqrt_n * num / (sig[:, None] * kernel.xi[None, :])
    sat = np.abs(T) >= c_aux
    any_sat = sat.any(axis=1)
    p_bar = np.where(any_sat, pr.P - sat[:, ::-1].argmax(axis=1), 0)
    vals = g_check_values(pr, plan.A, t, plan.rule, sig[ok], p_bar[ok], budget=budget)
    exceed = int(np.sum(np.abs(vals - ref) > delta))
    return {"exceed": exceed, "valid": int(ok.sum()), "degenerate": int((~ok).sum())}


def estimator_error_probability(plan: SimulationPlan, t, reference,
                                delta: float, *, workers: int | None = None,
                                aux_scheme: str = "sqrt_log_n",
                                budget=None) -> float:
    """Frequency of {|plug-in cdf estimate - reference| > delta} under the plan.

    ``reference`` is the target cdf value: a float, a result object with a
    ``value`` attribute, or a zero-argument callable producing either.
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    if callable(reference):
        reference = reference()
    ref = float(getattr(reference, "value", reference))
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if t_arr.shape != (plan.k,):
        raise ValidationError(f"t must have length k={plan.k}")
    bounds = _chunk_bounds(plan.replications)
    args = ([plan] * len(bounds), [b[0] for b in bounds], [b[1] for b in bounds],
            [t_arr] * len(bounds), [ref] * len(bounds), [delta] * len(bounds),
            [aux_scheme] * len(bounds), [budget] * len(bounds))
    if workers and workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_err_chunk, *args))
    else:
        chunks = [_err_chunk(plan, lo, hi, t_arr, ref, delta, aux_scheme, budget)
                  for lo, hi in bounds]
    exceed = sum(c["exceed"] for c in chunks)
    valid = sum(c["valid"] for c in chunks)
    return exceed / valid if valid else 0.0


def dump_replications(plan: SimulationPlan, path: str) -> None:
    """Write one CSV row per replication: rep, selected_model, estimate_1..P, sigma_hat."""
    grid_arr = np.zeros((1, plan.k))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "selected_model"]
                        + [f"estimate_{i}" for i in range(1, plan.A.shape[1] + 1)]
                        + ["sigma_hat"])
        for lo, hi in _chunk_bounds(plan.replications):
            res = _cdf_chunk(plan, lo, hi, grid_arr, True)
            base, keys, est, sig, ok = res["raw"]
            for j in range(hi - lo):
                key = keys[j]
                label = str(key) if isinstance(key, SubsetMask) else str(int(key))
                writer.writerow([base + j, label]
                                + [repr(float(v)) for v in est[j]]
                                + [repr(float(sig[j]))])
