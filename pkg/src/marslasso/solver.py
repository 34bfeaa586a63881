"""Least squares under an L1 budget on a masked subset of coefficients.

Solves::

    minimize    || y - a0 * 1 - M @ gamma ||_2^2
    subject to  sum_{j in mask} |gamma_j| <= V

The intercept is handled as an extra unpenalized all-ones column. Two
algorithms are available:

* ``"active_set"`` (default): a primal active-set method over signed supports.
  Each iteration solves an equality-constrained least squares problem on the
  current support, so the result is exact up to the linear algebra once the
  support is identified, and KKT conditions are checked explicitly.
* ``"fista"``: accelerated projected gradient with function-value restart and
  step ``1/L``, ``L`` estimated by power iteration.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, NumericError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LassoProblem:
    y: np.ndarray
    M: np.ndarray
    penalized_mask: np.ndarray
    V: float
    tol: float = 1e-8
    max_iter: int = 100_000

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        M = np.asarray(self.M, dtype=float)
        if M.ndim == 1:
            M = M[:, None]
        mask = np.asarray(self.penalized_mask, dtype=bool)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "penalized_mask", mask)
        if y.ndim != 1 or M.ndim != 2 or M.shape[0] != y.size or mask.shape != (M.shape[1],):
            raise ArgumentError(
                f"dimension mismatch: y {y.shape}, M {M.shape}, mask {mask.shape}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(M))):
            raise NumericError("non-finite entries in y or M")
        if not self.V >= 0:
            raise ArgumentError(f"budget V must be nonnegative, got {self.V}")
        if not self.tol > 0:
            raise ArgumentError("tol must be positive")
        if self.max_iter < 1:
            raise ArgumentError("max_iter must be at least 1")

    @property
    def augmented(self) -> tuple[np.ndarray, np.ndarray]:
        """``([1, M], [False, mask])``."""
        A = np.column_stack([np.ones_like(self.y), self.M])
        return A, np.concatenate(([False], self.penalized_mask))


@dataclass(frozen=True)
class LassoSolution:
    intercept: float
    gamma: np.ndarray
    fitted: np.ndarray
    objective: float
    iterations: int
    converged: bool
    fixed_point_residual: float
    method: str = "active_set"
    multiplier: float = float("nan")
    penalized_l1: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)


def project_l1(v, mask, V: float) -> np.ndarray:
    """Euclidean projection of ``v[mask]`` onto the L1 ball of radius ``V``.

    Unmasked coordinates pass through unchanged. Uses the sort-and-threshold
    rule: magnitudes are soft-thresholded by the smallest ``tau >= 0`` that
    makes the masked L1 norm at most ``V``.
    """
    v = np.asarray(v, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if V < 0:
        raise ArgumentError("radius must be nonnegative")
    out = v.copy()
    u = np.abs(v[mask])
    if u.sum() <= V:
        return out
    if V == 0:
        out[mask] = 0.0
        return out
    srt = np.sort(u)[::-1]
    css = np.cumsum(srt)
    k = np.arange(1, srt.size + 1)
    hits = np.flatnonzero(srt * k > css - V)
    rho = hits[-1] if hits.size else 0  # V below round-off of the largest entry
    tau = (css[rho] - V) / (rho + 1.0)
    out[mask] = np.sign(v[mask]) * np.maximum(u - tau, 0.0)
    return out


def lipschitz_bound(A: np.ndarray, seed: int = 0, max_iter: int = 500) -> float:
    """Largest eigenvalue of ``A.T @ A`` by power iteration, padded by 1%."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(max_iter):
        w = A.T @ (A @ v)
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return 1.0
        v = w / lam_new
        if it >= 1 and abs(lam_new - lam) <= 1e-6 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return 1.01 * lam


def _objective(A, beta, y) -> float:
    r = y - A @ beta
    return float(r @ r)


def _fixed_point_residual(A, pm, y, beta, V, L) -> float:
    grad = A.T @ (A @ beta - y)
    step = project_l1(beta - grad / L, pm, V)
    return float(np.linalg.norm(step - beta) / max(1.0, np.linalg.norm(beta)))


def _feasible_start(A, pm, y, V, start) -> np.ndarray:
    if start is None:
        beta = np.zeros(A.shape[1])
        U = ~pm
        beta[U] = np.linalg.lstsq(A[:, U], y, rcond=None)[0]
        return beta
    a0, gamma = start
    beta = np.concatenate(([float(a0)], np.asarray(gamma, dtype=float)))
    if beta.shape != (A.shape[1],):
        raise ArgumentError("start vector has the wrong length")
    return project_l1(beta, pm, V)


def _fista(A, pm, y, V, tol, max_iter, beta, L, record_history):
    x = beta.copy()
    Ax = A @ x
    z, Az = x.copy(), Ax.copy()
    f_old = float((Ax - y) @ (Ax - y))
    t = 1.0
    history = [f_old] if record_history else []
    converged = False
    fpr = np.inf
    it = 0
    while it < max_iter:
        it += 1
        grad = A.T @ (Az - y)
        x_new = project_l1(z - grad / L, pm, V)
        Ax_new = A @ x_new
        r = Ax_new - y
        f_new = float(r @ r)
        if f_new > f_old:
            # Function-value restart: discard momentum and retry from x.
            z, Az, t = x.copy(), Ax.copy(), 1.0
            continue
        fpr = float(np.linalg.norm(x_new - z) / max(1.0, np.linalg.norm(x_new)))
        rel = abs(f_old - f_new) / max(f_new, np.finfo(float).tiny)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        z = x_new + mom * (x_new - x)
        Az = Ax_new + mom * (Ax_new - Ax)
        x, Ax, t = x_new, Ax_new, t_new
        f_old = f_new
        if record_history:
            history.append(f_new)
        if rel < tol or fpr < tol or f_new == 0.0:
            converged = True
            break
    return x, it, converged, history


def _subproblem(A, y, U, S, s, budget_active, V):
    """Minimise ``||y - A_F z||`` over ``F = U + S``, with ``s @ z_S = V`` if the budget is active.

    The equality constraint is eliminated by solving for one pivot coefficient.
    """
    if budget_active and S.size:
        k = 0
        Ak = A[:, S[k]]
        rhs = y - s[k] * V * Ak
        rest = S[1:]
        B = np.column_stack([A[:, U], A[:, rest] - np.outer(Ak, s[k] * s[1:])])
        w = np.linalg.lstsq(B, rhs, rcond=None)[0]
        zU, zrest = w[: U.size], w[U.size:]
        zS = np.concatenate(([s[k] * (V - s[1:] @ zrest)], zrest))
    else:
        B = np.column_stack([A[:, U], A[:, S]])
        w = np.linalg.lstsq(B, y, rcond=None)[0]
        zU, zS = w[: U.size], w[U.size:]
    return zU, zS


def _active_set(A, pm, y, V, kkt_tol, max_iter, beta):
    """Primal active-set method on signed supports.

    Maintains a feasible point whose penalized support ``S`` carries fixed
    signs. Each pass minimises over ``S`` (with the budget as an equality when
    it is in the working set), steps as far toward that minimiser as sign
    consistency and the budget allow, and otherwise adds the coordinate with the
    largest KKT violation. Returns ``(beta, iterations, converged, multiplier)``.
    """
    U = np.nonzero(~pm)[0]
    P = np.nonzero(pm)[0]
    colnorm = np.linalg.norm(A, axis=0)
    ynorm = max(float(np.linalg.norm(y)), np.finfo(float).tiny)

    if V == 0.0 or P.size == 0:
        beta = np.zeros(A.shape[1])
        beta[U] = np.linalg.lstsq(A[:, U], y, rcond=None)[0]
        return beta, 1, True, 0.0

    support = [int(j) for j in P if beta[j] != 0.0]
    sign = {j: float(np.sign(beta[j])) for j in support}
    budget_active = bool(support) and abs(np.abs(beta[P]).sum() - V) <= 1e-12 * max(V, 1.0)
    blocked: set[int] = set()
    mu = 0.0
    f_cur = _objective(A, beta, y)

    for it in range(1, max_iter + 1):
        if budget_active and not support:
            budget_active = False
        S = np.array(support, dtype=int)
        s = np.array([sign[j] for j in support])
        zU, zS = _subproblem(A, y, U, S, s, budget_active, V)

        wrong_sign = s * zS <= 0.0
        over_budget = (not budget_active) and float(np.abs(zS).sum()) > V
        if wrong_sign.any() or over_budget:
            cur = beta[S]
            t, hit = 1.0, None
            for idx in np.nonzero(wrong_sign)[0]:
                denom = cur[idx] - zS[idx]
                ti = cur[idx] / denom if denom != 0.0 else 0.0
                if ti < t:
                    t, hit = ti, idx
            hits_budget = False
            if not budget_active:
                l1_cur, l1_z = float(s @ cur), float(s @ zS)
                if l1_z > V and l1_z != l1_cur:
                    tb = (V - l1_cur) / (l1_z - l1_cur)
                    if tb < t:
                        t, hit, hits_budget = tb, None, True
            t = min(max(t, 0.0), 1.0)
            beta[U] += t * (zU - beta[U])
            beta[S] = cur + t * (zS - cur)
            if hits_budget:
                budget_active = True
                # Rescale onto the budget exactly to avoid drift.
                l1 = float(np.abs(beta[P]).sum())
                if l1 > V:
                    beta[P] *= V / l1
            else:
                scale = max(float(np.abs(cur).max(initial=0.0)), 1.0)
                drop = {S[i] for i in range(S.size) if s[i] * beta[S[i]] <= 1e-15 * scale}
                if hit is not None:
                    drop.add(int(S[hit]))
                if t == 0.0:
                    blocked.update(drop)
                for j in drop:
                    beta[j] = 0.0
                    support.remove(j)
                    del sign[j]
            f_new = _objective(A, beta, y)
            if f_new < f_cur * (1 - 1e-14):
                blocked.clear()
            f_cur = f_new
            continue

        beta[U] = zU
        beta[S] = zS
        r = y - A @ beta
        f_new = float(r @ r)
        if f_new < f_cur * (1 - 1e-14):
            blocked.clear()
        f_cur = f_new
        g = A.T @ r
        if budget_active:
            mu = float(np.mean(s * g[S]))
            if mu < 0.0:
                budget_active = False
                continue
        else:
            mu = 0.0
        viol = np.abs(g[P]) - mu
        thresh = kkt_tol * ynorm * np.maximum(colnorm[P], np.finfo(float).tiny)
        viol_rel = viol - thresh
        inside = np.zeros(P.size, dtype=bool)
        if support:
            inside[np.searchsorted(P, S)] = True
        for j in blocked:
            inside[np.searchsorted(P, j)] = True
        viol_rel[inside] = -np.inf
        j = int(np.argmax(viol_rel))
        if viol_rel[j] <= 0.0:
            if blocked:
                # Blocked coordinates are degenerate ties; accept if they satisfy KKT loosely.
                bl = np.array(sorted(blocked))
                idx = np.searchsorted(P, bl)
                if np.all(viol[idx] <= 1e3 * thresh[idx]):
                    return beta, it, True, mu
                blocked.clear()
                continue
            return beta, it, True, mu
        jj = int(P[j])
        support.append(jj)
        sign[jj] = float(np.sign(g[jj]))
    return beta, max_iter, False, mu


def solve(
    problem: LassoProblem,
    method: str = "active_set",
    start: tuple[float, np.ndarray] | None = None,
    record_history: bool = False,
) -> LassoSolution:
    """Solve the budget-constrained least squares problem.

    Args:
        problem: the instance.
        method: ``"active_set"`` or ``"fista"``.
        start: optional ``(intercept, gamma)`` initial point; projected onto the
            feasible set before use.
        record_history: keep the per-iteration objective (FISTA only).

    Returns:
        The solution; ``converged`` is False if ``max_iter`` was exhausted.
    """
    A, pm = problem.augmented
    y, V = problem.y, float(problem.V)
    beta0 = _feasible_start(A, pm, y, V, start)
    L = lipschitz_bound(A)
    history: list[float] = []
    mu = float("nan")

    if method == "active_set":
        beta, iters, converged, mu = _active_set(
            A, pm, y, V, problem.tol * 1e-2, problem.max_iter, beta0
        )
        if not converged:
            log.warning("active-set method hit max_iter=%d; finishing with FISTA", problem.max_iter)
            beta, more, converged, history = _fista(
                A, pm, y, V, problem.tol, problem.max_iter, project_l1(beta, pm, V), L, record_history
            )
            iters += more
    elif method == "fista":
        beta, iters, converged, history = _fista(
            A, pm, y, V, problem.tol, problem.max_iter, beta0, L, record_history
        )
    else:
        raise ArgumentError(f"unknown method {method!r}")

    fitted = A @ beta
    r = y - fitted
    return LassoSolution(
        intercept=float(beta[0]),
        gamma=beta[1:].copy(),
        fitted=fitted,
        objective=float(r @ r),
        iterations=int(iters),
        converged=bool(converged),
        fixed_point_residual=_fixed_point_residual(A, pm, y, beta, V, L),
        method=method,
        multiplier=mu,
        history=history,
        penalized_l1=float(np.abs(beta[pm]).sum()),
    )


def certify(problem: LassoProblem, solution: LassoSolution, n_probes: int = 200, seed: int = 0) -> float:
    """Largest observed violation of the projection inequality.

    For the optimal fitted vector ``yhat`` every feasible fitted vector ``z``
    satisfies ``<y - yhat, z - yhat> <= 0``. This draws ``n_probes`` random
    feasible coefficient vectors (half of them sparse points on the budget
    boundary, half spread across the ball) and returns
    ``max(0, max_z <y - yhat, z - yhat>) / ||y||^2``.
    """
    if not solution.converged:
        warnings.warn("certifying a solution that did not converge", RuntimeWarning, stacklevel=2)
    if n_probes <= 0:
        warnings.warn("no probes drawn; certificate is vacuous", RuntimeWarning, stacklevel=2)
        return 0.0
    A, pm = problem.augmented
    y, V = problem.y, float(problem.V)
    rng = np.random.default_rng(seed)
    beta_hat = np.concatenate(([solution.intercept], solution.gamma))
    yhat = A @ beta_hat
    r = y - yhat
    P = np.nonzero(pm)[0]
    U = np.nonzero(~pm)[0]
    scale_u = np.abs(beta_hat[U]) + 1.0
    worst = -np.inf
    for i in range(n_probes):
        beta = np.zeros(A.shape[1])
        beta[U] = beta_hat[U] + scale_u * rng.standard_normal(U.size)
        if P.size and V > 0:
            if i % 2 == 0:
                k = int(rng.integers(1, min(P.size, 5) + 1))
                idx = rng.choice(P, size=k, replace=False)
                w = rng.dirichlet(np.ones(k)) * V
                beta[idx] = w * rng.choice((-1.0, 1.0), size=k)
            else:
                v = rng.standard_normal(P.size)
                beta[P] = v / np.abs(v).sum() * V * rng.random()
        z = A @ beta
        worst = max(worst, float(r @ (z - yhat)))
    denom = float(y @ y) or 1.0
    return max(0.0, worst) / denom
