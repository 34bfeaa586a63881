"""K-fold cross-validation of the budget V."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .basis import build_knots, design_matrix, enumerate_basis
from .errors import ArgumentError
from .estimator import FitConfig, _as_matrix, fit, loss, predict, scale_fit


@dataclass(frozen=True)
class CvConfig:
    """Cross-validation settings.

    Attributes:
        folds: number of folds ``k``.
        grid: explicit strictly increasing V values, or None for ``default_grid``.
        grid_count: number of geometric grid points when ``grid`` is None.
        seed: seed of the fold assignment.
        subsample: if set, cross-validate on this random fraction of the rows.
    """

    folds: int = 10
    grid: Optional[tuple[float, ...]] = None
    grid_count: int = 10
    seed: int = 0
    s: Optional[int] = None
    tol: float = 1e-8
    max_iter: int = 100_000
    scale_inputs: bool = False
    method: str = "active_set"
    subsample: Optional[float] = None

    def __post_init__(self):
        if self.folds < 2:
            raise ArgumentError("need at least 2 folds")
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=float)
            if g.size == 0 or np.any(g < 0) or np.any(np.diff(g) <= 0):
                raise ArgumentError("grid must be nonempty, nonnegative and strictly increasing")
            object.__setattr__(self, "grid", tuple(float(v) for v in g))
        if self.subsample is not None and not 0 < self.subsample <= 1:
            raise ArgumentError("subsample must lie in (0, 1]")

    def fit_config(self, V: float) -> FitConfig:
        return FitConfig(V=V, s=self.s, tol=self.tol, max_iter=self.max_iter,
                         scale_inputs=self.scale_inputs, method=self.method)


@dataclass(frozen=True)
class CvResult:
    grid: tuple[float, ...]
    mean_mse: np.ndarray
    se_mse: np.ndarray
    best_V: float
    seed: int
    folds: np.ndarray = field(repr=False)
    fold_mse: np.ndarray = field(repr=False)

    @property
    def best_index(self) -> int:
        return self.grid.index(self.best_V)


def default_grid(X, y, count: int = 10, s: int | None = None, scale_inputs: bool = False) -> list[float]:
    """``{0}`` plus ``count`` geometric points from ``V_hat / 100`` to ``V_hat``.

    ``V_hat`` is the penalized L1 norm of the minimum-norm least-squares fit.
    The unpenalized columns are projected out first, so a response that those
    columns explain exactly yields ``V_hat = 0``.
    """
    if count < 2:
        raise ArgumentError("count must be at least 2")
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if scale_inputs:
        X = scale_fit(X).apply(X)
    knots = build_knots(X)
    basis = enumerate_basis(knots, s)
    M, mask = design_matrix(X, basis, knots)
    U = np.column_stack([np.ones(len(y)), M[:, ~mask]])
    Q, _ = np.linalg.qr(U)
    resid_y = y - Q @ (Q.T @ y)
    P = M[:, mask]
    P = P - Q @ (Q.T @ P)
    scale = max(np.linalg.norm(y), 1.0)
    if np.linalg.norm(resid_y) <= 1e-10 * scale:
        v_hat = 0.0
    else:
        gamma = np.linalg.lstsq(P, resid_y, rcond=None)[0]
        v_hat = float(np.abs(gamma).sum())
    if v_hat <= 0.0:
        warnings.warn("least-squares fit has no penalized variation; grid is {0}", RuntimeWarning, stacklevel=2)
        return [0.0]
    return [0.0] + [float(v) for v in np.geomspace(v_hat / 100, v_hat, count)]


def assign_folds(n: int, k: int, seed: int) -> np.ndarray:
    """Balanced random fold labels in ``[0, k)``."""
    if not 2 <= k <= n:
        raise ArgumentError(f"fold count must satisfy 2 <= k <= n={n}, got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % k
    return labels


def _pick_best(grid: Sequence[float], means: np.ndarray) -> float:
    # Smallest V whose mean error is within rounding of the minimum.
    best = means.min()
    tol = 1e-9 * abs(best) + 1e-14 * max(1.0, float(np.max(np.abs(means))))
    return float(grid[int(np.flatnonzero(means <= best + tol)[0])])


def cross_validate(X, y, config: CvConfig = CvConfig(), folds: np.ndarray | None = None) -> CvResult:
    """Score each V by mean held-out MSE across folds.

    Every fold reruns the full pipeline on its training rows, so knots never
    see held-out points.

    Args:
        folds: optional explicit fold labels overriding the seeded assignment.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != X.shape[0]:
        raise ArgumentError(f"{X.shape[0]} design rows but {y.size} responses")
    if config.subsample is not None and folds is None:
        rng = np.random.default_rng([config.seed, 1])
        keep = np.sort(rng.choice(y.size, size=max(2, int(round(config.subsample * y.size))), replace=False))
        X, y = X[keep], y[keep]
    n = y.size
    if folds is None:
        labels = assign_folds(n, config.folds, config.seed)
    else:
        labels = np.asarray(folds, dtype=int).reshape(-1)
        if labels.size != n:
            raise ArgumentError("fold labels must have one entry per row")
    ids = np.unique(labels)
    for f in ids:
        size = int((labels == f).sum())
        if size < 2:
            raise ArgumentError(f"fold {f} has {size} point(s); each fold needs at least 2")
        if n - size < 2:
            raise ArgumentError(f"training set for fold {f} has fewer than 2 points")

    grid = tuple(config.grid) if config.grid is not None else tuple(
        default_grid(X, y, config.grid_count, config.s, config.scale_inputs)
    )
    fold_mse = np.empty((len(grid), ids.size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for j, f in enumerate(ids):
            test = labels == f
            for i, V in enumerate(grid):
                model = fit(X[~test], y[~test], config.fit_config(V))
                fold_mse[i, j] = loss(predict(model, X[test]), y[test])
    means = fold_mse.mean(axis=1)
    se = fold_mse.std(axis=1, ddof=1) / np.sqrt(ids.size)
    return CvResult(grid, means, se, _pick_best(grid, means), config.seed, labels, fold_mse)


def write_cv_report(result: CvResult, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["V", "mean_mse", "se_mse", "selected"])
        for i, V in enumerate(result.grid):
            w.writerow([repr(V), repr(float(result.mean_mse[i])), repr(float(result.se_mse[i])),
                        int(V == result.best_V)])
