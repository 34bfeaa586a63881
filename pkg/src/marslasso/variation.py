"""Second-order MARS variation of smooth functions by quadrature of mixed partials."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, NumericError


@dataclass(frozen=True)
class SmoothFunction:
    """A function on ``[0, 1]^d``.

    Attributes:
        d: input dimension.
        evaluator: maps an ``(N, d)`` array to ``N`` values. With
            ``vectorized=False`` it is called on one point at a time.
        partial: optional ``(beta, X) -> values`` giving the mixed partial
            ``d^|beta| f / dx^beta`` exactly; finite differences are used otherwise.
    """

    d: int
    evaluator: Callable
    partial: Optional[Callable] = None
    vectorized: bool = True

    def __post_init__(self):
        if self.d < 1:
            raise ArgumentError("d must be positive")

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.vectorized:
            out = np.asarray(self.evaluator(X), dtype=float).reshape(-1)
        else:
            out = np.fromiter((float(self.evaluator(x)) for x in X), dtype=float, count=len(X))
        if out.size != X.shape[0]:
            raise ArgumentError(f"evaluator returned {out.size} values for {X.shape[0]} points")
        if not np.all(np.isfinite(out)):
            raise NumericError("evaluator returned non-finite values")
        return out


_CENTRAL = np.arange(-2, 3)
_FORWARD = np.arange(0, 5)


def stencil_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0 on unit-spaced ``offsets``.

    Solves the moment conditions ``sum_j w_j o_j^p / p! = [p == order]``.
    """
    offsets = np.asarray(offsets, dtype=float)
    p = np.arange(offsets.size)
    A = offsets[None, :] ** p[:, None]
    rhs = np.zeros(offsets.size)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


_WEIGHTS = {
    (kind, q): stencil_weights(offs, q)
    for kind, offs in (("c", _CENTRAL), ("f", _FORWARD), ("b", -_FORWARD))
    for q in (1, 2)
}


def _axis_stencils(x: np.ndarray, q: int, h: float):
    """Per-point offsets and weights along one axis (shape ``(N, 5)`` each)."""
    if q == 0:
        return np.zeros((x.size, 1)), np.ones((x.size, 1))
    central = (x - 2 * h >= 0) & (x + 2 * h <= 1)
    forward = ~central & (x - 2 * h < 0)
    offs = np.where(central[:, None], _CENTRAL, np.where(forward[:, None], _FORWARD, -_FORWARD)) * h
    w = np.where(
        central[:, None], _WEIGHTS["c", q], np.where(forward[:, None], _WEIGHTS["f", q], _WEIGHTS["b", q])
    ) / h**q
    return offs, w


def mixed_partial_fd(f: SmoothFunction, beta, X, h: float) -> np.ndarray:
    """Tensor-product finite-difference estimate of ``f^(beta)`` at the rows of ``X``.

    Five-point stencils are central where they fit inside ``[0, 1]`` and
    one-sided otherwise, so the function is never sampled outside the cube.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    per_axis = [_axis_stencils(X[:, k], int(beta[k]), h) for k in range(d)]
    out = np.zeros(N)
    for combo in itertools.product(*[range(o.shape[1]) for o, _ in per_axis]):
        pts = X.copy()
        w = np.ones(N)
        for k, j in enumerate(combo):
            offs, wk = per_axis[k]
            pts[:, k] += offs[:, j]
            w *= wk[:, j]
        np.clip(pts, 0.0, 1.0, out=pts)
        out += w * f(pts)
    return out


def effective_step(h: float, order: int) -> float:
    # Round-off in an order-q difference grows like eps / h^q; never go below the balancing step.
    return max(h, np.finfo(float).eps ** (1.0 / (order + 4)))


def face_betas(d: int):
    return [b for b in itertools.product((0, 1, 2), repeat=d) if max(b) == 2]


def vmars_smooth(f: SmoothFunction, m: int = 64, h: float = 1e-3) -> float:
    """Sum over ``beta`` in ``{0,1,2}^d`` with ``max(beta) = 2`` of ``int |f^(beta)|``.

    Each integral is taken over the face where the coordinates with
    ``beta_k < 2`` are pinned to 0, by the midpoint rule with ``m`` nodes per
    free axis.

    Args:
        f: the function.
        m: quadrature nodes per free axis (at least 16).
        h: finite-difference step, ignored when ``f.partial`` is given.
    """
    if f.d > 3:
        raise ArgumentError(f"d={f.d} is too large; at most 3 dimensions are supported")
    if m < 16:
        raise ArgumentError("need at least 16 quadrature nodes per axis")
    if f.partial is None and not h > 0:
        raise ArgumentError("finite-difference step must be positive")
    nodes = (np.arange(m) + 0.5) / m
    total = 0.0
    for beta in face_betas(f.d):
        free = [k for k in range(f.d) if beta[k] == 2]
        X = np.zeros((m ** len(free), f.d))
        grids = np.meshgrid(*[nodes] * len(free), indexing="ij")
        for k, g in zip(free, grids):
            X[:, k] = g.reshape(-1)
        if f.partial is not None:
            vals = np.asarray(f.partial(beta, X), dtype=float).reshape(-1)
            if not np.all(np.isfinite(vals)):
                raise NumericError(f"analytic partial for beta={beta} returned non-finite values")
        else:
            vals = mixed_partial_fd(f, beta, X, effective_step(h, sum(beta)))
        total += float(np.abs(vals).mean())
    return total
