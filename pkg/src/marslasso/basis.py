"""Finite MARS basis induced by a design, and finite MARS models.

A basis function is a product of hinges ``prod_{j in S(alpha)} (x_j - t_j)_+``
where ``alpha`` is a nonzero binary vector selecting the active coordinates.
The candidate knots along coordinate ``k`` are the sorted, deduplicated values
``0 = u_0 < u_1 < ... < u_{n_k} = 1`` built from the design; basis functions
use the knots ``u_0, ..., u_{n_k - 1}`` only, since ``(x - 1)_+`` vanishes on
``[0, 1]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Sequence

import numpy as np

from .errors import ArgumentError, DomainError

if TYPE_CHECKING:
    from .estimator import ScalingTransform

#: Coefficients with magnitude at or below this are treated as exact zeros.
ZERO_COEF = 1e-12


@dataclass(frozen=True)
class KnotGrid:
    """Per-dimension knot lists ``u^(k)_0 < ... < u^(k)_{n_k}``."""

    knots: tuple[np.ndarray, ...]

    def __post_init__(self):
        for k, u in enumerate(self.knots):
            if u.ndim != 1 or u.size < 2:
                raise ArgumentError(f"dimension {k}: need at least the knots 0 and 1")
            if u[0] != 0.0 or u[-1] != 1.0:
                raise ArgumentError(f"dimension {k}: knots must start at 0 and end at 1")
            if np.any(np.diff(u) <= 0):
                raise ArgumentError(f"dimension {k}: knots must be strictly increasing")

    @property
    def d(self) -> int:
        return len(self.knots)

    @property
    def n(self) -> tuple[int, ...]:
        """``(n_1, ..., n_d)``: the number of usable knots per dimension."""
        return tuple(u.size - 1 for u in self.knots)


@dataclass(frozen=True, order=True)
class BasisIndex:
    """Column label ``(alpha, l)``; ``l`` holds one knot index per active coordinate."""

    alpha: tuple[int, ...]
    l: tuple[int, ...]

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, a in enumerate(self.alpha) if a)

    @property
    def penalized(self) -> bool:
        # l == 0 means every factor is the linear function x_k itself.
        return any(self.l)

    @property
    def order(self) -> int:
        return sum(self.alpha)


@dataclass(frozen=True)
class Term:
    alpha: tuple[int, ...]
    knots: tuple[float, ...]
    coef: float

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, a in enumerate(self.alpha) if a)

    @property
    def penalized(self) -> bool:
        return any(t != 0.0 for t in self.knots)


@dataclass(frozen=True)
class MarsModel:
    """``intercept + sum_terms coef * prod_{j in S(alpha)} (x_j - t_j)_+``.

    ``domain_tag`` is ``"scaled"`` when knots live in ``[0, 1)`` and inputs
    must first be mapped through ``transform`` (if any), or ``"original"``
    when the terms act on raw covariates directly.
    """

    d: int
    intercept: float
    terms: tuple[Term, ...] = ()
    transform: ScalingTransform | None = None
    domain_tag: str = "scaled"
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.domain_tag not in ("scaled", "original"):
            raise ArgumentError(f"unknown domain_tag {self.domain_tag!r}")
        seen = set()
        for term in self.terms:
            if len(term.alpha) != self.d or not any(term.alpha):
                raise ArgumentError(f"bad interaction vector {term.alpha}")
            if len(term.knots) != sum(term.alpha):
                raise ArgumentError("one knot per active coordinate is required")
            if term.coef == 0.0:
                raise ArgumentError("zero-coefficient terms are not stored")
            if self.domain_tag == "scaled" and any(not 0.0 <= t < 1.0 for t in term.knots):
                raise DomainError(f"scaled-domain knots must lie in [0, 1): {term.knots}")
            key = (term.alpha, term.knots)
            if key in seen:
                raise ArgumentError(f"duplicate term {key}")
            seen.add(key)

    @property
    def converged(self) -> bool:
        return bool(self.meta.get("converged", True))


def build_knots(X) -> KnotGrid:
    """Sorted, deduplicated union of ``{0}``, each design column, and ``{1}``.

    Duplicates are collapsed with exact floating point equality.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ArgumentError("design must be an n x d matrix")
    if not np.all(np.isfinite(X)) or X.min(initial=0.0) < 0.0 or X.max(initial=0.0) > 1.0:
        raise DomainError("design entries must lie in [0, 1]; scale the inputs first")
    return KnotGrid(tuple(np.unique(np.concatenate(([0.0], X[:, k], [1.0]))) for k in range(X.shape[1])))


def _alphas(d: int, s: int) -> Iterable[tuple[int, ...]]:
    # itertools.product order == alpha ascending as a binary integer (alpha_1 most significant).
    for alpha in itertools.product((0, 1), repeat=d):
        if 0 < sum(alpha) <= s:
            yield alpha


def enumerate_basis(knots: KnotGrid, s: int | None = None) -> list[BasisIndex]:
    """All column labels ``(alpha, l)`` with ``0 < |alpha| <= s``.

    Order is lexicographic: ``alpha`` ascending as a binary integer, then ``l``
    row-major. With ``s = d`` the count is ``prod(1 + n_k) - 1``.
    """
    d = knots.d
    s = d if s is None else s
    if not 1 <= s <= d:
        raise ArgumentError(f"interaction cap s must satisfy 1 <= s <= d={d}, got {s}")
    out = []
    for alpha in _alphas(d, s):
        ranges = [range(knots.n[k]) for k in range(d) if alpha[k]]
        out.extend(BasisIndex(alpha, l) for l in itertools.product(*ranges))
    return out


def eval_term(alpha: Sequence[int], t: Sequence[float], x) -> float:
    """``prod_{j in S(alpha)} (x_j - t_j)_+`` at a single point."""
    x = np.asarray(x, dtype=float)
    support = [k for k, a in enumerate(alpha) if a]
    value = 1.0
    for k, tk in zip(support, t):
        value *= max(x[k] - tk, 0.0)
    return value


def hinge_columns(X, knots: KnotGrid) -> list[np.ndarray]:
    """Per-dimension ``n x n_k`` hinge tables ``(x_k - u^(k)_l)_+``."""
    X = np.asarray(X, dtype=float)
    return [np.maximum(X[:, k, None] - u[None, :-1], 0.0) for k, u in enumerate(knots.knots)]


def design_matrix(X, basis: Sequence[BasisIndex], knots: KnotGrid) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate every basis column at every design point.

    Returns:
        ``(M, penalized_mask)`` where ``M[i, j] = prod_k (x_k^(i) - u^(k)_{l_k})_+``
        and ``penalized_mask[j]`` is True for columns with ``l != 0``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != knots.d:
        raise ArgumentError(f"design has {X.shape[1]} columns, knot grid has d={knots.d}")
    hinges = hinge_columns(X, knots)
    M = np.empty((X.shape[0], len(basis)))
    mask = np.fromiter((b.penalized for b in basis), dtype=bool, count=len(basis))

    # Group consecutive columns that share alpha so each group is one gather-and-multiply.
    start = 0
    for alpha, group in itertools.groupby(basis, key=lambda b: b.alpha):
        ls = np.array([b.l for b in group], dtype=int)
        stop = start + len(ls)
        block = np.ones((X.shape[0], len(ls)))
        for pos, k in enumerate(k for k, a in enumerate(alpha) if a):
            block *= hinges[k][:, ls[:, pos]]
        M[:, start:stop] = block
        start = stop
    return M, mask


def evaluate(model: MarsModel, X) -> np.ndarray:
    """Vectorised model evaluation on an ``N x d`` array, with no input transform."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.d:
        raise ArgumentError(f"model has d={model.d}, got {X.shape[1]} columns")
    out = np.full(X.shape[0], float(model.intercept))
    for term in model.terms:
        prod = np.full(X.shape[0], term.coef)
        for k, tk in zip(term.support, term.knots):
            prod *= np.maximum(X[:, k] - tk, 0.0)
        out += prod
    return out


def eval_model(model: MarsModel, x) -> float:
    """Value of the model at one point, using stored knots and coefficients as-is."""
    return float(evaluate(model, np.asarray(x, dtype=float).reshape(1, -1))[0])


def vmars_finite(model: MarsModel) -> float:
    """Sum of ``|coef|`` over terms with at least one nonzero knot."""
    if model.domain_tag != "scaled":
        raise ArgumentError("variation is defined for scaled-domain models only")
    return float(sum(abs(t.coef) for t in model.terms if t.penalized))


def model_from_coefficients(
    knots: KnotGrid,
    basis: Sequence[BasisIndex],
    intercept: float,
    gamma,
    **kwargs,
) -> MarsModel:
    """Assemble a scaled-domain model, dropping coefficients at or below ``ZERO_COEF``."""
    gamma = np.asarray(gamma, dtype=float)
    terms = []
    for b, g in zip(basis, gamma):
        if abs(g) <= ZERO_COEF:
            continue
        t = tuple(float(knots.knots[k][lk]) for k, lk in zip(b.support, b.l))
        terms.append(Term(b.alpha, t, float(g)))
    return MarsModel(d=knots.d, intercept=float(intercept), terms=tuple(terms), **kwargs)
