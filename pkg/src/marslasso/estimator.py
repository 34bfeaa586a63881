"""General-design fitting: scaling, basis construction, constrained solve, model I/O."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .basis import (
    MarsModel,
    Term,
    build_knots,
    design_matrix,
    enumerate_basis,
    evaluate,
    model_from_coefficients,
    vmars_finite,
)
from .errors import ArgumentError, DegenerateRangeError, NumericError
from .solver import LassoProblem, solve

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ScalingTransform:
    """Per-column min-max map ``x -> (x - min) / range``."""

    mins: np.ndarray
    ranges: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=float).reshape(-1)
        ranges = np.asarray(self.ranges, dtype=float).reshape(-1)
        if mins.shape != ranges.shape:
            raise ArgumentError("mins and ranges must have the same length")
        for k, r in enumerate(ranges):
            if not r > 0:
                raise DegenerateRangeError(k)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "ranges", ranges)

    def __eq__(self, other):
        if not isinstance(other, ScalingTransform):
            return NotImplemented
        return np.array_equal(self.mins, other.mins) and np.array_equal(self.ranges, other.ranges)

    __hash__ = None

    @property
    def d(self) -> int:
        return self.mins.size

    def apply(self, X) -> np.ndarray:
        return (_as_matrix(X, self.d) - self.mins) / self.ranges

    def invert(self, Xs) -> np.ndarray:
        return _as_matrix(Xs, self.d) * self.ranges + self.mins


def _as_matrix(X, d: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if d in (None, 1) else X[None, :]
    if X.ndim != 2:
        raise ArgumentError("expected a 2-d array of covariates")
    if d is not None and X.shape[1] != d:
        raise ArgumentError(f"expected {d} columns, got {X.shape[1]}")
    return X


def scale_fit(X) -> ScalingTransform:
    X = _as_matrix(X)
    mins, maxs = X.min(axis=0), X.max(axis=0)
    for k in range(X.shape[1]):
        if not maxs[k] > mins[k]:
            raise DegenerateRangeError(k)
    return ScalingTransform(mins, maxs - mins)


def scale_apply(transform: ScalingTransform, X) -> np.ndarray:
    return transform.apply(X)


def scale_invert(transform: ScalingTransform, Xs) -> np.ndarray:
    return transform.invert(Xs)


@dataclass(frozen=True)
class FitConfig:
    V: float
    s: int | None = None
    tol: float = 1e-8
    max_iter: int = 100_000
    scale_inputs: bool = False
    method: str = "active_set"

    def __post_init__(self):
        if not self.V >= 0:
            raise ArgumentError(f"V must be nonnegative, got {self.V}")
        if self.s is not None and self.s < 1:
            raise ArgumentError("s must be at least 1")


def fit(X, y, config: FitConfig) -> MarsModel:
    """Fit the L1-budgeted MARS model on an arbitrary design.

    Pipeline: optional min-max scaling, knots from the (scaled) design, all
    basis columns with interaction order at most ``s``, the constrained solve,
    and assembly of the nonzero terms.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    if y.size != n:
        raise ArgumentError(f"{n} design rows but {y.size} responses")
    if n < 2:
        raise ArgumentError("need at least two observations")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("non-finite values in X or y")
    s = d if config.s is None else config.s
    if s > d:
        raise ArgumentError(f"s={s} exceeds d={d}")

    transform = scale_fit(X) if config.scale_inputs else None
    Xs = transform.apply(X) if transform is not None else X
    knots = build_knots(Xs)
    basis = enumerate_basis(knots, s)
    M, mask = design_matrix(Xs, basis, knots)
    sol = solve(LassoProblem(y, M, mask, config.V, config.tol, config.max_iter), method=config.method)
    if not sol.converged:
        warnings.warn("solver did not converge; model is flagged", RuntimeWarning, stacklevel=2)
    meta = {
        "V": float(config.V),
        "s": s,
        "converged": sol.converged,
        "objective": sol.objective,
        "iterations": sol.iterations,
        "n": n,
        "n_columns": len(basis),
        "penalized_l1": sol.penalized_l1,
        "method": config.method,
    }
    model = model_from_coefficients(knots, basis, sol.intercept, sol.gamma, transform=transform, meta=meta)
    # Dropping sub-threshold coefficients can only lower the variation.
    assert vmars_finite(model) <= config.V * (1 + 1e-10) + 1e-8
    return model


def predict(model: MarsModel, X) -> np.ndarray:
    """Evaluate on raw inputs, applying the stored transform for scaled-domain models."""
    X = _as_matrix(X, model.d)
    if model.domain_tag == "scaled" and model.transform is not None:
        X = model.transform.apply(X)
    return evaluate(model, X)


def loss(pred, truth) -> float:
    """Mean squared difference."""
    pred = np.asarray(pred, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.shape != truth.shape:
        raise ArgumentError(f"length mismatch: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ArgumentError("loss of empty vectors is undefined")
    diff = pred - truth
    return float(diff @ diff / diff.size)


def to_original_domain(model: MarsModel) -> MarsModel:
    """Rewrite a scaled model in raw covariates.

    With ``x_k = (X_k - m_k) / r_k``, each ``b * prod (x_k - t_k)_+`` equals
    ``b / prod r_k * prod (X_k - (m_k + t_k r_k))_+``.
    """
    if model.transform is None:
        raise ArgumentError("model has no scaling transform to invert")
    if model.domain_tag != "scaled":
        raise ArgumentError("model is already in the original domain")
    m, r = model.transform.mins, model.transform.ranges
    terms = []
    for t in model.terms:
        sup = t.support
        coef = t.coef / float(np.prod(r[list(sup)]))
        knots = tuple(float(m[k] + tk * r[k]) for k, tk in zip(sup, t.knots))
        terms.append(Term(t.alpha, knots, coef))
    return replace(model, terms=tuple(terms), domain_tag="original")


def model_to_dict(model: MarsModel) -> dict:
    meta = model.meta
    return {
        "version": MODEL_FORMAT_VERSION,
        "d": model.d,
        "domain_tag": model.domain_tag,
        "intercept": model.intercept,
        "terms": [
            {"alpha": list(t.alpha), "knots": list(t.knots), "coef": t.coef} for t in model.terms
        ],
        "transform": None
        if model.transform is None
        else {"mins": model.transform.mins.tolist(), "ranges": model.transform.ranges.tolist()},
        "fit_meta": {
            "V": meta.get("V"),
            "s": meta.get("s"),
            "converged": meta.get("converged"),
            "objective": meta.get("objective"),
            **{k: v for k, v in meta.items() if k not in ("V", "s", "converged", "objective")},
        },
    }


def model_from_dict(data: dict) -> MarsModel:
    version = data.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ArgumentError(f"unsupported model format version {version!r} (expected {MODEL_FORMAT_VERSION})")
    tr = data.get("transform")
    transform = None if tr is None else ScalingTransform(np.array(tr["mins"]), np.array(tr["ranges"]))
    terms = tuple(
        Term(tuple(int(a) for a in t["alpha"]), tuple(float(k) for k in t["knots"]), float(t["coef"]))
        for t in data["terms"]
    )
    return MarsModel(
        d=int(data["d"]),
        intercept=float(data["intercept"]),
        terms=terms,
        transform=transform,
        domain_tag=data.get("domain_tag", "scaled"),
        meta=dict(data.get("fit_meta") or {}),
    )


def save_model(model: MarsModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path) -> MarsModel:
    return model_from_dict(json.loads(Path(path).read_text()))
