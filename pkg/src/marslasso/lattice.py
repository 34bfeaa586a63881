"""Equally spaced lattice formulation.

Design points are ``(i_1/n_1, ..., i_d/n_d)`` for ``i`` in
``I0 = [0:n_1-1] x ... x [0:n_d-1]``. A field ``theta`` on ``I0`` is a tensor
of shape ``(n_1, ..., n_d)`` in row-major order (dimension 1 slowest).

The mixed difference operator ``D^(alpha)`` takes ``alpha_k`` differences along
axis ``k``; coordinates with ``alpha_k = 0`` are pinned to the lowest index of
the current slice. ``H2`` stacks the order-2 differences over the partition of
``I0`` and is inverted by iterated cumulative sums.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import KnotGrid, MarsModel, Term, ZERO_COEF, design_matrix, enumerate_basis
from .errors import ArgumentError, StructuralError, UnsupportedOrderError
from .solver import LassoProblem, LassoSolution, solve


@dataclass(frozen=True)
class LatticeShape:
    sizes: tuple[int, ...]
    offsets: tuple[int, ...] | None = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes:
            raise StructuralError("lattice needs at least one dimension")
        bad = [k + 1 for k, n in enumerate(sizes) if n < 2]
        if bad:
            raise StructuralError(f"every lattice size must satisfy n_k >= 2; dimension(s) {bad} violate it")
        offsets = (0,) * len(sizes) if self.offsets is None else tuple(int(a) for a in self.offsets)
        if len(offsets) != len(sizes) or any(a < 0 for a in offsets):
            raise ArgumentError("offsets must be nonnegative, one per dimension")
        object.__setattr__(self, "offsets", offsets)

    @property
    def d(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return int(np.prod(self.sizes))


@dataclass(frozen=True)
class LatticeField:
    shape: LatticeShape
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.size != self.shape.n:
            raise StructuralError(f"expected {self.shape.n} values for shape {self.shape.sizes}, got {values.size}")
        values = values.reshape(self.shape.sizes)
        if values.dtype.kind == "f" and not np.all(np.isfinite(values)):
            raise ArgumentError("lattice field values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values) -> LatticeField:
        values = np.asarray(values)
        return cls(LatticeShape(values.shape), values)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class DiffResult:
    alpha: tuple[int, ...]
    index_set: tuple[range, ...]
    values: np.ndarray = field(repr=False)

    def at(self, index) -> float:
        pos = tuple(i - r.start for i, r in zip(index, self.index_set))
        return self.values[pos]


def _dd(values: np.ndarray) -> np.ndarray:
    # D_d: sum over delta in {0,1}^d of (-1)^|delta| theta_{i - delta}, i.e. a first difference on every axis.
    out = values
    for axis in range(values.ndim):
        out = np.diff(out, axis=axis)
    return out


def _diff(values: np.ndarray, alpha: tuple[int, ...], offsets: tuple[int, ...]):
    if not any(alpha):
        return values, tuple(range(a, a + n) for a, n in zip(offsets, values.shape))
    if all(alpha):
        if any(n < 2 for n in values.shape):
            raise StructuralError("difference would leave an empty index range")
        return _diff(_dd(values), tuple(a - 1 for a in alpha), tuple(a + 1 for a in offsets))
    keep = [k for k, a in enumerate(alpha) if a]
    sub = values[tuple(slice(None) if a else 0 for a in alpha)]
    sub_vals, sub_ranges = _diff(sub, tuple(alpha[k] for k in keep), tuple(offsets[k] for k in keep))
    ranges, vals = [], sub_vals
    it = iter(sub_ranges)
    for k, a in enumerate(alpha):
        if a:
            ranges.append(next(it))
        else:
            ranges.append(range(offsets[k], offsets[k] + 1))
            vals = np.expand_dims(vals, axis=k)
    return vals, tuple(ranges)


def diff(theta, alpha, offsets=None) -> DiffResult:
    """Mixed difference ``D^(alpha) theta`` following the recursive definition.

    Args:
        theta: a ``LatticeField`` or a d-dimensional array.
        alpha: nonnegative integer vector, components at most 2.
        offsets: lowest index along each axis (defaults to 0).
    """
    values = theta.values if isinstance(theta, LatticeField) else np.asarray(theta)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != values.ndim:
        raise ArgumentError(f"alpha has length {len(alpha)}, field has d={values.ndim}")
    if any(a < 0 for a in alpha):
        raise ArgumentError("difference orders must be nonnegative")
    if any(a > 2 for a in alpha):
        raise UnsupportedOrderError(f"orders above 2 are not supported: {alpha}")
    if offsets is None:
        offsets = theta.shape.offsets if isinstance(theta, LatticeField) else (0,) * values.ndim
    vals, ranges = _diff(values, alpha, tuple(int(a) for a in offsets))
    if vals.size == 0 or any(len(r) == 0 for r in ranges):
        raise StructuralError(f"D^{alpha} has an empty index set for sizes {values.shape}")
    return DiffResult(alpha, ranges, vals)


def index_set(sizes, alpha) -> tuple[range, ...]:
    """``I0^(alpha)``: ``{alpha_k}`` where ``alpha_k < max(alpha)``, else ``[max(alpha) : n_k - 1]``."""
    top = max(alpha)
    return tuple(
        range(top, n) if a == top else range(a, a + 1) for a, n in zip(alpha, sizes)
    )


def second_order_alphas(d: int):
    """All ``beta`` in ``{0,1,2}^d`` with ``max(beta) == 2``."""
    return [b for b in itertools.product((0, 1, 2), repeat=d) if max(b) == 2]


def _block(ranges) -> tuple[slice, ...]:
    return tuple(slice(r.start, r.stop) for r in ranges)


def _nonempty(ranges) -> bool:
    return all(len(r) > 0 for r in ranges)


def as_field(theta) -> LatticeField:
    """Wrap a bare array as a ``LatticeField``; fields pass through unchanged."""
    return theta if isinstance(theta, LatticeField) else LatticeField.from_array(theta)


def h2(theta: LatticeField) -> LatticeField:
    """Stacked order-2 differences.

    Entry ``i`` in ``{0,1}^d`` carries ``(D^(i) theta)_i``; every other entry
    lies in exactly one ``I0^(beta)`` with ``max(beta) = 2`` and carries
    ``(D^(beta) theta)_i``.
    """
    theta = as_field(theta)
    sizes = theta.shape.sizes
    vals = theta.values
    out = np.zeros_like(vals)
    for corner in itertools.product((0, 1), repeat=len(sizes)):
        out[corner] = diff(vals, corner).at(corner)
    for beta in second_order_alphas(len(sizes)):
        ranges = index_set(sizes, beta)
        if _nonempty(ranges):
            out[_block(ranges)] = diff(vals, beta).values
    return LatticeField(theta.shape, out)


def _cumsum_all(block: np.ndarray, axes) -> np.ndarray:
    for axis in axes:
        block = np.cumsum(block, axis=axis)
    return block


def reconstruct(h: LatticeField) -> LatticeField:
    """Inverse of ``h2``, by blockwise then global cumulative sums.

    The first pass sums within each first-order block ``I0^(alpha)``
    (``alpha`` binary and nonzero), the second sums over the whole lattice.
    Integer inputs stay integer, so the round trip is exact.
    """
    h = as_field(h)
    sizes = h.shape.sizes
    d = len(sizes)
    vals = h.values.copy()
    for alpha in itertools.product((0, 1), repeat=d):
        if not any(alpha):
            continue
        ranges = index_set(sizes, alpha)
        sl = _block(ranges)
        vals[sl] = _cumsum_all(vals[sl], [k for k in range(d) if alpha[k]])
    vals = _cumsum_all(vals, range(d))
    return LatticeField(h.shape, vals)


def _weight(sizes, beta) -> float:
    # prod n_k^(beta_k - 1{beta_k = 2}): each axis with beta_k >= 1 contributes one factor n_k.
    return float(np.prod([n for n, b in zip(sizes, beta) if b >= 1]))


def v2(theta: LatticeField) -> float:
    """Discrete second-order variation from weighted absolute differences."""
    theta = as_field(theta)
    sizes = theta.shape.sizes
    parts = []
    for beta in second_order_alphas(len(sizes)):
        if not _nonempty(index_set(sizes, beta)):
            continue
        parts.append(_weight(sizes, beta) * np.abs(diff(theta.values, beta).values).ravel())
    return math.fsum(np.concatenate(parts)) if parts else 0.0


def v2_via_h2(theta: LatticeField) -> float:
    """The same quantity computed from ``H2 theta`` block sums (excluding each block's corner)."""
    theta = as_field(theta)
    sizes = theta.shape.sizes
    H = h2(theta).values
    parts = []
    for alpha in itertools.product((0, 1), repeat=len(sizes)):
        if not any(alpha):
            continue
        block = np.abs(H[_block(index_set(sizes, alpha))]).astype(float)
        block[(0,) * block.ndim] = 0.0  # the corner entry is alpha itself
        parts.append(float(np.prod([n for n, a in zip(sizes, alpha) if a])) * block.ravel())
    return math.fsum(np.concatenate(parts)) if parts else 0.0


def lattice_points(sizes) -> np.ndarray:
    """Row-major lattice design ``(i_1/n_1, ..., i_d/n_d)``, shape ``(prod n_k, d)``."""
    grids = np.meshgrid(*[np.arange(n) / n for n in sizes], indexing="ij")
    return np.column_stack([g.reshape(-1) for g in grids])


def reduced_knots(sizes) -> KnotGrid:
    """Knots ``0, 1/n_k, ..., (n_k - 2)/n_k`` (plus the inert endpoint 1)."""
    return KnotGrid(tuple(np.append(np.arange(n - 1) / n, 1.0) for n in sizes))


def model_from_field(theta: LatticeField, s: int | None = None, meta=None) -> MarsModel:
    """MARS model whose lattice values are ``theta``, with coefficients read off ``H2 theta``.

    Term ``(alpha, l)`` gets coefficient ``prod_{k in S(alpha)} n_k * (H2 theta)_{l~ + alpha}``
    on the hinge product ``prod (x_k - l_k/n_k)_+``.
    """
    theta = as_field(theta)
    sizes = theta.shape.sizes
    d = len(sizes)
    s = d if s is None else s
    H = h2(LatticeField(theta.shape, np.asarray(theta.values, dtype=float))).values
    terms = []
    for b in enumerate_basis(reduced_knots(sizes), s):
        idx = [0] * d
        for k, lk in zip(b.support, b.l):
            idx[k] = lk + 1
        scale = float(np.prod([sizes[k] for k in b.support]))
        coef = scale * float(H[tuple(idx)])
        if abs(coef) > ZERO_COEF:
            knots = tuple(lk / sizes[k] for k, lk in zip(b.support, b.l))
            terms.append(Term(b.alpha, knots, coef))
    return MarsModel(d=d, intercept=float(H[(0,) * d]), terms=tuple(terms), meta=dict(meta or {}))


def fit_lattice(
    y: LatticeField,
    V: float,
    s: int | None = None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    method: str = "active_set",
) -> tuple[LatticeField, MarsModel]:
    """Fit on the lattice through the reduced design over ``l_k <= n_k - 2``.

    Returns the fitted field and the MARS model assembled from ``H2`` of it.
    """
    y = as_field(y)
    sizes = y.shape.sizes
    d = len(sizes)
    s = d if s is None else s
    if not 1 <= s <= d:
        raise ArgumentError(f"interaction cap s must satisfy 1 <= s <= d={d}")
    X = lattice_points(sizes)
    knots = reduced_knots(sizes)
    basis = enumerate_basis(knots, s)
    M, mask = design_matrix(X, basis, knots)
    sol: LassoSolution = solve(LassoProblem(y.flat().astype(float), M, mask, V, tol, max_iter), method=method)
    theta_hat = LatticeField(y.shape, sol.fitted)
    meta = {
        "V": float(V),
        "s": s,
        "converged": sol.converged,
        "objective": sol.objective,
        "v2": v2(theta_hat),
    }
    return theta_hat, model_from_field(theta_hat, s, meta)


def read_field_csv(path) -> LatticeField:
    """Read a tensor stored as rows ``i_1, ..., i_d, value`` under a header."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise StructuralError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    d = len(header) - 1
    if d < 1 or header[-1].strip() != "value":
        raise StructuralError(f"{path}: header must be i_1,...,i_d,value")
    idx = np.empty((len(body), d), dtype=int)
    vals = np.empty(len(body))
    for lineno, row in enumerate(body, start=2):
        if len(row) != d + 1:
            raise StructuralError(f"{path}:{lineno}: expected {d + 1} fields")
        try:
            idx[lineno - 2] = [int(c) for c in row[:d]]
            vals[lineno - 2] = float(row[d])
        except ValueError as exc:
            raise StructuralError(f"{path}:{lineno}: {exc}") from None
    if idx.size == 0 or idx.min() < 0:
        raise StructuralError(f"{path}: indices must be nonnegative and at least one row is required")
    sizes = tuple(int(m) + 1 for m in idx.max(axis=0))
    shape = LatticeShape(sizes)
    out = np.full(sizes, np.nan)
    seen = np.zeros(sizes, dtype=bool)
    for i, v in zip(map(tuple, idx), vals):
        if seen[i]:
            raise StructuralError(f"{path}: duplicate cell {i}")
        seen[i] = True
        out[i] = v
    if not seen.all():
        raise StructuralError(f"{path}: {int((~seen).sum())} lattice cells missing for shape {sizes}")
    return LatticeField(shape, out)


def write_field_csv(field_: LatticeField, path) -> None:
    d = field_.shape.d
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i_{k + 1}" for k in range(d)] + ["value"])
        for i in itertools.product(*[range(n) for n in field_.shape.sizes]):
            w.writerow(list(i) + [repr(float(field_.values[i]))])
