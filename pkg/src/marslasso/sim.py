"""Simulation harness: designs, test functions, seeded noise and risk reports."""

from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .basis import MarsModel, Term, evaluate, vmars_finite
from .errors import ArgumentError
from .estimator import FitConfig, fit, loss, predict
from .lattice import LatticeShape, lattice_points
from .selection import CvConfig, cross_validate
from .variation import SmoothFunction

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


def lattice_design(shape) -> np.ndarray:
    """Points ``i_k / n_k`` for ``i_k in [0, n_k - 1]``, row-major."""
    return lattice_points(LatticeShape(tuple(shape)).sizes)


def uniform_design(n: int, d: int, seed: int) -> np.ndarray:
    if n < 2 or d < 1:
        raise ArgumentError("uniform design needs n >= 2 and d >= 1")
    return np.random.Generator(np.random.Philox(seed)).random((n, d))


def gaussian_noise(n: int, sigma2: float, seed: int) -> np.ndarray:
    """``N(0, sigma2)`` draws by Box-Muller over a Philox uniform stream."""
    if sigma2 < 0:
        raise ArgumentError("sigma2 must be nonnegative")
    m = (n + 1) // 2
    u = np.random.Generator(np.random.Philox(seed)).random((2, m))
    r = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1 - u lies in (0, 1]
    z = np.concatenate([r * np.cos(2 * np.pi * u[1]), r * np.sin(2 * np.pi * u[1])])[:n]
    return math.sqrt(sigma2) * z


@dataclass(frozen=True)
class TestFunction:
    """A regression truth with its reference complexity.

    Attributes:
        truth: a ``MarsModel`` or ``SmoothFunction``.
        known_V: the budget used when V is treated as known.
        cv_V: a published cross-validated budget, when one exists.
    """

    __test__ = False  # not a pytest class

    id: str
    truth: Union[MarsModel, SmoothFunction]
    known_V: float
    cv_V: Optional[float] = None

    @property
    def d(self) -> int:
        return self.truth.d

    def __call__(self, X) -> np.ndarray:
        if isinstance(self.truth, MarsModel):
            return evaluate(self.truth, X)
        return self.truth(X)


def _fig1() -> MarsModel:
    terms = (
        Term((1, 0), (0.0,), 1.0),
        Term((0, 1), (0.0,), -1.0),
        Term((1, 1), (0.0, 0.0), -0.5),
        Term((1, 1), (0.3, 0.3), 5.0),
        Term((1, 1), (0.6, 0.3), -4.0),
        Term((1, 1), (0.6, 0.6), 6.0),
    )
    return MarsModel(d=2, intercept=10.0, terms=terms)


def _fig2_values(X):
    return 3.0 + 2.0 * np.sin(np.pi * X[:, 0] * X[:, 1])


def test_function(id: str) -> TestFunction:
    """Truths of the reference simulations: ``fig1``, ``fig2``, ``table3d``."""
    if id == "fig1":
        model = _fig1()
        return TestFunction(id, model, vmars_finite(model))
    if id == "fig2":
        return TestFunction(id, SmoothFunction(2, _fig2_values), 32.5)
    if id == "table3d":
        f = SmoothFunction(3, lambda X: _fig2_values(X) + np.exp(X[:, 2]))
        # The exp(x3) part adds int_0^1 e^t dt = e - 1 to the fig2 budget.
        return TestFunction(id, f, 32.5 + math.e - 1.0, cv_V=14.0)
    raise ArgumentError(f"unknown test function {id!r}; expected fig1, fig2 or table3d")


test_function.__test__ = False


@dataclass(frozen=True)
class ExperimentSpec:
    """One simulation study.

    ``design`` is ``{"kind": "lattice", "shape": [...]}`` or
    ``{"kind": "uniform", "n": ..., "d": ..., "seed": ...}``; uniform designs
    are redrawn each repetition with seed ``design seed + r``. ``V`` of None
    means the truth's known budget unless ``cv`` is set.
    """

    function: Union[str, TestFunction, Callable]
    design: dict
    sigma2: float
    V: Optional[float] = None
    cv: Optional[CvConfig] = None
    s: Optional[int] = None
    repetitions: int = 10
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 100_000
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ArgumentError("repetitions must be at least 1")
        if self.sigma2 < 0:
            raise ArgumentError("sigma2 must be nonnegative")
        if self.design.get("kind") not in ("lattice", "uniform"):
            raise ArgumentError("design kind must be 'lattice' or 'uniform'")
        if self.V is not None and self.cv is not None:
            raise ArgumentError("give either a known V or a cv configuration, not both")

    def truth(self) -> Callable:
        if isinstance(self.function, str):
            return test_function(self.function)
        return self.function

    def design_points(self, rep: int) -> np.ndarray:
        if self.design["kind"] == "lattice":
            return lattice_design(self.design["shape"])
        return uniform_design(int(self.design["n"]), int(self.design["d"]),
                              int(self.design.get("seed", 0)) + rep)


@dataclass(frozen=True)
class RiskReport:
    losses: np.ndarray
    chosen_V: np.ndarray
    converged: np.ndarray = field(repr=False)

    @property
    def repetitions(self) -> int:
        return self.losses.size

    @property
    def mean(self) -> float:
        return float(self.losses.mean())

    @property
    def se(self) -> Optional[float]:
        """Sample SD over sqrt(reps); None for a single repetition."""
        if self.losses.size < 2:
            return None
        return float(self.losses.std(ddof=1) / math.sqrt(self.losses.size))

    def summary(self) -> dict:
        return {"mean": self.mean, "se": self.se, "repetitions": self.repetitions,
                "all_converged": bool(self.converged.all())}

    def write(self, csv_path, json_path) -> None:
        with open(Path(csv_path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "loss", "chosen_V"])
            for r, (l, v) in enumerate(zip(self.losses, self.chosen_V)):
                w.writerow([r, repr(float(l)), repr(float(v))])
        Path(json_path).write_text(json.dumps(self.summary(), indent=2) + "\n")


def _one_rep(spec: ExperimentSpec, truth, rep: int):
    X = spec.design_points(rep)
    f_true = np.asarray(truth(X), dtype=float)
    y = f_true + gaussian_noise(len(f_true), spec.sigma2, spec.seed + rep)
    if spec.cv is not None:
        V = cross_validate(X, y, spec.cv).best_V
    elif spec.V is not None:
        V = spec.V
    elif hasattr(truth, "known_V"):
        V = truth.known_V
    else:
        raise ArgumentError("a custom truth needs an explicit V or a cv configuration")
    model = fit(X, y, FitConfig(V=V, s=spec.s, tol=spec.tol, max_iter=spec.max_iter))
    return loss(predict(model, X), f_true), V, model.converged


def run_experiment(spec: ExperimentSpec) -> RiskReport:
    """Repeat data generation and fitting; loss is measured at the design points."""
    truth = spec.truth()
    reps = range(spec.repetitions)
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(lambda r: _one_rep(spec, truth, r), reps))
    else:
        rows = [_one_rep(spec, truth, r) for r in reps]
    losses, Vs, conv = (np.array(c) for c in zip(*rows))
    return RiskReport(losses.astype(float), Vs.astype(float), conv.astype(bool))


def load_spec(path) -> ExperimentSpec:
    """Read an experiment from TOML or JSON (chosen by file extension).

    Keys: ``function``, ``sigma2``, ``design`` table, and optionally ``V``,
    ``s``, ``repetitions``, ``seed``, ``tol``, ``max_iter``, ``workers`` and a
    ``cv`` table with ``folds``, ``grid``, ``grid_count``, ``seed``.
    """
    path = Path(path)
    text = path.read_text()
    data = json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)
    return spec_from_dict(data)


def spec_from_dict(data: dict) -> ExperimentSpec:
    known = {"function", "design", "sigma2", "V", "cv", "s", "repetitions", "seed", "tol", "max_iter", "workers"}
    extra = set(data) - known
    if extra:
        raise ArgumentError(f"unknown experiment keys: {sorted(extra)}")
    for key in ("function", "design", "sigma2"):
        if key not in data:
            raise ArgumentError(f"experiment spec is missing {key!r}")
    cv = data.get("cv")
    if cv is not None:
        cv = dict(cv)
        if "grid" in cv:
            cv["grid"] = tuple(cv["grid"])
        cv = CvConfig(s=data.get("s"), **cv)
    kwargs = {k: data[k] for k in ("V", "s", "repetitions", "seed", "tol", "max_iter", "workers") if k in data}
    return ExperimentSpec(function=data["function"], design=dict(data["design"]),
                          sigma2=float(data["sigma2"]), cv=cv, **kwargs)
