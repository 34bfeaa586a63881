"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 solver non-convergence
(outputs are still written), 3 file I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MarsLassoError
from .estimator import FitConfig, fit, load_model, predict, save_model, to_original_domain
from .lattice import fit_lattice, h2, lattice_points, read_field_csv, v2
from .selection import CvConfig, cross_validate, write_cv_report
from .sim import load_spec, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def read_table(path, response: str | None = None, need_response: bool = True):
    """Parse a numeric CSV with a header row.

    Returns ``(X, y, names)``; ``y`` is None when ``need_response`` is False.
    The response defaults to the last column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: empty file (a header row is required)")
    header = [h.strip() for h in rows[0]]
    data = np.empty((len(rows) - 1, len(header)))
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise UsageError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                data[lineno - 2, j] = float(cell)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: column {header[j]!r}: not a number: {cell!r}") from None
            if not np.isfinite(data[lineno - 2, j]):
                raise UsageError(f"{path}:{lineno}: column {header[j]!r}: non-finite value")
    if not need_response:
        return data, None, header
    if response is None:
        col = len(header) - 1
    elif response in header:
        col = header.index(response)
    else:
        raise UsageError(f"{path}: response column {response!r} not found in header {header}")
    keep = [j for j in range(len(header)) if j != col]
    if not keep:
        raise UsageError(f"{path}: need at least one covariate column besides the response")
    return data[:, keep], data[:, col], [header[j] for j in keep]


def _write_column(path, name: str, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([name])
        for v in values:
            w.writerow([_fmt(v)])


def _fit_config(args, V) -> FitConfig:
    return FitConfig(V=V, s=args.s, tol=args.tol, max_iter=args.max_iter, scale_inputs=not args.no_scale)


def _print_terms(model) -> None:
    print(f"intercept {_fmt(model.intercept)}")
    for t in model.terms:
        factors = " ".join(f"(x{k + 1} - {_fmt(tk)})_+" for k, tk in zip(t.support, t.knots))
        print(f"{_fmt(t.coef)} {factors}")


def _summary(model, X, y) -> None:
    meta = model.meta
    print(f"n {X.shape[0]}")
    print(f"d {X.shape[1]}")
    print(f"basis_size {meta.get('n_columns')}")
    print(f"objective {_fmt(meta['objective'])}")
    print(f"penalized_l1 {_fmt(meta['penalized_l1'])}")
    print(f"converged {str(model.converged).lower()}")


def cmd_fit(args) -> int:
    X, y, _ = read_table(args.data, args.response)
    if args.original_domain and args.no_scale:
        raise UsageError("--original-domain needs a scaling transform; drop --no-scale")
    if X.shape[0] < 2:
        raise UsageError(f"{args.data}: need at least 2 data rows")
    model = fit(X, y, _fit_config(args, args.V))
    save_model(model, args.output)
    _summary(model, X, y)
    if args.fitted:
        _write_column(args.fitted, "fitted", predict(model, X))
    if args.original_domain:
        print("original-domain terms:")
        _print_terms(to_original_domain(model))
    return EXIT_OK if model.converged else EXIT_NONCONVERGED


def cmd_predict(args) -> int:
    model = load_model(args.model)
    data, _, header = read_table(args.data, need_response=False)
    if data.shape[1] == model.d + 1:
        # A training file: drop its response column.
        col = header.index(args.response) if args.response else data.shape[1] - 1
        data = np.delete(data, col, axis=1)
    if data.shape[1] != model.d:
        raise UsageError(f"model has d={model.d} but {args.data} has {data.shape[1]} covariate columns")
    pred = predict(model, data) if data.shape[0] else np.empty(0)
    if args.output:
        _write_column(args.output, "prediction", pred)
    else:
        print("prediction")
        for v in pred:
            print(_fmt(v))
    return EXIT_OK


def _parse_grid(text: str):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"--grid must be comma-separated numbers, got {text!r}") from None


def cmd_cv(args) -> int:
    X, y, _ = read_table(args.data, args.response)
    config = CvConfig(
        folds=args.folds,
        grid=_parse_grid(args.grid) if args.grid else None,
        grid_count=args.grid_count,
        seed=args.seed,
        s=args.s,
        tol=args.tol,
        max_iter=args.max_iter,
        scale_inputs=not args.no_scale,
        subsample=args.subsample,
    )
    result = cross_validate(X, y, config)
    write_cv_report(result, args.report)
    print(f"best_V {_fmt(result.best_V)}")
    code = EXIT_OK
    if args.output:
        model = fit(X, y, _fit_config(args, result.best_V))
        save_model(model, args.output)
        code = EXIT_OK if model.converged else EXIT_NONCONVERGED
    return code


def cmd_simulate(args) -> int:
    spec = load_spec(args.spec)
    report = run_experiment(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "report.csv", out / "summary.json")
    print(json.dumps(report.summary()))
    return EXIT_OK if report.converged.all() else EXIT_NONCONVERGED


def cmd_lattice_check(args) -> int:
    field_ = read_field_csv(args.data)
    theta = field_.values.astype(float)
    total = v2(theta)
    H = h2(field_).values
    print(f"shape {'x'.join(map(str, field_.shape.sizes))}")
    print(f"v2 {_fmt(total)}")
    nz = np.abs(H) > 1e-12 * max(1.0, float(np.abs(H).max()))
    print(f"h2_nonzeros {int(nz.sum())} of {H.size}")
    for idx in zip(*np.nonzero(nz)):
        print("  " + ",".join(map(str, idx)))
    V = args.V if args.V is not None else 0.5 * total
    theta_hat, _ = fit_lattice(field_, V, s=args.s, tol=args.tol, max_iter=args.max_iter)
    X = lattice_points(field_.shape.sizes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        general = fit(X, field_.flat().astype(float), FitConfig(V=V, s=args.s, tol=args.tol, max_iter=args.max_iter))
    resid = float(np.max(np.abs(predict(general, X) - theta_hat.flat())))
    scale = max(1.0, float(np.max(np.abs(theta_hat.flat()))))
    print(f"equivalence_V {_fmt(V)}")
    print(f"equivalence_residual {_fmt(resid / scale)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="marslasso", description="MARS via an L1-budgeted LASSO.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--s", type=int, default=None, help="interaction cap (default: d)")
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--max-iter", type=int, default=100_000)

    def data_flags(sp):
        sp.add_argument("data", help="CSV with a header row")
        sp.add_argument("--response", default=None, help="response column name (default: last column)")
        sp.add_argument("--no-scale", action="store_true", help="inputs are already in [0, 1]")

    f = sub.add_parser("fit", help="fit a model with a given budget V")
    data_flags(f)
    solver_flags(f)
    f.add_argument("--V", type=float, required=True, help="variation budget")
    f.add_argument("-o", "--output", default="model.json")
    f.add_argument("--fitted", default=None, help="write fitted values to this CSV")
    f.add_argument("--original-domain", action="store_true", help="print terms in raw covariates")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="evaluate a saved model")
    pr.add_argument("model")
    pr.add_argument("data")
    pr.add_argument("--response", default=None, help="column to drop if the file has d + 1 columns")
    pr.add_argument("-o", "--output", default=None, help="CSV path (default: stdout)")
    pr.set_defaults(func=cmd_predict)

    c = sub.add_parser("cv", help="choose V by k-fold cross-validation")
    data_flags(c)
    solver_flags(c)
    c.add_argument("--folds", type=int, default=10)
    c.add_argument("--grid", default=None, help='comma-separated V values, e.g. "0,5,15"')
    c.add_argument("--grid-count", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--subsample", type=float, default=None, help="cross-validate on this fraction of rows")
    c.add_argument("--report", default="cv_report.csv")
    c.add_argument("-o", "--output", default=None, help="refit at the selected V and save the model")
    c.set_defaults(func=cmd_cv)

    sm = sub.add_parser("simulate", help="run a simulation study from a TOML or JSON spec")
    sm.add_argument("spec")
    sm.add_argument("--out-dir", default=".")
    sm.set_defaults(func=cmd_simulate)

    lc = sub.add_parser("lattice-check", help="lattice diagnostics for a tensor CSV (i_1,...,i_d,value)")
    lc.add_argument("data")
    lc.add_argument("--V", type=float, default=None, help="budget for the equivalence fit (default: V2/2)")
    solver_flags(lc)
    lc.set_defaults(func=cmd_lattice_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, MarsLassoError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
