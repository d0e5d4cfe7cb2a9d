"""Command-line front door: estimate on a CSV, simulate a design, stratify.

Input data is a UTF-8 CSV with header ``y,d,z,x1,...,xm``. Reports are
JSON (floats at 17 significant digits) or CSV; identical configuration
and seed produce byte-identical output files.

Exit codes: 0 success, 1 configuration error, 2 data error,
3 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from .complier import fit_propensity
from .errors import (
    IdentificationError,
    InvalidSpecError,
    SchemaError,
    TooManyFailuresError,
    UnpartitionableError,
)
from .estimators import Dataset
from .inference import bootstrap
from .montecarlo import named_dgp, pipeline_for, run_study
from .stratify import stratified_late

_EXIT_OK = 0
_EXIT_CONFIG = 1
_EXIT_DATA = 2
_EXIT_ESTIMATION = 3


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def ingest_csv(path: str, add_constant: bool = True) -> Dataset:
    """Read a dataset from ``path``.

    Requires columns y, d, z plus zero or more x-prefixed covariate
    columns; a constant column is prepended unless ``add_constant`` is
    False. Raises SchemaError for header problems and ValueError (with
    the 1-based data row) for bad cells.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: missing header row") from None
        rows = list(reader)

    names = [h.strip() for h in header]
    if len(set(names)) != len(names):
        raise SchemaError(f"duplicate columns in header: {names}")
    for required in ("y", "d", "z"):
        if required not in names:
            raise SchemaError(f"missing required column {required!r}")
    x_names = [c for c in names if c not in ("y", "d", "z")]
    bad = [c for c in x_names if not c.startswith("x")]
    if bad:
        raise SchemaError(f"unexpected non-covariate columns: {bad}")
    if not x_names and not add_constant:
        raise SchemaError("no covariate columns and no constant requested")

    index = {name: names.index(name) for name in names}
    n = len(rows)
    if n == 0:
        raise SchemaError("file contains a header but no data rows")
    y = np.empty(n)
    d = np.empty(n)
    z = np.empty(n)
    x = np.empty((n, len(x_names)))
    for i, row in enumerate(rows):
        if len(row) != len(names):
            raise ValueError(f"row {i + 1}: expected {len(names)} fields, got {len(row)}")
        try:
            y[i] = float(row[index["y"]])
            d[i] = float(row[index["d"]])
            z[i] = float(row[index["z"]])
            for j, name in enumerate(x_names):
                x[i, j] = float(row[index[name]])
        except ValueError:
            raise ValueError(f"row {i + 1}: non-numeric cell") from None
        if not (np.isfinite(y[i]) and np.isfinite(x[i]).all()):
            raise ValueError(f"row {i + 1}: non-finite cell")
        if d[i] not in (0.0, 1.0):
            raise ValueError(f"row {i + 1}: d must be 0 or 1, got {row[index['d']]!r}")
        if z[i] not in (0.0, 1.0):
            raise ValueError(f"row {i + 1}: z must be 0 or 1, got {row[index['z']]!r}")

    if add_constant:
        x = np.column_stack([np.ones(n), x])
    # Schema and cell contents are validated above; size and instrument-arm
    # requirements surface through the estimation rank checks instead, so
    # tiny files still load and echo correctly.
    return Dataset(y=y, d=d, z=z, x=x, has_constant=add_constant)


def _csv_num(value) -> str:
    return repr(float(value))


def _read_header(path: str) -> list[str]:
    with open(path, newline="", encoding="utf-8") as handle:
        return [h.strip() for h in next(csv.reader(handle))]


# ---------------------------------------------------------------------------
# Deterministic serialization
# ---------------------------------------------------------------------------


def _fmt_float(value: float) -> str:
    if value != value:
        return "NaN"
    if value in (float("inf"), float("-inf")):
        return "Infinity" if value > 0 else "-Infinity"
    return format(value, ".17g")


def _to_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f'{inner}"{key}": {_to_json(val, indent + 1)}' for key, val in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [f"{inner}{_to_json(val, indent + 1)}" for val in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_estimate(args) -> int:
    tags = _parse_tags(args.estimators)
    for tag in tags:
        if tag == "beta":
            raise InvalidSpecError("cmd_estimate reports scalar estimators only")
    data = ingest_csv(args.input, add_constant=not args.no_constant)
    columns = _read_header(args.input)
    print(f"read {data.n} rows, columns: {','.join(columns)}", file=sys.stderr)

    results = []
    failures = {}
    for tag in tags:
        fn, _ = pipeline_for(tag)
        boot = bootstrap(data, fn, b=args.b, alpha=args.alpha, seed=args.seed)
        results.append(
            {
                "estimator": tag,
                "point": float(boot.point[0]),
                "sd": float(boot.se[0]),
                "ci": [float(boot.ci_lower[0]), float(boot.ci_upper[0])],
            }
        )
        failures[tag] = boot.b_requested - boot.b_effective

    report = {
        "command": "estimate",
        "config": {
            "input": args.input,
            "n": data.n,
            "columns": columns,
            "estimators": tags,
            "b": args.b,
            "alpha": args.alpha,
            "seed": args.seed,
            "no_constant": bool(args.no_constant),
        },
        "results": results,
        "warnings": [],
        "failures": failures,
    }
    _emit_report(args, report, _results_csv(results))
    _print_point_sd_table(results)
    return _EXIT_OK


def cmd_simulate(args) -> int:
    spec = named_dgp(args.dgp)
    tags = _parse_tags(args.estimators)
    keep = args.replicates_out is not None
    summary = run_study(spec, tags, reps=args.reps, n=args.n, seed=args.seed, keep_estimates=keep)

    results = []
    for tag in tags:
        results.append(
            {
                "estimator": tag,
                "truth": [float(v) for v in summary.truth[tag]],
                "bias": [float(v) for v in summary.bias[tag]],
                "sd": [float(v) for v in summary.sd[tag]],
            }
        )
    report = {
        "command": "simulate",
        "config": {
            "dgp": args.dgp,
            "estimators": tags,
            "reps": args.reps,
            "n": args.n,
            "seed": args.seed,
        },
        "results": results,
        "warnings": [],
        "failures": summary.failures,
    }

    lines = ["estimator,dim,truth,bias,sd"]
    for tag in tags:
        for dim in range(summary.truth[tag].size):
            lines.append(
                f"{tag},{dim},{_csv_num(summary.truth[tag][dim])},"
                f"{_csv_num(summary.bias[tag][dim])},{_csv_num(summary.sd[tag][dim])}"
            )
    _emit_report(args, report, "\n".join(lines) + "\n")

    if keep:
        rep_lines = ["rep,estimator,dim,value"]
        for tag in tags:
            estimates = summary.estimates[tag]
            for r in range(estimates.shape[0]):
                for dim in range(estimates.shape[1]):
                    rep_lines.append(f"{r},{tag},{dim},{_csv_num(estimates[r, dim])}")
        _write_text(args.replicates_out, "\n".join(rep_lines) + "\n")
    return _EXIT_OK


def cmd_stratify(args) -> int:
    data = ingest_csv(args.input, add_constant=not args.no_constant)
    prop = fit_propensity(data, "logistic")
    point = stratified_late(data, prop, args.k)
    k_point = point.partition.k
    warnings_list = []
    if k_point < args.k:
        warnings_list.append(
            f"merged {args.k} requested strata down to {k_point}"
        )
        print(warnings_list[-1], file=sys.stderr)

    def strat_pipeline(sample: Dataset) -> np.ndarray:
        prop_b = fit_propensity(sample, "logistic")
        res = stratified_late(sample, prop_b, args.k)
        if res.partition.k != k_point:
            raise UnpartitionableError("replicate merged to a different stratum count")
        return np.concatenate([[res.tau_star], res.beta_star])

    boot = bootstrap(data, strat_pipeline, b=args.b, alpha=args.alpha, seed=args.seed)

    bounds = point.partition.boundaries
    lows = np.concatenate([[0.0], bounds])
    highs = np.concatenate([bounds, [1.0]])
    strata = []
    csv_lines = ["interval_low,interval_high,estimate,ci_low,ci_high"]
    for j in range(k_point):
        row = {
            "interval": [float(lows[j]), float(highs[j])],
            "estimate": float(point.beta_star[j]),
            "ci": [float(boot.ci_lower[j + 1]), float(boot.ci_upper[j + 1])],
        }
        strata.append(row)
        csv_lines.append(
            f"{_csv_num(lows[j])},{_csv_num(highs[j])},{_csv_num(point.beta_star[j])},"
            f"{_csv_num(boot.ci_lower[j + 1])},{_csv_num(boot.ci_upper[j + 1])}"
        )

    report = {
        "command": "stratify",
        "config": {
            "input": args.input,
            "k": args.k,
            "k_effective": k_point,
            "b": args.b,
            "alpha": args.alpha,
            "seed": args.seed,
            "no_constant": bool(args.no_constant),
        },
        "late": {
            "estimate": float(point.tau_star),
            "sd": float(boot.se[0]),
            "ci": [float(boot.ci_lower[0]), float(boot.ci_upper[0])],
        },
        "strata": strata,
        "warnings": warnings_list,
        "failures": {"strat": boot.b_requested - boot.b_effective},
    }
    _emit_report(args, report, "\n".join(csv_lines) + "\n")
    print(f"late estimate {_csv_num(point.tau_star)} ({k_point} strata)", file=sys.stderr)
    return _EXIT_OK


def _parse_tags(raw: str) -> list[str]:
    tags = [t.strip() for t in raw.split(",") if t.strip()]
    if not tags:
        raise InvalidSpecError("no estimators requested")
    for tag in tags:
        try:
            pipeline_for(tag)
        except ValueError as exc:
            raise InvalidSpecError(str(exc)) from None
    return tags


def _results_csv(results: list[dict]) -> str:
    lines = ["estimator,point,sd,ci_low,ci_high"]
    for row in results:
        lines.append(
            f"{row['estimator']},{_csv_num(row['point'])},{_csv_num(row['sd'])},"
            f"{_csv_num(row['ci'][0])},{_csv_num(row['ci'][1])}"
        )
    return "\n".join(lines) + "\n"


def _print_point_sd_table(results: list[dict]) -> None:
    out = io.StringIO()
    tags = [row["estimator"] for row in results]
    width = max(10, *(len(t) for t in tags)) + 2
    out.write(" " * 8 + "".join(f"{t:>{width}}" for t in tags) + "\n")
    out.write("point   " + "".join(f"{row['point']:>{width}.3f}" for row in results) + "\n")
    out.write("sd      " + "".join(f"{row['sd']:>{width}.3f}" for row in results) + "\n")
    print(out.getvalue(), end="", file=sys.stderr)


def _emit_report(args, report: dict, csv_text: str) -> None:
    if args.format == "json":
        _write_text(args.output, _to_json(report) + "\n")
    else:
        _write_text(args.output, csv_text)


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivlate",
        description="Interacted 2SLS estimation of local average treatment effects",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=["json", "csv"], default="json")

    est = sub.add_parser("estimate", parents=[common], help="estimate effects from a CSV")
    est.add_argument("--input", required=True, help="CSV with columns y,d,z,x1,...")
    est.add_argument("--estimators", default="++,x+,xx", help="comma-separated tags")
    est.add_argument("--b", type=int, default=1000, help="bootstrap replicates")
    est.add_argument("--alpha", type=float, default=0.05)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--no-constant", action="store_true")

    sim = sub.add_parser("simulate", parents=[common], help="replicate a bundled design")
    sim.add_argument("--dgp", required=True, help="design name: A, B, C, or D")
    sim.add_argument("--estimators", default="++,x+,xx")
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--n", type=int, default=1000)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--replicates-out", default=None, help="per-replicate CSV path")

    strat = sub.add_parser("stratify", parents=[common], help="propensity-score strata")
    strat.add_argument("--input", required=True)
    strat.add_argument("--k", type=int, required=True, help="requested stratum count")
    strat.add_argument("--b", type=int, default=1000)
    strat.add_argument("--alpha", type=float, default=0.05)
    strat.add_argument("--seed", type=int, default=0)
    strat.add_argument("--no-constant", action="store_true")
    return parser


def _validate_config(args) -> None:
    if getattr(args, "b", 10) < 10:
        raise InvalidSpecError("--b must be at least 10")
    if not 0.0 < getattr(args, "alpha", 0.05) < 1.0:
        raise InvalidSpecError("--alpha must lie strictly between 0 and 1")
    if getattr(args, "seed", 0) is not None and args.seed < 0:
        raise InvalidSpecError("--seed must be non-negative")
    if getattr(args, "reps", 1) < 1:
        raise InvalidSpecError("--reps must be at least 1")
    if getattr(args, "n", 2) < 1:
        raise InvalidSpecError("--n must be at least 1")
    if getattr(args, "k", 1) < 1:
        raise InvalidSpecError("--k must be at least 1")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return _EXIT_OK if exc.code in (0, None) else _EXIT_CONFIG

    try:
        _validate_config(args)
        if args.command == "simulate":
            named_dgp(args.dgp)  # fail fast on unknown names
    except (InvalidSpecError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG

    try:
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_stratify(args)
    except InvalidSpecError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (SchemaError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return _EXIT_DATA
    except (IdentificationError, TooManyFailuresError) as exc:
        print(f"estimation failure: {exc}", file=sys.stderr)
        return _EXIT_ESTIMATION
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return _EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
