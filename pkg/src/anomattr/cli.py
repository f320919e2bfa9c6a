"""anomattr command line: score | attribute | compare | variability | gen-synth.

Exit codes: 0 ok, 2 usage, 3 data error, 4 model protocol error,
5 non-convergence. All commands are deterministic under --seed and write
LF-terminated UTF-8 CSV (or JSON with --format json).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import synth
from .analysis import bootstrap_variability, consistency_metrics
from .baselines import (IgConfig, LimeConfig, SvConfig, eig_attribute,
                        ig_attribute, lime_attribute, sv_attribute,
                        zscore_attribute)
from .core import (AnomattrError, ConvergenceError, DataError, ModelProtocolError,
                   ReferenceSet, TestSet, derive_seed)
from .gradest import GradientConfig
from .lc import LcConfig, solve_lc
from .models import builtin_names, connect_external, register_builtin
from .probmodel import VarianceConfig, anomaly_score, predictive_for

MAX_WORKERS = 8


class UsageError(AnomattrError):
    """Bad invocation: missing inputs or incompatible flags (exit 2)."""


def _fmt(v) -> str:
    return repr(float(v))


def read_dataset(path: str, target: str = "y"):
    """Read a numeric CSV with a header; returns (names, X, y or None)."""
    p = Path(path)
    if not p.exists():
        raise UsageError(f"file not found: {path}")
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise UsageError(f"{path}: no data rows")
    header = [h.strip() for h in header]
    data = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, "
                            f"expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell at row {i + 2}, "
                                f"column {header[j]!r}") from None
    if target in header:
        ycol = header.index(target)
        names = tuple(h for k, h in enumerate(header) if k != ycol)
        X = np.delete(data, ycol, axis=1)
        return names, X, data[:, ycol]
    return tuple(header), data, None


def _write_text(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _load_model(args):
    if getattr(args, "external_cmd", None):
        return connect_external(args.external_cmd, timeout=args.timeout)
    if getattr(args, "model", None):
        params = json.loads(args.model_params) if args.model_params else {}
        return register_builtin(args.model, params)
    raise UsageError("specify a model with --model or --external-cmd")


def _reference(args, role: str, required_by: str | None = None):
    if not getattr(args, "ref", None):
        if required_by:
            raise UsageError(
                f"method {required_by!r} requires a reference set; pass --ref")
        return None
    names, X, y = read_dataset(args.ref, args.target)
    if role == "held-out" and y is None:
        raise DataError(f"--ref {args.ref}: held-out set needs a {args.target!r} column")
    return ReferenceSet(X, y, role)


def _grad_config(args, row: int) -> GradientConfig:
    return GradientConfig(ns=args.ns, eta=args.eta, scheme=args.scheme,
                          seed=derive_seed(args.seed, row, 0x6D))


def _variance_config(args) -> VarianceConfig:
    return VarianceConfig(w0=args.w0, eta0=args.eta0,
                          fallback_sigma2=args.fallback_sigma2)


def _sigma2_for(sample, ho, handle, args) -> float:
    if ho is not None:
        return predictive_for(sample.x, ho, handle, _variance_config(args)).sigma2
    if args.fallback_sigma2 is not None:
        return args.fallback_sigma2
    raise UsageError("lc needs --ref (held-out set) or --fallback-sigma2")


# ----------------------------------------------------------------- score

def cmd_score(args) -> int:
    names, X, y = read_dataset(args.test, args.target)
    if y is None:
        raise DataError(f"{args.test}: missing {args.target!r} column")
    ts = TestSet.from_arrays(X, y, names)
    handle = _load_model(args)
    try:
        ho_names, HX, Hy = read_dataset(args.ref, args.target)
        if Hy is None:
            raise DataError(f"{args.ref}: missing {args.target!r} column")
        if ho_names != names:
            raise DataError("test and held-out files have different headers")
        ho = ReferenceSet(HX, Hy, "held-out")
        vcfg = _variance_config(args)

        def one(i):
            s = ts.samples[i]
            gp = predictive_for(s.x, ho, handle, vcfg)
            return handle.eval_one(s.x), gp.sigma2, anomaly_score(s, gp)

        with ThreadPoolExecutor(max_workers=min(MAX_WORKERS, len(ts))) as ex:
            results = list(ex.map(one, range(len(ts))))
        collective = float(np.mean([r[2] for r in results]))
        if args.format == "json":
            obj = {"rows": [{"index": i, "prediction": r[0], "sigma2": r[1],
                             "anomaly_score": r[2]} for i, r in enumerate(results)],
                   "collective": collective}
            _write_text(args.out, _json_text(obj))
        else:
            rows = [[str(i), _fmt(r[0]), _fmt(r[1]), _fmt(r[2])]
                    for i, r in enumerate(results)]
            rows.append(["collective", "", "", _fmt(collective)])
            _write_text(args.out, _csv_text(
                ["index", "prediction", "sigma2", "anomaly_score"], rows))
        return 0
    finally:
        handle.close()


# ------------------------------------------------------------- attribute

def _parse_baseline(args, m, ref):
    if args.baseline is None:
        raise UsageError("method 'ig' requires --baseline (comma floats or 'ref-mean')")
    if args.baseline == "ref-mean":
        if ref is None:
            raise UsageError("--baseline ref-mean requires --ref")
        return tuple(float(v) for v in ref.x.mean(axis=0))
    try:
        vals = tuple(float(v) for v in args.baseline.split(","))
    except ValueError:
        raise UsageError(f"bad --baseline value: {args.baseline!r}") from None
    if len(vals) != m:
        raise DataError(f"--baseline has {len(vals)} entries, expected {m}")
    return vals


def _lc_config(args, *seed_parts) -> LcConfig:
    return LcConfig(lam=args.lam, nu=args.nu, kappa0=args.kappa,
                    kappa_decay=args.decay, max_iter=args.max_iter,
                    tol=args.tol, init_scale=args.init_scale,
                    seed=derive_seed(args.seed, *seed_parts),
                    grad=_grad_config(args, seed_parts[0] if seed_parts else 0))


def _attribute_one(args, handle, ts, ho, ref, i):
    s = ts.samples[i]
    method = args.method
    if method == "lc":
        sigma2 = _sigma2_for(s, ho, handle, args)
        one_ts = TestSet((s,), ts.names)
        return solve_lc(one_ts, sigma2, handle, _lc_config(args, i)).attribution(ts.names)
    if method == "lime":
        cfg = LimeConfig(ns=max(args.lime_ns, ts.m + 2),
                         sigma_local=args.sigma_local, nu=args.nu,
                         seed=derive_seed(args.seed, i))
        return lime_attribute(s, handle, cfg, ts.names)
    if method == "ig":
        cfg = IgConfig(baseline_x=_parse_baseline(args, ts.m, ref),
                       intervals=args.intervals, grad=_grad_config(args, i))
        return ig_attribute(s, handle, cfg, ts.names)
    if method == "eig":
        cfg = IgConfig(baseline_x=(), intervals=args.intervals,
                       grad=_grad_config(args, i))
        return eig_attribute(s, handle, ref, cfg, ts.names)
    if method == "sv":
        cfg = SvConfig(mc_samples=args.mc_samples, seed=derive_seed(args.seed, i))
        return sv_attribute(s, handle, ref, cfg, ts.names)
    if method == "zscore":
        return zscore_attribute(s, ref, ts.names)
    raise UsageError(f"unknown method {args.method!r}")


def cmd_attribute(args) -> int:
    names, X, y = read_dataset(args.test, args.target)
    if y is None:
        raise DataError(f"{args.test}: missing {args.target!r} column")
    ts = TestSet.from_arrays(X, y, names)
    handle = _load_model(args)
    try:
        ref = None
        ho = None
        if args.method in ("eig", "sv", "zscore"):
            ref = _reference(args, "baseline-distribution", required_by=args.method)
        elif args.method in ("ig", "lc"):
            role = "held-out" if args.method == "lc" else "baseline-distribution"
            ref = _reference(args, role)
            if args.method == "lc":
                ho = ref
        if ref is not None and ref.m != ts.m:
            raise DataError("test and reference dimensionality differ")

        if args.collective:
            if args.method != "lc":
                raise UsageError("--collective is only supported for method 'lc'")
            sigma2s = [_sigma2_for(s, ho, handle, args) for s in ts.samples]
            res = solve_lc(ts, sigma2s, handle, _lc_config(args, 0xA11))
            results = [("all", res.attribution(ts.names))]
        else:
            with ThreadPoolExecutor(max_workers=min(MAX_WORKERS, len(ts))) as ex:
                avs = list(ex.map(
                    lambda i: _attribute_one(args, handle, ts, ho, ref, i),
                    range(len(ts))))
            results = list(zip(map(str, range(len(ts))), avs))

        diag_cols = ("iterations", "objective", "converged")
        if args.format == "json":
            obj = {"rows": [{
                "index": idx, "method": av.method, "scores": av.as_dict(),
                "diagnostics": {k: av.diagnostics[k] for k in diag_cols
                                if k in av.diagnostics},
            } for idx, av in results]}
            _write_text(args.out, _json_text(obj))
        else:
            header = ["index", "method", *ts.names, *diag_cols]
            rows = []
            for idx, av in results:
                diag = [str(av.diagnostics.get("iterations", "")),
                        _fmt(av.diagnostics["objective"])
                        if "objective" in av.diagnostics else "",
                        str(av.diagnostics.get("converged", "")).lower()
                        if "converged" in av.diagnostics else ""]
                rows.append([idx, av.method, *(_fmt(v) for v in av.scores), *diag])
            _write_text(args.out, _csv_text(header, rows))
        return 0
    finally:
        handle.close()


# --------------------------------------------------------------- compare

def _read_attributions(path: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"file not found: {path}")
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if header[:2] != ["index", "method"] or "iterations" not in header:
        raise DataError(f"{path}: not an attribution file")
    feat = tuple(header[2:header.index("iterations")])
    out = []
    for row in rows:
        scores = np.array([float(v) for v in row[2:2 + len(feat)]])
        out.append((row[0], row[1], scores))
    return feat, out


def cmd_compare(args) -> int:
    if len(args.files) < 2:
        raise UsageError("compare needs at least two attribution files")
    loaded = [_read_attributions(p) for p in args.files]
    feat0 = loaded[0][0]
    for (feat, _), p in zip(loaded, args.files):
        if feat != feat0:
            raise DataError(f"{p}: feature names differ from {args.files[0]}")
    ref_rows = None
    for feat, rows in loaded:
        if rows and rows[0][1] == args.reference:
            ref_rows = {idx: sc for idx, _, sc in rows}
            break
    if ref_rows is None:
        raise DataError(f"no input file carries reference method {args.reference!r}")
    cols = ("kendall_tau", "spearman_rho", "sign_match", "hit25")
    table = []
    summary = []
    for feat, rows in loaded:
        per_method = []
        for idx, method, sc in rows:
            if idx not in ref_rows:
                raise DataError(f"row index {idx!r} missing from the reference file")
            mets = consistency_metrics(ref_rows[idx], sc)
            table.append((method, idx, mets))
            per_method.append((method, mets))
        if per_method:
            method = per_method[0][0]
            for stat, fn in (("mean", np.mean), ("sd", lambda v: np.std(v, ddof=0))):
                agg = {k: float(fn([m[k] for _, m in per_method])) for k in cols}
                summary.append((method, stat, agg))
    if args.format == "json":
        obj = {"reference": args.reference,
               "rows": [{"method": m, "row": i, **mt} for m, i, mt in table],
               "summary": [{"method": m, "stat": s, **mt} for m, s, mt in summary]}
        _write_text(args.out, _json_text(obj))
    else:
        rows = [[m, i, *(_fmt(mt[c]) for c in cols)] for m, i, mt in table]
        rows += [[m, s, *(_fmt(mt[c]) for c in cols)] for m, s, mt in summary]
        _write_text(args.out, _csv_text(["method", "row", *cols], rows))
    return 0


# ----------------------------------------------------------- variability

def cmd_variability(args) -> int:
    names, X, y = read_dataset(args.test, args.target)
    if y is None:
        raise DataError(f"{args.test}: missing {args.target!r} column")
    ts = TestSet.from_arrays(X, y, names)
    if not 0 <= args.index < len(ts):
        raise UsageError(f"--index {args.index} out of range")
    s = ts.samples[args.index]
    handle = _load_model(args)
    try:
        ref = _reference(args, "baseline-distribution", required_by=args.method)
        baseline = (_parse_baseline(args, ts.m, ref) if args.method == "ig"
                    and args.baseline else ())
        dist = bootstrap_variability(
            args.method, s, handle, ref, args.bootstrap, args.nb,
            seed=args.seed,
            lime_cfg=LimeConfig(ns=max(args.lime_ns, ts.m + 2),
                                sigma_local=args.sigma_local, nu=args.nu,
                                seed=derive_seed(args.seed, args.index)),
            ig_cfg=IgConfig(baseline_x=baseline, intervals=args.intervals,
                            grad=_grad_config(args, args.index)),
            sv_cfg=SvConfig(mc_samples=args.mc_samples,
                            seed=derive_seed(args.seed, args.index)),
            names=ts.names)
        outdir = Path(args.out or ".")
        outdir.mkdir(parents=True, exist_ok=True)
        kde = dist.kde_grid(points=200)
        if args.format == "json":
            obj = {"method": args.method,
                   "distribution": {n: [float(v) for v in dist.values[:, j]]
                                    for j, n in enumerate(dist.names)},
                   "kde": {n: {"score": [float(v) for v in g],
                               "density": [float(v) for v in d]}
                           for n, (g, d) in kde.items()}}
            (outdir / "distribution.json").write_text(_json_text(obj),
                                                      encoding="utf-8", newline="")
        else:
            rows = [[n, str(b), _fmt(dist.values[b, j])]
                    for j, n in enumerate(dist.names)
                    for b in range(dist.values.shape[0])]
            (outdir / "distribution.csv").write_text(
                _csv_text(["feature", "round", "score"], rows),
                encoding="utf-8", newline="")
            krows = [[n, _fmt(g[k]), _fmt(d[k])]
                     for n, (g, d) in kde.items() for k in range(g.size)]
            (outdir / "kde.csv").write_text(
                _csv_text(["feature", "score", "density"], krows),
                encoding="utf-8", newline="")
        return 0
    finally:
        handle.close()


# ------------------------------------------------------------- gen-synth

def cmd_gen_synth(args) -> int:
    names, X, y = synth.generate(args.name, args.n, seed=args.seed,
                                 noise_sd=args.noise, outliers=args.outliers)
    if args.format == "json":
        obj = {"columns": [*names, args.target],
               "rows": [[float(v) for v in row] + [float(t)]
                        for row, t in zip(X, y)]}
        _write_text(args.out, _json_text(obj))
    else:
        rows = [[_fmt(v) for v in row] + [_fmt(t)] for row, t in zip(X, y)]
        _write_text(args.out, _csv_text([*names, args.target], rows))
    return 0


# ---------------------------------------------------------------- parser

def _add_model_flags(p):
    p.add_argument("--model", help=f"builtin model ({', '.join(builtin_names())})")
    p.add_argument("--model-params", help="JSON parameters for the builtin model")
    p.add_argument("--external-cmd", help="command line of an external model process")
    p.add_argument("--timeout", type=float, default=30.0,
                   help="external model reply timeout in seconds")


def _add_common_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--target", default="y", help="target column name")
    p.add_argument("--config", help="key=value defaults file; flags win")


def _add_variance_flags(p):
    p.add_argument("--w0", type=float, default=5.0)
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--fallback-sigma2", type=float, default=None)


def _add_method_flags(p):
    p.add_argument("--method", required=True,
                   choices=("lc", "lime", "ig", "eig", "sv", "zscore"))
    p.add_argument("--ref", help="reference / held-out CSV")
    p.add_argument("--baseline", help="IG baseline: comma floats or 'ref-mean'")
    p.add_argument("--nu", type=float, default=0.01, help="l1 strength")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1,
                   help="l2 strength (lc)")
    p.add_argument("--kappa", type=float, default=0.1, help="lc learning rate")
    p.add_argument("--decay", type=float, default=0.98, help="lc kappa decay")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--init-scale", type=float, default=1e-3)
    p.add_argument("--ns", type=int, default=10, help="gradient perturbations")
    p.add_argument("--eta", type=float, default=1.0, help="gradient perturbation sd")
    p.add_argument("--scheme", choices=("slope-mean", "gaussian-smoothing"),
                   default="slope-mean")
    p.add_argument("--lime-ns", type=int, default=1000, help="LIME local samples")
    p.add_argument("--sigma-local", type=float, default=0.3)
    p.add_argument("--intervals", type=int, default=100)
    p.add_argument("--mc-samples", type=int, default=2000)


def build_parser():
    ap = argparse.ArgumentParser(prog="anomattr",
                                 description="Anomaly scores and per-variable "
                                             "attribution for black-box regressors")
    sub = ap.add_subparsers(dest="command", required=True)
    parsers = {}

    p = parsers["score"] = sub.add_parser("score", help="anomaly scores for a test CSV")
    p.add_argument("test")
    p.add_argument("--ref", required=True, help="held-out CSV for variance")
    _add_model_flags(p)
    _add_variance_flags(p)
    _add_common_flags(p)
    p.set_defaults(fn=cmd_score)

    p = parsers["attribute"] = sub.add_parser("attribute",
                                              help="per-variable attribution scores")
    p.add_argument("test")
    _add_model_flags(p)
    _add_method_flags(p)
    _add_variance_flags(p)
    p.add_argument("--collective", action="store_true",
                   help="one lc explanation for the whole test set")
    _add_common_flags(p)
    p.set_defaults(fn=cmd_attribute)

    p = parsers["compare"] = sub.add_parser(
        "compare", help="consistency metrics between attribution files")
    p.add_argument("files", nargs="+")
    p.add_argument("--reference", default="lc", help="reference method name")
    _add_common_flags(p)
    p.set_defaults(fn=cmd_compare)

    p = parsers["variability"] = sub.add_parser(
        "variability", help="bootstrap score variability and KDE")
    p.add_argument("test")
    p.add_argument("--index", type=int, default=0, help="test row to explain")
    p.add_argument("--bootstrap", type=int, default=10, help="bootstrap rounds")
    p.add_argument("--nb", type=int, default=100, help="resample size")
    _add_model_flags(p)
    _add_method_flags(p)
    _add_common_flags(p)
    p.set_defaults(fn=cmd_variability)

    p = parsers["gen-synth"] = sub.add_parser(
        "gen-synth", help="write a reproducible synthetic dataset")
    p.add_argument("name", help=f"generator ({', '.join(synth.generator_names())})")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=None,
                   help="observation noise sd (generator default if omitted)")
    p.add_argument("--outliers", type=int, default=0,
                   help="plant this many shifted-target rows at the top")
    _add_common_flags(p)
    p.set_defaults(fn=cmd_gen_synth)
    return ap, parsers


def _apply_config_file(parsers: dict, argv: list[str]):
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    overrides = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        overrides[key.strip().replace("-", "_")] = value.strip()
    # config supplies defaults only; explicit flags win at parse time
    for sp in parsers.values():
        known = {a.dest: a for a in sp._actions}
        typed = {}
        for k, v in overrides.items():
            if k in known:
                a = known[k]
                if isinstance(a, argparse._StoreTrueAction):
                    typed[k] = v.lower() in ("1", "true", "yes")
                elif a.type is not None:
                    typed[k] = a.type(v)
                else:
                    typed[k] = v
        sp.set_defaults(**typed)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap, parsers = build_parser()
    try:
        _apply_config_file(parsers, argv)
        args = ap.parse_args(argv)
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ModelProtocolError as e:
        print(f"model error: {e}", file=sys.stderr)
        return 4
    except ConvergenceError as e:
        print(f"non-convergence: {e}", file=sys.stderr)
        return 5
    except AnomattrError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
