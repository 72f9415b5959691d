"""Command line front end.

One subcommand per batch operation: fit, predict, simulate, qev,
block-maxima, excesses, extremal-index.  Data moves as CSV with "NA"
as the missing-value token (override with --na); model state moves as
the JSON artifact written by the fit subcommand.

Exit codes: 0 success, 2 spec or argument problems, 3 fit failures,
4 unreadable or unwritable files.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .decluster import block_maxima, extremal_index, threshold_excesses
from .fit import FitError, fit
from .inference import summarize
from .model import ModelSpec
from .returnlevels import qev
from .serialize import _jsonable, load_model, save_model

EXIT_SPEC = 2
EXIT_FIT = 3
EXIT_IO = 4


class SpecFileError(ValueError):
    """Model-spec file could not be parsed or validated."""


class CliIOError(OSError):
    pass


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CliIOError(f"cannot read {path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecFileError(
            f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e


def parse_spec(path):
    """Read a model-spec file: returns (ModelSpec, fit options dict).

    The file is JSON with keys family (default "gev"), response or
    censor, formulas, optional ald/pp argument blocks and an options
    block (trace, maxdata, maxspline, rho0, inits, outer, seed).
    formulas may be a dict keyed by parameter name, a list of
    per-parameter term lists, or a single term list applied to every
    parameter.
    """
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise SpecFileError(f"{path}: expected a JSON object at top level")
    d = dict(doc)
    d.setdefault("family", "gev")
    options = d.pop("options", {})
    if not isinstance(options, dict):
        raise SpecFileError(f"{path}: options must be an object")
    ald = d.pop("ald", None)
    if ald:
        d.setdefault("tau", ald.get("tau"))
        d.setdefault("omega", ald.get("omega"))
    if d["family"] == "pp":
        pp = d.get("pp")
        if not pp or "ny" not in pp:
            raise SpecFileError(
                f"{path}: pp models need pp.ny (periods of observation)")
    raw = d.get("formulas", [])
    if isinstance(raw, list) and raw and isinstance(raw[0], dict):
        # single term list: repeated for each family parameter
        from .families import make_family
        nparam = make_family(d["family"]).nparam
        d["formulas"] = [list(raw) for _ in range(nparam)]
    try:
        spec = ModelSpec.from_dict(d)
    except (ValueError, KeyError, TypeError) as e:
        raise SpecFileError(f"{path}: {e}") from e
    return spec, options


def _read_csv(path, na):
    try:
        return pd.read_csv(path, na_values=[na])
    except OSError as e:
        raise CliIOError(f"cannot read {path}: {e}") from e


def _write_csv(df, path, na):
    try:
        df.to_csv(path, index=False, na_rep=na)
    except OSError as e:
        raise CliIOError(f"cannot write {path}: {e}") from e


def _float_list(text):
    return [float(v) for v in str(text).split(",")]


def cmd_fit(args):
    spec, options = parse_spec(args.spec)
    df = _read_csv(args.data, args.na)
    n_read = len(df)

    kw = dict(options)
    for name in ("trace", "maxdata", "maxspline", "outer", "seed"):
        v = getattr(args, name.replace("-", "_"))
        if v is not None:
            kw[name] = v
    if args.rho0 is not None:
        r = _float_list(args.rho0)
        kw["rho0"] = r[0] if len(r) == 1 else np.array(r)
    elif isinstance(kw.get("rho0"), list):
        kw["rho0"] = np.array(kw["rho0"], dtype=float)
    if isinstance(kw.get("inits"), list):
        kw["inits"] = [float(v) for v in kw["inits"]]

    model = fit(spec, df, **kw)

    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliIOError(f"cannot create {outdir}: {e}") from e
    save_model(model, outdir / "model.json")
    (outdir / "summary.txt").write_text(str(summarize(model)))

    diag = {
        "n_rows_read": n_read,
        "n_rows_fit": model.meta["n"],
        "laml": model.meta["laml"],
        "loglik": model.meta["loglik"],
        "edf": model.edf,
        "rho": np.asarray(model.rho).tolist(),
        "outer": _jsonable(model.meta["outer"]),
        "options": _jsonable(model.meta["options"]),
    }
    if spec.family != "pp" and kw.get("maxdata") is None:
        diag["n_rows_excluded"] = n_read - model.meta["n"]
    if "pp_groups" in model.meta:
        diag["pp_groups"] = model.meta["pp_groups"]
    (outdir / "diagnostics.json").write_text(
        json.dumps(diag, indent=2, sort_keys=True) + "\n")
    print(f"fitted {spec.family} model: n={model.meta['n']} "
          f"edf={model.edf:.2f} laml={model.meta['laml']:.4f}")
    return 0


def _quantile_colname(prob_text):
    return f"q:{prob_text}"


def cmd_predict(args):
    model = load_model(args.model)
    df = _read_csv(args.data, args.na)
    if args.type == "quantile":
        if args.prob is None:
            raise SpecFileError("--type quantile needs --prob")
        out = model.predict(df, type="quantile", prob=float(args.prob),
                            se_fit=args.se, m=args.m, zeta=args.zeta,
                            theta=args.theta)
        name = _quantile_colname(args.prob)
        out = out.rename(columns={"quantile": name,
                                  "quantile_se": name + "_se"})
    else:
        out = model.predict(df, type=args.type, se_fit=args.se)
    _write_csv(out, args.out, args.na)
    return 0


def cmd_simulate(args):
    model = load_model(args.model)
    df = _read_csv(args.data, args.na)
    prob = float(args.prob) if args.prob is not None else None
    sims = model.simulate(df, nsim=args.nsim, seed=args.seed,
                          type=args.type, prob=prob)
    if args.type == "quantile":
        cols = {f"sim{j + 1}": sims[:, j] for j in range(args.nsim)}
    else:
        cols = {}
        for param, vals in sims.items():
            for j in range(args.nsim):
                cols[f"{param}_sim{j + 1}"] = vals[:, j]
    _write_csv(pd.DataFrame(cols), args.out, args.na)
    sidecar = {"seed": args.seed, "nsim": args.nsim, "type": args.type}
    if prob is not None:
        sidecar["prob"] = prob
    Path(str(args.out) + ".meta.json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n")
    return 0


def cmd_qev(args):
    df = _read_csv(args.data, args.na)
    for col in (args.loc_col, args.scale_col, args.shape_col):
        if col not in df.columns:
            raise SpecFileError(f"parameter column {col!r} not in "
                                f"{args.data}")
    alpha = (df[args.alpha_col].to_numpy()
             if args.alpha_col in df.columns else 1.0)
    z = qev(float(args.p), df[args.loc_col].to_numpy(),
            df[args.scale_col].to_numpy(), df[args.shape_col].to_numpy(),
            m=args.m, alpha=alpha, theta=args.theta, family=args.family,
            tau=args.tau)
    if args.out:
        _write_csv(pd.DataFrame({"p": [float(args.p)], "z": [z]}),
                   args.out, args.na)
    print(f"{z!r}")
    return 0


def cmd_block_maxima(args):
    df = _read_csv(args.data, args.na)
    out = block_maxima(df, args.by.split(","), args.value)
    _write_csv(out, args.out, args.na)
    return 0


def cmd_excesses(args):
    df = _read_csv(args.data, args.na)
    if args.threshold in df.columns:
        u = df[args.threshold].to_numpy()
    else:
        try:
            u = float(args.threshold)
        except ValueError:
            raise SpecFileError(
                f"--threshold {args.threshold!r} is neither a column "
                "nor a number") from None
    out = df.copy()
    out["excess"] = threshold_excesses(df[args.value].to_numpy(), u)
    _write_csv(out, args.out, args.na)
    return 0


def cmd_extremal_index(args):
    df = _read_csv(args.data, args.na)
    if args.exceed is not None:
        ind = df[args.exceed].to_numpy().astype(bool)
    elif args.value is not None and args.threshold is not None:
        ind = df[args.value].to_numpy() > float(args.threshold)
    else:
        raise SpecFileError(
            "give either --exceed or both --value and --threshold")
    times = None
    if args.times is not None:
        col = df[args.times]
        times = (pd.to_datetime(col).to_numpy()
                 if col.dtype == object else col.to_numpy())
    est = extremal_index(ind, times=times)
    doc = {"theta": est.theta, "n_exceedances": est.n_exceedances,
           "branch": est.branch,
           "mean_cluster_size": est.mean_cluster_size}
    text = json.dumps(doc, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="evsmooth",
        description="Additive smooth modelling of extreme values")
    p.add_argument("--na", default="NA", help="missing-value token")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a model spec to CSV data")
    f.add_argument("spec", help="model-spec JSON file")
    f.add_argument("data", help="CSV data file")
    f.add_argument("out", help="output directory")
    f.add_argument("--trace", type=int, default=None)
    f.add_argument("--maxdata", type=int, default=None)
    f.add_argument("--maxspline", type=int, default=None)
    f.add_argument("--rho0", default=None,
                   help="initial log smoothing parameters, comma-separated")
    f.add_argument("--outer", default=None,
                   choices=["bfgs", "fd", "newton", "fixed"])
    f.add_argument("--seed", type=int, default=None)
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="predictions from a saved model")
    pr.add_argument("model")
    pr.add_argument("data")
    pr.add_argument("out")
    pr.add_argument("--type", default="response",
                    choices=["link", "response", "quantile"])
    pr.add_argument("--prob", default=None)
    pr.add_argument("--se", action="store_true")
    pr.add_argument("--m", type=float, default=1.0)
    pr.add_argument("--zeta", type=float, default=1.0)
    pr.add_argument("--theta", type=float, default=1.0)
    pr.set_defaults(func=cmd_predict)

    sm = sub.add_parser("simulate", help="posterior draws from a model")
    sm.add_argument("model")
    sm.add_argument("data")
    sm.add_argument("out")
    sm.add_argument("--nsim", type=int, default=100)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--type", default="response",
                    choices=["link", "response", "quantile"])
    sm.add_argument("--prob", default=None)
    sm.set_defaults(func=cmd_simulate)

    q = sub.add_parser("qev", help="composite annual-maximum quantile")
    q.add_argument("data", help="CSV of per-row parameters")
    q.add_argument("--p", required=True)
    q.add_argument("--m", type=float, default=1.0)
    q.add_argument("--theta", type=float, default=1.0)
    q.add_argument("--tau", type=float, default=0.0)
    q.add_argument("--family", default="gev", choices=["gev", "gpd"])
    q.add_argument("--loc-col", default="loc")
    q.add_argument("--scale-col", default="scale")
    q.add_argument("--shape-col", default="shape")
    q.add_argument("--alpha-col", default="alpha")
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_qev)

    bm = sub.add_parser("block-maxima", help="per-block maxima")
    bm.add_argument("data")
    bm.add_argument("out")
    bm.add_argument("--by", required=True,
                    help="block column(s), comma-separated")
    bm.add_argument("--value", required=True)
    bm.set_defaults(func=cmd_block_maxima)

    ex = sub.add_parser("excesses", help="threshold excesses (NA below)")
    ex.add_argument("data")
    ex.add_argument("out")
    ex.add_argument("--value", required=True)
    ex.add_argument("--threshold", required=True,
                    help="number or column name")
    ex.set_defaults(func=cmd_excesses)

    ei = sub.add_parser("extremal-index",
                        help="intervals estimator of the extremal index")
    ei.add_argument("data")
    ei.add_argument("--exceed", default=None,
                    help="boolean exceedance column")
    ei.add_argument("--value", default=None)
    ei.add_argument("--threshold", default=None)
    ei.add_argument("--times", default=None,
                    help="time-stamp column (dates allowed)")
    ei.add_argument("--out", default=None)
    ei.set_defaults(func=cmd_extremal_index)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecFileError,) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SPEC
    except (FitError,) as e:
        print(f"fit failed: {e}", file=sys.stderr)
        return EXIT_FIT
    except CliIOError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (KeyError,) as e:
        print(f"error: missing column {e}", file=sys.stderr)
        return EXIT_SPEC
    except ValueError as e:
        # inside `fit` these are engine failures; elsewhere bad arguments
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FIT if args.command == "fit" else EXIT_SPEC
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
