"""Command line entry point: ``prefsdm {simulate,fit,predict,evaluate}``.

Every command writes under ``--out DIR`` (created if missing) with fixed names:

  simulate   pa.csv, raster.csv, po.csv, degradation.csv (fusion only), truth.manifest
  fit        scalars_<block>.csv, field_<name>.csv, sites.csv, run.manifest
  predict    surface.csv  (cell,mean,lo,hi)
  evaluate   tr_table.csv (model,tr_mean,tr_lo,tr_hi), train.csv, test.csv

Settings may also come from an INI file (``--config FILE``): keys are the long
option names with dashes or underscores, read from a ``[common]`` section and
then from the section named after the command; command-line flags win.

Exit status: 0 success, 2 invalid input or usage, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import NumericalError, PrefSDMError, SpecificationError
from .evaluate import (
    ROUNDING,
    compare_models,
    format_comparison,
    holdout_split,
    holdout_tjur,
    predict_surface,
    write_comparison,
    write_surface,
)
from .geodata import (
    GridSpec,
    file_digest,
    read_degradation,
    read_points,
    read_raster,
    write_degradation,
    write_points,
    write_raster,
)
from .gp import ExpCovParams
from .latent import FUSION_KINDS, KINDS, kind_slug, model_kind
from .mcmc import ChainConfig, ModelSpec, PosteriorArchive, PriorSpec, fit
from .simulate import DESIGNS, POSpec, ScenarioSpec, figure4_scenario, fusion_scenario, simulate_scenario

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

_DEFAULTS = {
    "simulate": dict(design="preferential", response="d", delta=None, intercept=3.0,
                     eta_sigma2=3.0, eta_phi=1.0, expected_sites=200.0, seed=0, width=10.0,
                     height=10.0, n_cols=20, n_rows=20, n_covariates=0, omega_sigma2=1.0,
                     omega_phi=1.0, delta_po=0.8, po_events=200.0, figure4=False, fusion=False),
    "fit": dict(model="d", intensity_pa=None, intensity_po=None, po=None, degradation=None,
                burn_in=5000, keep=5000, thin=1, field_thin=10, adapt_window=25, seed=0,
                chains=1, threads=1, k=15, ordering="lex", alpha_var=100.0, beta_var=100.0,
                delta_var=100.0, delta_po_truncated=True, sigma2_shape=2.0, sigma2_rate=0.1,
                phi_max=200.0, tau2=1.0, ess_report=False),
    "predict": dict(seed=0, level=0.95),
    "evaluate": dict(models="a,d", po=None, degradation=None, fraction=0.2,
                     rounding="half_up", split_seed=0, burn_in=5000, keep=5000, thin=1,
                     field_thin=10, adapt_window=25, seed=0, chains=1, threads=1, k=15,
                     ordering="lex", level=0.95),
}
_REQUIRED = {"fit": ("pa", "raster", "out"), "simulate": ("out",),
             "predict": ("archive", "raster", "out"), "evaluate": ("pa", "raster", "out")}


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _model(text):
    try:
        return model_kind(text)
    except PrefSDMError:
        raise argparse.ArgumentTypeError(
            f"unknown model kind {text!r} (choose from {', '.join(map(kind_slug, KINDS))})") from None


def _chain_options(p):
    g = p.add_argument_group("chain")
    g.add_argument("--burn-in", type=int)
    g.add_argument("--keep", type=int)
    g.add_argument("--thin", type=int)
    g.add_argument("--field-thin", type=int, help="store every n-th kept field draw")
    g.add_argument("--adapt-window", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--chains", type=int)
    g.add_argument("--threads", type=int, help="worker threads for running chains side by side")
    g.add_argument("--k", type=int, help="NNGP neighbor count")
    g.add_argument("--ordering", choices=("lex", "maxmin"))


def build_parser():
    parser = argparse.ArgumentParser(prog="prefsdm", description=__doc__.split("\n")[0],
                                     epilog=__doc__.split("\n", 2)[2],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [common] and per-command sections")
    common.add_argument("--out", help="output directory (created if missing)")

    s = sub.add_parser("simulate", parents=[common], help="draw a synthetic world with known truth")
    s.add_argument("--figure4", action="store_const", const=True,
                   help="preferential design, log lambda = c + eta, C = 3 exp(-d), delta = 1")
    s.add_argument("--fusion", action="store_const", const=True,
                   help="add presence-only events sharing eta_PO with Z (model e)")
    s.add_argument("--design", choices=DESIGNS)
    s.add_argument("--response", type=_model)
    s.add_argument("--delta", type=float)
    s.add_argument("--intercept", type=float, help="log-intensity intercept (used when --expected-sites 0)")
    s.add_argument("--expected-sites", type=float, help="0 keeps the literal intercept")
    s.add_argument("--eta-sigma2", type=float)
    s.add_argument("--eta-phi", type=float)
    s.add_argument("--omega-sigma2", type=float)
    s.add_argument("--omega-phi", type=float)
    s.add_argument("--delta-po", type=float)
    s.add_argument("--po-events", type=float)
    s.add_argument("--n-covariates", type=int)
    s.add_argument("--width", type=float)
    s.add_argument("--height", type=float)
    s.add_argument("--n-cols", type=int)
    s.add_argument("--n-rows", type=int)
    s.add_argument("--seed", type=int)

    f = sub.add_parser("fit", parents=[common], help="run the sampler and write a posterior archive")
    f.add_argument("--pa", help="presence/absence points id,x,y,y01")
    f.add_argument("--raster", help="covariate raster cell,row,col,cx,cy,...")
    f.add_argument("--po", help="presence-only points id,x,y")
    f.add_argument("--degradation", help="per-cell cell,u,p layers for the presence-only data")
    f.add_argument("--model", type=_model, help="response model: a b c d cp dp e f")
    f.add_argument("--intensity-pa", choices=("i", "ii", "nhpp", "lgcp"))
    f.add_argument("--intensity-po", choices=("i", "ii", "nhpp", "lgcp"))
    _chain_options(f)
    g = f.add_argument_group("priors")
    g.add_argument("--alpha-var", type=float)
    g.add_argument("--beta-var", type=float)
    g.add_argument("--delta-var", type=float)
    g.add_argument("--delta-po-truncated", type=_bool)
    g.add_argument("--sigma2-shape", type=float)
    g.add_argument("--sigma2-rate", type=float)
    g.add_argument("--phi-max", type=float)
    f.add_argument("--tau2", type=float)
    f.add_argument("--ess-report", action="store_const", const=True,
                   help="print per-parameter ESS and the >100 gate")

    pr = sub.add_parser("predict", parents=[common], help="posterior presence-probability surface")
    pr.add_argument("--archive", help="directory written by fit")
    pr.add_argument("--raster")
    pr.add_argument("--seed", type=int)
    pr.add_argument("--level", type=float)

    e = sub.add_parser("evaluate", parents=[common], help="holdout Tjur R2 comparison of models")
    e.add_argument("--pa")
    e.add_argument("--raster")
    e.add_argument("--po")
    e.add_argument("--degradation")
    e.add_argument("--models", help="comma-separated model kinds")
    e.add_argument("--fraction", type=float)
    e.add_argument("--rounding", choices=ROUNDING)
    e.add_argument("--split-seed", type=int)
    e.add_argument("--level", type=float)
    _chain_options(e)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def resolve(parser, argv=None):
    """Parse flags, then fill unset options from the config file and the defaults."""
    args = parser.parse_args(argv)
    sp = _subparser(parser, args.command)
    file_vals = {}
    if args.config:
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise OSError(f"cannot read config file {args.config}")
        for section in ("common", args.command):
            if cp.has_section(section):
                for key, val in cp.items(section):
                    file_vals[key.replace("-", "_")] = val
    actions = {a.dest: a for a in sp._actions}
    unknown = sorted(set(file_vals) - set(actions))
    if unknown:
        sp.error(f"unknown config keys: {', '.join(unknown)}")
    for dest, action in actions.items():
        if dest in ("help", "config") or getattr(args, dest, None) is not None:
            continue
        if dest in file_vals:
            raw = file_vals[dest]
            if action.const is True:
                val = _bool(raw)
            elif action.type is not None:
                try:
                    val = action.type(raw)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    sp.error(f"config value {dest}={raw!r}: {exc}")
            else:
                val = raw
            if action.choices is not None and val not in action.choices:
                sp.error(f"config value {dest}={raw!r} not in {sorted(action.choices)}")
        else:
            val = _DEFAULTS[args.command].get(dest)
        setattr(args, dest, val)
    missing = [f"--{d.replace('_', '-')}" for d in _REQUIRED[args.command] if getattr(args, d) is None]
    if missing:
        sp.error(f"missing required option(s): {' '.join(missing)}")
    return args


def _settings(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "out")}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _versions():
    import numba
    import scipy

    return {"prefsdm": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__}


def _load_inputs(args):
    raster = read_raster(args.raster)
    pa, report = read_points(args.pa, raster.grid, kind="pa")
    po = None
    if getattr(args, "po", None):
        po, _ = read_points(args.po, raster.grid, kind="po")
    layers = None
    if getattr(args, "degradation", None):
        layers = read_degradation(args.degradation, raster.grid.n_cells)
    hashes = {}
    for key in ("pa", "raster", "po", "degradation"):
        path = getattr(args, key, None)
        if path:
            hashes[key] = {"path": os.path.basename(path), "sha256": file_digest(path)}
    return pa, raster, po, layers, hashes, report


def _chain(args):
    return ChainConfig(burn_in=args.burn_in, keep=args.keep, thin=args.thin, seed=args.seed,
                       n_chains=args.chains, adapt_window=args.adapt_window,
                       field_thin=args.field_thin, threads=args.threads)


def cmd_simulate(args):
    os.makedirs(args.out, exist_ok=True)
    grid = GridSpec.regular(args.width, args.height, args.n_cols, args.n_rows)
    expected = args.expected_sites if args.expected_sites else None
    if args.figure4:
        spec = figure4_scenario(args.design, expected, 1.0 if args.delta is None else args.delta,
                                grid=grid)
    elif args.fusion:
        spec = fusion_scenario(args.delta_po, 0.0 if args.delta is None else args.delta,
                               expected, grid=grid,
                               po=POSpec(delta=args.delta_po, expected_events=args.po_events))
    else:
        kind = model_kind(args.response)
        po = (POSpec(delta=args.delta_po, expected_events=args.po_events)
              if kind in FUSION_KINDS else None)
        spec = ScenarioSpec(
            design=args.design, response=kind, intercept=args.intercept,
            eta_params=ExpCovParams(args.eta_sigma2, args.eta_phi),
            delta=1.0 if args.delta is None else args.delta,
            alpha=(0.0,) * (args.n_covariates + 1), grid=grid, expected_sites=expected,
            n_covariates=args.n_covariates,
            omega_params=ExpCovParams(args.omega_sigma2, args.omega_phi), po=po)
    sc = simulate_scenario(spec, args.seed)
    write_points(os.path.join(args.out, "pa.csv"), sc.pa)
    write_raster(os.path.join(args.out, "raster.csv"), sc.raster)
    if sc.po is not None:
        write_points(os.path.join(args.out, "po.csv"), sc.po)
        write_degradation(os.path.join(args.out, "degradation.csv"), sc.layers)
    truth = sc.truth.to_dict()
    truth["seed"] = args.seed
    truth["settings"] = _settings(args)
    _write_json(os.path.join(args.out, "truth.manifest"), truth)
    print(f"wrote {len(sc.pa)} sites ({int(sc.pa.y.sum())} presences) to {args.out}")
    return EXIT_OK


def cmd_fit(args):
    pa, raster, po, layers, hashes, report = _load_inputs(args)
    model = ModelSpec(args.model, args.intensity_pa, args.intensity_po)
    if model.needs_po and po is None:
        raise SpecificationError(f"model ({model.response}) needs presence-only data (--po)")
    priors = PriorSpec(alpha_var=args.alpha_var, beta_var=args.beta_var, delta_var=args.delta_var,
                       delta_po_truncated=args.delta_po_truncated, sigma2_shape=args.sigma2_shape,
                       sigma2_rate=args.sigma2_rate, phi_hi=args.phi_max)
    chain = _chain(args)
    archive = fit(model, pa, raster, po, layers, priors, chain, k=args.k, ordering=args.ordering,
                  tau2=args.tau2)
    os.makedirs(args.out, exist_ok=True)
    archive.save(args.out, {"data": hashes, "versions": _versions(), "settings": _settings(args),
                            "ingest": {"pa": report._asdict()}})
    print(f"model {model.label}: {len(pa)} sites, {chain.n_chains} chain(s) x {chain.n_draws} draws")
    for name in archive.draws:
        if name.startswith("delta"):
            m, lo, hi = archive.summary(name)
            print(f"{name}: mean {m:.3f}  95% [{lo:.3f}, {hi:.3f}]")
    if args.ess_report:
        print("param,ess,gate")
        print(archive.ess_report())
    return EXIT_OK


def cmd_predict(args):
    archive = PosteriorArchive.load(args.archive)
    raster = read_raster(args.raster)
    surface = predict_surface(archive, archive.model, raster, seed=args.seed, level=args.level)
    os.makedirs(args.out, exist_ok=True)
    write_surface(os.path.join(args.out, "surface.csv"), surface)
    print(f"surface for model ({archive.model.response}) on {raster.grid.n_cells} cells: "
          f"mean p {surface.mean.mean():.3f}")
    return EXIT_OK


def cmd_evaluate(args):
    pa, raster, po, layers, hashes, _ = _load_inputs(args)
    kinds = [model_kind(k) for k in str(args.models).split(",") if k.strip()]
    train, test = holdout_split(pa, args.fraction, args.split_seed, args.rounding)
    os.makedirs(args.out, exist_ok=True)
    write_points(os.path.join(args.out, "train.csv"), train)
    write_points(os.path.join(args.out, "test.csv"), test)
    chain = _chain(args)
    results = []
    for kind in kinds:
        model = ModelSpec(kind)
        archive = fit(model, train, raster, po if model.needs_po else None,
                      layers if model.needs_po else None, chain=chain, k=args.k,
                      ordering=args.ordering)
        results.append((kind, holdout_tjur(archive, model, raster, test, args.seed, args.level)))
    table = compare_models(results)
    write_comparison(os.path.join(args.out, "tr_table.csv"), table)
    print(f"holdout: {len(test)} of {len(pa)} sites")
    print(format_comparison(table))
    return EXIT_OK


_COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict,
             "evaluate": cmd_evaluate}


def main(argv=None):
    parser = build_parser()
    try:
        args = resolve(parser, argv)
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"prefsdm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PrefSDMError as exc:
        print(f"prefsdm: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"prefsdm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
