"""Batch command-line front-end.

Every subcommand reads one JSON config and writes files into ``--out``.
Progress goes to stdout as one JSON record per line; diagnostics go to
stderr.  Exit status: 0 success, 1 user or configuration error, 2 numerical
failure.
"""

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, activesubspace, dmd, pipeline, testbeds
from .config import ARTIFACT_SCHEMAS, SUBCOMMAND_KIND, apply_overrides, load_document, require_valid, validate
from .errors import (
    ArgumentError,
    ConfigError,
    DatabaseError,
    InputError,
    NumericalError,
    OptimizationError,
    PipelineError,
    STLParseError,
)
from .geometry import FFDLattice, deform_mesh, load_stl, save_stl
from .matrixio import dump_json, read_matrix, write_matrix
from .podi import InterpolatorSpec, PODIModel, SnapshotDatabase, db_load, db_save

log = logging.getLogger("morpipe")

USER_ERRORS = (ConfigError, ArgumentError, InputError, STLParseError, DatabaseError,
               FileNotFoundError, KeyError)
NUMERICAL_ERRORS = (NumericalError, OptimizationError, PipelineError, np.linalg.LinAlgError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class Context:
    def __init__(self, args, doc):
        self.args = args
        self.doc = doc
        self.config_dir = Path(args.config).resolve().parent
        self.out = Path(args.out)

    def progress(self, phase, done, total):
        if not self.args.quiet:
            print(json.dumps({"phase": phase, "done": done, "total": total}), flush=True)

    def path(self, value):
        """Resolve a path from the config relative to the config file."""
        p = Path(value)
        return p if p.is_absolute() else self.config_dir / p

    def outdir(self):
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out


# -- subcommands ----------------------------------------------------------------


def cmd_deform(ctx):
    doc = ctx.doc
    lattice = FFDLattice.from_dict(doc)
    if ctx.args.input:
        src = Path(ctx.args.input)
    elif "input" in doc:
        src = ctx.path(doc["input"])
    else:
        raise ConfigError("input: no STL given (use --in or the 'input' field)")
    mesh = load_stl(src)
    ctx.progress("read", 1, 3)
    deformed = deform_mesh(mesh, lattice)
    ctx.progress("deform", 2, 3)
    out = Path(ctx.args.out)
    if out.suffix.lower() != ".stl":
        out = ctx.outdir() / "deformed.stl"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    save_stl(out, deformed, doc.get("format", "binary"))
    ctx.progress("write", 3, 3)


def _dmd_series(ctx):
    doc = ctx.doc
    if "series" in doc:
        s = doc["series"]
        sidecar = ctx.path(s["sidecar"]) if "sidecar" in s else None
        return dmd.SnapshotSeries.load(ctx.path(s["csv"]), sidecar)
    cfg = testbeds.AdvectionDiffusionConfig(**doc["testbed"])
    return testbeds.advection_diffusion_series(cfg)


def cmd_dmd(ctx):
    doc = ctx.doc
    full = _dmd_series(ctx)
    train_m = int(doc.get("train", full.m))
    if not 2 <= train_m <= full.m:
        raise ConfigError(f"train: must lie in [2, {full.m}], got {train_m}")
    train = dmd.SnapshotSeries(full.data[:, :train_m], full.t0, full.dt)
    ctx.progress("load", 1, 3)
    model = dmd.fit(train, doc.get("rank"), doc.get("mode_kind", "exact"))
    ctx.progress("fit", 2, 3)

    out = ctx.outdir()
    dmd.save_model(out / "model.json", model)
    write_matrix(out / "reconstruction.csv", dmd.reconstruct(model, np.arange(1, train.m + 1)))
    write_matrix(out / "spectrum.csv", dmd.spectrum_table(model))
    times = [float(t) for t in doc.get("forecast_times", [train.times[-1]])]
    fc = dmd.forecast(model, np.array(times))
    write_matrix(out / "forecast.csv", fc)

    summary = {
        "rank": model.rank,
        "mode_kind": model.mode_kind,
        "train_snapshots": train.m,
        "relative_error": dmd.relative_error(model, train),
        "forecast_times": times,
    }
    errors = []
    for j, t in enumerate(times):
        k = np.flatnonzero(np.abs(full.times - t) <= 1e-9 * full.dt)
        if k.size:
            ref = full.data[:, k[0]]
            errors.append(float(np.linalg.norm(fc[:, j] - ref) / np.linalg.norm(ref)))
        else:
            errors.append(None)
    summary["forecast_relative_errors"] = errors
    dump_json(out / "summary.json", summary)
    ctx.progress("write", 3, 3)


def cmd_as(ctx):
    doc = ctx.doc
    seed = int(doc.get("seed", 0))
    if "ridge" in doc:
        fn = testbeds.ridge_functions(doc["ridge"]["kind"], doc["ridge"]["a"])
        m = fn.a.size
        mu = activesubspace.sample_inputs(m, doc.get("n_samples"), seed)
        values = fn(mu)
        if doc.get("gradients", "analytic") == "analytic":
            grads = fn.gradient(mu)
        else:
            h = float(doc.get("fd_step", 1e-6))
            grads = np.array([activesubspace.finite_diff_gradient(fn, x, h) for x in mu])
    else:
        # rows are mu..., grad... with an optional trailing f column
        table = read_matrix(ctx.path(doc["samples"]))
        if table.shape[1] < 4:
            raise InputError("samples: expected 2m or 2m+1 columns (mu..., grad..., [f]) with m >= 2")
        m = table.shape[1] // 2
        mu, grads = table[:, :m], table[:, m : 2 * m]
        values = table[:, -1] if table.shape[1] % 2 else None
    ctx.progress("sample", 1, 3)
    C = activesubspace.estimate_covariance(grads)
    dim = doc.get("dim")
    result = activesubspace.identify(C, None if dim in (None, "gap") else int(dim))
    active = activesubspace.project(mu, result)
    ctx.progress("identify", 2, 3)

    out = ctx.outdir()
    doc_out = result.to_dict()
    doc_out["n_samples"] = int(mu.shape[0])
    dump_json(out / "as_result.json", doc_out)
    if values is None:
        ctx.progress("write", 3, 3)
        return
    (out / "summary.csv").write_text(activesubspace.summary_csv(active, values), newline="\n")
    if result.active_dim <= 2:
        sur = activesubspace.fit_surrogate(active, values, int(doc.get("degree", 2)))
        fitted = sur(active)
        surdoc = sur.to_dict()
        surdoc["rmse"] = float(np.sqrt(np.mean((fitted - values) ** 2)))
        dump_json(out / "surrogate.json", surdoc)
    ctx.progress("write", 3, 3)


def _box(doc):
    return activesubspace.BoxDomain(doc["box"]["lower"], doc["box"]["upper"])


def _plan(doc):
    s = doc["sampling"]
    return pipeline.SamplingPlan(_box(doc), int(s["N"]), s.get("method", "lhs"), int(s.get("seed", 0)))


def _database_dir(ctx):
    if "database" in ctx.doc:
        return ctx.path(ctx.doc["database"])
    return ctx.out / "database"


def _run_offline(ctx):
    doc = ctx.doc
    adapter = pipeline.adapter_from_dict(doc["adapter"], ctx.config_dir)
    workdir = None
    if isinstance(adapter, pipeline.ExternalAdapter) and adapter.workdir is None:
        workdir = ctx.outdir() / "work"
    jobs = pipeline.resolve_jobs(doc.get("jobs"), ctx.args.jobs)
    db = pipeline.run_offline(
        _plan(doc), adapter, jobs=jobs, workdir=workdir,
        names=doc["box"].get("names"), progress=ctx.progress,
    )
    db_save(db, ctx.outdir() / "database")
    n_fail = len(db.provenance.get("failures", []))
    if n_fail:
        print(f"morpipe: {n_fail} of {db.k + n_fail} evaluations failed (see manifest.json)",
              file=sys.stderr)
    return db


def cmd_offline(ctx):
    ctx.outdir()
    _run_offline(ctx)


def _podi_model(ctx, db):
    p = ctx.doc.get("podi", {})
    spec = InterpolatorSpec.from_dict(p.get("interpolator", "rbf"))
    return PODIModel(db, p.get("rank"), spec)


def _load_db(ctx, build=False):
    d = _database_dir(ctx)
    if (d / "manifest.json").is_file() or not build:
        return db_load(d)
    log.info("no database at %s; running the offline phase", d)
    return _run_offline(ctx)


def _qoi_objective(ctx, db, model):
    """Scalar objective on the PODI prediction chosen by ``optimize.target``."""
    target = ctx.doc.get("optimize", {}).get("target", "qoi")
    if isinstance(target, dict):
        w = np.zeros(db.n)
        if not 0 <= target["index"] < db.n:
            raise ConfigError(f"optimize.target.index: must be < {db.n}")
        w[target["index"]] = 1.0
        return pipeline.PODIObjective(model, w)
    if target == "mean":
        return pipeline.PODIObjective(model, np.full(db.n, 1.0 / db.n))
    adapter = pipeline.adapter_from_dict(ctx.doc["adapter"], ctx.config_dir)
    if isinstance(adapter, pipeline.BuiltinAdapter):
        return pipeline.PODIObjective(model, adapter.qoi_weights())
    if db.qoi is None:
        raise ConfigError("optimize.target: 'qoi' needs QoI values in the database")
    qdb = SnapshotDatabase(db.params, db.qoi[None, :], None, db.names, db.box)
    qmodel = PODIModel(qdb, "full", model.spec)
    return pipeline.PODIObjective(qmodel, np.ones(1))


def cmd_podi(ctx):
    db = _load_db(ctx)
    model = _podi_model(ctx, db)
    ctx.progress("basis", 1, 2)
    queries = np.asarray(ctx.doc.get("query", []), dtype=float).reshape(-1, db.p)
    if queries.shape[0] == 0:
        raise ConfigError("query: at least one parameter vector is required")
    preds = np.column_stack([model(mu) for mu in queries])
    out = ctx.outdir()
    write_matrix(out / "predictions.csv", preds)
    try:
        obj = _qoi_objective(ctx, db, model)
    except ConfigError:
        obj = None
    if obj is not None:
        write_matrix(out / "predictions_qoi.csv", np.array([[obj(mu)] for mu in queries]))
    dump_json(out / "basis.json", {**model.basis.to_dict(), "interpolator": model.spec.to_dict()})
    ctx.progress("predict", 2, 2)


def cmd_optimize(ctx):
    doc = ctx.doc
    db = _load_db(ctx, build=True)
    model = _podi_model(ctx, db)
    objective = _qoi_objective(ctx, db, model)
    opt = doc.get("optimize", {})
    box = db.box or _box(doc)
    report = pipeline.compass_search(
        objective,
        box,
        seed=int(opt.get("seed", 0)),
        budget=int(opt.get("budget", 1000)),
        restarts=int(opt.get("restarts", 4)),
        direction=opt.get("direction", "min"),
    )
    ctx.progress("optimize", report.evaluations, int(opt.get("budget", 1000)))
    out = ctx.outdir()
    rep = report.to_dict()
    rep["podi"] = {"rank": model.basis.rank, "interpolator": model.spec.to_dict()}
    rep["database_size"] = db.k
    dump_json(out / "report.json", rep)
    write_matrix(out / "history.csv", report.history_table())


COMMANDS = {
    "deform": cmd_deform,
    "dmd": cmd_dmd,
    "as": cmd_as,
    "podi": cmd_podi,
    "offline": cmd_offline,
    "optimize": cmd_optimize,
}


def _apply_seed(doc, kind, seed):
    if seed is None:
        return doc
    if kind == "pipeline":
        doc.setdefault("sampling", {})["seed"] = seed
        doc.setdefault("optimize", {})["seed"] = seed
    elif kind == "as":
        doc["seed"] = seed
    return doc


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH")
    common.add_argument("--out", default="out", metavar="DIR")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted-path config override (repeatable)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--quiet", action="store_true")

    parser = _Parser(prog="morpipe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"morpipe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "deform":
            sp.add_argument("--in", dest="input", metavar="STL")
    vp = sub.add_parser("validate", parents=[common])
    vp.add_argument("--kind", choices=sorted(set(SUBCOMMAND_KIND.values()) | set(ARTIFACT_SCHEMAS)))
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    doc = load_document(args.config)
    doc = apply_overrides(doc, args.overrides)
    if args.command == "validate":
        problems = validate(doc, args.kind)
        if problems:
            for p in problems:
                print(p, file=sys.stderr)
            return 1
        print("ok")
        return 0
    kind = SUBCOMMAND_KIND[args.command]
    doc = _apply_seed(doc, kind, args.seed)
    require_valid(doc, kind)
    COMMANDS[args.command](Context(args, doc))
    return 0


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"morpipe: warning: {message}", file=sys.stderr)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="morpipe: %(message)s")
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        warnings.showwarning = _show_warning
        try:
            return run(argv)
        except USER_ERRORS as exc:
            print(f"morpipe: error: {exc}", file=sys.stderr)
            return 1
        except NUMERICAL_ERRORS as exc:
            print(f"morpipe: numerical failure: {exc}", file=sys.stderr)
            return 2


if __name__ == "__main__":
    sys.exit(main())
