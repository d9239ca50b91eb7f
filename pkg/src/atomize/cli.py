"""Command-line entry point: ``atomize <command> ...``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import io as aio
from .analysis import ATOM_COLUMNS, CHARGE_COLUMNS, LATENT_COLUMNS, export_charges, export_latent
from .data import DEFAULT_N, DEFAULT_TRAIN_FRACTION, GmmSpec, default_dataset, from_csv, generate, to_csv
from .gradcheck import DEFAULT_TOL, N_BATCHES, run_all
from .losses import METHODS, Coefficients
from .theory import (ENERGY_COLUMNS, NoBalancePoint, PairPotentialSpec, balance_closed_form,
                     balance_numeric, energy_curve, is_strictly_decreasing, monotonicity_scan)
from .trainer import (SweepFailed, TrainConfig, TrainingDiverged, results_to_dict, sweep, train)

EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _spec_sidecar(csv_path):
    return os.path.splitext(csv_path)[0] + ".spec.json"


def _load_dataset(path):
    if not os.path.exists(path):
        raise UsageError(f"dataset {path} does not exist")
    with open(path) as fh:
        text = fh.read()
    spec, seed = None, 0
    sidecar = _spec_sidecar(path)
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            meta = json.load(fh)
        spec, seed = GmmSpec.from_dict(meta["spec"]), meta.get("seed", 0)
    ds = from_csv(text, spec, seed)
    if ds.split is None:
        raise UsageError(f"dataset {path} has no train/test split column")
    return ds, aio.sha256_text(text)


def _dataset_from_args(args):
    if args.data:
        return _load_dataset(args.data)
    ds = default_dataset(0)
    return ds, aio.sha256_text(to_csv(ds))


def _load_config(args, method=None) -> TrainConfig:
    """Defaults < ``--config`` file < individual flags."""
    d = TrainConfig().to_dict()
    if getattr(args, "config", None):
        with open(args.config) as fh:
            d.update(json.load(fh))
    flags = {"epochs": args.epochs, "batch_size": args.batch_size, "learning_rate": args.lr,
             "momentum": args.momentum, "p": args.p, "pooling": args.pooling}
    d.update({k: v for k, v in flags.items() if v is not None})
    if args.clip_norm is not None:
        d["clip_norm"] = None if args.clip_norm <= 0 else args.clip_norm
    coef = dict(d.get("coefficients") or {})
    for name in ("c_f", "c_charge", "c_neutrons", "c_p"):
        if getattr(args, name) is not None:
            coef[name] = getattr(args, name)
    d["coefficients"] = coef
    if method is not None:
        d["method"] = method
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    try:
        return TrainConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _config_hash(config: TrainConfig) -> str:
    return aio.sha256_text(aio.canonical_json(config.to_dict()))


def _add_train_flags(p):
    p.add_argument("--config", help="JSON file of training settings")
    p.add_argument("--data", help="dataset CSV from gen-data (default: the calibrated dataset, seed 0)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--clip-norm", type=float, help="gradient norm cap; 0 disables")
    p.add_argument("--p", type=int, choices=(1, 2))
    p.add_argument("--pooling", choices=("raw", "softmax"))
    for name in ("c_f", "c_charge", "c_neutrons", "c_p"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)


def _parse_int_list(text, what):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated integers, got {text!r}") from None


# ----------------------------------------------------------------- commands

def cmd_gen_data(args):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    spec = GmmSpec()
    if args.spec_file:
        try:
            with open(args.spec_file) as fh:
                spec = GmmSpec.from_dict(json.load(fh))
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"invalid spec file {args.spec_file}: {exc}") from exc
    started = time.time()
    ds = generate(spec, args.n, args.seed, train_fraction=args.train_fraction)
    sidecar = _spec_sidecar(args.out)
    config = {"spec": spec.to_dict(), "seed": args.seed, "n": args.n, "train_fraction": args.train_fraction}
    manifest = aio.build_manifest("gen-data", config, [args.out, sidecar], started)
    aio.write_atomic(args.out, to_csv(ds))
    aio.write_atomic(sidecar, aio.canonical_json({**config, "manifest_hash": manifest["manifest_hash"]}))
    aio.finish_manifest(os.path.splitext(args.out)[0] + ".manifest.json", manifest, [args.out, sidecar])
    print(f"wrote {len(ds)} points ({len(ds) * ds.points.shape[1]} feature rows) to {args.out}")
    return 0


def cmd_train(args):
    config = _load_config(args, args.method)
    ds, data_hash = _dataset_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    paths = {k: os.path.join(args.out, f) for k, f in
             (("ckpt", "checkpoint.json"), ("result", "result.json"), ("losses", "losses.csv"))}
    started = time.time()
    manifest = aio.build_manifest("train", {"train": config.to_dict(), "data_hash": data_hash,
                                            "data_spec": ds.spec.to_dict()}, paths.values(), started)
    try:
        params, result = train(config, ds)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_FAIL
    mh = manifest["manifest_hash"]
    aio.save_checkpoint(paths["ckpt"], params, _config_hash(config), data_hash, mh,
                        method=config.method, pooling=config.pooling, p=config.p)
    aio.write_atomic(paths["result"], aio.canonical_json({**result.to_dict(), "manifest_hash": mh}))
    rows = [dict(zip(("epoch", "l_ori", "l_f", "l_charge", "l_neutrons"), r)) for r in result.losses]
    aio.write_atomic(paths["losses"], aio.rows_to_csv(["epoch", "l_ori", "l_f", "l_charge", "l_neutrons"], rows))
    aio.finish_manifest(os.path.join(args.out, "manifest.json"), manifest, paths.values())
    print(f"{config.method} seed {config.seed}: test accuracy {result.accuracy:.4f}")
    return 0


def cmd_sweep(args):
    methods = list(METHODS) if args.methods == "all" else [m.strip() for m in args.methods.split(",")]
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {{{','.join(METHODS)}}}")
    seeds = (list(range(int(args.seeds))) if args.seeds.isdigit()
             else _parse_int_list(args.seeds, "--seeds"))
    if not seeds:
        raise UsageError("--seeds must name at least one seed")
    base = _load_config(args)
    ds, data_hash = _dataset_from_args(args)
    started = time.time()
    manifest = aio.build_manifest("sweep", {"train": base.to_dict(), "methods": methods, "seeds": seeds,
                                            "data_hash": data_hash, "data_spec": ds.spec.to_dict()},
                                  [args.out], started)
    status = 0
    try:
        results = sweep(methods, seeds, ds, base, parallel=args.parallel)
    except SweepFailed as exc:
        for m, s, err in exc.failures:
            print(f"error: cell (method={m}, seed={s}) failed: {err}", file=sys.stderr)
        results, status = exc.results, EXIT_FAIL
    doc = results_to_dict(results)
    doc["manifest_hash"] = manifest["manifest_hash"]
    aio.write_atomic(args.out, aio.canonical_json(doc))
    aio.finish_manifest(os.path.splitext(args.out)[0] + ".manifest.json", manifest, [args.out])
    for method, s in doc["summary"].items():
        print(f"{method:5s} mean {s['mean']:.4f} std {s['std']:.4f} median {s['median']:.4f}")
    return status


def cmd_theory(args):
    if args.scan_k:
        try:
            ks = [float(v) for v in args.scan_k.split(",")]
        except ValueError:
            raise UsageError(f"--scan-k must be comma-separated numbers, got {args.scan_k!r}") from None
        try:
            rows = monotonicity_scan(ks, args.rtilde)
        except ValueError as exc:
            print(f"error: no balance point: {exc}", file=sys.stderr)
            return EXIT_FAIL
        print("k,closed_form,numeric")
        for r in rows:
            print(f"{r['k']!r},{r['closed_form']!r},{r['numeric']!r}")
        if args.out:
            aio.write_atomic(args.out, aio.rows_to_csv(ENERGY_COLUMNS, energy_curve(ks, args.rtilde)))
        if not is_strictly_decreasing([r["closed_form"] for r in rows]) and ks == sorted(ks):
            print("warning: balance distance is not strictly decreasing in k", file=sys.stderr)
        return 0
    if args.c1 is None or args.c2 is None:
        raise UsageError("give --c1 and --c2 (and --rtilde), or --scan-k")
    try:
        spec = PairPotentialSpec(args.c1, args.c2, args.rtilde)
        closed = balance_closed_form(spec)
        numeric = balance_numeric(spec, d_max=max(1e4 * spec.r_tilde, 100 * closed))
    except NoBalancePoint as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    gap = abs(closed - numeric)
    print(f"closed_form {closed!r}\nnumeric {numeric!r}\nabs_gap {gap!r}\nrel_gap {gap / closed!r}")
    return 0


def cmd_grad_check(args):
    if args.batches < 1:
        raise UsageError("--batches must be at least 1")
    results = run_all(tol=args.tol, seed=args.seed, n_batches=args.batches)
    failed = [r for r in results if not r.passed]
    for r in results:
        if args.verbose or not r.passed:
            print(r.line())
    print(f"{len(results) - len(failed)}/{len(results)} checks passed at tol {args.tol:g}")
    return EXIT_FAIL if failed else 0


def cmd_export(args):
    ds, data_hash = _load_dataset(args.data)
    try:
        params, ckpt = aio.load_checkpoint(args.checkpoint, data_hash)
    except aio.HashMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    test = ds.test
    pooling = ckpt.get("pooling", "raw")
    config = {"what": args.what, "checkpoint_manifest_hash": ckpt.get("manifest_hash"), "data_hash": data_hash}
    if args.what == "latent":
        outputs = [args.out, os.path.splitext(args.out)[0] + ".summary.json"]
        manifest = aio.build_manifest("export", config, outputs)
        dump = export_latent(params, test, ckpt.get("method", "?"), ckpt.get("seed") or 0, pooling)
        aio.write_atomic(outputs[0], aio.rows_to_csv(LATENT_COLUMNS, dump.rows))
        aio.write_atomic(outputs[1], aio.canonical_json({**dump.summary,
                                                         "manifest_hash": manifest["manifest_hash"]}))
        print(f"wrote {len(dump.rows)} latent rows to {args.out}")
    else:
        outputs = [args.out, os.path.splitext(args.out)[0] + ".atoms.csv"]
        manifest = aio.build_manifest("export", config, outputs)
        report = export_charges(params, test, pooling, ckpt.get("p", 2))
        aio.write_atomic(outputs[0], aio.rows_to_csv(CHARGE_COLUMNS, report.particles))
        aio.write_atomic(outputs[1], aio.rows_to_csv(ATOM_COLUMNS, report.atoms))
        print(f"wrote {len(report.particles)} charge rows to {args.out}; "
              f"mean |sum q| {report.mean_abs_total_charge():.4f}")
    aio.finish_manifest(os.path.splitext(args.out)[0] + ".manifest.json", manifest, outputs)
    return 0


# ------------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="atomize", description="Atom-modeling regularization experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate the synthetic mixture dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=DEFAULT_N, help="number of points")
    p.add_argument("--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION)
    p.add_argument("--spec-file", help="JSON mixture parameters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train every method for several seeds")
    p.add_argument("--methods", default="all", help="comma list or 'all'")
    p.add_argument("--seeds", default="10", help="a count N (seeds 0..N-1) or a comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", type=int, default=None)
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("theory", help="balance distance of two atoms")
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--rtilde", type=float, default=1.0)
    p.add_argument("--scan-k", help="comma list of c2/c1 ratios")
    p.add_argument("--out", help="energy-curve CSV (scan mode)")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("grad-check", help="finite-difference check of every gradient")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batches", type=int, default=N_BATCHES)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("export", help="latent or charge CSVs from a checkpoint")
    p.add_argument("--what", required=True, choices=("latent", "charges"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
