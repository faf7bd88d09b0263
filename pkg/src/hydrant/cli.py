"""Command line entry point: ``hydrant {gen,train,prune,bench,sweep,report}``.

Each subcommand takes an optional JSON file whose keys are overridden by
explicit flags. Failures print a single JSON line ``{"error": ..., "kind": ...}``
to stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bench.harness import (
    RunConfig,
    read_results,
    results_to_records,
    run_experiment,
    sweep_batch_sizes,
    sweep_prune_rates,
)
from .data import SyntheticSpec, generate_synthetic, load_dataset, save_dataset, split_folds
from .pruning import pruning_error_bound, train_pipeline, train_pruned
from .strep import DEFAULT_PROPERTIES, quality_metrics, write_report


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().strip()}")


def _load_json(path):
    return json.loads(Path(path).read_text()) if path else {}


def _merge(base, **flags):
    out = dict(base)
    out.update({k: v for k, v in flags.items() if v is not None})
    return out


def _cmd_gen(args):
    obj = _merge(
        _load_json(args.spec), n=args.n, d=args.d, l=args.l, n_classes=args.classes,
        kind=args.kind, noise=args.noise, seed=args.seed, n_folds=args.folds, name=args.name,
    )
    if "C" in obj:
        obj["n_classes"] = obj.pop("C")
    ds = generate_synthetic(SyntheticSpec(**obj))
    save_dataset(ds, args.out)
    print(json.dumps({"dataset": args.out, "n": ds.n, "d": ds.d, "l": ds.l, "C": ds.n_classes}))


def _train_common(args, pruned):
    ds = load_dataset(args.data)
    if args.fold is not None:
        train, test = split_folds(ds, args.fold)
    else:
        train, test = ds, None
    kwargs = dict(method=args.method, final=args.final, seed=args.seed)
    pipe = train_pruned(train, zeta=args.zeta, **kwargs) if pruned else train_pipeline(train, **kwargs)
    Path(args.out).write_bytes(pipe.to_bytes())
    report = {"model": args.out, "method": args.method, "n_features": pipe.n_features}
    if pruned:
        report["kept"] = pipe.provenance["r"]
        bound = pruning_error_bound(pipe.temporary, pipe.decision, pipe.train_features)
        report["bound"] = bound.bound.tolist()
        report["deviation"] = bound.deviation.tolist()
        report["bound_satisfied"] = bound.satisfied
    if test is not None:
        pred = pipe.predict(test)
        report["metrics"] = quality_metrics(test.labels, pred, labels=np.arange(ds.n_classes))
    print(json.dumps(report))


def _run_config(args):
    obj = _merge(_load_json(args.config), dataset=args.data, results=args.results)
    return RunConfig.from_dict(obj)


def _cmd_bench(args):
    exp = run_experiment(_run_config(args))
    print(json.dumps({"run_id": exp.run_id, "summary": exp.summary, "errors": exp.errors}))
    return 0 if exp.folds else 1


def _write_rows(rows, out):
    if not rows:
        return
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out:
            fh.close()


def _cmd_sweep(args):
    cfg = _run_config(args)
    if args.kind == "batch":
        rows, best, notes = sweep_batch_sizes(cfg)
        for note in notes:
            print(note, file=sys.stderr)
    else:
        rates = [float(r) for r in args.rates.split(",")]
        rows = sweep_prune_rates(cfg, rates, args.datasets)
    _write_rows(rows, args.out)


def _cmd_report(args):
    records = results_to_records(read_results(args.results))
    if not records:
        raise ValueError(f"no summary records in {args.results}")
    weights = None if args.weights in (None, "default") else _load_json(args.weights)
    compound = write_report(records, args.out, weights, DEFAULT_PROPERTIES)
    print(json.dumps({"out": args.out, "rows": len(compound)}))


def build_parser():
    p = _Parser(prog="hydrant", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic dataset")
    g.add_argument("--spec", help="JSON SyntheticSpec")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--l", type=int)
    g.add_argument("--classes", type=int)
    g.add_argument("--kind")
    g.add_argument("--noise", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--folds", type=int)
    g.add_argument("--name")
    g.set_defaults(func=_cmd_gen)

    for name, pruned in (("train", False), ("prune", True)):
        t = sub.add_parser(name, help=f"{'train and prune' if pruned else 'train'} a pipeline")
        t.add_argument("--data", required=True)
        t.add_argument("--method", default="hydrant", choices=["hydra", "quant", "hydrant"])
        t.add_argument("--final", choices=["ridge", "trees"])
        t.add_argument("--fold", type=int, help="hold out this fold and report test metrics")
        t.add_argument("--seed", type=int, default=0)
        t.add_argument("--out", required=True, help="pipeline blob path")
        if pruned:
            t.add_argument("--zeta", type=float, default=0.8)
        t.set_defaults(func=lambda a, pruned=pruned: _train_common(a, pruned))

    for name, func in (("bench", _cmd_bench), ("sweep", _cmd_sweep)):
        b = sub.add_parser(name, help="run a benchmark configuration" if name == "bench" else "sweep prune rates or batch sizes")
        b.add_argument("--config", help="JSON RunConfig")
        b.add_argument("--data", help="dataset directory (overrides config)")
        b.add_argument("--results", help="JSONL results file to append to")
        if name == "sweep":
            b.add_argument("--kind", choices=["rates", "batch"], default="rates")
            b.add_argument("--rates", default="0,0.2,0.4,0.6,0.8,0.9")
            b.add_argument("--datasets", nargs="*")
            b.add_argument("--out", help="CSV output (stdout when omitted)")
        b.set_defaults(func=func)

    r = sub.add_parser("report", help="index-scaled, compound and rank CSV tables")
    r.add_argument("--results", required=True)
    r.add_argument("--weights", default="default", help="'default' or a JSON {property: weight}")
    r.add_argument("--out", default="report")
    r.set_defaults(func=_cmd_report)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        code = args.func(args)
        return 0 if code is None else code
    except UsageError as exc:
        print(json.dumps({"error": str(exc), "kind": "usage"}), file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
