"""Operator command line: ingest, train, adapt, transform, eval, serve, gradcheck.

Every command accepts --seed (all randomness derives from it) and --config
(a JSON file overriding the architecture, training, splitting and strategy
defaults). Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .ensemble import adapt_specialist, load_bundle_groups
from .evaluate import ModelPredictor, evaluate_grid, render_table, write_csv
from .gradcheck import run_full_suite
from .model import ArchitectureSpec, build, load_checkpoint, save_checkpoint
from .strategies import (
    DistractionConfig,
    DottedConfig,
    load_compound_table,
    synthesize_strategy_dataset,
)
from .strokes import load_cache, load_class_table, load_ndjson, prepare, save_cache, split_dataset
from .trainer import TrainConfig, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _arch(config: dict, class_count: int) -> ArchitectureSpec:
    spec = ArchitectureSpec.from_dict({**config.get("arch", {}), "class_count": class_count})
    spec.validate()
    return spec


def _train_config(config: dict, seed: int) -> TrainConfig:
    return TrainConfig.from_dict({**config.get("train", {}), "seed": seed})


def _split_ratios(config: dict, key: str, default: tuple[float, float]) -> tuple[float, float]:
    section = config.get(key, {})
    return section.get("val_ratio", default[0]), section.get("test_ratio", default[1])


def _encode_all(sketches):
    return [prepare(s) for s in sketches]


# ---------------------------------------------------------------- commands


def cmd_ingest(args, config):
    class_names = load_class_table(args.classes)
    sketches = load_ndjson(args.ndjson, class_names)
    if not sketches:
        raise UsageError("no sketches found in input")
    save_cache(args.out, sketches, class_count=len(class_names))
    print(f"cached {len(sketches)} sketches ({len(class_names)} classes) to {args.out}")
    return 0


def cmd_train(args, config):
    sketches, class_count, _tag = load_cache(args.data)
    val_ratio, test_ratio = _split_ratios(config, "split", (0.1, 0.2))
    split = split_dataset(sketches, val_ratio, test_ratio, seed=args.seed)
    model = build(_arch(config, class_count), seed=args.seed)
    best, report = train(
        model, _encode_all(split.train), _encode_all(split.validation), _train_config(config, args.seed)
    )
    save_checkpoint(best, args.out)
    if args.report:
        report.write_jsonl(args.report)
    if args.export_splits:
        os.makedirs(args.export_splits, exist_ok=True)
        for part, sks in (("train", split.train), ("val", split.validation), ("test", split.test)):
            save_cache(os.path.join(args.export_splits, f"{part}.inkd"), sks, class_count)
    best_val = best.metadata.get("best_val_loss")
    summary = "no epochs run" if best_val is None else f"best {report.best_epoch}, val loss {best_val:.4f}"
    print(f"trained {len(report.epochs)} epochs ({summary}), saved {args.out}")
    return 0


def cmd_adapt(args, config):
    baseline = load_checkpoint(args.baseline)
    sketches, class_count, tag = load_cache(args.data)
    if class_count != baseline.spec.class_count:
        raise ValueError(
            f"dataset has {class_count} classes, baseline expects {baseline.spec.class_count}"
        )
    val_ratio, test_ratio = _split_ratios(config, "strategy_split", (0.1, 0.1))
    split = split_dataset(sketches, val_ratio, test_ratio, seed=args.seed)
    specialist, report = adapt_specialist(
        baseline,
        _encode_all(split.train),
        _encode_all(split.validation),
        _train_config(config, args.seed),
    )
    save_checkpoint(specialist, args.out)
    if args.report:
        report.write_jsonl(args.report)
    print(f"adapted {args.strategy} specialist in {len(report.epochs)} epochs, saved {args.out}")
    return 0


def cmd_transform(args, config):
    sketches, class_count, _tag = load_cache(args.data)
    if args.strategy == "distraction":
        strat_config = DistractionConfig(**config.get("distraction", {}))
        compounds = None
    elif args.strategy == "dotted":
        strat_config = DottedConfig(**config.get("dotted", {}))
        compounds = None
    elif args.strategy == "rebus":
        strat_config = None
        if not args.compounds or not args.classes:
            raise UsageError("rebus requires --compounds and --classes")
        compounds = load_compound_table(args.compounds, load_class_table(args.classes))
    else:
        raise UsageError(f"unknown strategy {args.strategy}")
    out = synthesize_strategy_dataset(
        sketches, args.strategy, strat_config, args.count, seed=args.seed, compounds=compounds
    )
    save_cache(args.out, out, class_count=class_count, tag=args.strategy)
    print(f"wrote {len(out)} {args.strategy} sketches to {args.out}")
    return 0


def cmd_eval(args, config):
    manifests = args.bundle.split(",")
    groups = []
    for m in manifests:
        groups.extend(load_bundle_groups(m))
    if args.repeats is not None and args.repeats != len(groups):
        raise UsageError(f"--repeats {args.repeats} but manifests provide {len(groups)} bundles")
    model_sets = []
    for bundle in groups:
        ms = {name: ModelPredictor(model) for name, model in bundle.members}
        ms["ensemble"] = bundle
        model_sets.append(ms)
    datasets = {}
    for path in args.datasets.split(","):
        sketches, _cc, tag = load_cache(path)
        name = os.path.splitext(os.path.basename(path))[0]
        datasets[name] = _encode_all(sketches)
    rows = evaluate_grid(model_sets, datasets)
    print(render_table(rows))
    if args.csv:
        write_csv(rows, args.csv)
    return 0


def cmd_serve(args, config):
    import uvicorn

    from .service import ServiceSettings, create_app

    bundle = load_bundle_groups(args.bundle)[0]
    class_names = load_class_table(args.classes)
    serve_cfg = config.get("serve", {})
    settings = ServiceSettings(
        cadence=serve_cfg.get("cadence", 2.5),
        round_seconds=serve_cfg.get("round_seconds", 60.0),
        code_word_seed=args.seed,
        ui_dir=args.ui,
    )
    app = create_app(bundle, class_names, settings)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_gradcheck(args, config):
    failures = 0
    for name, report in run_full_suite(seed=args.seed):
        status = "ok" if report.passed else "FAIL"
        print(
            f"{name:16s} {status}  max_rel_error={report.max_rel_error:.3e} "
            f"(tol {report.tolerance:.0e}, {report.entries_checked} entries)"
        )
        if not report.passed:
            for off in report.offenders:
                print(f"    {off.tensor}{list(off.index)}: "
                      f"analytic={off.analytic:+.6e} numeric={off.numeric:+.6e}")
            failures += 1
    if failures:
        raise RuntimeError(f"{failures} gradient check(s) failed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="sketchguess", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="JSON config overriding defaults")

    p = sub.add_parser("ingest", help="parse NDJSON sketches into a binary cache")
    p.add_argument("--ndjson", required=True, help="NDJSON file or directory")
    p.add_argument("--classes", required=True, help="class table, one name per line")
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("train", help="train a baseline model on a cached dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None, help="write per-epoch JSONL log here")
    p.add_argument("--export-splits", default=None, help="directory for train/val/test caches")
    common(p)

    p = sub.add_parser("adapt", help="fine-tune a specialist from a baseline checkpoint")
    p.add_argument("--baseline", required=True)
    p.add_argument("--strategy", required=True, choices=["distraction", "dotted", "rebus"])
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    common(p)

    p = sub.add_parser("transform", help="synthesize a strategy dataset from clean sketches")
    p.add_argument("--strategy", required=True, choices=["distraction", "dotted", "rebus"])
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--classes", default=None)
    p.add_argument("--compounds", default=None, help="rebus compound table (TSV)")
    common(p)

    p = sub.add_parser("eval", help="evaluate bundles over datasets, Table-1 style")
    p.add_argument("--bundle", required=True, help="bundle manifest(s), comma separated")
    p.add_argument("--datasets", required=True, help="cache files, comma separated")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--csv", default=None)
    common(p)

    p = sub.add_parser("serve", help="run the live game service")
    p.add_argument("--bundle", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", default=None, help="static UI directory")
    common(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    common(p)

    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "adapt": cmd_adapt,
    "transform": cmd_transform,
    "eval": cmd_eval,
    "serve": cmd_serve,
    "gradcheck": cmd_gradcheck,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
