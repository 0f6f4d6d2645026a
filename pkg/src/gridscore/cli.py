"""``gridscore`` command line.

Exit status is 0 on success, 1 on invalid input or usage, 2 on I/O or
checkpoint failures.  Seeds come from ``--seed``, else the config file, else
``GRIDSCORE_SEED``, else 0.
"""

import argparse
import logging
import os
import sys

from .checkpoint import read_checkpoint, write_checkpoint
from .config import STAGE_PRESETS, default_config, load_config
from .errors import GridscoreError, ValidationError
from .irt import build_irt_partition, posterior_summary, score_students
from .model import ModelSpec, build_model
from .pipeline import (
    ensure_data,
    generator_config,
    init_rng,
    item_params,
    run_grid,
    select,
    split_manifest,
    train_config,
    write_history,
)
from .reports import (
    COMPARISON_COLUMNS,
    SUMMARY_COLUMNS,
    comparison_rows,
    disagreement_report,
    posterior_rows,
    read_eval_report,
    read_partition,
    read_predictions,
    write_disagreement_report,
    write_eval_report,
    write_partition,
    write_predictions,
    write_table,
)
from .rng import make_rng
from .synthdata.dataset import generate_dataset, load_dataset, read_manifest, write_manifest
from .training import evaluate, train

log = logging.getLogger("gridscore")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _records_for(manifest, split_path, partition):
    records = read_manifest(manifest)
    if split_path is None:
        return records
    parts = read_partition(split_path)
    if partition not in parts:
        raise ValidationError(f"{split_path} has no partition {partition!r}; found {sorted(parts)}")
    return select(records, parts[partition])


def _make_parent(*paths):
    for path in paths:
        if path and os.path.dirname(path):
            os.makedirs(os.path.dirname(path), exist_ok=True)


def cmd_gen(args, cfg):
    section = dict(cfg["generator"])
    for key in ("n", "strata", "mislabel_rate", "stroke_width", "jitter", "layout"):
        value = getattr(args, key)
        if value is not None:
            section[key] = value
    if args.theta_mode:
        section["theta_mode"] = True
    records = generate_dataset(generator_config(section), args.out)
    print(f"wrote {len(records)} responses to {args.out}")


def cmd_split(args, cfg):
    records = read_manifest(args.manifest)
    fraction = cfg["split"]["fraction"] if args.fraction is None else args.fraction
    parts = split_manifest(records, fraction, cfg["split"]["seed"])
    _make_parent(args.out)
    write_partition(args.out, parts)
    print(f"train {len(parts['train'])}  validation {len(parts['validation'])}")


def cmd_train(args, cfg):
    spec = ModelSpec.from_name(args.model)
    training = dict(cfg["training"])
    for key in ("batch_size", "lr"):
        if getattr(args, key) is not None:
            training[key] = getattr(args, key)
    config = train_config(training, args.optimizer, args.epochs)
    records = _records_for(args.manifest, args.split, args.partition)
    data = load_dataset(records, os.path.dirname(args.manifest))
    model = build_model(spec, init_rng(config.seed, spec))
    history = train(model, data, config)
    _make_parent(args.out, args.history)
    write_checkpoint(model, args.out)
    if args.history:
        write_history(args.history, history)
    last = history[-1]
    print(f"{spec.name}: epoch {last.epoch} loss {last.loss:.4f} accuracy {last.accuracy:.4f}")


def cmd_eval(args, cfg):
    model = read_checkpoint(args.checkpoint)
    records = _records_for(args.manifest, args.split, args.partition)
    data = load_dataset(records, os.path.dirname(args.manifest))
    meta = {"model": model.spec.name, "description": model.spec.describe(),
            "sample": args.partition if args.split else "all"}
    for kv in args.meta:
        key, sep, value = kv.partition("=")
        if not sep or not key:
            raise ValidationError(f"--meta expects KEY=VALUE, got {kv!r}")
        meta[key] = value
    report = evaluate(model, data, meta)
    _make_parent(args.out, args.predictions)
    write_eval_report(args.out, report)
    if args.predictions:
        write_predictions(args.predictions, data.ids, data.labels, model.predict_proba(data.images))
    print(f"n {report.n}  loss {report.loss:.4f}  accuracy {report.accuracy:.4f}")


def cmd_irt_score(args, cfg):
    item = item_params(cfg["irt"])
    records = read_manifest(args.manifest)
    students = score_students([r.student() for r in records], item)
    for r, s in zip(records, students):
        r.extra.update(y_map=s.y_map, y_eap=s.y_eap, y_avg=s.y_avg)
    _make_parent(args.out)
    write_manifest(args.out, records)
    print(f"scored {len(records)} responses")


def cmd_irt_select(args, cfg):
    item = item_params(cfg["irt"])
    mode = args.mode or cfg["irt"]["mode"]
    records = read_manifest(args.manifest)
    students = score_students([r.student() for r in records], item)
    part = build_irt_partition(students, mode, make_rng(cfg["irt"]["seed"], "irt-select"),
                               cfg["irt"]["split"], item)
    os.makedirs(args.out_dir, exist_ok=True)
    write_partition(os.path.join(args.out_dir, "partition.csv"), part.groups())
    irt_label, rand_label = part.irt_label(), part.rand_label()
    for r, s in zip(records, students):
        r.extra.update(y_map=s.y_map, y_eap=s.y_eap, y_avg=s.y_avg,
                       partition_label=irt_label[r.id], random_label=rand_label[r.id])
    write_manifest(os.path.join(args.out_dir, "manifest.csv"), records)
    summary = posterior_rows(posterior_summary(students, mode, item))
    write_table(os.path.join(args.out_dir, "posterior_summary.csv"), SUMMARY_COLUMNS, summary)
    sizes = part.sizes()
    print("  ".join(f"{k} {v}" for k, v in sizes.items()) + f"  excluded {len(part.excluded)}")


def cmd_report(args, cfg):
    rows = comparison_rows([read_eval_report(p) for p in args.reports])
    _make_parent(args.out)
    write_table(args.out, COMPARISON_COLUMNS, rows)
    print(f"wrote {len(rows)} rows to {args.out}")


def cmd_disagree(args, cfg):
    predictions = read_predictions(args.predictions)
    records = read_manifest(args.manifest)
    if args.split:
        records = _records_for(args.manifest, args.split, args.partition)
    rows, summary = disagreement_report(predictions, records)
    _make_parent(args.out)
    write_disagreement_report(args.out, rows, summary)
    print(f"{summary['disagreements']} of {summary['responses']} responses disagree "
          f"(rate {summary['rate']:.4f})")


def cmd_grid(args, cfg):
    if args.stage is not None:
        if args.stage not in STAGE_PRESETS:
            raise ValidationError(f"stage must be one of {sorted(STAGE_PRESETS)}")
        cfg["grid"].update({k: list(v) for k, v in STAGE_PRESETS[args.stage].items()})
    if args.out_dir:
        if cfg["output"]["data_dir"] == os.path.join(cfg["output"]["dir"], "data"):
            cfg["output"]["data_dir"] = os.path.join(args.out_dir, "data")
        cfg["output"]["dir"] = args.out_dir
    if args.dry_run:
        ensure_data(cfg)
        for e in cfg["grid"]["epochs"]:
            for o in cfg["grid"]["optimizers"]:
                for m in cfg["grid"]["models"]:
                    print(m, o, e)
        return
    jobs = args.jobs if args.jobs is not None else cfg["grid"]["jobs"]
    table, rows = run_grid(cfg, jobs=jobs)
    print(f"wrote {len(rows)} rows to {table}")


def _global_args(parser, default):
    parser.add_argument("--config", default=default, help="pipeline configuration file")
    parser.add_argument("--seed", type=int, default=default,
                        help="global seed (overrides config and GRIDSCORE_SEED)")
    parser.add_argument("-v", "--verbose", action="store_true",
                        default=False if default is None else default, help="log progress to stderr")


def build_parser():
    p = _Parser(prog="gridscore", description="Automated scoring of grid drawings.")
    _global_args(p, None)
    # The same options are accepted after the subcommand; SUPPRESS keeps an
    # unset subcommand option from overwriting one given before it.
    common = argparse.ArgumentParser(add_help=False)
    _global_args(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    add = sub.add_parser

    def add_parser(name, **kw):
        return add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--n", type=int)
    g.add_argument("--strata", type=int)
    g.add_argument("--mislabel-rate", type=float)
    g.add_argument("--stroke-width", type=int)
    g.add_argument("--jitter", type=int, help="max offset of a figure from the grid centre, in cells")
    g.add_argument("--layout", choices=("scattered", "row"), help="arrangement of separately drawn pieces")
    g.add_argument("--theta-mode", action="store_true", help="draw true scores from the GPCM")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("split", help="stratified train/validation split")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True, help="partition CSV (id,partition)")
    s.add_argument("--fraction", type=float)
    s.set_defaults(func=cmd_split)

    def sample_args(sp, default_partition):
        sp.add_argument("--manifest", required=True)
        sp.add_argument("--split", help="partition CSV restricting the sample")
        sp.add_argument("--partition", default=default_partition)

    t = sub.add_parser("train", help="train one model and save a checkpoint")
    sample_args(t, "train")
    t.add_argument("--model", required=True, help="e.g. ffn2, cnn2x2-zero-dropout")
    t.add_argument("--optimizer", default="adam", choices=("adam", "nadam", "adamax"))
    t.add_argument("--epochs", type=int, default=25)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--history", help="per-epoch loss/accuracy CSV")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    sample_args(e, "validation")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--out", required=True, help="evaluation report CSV")
    e.add_argument("--predictions", help="per-response probabilities CSV")
    e.add_argument("--meta", action="append", default=[], metavar="KEY=VALUE",
                   help="extra report metadata, e.g. optimizer=nadam")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("irt-score", help="add y_map, y_eap and y_avg columns to a manifest")
    i.add_argument("--manifest", required=True)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_irt_score)

    sel = sub.add_parser("irt-select", help="agreement-based samples and posterior summary")
    sel.add_argument("--manifest", required=True)
    sel.add_argument("--mode", choices=("map", "avg"))
    sel.add_argument("--out-dir", required=True)
    sel.set_defaults(func=cmd_irt_select)

    r = sub.add_parser("report", help="comparison table from evaluation reports")
    r.add_argument("reports", nargs="+")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)

    d = sub.add_parser("disagree", help="responses where model and human scores differ")
    sample_args(d, "validation")
    d.add_argument("--predictions", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_disagree)

    gr = sub.add_parser("grid", help="run a model grid from the config")
    gr.add_argument("--stage", type=int, help="use a preset grid (1, 2 or 3)")
    gr.add_argument("--jobs", type=int, help="train cells in parallel processes")
    gr.add_argument("--out-dir", help="override [output] dir")
    gr.add_argument("--dry-run", action="store_true", help="prepare data and list cells only")
    gr.set_defaults(func=cmd_grid)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed) if args.config else default_config(args.seed)
        args.func(args, cfg)
    except OSError as exc:
        print(f"gridscore: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, GridscoreError) as exc:
        print(f"gridscore: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
