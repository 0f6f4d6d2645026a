"""End-to-end steps shared by the command line and the acceptance suite."""

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor

from .checkpoint import read_checkpoint, write_checkpoint
from .errors import ValidationError
from .irt import ItemParams
from .model import ModelSpec, build_model
from .reports import (
    COMPARISON_COLUMNS,
    comparison_rows,
    read_eval_report,
    read_partition,
    write_eval_report,
    write_partition,
    write_table,
)
from .rng import make_rng
from .sampling import stratified_split
from .synthdata.dataset import GeneratorConfig, generate_dataset, load_dataset, read_manifest
from .synthdata.render import Style
from .training import TrainConfig, evaluate, train

log = logging.getLogger(__name__)


def generator_config(section):
    style = Style(
        orientation=section["orientation"],
        border_rate=section["border_rate"],
        extraneous_rate=section["extraneous_rate"],
        split_wall_rate=section["split_wall_rate"],
        scribble_strokes=section["scribble_strokes"],
        stroke_width=section["stroke_width"],
        jitter=section["jitter"],
        layout=section["layout"],
    )
    return GeneratorConfig(
        n=section["n"],
        strata=section["strata"],
        class_mix=tuple(section["class_mix"]),
        theta_mode=section["theta_mode"],
        mislabel_rate=section["mislabel_rate"],
        seed=section["seed"],
        style=style,
    )


def item_params(section):
    return ItemParams(a=section["a"], b=section["b"], c=(section["c1"], section["c2"]), D=section["D"])


def train_config(section, optimizer, epochs):
    return TrainConfig(
        epochs=epochs,
        optimizer=optimizer,
        lr=section["lr"],
        beta1=section["beta1"],
        beta2=section["beta2"],
        eps=section["eps"],
        batch_size=section["batch_size"],
        seed=section["seed"],
        shuffle=section["shuffle"],
    )


def init_rng(seed, spec):
    return make_rng(seed, ("init", spec.name))


def write_history(path, history):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "accuracy"])
        for h in history:
            w.writerow([h.epoch, repr(h.loss), repr(h.accuracy)])


def split_manifest(records, fraction, seed):
    train_ids, val_ids = stratified_split(records, make_rng(seed, "split"), fraction)
    return {"train": train_ids, "validation": val_ids}


def ensure_data(cfg):
    """Generate the dataset and its train/validation split unless they already exist."""
    data_dir = cfg["output"]["data_dir"]
    manifest = os.path.join(data_dir, "manifest.csv")
    split_path = os.path.join(data_dir, "split.csv")
    if not os.path.exists(manifest):
        log.info("generating %d responses into %s", cfg["generator"]["n"], data_dir)
        generate_dataset(generator_config(cfg["generator"]), data_dir)
    if not os.path.exists(split_path):
        records = read_manifest(manifest)
        write_partition(split_path, split_manifest(records, cfg["split"]["fraction"], cfg["split"]["seed"]))
    return manifest, split_path


def select(records, ids):
    by_id = {r.id: r for r in records}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise ValidationError(f"{len(missing)} partition ids are not in the manifest, e.g. {missing[:3]}")
    return [by_id[i] for i in ids]


def cell_name(model, optimizer, epochs):
    return f"{model}__{optimizer}__e{epochs}"


def run_cell(task):
    """Train (or reuse) one grid cell and return the path of its evaluation report.

    A cell whose checkpoint and report already exist is not recomputed; a cell
    with only a checkpoint is re-evaluated.
    """
    cell_dir, model_name, optimizer, epochs, manifest, split_path, training = task
    os.makedirs(cell_dir, exist_ok=True)
    ckpt = os.path.join(cell_dir, "model.ckpt")
    report_path = os.path.join(cell_dir, "report.csv")
    if os.path.exists(ckpt) and os.path.exists(report_path):
        return report_path
    base = os.path.dirname(manifest)
    records = read_manifest(manifest)
    parts = read_partition(split_path)
    spec = ModelSpec.from_name(model_name)
    if os.path.exists(ckpt):
        model = read_checkpoint(ckpt)
    else:
        config = train_config(training, optimizer, epochs)
        model = build_model(spec, init_rng(config.seed, spec))
        history = train(model, load_dataset(select(records, parts["train"]), base), config)
        write_history(os.path.join(cell_dir, "history.csv"), history)
        write_checkpoint(model, ckpt)
    meta = {
        "model": spec.name,
        "description": spec.describe(),
        "optimizer": optimizer,
        "epochs": str(epochs),
        "sample": "validation",
    }
    report = evaluate(model, load_dataset(select(records, parts["validation"]), base), meta)
    write_eval_report(report_path, report)
    return report_path


def run_grid(cfg, jobs=1):
    """Run every (model x optimizer x epochs) cell and write ``grid_report.csv``."""
    manifest, split_path = ensure_data(cfg)
    out_dir = cfg["output"]["dir"]
    grid = cfg["grid"]
    tasks = [
        (os.path.join(out_dir, "cells", cell_name(m, o, e)), m, o, e, manifest, split_path, cfg["training"])
        for e in grid["epochs"]
        for o in grid["optimizers"]
        for m in grid["models"]
    ]
    for t in tasks:
        ModelSpec.from_name(t[1])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            paths = list(pool.map(run_cell, tasks))
    else:
        paths = [run_cell(t) for t in tasks]
    rows = comparison_rows([read_eval_report(p) for p in paths])
    table = os.path.join(out_dir, "grid_report.csv")
    write_table(table, COMPARISON_COLUMNS, rows)
    return table, rows
