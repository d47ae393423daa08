"""Command-line pipeline: simulate, featurize, train, eval, sweep, curve,
explain, render, and the label service.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Every subcommand writes a run manifest beside its primary output.
"""

from __future__ import annotations

import json
import os
import sys
from typing import Optional, Sequence

import click
import numpy as np

from . import config as cfgmod
from .datastore import (
    Dataset,
    FormatError,
    LabelStore,
    SplitSpec,
    load_dataset,
    load_events,
    save_dataset,
    save_events,
    split,
)
from .detector import ConfigError
from .evaluation import evaluate, render_text
from .explain import gradcam, render_overlay
from .features import project_image, to_grayscale_png, voxelize
from .manifest import RunManifest
from .models import (
    DEFAULT_LAMBDA_GRID,
    FittedModel,
    ModelSpec,
    ModelSpecError,
    fit,
    load_model,
    save_model,
    size_curve,
    sweep_lambda,
)
from .simkit import CLASS_NAMES, GenerationError, generate_dataset

USAGE_ERRORS = (ConfigError, ModelSpecError, FormatError, ValueError)


@click.group()
def main():
    """Active-target TPC simulation and track-classification toolkit."""


def _fail(exc: Exception, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _parse_counts(text: str) -> dict:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("--counts expects three comma-separated integers: P,C,O")
    return {name: int(v) for name, v in zip(CLASS_NAMES, parts)}


def _train_overrides(lr, l2, batch_size, max_epochs, patience, optimizer):
    overrides = {}
    if lr is not None:
        overrides["learning_rate"] = lr
    if l2 is not None:
        overrides["l2_lambda"] = l2
    if batch_size is not None:
        overrides["batch_size"] = batch_size
    if max_epochs is not None:
        overrides["max_epochs"] = max_epochs
    if patience is not None:
        overrides["patience"] = patience
    if optimizer is not None:
        overrides["optimizer"] = optimizer
    return overrides


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--counts", required=True, help="events per class: P,C,O")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise/--no-noise", default=False, show_default=True,
              help="inject statistical noise into proton/carbon events")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", required=True, type=click.Path())
def simulate(config_path, counts, seed, noise, workers, out):
    """Generate labeled synthetic events into an NDJSON file."""
    try:
        count_map = _parse_counts(counts)
        config = cfgmod.load_config_dict(config_path)
        sim = cfgmod.sim_config(config, master_seed=seed)
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    manifest = RunManifest("simulate", config_path, {
        "counts": count_map, "seed": seed, "noise": noise, "workers": workers,
    })
    try:
        events = generate_dataset(count_map, sim, with_noise=noise, workers=workers)
        save_events(out, events)
    except GenerationError as exc:
        _fail(exc, 1)
    manifest.add_output(out)
    manifest.write(out)
    click.echo(f"wrote {len(events)} events to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["voxel", "image"]), required=True)
@click.option("--normalize/--no-normalize", default=False, show_default=True,
              help="per-image max normalization (image kind only)")
@click.option("--image-size", type=int, default=None,
              help="override image rows=cols (e.g. 64 for the reduced protocol)")
@click.option("--split", "split_fractions", default=None,
              help="write train/val/test datasets, e.g. 0.7,0.15,0.15")
@click.option("--split-seed", type=int, default=0, show_default=True)
@click.option("--stratify/--no-stratify", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path(),
              help="output dataset base path (files get .atpc suffixes)")
def featurize(config_path, events_path, kind, normalize, image_size,
              split_fractions, split_seed, stratify, out):
    """Convert events to voxel vectors or charge-projection images."""
    try:
        config = cfgmod.load_config_dict(config_path)
        events, class_names = load_events(events_path)
        if not events:
            raise ConfigError("event file holds no events")
        labels = []
        for ev in events:
            if ev.label not in class_names:
                raise ConfigError(f"event {ev.id} lacks a usable label")
            labels.append(class_names.index(ev.label))
        if kind == "voxel":
            grid = cfgmod.voxel_grid_spec(config)
            features = np.stack([voxelize(ev, grid).values for ev in events])
        else:
            grid = cfgmod.image_grid_spec(config, size=image_size)
            features = np.stack([
                project_image(ev, grid, normalize=normalize).values[..., np.newaxis]
                for ev in events
            ])
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    manifest = RunManifest("featurize", config_path, {
        "kind": kind, "normalize": normalize, "image_size": image_size,
        "split": split_fractions, "split_seed": split_seed, "stratify": stratify,
        "events": events_path,
    })
    manifest.add_input(events_path)
    dataset = Dataset(features, np.asarray(labels), list(class_names),
                      provenance={"events": events_path, "kind": kind})
    outputs = []
    if split_fractions:
        try:
            fractions = tuple(float(v) for v in split_fractions.split(","))
            spec = SplitSpec(fractions=fractions, seed=split_seed, stratified=stratify)
        except USAGE_ERRORS as exc:
            _fail(exc, 2)
        parts = split(dataset, spec)
        for name, part in zip(("train", "val", "test"), parts):
            base = f"{out}_{name}"
            save_dataset(base, part)
            outputs.append(base)
    else:
        save_dataset(out, dataset)
        outputs.append(out)
    for base in outputs:
        for suffix in (".atpc", ".labels.atpc", ".manifest.json"):
            manifest.add_output(base + suffix)
    manifest.write(out)
    click.echo(f"featurized {dataset.m} events ({kind}) -> {', '.join(outputs)}")


@main.command()
@click.option("--family", type=click.Choice(["logreg", "fcnn", "cnn"]), required=True)
@click.option("--task", type=click.Choice(["binary", "multiclass"]), default="binary",
              show_default=True)
@click.option("--train", "train_path", required=True,
              help="training dataset base path")
@click.option("--val", "val_path", required=True, help="validation dataset base path")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--lr", type=float, default=None, help="learning rate override")
@click.option("--l2", type=float, default=None, help="L2 lambda override")
@click.option("--batch-size", type=int, default=None)
@click.option("--max-epochs", type=int, default=None)
@click.option("--patience", type=int, default=None)
@click.option("--optimizer", type=click.Choice(["sgd", "adam", "sag"]), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
def train(family, task, train_path, val_path, out_dir, lr, l2, batch_size,
          max_epochs, patience, optimizer, seed):
    """Fit one classifier family on featurized datasets."""
    try:
        train_set = load_dataset(train_path)
        val_set = load_dataset(val_path)
        spec = _model_spec_for(family, task, train_set)
        overrides = _train_overrides(lr, l2, batch_size, max_epochs, patience,
                                     optimizer)
        model, history = fit(spec, train_set, val_set, overrides=overrides,
                             seed=seed)
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    manifest = RunManifest("train", None, {
        "family": family, "task": task, "seed": seed,
        "overrides": _train_overrides(lr, l2, batch_size, max_epochs, patience,
                                      optimizer),
        "train": train_path, "val": val_path,
        "effective": model.provenance["train_config"],
    })
    manifest.add_input(train_path + ".atpc")
    manifest.add_input(val_path + ".atpc")
    save_model(out_dir, model, history)
    manifest.add_output(out_dir)
    manifest.write(out_dir.rstrip("/"))
    click.echo(
        f"trained {family}/{task}: best epoch {history.best_epoch} of "
        f"{history.stopped_epoch}, saved to {out_dir}"
    )


def _model_spec_for(family: str, task: str, dataset: Dataset) -> ModelSpec:
    if family in ("logreg", "fcnn"):
        if dataset.features.ndim != 2:
            raise ModelSpecError(
                f"{family} requires voxel-vector input; "
                f"got feature rank {dataset.features.ndim}"
            )
        return ModelSpec(family, task, n_features=dataset.features.shape[1])
    if dataset.features.ndim not in (3, 4):
        raise ModelSpecError("cnn requires image input; featurize with --kind image")
    return ModelSpec(family, task, image_size=dataset.features.shape[1])


@main.command("eval")
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True)
@click.option("--out", "out_base", required=True, type=click.Path(),
              help="report base path (.json and .txt are written)")
def eval_cmd(model_dir, data_path, out_base):
    """Evaluate a model bundle; writes JSON and text reports."""
    try:
        model = load_model(model_dir)
        dataset = load_dataset(data_path)
        report = evaluate(model, dataset, provenance={
            "model": model_dir, "data": data_path,
        })
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    manifest = RunManifest("eval", None, {"model": model_dir, "data": data_path})
    manifest.add_input(data_path + ".atpc")
    with open(out_base + ".json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(out_base + ".txt", "w", encoding="utf-8") as fh:
        fh.write(render_text(report))
    manifest.add_output(out_base + ".json")
    manifest.add_output(out_base + ".txt")
    manifest.write(out_base)
    p = report.proton
    click.echo(
        f"proton precision={p['precision']:.3f} recall={p['recall']:.3f} "
        f"f1={p['f1']:.3f} -> {out_base}.json"
    )


@main.command()
@click.option("--family", type=click.Choice(["logreg", "fcnn", "cnn"]), required=True)
@click.option("--task", type=click.Choice(["binary", "multiclass"]), default="binary",
              show_default=True)
@click.option("--grid", default=None, help="comma-separated lambda values")
@click.option("--train", "train_path", required=True)
@click.option("--val", "val_path", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-epochs", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def sweep(family, task, grid, train_path, val_path, seed, max_epochs, out_path):
    """Grid-search the L2 strength by validation proton F1."""
    try:
        values = ([float(v) for v in grid.split(",")] if grid
                  else list(DEFAULT_LAMBDA_GRID))
        train_set = load_dataset(train_path)
        val_set = load_dataset(val_path)
        spec = _model_spec_for(family, task, train_set)
        overrides = {"max_epochs": max_epochs} if max_epochs else None
        best, rows = sweep_lambda(spec, train_set, val_set, values,
                                  overrides=overrides, seed=seed)
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    manifest = RunManifest("sweep", None, {
        "family": family, "task": task, "grid": values, "seed": seed,
    })
    doc = {"best_lambda": best,
           "rows": [{"lambda": lam, "val_proton_f1": f1} for lam, f1 in rows]}
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.add_output(out_path)
    manifest.write(out_path)
    click.echo(f"best lambda: {best}")


@main.command()
@click.option("--family", type=click.Choice(["logreg", "fcnn", "cnn"]), required=True)
@click.option("--task", type=click.Choice(["binary", "multiclass"]), default="binary",
              show_default=True)
@click.option("--sizes", required=True, help="ascending training sizes, e.g. 50,150,350")
@click.option("--train", "train_path", required=True)
@click.option("--val", "val_path", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-epochs", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def curve(family, task, sizes, train_path, val_path, seed, max_epochs, out_path):
    """Sample-size curve over cumulative training subsets."""
    try:
        size_list = [int(v) for v in sizes.split(",")]
        train_set = load_dataset(train_path)
        val_set = load_dataset(val_path)
        spec = _model_spec_for(family, task, train_set)
        overrides = {"max_epochs": max_epochs} if max_epochs else None
        rows = size_curve(spec, train_set, val_set, size_list,
                          overrides=overrides, seed=seed)
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    manifest = RunManifest("curve", None, {
        "family": family, "task": task, "sizes": size_list, "seed": seed,
    })
    doc = {"rows": [{"size": s, "train_proton_f1": tf, "val_proton_f1": vf}
                    for s, tf, vf in rows]}
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.add_output(out_path)
    manifest.write(out_path)
    for s, tf, vf in rows:
        click.echo(f"size {s}: train F1 {tf:.3f}, val F1 {vf:.3f}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--class", "class_name", default="proton", show_default=True)
@click.option("--limit", type=int, default=16, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def explain(config_path, model_dir, events_path, class_name, limit, out_dir):
    """Write Grad-CAM overlays and raw heatmaps for events."""
    from .datastore import save_tensor

    try:
        model = load_model(model_dir)
        if model.spec.family != "cnn":
            raise ModelSpecError("explain requires a cnn model bundle")
        config = cfgmod.load_config_dict(config_path)
        events, _ = load_events(events_path)
        if class_name not in model.class_names:
            raise ConfigError(
                f"class {class_name!r} not in model classes {model.class_names}"
            )
        target = model.class_names.index(class_name)
        grid = cfgmod.image_grid_spec(config, size=model.spec.image_size)
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    manifest = RunManifest("explain", config_path, {
        "model": model_dir, "events": events_path, "class": class_name,
        "limit": limit,
    })
    os.makedirs(out_dir, exist_ok=True)
    for ev in events[:limit]:
        image = project_image(ev, grid, normalize=True).values
        heatmap = gradcam(model, image, target)
        render_overlay(image, heatmap,
                       os.path.join(out_dir, f"{ev.id}.overlay.png"))
        save_tensor(os.path.join(out_dir, f"{ev.id}.heatmap.atpc"), heatmap.values)
    manifest.add_output(out_dir)
    manifest.write(os.path.join(out_dir, "explain"))
    click.echo(f"wrote overlays for {min(limit, len(events))} events to {out_dir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--limit", type=int, default=None, help="only render the first N events")
@click.option("--out", "out_dir", required=True, type=click.Path())
def render(config_path, events_path, limit, out_dir):
    """Export grayscale charge-projection PNGs (white = no charge)."""
    try:
        config = cfgmod.load_config_dict(config_path)
        events, _ = load_events(events_path)
        grid = cfgmod.image_grid_spec(config)
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    manifest = RunManifest("render", config_path, {
        "events": events_path, "limit": limit,
    })
    os.makedirs(out_dir, exist_ok=True)
    subset = events if limit is None else events[:limit]
    for ev in subset:
        image = project_image(ev, grid, normalize=True)
        to_grayscale_png(image.values, os.path.join(out_dir, f"{ev.id}.png"))
    manifest.add_output(out_dir)
    manifest.write(os.path.join(out_dir, "render"))
    click.echo(f"rendered {len(subset)} events to {out_dir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui-dir", type=click.Path(), default=None,
              help="directory of built UI assets to serve at /")
def serve(config_path, events_path, labels_path, host, port, ui_dir):
    """Run the labeling HTTP service over an event file."""
    import uvicorn

    from .service import create_app

    try:
        config = cfgmod.load_config_dict(config_path)
        store = LabelStore.open(events_path, labels_path)
        app = create_app(store, image_grid=cfgmod.image_grid_spec(config),
                         ui_dir=ui_dir)
    except USAGE_ERRORS as exc:
        _fail(exc, 2)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
