"""The three classifier families and the experiment protocols around them.

Voxel-vector models (logreg, fcnn) and the image CNN share the same layer
stack machinery; this module owns target encoding, per-family defaults,
input scaling, model bundles on disk, and the lambda-sweep / sample-size
protocols. The binary task folds carbon and "other" into a single
non-proton class, with proton as the positive class.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .datastore import Dataset, load_tensor, save_tensor
from .features import FeatureScaler, fit_scaler
from .nncore import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2D,
    Network,
    TrainConfig,
    TrainHistory,
    forward_in_batches,
    network_from_specs,
    sag_learning_rate,
    train,
)

FAMILIES = ("logreg", "fcnn", "cnn")
TASKS = ("binary", "multiclass")
INPUT_KINDS = {"logreg": "voxel", "fcnn": "voxel", "cnn": "image"}
BINARY_CLASS_NAMES = ["nonproton", "proton"]
BUNDLE_VERSION = 1


class ModelSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    family: str
    task: str
    n_features: int = 8000            # voxel models
    image_size: int = 128             # cnn models
    hidden_units: int = 128           # fcnn hidden width
    cnn_dense_units: int = 256

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelSpecError(f"family must be one of {FAMILIES}")
        if self.task not in TASKS:
            raise ModelSpecError(f"task must be one of {TASKS}")

    @property
    def input_kind(self) -> str:
        return INPUT_KINDS[self.family]


def _head_units(spec: ModelSpec) -> Tuple[int, str, str]:
    """(units, activation, loss kind) for the output head."""
    if spec.task == "multiclass":
        return 3, "softmax", "cce"
    if spec.family == "cnn":
        return 2, "sigmoid", "bce"   # two sigmoid units, proton = index 1
    return 1, "sigmoid", "bce"


def build_logreg(n_features: int, task: str) -> Network:
    spec = ModelSpec("logreg", task, n_features=n_features)
    units, act, _ = _head_units(spec)
    return Network([Dense(n_features, units, act)])


def build_fcnn(n_features: int, task: str, hidden_units: int = 128) -> Network:
    spec = ModelSpec("fcnn", task, n_features=n_features, hidden_units=hidden_units)
    units, act, _ = _head_units(spec)
    return Network([
        Dense(n_features, hidden_units, "relu"),
        Dropout(0.5),
        Dense(hidden_units, units, act),
    ])


def build_cnn(image_size: int, task: str, dense_units: int = 256) -> Network:
    """Small from-scratch stack: three conv+pool blocks into a dense head."""
    if image_size < 8 or image_size % 8 != 0:
        raise ModelSpecError("image size must be a multiple of 8 (three 2x poolings)")
    spec = ModelSpec("cnn", task, image_size=image_size, cnn_dense_units=dense_units)
    units, act, _ = _head_units(spec)
    side = image_size // 8
    return Network([
        Conv2D(3, 3, 1, 8, "relu"),
        MaxPool2D(2, 2, 2),
        Conv2D(3, 3, 8, 16, "relu"),
        MaxPool2D(2, 2, 2),
        Conv2D(3, 3, 16, 32, "relu"),
        MaxPool2D(2, 2, 2),
        Flatten(),
        Dense(side * side * 32, dense_units, "relu"),
        Dropout(0.5),
        Dense(dense_units, units, act),
    ])


def build_network(spec: ModelSpec) -> Network:
    if spec.family == "logreg":
        return build_logreg(spec.n_features, spec.task)
    if spec.family == "fcnn":
        return build_fcnn(spec.n_features, spec.task, spec.hidden_units)
    return build_cnn(spec.image_size, spec.task, spec.cnn_dense_units)


def default_train_config(spec: ModelSpec, seed: int = 0) -> TrainConfig:
    if spec.family == "logreg":
        # lr handled by the auto rule at fit time unless overridden
        return TrainConfig(learning_rate=1.0, l2_lambda=1e-3, optimizer="sag",
                           max_epochs=30, patience=5, seed=seed)
    if spec.family == "fcnn":
        return TrainConfig(learning_rate=1e-5, optimizer="adam",
                           max_epochs=200, patience=5, seed=seed)
    # from-scratch cnn: the fine-tuning rate in the source protocol assumes
    # pre-trained weights; fresh weights need a larger step
    return TrainConfig(learning_rate=1e-4, optimizer="adam",
                       max_epochs=60, patience=5, seed=seed)


@dataclass
class FittedModel:
    spec: ModelSpec
    network: Network
    class_names: List[str]
    scaler: Optional[FeatureScaler] = None
    provenance: dict = field(default_factory=dict)

    def prepare(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if self.spec.input_kind == "voxel":
            x = x.reshape(x.shape[0], -1)
            if self.scaler is not None:
                x = self.scaler.apply(x)
        else:
            if x.ndim == 3:
                x = x[..., np.newaxis]
        return x

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        """(m, n_classes) class probabilities in self.class_names order."""
        x = self.prepare(features)
        out = forward_in_batches(self.network, x)
        if out.shape[1] == 1:  # single sigmoid unit: [P(non-proton), P(proton)]
            p = out[:, 0]
            return np.column_stack([1.0 - p, p])
        return out

    def predict_label(self, features: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        proba = self.predict_proba(features)
        if self.spec.task == "binary":
            return (proba[:, 1] >= threshold).astype(np.int64)
        return np.argmax(proba, axis=1).astype(np.int64)

    def encode_truth(self, dataset: Dataset) -> np.ndarray:
        return encode_labels(dataset.labels, dataset.class_names, self.spec.task)


def encode_labels(labels: np.ndarray, class_names: Sequence[str], task: str) -> np.ndarray:
    """Map dataset labels into the model's class indices."""
    labels = np.asarray(labels, dtype=np.int64)
    if task == "binary":
        proton = list(class_names).index("proton")
        return (labels == proton).astype(np.int64)
    order = [list(class_names).index(n) for n in ("proton", "carbon", "other")]
    lut = np.zeros(len(class_names), dtype=np.int64)
    for new_idx, old_idx in enumerate(order):
        lut[old_idx] = new_idx
    return lut[labels]


def _encode_targets(y: np.ndarray, spec: ModelSpec) -> np.ndarray:
    units, _, _ = _head_units(spec)
    if units == 1:
        return y.reshape(-1, 1).astype(np.float64)
    return np.eye(units)[y]


def multiclass_class_names() -> List[str]:
    return ["proton", "carbon", "other"]


def fit(
    spec: ModelSpec,
    train_set: Dataset,
    val_set: Dataset,
    overrides: Optional[dict] = None,
    seed: int = 0,
) -> Tuple[FittedModel, TrainHistory]:
    """Train a family with its defaults, applying any override hyperparameters."""
    _check_input_kind(spec, train_set)
    config = default_train_config(spec, seed=seed)
    overrides = dict(overrides or {})
    explicit_lr = "learning_rate" in overrides
    if overrides:
        config = dataclasses.replace(config, **overrides)

    class_names = (BINARY_CLASS_NAMES if spec.task == "binary"
                   else multiclass_class_names())
    scaler = None
    x_train = np.asarray(train_set.features, dtype=np.float64)
    x_val = np.asarray(val_set.features, dtype=np.float64)
    if spec.input_kind == "voxel":
        x_train = x_train.reshape(x_train.shape[0], -1)
        x_val = x_val.reshape(x_val.shape[0], -1)
        scaler = fit_scaler(x_train)
        x_train = scaler.apply(x_train)
        x_val = scaler.apply(x_val)
    else:
        if x_train.ndim == 3:
            x_train = x_train[..., np.newaxis]
            x_val = x_val[..., np.newaxis]

    if config.optimizer == "sag" and not explicit_lr:
        auto = sag_learning_rate(x_train, config.l2_lambda)
        config = dataclasses.replace(config, learning_rate=auto)

    y_train = encode_labels(train_set.labels, train_set.class_names, spec.task)
    y_val = encode_labels(val_set.labels, val_set.class_names, spec.task)
    _, _, loss_kind = _head_units(spec)

    network = build_network(spec)
    history = train(network, x_train, _encode_targets(y_train, spec),
                    x_val, _encode_targets(y_val, spec), config, loss_kind)

    provenance = {
        "family": spec.family,
        "task": spec.task,
        "input_kind": spec.input_kind,
        "train_config": dataclasses.asdict(config),
        "seed": config.seed,
        "m_train": train_set.m,
        "m_val": val_set.m,
        "best_epoch": history.best_epoch,
        "stopped_epoch": history.stopped_epoch,
    }
    model = FittedModel(spec=spec, network=network, class_names=class_names,
                        scaler=scaler, provenance=provenance)
    return model, history


def _check_input_kind(spec: ModelSpec, dataset: Dataset) -> None:
    rank = dataset.features.ndim
    if spec.input_kind == "voxel" and rank != 2:
        raise ModelSpecError(
            f"{spec.family} consumes voxel vectors; got feature rank {rank}"
        )
    if spec.input_kind == "image" and rank not in (3, 4):
        raise ModelSpecError(
            f"{spec.family} consumes images; got feature rank {rank}"
        )


def proton_f1(model: FittedModel, dataset: Dataset) -> float:
    from .evaluation import evaluate

    report = evaluate(model, dataset)
    return report.proton["f1"]


def sweep_lambda(
    spec: ModelSpec,
    train_set: Dataset,
    val_set: Dataset,
    grid: Sequence[float],
    overrides: Optional[dict] = None,
    seed: int = 0,
) -> Tuple[float, List[Tuple[float, float]]]:
    """One fit per lambda (shared seed); best = max validation proton F1,
    ties broken toward the smaller lambda."""
    if not len(grid):
        raise ValueError("lambda grid must be non-empty")
    rows: List[Tuple[float, float]] = []
    for lam in grid:
        ov = dict(overrides or {})
        ov["l2_lambda"] = float(lam)
        model, _ = fit(spec, train_set, val_set, overrides=ov, seed=seed)
        rows.append((float(lam), proton_f1(model, val_set)))
    best_lambda = max(sorted(rows, key=lambda r: r[0]), key=lambda r: r[1])[0]
    return best_lambda, rows


DEFAULT_LAMBDA_GRID = (0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0)


def size_curve(
    spec: ModelSpec,
    pool: Dataset,
    val_set: Dataset,
    sizes: Sequence[int],
    overrides: Optional[dict] = None,
    seed: int = 0,
) -> List[Tuple[int, float, float]]:
    """Cumulative training subsets: each larger subset contains the smaller.

    Returns (size, train F1, validation F1) rows, one fit per size with a
    shared seed and a fixed validation set.
    """
    sizes = list(sizes)
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be ascending")
    if sizes and sizes[-1] > pool.m:
        raise ValueError(f"size {sizes[-1]} exceeds pool of {pool.m}")
    order = np.random.default_rng(seed).permutation(pool.m)
    rows = []
    for size in sizes:
        subset = pool.subset(order[:size], note=f"size_curve[{size}]")
        model, _ = fit(spec, subset, val_set, overrides=overrides, seed=seed)
        rows.append((int(size), proton_f1(model, subset), proton_f1(model, val_set)))
    return rows


# ---------------------------------------------------------------------------
# Model bundles
# ---------------------------------------------------------------------------

def save_model(model_dir: str, model: FittedModel,
               history: Optional[TrainHistory] = None) -> None:
    os.makedirs(model_dir, exist_ok=True)
    manifest = {
        "bundle_version": BUNDLE_VERSION,
        "spec": dataclasses.asdict(model.spec),
        "class_names": model.class_names,
        "layer_specs": model.network.specs(),
        "has_scaler": model.scaler is not None,
        "provenance": model.provenance,
    }
    with open(os.path.join(model_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for i, name, arr in model.network.parameters():
        save_tensor(os.path.join(model_dir, f"layer{i:02d}_{name}.atpc"), arr)
    if model.scaler is not None:
        save_tensor(os.path.join(model_dir, "scaler.atpc"), model.scaler.max_values)
    if history is not None:
        with open(os.path.join(model_dir, "history.tsv"), "w", encoding="utf-8") as fh:
            fh.write(history.to_table())


def load_model(model_dir: str) -> FittedModel:
    with open(os.path.join(model_dir, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("bundle_version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version in {model_dir}")
    spec = ModelSpec(**manifest["spec"])
    network = network_from_specs(manifest["layer_specs"])
    for i, name, arr in network.parameters():
        loaded = load_tensor(os.path.join(model_dir, f"layer{i:02d}_{name}.atpc"))
        arr[...] = loaded.astype(np.float64)
    scaler = None
    if manifest["has_scaler"]:
        scaler = FeatureScaler(
            load_tensor(os.path.join(model_dir, "scaler.atpc")).astype(np.float64)
        )
    return FittedModel(spec=spec, network=network,
                       class_names=manifest["class_names"], scaler=scaler,
                       provenance=manifest.get("provenance", {}))
