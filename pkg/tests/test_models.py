import numpy as np
import numpy.testing as npt
import pytest

from tpctrack.datastore import Dataset
from tpctrack.evaluation import evaluate
from tpctrack.models import (
    ModelSpec,
    ModelSpecError,
    build_cnn,
    build_fcnn,
    build_logreg,
    encode_labels,
    fit,
    load_model,
    save_model,
    size_curve,
    sweep_lambda,
)

CLASSES = ["proton", "carbon", "other"]


def _toy_voxel_dataset(m=60, n=24, seed=0, k=3):
    """Linearly separable toy voxels: each class lights its own block."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, k, m)
    x = rng.uniform(0, 0.05, (m, n))
    block = n // k
    for i, lab in enumerate(labels):
        x[i, lab * block:(lab + 1) * block] += rng.uniform(1.0, 2.0, block)
    return Dataset(x, labels, CLASSES[:k] if k == 3 else CLASSES)


def _toy_image_dataset(m=40, side=16, seed=0):
    """Class 0 draws a bar, class 1 a corner blob, class 2 speckle."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 3, m)
    x = np.zeros((m, side, side))
    for i, lab in enumerate(labels):
        if lab == 0:
            r = int(rng.integers(3, side - 3))
            x[i, r, 2:side - 2] = 1.0
        elif lab == 1:
            x[i, 2:6, 2:6] = rng.uniform(0.5, 1.0, (4, 4))
        else:
            pts = rng.integers(0, side, (12, 2))
            x[i, pts[:, 0], pts[:, 1]] = rng.uniform(0.3, 1.0, 12)
    return Dataset(x, labels, CLASSES)


def test_parameter_counts():
    assert build_logreg(8000, "binary").n_parameters() == 8001
    assert build_logreg(8000, "multiclass").n_parameters() == 3 * 8000 + 3
    fcnn = build_fcnn(8000, "binary")
    assert fcnn.n_parameters() == 8000 * 128 + 128 + 128 * 1 + 1


def test_cnn_flatten_dimension():
    net = build_cnn(128, "multiclass")
    dense = net.layers[7]
    assert dense.n_in == 16 * 16 * 32 == 8192
    assert dense.n_out == 256
    assert net.layers[-1].n_out == 3
    assert net.layers[-1].activation == "softmax"


def test_cnn_binary_head_two_sigmoid_units():
    net = build_cnn(64, "binary")
    head = net.layers[-1]
    assert head.n_out == 2 and head.activation == "sigmoid"


def test_cnn_rejects_tiny_images():
    with pytest.raises(ModelSpecError):
        build_cnn(4, "binary")


def test_input_kind_validation():
    ds = _toy_image_dataset(10)
    with pytest.raises(ModelSpecError):
        fit(ModelSpec("logreg", "binary", n_features=16), ds, ds)


def test_encode_labels_binary_folds_nonproton():
    labels = np.array([0, 1, 2, 0])
    out = encode_labels(labels, CLASSES, "binary")
    npt.assert_array_equal(out, [1, 0, 0, 1])


def test_encode_labels_multiclass_reorders():
    out = encode_labels(np.array([0, 1, 2]), ["other", "proton", "carbon"],
                        "multiclass")
    npt.assert_array_equal(out, [2, 0, 1])


def test_logreg_fits_separable_toy_set():
    ds = _toy_voxel_dataset(80, seed=1)
    spec = ModelSpec("logreg", "binary", n_features=ds.features.shape[1])
    model, history = fit(spec, ds, ds, overrides={"max_epochs": 200,
                                                  "patience": 200}, seed=3)
    preds = model.predict_label(ds.features)
    truth = model.encode_truth(ds)
    assert (preds == truth).mean() == 1.0
    assert history.best_epoch <= history.stopped_epoch


def test_fit_records_provenance_defaults():
    ds = _toy_voxel_dataset(30, seed=2)
    spec = ModelSpec("fcnn", "binary", n_features=ds.features.shape[1])
    model, _ = fit(spec, ds, ds, overrides={"max_epochs": 2}, seed=0)
    cfg = model.provenance["train_config"]
    assert cfg["learning_rate"] == 1e-5
    assert cfg["optimizer"] == "adam"
    assert model.provenance["seed"] == 0


def test_fit_deterministic_given_seed():
    ds = _toy_voxel_dataset(40, seed=4)
    spec = ModelSpec("logreg", "multiclass", n_features=ds.features.shape[1])
    m1, h1 = fit(spec, ds, ds, overrides={"max_epochs": 5}, seed=9)
    m2, h2 = fit(spec, ds, ds, overrides={"max_epochs": 5}, seed=9)
    for a, b in zip(m1.network.get_state(), m2.network.get_state()):
        npt.assert_array_equal(a, b)
    assert h1.val_losses == h2.val_losses


def test_predict_proba_softmax_sums_to_one():
    ds = _toy_voxel_dataset(30, seed=5)
    spec = ModelSpec("logreg", "multiclass", n_features=ds.features.shape[1])
    model, _ = fit(spec, ds, ds, overrides={"max_epochs": 3}, seed=1)
    proba = model.predict_proba(ds.features)
    npt.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_binary_threshold_inclusive():
    spec = ModelSpec("logreg", "binary", n_features=4)
    net = build_logreg(4, "binary")
    from tpctrack.models import FittedModel
    model = FittedModel(spec=spec, network=net, class_names=["nonproton", "proton"])
    x = np.zeros((1, 4))  # zero weights -> sigmoid(0) = 0.5 exactly
    assert model.predict_label(x)[0] == 1


def test_all_zero_weights_multiclass_uniform_and_class0():
    spec = ModelSpec("logreg", "multiclass", n_features=4)
    net = build_logreg(4, "multiclass")
    from tpctrack.models import FittedModel
    model = FittedModel(spec=spec, network=net,
                        class_names=["proton", "carbon", "other"])
    proba = model.predict_proba(np.zeros((1, 4)))
    npt.assert_allclose(proba, 1.0 / 3.0, atol=1e-12)
    assert model.predict_label(np.zeros((1, 4)))[0] == 0


def test_argmax_scale_invariance():
    ds = _toy_voxel_dataset(30, seed=6)
    spec = ModelSpec("logreg", "multiclass", n_features=ds.features.shape[1])
    model, _ = fit(spec, ds, ds, overrides={"max_epochs": 3}, seed=2)
    before = model.predict_label(ds.features)
    head = model.network.layers[-1]
    head.w *= 3.7
    head.b *= 3.7
    npt.assert_array_equal(model.predict_label(ds.features), before)


def test_sweep_lambda_single_value_and_table():
    ds = _toy_voxel_dataset(40, seed=7)
    spec = ModelSpec("logreg", "binary", n_features=ds.features.shape[1])
    best, rows = sweep_lambda(spec, ds, ds, [0.01],
                              overrides={"max_epochs": 3}, seed=0)
    assert best == 0.01 and len(rows) == 1
    best, rows = sweep_lambda(spec, ds, ds, [0.0, 0.01, 0.1],
                              overrides={"max_epochs": 3}, seed=0)
    assert len(rows) == 3
    assert all(len(r) == 2 for r in rows)
    f1s = {lam: f for lam, f in rows}
    assert f1s[best] == max(f1s.values())
    ties = [lam for lam, f in rows if f == f1s[best]]
    assert best == min(ties)


def test_size_curve_nested_and_full_pool():
    ds = _toy_voxel_dataset(50, seed=8)
    spec = ModelSpec("logreg", "binary", n_features=ds.features.shape[1])
    rows = size_curve(spec, ds, ds, [50], overrides={"max_epochs": 3}, seed=0)
    assert rows[0][0] == 50
    rows = size_curve(spec, ds, ds, [10, 25, 50],
                      overrides={"max_epochs": 3}, seed=0)
    assert [r[0] for r in rows] == [10, 25, 50]
    with pytest.raises(ValueError):
        size_curve(spec, ds, ds, [60], seed=0)
    with pytest.raises(ValueError):
        size_curve(spec, ds, ds, [30, 10], seed=0)


def test_model_bundle_round_trip(tmp_path):
    ds = _toy_voxel_dataset(30, seed=9)
    spec = ModelSpec("logreg", "binary", n_features=ds.features.shape[1])
    model, history = fit(spec, ds, ds, overrides={"max_epochs": 3}, seed=4)
    path = str(tmp_path / "bundle")
    save_model(path, model, history)
    loaded = load_model(path)
    npt.assert_array_equal(loaded.predict_label(ds.features),
                           model.predict_label(ds.features))
    assert loaded.class_names == model.class_names
    assert loaded.scaler is not None
    report = evaluate(loaded, ds)
    assert 0.0 <= report.proton["f1"] <= 1.0


def test_cnn_trains_on_toy_images():
    ds = _toy_image_dataset(60, side=16, seed=10)
    spec = ModelSpec("cnn", "multiclass", image_size=16)
    model, _ = fit(spec, ds, ds,
                   overrides={"max_epochs": 30, "learning_rate": 3e-3,
                              "patience": 30}, seed=5)
    preds = model.predict_label(ds.features)
    truth = model.encode_truth(ds)
    assert (preds == truth).mean() >= 0.9
