#!/usr/bin/env python3
"""End-to-end smoke test for the recnet_py extension module.

Builds are produced by cargo; this script locates the compiled cdylib,
imports it, and drives a small train/evaluate round trip:

    cargo build --release -p recnet-py
    python3 python/smoke_test.py
"""

import json
import os
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_recnet_py():
    candidates = [
        os.path.join(REPO, "target", profile, "librecnet_py.so")
        for profile in ("release", "debug")
    ]
    lib = next((c for c in candidates if os.path.exists(c)), None)
    if lib is None:
        sys.exit("librecnet_py.so not found; run `cargo build --release -p recnet-py` first")
    stage = tempfile.mkdtemp(prefix="recnet_py_")
    shutil.copy(lib, os.path.join(stage, "recnet_py.so"))
    sys.path.insert(0, stage)
    import recnet_py

    return recnet_py


def main():
    rn = import_recnet_py()

    # pinned generator: same seed, same stream
    a = rn.Rng(42).uniform(5, 0.0, 1.0)
    b = rn.Rng(42).uniform(5, 0.0, 1.0)
    assert a == b, "seeded generator must replay"
    assert all(0.0 <= v < 1.0 for v in a)
    assert abs(a[0] - 0.7415648787718233) < 1e-15, "SplitMix64 stream changed"

    # synthetic fraud data, split, train a small network
    ds = rn.Dataset.fraud(3000, seed=7)
    assert len(ds) == 3000 and ds.n_features == 12 and ds.n_classes == 3
    train, test = ds.split(train_fraction=0.7, seed=7)
    assert len(train) == 2100 and len(test) == 900

    model = rn.Model(ds.n_features, ds.n_classes, seed=7, depth=2, hidden_units=24)
    history = model.train(train, epochs=30, learning_rate=0.05, batch_size=64, seed=7)
    assert len(history) == 30
    losses = [h[0] for h in history]
    assert losses[-1] < losses[0], "training should reduce the loss"

    predictions = model.predict(test.rows())
    scores = rn.evaluate(predictions, test.labels, ds.n_classes)
    counts = test.class_counts()
    majority = max(counts) / sum(counts)
    print(f"model accuracy {scores['accuracy']:.3f} (majority baseline {majority:.3f})")
    assert scores["accuracy"] > majority, "model should beat the majority baseline"

    # training is deterministic: a rebuilt model retraces the same history
    model2 = rn.Model(ds.n_features, ds.n_classes, seed=7, depth=2, hidden_units=24)
    history2 = model2.train(train, epochs=30, learning_rate=0.05, batch_size=64, seed=7)
    assert history == history2, "training must be deterministic"
    assert model2.predict(test.rows()) == predictions

    # persistence round trip
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.bin")
        model.save(path)
        reloaded = rn.Model.load(path)
        assert reloaded.predict(test.rows()) == predictions

    # SVM baseline and gradient checking
    svm = rn.Svm.train(train, epochs=20, seed=7)
    svm_scores = rn.evaluate(svm.predict(test.rows()), test.labels, ds.n_classes)
    print(f"svm accuracy {svm_scores['accuracy']:.3f}")

    err = model.gradient_check(train.rows()[:4], train.labels[:4])
    print(f"gradient check max relative error {err:.2e}")
    assert err <= 1e-4

    # fold assignments cover every sample and stay stratified within one
    folds = rn.kfold_assignments(train.labels, k=10, seed=3)
    assert len(folds) == len(train)
    assert set(folds) == set(range(10))

    # pipeline commands through the JSON config surface
    with tempfile.TemporaryDirectory() as tmp:
        config = {
            "task": "task2",
            "seed": 11,
            "scale": 0.02,
            "training": {"epochs": 8, "seed": 11},
            "out_dir": tmp,
        }
        manifest = json.loads(rn.generate_from_config(json.dumps(config)))
        assert manifest["train_rows"] + manifest["test_rows"] == 2000
        csv = rn.benchmark_from_config(json.dumps(config))
        lines = csv.strip().splitlines()
        assert lines[0] == "Algorithm,Task Name,Accuracy,Precision,Recall,F-score"
        assert len(lines) == 3, csv
        print("benchmark rows:")
        for line in lines[1:]:
            print("  " + line)

    print("smoke test: PASS")


if __name__ == "__main__":
    main()
