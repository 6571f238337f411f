import math

import numpy as np
import pytest

import ctxscale as cs


def test_canonical_bayes_risk():
    cfg = cs.canonical_task_set(0)
    assert cfg.n_control_bits == 50
    assert cfg.n_context_bits == 522
    assert cs.solvable_tasks(cfg, 27) == 16
    assert cs.bayes_risk(cfg, 27) == pytest.approx(34 / 50 * math.log(2), abs=1e-15)


def test_config_requires_seed():
    with pytest.raises(cs.ConfigError):
        cs.parity_config({"preset": "canonical"})
    cfg = cs.parity_config({"preset": "canonical", "seed": 4})
    assert cfg.seed == 4


def test_dataset_roundtrip_and_determinism():
    cfg = cs.parity_config({"n_context_bits": 8, "tasks": [{"bits": [1, 2]}, {"bits": [3, 7]}], "seed": 1})
    a = cs.gen_dataset(cfg, 200, 9)
    b = cs.gen_dataset(cfg, 200, 9)
    assert a == b
    assert cs.Dataset.from_binary(a.to_binary()) == a
    assert cs.Dataset.from_csv(a.to_csv()) == a
    x = a.inputs(8)
    assert x.shape == (200, 10)
    for i in range(len(a)):
        t = a.task(i)
        hi, lo = cfg.tasks[t]
        assert int(x[i, hi - 1]) ^ int(x[i, lo - 1]) == a.label(i)


def test_dedup_capacity_error():
    cfg = cs.parity_config({"n_context_bits": 3, "tasks": [{"bits": [1, 2]}], "seed": 1})
    with pytest.raises(ValueError):
        cs.gen_dataset(cfg, 100, 1, dedup=True)


def test_sym_eig_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(30, 30))
    a = a + a.T
    vals, vecs, _ = cs.sym_eig(a)
    assert np.allclose(vals, np.sort(np.linalg.eigvalsh(a))[::-1], atol=1e-9)
    assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.T - a) <= 1e-8 * np.linalg.norm(a)


def test_measure_id_examples():
    s = cs.make_spectrum([1.0, 0.25, 0.04, 0.0001])
    assert s.relative_eigenvalues == pytest.approx([1.0, 0.5, 0.2, 0.01])
    assert cs.measure_id(s, 0.1) == 3
    assert cs.measure_id(s, 1.0) == 1
    assert cs.threshold_sweep(s, [0.6, 0.3, 0.005]) == [1, 2, 4]


def test_consistent_threshold():
    s1 = cs.make_spectrum([1.0, 0.81, 0.04])
    s2 = cs.make_spectrum([1.0, 0.64, 0.09])
    lo, hi = cs.find_consistent_threshold([s1, s2], [2, 2])
    assert lo == pytest.approx(0.3) and hi == pytest.approx(0.8)
    assert cs.find_consistent_threshold([s1, s2], [1, 2]) is None


def test_fit_power_law_noiseless():
    x = [20, 30, 40, 60, 80, 120, 200]
    y = [0.4 + 3.0 / v**1.18 for v in x]
    f = cs.fit_power_law(x, y)
    assert f.c0 == pytest.approx(0.4, abs=1e-6)
    assert f.c == pytest.approx(3.0, abs=1e-6)
    assert f.gamma == pytest.approx(1.18, abs=1e-6)


def test_kde_entropy_gaussian():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(3000, 2))
    assert cs.kde_entropy(pts) == pytest.approx(1 + math.log(2 * math.pi), abs=0.1)


def test_nn_scaling_uniform_2d():
    r = cs.nn_scaling_exponent(2, "uniform", dataset_sizes=[100, 300, 1000, 3000, 10000], trials=10, seed=5)
    assert -0.6 <= r["exponent"] <= -0.4


def test_model_loss_and_optimal_context():
    p = cs.LossModelParams(c0=0.0, c=1.0, gamma=1.0, dim_inf=10.0, c_dim=5.0, c_alpha=1.0, a0=1.0)
    assert cs.model_loss(p, 1e4, 20) > 0
    assert cs.optimal_context(p, 1e4, [10, 20, 40]) in (10, 20, 40)


def test_train_xor_and_checkpoint():
    cfg = cs.parity_config({"n_context_bits": 2, "tasks": [{"bits": [1, 2]}], "seed": 3})
    tr, va = cs.gen_dataset(cfg, 400, 1), cs.gen_dataset(cfg, 100, 2)
    spec = cs.reference_mlp_spec(2, 1, 5)
    out = cs.train_model(spec, {"max_epochs": 60, "patience": 60, "batch_size": 50, "learning_rate": 3e-3, "seed": 2},
                         tr, va)
    assert min(out["val_loss"]) < 0.05
    m2 = cs.Model.from_bytes(out["model"].to_bytes())
    assert m2.predict(va) == out["model"].predict(va)


def test_sweep_toy_grid(tmp_path):
    report = cs.sweep(
        {
            "parity": {"n_context_bits": 6, "tasks": [{"bits": [1, 2]}, {"bits": [3, 5]}], "seed": 1},
            "hidden": [16],
            "train": {"max_epochs": 2, "patience": 2, "batch_size": 32},
            "dataset_sizes": [64, 128],
            "context_lengths": [2, 5],
            "seeds": [7],
            "n_val": 16,
        },
        receipt_dir=tmp_path,
    )
    assert len(report["records"]) == 4
    assert len(list(tmp_path.iterdir())) == 4
