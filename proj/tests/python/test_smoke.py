import json

import numpy as np
import pytest

import dgstab


def test_constants():
    value, xi_star = dgstab.c2()
    assert 0.04 <= value <= 0.06
    assert xi_star > 0
    assert 0.042 <= dgstab.c3() <= 0.052
    sweep = [dgstab.c2(xi_lo=0.4, xi_hi=0.4, base=b)[0] for b in (2, 3, 4, 5)]
    assert sweep == sorted(sweep, reverse=True)
    assert dgstab.c1(eta=18, K=2, kappa=2, sigma=0.9, gamma=0.1) >= 800
    assert dgstab.acc_bound_from_loss(0.0) == 1.0


def test_validation_maps_to_value_error():
    with pytest.raises(ValueError):
        dgstab.c3(xi=0.5)
    with pytest.raises(dgstab.ValidationError):
        dgstab.DoublingParams(kappa=1.0)
    with pytest.raises(ValueError):
        dgstab.generate_poly_boundary(degree=20)


def test_dataset_round_trip(tmp_path):
    ds = dgstab.generate_poly_boundary(degree=6, n=1000, seed=7)
    assert len(ds) == 1000 and ds.dim == 2 and ds.num_classes == 2
    assert abs(sum(ds.weights) - 1.0) < 1e-12
    path = tmp_path / "data.csv"
    ds.save_csv(path)
    back = dgstab.load_csv(path)
    np.testing.assert_array_equal(back.points, ds.points)
    assert back.labels == ds.labels

    custom = dgstab.LabeledDataset(np.array([[0.0, 0.0], [1.0, 1.0]]), [0, 1], weights=[2.0, 2.0])
    assert custom.was_renormalized and custom.weights == [0.5, 0.5]


def test_sudc_scan_is_thread_independent():
    ds = dgstab.generate_poly_boundary(n=800, seed=3)
    a = dgstab.sudc_scan(ds, n_slabs=300, seed=1, threads=1)
    b = dgstab.sudc_scan(ds, n_slabs=300, seed=1, threads=4)
    assert a == b
    assert a["n_slabs"] == 300 and len(a["steps"]) == 300
    assert a["beta_bar"] == pytest.approx(np.mean(a["final_width"]))
    assert min(a["final_width"]) >= 0.001


def test_model_training_and_confidence():
    ds = dgstab.generate_poly_boundary(n=300, seed=5)
    model = dgstab.MlpModel.random([2, 16, 2], activation="leaky_relu", seed=2)
    trace = dgstab.train(model, ds, epochs=3, optimizer="adam", lr=1e-2, batch_size=32, seed=1)
    assert [row[0] for row in trace] == [0, 1, 2, 3]
    for _, loss, acc in trace:
        assert 1 - acc <= loss / np.log(2) + 1e-12
    dx = dgstab.delta_x(model, ds)
    assert dx.shape == (300,)
    assert trace[-1][2] == pytest.approx(float(np.mean(dx > 0)))
    loss, grad = dgstab.loss_and_gradient(model, ds)
    assert loss == pytest.approx(dgstab.cross_entropy(model, ds))
    assert len(grad) == len(model.parameters())
    spec = dgstab.singular_spectrum(model)
    assert spec["d_max"] >= spec["d_min"] > 0


def test_checkpoint_round_trip(tmp_path):
    model = dgstab.MlpModel.random([2, 4, 3], seed=9)
    model.save(tmp_path / "m.ckpt")
    back = dgstab.load_checkpoint(tmp_path / "m.ckpt")
    assert back.parameters() == model.parameters()
    assert back.dims == [2, 4, 3]


def test_preconditions_and_propagation():
    report = dgstab.check_preconditions(
        "deltax-uniform", {"eta": 18, "xi": 0.7, "delta0": 0.2, "delta": 0.25, "beta": 40,
                           "ell": 0.7, "kappa": 2, "sigma": 0.9, "K": 2, "good_mass": 0.9,
                           "min_delta": 0.1})
    json.dumps(report)
    assert report["checks"] and all(c["pass"] for c in report["checks"])
    with pytest.raises(ValueError, match="missing inputs"):
        dgstab.check_preconditions("deltax-uniform", {"eta": 18})
    rng = np.random.default_rng(0)
    ds = dgstab.LabeledDataset(rng.uniform(-1, 1, size=(2000, 2)), [i % 2 for i in range(2000)])
    params = dgstab.DoublingParams(kappa=2, sigma=0.5, delta=0.2, ell=0.02, beta=0.5)
    verdict = dgstab.verify_propagation(ds, "linear", matrix=np.array([[2.0, 0.0], [0.0, 2.0]]),
                                        params=params, n_slabs=100)
    assert verdict["n_slabs"] == 100 and verdict["n_premise"] > 0
    assert verdict["counterexamples"] == []
