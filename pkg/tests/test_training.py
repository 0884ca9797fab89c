import numpy as np
import pytest

from mvinfo.errors import ValidationError
from mvinfo.estimators import estimate_info_profile
from mvinfo.experiments.generators import GeneratorSpec, build_model
from mvinfo.experiments.training import (TrainerConfig, _distinct_rows, _Net, majority_reconstruction,
                                         symbol_features, train_count_table, train_model)
from mvinfo.multiview import MultiViewDataset, generalization_gap


def xor_data(n=100, seed=0):
    model = build_model(GeneratorSpec(kind="xor_flip", m=2, flip=0.1))
    xs, ys = model.sample(n, np.random.default_rng(seed))
    return model, MultiViewDataset(xs, ys)


@pytest.mark.parametrize("cfg", [
    TrainerConfig(width=3, penalty_weight=0.7, weight_decay=0.01),
    TrainerConfig(width=2, hidden=3, penalty_weight=0.3, features="bits"),
    TrainerConfig(width=2, code_temperature=0.5),
])
def test_gradients_match_finite_differences(cfg):
    model = build_model(GeneratorSpec(m=2, flip=0.1, v_card=2, d=2))
    xs, ys = model.sample(40, np.random.default_rng(3))
    ds = MultiViewDataset(xs, ys)
    net = _Net(cfg, 2, model.x_card, model.y_card, np.random.default_rng(0))
    net.tau = 0.7 if cfg.code_temperature < 1 else 1.0
    rows, pxy = zip(*[_distinct_rows(ds, j, model.x_card, model.y_card) for j in range(2)])
    _, g = net.step_grads(list(rows), list(pxy))
    rng = np.random.default_rng(1)
    h = 1e-6
    for k, v in net.p.items():
        for idx in map(tuple, rng.integers(0, v.shape, size=(3, v.ndim))):
            old = v[idx]
            v[idx] = old + h
            lp, _ = net.step_grads(list(rows), list(pxy))
            v[idx] = old - h
            lm, _ = net.step_grads(list(rows), list(pxy))
            v[idx] = old
            assert g[k][idx] == pytest.approx((lp - lm) / (2 * h), abs=1e-6, rel=1e-4)


def test_zero_epochs_returns_initialization():
    _, ds = xor_data()
    cfg = TrainerConfig(epochs=0)
    a = train_model(ds, cfg, 5, 2, 2)
    b = train_model(ds, cfg, 5, 2, 2)
    init = _Net(cfg, 2, 2, 2, np.random.default_rng(5)).p
    for k in init:
        assert np.array_equal(a.params[k], init[k])
        assert a.params[k].tobytes() == b.params[k].tobytes()
    assert a.history == []


def test_training_is_deterministic():
    _, ds = xor_data()
    cfg = TrainerConfig(penalty_weight=0.1, epochs=30)
    a, b = train_model(ds, cfg, 2, 2, 2), train_model(ds, cfg, 2, 2, 2)
    assert a.weights().tobytes() == b.weights().tobytes()
    assert np.array_equal(a.rep.c_tables, b.rep.c_tables)


def test_penalty_sweep_lowers_cmi():
    _, ds = xor_data()
    for seed in range(3):
        cmi = [estimate_info_profile(ds, train_model(ds, TrainerConfig(penalty_weight=pw), seed, 2, 2).rep).cmi_sum
               for pw in (0.0, 1.0, 10.0)]
        assert cmi[0] >= cmi[1] >= cmi[2]
        assert cmi[2] < cmi[0]


@pytest.mark.parametrize("features", ["onehot", "bits"])
def test_separable_task_interpolates(features):
    model = build_model(GeneratorSpec(m=2, flip=0.0))
    xs, ys = model.sample(100, np.random.default_rng(0))
    ds = MultiViewDataset(xs, ys)
    tm = train_model(ds, TrainerConfig(epochs=300, features=features), 0, model.x_card, model.y_card)
    g = generalization_gap(model, tm.rep, tm.cls, ds, "cls")
    assert g.empirical == 0.0


def test_trained_model_shapes():
    model, ds = xor_data()
    tm = train_model(ds, TrainerConfig(width=3, epochs=5), 0, 2, 2)
    assert tm.rep.c_card == tm.rep.u_card == 3
    assert tm.cls.tables.shape == (1, 9)
    assert tm.predict(ds.xs).shape == ds.xs.shape
    assert tm.n_params == tm.weights().size
    assert tm.frobenius == pytest.approx(np.linalg.norm(tm.weights()))


def test_config_validation():
    for kw in ({"width": 0}, {"epochs": -1}, {"features": "pixels"}, {"code_temperature": 0.0}):
        with pytest.raises(ValidationError):
            TrainerConfig(**kw)
    _, ds = xor_data()
    with pytest.raises(ValidationError):
        train_model(MultiViewDataset(ds.xs[:0], ds.ys[:0]), TrainerConfig(), 0, 2, 2)


def test_symbol_features():
    assert symbol_features(3, "onehot").tolist() == np.eye(3).tolist()
    f = symbol_features(4, "bits")
    assert f.shape == (4, 3) and np.all(f[:, -1] == 1)
    assert len({tuple(r) for r in f}) == 4


def test_count_table_and_majority_decoder():
    xs = np.array([[0, 1], [0, 0], [1, 1]])
    ys = np.array([0, 0, 1])
    ct = train_count_table(MultiViewDataset(xs, ys), 2, 2)
    assert ct.counts.tolist() == [[3, 0], [1, 2]]
    assert ct.predict(xs).tolist() == [[0, 1], [0, 0], [1, 1]]
    rep, dec = ct.representation()
    assert dec.tables.tolist() == [[0, 1]]
    xs1 = np.array([[0], [0], [1]])
    rec = majority_reconstruction(rep, MultiViewDataset(xs1, ys), 2)
    assert rec.tables.tolist() == [[0, 1]]
