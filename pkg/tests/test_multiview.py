import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mvinfo.errors import LemmaViolation, RegimeError, ValidationError
from mvinfo.experiments.generators import GeneratorSpec, build_model
from mvinfo.multiview import (Decoder, GenerativeModel, LooPlan, MultiViewDataset, RepresentationFunction,
                              SupersamplePlan, TableMap, delta_loo, delta_loo_from_losses, delta_sup,
                              delta_sup_enumeration, delta_sup_from_differences, generalization_gap,
                              load_dataset, load_model, loss_envelope, paired_loss_differences, population_risk,
                              samplewise_losses, save_json, sensitivity, typical_epsilon, typical_set)


def identity_rep(x_card, m):
    return RepresentationFunction(x_card, 1, np.tile(np.arange(x_card), (m, 1)), np.zeros((m, x_card)))


def single_view_model(p_v, p_y=(1.0,)):
    """``x = v`` for a single nuisance coordinate."""
    k = len(p_v)
    table = np.tile(np.arange(k), (len(p_y), 1))
    return GenerativeModel(np.array(p_y), np.array(p_v), (TableMap(table),), k, 1)


def xor_model(flip, m=2):
    return build_model(GeneratorSpec(kind="xor_flip", m=m, flip=flip))


# ---------------------------------------------------------------- model and representation

def test_model_validation():
    with pytest.raises(ValidationError):
        GenerativeModel(np.array([0.5, 0.6]), np.array([1.0]), (TableMap(np.zeros((2, 1))),), 1, 1)
    with pytest.raises(ValidationError, match="table shape"):
        GenerativeModel(np.array([0.5, 0.5]), np.array([1.0]), (TableMap(np.zeros((3, 1))),), 1, 1)
    with pytest.raises(ValidationError, match="outside"):
        GenerativeModel(np.array([1.0]), np.array([1.0]), (TableMap(np.full((1, 1), 5)),), 2, 1)
    with pytest.raises(ValidationError):
        GenerativeModel(np.array([1.0]), np.array([1.0]), (), 1, 1)


def test_representation_validation():
    with pytest.raises(ValidationError):
        RepresentationFunction(2, 1, np.array([[0, 2]]), np.array([[0, 0]]))
    with pytest.raises(ValidationError, match="sum to 1"):
        RepresentationFunction(2, 1, kernels=np.full((1, 2, 2, 1), 0.6))
    rep = RepresentationFunction(2, 2, kernels=np.full((1, 3, 2, 2), 0.25))
    assert not rep.deterministic
    assert rep.code_kernels.shape == (1, 3, 4)
    with pytest.raises(ValidationError):
        rep.codes(np.zeros((1, 1), dtype=int))


def test_view_conditionals_xor():
    model = xor_model(0.1)
    pc = model.view_conditionals
    assert pc.shape == (2, 2, 2)
    assert pc[0, 0].tolist() == pytest.approx([0.9, 0.1])
    assert pc[1, 1].tolist() == pytest.approx([0.1, 0.9])


def test_json_round_trips(tmp_path):
    model = build_model(GeneratorSpec(m=2, flip=0.1, v_card=3, d=2))
    save_json(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.view_conditionals, model.view_conditionals)
    xs, ys = model.sample(7, np.random.default_rng(0))
    ds = MultiViewDataset(xs, ys, model.d, 3)
    save_json(ds, tmp_path / "d.json")
    ds2 = load_dataset(tmp_path / "d.json")
    assert np.array_equal(ds2.xs, ds.xs) and np.array_equal(ds2.ys, ds.ys) and ds2.seed == 3
    assert json.loads((tmp_path / "d.json").read_text())["samples"][0].keys() == {"x", "y"}
    rep = RepresentationFunction(2, 2, kernels=np.full((1, 3, 2, 2), 0.25))
    assert np.array_equal(RepresentationFunction.from_json(rep.to_json()).kernels, rep.kernels)
    dec = Decoder("cls", [[0, 1, 1, 0]])
    assert Decoder.from_json(dec.to_json()).tables.tolist() == [[0, 1, 1, 0]]
    with pytest.raises(ValidationError):
        MultiViewDataset.from_json({"m": 2})


# ---------------------------------------------------------------- sensitivity and typical sets

def test_sensitivity_examples():
    model = single_view_model([0.5, 0.5])
    assert sensitivity(model, identity_rep(2, 1))[0] == 0.0
    const = RepresentationFunction(1, 1, np.zeros((1, 2)), np.zeros((1, 2)))
    assert sensitivity(model, const)[0] == 0.0
    skew = single_view_model([0.75, 0.25])
    c, per = sensitivity(skew, identity_rep(2, 1))
    assert c == pytest.approx(math.log(3), abs=1e-12)
    assert per[0] == pytest.approx(1.098612, abs=1e-6)


def swap_oracle(p_v):
    """sup over pairs of nuisance values of |log p_z - log p_z'| for the identity code."""
    return max(abs(math.log(a) - math.log(b)) for a, b in itertools.product(p_v, p_v))


def test_typical_set_skewed_matches_threshold_oracle():
    p_v = [0.9, 0.05, 0.05]
    model = single_view_model(p_v)
    rep = identity_rep(3, 1)
    ts = typical_set(model, rep, 1.0, 100, 1)
    c = swap_oracle(p_v)
    eps = c * math.sqrt(math.log(math.sqrt(100) / 1.0) / 2)
    assert ts.epsilon == pytest.approx(eps, abs=1e-12)
    h = -math.fsum(p * math.log(p) for p in p_v)
    want = [(0, z, z) for z in range(3) if -math.log(p_v[z]) - h <= eps]
    assert list(ts.members) == want
    assert ts.complement_mass <= 1 / math.sqrt(100)


def test_typical_set_uniform_and_small_gamma():
    model = single_view_model([0.25] * 4)
    ts = typical_set(model, identity_rep(4, 1), 1.0, 50, 2)
    assert len(ts.members) == 4 and ts.complement_mass == 0.0
    skew = single_view_model([0.7, 0.2, 0.1])
    tiny = typical_set(skew, identity_rep(3, 1), 1e-8, 4, 1)
    assert len(tiny.members) == 3


def test_typical_set_vacuous_regime():
    with pytest.raises(RegimeError, match="vacuous"):
        typical_epsilon(1.0, 1, 1, 1, 2.0)
    with pytest.raises(ValidationError):
        typical_epsilon(1.0, 1, 1, 1, 0.0)


def test_typical_set_strict_flags_nonprovable_case():
    # two labels with different code laws: the unconditional lemma is not a theorem
    p_y = np.array([0.5, 0.5])
    table = np.array([[0, 0, 0, 1], [2, 2, 2, 3]])
    model = GenerativeModel(p_y, np.array([0.97, 0.01, 0.01, 0.01]), (TableMap(table),), 4, 1)
    rep = identity_rep(4, 1)
    loose = typical_set(model, rep, 0.99, 100, 1, strict=False)
    assert loose.complement_mass >= 0
    for y in (0, 1):
        ts = typical_set(model, rep, 1.0, 100, 1, conditioned_on=y)
        assert ts.complement_mass <= ts.mass_bound + 1e-12


# ---------------------------------------------------------------- risks and gaps

def test_gap_hand_enumerated_toy():
    flip = 0.2
    model = xor_model(flip)
    xs = np.array([[0, 0], [0, 1], [1, 1], [1, 1], [0, 0], [1, 0], [0, 0], [1, 1]])
    ys = np.array([0, 0, 1, 1, 0, 1, 1, 0])
    ds = MultiViewDataset(xs, ys)
    rep = identity_rep(2, 2)
    # majority label per symbol pooled over views, ties to the lowest label
    counts = np.zeros((2, 2))
    for j in range(2):
        for x, y in zip(xs[:, j], ys):
            counts[x, y] += 1
    table = np.argmax(counts, axis=1)
    dec = Decoder("cls", table[None, :])
    emp = np.mean([np.mean([table[x] != y for x in row]) for row, y in zip(xs, ys)])
    pop = 0.0
    for y, v in itertools.product((0, 1), (0, 1)):
        p = 0.5 * (flip if v else 1 - flip)
        pop += p * (table[y ^ v] != y)
    g = generalization_gap(model, rep, dec, ds, "cls")
    assert g.empirical == pytest.approx(emp, abs=1e-12)
    assert g.population == pytest.approx(pop, abs=1e-12)
    assert g.gap == pytest.approx(pop - emp, abs=1e-12)
    with pytest.raises(ValidationError):
        generalization_gap(model, rep, dec, ds, "rec")


def test_gap_zero_on_exact_frequencies():
    model = xor_model(0.25, m=1)
    xs = np.array([[0], [0], [0], [1], [1], [1], [1], [0]])
    ys = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    dec = Decoder("cls", [[0, 1]])
    g = generalization_gap(model, identity_rep(2, 1), dec, MultiViewDataset(xs, ys), "cls")
    assert g.gap == pytest.approx(0.0, abs=1e-15)


def test_identity_round_trip_reconstruction():
    model = build_model(GeneratorSpec(m=2, v_card=2, d=2))
    rep = identity_rep(model.x_card, 2)
    dec = Decoder("rec", np.tile(np.arange(model.x_card), (2, 1)))
    xs, ys = model.sample(20, np.random.default_rng(1))
    g = generalization_gap(model, rep, dec, MultiViewDataset(xs, ys), "rec")
    assert g.empirical == 0.0 and g.population == 0.0


def test_population_independent_of_dataset():
    model = xor_model(0.1)
    rep, dec = identity_rep(2, 2), Decoder("cls", [[0, 1]])
    a = generalization_gap(model, rep, dec, MultiViewDataset(*model.sample(5, np.random.default_rng(0))), "cls")
    b = generalization_gap(model, rep, dec, MultiViewDataset(*model.sample(9, np.random.default_rng(1))), "cls")
    assert a.population == b.population == pytest.approx(0.1)


def test_losses_and_envelope():
    model = build_model(GeneratorSpec(m=2, flip=0.1, v_card=3, d=2))
    rep = identity_rep(model.x_card, 2)
    rec = Decoder("rec", np.tile(np.arange(model.x_card)[::-1], (2, 1)))
    cls = Decoder("cls", np.tile(np.arange(model.x_card) // 8, (2, 1)))
    xs, ys = model.sample(30, np.random.default_rng(2))
    ds = MultiViewDataset(xs, ys)
    env = loss_envelope(model, rep, ds, rec=rec, cls=cls)
    assert env.r_x == 1.0 and env.r_xy == 1.0
    for dec, r in ((rec, env.rs_x), (cls, env.rs_xy)):
        sw = samplewise_losses(rep, dec, xs, ys, y_card=2)
        assert np.all(sw >= 0) and np.all(sw <= r + 1e-15)
    sq = loss_envelope(model, rep, ds, rec=rec, rec_loss="squared")
    sw = samplewise_losses(rep, rec, xs, ys, loss="squared")
    assert sw.max() <= sq.rs_x <= sq.r_x <= (model.x_card - 1) ** 2
    assert loss_envelope(model, rep, ds).r_xy == 0.0
    with pytest.raises(ValidationError):
        samplewise_losses(rep, cls, np.zeros((2, 3), dtype=int), np.zeros(2, dtype=int))
    with pytest.raises(ValidationError):
        samplewise_losses(rep, rec, xs, ys, loss="hinge")


def test_monte_carlo_flag():
    model = xor_model(0.1)
    rep, dec = identity_rep(2, 2), Decoder("cls", [[0, 1]])
    risk, method, se = population_risk(model, rep, dec)
    assert method == "exact" and se == 0.0


# ---------------------------------------------------------------- validation errors

def test_delta_loo_examples():
    assert delta_loo_from_losses([0.3, 0.3, 0.3], 1) == pytest.approx(0.0, abs=1e-15)
    assert delta_loo_from_losses([0, 1, 0, 0], 1) == 1.0
    assert delta_loo_from_losses([0.2, 0.8, 0.5], 1) == pytest.approx(0.45, abs=1e-15)
    with pytest.raises(ValidationError):
        delta_loo_from_losses([0.5], 0)


def test_delta_loo_plan():
    xs = np.array([[0], [1], [1]])
    ys = np.array([0, 0, 1])
    plan = LooPlan(MultiViewDataset(xs, ys), 1)
    assert plan.n == 2 and plan.train().n == 2
    val = delta_loo(plan, identity_rep(2, 1), Decoder("cls", [[0, 1]]), y_card=2)
    assert val == pytest.approx(1.0 - 0.0)
    with pytest.raises(ValidationError):
        LooPlan(MultiViewDataset(xs, ys), 3)


def test_delta_sup_examples():
    assert delta_sup_from_differences([0.4, -0.2], [0, 1]) == pytest.approx(0.3, abs=1e-15)
    assert delta_sup_from_differences([0.0, 0.0, 0.0], [1, 0, 1]) == 0.0
    with pytest.raises(ValidationError):
        delta_sup_from_differences([0.1, 0.2], [0])


def test_delta_sup_plan_matches_signed_sum(rng):
    model = build_model(GeneratorSpec(m=2, flip=0.1, v_card=3, d=2))
    n = 6
    xs, ys = model.sample(2 * n, rng)
    xs, ys = xs.reshape(n, 2, 2), ys.reshape(n, 2)
    bits = rng.integers(0, 2, size=n)
    plan = SupersamplePlan(xs, ys, bits)
    rep = identity_rep(model.x_card, 2)
    dec = Decoder("cls", np.tile(np.arange(model.x_card) // 8, (2, 1)))
    test = samplewise_losses(rep, dec, plan.side(True).xs, plan.side(True).ys, y_card=2)
    train = samplewise_losses(rep, dec, plan.side(False).xs, plan.side(False).ys, y_card=2)
    assert delta_sup(plan, rep, dec, y_card=2) == pytest.approx(test.mean() - train.mean(), abs=1e-14)
    with pytest.raises(ValidationError):
        SupersamplePlan(xs, ys, bits[:-1])


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=10), st.data())
def test_delta_sup_antisymmetric_and_enumeration(diffs, data):
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(diffs), max_size=len(diffs))))
    a = delta_sup_from_differences(diffs, bits)
    b = delta_sup_from_differences(diffs, 1 - bits)
    assert a == -b
    mean, vals = delta_sup_enumeration(np.array(diffs))
    assert mean == 0.0
    assert len(vals) == 2 ** len(diffs)


def test_enumeration_limit():
    with pytest.raises(ValidationError):
        delta_sup_enumeration(np.zeros(21))


@given(st.integers(0, 2 ** 32 - 1))
def test_loo_bounded_by_envelope(seed):
    rng = np.random.default_rng(seed)
    model = build_model(GeneratorSpec(m=2, flip=0.1, v_card=3, d=2))
    n = int(rng.integers(2, 12))
    xs, ys = model.sample(n + 1, rng)
    ds = MultiViewDataset(xs, ys)
    rep = identity_rep(model.x_card, 2)
    dec = Decoder("cls", rng.integers(0, 2, size=(1, model.x_card)))
    env = loss_envelope(model, rep, ds, cls=dec)
    u = int(rng.integers(n + 1))
    val = delta_loo(LooPlan(ds, u), rep, dec, y_card=2)
    assert abs(val) <= (1 + 1 / n) * env.rs_xy + 1e-12


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, 3]), st.sampled_from([2, 3]))
def test_typical_set_lemma_on_provable_class(seed, d, v_card):
    # label-conditional code law, views sharing one map: the concentration lemma is a theorem here
    rng = np.random.default_rng(seed)
    base = build_model(GeneratorSpec(m=1, y_card=2, x_card=8, v_card=v_card, d=d, flip=0.0,
                                     table_seed=int(rng.integers(1000))))
    model = GenerativeModel(base.p_y, base.p_v, base.theta * 2, base.x_card, d)
    tab = rng.integers(0, 3, size=model.x_card)
    rep = RepresentationFunction(3, 1, np.tile(tab, (2, 1)), np.zeros((2, model.x_card)))
    y = int(rng.integers(2))
    n = int(rng.integers(1, 200))
    gamma = float(rng.uniform(0.05, 1.0))
    if math.log(math.sqrt(2 * n) / gamma) < 0:
        return
    ts = typical_set(model, rep, gamma, n, 2, conditioned_on=y)
    assert ts.complement_mass <= gamma / math.sqrt(2 * n) + 1e-12
    assert ts.n_codes <= math.exp(ts.entropy + ts.epsilon) * (1 + 1e-12)
