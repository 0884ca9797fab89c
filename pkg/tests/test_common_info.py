import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import random_joint
from mvinfo import finite_info as fi
from mvinfo.common_info import (common_information_decomposition, disentanglement_tc, gk_common_information,
                                multiview_common_information)
from mvinfo.errors import ValidationError
from mvinfo.finite_info import Alphabet, JointDistribution


def views(probs, names=("X1", "X2", "X3", "X4")):
    probs = np.asarray(probs, dtype=float)
    return JointDistribution([Alphabet(n, s) for n, s in zip(names, probs.shape)], probs)


def block_diagonal():
    j = np.zeros((4, 4))
    j[:2, :2] = 0.125
    j[2:, 2:] = 0.125
    return j


def test_block_diagonal_example():
    j = block_diagonal()
    lab = gk_common_information(views(j))
    assert lab.value == pytest.approx(math.log(2), abs=1e-15)
    assert lab.n_components == 2
    assert lab.labels[0].tolist() == [0, 0, 1, 1]
    v, part = oracles.gk_brute_force(j)
    assert v == pytest.approx(math.log(2), abs=1e-15)
    assert part == ((0, 1), (2, 3))


def test_connected_support_gives_zero():
    lab = gk_common_information(views([[0.4, 0.1], [0.1, 0.4]]))
    assert lab.value == 0.0
    assert lab.n_components == 1


def test_identical_views():
    for k in (2, 3, 4):
        lab = gk_common_information(views(np.eye(k) / k))
        assert lab.value == pytest.approx(math.log(k), abs=1e-12)


def test_needs_two_views():
    with pytest.raises(ValidationError, match="at least 2 views"):
        gk_common_information(views([0.5, 0.5]))
    with pytest.raises(ValidationError):
        gk_common_information(views([[0.5, 0], [0, 0.5]]), ["X1"])


def test_null_symbols_are_pruned():
    j = np.zeros((3, 3))
    j[0, 0] = j[1, 1] = 0.5
    lab = gk_common_information(views(j))
    assert lab.labels[0][2] == -1 and lab.labels[1][2] == -1
    assert lab.value == pytest.approx(math.log(2))


def test_first_occurrence_labels():
    j = np.zeros((3, 3))
    j[0, 2] = j[1, 0] = j[2, 1] = 1 / 3
    lab = gk_common_information(views(j))
    assert lab.labels[0].tolist() == [0, 1, 2]
    assert lab.labels[1].tolist() == [1, 2, 0]


def test_multiview_deterministic_matches_gk(rng):
    for _ in range(30):
        j = random_joint(rng, (3, 3), zero_frac=0.6)
        d = views(j)
        mv = multiview_common_information(d)
        assert mv.status == "exact"
        assert mv.value == pytest.approx(gk_common_information(d).value, abs=1e-12)


def test_multiview_examples():
    t = np.zeros((4, 4, 4))
    for k in range(4):
        t[k, k, k] = 0.25
    assert multiview_common_information(views(t)).value == pytest.approx(math.log(4), abs=1e-12)
    ind = np.multiply.outer([0.3, 0.7], [0.5, 0.5])
    assert multiview_common_information(views(ind)).value == 0.0


def test_multiview_budget_fallback():
    d = views(np.eye(4) / 4)
    lab = multiview_common_information(d, budget=10)
    assert lab.status == "gk-construction"
    assert lab.value == pytest.approx(math.log(4))
    assert any("stochastic" in n for n in lab.notes)
    strict = multiview_common_information(d, budget=10, allow_fallback=False)
    assert strict.status == "approximate-only"


def test_disentanglement_examples(rng):
    ind = np.multiply.outer(np.multiply.outer([0.5, 0.5], [0.2, 0.8]), [0.6, 0.4])
    d = JointDistribution([Alphabet("C", 2), Alphabet("U1", 2), Alphabet("U2", 2)], ind)
    assert disentanglement_tc(d) == pytest.approx(0.0, abs=1e-12)
    dup = np.zeros((2, 2, 2))
    dup[0, 0, :] = 0.25
    dup[1, 1, :] = 0.25
    d = JointDistribution([Alphabet("C", 2), Alphabet("U1", 2), Alphabet("U2", 2)], dup)
    assert disentanglement_tc(d) == pytest.approx(math.log(2), abs=1e-12)
    r = random_joint(rng, (2, 2, 2), zero_frac=0.0)
    d = JointDistribution([Alphabet("C", 2), Alphabet("U1", 2), Alphabet("U2", 2)], r)
    assert disentanglement_tc(d) == pytest.approx(fi.total_correlation(d, [["C"], ["U1"], ["U2"]]), abs=1e-12)
    with pytest.raises(ValidationError):
        disentanglement_tc(d, "C", ["U9"])


def test_decomposition_identity(rng):
    # C = (C1, C2) with independent parts and view j a noisy channel of C_j only
    p1, p2 = random_joint(rng, (2,), 0.0), random_joint(rng, (3,), 0.0)
    ch1, ch2 = rng.random((2, 3)), rng.random((3, 2))
    ch1 /= ch1.sum(axis=1, keepdims=True)
    ch2 /= ch2.sum(axis=1, keepdims=True)
    t = np.einsum("a,b,ax,by->abxy", p1, p2, ch1, ch2).reshape(6, 3, 2)
    d = JointDistribution([Alphabet("C", 6), Alphabet("X1", 3), Alphabet("X2", 2)], t)
    out = common_information_decomposition(d, ["X1", "X2"], "C")
    assert out["rhs"] == pytest.approx(out["h_c"], abs=1e-9)
    # conditional independence alone is not enough: two exact copies of C double-count
    copy = np.zeros((2, 2, 2))
    copy[0, 0, 0] = copy[1, 1, 1] = 0.5
    d = JointDistribution([Alphabet("C", 2), Alphabet("X1", 2), Alphabet("X2", 2)], copy)
    out = common_information_decomposition(d, ["X1", "X2"], "C")
    assert out["rhs"] == pytest.approx(2 * out["h_c"])


@st.composite
def two_view(draw):
    a = draw(st.integers(1, 4))
    b = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    return random_joint(rng, (a, b), zero_frac=draw(st.floats(0.2, 0.85)))


@given(two_view())
def test_gk_equals_brute_force(j):
    lab = gk_common_information(views(j))
    v, part = oracles.gk_brute_force(j)
    assert oracles.partition_of(lab.labels[0], j.sum(axis=1)) == part
    assert abs(lab.value - v) <= 1e-15


@given(two_view())
def test_gk_properties(j):
    d = views(j)
    lab = gk_common_information(d)
    assert lab.value <= min(fi.entropy(d, "X1"), fi.entropy(d, "X2")) + 1e-12
    # labels agree on the support
    for x1, x2 in np.argwhere(j > 0):
        assert lab.labels[0][x1] == lab.labels[1][x2]
    # merging two symbols of one component leaves the value unchanged
    comp0 = [x for x in range(j.shape[0]) if lab.labels[0][x] == 0]
    if len(comp0) >= 2:
        k = j.shape[0]
        mapping = list(range(k))
        mapping[comp0[1]] = comp0[0]
        merged = d.map_axis("X1", mapping, new_size=k)
        assert gk_common_information(merged).value == pytest.approx(lab.value, abs=1e-12)
