"""Gács–Körner common information and disentanglement scores.

The common part of several views is the finest variable that every view can
compute on its own. On a finite joint it is read off the connected components
of the support hypergraph: two symbols belong together whenever they co-occur
with positive probability.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .finite_info import (
    JointDistribution,
    conditional_entropy,
    entropy,
    mutual_information,
    total_correlation,
)

PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class CommonPartLabeling:
    """Per-view maps from symbols to common-part ids.

    ``labels[j][s]`` is the component of symbol ``s`` of view ``j``; pruned
    (null) symbols carry ``-1``.
    """

    views: tuple[str, ...]
    labels: tuple[np.ndarray, ...]
    value: float
    n_components: int
    status: str = "exact"
    notes: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "views": list(self.views),
            "labels": {v: [int(x) for x in lab] for v, lab in zip(self.views, self.labels)},
            "value": self.value,
            "n_components": self.n_components,
            "status": self.status,
            "notes": list(self.notes),
        }


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _views_of(joint: JointDistribution, views: Sequence[str] | None) -> list[str]:
    views = list(joint.names) if views is None else list(views)
    if len(views) < 2:
        raise ValidationError(f"common information needs at least 2 views, got {len(views)}")
    for v in views:
        joint.axis(v)
    return views


def _components(joint: JointDistribution, views: list[str]) -> tuple[list[np.ndarray], np.ndarray]:
    """Component labels per view and the component probability vector."""
    probs = joint.marginal(views)
    sizes = probs.shape
    alive = [joint.marginal(v) >= PRUNE_TOL for v in views]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    uf = _UnionFind(int(offsets[-1]))
    cells = np.argwhere(probs > 0)
    for cell in cells:
        if not all(alive[j][s] for j, s in enumerate(cell)):
            continue
        first = offsets[0] + int(cell[0])
        for j in range(1, len(views)):
            uf.union(first, int(offsets[j] + cell[j]))
    # ids in first-occurrence order of view-1 symbols
    root_id: dict[int, int] = {}
    for s in range(sizes[0]):
        if alive[0][s]:
            r = uf.find(int(offsets[0] + s))
            root_id.setdefault(r, len(root_id))
    labels = []
    for j in range(len(views)):
        lab = np.full(sizes[j], -1, dtype=np.int64)
        for s in range(sizes[j]):
            if alive[j][s]:
                lab[s] = root_id[uf.find(int(offsets[j] + s))]
        labels.append(lab)
    p1 = joint.marginal(views[0])
    comp = np.zeros(len(root_id))
    np.add.at(comp, labels[0][labels[0] >= 0], p1[labels[0] >= 0])
    return labels, comp


def gk_common_information(joint: JointDistribution, views: Sequence[str] | None = None) -> CommonPartLabeling:
    """Maximal-entropy common part of the views (Gács–Körner)."""
    views = _views_of(joint, views)
    labels, comp = _components(joint, views)
    p = comp[comp > 0]
    value = float(-np.dot(p, np.log(p))) if p.size else 0.0
    return CommonPartLabeling(tuple(views), tuple(labels), max(value, 0.0), len(comp))


def _view_code_joint(joint: JointDistribution, view: str, lab: np.ndarray) -> JointDistribution:
    """Joint of (X^(j), C) for the deterministic labeling ``lab``."""
    px = joint.marginal(view)
    safe = np.where(lab >= 0, lab, 0)
    t = np.zeros((px.size, int(safe.max()) + 1))
    t[np.arange(px.size), safe] = px
    ax = joint.axes[joint.axis(view)]
    return JointDistribution([ax, ("__C", t.shape[1])], t, renormalize=True)


def multiview_common_information(joint: JointDistribution, views: Sequence[str] | None = None,
                                 budget: int = 100_000, allow_fallback: bool = True) -> CommonPartLabeling:
    """Maximize I(X^(j); C) over deterministic agreeing function tuples.

    Enumerates every labeling of the first view's live symbols (the other
    views' functions are then forced on the support, so this covers the whole
    agreeing function space). Above ``budget`` labelings the component
    construction is used instead, which attains the same deterministic optimum.
    Stochastic encoders are not searched.
    """
    views = _views_of(joint, views)
    notes = ["stochastic encoders not searched; value is the deterministic optimum"]
    alive = [np.flatnonzero(joint.marginal(v) >= PRUNE_TOL) for v in views]
    k = min(len(a) for a in alive)
    space = k ** len(alive[0]) if k > 0 else 1
    if space > budget:
        gk = gk_common_information(joint, views)
        status = "gk-construction" if allow_fallback else "approximate-only"
        notes.append(f"function space {space} exceeds budget {budget}")
        if status == "gk-construction":
            _check_view_equivalence(joint, views, gk.labels)
        return CommonPartLabeling(gk.views, gk.labels, gk.value, gk.n_components, status, tuple(notes))

    probs = joint.marginal(views)
    live = [set(a.tolist()) for a in alive]
    support = [tuple(int(s) for s in c) for c in np.argwhere(probs > 0)
               if all(int(c[j]) in live[j] for j in range(len(views)))]
    p1 = joint.marginal(views[0])
    best_val, best_labels = -1.0, None
    for assign in itertools.product(range(k), repeat=len(alive[0])):
        f = [np.full(joint.size(v), -1, dtype=np.int64) for v in views]
        f[0][alive[0]] = assign
        ok = True
        for cell in support:
            c = f[0][cell[0]]
            for j in range(1, len(views)):
                cur = f[j][cell[j]]
                if cur == -1:
                    f[j][cell[j]] = c
                elif cur != c:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        dist = np.zeros(k)
        np.add.at(dist, f[0][alive[0]], p1[alive[0]])
        q = dist[dist > 0]
        val = float(-np.dot(q, np.log(q)))
        if val > best_val + 1e-15:
            best_val, best_labels = val, f
    labels = _relabel(best_labels)
    _check_view_equivalence(joint, views, labels)
    n = int(labels[0].max()) + 1 if labels[0].size else 0
    return CommonPartLabeling(tuple(views), tuple(labels), max(best_val, 0.0), n, "exact", tuple(notes))


def _relabel(labels: list[np.ndarray]) -> list[np.ndarray]:
    order: dict[int, int] = {}
    for v in labels[0]:
        if v >= 0:
            order.setdefault(int(v), len(order))
    return [np.array([order.get(int(v), -1) if v >= 0 else -1 for v in lab], dtype=np.int64) for lab in labels]


def _check_view_equivalence(joint: JointDistribution, views: list[str], labels) -> None:
    """I(X^(i); C) must agree across views for an a.s.-agreeing C."""
    vals = []
    for v, lab in zip(views, labels):
        vals.append(mutual_information(_view_code_joint(joint, v, lab), v, "__C"))
    if max(vals) - min(vals) > 1e-12:
        raise ValidationError(f"common part is not view-invariant: I(X^(j);C) = {vals}")


def disentanglement_tc(joint: JointDistribution, common: str = "C", unique: Sequence[str] | None = None) -> float:
    """Total correlation TC(C, U^(1), ..., U^(m)); zero iff the parts are independent."""
    if unique is None:
        unique = [n for n in joint.names if n != common]
    names = [common, *unique]
    for n in names:
        joint.axis(n)
    if len(set(names)) != len(names):
        raise ValidationError("common and unique axes must be disjoint")
    sub = joint.marginal_dist(names)
    return total_correlation(sub, [[n] for n in names])


def common_information_decomposition(joint: JointDistribution, views: Sequence[str], common: str) -> dict:
    """Both sides of H(C) = sum_j I(X^(j); C) + H(C | X).

    The identity holds when the views are conditionally independent given C.
    """
    views = list(views)
    h_c = entropy(joint, common)
    mi = [mutual_information(joint, v, common) for v in views]
    h_c_given_x = conditional_entropy(joint, common, views)
    return {"h_c": h_c, "mi_terms": mi, "h_c_given_x": h_c_given_x,
            "rhs": math.fsum(mi) + h_c_given_x}
