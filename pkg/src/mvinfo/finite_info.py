"""Exact information measures over dense finite joint distributions.

Every quantity is in nats. A distribution is a dense probability tensor whose
axes carry names; measures take sets of axis names and marginalize the rest.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InfiniteDivergenceError, NumericalError, ValidationError

MAX_CELLS = 10**7
SUM_TOL = 1e-9
CLAMP_TOL = 1e-12

AxisSet = str | Iterable[str]


@dataclass(frozen=True)
class Alphabet:
    name: str
    size: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValidationError(f"axis name must be a nonempty string, got {self.name!r}")
        if int(self.size) != self.size or self.size < 1:
            raise ValidationError(f"axis {self.name!r}: size must be a positive integer, got {self.size}")


class JointDistribution:
    """Probability tensor over an ordered list of named finite axes.

    ``probs`` may be given flat (row-major over ``axes``) or already shaped.
    The stored tensor is read-only; instances are safe to share.
    """

    __slots__ = ("axes", "probs", "_index")

    def __init__(self, axes: Sequence[Alphabet], probs, renormalize: bool = False):
        axes = tuple(a if isinstance(a, Alphabet) else Alphabet(*a) for a in axes)
        if not axes:
            raise ValidationError("a distribution needs at least one axis")
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise ValidationError(f"axis names must be unique, got {names}")
        shape = tuple(a.size for a in axes)
        cells = math.prod(shape)
        if cells > MAX_CELLS:
            raise ValidationError(f"product space has {cells} cells, above the dense cap {MAX_CELLS}")
        arr = np.array(probs, dtype=np.float64)
        if arr.size != cells:
            raise ValidationError(f"probs has {arr.size} entries, axes require {cells}")
        arr = arr.reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise ValidationError("probs contains non-finite entries")
        if np.any(arr < 0):
            raise ValidationError("probs contains negative entries")
        total = float(arr.sum())
        if renormalize:
            if total <= 0:
                raise ValidationError("cannot renormalize an all-zero tensor")
            arr = arr / total
        elif abs(total - 1.0) > SUM_TOL:
            raise ValidationError(f"probs sum to {total!r}, not 1 within {SUM_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "probs", arr)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __setattr__(self, key, value):
        raise AttributeError("JointDistribution is immutable")

    def __repr__(self):
        axes = ", ".join(f"{a.name}:{a.size}" for a in self.axes)
        return f"JointDistribution({axes})"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    def axis(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValidationError(f"unknown axis {name!r}; have {list(self.names)}") from None

    def size(self, name: str) -> int:
        return self.axes[self.axis(name)].size

    def marginal(self, names: AxisSet) -> np.ndarray:
        """Marginal tensor over ``names``, axes in the order given."""
        names = _as_names(names)
        idx = [self.axis(n) for n in names]
        drop = tuple(i for i in range(len(self.axes)) if i not in idx)
        m = self.probs.sum(axis=drop) if drop else self.probs
        kept = sorted(idx)
        return np.transpose(m, [kept.index(i) for i in idx])

    def marginal_dist(self, names: AxisSet) -> "JointDistribution":
        names = _as_names(names)
        m = self.marginal(names)
        return JointDistribution([self.axes[self.axis(n)] for n in names], m, renormalize=True)

    def map_axis(self, name: str, mapping: Sequence[int], new_size: int | None = None,
                 new_name: str | None = None) -> "JointDistribution":
        """Push the distribution through a deterministic map of one axis."""
        i = self.axis(name)
        mapping = np.asarray(mapping, dtype=np.int64)
        if mapping.shape != (self.axes[i].size,):
            raise ValidationError(f"mapping for axis {name!r} must have length {self.axes[i].size}")
        k = int(new_size if new_size is not None else mapping.max() + 1)
        if mapping.min() < 0 or mapping.max() >= k:
            raise ValidationError("mapping values out of range")
        moved = np.moveaxis(self.probs, i, 0)
        out = np.zeros((k,) + moved.shape[1:])
        np.add.at(out, mapping, moved)
        out = np.moveaxis(out, 0, i)
        axes = list(self.axes)
        axes[i] = Alphabet(new_name or name, k)
        return JointDistribution(axes, out, renormalize=True)

    @classmethod
    def product(cls, *dists: "JointDistribution") -> "JointDistribution":
        axes = [a for d in dists for a in d.axes]
        t = dists[0].probs
        for d in dists[1:]:
            t = np.multiply.outer(t, d.probs)
        return cls(axes, t, renormalize=True)

    def to_json(self) -> dict:
        return {
            "axes": [{"name": a.name, "size": a.size} for a in self.axes],
            "probs": [float(v) for v in self.probs.ravel()],
        }

    @classmethod
    def from_json(cls, doc: dict, renormalize: bool = False) -> "JointDistribution":
        try:
            axes = [Alphabet(str(a["name"]), int(a["size"])) for a in doc["axes"]]
            probs = doc["probs"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"distribution document missing field: {exc}") from None
        return cls(axes, probs, renormalize=renormalize)


def load_distribution(path: str | Path, renormalize: bool = False) -> JointDistribution:
    with open(path) as fh:
        return JointDistribution.from_json(json.load(fh), renormalize=renormalize)


def save_distribution(dist: JointDistribution, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(dist.to_json(), fh, indent=2)


def _as_names(names: AxisSet) -> list[str]:
    if isinstance(names, str):
        return [names]
    out = list(dict.fromkeys(names))
    return out


def _check_nonempty(names: list[str], role: str) -> None:
    if not names:
        raise ValidationError(f"{role} axis set is empty")


def _check_disjoint(*groups: list[str]) -> None:
    seen: set[str] = set()
    for g in groups:
        overlap = seen.intersection(g)
        if overlap:
            raise ValidationError(f"axis sets overlap on {sorted(overlap)}")
        seen.update(g)


def _clamp(value: float, what: str) -> float:
    if value < 0:
        if value >= -CLAMP_TOL:
            return 0.0
        raise NumericalError(f"{what} evaluated to {value!r} < 0")
    return value


def _h(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.dot(p, np.log(p)))


def entropy(dist: JointDistribution, target_axes: AxisSet) -> float:
    """Shannon entropy of the marginal on ``target_axes``."""
    names = _as_names(target_axes)
    _check_nonempty(names, "target")
    return _h(dist.marginal(names).ravel())


def renyi_entropy(dist: JointDistribution, target_axes: AxisSet, alpha: float) -> float:
    """Rényi entropy of order ``alpha`` (``alpha > 0``, ``alpha != 1``)."""
    names = _as_names(target_axes)
    _check_nonempty(names, "target")
    return renyi_from_probs(dist.marginal(names).ravel(), alpha)


def renyi_from_probs(p: np.ndarray, alpha: float) -> float:
    if not alpha > 0:
        raise ValidationError(f"Rényi order must be positive, got {alpha}")
    if abs(alpha - 1.0) <= 1e-9:
        raise ValidationError("Rényi order within 1e-9 of 1; use entropy()")
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    logp = np.log(p)
    if abs(alpha - 1.0) < 1e-6:
        # second-order expansion about alpha = 1 avoids 0/0 cancellation
        h = float(-np.dot(p, logp))
        var = float(np.dot(p, (logp + h) ** 2))
        return max(h - 0.5 * (alpha - 1.0) * var, 0.0)
    val = float(logsumexp(alpha * logp)) / (1.0 - alpha)
    return max(val, 0.0)


def conditional_entropy(dist: JointDistribution, target_axes: AxisSet, given_axes: AxisSet) -> float:
    target, given = _as_names(target_axes), _as_names(given_axes)
    _check_nonempty(target, "target")
    _check_disjoint(target, given)
    if not given:
        return entropy(dist, target)
    return _clamp(entropy(dist, target + given) - entropy(dist, given), "conditional entropy")


def kl_divergence(p: JointDistribution, q: JointDistribution) -> float:
    if p.axes != q.axes:
        raise ValidationError("KL needs identical axes on both distributions")
    pp, qq = p.probs.ravel(), q.probs.ravel()
    support = pp > 0
    bad = support & (qq <= 0)
    if np.any(bad):
        first = np.unravel_index(int(np.flatnonzero(bad)[0]), p.shape)
        raise InfiniteDivergenceError(f"infinite divergence: q = 0 < p at cell {tuple(int(i) for i in first)}")
    val = float(np.dot(pp[support], np.log(pp[support] / qq[support])))
    return _clamp(val, "KL divergence")


def mutual_information(dist: JointDistribution, axes_a: AxisSet, axes_b: AxisSet) -> float:
    a, b = _as_names(axes_a), _as_names(axes_b)
    _check_nonempty(a, "first")
    _check_nonempty(b, "second")
    _check_disjoint(a, b)
    val = entropy(dist, a) + entropy(dist, b) - entropy(dist, a + b)
    return _clamp(val, "mutual information")


def conditional_mutual_information(dist: JointDistribution, axes_a: AxisSet, axes_b: AxisSet,
                                   given_axes: AxisSet) -> float:
    a, b, g = _as_names(axes_a), _as_names(axes_b), _as_names(given_axes)
    _check_nonempty(a, "first")
    _check_nonempty(b, "second")
    _check_disjoint(a, b, g)
    if not g:
        return mutual_information(dist, a, b)
    val = entropy(dist, a + g) + entropy(dist, b + g) - entropy(dist, a + b + g) - entropy(dist, g)
    return _clamp(val, "conditional mutual information")


def total_correlation(dist: JointDistribution, axis_partition: Sequence[AxisSet]) -> float:
    """Sum of block entropies minus the joint entropy.

    The partition must cover every axis of ``dist`` exactly once.
    """
    blocks = [_as_names(b) for b in axis_partition]
    if len(blocks) < 2:
        raise ValidationError("total correlation needs at least two blocks")
    for b in blocks:
        _check_nonempty(b, "partition block")
    _check_disjoint(*blocks)
    covered = {n for b in blocks for n in b}
    missing = set(dist.names) - covered
    if missing:
        raise ValidationError(f"partition does not cover axes {sorted(missing)}")
    for n in covered:
        dist.axis(n)
    val = sum(entropy(dist, b) for b in blocks) - entropy(dist, list(dist.names))
    return _clamp(val, "total correlation")


def nats_to_bits(x: float) -> float:
    return x / math.log(2.0)
