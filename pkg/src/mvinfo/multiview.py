"""Finite multi-view data model, representations, risks and validation errors.

A sample has a label ``y`` and ``m`` views. View ``j`` is produced as
``x^(j) = theta_j(y, v^(j))`` from ``d`` i.i.d. nuisance coordinates, and the
views are conditionally independent given ``y``. Each view is encoded into a
code ``z^(j) = (c, u^(j))``, flattened as ``c * u_card + u``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LemmaViolation, RegimeError, ValidationError

ENUM_LIMIT = 10**7
UNDERFLOW = 1e-300
LOSSES = ("zero_one", "squared", "absolute")
_CHUNK = 1 << 18


# ---------------------------------------------------------------- view maps

@dataclass(frozen=True, eq=False)
class TableMap:
    """theta as an explicit table indexed by ``(y, flat nuisance index)``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.int64)
        if t.ndim != 2:
            raise ValidationError("table view map must be 2-D (labels x nuisance vectors)")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def apply(self, y: np.ndarray, v: np.ndarray, v_card: int) -> np.ndarray:
        d = v.shape[1]
        flat = np.ravel_multi_index(tuple(v.T), (v_card,) * d) if d else np.zeros(len(y), dtype=np.int64)
        return self.table[y, flat]

    def to_json(self) -> dict:
        return {"type": "table", "table": self.table.tolist()}


@dataclass(frozen=True, eq=False)
class GaussianBinMap:
    """Bins ``mu[y] + sigma * mean_k q[v_k]`` with fixed interior edges."""

    mu: np.ndarray
    sigma: float
    q: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        for name in ("mu", "q", "edges"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def apply(self, y: np.ndarray, v: np.ndarray, v_card: int) -> np.ndarray:
        s = self.mu[y] + self.sigma * self.q[v].mean(axis=1)
        return np.searchsorted(self.edges, s, side="right").astype(np.int64)

    def to_json(self) -> dict:
        return {"type": "gaussian_bins", "mu": self.mu.tolist(), "sigma": float(self.sigma),
                "q": self.q.tolist(), "edges": self.edges.tolist()}


def _map_from_json(doc: dict):
    kind = doc.get("type")
    if kind == "table":
        return TableMap(np.asarray(doc["table"]))
    if kind == "gaussian_bins":
        return GaussianBinMap(np.asarray(doc["mu"]), float(doc["sigma"]), np.asarray(doc["q"]),
                              np.asarray(doc["edges"]))
    raise ValidationError(f"unknown view map type {kind!r}")


# ---------------------------------------------------------------- model

def _check_prob(p: np.ndarray, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValidationError(f"{what} must be a nonempty nonnegative vector")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{what} sums to {p.sum()!r}, not 1")
    p = p.copy()
    p.setflags(write=False)
    return p


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """Label prior, per-coordinate nuisance prior and one view map per view."""

    p_y: np.ndarray
    p_v: np.ndarray
    theta: tuple
    x_card: int
    d: int

    def __post_init__(self):
        object.__setattr__(self, "p_y", _check_prob(self.p_y, "label prior p_y"))
        object.__setattr__(self, "p_v", _check_prob(self.p_v, "nuisance prior p_v"))
        object.__setattr__(self, "theta", tuple(self.theta))
        if len(self.theta) < 1:
            raise ValidationError("model needs m >= 1 views")
        if self.d < 1:
            raise ValidationError("model needs d >= 1 nuisance coordinates")
        if self.x_card < 1:
            raise ValidationError("view alphabet must be nonempty")
        for j, t in enumerate(self.theta):
            if isinstance(t, TableMap):
                want = (self.y_card, self.v_card ** self.d)
                if t.table.shape != want:
                    raise ValidationError(f"view {j}: table shape {t.table.shape}, expected {want}")
                if t.table.min() < 0 or t.table.max() >= self.x_card:
                    raise ValidationError(f"view {j}: table symbols outside [0, {self.x_card})")

    @property
    def m(self) -> int:
        return len(self.theta)

    @property
    def y_card(self) -> int:
        return self.p_y.size

    @property
    def v_card(self) -> int:
        return self.p_v.size

    @property
    def v_space(self) -> int:
        return self.v_card ** self.d

    @property
    def enumerable(self) -> bool:
        return self.y_card * self.v_space <= ENUM_LIMIT

    def _require_enumerable(self, what: str) -> None:
        if not self.enumerable:
            raise ValidationError(f"{what} needs exact enumeration, but |Y|*|V| = "
                                  f"{self.y_card * self.v_space} exceeds {ENUM_LIMIT}")

    def nuisance_chunks(self):
        """Yield ``(flat_index, v, prob)`` over the whole nuisance space in chunks."""
        total = self.v_space
        shape = (self.v_card,) * self.d
        for start in range(0, total, _CHUNK):
            flat = np.arange(start, min(total, start + _CHUNK))
            v = np.stack(np.unravel_index(flat, shape), axis=1)
            yield flat, v, np.prod(self.p_v[v], axis=1)

    def view_symbols(self, j: int) -> np.ndarray:
        """``x`` for every ``(y, nuisance vector)``, shape ``(|Y|, |V|^d)``."""
        self._require_enumerable("view symbol table")
        out = np.empty((self.y_card, self.v_space), dtype=np.int64)
        for flat, v, _ in self.nuisance_chunks():
            for y in range(self.y_card):
                out[y, flat] = self.theta[j].apply(np.full(len(flat), y), v, self.v_card)
        return out

    @cached_property
    def nuisance_probs(self) -> np.ndarray:
        self._require_enumerable("nuisance probabilities")
        return np.concatenate([p for _, _, p in self.nuisance_chunks()])

    @cached_property
    def symbol_tables(self) -> tuple[np.ndarray, ...]:
        return tuple(self.view_symbols(j) for j in range(self.m))

    @cached_property
    def view_conditionals(self) -> np.ndarray:
        """``P(X^(j) = x | Y = y)`` with shape ``(m, |Y|, |X|)``."""
        self._require_enumerable("view conditionals")
        out = np.zeros((self.m, self.y_card, self.x_card))
        pv = self.nuisance_probs
        for j in range(self.m):
            sym = self.symbol_tables[j]
            for y in range(self.y_card):
                out[j, y] = np.bincount(sym[y], weights=pv, minlength=self.x_card)
        return out

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` i.i.d. samples; returns ``(xs (n, m), ys (n,))``."""
        ys = rng.choice(self.y_card, size=n, p=self.p_y)
        xs = np.empty((n, self.m), dtype=np.int64)
        for j in range(self.m):
            v = rng.choice(self.v_card, size=(n, self.d), p=self.p_v)
            xs[:, j] = self.theta[j].apply(ys, v, self.v_card)
        return xs, ys

    def to_json(self) -> dict:
        return {"kind": "generative_model", "p_y": self.p_y.tolist(), "p_v": self.p_v.tolist(),
                "x_card": int(self.x_card), "d": int(self.d), "theta": [t.to_json() for t in self.theta]}

    @classmethod
    def from_json(cls, doc: dict) -> "GenerativeModel":
        try:
            return cls(np.asarray(doc["p_y"]), np.asarray(doc["p_v"]),
                       tuple(_map_from_json(t) for t in doc["theta"]), int(doc["x_card"]), int(doc["d"]))
        except KeyError as exc:
            raise ValidationError(f"model document missing field {exc}") from None


# ---------------------------------------------------------------- representations

@dataclass(frozen=True, eq=False)
class RepresentationFunction:
    """Per-view encoders ``x -> (c, u)``.

    Deterministic encoders store ``c_tables`` and ``u_tables`` of shape
    ``(m, |X|)``; stochastic ones store ``kernels`` of shape
    ``(m, |X|, c_card, u_card)``.
    """

    c_card: int
    u_card: int
    c_tables: np.ndarray | None = None
    u_tables: np.ndarray | None = None
    kernels: np.ndarray | None = None

    def __post_init__(self):
        if self.c_card < 1 or self.u_card < 1:
            raise ValidationError("code alphabets must be nonempty")
        if self.kernels is None:
            if self.c_tables is None or self.u_tables is None:
                raise ValidationError("deterministic representation needs c_tables and u_tables")
            c = np.atleast_2d(np.asarray(self.c_tables, dtype=np.int64))
            u = np.atleast_2d(np.asarray(self.u_tables, dtype=np.int64))
            if c.shape != u.shape:
                raise ValidationError(f"c_tables {c.shape} and u_tables {u.shape} differ in shape")
            if c.min() < 0 or c.max() >= self.c_card or u.min() < 0 or u.max() >= self.u_card:
                raise ValidationError("encoder table entries outside the code alphabets")
            c.setflags(write=False)
            u.setflags(write=False)
            object.__setattr__(self, "c_tables", c)
            object.__setattr__(self, "u_tables", u)
        else:
            k = np.asarray(self.kernels, dtype=np.float64)
            if k.ndim != 4 or k.shape[2:] != (self.c_card, self.u_card):
                raise ValidationError(f"kernels must have shape (m, |X|, {self.c_card}, {self.u_card})")
            if np.any(k < 0):
                raise ValidationError("kernels contain negative entries")
            rows = k.sum(axis=(2, 3))
            if np.max(np.abs(rows - 1.0)) > 1e-9:
                raise ValidationError("kernel rows must sum to 1 within 1e-9")
            k.setflags(write=False)
            object.__setattr__(self, "kernels", k)

    @property
    def deterministic(self) -> bool:
        return self.kernels is None

    @property
    def m(self) -> int:
        return (self.c_tables if self.deterministic else self.kernels).shape[0]

    @property
    def x_card(self) -> int:
        return (self.c_tables if self.deterministic else self.kernels).shape[1]

    @property
    def n_codes(self) -> int:
        return self.c_card * self.u_card

    @cached_property
    def code_kernels(self) -> np.ndarray:
        """``P(Z^(j) = z | X^(j) = x)`` with shape ``(m, |X|, n_codes)``."""
        if not self.deterministic:
            return self.kernels.reshape(self.m, self.x_card, self.n_codes)
        k = np.zeros((self.m, self.x_card, self.n_codes))
        z = self.c_tables * self.u_card + self.u_tables
        for j in range(self.m):
            k[j, np.arange(self.x_card), z[j]] = 1.0
        return k

    def codes(self, xs: np.ndarray) -> np.ndarray:
        """Flat codes for a deterministic representation, shape like ``xs``."""
        if not self.deterministic:
            raise ValidationError("codes() needs a deterministic representation")
        xs = np.asarray(xs)
        z = self.c_tables * self.u_card + self.u_tables
        return np.stack([z[j, xs[:, j]] for j in range(xs.shape[1])], axis=1)

    def to_json(self) -> dict:
        doc = {"kind": "representation", "c_card": int(self.c_card), "u_card": int(self.u_card)}
        if self.deterministic:
            doc["c_tables"] = self.c_tables.tolist()
            doc["u_tables"] = self.u_tables.tolist()
        else:
            doc["kernels"] = self.kernels.tolist()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "RepresentationFunction":
        try:
            if "kernels" in doc:
                return cls(int(doc["c_card"]), int(doc["u_card"]), kernels=np.asarray(doc["kernels"]))
            return cls(int(doc["c_card"]), int(doc["u_card"]), np.asarray(doc["c_tables"]),
                       np.asarray(doc["u_tables"]))
        except KeyError as exc:
            raise ValidationError(f"representation document missing field {exc}") from None


@dataclass(frozen=True)
class HypothesisSpace:
    members: tuple
    prior: np.ndarray

    def __post_init__(self):
        if not self.members:
            raise ValidationError("hypothesis space must be nonempty")
        p = _check_prob(self.prior, "hypothesis prior")
        if p.size != len(self.members):
            raise ValidationError("prior length differs from the number of members")
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "prior", p)


@dataclass(frozen=True, eq=False)
class Decoder:
    """Code-to-output tables ``(m, n_codes)``; ``task`` is ``rec`` or ``cls``.

    ``rec`` tables map codes into the view alphabet, ``cls`` tables into labels.
    """

    task: str
    tables: np.ndarray

    def __post_init__(self):
        if self.task not in ("rec", "cls"):
            raise ValidationError(f"decoder task must be 'rec' or 'cls', got {self.task!r}")
        t = np.atleast_2d(np.asarray(self.tables, dtype=np.int64))
        if t.min() < 0:
            raise ValidationError("decoder tables contain negative outputs")
        t.setflags(write=False)
        object.__setattr__(self, "tables", t)

    def to_json(self) -> dict:
        return {"kind": "decoder", "task": self.task, "tables": self.tables.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "Decoder":
        return cls(doc["task"], np.asarray(doc["tables"]))


# ---------------------------------------------------------------- datasets and plans

@dataclass(frozen=True, eq=False)
class MultiViewDataset:
    xs: np.ndarray
    ys: np.ndarray
    d: int = 1
    seed: int | None = None

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.int64)
        ys = np.asarray(self.ys, dtype=np.int64)
        if xs.ndim != 2 or ys.ndim != 1 or xs.shape[0] != ys.shape[0]:
            raise ValidationError(f"dataset shapes xs {xs.shape}, ys {ys.shape} are inconsistent")
        if xs.size and (xs.min() < 0 or ys.min() < 0):
            raise ValidationError("dataset symbols and labels must be nonnegative")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def m(self) -> int:
        return self.xs.shape[1]

    def subset(self, idx) -> "MultiViewDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return MultiViewDataset(self.xs[idx], self.ys[idx], self.d, self.seed)

    def to_json(self) -> dict:
        return {"m": self.m, "d": int(self.d), "seed": self.seed,
                "samples": [{"x": [int(v) for v in x], "y": int(y)} for x, y in zip(self.xs, self.ys)]}

    @classmethod
    def from_json(cls, doc: dict) -> "MultiViewDataset":
        try:
            m = int(doc["m"])
            samples = doc["samples"]
            xs = np.array([s["x"] for s in samples], dtype=np.int64).reshape(len(samples), m)
            ys = np.array([s["y"] for s in samples], dtype=np.int64)
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"dataset document malformed: {exc}") from None
        return cls(xs, ys, int(doc.get("d", 1)), doc.get("seed"))


def save_json(obj, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_json(), fh, indent=2)


@dataclass(frozen=True)
class LooPlan:
    """``n + 1`` samples and the 0-based index of the held-out one."""

    data: MultiViewDataset
    index: int

    def __post_init__(self):
        if self.data.n < 2:
            raise ValidationError("LOO plan needs n >= 1 training samples (n + 1 >= 2 total)")
        if not 0 <= self.index < self.data.n:
            raise ValidationError(f"held-out index {self.index} outside [0, {self.data.n})")

    @property
    def n(self) -> int:
        return self.data.n - 1

    def train(self) -> MultiViewDataset:
        return self.data.subset([i for i in range(self.data.n) if i != self.index])


@dataclass(frozen=True, eq=False)
class SupersamplePlan:
    """Pairs ``(xs[i, s], ys[i, s])`` for ``s`` in {0, 1}; ``bits[i]`` picks the training side."""

    xs: np.ndarray
    ys: np.ndarray
    bits: np.ndarray
    d: int = 1

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.int64)
        ys = np.asarray(self.ys, dtype=np.int64)
        bits = np.asarray(self.bits, dtype=np.int64)
        if xs.ndim != 3 or xs.shape[1] != 2 or ys.shape != xs.shape[:2]:
            raise ValidationError("supersample xs must be (n, 2, m) with ys (n, 2)")
        if bits.shape != (xs.shape[0],):
            raise ValidationError(f"selector length {bits.shape} differs from n = {xs.shape[0]}")
        if bits.size and (bits.min() < 0 or bits.max() > 1):
            raise ValidationError("selector bits must be 0 or 1")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    def side(self, test: bool) -> MultiViewDataset:
        s = 1 - self.bits if test else self.bits
        i = np.arange(self.n)
        return MultiViewDataset(self.xs[i, s], self.ys[i, s], self.d)

    def with_bits(self, bits) -> "SupersamplePlan":
        return SupersamplePlan(self.xs, self.ys, bits, self.d)


@dataclass(frozen=True)
class LossEnvelope:
    """Attainable (``r_x``, ``r_xy``) and samplewise (``rs_x``, ``rs_xy``) loss maxima."""

    r_x: float = 0.0
    r_xy: float = 0.0
    rs_x: float = 0.0
    rs_xy: float = 0.0

    def __post_init__(self):
        for a, s in (("r_x", "rs_x"), ("r_xy", "rs_xy")):
            ra, rs = getattr(self, a), getattr(self, s)
            if rs < 0 or ra < 0 or rs > ra + 1e-12:
                raise ValidationError(f"envelope needs 0 <= {s} <= {a}, got {s}={rs}, {a}={ra}")


# ---------------------------------------------------------------- losses and risks

def _pointwise_loss(pred: np.ndarray, target: np.ndarray, loss: str) -> np.ndarray:
    if loss == "zero_one":
        return (pred != target).astype(np.float64)
    if loss == "squared":
        return (pred - target).astype(np.float64) ** 2
    if loss == "absolute":
        return np.abs(pred - target).astype(np.float64)
    raise ValidationError(f"unknown loss {loss!r}; choose from {LOSSES}")


def view_losses(rep: RepresentationFunction, decoder: Decoder, loss: str = "zero_one",
                y_card: int = 1) -> np.ndarray:
    """Expected loss per view, symbol and label, shape ``(m, |X|, |Y|)``."""
    if decoder.task == "cls" and loss != "zero_one":
        raise ValidationError("classification uses the 0/1 loss")
    k = rep.code_kernels
    m, x_card, n_codes = k.shape
    tables = np.broadcast_to(decoder.tables, (m, decoder.tables.shape[-1]))
    if tables.shape[1] != n_codes:
        raise ValidationError(f"decoder covers {tables.shape[1]} codes, representation has {n_codes}")
    out = np.empty((m, x_card, y_card))
    for j in range(m):
        if decoder.task == "rec":
            per = _pointwise_loss(tables[j][None, :], np.arange(x_card)[:, None], loss)
            out[j] = np.einsum("xz,xz->x", k[j], per)[:, None]
        else:
            per = _pointwise_loss(tables[j][:, None], np.arange(y_card)[None, :], loss)
            out[j] = k[j] @ per
    return out


def samplewise_losses(rep: RepresentationFunction, decoder: Decoder, xs, ys, loss: str = "zero_one",
                      y_card: int | None = None, per_view: bool = False) -> np.ndarray:
    """``ell_avg`` per sample, or per ``(sample, view)`` when ``per_view``."""
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.ndim != 2 or xs.shape[1] != rep.m:
        raise ValidationError(f"samples have {xs.shape[-1]} views, representation has {rep.m}")
    if xs.size and xs.max() >= rep.x_card:
        bad = int(np.argwhere(xs >= rep.x_card)[0][0])
        raise ValidationError(f"sample {bad} has a symbol outside the encoder alphabet")
    y_card = int(y_card if y_card is not None else (ys.max() + 1 if ys.size else 1))
    lv = view_losses(rep, decoder, loss, y_card)
    yy = ys if decoder.task == "cls" else np.zeros_like(ys)
    per = np.stack([lv[j, xs[:, j], yy] for j in range(rep.m)], axis=1)
    return per if per_view else per.mean(axis=1)


@dataclass(frozen=True)
class GapResult:
    empirical: float
    population: float
    gap: float
    method: str = "exact"
    stderr: float = 0.0


def population_risk(model: GenerativeModel, rep: RepresentationFunction, decoder: Decoder,
                    loss: str = "zero_one", mc_samples: int = 200_000, seed: int = 0) -> tuple[float, str, float]:
    """Exact risk by enumeration, else Monte Carlo; returns ``(risk, method, stderr)``."""
    if rep.m != model.m:
        raise ValidationError(f"representation has {rep.m} views, model has {model.m}")
    lv = view_losses(rep, decoder, loss, model.y_card)
    if model.enumerable:
        pxy = model.view_conditionals
        per_view = [float(np.sum(model.p_y[:, None] * pxy[j] * lv[j].T[: model.y_card]))
                    if decoder.task == "cls" else
                    float(np.sum(model.p_y[:, None] * pxy[j] * lv[j][:, 0][None, :]))
                    for j in range(model.m)]
        return float(np.mean(per_view)), "exact", 0.0
    rng = np.random.default_rng(seed)
    xs, ys = model.sample(mc_samples, rng)
    vals = samplewise_losses(rep, decoder, xs, ys, loss, model.y_card)
    return float(vals.mean()), "monte-carlo", float(vals.std(ddof=1) / math.sqrt(len(vals)))


def generalization_gap(model: GenerativeModel, rep: RepresentationFunction, decoder: Decoder,
                       dataset: MultiViewDataset, task: str, loss: str = "zero_one",
                       seed: int = 0) -> GapResult:
    """Population risk minus empirical risk for the given task."""
    if task != decoder.task:
        raise ValidationError(f"task {task!r} does not match a {decoder.task!r} decoder")
    if dataset.n == 0:
        raise ValidationError("empty dataset")
    emp = float(samplewise_losses(rep, decoder, dataset.xs, dataset.ys, loss, model.y_card).mean())
    pop, method, se = population_risk(model, rep, decoder, loss, seed=seed)
    return GapResult(emp, pop, pop - emp, method, se)


def loss_envelope(model: GenerativeModel, rep: RepresentationFunction, dataset: MultiViewDataset,
                  rec: Decoder | None = None, cls: Decoder | None = None,
                  rec_loss: str = "zero_one") -> LossEnvelope:
    """Attainable loss maxima (``r_*``) and samplewise maxima on ``dataset`` (``rs_*``).

    The attainable maximum ranges over every prediction the task allows and
    every target in the model's support, so it does not depend on the learned
    decoder: 1 for the 0/1 loss whenever two targets or predictions differ.
    A task without a decoder gets a zero envelope.
    """
    out = {}
    live_y = np.flatnonzero(model.p_y > 0)
    if model.enumerable:
        live_x = np.flatnonzero(model.view_conditionals.sum(axis=(0, 1)) > 0)
    else:
        live_x = np.arange(model.x_card)
    for key, dec, loss in (("x", rec, rec_loss), ("xy", cls, "zero_one")):
        if dec is None:
            out["r_" + key] = out["rs_" + key] = 0.0
            continue
        card, targets = (model.x_card, live_x) if key == "x" else (model.y_card, live_y)
        preds = np.arange(max(card, int(dec.tables.max()) + 1))
        best = float(_pointwise_loss(preds[:, None], targets[None, :], loss).max())
        sw = samplewise_losses(rep, dec, dataset.xs, dataset.ys, loss, model.y_card)
        rs = float(sw.max()) if sw.size else 0.0
        out["r_" + key] = max(best, rs)
        out["rs_" + key] = rs
    return LossEnvelope(**out)


def delta_loo(plan: LooPlan, rep: RepresentationFunction, decoder: Decoder, loss: str = "zero_one",
              y_card: int | None = None) -> float:
    """Held-out loss minus the mean loss of the other ``n`` samples."""
    losses = samplewise_losses(rep, decoder, plan.data.xs, plan.data.ys, loss, y_card)
    return delta_loo_from_losses(losses, plan.index)


def delta_loo_from_losses(losses, index: int) -> float:
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size < 2:
        raise ValidationError("LOO error needs n >= 1 training samples")
    rest = math.fsum(losses) - losses[index]
    return float(losses[index] - rest / (losses.size - 1))


def paired_loss_differences(plan: SupersamplePlan, rep: RepresentationFunction, decoder: Decoder,
                            loss: str = "zero_one", y_card: int | None = None) -> np.ndarray:
    """``loss(side 1) - loss(side 0)`` per pair and view, shape ``(n, m)``."""
    l0 = samplewise_losses(rep, decoder, plan.xs[:, 0], plan.ys[:, 0], loss, y_card, per_view=True)
    l1 = samplewise_losses(rep, decoder, plan.xs[:, 1], plan.ys[:, 1], loss, y_card, per_view=True)
    return l1 - l0


def delta_sup(plan: SupersamplePlan, rep: RepresentationFunction, decoder: Decoder,
              loss: str = "zero_one", y_card: int | None = None) -> float:
    """Mean test-side loss minus mean train-side loss."""
    return delta_sup_from_differences(paired_loss_differences(plan, rep, decoder, loss, y_card), plan.bits)


def delta_sup_from_differences(diffs, bits) -> float:
    diffs = np.asarray(diffs, dtype=np.float64)
    if diffs.ndim == 1:
        diffs = diffs[:, None]
    bits = np.asarray(bits)
    if bits.shape != (diffs.shape[0],):
        raise ValidationError(f"selector length {bits.shape} differs from {diffs.shape[0]} pairs")
    sign = np.where(bits == 0, 1.0, -1.0)
    return float(np.mean(sign[:, None] * diffs))



def delta_sup_enumeration(diffs, max_pairs: int = 20) -> tuple[float, np.ndarray]:
    """Mean of ``delta_sup`` over all ``2^n`` selectors, plus the per-selector values.

    Complementary selectors give exactly opposite values, so the compensated
    sum is exactly zero for any fixed loss differences.
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    n = diffs.shape[0]
    if n > max_pairs:
        raise ValidationError(f"enumeration over 2^{n} selectors exceeds the limit 2^{max_pairs}")
    grid = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
    vals = np.array([delta_sup_from_differences(diffs, b) for b in grid])
    return math.fsum(vals) / len(vals), vals

# ---------------------------------------------------------------- sensitivity and typical sets

def code_marginals(model: GenerativeModel, rep: RepresentationFunction) -> tuple[np.ndarray, np.ndarray]:
    """Mixture code distribution over views: ``p_z`` and ``p_{z|y}`` (rows per label)."""
    k = rep.code_kernels
    pxy = model.view_conditionals
    pzy = np.mean([pxy[j] @ k[j] for j in range(model.m)], axis=0)
    pz = model.p_y @ pzy
    return pz, pzy


def _log_or_fail(p: np.ndarray, what: str) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(p > UNDERFLOW, np.log(np.maximum(p, UNDERFLOW)), -np.inf)


def sensitivity(model: GenerativeModel, rep: RepresentationFunction,
                conditional: bool = False) -> tuple[float, dict[int, float]]:
    """Largest change of ``log p_z`` under a single nuisance-coordinate swap.

    ``per_label[y]`` takes the sup over views and swaps with the label fixed;
    ``c_phi`` averages it over the label prior. With ``conditional`` the code
    distribution is ``p_{z|y}`` instead of ``p_z``.
    """
    if rep.m != model.m or rep.x_card < model.x_card:
        raise ValidationError("representation does not cover the model's views")
    model._require_enumerable("sensitivity")
    pz, pzy = code_marginals(model, rep)
    k = rep.code_kernels
    live_v = model.p_v > 0
    shape = (model.v_card,) * model.d
    live_vec = model.nuisance_probs > 0
    per_label: dict[int, float] = {}
    for y in range(model.y_card):
        if model.p_y[y] <= 0:
            continue
        ref = pzy[y] if conditional else pz
        logp = _log_or_fail(ref, "p_z")
        best = 0.0
        for j in range(model.m):
            sym = model.symbol_tables[j][y]
            supp = k[j][sym] > 0
            if np.any(supp & ~np.isfinite(logp)[None, :] & live_vec[:, None]):
                flat = int(np.flatnonzero(np.any(supp & ~np.isfinite(logp)[None, :], axis=1) & live_vec)[0])
                v = np.unravel_index(flat, shape)
                raise ValidationError(f"reachable code has p_z = 0 at (y={y}, v={tuple(int(a) for a in v)})")
            hi = np.where(supp, logp[None, :], -np.inf).max(axis=1)
            lo = np.where(supp, logp[None, :], np.inf).min(axis=1)
            hi = np.where(live_vec, hi, -np.inf).reshape(shape)
            lo = np.where(live_vec, lo, np.inf).reshape(shape)
            for ax in range(model.d):
                sel = [slice(None)] * model.d
                sel[ax] = live_v
                h = hi[tuple(sel)].max(axis=ax)
                l_ = lo[tuple(sel)].min(axis=ax)
                ok = np.isfinite(h) & np.isfinite(l_)
                if np.any(ok):
                    best = max(best, float((h - l_)[ok].max()))
        per_label[y] = best
    c_phi = float(sum(model.p_y[y] * c for y, c in per_label.items()))
    return c_phi, per_label


@dataclass(frozen=True)
class TypicalSet:
    """Atoms ``(view, x, z)`` whose code satisfies ``-log p(z) - H <= eps``."""

    members: tuple
    epsilon: float
    entropy: float
    complement_mass: float
    n_codes: int
    label: int | None = None
    mass_bound: float = field(default=float("nan"))
    size_bound: float = field(default=float("nan"))


def typical_epsilon(c: float, d: int, n: int, m: int, gamma: float) -> float:
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    if n * m < 1:
        raise ValidationError("typical set needs n*m >= 1")
    arg = math.log(math.sqrt(n * m) / gamma)
    if arg < 0:
        raise RegimeError(f"vacuous regime: log(sqrt(nm)/gamma) = {arg:.6g} < 0 (gamma too large)")
    return c * math.sqrt(d * arg / 2.0)


def typical_set(model: GenerativeModel, rep: RepresentationFunction, gamma: float, n: int, m: int,
                conditioned_on: int | None = None, strict: bool = True) -> TypicalSet:
    """Enumerate the code-typical atoms and check the typical-set lemma.

    The concentration half of the lemma is a theorem when the code law is taken
    conditionally on the label (or the label is constant) and all views share
    the same code law; outside that class ``strict`` turns a failed check into
    :class:`LemmaViolation`.
    """
    pz, pzy = code_marginals(model, rep)
    if conditioned_on is None:
        ref, weights = pz, model.p_y
        c, _ = sensitivity(model, rep)
    else:
        y = int(conditioned_on)
        if not 0 <= y < model.y_card or model.p_y[y] <= 0:
            raise ValidationError(f"label {y} has no mass")
        ref = pzy[y]
        weights = np.eye(model.y_card)[y]
        c = sensitivity(model, rep, conditional=True)[1][y]
    eps = typical_epsilon(c, model.d, n, m, gamma)
    pos = ref[ref > 0]
    h = float(-np.dot(pos, np.log(pos)))
    logp = _log_or_fail(ref, "p_z")
    # slack for the rounding in h and log p (a degenerate law would otherwise lose its only code)
    typical_code = (-logp - h) <= eps + 1e-12
    k = rep.code_kernels
    pxy = model.view_conditionals
    members = []
    mass = 0.0
    for j in range(model.m):
        px = weights @ pxy[j]
        atom = px[:, None] * k[j] / model.m
        for x, z in np.argwhere(atom > 0):
            if typical_code[z]:
                members.append((j, int(x), int(z)))
                mass += atom[x, z]
    complement = max(0.0, 1.0 - mass)
    n_codes = int(np.count_nonzero(typical_code & (ref > 0)))
    mass_bound = gamma / math.sqrt(n * m)
    size_bound = math.exp(h + eps)
    ts = TypicalSet(tuple(members), eps, h, complement, n_codes, conditioned_on, mass_bound, size_bound)
    if strict:
        if complement > mass_bound + 1e-12:
            raise LemmaViolation(f"typical-set complement mass {complement:.6g} exceeds gamma/sqrt(nm) = {mass_bound:.6g}")
        if n_codes > size_bound * (1 + 1e-12):
            raise LemmaViolation(f"typical set holds {n_codes} codes, above exp(H+eps) = {size_bound:.6g}")
    return ts


def load_dataset(path) -> MultiViewDataset:
    with open(path) as fh:
        return MultiViewDataset.from_json(json.load(fh))


def load_model(path) -> GenerativeModel:
    with open(path) as fh:
        return GenerativeModel.from_json(json.load(fh))
