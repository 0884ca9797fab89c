"""Small numpy trainer with quantized codes and an information-bottleneck penalty.

Each view has a linear (or one-hidden-layer) encoder over symbol features with
two softmax heads, one for the common code ``c`` and one for the unique code
``u``. A shared linear classifier reads the concatenated soft codes. The loss
is cross-entropy plus ``penalty_weight`` times the soft plug-in
``sum_j I(X^(j); C, U^(j) | Y)`` on the training set, plus weight decay. At
evaluation time the codes are quantized by argmax. With ``straight_through``
the classifier already reads the argmax codes during training (gradients pass
through the soft codes), so it cannot rely on information that quantization
discards. The code softmax temperature can be annealed geometrically from 1
to ``code_temperature``.

Training is full-batch Adam on the distinct ``(x, y)`` rows of each view, so
its cost does not grow with ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ValidationError
from ..multiview import Decoder, MultiViewDataset, RepresentationFunction

_EPS = 1e-12


@dataclass(frozen=True)
class TrainerConfig:
    width: int = 4
    hidden: int = 0
    epochs: int = 150
    lr: float = 0.1
    penalty_weight: float = 0.0
    weight_decay: float = 0.0
    init_scale: float = 0.5
    features: str = "onehot"
    code_temperature: float = 1.0
    straight_through: bool = False

    def __post_init__(self):
        if self.width < 1:
            raise ValidationError(f"width must be >= 1, got {self.width}")
        if self.epochs < 0 or self.hidden < 0:
            raise ValidationError("epochs and hidden must be >= 0")
        if not 0 < self.code_temperature <= 1:
            raise ValidationError(f"code_temperature must lie in (0, 1], got {self.code_temperature}")
        if self.features not in ("onehot", "bits"):
            raise ValidationError(f"features must be 'onehot' or 'bits', got {self.features!r}")


def symbol_features(x_card: int, kind: str) -> np.ndarray:
    if kind == "onehot":
        return np.eye(x_card)
    bits = max(1, int(np.ceil(np.log2(max(x_card, 2)))))
    b = (np.arange(x_card)[:, None] >> np.arange(bits)[None, :]) & 1
    return np.hstack([2.0 * b - 1.0, np.ones((x_card, 1))])


def _softmax(a: np.ndarray) -> np.ndarray:
    a = a - a.max(axis=-1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=-1, keepdims=True)


def _onehot_max(q: np.ndarray) -> np.ndarray:
    out = np.zeros_like(q)
    out[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
    return out


def _softmax_back(q: np.ndarray, g: np.ndarray) -> np.ndarray:
    return q * (g - np.sum(q * g, axis=-1, keepdims=True))


@dataclass(eq=False)
class TrainedModel:
    rep: RepresentationFunction
    cls: Decoder
    rec: Decoder
    params: dict = field(repr=False)
    config: TrainerConfig = field(default_factory=TrainerConfig)
    history: list = field(default_factory=list, repr=False)

    @property
    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    @property
    def frobenius(self) -> float:
        return float(np.sqrt(sum(float(np.sum(v * v)) for v in self.params.values())))

    def weights(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in sorted(self.params)])

    def predict(self, xs) -> np.ndarray:
        """Per-view predicted labels, shape ``(N, m)``."""
        z = self.rep.codes(np.asarray(xs))
        return np.stack([self.cls.tables[0][z[:, j]] for j in range(z.shape[1])], axis=1)


class _Net:
    def __init__(self, cfg: TrainerConfig, m: int, x_card: int, y_card: int, rng: np.random.Generator):
        self.cfg, self.m, self.y_card = cfg, m, y_card
        self.tau = 1.0
        self.feat = symbol_features(x_card, cfg.features)
        f, w, h, s = self.feat.shape[1], cfg.width, cfg.hidden, cfg.init_scale
        self.p: dict[str, np.ndarray] = {}
        for j in range(m):
            if h:
                self.p[f"w1_{j}"] = rng.normal(0, s, (f, h))
                din = h
            else:
                din = f
            self.p[f"wc_{j}"] = rng.normal(0, s, (din, w))
            self.p[f"wu_{j}"] = rng.normal(0, s, (din, w))
        self.p["v"] = rng.normal(0, s, (2 * w, y_card))
        self.p["b"] = np.zeros(y_card)

    def encode(self, j: int):
        h = np.tanh(self.feat @ self.p[f"w1_{j}"]) if self.cfg.hidden else self.feat
        return h, _softmax(h @ self.p[f"wc_{j}"] / self.tau), _softmax(h @ self.p[f"wu_{j}"] / self.tau)

    def step_grads(self, rows: list[tuple[np.ndarray, np.ndarray, np.ndarray]], pxy: list[np.ndarray]):
        """Loss and gradients; ``rows[j] = (x, y, weight)`` over distinct pairs."""
        cfg, w = self.cfg, self.cfg.width
        g = {k: np.zeros_like(v) for k, v in self.p.items()}
        loss = 0.0
        for j in range(self.m):
            h, qc, qu = self.encode(j)
            xr, yr, wr = rows[j]
            if cfg.straight_through:
                # the classifier sees the argmax codes; gradients pass through the soft codes
                s = np.hstack([_onehot_max(qc)[xr], _onehot_max(qu)[xr]])
            else:
                s = np.hstack([qc[xr], qu[xr]])
            prob = _softmax(s @ self.p["v"] + self.p["b"])
            loss -= float(np.sum(wr * np.log(prob[np.arange(len(yr)), yr] + _EPS))) / self.m
            dlog = prob.copy()
            dlog[np.arange(len(yr)), yr] -= 1.0
            dlog *= (wr / self.m)[:, None]
            g["v"] += s.T @ dlog
            g["b"] += dlog.sum(axis=0)
            ds = dlog @ self.p["v"].T
            dqc = np.zeros_like(qc)
            dqu = np.zeros_like(qu)
            np.add.at(dqc, xr, ds[:, :w])
            np.add.at(dqu, xr, ds[:, w:])
            if cfg.penalty_weight > 0:
                pen, gc, gu = _cmi_and_grad(qc, qu, pxy[j])
                loss += cfg.penalty_weight * pen
                dqc += cfg.penalty_weight * gc
                dqu += cfg.penalty_weight * gu
            dac = _softmax_back(qc, dqc) / self.tau
            dau = _softmax_back(qu, dqu) / self.tau
            g[f"wc_{j}"] += h.T @ dac
            g[f"wu_{j}"] += h.T @ dau
            if cfg.hidden:
                dh = dac @ self.p[f"wc_{j}"].T + dau @ self.p[f"wu_{j}"].T
                g[f"w1_{j}"] += self.feat.T @ (dh * (1 - h * h))
        if cfg.weight_decay > 0:
            for k, v in self.p.items():
                if k != "b":
                    loss += 0.5 * cfg.weight_decay * float(np.sum(v * v))
                    g[k] += cfg.weight_decay * v
        return loss, g


def _cmi_and_grad(qc: np.ndarray, qu: np.ndarray, pxy: np.ndarray):
    """Soft plug-in I(X; Z | Y) for ``q(c,u|x) = qc * qu`` and its gradient in (qc, qu)."""
    q = qc[:, :, None] * qu[:, None, :]
    py = pxy.sum(axis=0)
    live = py > 0
    px_y = np.where(live[None, :], pxy / np.where(live, py, 1.0)[None, :], 0.0)
    r = np.einsum("xy,xcu->ycu", px_y, q)
    logq = np.log(q + _EPS)
    logr = np.log(r + _EPS)
    # G[x, z] = sum_y p(x, y) log(q(z|x) / r(z|y))
    gz = pxy.sum(axis=1)[:, None, None] * logq - np.einsum("xy,ycu->xcu", pxy, logr)
    val = float(np.sum(q * gz))
    gc = np.einsum("xcu,xu->xc", gz, qu)
    gu = np.einsum("xcu,xc->xu", gz, qc)
    return max(val, 0.0), gc, gu


def _distinct_rows(ds: MultiViewDataset, j: int, x_card: int, y_card: int):
    t = np.zeros((x_card, y_card))
    np.add.at(t, (ds.xs[:, j], ds.ys), 1.0)
    t /= max(ds.n, 1)
    xr, yr = np.nonzero(t)
    return (xr, yr, t[xr, yr]), t


def train_model(dataset: MultiViewDataset, cfg: TrainerConfig, seed: int, x_card: int | None = None,
                y_card: int | None = None) -> TrainedModel:
    """Train encoders and classifier; deterministic in ``(dataset, cfg, seed)``."""
    if dataset.n == 0:
        raise ValidationError("cannot train on an empty dataset")
    x_card = int(x_card if x_card is not None else dataset.xs.max() + 1)
    y_card = int(y_card if y_card is not None else dataset.ys.max() + 1)
    net = _Net(cfg, dataset.m, x_card, y_card, np.random.default_rng(seed))
    rows, pxy = zip(*[_distinct_rows(dataset, j, x_card, y_card) for j in range(dataset.m)])
    m1 = {k: np.zeros_like(v) for k, v in net.p.items()}
    m2 = {k: np.zeros_like(v) for k, v in net.p.items()}
    b1, b2 = 0.9, 0.999
    history = []
    for t in range(1, cfg.epochs + 1):
        net.tau = cfg.code_temperature ** ((t - 1) / max(cfg.epochs - 1, 1))
        loss, g = net.step_grads(list(rows), list(pxy))
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite training loss at epoch {t}")
        history.append(loss)
        for k in net.p:
            m1[k] = b1 * m1[k] + (1 - b1) * g[k]
            m2[k] = b2 * m2[k] + (1 - b2) * g[k] ** 2
            net.p[k] -= cfg.lr * (m1[k] / (1 - b1 ** t)) / (np.sqrt(m2[k] / (1 - b2 ** t)) + 1e-8)
    return _tabulate(net, dataset, x_card, y_card, history)


def _tabulate(net: _Net, ds: MultiViewDataset, x_card: int, y_card: int, history) -> TrainedModel:
    w = net.cfg.width
    c_tab = np.empty((net.m, x_card), dtype=np.int64)
    u_tab = np.empty((net.m, x_card), dtype=np.int64)
    for j in range(net.m):
        _, qc, qu = net.encode(j)
        c_tab[j] = np.argmax(qc, axis=1)
        u_tab[j] = np.argmax(qu, axis=1)
    rep = RepresentationFunction(w, w, c_tab, u_tab)
    v, b = net.p["v"], net.p["b"]
    scores = v[:w][:, None, :] + v[w:][None, :, :] + b
    cls = Decoder("cls", np.argmax(scores, axis=2).reshape(1, w * w))
    rec = majority_reconstruction(rep, ds, x_card)
    return TrainedModel(rep, cls, rec, {k: v.copy() for k, v in net.p.items()}, net.cfg, history)


def majority_reconstruction(rep: RepresentationFunction, ds: MultiViewDataset, x_card: int) -> Decoder:
    """Per view, decode each code to its most frequent training symbol (ties and unseen codes -> lowest)."""
    z = rep.codes(ds.xs)
    tables = np.zeros((rep.m, rep.n_codes), dtype=np.int64)
    for j in range(rep.m):
        t = np.zeros((rep.n_codes, x_card))
        np.add.at(t, (z[:, j], ds.xs[:, j]), 1.0)
        tables[j] = np.argmax(t, axis=1)
    return Decoder("rec", tables)


# ---------------------------------------------------------------- toy trainer

@dataclass(eq=False)
class CountTableModel:
    """Label-count table per view symbol; predicts the majority label (ties -> lowest)."""

    counts: np.ndarray

    def weights(self) -> np.ndarray:
        return self.counts.ravel().astype(np.float64)

    def predict(self, xs) -> np.ndarray:
        xs = np.asarray(xs)
        lab = np.argmax(self.counts, axis=1)
        return lab[xs]

    def representation(self) -> tuple[RepresentationFunction, Decoder]:
        x_card = self.counts.shape[0]
        rep = RepresentationFunction(x_card, 1, np.arange(x_card)[None, :], np.zeros((1, x_card)))
        return rep, Decoder("cls", np.argmax(self.counts, axis=1)[None, :])


def train_count_table(dataset: MultiViewDataset, x_card: int, y_card: int) -> CountTableModel:
    """Toy trainer: pooled label counts over all views."""
    t = np.zeros((x_card, y_card), dtype=np.int64)
    for j in range(dataset.m):
        np.add.at(t, (dataset.xs[:, j], dataset.ys), 1)
    return CountTableModel(t)
