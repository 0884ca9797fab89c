"""Synthetic finite multi-view generators."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ..errors import ValidationError
from ..estimators import BinningSpec, stream_seed
from ..multiview import GaussianBinMap, GenerativeModel, MultiViewDataset, TableMap

MAX_Y, MAX_X, MAX_D = 4, 16, 4


@dataclass(frozen=True)
class GeneratorSpec:
    """Generator family and its parameters.

    ``discrete``: symbol = label block plus a seeded hash of the nuisance
    vector inside the block. With ``flip > 0`` the block shows the next label
    when the first nuisance coordinate is 0 (probability ``flip``) and the hash
    covers only the remaining coordinates, so the flip is invisible in the
    symbol. ``xor_flip``: binary views
    ``x = y xor v`` with ``P(v = 1) = flip``. ``gaussian``: ``mu_y + sigma *
    mean(q_v)`` over equiprobable normal quantile cells, binned with fixed edges.
    """

    kind: str = "discrete"
    m: int = 2
    y_card: int = 2
    x_card: int = 16
    v_card: int = 2
    d: int = 3
    flip: float = 0.0
    label_prior: tuple | None = None
    q_cells: int = 64
    sigma: float = 1.0
    separation: float = 2.0
    table_seed: int = 7


def _label_prior(spec: GeneratorSpec) -> np.ndarray:
    if spec.label_prior is None:
        return np.full(spec.y_card, 1.0 / spec.y_card)
    p = np.asarray(spec.label_prior, dtype=np.float64)
    if p.shape != (spec.y_card,):
        raise ValidationError(f"label_prior must have {spec.y_card} entries")
    return p


def build_model(spec: GeneratorSpec) -> GenerativeModel:
    if spec.m < 1:
        raise ValidationError("generator needs m >= 1")
    if not 0 <= spec.flip < 1:
        raise ValidationError(f"flip must lie in [0, 1), got {spec.flip}")
    if spec.kind == "xor_flip":
        if spec.y_card != 2:
            raise ValidationError("xor_flip generator has binary labels (y_card = 2)")
        table = np.array([[0, 1], [1, 0]])
        return GenerativeModel(_label_prior(spec), np.array([1 - spec.flip, spec.flip]),
                               (TableMap(table),) * spec.m, 2, 1)
    if spec.kind == "discrete":
        if spec.y_card > MAX_Y or spec.x_card > MAX_X or spec.d > MAX_D:
            raise ValidationError(f"discrete-exact generator limits: |Y| <= {MAX_Y}, |X| <= {MAX_X}, d <= {MAX_D}; "
                                  f"got |Y|={spec.y_card}, |X|={spec.x_card}, d={spec.d}")
        if spec.y_card < 1 or spec.v_card < 1 or spec.x_card % spec.y_card:
            raise ValidationError("x_card must be a positive multiple of y_card")
        block = spec.x_card // spec.y_card
        if spec.flip > 0:
            if spec.v_card < 2:
                raise ValidationError("label flips need v_card >= 2")
            p_v = np.r_[spec.flip, np.full(spec.v_card - 1, (1 - spec.flip) / (spec.v_card - 1))]
        else:
            p_v = np.full(spec.v_card, 1.0 / spec.v_card)
        vs = spec.v_card ** spec.d
        coords = np.unravel_index(np.arange(vs), (spec.v_card,) * spec.d)
        v_first = coords[0]
        # with flips, the in-block symbol ignores the flip coordinate so flips are pure label noise
        hashed = coords[1:] if spec.flip > 0 else coords
        key = np.ravel_multi_index(hashed, (spec.v_card,) * len(hashed)) if hashed else np.zeros(vs, dtype=np.int64)
        n_keys = spec.v_card ** len(hashed)
        maps = []
        for j in range(spec.m):
            rng = np.random.default_rng(stream_seed(spec.table_seed, j))
            inner = np.arange(n_keys) % block if n_keys <= block else rng.integers(0, block, size=n_keys)
            inner = rng.permutation(block)[inner][key]
            t = np.empty((spec.y_card, vs), dtype=np.int64)
            for y in range(spec.y_card):
                shown = np.where((v_first == 0) & (spec.flip > 0), (y + 1) % spec.y_card, y)
                t[y] = shown * block + inner
            maps.append(TableMap(t))
        return GenerativeModel(_label_prior(spec), p_v, tuple(maps), spec.x_card, spec.d)
    if spec.kind == "gaussian":
        if spec.x_card > MAX_X or spec.d > MAX_D or spec.y_card > MAX_Y:
            raise ValidationError("gaussian generator limits: |X| <= 16, d <= 4, |Y| <= 4")
        q = norm.ppf((np.arange(spec.q_cells) + 0.5) / spec.q_cells)
        mu = spec.separation * (np.arange(spec.y_card) - (spec.y_card - 1) / 2.0)
        span = 4 * spec.sigma
        edges = BinningSpec(spec.x_card).edges([mu.min() - span, mu.max() + span])[1:-1]
        gm = GaussianBinMap(mu, spec.sigma, q, edges)
        return GenerativeModel(_label_prior(spec), np.full(spec.q_cells, 1.0 / spec.q_cells),
                               (gm,) * spec.m, spec.x_card, spec.d)
    raise ValidationError(f"unknown generator kind {spec.kind!r}")


def generate_synthetic(spec: GeneratorSpec, n: int, seed: int) -> tuple[GenerativeModel, MultiViewDataset]:
    """Model plus an i.i.d. dataset of ``n`` samples drawn from ``seed``."""
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    model = build_model(spec)
    xs, ys = model.sample(n, np.random.default_rng(seed))
    return model, MultiViewDataset(xs, ys, model.d, int(seed))


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log(1 - p)
