"""Plug-in and model-exact estimation of the information terms used by the bounds."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import finite_info as fi
from .errors import NondeterminismError, ValidationError
from .finite_info import Alphabet, JointDistribution
from .multiview import GenerativeModel, MultiViewDataset, RepresentationFunction, SupersamplePlan, sensitivity

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master: int, i: int) -> int:
    """Seed of replicate stream ``i``: ``splitmix64(splitmix64(master) xor i)``.

    Mixing the master first keeps ``(a, i)`` and ``(b, j)`` from colliding
    whenever ``a ^ i == b ^ j``.
    """
    return splitmix64(splitmix64(int(master) & MASK64) ^ (int(i) & MASK64))


# ---------------------------------------------------------------- binning and joints

@dataclass(frozen=True)
class BinningSpec:
    bins_per_dimension: int = 8
    padding: float = 1e-12

    def __post_init__(self):
        if int(self.bins_per_dimension) != self.bins_per_dimension or self.bins_per_dimension < 2:
            raise ValidationError(f"bins_per_dimension must be an integer >= 2, got {self.bins_per_dimension}")

    def edges(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        lo, hi = float(v.min()) - self.padding, float(v.max()) + self.padding
        return np.linspace(lo, hi, self.bins_per_dimension + 1)

    def digitize(self, values, edges: np.ndarray | None = None) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        e = self.edges(v) if edges is None else edges
        return np.clip(np.searchsorted(e, v, side="right") - 1, 0, len(e) - 2).astype(np.int64)


def empirical_joint(samples: Sequence[Sequence], axes: Sequence[Alphabet], binning: BinningSpec | None = None,
                    smoothing: float = 0.0, continuous: Sequence[int] | None = None) -> JointDistribution:
    """Normalized counts (plus ``smoothing`` per cell) over the axes' product space.

    With ``binning``, the columns in ``continuous`` (all columns by default) are
    discretized into ``bins_per_dimension`` equal-width bins first.
    """
    if smoothing < 0:
        raise ValidationError(f"smoothing must be >= 0, got {smoothing}")
    if len(samples) == 0:
        raise ValidationError("empirical_joint needs at least one sample")
    axes = [a if isinstance(a, Alphabet) else Alphabet(*a) for a in axes]
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] != len(axes):
        raise ValidationError(f"samples have {arr.shape[1]} columns, {len(axes)} axes given")
    cols = range(arr.shape[1]) if continuous is None else continuous
    idx = np.empty(arr.shape, dtype=np.int64)
    for c in range(arr.shape[1]):
        if binning is not None and c in cols:
            if axes[c].size != binning.bins_per_dimension:
                raise ValidationError(f"axis {axes[c].name!r} must have {binning.bins_per_dimension} bins")
            idx[:, c] = binning.digitize(arr[:, c])
        else:
            col = arr[:, c]
            if np.any(col != np.round(col)):
                bad = int(np.flatnonzero(col != np.round(col))[0])
                raise ValidationError(f"sample {bad}: non-integer value on axis {axes[c].name!r} needs binning")
            idx[:, c] = col.astype(np.int64)
    shape = tuple(a.size for a in axes)
    for c, a in enumerate(axes):
        bad = np.flatnonzero((idx[:, c] < 0) | (idx[:, c] >= a.size))
        if bad.size:
            raise ValidationError(f"sample {int(bad[0])}: symbol {int(idx[bad[0], c])} outside axis "
                                  f"{a.name!r} of size {a.size}")
    counts = np.bincount(np.ravel_multi_index(tuple(idx.T), shape), minlength=math.prod(shape)).astype(np.float64)
    counts += smoothing
    return JointDistribution(axes, counts / counts.sum())


# ---------------------------------------------------------------- profiles

_PROFILE_FIELDS = ("h_c", "h_u_sum", "mi_common_sum", "mi_unique_sum", "cmi_sum", "renyi_phi",
                   "mi_phi_s", "mi_phi_u", "mi_phi_usup", "h_c_given_x", "h_u_given_x_sum",
                   "h_z_given_y_x1", "h_phi_given_u", "h_phi_given_usup", "c_phi", "y_card")


@dataclass(frozen=True)
class InfoProfile:
    """Information terms consumed by the bounds, in nats; ``None`` means unset.

    ``h_z_given_y_x1`` serves as both H(Z | Y, X^(1)) and H(Z | X^(1), Y).
    """

    h_c: float | None = None
    h_u_sum: float | None = None
    mi_common_sum: float | None = None
    mi_unique_sum: float | None = None
    cmi_sum: float | None = None
    renyi_phi: float | None = None
    mi_phi_s: float | None = None
    mi_phi_u: float | None = None
    mi_phi_usup: float | None = None
    h_c_given_x: float | None = None
    h_u_given_x_sum: float | None = None
    h_z_given_y_x1: float | None = None
    h_phi_given_u: float | None = None
    h_phi_given_usup: float | None = None
    c_phi: float | None = None
    y_card: int | None = None

    def __post_init__(self):
        for name in _PROFILE_FIELDS:
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"profile field {name} must be finite and >= 0, got {v!r}")
        if self.y_card is not None and (int(self.y_card) != self.y_card or self.y_card < 1):
            raise ValidationError(f"profile field y_card must be a positive integer, got {self.y_card!r}")

    def replace(self, **kw) -> "InfoProfile":
        return dataclasses.replace(self, **kw)

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValidationError(f"profile field(s) {', '.join(missing)} must be set")

    def to_json(self) -> dict:
        return {n: getattr(self, n) for n in _PROFILE_FIELDS}

    @classmethod
    def from_json(cls, doc: dict) -> "InfoProfile":
        unknown = set(doc) - set(_PROFILE_FIELDS)
        if unknown:
            raise ValidationError(f"unknown profile field(s) {sorted(unknown)}")
        kw = {k: (None if v is None else (int(v) if k == "y_card" else float(v))) for k, v in doc.items()}
        return cls(**kw)


def _entropy_fn(joint: JointDistribution, n: int | None, miller_madow: bool) -> Callable[[list[str]], float]:
    def h(names):
        val = fi.entropy(joint, names)
        if miller_madow and n:
            k = int(np.count_nonzero(joint.marginal(names)))
            val += (k - 1) / (2.0 * n)
        return val
    return h


def _pos(v: float) -> float:
    return fi._clamp(v, "information term")


def _view_terms(joint: JointDistribution, h) -> dict:
    """Per-view terms from the joint over (Y, X, C, U)."""
    return {
        "h_u": h(["U"]),
        "mi_c": _pos(h(["X"]) + h(["C"]) - h(["X", "C"])),
        "mi_u": _pos(h(["X"]) + h(["U"]) - h(["X", "U"])),
        "mi_z": _pos(h(["X"]) + h(["C", "U"]) - h(["X", "C", "U"])),
        "cmi": _pos(h(["X", "Y"]) + h(["C", "U", "Y"]) - h(["X", "C", "U", "Y"]) - h(["Y"])),
        "h_c_x": _pos(h(["X", "C"]) - h(["X"])),
        "h_u_x": _pos(h(["X", "U"]) - h(["X"])),
        "h_z_x": _pos(h(["X", "C", "U"]) - h(["X"])),
        "h_z_y": _pos(h(["Y", "C", "U"]) - h(["Y"])),
    }


def _view_axes(y_card, x_card, c_card, u_card):
    return [Alphabet("Y", y_card), Alphabet("X", x_card), Alphabet("C", c_card), Alphabet("U", u_card)]


def _assemble(views: list[dict], h_c: float, c_phi: float | None, y_card: int) -> InfoProfile:
    first, rest = views[0], views[1:]
    return InfoProfile(
        h_c=h_c,
        h_u_sum=math.fsum(v["h_u"] for v in views),
        mi_common_sum=math.fsum(v["mi_c"] for v in views),
        mi_unique_sum=math.fsum(v["mi_u"] for v in views),
        cmi_sum=math.fsum(v["cmi"] for v in views),
        h_c_given_x=math.fsum(v["h_c_x"] for v in views),
        h_u_given_x_sum=math.fsum(v["h_u_x"] for v in views),
        # Z^(1) depends on (Y, X^(1)) only through X^(1); the other views only through Y
        h_z_given_y_x1=first["h_z_x"] + math.fsum(v["h_z_y"] for v in rest),
        c_phi=c_phi,
        y_card=y_card,
    )


def _h_vec(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.dot(p, np.log(p)))


def _common_tuple_entropy_exact(model: GenerativeModel, rep: RepresentationFunction) -> float:
    """H(C^(1), ..., C^(m)) as a label mixture of per-view products."""
    k = rep.code_kernels.reshape(rep.m, rep.x_card, rep.c_card, rep.u_card).sum(axis=3)
    pxy = model.view_conditionals
    if rep.c_card ** rep.m > fi.MAX_CELLS:
        raise ValidationError(f"common-code tuple space {rep.c_card}^{rep.m} exceeds {fi.MAX_CELLS}")
    total = np.zeros((rep.c_card,) * rep.m)
    for y in range(model.y_card):
        t = model.p_y[y]
        for j in range(rep.m):
            t = np.multiply.outer(t, pxy[j, y] @ k[j][: model.x_card])
        total += t
    return _h_vec(total.ravel())


def estimate_info_profile(dataset: MultiViewDataset | None, rep: RepresentationFunction,
                          model: GenerativeModel | None = None, binning: BinningSpec | None = None,
                          lam: float | None = None, stochastic_phi: bool = False,
                          miller_madow: bool = False, smoothing: float = 0.0,
                          with_sensitivity: bool = True) -> InfoProfile:
    """Assemble the profile exactly from ``model`` or by plug-in from ``dataset``.

    Model-information fields (renyi_phi, mi_phi_*, h_phi_*) are left unset.
    Views are discrete symbols, so ``binning`` is unused here; callers bin
    continuous features before building the dataset.
    """
    if lam is not None and not 0 < lam < 1:
        raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    if stochastic_phi and lam is None:
        raise ValidationError("lambda must be set when a stochastic hypothesis space is requested")
    if model is not None:
        return _exact_profile(model, rep, with_sensitivity)
    if dataset is None or dataset.n == 0:
        raise ValidationError("plug-in profile needs a nonempty dataset")
    return _plugin_profile(dataset, rep, miller_madow, smoothing)


def exact_view_terms(model: GenerativeModel, rep: RepresentationFunction) -> list[dict]:
    """Per-view exact terms: H(U), I(X;C), I(X;U), I(X;C,U) as ``mi_z``, I(X;C,U|Y) as ``cmi``, ..."""
    if rep.m != model.m or rep.x_card < model.x_card:
        raise ValidationError("representation does not cover the model's views")
    k = rep.code_kernels
    pxy = model.view_conditionals
    views = []
    for j in range(model.m):
        t = model.p_y[:, None, None] * pxy[j][:, :, None] * k[j][None, : model.x_card, :]
        joint = JointDistribution(_view_axes(model.y_card, model.x_card, rep.c_card, rep.u_card),
                                  t, renormalize=True)
        views.append(_view_terms(joint, _entropy_fn(joint, None, False)))
    return views


def _exact_profile(model: GenerativeModel, rep: RepresentationFunction, with_sensitivity: bool) -> InfoProfile:
    views = exact_view_terms(model, rep)
    c_phi = sensitivity(model, rep)[0] if with_sensitivity else None
    return _assemble(views, _common_tuple_entropy_exact(model, rep), c_phi, model.y_card)


def _plugin_profile(ds: MultiViewDataset, rep: RepresentationFunction, mm: bool, smoothing: float) -> InfoProfile:
    if ds.m != rep.m:
        raise ValidationError(f"dataset has {ds.m} views, representation has {rep.m}")
    if ds.xs.max() >= rep.x_card:
        raise ValidationError("dataset symbols exceed the encoder alphabet")
    y_card = int(ds.ys.max()) + 1
    k = rep.code_kernels
    views = []
    for j in range(ds.m):
        t = np.zeros((y_card, rep.x_card, rep.n_codes))
        np.add.at(t, (ds.ys, ds.xs[:, j]), k[j][ds.xs[:, j]])
        t += smoothing
        joint = JointDistribution(_view_axes(y_card, rep.x_card, rep.c_card, rep.u_card),
                                  t.reshape(y_card, rep.x_card, rep.c_card, rep.u_card), renormalize=True)
        views.append(_view_terms(joint, _entropy_fn(joint, ds.n, mm)))
    kc = k.reshape(rep.m, rep.x_card, rep.c_card, rep.u_card).sum(axis=3)
    if rep.deterministic:
        ctup = np.stack([rep.c_tables[j, ds.xs[:, j]] for j in range(ds.m)], axis=1)
        _, counts = np.unique(ctup, axis=0, return_counts=True)
        p = counts / counts.sum()
        h_c = _h_vec(p) + ((len(counts) - 1) / (2.0 * ds.n) if mm else 0.0)
    else:
        total = np.zeros((rep.c_card,) * rep.m)
        for i in range(ds.n):
            t = 1.0 / ds.n
            for j in range(rep.m):
                t = np.multiply.outer(t, kc[j, ds.xs[i, j]])
            total += t
        h_c = _h_vec(total.ravel())
    return _assemble(views, h_c, None, y_card)


# ---------------------------------------------------------------- model information

@dataclass(frozen=True, eq=False)
class ModelFingerprint:
    """Maps a trained model to a discrete symbol.

    ``prediction`` mode records the model's predictions on fixed probe inputs;
    ``quantized`` mode rounds each trainable weight to one of ``levels`` values
    on ``[-weight_range, weight_range]``.
    """

    mode: str = "prediction"
    probes: np.ndarray | None = None
    levels: int = 16
    weight_range: float = 4.0

    def __post_init__(self):
        if self.mode not in ("prediction", "quantized"):
            raise ValidationError(f"fingerprint mode must be 'prediction' or 'quantized', got {self.mode!r}")
        if self.mode == "prediction" and self.probes is None:
            raise ValidationError("prediction fingerprint needs a probe set")
        if self.levels < 2:
            raise ValidationError("quantization needs at least 2 levels")

    @classmethod
    def from_model(cls, model: GenerativeModel, n_probes: int = 32, seed: int = 0) -> "ModelFingerprint":
        xs, _ = model.sample(n_probes, np.random.default_rng(stream_seed(seed, 0x5EED)))
        return cls("prediction", xs)

    def symbol(self, trained) -> bytes:
        if self.mode == "prediction":
            pred = np.asarray(trained.predict(self.probes), dtype=np.int64)
            return pred.tobytes()
        w = np.asarray(trained.weights(), dtype=np.float64).ravel()
        r = self.weight_range
        q = np.clip(np.round((np.clip(w, -r, r) + r) / (2 * r) * (self.levels - 1)), 0, self.levels - 1)
        return q.astype(np.uint8).tobytes()


@dataclass(frozen=True)
class ModelInfoEstimate:
    mi: float
    h_phi_given: float
    renyi_phi: float
    h_phi: float
    stderr: float
    replicates: int
    n_symbols: int
    symbols: tuple = field(default=(), repr=False)


def plugin_mi(a: Sequence, b: Sequence, smoothing: float = 0.0) -> tuple[float, float, float]:
    """Plug-in ``I(A;B)``, ``H(A|B)`` and the delta-method standard error of the MI."""
    if len(a) != len(b) or len(a) == 0:
        raise ValidationError("plug-in MI needs two equal-length nonempty sequences")
    ia = _codes(a)
    ib = _codes(b)
    na, nb = ia.max() + 1, ib.max() + 1
    counts = np.zeros((na, nb))
    np.add.at(counts, (ia, ib), 1.0)
    counts += smoothing
    p = counts / counts.sum()
    pa, pb = p.sum(axis=1), p.sum(axis=0)
    nz = p > 0
    dens = np.zeros_like(p)
    dens[nz] = np.log(p[nz] / np.outer(pa, pb)[nz])
    mi = max(float(np.sum(p[nz] * dens[nz])), 0.0)
    h_ab = _h_vec(p.ravel())
    h_a_given_b = max(h_ab - _h_vec(pb), 0.0)
    second = float(np.sum(p[nz] * dens[nz] ** 2))
    se = math.sqrt(max(second - mi ** 2, 0.0) / len(a))
    return mi, h_a_given_b, se


def _codes(seq: Sequence) -> np.ndarray:
    lookup: dict = {}
    return np.array([lookup.setdefault(_key(s), len(lookup)) for s in seq], dtype=np.int64)


def _key(s):
    if isinstance(s, np.ndarray):
        return s.tobytes()
    return s


@dataclass(frozen=True, eq=False)
class DataSource:
    """Randomness for the three settings.

    ``full`` draws a fresh ``n``-sample dataset per replicate. ``loo`` fixes
    ``n + 1`` samples and draws the held-out index. ``supersample`` fixes ``n``
    pairs and draws the selector bits.
    """

    model: GenerativeModel
    n: int
    seed: int = 0

    def fixed_pool(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(stream_seed(self.seed, 0xF1ED))
        return self.model.sample(size, rng)


def estimate_model_information(trainer: Callable[[MultiViewDataset, int], Any], source: DataSource,
                               setting: str, replicates: int, fingerprint: ModelFingerprint,
                               smoothing: float = 0.0, lam: float = 0.1, train_seed: int = 0,
                               check_determinism: bool = True) -> ModelInfoEstimate:
    """Plug-in I(fingerprint; V), H(fingerprint | V) and H_{1-lam}(fingerprint).

    ``V`` is the dataset for ``full``, the held-out index for ``loo`` and the
    selector bits for ``supersample``. Replicate ``i`` draws ``V`` from stream
    ``stream_seed(seed, i)``; the trainer always receives ``train_seed``.
    """
    if replicates < 2:
        raise ValidationError(f"need at least 2 replicates, got {replicates}")
    if setting not in ("full", "loo", "supersample"):
        raise ValidationError(f"setting must be full, loo or supersample, got {setting!r}")
    if not 0 < lam < 1:
        raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    model, n = source.model, source.n
    if setting == "loo":
        pool_x, pool_y = source.fixed_pool(n + 1)
    elif setting == "supersample":
        px, py = source.fixed_pool(2 * n)
        plan = SupersamplePlan(px.reshape(n, 2, model.m), py.reshape(n, 2), np.zeros(n, dtype=np.int64), model.d)

    def draw(i: int):
        rng = np.random.default_rng(stream_seed(source.seed, i))
        if setting == "full":
            xs, ys = model.sample(n, rng)
            ds = MultiViewDataset(xs, ys, model.d, stream_seed(source.seed, i))
            return ds, np.concatenate([xs.ravel(), ys]).tobytes()
        if setting == "loo":
            u = int(rng.integers(n + 1))
            keep = np.arange(n + 1) != u
            return MultiViewDataset(pool_x[keep], pool_y[keep], model.d), u
        bits = rng.integers(0, 2, size=n)
        return plan.with_bits(bits).side(test=False), bits.astype(np.uint8).tobytes()

    symbols, variables = [], []
    for i in range(replicates):
        ds, var = draw(i)
        sym = fingerprint.symbol(trainer(ds, train_seed))
        if check_determinism and i == 0:
            again = fingerprint.symbol(trainer(draw(0)[0], train_seed))
            if again != sym:
                raise NondeterminismError("trainer is not deterministic: two runs on identical inputs disagree")
        symbols.append(sym)
        variables.append(var)
    mi, h_given, se = plugin_mi(symbols, variables, smoothing)
    codes = _codes(symbols)
    counts = np.bincount(codes).astype(np.float64) + smoothing
    p = counts / counts.sum()
    return ModelInfoEstimate(mi, h_given, fi.renyi_from_probs(p, 1.0 - lam), _h_vec(p), se, replicates,
                             int(codes.max()) + 1, tuple(symbols))


def profile_report(profile: InfoProfile, n: int | None = None, m: int | None = None,
                   binning: BinningSpec | None = None, smoothing: float = 0.0,
                   replicates: int | None = None, method: str = "exact") -> dict:
    return {
        "profile": profile.to_json(),
        "units": "nats",
        "method": method,
        "n": n,
        "m": m,
        "binning": None if binning is None else dataclasses.asdict(binning),
        "smoothing": smoothing,
        "replicates": replicates,
    }
