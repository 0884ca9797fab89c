"""Monte Carlo studies: bound validity, gap/metric correlation, scaling and the model-information chain."""
from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .. import finite_info as fi
from ..bounds import BoundParams, evaluate_bound
from ..errors import UndefinedCorrelationError, ValidationError
from ..estimators import (DataSource, InfoProfile, ModelFingerprint, estimate_info_profile,
                          estimate_model_information, exact_view_terms, stream_seed)
from ..multiview import (LossEnvelope, MultiViewDataset, SupersamplePlan, delta_loo_from_losses,
                         delta_sup_enumeration, delta_sup_from_differences, generalization_gap,
                         loss_envelope, paired_loss_differences, samplewise_losses)
from .configs import ExperimentConfig, config_to_dict
from .generators import build_model
from .training import TrainedModel, train_count_table, train_model

BOUND_THEOREMS = (1, 3, 7)
CORRELATION_METRICS = ("num_params", "frobenius_norm", "mi", "cmi", "i_phi_s", "i_phi_s+mi", "i_phi_s+cmi")


@dataclass
class StudyReport:
    kind: str
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        """Summary document (no per-replicate records, no wall-clock data)."""
        return {"kind": self.kind, "n_records": len(self.records), "summary": self.summary,
                "config": self.config}

    def write(self, out_dir: str | Path, prefix: str | None = None) -> dict:
        """Write ``<prefix>.csv``, ``<prefix>_summary.json``, ``<prefix>_runtime.json`` and plot series."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        prefix = prefix or self.kind
        paths = {"csv": out / f"{prefix}.csv", "summary": out / f"{prefix}_summary.json",
                 "runtime": out / f"{prefix}_runtime.json"}
        write_records_csv(self.records, paths["csv"])
        paths["summary"].write_text(json.dumps(_jsonable(self.to_json()), indent=2, sort_keys=True) + "\n")
        paths["runtime"].write_text(json.dumps(self.runtime, indent=2, sort_keys=True) + "\n")
        for name, pts in sorted(self.series.items()):
            p = out / f"{prefix}_{name}.dat"
            p.write_text("".join(f"{x!r} {y!r}\n" for x, y in pts))
            paths[name] = p
        return paths


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_records_csv(records: list[dict], path: str | Path) -> None:
    cols: list[str] = []
    seen = set()
    for r in records:
        for k in r:
            if k not in seen:
                seen.add(k)
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: ("" if r.get(k) is None else repr(r[k]) if isinstance(r[k], float) else r[k])
                        for k in cols})


def read_records_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- statistics

def pearson(xs, ys) -> float:
    """Sample Pearson correlation; constant inputs raise ``UndefinedCorrelationError``."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"pearson needs two equal-length 1-D sequences, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValidationError("pearson needs at least 2 points")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant sequence")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


def pearson_or_none(xs, ys) -> float | None:
    try:
        return pearson(xs, ys)
    except UndefinedCorrelationError:
        return None


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of ``log y`` on ``log x`` and its standard error."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValidationError("log-log fit needs >= 2 strictly positive points")
    if x.size == 2:
        s = (math.log(y[1]) - math.log(y[0])) / (math.log(x[1]) - math.log(x[0]))
        return s, float("nan")
    fit = stats.linregress(np.log(x), np.log(y))
    return float(fit.slope), float(fit.stderr)


# ---------------------------------------------------------------- bound validation

def _beta(cfg: ExperimentConfig, env: LossEnvelope) -> float:
    if cfg.bounds.beta is not None:
        return cfg.bounds.beta
    r = env.r_xy if env.r_xy > 0 else 1.0
    return 0.9 * math.log(2.0) / (2.0 * r)


def _phi_symbol(tm: TrainedModel) -> bytes:
    rep = tm.rep
    return b"".join(np.ascontiguousarray(a, dtype=np.int64).tobytes()
                    for a in (rep.c_tables, rep.u_tables, tm.cls.tables, tm.rec.tables))


def _train_replicate(args) -> dict:
    """Train one replicate and measure everything that does not need the whole cell."""
    cfg, cell, n, m, rep_i, seed = args
    model = build_model(replace(cfg.generator, m=m))
    rng = np.random.default_rng(seed)
    xs, ys = model.sample(2 * n + 1, rng)
    train = MultiViewDataset(xs[:n], ys[:n], model.d, seed)
    tm = train_model(train, cfg.trainer, seed % 2 ** 32, model.x_card, model.y_card)
    g_cls = generalization_gap(model, tm.rep, tm.cls, train, "cls")
    g_rec = generalization_gap(model, tm.rep, tm.rec, train, "rec")
    # LOO: the training set plus one fresh sample inserted at a uniform index
    u = int(rng.integers(n + 1))
    lx = np.insert(xs[:n], u, xs[n], axis=0)
    ly = np.insert(ys[:n], u, ys[n])
    d_loo = delta_loo_from_losses(samplewise_losses(tm.rep, tm.cls, lx, ly, y_card=model.y_card), u)
    # supersample: training samples sit on the side chosen by each selector bit, ghosts opposite
    bits = rng.integers(0, 2, size=n)
    px = np.empty((n, 2, m), dtype=np.int64)
    py = np.empty((n, 2), dtype=np.int64)
    idx = np.arange(n)
    px[idx, bits], py[idx, bits] = xs[:n], ys[:n]
    px[idx, 1 - bits], py[idx, 1 - bits] = xs[n + 1:], ys[n + 1:]
    plan = SupersamplePlan(px, py, bits, model.d)
    d_sup = delta_sup_from_differences(paired_loss_differences(plan, tm.rep, tm.cls, y_card=model.y_card), bits)
    profile = estimate_info_profile(None, tm.rep, model=model)
    env = loss_envelope(model, tm.rep, train, rec=tm.rec, cls=tm.cls)
    return {"cell": cell, "n": n, "m": m, "replicate": rep_i, "seed": seed,
            "gap": g_cls.gap, "gap_rec": g_rec.gap, "empirical_risk": g_cls.empirical,
            "population_risk": g_cls.population, "empirical_risk_rec": g_rec.empirical,
            "population_risk_rec": g_rec.population, "delta_loo": d_loo, "delta_sup": d_sup,
            "_profile": profile, "_envelope": env, "_symbol": _phi_symbol(tm), "_d": model.d}


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=8))


def _finish_cell(cfg: ExperimentConfig, rows: list[dict]) -> list[dict]:
    """Attach the cell-level H_{1-lambda}(phi) and evaluate the bounds per replicate."""
    lam = cfg.bounds.lam
    _, counts = np.unique(np.array([r["_symbol"] for r in rows], dtype=object), return_counts=True)
    renyi = fi.renyi_from_probs(counts / counts.sum(), 1.0 - lam)
    out = []
    for r in rows:
        prof: InfoProfile = r.pop("_profile").replace(renyi_phi=renyi)
        env: LossEnvelope = r.pop("_envelope")
        d = r.pop("_d")
        r.pop("_symbol")
        beta = _beta(cfg, env)
        params = BoundParams(r["n"], r["m"], d, cfg.bounds.gamma, cfg.bounds.delta, lam, beta=beta,
                             xi=cfg.bounds.xi, empirical_risk=r["empirical_risk"])
        rec = dict(r)
        rec["interpolating"] = r["empirical_risk"] == 0.0
        for t in BOUND_THEOREMS:
            bd = evaluate_bound(t, prof, env, params)
            rec[f"bound_t{t}"] = bd.bound
            for k, v in bd.constants.items():
                rec[f"t{t}_{k}"] = v
        rec.update({f"env_{k}": v for k, v in env.__dict__.items()})
        rec.update(prof.to_json())
        out.append(rec)
    return out


def _coverage(flags) -> float | None:
    flags = list(flags)
    return float(np.mean(flags)) if flags else None


def validation_summary(records: list[dict], delta: float) -> dict:
    cells = {}
    for key, grp in itertools.groupby(records, key=lambda r: r["cell"]):
        g = list(grp)
        interp = [r for r in g if r["interpolating"]]
        cells[str(key)] = {
            "n": g[0]["n"], "m": g[0]["m"], "replicates": len(g), "interpolating": len(interp),
            "coverage_t1": _coverage(r["gap_rec"] <= r["bound_t1"] for r in g),
            "coverage_t3": _coverage(r["gap"] <= r["bound_t3"] for r in g),
            "coverage_t7": _coverage(r["gap"] <= r["bound_t7"] for r in interp),
            "t7_below_t3": _coverage(r["bound_t7"] < r["bound_t3"] for r in interp),
            "mean_gap": float(np.mean([r["gap"] for r in g])),
            "mean_gap_rec": float(np.mean([r["gap_rec"] for r in g])),
            "mean_bound_t1": float(np.mean([r["bound_t1"] for r in g])),
            "mean_bound_t3": float(np.mean([r["bound_t3"] for r in g])),
            "mean_bound_t7": float(np.mean([r["bound_t7"] for r in interp])) if interp else None,
            "mean_delta_loo": float(np.mean([r["delta_loo"] for r in g])),
            "mean_delta_sup": float(np.mean([r["delta_sup"] for r in g])),
        }
    covs = [c[k] for c in cells.values() for k in ("coverage_t1", "coverage_t3", "coverage_t7") if c[k] is not None]
    return {"cells": cells, "target_coverage": 1.0 - delta, "min_coverage": min(covs) if covs else None,
            "all_cells_covered": all(v >= 1.0 - delta for v in covs)}


def run_bound_validation(cfg: ExperimentConfig, workers: int = 1) -> StudyReport:
    """Coverage of Theorems 1, 3 and 7 over the ``(n, m)`` grid."""
    t0 = time.perf_counter()
    grid = [(n, m) for n in cfg.n_grid for m in cfg.m_grid]
    tasks = [(cfg, c, n, m, r, stream_seed(stream_seed(cfg.seed, c), r))
             for c, (n, m) in enumerate(grid) for r in range(cfg.replicates)]
    rows = _map(_train_replicate, tasks, workers)
    rows.sort(key=lambda r: (r["cell"], r["replicate"]))
    records = []
    for _, grp in itertools.groupby(rows, key=lambda r: r["cell"]):
        records += _finish_cell(cfg, list(grp))
    summary = validation_summary(records, cfg.bounds.delta)
    series = {}
    for m in cfg.m_grid:
        cs = [c for c in summary["cells"].values() if c["m"] == m]
        series[f"gap_m{m}"] = [(c["n"], c["mean_gap"]) for c in cs]
        series[f"bound_t3_m{m}"] = [(c["n"], c["mean_bound_t3"]) for c in cs]
    return StudyReport("validation", records, summary, config_to_dict(cfg),
                       {"seconds": time.perf_counter() - t0, "tasks": len(tasks), "workers": workers}, series)


# ---------------------------------------------------------------- correlation study

def _symbol_probes(model) -> np.ndarray:
    return np.repeat(np.arange(model.x_card)[:, None], model.m, axis=1)


def correlation_table(records: list[dict]) -> dict:
    gap = [r["gap"] for r in records]
    return {k: pearson_or_none([r[k] for r in records], gap) for k in CORRELATION_METRICS}


def directional_checks(table: dict) -> dict:
    """The orderings required of the sum metric I(phi;S) + mean CMI."""
    def gt(a, b):
        return table[a] is not None and table[b] is not None and table[a] > table[b]
    target = "i_phi_s+cmi"
    out = {"beats_num_params": gt(target, "num_params"), "beats_frobenius": gt(target, "frobenius_norm"),
           "cmi_beats_mi": gt(target, "i_phi_s+mi"), "bare_cmi_beats_bare_mi": gt("cmi", "mi")}
    out["pass"] = out["beats_num_params"] and out["beats_frobenius"] and out["cmi_beats_mi"]
    return out


def run_correlation_study(cfg: ExperimentConfig) -> StudyReport:
    """Pearson correlation of candidate complexity metrics with the classification gap."""
    t0 = time.perf_counter()
    cc = cfg.correlation
    model = build_model(cfg.generator)
    fp = ModelFingerprint("prediction", _symbol_probes(model))
    grid = list(itertools.product(cc.widths, cc.penalty_weights, cc.weight_decays))
    n_models = len(grid) * cc.seeds * cc.draws
    if n_models < 30:
        raise ValidationError(f"correlation study needs >= 30 trained models, config gives {n_models}")
    records, tables = [], []
    for rep in range(cc.repetitions):
        rs = stream_seed(cfg.seed, rep)
        draws = [MultiViewDataset(*model.sample(cc.n, np.random.default_rng(stream_seed(rs, 0xD000 + d))),
                                  model.d, stream_seed(rs, 0xD000 + d)) for d in range(cc.draws)]
        rep_records = []
        for ci, (w, pw, wd) in enumerate(grid):
            tcfg = replace(cfg.trainer, width=int(w), penalty_weight=float(pw), weight_decay=float(wd))

            def trainer(ds, s, tcfg=tcfg):
                return train_model(ds, tcfg, s, model.x_card, model.y_card)
            est = estimate_model_information(trainer, DataSource(model, cc.n, stream_seed(rs, 0xC000 + ci)),
                                             "full", cc.fingerprint_replicates, fp, lam=cfg.bounds.lam)
            for s in range(cc.seeds):
                for d, ds in enumerate(draws):
                    tm = trainer(ds, s)
                    g = generalization_gap(model, tm.rep, tm.cls, ds, "cls")
                    vt = exact_view_terms(model, tm.rep)
                    mi = float(np.mean([v["mi_z"] for v in vt]))
                    cmi = float(np.mean([v["cmi"] for v in vt]))
                    rep_records.append({
                        "repetition": rep, "config": ci, "width": int(w), "penalty_weight": float(pw),
                        "weight_decay": float(wd), "seed": s, "draw": d, "gap": g.gap,
                        "empirical_risk": g.empirical, "population_risk": g.population,
                        "num_params": tm.n_params, "frobenius_norm": tm.frobenius, "mi": mi, "cmi": cmi,
                        "i_phi_s": est.mi, "i_phi_s+mi": est.mi + mi, "i_phi_s+cmi": est.mi + cmi})
        table = correlation_table(rep_records)
        tables.append({"repetition": rep, "pearson": table, "checks": directional_checks(table)})
        records += rep_records
    passed = sum(t["checks"]["pass"] for t in tables)
    summary = {"models_per_repetition": n_models, "repetitions": cc.repetitions, "tables": tables,
               "directional_pass": passed, "directional_pass_rate": passed / cc.repetitions}
    series = {f"gap_vs_{k.replace('+', '_plus_')}": [(r[k], r["gap"]) for r in records if r["repetition"] == 0]
              for k in CORRELATION_METRICS}
    return StudyReport("correlation", records, summary, config_to_dict(cfg),
                       {"seconds": time.perf_counter() - t0}, series)


# ---------------------------------------------------------------- scaling study

def frozen_slopes(profile: InfoProfile, envelope: LossEnvelope, params: BoundParams, nms) -> dict:
    """Log-log slopes in ``nm`` with the profile and every constant frozen at ``params``.

    Holding the constants fixed isolates the analytic rate; the sensitivity
    term's slow ``sqrt(log nm)`` growth is reported by the live fit instead.
    """
    nms = np.asarray(sorted(set(int(v) for v in nms)), dtype=np.float64)
    out = {}
    for t in (1, 2, 3, 4):
        bd = evaluate_bound(t, profile, envelope, params)
        k1, k2 = list(bd.constants.values())[:2]
        vals = k1 * np.sqrt((bd.terms["info"] + k2) / nms)
        out[f"t{t}_sqrt_term"] = loglog_slope(nms, vals)
    bd = evaluate_bound(7, profile, envelope, replace(params, empirical_risk=0.0, xi=None))
    vals = (bd.terms["info"] + bd.constants["K_hat"]) / (nms * bd.constants["beta"])
    out["t7_interpolating"] = loglog_slope(nms, vals)
    return out


def _live_terms(profile: InfoProfile, envelope: LossEnvelope, params: BoundParams) -> dict:
    out = {f"t{t}_sqrt_term": evaluate_bound(t, profile, envelope, params).terms["sqrt_term"] for t in (1, 3)}
    if params.empirical_risk == 0:
        out["t7_interpolating"] = evaluate_bound(7, profile, envelope, replace(params, xi=None)).bound
    return out


def enumeration_check(cfg: ExperimentConfig, n: int = 12, seed: int = 0) -> dict:
    """Mean of delta_sup over all 2^n selectors for a fixed trained model (exactly 0)."""
    model = build_model(cfg.generator)
    rng = np.random.default_rng(stream_seed(seed, 0xE0))
    xs, ys = model.sample(2 * n, rng)
    plan = SupersamplePlan(xs.reshape(n, 2, model.m), ys.reshape(n, 2), np.zeros(n, dtype=np.int64), model.d)
    tm = train_model(plan.side(test=False), cfg.trainer, seed, model.x_card, model.y_card)
    mean, vals = delta_sup_enumeration(paired_loss_differences(plan, tm.rep, tm.cls, y_card=model.y_card))
    return {"n": n, "selectors": len(vals), "mean": mean, "max_abs": float(np.abs(vals).max())}


def run_scaling_study(cfg: ExperimentConfig, workers: int = 1) -> StudyReport:
    """Slopes of bound terms and of the measured mean |gap| against nm."""
    t0 = time.perf_counter()
    grid = [(n, m) for n in cfg.n_grid for m in cfg.m_grid]
    nms = sorted({n * m for n, m in grid})
    if len(nms) < 4:
        raise ValidationError(f"scaling study needs >= 4 distinct nm grid points, got {len(nms)}")
    if nms[-1] < 10 * nms[0]:
        raise ValidationError(f"scaling grid must span a decade in nm, got {nms[0]}..{nms[-1]}")
    tasks = [(cfg, c, n, m, r, stream_seed(stream_seed(cfg.seed, c), r))
             for c, (n, m) in enumerate(grid) for r in range(cfg.replicates)]
    rows = _map(_train_replicate, tasks, workers)
    rows.sort(key=lambda r: (r["cell"], r["replicate"]))
    records = []
    for _, grp in itertools.groupby(rows, key=lambda r: r["cell"]):
        records += _finish_cell(cfg, list(grp))
    by_nm: dict[int, list] = {}
    for r in records:
        by_nm.setdefault(r["n"] * r["m"], []).append(r)
    xs = np.array(sorted(by_nm), dtype=np.float64)
    mean_abs_gap = np.array([np.mean([abs(r["gap"]) for r in by_nm[k]]) for k in sorted(by_nm)])
    live = {}
    for name in ("bound_t1", "bound_t3"):
        ys = np.array([np.mean([r[name] for r in by_nm[k]]) for k in sorted(by_nm)])
        live[name] = loglog_slope(xs, ys)
    keep = mean_abs_gap > 0
    gap_slope = loglog_slope(xs[keep], mean_abs_gap[keep]) if keep.sum() >= 2 else (None, None)

    # frozen profile: the first replicate of the first cell, retrained (its row was consumed above)
    first = tasks[0]
    ref_row = _train_replicate(first)
    ref_params = BoundParams(first[2], first[3], ref_row["_d"], cfg.bounds.gamma, cfg.bounds.delta, cfg.bounds.lam,
                             beta=_beta(cfg, ref_row["_envelope"]))
    prof = ref_row["_profile"].replace(renyi_phi=records[0]["renyi_phi"])
    frozen = frozen_slopes(prof, ref_row["_envelope"], ref_params, nms)
    summary = {
        "nm": [int(v) for v in xs],
        "mean_abs_gap": mean_abs_gap.tolist(),
        "gap_slope": {"slope": gap_slope[0], "stderr": gap_slope[1], "points": int(keep.sum())},
        "live_bound_slopes": {k: {"slope": s, "stderr": e} for k, (s, e) in live.items()},
        "frozen_slopes": {k: {"slope": s, "stderr": e} for k, (s, e) in frozen.items()},
        "expected": {"sqrt_terms": -0.5, "t7_interpolating": -1.0},
        "delta_sup_enumeration": enumeration_check(cfg, seed=cfg.seed),
    }
    series = {"mean_abs_gap": list(zip(xs.tolist(), mean_abs_gap.tolist()))}
    return StudyReport("scaling", records, summary, config_to_dict(cfg), {"seconds": time.perf_counter() - t0},
                       series)


# ---------------------------------------------------------------- model-information chain

def _chain_fingerprint(n: int, m: int) -> ModelFingerprint:
    # count tables take values 0..nm, so this quantization is exact
    return ModelFingerprint("quantized", levels=2 * n * m + 1, weight_range=float(n * m))


def run_chain_study(cfg: ExperimentConfig) -> StudyReport:
    """Repeated plug-in estimates of I(phi; U~), I(phi; U) and I(phi; S) on the count-table trainer."""
    t0 = time.perf_counter()
    ch = cfg.chain
    model = build_model(cfg.generator)
    fp = _chain_fingerprint(ch.n, model.m)

    def trainer(ds, _seed):
        return train_count_table(ds, model.x_card, model.y_card)
    records = []
    for s in range(ch.studies):
        src = DataSource(model, ch.n, stream_seed(cfg.seed, s))
        est = {k: estimate_model_information(trainer, src, k, ch.replicates, fp, lam=cfg.bounds.lam)
               for k in ("supersample", "loo", "full")}
        combined = math.sqrt(est["supersample"].stderr ** 2 + est["full"].stderr ** 2)
        records.append({
            "study": s, "seed": src.seed, "n": ch.n, "m": model.m, "replicates": ch.replicates,
            "mi_phi_usup": est["supersample"].mi, "se_usup": est["supersample"].stderr,
            "mi_phi_u": est["loo"].mi, "se_u": est["loo"].stderr,
            "mi_phi_s": est["full"].mi, "se_s": est["full"].stderr,
            "h_phi_given_usup": est["supersample"].h_phi_given, "h_phi_given_u": est["loo"].h_phi_given,
            "h_phi": est["full"].h_phi, "renyi_phi": est["full"].renyi_phi, "combined_se": combined,
            "holds": est["supersample"].mi <= est["full"].mi + combined})
    rate = float(np.mean([r["holds"] for r in records]))
    summary = {"studies": ch.studies, "replicates": ch.replicates, "hold_rate": rate,
               "mean_mi_phi_usup": float(np.mean([r["mi_phi_usup"] for r in records])),
               "mean_mi_phi_u": float(np.mean([r["mi_phi_u"] for r in records])),
               "mean_mi_phi_s": float(np.mean([r["mi_phi_s"] for r in records]))}
    return StudyReport("chain", records, summary, config_to_dict(cfg), {"seconds": time.perf_counter() - t0})
