"""Independent reference implementations used by the tests.

Nothing here imports the package's numerical code: entropies are summed cell
by cell in pure Python, common information is brute-forced over every pair of
deterministic functions, and the bound formulas are re-coded in mpmath.
"""
from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np

mp.mp.dps = 50


# ---------------------------------------------------------------- entropies

def marginal(probs: np.ndarray, keep: tuple[int, ...]) -> dict:
    """Marginal as ``{cell tuple: mass}`` by explicit iteration."""
    out: dict = {}
    for idx in itertools.product(*(range(s) for s in probs.shape)):
        p = float(probs[idx])
        if p == 0.0:
            continue
        key = tuple(idx[k] for k in keep)
        out[key] = out.get(key, 0.0) + p
    return out


def entropy(probs: np.ndarray, keep: tuple[int, ...]) -> float:
    m = marginal(probs, keep)
    return -math.fsum(p * math.log(p) for p in m.values() if p > 0)


def mutual_information(probs, a, b) -> float:
    return entropy(probs, a) + entropy(probs, b) - entropy(probs, tuple(a) + tuple(b))


def cmi(probs, a, b, g) -> float:
    a, b, g = tuple(a), tuple(b), tuple(g)
    return entropy(probs, a + g) + entropy(probs, b + g) - entropy(probs, a + b + g) - entropy(probs, g)


def mi_direct(joint) -> float:
    """``sum p log(p / (p_x p_y))`` for a 2-D table."""
    joint = np.asarray(joint, dtype=float)
    px, py = joint.sum(axis=1), joint.sum(axis=0)
    return math.fsum(joint[i, j] * math.log(joint[i, j] / (px[i] * py[j]))
                     for i in range(joint.shape[0]) for j in range(joint.shape[1]) if joint[i, j] > 0)


def kl(p, q) -> float:
    return math.fsum(a * math.log(a / b) for a, b in zip(p, q) if a > 0)


def renyi(p, alpha) -> float:
    return float(mp.log(mp.fsum(mp.mpf(x) ** alpha for x in p if x > 0)) / (1 - mp.mpf(alpha)))


# ---------------------------------------------------------------- common information

def gk_brute_force(j2: np.ndarray, codomain: int = 4) -> tuple[float, tuple]:
    """Max H(f(X1)) over pairs (f, g) with f(X1) = g(X2) almost surely.

    Every ``f: X1 -> [codomain]`` and ``g: X2 -> [codomain]`` is enumerated;
    returns the value and the partition of the live X1 symbols it induces.
    """
    a, b = j2.shape
    fs = np.array(list(itertools.product(range(codomain), repeat=a)), dtype=np.int64)
    gs = np.array(list(itertools.product(range(codomain), repeat=b)), dtype=np.int64)
    sup = np.argwhere(j2 > 0)
    # agree[f, g] iff f(x1) == g(x2) on every support cell
    agree = np.ones((len(fs), len(gs)), dtype=bool)
    for x1, x2 in sup:
        agree &= fs[:, x1][:, None] == gs[:, x2][None, :]
    ok_f = np.flatnonzero(agree.any(axis=1))
    p1 = j2.sum(axis=1)
    best, best_part = -1.0, None
    for fi in ok_f:
        f = fs[fi]
        masses: dict = {}
        for x in range(a):
            if p1[x] > 0:
                masses[f[x]] = masses.get(f[x], 0.0) + float(p1[x])
        h = -math.fsum(p * math.log(p) for p in masses.values() if p > 0)
        if h > best:
            best = h
            groups: dict = {}
            for x in range(a):
                if p1[x] > 0:
                    groups.setdefault(int(f[x]), []).append(x)
            best_part = tuple(sorted(tuple(g) for g in groups.values()))
    return best, best_part


def partition_of(labels, p1) -> tuple:
    groups: dict = {}
    for x, lab in enumerate(labels):
        if p1[x] > 0:
            groups.setdefault(int(lab), []).append(x)
    return tuple(sorted(tuple(g) for g in groups.values()))


# ---------------------------------------------------------------- bounds

def _sens(c_phi, d, nm, gamma):
    return mp.mpf(c_phi) * mp.sqrt(d * mp.log(mp.sqrt(nm) / gamma) / 2)


def bound_t1(n, m, gamma, delta, c_phi, r, rs, h_c, h_u_sum, d=1):
    nm = mp.mpf(n * m)
    k1 = 2 * mp.sqrt(2) * r
    k2 = _sens(c_phi, d, nm, gamma) + mp.log(2 / mp.mpf(delta))
    k3 = gamma * r + rs * mp.sqrt(gamma) / nm ** mp.mpf(0.25) * mp.sqrt(2 * mp.log(2 / mp.mpf(delta)))
    return k1 * mp.sqrt((h_c + h_u_sum + k2) / nm) + k3 / mp.sqrt(nm), (k1, k2, k3)


def bound_t3(n, m, gamma, delta, c_phi, r, rs, y_card, cmi_sum, h_z, d=1):
    nm = mp.mpf(n * m)
    k1 = 2 * mp.sqrt(2) * r * mp.sqrt(y_card)
    k2 = _sens(c_phi, d, nm, gamma) + mp.log(2 * y_card / mp.mpf(delta)) + h_z
    k3 = gamma * r + rs * mp.sqrt(gamma * y_card) / nm ** mp.mpf(0.25) * mp.sqrt(2 * mp.log(2 * y_card / mp.mpf(delta)))
    return k1 * mp.sqrt((cmi_sum + k2) / nm) + k3 / mp.sqrt(nm), (k1, k2, k3)


def bound_t7_interpolating(n, m, gamma, delta, lam, beta, c_phi, y_card, cmi_sum, renyi_phi, h_z, d=1):
    nm = mp.mpf(n * m)
    khat = (_sens(c_phi, d, nm, gamma) + mp.log(1 / mp.mpf(delta)) / lam + mp.log(4 * y_card / mp.mpf(delta)) + h_z)
    return (cmi_sum + renyi_phi + khat) / (nm * beta), khat


def bound_t5(sigma, lam, delta, y_card, info=0, h=0, c_phi=0, n=1, m=1, gamma=1, d=1):
    k2 = _sens(c_phi, d, n * m, gamma) + mp.log(1 / mp.mpf(delta)) / lam + mp.log(4 * y_card / mp.mpf(delta)) + h
    return mp.sqrt(2) * sigma * mp.sqrt(info + k2)


def xi_min(beta, r):
    x = 2 * mp.mpf(beta) * r
    return mp.log(2 - mp.exp(x)) / x - 1
