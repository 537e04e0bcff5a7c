"""Independent oracles shared across the test modules.

Everything here is written from the closed forms directly, without calling
into the package, so a transcription slip in the library cannot hide. Keep
these dumb and obvious.
"""

import itertools
import json
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def predicted_single_oracle(n0, n1, w, t, d):
    # independent transcription of the single-source prediction
    denom = (n0 + w * n1) ** 2
    return 0.5 * d * ((n0 + w * w * n1) / denom + w * w * n1 * n1 * t / denom)


def predicted_multi_oracle(n0, s, t, d):
    # independent transcription of the multi-source prediction at mass s
    denom = (n0 + s) ** 2
    return 0.5 * d * (n0 / denom + s * s * t / denom)


def plan_total_oracle(n0, b, m, d):
    """Objective at raw masses b_i = w_i N_i, eliminating alpha.

    alpha = b/s with s = sum(b) gives t = b'Mb / s^2, so the predicted
    total collapses to (d/2) (n0 + b'Mb) / (n0 + s)^2.
    """
    b = np.asarray(b, dtype=float)
    s = b.sum()
    if s == 0:
        return 0.5 * d / n0
    return 0.5 * d * (n0 + b @ m @ b) / (n0 + s) ** 2


def rand_psd(rng, k):
    a = rng.standard_normal((k, k))
    return a.T @ a / k


def naive_simplex_minimum(m, step):
    """Plain full enumeration of the lattice simplex, no shortcuts."""
    r = int(round(1.0 / step))
    k = m.shape[0]
    best_alpha, best_val = None, np.inf
    for head in itertools.product(range(r + 1), repeat=k - 1):
        used = sum(head)
        if used > r:
            continue
        alpha = np.asarray(head + (r - used,), dtype=float) / r
        val = float(alpha @ m @ alpha)
        if val < best_val:
            best_val = val
            best_alpha = alpha
    return best_alpha, best_val


def fd_gradient(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
