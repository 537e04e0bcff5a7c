"""The generalization measure, evaluated three ways.

1. ``kl_exact``: closed-form divergence between two members of a family.
2. ``predict_kl_single`` / ``predict_kl_multi``: the asymptotic predictions,
   split into their sampling-variance and domain-shift terms.
3. ``mc_expected_kl``: seeded Monte Carlo over repeated estimation trials,
   the oracle everything else is checked against.

``mse_kl_bridge`` relates the measure to a Fisher-weighted mean squared
error, the quadratic approximation that underlies the predictions.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedFamilyError
from .fisher import analytic_fisher
from .rng import derive_rng
from .weighted_mle import SourceBlock, WeightedDataset, fit_weighted_mle

__all__ = [
    "KlPrediction",
    "MonteCarloEstimate",
    "kl_exact",
    "predict_kl_single",
    "predict_kl_multi",
    "mc_expected_kl",
    "mse_kl_bridge",
]


@dataclass
class KlPrediction:
    """Asymptotic prediction split into its two nonnegative terms.

    ``total = (d/2) * (variance_term + bias_term)``; the terms themselves
    are dimension-free.
    """

    variance_term: float
    bias_term: float
    total: float


@dataclass
class MonteCarloEstimate:
    mean: float
    std_error: float
    trials: int
    master_seed: int


def kl_exact(family, theta_p, theta_q):
    """Divergence from the distribution at ``theta_p`` to ``theta_q``."""
    fn = getattr(family, "kl_divergence", None)
    if fn is None:
        raise UnsupportedFamilyError(
            f"no closed-form divergence for family '{family.name}'"
        )
    return fn(theta_p, theta_q)


def predict_kl_single(n_target, n_source, weight, t, d):
    """Asymptotic measure for one source with quantity ``n_source`` and
    weight ``weight``; ``t`` is the Fisher-scaled squared source distance
    divided by ``d``.
    """
    if n_target < 1 or n_source < 0 or weight < 0 or t < 0 or d < 1:
        raise ValueError("invalid prediction inputs")
    n0 = float(n_target)
    n1 = float(n_source)
    w = float(weight)
    denom = (n0 + w * n1) ** 2
    variance = (n0 + w * w * n1) / denom
    bias = (w * w) * (n1 * n1) * t / denom
    return KlPrediction(variance, bias, 0.5 * d * (variance + bias))


def _qp_matrix_array(qp_matrix):
    m = getattr(qp_matrix, "m", qp_matrix)
    return np.asarray(m, dtype=float)


def predict_kl_multi(n_target, budgets, weights, qp_matrix, d):
    """Asymptotic measure for K weighted sources at full budget quantities.

    The per-source masses are ``b_i = w_i N_i``; with ``s = sum b`` and
    shares ``alpha = b/s`` the measure is
    ``(d/2) [ N0/(N0+s)^2 + s^2 (alpha^T M alpha)/(N0+s)^2 ]``.
    At ``s = 0`` the share vector is undefined, the bias term is set to 0
    (its coefficient vanishes there, so the function stays continuous).
    """
    n0 = float(n_target)
    if n0 < 1 or d < 1:
        raise ValueError("invalid prediction inputs")
    nb = np.asarray(budgets, dtype=float)
    w = np.asarray(weights, dtype=float)
    if nb.shape != w.shape or nb.ndim != 1:
        raise ValueError("budgets and weights must be matching vectors")
    if np.any(nb < 1) or np.any(w < 0):
        raise ValueError("budgets must be >= 1 and weights nonnegative")
    m = _qp_matrix_array(qp_matrix)
    b = w * nb
    s = float(b.sum())
    if s == 0.0:
        variance = 1.0 / n0
        bias = 0.0
    else:
        alpha = b / s
        t = float(alpha @ m @ alpha)
        variance = n0 / (n0 + s) ** 2
        bias = (s * s) * t / (n0 + s) ** 2
    return KlPrediction(variance, bias, 0.5 * d * (variance + bias))


def _trial_kl(family, ensemble, weights, quantities, seed_path):
    rng = derive_rng(*seed_path)
    target = family.sample(ensemble.target_params, ensemble.target_budget, rng)
    blocks = []
    for th, n, w in zip(ensemble.source_params, quantities, weights):
        draws = family.sample(th, int(n), rng)
        blocks.append(SourceBlock(samples=draws, weight=float(w)))
    est = fit_weighted_mle(family, WeightedDataset(target, blocks))
    return kl_exact(family, ensemble.target_params, est)


def mc_expected_kl(family, ensemble, plan, trials, master_seed, threads=1,
                   seed_prefix=()):
    """Monte Carlo estimate of the expected divergence under a plan.

    Each trial draws a fresh target dataset and fresh source datasets of
    the plan's quantities, fits the weighted MLE with the plan's weights,
    and measures the divergence from the true target distribution. Trials
    derive their streams from (master_seed, *seed_prefix, trial), so the
    result is identical at any thread count.
    """
    trials = int(trials)
    if trials < 2:
        raise ValueError("need at least 2 trials for a standard error")
    weights = np.asarray(plan.weights, dtype=float)
    quantities = np.asarray(plan.quantities)
    values = np.empty(trials)

    def run_block(lo, hi):
        for i in range(lo, hi):
            try:
                values[i] = _trial_kl(
                    family, ensemble, weights, quantities,
                    (int(master_seed), *seed_prefix, i),
                )
            except Exception as err:  # keep the type, attach the trial
                raise type(err)(f"trial {i}: {err}") from err

    threads = max(1, int(threads))
    if threads == 1:
        run_block(0, trials)
    else:
        chunk = -(-trials // threads)
        spans = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(lambda s: run_block(*s), spans))

    mean = float(values.mean())
    std_error = float(values.std(ddof=1) / np.sqrt(trials))
    return MonteCarloEstimate(mean, std_error, trials, int(master_seed))


def mse_kl_bridge(family, theta_true, estimates):
    """Mean divergence vs half the Fisher-weighted second moment.

    Returns ``(lhs, rhs)`` where lhs averages ``kl_exact(theta_true, est)``
    and rhs is ``0.5 * tr(J(theta_true) Cov)`` with Cov the empirical
    second-moment matrix of the estimation errors.
    """
    ests = [np.asarray(e, dtype=float) for e in estimates]
    if len(ests) < 2:
        raise ValueError("need at least two estimates")
    lhs = float(np.mean([kl_exact(family, theta_true, e) for e in ests]))
    th0 = np.asarray(theta_true, dtype=float)
    errs = np.stack([e - th0 for e in ests])
    cov = (errs.T @ errs) / len(ests)
    j = analytic_fisher(family, theta_true).matrix
    rhs = float(0.5 * np.trace(j @ cov))
    return lhs, rhs
