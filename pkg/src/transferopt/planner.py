"""Choosing source weights and transfer quantities.

Single source: the optimal weight has the closed form 1/(1 + t*N1), where
t is the Fisher-scaled squared distance between source and target divided
by the dimension. Multiple sources: minimize alpha^T M alpha over the
probability simplex, where M couples per-source sampling variance (its
diagonal) with the pairwise direction geometry; the minimizing shares,
together with s* = 1/t*, give every source's weight. Quantities are always
the full budgets, using fewer source samples is never better, and a
diagnostic sub-budget curve lets users watch that monotonicity instead of
trusting it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .fisher import FisherOperator
from .kl import KlPrediction, predict_kl_multi, predict_kl_single
from .rng import derive_rng

__all__ = [
    "QpMatrix",
    "QpSolution",
    "TransferPlan",
    "single_source_weight",
    "build_qp_matrix",
    "solve_simplex_qp",
    "optimal_plan",
    "plan_from_parameters",
    "sub_budget_curve",
    "composed_quantity_objective",
    "composed_quantity_derivative",
    "project_to_simplex",
]

# fixed internal stream for the power iteration start vector
_POWER_SEED = 0x9E3779B9


@dataclass
class QpMatrix:
    """The K x K quadratic coefficient matrix with its provenance."""

    m: np.ndarray
    budgets: np.ndarray
    d: int
    gram: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("qp matrix must be square")
        if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ValueError("qp matrix must be symmetric")
        self.m = 0.5 * (m + m.T)
        self.budgets = np.asarray(self.budgets, dtype=float)
        if self.budgets.shape != (m.shape[0],):
            raise ValueError("need one budget per row of the qp matrix")
        bound = 1.0 / self.budgets
        if np.any(np.diag(self.m) < bound - 1e-9 * np.maximum(1.0, bound)):
            raise ValueError("qp diagonal fell below the sampling floor 1/N_i")
        evs = np.linalg.eigvalsh(self.m)
        if evs[0] < -1e-10 * max(float(np.trace(self.m)), 0.0):
            raise ValueError("qp matrix must be positive semi-definite")

    @property
    def k(self):
        return self.m.shape[0]


@dataclass
class QpSolution:
    alpha: np.ndarray
    value: float
    iterations: int
    gap: float

    def __iter__(self):
        # unpackable as (alpha, t*); iterations and gap stay attributes
        return iter((self.alpha, self.value))


@dataclass
class TransferPlan:
    """Weights and quantities for every source, with derived diagnostics."""

    weights: np.ndarray
    quantities: np.ndarray
    alpha: np.ndarray
    s: float
    t: float
    predicted_kl: KlPrediction
    solver_iterations: int = 0
    solver_gap: float = 0.0

    def to_json_dict(self):
        return {
            "alpha": [float(a) for a in self.alpha],
            "weights": [float(w) for w in self.weights],
            "quantities": [int(n) for n in self.quantities],
            "s": float(self.s),
            "t": float(self.t),
            "predicted_kl": {
                "variance_term": float(self.predicted_kl.variance_term),
                "bias_term": float(self.predicted_kl.bias_term),
                "total": float(self.predicted_kl.total),
            },
            "solver": {
                "iterations": int(self.solver_iterations),
                "gap": float(self.solver_gap),
            },
        }


def single_source_weight(t, n_source):
    """Closed-form optimal weight for a single source, 1/(1 + t*N1)."""
    if t < 0 or n_source < 1:
        raise ValueError("need t >= 0 and a positive source budget")
    return 1.0 / (1.0 + float(t) * float(n_source))


def composed_quantity_objective(n_target, n, t, d):
    """Predicted measure at quantity ``n`` with the weight re-optimized
    for that quantity. ``n`` may be any nonnegative real, so the function
    is smooth and finite-difference checks of the derivative apply.
    """
    if n < 0:
        raise ValueError("quantity must be nonnegative")
    w = 1.0 / (1.0 + float(t) * float(n))
    return predict_kl_single(n_target, n, w, t, d).total


def composed_quantity_derivative(n_target, n, t, d):
    """Exact derivative of the composed objective in the quantity.

    Substituting the optimal weight reduces the objective to
    (d/2)(1+t*n)/(N0 + n + N0*n*t), whose derivative is
    -d / (2 (N0 + n + N0*n*t)^2), strictly negative for all n >= 0.
    """
    n0 = float(n_target)
    nn = float(n)
    tt = float(t)
    denom = n0 + nn + n0 * nn * tt
    return -d / (2.0 * denom * denom)


def build_qp_matrix(directions, fisher, budgets, d):
    """Assemble M = (diag(d/N_i) + Theta^T J Theta) / d.

    ``fisher`` may be a dense FisherOperator, a gram-mode operator built
    against the same directions, or an already-computed K x K array.
    """
    nb = np.asarray(budgets, dtype=float)
    if nb.ndim != 1 or np.any(nb < 1):
        raise ValueError("budgets must be a vector of counts >= 1")
    k = len(nb)
    if isinstance(fisher, FisherOperator):
        if fisher.mode == "dense":
            th = np.asarray(directions, dtype=float)
            if th.ndim != 2 or th.shape[1] != k:
                raise ValueError(
                    f"directions must have one column per source, got {th.shape}"
                )
            gram = fisher.gram(th)
        else:
            gram = fisher.gram()
    else:
        gram = np.asarray(fisher, dtype=float)
    if gram.shape != (k, k):
        raise ValueError(f"gram block must be {k}x{k}, got {gram.shape}")
    m = (np.diag(d / nb) + gram) / float(d)
    return QpMatrix(m=m, budgets=nb, d=int(d), gram=gram)


def project_to_simplex(v):
    """Euclidean projection onto the probability simplex (sort based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1.0))[0][-1]
    lam = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - lam, 0.0)


def solve_simplex_qp(m, max_iter=200000, gap_rtol=1e-12):
    """Minimize alpha^T M alpha over the probability simplex.

    Accelerated projected gradient with a function-value restart. The step
    is 1/(2L) with L estimated by power iteration from a fixed internal
    stream; termination is on the Frank-Wolfe gap
    ``grad . alpha - min_i grad_i <= gap_rtol * trace(M)``, a certificate
    of global optimality for a convex objective on the simplex.
    """
    m = np.asarray(getattr(m, "m", m), dtype=float)
    k = m.shape[0]
    if k == 1:
        return QpSolution(np.array([1.0]), float(m[0, 0]), 0, 0.0)
    trace = float(np.trace(m))
    tol = gap_rtol * max(trace, 0.0)

    rng = derive_rng(_POWER_SEED)
    v = rng.standard_normal(k)
    v /= np.linalg.norm(v)
    for _ in range(200):
        w = m @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            break
        v = w / nw
    lam_max = max(float(v @ m @ v) * 1.01, 1e-30)
    step = 1.0 / (2.0 * lam_max)

    alpha = np.full(k, 1.0 / k)
    y = alpha.copy()
    tk = 1.0
    f_prev = float(alpha @ m @ alpha)
    gap = np.inf
    for it in range(1, max_iter + 1):
        grad_y = 2.0 * (m @ y)
        a_new = project_to_simplex(y - step * grad_y)
        f_new = float(a_new @ m @ a_new)
        grad = 2.0 * (m @ a_new)
        gap = float(grad @ a_new - grad.min())
        if gap <= tol:
            return QpSolution(a_new, f_new, it, gap)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        if f_new > f_prev:  # momentum overshot, restart it
            y = a_new
            tk = 1.0
        else:
            y = a_new + ((tk - 1.0) / t_next) * (a_new - alpha)
            tk = t_next
        alpha = a_new
        f_prev = f_new
    raise ConvergenceError(
        f"simplex qp did not reach tolerance in {max_iter} iterations",
        last_iterate=alpha,
        residual=gap,
    )


def optimal_plan(qp, budgets=None, n_target=None, d=None):
    """Full pipeline: solve for the shares, then s* = 1/t*, then weights.

    ``qp`` is a QpMatrix; budgets and d default to its provenance.
    Quantities are always the full budgets.
    """
    if isinstance(qp, QpMatrix):
        budgets = qp.budgets if budgets is None else np.asarray(budgets, float)
        d = qp.d if d is None else int(d)
        m = qp.m
    else:
        m = np.asarray(qp, dtype=float)
        budgets = np.asarray(budgets, dtype=float)
    if n_target is None:
        raise ValueError("n_target is required")
    sol = solve_simplex_qp(m)
    t_star = sol.value
    if t_star <= 0.0:
        raise ConvergenceError("qp value must be positive", residual=t_star)
    s_star = 1.0 / t_star
    weights = s_star * sol.alpha / budgets
    quantities = budgets.astype(int)
    predicted = predict_kl_multi(n_target, budgets, weights, m, d)
    return TransferPlan(
        weights=weights,
        quantities=quantities,
        alpha=sol.alpha,
        s=s_star,
        t=t_star,
        predicted_kl=predicted,
        solver_iterations=sol.iterations,
        solver_gap=sol.gap,
    )


def plan_from_parameters(family, target_params, source_params, budgets,
                         n_target, fisher_operator=None):
    """Convenience pipeline from raw parameter vectors.

    Builds the direction columns, evaluates the information matrix at the
    target parameters (analytic by default), and returns the optimal plan.
    """
    from .fisher import analytic_fisher  # local to avoid import noise

    th0 = np.asarray(target_params, dtype=float)
    cols = [np.asarray(p, dtype=float) - th0 for p in source_params]
    directions = np.stack(cols, axis=1)
    fop = fisher_operator or analytic_fisher(family, th0)
    qp = build_qp_matrix(directions, fop, budgets, family.dim)
    return optimal_plan(qp, n_target=n_target)


def sub_budget_curve(qp, n_target, fractions):
    """Predicted optimum when only a fraction of each budget may be used.

    For each fraction f the matrix is rebuilt with quantities
    ``max(1, floor(f * N_i))`` and re-solved. The resulting totals are
    nonincreasing in f, which is the observable form of the
    use-all-samples result.
    """
    if not isinstance(qp, QpMatrix):
        raise ValueError("sub_budget_curve needs a QpMatrix with provenance")
    out = []
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError("fractions must lie in (0, 1]")
        quant = np.maximum(1, np.floor(f * qp.budgets)).astype(float)
        m_f = build_qp_matrix(None, qp.gram, quant, qp.d)
        plan = optimal_plan(m_f, n_target=n_target)
        out.append((float(f), plan.predicted_kl.total))
    return out
