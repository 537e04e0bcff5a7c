"""Weighted maximum likelihood: closed forms, iterative agreement, the
mixture interpretation, and the estimator's exact mean."""

import numpy as np
import pytest

from transferopt import (
    ConvergenceError,
    FitOptions,
    SourceBlock,
    UnsupportedFamilyError,
    WeightedDataset,
    fit_weighted_mle,
    mixture_view,
)
from transferopt.rng import derive_rng
from transferopt.weighted_mle import weighted_loglik, weighted_loglik_grad

from helpers import fd_gradient


def test_binary_half_weight_counts(cat2):
    # target counts (2,1), source (0,2) at weight 0.5 -> pooled (2,2)
    data = WeightedDataset(np.array([0, 0, 1]),
                           [SourceBlock(np.array([1, 1]), 0.5)])
    theta = fit_weighted_mle(cat2, data)
    assert theta.shape == (1,)
    assert theta[0] == 0.5


def test_zero_weights_reduce_to_target_mle(cat3, gauss3):
    xs = np.array([0, 1, 1, 2, 0, 0])
    with_dead_source = WeightedDataset(
        xs, [SourceBlock(np.array([2, 2, 2, 2]), 0.0)])
    alone = WeightedDataset(xs, [])
    assert np.array_equal(fit_weighted_mle(cat3, with_dead_source),
                          fit_weighted_mle(cat3, alone))

    ys = gauss3.sample(np.array([1.0, 0.0, -1.0]), 30, 4)
    zs = gauss3.sample(np.array([5.0, 5.0, 5.0]), 30, 5)
    assert np.array_equal(
        fit_weighted_mle(gauss3, WeightedDataset(ys, [SourceBlock(zs, 0.0)])),
        fit_weighted_mle(gauss3, WeightedDataset(ys, [])))


def test_gaussian_weighted_mean(gauss3):
    target = gauss3.sample(np.zeros(3), 20, 1)
    s1 = gauss3.sample(np.ones(3), 35, 2)
    s2 = gauss3.sample(-np.ones(3), 15, 3)
    w1, w2 = 0.8, 0.3
    data = WeightedDataset(target, [SourceBlock(s1, w1), SourceBlock(s2, w2)])
    want = ((target.sum(axis=0) + w1 * s1.sum(axis=0) + w2 * s2.sum(axis=0))
            / (20 + w1 * 35 + w2 * 15))
    got = fit_weighted_mle(gauss3, data)
    assert np.max(np.abs(got - want)) <= 1e-10


def test_newton_agrees_with_closed_form(cat3, gauss3, rng):
    xs = cat3.sample(np.array([0.25, 0.45]), 60, 8)
    src = cat3.sample(np.array([0.5, 0.2]), 80, 9)
    data = WeightedDataset(xs, [SourceBlock(src, 0.6)])
    closed = fit_weighted_mle(cat3, data)
    newton = fit_weighted_mle(cat3, data, FitOptions(method="newton"))
    assert np.linalg.norm(closed - newton) <= 1e-8

    ys = gauss3.sample(np.array([0.2, -0.4, 1.0]), 25, 10)
    src_g = gauss3.sample(np.array([1.2, 0.1, 0.0]), 40, 11)
    data_g = WeightedDataset(ys, [SourceBlock(src_g, 1.3)])
    closed_g = fit_weighted_mle(gauss3, data_g)
    newton_g = fit_weighted_mle(gauss3, data_g, FitOptions(method="newton"))
    assert np.linalg.norm(closed_g - newton_g) <= 1e-8


def test_weight_scaling_matches_duplication(cat3):
    """Multiplying a block's weight by an integer k equals handing the
    estimator k copies of the block, exactly (counts are linear)."""
    target = np.array([0, 1, 2, 0, 1, 0])
    src = np.array([2, 2, 1, 0, 2])
    w = 0.5
    scaled = fit_weighted_mle(
        cat3, WeightedDataset(target, [SourceBlock(src, 4 * w)]))
    duplicated = fit_weighted_mle(
        cat3, WeightedDataset(target, [SourceBlock(np.tile(src, 4), w)]))
    assert np.array_equal(scaled, duplicated)


def test_single_source_interpolation_is_monotone(cat3):
    # target leans on outcome 0, source on outcome 2; every coordinate of
    # the fit should move one way as the weight grows
    target = np.array([0] * 6 + [1] * 2 + [2] * 2)
    src = np.array([2] * 7 + [1] * 2 + [0] * 1)
    grid = np.concatenate([[0.0], np.logspace(-3, 6, 40)])
    fits = np.array([
        fit_weighted_mle(cat3, WeightedDataset(target, [SourceBlock(src, w)]))
        for w in grid
    ])
    target_emp = np.array([0.6, 0.2])
    source_emp = np.array([0.1, 0.2])
    assert np.max(np.abs(fits[0] - target_emp)) <= 1e-15
    assert np.max(np.abs(fits[-1] - source_emp)) <= 1e-6  # w = 1e6
    diffs = np.diff(fits, axis=0)
    for j in range(2):
        direction = np.sign(source_emp[j] - target_emp[j])
        assert np.all(direction * diffs[:, j] >= -1e-15)


def test_estimator_mean_is_the_weighted_mixture(cat3):
    """Over 2000 seeded trials the estimator's mean lands within 3 standard
    errors of (N0 th0 + w n1 th1) / (N0 + w n1), coordinate by coordinate."""
    th0 = np.array([0.3, 0.4])
    n0, n1, w, c = 200, 300, 0.7, 1.0
    u = np.array([0.8, -0.6])
    th1 = th0 + (c / np.sqrt(n0)) * u
    cat3.validate(th1)

    trials = 2000
    fits = np.empty((trials, 2))
    for tr in range(trials):
        r = derive_rng(123, tr)
        data = WeightedDataset(cat3.sample(th0, n0, r),
                               [SourceBlock(cat3.sample(th1, n1, r), w)])
        fits[tr] = fit_weighted_mle(cat3, data)

    expected = (n0 * th0 + w * n1 * th1) / (n0 + w * n1)
    mean = fits.mean(axis=0)
    se = fits.std(axis=0, ddof=1) / np.sqrt(trials)
    assert np.all(np.abs(mean - expected) <= 3.0 * se)


def test_mixture_view_coefficients(cat3, cat2, gauss3):
    target4 = np.array([0, 0, 1, 2])
    src8 = np.array([2, 2, 2, 1, 1, 0, 0, 0])
    view = mixture_view(cat3, WeightedDataset(target4, [SourceBlock(src8, 0.5)]))
    assert np.allclose(view.component_weights, [0.5, 0.5], atol=1e-15)
    want = 0.5 * np.array([0.5, 0.25, 0.25]) + 0.5 * np.array([3, 2, 3]) / 8.0
    assert np.allclose(view.outcome_probs, want, atol=1e-15)

    # masses 3 and 0.5*2 -> (0.75, 0.25)
    view2 = mixture_view(cat3, WeightedDataset(np.array([0, 1, 2]),
                                               [SourceBlock(np.array([0, 0]), 0.5)]))
    assert np.allclose(view2.component_weights, [0.75, 0.25], atol=1e-15)

    # zero weight: the mixture is the target empirical distribution
    view3 = mixture_view(cat2, WeightedDataset(np.array([0, 0, 0, 1]),
                                               [SourceBlock(np.array([1, 1]), 0.0)]))
    assert np.allclose(view3.component_weights, [1.0, 0.0], atol=1e-15)
    assert np.allclose(view3.outcome_probs, [0.75, 0.25], atol=1e-15)

    with pytest.raises(UnsupportedFamilyError):
        mixture_view(gauss3, WeightedDataset(gauss3.sample(np.zeros(3), 5, 1), []))


def test_fit_agrees_with_mixture_probabilities(cat3):
    # the weighted MLE is the mixture's probability vector
    target = np.array([0, 1, 1, 2, 2, 2])
    src = np.array([0, 0, 1])
    data = WeightedDataset(target, [SourceBlock(src, 1.7)])
    theta = fit_weighted_mle(cat3, data)
    view = mixture_view(cat3, data)
    assert np.max(np.abs(theta - view.outcome_probs[:-1])) <= 1e-12


def test_convergence_failure_carries_state(softmax23, rng):
    data = WeightedDataset(softmax23.sample(rng.standard_normal(6), 40, 2), [])
    opts = FitOptions(tolerance=1e-14, max_iter=2, method="gradient")
    with pytest.raises(ConvergenceError) as exc:
        fit_weighted_mle(softmax23, data, opts)
    err = exc.value
    assert err.last_iterate is not None and err.last_iterate.shape == (6,)
    assert err.residual > 0


def test_loglik_gradient_matches_finite_differences(softmax23, rng):
    theta = rng.standard_normal(6) * 0.4
    data = WeightedDataset(
        softmax23.sample(theta, 15, 3),
        [SourceBlock(softmax23.sample(theta + 0.2, 10, 4), 0.9)])
    g = weighted_loglik_grad(softmax23, theta, data, ridge=0.05)
    fd = fd_gradient(lambda th: weighted_loglik(softmax23, th, data, ridge=0.05),
                     theta)
    assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(fd))


def test_empty_target_rejected(cat3):
    with pytest.raises(ValueError):
        fit_weighted_mle(cat3, WeightedDataset(np.array([], dtype=int), []))
    with pytest.raises(ValueError):
        SourceBlock(np.array([0]), -0.1)
