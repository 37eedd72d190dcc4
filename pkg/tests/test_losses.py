import numpy as np
import pytest

from ulab.losses import (
    RobustLoss,
    absolute,
    huber,
    loss_value,
    moreau_envelope,
    prox,
    prox_weak_derivative,
    ridge_shrink,
    soft_threshold,
    square_half,
)

from oracles import prox_oracle, scalar_loss

ALL_LOSSES = [absolute(), huber(1.0), huber(0.3), square_half()]


def test_soft_threshold_values():
    assert soft_threshold(2.0, 0.5) == pytest.approx(1.5)
    assert soft_threshold(-0.3, 0.5) == 0.0
    z = np.random.default_rng(0).normal(size=100)
    np.testing.assert_allclose(soft_threshold(z, 0.0), z)


def test_ridge_shrink_values():
    assert ridge_shrink(3.0, 2.0) == pytest.approx(1.0)
    assert ridge_shrink(-4.0, 1.0) == pytest.approx(-2.0)
    z = np.random.default_rng(1).normal(size=100)
    np.testing.assert_allclose(ridge_shrink(z, 0.0), z)


def test_loss_kind_validation():
    with pytest.raises(ValueError):
        RobustLoss("huber")          # missing eta
    with pytest.raises(ValueError):
        huber(0.0)
    with pytest.raises(ValueError):
        RobustLoss("absolute", eta=1.0)
    with pytest.raises(ValueError):
        RobustLoss("cauchy")


def test_prox_rejects_nonpositive_tau():
    for loss in ALL_LOSSES:
        for bad in (0.0, -1.0):
            with pytest.raises(ValueError):
                prox(loss, 1.0, bad)
            with pytest.raises(ValueError):
                prox_weak_derivative(loss, 1.0, bad)
            with pytest.raises(ValueError):
                moreau_envelope(loss, 1.0, bad)


def test_prox_absolute_equals_soft_threshold():
    assert prox(absolute(), 2.0, 0.5) == pytest.approx(1.5)


def test_prox_huber_examples_match_numeric_minimizer():
    loss = huber(1.0)
    for x, expected in [(0.5, 0.25), (5.0, 4.0)]:
        x_star, _ = prox_oracle("huber", x, 1.0, eta=1.0)
        assert x_star == pytest.approx(expected, abs=1e-8)
        assert prox(loss, x, 1.0) == pytest.approx(expected, abs=1e-12)


def test_prox_matches_golden_section_on_grid():
    xs = np.linspace(-6.0, 6.0, 25)
    taus = [0.1, 0.5, 1.0, 3.0]
    for loss in ALL_LOSSES:
        for x in xs:
            for tau in taus:
                x_star, _ = prox_oracle(loss.kind, x, tau, eta=loss.eta)
                assert prox(loss, x, tau) == pytest.approx(x_star, abs=1e-8)


def test_weak_derivative_examples():
    assert prox_weak_derivative(absolute(), 0.2, 0.5) == 0.0
    assert prox_weak_derivative(absolute(), 3.0, 0.5) == 1.0
    assert prox_weak_derivative(huber(1.0), 0.5, 1.0) == pytest.approx(0.5)


def test_weak_derivative_matches_finite_difference():
    # central finite differences away from the kinks
    rng = np.random.default_rng(7)
    h = 1e-6
    for loss in ALL_LOSSES:
        xs = rng.uniform(-5, 5, size=300)
        taus = rng.uniform(0.05, 3.0, size=300)
        for x, tau in zip(xs, taus):
            if loss.kind == "absolute":
                kinks = [tau, -tau]
            elif loss.kind == "huber":
                t = loss.eta * (1 + tau)
                kinks = [t, -t]
            else:
                kinks = []
            if kinks and min(abs(x - k) for k in kinks) <= 1e-3:
                continue
            fd = (prox(loss, x + h, tau) - prox(loss, x - h, tau)) / (2 * h)
            assert prox_weak_derivative(loss, x, tau) == pytest.approx(fd, abs=1e-5)


def test_moreau_envelope_examples():
    assert moreau_envelope(absolute(), 0.0, 1.0) == 0.0
    _, val = prox_oracle("absolute", 2.0, 0.5)
    assert val == pytest.approx(1.75, abs=1e-10)
    assert moreau_envelope(absolute(), 2.0, 0.5) == pytest.approx(1.75)


def test_moreau_envelope_square_half_closed_form():
    rng = np.random.default_rng(11)
    for x in rng.normal(scale=3, size=50):
        for tau in (0.2, 1.0, 4.0):
            expected = x**2 / (2.0 * (1.0 + tau))
            assert moreau_envelope(square_half(), x, tau) == pytest.approx(expected)
            _, val = prox_oracle("square_half", x, tau)
            assert val == pytest.approx(expected, abs=1e-9)


def test_loss_values():
    assert loss_value(absolute(), -3.0) == 3.0
    assert loss_value(huber(1.0), 0.5) == pytest.approx(0.125)
    assert loss_value(huber(1.0), 3.0) == pytest.approx(2.5)
    assert loss_value(square_half(), 2.0) == pytest.approx(2.0)


def test_prox_is_one_lipschitz():
    # 1e4 random pairs per loss, zero violations allowed
    rng = np.random.default_rng(2024)
    for loss in ALL_LOSSES:
        x = rng.uniform(-10, 10, size=10_000)
        xp = rng.uniform(-10, 10, size=10_000)
        tau = rng.uniform(0.01, 5.0, size=10_000)
        gap = np.abs(prox(loss, x, tau) - prox(loss, xp, tau))
        assert np.all(gap <= np.abs(x - xp) + 1e-12)


def test_envelope_consistency_and_domination():
    rng = np.random.default_rng(5)
    for loss in ALL_LOSSES:
        x = rng.uniform(-8, 8, size=2000)
        tau = rng.uniform(0.05, 4.0, size=2000)
        p = prox(loss, x, tau)
        direct = (x - p) ** 2 / (2 * tau) + loss_value(loss, p)
        np.testing.assert_allclose(moreau_envelope(loss, x, tau), direct,
                                   atol=1e-12, rtol=0)
        assert np.all(moreau_envelope(loss, x, tau) <= loss_value(loss, x) + 1e-12)
