import numpy as np
import pytest

from nshops.error_analysis import (
    MASK_FLOOR,
    richardson_order,
    rms,
    step_error,
    stochastic_error,
    total_and_rms,
    truncation_error,
)

RNG = np.random.default_rng(0)
EXACT = RNG.normal(size=(30, 2, 2)) + 1j * RNG.normal(size=(30, 2, 2))
C = RNG.normal(size=(30, 2, 2)) + 1j * RNG.normal(size=(30, 2, 2))


def series(h, p):
    return EXACT + C * h**p


@pytest.mark.parametrize("p", [2, 4])
def test_richardson_recovers_constructed_order(p):
    h = 0.01
    order = richardson_order(series(h, p), series(2 * h, p), series(4 * h, p))
    assert order.count() == order.size
    assert np.allclose(order, p, atol=1e-6)


def test_richardson_masks_tiny_denominators():
    a = np.zeros((3, 2, 2))
    b = a.copy()
    b[0, 0, 0] = 0.5 * MASK_FLOOR
    c = a + 1e-3
    order = richardson_order(a, b, c)
    assert np.ma.getmaskarray(order).all()


def test_richardson_grid_mismatch():
    with pytest.raises(ValueError):
        richardson_order(EXACT, EXACT[:10], EXACT)


def test_step_error_recovers_leading_term():
    h = 0.01
    rho_h, rho_2h = series(h, 4), series(2 * h, 4)
    order = richardson_order(rho_h, rho_2h, series(4 * h, 4))
    err = step_error(rho_h, rho_2h, order)
    assert np.allclose(err, np.abs(C) * h**4, rtol=1e-6)
    zero = step_error(EXACT, EXACT, np.ma.masked_array(np.full(EXACT.shape, 4.0)))
    assert not np.any(zero)


def test_truncation_error():
    assert not np.any(truncation_error(EXACT, EXACT))
    assert np.allclose(truncation_error(EXACT + 1e-3, EXACT), 1e-3)


def test_total_one_entry():
    trunc = np.zeros((5, 2, 2))
    trunc[:, 1, 0] = 3.0
    report = total_and_rms(np.zeros((5, 2, 2)), trunc)
    assert np.allclose(report.total, 3.0)
    assert report.rms == pytest.approx(3.0)


def test_total_pythagorean():
    step = np.zeros((4, 2, 2))
    trunc = np.zeros((4, 2, 2))
    step[:, 0, 0] = 3.0
    trunc[:, 1, 1] = 4.0
    report = total_and_rms(step, trunc)
    assert np.allclose(report.total, 5.0)
    assert np.allclose(report.step, 3.0) and np.allclose(report.truncation, 4.0)


def test_masked_step_entries_count_as_zero():
    step = np.ma.masked_array(np.full((2, 2, 2), 7.0), mask=True)
    report = total_and_rms(step, np.ones((2, 2, 2)))
    assert np.allclose(report.total, 2.0)


def test_rms_of_constant():
    assert rms(np.full(17, 0.25)) == pytest.approx(0.25)


def test_stochastic_error_zero_and_noise_scale():
    delta, r = stochastic_error(EXACT, EXACT)
    assert r == 0 and not np.any(delta)
    sigma = 1e-3
    noise = np.random.default_rng(1).normal(scale=sigma, size=(20000, 2, 2))
    _, r = stochastic_error(EXACT[:1] + noise, np.broadcast_to(EXACT[:1], noise.shape))
    assert r == pytest.approx(2 * sigma, rel=0.02)


def test_error_invariant_under_global_phase():
    phase = np.exp(0.7j)
    psi = RNG.normal(size=(30, 2)) + 1j * RNG.normal(size=(30, 2))
    rho = psi[:, :, None] * psi[:, None, :].conj()
    psi2 = psi * phase
    rho2 = psi2[:, :, None] * psi2[:, None, :].conj()
    assert stochastic_error(rho, EXACT)[1] == pytest.approx(stochastic_error(rho2, EXACT)[1], rel=1e-14)
