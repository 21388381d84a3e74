import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nshops.ensemble import (
    BlochObserver,
    EnsembleAccumulator,
    ObservableSet,
    accumulate_linear,
    accumulate_normalized,
    bloch_observables,
    reduce_hme,
    reduce_pme,
    standard_error,
)

GRID = np.linspace(0, 1, 4)


def random_states(seed, m, n_t=4, d=2):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(m, n_t, d)) + 1j * rng.normal(size=(m, n_t, d))


def test_excited_state_bloch():
    rho = np.array([[1, 0], [0, 0]], dtype=complex)
    obs = bloch_observables(rho, 0.3, 5.0)
    assert (obs["sx"], obs["sy"], obs["sz"]) == (0.0, 0.0, 1.0)


def test_rotating_frame_removes_free_precession():
    t = np.linspace(0, 2, 21)
    # coherence rotating as exp(+i w0 t) for <s+> in the (e, g) basis
    rho = np.zeros((t.size, 2, 2), dtype=complex)
    rho[:, 0, 0] = rho[:, 1, 1] = 0.5
    rho[:, 1, 0] = 0.5 * np.exp(1j * (5.0 * t + 0.3))
    rho[:, 0, 1] = rho[:, 1, 0].conj()
    cols = BlochObserver(t, 5.0).evaluate(rho)
    assert np.allclose(cols[3], np.cos(0.3))
    assert np.allclose(cols[4], np.sin(0.3))


def test_observable_set_rejects_non_hermitian():
    with pytest.raises(ValueError):
        ObservableSet({"bad": np.array([[0, 1], [0, 0]])})
    ops = ObservableSet.pauli()
    assert ops.names == ("sx", "sy", "sz")


def test_mean_and_standard_error():
    states = random_states(0, 50)
    acc = accumulate_linear(EnsembleAccumulator(GRID, 2), states)
    rho = states[..., :, None] * states[..., None, :].conj()
    assert np.allclose(acc.mean(), rho.mean(axis=0))
    se_re, se_im = standard_error(acc)
    assert np.allclose(se_re, rho.real.std(axis=0, ddof=1) / np.sqrt(50))
    assert np.allclose(se_im, rho.imag.std(axis=0, ddof=1) / np.sqrt(50))


def test_standard_error_undefined_for_single_trajectory():
    acc = accumulate_linear(EnsembleAccumulator(GRID, 2), random_states(0, 1))
    se_re, _ = standard_error(acc)
    assert np.all(np.isnan(se_re))
    with pytest.raises(ValueError):
        EnsembleAccumulator(GRID, 2).mean()


def test_normalized_projectors_have_unit_trace():
    acc = accumulate_normalized(EnsembleAccumulator(GRID, 2), random_states(1, 10))
    assert np.allclose(np.trace(acc.mean(), axis1=1, axis2=2), 1.0)


@settings(max_examples=25, deadline=None)
@given(sizes=st.lists(st.integers(1, 6), min_size=3, max_size=3), seed=st.integers(0, 1000))
def test_merge_associative_and_matches_sequential(sizes, seed):
    states = random_states(seed, sum(sizes))
    parts = np.split(states, np.cumsum(sizes)[:-1])
    obs = BlochObserver(GRID, 1.0)
    accs = [accumulate_normalized(EnsembleAccumulator(GRID, 2, obs), p) for p in parts]
    left = accs[0].merge(accs[1]).merge(accs[2])
    right = accs[0].merge(accs[1].merge(accs[2]))
    whole = accumulate_normalized(EnsembleAccumulator(GRID, 2, obs), states)
    for a in (left, right):
        assert a.count == whole.count
        assert np.allclose(a.sum_rho, whole.sum_rho, rtol=1e-13, atol=1e-13)
        assert np.allclose(a.obs_sq, whole.obs_sq, rtol=1e-13, atol=1e-13)


def test_sequential_fill_is_bit_reproducible():
    states = random_states(3, 20)
    a = accumulate_linear(EnsembleAccumulator(GRID, 2), states)
    b = accumulate_linear(EnsembleAccumulator(GRID, 2), states[:7])
    b = accumulate_linear(b, states[7:])
    assert np.array_equal(a.sum_rho, b.sum_rho)


def test_merge_rejects_other_grid():
    with pytest.raises(ValueError):
        EnsembleAccumulator(GRID, 2).merge(EnsembleAccumulator(GRID[:3], 2))


def test_reductions():
    d, K = 2, 3
    rng = np.random.default_rng(4)
    v = rng.normal(size=K * d) + 1j * rng.normal(size=K * d)
    R = np.outer(v, v.conj())
    assert np.array_equal(reduce_hme(R, d), R[:2, :2])
    red = reduce_pme(R, d)
    blocks = v.reshape(K, d)
    assert np.allclose(red, sum(np.outer(b, b.conj()) for b in blocks))
    assert np.trace(red) == pytest.approx(np.trace(R))
