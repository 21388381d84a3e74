import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nshops import (
    BathMode,
    BathModel,
    ModelDomainError,
    SystemModel,
    dpa_three_mode,
    effective_squeezing,
    eval_bcf,
    single_mode_squeezed,
    thermal_embedding,
    uniform_squeezed_multimode,
)
from nshops.bcf import (
    Harmonic,
    Stationary,
    Tabulated,
    UniformSqueezed,
    bcf_matrix,
    dpa_bogoliubov,
    kernel,
    model_from_dict,
    model_to_dict,
)


def squeezed_bcf(t, s, gamma, omega0, r, phi, Gamma):
    # closed form of the single-mode squeezed BCF, expanded by hand
    u, v = np.cosh(r), np.sinh(r)
    tau = t - s
    osc = (u**2 * np.exp(-1j * omega0 * tau) + v**2 * np.exp(1j * omega0 * tau)
           - 2 * u * v * np.cos(omega0 * (t + s) - phi))
    return 0.5 * gamma * Gamma * np.exp(-Gamma * np.abs(tau)) * osc


def test_kernel_values():
    assert kernel(2.0, 0.0) == 1.0
    assert kernel(1.0, -1.0) == pytest.approx(0.5 * np.exp(-1))
    with pytest.raises(ModelDomainError):
        kernel(0.0, 1.0)


def test_single_mode_unsqueezed_is_stationary():
    bath = single_mode_squeezed(1.0, 5.0, 0.0, 0.0, 1.0)
    t = np.linspace(0, 3, 7)[:, None]
    s = np.linspace(0, 3, 5)[None, :]
    expected = 0.5 * np.exp(-np.abs(t - s)) * np.exp(-5j * (t - s))
    assert np.allclose(eval_bcf(bath, t, s), expected, atol=1e-14)


def test_single_mode_squeezed_closed_form():
    args = (0.7, 5.0, 1.5, 0.3, 0.8)
    bath = single_mode_squeezed(*args)
    t = np.linspace(0, 4, 9)[:, None]
    s = np.linspace(0, 4, 11)[None, :]
    assert np.allclose(eval_bcf(bath, t, s), squeezed_bcf(t, s, *args), rtol=1e-12, atol=1e-12)


def test_bcf_matrix_is_hermitian():
    bath = dpa_three_mode(1.0, 5.0, 2.0, 1.0, 0.5, np.pi)
    A = bcf_matrix(bath, np.linspace(0, 2, 40))
    assert np.allclose(A, A.conj().T, atol=1e-14)


def test_r_zero_matches_stationary_coefficient_bitwise():
    t = np.linspace(0, 10, 101)
    f = UniformSqueezed(complex(np.sqrt(1.3)), 5.0)
    assert np.array_equal(f(t), Stationary(complex(np.sqrt(1.3)), 5.0)(t))


def test_pseudomode_flags():
    assert single_mode_squeezed(1, 5, 1.5, 0, 1).pseudomode_ok
    assert not dpa_three_mode(1, 5, 2, 1, 0.5, np.pi).pseudomode_ok


def test_dpa_rates_and_sign_flip():
    bath = dpa_three_mode(1.0, 5.0, 2.0, 1.0, 0.5, np.pi)
    assert np.allclose(bath.rates, [2.0, 0.5, 1.5])
    t = np.linspace(0.1, 1, 5)
    m3 = bath.modes[2]
    assert np.allclose(m3.g(t), -m3.f(t))


@settings(max_examples=200, deadline=None)
@given(
    Gamma=st.floats(0.05, 10.0),
    frac=st.floats(1e-3, 0.999),
    excess=st.floats(1e-3, 20.0),
)
def test_bogoliubov_identity(Gamma, frac, excess):
    eps = frac * Gamma
    Gamma0 = Gamma + eps + excess
    u, v = dpa_bogoliubov(Gamma0, Gamma, eps)
    assert abs(u * u - v * v - 1.0) <= 1e-10 * max(1.0, u * u)


def test_effective_squeezing_value():
    assert effective_squeezing(1.0, 0.5) == pytest.approx(0.5493, abs=1e-4)
    assert effective_squeezing(1.0, 0.0) == 0.0


@pytest.mark.parametrize(
    "args",
    [
        (1.0, 5.0, 2.0, 1.0, 0.0, 0.0),  # eps must be > 0
        (1.0, 5.0, 2.0, 1.0, 1.0, 0.0),  # above threshold
        (1.0, 5.0, 1.4, 1.0, 0.5, 0.0),  # Gamma0 <= Gamma + eps
        (-1.0, 5.0, 2.0, 1.0, 0.5, 0.0),
    ],
)
def test_dpa_domain(args):
    with pytest.raises(ModelDomainError):
        dpa_three_mode(*args)


def test_single_mode_domain():
    with pytest.raises(ModelDomainError):
        single_mode_squeezed(1.0, 5.0, 1.0, 0.0, -1.0)
    with pytest.raises(ModelDomainError):
        single_mode_squeezed(1.0, 5.0, -0.1, 0.0, 1.0)
    with pytest.raises(ModelDomainError):
        BathMode(0.0, Stationary(1.0, 0.0), Stationary(1.0, 0.0))


def test_multimode_complex_weights():
    terms = [(0.5 + 0.2j, 4.0, 1.0), (0.3, 6.0, 2.5)]
    bath = uniform_squeezed_multimode(terms, 0.0, 0.0, 5.0)
    t, s = 1.3, 0.4
    expected = sum(0.5 * G * g * np.exp(-G * abs(t - s)) * np.exp(-1j * w * (t - s)) for g, w, G in terms)
    assert eval_bcf(bath, t, s) == pytest.approx(expected, rel=1e-12)


def test_harmonic_and_tabulated(tmp_path):
    h = Harmonic(2.0, "sin", 3.0, 1.0)
    assert h(0.5) == pytest.approx(2.0 * np.sin(1.5 - 0.5))
    with pytest.raises(ModelDomainError):
        Harmonic(1.0, "tan", 1.0)
    path = tmp_path / "coef.csv"
    path.write_text("t,re,im\n0,1,0\n1,3,2\n")
    tab = Tabulated.from_csv(path)
    assert tab(0.5) == pytest.approx(2.0 + 1.0j)
    with pytest.raises(ModelDomainError):
        tab(1.5)


def test_model_dict_roundtrip():
    for bath in (
        single_mode_squeezed(1.0, 5.0, 1.5, 0.0, 1.0),
        dpa_three_mode(1.0, 5.0, 2.0, 1.0, 0.5, np.pi),
        uniform_squeezed_multimode([(0.5 + 0.2j, 4.0, 1.0)], 0.4, 0.1, 5.0),
        BathModel((BathMode(1.5, Stationary(0.5j, 2.0), Harmonic(1.0, "cos", 2.0)),)),
    ):
        again = model_from_dict(model_to_dict(bath))
        assert again.modes == bath.modes
        assert model_to_dict(again) == model_to_dict(bath)


def test_system_model_validation():
    with pytest.raises(ModelDomainError):
        SystemModel(np.array([[0, 1], [0, 0]]), np.eye(2))
    with pytest.raises(ModelDomainError):
        SystemModel(np.eye(2), np.eye(3))


def test_thermal_embedding_without_squeezing():
    g = [Stationary(0.5, 1.0), Stationary(0.2, 2.0)]
    emb = thermal_embedding(g, [0.0, 2.0], [0.0, 1.0 + 0.5j])
    t = np.array([0.3, 1.1])
    expected_drive = 2 * np.real(g[1](t) * (1.0 + 0.5j))
    assert np.allclose(emb.drive(t), expected_drive)
    cov = emb.thermal_cov(t[:, None], t[None, :])
    assert np.allclose(cov, 2 * 2.0 * np.real(g[1](t)[:, None] * np.conj(g[1](t))[None, :]))
    assert np.allclose(cov, cov.T)
    with pytest.raises(ModelDomainError):
        thermal_embedding(g, [-1.0, 0.0], [0.0, 0.0])


def test_bogoliubov_broadband_limit():
    # the input mode decouples from the squeezing as Gamma0 grows: v ~ 2 Gamma eps / Gamma0^2
    u, v = dpa_bogoliubov(1e4, 1.0, 0.5)
    assert u == pytest.approx(1.0, abs=1e-7)
    assert v == pytest.approx(2 * 1.0 * 0.5 / 1e8, rel=1e-6)
