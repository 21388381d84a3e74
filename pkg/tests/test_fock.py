import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nshops import CapacityError, ModelDomainError, Rectangular, Triangular, build_basis
from nshops.fock import apply_annihilation, apply_creation, project_vacuum, vacuum_embed


def test_single_mode_dimension():
    for nmax in (0, 1, 10, 60):
        assert build_basis(Rectangular((nmax,))).dimension(2) == 2 * (nmax + 1)


def test_three_mode_rectangular_dimension():
    basis = build_basis(Rectangular((9, 9, 9)))
    assert basis.dimension(2) ** 2 == 4_000_000


def test_triangular_dimension():
    assert build_basis(Triangular(5, 3)).dimension(2) == 112
    assert Triangular(5, 3).size() == 56


def test_vacuum_first_and_lexicographic():
    basis = build_basis(Triangular(3, 2))
    assert tuple(basis.indices[0]) == (0, 0)
    assert [tuple(r) for r in basis.indices] == sorted(tuple(r) for r in basis.indices)
    assert all(sum(r) <= 3 for r in basis.indices)


def test_capacity_error():
    with pytest.raises(CapacityError):
        build_basis(Rectangular((99, 99, 99)), capacity=10**5)


def test_invalid_truncation():
    with pytest.raises(ModelDomainError):
        Rectangular((-1,))
    with pytest.raises(ModelDomainError):
        Triangular(-2, 3)


def test_ladder_on_number_states():
    basis = build_basis(Rectangular((4,)))
    psi = np.zeros((5, 1), dtype=complex)
    psi[2] = 1.0
    down = apply_annihilation(basis, 0, psi)
    up = apply_creation(basis, 0, psi)
    assert down[1, 0] == pytest.approx(np.sqrt(2))
    assert up[3, 0] == pytest.approx(np.sqrt(3))
    assert np.count_nonzero(down) == 1 and np.count_nonzero(up) == 1


def test_creation_drops_outside_basis():
    basis = build_basis(Rectangular((3,)))
    psi = np.zeros((4, 2), dtype=complex)
    psi[3] = [1.0, 2.0]
    assert not np.any(apply_creation(basis, 0, psi))


def test_number_operator_interior():
    basis = build_basis(Triangular(4, 2))
    rng = np.random.default_rng(0)
    psi = rng.normal(size=(len(basis), 2)) + 1j * rng.normal(size=(len(basis), 2))
    n1 = apply_creation(basis, 1, apply_annihilation(basis, 1, psi))
    assert np.allclose(n1, basis.occupation(1)[:, None] * psi)


def test_commutator_away_from_boundary():
    basis = build_basis(Rectangular((6, 6)))
    rng = np.random.default_rng(1)
    psi = rng.normal(size=(len(basis), 1)) + 0j
    psi[basis.boundary_mask()] = 0
    psi[(basis.indices >= 5).any(axis=1)] = 0
    for j in range(2):
        comm = apply_annihilation(basis, j, apply_creation(basis, j, psi)) - apply_creation(
            basis, j, apply_annihilation(basis, j, psi)
        )
        assert np.allclose(comm, psi)


@settings(max_examples=40, deadline=None)
@given(
    nmax=st.lists(st.integers(0, 4), min_size=1, max_size=3),
    seed=st.integers(0, 2**32 - 1),
    data=st.data(),
)
def test_annihilation_is_adjoint_of_creation(nmax, seed, data):
    basis = build_basis(Rectangular(tuple(nmax)))
    j = data.draw(st.integers(0, len(nmax) - 1))
    rng = np.random.default_rng(seed)
    shape = (len(basis), 2)
    phi = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    psi = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    lhs = np.vdot(phi, apply_annihilation(basis, j, psi))
    rhs = np.vdot(apply_creation(basis, j, phi), psi)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_vacuum_roundtrip():
    basis = build_basis(Triangular(2, 3))
    psi_s = np.array([0.6, 0.8j])
    ext = vacuum_embed(psi_s, basis)
    assert ext.shape == (len(basis), 2)
    assert np.array_equal(project_vacuum(ext), psi_s)
    assert np.linalg.norm(ext) == pytest.approx(1.0)


def test_mode_index_checked():
    basis = build_basis(Rectangular((2, 2)))
    with pytest.raises(ModelDomainError):
        apply_annihilation(basis, 2, np.zeros((9, 1)))
    with pytest.raises(ModelDomainError):
        apply_creation(basis, 0, np.zeros((8, 1)))
