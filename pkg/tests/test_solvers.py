import numpy as np
import pytest

from conftest import PSI0, atom, isolated_bloch
from nshops import (
    BathMode,
    BathModel,
    CapacityError,
    ModelDomainError,
    Rectangular,
    Triangular,
    UnsupportedModelError,
    dpa_three_mode,
    single_mode_squeezed,
)
from nshops.bcf import Stationary
from nshops.solvers import NoiseSource, Problem, run_hops, run_psse, solve, solve_hme

SQUEEZED = single_mode_squeezed(1.0, 5.0, 1.5, 0.0, 1.0)
DPA = dpa_three_mode(1.0, 5.0, 2.0, 1.0, 0.5, np.pi)


def problem(bath=SQUEEZED, trunc=Rectangular((4,)), T=1.0, n_steps=200, n_store=20):
    return Problem(atom(), bath, PSI0, trunc, T, n_steps, n_store)


def test_problem_validation():
    with pytest.raises(ModelDomainError):
        problem(n_steps=201)
    with pytest.raises(ModelDomainError):
        Problem(atom(), SQUEEZED, np.zeros(2), Rectangular((2,)), 1.0, 10, 10)
    with pytest.raises(ModelDomainError):
        Problem(atom(), SQUEEZED, np.ones(3), Rectangular((2,)), 1.0, 10, 10)
    p = problem()
    assert p.h == pytest.approx(0.005)
    assert p.times.size == 21 and p.times[-1] == pytest.approx(1.0)


def test_capacity_enforced():
    p = Problem(atom(), DPA, PSI0, Rectangular((20, 20, 20)), 1.0, 10, 10, capacity=10**4)
    with pytest.raises(CapacityError):
        solve(p, "hops-nonlinear", 1)


@pytest.mark.parametrize("method", ["hops-nonlinear", "hops-linear", "psse-nonlinear", "psse-linear"])
def test_chunking_and_threads_do_not_change_results(method):
    p = problem()
    a = solve(p, method, n_traj=37, seed=11, chunk=256)
    b = solve(p, method, n_traj=37, seed=11, chunk=5, threads=3)
    assert np.array_equal(a.rho, b.rho)
    assert np.array_equal(a.se_re, b.se_re)
    for name in a.observables:
        assert np.array_equal(a.observables[name], b.observables[name])


def test_seed_changes_and_reproduces():
    p = problem()
    a = run_hops(p, 8, seed=1)
    assert np.array_equal(a.rho, run_hops(p, 8, seed=1).rho)
    assert not np.array_equal(a.rho, run_hops(p, 8, seed=2).rho)


def test_prefix_of_ensemble_is_stable():
    # trajectory k depends only on (seed, k)
    p = problem()
    one = run_hops(p, 1, seed=4)
    many = run_hops(p, 2, seed=4)
    other = run_hops(p, 1, seed=4, chunk=1)
    assert np.array_equal(one.rho, other.rho)
    assert not np.array_equal(one.rho, many.rho)


def test_unsqueezed_model_bit_equivalent_to_stationary():
    stationary = BathModel((BathMode(1.0, Stationary(complex(1.0), 5.0), Stationary(complex(1.0), 5.0)),))
    squeezed = single_mode_squeezed(1.0, 5.0, 0.0, 0.0, 1.0)
    for noise in ("ou", "eigen"):
        a = run_hops(problem(stationary), 6, seed=3, noise=noise)
        b = run_hops(problem(squeezed), 6, seed=3, noise=noise)
        assert np.array_equal(a.rho, b.rho)
    assert np.array_equal(solve_hme(problem(stationary)).rho, solve_hme(problem(squeezed)).rho)


def test_zero_coupling_trajectories_follow_free_evolution():
    bath = single_mode_squeezed(0.0, 5.0, 1.5, 0.0, 1.0)
    p = problem(bath, T=2.0, n_steps=2000, n_store=100)
    for method in ("hops-nonlinear", "hops-linear", "psse-nonlinear"):
        sol = solve(p, method, n_traj=3, seed=0)
        sx, sy, sz = isolated_bloch(sol.times)
        assert np.max(np.abs(sol.observables["sx"] - sx)) < 1e-8
        assert np.max(np.abs(sol.observables["sy"] - sy)) < 1e-8
        assert np.max(np.abs(sol.observables["sz"] - sz)) < 1e-8


def test_pseudomode_methods_reject_dpa():
    p = problem(DPA, Triangular(2, 3))
    for method in ("pme", "psse-nonlinear"):
        with pytest.raises(UnsupportedModelError, match="f_j = g_j"):
            solve(p, method, 2)
    with pytest.raises(UnsupportedModelError):
        NoiseSource(p, "ou")
    assert NoiseSource(p).route == "eigen"
    assert NoiseSource(problem()).route == "ou"


def test_dpa_hops_runs_with_triangular_truncation():
    sol = run_hops(problem(DPA, Triangular(3, 3)), 4, seed=0)
    assert sol.count == 4 and sol.discarded == 0
    assert np.allclose(np.trace(sol.rho, axis1=1, axis2=2), 1.0)


def test_unknown_method_and_bad_counts():
    with pytest.raises(ModelDomainError):
        solve(problem(), "heom", 1)
    with pytest.raises(ModelDomainError):
        run_hops(problem(), 0, seed=0)
    with pytest.raises(ModelDomainError):
        run_psse(problem(), 0, seed=0)


def test_solution_reductions_hermitian():
    p = problem()
    for method in ("hme", "pme", "hops-nonlinear", "psse-nonlinear"):
        rho = solve(p, method, n_traj=5, seed=0).rho
        assert np.max(np.abs(rho - rho.conj().transpose(0, 2, 1))) < 1e-10
