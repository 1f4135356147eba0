import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from henonlab.constants import ConfigurationError, ProblemParams
from henonlab.mesh import Field, build_mesh, dirichlet_energy, pde_residual
from henonlab.nehari import (
    INIT_KINDS,
    ProjectionError,
    SolveConfig,
    initial_guess,
    minimize,
    nehari_defect,
    nehari_defects,
    nehari_scale,
    nodal_forms,
    nodal_nehari_project,
    residual_floor,
    run_kinds,
    solver_mesh,
    split_signs,
)
from henonlab.radial import radial_profile


def smooth_random_field(mesh, rng, sign_changing=True):
    modes = rng.standard_normal((3, 3))
    shift = 0.3 if sign_changing else 3.0

    def f(r, t):
        out = shift * np.ones_like(r)
        for j in range(3):
            for k in range(3):
                out = out + modes[j, k] * np.cos(mesh.n * k * t + j) * r ** (k + 1) * np.sin((j + 1) * r)
        return out * (1 - r)

    return Field.from_function(mesh, f)


@pytest.fixture(scope="module")
def small_mesh():
    return build_mesh(2, 24, 12, alpha=1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.sampled_from([3.0, 10.0, 50.0]))
def test_nehari_scaling_defect_and_idempotence(seed, p):
    mesh = build_mesh(1, 20, 12, alpha=2.0)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(mesh.ndof) * 10 ** rng.uniform(-3, 3)
    v = nehari_scale(mesh, u, p)
    assert nehari_defect(mesh, v, p) <= 1e-12
    w = nehari_scale(mesh, v, p)
    assert np.max(np.abs(w - v)) <= 1e-13 * np.max(np.abs(v))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.sampled_from([3.0, 10.0, 50.0]))
def test_nodal_projection_defects_and_idempotence(seed, p):
    mesh = build_mesh(2, 20, 12, alpha=1.0)
    rng = np.random.default_rng(seed)
    u = smooth_random_field(mesh, rng).vector
    if not (u.max() > 0 and u.min() < 0):
        return
    v = nodal_nehari_project(mesh, u, p)
    assert max(nehari_defects(mesh, v, p)) <= 1e-12
    assert np.array_equal(np.sign(v), np.sign(u))
    w = nodal_nehari_project(mesh, v, p)
    assert np.max(np.abs(w - v)) <= 1e-13 * np.max(np.abs(v))


def test_projection_accounts_for_interface_coupling(small_mesh):
    u = smooth_random_field(small_mesh, np.random.default_rng(3)).vector
    forms = nodal_forms(small_mesh, nodal_nehari_project(small_mesh, u, 5.0), 5.0)
    # coupled constraints: A + C = P and B + C = N
    assert forms["A"] + forms["C"] == pytest.approx(math.exp(forms["logP"]), rel=1e-12)
    assert forms["B"] + forms["C"] == pytest.approx(math.exp(forms["logN"]), rel=1e-12)


def test_projection_errors(small_mesh):
    with pytest.raises(ProjectionError):
        nehari_scale(small_mesh, np.zeros(small_mesh.ndof), 3.0)
    positive = smooth_random_field(small_mesh, np.random.default_rng(0), sign_changing=False)
    with pytest.raises(ProjectionError):
        nodal_nehari_project(small_mesh, np.abs(positive.vector), 3.0)


def test_split_signs():
    u = np.array([1.0, -2.0, 0.0, 3.0])
    plus, minus = split_signs(u)
    assert np.array_equal(plus + minus, u)
    assert np.all(plus >= 0) and np.all(minus <= 0)


@pytest.mark.parametrize("kind", INIT_KINDS)
def test_initial_guesses_change_sign_and_are_deterministic(kind):
    params = ProblemParams(alpha=0.0, p=5.0, n=3)
    mesh = build_mesh(3, 32, 16)
    a = initial_guess(kind, mesh, params, seed=4)
    b = initial_guess(kind, mesh, params, seed=4)
    assert np.array_equal(a.values, b.values)
    assert a.values.max() > 0 > a.values.min()
    assert a.satisfies_dirichlet


def test_solve_config_validation():
    with pytest.raises(ConfigurationError):
        SolveConfig(init_kind="spiral")
    with pytest.raises(ConfigurationError):
        SolveConfig(step_size=0)
    with pytest.raises(ConfigurationError):
        SolveConfig(restarts=0)
    with pytest.raises(ConfigurationError):
        SolveConfig(max_iterations=0)
    assert SolveConfig().as_dict()["init_kind"] == "radial-perturbed"


def test_restart_kind_cycling():
    cfg = SolveConfig(init_kind="two-bump", restarts=4)
    assert run_kinds(cfg) == ["two-bump", "annular-split", "radial-perturbed", "two-bump"]
    fixed = SolveConfig(init_kind="two-bump", restarts=2, cycle_kinds=False)
    assert run_kinds(fixed) == ["two-bump", "two-bump"]


@pytest.fixture(scope="module")
def p10_solution():
    params = ProblemParams(alpha=0.0, p=10.0, n=2)
    mesh = solver_mesh(params, 64, 32)
    return params, mesh, minimize(SolveConfig(restarts=3), params, mesh)


def test_minimizer_is_converged_critical_point(p10_solution):
    params, mesh, sol = p10_solution
    assert sol.converged
    assert sol.changes_sign
    assert sol.residual <= 1e-8
    assert pde_residual(mesh, sol.field, params.p) == pytest.approx(sol.residual)
    assert max(sol.nehari_defect_plus, sol.nehari_defect_minus) <= 1e-10
    assert sol.residual_floor < 1e-10
    assert len(sol.basins) == 3


def test_minimizer_energy_below_radial(p10_solution):
    params, _, sol = p10_solution
    assert sol.scaled_energy < radial_profile(params.alpha, params.p).p_energy


def test_energy_history_decreases(p10_solution):
    hist = np.array(p10_solution[2].energy_history)
    assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]))


def test_minimize_is_deterministic(p10_solution):
    params, mesh, sol = p10_solution
    again = minimize(SolveConfig(restarts=3), params, mesh)
    assert again.energy == pytest.approx(sol.energy, rel=1e-12)
    assert np.allclose(again.field.values, sol.field.values, rtol=0, atol=1e-12 * np.abs(sol.field.values).max())


def test_minimize_rejects_mismatched_mesh():
    with pytest.raises(ConfigurationError):
        minimize(SolveConfig(), ProblemParams(p=3.0, n=2), build_mesh(3, 16, 8))


def test_solver_mesh_uses_core_radius():
    params = ProblemParams(alpha=0.0, p=30.0, n=2)
    mesh = solver_mesh(params, 64, 16, r_min_factor=3.0)
    core = radial_profile(0.0, 30.0).core_radius
    assert mesh.r[1] == pytest.approx(3.0 * core)
    assert mesh.grading == "log"


def test_residual_floor_scales_with_roundoff(small_mesh):
    u = smooth_random_field(small_mesh, np.random.default_rng(1)).vector
    floor = residual_floor(small_mesh, u, 3.0)
    assert 0 < floor < 1e-12
    assert residual_floor(small_mesh, 7.0 * u, 3.0) > 0
    assert dirichlet_energy(small_mesh, u) > 0
