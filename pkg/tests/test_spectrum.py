import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from henonlab.constants import ProblemParams
from henonlab.mesh import Field, angular_shift, build_mesh, full_disc_mesh
from henonlab.nehari import SolveConfig, minimize, solver_mesh
from henonlab.radial import radial_profile
from henonlab.spectrum import (
    BlockTridiagonal,
    DISC_EIGENVALUE,
    ModeCutoffError,
    block_inertia,
    dense_spectrum,
    is_radial,
    linearized_operator,
    mesh_mode_counts,
    morse_index_full,
    morse_index_symmetric,
    negative_eigenvalues,
    quadratic_form,
    radial_mode_decomposition,
    rotation_generator,
)


def radial_field(mesh, alpha, p):
    prof = radial_profile(alpha, p)
    return Field.from_function(mesh, lambda r, t: prof(r) + 0 * t)


def random_field(mesh, seed, amplitude=3.0):
    rng = np.random.default_rng(seed)
    vals = amplitude * rng.standard_normal(mesh.shape)
    vals[0] = vals[0, 0]
    vals[-1] = 0
    return Field(mesh, vals)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 3), shift=st.floats(-50, 50))
def test_block_inertia_matches_dense(seed, n, shift):
    mesh = build_mesh(n, 16, 8, alpha=1.0)
    u = random_field(mesh, seed)
    H = linearized_operator(mesh, u, 3.0)
    neg, zero, pos = block_inertia(H, mesh.ring_blocks, mesh.mass, shift)
    eigs = dense_spectrum(mesh, u, 3.0)
    assert neg == int(np.sum(eigs < shift))
    assert neg + zero + pos == mesh.ndof


def test_bisection_recovers_negative_eigenvalues():
    mesh = build_mesh(1, 16, 8)
    u = random_field(mesh, 7, amplitude=4.0)
    H = linearized_operator(mesh, u, 3.0)
    eigs = dense_spectrum(mesh, u, 3.0)
    count = int(np.sum(eigs < 0))
    assert count > 0
    got = negative_eigenvalues(BlockTridiagonal(H, mesh.ring_blocks), mesh.mass, count, 0.0)
    assert got == pytest.approx(list(eigs[:count]), rel=1e-8)


def test_operator_symmetric_and_quadratic_form():
    mesh = build_mesh(2, 16, 8, alpha=2.0)
    u = random_field(mesh, 1)
    H = linearized_operator(mesh, u, 5.0)
    assert abs(H - H.T).max() <= 1e-12 * abs(H).max()
    psi = np.random.default_rng(2).standard_normal(mesh.ndof)
    assert quadratic_form(mesh, u, 5.0, psi) == pytest.approx(psi @ (H @ psi), rel=1e-12)


def test_zero_field_index_is_zero():
    mesh = build_mesh(1, 32, 16)
    rep = morse_index_symmetric(mesh, Field.zeros(mesh), 3.0)
    assert rep.negative_count == 0
    assert rep.smallest_eigenvalues[0] == pytest.approx(DISC_EIGENVALUE, rel=2e-2)


@pytest.mark.parametrize("alpha", [0.0, 2.0, 4.0])
def test_mode_sum_equals_two_dimensional_count(alpha):
    full = build_mesh(1, 48, 48, alpha=alpha)
    u = radial_field(full, alpha, 10.0)
    modes = mesh_mode_counts(full, u.values[:, 0], 10.0)
    eigs = dense_spectrum(full, u, 10.0)
    assert modes["total"] == int(np.sum(eigs <= -1e-9 * DISC_EIGENVALUE))
    assert modes["counts"][0] == 2
    assert modes["total"] >= 4 + 2 * math.floor(alpha / 2)


def test_full_index_of_radial_field_uses_modes():
    mesh = build_mesh(2, 48, 24, alpha=0.0)
    u = radial_field(mesh, 0.0, 10.0)
    assert is_radial(mesh, u)
    rep = morse_index_full(mesh, u, 10.0)
    assert rep.method == "radial-modes"
    full = full_disc_mesh(mesh)
    eigs = dense_spectrum(full, Field(full, np.tile(u.values, (1, mesh.n))), 10.0)
    assert rep.negative_count == int(np.sum(eigs <= -1e-9 * DISC_EIGENVALUE))


@pytest.mark.parametrize("alpha", [0.0, 2.0])
def test_continuum_mode_zero_count_is_two(alpha):
    modes = radial_mode_decomposition(radial_profile(alpha, 10.0), N_r=512)
    assert modes.radial_count == 2
    assert modes.counts[-1] == 0
    assert modes.total == modes.counts[0] + 2 * sum(modes.counts[1:])


def test_mode_cutoff_guard():
    with pytest.raises(ValueError):
        radial_mode_decomposition(radial_profile(0.0, 10.0), k_max=4)
    assert issubclass(ModeCutoffError, ValueError)


def test_rotation_generator_is_spectral_derivative():
    mesh = build_mesh(3, 16, 16)
    u = Field.from_function(mesh, lambda r, t: r * (1 - r) * np.cos(3 * t))
    gen = mesh.to_grid(rotation_generator(mesh, u))
    rr, tt = mesh.grid_coordinates()
    exact = -3 * rr * (1 - rr) * np.sin(3 * tt)
    assert np.allclose(gen[1:-1], exact[1:-1], atol=1e-12)


@pytest.fixture(scope="module")
def p10_solution():
    params = ProblemParams(alpha=0.0, p=10.0, n=2)
    mesh = solver_mesh(params, 48, 24)
    return params, mesh, minimize(SolveConfig(restarts=3), params, mesh)


def test_iterative_and_dense_counts_agree(p10_solution):
    params, mesh, sol = p10_solution
    dense = morse_index_symmetric(mesh, sol.field, params.p, method="dense-oracle")
    iterative = morse_index_symmetric(mesh, sol.field, params.p, method="iterative")
    assert dense.negative_count == iterative.negative_count == 2
    assert iterative.consistent and not iterative.flagged
    k = dense.negative_count
    assert iterative.smallest_eigenvalues[:k] == pytest.approx(dense.smallest_eigenvalues[:k], rel=1e-7)


def test_counts_invariant_under_grid_rotation(p10_solution):
    params, mesh, sol = p10_solution
    base = morse_index_symmetric(mesh, sol.field, params.p).negative_count
    for k in (1, 5, 11):
        assert morse_index_symmetric(mesh, angular_shift(sol.field, k), params.p).negative_count == base


def test_full_index_at_least_symmetric(p10_solution):
    params, mesh, sol = p10_solution
    full = morse_index_full(mesh, sol.field, params.p)
    assert full.negative_count >= 2
    assert full.subspace == "full"
