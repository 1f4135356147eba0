import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from henonlab.constants import EIGHT_PI_E, ProblemParams
from henonlab.mesh import Field, angular_shift, build_mesh, dirichlet_energy, unfold_full_disc
from henonlab.nodal import (
    analyze,
    check_angular_monotonicity,
    check_bisector_symmetry,
    classify,
    count_regions,
    per_region_energy,
    predicted_consistency,
    radial_region_energies,
    segment,
)
from henonlab.radial import radial_profile


def case1_field(n, nr=48, nt=32):
    # sign alternates every pi/n of angle; the nodal rays meet at the origin
    mesh = build_mesh(n, nr, nt)
    return mesh, Field.from_function(mesh, lambda r, t: r * (1 - r) * np.sin(n * t))


def case2_field(n, nr=48, nt=32):
    # one invariant positive region with n negative islands, one per sector
    mesh = build_mesh(n, nr, nt)
    centre = np.pi / n

    def f(r, t):
        dist2 = (r * np.cos(t) - 0.6 * np.cos(centre)) ** 2 + (r * np.sin(t) - 0.6 * np.sin(centre)) ** 2
        return (1 - r**2) * (1 - 3 * np.exp(-dist2 / 0.01))

    return mesh, Field.from_function(mesh, f)


def case3_field(n, nr=48, nt=32):
    # inner and outer region separated by a wavy closed curve
    mesh = build_mesh(n, nr, nt)
    return mesh, Field.from_function(mesh, lambda r, t: (1 - r) * (0.4 + 0.08 * np.cos(n * t) - r))


def radial_two_zone(nr=48, nt=16):
    mesh = build_mesh(1, nr, nt)
    prof = radial_profile(0.0, 3.0)
    return mesh, Field.from_function(mesh, lambda r, t: prof(r) + 0 * t)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_case1_topology(n):
    mesh, fld = case1_field(n)
    rep = analyze(mesh, fld, ProblemParams(alpha=0.0, p=10.0, n=n))
    assert rep.region_count == 2 * n
    assert rep.origin_and_boundary_component
    assert rep.case == "case1"
    assert rep.robust


@pytest.mark.parametrize("n", [2, 3])
def test_case2_topology(n):
    mesh, fld = case2_field(n)
    rep = analyze(mesh, fld, ProblemParams(alpha=0.0, p=10.0, n=n))
    assert rep.region_count == n + 1
    invariant = [r for r in rep.regions if r.is_n_invariant]
    assert len(invariant) == 1 and not invariant[0].sector_contained
    assert sum(r.sector_contained for r in rep.regions) == n
    assert rep.case == "case2"


@pytest.mark.parametrize("n", [2, 4, 5])
def test_case3_topology(n):
    mesh, fld = case3_field(n)
    rep = analyze(mesh, fld, ProblemParams(alpha=0.0, p=10.0, n=n))
    assert rep.region_count == 2
    assert not rep.nodal_set_touches_boundary
    assert all(r.is_n_invariant for r in rep.regions)
    assert rep.case == "case3" and rep.quasiradial


def test_radial_field_is_radial_case():
    mesh, fld = radial_two_zone()
    rep = analyze(mesh, fld, ProblemParams(alpha=0.0, p=3.0, n=1))
    assert rep.case == "radial"
    assert not rep.quasiradial
    assert rep.region_count == 2


def test_count_regions_and_sector_count():
    mesh, fld = case2_field(3)
    rep = segment(mesh, fld)
    total, sector = count_regions(rep)
    assert total == 4
    assert sector >= 2


@settings(max_examples=15, deadline=None)
@given(shift=st.integers(0, 95))
def test_classification_invariant_under_rotation(shift):
    mesh, fld = case2_field(3, nt=32)
    full = unfold_full_disc(mesh, fld)
    params = ProblemParams(alpha=0.0, p=10.0, n=3)
    base = segment(full.mesh, full)
    classify(base, params)
    moved = segment(full.mesh, angular_shift(full, shift))
    classify(moved, params)
    assert moved.region_count == base.region_count
    assert moved.case == base.case


@pytest.mark.parametrize("factor", [0.5, 2.0])
def test_zero_band_robustness(factor):
    mesh, fld = case3_field(3)
    base = segment(mesh, fld, 1e-3)
    other = segment(mesh, fld, 1e-3 * factor)
    assert other.region_count == base.region_count


def test_region_energy_additivity():
    mesh, fld = case1_field(2, nr=64, nt=32)
    rep = segment(mesh, fld)
    rows = per_region_energy(rep, mesh, fld, 10.0)
    total = sum(row["dirichlet"] for row in rows)
    assert total == pytest.approx(dirichlet_energy(mesh, fld), rel=1e-10)
    assert all("ratio_8pie" in row for row in rows)


def test_radial_region_energies():
    prof = radial_profile(0.0, 50.0)
    out = radial_region_energies(prof)
    assert out["additivity_defect"] <= 1e-10
    assert out["ratio_inner"] == pytest.approx(out["inner"] / EIGHT_PI_E)


def test_symmetry_diagnostics_on_symmetric_field():
    mesh, fld = case3_field(3)
    assert check_bisector_symmetry(mesh, fld, 3) <= 1e-12
    assert check_angular_monotonicity(mesh, fld, 3) <= 1e-12


def test_inconsistent_case_is_a_finding():
    mesh, fld = case1_field(3)
    params = ProblemParams(alpha=0.0, p=50.0, n=3)
    rep = analyze(mesh, fld, params)
    assert rep.case == "case1"
    findings = predicted_consistency(rep, params)
    assert any("admissible" in f for f in findings)
    assert any("N_alpha" in f for f in findings)


def test_consistent_case_has_no_findings():
    mesh, fld = case3_field(4)
    params = ProblemParams(alpha=0.0, p=50.0, n=4)
    assert analyze(mesh, fld, params).findings == []
