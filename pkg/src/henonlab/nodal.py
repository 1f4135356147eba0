"""Nodal regions, nodal-set contacts and the case taxonomy of n-invariant solutions.

Everything is computed on the unfolded full disc.  Grid nodes whose value
is below ``band_epsilon * max|u|`` form the zero band; the remaining nodes
are split by sign into connected components (4-neighbour adjacency with
angular wraparound, every first-ring node adjacent to the pole).

The nodal set is tracked through grid cells rather than nodes: a cell is
nodal when its interior corners do not all carry the same nonzero sign.
This catches sign changes that fall between two grid nodes, which is the
typical situation when the band is thin.

Near r = 1 every solution decays linearly, so for the zero band the field
is first divided by ``min(1, (1 - r) / BOUNDARY_LAYER)``.  Without this the
Dirichlet layer itself would register as zero band touching the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .constants import (
    EIGHT_PI_E,
    FOUR_PI_E,
    ProblemParams,
    predict_cases,
)
from .mesh import Field, SectorMesh, full_disc_mesh

DEFAULT_BAND = 1e-3
BOUNDARY_LAYER = 0.05
BOUNDARY_CELLS = 2
RADIAL_TOLERANCE = 1e-6
CASES = ("radial", "case1", "case2", "case3", "other")


class SegmentationError(ValueError):
    pass


@dataclass
class Region:
    label: int
    sign: int
    node_count: int
    is_n_invariant: bool
    touches_boundary: bool
    contains_origin: bool
    sector_contained: bool
    angular_extent: float
    dirichlet_energy: float = math.nan
    scaled_dirichlet: float = math.nan
    scaled_energy: float = math.nan

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class NodalReport:
    n: int
    region_count: int
    sector_region_count: int
    regions: list
    labels: np.ndarray = field(repr=False)
    band_epsilon: float = DEFAULT_BAND
    case: str = "other"
    quasiradial: bool = False
    zero_band_fraction: float = 0.0
    monotonicity_violation: float = math.nan
    bisector_asymmetry: float = math.nan
    origin_in_nodal_set: bool = False
    nodal_set_touches_boundary: bool = False
    origin_and_boundary_component: bool = False
    nodal_components: int = 0
    angular_variation: float = 0.0
    max_regions_in_sector: int = 0
    origin_arc_order: int | None = None
    robust: bool | None = None
    robustness: dict = field(default_factory=dict)
    findings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("labels", "regions")}
        out["regions"] = [r.as_dict() for r in self.regions]
        return out


# ---------------------------------------------------------------------------
# graph helpers on the full-disc grid
# ---------------------------------------------------------------------------

def _node_edges(N_r: int, N: int) -> np.ndarray:
    """4-neighbour edges between interior full-disc nodes (dof numbering of the full mesh)."""
    def idx(i, j):
        return 1 + (i - 1) * N + (j % N)

    edges = []
    j = np.arange(N)
    edges.append(np.stack([np.zeros(N, dtype=int), idx(1, j)], axis=1))
    for i in range(1, N_r - 1):
        edges.append(np.stack([idx(i, j), idx(i + 1, j)], axis=1))
    for i in range(1, N_r):
        edges.append(np.stack([idx(i, j), idx(i, j + 1)], axis=1))
    return np.concatenate(edges)


def _components(n_nodes: int, edges: np.ndarray, keep: np.ndarray) -> tuple[int, np.ndarray]:
    """Connected components of the subgraph induced by ``keep`` (label -1 elsewhere)."""
    mask = keep[edges[:, 0]] & keep[edges[:, 1]]
    e = edges[mask]
    g = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n_nodes, n_nodes))
    _, lab = connected_components(g, directed=False)
    out = np.full(n_nodes, -1)
    kept = np.nonzero(keep)[0]
    # renumber in order of first appearance for determinism
    _, first, inverse = np.unique(lab[kept], return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    out[kept] = order[inverse]
    return len(first), out


def _grid_of(full: SectorMesh, vec: np.ndarray, fill=0) -> np.ndarray:
    out = np.full(full.shape, fill, dtype=vec.dtype)
    out[0] = vec[0]
    out[1:-1] = vec[1:].reshape(full.N_r - 1, full.N_theta)
    return out


def _normalized_values(full: SectorMesh, values: np.ndarray) -> np.ndarray:
    r = full.r[:, None]
    damp = np.minimum(1.0, (1.0 - r) / BOUNDARY_LAYER)
    out = np.zeros_like(values)
    inside = damp[:, 0] > 0
    out[inside] = values[inside] / damp[inside]
    return out


def _sign_grid(full: SectorMesh, values: np.ndarray, band_epsilon: float) -> np.ndarray:
    normed = _normalized_values(full, values)
    scale = np.abs(normed[:-1]).max()
    if scale == 0.0:
        raise SegmentationError("field vanishes identically")
    s = np.where(normed > band_epsilon * scale, 1, np.where(normed < -band_epsilon * scale, -1, 0))
    s[-1] = 0
    return s


def _circular_extent(cols: np.ndarray, N: int) -> int:
    """Number of consecutive columns (cyclically) spanned by a set of columns."""
    occupied = np.zeros(N, dtype=bool)
    occupied[cols] = True
    if occupied.all():
        return N
    # largest cyclic run of unoccupied columns
    free = ~occupied
    doubled = np.concatenate([free, free])
    best = run = 0
    for v in doubled:
        run = run + 1 if v else 0
        best = max(best, run)
    best = min(best, N)
    return N - best


# ---------------------------------------------------------------------------
# segmentation
# ---------------------------------------------------------------------------

def _as_full(mesh: SectorMesh, fld) -> tuple[SectorMesh, np.ndarray]:
    values = fld.values if isinstance(fld, Field) else np.asarray(fld, dtype=float)
    if values.shape != mesh.shape:
        values = mesh.to_grid(values)
    full = full_disc_mesh(mesh)
    return full, np.tile(values, (1, mesh.n))


def segment(mesh: SectorMesh, fld, band_epsilon: float = DEFAULT_BAND) -> NodalReport:
    """Label the sign components of ``fld`` on the unfolded full disc."""
    if not 0 < band_epsilon < 0.1:
        raise ValueError("band_epsilon must lie in (0, 0.1)")
    full, values = _as_full(mesh, fld)
    n, N_r, N, Nt = mesh.n, full.N_r, full.N_theta, mesh.N_theta
    signs = _sign_grid(full, values, band_epsilon)
    svec = full.to_vector(signs.astype(float)).astype(int)
    ndof = full.ndof
    edges = _node_edges(N_r, N)

    # sign components: an edge joins two nodes only if their signs agree
    same = svec[edges[:, 0]] == svec[edges[:, 1]]
    e_same = edges[same]
    count, labels = _components(ndof, e_same, svec != 0)

    col = np.concatenate(([-1], np.tile(np.arange(N), N_r - 1)))
    ring = np.concatenate(([0], np.repeat(np.arange(1, N_r), N)))
    # rotation by one sector: column j -> j + Nt
    rot = np.concatenate(([0], 1 + (ring[1:] - 1) * N + (col[1:] + Nt) % N))

    regions = []
    for k in range(count):
        members = labels == k
        cols = col[members & (col >= 0)]
        extent_cols = _circular_extent(cols, N) if cols.size else 0
        contains_origin = bool(members[0])
        invariant = bool(np.all(labels[rot[members]] == k))
        regions.append(Region(
            label=k,
            sign=int(svec[members][0]),
            node_count=int(members.sum()),
            is_n_invariant=invariant,
            touches_boundary=bool(np.any(ring[members] >= N_r - BOUNDARY_CELLS)),
            contains_origin=contains_origin,
            sector_contained=(not contains_origin) and extent_cols < Nt,
            angular_extent=extent_cols * full.angular_step,
        ))

    # sector restriction: drop edges that cross the sector edge between columns Nt-1 and Nt
    in_sector = (col < Nt)
    if n > 1:
        a, b = col[e_same[:, 0]], col[e_same[:, 1]]
        wraps = ((a == Nt - 1) & (b == 0)) | ((b == Nt - 1) & (a == 0))
        e_sector = e_same[~wraps]
    else:
        e_sector = e_same
    sector_count, _ = _components(ndof, e_sector, (svec != 0) & in_sector)

    nodal = _nodal_cells(signs, N_r, N)
    report = NodalReport(
        n=n, region_count=count, sector_region_count=sector_count, regions=regions,
        labels=_grid_of(full, labels, -1), band_epsilon=band_epsilon,
        zero_band_fraction=float(np.mean(svec == 0)),
        origin_in_nodal_set=nodal["origin"],
        nodal_set_touches_boundary=nodal["boundary"],
        origin_and_boundary_component=nodal["origin_boundary"],
        nodal_components=nodal["components"],
        max_regions_in_sector=_max_regions_in_sector(regions, labels, col, N, Nt),
    )
    ptp = np.ptp(values[1:-1], axis=1).max() if N_r > 1 else 0.0
    report.angular_variation = float(ptp / np.abs(values).max())
    return report


def _nodal_cells(signs: np.ndarray, N_r: int, N: int) -> dict:
    """Components of nodal cells and their contact with the origin and the boundary ring.

    Cells: pole triangles (0; ring 1 columns j, j+1) and quads between rings
    i, i+1.  The Dirichlet ring r = 1 is ignored when deciding whether a
    cell is nodal.
    """
    def nodal(corners):
        c = np.stack(corners, axis=0)
        pos = np.any(c > 0, axis=0)
        neg = np.any(c < 0, axis=0)
        zero = np.any(c == 0, axis=0)
        return (pos & neg) | zero

    jp = (np.arange(N) + 1) % N
    pole = np.full(N, signs[0, 0])
    tri = nodal([pole, signs[1], signs[1, jp]])
    quads = []
    for i in range(1, N_r - 1):
        quads.append(nodal([signs[i], signs[i, jp], signs[i + 1], signs[i + 1, jp]]))
    last = N_r - 1
    quads.append(nodal([signs[last], signs[last, jp]]))  # outermost cells: interior corners only
    cells = np.vstack([tri[None, :]] + [q[None, :] for q in quads])  # row c: cell ring c -> c+1
    rows, cols = cells.shape
    idx = np.arange(rows * cols).reshape(rows, cols)
    keep = cells.ravel()
    e = [np.stack([idx[:, :].ravel(), idx[:, jp].ravel()], axis=1)]
    e.append(np.stack([idx[:-1].ravel(), idx[1:].ravel()], axis=1))
    edges = np.concatenate(e)
    count, lab = _components(rows * cols, edges, keep)
    lab = lab.reshape(rows, cols)
    origin_labels = set(lab[0][cells[0]].tolist())
    boundary_labels = set(lab[rows - BOUNDARY_CELLS:][cells[rows - BOUNDARY_CELLS:]].tolist())
    return {
        "components": count,
        "origin": bool(origin_labels) or signs[0, 0] == 0,
        "boundary": bool(boundary_labels),
        "origin_boundary": bool(origin_labels & boundary_labels),
    }


def _max_regions_in_sector(regions, labels, col, N, Nt) -> int:
    """Largest number of sector-contained regions lying inside one open sector window."""
    spans = []
    for reg in regions:
        if not reg.sector_contained:
            continue
        cols = np.unique(col[(labels == reg.label) & (col >= 0)])
        spans.append(cols)
    if not spans:
        return 0
    best = 0
    for start in range(N):
        window = (np.arange(1, Nt) + start) % N
        inside = sum(1 for c in spans if np.all(np.isin(c, window)))
        best = max(best, inside)
    return best


def count_regions(report: NodalReport) -> tuple[int, int]:
    return report.region_count, report.sector_region_count


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def classify(report: NodalReport, params: ProblemParams | None = None) -> str:
    """Case label from the nodal report (see module docstring for the cases).

    Tie-break order: radial, case1, case2, case3; anything else is ``other``.
    """
    n = report.n
    regions = report.regions
    if report.angular_variation < RADIAL_TOLERANCE:
        case = "radial"
    elif report.region_count == 2 * n and report.origin_and_boundary_component:
        case = "case1"
    elif report.region_count == n + 1 and _is_case2(regions, n):
        case = "case2"
    elif (report.region_count == 2 and all(r.is_n_invariant and not r.sector_contained for r in regions)
          and not report.nodal_set_touches_boundary):
        case = "case3"
    else:
        case = "other"
    report.case = case
    report.quasiradial = case == "case3"
    return case


def _is_case2(regions, n: int) -> bool:
    big = [r for r in regions if r.is_n_invariant and not r.sector_contained]
    small = [r for r in regions if r.sector_contained]
    if len(big) != 1 or len(small) != n:
        return False
    return len({(r.sign, r.node_count) for r in small}) == 1


def predicted_consistency(report: NodalReport, params: ProblemParams, large_p: float = 50.0) -> list:
    """Findings where the observation contradicts the admissible set or the region bounds."""
    pred = predict_cases(params)
    findings = []
    if report.case not in pred.admissible:
        findings.append(f"case {report.case} outside admissible set {sorted(pred.admissible)}")
    if params.p >= large_p and report.region_count > pred.max_regions and report.case != "case1":
        findings.append(f"{report.region_count} regions exceed N_alpha = {pred.max_regions}")
    if report.case == "case1" and 2 * params.n > pred.max_regions and params.p >= large_p:
        findings.append(f"case1 with 2n = {2 * params.n} regions above N_alpha = {pred.max_regions}")
    if report.max_regions_in_sector >= 3:
        findings.append(f"{report.max_regions_in_sector} regions strictly inside one sector")
    if report.robust is False:
        findings.append("region count changes under zero-band sweep")
    return findings


# ---------------------------------------------------------------------------
# symmetry diagnostics
# ---------------------------------------------------------------------------

def _asymmetry(mesh: SectorMesh, values: np.ndarray) -> float:
    w = mesh.grid_measure(False)
    ref = values[:, (-np.arange(mesh.N_theta)) % mesh.N_theta]
    num = np.sum(w * (values - ref) ** 2)
    den = np.sum(w * values**2)
    return float(math.sqrt(num / den)) if den > 0 else 0.0


def best_alignment(mesh: SectorMesh, fld: Field) -> tuple[int, float]:
    """Shift (in angular cells) minimizing the bisector asymmetry, and that asymmetry."""
    best = (0, math.inf)
    for k in range(mesh.N_theta):
        a = _asymmetry(mesh, np.roll(fld.values, k, axis=1))
        if a < best[1] - 1e-15:
            best = (k, a)
    return best


def check_bisector_symmetry(mesh: SectorMesh, fld: Field, n: int | None = None) -> float:
    """||u - reflect(u)|| / ||u|| after the best rotation (0 for symmetric fields)."""
    return best_alignment(mesh, fld)[1]


def check_angular_monotonicity(mesh: SectorMesh, fld: Field, n: int | None = None) -> float:
    """Largest increase of u along theta over the aligned half sector, relative to max|u|.

    The field is rotated so that it is (as nearly as possible) mirror
    symmetric about theta = 0; both mirror lines theta = 0 and theta = pi/n
    are tried as the starting axis, and the smaller violation is returned.
    """
    k, _ = best_alignment(mesh, fld)
    values = np.roll(fld.values, k, axis=1)
    scale = np.abs(values).max()
    if scale == 0:
        return 0.0
    half = mesh.N_theta // 2
    out = math.inf
    for start in (0, half):
        v = np.roll(values, -start, axis=1)[:, : half + 1]
        inc = np.diff(v[1:-1], axis=1)
        out = min(out, max(0.0, float(inc.max())) / scale if inc.size else 0.0)
    return out


def origin_arc_order(mesh: SectorMesh, fld: Field, band_epsilon: float = DEFAULT_BAND,
                     rings: int = 3) -> int | None:
    """Half the number of sign alternations around the innermost rings.

    Returns None when the origin is not in the nodal set, that is when the
    pole is outside the zero band and the first ring carries its sign only.
    Alternations are counted on the raw signs, since near a nodal origin
    the first rings sit entirely inside the zero band.
    """
    full, values = _as_full(mesh, fld)
    signs = _sign_grid(full, values, band_epsilon)
    pole = signs[0, 0]
    if pole != 0 and not np.any(signs[1] == -pole):
        return None
    counts = []
    for i in range(1, min(rings, full.N_r - 1) + 1):
        s = np.sign(values[i])
        s = s[s != 0]
        if s.size:
            counts.append(int(np.sum(s != np.roll(s, 1))))
    if not counts or max(counts) == 0:
        return None
    return int(np.median(counts)) // 2


# ---------------------------------------------------------------------------
# energies per region
# ---------------------------------------------------------------------------

def _assign_band(labels: np.ndarray, svals: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Attach zero-band nodes to a neighbouring region of the same sign of u."""
    labels = labels.copy()
    while True:
        changed = False
        for a, b in ((0, 1), (1, 0)):
            src, dst = edges[:, a], edges[:, b]
            m = (labels[dst] < 0) & (labels[src] >= 0) & (np.sign(svals[dst]) == np.sign(svals[src]))
            if np.any(m):
                labels[dst[m]] = labels[src[m]]
                changed = True
        if not changed:
            break
    return labels


def per_region_energy(report: NodalReport, mesh: SectorMesh, fld: Field, p: float) -> list:
    """Per-region p * Dirichlet integral and p * energy, with ratios to 8*pi*e and 4*pi*e.

    Dirichlet energy is attributed node by node as ``u_i (K u)_i`` on the
    full disc, so the region values add up to the total exactly.  Zero-band
    nodes go to an adjacent region of the same sign; a band node that
    cannot be attached is collected in a final ``band`` row.
    """
    full, values = _as_full(mesh, fld)
    full = full.with_alpha(mesh.weight_alpha)
    u = full.to_vector(values)
    Ku = full.stiffness @ u
    au = np.abs(u)
    m = au.max()
    nl = full.weight * (au / m) ** (p + 1.0) * m ** (p + 1.0)
    labels = full.to_vector(report.labels.astype(float)).astype(int)
    labels = _assign_band(labels, u, _node_edges(full.N_r, full.N_theta))
    rows = []
    for reg in report.regions:
        sel = labels == reg.label
        d = float(np.sum(u[sel] * Ku[sel]))
        b = float(np.sum(nl[sel]))
        reg.dirichlet_energy = d
        reg.scaled_dirichlet = p * d
        reg.scaled_energy = p * (0.5 * d - b / (p + 1.0))
        rows.append({
            "label": reg.label, "sign": reg.sign, "dirichlet": d,
            "scaled_dirichlet": p * d, "scaled_energy": reg.scaled_energy,
            "ratio_8pie": p * d / EIGHT_PI_E, "ratio_4pie": reg.scaled_energy / FOUR_PI_E,
        })
    rest = labels < 0
    if np.any(rest):
        d = float(np.sum(u[rest] * Ku[rest]))
        b = float(np.sum(nl[rest]))
        rows.append({"label": "band", "sign": 0, "dirichlet": d, "scaled_dirichlet": p * d,
                     "scaled_energy": p * (0.5 * d - b / (p + 1.0)),
                     "ratio_8pie": p * d / EIGHT_PI_E, "ratio_4pie": math.nan})
    return rows


def radial_region_energies(profile) -> dict:
    """Per-region p * Dirichlet integrals of a radial profile (from the shooting quadrature)."""
    inner, outer = profile.region_dirichlet
    p = profile.p
    return {
        "p": p, "inner": p * inner, "outer": p * outer, "total": p * profile.dirichlet_energy,
        "ratio_inner": p * inner / EIGHT_PI_E, "ratio_outer": p * outer / EIGHT_PI_E,
        "additivity_defect": abs(inner + outer - profile.dirichlet_energy) / profile.dirichlet_energy,
    }


# ---------------------------------------------------------------------------
# one-call analysis
# ---------------------------------------------------------------------------

def analyze(mesh: SectorMesh, fld: Field, params: ProblemParams,
            band_epsilon: float = DEFAULT_BAND, energies: bool = True) -> NodalReport:
    """Segment, classify, run the diagnostics and the zero-band robustness sweep."""
    report = segment(mesh, fld, band_epsilon)
    classify(report, params)
    report.monotonicity_violation = check_angular_monotonicity(mesh, fld, params.n)
    report.bisector_asymmetry = check_bisector_symmetry(mesh, fld, params.n)
    report.origin_arc_order = origin_arc_order(mesh, fld, band_epsilon)
    sweep = {}
    for factor in (0.5, 2.0):
        eps = band_epsilon * factor
        if not 0 < eps < 0.1:
            continue
        other = segment(mesh, fld, eps)
        classify(other, params)
        sweep[f"{eps:.3g}"] = {"region_count": other.region_count, "case": other.case}
    report.robustness = sweep
    report.robust = all(v["region_count"] == report.region_count and v["case"] == report.case
                        for v in sweep.values())
    if energies:
        per_region_energy(report, mesh, fld, params.p)
    report.findings = predicted_consistency(report, params)
    return report
