"""Negative directions of the linearized operator (Morse indices).

The second variation of the energy at ``u`` is the quadratic form
``Q(psi) = int |grad psi|^2 - p |x|^alpha |u|^(p-1) psi^2``.  On the grid it
is the symmetric matrix ``H = K - diag(p W |u|^(p-1))`` paired with the
lumped mass ``M``; by Sylvester's law the number of negative generalized
eigenvalues of ``(H, M)`` equals the number of negative eigenvalues of ``H``.

Three counting routes are provided:

* ``dense``: all eigenvalues of ``M^(-1/2) H M^(-1/2)`` (coarse grids).
* ``inertia``: block LDL^T over the ring structure.  The pole and each ring
  form the diagonal blocks of a block tridiagonal matrix, so the inertia is
  the sum of the inertias of the successive Schur complements.
* ``radial_mode_decomposition``: for radial ``u`` the operator splits into
  one radial problem per angular frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .mesh import Field, SectorMesh, _vector, build_mesh, full_disc_mesh, unfold_full_disc

MARGINAL = 1e-9
#: First Dirichlet eigenvalue of the unit disc (j_{0,1}^2); sets the scale of the marginal band.
DISC_EIGENVALUE = 5.783185962946784
DENSE_LIMIT = 2500
ORACLE_RESOLUTION = 48
#: Eigenvectors at least this aligned with the rotation generator count as symmetry modes.
SYMMETRY_ALIGNMENT = 0.9
#: Only eigenvalues within this fraction of the lowest one are tested for alignment.
SYMMETRY_WINDOW = 1e-3


@dataclass
class SpectralReport:
    negative_count: int
    smallest_eigenvalues: list
    subspace: str
    grid: str
    method: str
    marginal: list = field(default_factory=list)
    shifted_count: int | None = None
    flagged: bool = False
    message: str = ""
    symmetry_modes: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        eig = self.smallest_eigenvalues
        sorted_ok = all(a <= b for a, b in zip(eig, eig[1:]))
        return sorted_ok and (self.shifted_count is None or self.shifted_count == self.negative_count)

    def as_dict(self) -> dict:
        return {
            "negative_count": self.negative_count,
            "smallest_eigenvalues": [float(x) for x in self.smallest_eigenvalues],
            "marginal": [float(x) for x in self.marginal],
            "subspace": self.subspace, "grid": self.grid, "method": self.method,
            "shifted_count": self.shifted_count, "flagged": self.flagged,
            "message": self.message,
            "symmetry_modes": [float(x) for x in self.symmetry_modes],
        }


def _potential(mesh: SectorMesh, u: np.ndarray, p: float) -> np.ndarray:
    """p W |u|^(p-1) per degree of freedom (overflow safe)."""
    au = np.abs(u)
    m = au.max()
    if m == 0.0:
        return np.zeros_like(u)
    return p * mesh.weight * (au / m) ** (p - 1.0) * m ** (p - 1.0)


def linearized_operator(mesh: SectorMesh, field, p: float) -> sp.csr_matrix:
    """The symmetric matrix of Q_u in the nodal basis (full-disc normalization)."""
    u = _vector(mesh, field)
    return (mesh.stiffness - sp.diags(_potential(mesh, u, p))).tocsr()


def linearized_apply(mesh: SectorMesh, field, p: float, psi):
    """-Lap psi - p |x|^alpha |u|^(p-1) psi as a grid function.

    Self-adjoint for the lumped inner product ``sum M a b``.
    """
    v = _vector(mesh, psi)
    out = (linearized_operator(mesh, field, p) @ v) / mesh.mass
    if isinstance(psi, Field):
        return Field.from_vector(mesh, out)
    return out


def quadratic_form(mesh: SectorMesh, field, p: float, psi) -> float:
    v = _vector(mesh, psi)
    return float(v @ (linearized_operator(mesh, field, p) @ v))


def _grid_tag(mesh: SectorMesh) -> str:
    tag = f"n={mesh.n},N_r={mesh.N_r},N_theta={mesh.N_theta},{mesh.grading}"
    if mesh.r_min is not None:
        tag += f",r_min={mesh.r_min:.3g}"
    return tag


def _scale() -> float:
    # Eigenvalues of the linearization span many decades at large p (the
    # concentrated core pushes the lowest one towards -1e10), so the band of
    # "marginal" eigenvalues is measured against the Laplacian's own scale.
    return DISC_EIGENVALUE


def _split_marginal(eigs: np.ndarray, scale: float) -> tuple[int, list]:
    tol = MARGINAL * scale
    marginal = [float(x) for x in eigs if abs(x) < tol]
    return int(np.sum(eigs <= -tol)), marginal


def dense_spectrum(mesh: SectorMesh, field, p: float) -> np.ndarray:
    """All generalized eigenvalues of (H, M), ascending."""
    H = linearized_operator(mesh, field, p).toarray()
    s = 1.0 / np.sqrt(mesh.mass)
    return la.eigvalsh(H * s[:, None] * s[None, :])


class BlockTridiagonal:
    """Dense diagonal and sub-diagonal blocks of a symmetric block tridiagonal matrix."""

    def __init__(self, H: sp.spmatrix, blocks: Sequence[np.ndarray]):
        H = sp.csr_matrix(H)
        self.blocks = [np.asarray(b) for b in blocks]
        self.diag = [H[b][:, b].toarray() for b in self.blocks]
        self.lower = [H[b][:, a].toarray() for a, b in zip(self.blocks, self.blocks[1:])]

    def inertia(self, shift: float = 0.0, mass: np.ndarray | None = None) -> tuple[int, int, int]:
        """(negative, zero, positive) counts of H - shift * diag(mass) by block LDL^T."""
        neg = zero = pos = 0
        S_next = None
        for k, (idx, D) in enumerate(zip(self.blocks, self.diag)):
            D = D.copy()
            if shift:
                D[np.diag_indices_from(D)] -= shift * mass[idx]
            if k:
                D -= S_next  # L_k S_{k-1}^{-1} L_k^T from the previous block
            D = 0.5 * (D + D.T)
            if k + 1 < len(self.blocks):
                Lnext = self.lower[k]
            else:
                Lnext = None
            try:
                # positive definite Schur complements are the common case
                c = la.cholesky(D, lower=False, check_finite=False)
                pos += D.shape[0]
                if Lnext is not None:
                    X = la.solve_triangular(c, Lnext.T, trans="T", check_finite=False)
                    S_next = X.T @ X
                continue
            except la.LinAlgError:
                pass
            w, V = la.eigh(D, check_finite=False)
            tiny = 1e-13 * max(1.0, np.abs(w).max())
            neg += int(np.sum(w < -tiny))
            zero += int(np.sum(np.abs(w) <= tiny))
            pos += int(np.sum(w > tiny))
            w_safe = np.where(np.abs(w) <= tiny, tiny, w)
            if Lnext is not None:
                X = Lnext @ V
                S_next = (X / w_safe) @ X.T
        return neg, zero, pos


def block_inertia(H: sp.spmatrix, blocks: Sequence[np.ndarray], shift_mass=None,
                  shift: float = 0.0) -> tuple[int, int, int]:
    """(negative, zero, positive) counts of H - shift*diag(shift_mass) via block LDL^T.

    ``blocks`` must partition the unknowns so that H is block tridiagonal in
    the given order.  Schur complements are formed densely.
    """
    return BlockTridiagonal(H, blocks).inertia(shift, shift_mass)


def _bisect_eigenvalue(bt: BlockTridiagonal, mass: np.ndarray, j: int, lo: float, hi: float,
                       rtol: float = 1e-12) -> float:
    """The j-th smallest generalized eigenvalue (1-based) inside (lo, hi] by inertia bisection.

    Requires #eig < lo to be below j and #eig < hi to be at least j.
    """
    while hi - lo > rtol * max(abs(lo), abs(hi)):
        if lo < 0 and hi < 0 and lo / hi > 2.0:
            mid = -math.sqrt(lo * hi)
        else:
            mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if bt.inertia(mid, mass)[0] >= j:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def negative_eigenvalues(bt: BlockTridiagonal, mass: np.ndarray, count: int, upper: float) -> list:
    """All generalized eigenvalues below ``upper`` (there are ``count``), by bisection."""
    if count == 0:
        return []
    lo = -1.0
    while bt.inertia(lo, mass)[0] > 0:
        lo *= 4.0
    out = []
    for j in range(1, count + 1):
        out.append(_bisect_eigenvalue(bt, mass, j, lo, upper))
        lo = out[-1] * (1 + 1e-9) if out[-1] < 0 else out[-1] - 1e-9
    return out


def _near_zero(H, mass, k: int) -> np.ndarray:
    """The k generalized eigenvalues closest to zero (shift-invert at 0)."""
    k = min(k, H.shape[0] - 2)
    vals = eigsh(H.tocsc(), k=k, M=sp.diags(mass).tocsc(), sigma=0.0, which="LM",
                 return_eigenvectors=False, tol=1e-12, maxiter=5000)
    return np.sort(vals)


def rotation_generator(mesh: SectorMesh, field) -> np.ndarray:
    """Angular derivative of ``field`` (spectral along each ring), as a dof vector.

    For a nonradial critical point this is the infinitesimal rotation, which
    lies in the kernel of the continuum linearization.
    """
    g = mesh.to_grid(_vector(mesh, field))
    N = g.shape[1]
    freq = np.fft.fftfreq(N, 1.0 / N) * mesh.n
    if N % 2 == 0:
        freq[N // 2] = 0.0
    d = np.real(np.fft.ifft(1j * freq * np.fft.fft(g, axis=1), axis=1))
    d[0] = 0.0
    d[-1] = 0.0
    return mesh.to_vector(d)


def _symmetry_modes(mesh: SectorMesh, H, u: np.ndarray, negatives) -> list:
    """Negative eigenvalues whose eigenvector is the infinitesimal rotation.

    The grid breaks rotation invariance only at sub-cell angles, which turns
    the continuum zero mode into an eigenvalue of either sign.  Such a mode
    is not a descent direction of the continuum problem and is reported
    separately instead of being counted.
    """
    negatives = [float(x) for x in negatives]
    if not negatives:
        return []
    mass = mesh.mass
    gen = rotation_generator(mesh, u)
    gen_norm = float(gen @ (mass * gen))
    if gen_norm <= 1e-20 * float(u @ (mass * u)):
        return []
    lowest = min(negatives)
    M = sp.diags(mass).tocsc()
    Hc = H.tocsc()
    found = []
    for lam in negatives:
        if abs(lam) > SYMMETRY_WINDOW * abs(lowest):
            continue
        sigma = lam - 1e-6 * abs(lam)
        _, vec = eigsh(Hc, k=1, M=M, sigma=sigma, which="LM", tol=1e-10)
        v = vec[:, 0]
        align = abs(v @ (mass * gen)) / math.sqrt(float(v @ (mass * v)) * gen_norm)
        if align >= SYMMETRY_ALIGNMENT:
            found.append(lam)
    return found


def _report(mesh, field, p, subspace, method, k_report=8) -> SpectralReport:
    u = _vector(mesh, field)
    H = linearized_operator(mesh, u, p)
    if method == "auto":
        method = "dense-oracle" if mesh.ndof <= DENSE_LIMIT else "iterative"
    flagged, message = False, ""
    if method == "dense-oracle":
        eigs = dense_spectrum(mesh, u, p)
        scale = _scale()
        count, marginal = _split_marginal(eigs, scale)
        shifted = int(np.sum(eigs <= -(MARGINAL + 1e-10) * scale))
        smallest = eigs[:max(k_report, count + 2)]
    else:
        bt = BlockTridiagonal(H, mesh.ring_blocks)
        scale = _scale()
        tol = MARGINAL * scale
        count = bt.inertia(-tol, mesh.mass)[0]
        below_plus = bt.inertia(tol, mesh.mass)[0]
        shifted = bt.inertia(-tol - 1e-10 * scale, mesh.mass)[0]
        negatives = negative_eigenvalues(bt, mesh.mass, count, -tol)
        try:
            near = _near_zero(H, mesh.mass, k_report)
        except ArpackNoConvergence as exc:
            near = np.sort(exc.eigenvalues) if exc.eigenvalues is not None else np.array([])
            flagged, message = True, "eigsh did not converge"
        rest = [float(x) for x in near if x > -tol]
        smallest = np.array(sorted(negatives + rest))[:max(k_report, count + 2)]
        marginal = [float(x) for x in near if abs(x) < tol]
        if below_plus - count != len(marginal):
            flagged = True
            message = f"{below_plus - count} eigenvalues in the marginal band, {len(marginal)} resolved"
        near_neg = int(np.sum(near <= -tol))
        if near_neg > count:
            flagged = True
            message = f"factorization count {count} below eigsh count {near_neg}"
    symmetry = _symmetry_modes(mesh, H, u, [x for x in smallest[:count]])
    return SpectralReport(
        negative_count=int(count) - len(symmetry),
        smallest_eigenvalues=[float(x) for x in smallest],
        subspace=subspace, grid=_grid_tag(mesh), method=method, marginal=marginal,
        shifted_count=int(shifted) - len(symmetry), flagged=flagged, message=message,
        symmetry_modes=symmetry,
    )


def morse_index_symmetric(mesh: SectorMesh, field, p: float, method: str = "auto") -> SpectralReport:
    """Negative count of Q_u on the n-invariant subspace (the sector with periodic sides)."""
    return _report(mesh, field, p, "n-invariant", method)


def is_radial(mesh: SectorMesh, field, tol: float = 1e-12) -> bool:
    values = field.values if isinstance(field, Field) else mesh.to_grid(_vector(mesh, field))
    scale = max(np.abs(values).max(), 1e-300)
    return bool(np.max(np.ptp(values, axis=1)) <= tol * scale)


def morse_index_full(mesh: SectorMesh, field, p: float, method: str = "auto") -> SpectralReport:
    """Negative count of Q_u on the full space, without any symmetry restriction.

    Radial fields go through the exact angular-mode splitting of the full-disc
    grid operator; other fields are unfolded and counted on the full disc.
    """
    full = full_disc_mesh(mesh)
    if isinstance(field, Field) and field.mesh.n == 1 and mesh.n == 1:
        unfolded = field
    else:
        unfolded = unfold_full_disc(mesh, field)
    if is_radial(full, unfolded):
        values = unfolded.values[:, 0]
        modes = mesh_mode_counts(full, values, p)
        total = modes["total"]
        eigs = sorted(x for row in modes["smallest"] for x in row)[:8]
        return SpectralReport(total, eigs, "full", _grid_tag(full), "radial-modes",
                              marginal=modes["marginal"], shifted_count=None)
    return _report(full, unfolded, p, "full", method)


# ---------------------------------------------------------------------------
# angular mode decomposition of radial fields
# ---------------------------------------------------------------------------

@dataclass
class RadialOperator:
    """One-dimensional pieces of the linearized operator around a radial profile.

    Quantities are per full circle: ``radial_weight[i]`` couples node i and
    i+1 (node 0 is the pole), ``angular_weight[i]`` multiplies the angular
    symbol on ring i, ``mass`` and ``potential`` are per node.
    """

    r: np.ndarray
    radial_weight: np.ndarray
    angular_weight: np.ndarray
    mass: np.ndarray
    potential: np.ndarray

    def mode_matrix(self, symbol: float):
        """Tridiagonal (diag, offdiag) of M^-1/2 H_k M^-1/2; the pole is kept only for symbol 0."""
        w = self.radial_weight
        nint = len(self.r) - 1  # unknowns 0..N_r-1 (node N_r is the Dirichlet ring)
        diag = np.zeros(nint)
        diag[:-1] += w[:nint - 1]
        diag[1:] += w[:nint - 1]
        diag[-1] += w[nint - 1]
        diag += symbol * self.angular_weight[:nint] - self.potential[:nint]
        off = -w[:nint - 1]
        mass = self.mass[:nint]
        if symbol != 0.0:
            diag, off, mass = diag[1:], off[1:], mass[1:]
        s = 1.0 / np.sqrt(mass)
        return diag * s * s, off * s[:-1] * s[1:]

    def mode_eigenvalues(self, symbol: float) -> np.ndarray:
        d, e = self.mode_matrix(symbol)
        return la.eigvalsh_tridiagonal(d, e)


def radial_operator(mesh: SectorMesh, values: np.ndarray, p: float) -> RadialOperator:
    """Per-circle radial operator on the rings of ``mesh`` for a radial field ``values``."""
    full = full_disc_mesh(mesh)
    radial, angular, _ = full.edge_weights
    N = full.N_theta
    u = np.asarray(values, dtype=float)
    au = np.abs(u)
    m = max(au.max(), 1e-300)
    row_w = full.row_weight.copy()
    row_a = full.row_area.copy()
    row_w[1:] *= N
    row_a[1:] *= N
    pot = p * row_w * (au / m) ** (p - 1.0) * m ** (p - 1.0)
    return RadialOperator(r=full.r, radial_weight=N * radial, angular_weight=N * angular,
                          mass=row_a, potential=pot)


def mesh_mode_counts(full: SectorMesh, values: np.ndarray, p: float) -> dict:
    """Exact block diagonalization of a full-disc grid operator around a radial field.

    Mode k (0 <= k <= N/2) uses the discrete angular symbol (2 - 2cos(k dtheta));
    modes 0 < k < N/2 carry multiplicity 2.  The total equals the negative
    count of the 2-D full-disc matrix.
    """
    op = radial_operator(full, values, p)
    N = full.N_theta
    dth = full.angular_step
    counts, smallest, marginal_all = [], [], []
    total = 0
    for k in range(N // 2 + 1):
        symbol = 2.0 - 2.0 * math.cos(k * dth)
        eigs = op.mode_eigenvalues(symbol)
        scale = _scale()
        c, marginal = _split_marginal(eigs, scale)
        counts.append(c)
        smallest.append([float(x) for x in eigs[:4]])
        marginal_all.extend(marginal)
        total += c if k in (0, N // 2) else 2 * c
    return {"counts": counts, "total": total, "smallest": smallest, "marginal": marginal_all}


@dataclass
class ModeDecomposition:
    counts: list
    total: int
    lowest: list
    k_max: int
    grid: str

    @property
    def radial_count(self) -> int:
        return self.counts[0]

    def as_dict(self) -> dict:
        return {"counts": self.counts, "total": self.total, "radial_count": self.radial_count,
                "lowest": self.lowest, "k_max": self.k_max, "grid": self.grid}


class ModeCutoffError(ValueError):
    pass


def radial_mode_decomposition(profile, p: float | None = None, k_max: int = 16, N_r: int = 1024,
                              r_min: float | None = None) -> ModeDecomposition:
    """Negative counts per angular frequency k = 0..k_max for a radial profile.

    Each mode uses the continuum symbol k^2/r^2 on a logarithmic radial grid
    with ``N_r`` rings.  The full index is count(0) + 2 * sum_{k>=1} count(k).
    """
    if k_max < 8:
        raise ValueError("k_max must be at least 8")
    p = profile.p if p is None else p
    if r_min is None:
        r_min = min(1e-3, 1e-2 * profile.core_radius)
    mesh = build_mesh(1, N_r, 8, "log", alpha=profile.alpha, r_min=r_min)
    values = profile(mesh.r)
    values[-1] = 0.0
    op = radial_operator(mesh, values, p)
    # continuum symbol: k^2 dtheta^2 in place of 2 - 2 cos(k dtheta)
    op.angular_weight = op.angular_weight * mesh.angular_step**2
    counts, lowest = [], []
    for k in range(k_max + 1):
        eigs = op.mode_eigenvalues(float(k * k))
        c, _ = _split_marginal(eigs, _scale())
        counts.append(c)
        lowest.append(float(eigs[0]))
    if counts[-1] > 0:
        raise ModeCutoffError(f"count at k_max={k_max} is {counts[-1]}; raise k_max")
    total = counts[0] + 2 * sum(counts[1:])
    return ModeDecomposition(counts, total, lowest, k_max, f"log,N_r={N_r},r_min={r_min:.3g}")
