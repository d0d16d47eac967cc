"""Distances between quantum states, optimal two-state discrimination and
Uhlmann alignment of purifications."""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .hilbert import (
    ATOL,
    DensityOperator,
    LayoutError,
    Measurement,
    MeasurementError,
    UnitaryOp,
    _split,
    lift,
)

EIG_TOL = 1e-12


def _same_layout(rho, sigma):
    if rho.layout != sigma.layout:
        raise LayoutError(f"layouts differ: {rho.layout.names} vs {sigma.layout.names}")


def _factor(mat):
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    keep = w > EIG_TOL * max(1.0, w[-1])
    return v[:, keep] * np.sqrt(w[keep])


def trace_norm_hermitian(mat):
    return float(np.abs(np.linalg.eigvalsh(mat)).sum())


def trace_distance(rho, sigma):
    """Half the trace norm of ``rho - sigma``."""
    _same_layout(rho, sigma)
    return 0.5 * trace_norm_hermitian(rho.matrix - sigma.matrix)


def _pure_vector(rho):
    """Dominant eigenvector if ``rho`` is rank one, else None."""
    w, v = np.linalg.eigh(rho.matrix)
    if abs(w[-1] - 1.0) <= ATOL:
        return v[:, -1]
    return None


def fidelity(rho, sigma):
    """Root fidelity tr sqrt(sqrt(rho) sigma sqrt(rho)), in [0, 1]."""
    _same_layout(rho, sigma)
    psi = _pure_vector(rho)
    if psi is not None:
        return float(np.sqrt(max(np.vdot(psi, sigma.matrix @ psi).real, 0.0)))
    phi = _pure_vector(sigma)
    if phi is not None:
        return float(np.sqrt(max(np.vdot(phi, rho.matrix @ phi).real, 0.0)))
    # F = ||A^dagger B||_1 for any rho = A A^dagger, sigma = B B^dagger; dropping
    # tiny eigenvalues avoids the sqrt amplifying roundoff on rank-deficient inputs
    a, b = _factor(rho.matrix), _factor(sigma.matrix)
    return float(min(np.linalg.svd(a.conj().T @ b, compute_uv=False).sum(), 1.0))


@dataclass(frozen=True)
class DiscriminationResult:
    measurement: Measurement
    success_probability: float
    trace_distance: float


def helstrom(rho, sigma):
    """Optimal equal-prior measurement telling ``rho`` from ``sigma``.

    The "rho" outcome projects onto eigenvectors of rho - sigma with eigenvalue
    above 1e-12; the kernel goes to "sigma".
    """
    _same_layout(rho, sigma)
    diff = rho.matrix - sigma.matrix
    w, v = np.linalg.eigh((diff + diff.conj().T) / 2)
    pos = v[:, w > EIG_TOL]
    p_rho = pos @ pos.conj().T
    p_sigma = np.eye(diff.shape[0]) - p_rho
    meas = Measurement(rho.layout.names, (("rho", p_rho), ("sigma", p_sigma)))
    success = 0.5 * (np.trace(p_rho @ rho.matrix).real + np.trace(p_sigma @ sigma.matrix).real)
    dist = 0.5 * float(np.abs(w).sum())
    if abs(success - (0.5 + dist / 2)) > ATOL:
        raise ArithmeticError(f"Helstrom success {success} disagrees with 1/2 + D/2 = {0.5 + dist / 2}")
    return DiscriminationResult(meas, float(success), dist)


def povm_success(rho, sigma, e_rho):
    """Equal-prior success of guessing with POVM {e_rho, 1 - e_rho}."""
    e_rho = np.asarray(e_rho)
    return 0.5 * (np.trace(e_rho @ rho.matrix).real + 1.0 - np.trace(e_rho @ sigma.matrix).real)


def _polar_unitary(mat):
    u, _, vh = np.linalg.svd(mat)
    return u @ vh


def uhlmann_rotation(psi0, psi1, side):
    """Unitary on ``side`` maximizing |<psi1|(1 x U)|psi0>|.

    Directions where the cross-overlap matrix is rank deficient are mapped by
    the unitary closest to the identity, so equal inputs give exactly 1.
    """
    if psi0.layout != psi1.layout:
        raise LayoutError("states live on different layouts")
    side = psi0.layout.ordered(side)
    if not side:
        raise LayoutError("side must name at least one register")
    a0, _ = _split(psi0.amplitudes, psi0.layout, side)
    a1, _ = _split(psi1.amplitudes, psi1.layout, side)
    # a_b is (side, complement); <psi1|(1 x U)|psi0> = tr(U a0 a1^dagger)
    cross = a0 @ a1.conj().T
    w, s, vh = np.linalg.svd(cross)
    v = vh.conj().T
    rank = int(np.sum(s > EIG_TOL * max(1.0, s[0] if s.size else 0.0)))
    # tr(U W S V^dagger) is maximal for U = V W^dagger
    u = v[:, :rank] @ w[:, :rank].conj().T
    if rank < len(s):
        w_perp = w[:, rank:]
        v_perp = v[:, rank:]
        z = _polar_unitary(v_perp.conj().T @ w_perp)
        u = u + v_perp @ z @ w_perp.conj().T
    return UnitaryOp(side, matrix=u)


def pure_trace_distance(psi, phi):
    return float(np.sqrt(max(0.0, 1.0 - abs(psi.overlap(phi)) ** 2)))


def cq_trace_distance(branches):
    """sum_x p_x D(rho0_x, rho1_x) for classical-quantum pairs sharing the classical part."""
    branches = list(branches)
    total = sum(p for p, _, _ in branches)
    if any(p < 0 for p, _, _ in branches) or abs(total - 1.0) > ATOL:
        raise ValueError(f"branch probabilities must be non-negative and sum to 1, got {total}")
    return float(sum(p * trace_distance(r0, r1) for p, r0, r1 in branches))


def mixture_trace_distance(mix0, mix1):
    """Trace distance between two ensembles ``[(weight, PureState), ...]``.

    Works in the span of all member vectors, so the full density matrices are
    never formed.
    """
    members = list(mix0) + list(mix1)
    layout = members[0][1].layout
    for _, st in members:
        if st.layout != layout:
            raise LayoutError("ensemble members live on different layouts")
    vecs = np.stack([st.amplitudes for _, st in members], axis=1)
    # column k of vecs is q @ r[:, k], so r carries the members in an orthonormal frame
    _, r = np.linalg.qr(vecs)
    signs = np.array([w for w, _ in mix0] + [-w for w, _ in mix1])
    diff = (r * signs) @ r.conj().T
    return 0.5 * trace_norm_hermitian((diff + diff.conj().T) / 2)


@dataclass(frozen=True)
class GentleResult:
    success: float
    worst_success: float
    damage: float

    @property
    def epsilon(self):
        return max(0.0, 1.0 - self.worst_success)


def _apply_kraus(rho_mat, layout, target, op):
    full = lift(op, layout, target)
    return full @ rho_mat @ full.conj().T


def gentle_measurement_damage(state, m, designated=None):
    """Detection probability of the designated outcome(s) and the disturbance.

    For a single ``DensityOperator`` the damage is D(rho, M rho M^dagger / p)
    for the designated element (``designated`` defaults to the first label).
    For a classical-quantum input ``[(label, p_x, rho_x), ...]`` the correct
    outcome for branch ``x`` is ``label`` and the damage is the distance to the
    post-measurement state with the outcome discarded.
    """
    if not m.complete:
        raise MeasurementError("measurement must be complete")
    if isinstance(state, DensityOperator):
        label = m.labels[0] if designated is None else designated
        op = m.kraus(label)
        post = _apply_kraus(state.matrix, state.layout, m.target, op)
        success = float(np.trace(post).real)
        if success <= 0:
            return GentleResult(0.0, 0.0, 1.0)
        post = post / success
        damage = 0.5 * trace_norm_hermitian(state.matrix - (post + post.conj().T) / 2)
        return GentleResult(success, success, damage)
    branches = list(state)
    total = sum(p for _, p, _ in branches)
    if abs(total - 1.0) > ATOL:
        raise ValueError(f"classical weights sum to {total}")
    success = 0.0
    worst = 1.0
    damage = 0.0
    for label, p, rho in branches:
        post = sum(_apply_kraus(rho.matrix, rho.layout, m.target, op) for _, op in m.elements)
        hit = float(np.trace(_apply_kraus(rho.matrix, rho.layout, m.target, m.kraus(label))).real)
        success += p * hit
        worst = min(worst, hit)
        damage += p * 0.5 * trace_norm_hermitian(rho.matrix - (post + post.conj().T) / 2)
    return GentleResult(success, worst, damage)
