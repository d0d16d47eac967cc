"""Randomized property checks behind ``qpq selftest``.

Every check draws from a fixed-seed generator so reports are reproducible.
"""
import math
from typing import NamedTuple

import numpy as np

from .bounds import (
    IMPOSSIBILITY_THRESHOLD,
    gentle_bounds,
    impossibility_verdict,
    superposition_dephasing_bound,
    two_entry_success_lower,
    union_failure_sum,
)
from .hilbert import DensityOperator, Measurement, PureState, apply_unitary, make_layout, reduced_density
from .metrics import fidelity, gentle_measurement_damage, helstrom, povm_success, trace_distance, uhlmann_rotation

SEED = 20080101


class Check(NamedTuple):
    name: str
    measured: float
    bound: float
    relation: str
    holds: bool
    source: str


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_vector(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_effect(rng, d):
    """A random 0 <= E <= 1."""
    a = random_density(rng, d)
    w, v = np.linalg.eigh(a)
    return (v * rng.uniform(0, 1, size=d)) @ v.conj().T


def _psd_root(mat):
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def dephasing_tightness(dims=(2, 3, 4, 8)):
    out = []
    for d in dims:
        layout = make_layout([("X", d)])
        phi = np.full(d, 1 / math.sqrt(d), dtype=np.complex128)
        sigma0 = DensityOperator(layout, np.outer(phi, phi.conj()))
        sigma1 = DensityOperator(layout, np.eye(d) / d)
        dist = trace_distance(sigma0, sigma1)
        bound = superposition_dephasing_bound(d)
        out.append(Check(f"dephasing[d={d}]", dist, bound, "==", abs(dist - bound) <= 1e-9, "D = 1 - 1/d"))
    return out


def helstrom_optimality(rng, pairs=100, povms=100, max_dim=8):
    worst_gap = math.inf
    worst_formula = 0.0
    for _ in range(pairs):
        d = int(rng.integers(2, max_dim + 1))
        layout = make_layout([("S", d)])
        rho = DensityOperator(layout, random_density(rng, d))
        sigma = DensityOperator(layout, random_density(rng, d))
        res = helstrom(rho, sigma)
        worst_formula = max(worst_formula, abs(res.success_probability - 0.5 - res.trace_distance / 2))
        for _ in range(povms):
            worst_gap = min(worst_gap, res.success_probability - povm_success(rho, sigma, random_effect(rng, d)))
    return [
        Check("helstrom_vs_random_povm", worst_gap, 0.0, ">=", worst_gap >= -1e-9, "P_helstrom >= P_povm"),
        Check("helstrom_formula", worst_formula, 1e-9, "<=", worst_formula <= 1e-9, "P = 1/2 + D/2"),
    ]


def uhlmann_certification(rng, pairs=200, max_dim=8):
    worst = 0.0
    for _ in range(pairs):
        da, db = (int(x) for x in rng.integers(1, max_dim + 1, size=2))
        layout = make_layout([("A", da), ("B", db)])
        psi = PureState(layout, random_vector(rng, da * db))
        phi = PureState(layout, random_vector(rng, da * db))
        u = uhlmann_rotation(psi, phi, ("B",))
        achieved = abs(phi.overlap(apply_unitary(psi, u)))
        f = fidelity(reduced_density(psi, ("A",)), reduced_density(phi, ("A",)))
        worst = max(worst, abs(achieved - f))
    return [Check("uhlmann_overlap_equals_fidelity", worst, 1e-8, "<=", worst <= 1e-8, "|<phi|(1 x U)|psi>| = F(psi_A, phi_A)")]


def _single_instance(rng, d):
    layout = make_layout([("S", d)])
    rho = DensityOperator(layout, random_density(rng, d, rank=int(rng.integers(1, d + 1))))
    t = float(rng.uniform(0, 0.3))
    e = np.eye(d) - t * random_effect(rng, d)
    meas = Measurement(("S",), (("hit", _psd_root(e)), ("miss", _psd_root(np.eye(d) - e))))
    return rho, meas


def _cq_instance(rng, k, d):
    layout = make_layout([("S", d)])
    branches = []
    weights = rng.dirichlet(np.ones(k))
    for x in range(k):
        s = float(rng.uniform(0, 0.2))
        base = np.zeros((d, d), dtype=np.complex128)
        base[x, x] = 1.0
        rho = (1 - s) * base + s * random_density(rng, d)
        branches.append((x, float(weights[x]), DensityOperator(layout, rho)))
    u = np.linalg.qr(np.eye(d) + 0.05 * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))))[0]
    elements = []
    for x in range(k):
        proj = np.zeros((d, d), dtype=np.complex128)
        proj[x, x] = 1.0
        elements.append((x, u @ proj @ u.conj().T))
    rest = np.eye(d) - sum(op for _, op in elements)
    if k < d:
        elements[-1] = (k - 1, elements[-1][1] + rest)
    return branches, Measurement(("S",), tuple(elements))


def gentle_measurement(rng, instances=100, max_dim=8):
    worst_single = math.inf
    for _ in range(instances):
        rho, meas = _single_instance(rng, int(rng.integers(2, max_dim + 1)))
        res = gentle_measurement_damage(rho, meas, "hit")
        worst_single = min(worst_single, gentle_bounds(res.epsilon)[0] - res.damage)
    worst_cq = math.inf
    for _ in range(instances):
        d = int(rng.integers(2, max_dim + 1))
        k = int(rng.integers(2, d + 1))
        branches, meas = _cq_instance(rng, k, d)
        res = gentle_measurement_damage(branches, meas)
        worst_cq = min(worst_cq, gentle_bounds(res.epsilon)[1] - res.damage)
    return [
        Check("gentle_single_margin", worst_single, 0.0, ">=", worst_single >= -1e-9, "D <= sqrt(eps)"),
        Check("gentle_cq_margin", worst_cq, 0.0, ">=", worst_cq >= -1e-9, "D <= sqrt(eps) + eps"),
    ]


def proof_algebra(points=1001, max_m=10):
    grid = np.linspace(0.0, IMPOSSIBILITY_THRESHOLD, points)
    worst = math.inf
    for m in range(2, max_m + 1):
        for eps in grid:
            worst = min(worst, 2 * m * m * math.sqrt(eps) - union_failure_sum(m, eps))
    strict = math.inf
    for eps in grid[:-1]:
        strict = min(strict, two_entry_success_lower(eps) - (0.5 + eps))
    return [
        Check("union_sum_below_2m2sqrt", worst, 0.0, ">=", worst >= -1e-12, "1/2 (3 sqrt(eps) + eps)(m^2 + m) - 3 sqrt(eps) <= 2 m^2 sqrt(eps)"),
        Check("two_entry_beats_guess", strict, 0.0, ">", strict > 0, "1 - 3 (sqrt(eps) + eps) > 1/2 + eps for eps < 1/64"),
    ]


def verdict_flip(points=1001, multiplicities=(2, 2)):
    """Largest grid eps still judged impossible and smallest judged not-covered."""
    grid = np.linspace(0.0, 2 * IMPOSSIBILITY_THRESHOLD, points)
    n = len(multiplicities)
    status = [impossibility_verdict(float(e), n, multiplicities).status for e in grid]
    last_impossible = max((float(e) for e, s in zip(grid, status) if s == "impossible"), default=math.nan)
    first_open = min((float(e) for e, s in zip(grid, status) if s != "impossible"), default=math.nan)
    flips = sum(1 for a, b in zip(status, status[1:]) if a != b)
    holds = flips == 1 and last_impossible <= IMPOSSIBILITY_THRESHOLD < first_open
    return [Check("verdict_flip", last_impossible, IMPOSSIBILITY_THRESHOLD, "==", holds, "impossible iff eps <= 1/64")]


def run_all(seed=SEED):
    rng = np.random.default_rng(seed)
    checks = []
    checks += dephasing_tightness()
    checks += helstrom_optimality(rng)
    checks += uhlmann_certification(rng)
    checks += gentle_measurement(rng)
    checks += proof_algebra()
    checks += verdict_flip()
    return checks
