"""Closed-form bounds used to judge the measured quantities.

Raw formulas are returned unclamped so the proof algebra can be checked as
written; ``clamp_probability`` is applied only when reporting.
"""
import math
from dataclasses import dataclass, field

IMPOSSIBILITY_THRESHOLD = 1.0 / 64.0


@dataclass(frozen=True)
class BoundRecord:
    name: str
    inputs: dict
    value: float
    source: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"bound {self.name} is not finite")


@dataclass(frozen=True)
class Verdict:
    status: str  # "impossible" or "not-covered"
    reason: str
    inputs: dict = field(default_factory=dict)


def _check_eps(epsilon):
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")


def clamp_probability(x):
    return min(1.0, max(0.0, x))


def superposition_dephasing_bound(d):
    """Distance between the uniform superposition and its dephased version: 1 - 1/d."""
    if d < 1:
        raise ValueError("alphabet size must be positive")
    return 1.0 - 1.0 / d


def query_distinguishability_bound(di, dj):
    """Lower bound on the owner's distance between queries i and j: 1 - 1/max(di, dj)."""
    if di < 1 or dj < 1:
        raise ValueError("valid-answer multiplicities must be positive")
    return 1.0 - 1.0 / max(di, dj)


def step_failure_bound(l, epsilon):
    """l * (3 sqrt(eps) + eps); may exceed 1."""
    if l < 1:
        raise ValueError("step index starts at 1")
    _check_eps(epsilon)
    return l * (3.0 * math.sqrt(epsilon) + epsilon)


def extraction_success_bound(m, epsilon):
    """max(0, 1 - 2 m^2 sqrt(eps)) for retrieving m entries."""
    if m < 2:
        raise ValueError("need at least two entries")
    _check_eps(epsilon)
    return max(0.0, 1.0 - 2.0 * m * m * math.sqrt(epsilon))


def gentle_bounds(epsilon):
    """(single element, classical-quantum, Uhlmann step, measure-and-rotate step)."""
    _check_eps(epsilon)
    r = math.sqrt(epsilon)
    return (r, r + epsilon, 2.0 * r, 3.0 * r + epsilon)


def union_failure_sum(m, epsilon):
    """1/2 (3 sqrt(eps) + eps)(m^2 + m) - 3 sqrt(eps): the summed per-step failures."""
    r = math.sqrt(epsilon)
    return 0.5 * (3.0 * r + epsilon) * (m * m + m) - 3.0 * r


def two_entry_success_lower(epsilon):
    """1 - 3 (sqrt(eps) + eps): both of two entries retrieved."""
    return 1.0 - 3.0 * (math.sqrt(epsilon) + epsilon)


def impossibility_verdict(epsilon, n, multiplicities):
    multiplicities = list(multiplicities)
    if len(multiplicities) != n:
        raise ValueError("need one multiplicity per entry")
    inputs = {"epsilon": epsilon, "n": n, "multiplicities": multiplicities}
    if n < 2:
        return Verdict("not-covered", "a single entry leaves nothing to protect", inputs)
    multi = sum(1 for k in multiplicities if k >= 2)
    if multi < 2:
        return Verdict(
            "not-covered",
            "at most one query admits multiple valid answers; unique answers are recomputable by the user",
            inputs,
        )
    if epsilon > IMPOSSIBILITY_THRESHOLD:
        return Verdict("not-covered", "epsilon above 1/64, the extraction bound is silent", inputs)
    return Verdict("impossible", "no protocol is epsilon-correct and epsilon-secure for both parties", inputs)


def bound_table(epsilon, m, multiplicities):
    """Every bound evaluated at one parameter point, for the CLI."""
    recs = []
    for d in multiplicities:
        recs.append(BoundRecord("superposition_dephasing", {"d": d}, superposition_dephasing_bound(d), "D(phi, dephased phi) >= 1 - 1/d"))
    if len(multiplicities) >= 2:
        di, dj = multiplicities[0], multiplicities[1]
        recs.append(
            BoundRecord("query_distinguishability", {"di": di, "dj": dj}, query_distinguishability_bound(di, dj), "D(rho_A^i, rho_A^j) >= 1 - 1/max(|X_i|,|X_j|)")
        )
    names = ("gentle_single", "gentle_cq", "uhlmann_step", "measure_rotate_step")
    sources = ("D <= sqrt(eps)", "D <= sqrt(eps) + eps", "D <= 2 sqrt(eps)", "D <= 3 sqrt(eps) + eps")
    for name, value, src in zip(names, gentle_bounds(epsilon), sources):
        recs.append(BoundRecord(name, {"epsilon": epsilon}, value, src))
    for l in range(1, m + 1):
        recs.append(BoundRecord("step_failure", {"l": l, "epsilon": epsilon}, step_failure_bound(l, epsilon), "eps_l <= l (3 sqrt(eps) + eps)"))
    if m >= 2:
        recs.append(BoundRecord("extraction_success", {"m": m, "epsilon": epsilon}, extraction_success_bound(m, epsilon), "success >= 1 - 2 m^2 sqrt(eps)"))
    return recs
