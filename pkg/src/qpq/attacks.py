"""The two attacks: a database owner who keeps the purification of her random
entries, and a user who keeps his state purified and then extracts entries one
after another by measuring and rotating with Uhlmann unitaries."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .bounds import (
    extraction_success_bound,
    gentle_bounds,
    query_distinguishability_bound,
    step_failure_bound,
)
from .hilbert import (
    ATOL,
    PRUNE_TOL,
    Branch,
    PureState,
    _split,
    apply_unitary,
    computational_measurement,
    measure_branches,
    project_values,
    purify_branches,
)
from .metrics import helstrom, pure_trace_distance, trace_distance, trace_norm_hermitian, uhlmann_rotation
from .protocol import (
    BOB_REGISTERS,
    SpecError,
    alice_marginals,
    build_database_state,
    deliver,
    honest_run,
    plain_and_superposed,
    protocol_epsilon,
    user_privacy_gap,
)


# --- owner's attack ------------------------------------------------------------


@dataclass(frozen=True)
class SpecificAttackReport:
    i: int
    j: int
    repetitions: int
    bob_accept_probability: float
    accept_per_repetition: tuple
    honest_accept_probability: float
    measured_distance: float
    bound: float
    helstrom_success: float
    answer_distributions: tuple
    consistency_probability: float

    def violations(self):
        out = []
        if abs(self.helstrom_success - (0.5 + self.measured_distance / 2)) > ATOL:
            out.append("helstrom_success != 1/2 + D/2")
        if self.measured_distance < self.bound - ATOL:
            out.append("measured distance below the query distinguishability bound")
        return out


def purified_database_attack(spec, i, j, repetitions=1):
    """Alice holds sum_x |x>|x>/sqrt|X_k| per entry, runs the protocol honestly
    ``repetitions`` times with the same query, and afterwards discriminates
    query ``i`` from query ``j`` with the Helstrom measurement on her registers."""
    if i == j:
        raise SpecError("the attack distinguishes two different queries")
    spec.check_query(i)
    spec.check_query(j)
    if repetitions < 1:
        raise SpecError("need at least one repetition")
    purified = replace(spec, mode="purified", entries=None)
    runs = {q: honest_run(purified, q, repetitions=repetitions) for q in (i, j)}
    rho_i = alice_marginals(runs[i])[None][1]
    rho_j = alice_marginals(runs[j])[None][1]
    result = helstrom(rho_i, rho_j)
    t = runs[i]
    accepted = [b for b in t.branches if b.accepted]
    consistent = sum(b.probability for b in accepted if len(set(b.outputs)) == 1)
    honest_spec = replace(spec, mode="uniform", entries=None)
    honest = honest_run(honest_spec, i, repetitions=repetitions)
    return SpecificAttackReport(
        i=i,
        j=j,
        repetitions=repetitions,
        bob_accept_probability=t.accept_probability(),
        accept_per_repetition=tuple(t.accept_probability(r) for r in range(repetitions)),
        honest_accept_probability=honest.accept_probability(),
        measured_distance=trace_distance(rho_i, rho_j),
        bound=query_distinguishability_bound(spec.multiplicities[i - 1], spec.multiplicities[j - 1]),
        helstrom_success=result.success_probability,
        answer_distributions=tuple(t.answer_distribution(r) for r in range(repetitions)),
        consistency_probability=consistent / max(t.accept_probability(), PRUNE_TOL),
    )


# --- user's attack -------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceFamily:
    """End-of-protocol pure states for each query, as the user would hold them.

    ``entry_registers[j]`` names the owner's register holding entry j together
    with the value of each of its basis states.
    """

    references: dict
    bob_side: tuple
    answer_register: str
    entry_registers: dict

    def value_index(self, j, value):
        values = self.entry_registers[j][1]
        return values.index(value) if value in values else None


class Track(NamedTuple):
    weight: float
    values: tuple
    state: PureState


@dataclass(frozen=True)
class StepResult:
    tracks: tuple
    probability_correct: float
    outcome_distribution: dict


def _prob_entries_match(family, track, pairs):
    assignment = {}
    for j, y in pairs:
        idx = family.value_index(j, y)
        if idx is None:
            return 0.0
        assignment[family.entry_registers[j][0]] = idx
    return project_values(track.state, assignment)


def extraction_step(current, i, j, family, rotation=None):
    """Measure the answer register (read entry ``i``), then rotate toward query ``j``.

    ``current`` is a list of weighted pure tracks; the rotation is the Uhlmann
    unitary on the user's side mapping reference ``i`` to reference ``j``
    (identity when ``i == j``). Returns the new tracks with the read value
    appended and the probability that the value equals the owner's entry ``i``.
    """
    for q in (i, j):
        if q not in family.references:
            raise KeyError(f"no reference state for query {q}")
    if rotation is None and i != j:
        rotation = uhlmann_rotation(family.references[i], family.references[j], family.bob_side)
    layout = current[0].state.layout
    meas = computational_measurement(layout, (family.answer_register,))
    tracks = []
    correct = 0.0
    dist = {}
    for tr in current:
        for b in measure_branches(tr.state, meas):
            (y,) = b.label
            w = tr.weight * b.probability
            if w < PRUNE_TOL:
                continue
            post = Track(w, tr.values + (y,), b.state)
            correct += w * _prob_entries_match(family, post, [(i, y)])
            dist[y] = dist.get(y, 0.0) + w
            if rotation is not None:
                post = Track(w, post.values, apply_unitary(post.state, rotation))
            tracks.append(post)
    return StepResult(tuple(tracks), correct, dict(sorted(dist.items())))


def _vectors(ensemble):
    return [(w, st.amplitudes) for w, st in ensemble]


def _ensemble_distance(ens0, ens1):
    members = list(ens0) + list(ens1)
    vecs = np.stack([v for _, v in members], axis=1)
    _, r = np.linalg.qr(vecs)
    signs = np.array([w for w, _ in ens0] + [-w for w, _ in ens1])
    diff = (r * signs) @ r.conj().T
    return 0.5 * trace_norm_hermitian((diff + diff.conj().T) / 2)


def dephased_distance(ens0, ens1, dephase=()):
    """Distance between ensembles of pure states after dephasing ``dephase`` registers.

    With nothing to dephase this is the plain ensemble trace distance. Dephased
    registers split into orthogonal classical blocks whose distances add up.
    """
    if not dephase:
        return _ensemble_distance(_vectors(ens0), _vectors(ens1))
    layout = ens0[0][1].layout
    dims = [layout.dim(r) for r in dephase]
    total = 0.0
    for combo in itertools.product(*[range(d) for d in dims]):
        flat = int(np.ravel_multi_index(combo, dims)) if dims else 0

        def block(ens):
            out = []
            for w, st in ens:
                mat, _ = _split(st.amplitudes, layout, dephase)
                row = mat[flat]
                if np.vdot(row, row).real > PRUNE_TOL * PRUNE_TOL:
                    out.append((w, row))
            return out

        b0, b1 = block(ens0), block(ens1)
        if not b0 and not b1:
            continue
        if not b0 or not b1:
            total += 0.5 * sum(w * np.vdot(v, v).real for w, v in (b0 or b1))
            continue
        total += _ensemble_distance(b0, b1)
    return total


@dataclass(frozen=True)
class ChainResult:
    step_failures: tuple
    overall_success: float
    chain_damage: tuple
    uhlmann_distances: tuple
    pair_success: dict
    outcome_distributions: tuple


def extraction_chain(family, m, dephase=()):
    """Read entries 1..m in turn starting from reference 1.

    ``chain_damage[l-2]`` is the distance between the state before reading entry
    ``l`` and reference ``l``; ``uhlmann_distances[l-2]`` is the distance
    between the rotated reference ``l-1`` and reference ``l``. Distances are
    taken after dephasing ``dephase`` (the owner's classical randomness).
    """
    refs = family.references
    tracks = (Track(1.0, (), refs[1]),)
    damage = []
    uhl = []
    dists = []
    for l in range(1, m + 1):
        if l >= 2:
            damage.append(
                dephased_distance([(t.weight, t.state) for t in tracks], [(1.0, refs[l])], dephase)
            )
        rotation = None
        if l < m:
            rotation = uhlmann_rotation(refs[l], refs[l + 1], family.bob_side)
            rotated = apply_unitary(refs[l], rotation)
            if dephase:
                uhl.append(dephased_distance([(1.0, rotated)], [(1.0, refs[l + 1])], dephase))
            else:
                uhl.append(pure_trace_distance(rotated, refs[l + 1]))
        step = extraction_step(list(tracks), l, l + 1 if l < m else l, family, rotation)
        tracks = step.tracks
        dists.append(step.outcome_distribution)
    failures = []
    for l in range(1, m + 1):
        ok = sum(t.weight * _prob_entries_match(family, t, [(l, t.values[l - 1])]) for t in tracks)
        failures.append(max(0.0, 1.0 - ok))
    overall = sum(
        t.weight * _prob_entries_match(family, t, [(l, t.values[l - 1]) for l in range(1, m + 1)]) for t in tracks
    )
    pairs = {}
    for a, b in itertools.combinations(range(1, m + 1), 2):
        pairs[(a, b)] = sum(
            t.weight * _prob_entries_match(family, t, [(a, t.values[a - 1]), (b, t.values[b - 1])]) for t in tracks
        )
    return ChainResult(tuple(failures), overall, tuple(damage), tuple(uhl), pairs, tuple(dists))


def _noise_index(events, answer_dim):
    idx = 0
    for kind, _, label in events:
        if kind != "noise":
            raise ValueError("references only carry noise events")
        idx = idx * answer_dim**2 + label
    return idx


def protocol_reference(spec, j, coin, noise=0.0):
    """Joint pure state after an honest run with query ``j`` where the user keeps
    all four registers unmeasured.

    The owner's entries are held in purified form. With noise, the channel's
    Kraus index is kept in an environment register ``E`` on the owner's side.
    """
    purified = replace(spec, mode="purified", entries=None)
    (db,) = build_database_state(purified)
    deliveries = deliver(purified, j, coin, db.state, noise)
    if noise <= 0:
        (d,) = deliveries
        return d.state
    ad = spec.answer_dim
    branches = [Branch(d.events, d.probability, d.state) for d in deliveries]
    return purify_branches(branches, "E", (ad * ad) ** 2, index=lambda ev: _noise_index(ev, ad))


def protocol_family(spec, m, coin, noise=0.0):
    plain, _ = plain_and_superposed(coin)
    refs = {j: protocol_reference(spec, j, coin, noise) for j in range(1, m + 1)}
    entries = {j: (f"X{j}", spec.valid_answers[j - 1]) for j in range(1, spec.n + 1)}
    return ReferenceFamily(refs, BOB_REGISTERS, plain[1], entries)


@dataclass(frozen=True)
class GenericAttackReport:
    m: int
    noise: float
    mode: str
    epsilon: float
    step_failures: tuple
    step_bounds: tuple
    overall_success: float
    success_bound: float
    chain_damage: tuple
    damage_bounds: tuple
    uhlmann_distances: tuple
    uhlmann_bound: float
    pair_success: dict
    user_privacy_gap: float
    effective_epsilon: float
    alice_accept_probability: float
    per_coin: tuple = field(default=(), repr=False)

    @property
    def premise_holds(self):
        """Whether the run meets the extraction bounds' hypotheses with ``epsilon``."""
        return self.user_privacy_gap <= 2 * self.epsilon + ATOL

    def comparisons(self, slack=1e-8):
        """(name, measured, bound, holds) rows, bounds taken at ``epsilon``."""
        rows = [("overall_success", self.overall_success, self.success_bound, self.overall_success >= self.success_bound - slack)]
        for l, (f, b) in enumerate(zip(self.step_failures, self.step_bounds), start=1):
            rows.append((f"step_failure[{l}]", f, b, f <= b + slack))
        for l, (d, b) in enumerate(zip(self.chain_damage, self.damage_bounds), start=2):
            rows.append((f"chain_damage[{l}]", d, b, d <= b + slack))
        for l, d in enumerate(self.uhlmann_distances, start=1):
            rows.append((f"uhlmann_distance[{l}->{l + 1}]", d, self.uhlmann_bound, d <= self.uhlmann_bound + slack))
        return rows


def sequential_extraction_attack(spec, m, noise=0.0):
    """Run the user's generic attack after an honest run with query 1.

    Everything is computed per value of the user's coin and then averaged with
    weight 1/2. ``epsilon`` is the protocol's measured correctness error; the
    owner-side distance ``user_privacy_gap`` records whether the protocol is
    also user-private, which the extraction guarantee presupposes.
    """
    if not 2 <= m <= spec.n:
        raise SpecError(f"m must lie in 2..{spec.n}, got {m}")
    if spec.mode not in ("purified", "uniform"):
        raise SpecError("the owner's entries must be random (purified or uniform mode)")
    eps = protocol_epsilon(spec, noise)
    gap = user_privacy_gap(spec, "purified-database", noise)
    # the bounds speak about classical entries, so distances dephase the purifiers
    dephase = spec.purifier_names
    chains = [extraction_chain(protocol_family(spec, m, coin, noise), m, dephase) for coin in (0, 1)]

    def avg(get):
        vals = [get(c) for c in chains]
        if isinstance(vals[0], tuple):
            return tuple(0.5 * (a + b) for a, b in zip(*vals))
        return 0.5 * (vals[0] + vals[1])

    r = math.sqrt(eps)
    step = 3 * r + eps
    return GenericAttackReport(
        m=m,
        noise=noise,
        mode=spec.mode,
        epsilon=eps,
        step_failures=avg(lambda c: c.step_failures),
        step_bounds=tuple(step_failure_bound(l, eps) for l in range(1, m + 1)),
        overall_success=avg(lambda c: c.overall_success),
        success_bound=extraction_success_bound(m, eps),
        chain_damage=avg(lambda c: c.chain_damage),
        damage_bounds=tuple((l - 1) * step for l in range(2, m + 1)),
        uhlmann_distances=avg(lambda c: c.uhlmann_distances),
        uhlmann_bound=gentle_bounds(eps)[2],
        pair_success={k: 0.5 * (chains[0].pair_success[k] + chains[1].pair_success[k]) for k in chains[0].pair_success},
        user_privacy_gap=gap,
        effective_epsilon=max(eps, gap / 2),
        alice_accept_probability=1.0,
        per_coin=tuple(chains),
    )


@dataclass(frozen=True)
class PrivacyVerdict:
    violated: bool
    pair_success: float
    threshold: float
    margin: float
    k: int


def data_privacy_violation(report, spec, i, j, epsilon=None):
    """Compare the attack's joint guess of entries (i, j) with 1/k + epsilon."""
    key = (min(i, j), max(i, j))
    if i == j or key not in report.pair_success:
        raise KeyError(f"report does not cover entries {i} and {j}")
    eps = report.epsilon if epsilon is None else epsilon
    k = min(spec.multiplicities[i - 1], spec.multiplicities[j - 1])
    threshold = 1.0 / k + eps
    success = report.pair_success[key]
    return PrivacyVerdict(success > threshold + ATOL, success, threshold, success - threshold, k)
