import itertools

import numpy as np
import pytest

from qpq.attacks import (
    ReferenceFamily,
    Track,
    data_privacy_violation,
    dephased_distance,
    extraction_chain,
    extraction_step,
    protocol_family,
    purified_database_attack,
    sequential_extraction_attack,
)
from qpq.hilbert import DensityOperator, PureState, make_layout, reduced_density
from qpq.metrics import trace_distance
from qpq.protocol import DatabaseSpec, SpecError


def copying_family(n=2, d=2):
    """References where the user ends up with copies of every entry.

    The owner's view is then the same for every query, so the extraction
    premises hold with epsilon = 0.
    """
    values = tuple(range(1, d + 1))
    regs = [(f"X{k}", d) for k in range(1, n + 1)] + [("ans", d + 1)] + [(f"C{k}", d + 1) for k in range(1, n + 1)]
    layout = make_layout(regs)
    refs = {}
    for j in range(1, n + 1):
        amps = np.zeros(layout.dims, dtype=np.complex128)
        for xs in itertools.product(range(d), repeat=n):
            vals = [values[t] for t in xs]
            amps[(*xs, vals[j - 1], *vals)] = 1.0
        refs[j] = PureState(layout, amps.reshape(-1) / np.sqrt(d**n))
    bob = ("ans",) + tuple(f"C{k}" for k in range(1, n + 1))
    entries = {k: (f"X{k}", values) for k in range(1, n + 1)}
    return ReferenceFamily(refs, bob, "ans", entries)


@pytest.mark.parametrize("repetitions", [1, 2])
def test_specific_attack_three_entries(repetitions):
    rep = purified_database_attack(DatabaseSpec.from_multiplicities([2, 2, 2]), 1, 2, repetitions)
    assert rep.measured_distance == pytest.approx(0.5, abs=1e-9)
    assert rep.helstrom_success == pytest.approx(0.75, abs=1e-9)
    assert rep.accept_per_repetition == pytest.approx((1.0,) * repetitions, abs=1e-9)
    assert rep.honest_accept_probability == pytest.approx(1.0, abs=1e-9)
    assert rep.consistency_probability == pytest.approx(1.0)
    assert rep.violations() == []


def test_specific_attack_grows_with_answer_count():
    rep = purified_database_attack(DatabaseSpec.from_multiplicities([3, 2]), 1, 2)
    assert rep.bound == pytest.approx(2 / 3)
    assert rep.measured_distance >= rep.bound - 1e-9


def test_specific_attack_input_checks():
    spec = DatabaseSpec.from_multiplicities([2, 2])
    with pytest.raises(SpecError):
        purified_database_attack(spec, 1, 1)
    with pytest.raises(SpecError):
        purified_database_attack(spec, 1, 2, repetitions=0)


@pytest.mark.parametrize("n", [2, 3])
def test_chain_extracts_everything_when_owner_view_is_query_independent(n):
    fam = copying_family(n)
    alice = tuple(f"X{k}" for k in range(1, n + 1))
    rhos = [reduced_density(fam.references[j], alice) for j in range(1, n + 1)]
    assert all(trace_distance(rhos[0], r) < 1e-12 for r in rhos)
    res = extraction_chain(fam, n, dephase=alice)
    assert res.overall_success == pytest.approx(1.0, abs=1e-9)
    assert res.step_failures == pytest.approx((0.0,) * n, abs=1e-9)
    assert res.uhlmann_distances == pytest.approx((0.0,) * (n - 1), abs=1e-7)
    assert res.chain_damage == pytest.approx((0.0,) * (n - 1), abs=1e-7)
    assert all(v == pytest.approx(1.0) for v in res.pair_success.values())


def test_coherent_data_makes_measurement_look_damaging():
    # without dephasing the owner's entries, reading an answer kills coherence
    # across entry values even though nothing is lost in the classical picture
    res = extraction_chain(copying_family(2), 2)
    assert res.chain_damage[0] == pytest.approx(0.5, abs=1e-9)
    assert res.overall_success == pytest.approx(1.0, abs=1e-9)


def test_extraction_step_records_values():
    fam = copying_family(2)
    step = extraction_step([Track(1.0, (), fam.references[1])], 1, 2, fam)
    assert step.probability_correct == pytest.approx(1.0)
    assert step.outcome_distribution == pytest.approx({1: 0.5, 2: 0.5})
    assert all(len(t.values) == 1 for t in step.tracks)
    with pytest.raises(KeyError):
        extraction_step([Track(1.0, (), fam.references[1])], 1, 5, fam)


def test_dephased_distance_matches_explicit_dephasing():
    rng = np.random.default_rng(5)
    layout = make_layout([("A", 2), ("B", 3)])

    def rand():
        v = rng.normal(size=6) + 1j * rng.normal(size=6)
        return PureState(layout, v / np.linalg.norm(v))

    ens0 = [(0.3, rand()), (0.7, rand())]
    ens1 = [(1.0, rand())]

    def dephase(ens):
        rho = sum(w * s.density().matrix for w, s in ens).reshape(2, 3, 2, 3)
        out = np.zeros_like(rho)
        for a in range(2):
            out[a, :, a, :] = rho[a, :, a, :]
        return DensityOperator(layout, out.reshape(6, 6))

    assert dephased_distance(ens0, ens1, ("A",)) == pytest.approx(trace_distance(dephase(ens0), dephase(ens1)), abs=1e-10)
    plain = trace_distance(
        DensityOperator(layout, sum(w * s.density().matrix for w, s in ens0)),
        DensityOperator(layout, sum(w * s.density().matrix for w, s in ens1)),
    )
    assert dephased_distance(ens0, ens1) == pytest.approx(plain, abs=1e-10)


def test_protocol_references_leave_unqueried_entries_untouched():
    # no-signalling: the user's side after query 1 carries nothing about X2
    spec = DatabaseSpec.from_multiplicities([2, 2])
    fam = protocol_family(spec, 2, coin=0)
    rho = reduced_density(fam.references[1], fam.bob_side + ("X2",))
    bob = reduced_density(fam.references[1], fam.bob_side).matrix
    x2 = reduced_density(fam.references[1], ("X2",)).matrix
    assert np.allclose(rho.matrix, np.kron(bob, x2), atol=1e-12)


@pytest.mark.parametrize("mode", ["purified", "uniform"])
def test_generic_attack_on_protocol(mode):
    spec = DatabaseSpec.from_multiplicities([2, 2, 2], mode=mode)
    rep = sequential_extraction_attack(spec, 3)
    assert rep.epsilon == pytest.approx(0.0, abs=1e-9)
    assert rep.step_failures[0] == pytest.approx(0.0, abs=1e-9)
    # later entries sit in a product with everything the user holds
    assert rep.step_failures[1:] == pytest.approx((0.5, 0.5), abs=1e-9)
    assert rep.overall_success == pytest.approx(0.25, abs=1e-9)
    assert rep.user_privacy_gap == pytest.approx(0.5, abs=1e-9)
    assert not rep.premise_holds
    assert rep.effective_epsilon == pytest.approx(0.25, abs=1e-9)


def test_generic_attack_input_checks():
    with pytest.raises(SpecError):
        sequential_extraction_attack(DatabaseSpec.from_multiplicities([2, 2]), 3)
    with pytest.raises(SpecError):
        sequential_extraction_attack(DatabaseSpec.from_multiplicities([2, 2], mode="classical", entries=[1, 1]), 2)


def test_data_privacy_verdict():
    spec = DatabaseSpec.from_multiplicities([2, 2])
    rep = sequential_extraction_attack(spec, 2)
    v = data_privacy_violation(rep, spec, 1, 2)
    assert v.threshold == pytest.approx(0.5)
    assert v.pair_success == pytest.approx(0.5, abs=1e-9)
    assert not v.violated
    with pytest.raises(KeyError):
        data_privacy_violation(rep, spec, 1, 1)
