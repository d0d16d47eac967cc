import numpy as np
import pytest
from hypothesis import given, strategies as st

from qpq.hilbert import (
    MAX_DIM,
    DensityOperator,
    DimensionError,
    LayoutError,
    Measurement,
    MeasurementError,
    PureState,
    StateError,
    UnitaryOp,
    apply_unitary,
    basis_state,
    computational_measurement,
    depolarizing_kraus,
    factor_out,
    kraus_branches,
    lift,
    make_layout,
    measure_branches,
    product_state,
    project_values,
    purified_uniform_pair,
    purify_branches,
    reduced_density,
    uniform_superposition,
    weyl_operator,
)
from qpq.hilbert import Branch


def random_state(rng, layout):
    v = rng.normal(size=layout.total_dim) + 1j * rng.normal(size=layout.total_dim)
    return PureState(layout, v / np.linalg.norm(v))


def einsum_partial_trace(vec, dims, keep):
    """Oracle: rho_keep via an explicit einsum over the discarded axes."""
    n = len(dims)
    t = vec.reshape(dims)
    letters = "abcdefghij"
    ket = [letters[k] for k in range(n)]
    bra = [letters[k] if k not in keep else letters[k].upper() for k in range(n)]
    out = "".join(letters[k] for k in keep) + "".join(letters[k].upper() for k in keep)
    rho = np.einsum(f"{''.join(ket)},{''.join(bra)}->{out}", t, t.conj())
    d = int(np.prod([dims[k] for k in keep]))
    return rho.reshape(d, d)


def test_layout_indexing_roundtrip():
    layout = make_layout([("A", 2), ("B", 3), ("C", 4)])
    assert layout.total_dim == 24
    for flat in range(24):
        assert layout.flat_index(layout.multi_index(flat)) == flat
    assert layout.flat_index({"A": 1, "B": 0, "C": 2}) == 1 * 12 + 2


@pytest.mark.parametrize(
    "registers",
    [[], [("A", 2), ("A", 3)], [("A", 0)], [("A", 2.5)]],
)
def test_layout_rejects_bad_registers(registers):
    with pytest.raises(LayoutError):
        make_layout(registers)


def test_dimension_guard():
    with pytest.raises(DimensionError):
        make_layout([("A", 1000), ("B", MAX_DIM // 1000 + 1)])


def test_state_validation():
    layout = make_layout([("A", 2)])
    with pytest.raises(StateError):
        PureState(layout, [1.0, 1.0])
    with pytest.raises(StateError):
        PureState(layout, [1.0, 0.0, 0.0])
    with pytest.raises(StateError):
        DensityOperator(layout, np.diag([1.5, -0.5]))
    with pytest.raises(StateError):
        DensityOperator(layout, np.array([[0.5, 0.5], [0.0, 0.5]]))


def test_states_are_immutable():
    s = basis_state(make_layout([("A", 2)]), {"A": 0})
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0.0


def test_reduced_density_matches_einsum_oracle(rng):
    dims = (2, 3, 2, 3)
    layout = make_layout([(f"R{k}", d) for k, d in enumerate(dims)])
    for _ in range(1000):
        psi = random_state(rng, layout)
        k = int(rng.integers(1, 4))
        keep = sorted(rng.choice(4, size=k, replace=False).tolist())
        rho = reduced_density(psi, [f"R{j}" for j in keep])
        oracle = einsum_partial_trace(psi.amplitudes, dims, keep)
        assert np.allclose(rho.matrix, oracle, atol=1e-12)


def test_reduced_density_of_product_is_factor():
    layout = make_layout([("A", 2), ("B", 3)])
    plus = np.array([1, 1]) / np.sqrt(2)
    psi = product_state(layout, {"A": plus})
    assert np.allclose(reduced_density(psi, ["A"]).matrix, np.outer(plus, plus))
    assert reduced_density(psi, ["A"]).purity() == pytest.approx(1.0)


def test_purified_pair_marginal_is_maximally_mixed():
    for d in (1, 2, 5):
        psi = purified_uniform_pair(d)
        assert np.allclose(reduced_density(psi, ["X"]).matrix, np.eye(d) / d)


def test_apply_unitary_matches_lifted_matrix(rng):
    layout = make_layout([("A", 2), ("B", 3), ("C", 2)])
    psi = random_state(rng, layout)
    q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    op = UnitaryOp(("C", "B"), matrix=q)
    out = apply_unitary(psi, op)
    assert np.allclose(out.amplitudes, lift(q, layout, ("C", "B")) @ psi.amplitudes)


def test_permutation_unitary_matches_dense(rng):
    layout = make_layout([("A", 3), ("B", 2)])
    perm = rng.permutation(6)
    op = UnitaryOp(("B", "A"), perm=perm)
    psi = random_state(rng, layout)
    dense = UnitaryOp(("B", "A"), matrix=op.matrix)
    assert np.allclose(apply_unitary(psi, op).amplitudes, apply_unitary(psi, dense).amplitudes)
    back = apply_unitary(apply_unitary(psi, op), op.dagger())
    assert np.allclose(back.amplitudes, psi.amplitudes)


def test_non_unitary_rejected():
    with pytest.raises(StateError):
        UnitaryOp(("A",), matrix=np.array([[1, 1], [0, 1]]))
    with pytest.raises(StateError):
        UnitaryOp(("A",), perm=[0, 0])


def test_measure_branches_probabilities(rng):
    layout = make_layout([("A", 3), ("B", 2)])
    psi = random_state(rng, layout)
    branches = measure_branches(psi, computational_measurement(layout, ["A"]))
    marg = np.abs(psi.tensor()) ** 2
    for b in branches:
        (a,) = b.label
        assert b.probability == pytest.approx(marg[a].sum())
        assert project_values(b.state, {"A": a}) == pytest.approx(1.0)
    assert sum(b.probability for b in branches) == pytest.approx(1.0)


def test_incomplete_measurement_rejected():
    with pytest.raises(MeasurementError):
        Measurement(("A",), (("x", np.diag([1.0, 0.0])),))


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("p", [0.0, 0.01, 0.5, 1.0])
def test_depolarizing_kraus_channel(d, p, rng):
    kraus = depolarizing_kraus(d, p)
    rho = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = rho @ rho.conj().T
    rho /= np.trace(rho)
    out = sum(k @ rho @ k.conj().T for k in kraus)
    assert np.allclose(out, (1 - p) * rho + p * np.eye(d) / d)


def test_weyl_operators_are_unitary():
    for s in range(3):
        for t in range(3):
            w = weyl_operator(3, s, t)
            assert np.allclose(w.conj().T @ w, np.eye(3))


def test_kraus_branches_reassemble_channel(rng):
    layout = make_layout([("A", 2), ("B", 3)])
    psi = random_state(rng, layout)
    kraus = depolarizing_kraus(3, 0.3)
    branches = kraus_branches(psi, kraus, ["B"])
    rho = sum(b.probability * b.state.density().matrix for b in branches)
    full = sum(lift(k, layout, ["B"]) @ psi.density().matrix @ lift(k, layout, ["B"]).conj().T for k in kraus)
    assert np.allclose(rho, full)


def test_purify_branches_marginal():
    layout = make_layout([("A", 2)])
    b = [Branch(0, 0.25, basis_state(layout, {"A": 0})), Branch(1, 0.75, basis_state(layout, {"A": 1}))]
    pur = purify_branches(b, "E", 2)
    assert np.allclose(reduced_density(pur, ["A"]).matrix, np.diag([0.25, 0.75]))


def test_factor_out():
    layout = make_layout([("A", 2), ("B", 2)])
    plus = np.array([1, 1]) / np.sqrt(2)
    psi = product_state(layout, {"A": plus, "B": [0, 1]})
    rest = factor_out(psi, ["A"], plus)
    assert np.allclose(rest.amplitudes, [0, 1])
    bell = purified_uniform_pair(2, ("A", "B"))
    with pytest.raises(StateError):
        factor_out(bell, ["A"], [1, 0])


def test_uniform_superposition():
    layout = make_layout([("X", 4)])
    s = uniform_superposition(layout, "X", [1, 3])
    assert np.allclose(s.amplitudes, [0, 1, 0, 1] / np.sqrt(2))
    with pytest.raises(LayoutError):
        uniform_superposition(layout, "X", [4])


@given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.data())
def test_marginals_are_valid_density_operators(dims, data):
    layout = make_layout([(f"R{k}", d) for k, d in enumerate(dims)])
    seed = data.draw(st.integers(0, 2**32 - 1))
    psi = random_state(np.random.default_rng(seed), layout)
    keep = data.draw(st.lists(st.sampled_from(layout.names), min_size=1, unique=True))
    rho = reduced_density(psi, keep)
    w = np.linalg.eigvalsh(rho.matrix)
    assert w.min() > -1e-12
    assert np.trace(rho.matrix).real == pytest.approx(1.0)
