import itertools

import numpy as np
import pytest

from qpq import _kernels


def brute_force_qram(answer_dim, data_dims, table):
    dims = [len(data_dims), answer_dim] + list(data_dims)
    perm = []
    for idx in itertools.product(*[range(d) for d in dims]):
        q, a, *t = idx
        new = list(idx)
        new[1] = (a + table[q][t[q]]) % answer_dim
        perm.append(int(np.ravel_multi_index(new, dims)))
    return np.array(perm)


@pytest.mark.parametrize("data_dims", [[1, 2], [1, 2, 3], [1, 3, 1, 2]])
@pytest.mark.parametrize("answer_dim", [3, 4])
def test_qram_permutation_backends_match_brute_force(data_dims, answer_dim, rng):
    table = np.zeros((len(data_dims), max(data_dims)), dtype=np.int64)
    for q, d in enumerate(data_dims):
        table[q, :d] = rng.integers(0, answer_dim, size=d)
    oracle = brute_force_qram(answer_dim, data_dims, table)
    assert np.array_equal(_kernels.qram_permutation_numpy(answer_dim, data_dims, table), oracle)
    assert np.array_equal(_kernels.qram_permutation(answer_dim, np.array(data_dims), table), oracle)


def test_scatter_rows_backends_agree(rng):
    block = rng.normal(size=(12, 5)) + 1j * rng.normal(size=(12, 5))
    perm = rng.permutation(12)
    a = _kernels.scatter_rows_numpy(block, perm)
    assert np.array_equal(a, _kernels.scatter_rows(block, perm))
    if _kernels.USE_NUMBA:
        assert np.array_equal(a, _kernels.scatter_rows_jit(block, perm))
    assert np.array_equal(a[perm], block)


def test_env_flag_disables_numba(monkeypatch):
    import importlib

    monkeypatch.setenv("QPQ_DISABLE_NUMBA", "1")
    mod = importlib.reload(_kernels)
    try:
        assert not mod.USE_NUMBA
        assert mod.qram_permutation is mod.qram_permutation_numpy
        assert mod.scatter_rows_jit is None
    finally:
        monkeypatch.delenv("QPQ_DISABLE_NUMBA")
        importlib.reload(_kernels)
