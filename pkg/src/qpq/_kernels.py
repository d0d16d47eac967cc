"""Index kernels for controlled permutations over register tensors.

The numba QRAM kernel is used when numba imports cleanly. Setting the
environment variable ``QPQ_DISABLE_NUMBA=1`` forces the pure numpy path, which
is also what the benchmark compares against. Row scattering always uses numpy;
the jitted variant is kept only for the benchmark.
"""
import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

USE_NUMBA = njit is not None and os.environ.get("QPQ_DISABLE_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
)


def _row_major_strides(dims):
    strides = np.ones(len(dims), dtype=np.int64)
    for k in range(len(dims) - 2, -1, -1):
        strides[k] = strides[k + 1] * dims[k + 1]
    return strides


def qram_permutation_numpy(answer_dim, data_dims, value_table):
    """Destination index of every basis state under |q>|a>|t> -> |q>|a + v_q(t_q)>|t>.

    ``value_table[q, t]`` is the value read from data register ``q`` when it
    holds basis index ``t``; addition on the answer register is modulo
    ``answer_dim``.
    """
    data_dims = np.asarray(data_dims, dtype=np.int64)
    query_dim = len(data_dims)
    dims = np.concatenate(([query_dim, answer_dim], data_dims))
    strides = _row_major_strides(dims)
    total = int(np.prod(dims))
    idx = np.arange(total, dtype=np.int64)
    q = idx // strides[0]
    a = (idx // strides[1]) % answer_dim
    t = (idx // strides[2:][q]) % data_dims[q]
    new_a = (a + value_table[q, t]) % answer_dim
    return idx + (new_a - a) * strides[1]


def scatter_rows_numpy(block, perm):
    out = np.empty_like(block)
    out[perm] = block
    return out


if USE_NUMBA:

    @njit(cache=True)
    def _qram_permutation_jit(answer_dim, data_dims, value_table, strides):
        query_dim = data_dims.shape[0]
        total = query_dim * strides[0]
        perm = np.empty(total, dtype=np.int64)
        for idx in range(total):
            q = idx // strides[0]
            a = (idx // strides[1]) % answer_dim
            t = (idx // strides[2 + q]) % data_dims[q]
            new_a = (a + value_table[q, t]) % answer_dim
            perm[idx] = idx + (new_a - a) * strides[1]
        return perm

    @njit(cache=True)
    def _scatter_rows_jit(block, perm):
        out = np.empty_like(block)
        for k in range(perm.shape[0]):
            out[perm[k], :] = block[k, :]
        return out

    def qram_permutation(answer_dim, data_dims, value_table):
        data_dims = np.asarray(data_dims, dtype=np.int64)
        dims = np.concatenate((np.array([len(data_dims), answer_dim], dtype=np.int64), data_dims))
        strides = _row_major_strides(dims)
        return _qram_permutation_jit(
            np.int64(answer_dim), data_dims, np.ascontiguousarray(value_table, dtype=np.int64), strides
        )

    def scatter_rows_jit(block, perm):
        return _scatter_rows_jit(np.ascontiguousarray(block), np.asarray(perm, dtype=np.int64))

else:
    qram_permutation = qram_permutation_numpy
    scatter_rows_jit = None

# numpy's fancy-index scatter beats the jitted row loop (see the benchmark)
scatter_rows = scatter_rows_numpy
