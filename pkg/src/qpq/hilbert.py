"""Named-register state vectors, partial traces and exact measurement branching.

Everything is dense complex128. A global state is always a pure vector; mixed
states only appear as reduced density operators of small sub-layouts, or as
explicit lists of weighted pure branches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels

ATOL = 1e-9
PRUNE_TOL = 1e-12
MAX_DIM = 10**6


class LayoutError(ValueError):
    pass


class StateError(ValueError):
    pass


class MeasurementError(ValueError):
    pass


class DimensionError(ValueError):
    """Raised when a Hilbert space would exceed ``MAX_DIM``."""


def _frozen(arr):
    arr = np.array(arr, dtype=np.complex128)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers; flat indices are row-major over this order."""

    registers: tuple

    def __post_init__(self):
        if not self.registers:
            raise LayoutError("layout needs at least one register")
        names = [name for name, _ in self.registers]
        seen = set()
        for name in names:
            if name in seen:
                raise LayoutError(f"duplicate register name {name!r}")
            seen.add(name)
        for name, dim in self.registers:
            if int(dim) != dim or dim < 1:
                raise LayoutError(f"register {name!r} has invalid dimension {dim!r}")

    @property
    def names(self):
        return tuple(name for name, _ in self.registers)

    @property
    def dims(self):
        return tuple(int(dim) for _, dim in self.registers)

    @property
    def total_dim(self):
        return math.prod(self.dims)

    def position(self, name):
        for k, (reg, _) in enumerate(self.registers):
            if reg == name:
                return k
        raise LayoutError(f"unknown register {name!r}")

    def dim(self, name):
        return self.dims[self.position(name)]

    def ordered(self, names):
        """Names sorted into layout order, validating each."""
        names = list(names)
        if len(set(names)) != len(names):
            raise LayoutError(f"repeated register in {names!r}")
        return tuple(sorted(names, key=self.position))

    def sub(self, names):
        return RegisterLayout(tuple((n, self.dim(n)) for n in self.ordered(names)))

    def without(self, names):
        drop = set(self.ordered(names))
        return RegisterLayout(tuple(r for r in self.registers if r[0] not in drop))

    def concat(self, other):
        return RegisterLayout(self.registers + other.registers)

    def flat_index(self, assignment):
        missing = set(self.names) - set(assignment)
        if missing:
            raise LayoutError(f"assignment misses registers {sorted(missing)}")
        extra = set(assignment) - set(self.names)
        if extra:
            raise LayoutError(f"assignment names unknown registers {sorted(extra)}")
        flat = 0
        for name, dim in self.registers:
            value = int(assignment[name])
            if not 0 <= value < dim:
                raise LayoutError(f"index {value} out of range for register {name!r} of dim {dim}")
            flat = flat * dim + value
        return flat

    def multi_index(self, flat):
        if not 0 <= flat < self.total_dim:
            raise LayoutError(f"flat index {flat} out of range")
        values = np.unravel_index(int(flat), self.dims)
        return {name: int(v) for name, v in zip(self.names, values)}


def make_layout(registers):
    """Build a layout from ``[(name, dim), ...]``."""
    registers = tuple((str(name), dim) for name, dim in registers)
    layout = RegisterLayout(registers)
    if layout.total_dim > MAX_DIM:
        raise DimensionError(f"total dimension {layout.total_dim} exceeds {MAX_DIM}")
    return layout


@dataclass(frozen=True, eq=False)
class PureState:
    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape[0] != self.layout.total_dim:
            raise StateError(f"expected {self.layout.total_dim} amplitudes, got {amps.shape[0]}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > ATOL:
            raise StateError(f"state is not normalized (norm {norm:.3e})")
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self):
        return self.amplitudes.reshape(self.layout.dims)

    def overlap(self, other):
        """<self|other>."""
        if self.layout != other.layout:
            raise LayoutError("states live on different layouts")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def kron(self, other):
        return PureState(self.layout.concat(other.layout), np.kron(self.amplitudes, other.amplitudes))

    def density(self):
        return DensityOperator(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    layout: RegisterLayout
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        d = self.layout.total_dim
        if mat.shape != (d, d):
            raise StateError(f"expected a {d}x{d} matrix, got {mat.shape}")
        if not np.allclose(mat, mat.conj().T, atol=ATOL, rtol=0):
            raise StateError("density operator is not Hermitian")
        if abs(np.trace(mat).real - 1.0) > ATOL:
            raise StateError(f"density operator has trace {np.trace(mat).real:.12g}")
        if np.linalg.eigvalsh(mat).min() < -ATOL:
            raise StateError("density operator has a negative eigenvalue")
        object.__setattr__(self, "matrix", mat)

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True, eq=False)
class Measurement:
    """Kraus operators ``M_x`` on ``target`` (registers, in layout order of use)."""

    target: tuple
    elements: tuple
    complete: bool = True

    def __post_init__(self):
        target = tuple(self.target)
        elements = tuple((label, _frozen(op)) for label, op in self.elements)
        if not elements:
            raise MeasurementError("measurement has no elements")
        shape = elements[0][1].shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise MeasurementError("Kraus operators must be square")
        for _, op in elements:
            if op.shape != shape:
                raise MeasurementError("Kraus operators differ in shape")
        if self.complete:
            total = sum(op.conj().T @ op for _, op in elements)
            if not np.allclose(total, np.eye(shape[0]), atol=ATOL, rtol=0):
                raise MeasurementError("sum of M^dagger M is not the identity")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "elements", elements)

    @property
    def labels(self):
        return tuple(label for label, _ in self.elements)

    def povm(self, label):
        for lab, op in self.elements:
            if lab == label:
                return op.conj().T @ op
        raise MeasurementError(f"no element labelled {label!r}")

    def kraus(self, label):
        for lab, op in self.elements:
            if lab == label:
                return op
        raise MeasurementError(f"no element labelled {label!r}")


class UnitaryOp:
    """Unitary on ``target`` registers.

    Permutation unitaries may be given by ``perm`` (destination index of each
    basis state); the dense matrix is then only built on request.
    """

    def __init__(self, target, matrix=None, perm=None, check=True):
        self.target = tuple(target)
        if (matrix is None) == (perm is None):
            raise ValueError("give exactly one of matrix or perm")
        self._perm = None
        self._matrix = None
        if perm is not None:
            perm = np.asarray(perm, dtype=np.int64)
            if check and not np.array_equal(np.sort(perm), np.arange(perm.shape[0])):
                raise StateError("perm is not a permutation")
            perm.flags.writeable = False
            self._perm = perm
            self.dim = perm.shape[0]
        else:
            mat = _frozen(matrix)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise StateError("unitary must be square")
            if check and not np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), atol=ATOL, rtol=0):
                raise StateError("matrix is not unitary")
            self._matrix = mat
            self.dim = mat.shape[0]

    @property
    def perm(self):
        return self._perm

    @property
    def matrix(self):
        if self._matrix is None:
            mat = np.zeros((self.dim, self.dim), dtype=np.complex128)
            mat[self._perm, np.arange(self.dim)] = 1.0
            mat.flags.writeable = False
            self._matrix = mat
        return self._matrix

    def on(self, names):
        """Same operator acting on differently named registers."""
        names = tuple(names)
        if len(names) != len(self.target):
            raise LayoutError("retargeting must keep the register count")
        if self._perm is not None:
            return UnitaryOp(names, perm=self._perm, check=False)
        return UnitaryOp(names, matrix=self._matrix, check=False)

    def dagger(self):
        if self._perm is not None:
            inv = np.empty_like(self._perm)
            inv[self._perm] = np.arange(self.dim)
            return UnitaryOp(self.target, perm=inv, check=False)
        return UnitaryOp(self.target, matrix=self._matrix.conj().T, check=False)


class Branch(NamedTuple):
    label: object
    probability: float
    state: PureState


# --- tensor plumbing -------------------------------------------------------


def _split(amplitudes, layout, target):
    """Reshape into a (target, rest) matrix with target axes in the given order."""
    pos = [layout.position(t) for t in target]
    if len(set(pos)) != len(pos):
        raise LayoutError(f"repeated register in {target!r}")
    rest = [k for k in range(len(layout.dims)) if k not in pos]
    axes = pos + rest
    t = np.asarray(amplitudes).reshape(layout.dims).transpose(axes)
    d_target = math.prod(layout.dims[k] for k in pos)
    return t.reshape(d_target, -1), axes


def _merge(block, layout, axes):
    shape = [layout.dims[k] for k in axes]
    inverse = np.argsort(axes)
    return block.reshape(shape).transpose(inverse).reshape(-1)


def apply_local(amplitudes, layout, target, matrix):
    """Apply ``matrix`` to ``target`` registers of an unnormalized vector."""
    block, axes = _split(amplitudes, layout, target)
    if matrix.shape[1] != block.shape[0]:
        raise LayoutError(f"operator of dim {matrix.shape[1]} does not match target dim {block.shape[0]}")
    return _merge(matrix @ block, layout, axes)


def _apply_perm(amplitudes, layout, target, perm):
    block, axes = _split(amplitudes, layout, target)
    if perm.shape[0] != block.shape[0]:
        raise LayoutError(f"operator of dim {perm.shape[0]} does not match target dim {block.shape[0]}")
    return _merge(_kernels.scatter_rows(block, perm), layout, axes)


def lift(matrix, layout, target):
    """Embed an operator on ``target`` into the full layout (small layouts only)."""
    d = layout.total_dim
    eye = np.eye(d, dtype=np.complex128)
    cols = [apply_local(eye[:, k], layout, target, np.asarray(matrix)) for k in range(d)]
    return np.stack(cols, axis=1)


# --- state construction ----------------------------------------------------


def basis_state(layout, assignment):
    amps = np.zeros(layout.total_dim, dtype=np.complex128)
    amps[layout.flat_index(assignment)] = 1.0
    return PureState(layout, amps)


def product_state(layout, factors):
    """Product of per-register vectors ``{name: vector}``; missing registers sit at |0>."""
    amps = np.ones(1, dtype=np.complex128)
    for name, dim in layout.registers:
        vec = np.zeros(dim, dtype=np.complex128)
        if name in factors:
            vec = np.asarray(factors[name], dtype=np.complex128)
            if vec.shape != (dim,):
                raise LayoutError(f"factor for {name!r} has shape {vec.shape}, expected ({dim},)")
        else:
            vec[0] = 1.0
        amps = np.kron(amps, vec)
    return PureState(layout, amps)


def purified_uniform_pair(d, names=("X", "X'")):
    """sum_x |x>|x> / sqrt(d) on two registers of dimension ``d``."""
    if d < 1:
        raise LayoutError("purification dimension must be positive")
    layout = make_layout([(names[0], d), (names[1], d)])
    return PureState(layout, np.eye(d, dtype=np.complex128).reshape(-1) / np.sqrt(d))


def uniform_superposition(layout, reg, subset):
    subset = sorted(set(int(s) for s in subset))
    if not subset:
        raise StateError("subset must be non-empty")
    dim = layout.dim(reg)
    if subset[0] < 0 or subset[-1] >= dim:
        raise LayoutError(f"subset {subset} outside register {reg!r} of dim {dim}")
    vec = np.zeros(dim, dtype=np.complex128)
    vec[subset] = 1.0 / np.sqrt(len(subset))
    return product_state(layout, {reg: vec})


# --- dynamics --------------------------------------------------------------


def apply_unitary(state, op):
    if op.dim != math.prod(state.layout.dim(t) for t in op.target):
        raise LayoutError("unitary dimension does not match its target registers")
    if op.perm is not None:
        amps = _apply_perm(state.amplitudes, state.layout, op.target, op.perm)
    else:
        amps = apply_local(state.amplitudes, state.layout, op.target, op.matrix)
    norm = np.linalg.norm(amps)
    return PureState(state.layout, amps / norm)


def reduced_density(state, keep):
    """Partial trace onto ``keep`` via the (keep, discard) reshape M -> M M^dagger."""
    keep = state.layout.ordered(keep)
    if not keep:
        raise LayoutError("keep at least one register")
    block, _ = _split(state.amplitudes, state.layout, keep)
    rho = block @ block.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityOperator(state.layout.sub(keep), rho)


def _branches(state, target, labelled_ops):
    out = []
    for label, op in labelled_ops:
        vec = apply_local(state.amplitudes, state.layout, target, op)
        prob = float(np.vdot(vec, vec).real)
        if prob < PRUNE_TOL:
            continue
        out.append(Branch(label, prob, PureState(state.layout, vec / np.sqrt(prob))))
    total = sum(b.probability for b in out)
    if abs(total - 1.0) > ATOL:
        raise MeasurementError(f"branch probabilities sum to {total:.12g}")
    return out


def measure_branches(state, m):
    """All outcomes of ``m`` with probability >= 1e-12 and their normalized post states."""
    if not m.complete:
        raise MeasurementError("measurement must be complete")
    return _branches(state, m.target, m.elements)


def check_trace_preserving(kraus):
    dim = kraus[0].shape[1]
    total = sum(k.conj().T @ k for k in kraus)
    if not np.allclose(total, np.eye(dim), atol=ATOL, rtol=0):
        raise MeasurementError("Kraus set is not trace preserving")


def kraus_branches(state, kraus, target):
    """Unravel a channel into pure branches labelled by Kraus index."""
    kraus = [np.asarray(k, dtype=np.complex128) for k in kraus]
    check_trace_preserving(kraus)
    return _branches(state, tuple(target), list(enumerate(kraus)))


def weyl_operator(d, shift, phase):
    """X^shift Z^phase on a d-level register."""
    omega = np.exp(2j * np.pi / d)
    x = np.roll(np.eye(d, dtype=np.complex128), shift, axis=0)
    z = np.diag(omega ** np.arange(d))
    return x @ np.linalg.matrix_power(z, phase)


def depolarizing_kraus(d, p):
    """Kraus set for rho -> (1-p) rho + p I/d, indexed by shift*d + phase."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing parameter must lie in [0, 1]")
    ops = []
    for shift in range(d):
        for phase in range(d):
            weight = p / d**2
            if shift == 0 and phase == 0:
                weight += 1.0 - p
            ops.append(np.sqrt(weight) * weyl_operator(d, shift, phase))
    return ops


def computational_measurement(layout, target):
    """Projective measurement in the computational basis; labels are value tuples."""
    target = tuple(target)
    dims = [layout.dim(t) for t in target]
    d = math.prod(dims)
    elements = []
    for k in range(d):
        proj = np.zeros((d, d), dtype=np.complex128)
        proj[k, k] = 1.0
        elements.append((tuple(int(v) for v in np.unravel_index(k, dims)), proj))
    return Measurement(target, tuple(elements))


def projector_measurement(target, vector, labels=("pass", "fail")):
    """Two-outcome check {|v><v|, 1 - |v><v|}."""
    vector = np.asarray(vector, dtype=np.complex128)
    vector = vector / np.linalg.norm(vector)
    proj = np.outer(vector, vector.conj())
    return Measurement(tuple(target), ((labels[0], proj), (labels[1], np.eye(len(vector)) - proj)))


def factor_out(state, registers, vector):
    """Contract ``registers`` with a known vector, returning the remaining factor.

    Raises ``StateError`` if the registers are not in a product state with the rest.
    """
    registers = tuple(registers)
    block, _ = _split(state.amplitudes, state.layout, registers)
    vector = np.asarray(vector, dtype=np.complex128)
    rest = vector.conj() @ block
    if abs(np.linalg.norm(rest) - 1.0) > ATOL:
        raise StateError("registers are not in the given product state")
    layout = state.layout.without(registers)
    return PureState(layout, rest)


def purify_branches(branches, env_name, env_dim, index=lambda label: label):
    """sum_k sqrt(p_k) |psi_k>|k>_env with the environment appended last."""
    layout = branches[0].state.layout
    amps = np.zeros((layout.total_dim, env_dim), dtype=np.complex128)
    for b in branches:
        if b.state.layout != layout:
            raise LayoutError("branches live on different layouts")
        k = index(b.label)
        amps[:, k] += np.sqrt(b.probability) * b.state.amplitudes
    return PureState(layout.concat(make_layout([(env_name, env_dim)])), amps.reshape(-1))


def project_values(state, assignment):
    """Squared norm of the component with ``{register: basis index}`` fixed."""
    t = state.tensor()
    index = tuple(assignment.get(name, slice(None)) for name in state.layout.names)
    part = t[index]
    return float(np.vdot(part, part).real)
