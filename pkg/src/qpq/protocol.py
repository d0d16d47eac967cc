"""Exact model of the quantum private queries protocol with a superposed dummy query.

Bob asks for entry ``i`` by sending |i> and (|0> + |i>)/sqrt(2) in an order
fixed by a private coin. Alice answers each with a QRAM call reading the data
registers X_0 (dummy, always ``d = 0``) and X_1..X_n. Bob measures the plain
answer, keeps the value Y and then projects the superposed answer onto
(|0>|d> + |i>|Y>)/sqrt(2).

Data register X_k stores the index of its value inside the valid-answer set
X_k, so its dimension is |X_k|. In purified mode each X_k is entangled with a
partner register X_k' that Alice keeps. Classical randomness (coin, noise
Kraus index, sampled database) is enumerated as an exact branch tree.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import _kernels
from .hilbert import (
    ATOL,
    PRUNE_TOL,
    DensityOperator,
    DimensionError,
    MAX_DIM,
    PureState,
    UnitaryOp,
    apply_unitary,
    computational_measurement,
    depolarizing_kraus,
    factor_out,
    kraus_branches,
    make_layout,
    measure_branches,
    product_state,
    project_values,
    projector_measurement,
    reduced_density,
)
from .metrics import cq_trace_distance

BOB_REGISTERS = ("q1", "a1", "q2", "a2")
MODES = ("classical", "uniform", "purified")


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class DatabaseSpec:
    """Entry count, valid answers per entry and how Alice holds her data.

    ``valid_answers[k-1]`` lists the accepted answers for query ``k``; values
    are positive because 0 is the dummy symbol. ``distributions`` optionally
    gives P_X per entry aligned with ``valid_answers`` (uniform otherwise).
    """

    n: int
    valid_answers: tuple
    mode: str = "purified"
    entries: Optional[tuple] = None
    distributions: Optional[tuple] = None
    dummy: int = 0

    def __post_init__(self):
        valid = tuple(tuple(int(v) for v in xs) for xs in self.valid_answers)
        object.__setattr__(self, "valid_answers", valid)
        if self.n < 1:
            raise SpecError("database needs at least one entry")
        if len(valid) != self.n:
            raise SpecError(f"expected {self.n} valid-answer sets, got {len(valid)}")
        if self.dummy != 0:
            raise SpecError("the dummy symbol is answer index 0")
        for k, xs in enumerate(valid, start=1):
            if not xs:
                raise SpecError(f"valid-answer set for entry {k} is empty")
            if len(set(xs)) != len(xs):
                raise SpecError(f"valid-answer set for entry {k} repeats a value")
            if min(xs) < 1:
                raise SpecError(f"valid-answer set for entry {k} contains the dummy symbol")
        if self.mode not in MODES:
            raise SpecError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "classical":
            if self.entries is None or len(self.entries) != self.n:
                raise SpecError("classical mode needs one fixed entry per database slot")
            entries = tuple(int(x) for x in self.entries)
            for k, (x, xs) in enumerate(zip(entries, valid), start=1):
                if x not in xs:
                    raise SpecError(f"entry {k} = {x} is not a valid answer {xs}")
            object.__setattr__(self, "entries", entries)
        if self.distributions is not None:
            dists = tuple(tuple(float(p) for p in ps) for ps in self.distributions)
            for ps, xs in zip(dists, valid):
                if len(ps) != len(xs) or min(ps) < 0 or abs(sum(ps) - 1.0) > ATOL:
                    raise SpecError("each entry distribution must be a probability vector over its valid answers")
            object.__setattr__(self, "distributions", dists)

    @classmethod
    def from_multiplicities(cls, multiplicities, mode="purified", entries=None):
        """Valid answers {1, ..., |X_k|} for each entry."""
        multiplicities = list(multiplicities)
        if any(int(k) < 1 for k in multiplicities):
            raise SpecError("multiplicities must be positive")
        valid = tuple(tuple(range(1, int(k) + 1)) for k in multiplicities)
        return cls(len(valid), valid, mode=mode, entries=None if entries is None else tuple(entries))

    @property
    def multiplicities(self):
        return tuple(len(xs) for xs in self.valid_answers)

    @property
    def answer_dim(self):
        return 1 + max(max(xs) for xs in self.valid_answers)

    @property
    def query_dim(self):
        return self.n + 1

    @property
    def data_names(self):
        return tuple(f"X{k}" for k in range(self.n + 1))

    @property
    def purifier_names(self):
        return tuple(f"X{k}'" for k in range(1, self.n + 1))

    @property
    def alice_names(self):
        if self.mode == "purified":
            return self.data_names + self.purifier_names
        return self.data_names

    @property
    def data_dims(self):
        return (1,) + self.multiplicities

    def value_table(self):
        width = max(self.data_dims)
        table = np.zeros((self.n + 1, width), dtype=np.int64)
        for k, xs in enumerate(self.valid_answers, start=1):
            table[k, : len(xs)] = xs
        return table

    def index_of(self, k, value):
        """Basis index of ``value`` in data register X_k, or None if invalid."""
        xs = self.valid_answers[k - 1]
        return xs.index(value) if value in xs else None

    def probabilities(self, k):
        if self.distributions is not None:
            return self.distributions[k - 1]
        d = len(self.valid_answers[k - 1])
        return (1.0 / d,) * d

    def check_query(self, i):
        if not 1 <= i <= self.n:
            raise SpecError(f"query must lie in 1..{self.n}, got {i}")


@dataclass(frozen=True)
class SecurityParams:
    epsilon: float
    delta: float

    def __post_init__(self):
        for name in ("epsilon", "delta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def in_covered_regime(self):
        return self.epsilon <= self.delta <= 1.0


# --- QRAM ------------------------------------------------------------------


def qram_unitary(n, answer_dim, data_values=None):
    """Controlled permutation |i>|a>|t> -> |i>|a + x_i(t) mod answer_dim>|t>.

    Targets are named ``("q", "a", "X0", ..., "Xn")``. ``data_values[k]`` maps
    basis indices of X_k to stored values; by default X_0 holds only the dummy
    0 and every other register stores its value directly.
    """
    if n < 1 or answer_dim < 2:
        raise SpecError("need n >= 1 and answer_dim >= 2")
    if data_values is None:
        data_values = [[0]] + [list(range(answer_dim))] * n
    if len(data_values) != n + 1:
        raise SpecError("need value maps for X_0..X_n")
    data_dims = [len(v) for v in data_values]
    total = (n + 1) * answer_dim * int(np.prod(data_dims))
    if total > MAX_DIM:
        raise DimensionError(f"QRAM dimension {total} exceeds {MAX_DIM}")
    table = np.zeros((n + 1, max(data_dims)), dtype=np.int64)
    for k, vals in enumerate(data_values):
        if any(not 0 <= v < answer_dim for v in vals):
            raise SpecError("stored values must fit the answer register")
        table[k, : len(vals)] = vals
    perm = _kernels.qram_permutation(answer_dim, np.array(data_dims, dtype=np.int64), table)
    target = ("q", "a") + tuple(f"X{k}" for k in range(n + 1))
    return UnitaryOp(target, perm=perm, check=False)


def _spec_qram(spec):
    values = [[0]] + [list(xs) for xs in spec.valid_answers]
    return qram_unitary(spec.n, spec.answer_dim, values)


# --- preparation -----------------------------------------------------------


def prepare_queries(i, a, n):
    """Bob's two query states for coin ``a``: (|i>, (|0>+|i>)/sqrt 2) or swapped."""
    if not 1 <= i <= n:
        raise SpecError(f"query must lie in 1..{n}; 0 is the dummy index")
    if a not in (0, 1):
        raise SpecError("coin must be 0 or 1")
    layout = make_layout([("q", n + 1)])
    plain = np.zeros(n + 1, dtype=np.complex128)
    plain[i] = 1.0
    sup = np.zeros(n + 1, dtype=np.complex128)
    sup[0] = sup[i] = 1.0 / np.sqrt(2)
    first, second = (plain, sup) if a == 0 else (sup, plain)
    return PureState(layout, first), PureState(layout, second)


class DatabaseBranch(NamedTuple):
    probability: float
    entries: Optional[tuple]
    state: PureState


def alice_layout(spec):
    regs = [(name, d) for name, d in zip(spec.data_names, spec.data_dims)]
    if spec.mode == "purified":
        regs += [(name, d) for name, d in zip(spec.purifier_names, spec.multiplicities)]
    return make_layout(regs)


def build_database_state(spec):
    """Alice's initial registers as a list of classical branches.

    Classical and purified modes give a single branch; uniform mode gives one
    basis-state branch per database with its exact probability.
    """
    layout = alice_layout(spec)
    if spec.mode == "classical":
        idx = [spec.index_of(k, x) for k, x in enumerate(spec.entries, start=1)]
        amps = np.zeros(layout.dims, dtype=np.complex128)
        amps[(0, *idx)] = 1.0
        return [DatabaseBranch(1.0, spec.entries, PureState(layout, amps))]
    if spec.mode == "uniform":
        out = []
        for combo in itertools.product(*[range(d) for d in spec.multiplicities]):
            prob = float(np.prod([spec.probabilities(k)[t] for k, t in enumerate(combo, start=1)]))
            if prob < PRUNE_TOL:
                continue
            amps = np.zeros(layout.dims, dtype=np.complex128)
            amps[(0, *combo)] = 1.0
            entries = tuple(spec.valid_answers[k][t] for k, t in enumerate(combo))
            out.append(DatabaseBranch(prob, entries, PureState(layout, amps)))
        return out
    # purified: X_0 = |d>, each (X_k, X_k') in sum_x sqrt(P(x)) |x>|x>
    amps = np.ones(1, dtype=np.complex128)
    for k in range(1, spec.n + 1):
        amps = np.multiply.outer(amps, np.diag(np.sqrt(spec.probabilities(k))))
    n = spec.n
    order = [0] + [1 + 2 * k for k in range(n)] + [2 + 2 * k for k in range(n)]
    amps = amps.transpose(order)
    return [DatabaseBranch(1.0, None, PureState(layout, amps.reshape(-1)))]


# --- execution -------------------------------------------------------------


class Delivery(NamedTuple):
    probability: float
    events: tuple
    state: PureState


Tamper = Callable[[int, int], Optional[tuple]]


def deliver(spec, i, coin, alice, noise=0.0, tamper=None, round_index=0):
    """Run both query/answer exchanges for one coin value.

    Returns the branches (Kraus indices of noise and tampering as events) of
    the joint state right after Alice's last message, before Bob verifies.
    ``tamper(round_index, message)`` may return ``(registers, kraus_ops)``
    that Alice applies after her QRAM call on that message.
    """
    spec.check_query(i)
    first, second = prepare_queries(i, coin, spec.n)
    qd, ad = spec.query_dim, spec.answer_dim
    bob_layout = make_layout([("q1", qd), ("a1", ad), ("q2", qd), ("a2", ad)])
    bob = product_state(bob_layout, {"q1": first.amplitudes, "q2": second.amplitudes})
    state = bob.kron(alice)
    if state.layout.total_dim > MAX_DIM:
        raise DimensionError(f"joint dimension {state.layout.total_dim} exceeds {MAX_DIM}")
    qram = _spec_qram(spec)
    noise_ops = depolarizing_kraus(ad, noise) if noise > 0 else None
    current = [Delivery(1.0, (), state)]
    for msg in (1, 2):
        q, a = f"q{msg}", f"a{msg}"
        op = qram.on((q, a) + spec.data_names)
        current = [Delivery(d.probability, d.events, apply_unitary(d.state, op)) for d in current]
        hook = tamper(round_index, msg) if tamper is not None else None
        if hook is not None:
            regs, kraus = hook
            current = [
                Delivery(d.probability * b.probability, d.events + (("tamper", msg, b.label),), b.state)
                for d in current
                for b in kraus_branches(d.state, kraus, regs)
            ]
        if noise_ops is not None:
            current = [
                Delivery(d.probability * b.probability, d.events + (("noise", msg, b.label),), b.state)
                for d in current
                for b in kraus_branches(d.state, noise_ops, (a,))
            ]
    return current


def plain_and_superposed(coin):
    return (("q1", "a1"), ("q2", "a2")) if coin == 0 else (("q2", "a2"), ("q1", "a1"))


def check_vector(spec, i, y):
    """(|0>|d> + |i>|y>)/sqrt(2) on a query/answer pair."""
    vec = np.zeros(spec.query_dim * spec.answer_dim, dtype=np.complex128)
    vec[0 * spec.answer_dim + spec.dummy] = 1.0 / np.sqrt(2)
    vec[i * spec.answer_dim + y] = 1.0 / np.sqrt(2)
    return vec


class Verified(NamedTuple):
    probability: float
    output: Optional[int]
    accepted: bool
    state: PureState


def verify(spec, i, coin, state):
    """Bob's checks. Accepted branches have Bob's registers factored out."""
    plain, sup = plain_and_superposed(coin)
    out = []
    for b in measure_branches(state, computational_measurement(state.layout, plain)):
        q, y = b.label
        if q != i or y not in spec.valid_answers[i - 1]:
            out.append(Verified(b.probability, None, False, b.state))
            continue
        chi = check_vector(spec, i, y)
        for c in measure_branches(b.state, projector_measurement(sup, chi)):
            p = b.probability * c.probability
            if c.label == "pass":
                plain_vec = np.zeros(spec.query_dim * spec.answer_dim, dtype=np.complex128)
                plain_vec[i * spec.answer_dim + y] = 1.0
                rest = factor_out(c.state, plain, plain_vec)
                rest = factor_out(rest, sup, chi)
                out.append(Verified(p, y, True, rest))
            else:
                out.append(Verified(p, None, False, c.state))
    return out


@dataclass(frozen=True)
class RunBranch:
    probability: float
    entries: Optional[tuple]
    coins: tuple
    events: tuple
    outputs: tuple
    accepted: bool
    state: PureState


@dataclass(frozen=True)
class Transcript:
    spec: DatabaseSpec
    query: int
    repetitions: int
    noise: float
    branches: tuple

    def total_probability(self):
        return sum(b.probability for b in self.branches)

    def accept_probability(self, round_index=None):
        """Probability Bob accepted round ``round_index`` (all rounds if None)."""
        if round_index is None:
            return sum(b.probability for b in self.branches if b.accepted)
        return sum(
            b.probability
            for b in self.branches
            if len(b.outputs) > round_index and b.outputs[round_index] is not None
        )

    def answer_distribution(self, round_index=0):
        dist = {}
        for b in self.branches:
            if len(b.outputs) > round_index and b.outputs[round_index] is not None:
                y = b.outputs[round_index]
                dist[y] = dist.get(y, 0.0) + b.probability
        return dict(sorted(dist.items()))


def honest_run(spec, i, noise=0.0, repetitions=1, tamper=None):
    """Enumerate every branch of ``repetitions`` protocol runs with query ``i``.

    Each repetition draws a fresh coin; a rejected round ends that branch.
    """
    spec.check_query(i)
    if repetitions < 1:
        raise SpecError("need at least one repetition")
    active = [
        RunBranch(db.probability, db.entries, (), (), (), True, db.state) for db in build_database_state(spec)
    ]
    done = []
    for r in range(repetitions):
        nxt = []
        for br in active:
            for coin in (0, 1):
                for d in deliver(spec, i, coin, br.state, noise, tamper, r):
                    for v in verify(spec, i, coin, d.state):
                        p = br.probability * 0.5 * d.probability * v.probability
                        if p < PRUNE_TOL:
                            continue
                        rb = RunBranch(
                            p, br.entries, br.coins + (coin,), br.events + d.events, br.outputs + (v.output,), v.accepted, v.state
                        )
                        (nxt if v.accepted else done).append(rb)
        active = nxt
    branches = tuple(done + active)
    total = sum(b.probability for b in branches)
    if abs(total - 1.0) > ATOL:
        raise ArithmeticError(f"transcript probabilities sum to {total}")
    return Transcript(spec, i, repetitions, noise, branches)


def estimate_correctness(t):
    """1 - Pr[Bob accepts every round and all outputs equal Alice's entry x_i]."""
    spec, i = t.spec, t.query
    good = 0.0
    for b in t.branches:
        if not b.accepted or len(set(b.outputs)) != 1:
            continue
        idx = spec.index_of(i, b.outputs[0])
        if idx is None:
            continue
        good += b.probability * project_values(b.state, {f"X{i}": idx})
    return min(1.0, max(0.0, 1.0 - good))


def protocol_epsilon(spec, noise=0.0, repetitions=1):
    """Worst correctness error over queries (and over all databases in classical mode)."""
    if spec.mode == "classical":
        specs = [
            replace(spec, entries=combo) for combo in itertools.product(*spec.valid_answers)
        ]
    else:
        specs = [spec]
    return max(
        estimate_correctness(honest_run(s, i, noise, repetitions)) for s in specs for i in range(1, spec.n + 1)
    )


def alice_marginals(t, names=None):
    """Alice's end-of-run state per database branch she knows: {entries: (weight, rho)}."""
    names = t.spec.alice_names if names is None else tuple(names)
    acc = {}
    for b in t.branches:
        rho = reduced_density(b.state, names)
        w, mat, layout = acc.get(b.entries, (0.0, 0.0, rho.layout))
        acc[b.entries] = (w + b.probability, mat + b.probability * rho.matrix, layout)
    return {k: (w, DensityOperator(layout, mat / w)) for k, (w, mat, layout) in acc.items()}


def _strategy_spec(spec, strategy):
    if strategy == "purified-database":
        return replace(spec, mode="purified", entries=None)
    if strategy == "honest":
        if spec.mode == "purified":
            return replace(spec, mode="uniform")
        return spec
    raise SpecError(f"unknown strategy {strategy!r}")


def user_privacy_gap(spec, strategy="honest", noise=0.0, repetitions=1):
    """max over i != j of Alice's distance between query i and query j runs.

    Branches Alice knows (her sampled database) are combined as a
    classical-quantum distance; everything else is averaged into her state.
    """
    s = _strategy_spec(spec, strategy)
    if s.n < 2:
        return 0.0
    marg = {i: alice_marginals(honest_run(s, i, noise, repetitions)) for i in range(1, s.n + 1)}
    gap = 0.0
    for i, j in itertools.combinations(range(1, s.n + 1), 2):
        keys = marg[i].keys()
        dist = cq_trace_distance([(marg[i][k][0], marg[i][k][1], marg[j][k][1]) for k in keys])
        gap = max(gap, dist)
    return gap
