"""Minimal dense pure-state simulator for a handful of qubits.

Qubit 0 is the leftmost symbol of a ket, i.e. the most significant bit of the
basis index: for three qubits ``|0 1 1>`` is index 3.

States are immutable. Every operation returns a new :class:`PureState`.
Amplitudes are stored as a tuple of Python ``complex`` values; at n <= 8 plain
tuples are much faster than small numpy arrays, and the hot loops in the
Monte Carlo harness run through these kernels.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 8
NORM_TOL = 1e-9
EXACT_TOL = 1e-12
LABELS = frozenset({"l", "A", "B", "phi", "ancilla"})

_SQRT1_2 = 1 / math.sqrt(2)
GATES = {
    "X": ((0, 1), (1, 0)),
    "Z": ((1, 0), (0, -1)),
    "H": ((_SQRT1_2, _SQRT1_2), (_SQRT1_2, -_SQRT1_2)),
}


class StateError(ValueError):
    """Invalid state, qubit index or gate request."""


class DegenerateCollapseError(StateError):
    """Requested collapse onto an outcome that has (numerically) zero probability."""


@lru_cache(maxsize=16384)
def _validate(n: int, amps: tuple[complex, ...], labels: tuple[str, ...] | None) -> None:
    # cached: the Monte Carlo loop rebuilds the same few states many times
    if not 1 <= n <= MAX_QUBITS:
        raise StateError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n}")
    if len(amps) != 1 << n:
        raise StateError(f"expected {1 << n} amplitudes, got {len(amps)}")
    norm = 0.0
    for z in amps:
        if not cmath.isfinite(z):
            raise StateError("amplitudes must be finite")
        norm += z.real * z.real + z.imag * z.imag
    if abs(norm - 1) > NORM_TOL:
        raise StateError(f"state norm {norm!r} deviates from 1 by more than {NORM_TOL}")
    if labels is not None:
        if len(labels) != n:
            raise StateError("one label per qubit required")
        if not LABELS.issuperset(labels):
            raise StateError(f"unknown qubit labels {sorted(set(labels) - LABELS)}")


@dataclass(frozen=True)
class PureState:
    n_qubits: int
    amps: tuple[complex, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        _validate(self.n_qubits, self.amps, self.labels)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.amps, dtype=complex)

    @property
    def norm_squared(self) -> float:
        return sum(abs(z) ** 2 for z in self.amps)

    def qubit(self, label: str) -> int:
        """Index of the qubit carrying ``label``."""
        if self.labels is None or label not in self.labels:
            raise StateError(f"no qubit labelled {label!r}")
        return self.labels.index(label)

    def relabel(self, labels: Sequence[str] | None) -> PureState:
        return PureState(self.n_qubits, self.amps, None if labels is None else tuple(labels))

    def __str__(self):
        terms = []
        for i, z in enumerate(self.amps):
            if abs(z) > EXACT_TOL:
                terms.append(f"({z.real:+.6g}{z.imag:+.6g}j)|{i:0{self.n_qubits}b}>")
        return " ".join(terms) or "0"


def from_amplitudes(amps: Iterable[complex], labels: Sequence[str] | None = None) -> PureState:
    amps = tuple(complex(z) for z in amps)
    n = len(amps).bit_length() - 1
    if len(amps) == 0 or 1 << n != len(amps):
        raise StateError(f"amplitude count {len(amps)} is not a power of two")
    return PureState(n, amps, None if labels is None else tuple(labels))


def make_state(n: int, basis_index: int, labels: Sequence[str] | None = None) -> PureState:
    """Computational basis state ``|basis_index>`` on ``n`` qubits."""
    if not 1 <= n <= MAX_QUBITS:
        raise StateError(f"n must be in [1, {MAX_QUBITS}], got {n}")
    if not 0 <= basis_index < 1 << n:
        raise StateError(f"basis index {basis_index} out of range for {n} qubits")
    amps = [0j] * (1 << n)
    amps[basis_index] = 1 + 0j
    return PureState(n, tuple(amps), None if labels is None else tuple(labels))


def tensor(*states: PureState, labels: Sequence[str] | None = None) -> PureState:
    """Kronecker product; the first argument supplies the leftmost qubits.

    Labels are concatenated unless ``labels`` overrides them.
    """
    if not states:
        raise StateError("tensor needs at least one state")
    amps = states[0].amps
    n = states[0].n_qubits
    for s in states[1:]:
        amps = _kron(amps, s.amps)
        n += s.n_qubits
    if labels is not None:
        labels = tuple(labels)
    elif all(s.labels is not None for s in states):
        labels = tuple(l for s in states for l in s.labels)
    return PureState(n, amps, labels)


@lru_cache(maxsize=8192)
def _kron(left: tuple[complex, ...], right: tuple[complex, ...]) -> tuple[complex, ...]:
    return tuple(x * y for x in left for y in right)


def _check_qubit(state: PureState, qubit: int) -> None:
    if not ((type(qubit) is int or isinstance(qubit, np.integer)) and 0 <= qubit < state.n_qubits):
        raise StateError(f"qubit index {qubit!r} invalid for a {state.n_qubits}-qubit state")


@lru_cache(maxsize=8192)
def _gate_kernel(amps: tuple[complex, ...], n: int, gate: str, qubit: int) -> tuple[complex, ...]:
    (m00, m01), (m10, m11) = GATES[gate]
    shift = n - 1 - qubit
    mask = 1 << shift
    out = list(amps)
    for i in range(len(amps)):
        if i & mask:
            continue
        z0, z1 = amps[i], amps[i | mask]
        out[i] = m00 * z0 + m01 * z1
        out[i | mask] = m10 * z0 + m11 * z1
    return tuple(out)


def apply_gate(state: PureState, gate: str, qubit: int) -> PureState:
    """Apply one of X, Z, H to ``qubit``."""
    if gate not in GATES:
        raise StateError(f"unsupported gate {gate!r}; choose from {sorted(GATES)}")
    _check_qubit(state, qubit)
    return PureState(state.n_qubits, _gate_kernel(state.amps, state.n_qubits, gate, qubit), state.labels)


@lru_cache(maxsize=8192)
def _cnot_kernel(amps: tuple[complex, ...], n: int, control: int, target: int) -> tuple[complex, ...]:
    cmask = 1 << (n - 1 - control)
    tmask = 1 << (n - 1 - target)
    return tuple(amps[i ^ tmask] if i & cmask else amps[i] for i in range(len(amps)))


def apply_cnot(state: PureState, control: int, target: int) -> PureState:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise StateError("control and target must differ")
    return PureState(state.n_qubits, _cnot_kernel(state.amps, state.n_qubits, control, target), state.labels)


@lru_cache(maxsize=8192)
def _split(amps: tuple[complex, ...], n: int, qubit: int) -> tuple[float, float]:
    mask = 1 << (n - 1 - qubit)
    p = [0.0, 0.0]
    for i, z in enumerate(amps):
        p[1 if i & mask else 0] += z.real * z.real + z.imag * z.imag
    return p[0], p[1]


def outcome_probability(state: PureState, qubit: int, outcome: int) -> float:
    """Probability that a computational-basis measurement of ``qubit`` yields ``outcome``."""
    _check_qubit(state, qubit)
    if outcome not in (0, 1):
        raise StateError(f"outcome must be 0 or 1, got {outcome!r}")
    return _split(state.amps, state.n_qubits, qubit)[outcome]


@dataclass(frozen=True)
class MeasurementRecord:
    qubit: int
    outcome: int
    probability: float


@lru_cache(maxsize=8192)
def _project(amps: tuple[complex, ...], n: int, qubit: int, outcome: int, prob: float) -> tuple[complex, ...]:
    mask = 1 << (n - 1 - qubit)
    scale = 1 / math.sqrt(prob)
    keep = mask if outcome else 0
    return tuple(z * scale if (i & mask) == keep else 0j for i, z in enumerate(amps))


def collapse(state: PureState, qubit: int, outcome: int) -> tuple[float, PureState]:
    """Project onto ``outcome`` of ``qubit`` and renormalize; returns (probability, state)."""
    p = outcome_probability(state, qubit, outcome)
    if p < EXACT_TOL:
        raise DegenerateCollapseError(
            f"outcome {outcome} of qubit {qubit} has probability {p:.3g}; cannot collapse onto it"
        )
    return p, PureState(state.n_qubits, _project(state.amps, state.n_qubits, qubit, outcome, p), state.labels)


def select_outcome(p0: float, random_draw: float) -> int:
    """The draw rule shared by every measurement in the package."""
    if p0 < EXACT_TOL:
        return 1
    if 1 - p0 < EXACT_TOL:
        return 0
    return 0 if random_draw < p0 else 1


def measure(state: PureState, qubit: int, random_draw: float) -> tuple[MeasurementRecord, PureState]:
    """Projective measurement driven by an externally supplied uniform draw.

    Outcome 0 is selected iff ``random_draw < P(outcome 0)``. An outcome whose
    probability is below ``EXACT_TOL`` is treated as impossible and never
    selected, so a draw of exactly 0.0 cannot land on a numerically empty branch.
    """
    if not 0.0 <= random_draw < 1.0:
        raise StateError(f"random draw must lie in [0, 1), got {random_draw!r}")
    p0 = outcome_probability(state, qubit, 0)
    outcome = select_outcome(p0, random_draw)
    p, post = collapse(state, qubit, outcome)
    return MeasurementRecord(qubit, outcome, p), post


@lru_cache(maxsize=8192)
def _drop(amps: tuple[complex, ...], n: int, qubit: int, outcome: int) -> tuple[complex, ...]:
    mask = 1 << (n - 1 - qubit)
    keep = mask if outcome else 0
    return tuple(z for i, z in enumerate(amps) if (i & mask) == keep)


def discard_qubit(state: PureState, qubit: int, outcome: int) -> PureState:
    """Drop a qubit that is already in the definite basis state ``|outcome>``.

    The remaining qubits keep their relative order (and labels).
    """
    _check_qubit(state, qubit)
    if state.n_qubits == 1:
        raise StateError("cannot discard the only qubit")
    if outcome_probability(state, qubit, 1 - outcome) > EXACT_TOL:
        raise StateError(f"qubit {qubit} is not in a definite |{outcome}> state")
    n = state.n_qubits
    amps = _drop(state.amps, n, qubit, outcome)
    labels = None if state.labels is None else state.labels[:qubit] + state.labels[qubit + 1:]
    return PureState(n - 1, amps, labels)


def inner(s1: PureState, s2: PureState) -> complex:
    """<s1|s2>."""
    if s1.n_qubits != s2.n_qubits:
        raise StateError(f"dimension mismatch: {s1.n_qubits} vs {s2.n_qubits} qubits")
    return sum(x.conjugate() * y for x, y in zip(s1.amps, s2.amps))


def overlap_up_to_phase(s1: PureState, s2: PureState) -> float:
    """|<s1|s2>|, which is 1 exactly when the states agree up to a global phase."""
    return abs(inner(s1, s2))
