"""Teleportation as a sequence of local steps, with the entanglement reset.

Stage one injects the amplitudes of ``|phi> = a|0> + b|1>`` into a shared Bell
pair, leaving either the desired form ``a|00> + b|11>`` or the undesired form
``a|11> + b|00>``. The conventional protocol fixes the undesired form with a
bi-local X (one classical bit); stage two ends the entanglement with a
Hadamard-basis measurement (another bit).

The reset lets Alice recover the Bell pair from the undesired form locally: she
entangles an ancilla ``c|0> + d|1>`` with ``(c, d) = (a, b)`` via CNOT onto her
half and measures her old half. Outcome 0 (probability ``2|ab|^2``) leaves
ancilla and Bob's qubit in a Bell state. Outcome 1 leaves
``a^2|11> + b^2|00>`` (renormalized) after an X on the ancilla, i.e. an
undesired form with squared amplitudes, so the reset can be tried again.

A shared pair is always a 2-qubit :class:`PureState` with Alice's qubit at
index 0 and Bob's at index 1; the label of index 0 records which physical
qubit Alice currently holds ("A" for the original half, "phi" after stage one,
"l" after a successful reset).

Every measurement takes exactly one caller-supplied draw, consumed in event
order, so a fixed draw sequence reproduces a transcript exactly.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Any, Iterable, Iterator, Sequence

from . import statevec as sv
from .statevec import PureState

ANCILLA_TOL = 1e-6
FORM_TOL = 1e-9

# event types
STAGE1 = "STAGE1"
RESET_ATTEMPT = "RESET_ATTEMPT"
X_CORRECTION = "X_CORRECTION"
STAGE2 = "STAGE2"
CLASSICAL_BIT_SENT = "CLASSICAL_BIT_SENT"
COPY_CONSUMED = "COPY_CONSUMED"
ABANDONED = "ABANDONED"
EVENT_TYPES = (STAGE1, RESET_ATTEMPT, X_CORRECTION, STAGE2, CLASSICAL_BIT_SENT, COPY_CONSUMED, ABANDONED)


class ProtocolError(Exception):
    pass


class ProtocolOrderError(ProtocolError):
    """A step was applied to a shared pair in the wrong form."""


class AncillaMismatchError(ProtocolError):
    pass


class ConfigurationError(ProtocolError, ValueError):
    pass


class ResourceExhaustedError(ProtocolError):
    """Alice ran out of copies of |phi>; ``transcript`` holds the partial run."""

    def __init__(self, message: str, transcript: Transcript):
        super().__init__(message)
        self.transcript = transcript


class DrawsExhaustedError(ProtocolError):
    pass


class Strategy(str, Enum):
    CONVENTIONAL = "conventional"
    RESET_RETRY = "reset-retry"
    ABANDON_ON_FAIL = "abandon"


class PairForm(str, Enum):
    BELL = "BELL"
    DESIRED = "DESIRED"
    UNDESIRED = "UNDESIRED"


@dataclass(frozen=True)
class UnknownQubit:
    """The qubit a|0> + b|1> to teleport (also used for reset ancillas)."""

    a: complex
    b: complex

    def __post_init__(self):
        a, b = complex(self.a), complex(self.b)
        if not (cmath.isfinite(a) and cmath.isfinite(b)):
            raise ValueError("amplitudes must be finite")
        norm = abs(a) ** 2 + abs(b) ** 2
        if abs(norm - 1) > sv.NORM_TOL:
            raise ValueError(f"|a|^2 + |b|^2 = {norm!r}, not within {sv.NORM_TOL} of 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_polar(cls, theta: float, phase: float) -> UnknownQubit:
        """Bloch-sphere point: a = cos(theta/2), b = e^{i phase} sin(theta/2)."""
        return cls(complex(math.cos(theta / 2)), cmath.exp(1j * phase) * math.sin(theta / 2))

    @classmethod
    def normalized(cls, a: complex, b: complex) -> UnknownQubit:
        n = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        if n == 0:
            raise ValueError("a and b cannot both be zero")
        return cls(a / n, b / n)

    @property
    def ab_sq(self) -> float:
        """|ab|^2."""
        return abs(self.a * self.b) ** 2

    def state(self, label: str = "phi") -> PureState:
        return PureState(1, (self.a, self.b), (label,))

    @cached_property
    def as_state(self) -> PureState:
        return PureState(1, (self.a, self.b))


def _pair_template(form: PairForm, a: complex, b: complex) -> tuple[complex, ...]:
    if form is PairForm.BELL:
        r = 1 / math.sqrt(2)
        return (r, 0j, 0j, r)
    if form is PairForm.DESIRED:
        return (a, 0j, 0j, b)
    return (b, 0j, 0j, a)


@lru_cache(maxsize=4096)
def _form_overlap(amps: tuple[complex, ...], form: PairForm, a: complex, b: complex) -> float:
    ref = _pair_template(form, a, b)
    return abs(sum(x.conjugate() * y for x, y in zip(ref, amps)))


@dataclass(frozen=True)
class SharedPair:
    """Two entangled qubits: index 0 is Alice's, index 1 is Bob's.

    ``amplitudes`` is the (a_k, b_k) pair the DESIRED/UNDESIRED form is built
    from; for BELL it is unused. ``state`` may differ from the template by a
    global phase.
    """

    state: PureState
    form: PairForm
    chain_depth: int = 0
    amplitudes: tuple[complex, complex] = (1 + 0j, 0j)

    def __post_init__(self):
        if self.state.n_qubits != 2:
            raise ValueError("a shared pair has exactly two qubits")
        fid = _form_overlap(self.state.amps, self.form, *self.amplitudes)
        if fid < 1 - FORM_TOL:
            raise ValueError(f"pair state does not match form {self.form.value} (overlap {fid!r})")

    @property
    def alice_qubit(self) -> str | None:
        return None if self.state.labels is None else self.state.labels[0]


@dataclass(frozen=True)
class Event:
    type: str
    k: int | None = None
    outcome: int | None = None
    probability: float | None = None
    purpose: str | None = None
    success: bool | None = None
    alice_qubit: str | None = None

    def to_dict(self) -> dict[str, Any]:
        d = {"type": self.type}
        for key in ("k", "outcome", "probability", "purpose", "success", "alice_qubit"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        return d


@dataclass(frozen=True)
class ProtocolConfig:
    strategy: Strategy = Strategy.RESET_RETRY
    max_resets: int = 1
    copies_available: int | None = None  # None: unlimited
    amplitudes_known: bool = True

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.max_resets < 0:
            raise ConfigurationError("max_resets must be >= 0")
        if self.copies_available is not None and self.copies_available < 1:
            raise ConfigurationError("copies_available must be >= 1 (or None for unlimited)")
        if not self.amplitudes_known and self.max_resets > 1:
            raise ConfigurationError(
                "resets beyond the first need the ancilla (a_k, b_k), which requires known amplitudes"
            )

    @property
    def effective_resets(self) -> int:
        return 0 if self.strategy is Strategy.CONVENTIONAL else self.max_resets


@dataclass
class Transcript:
    strategy: Strategy
    phi: UnknownQubit
    events: list[Event] = field(default_factory=list)
    bob_final: PureState | None = None

    @property
    def bits_sent(self) -> int:
        return sum(e.type == CLASSICAL_BIT_SENT for e in self.events)

    @property
    def copies_consumed(self) -> int:
        return sum(e.type == COPY_CONSUMED for e in self.events)

    @property
    def completed(self) -> bool:
        return self.bob_final is not None

    @property
    def abandoned(self) -> bool:
        return any(e.type == ABANDONED for e in self.events)

    @property
    def fidelity(self) -> float | None:
        if self.bob_final is None:
            return None
        return sv.overlap_up_to_phase(self.bob_final.relabel(None), self.phi.state().relabel(None))

    def of_type(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.type == kind]

    def to_dict(self) -> dict[str, Any]:
        bob = None
        if self.bob_final is not None:
            z0, z1 = self.bob_final.amps
            bob = {"re0": z0.real, "im0": z0.imag, "re1": z1.real, "im1": z1.imag}
        return {
            "strategy": self.strategy.value,
            "events": [e.to_dict() for e in self.events],
            "bits_sent": self.bits_sent,
            "copies_consumed": self.copies_consumed,
            "completed": self.completed,
            "bob_final": bob,
            "fidelity": self.fidelity,
        }


def make_bell() -> SharedPair:
    r = 1 / math.sqrt(2)
    return SharedPair(PureState(2, (r + 0j, 0j, 0j, r + 0j), ("A", "B")), PairForm.BELL)


def _require(pair: SharedPair, form: PairForm, step: str) -> None:
    if pair.form is not form:
        raise ProtocolOrderError(f"{step} needs a {form.value} pair, got {pair.form.value}")


def _branches(state: PureState, qubit: int) -> tuple[float, list[tuple[float, PureState] | None]]:
    """Both collapse branches of measuring ``qubit``; None for a zero-probability outcome."""
    p0 = sv.outcome_probability(state, qubit, 0)
    out = []
    for outcome in (0, 1):
        if sv.outcome_probability(state, qubit, outcome) < sv.EXACT_TOL:
            out.append(None)
            continue
        p, post = sv.collapse(state, qubit, outcome)
        out.append((p, sv.discard_qubit(post, qubit, outcome)))
    return p0, out


def _select(p0: float, branches: list, draw: float) -> int:
    # same rule as statevec.measure: outcome 0 iff draw < P(0)
    if not 0.0 <= draw < 1.0:
        raise sv.StateError(f"random draw must lie in [0, 1), got {draw!r}")
    outcome = sv.select_outcome(p0, draw)
    if branches[outcome] is None:
        raise sv.DegenerateCollapseError(f"outcome {outcome} has zero probability")
    return outcome


# Each step is a pure function of immutable inputs, so both measurement
# branches are computed once per distinct input and the draw only selects one.

@lru_cache(maxsize=4096)
def _stage_one_branches(phi: UnknownQubit, pair: SharedPair):
    full = sv.tensor(phi.as_state, pair.state, labels=("phi", "A", "B"))
    full = sv.apply_cnot(full, 0, 1)
    p0, br = _branches(full, 1)
    results = []
    for outcome, b in enumerate(br):
        if b is None:
            results.append(None)
            continue
        p, rest = b
        events = (Event(COPY_CONSUMED), Event(STAGE1, outcome=outcome, probability=p))
        if outcome == 0:
            results.append((SharedPair(rest, PairForm.DESIRED, 0, (phi.a, phi.b)), events))
        else:
            rest = sv.apply_gate(rest, "X", 0)
            results.append((SharedPair(rest, PairForm.UNDESIRED, 0, (phi.a, phi.b)), events))
    return p0, results


def stage_one(phi: UnknownQubit, pair: SharedPair, draw: float) -> tuple[SharedPair, list[Event]]:
    """Inject phi into a Bell pair: CNOT(phi -> Alice's half), measure Alice's half.

    Outcome 0 gives the desired form over (phi, B). Outcome 1 gives
    a|01> + b|10>, and Alice's X on the phi qubit turns it into the undesired
    form a|11> + b|00>.
    """
    _require(pair, PairForm.BELL, "stage one")
    p0, results = _stage_one_branches(phi, pair)
    new_pair, events = results[_select(p0, results, draw)]
    return new_pair, list(events)


def conventional_correction(pair: SharedPair) -> tuple[SharedPair, list[Event]]:
    """Bi-local X turning a|11> + b|00> into a|00> + b|11>; costs one bit."""
    _require(pair, PairForm.UNDESIRED, "conventional correction")
    if pair.chain_depth:
        raise ProtocolOrderError(
            "the pair went through failed resets; correcting it would not teleport phi"
        )
    state = sv.apply_gate(sv.apply_gate(pair.state, "X", 0), "X", 1)
    events = [
        Event(X_CORRECTION),
        Event(CLASSICAL_BIT_SENT, purpose="x-correction"),
    ]
    return SharedPair(state, PairForm.DESIRED, 0, pair.amplitudes), events


@lru_cache(maxsize=4096)
def _stage_two_branches(pair: SharedPair):
    state = sv.apply_gate(pair.state, "H", 0)
    p0, br = _branches(state, 0)
    results = []
    for outcome, b in enumerate(br):
        if b is None:
            results.append(None)
            continue
        p, bob = b
        if outcome == 1:
            bob = sv.apply_gate(bob, "Z", 0)
        events = (Event(STAGE2, outcome=outcome, probability=p),
                  Event(CLASSICAL_BIT_SENT, purpose="stage-two-outcome"))
        results.append((bob.relabel(("B",)), events))
    return p0, results


def stage_two(pair: SharedPair, draw: float) -> tuple[PureState, list[Event]]:
    """H on Alice's half, measure it, Bob applies Z on outcome 1.

    The outcome is always reported (one bit); Bob cannot know whether Z is
    needed otherwise.
    """
    _require(pair, PairForm.DESIRED, "stage two")
    p0, results = _stage_two_branches(pair)
    bob, events = results[_select(p0, results, draw)]
    return bob, list(events)


@lru_cache(maxsize=4096)
def _reset_branches(pair: SharedPair, ancilla: UnknownQubit):
    a, b = pair.amplitudes
    k = pair.chain_depth
    full = sv.tensor(ancilla.as_state, pair.state, labels=("l", "A", "B"))
    full = sv.apply_cnot(full, 0, 1)
    p0, br = _branches(full, 1)
    results = []
    if br[0] is None:
        results.append(None)
    else:
        p, rest = br[0]
        results.append((SharedPair(rest, PairForm.BELL), (
            Event(COPY_CONSUMED),
            Event(RESET_ATTEMPT, k=k, outcome=0, probability=p, success=True, alice_qubit="l"),
        )))
    if br[1] is None:
        results.append(None)
    else:
        p, rest = br[1]
        rest = sv.apply_gate(rest, "X", 0)
        na, nb = a * a, b * b
        norm = math.sqrt(abs(na) ** 2 + abs(nb) ** 2)
        results.append((SharedPair(rest, PairForm.UNDESIRED, k + 1, (na / norm, nb / norm)), (
            Event(COPY_CONSUMED),
            Event(RESET_ATTEMPT, k=k, outcome=1, probability=p, success=False),
        )))
    return p0, results


def reset_attempt(pair: SharedPair, ancilla: UnknownQubit, draw: float) -> tuple[SharedPair, list[Event]]:
    """One local reset of an undesired pair using ancilla (a_k, b_k).

    CNOT(ancilla -> Alice's half), then Alice's half is measured. Outcome 0
    leaves (ancilla, Bob) as a Bell pair up to global phase, and the ancilla
    becomes Alice's half. Outcome 1 leaves a_k^2|01> + b_k^2|10> (normalized);
    an X on the ancilla gives the undesired form at depth k + 1.
    """
    _require(pair, PairForm.UNDESIRED, "reset")
    a, b = pair.amplitudes
    if 1 - abs(ancilla.a.conjugate() * a + ancilla.b.conjugate() * b) > ANCILLA_TOL:
        raise AncillaMismatchError(
            f"ancilla {ancilla} does not match chain amplitudes ({a}, {b}) at depth {pair.chain_depth}"
        )
    p0, results = _reset_branches(pair, ancilla)
    new_pair, events = results[_select(p0, results, draw)]
    return new_pair, list(events)


class _Draws:
    def __init__(self, draws: Iterable[float]):
        self._it: Iterator[float] = iter(draws)
        self.used = 0

    def next(self) -> float:
        try:
            d = next(self._it)
        except StopIteration:
            raise DrawsExhaustedError(f"draw sequence ran out after {self.used} draws") from None
        self.used += 1
        return float(d)


def max_draws(config: ProtocolConfig) -> int:
    """Upper bound on draws a single run can consume."""
    r = config.effective_resets
    return 2 * r + 2


def run_teleport(phi: UnknownQubit, config: ProtocolConfig, draws: Sequence[float] | Iterable[float]) -> Transcript:
    """Walk one root-to-leaf path of the protocol tree under ``config.strategy``.

    ``max_resets`` bounds the total number of reset attempts in the run. A
    successful reset is followed by a fresh stage one. When the budget runs out
    on an undesired pair the run either falls back to the conventional
    correction (only possible if no reset has failed on this pair) or abandons
    the pair.
    """
    t = Transcript(config.strategy, phi)
    src = _Draws(draws)
    resets_used = 0

    def take_copy():
        if config.copies_available is not None and t.copies_consumed >= config.copies_available:
            raise ResourceExhaustedError(
                f"all {config.copies_available} copies of phi consumed", t
            )

    def finish(pair: SharedPair) -> Transcript:
        bob, ev = stage_two(pair, src.next())
        t.events.extend(ev)
        t.bob_final = bob
        return t

    pair = make_bell()
    while True:
        take_copy()
        pair, ev = stage_one(phi, pair, src.next())
        t.events.extend(ev)
        if pair.form is PairForm.DESIRED:
            if config.strategy is Strategy.CONVENTIONAL:
                t.events.append(Event(CLASSICAL_BIT_SENT, purpose="stage-one-outcome"))
            return finish(pair)
        if config.strategy is Strategy.CONVENTIONAL:
            pair, ev = conventional_correction(pair)
            t.events.extend(ev)
            return finish(pair)

        while pair.form is PairForm.UNDESIRED:
            if resets_used >= config.max_resets:
                if config.strategy is Strategy.ABANDON_ON_FAIL or pair.chain_depth > 0:
                    t.events.append(Event(ABANDONED, k=pair.chain_depth))
                    return t
                pair, ev = conventional_correction(pair)
                t.events.extend(ev)
                return finish(pair)
            if pair.chain_depth > 0 and not config.amplitudes_known:
                raise ConfigurationError("preparing the ancilla for k >= 1 requires known amplitudes")
            take_copy()
            ancilla = UnknownQubit(*pair.amplitudes)
            pair, ev = reset_attempt(pair, ancilla, src.next())
            t.events.extend(ev)
            resets_used += 1
            if pair.form is PairForm.UNDESIRED and config.strategy is Strategy.ABANDON_ON_FAIL:
                t.events.append(Event(ABANDONED, k=pair.chain_depth))
                return t
        # Bell restored: go round again with a fresh copy


@dataclass(frozen=True)
class BiasRound:
    kept: bool
    bob_outcome: int
    stage_one_attempts: int
    resets: int


def run_bias_round(phi: UnknownQubit, config: ProtocolConfig, draws: Iterable[float]) -> BiasRound:
    """Alice steers the shared pair toward a|00> + b|11> without talking to Bob.

    She runs stage one and, on the undesired form, resets (within
    ``max_resets``) and retries. The round is kept if the desired form is
    reached. Bob then measures his qubit in the computational basis, whatever
    Alice got; that last measurement uses the final draw.
    """
    src = _Draws(draws)
    resets_used = 0
    attempts = 0
    pair = make_bell()
    kept = False
    while True:
        attempts += 1
        pair, _ = stage_one(phi, pair, src.next())
        if pair.form is PairForm.DESIRED:
            kept = True
            break
        while pair.form is PairForm.UNDESIRED and resets_used < config.effective_resets:
            if config.strategy is Strategy.ABANDON_ON_FAIL and pair.chain_depth > 0:
                break
            pair, _ = reset_attempt(pair, UnknownQubit(*pair.amplitudes), src.next())
            resets_used += 1
        if pair.form is not PairForm.BELL:
            break
    rec, _ = sv.measure(pair.state, 1, src.next())
    return BiasRound(kept, rec.outcome, attempts, resets_used)
