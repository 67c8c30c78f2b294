"""Closed-form probabilities and costs, and an exact enumeration of the protocol tree.

Reset chain: after a failed reset on amplitudes (a_k, b_k) the pair carries

    a_{k+1} = a_k^2 / sqrt(|a_k^2|^2 + |b_k^2|^2),   b_{k+1} = b_k^2 / (same)

and reset k succeeds with probability ``2 |a_k b_k|^2``.

Tree semantics (shared with :func:`telereset.protocol.run_teleport`):

* ``max_resets`` is the total number of reset attempts available in one run.
* After a successful reset Alice runs stage one again with a fresh copy; the
  chain restarts at k = 0.
* When the budget is exhausted on an undesired pair, the run falls back to the
  conventional correction if no reset failed on that pair (k = 0); otherwise
  the pair is spoiled and abandoned. ``ABANDON_ON_FAIL`` abandons on every
  failed reset and on any undesired pair it cannot reset.

Leaves ``BOB_PHI0..3`` are the four states Bob holds after stage two but before
any Pauli correction: phi0/phi1 come from the desired form, phi2/phi3 from the
undesired form. For the phi-state bookkeeping an abandoned undesired pair is
split evenly between phi2 and phi3, as the stage-two measurement would do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterator

from .protocol import Strategy, UnknownQubit

PROB_TOL = 1e-12


@dataclass(frozen=True)
class ChainEntry:
    k: int
    a: complex
    b: complex
    p_success: float


@dataclass(frozen=True)
class ResetChain:
    entries: tuple[ChainEntry, ...]
    degenerate: bool = False

    def p(self, k: int) -> float:
        return self.entries[k].p_success

    def __len__(self):
        return len(self.entries)


def next_chain_amplitudes(a: complex, b: complex) -> tuple[complex, complex]:
    """Amplitudes left on the pair after a failed reset."""
    a2, b2 = a * a, b * b
    norm = math.sqrt(abs(a2) ** 2 + abs(b2) ** 2)
    return a2 / norm, b2 / norm


def reset_recursion(phi: UnknownQubit, depth: int) -> ResetChain:
    """Entries k = 0..depth of the reset chain starting at phi."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    a, b = phi.a, phi.b
    degenerate = a == 0 or b == 0
    entries = []
    for k in range(depth + 1):
        # weights renormalized so that a == b gives exactly 2 * 0.5 * 0.5
        wa, wb = abs(a) ** 2, abs(b) ** 2
        entries.append(ChainEntry(k, a, b, 2 * (wa / (wa + wb)) * (wb / (wa + wb))))
        a, b = next_chain_amplitudes(a, b)
    return ResetChain(tuple(entries), degenerate)


def entropy_ht(phi: UnknownQubit) -> float:
    """Expected classical bits with one reset attempt: (1/2 + |ab|^2)*1 + (1/2 - |ab|^2)*2."""
    ab = phi.ab_sq
    return (0.5 + ab) * 1 + (0.5 - ab) * 2


def p_need_k_resets(phi: UnknownQubit, k: int) -> float:
    """Probability that the k-th reset is the first to succeed: prod_{j<k-1}(1 - P(R_j)) * P(R_{k-1})."""
    if k < 1:
        raise ValueError("k must be >= 1")
    chain = reset_recursion(phi, k - 1)
    p = chain.p(k - 1)
    for j in range(k - 1):
        p *= 1 - chain.p(j)
    return p


def one_bit_probability(phi: UnknownQubit, max_resets: int) -> float:
    """Probability that the first pair avoids the correction bit.

    The pair is counted as one-bit either when stage one lands on the desired
    form or when one of the first ``max_resets`` resets restores the Bell pair.
    A restored pair is credited as a one-bit outcome, the same accounting as
    the cost formula in :func:`entropy_ht`. With ``max_resets == 1`` this is
    ``1/2 + |ab|^2``. The fraction of runs that actually finish with a single
    bit sent is :attr:`CostSummary.completed_one_bit_prob`.
    """
    if max_resets < 0:
        raise ValueError("max_resets must be >= 0")
    rescued = sum(p_need_k_resets(phi, k) for k in range(1, max_resets + 1))
    return 0.5 + 0.5 * rescued


def expected_attempts_given_reset_success() -> float:
    """Mean number of stage-one attempts after a restored pair: sum_k k / 2^k."""
    terms, k = [], 1
    while (term := k * 0.5 ** k) >= 1e-18:
        terms.append(term)
        k += 1
    return math.fsum(terms)


class Conditioning(str, Enum):
    UNCONDITIONED = "unconditioned"
    POST_SELECTED_ON_DESIRED = "post-selected"


@dataclass
class DecisionTreeNode:
    label: str
    probability: float
    bits_on_path: int = 0
    copies_on_path: int = 0
    children: list[tuple[float, DecisionTreeNode]] = field(default_factory=list)
    stage_one_attempts: int = 0
    chain_depth: int | None = None
    amplitudes: tuple[complex, complex] | None = None
    completed: bool | None = None
    reason: str | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator[DecisionTreeNode]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(child for _, child in reversed(node.children))

    def leaves(self) -> Iterator[DecisionTreeNode]:
        return (n for n in self.walk() if n.is_leaf)

    def expectation(self, fn: Callable[[DecisionTreeNode], float]) -> float:
        return math.fsum(leaf.probability * fn(leaf) for leaf in self.leaves())

    def mass(self, pred: Callable[[DecisionTreeNode], bool]) -> float:
        return math.fsum(leaf.probability for leaf in self.leaves() if pred(leaf))

    def add(self, arm: float, child: DecisionTreeNode) -> DecisionTreeNode:
        self.children.append((arm, child))
        return child

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "label": self.label,
            "probability": self.probability,
            "bits_on_path": self.bits_on_path,
            "copies_on_path": self.copies_on_path,
        }
        if self.chain_depth is not None:
            d["chain_depth"] = self.chain_depth
        if self.completed is not None:
            d["completed"] = self.completed
        if self.reason is not None:
            d["reason"] = self.reason
        d["children"] = [{"arm_probability": arm, "node": child.to_dict()} for arm, child in self.children]
        return d


def _leaf(label, prob, bits, copies, attempts, **kw) -> DecisionTreeNode:
    return DecisionTreeNode(label, prob, bits, copies, stage_one_attempts=attempts, **kw)


def build_tree(
    phi: UnknownQubit,
    max_resets: int,
    strategy: Strategy | str = Strategy.RESET_RETRY,
    copies_available: int | None = None,
) -> DecisionTreeNode:
    """Exact enumeration of every path of the protocol.

    Arms with exactly zero probability are omitted.
    """
    strategy = Strategy(strategy)
    if max_resets < 0:
        raise ValueError("max_resets must be >= 0")
    budget = 0 if strategy is Strategy.CONVENTIONAL else max_resets
    chain = reset_recursion(phi, budget)
    conventional = strategy is Strategy.CONVENTIONAL

    def has_copy(node: DecisionTreeNode) -> bool:
        return copies_available is None or node.copies_on_path < copies_available

    def truncate(node: DecisionTreeNode, reason: str) -> None:
        node.add(1.0, _leaf("TRUNCATED", node.probability, node.bits_on_path, node.copies_on_path,
                            node.stage_one_attempts, chain_depth=node.chain_depth,
                            completed=False, reason=reason))

    def stage_two(node: DecisionTreeNode, extra_bits: int, first: int) -> None:
        for outcome in (0, 1):
            node.add(0.5, _leaf(f"BOB_PHI{first + outcome}", node.probability * 0.5,
                                node.bits_on_path + extra_bits + 1, node.copies_on_path,
                                node.stage_one_attempts, completed=True))

    def stage_one(node: DecisionTreeNode, resets_left: int) -> None:
        if not has_copy(node):
            truncate(node, "copies-exhausted")
            return
        copies = node.copies_on_path + 1
        attempts = node.stage_one_attempts + 1
        desired = node.add(0.5, DecisionTreeNode(
            "DESIRED", node.probability * 0.5, node.bits_on_path, copies,
            stage_one_attempts=attempts, amplitudes=(phi.a, phi.b)))
        stage_two(desired, 1 if conventional else 0, 0)
        undesired = node.add(0.5, DecisionTreeNode(
            "UNDESIRED_0", node.probability * 0.5, node.bits_on_path, copies,
            stage_one_attempts=attempts, chain_depth=0, amplitudes=(phi.a, phi.b)))
        undesired_branch(undesired, resets_left)

    def undesired_branch(node: DecisionTreeNode, resets_left: int) -> None:
        k = node.chain_depth
        if conventional:
            stage_two(node, 1, 2)
            return
        if resets_left == 0 or (strategy is Strategy.ABANDON_ON_FAIL and k > 0):
            if strategy is Strategy.ABANDON_ON_FAIL or k > 0:
                truncate(node, "abandoned")
            else:
                stage_two(node, 1, 2)
            return
        if not has_copy(node):
            truncate(node, "copies-exhausted")
            return
        p = chain.p(k)
        copies = node.copies_on_path + 1
        if p > 0:
            ok = node.add(p, DecisionTreeNode(
                "RESET_SUCCESS", node.probability * p, node.bits_on_path, copies,
                stage_one_attempts=node.stage_one_attempts))
            stage_one(ok, resets_left - 1)
        if p < 1:
            nxt = chain.entries[k + 1]
            fail = node.add(1 - p, DecisionTreeNode(
                f"UNDESIRED_{k + 1}", node.probability * (1 - p), node.bits_on_path, copies,
                stage_one_attempts=node.stage_one_attempts, chain_depth=k + 1,
                amplitudes=(nxt.a, nxt.b)))
            undesired_branch(fail, resets_left - 1)

    root = DecisionTreeNode("ROOT", 1.0)
    stage_one(root, budget)
    return root


def credited_one_bit_mass(tree: DecisionTreeNode) -> float:
    """Tree-side counterpart of :func:`one_bit_probability`.

    Mass of the first stage one's DESIRED node plus every RESET_SUCCESS node
    reached while still on the first pair.
    """
    return math.fsum(
        n.probability for n in tree.walk()
        if n.stage_one_attempts == 1 and n.label in ("DESIRED", "RESET_SUCCESS")
    )


def phi_state_probabilities(
    phi: UnknownQubit, max_resets: int, strategy: Strategy | str = Strategy.RESET_RETRY
) -> tuple[float, float, float, float]:
    tree = build_tree(phi, max_resets, strategy)
    p = [tree.mass(lambda n, i=i: n.label == f"BOB_PHI{i}") for i in range(4)]
    spoiled = tree.mass(lambda n: n.label == "TRUNCATED" and n.chain_depth is not None)
    p[2] += spoiled / 2
    p[3] += spoiled / 2
    return tuple(p)


def bob_marginal(
    phi: UnknownQubit,
    max_resets: int,
    conditioning: Conditioning | str = Conditioning.UNCONDITIONED,
    strategy: Strategy | str = Strategy.RESET_RETRY,
) -> float:
    """Probability that Bob reads 0 when nothing is communicated.

    Alice stops at the first desired form (kept) or when she can no longer
    reset an undesired pair (discarded). Desired a|00>+b|11> gives Bob
    P(0) = |a|^2; an undesired pair a_k|11>+b_k|00> gives |b_k|^2.
    """
    conditioning = Conditioning(conditioning)
    tree = build_tree(phi, max_resets, strategy)
    kept = 0.0
    kept_p0 = []
    dropped_p0 = []
    for node in tree.walk():
        if node.label == "DESIRED":
            kept += node.probability
            kept_p0.append(node.probability * abs(node.amplitudes[0]) ** 2)
        elif node.label.startswith("UNDESIRED") and all(
            c.label.startswith("BOB_PHI") or c.label == "TRUNCATED" for _, c in node.children
        ):
            dropped_p0.append(node.probability * abs(node.amplitudes[1]) ** 2)
    if conditioning is Conditioning.UNCONDITIONED:
        return math.fsum(kept_p0 + dropped_p0)
    return math.fsum(kept_p0) / kept


def keep_fraction(phi: UnknownQubit, max_resets: int, strategy: Strategy | str = Strategy.RESET_RETRY) -> float:
    tree = build_tree(phi, max_resets, strategy)
    return math.fsum(n.probability for n in tree.walk() if n.label == "DESIRED")


@dataclass(frozen=True)
class CostSummary:
    h_t: float
    one_bit_prob: float
    expected_copies: float
    phi_probs: tuple[float, float, float, float]
    expected_attempts_given_reset_success: float
    expected_bits: float
    completed_one_bit_prob: float
    abandon_prob: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "h_t": self.h_t,
            "one_bit_prob": self.one_bit_prob,
            "expected_copies": self.expected_copies,
            "phi_probs": list(self.phi_probs),
            "expected_attempts_given_reset_success": self.expected_attempts_given_reset_success,
            "expected_bits": self.expected_bits,
            "completed_one_bit_prob": self.completed_one_bit_prob,
            "abandon_prob": self.abandon_prob,
        }


def cost_summary(
    phi: UnknownQubit, max_resets: int, strategy: Strategy | str = Strategy.RESET_RETRY
) -> CostSummary:
    strategy = Strategy(strategy)
    tree = build_tree(phi, max_resets, strategy)
    resets = 0 if strategy is Strategy.CONVENTIONAL else max_resets
    return CostSummary(
        h_t=entropy_ht(phi),
        one_bit_prob=one_bit_probability(phi, resets),
        expected_copies=tree.expectation(lambda n: n.copies_on_path),
        phi_probs=phi_state_probabilities(phi, max_resets, strategy),
        expected_attempts_given_reset_success=expected_attempts_given_reset_success(),
        expected_bits=tree.expectation(lambda n: n.bits_on_path),
        completed_one_bit_prob=tree.mass(lambda n: n.completed is True and n.bits_on_path == 1),
        abandon_prob=tree.mass(lambda n: n.reason == "abandoned"),
    )


def tree_to_dot(tree: DecisionTreeNode) -> str:
    """Graphviz DOT text for the tree; leaf probabilities and bit/copy counts in node labels."""
    lines = ["digraph decision_tree {", "  node [shape=box];"]
    ids: dict[int, str] = {}
    for i, node in enumerate(tree.walk()):
        ids[id(node)] = f"n{i}"
        text = f"{node.label}\\np={node.probability:.6g}\\nbits={node.bits_on_path} copies={node.copies_on_path}"
        attrs = f'label="{text}"'
        if node.label.startswith("BOB_PHI"):
            attrs += ", color=red"
        lines.append(f"  n{i} [{attrs}];")
    for node in tree.walk():
        for arm, child in node.children:
            lines.append(f'  {ids[id(node)]} -> {ids[id(child)]} [label="{arm:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
