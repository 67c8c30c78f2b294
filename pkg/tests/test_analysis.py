import math

import pytest
from hypothesis import given, strategies as st

from conftest import PLUS, R2, WORKED, qubits, random_qubits
from oracle import compare_with_tree, enumerate_paths
from telereset import analysis as an
from telereset import statevec as sv
from telereset.protocol import Strategy, UnknownQubit

SKEW = UnknownQubit(math.sqrt(3) / 2, 0.5)
ZERO = UnknownQubit(1, 0)
TIGHT = 1e-12


def assert_matches_oracle(phi, resets, strategy="reset-retry", copies=None):
    tree = an.build_tree(phi, resets, strategy, copies)
    worst, compared = compare_with_tree(tree, enumerate_paths(phi.a, phi.b, resets, strategy, copies))
    assert compared and worst <= TIGHT


def test_chain_fixed_point_and_corner():
    assert all(e.p_success == 0.5 for e in an.reset_recursion(PLUS, 2).entries)
    chain = an.reset_recursion(ZERO, 3)
    assert chain.degenerate and all(e.p_success == 0 for e in chain.entries)


def test_chain_skewed_example():
    e = an.reset_recursion(SKEW, 1).entries
    assert e[0].p_success == pytest.approx(0.375, abs=TIGHT)
    assert abs(e[1].a - 3 / math.sqrt(10)) < TIGHT and abs(e[1].b - 1 / math.sqrt(10)) < TIGHT
    assert e[1].p_success == pytest.approx(0.18, abs=TIGHT)


def test_chain_matches_circuit_trace():
    # failed reset traced on the statevector, amplitudes read off the pair
    a, b = SKEW.a, SKEW.b
    state = sv.apply_cnot(sv.tensor(sv.PureState(1, (a, b)), sv.PureState(2, (b, 0, 0, a))), 0, 1)
    _, post = sv.collapse(state, 1, 1)
    pair = sv.apply_gate(sv.discard_qubit(post, 1, 1), "X", 0)
    e1 = an.reset_recursion(SKEW, 1).entries[1]
    assert abs(pair.amps[3] - e1.a) < TIGHT and abs(pair.amps[0] - e1.b) < TIGHT


@pytest.mark.parametrize("phi,expected", [(PLUS, 1.25), (ZERO, 1.5), (WORKED, 1.25)])
def test_entropy_examples(phi, expected):
    assert an.entropy_ht(phi) == pytest.approx(expected, abs=TIGHT)


def test_one_bit_probability_examples():
    assert an.one_bit_probability(SKEW, 0) == 0.5
    assert an.one_bit_probability(WORKED, 1) == pytest.approx(0.75, abs=TIGHT)
    assert an.one_bit_probability(ZERO, 5) == 0.5


def test_p_need_k_examples():
    assert an.p_need_k_resets(PLUS, 3) == pytest.approx(0.125, abs=TIGHT)
    assert an.p_need_k_resets(PLUS, 1) == pytest.approx(0.5, abs=TIGHT)
    assert an.p_need_k_resets(SKEW, 2) == pytest.approx((1 - 0.375) * 0.18, abs=TIGHT)
    with pytest.raises(ValueError):
        an.p_need_k_resets(PLUS, 0)


def test_conventional_tree_four_quarter_leaves():
    tree = an.build_tree(SKEW, 0, Strategy.CONVENTIONAL)
    leaves = list(tree.leaves())
    assert sorted(l.label for l in leaves) == [f"BOB_PHI{i}" for i in range(4)]
    assert all(abs(l.probability - 0.25) < TIGHT and l.bits_on_path == 2 for l in leaves)


def test_worked_example_tree():
    tree = an.build_tree(WORKED, 1)
    assert an.credited_one_bit_mass(tree) == pytest.approx(0.75, abs=TIGHT)
    # restored pairs used exactly three copies to finish with one bit
    restored = [n for n in tree.leaves() if n.bits_on_path == 1 and n.stage_one_attempts == 2]
    assert restored and all(n.copies_on_path == 3 for n in restored)


def test_phi_probabilities():
    assert an.phi_state_probabilities(SKEW, 0) == pytest.approx((0.25,) * 4, abs=TIGHT)
    p = an.phi_state_probabilities(WORKED, 1)
    assert p[0] + p[1] == pytest.approx(0.625, abs=TIGHT)
    assert p[2] + p[3] == pytest.approx(0.375, abs=TIGHT)
    for depth in (1, 3, 6):
        q = an.phi_state_probabilities(ZERO, depth)
        assert q[0] + q[1] == pytest.approx(0.5, abs=TIGHT)


def test_bob_marginal_examples():
    biased = UnknownQubit(math.sqrt(0.9), math.sqrt(0.1))
    assert an.bob_marginal(biased, 1, "post-selected") == pytest.approx(0.9, abs=TIGHT)
    assert an.bob_marginal(biased, 1, "unconditioned") == pytest.approx(0.5, abs=TIGHT)
    for c in an.Conditioning:
        assert an.bob_marginal(PLUS, 2, c) == pytest.approx(0.5, abs=TIGHT)


def test_expected_attempts():
    assert an.expected_attempts_given_reset_success() == 2.0


def test_expected_attempts_from_tree():
    # walk the restore-and-retry spine, using only the tree's own arm probabilities
    tree = an.build_tree(PLUS, 60, Strategy.ABANDON_ON_FAIL)
    node = next(c for _, c in tree.children if c.label == "UNDESIRED_0")
    node = next(c for _, c in node.children if c.label == "RESET_SUCCESS")
    reach, total, m = 1.0, 0.0, 0
    while True:
        m += 1
        arms = dict((c.label, (arm, c)) for arm, c in node.children)
        if "DESIRED" not in arms:
            break
        total += m * reach * arms["DESIRED"][0]
        arm_u, und = arms["UNDESIRED_0"]
        reach *= arm_u
        nxt = [c for _, c in und.children if c.label == "RESET_SUCCESS"]
        if not nxt:
            break
        node = nxt[0]
    assert total == pytest.approx(2.0, abs=1e-9)


def test_tree_dot_is_well_formed():
    dot = an.tree_to_dot(an.build_tree(WORKED, 2))
    assert dot.startswith("digraph") and dot.rstrip().endswith("}")


@pytest.mark.parametrize("strategy", list(Strategy))
@pytest.mark.parametrize("resets", [0, 1, 2, 4])
def test_oracle_named_states(strategy, resets):
    for phi in (WORKED, PLUS, SKEW, ZERO):
        assert_matches_oracle(phi, resets, strategy)


def test_oracle_with_copy_limit():
    for copies in (1, 2, 3, 5):
        assert_matches_oracle(SKEW, 4, "reset-retry", copies)


@given(qubits(), st.integers(0, 4), st.sampled_from([s.value for s in Strategy]))
def test_oracle_random(phi, resets, strategy):
    assert_matches_oracle(phi, resets, strategy)


@given(qubits(), st.integers(0, 6), st.sampled_from(list(Strategy)))
def test_leaves_sum_to_one(phi, resets, strategy):
    tree = an.build_tree(phi, resets, strategy)
    assert abs(tree.mass(lambda n: True) - 1) < TIGHT
    assert abs(sum(an.phi_state_probabilities(phi, resets, strategy)) - 1) < TIGHT


@given(qubits())
def test_bounds(phi):
    assert 2 * phi.ab_sq <= 0.5 + TIGHT
    assert 1.25 - TIGHT <= an.entropy_ht(phi) <= 1.5 + TIGHT
    assert all(e.p_success <= 0.5 + TIGHT for e in an.reset_recursion(phi, 8).entries)


@given(qubits(), st.integers(0, 7))
def test_recursion_consistent_under_restart(phi, k):
    chain = an.reset_recursion(phi, k + 1)
    e = chain.entries[k]
    restarted = an.reset_recursion(UnknownQubit(e.a, e.b), 1).entries[1]
    nxt = chain.entries[k + 1]
    assert abs(restarted.a - nxt.a) < TIGHT and abs(restarted.b - nxt.b) < TIGHT
    assert abs(restarted.p_success - nxt.p_success) < TIGHT


@given(qubits(min_weight=1e-6), st.integers(1, 5))
def test_asymmetry(phi, resets):
    p = an.phi_state_probabilities(phi, resets)
    assert p[0] + p[1] > p[2] + p[3]


@given(qubits(), st.integers(0, 5), st.sampled_from(list(Strategy)))
def test_no_signaling(phi, resets, strategy):
    assert abs(an.bob_marginal(phi, resets, "unconditioned", strategy) - 0.5) < TIGHT
    assert abs(an.bob_marginal(phi, resets, "post-selected", strategy) - abs(phi.a) ** 2) < TIGHT


@given(qubits(), st.integers(1, 4))
def test_one_bit_probability_matches_tree(phi, resets):
    tree = an.build_tree(phi, resets)
    assert abs(an.credited_one_bit_mass(tree) - an.one_bit_probability(phi, resets)) < TIGHT


def test_random_batch_oracle():
    for i, phi in enumerate(random_qubits(40, 11)):
        assert_matches_oracle(phi, i % 4, [s.value for s in Strategy][i % 3])
