"""State abstraction: symbols, ordering, costs, mutation enumeration."""

import pytest

from mpfuzz.mempool import fill_normal, new_pool, policy_preset
from mpfuzz.symbolic import (InfeasibleSymbol, InstantiationContext,
                             SymbolizedTx, cost, enumerate_mutations,
                             execute_input, instantiate, opcost, parse_input,
                             serialize_input, symbolize_state)
from mpfuzz.txmodel import Transaction, adversarial


def run(policy_name, text, m=None):
    pol = policy_preset(policy_name)
    fill = m if m is not None else pol.capacity
    return execute_input(pol, parse_input(text), fill_count=fill)


def test_symbol_serialize_parse_roundtrip():
    for text in ("P", "P0 C1 P0 C1 C1", "F F P1 L1 O2 R1 E"):
        seq = parse_input(text)
        assert serialize_input(seq) == text


def test_parse_rejects_unknown_symbols():
    with pytest.raises(ValueError):
        parse_input("Q")


def test_symbolize_full_benign_pool():
    pol = policy_preset("geth-legacy-reduced(6)")
    state = new_pool(pol)
    fill_normal(state, 6)
    assert symbolize_state(state).key() == "NNNNNN"


def test_symbolize_orders_groups_by_parent_price():
    # Two adversarial chains plus one benign survivor; groups are listed
    # ascending by parent price, parent before children.
    state, _, _, _ = run("geth-legacy-reduced(6)", "P P0 C2")
    sym = symbolize_state(state)
    assert sym.key() == "NNNPCP"


def test_symbolize_marks_latent_child():
    # A child whose cumulative chain value exceeds the balance is latent.
    pol = policy_preset("geth-legacy-reduced(3)")
    state = new_pool(pol)
    a = adversarial(1)
    assert state.admit_mut(Transaction(a, 1, 1, 4)).admitted
    assert state.admit_mut(Transaction(a, 2, 3, 7)).admitted
    assert symbolize_state(state).key() == "PLE"


def test_empty_slots_symbolize_as_e_padding():
    pol = policy_preset("geth-legacy-reduced(3)")
    state = new_pool(pol)
    fill_normal(state, 2)
    assert symbolize_state(state).key() == "NNE"


def test_cost_and_opcost_examples():
    # Costs count a benign slot at 3, a parent at its price, a child at
    # capacity+4; only the operational cost discounts child slots to 1.
    vectors = {
        "": (9, 9, "NNN"),
        "P": (10, 10, "NNP"),
        "P C1": (14, 8, "NPC"),
        "P P0": (12, 12, "NPP"),
    }
    pol = policy_preset("geth-legacy-reduced(3)")
    for text, (c, oc, key) in vectors.items():
        seq = parse_input(text) if text else ()
        state, _, _, _ = execute_input(pol, seq, fill_count=3)
        sym = symbolize_state(state)
        assert sym.key() == key, text
        assert cost(sym) == c, text
        assert opcost(sym) == oc, text


def test_enumeration_order_root():
    pol = policy_preset("geth-legacy-reduced(3)")
    state, ctx, _, _ = execute_input(pol, (), fill_count=3)
    cands = [c.serialize() for c in enumerate_mutations(state, ctx)]
    assert cands == ["P", "F"]


def test_enumeration_order_with_resident_sender():
    state, ctx, _, _ = run("geth-legacy-reduced(3)", "P", m=3)
    cands = [c.serialize() for c in enumerate_mutations(state, ctx)]
    assert cands == ["P0", "P1", "C1", "O1", "F"]


def test_future_pruned_when_quota_full():
    pol = policy_preset("geth-1.11-reduced(3,1,2,2)")
    state, ctx, _, _ = execute_input(pol, parse_input("F"), fill_count=3)
    cands = [c.serialize() for c in enumerate_mutations(state, ctx)]
    assert "F" not in cands


def test_instantiate_infeasible_child_without_parent():
    pol = policy_preset("geth-legacy-reduced(3)")
    state = new_pool(pol)
    fill_normal(state, 3)
    ctx = InstantiationContext(capacity=3, benign_next=4)
    with pytest.raises(InfeasibleSymbol):
        instantiate(SymbolizedTx("C", 1), state, ctx)


def test_instantiate_parent_price_ladder():
    # Consecutive fresh parents take ascending prices starting at 4.
    pol = policy_preset("geth-legacy-reduced(6)")
    state, _, txs, _ = run("geth-legacy-reduced(6)", "P P P")
    assert [t.gas_price for t in txs] == [4, 5, 6]


def test_execute_input_returns_outcomes():
    state, ctx, txs, outcomes = run("geth-legacy-reduced(3)", "P O1", m=3)
    assert outcomes[0].admitted
    assert not outcomes[1].admitted
    assert len(txs) == 2


def test_offsets_do_not_change_symbolization():
    pol = policy_preset("geth-legacy-reduced(6)")
    seq = parse_input("P P0 C1 F")
    s1, _, _, o1 = execute_input(pol, seq, 6, benign_offset=0, adv_offset=0)
    s2, _, _, o2 = execute_input(pol, seq, 6, benign_offset=40, adv_offset=7)
    assert symbolize_state(s1).key() == symbolize_state(s2).key()
    assert [o.kind for o in o1] == [o.kind for o in o2]
