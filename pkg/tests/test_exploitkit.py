"""Attack pattern library, extension, and block-level replay."""

import json
from fractions import Fraction

import pytest

from mpfuzz.exploitkit import (Exploit, ExtensionFailed, PatternIncompatible,
                               WorkloadSpec, XT_PATTERNS, base_price_step,
                               base_price_step_float, dedup, extend,
                               generate_xt, pattern_compatible, pattern_kind,
                               replay, run_pattern, simulate_xt8a,
                               vulnerability_matrix)
from mpfuzz.fuzzer import run_fuzzer
from mpfuzz.mempool import VULNERABILITY_MATRIX, policy_preset
from mpfuzz.oracle import OracleConfig


def test_pattern_names_and_kinds():
    assert list(XT_PATTERNS) == [f"XT{i}" for i in range(1, 10)]
    assert pattern_kind("XT1") == "Eviction"
    assert pattern_kind("XT8") == "Locking"
    assert pattern_kind("XT9") == "Locking"


def test_pattern_compatibility_gates():
    geth = policy_preset("geth-legacy-reduced(6)")
    reth = policy_preset("reth-fifo-reduced(6)")
    assert pattern_compatible("XT1", geth) is None
    assert pattern_compatible("XT7", geth) is not None
    assert pattern_compatible("XT8", reth) is None
    assert pattern_compatible("XT3", reth) is not None


def test_generate_xt1_all_futures():
    pol = policy_preset("geth-legacy-reduced(6)")
    txs = generate_xt("XT1", pol)
    assert len(txs) == 6
    assert all(t.gas_price == 10 for t in txs)
    assert all(t.nonce > 1 for t in txs)


def test_generate_incompatible_raises():
    with pytest.raises(PatternIncompatible):
        generate_xt("XT7", policy_preset("geth-legacy-reduced(6)"))


def test_run_pattern_xt1_zero_asym():
    res = run_pattern("XT1", policy_preset("geth-legacy-reduced(6)"))
    assert res.success and res.all_admitted
    assert res.verdict.asym == 0


def test_run_pattern_failure_is_reported_not_raised():
    res = run_pattern("XT7", policy_preset("geth-legacy-reduced(6)"))
    assert not res.success
    assert res.reason


def test_vulnerability_matrix_smoke():
    pols = {n: policy_preset(f"{n}-reduced(6)")
            for n in ("geth-legacy", "reth-fifo")}
    mat = vulnerability_matrix(pols)
    assert mat["geth-legacy"]["XT1"].success
    assert not mat["geth-legacy"]["XT8"].success
    assert mat["reth-fifo"]["XT8"].success


def find_short_exploit():
    res = run_fuzzer(policy_preset("geth-legacy-reduced(3)"),
                     OracleConfig(epsilon=0.2), stop_on_first=True)
    return res.exploits[0]


def test_extend_preserves_verdict():
    short = find_short_exploit()
    big = extend(short, policy_preset("geth-legacy-reduced(6)"))
    assert big.verdict.triggered
    assert big.verdict.asym == short.verdict.asym == 0


def test_extend_divergence_raises_with_trace():
    short = find_short_exploit()
    # The same schedule against a policy without future-path eviction
    # diverges: the replicated transactions cannot all be admitted.
    with pytest.raises(ExtensionFailed) as exc:
        extend(short, policy_preset("reth-fifo-reduced(6)"))
    assert exc.value.trace


def test_exploit_json_roundtrip(tmp_path):
    e = find_short_exploit()
    p = tmp_path / "e.json"
    e.save(str(p))
    back = Exploit.load(str(p))
    assert back.to_json() == e.to_json()


def test_dedup_by_kind_and_sequence():
    e = find_short_exploit()
    assert len(dedup([e, e])) == 1


def test_replay_reports_damage():
    pol = policy_preset("geth-legacy-reduced(6)")
    txs = generate_xt("XT1", pol)
    rep = replay(txs, pol, WorkloadSpec(txs_per_block=2,
                                        block_tx_capacity=2), blocks=6)
    assert 0.0 <= rep.success_rate <= 1.0
    assert rep.success_rate > 0


def test_base_price_step_empty_block_decays_by_seven_eighths():
    assert base_price_step(800, 0, 8 * 21000) == 700
    assert base_price_step_float(800.0, 0, 8 * 21000) == 700.0


def test_base_price_step_full_block_grows():
    limit = 8 * 21000
    assert base_price_step(800, limit, limit) == 900
    assert base_price_step(1, 0, limit) == 1  # floor


def test_base_price_step_rejects_bad_gas():
    with pytest.raises(ValueError):
        base_price_step(100, -1, 21000)


def test_simulate_xt8a_decay_and_lock():
    pol = policy_preset("reth-fifo-reduced(6)")
    rep = simulate_xt8a(pol, WorkloadSpec(txs_per_block=6,
                                          block_tx_capacity=6))
    assert rep.feasible
    assert rep.base_price_series[35] == pytest.approx(100.0 * 0.875 ** 35, rel=1e-9)
    lock = [r for r in rep.series if r["phase"] == "lock"]
    assert lock, "no lock phase blocks"
    assert all(r["benign_fees"] == 0 for r in lock[3:])


def test_simulate_xt8a_infeasible_when_floor_stays_high():
    pol = policy_preset("reth-fifo-reduced(6)")
    rep = simulate_xt8a(pol, WorkloadSpec(), eviction_blocks=1)
    assert not rep.feasible
