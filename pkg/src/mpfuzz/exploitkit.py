"""Named attack patterns, exploit records, extension to full scale, and
replay with block building and a protocol fee floor.

Patterns XT1..XT9 are the known mempool-service-denial schedules: XT1-XT7
evict a benign-resident pool at a discount, XT8/XT9 lock an empty pool
against benign arrivals.  Each generator rehearses against a scratch pool
where the schedule length depends on runtime pool reactions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .mempool import (EvictionRule, MempoolPolicy, MempoolState, TurningRule,
                      fill_normal, new_pool)
from .oracle import (OracleConfig, OracleVerdict, chargeable_fees,
                     check_eviction, check_locking, classify_tp_fp,
                     format_ratio, total_fees)
from .symbolic import (SymbolizedTx, parse_input, serialize_input,
                       symbolize_state)
from .txmodel import (GAS_PER_TX, Role, Transaction, adversarial, benign)

EXPLOIT_SCHEMA_VERSION = 1

XT_PATTERNS = ("XT1", "XT2", "XT3", "XT4", "XT5", "XT6", "XT7", "XT8", "XT9")
LOCKING_PATTERNS = frozenset({"XT8", "XT9"})


class PatternIncompatible(Exception):
    """The policy lacks the mechanism this pattern exploits."""


class ExtensionFailed(Exception):
    def __init__(self, message: str, trace: Optional[List[dict]] = None):
        super().__init__(message)
        self.trace = trace or []


@dataclass
class Exploit:
    kind: str  # Eviction | Locking
    pattern: Optional[str]
    mut_config: MempoolPolicy
    symbol_sequence: Tuple[SymbolizedTx, ...]
    concrete_txs: List[Transaction]
    verdict: OracleVerdict
    end_state: str = ""

    def to_json(self) -> dict:
        return {
            "version": EXPLOIT_SCHEMA_VERSION,
            "kind": self.kind,
            "pattern": self.pattern,
            "mut_config": self.mut_config.to_json(),
            "symbol_sequence": serialize_input(self.symbol_sequence),
            "concrete_txs": [tx.to_json() for tx in self.concrete_txs],
            "verdict": self.verdict.to_json(),
            "end_state": self.end_state,
        }

    @staticmethod
    def from_json(obj: dict) -> "Exploit":
        if obj.get("version") != EXPLOIT_SCHEMA_VERSION:
            raise ValueError(f"unsupported exploit version: "
                             f"{obj.get('version')!r}")
        return Exploit(
            kind=obj["kind"],
            pattern=obj.get("pattern"),
            mut_config=MempoolPolicy.from_json(obj["mut_config"]),
            symbol_sequence=parse_input(obj["symbol_sequence"]),
            concrete_txs=[Transaction.from_json(t)
                          for t in obj["concrete_txs"]],
            verdict=OracleVerdict.from_json(obj["verdict"]),
            end_state=obj.get("end_state", ""),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)
            f.write("\n")

    @staticmethod
    def load(path: str) -> "Exploit":
        with open(path) as f:
            return Exploit.from_json(json.load(f))


def dedup(exploits: Sequence[Exploit]) -> List[Exploit]:
    seen = set()
    out = []
    for e in exploits:
        key = (e.kind, serialize_input(e.symbol_sequence))
        if key not in seen:
            seen.add(key)
            out.append(e)
    return out


# -- pattern generators ----------------------------------------------------

def pattern_kind(pattern: str) -> str:
    return "Locking" if pattern in LOCKING_PATTERNS else "Eviction"


def pattern_compatible(pattern: str, policy: MempoolPolicy) -> Optional[str]:
    """None when the policy has the exploited mechanism, else a reason."""
    if pattern == "XT3":
        if policy.sender_limit_threshold <= 0:
            return "needs a positive sender-limit threshold"
        if policy.eviction_rule is not EvictionRule.PRICE_ANY:
            return "needs price-based any-victim eviction"
    if pattern == "XT5":
        if policy.eviction_rule is not EvictionRule.PRICE_ANY or \
                policy.turning_rule is not TurningRule.DEMOTE_TO_FUTURE:
            return "needs price eviction with demote-to-future turning"
    if pattern == "XT6":
        if policy.eviction_rule is not EvictionRule.PRICE_ANY or \
                policy.turning_rule is not TurningRule.DEMOTE_TO_FUTURE or \
                policy.sender_limit_threshold <= 0:
            return "needs geth-style eviction, turning and sender limit"
    if pattern == "XT7" and \
            policy.eviction_rule is not EvictionRule.ACCOUNT_MIN_PRICE:
        return "needs account-min-price eviction"
    if pattern == "XT8" and policy.eviction_rule is not EvictionRule.NONE:
        return "needs a declining (no-eviction) full pool"
    if pattern == "XT9" and \
            policy.eviction_rule is not EvictionRule.PRICE_CHILDLESS_ONLY:
        return "needs childless-only eviction"
    return None


def _sender_split(m: int, py2: int) -> Tuple[int, int]:
    """(senders, txs per sender) filling m slots under a per-sender cap."""
    if py2 >= m:
        return 1, m
    k = math.ceil(m / py2)
    return k, m // k


def generate_xt(pattern: str, policy: MempoolPolicy) -> List[Transaction]:
    reason = pattern_compatible(pattern, policy)
    if reason is not None:
        raise PatternIncompatible(f"{pattern} on {policy.name}: {reason}")
    m = policy.capacity
    py2 = policy.sender_limit
    txs: List[Transaction] = []
    if pattern == "XT1":
        return [Transaction(adversarial(i), m + 1, 1, m + 4)
                for i in range(1, m + 1)]
    if pattern == "XT2":
        k, l = _sender_split(m, py2)
        for s in range(1, k + 1):
            txs.append(Transaction(adversarial(s), 1, m - 1, 4))
            txs.extend(Transaction(adversarial(s), n, m - 1, m + 4)
                       for n in range(2, l + 1))
        rest = m - k * l
        if rest > 0:
            s = k + 1
            txs.append(Transaction(adversarial(s), 1, m - 1, 4))
            txs.extend(Transaction(adversarial(s), n, m - 1, m + 4)
                       for n in range(2, rest + 1))
        return txs
    if pattern == "XT3":
        f = max(1, m - policy.sender_limit_threshold)
        txs = [Transaction(adversarial(i), m + 1, 1, m + 4)
               for i in range(1, f + 1)]
        x = adversarial(f + 1)
        txs.append(Transaction(x, 1, m - 1, 4))
        txs.extend(Transaction(x, n, m - 1, m + 4)
                   for n in range(2, m - f + 1))
        return txs
    if pattern == "XT4":
        k, l = _sender_split(m, py2)
        for s in range(1, k + 1):
            txs.append(Transaction(adversarial(s), 1, 1, 4))
            txs.extend(Transaction(adversarial(s), n, 1, m + 4)
                       for n in range(2, l + 1))
        # Replacements re-spend the whole balance, stranding every child.
        txs.extend(Transaction(adversarial(s), 1, m, 5)
                   for s in range(1, k + 1))
        return txs
    if pattern == "XT5":
        k, l = _sender_split(m, py2)
        for s in range(1, k + 1):
            txs.append(Transaction(adversarial(s), 1, 1, 4))
            txs.extend(Transaction(adversarial(s), n, 1, 6)
                       for n in range(2, l + 1))
        txs.extend(Transaction(adversarial(k + i), 1, 1, 5)
                   for i in range(1, k + 1))
        return txs
    if pattern == "XT6":
        return _generate_xt6(policy)
    if pattern == "XT7":
        a = adversarial(1)
        txs.append(Transaction(a, 1, 1, 4))
        txs.extend(Transaction(a, n, 1, m + 4) for n in range(2, m + 1))
        txs.extend(Transaction(adversarial(1 + i), 1, 1, 5)
                   for i in range(1, m))
        return txs
    if pattern == "XT8":
        return [Transaction(adversarial(i), 1, 1, 1) for i in range(1, m + 1)]
    if pattern == "XT9":
        a = adversarial(1)
        txs = [Transaction(a, n, 1, 1) for n in range(1, m)]
        txs.append(Transaction(a, m, 1, 7))
        return txs
    raise ValueError(f"unknown pattern: {pattern}")


def _generate_xt6(policy: MempoolPolicy) -> List[Transaction]:
    """Four-step schedule sized by rehearsal against a scratch pool.

    Step 1 refills the pool with cheap parent/child sequences, step 2
    walks a single sender's chain over the parents until the pool stops
    admitting, step 3 is folded into that walk, and step 4 places one
    final transaction that strands the walker's own chain.
    """
    m = policy.capacity
    py2 = policy.sender_limit
    k = max(1, m // py2)
    txs: List[Transaction] = []
    scratch = new_pool(policy)
    fill_normal(scratch, m)
    for s in range(1, k + 1):
        seq = [Transaction(adversarial(s), 1, 1, 4)]
        seq.extend(Transaction(adversarial(s), n, 1, 6)
                   for n in range(2, py2 + 1))
        txs.extend(seq)
    for tx in txs:
        scratch.admit_mut(tx)
    x = adversarial(k + 1)
    nonce = 1
    while True:
        tx = Transaction(x, nonce, 1, 5)
        probe = scratch.clone()
        if not probe.admit_mut(tx).admitted:
            break
        scratch.admit_mut(tx)
        txs.append(tx)
        nonce += 1
        if nonce > m:
            break
    txs.append(Transaction(adversarial(k + 2), 1, 1, 6))
    return txs


# -- pattern evaluation ----------------------------------------------------

@dataclass
class PatternResult:
    pattern: str
    policy: str
    success: bool
    all_admitted: bool
    verdict: Optional[OracleVerdict]
    reason: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "pattern": self.pattern,
            "policy": self.policy,
            "success": self.success,
            "all_admitted": self.all_admitted,
            "verdict": self.verdict.to_json() if self.verdict else None,
            "reason": self.reason,
        }


def run_pattern(pattern: str, policy: MempoolPolicy,
                cfg: Optional[OracleConfig] = None) -> PatternResult:
    """Execute a pattern schedule and score it.

    Success means the schedule ran exactly as scripted (every attack
    transaction admitted) and the damage condition holds: no initial
    benign resident survives (eviction), or every benign probe is
    declined by an all-adversarial pool (locking).
    """
    cfg = cfg or OracleConfig()
    try:
        txs = generate_xt(pattern, policy)
    except PatternIncompatible as exc:
        return PatternResult(pattern, policy.name, False, False, None,
                             reason=str(exc))
    state = new_pool(policy)
    if pattern_kind(pattern) == "Eviction":
        st0 = fill_normal(state, policy.capacity)
        all_admitted = all(state.admit_mut(tx).admitted for tx in txs)
        verdict = check_eviction(st0, state, cfg)
        return PatternResult(pattern, policy.name,
                             all_admitted and verdict.damage_ok,
                             all_admitted, verdict)
    all_admitted = all(state.admit_mut(tx).admitted for tx in txs)
    probe_state = state.clone()
    probes = fill_normal(probe_state, policy.capacity)
    admitted_probe_keys = {t.key() for t in probe_state.txs()}
    declined = [t for t in probes if t.key() not in admitted_probe_keys]
    verdict = check_locking(probe_state, declined, cfg)
    return PatternResult(pattern, policy.name,
                         all_admitted and verdict.damage_ok,
                         all_admitted, verdict)


def vulnerability_matrix(presets_to_policies: Dict[str, MempoolPolicy],
                         cfg: Optional[OracleConfig] = None
                         ) -> Dict[str, Dict[str, PatternResult]]:
    return {name: {p: run_pattern(p, pol, cfg) for p in XT_PATTERNS}
            for name, pol in presets_to_policies.items()}


# -- extension -------------------------------------------------------------

def _scale_value(v: int, m_short: int, m_target: int) -> int:
    for delta in (-1, 0, 1):
        if v == m_short + delta:
            return m_target + delta
    return v


def _scale_price(p: int, m_short: int, m_target: int) -> int:
    return m_target + 4 if p == m_short + 4 else p


def extend(short: Exploit, target: MempoolPolicy,
           cfg: Optional[OracleConfig] = None) -> Exploit:
    """Repeat a short exploit's admission events at full pool scale.

    Fresh-sender transactions are replicated by the capacity ratio; chain
    transactions follow each replica of their sender.  Any admission
    outcome that diverges in kind from the rehearsed one aborts with the
    divergence trace.
    """
    cfg = cfg or OracleConfig()
    m_s = short.mut_config.capacity
    m_t = target.capacity
    if m_t < m_s or m_t % m_s != 0:
        raise ExtensionFailed(
            f"target capacity {m_t} is not a multiple of {m_s}")
    ratio = m_t // m_s

    # Rehearse the short exploit to recover per-event outcome kinds.
    mut_state = new_pool(short.mut_config)
    if short.kind == "Eviction":
        fill_normal(mut_state, m_s)
    short_kinds = [mut_state.admit_mut(tx).kind for tx in short.concrete_txs]

    state = new_pool(target)
    st0: List[Transaction] = []
    if short.kind == "Eviction":
        st0 = fill_normal(state, m_t)
    sender_map: Dict[Tuple[str, int], List] = {}
    next_adv = 1
    out_txs: List[Transaction] = []
    trace: List[dict] = []

    for idx, (tx, expected) in enumerate(zip(short.concrete_txs,
                                             short_kinds)):
        skey = (tx.sender.role.value, tx.sender.index)
        fresh = skey not in sender_map
        if fresh:
            replicas = []
            for _ in range(ratio):
                # Benign replicas live above the fill range to avoid
                # colliding with the initial residents.
                replicas.append(adversarial(next_adv) if
                                tx.sender.role is Role.ADVERSARIAL
                                else benign(m_t + next_adv))
                next_adv += 1
            sender_map[skey] = replicas
        batch = []
        for replica in sender_map[skey]:
            nonce = m_t + 1 if tx.nonce == m_s + 1 else tx.nonce
            batch.append(Transaction(replica, nonce,
                                     _scale_value(tx.value, m_s, m_t),
                                     _scale_price(tx.gas_price, m_s, m_t)))
        for btx in batch:
            got = state.admit_mut(btx).kind
            ok = (got == "Declined") == (expected == "Declined")
            trace.append({"event": idx, "tx": btx.to_json(),
                          "expected": expected, "got": got})
            if not ok:
                raise ExtensionFailed(
                    f"admission diverged at event {idx}: expected "
                    f"{expected}, got {got}", trace)
            out_txs.append(btx)

    if short.kind == "Eviction":
        verdict = check_eviction(st0, state, cfg)
    else:
        probe_state = state.clone()
        probes = fill_normal(probe_state, m_t)
        admitted = {t.key() for t in probe_state.txs()}
        declined = [t for t in probes if t.key() not in admitted]
        verdict = check_locking(probe_state, declined, cfg)
    return Exploit(kind=short.kind, pattern=short.pattern,
                   mut_config=target,
                   symbol_sequence=short.symbol_sequence,
                   concrete_txs=out_txs, verdict=verdict,
                   end_state=symbolize_state(state).key()
                   if m_t <= 64 else "")


# -- replay and fee-floor dynamics ----------------------------------------

@dataclass
class WorkloadSpec:
    """Benign arrival stream: fresh single-transaction senders."""
    txs_per_block: int = 8
    price: int = 3
    value: int = 1
    block_tx_capacity: int = 8

    @property
    def block_gas_limit(self) -> int:
        return self.block_tx_capacity * GAS_PER_TX


@dataclass
class ReplayReport:
    success_rate: float
    cost_per_block: float
    benign_fees_per_block: float
    asym: Fraction
    blocks: int
    series: List[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "success_rate": self.success_rate,
            "cost_per_block": self.cost_per_block,
            "benign_fees_per_block": self.benign_fees_per_block,
            "asym": format_ratio(self.asym),
            "blocks": self.blocks,
            "series": self.series,
        }


def _run_workload(policy: MempoolPolicy, workload: WorkloadSpec,
                  blocks: int, attack_txs: Optional[List[Transaction]],
                  attack_block: int = 0):
    """Drive arrivals + block building; returns per-block fee series."""
    from .mempool import build_block
    state = new_pool(policy)
    series = []
    for b in range(blocks):
        if attack_txs is not None and b == attack_block:
            for tx in attack_txs:
                state.admit_mut(tx)
        fill_normal(state, workload.txs_per_block)
        included = build_block(state, workload.block_gas_limit)
        benign_fees = sum(t.fee() for t in included
                          if t.sender.role is Role.BENIGN)
        adv_fees = sum(t.fee() for t in included
                       if t.sender.role is Role.ADVERSARIAL)
        series.append({"block": b, "benign_fees": benign_fees,
                       "adversarial_fees": adv_fees,
                       "gas_used": len(included) * GAS_PER_TX})
    return series


def replay(exploit_txs: List[Transaction], policy: MempoolPolicy,
           workload: WorkloadSpec, blocks: int,
           attack_delay: float = 0.0) -> ReplayReport:
    """Measure damage and cost of an attack against a benign workload.

    `attack_delay` is the fraction of the block slot after which the
    attack fires; with the default 0 it lands right after a block, before
    the next arrivals.
    """
    attack_block = min(blocks - 1, int(attack_delay)) if blocks else 0
    base = _run_workload(policy, workload, blocks, None)
    hit = _run_workload(policy, workload, blocks, exploit_txs, attack_block)
    base_benign = sum(r["benign_fees"] for r in base)
    hit_benign = sum(r["benign_fees"] for r in hit)
    adv_total = sum(r["adversarial_fees"] for r in hit)
    success = 0.0
    if base_benign > 0:
        success = max(0.0, 1.0 - hit_benign / base_benign)
    asym = Fraction(adv_total, base_benign) if base_benign else Fraction(0)
    return ReplayReport(success_rate=success,
                        cost_per_block=adv_total / blocks if blocks else 0.0,
                        benign_fees_per_block=hit_benign / blocks
                        if blocks else 0.0,
                        asym=asym, blocks=blocks, series=hit)


def base_price_step(bp: int, gas_used: int, block_limit: int) -> int:
    """Integer fee-floor update: bp * (7/8 + gas_used / (4 * limit)),
    rounded to nearest with a floor of 1."""
    if not 0 <= gas_used <= block_limit:
        raise ValueError("gas_used out of range")
    num = bp * (7 * block_limit * 4 + 8 * gas_used)
    den = 8 * 4 * block_limit
    return max(1, (2 * num + den) // (2 * den))


def base_price_step_float(bp: float, gas_used: int,
                          block_limit: int) -> float:
    if not 0 <= gas_used <= block_limit:
        raise ValueError("gas_used out of range")
    return bp * (7.0 / 8.0 + gas_used / (4.0 * block_limit))


@dataclass
class XT8AReport:
    feasible: bool
    base_price_series: List[float]
    lock_start_block: int
    series: List[dict]

    def to_json(self) -> dict:
        return {"feasible": self.feasible,
                "base_price_series": self.base_price_series,
                "lock_start_block": self.lock_start_block,
                "series": self.series}


def simulate_xt8a(policy: MempoolPolicy, workload: WorkloadSpec,
                  eviction_blocks: int = 35, lock_price: int = 1,
                  initial_base_price: float = 100.0,
                  lock_blocks: int = 10) -> XT8AReport:
    """Eviction rounds deflate the fee floor, then a cheap lock holds it.

    During the eviction phase blocks carry no chargeable transactions, so
    the floor decays by 7/8 per block.  Once it dips under `lock_price`
    the attacker fills the pool and keeps it full; benign arrivals are
    declined while blocks stay packed with the cheap lock transactions.
    """
    from .mempool import build_block
    bp = initial_base_price
    bp_series = [bp]
    series: List[dict] = []
    for b in range(eviction_blocks):
        bp = base_price_step_float(bp, 0, workload.block_gas_limit)
        bp_series.append(bp)
        series.append({"block": b, "phase": "eviction", "benign_fees": 0,
                       "gas_used": 0, "base_price": bp})
    if lock_price < bp:
        return XT8AReport(False, bp_series, -1, series)
    state = new_pool(policy)
    next_adv = 1
    m = policy.capacity
    for b in range(lock_blocks):
        block_idx = eviction_blocks + b
        # Benign arrivals race the refill on the first lock block only.
        if b == 0:
            fill_normal(state, workload.txs_per_block)
        while len(state) < m:
            tx = Transaction(adversarial(next_adv), 1, 1, lock_price)
            next_adv += 1
            if not state.admit_mut(tx).admitted:
                break
        if b > 0:
            declined_before = len(state.declined)
            fill_normal(state, workload.txs_per_block)
            assert len(state.declined) >= declined_before
        included = build_block(state, workload.block_gas_limit)
        benign_fees = sum(t.fee() for t in included
                          if t.sender.role is Role.BENIGN)
        gas = len(included) * GAS_PER_TX
        bp = base_price_step_float(bp, gas, workload.block_gas_limit)
        bp_series.append(bp)
        series.append({"block": block_idx, "phase": "lock",
                       "benign_fees": benign_fees, "gas_used": gas,
                       "base_price": bp})
    return XT8AReport(True, bp_series, eviction_blocks, series)
