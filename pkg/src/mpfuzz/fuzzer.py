"""Symbolized stateful fuzzing loop.

Explores the symbol-level input space of a deterministic pool: seeds are
(input, symbolized state) pairs, mutation appends one feasible symbol,
feedback is new-state coverage gated by a promisingness test, and seed
selection ranks by b/opcost energy.  Two sequential passes cover the two
damage modes: an eviction pass starting from a benign-filled pool and a
locking pass starting from an empty one with benign probes appended to
every candidate timeline.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .exploitkit import Exploit
from .mempool import MempoolPolicy, MempoolState, fill_normal, new_pool
from .oracle import OracleConfig, check_eviction, check_locking
from .symbolic import (InstantiationContext, SymbolizedState, SymbolizedTx,
                       InfeasibleSymbol, cost, enumerate_mutations,
                       instantiate, opcost, serialize_input, symbolize_state)
from .txmodel import Transaction


@dataclass
class Seed:
    input: Tuple[SymbolizedTx, ...]
    sym_state: SymbolizedState
    concrete: MempoolState
    ctx: InstantiationContext
    order: int
    tried: Set[SymbolizedTx] = field(default_factory=set)
    candidates: Tuple[SymbolizedTx, ...] = ()
    decline_probes: int = 0
    selections: int = 0

    def energy(self):
        if all(c in self.tried for c in self.candidates):
            return Fraction(0)
        oc = opcost(self.sym_state)
        if oc == 0:
            return math.inf
        return Fraction(1, oc)


class Corpus:
    def __init__(self):
        self.seeds: List[Seed] = []
        self.covered: Set[str] = set()
        self._next_order = 0

    def add(self, seed: Seed) -> None:
        key = seed.sym_state.key()
        if key in self.covered:
            raise ValueError(f"state already covered: {key}")
        self.covered.add(key)
        seed.order = self._next_order
        self._next_order += 1
        self.seeds.append(seed)

    def select(self) -> Optional[Seed]:
        best = None
        best_rank = None
        for s in self.seeds:
            e = s.energy()
            if e == 0:
                continue
            rank = (e, -s.order)
            if best_rank is None or rank > best_rank:
                best, best_rank = s, rank
        return best

    def snapshot(self) -> dict:
        return {
            "covered": sorted(self.covered),
            "seeds": [{"input": serialize_input(s.input),
                       "state": s.sym_state.key(),
                       "tried": sorted(t.serialize() for t in s.tried)}
                      for s in self.seeds],
        }


@dataclass
class FuzzResult:
    exploits: List[Exploit]
    mutations: int
    states_covered: int
    wall_seconds: float
    mode_stats: Dict[str, dict] = field(default_factory=dict)
    first_exploit_mutations: Optional[int] = None


def _probe_declines(state: MempoolState, ctx: InstantiationContext,
                    count: int) -> Tuple[MempoolState, List[Transaction]]:
    """Speculatively admit benign probes on a copy; report the declines."""
    clone = state.clone()
    probe_ctx = ctx.copy()
    declined: List[Transaction] = []
    for _ in range(count):
        tx = instantiate(SymbolizedTx("N"), clone, probe_ctx)
        if not clone.admit_mut(tx).admitted:
            declined.append(tx)
    return clone, declined


def st_promising(new_sym: SymbolizedState, old_sym: SymbolizedState,
                 new_declines: int, old_declines: int) -> bool:
    """A state is worth keeping when it hurts benign service or gets
    cheaper: fewer benign residents, more declined benign probes, lower
    cost, or lower optimistic cost."""
    if new_sym.count("N") < old_sym.count("N"):
        return True
    if new_declines > old_declines:
        return True
    if cost(new_sym) < cost(old_sym):
        return True
    if opcost(new_sym) < opcost(old_sym):
        return True
    return False


def _audit_reexec(policy: MempoolPolicy, seed_input, fill_count: int,
                  cached: MempoolState) -> None:
    from .symbolic import execute_input
    state, _, _, _ = execute_input(policy, seed_input, fill_count)
    if state.canonical() != cached.canonical():
        raise AssertionError("cached concrete state diverged from "
                             "re-execution")


def run_fuzzer(policy: MempoolPolicy,
               cfg: Optional[OracleConfig] = None,
               budget_mutations: int = 100_000,
               budget_seconds: float = 300.0,
               rng_seed: int = 0,
               promising: bool = True,
               modes: Sequence[str] = ("eviction", "locking"),
               log_stream=None,
               reexec_audit: bool = False,
               stop_on_first: bool = False) -> FuzzResult:
    """Run the full fuzzing campaign over the requested modes.

    Deterministic for fixed (policy, cfg, rng_seed, budgets); rng_seed
    only relabels sender indices and never alters the search.
    """
    cfg = cfg or OracleConfig()
    start = time.monotonic()
    total_mutations = 0
    exploits: List[Exploit] = []
    emitted: Set[Tuple[str, str]] = set()
    mode_stats: Dict[str, dict] = {}
    first_at: Optional[int] = None
    for mode in modes:
        remaining = budget_mutations - total_mutations
        if remaining <= 0:
            break
        used, covered, mode_first = _run_mode(
            mode, policy, cfg, remaining,
            budget_seconds - (time.monotonic() - start),
            promising, exploits, emitted, log_stream, reexec_audit,
            stop_on_first)
        if mode_first is not None and first_at is None:
            first_at = total_mutations + mode_first
        total_mutations += used
        mode_stats[mode] = {"mutations": used, "states_covered": covered}
        if stop_on_first and first_at is not None:
            break
    return FuzzResult(exploits=exploits, mutations=total_mutations,
                      states_covered=sum(s["states_covered"]
                                         for s in mode_stats.values()),
                      wall_seconds=time.monotonic() - start,
                      mode_stats=mode_stats,
                      first_exploit_mutations=first_at)


def _log(stream, record: dict) -> None:
    if stream is not None:
        stream.write(json.dumps(record, sort_keys=True) + "\n")


def _run_mode(mode: str, policy: MempoolPolicy, cfg: OracleConfig,
              budget_mutations: int, budget_seconds: float,
              promising: bool, exploits: List[Exploit],
              emitted: Set[Tuple[str, str]], log_stream,
              reexec_audit: bool,
              stop_on_first: bool = False
              ) -> Tuple[int, int, Optional[int]]:
    m = policy.capacity
    probe_count = cfg.probe_count or m
    fill_count = m if mode == "eviction" else 0
    root_state = new_pool(policy)
    st0 = fill_normal(root_state, fill_count)
    root_ctx = InstantiationContext(capacity=m, benign_next=fill_count + 1)
    corpus = Corpus()
    root = Seed(input=(), sym_state=symbolize_state(root_state),
                concrete=root_state, ctx=root_ctx, order=0)
    root.candidates = tuple(enumerate_mutations(root_state, root_ctx))
    _, root_declined = _probe_declines(root_state, root_ctx, probe_count)
    root.decline_probes = len(root_declined)
    corpus.add(root)

    mutations = 0
    first_at: Optional[int] = None
    deadline = time.monotonic() + budget_seconds
    while mutations < budget_mutations and time.monotonic() < deadline:
        if stop_on_first and first_at is not None:
            break
        seed = corpus.select()
        if seed is None:
            break
        seed.selections += 1
        for cand in seed.candidates:
            if cand in seed.tried:
                continue
            if mutations >= budget_mutations or \
                    time.monotonic() >= deadline:
                break
            seed.tried.add(cand)
            mutations += 1
            state = seed.concrete.clone()
            ctx = seed.ctx.copy()
            try:
                tx = instantiate(cand, state, ctx)
            except InfeasibleSymbol:
                _log(log_stream, {"mode": mode,
                                  "seed": seed.sym_state.key(),
                                  "candidate": cand.serialize(),
                                  "outcome": "Infeasible",
                                  "feedback": False})
                continue
            outcome = state.admit_mut(tx)
            new_input = seed.input + (cand,)
            new_sym = symbolize_state(state)
            if reexec_audit:
                _audit_reexec(policy, new_input, fill_count, state)

            declined_probes: Optional[List[Transaction]] = None
            if mode == "eviction":
                verdict = check_eviction(st0, state, cfg)
            else:
                probe_state, declined_probes = _probe_declines(
                    state, ctx, probe_count)
                verdict = check_locking(probe_state, declined_probes, cfg)
            if verdict.triggered:
                if first_at is None:
                    first_at = mutations
                key = ("Eviction" if mode == "eviction" else "Locking",
                       serialize_input(new_input))
                if key not in emitted:
                    emitted.add(key)
                    _, _, txs, _ = _replay_txs(policy, seed.input,
                                               fill_count)
                    exploits.append(Exploit(
                        kind=key[0], pattern=None, mut_config=policy,
                        symbol_sequence=new_input,
                        concrete_txs=txs + [tx], verdict=verdict,
                        end_state=new_sym.key()))
                _log(log_stream, {"mode": mode,
                                  "seed": seed.sym_state.key(),
                                  "candidate": cand.serialize(),
                                  "outcome": "Exploit",
                                  "state": new_sym.key(),
                                  "input": serialize_input(new_input)})
                if stop_on_first:
                    break
                continue

            fed_back = False
            if outcome.admitted and new_sym.key() not in corpus.covered:
                if declined_probes is None:
                    _, declined_probes = _probe_declines(state, ctx,
                                                         probe_count)
                ok = True
                if promising:
                    ok = st_promising(new_sym, seed.sym_state,
                                      len(declined_probes),
                                      seed.decline_probes)
                if ok:
                    child = Seed(input=new_input, sym_state=new_sym,
                                 concrete=state, ctx=ctx, order=0)
                    child.candidates = tuple(
                        enumerate_mutations(state, ctx))
                    child.decline_probes = len(declined_probes)
                    corpus.add(child)
                    fed_back = True
            _log(log_stream, {"mode": mode, "seed": seed.sym_state.key(),
                              "candidate": cand.serialize(),
                              "outcome": outcome.kind,
                              "state": new_sym.key(),
                              "feedback": fed_back})
    return mutations, len(corpus.covered), first_at


def _replay_txs(policy: MempoolPolicy, seq, fill_count: int):
    from .symbolic import execute_input
    return execute_input(policy, seq, fill_count)


def mpfuzz(policy: MempoolPolicy, cfg: Optional[OracleConfig] = None,
           **kwargs) -> FuzzResult:
    """Alias for run_fuzzer with default feedback enabled."""
    return run_fuzzer(policy, cfg, **kwargs)
