"""Trace-driven simulation of one policy over the partitioned LLC."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from tpsim import hints as hintmod
from tpsim.cache import Cache, CacheConfig, FillResult, Outcome
from tpsim.engine import InsertionMode, PrefetchEngine, PrefetcherConfig
from tpsim.errors import UsageError
from tpsim.hints import CsrState, HintBuffer, HintEntry
from tpsim.metadata import MAX_TABLE_BYTES, MetadataTable, ReplacementMode, TableConfig, storage_report
from tpsim.trace import AccessKind, MemoryAccess
from tpsim.victim import VictimBuffer


class Policy(enum.Enum):
    NOPF = "nopf"
    NOFILTER = "nofilter"
    PATTERNCONF = "patternconf"
    PROPHET = "prophet"


@dataclass(frozen=True)
class SimConfig:
    cache: CacheConfig = CacheConfig(metadata_ways=8)
    prefetcher: PrefetcherConfig = PrefetcherConfig()
    # replacement used by the runtime baselines (nofilter / patternconf)
    baseline_replacement: ReplacementMode = ReplacementMode.SRRIP
    victim_buffer: bool = True
    seed: int = 0


@dataclass
class PcStats:
    issued: int = 0
    useful: int = 0
    demand_misses: int = 0


@dataclass
class RunResult:
    policy: Policy
    demand_accesses: int
    demand_misses: int
    issued: int
    useful: int
    fills: int
    metadata_ways: int
    per_pc: Dict[int, PcStats]
    insertions: int = 0
    replacements: int = 0
    occupancy: int = 0
    storage_bits: Dict[str, int] = field(default_factory=dict)
    engine: Optional[PrefetchEngine] = field(default=None, repr=False, compare=False)

    @property
    def accuracy(self) -> float:
        return self.useful / self.issued if self.issued else 0.0


@dataclass
class SimReport:
    run_id: str
    policy: str
    demand_accesses: int
    demand_misses: int
    issued: int
    useful: int
    coverage: float
    accuracy: float
    traffic_proxy: int
    storage_bits: Dict[str, int] = field(default_factory=dict)
    per_pc: Dict[int, PcStats] = field(default_factory=dict)


class EventSampler:
    """Hook for the two prefetch events; the profiler's PEBS emulation plugs in here."""

    def issue(self, pc: int) -> None:
        pass

    def useful(self, pc: int) -> None:
        pass


def simplified_metadata_ways(cache: CacheConfig) -> int:
    """Ways for the fixed 1 MB profiling table (8 on a 2 MB 16-way LLC).

    Capped at half the LLC so a small cache keeps data ways to measure usefulness in.
    """
    return max(1, min(cache.ways // 2, MAX_TABLE_BYTES // (cache.sets * cache.line_size)))


def _build(policy: Policy, config: SimConfig, manifest):
    """Resolve the per-policy cache partition, engine and hint buffer."""
    pf = config.prefetcher
    ways = config.cache.metadata_ways
    hint_buffer = None
    honor_insert_bits = True
    if policy is Policy.NOPF:
        return 0, None, None
    if policy is Policy.PROPHET:
        if manifest is None:
            raise UsageError("policy 'prophet' requires a hint manifest")
        csr, entries = manifest
        if csr.prophet_enabled:
            if csr.resizing_from_profile:
                ways = min(csr.metadata_ways, config.cache.ways)
            hint_buffer = HintBuffer(entries)
            honor_insert_bits = csr.insertion_policy_enabled
            pf = replace(
                pf,
                insertion_mode=InsertionMode.PROPHET_HINTS,
                replacement_mode=ReplacementMode.PROPHET,
                victim_buffer_enabled=config.victim_buffer and not pf.simplified_mode,
            )
        else:
            pf = replace(pf, insertion_mode=InsertionMode.NO_FILTER, replacement_mode=config.baseline_replacement)
    elif policy is Policy.NOFILTER:
        pf = replace(pf, insertion_mode=InsertionMode.NO_FILTER, replacement_mode=config.baseline_replacement)
    else:
        pf = replace(pf, insertion_mode=InsertionMode.PATTERN_CONF, replacement_mode=config.baseline_replacement)
    if pf.simplified_mode:
        ways = simplified_metadata_ways(config.cache)
    if ways == 0:
        return 0, None, None
    table = MetadataTable(TableConfig(config.cache.sets, ways * 12, pf.replacement_mode))
    vb = None
    if pf.victim_buffer_enabled:
        vb = VictimBuffer(pf.vb_entries, pf.vb_ways, pf.candidates_per_entry)
    engine = PrefetchEngine(table, pf, vb)
    engine.honor_insert_bits = honor_insert_bits
    return ways, engine, hint_buffer


def run_policy(
    trace: Sequence[MemoryAccess],
    policy: Policy,
    config: SimConfig = SimConfig(),
    manifest: Optional[Tuple[CsrState, List[HintEntry]]] = None,
    sampler: Optional[EventSampler] = None,
) -> RunResult:
    ways, engine, hint_buffer = _build(policy, config, manifest)
    cache = Cache(replace(config.cache, metadata_ways=0))
    cache.set_partition(ways)

    per_pc: Dict[int, PcStats] = defaultdict(PcStats)
    demand = cache.demand_access
    fill = cache.prefetch_fill
    hint_for = hint_buffer.hint_for if hint_buffer is not None else None
    MISS, HIT_PF, INSERTED = Outcome.MISS, Outcome.HIT_ON_PREFETCH, FillResult.INSERTED
    DEMAND = AccessKind.DEMAND
    misses = 0
    issued = 0
    useful = 0
    fills = 0

    for acc in trace:
        pc = acc.pc
        if acc.kind is DEMAND:
            outcome, issuer = demand(acc.line_addr)
            if outcome is MISS:
                misses += 1
                per_pc[pc].demand_misses += 1
            elif outcome is HIT_PF:
                useful += 1
                per_pc[issuer].useful += 1
                if engine is not None:
                    engine.record_useful(issuer)
                if sampler is not None:
                    sampler.useful(issuer)
        else:
            cache.nondemand_fill(acc.line_addr)
        if engine is None:
            continue
        targets = engine.access(acc, hint_for(pc) if hint_for is not None else None)
        if targets:
            stats = per_pc[pc]
            for t in targets:
                issued += 1
                stats.issued += 1
                result = fill(t, pc)
                engine.record_issue(pc, result)
                if result is INSERTED:
                    fills += 1
                if sampler is not None:
                    sampler.issue(pc)

    table = engine.table if engine is not None else None
    return RunResult(
        policy=policy,
        demand_accesses=cache.demand_accesses,
        demand_misses=misses,
        issued=issued,
        useful=useful,
        fills=fills,
        metadata_ways=ways,
        per_pc=dict(per_pc),
        insertions=table.insertions if table is not None else 0,
        replacements=table.replacements if table is not None else 0,
        occupancy=table.occupancy() if table is not None else 0,
        storage_bits=storage_breakdown(policy, table, engine, hint_buffer),
        engine=engine,
    )


def storage_breakdown(policy: Policy, table, engine, hint_buffer) -> Dict[str, int]:
    out = {"metadata_payload": 0, "replacement_state": 0, "hint_buffer": 0, "victim_buffer": 0}
    if table is not None:
        rep = storage_report(table.capacity)
        out["metadata_payload"] = rep.payload_bits
        out["replacement_state"] = rep.replacement_bits
    if hint_buffer is not None:
        out["hint_buffer"] = hintmod.storage_bits()
    if engine is not None and engine.victim_buffer is not None:
        out["victim_buffer"] = engine.victim_buffer.storage_bits()
    return out


def coverage(misses_nopf: int, misses_pf: int) -> float:
    if misses_nopf == 0:
        return 0.0
    return (misses_nopf - misses_pf) / misses_nopf


def simulate(
    trace: Sequence[MemoryAccess],
    policy: Policy,
    config: SimConfig = SimConfig(),
    manifest=None,
    run_id: str = "run",
    baseline: Optional[RunResult] = None,
) -> SimReport:
    """Run ``policy`` and express it against a no-prefetch run of the same trace.

    ``baseline`` may be passed to reuse an earlier nopf run.
    """
    if policy is not Policy.NOPF and manifest is None and policy is Policy.PROPHET:
        raise UsageError("policy 'prophet' requires a hint manifest")
    result = run_policy(trace, policy, config, manifest)
    if policy is Policy.NOPF:
        base = result
    else:
        base = baseline if baseline is not None else run_policy(trace, Policy.NOPF, config)
    return SimReport(
        run_id=run_id,
        policy=policy.value,
        demand_accesses=result.demand_accesses,
        demand_misses=result.demand_misses,
        issued=result.issued,
        useful=result.useful,
        coverage=coverage(base.demand_misses, result.demand_misses),
        accuracy=result.accuracy,
        traffic_proxy=result.demand_misses + result.fills,
        storage_bits=result.storage_bits,
        per_pc=result.per_pc,
    )
