"""Turn profiled counters into PC-level hints and the CSR table size."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Sequence, Tuple

from tpsim.cache import ENTRIES_PER_LINE
from tpsim.hints import CsrState, HintEntry
from tpsim.metadata import MAX_TABLE_BYTES
from tpsim.profiler import HINT_PC_LIMIT, AppCounters, PcCounters, top_miss_pcs

DEFAULT_EL_ACC = 1 / 16


@dataclass(frozen=True)
class AnalysisParams:
    el_acc: float = DEFAULT_EL_ACC
    n: int = 2
    llc_sets: int = 2048
    entries_per_line: int = ENTRIES_PER_LINE
    max_table_bytes: int = MAX_TABLE_BYTES
    top_k: int = HINT_PC_LIMIT

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.el_acc < 1.0 / (1 << self.n):
            raise ValueError(f"el_acc must lie in (0, 1/2^n) = (0, {1.0 / (1 << self.n)})")
        if self.llc_sets < 1:
            raise ValueError("llc_sets must be >= 1")
        if not 1 <= self.top_k <= HINT_PC_LIMIT:
            raise ValueError(f"top_k must lie in [1, {HINT_PC_LIMIT}]")

    @property
    def max_entries(self) -> int:
        return self.max_table_bytes // 64 * self.entries_per_line

    @property
    def levels(self) -> int:
        return 1 << self.n


DEFAULT_PARAMS = AnalysisParams()


def insert_decision(acc: float, params: AnalysisParams = DEFAULT_PARAMS) -> int:
    return 1 if acc >= params.el_acc else 0


def priority_level(acc: float, params: AnalysisParams = DEFAULT_PARAMS) -> int:
    """Replacement priority band of an accuracy that already passed the insert filter."""
    if acc < params.el_acc:
        raise ValueError(f"accuracy {acc} is below el_acc {params.el_acc}; filter it first")
    if acc > 1.0:
        raise ValueError(f"accuracy {acc} exceeds 1")
    levels = params.levels
    return min(int(math.floor(acc * levels)), levels - 1)


def nearest_power_of_two(x: int) -> int:
    """Nearest power of two to a non-negative integer; halfway rounds up, 0 stays 0."""
    if x <= 0:
        return 0
    low = 1 << (x.bit_length() - 1)
    if low == x:
        return x
    high = low << 1
    return low if x - low < high - x else high


def resize_decision(allocated_entries: int, params: AnalysisParams = DEFAULT_PARAMS) -> Tuple[int, bool]:
    """(metadata ways, prefetcher enabled) for a peak table occupancy."""
    if allocated_entries < 0:
        raise ValueError("allocated entries cannot be negative")
    target = nearest_power_of_two(allocated_entries)
    # the rounded value must still be a power of two that fits the 1 MB table
    cap = 1 << (params.max_entries.bit_length() - 1)
    target = min(target, cap)
    lines = -(-target // params.entries_per_line)
    # lines / sets < 0.5  <=>  2 * lines < sets
    if 2 * lines < params.llc_sets:
        return 0, False
    return -(-lines // params.llc_sets), True


class PcStat(NamedTuple):
    pc: int
    accuracy: float
    demand_misses: float


def stats_from_counters(counters: Iterable[PcCounters]) -> List[PcStat]:
    return [PcStat(c.pc, c.accuracy, c.demand_misses) for c in counters]


def analyze(
    pc_stats: Sequence[PcStat],
    allocated_entries: int,
    params: AnalysisParams = DEFAULT_PARAMS,
) -> Tuple[CsrState, List[HintEntry]]:
    chosen = set(top_miss_pcs(pc_stats, params.top_k))
    hints = []
    for stat in sorted(pc_stats, key=lambda s: s.pc):
        if stat.pc not in chosen:
            continue
        bit = insert_decision(stat.accuracy, params)
        prio = priority_level(stat.accuracy, params) if bit else 0
        hints.append(HintEntry(stat.pc, bit, prio))
    ways, enabled = resize_decision(allocated_entries, params)
    csr = CsrState(
        prophet_enabled=True,
        metadata_ways=ways if enabled else 0,
        insertion_policy_enabled=True,
        resizing_from_profile=True,
    )
    return csr, hints


def analyze_counters(
    counters: Sequence[PcCounters], app: AppCounters, params: AnalysisParams = DEFAULT_PARAMS
) -> Tuple[CsrState, List[HintEntry]]:
    return analyze(stats_from_counters(counters), app.allocated_entries_end, params)


def analyze_store(store, params: AnalysisParams = DEFAULT_PARAMS) -> Tuple[CsrState, List[HintEntry]]:
    stats = [PcStat(pc, acc, misses) for pc, (acc, misses) in store.per_pc.items()]
    return analyze(stats, store.allocated, params)
