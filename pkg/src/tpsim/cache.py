"""Set-associative last-level cache with a metadata-way partition.

Only the data partition holds cache lines here. The ways donated to the
metadata table are removed uniformly from every set and handed to
:mod:`tpsim.metadata` as ``sets * metadata_ways * 12`` entries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

from tpsim.errors import UsageError

LINE_SIZE = 64
ENTRIES_PER_LINE = 12


class Outcome(enum.Enum):
    HIT = "hit"
    HIT_ON_PREFETCH = "hit_on_prefetch"
    MISS = "miss"


class DemandResult(NamedTuple):
    outcome: Outcome
    issuing_pc: Optional[int] = None


class FillResult(enum.Enum):
    INSERTED = "inserted"
    ALREADY_PRESENT = "already_present"


@dataclass(frozen=True)
class CacheConfig:
    total_size: int = 2 * 1024 * 1024
    ways: int = 16
    line_size: int = LINE_SIZE
    metadata_ways: int = 0

    def __post_init__(self):
        if self.line_size != LINE_SIZE:
            raise ValueError("line_size is fixed at 64 bytes")
        if self.ways < 1:
            raise ValueError("ways must be >= 1")
        if self.total_size % (self.ways * self.line_size):
            raise ValueError("total_size must be a multiple of ways * line_size")
        sets = self.sets
        if sets < 1 or sets & (sets - 1):
            raise ValueError(f"set count {sets} is not a power of two")
        if not 0 <= self.metadata_ways <= self.ways:
            raise ValueError("metadata_ways must lie in [0, ways]")

    @property
    def sets(self) -> int:
        return self.total_size // (self.ways * self.line_size)

    @property
    def data_ways(self) -> int:
        return self.ways - self.metadata_ways

    @property
    def metadata_entries(self) -> int:
        return self.sets * self.metadata_ways * ENTRIES_PER_LINE

    @classmethod
    def from_geometry(cls, sets: int, ways: int, metadata_ways: int = 0) -> "CacheConfig":
        return cls(total_size=sets * ways * LINE_SIZE, ways=ways, metadata_ways=metadata_ways)


@dataclass(slots=True)
class CacheLineState:
    tag: int
    valid: bool = True
    prefetched: bool = False
    issuing_pc: Optional[int] = None
    lru_stamp: int = 0


class Cache:
    """Data partition of the LLC. True LRU within each set."""

    def __init__(self, config: CacheConfig):
        self.config = config
        self.num_sets = config.sets
        self._set_mask = self.num_sets - 1
        self._set_bits = self.num_sets.bit_length() - 1
        self._sets = [dict() for _ in range(self.num_sets)]
        self._metadata_ways = config.metadata_ways
        self._clock = 0
        self._started = False
        self.demand_accesses = 0
        self.hits = 0
        self.misses = 0

    # ------------------------------------------------------------ partition

    @property
    def metadata_ways(self) -> int:
        return self._metadata_ways

    @property
    def data_ways(self) -> int:
        return self.config.ways - self._metadata_ways

    @property
    def metadata_entry_capacity(self) -> int:
        return self.num_sets * self._metadata_ways * ENTRIES_PER_LINE

    def set_partition(self, metadata_ways: int) -> None:
        if self._started:
            raise UsageError("partition can only change before the first access of a run")
        if not 0 <= metadata_ways <= self.config.ways:
            raise UsageError(f"metadata_ways {metadata_ways} outside [0, {self.config.ways}]")
        self._metadata_ways = metadata_ways

    # ------------------------------------------------------------ accesses

    def _locate(self, line_addr):
        return self._sets[line_addr & self._set_mask], line_addr >> self._set_bits

    def _install(self, lines, tag, prefetched, pc):
        capacity = self.config.ways - self._metadata_ways
        if capacity <= 0:
            return False
        if len(lines) >= capacity:
            victim = min(lines.values(), key=lambda s: s.lru_stamp)
            del lines[victim.tag]
        self._clock += 1
        lines[tag] = CacheLineState(tag, True, prefetched, pc, self._clock)
        return True

    def demand_access(self, line_addr: int) -> DemandResult:
        self._started = True
        self.demand_accesses += 1
        lines, tag = self._locate(line_addr)
        state = lines.get(tag)
        if state is None:
            self.misses += 1
            self._install(lines, tag, False, None)
            return DemandResult(Outcome.MISS)
        self.hits += 1
        self._clock += 1
        state.lru_stamp = self._clock
        if state.prefetched:
            pc = state.issuing_pc
            state.prefetched = False
            state.issuing_pc = None
            return DemandResult(Outcome.HIT_ON_PREFETCH, pc)
        return DemandResult(Outcome.HIT)

    def prefetch_fill(self, line_addr: int, issuing_pc: int) -> FillResult:
        self._started = True
        lines, tag = self._locate(line_addr)
        if tag in lines:
            return FillResult.ALREADY_PRESENT
        self._install(lines, tag, True, issuing_pc)
        return FillResult.INSERTED

    def nondemand_fill(self, line_addr: int) -> None:
        """Lower-level prefetch traffic (L1 stride fills) reaching this cache.

        Installs the line as a plain line, or refreshes recency without
        consuming a pending prefetch's usefulness flag.
        """
        self._started = True
        lines, tag = self._locate(line_addr)
        state = lines.get(tag)
        if state is None:
            self._install(lines, tag, False, None)
        else:
            self._clock += 1
            state.lru_stamp = self._clock

    def contains(self, line_addr: int) -> bool:
        lines, tag = self._locate(line_addr)
        return tag in lines

    def set_lines(self, set_index: int):
        """Snapshot of one set's resident lines (for inspection and tests)."""
        return list(self._sets[set_index].values())
