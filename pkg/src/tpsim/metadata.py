"""On-chip Markov metadata table.

Each entry is 41 bits of payload (10-bit tag + 31-bit compressed target),
12 entries to a 64-byte LLC line. The set index is the low ``log2(sets)``
bits of the triggering line address and the tag the next 10 bits, so
addresses that agree on those bits alias. Targets keep their low 31 bits
and borrow the high bits of whichever address looks them up.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional

from tpsim.cache import ENTRIES_PER_LINE, CacheConfig

TAG_BITS = 10
TARGET_BITS = 31
PRIORITY_BITS = 2
ENTRY_BITS = TAG_BITS + TARGET_BITS
REPLACEMENT_STATE_BITS = 2
TAG_MASK = (1 << TAG_BITS) - 1
TARGET_MASK = (1 << TARGET_BITS) - 1
MAX_PRIORITY = (1 << PRIORITY_BITS) - 1
MAX_TABLE_BYTES = 1024 * 1024
MAX_TABLE_ENTRIES = MAX_TABLE_BYTES // 64 * ENTRIES_PER_LINE  # 196,608

RRPV_MAX = 3
RRPV_INSERT = 2


class ReplacementMode(enum.Enum):
    PROPHET = "ProphetPriorityLRU"
    SRRIP = "SRRIP"
    LRU = "LRU"


@dataclass(slots=True)
class MetadataEntry:
    tag: int
    target: int
    priority: int
    lru_stamp: int = 0
    srrip_rrpv: int = RRPV_INSERT
    # full trigger address as last written; simulator bookkeeping, not stored in hardware
    key: int = 0

    def target_for(self, trigger_line: int) -> int:
        return (trigger_line & ~TARGET_MASK) | self.target


class StorageReport(NamedTuple):
    payload_bits: int
    replacement_bits: int
    total_bits: int


def storage_report(capacity: int) -> StorageReport:
    payload = capacity * ENTRY_BITS
    repl = capacity * REPLACEMENT_STATE_BITS
    return StorageReport(payload, repl, payload + repl)


@dataclass(frozen=True)
class TableConfig:
    sets: int
    assoc_entries_per_set: int
    replacement_mode: ReplacementMode = ReplacementMode.PROPHET

    def __post_init__(self):
        if self.sets < 1 or self.sets & (self.sets - 1):
            raise ValueError(f"table set count {self.sets} is not a power of two")
        if self.assoc_entries_per_set < 0:
            raise ValueError("negative associativity")
        if self.entry_capacity > MAX_TABLE_ENTRIES:
            raise ValueError(
                f"table capacity {self.entry_capacity} exceeds the 1 MB limit of {MAX_TABLE_ENTRIES} entries"
            )

    @property
    def entry_capacity(self) -> int:
        return self.sets * self.assoc_entries_per_set

    @classmethod
    def from_cache(cls, cache: CacheConfig, mode: ReplacementMode = ReplacementMode.PROPHET) -> "TableConfig":
        return cls(cache.sets, cache.metadata_ways * ENTRIES_PER_LINE, mode)


class MetadataTable:
    """Set-associative Markov table with one target per key."""

    def __init__(self, config: TableConfig):
        self.config = config
        self.mode = config.replacement_mode
        self.assoc = config.assoc_entries_per_set
        self._set_mask = config.sets - 1
        self._set_bits = config.sets.bit_length() - 1
        self._ways: List[List[Optional[MetadataEntry]]] = [[None] * self.assoc for _ in range(config.sets)]
        self._index = [dict() for _ in range(config.sets)]
        self._clock = 0
        self.insertions = 0
        self.replacements = 0
        self.overwrites = 0

    @property
    def capacity(self) -> int:
        return self.config.entry_capacity

    def split(self, line_addr: int):
        """(set index, tag) for a line address."""
        return line_addr & self._set_mask, (line_addr >> self._set_bits) & TAG_MASK

    def _find(self, line_addr):
        s = line_addr & self._set_mask
        way = self._index[s].get((line_addr >> self._set_bits) & TAG_MASK)
        if way is None:
            return None
        return self._ways[s][way]

    def peek(self, line_addr: int) -> Optional[int]:
        """Stored target for ``line_addr`` without touching replacement state."""
        entry = self._find(line_addr)
        return None if entry is None else entry.target_for(line_addr)

    def entry(self, line_addr: int) -> Optional[MetadataEntry]:
        """Detached copy of the entry matching ``line_addr``."""
        entry = self._find(line_addr)
        return None if entry is None else replace(entry)

    def lookup(self, line_addr: int) -> Optional[int]:
        entry = self._find(line_addr)
        if entry is None:
            return None
        self._clock += 1
        entry.lru_stamp = self._clock
        entry.srrip_rrpv = 0
        return entry.target_for(line_addr)

    def insert(self, line_addr: int, target: int, priority: int) -> Optional[MetadataEntry]:
        """Record ``line_addr -> target``; returns the evicted entry, if any.

        A key that is already present is overwritten in place (target and
        priority) and nothing is evicted.
        """
        if not 0 <= priority <= MAX_PRIORITY:
            raise ValueError(f"priority {priority} outside [0, {MAX_PRIORITY}]")
        if self.assoc == 0:
            return None
        s, tag = self.split(line_addr)
        index = self._index[s]
        ways = self._ways[s]
        self._clock += 1
        way = index.get(tag)
        if way is not None:
            entry = ways[way]
            entry.target = target & TARGET_MASK
            entry.priority = priority
            entry.lru_stamp = self._clock
            entry.srrip_rrpv = 0
            entry.key = line_addr
            self.overwrites += 1
            return None

        new = MetadataEntry(tag, target & TARGET_MASK, priority, self._clock, RRPV_INSERT, line_addr)
        self.insertions += 1
        if len(index) < self.assoc:
            way = ways.index(None)
            ways[way] = new
            index[tag] = way
            return None

        way = self._victim_way(ways)
        victim = ways[way]
        del index[victim.tag]
        ways[way] = new
        index[tag] = way
        self.replacements += 1
        return victim

    def _victim_way(self, ways: List[MetadataEntry]) -> int:
        if self.mode is ReplacementMode.PROPHET:
            return min(range(len(ways)), key=lambda w: (ways[w].priority, ways[w].lru_stamp))
        if self.mode is ReplacementMode.LRU:
            return min(range(len(ways)), key=lambda w: ways[w].lru_stamp)
        while True:
            for w, entry in enumerate(ways):
                if entry.srrip_rrpv >= RRPV_MAX:
                    return w
            for entry in ways:
                entry.srrip_rrpv += 1

    def occupancy(self) -> int:
        return sum(len(index) for index in self._index)

    def scan_occupancy(self) -> int:
        return sum(1 for ways in self._ways for e in ways if e is not None)

    def set_entries(self, set_index: int) -> List[Optional[MetadataEntry]]:
        return list(self._ways[set_index])

    def storage_report(self) -> StorageReport:
        return storage_report(self.capacity)


class UnboundedMarkovTable:
    """Full-width, never-evicting table; the reference for oracle comparisons."""

    mode = ReplacementMode.LRU
    capacity = None

    def __init__(self):
        self._map = {}
        self.insertions = 0
        self.replacements = 0
        self.overwrites = 0

    def peek(self, line_addr: int) -> Optional[int]:
        return self._map.get(line_addr)

    lookup = peek

    def insert(self, line_addr: int, target: int, priority: int) -> Optional[MetadataEntry]:
        if line_addr in self._map:
            self.overwrites += 1
        else:
            self.insertions += 1
        self._map[line_addr] = target
        return None

    def entry(self, line_addr: int) -> Optional[MetadataEntry]:
        target = self._map.get(line_addr)
        if target is None:
            return None
        return MetadataEntry(line_addr & TAG_MASK, target & TARGET_MASK, MAX_PRIORITY, key=line_addr)

    def occupancy(self) -> int:
        return len(self._map)
