"""Multi-path victim buffer: extra Markov targets displaced from the table.

Indexed with the same low-bits set function as the metadata table so a
demand address probes both structures with the same lookup address.
Entries are 43 bits: 10-bit tag, 31-bit target, 2-bit use counter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from tpsim.metadata import TAG_BITS, TAG_MASK, TARGET_BITS, TARGET_MASK, MetadataEntry

COUNTER_BITS = 2
COUNTER_MAX = (1 << COUNTER_BITS) - 1
ENTRY_BITS = TARGET_BITS + TAG_BITS + COUNTER_BITS  # 43
DEFAULT_ENTRIES = 65536
DEFAULT_WAYS = 16
MAX_CANDIDATES = 3


@dataclass(slots=True)
class VictimEntry:
    tag: int
    target: int
    use_counter: int = 0
    lru_stamp: int = 0


def storage_bits(entries: int = DEFAULT_ENTRIES) -> int:
    return entries * ENTRY_BITS


class VictimBuffer:
    def __init__(self, entries: int = DEFAULT_ENTRIES, ways: int = DEFAULT_WAYS, candidates_per_entry: int = 1):
        if entries % ways:
            raise ValueError("entries must be a multiple of ways")
        sets = entries // ways
        if sets < 1 or sets & (sets - 1):
            raise ValueError(f"victim buffer set count {sets} is not a power of two")
        if not 1 <= candidates_per_entry <= MAX_CANDIDATES:
            raise ValueError(f"candidates_per_entry must lie in [1, {MAX_CANDIDATES}]")
        self.entries = entries
        self.ways = ways
        self.num_sets = sets
        self.candidates_per_entry = candidates_per_entry
        self._set_mask = sets - 1
        self._set_bits = sets.bit_length() - 1
        self._sets: List[List[VictimEntry]] = [[] for _ in range(sets)]
        self._clock = 0
        self.inserts = 0
        self.evictions = 0

    def split(self, line_addr: int):
        return line_addr & self._set_mask, (line_addr >> self._set_bits) & TAG_MASK

    def vb_insert(self, evicted: MetadataEntry) -> None:
        """Keep ``evicted``'s target unless it carried priority 0."""
        if evicted.priority <= 0:
            return
        s, tag = self.split(evicted.key)
        bucket = self._sets[s]
        target = evicted.target & TARGET_MASK
        self._clock += 1
        for e in bucket:
            if e.tag == tag and e.target == target:
                e.lru_stamp = self._clock
                return
        if len(bucket) >= self.ways:
            del bucket[self.vb_evict_policy(bucket)]
            self.evictions += 1
        bucket.append(VictimEntry(tag, target, 0, self._clock))
        self.inserts += 1

    @staticmethod
    def vb_evict_policy(bucket: List[VictimEntry]) -> int:
        """Index of the least-used entry; LRU among equals."""
        return min(range(len(bucket)), key=lambda i: (bucket[i].use_counter, bucket[i].lru_stamp))

    def vb_lookup(self, line_addr: int, primary_target: Optional[int] = None) -> List[int]:
        s, tag = self.split(line_addr)
        high = line_addr & ~TARGET_MASK
        hits = [e for e in self._sets[s] if e.tag == tag]
        if not hits:
            return []
        hits.sort(key=lambda e: (-e.use_counter, -e.lru_stamp))
        out = []
        for e in hits:
            target = high | e.target
            if target == primary_target or target in out:
                continue
            out.append(target)
            self._clock += 1
            e.lru_stamp = self._clock
            if e.use_counter < COUNTER_MAX:
                e.use_counter += 1
            if len(out) >= self.candidates_per_entry:
                break
        return out

    def occupancy(self) -> int:
        return sum(len(b) for b in self._sets)

    def bucket(self, set_index: int) -> List[VictimEntry]:
        return list(self._sets[set_index])

    def storage_bits(self) -> int:
        return storage_bits(self.entries)
