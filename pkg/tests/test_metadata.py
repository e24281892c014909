import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpsim.cache import CacheConfig
from tpsim.metadata import (
    MAX_TABLE_ENTRIES,
    RRPV_INSERT,
    MetadataTable,
    ReplacementMode,
    TableConfig,
    UnboundedMarkovTable,
    storage_report,
)


def table(sets=1, assoc=4, mode=ReplacementMode.PROPHET):
    return MetadataTable(TableConfig(sets, assoc, mode))


def test_empty_lookup():
    assert table().lookup(10) is None


def test_insert_then_lookup():
    t = table(sets=4)
    t.insert(10, 20, 3)
    assert t.lookup(10) == 20


def test_target_high_bits_come_from_trigger():
    t = table(sets=4)
    a = (5 << 40) | 7
    b = (5 << 40) | 123456
    t.insert(a, b, 3)
    assert t.lookup(a) == b


def test_aliasing_pair_later_insert_wins():
    t = table(sets=16)
    a = 0x123
    alias = a + (1 << (4 + 10))  # same set, same 10-bit tag
    assert t.split(a) == t.split(alias)
    t.insert(a, 1000, 3)
    t.insert(alias, 2000, 3)
    assert t.lookup(a) == 2000
    assert t.occupancy() == 1


def test_shadow_map_agreement_without_aliasing():
    rng = random.Random(1)
    t = table(sets=64, assoc=64)
    shadow = {}
    keys = rng.sample(range(64 * 1024), 500)  # set+tag cover all 16 bits: no aliasing
    for k in keys:
        v = rng.randrange(1 << 20)
        t.insert(k, v, 3)
        shadow[k] = v
    for k, v in shadow.items():
        assert t.lookup(k) == v


def test_shadow_map_measures_aliasing():
    rng = random.Random(2)
    t = table(sets=4, assoc=1000)
    shadow = {}
    for _ in range(3000):
        k = rng.randrange(1 << 16)
        v = rng.randrange(1 << 20)
        t.insert(k, v, 3)
        shadow[k] = v
    last_writer = {}
    for k in shadow:
        last_writer[t.split(k)] = None
    wrong = sum(1 for k, v in shadow.items() if t.lookup(k) != v)
    # every disagreement is explained by a later aliasing write
    assert wrong == len(shadow) - len(last_writer)


def test_non_full_insert_no_eviction():
    t = table(assoc=2)
    assert t.insert(1, 2, 3) is None


def test_victim_lru_among_equal_priority():
    t = table(assoc=3)
    for k in (1, 2, 3):
        t.insert(k, k + 100, 3)
    t.lookup(1)
    victim = t.insert(4, 104, 3)
    assert victim.key == 2


def test_victim_lowest_priority_regardless_of_recency():
    t = table(assoc=3)
    t.insert(1, 101, 0)
    t.insert(2, 102, 2)
    t.insert(3, 103, 3)
    t.lookup(1)
    victim = t.insert(4, 104, 3)
    assert victim.key == 1 and victim.priority == 0


def test_overwrite_in_place():
    t = table(assoc=2)
    t.insert(1, 50, 1)
    assert t.insert(1, 60, 3) is None
    assert t.lookup(1) == 60
    assert t.entry(1).priority == 3
    assert t.occupancy() == 1
    assert t.overwrites == 1


def test_capacity_one_set_counts():
    t = table(assoc=1)
    evictions = [t.insert(k, k + 1, 3) for k in (1, 2, 3)]
    assert t.occupancy() == 1
    assert sum(e is not None for e in evictions) == 2
    assert t.insertions - t.replacements == t.occupancy()


def test_peek_does_not_touch_state():
    t = table(assoc=2)
    t.insert(1, 11, 3)
    t.insert(2, 12, 3)
    t.peek(1)
    assert t.insert(3, 13, 3).key == 1


def test_priority_range():
    with pytest.raises(ValueError):
        table().insert(1, 2, 4)


def test_table_config_limits():
    with pytest.raises(ValueError):
        TableConfig(3, 12)
    with pytest.raises(ValueError):
        TableConfig(2048, 12 * 9)
    cfg = TableConfig.from_cache(CacheConfig(metadata_ways=8))
    assert cfg.entry_capacity == MAX_TABLE_ENTRIES == 196_608


def test_storage_report_values():
    r = storage_report(196_608)
    assert r.replacement_bits == 393_216
    assert r.replacement_bits // 8 == 48 * 1024
    assert storage_report(12).payload_bits == 492
    assert storage_report(98_304).replacement_bits // 8 == 24 * 1024
    assert r.total_bits == r.payload_bits + r.replacement_bits


# ----------------------------------------------------------------- SRRIP


class RefSrrip:
    """Reference SRRIP set: fixed way array, rrpv per way."""

    def __init__(self, ways):
        self.keys = [None] * ways
        self.rrpv = [3] * ways

    def access(self, key):
        if key in self.keys:
            self.rrpv[self.keys.index(key)] = 0
            return None
        if None in self.keys:
            w = self.keys.index(None)
            self.keys[w] = key
            self.rrpv[w] = 2
            return None
        while 3 not in self.rrpv:
            self.rrpv = [r + 1 for r in self.rrpv]
        w = self.rrpv.index(3)
        old = self.keys[w]
        self.keys[w] = key
        self.rrpv[w] = 2
        return old


def test_srrip_insert_state():
    t = table(assoc=2, mode=ReplacementMode.SRRIP)
    t.insert(1, 2, 3)
    assert t.set_entries(0)[0].srrip_rrpv == RRPV_INSERT
    t.lookup(1)
    assert t.set_entries(0)[0].srrip_rrpv == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 9)), max_size=150), st.integers(1, 5))
def test_srrip_matches_reference(ops, ways):
    t = table(assoc=ways, mode=ReplacementMode.SRRIP)
    ref = RefSrrip(ways)
    for is_lookup, k in ops:
        if is_lookup:
            hit = t.lookup(k) is not None
            assert hit == (k in ref.keys)
            if hit:
                ref.access(k)
        else:
            victim = t.insert(k, k + 100, 3)
            expect = ref.access(k)
            assert (victim.key if victim else None) == expect
        assert [e.key if e else None for e in t.set_entries(0)] == ref.keys
        assert [e.srrip_rrpv for e in t.set_entries(0) if e] == [r for k2, r in zip(ref.keys, ref.rrpv) if k2 is not None]


# ----------------------------------------------------------- properties


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 40), st.integers(0, 3), st.booleans()), max_size=200),
    st.integers(1, 6),
)
def test_victim_legality_and_capacity(ops, assoc):
    t = table(sets=2, assoc=assoc)
    for key, prio, look in ops:
        if look:
            t.lookup(key)
            continue
        s, _ = t.split(key)
        before = [e for e in t.set_entries(s) if e is not None]
        victim = t.insert(key, key + 1, prio)
        if victim is not None:
            low = min(e.priority for e in before)
            assert victim.priority == low
            assert victim.lru_stamp == min(e.lru_stamp for e in before if e.priority == low)
        assert t.occupancy() <= t.capacity
        assert t.occupancy() == t.scan_occupancy() == t.insertions - t.replacements


def test_unbounded_table():
    t = UnboundedMarkovTable()
    t.insert(1 << 50, 3, 3)
    t.insert(1 << 50, 4, 3)
    assert t.lookup(1 << 50) == 4
    assert t.occupancy() == 1 and t.overwrites == 1
