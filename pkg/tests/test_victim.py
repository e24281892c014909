import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpsim.metadata import MetadataEntry
from tpsim.victim import COUNTER_MAX, VictimBuffer, VictimEntry, storage_bits


def evicted(key, target, priority=3):
    return MetadataEntry(tag=0, target=target, priority=priority, key=key)


def test_priority_zero_not_stored():
    vb = VictimBuffer()
    vb.vb_insert(evicted(5, 9, priority=0))
    assert vb.occupancy() == 0


def test_priority_two_stored_with_zero_counter():
    vb = VictimBuffer()
    vb.vb_insert(evicted(5, 9, priority=2))
    s, tag = vb.split(5)
    (entry,) = vb.bucket(s)
    assert entry.use_counter == 0 and entry.tag == tag and entry.target == 9


def test_duplicate_collapses():
    vb = VictimBuffer()
    vb.vb_insert(evicted(5, 9))
    vb.vb_insert(evicted(5, 9))
    assert vb.occupancy() == 1


def test_lookup_returns_other_target():
    vb = VictimBuffer()
    vb.vb_insert(evicted(0xB, 0xD))
    assert vb.vb_lookup(0xB, 0xC) == [0xD]


def test_lookup_empty():
    assert VictimBuffer().vb_lookup(0xB, 0xC) == []


def test_lookup_skips_primary():
    vb = VictimBuffer()
    vb.vb_insert(evicted(0xB, 0xC))
    assert vb.vb_lookup(0xB, 0xC) == []


def test_counter_saturates():
    vb = VictimBuffer()
    vb.vb_insert(evicted(0xB, 0xD))
    for _ in range(5):
        vb.vb_lookup(0xB, 0xC)
    s, _ = vb.split(0xB)
    assert vb.bucket(s)[0].use_counter == COUNTER_MAX


def test_evict_min_counter():
    bucket = [VictimEntry(1, 1, 0, 5), VictimEntry(2, 2, 3, 1), VictimEntry(3, 3, 2, 2)]
    assert VictimBuffer.vb_evict_policy(bucket) == 0


def test_evict_lru_on_tie():
    bucket = [VictimEntry(1, 1, 1, 5), VictimEntry(2, 2, 1, 1), VictimEntry(3, 3, 1, 2)]
    assert VictimBuffer.vb_evict_policy(bucket) == 1


def test_full_set_evicts():
    vb = VictimBuffer(entries=2, ways=2)
    vb.vb_insert(evicted(0, 10))
    vb.vb_insert(evicted(0, 11))
    vb.vb_lookup(0, None)  # touches 11 (the most recent)
    vb.vb_insert(evicted(0, 12))
    assert sorted(e.target for e in vb.bucket(0)) == [11, 12]


def test_candidates_per_entry():
    vb = VictimBuffer(candidates_per_entry=2)
    for t in (20, 21, 22):
        vb.vb_insert(evicted(7, t))
    assert len(vb.vb_lookup(7, 99)) == 2
    with pytest.raises(ValueError):
        VictimBuffer(candidates_per_entry=4)


def test_storage():
    assert storage_bits(65_536) == 2_818_048
    assert storage_bits() // 8 == 344 * 1024
    assert VictimBuffer().num_sets == 4096


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 30), st.integers(0, 3), st.booleans()), max_size=200))
def test_invariants(ops):
    vb = VictimBuffer(entries=16, ways=4, candidates_per_entry=3)
    for key, target, prio, look in ops:
        if look:
            out = vb.vb_lookup(key, target)
            assert target not in out
            assert len(out) == len(set(out))
        else:
            vb.vb_insert(evicted(key, target, prio))
        for s in range(vb.num_sets):
            b = vb.bucket(s)
            assert len(b) <= 4
            assert all(0 <= e.use_counter <= COUNTER_MAX for e in b)
            assert len({(e.tag, e.target) for e in b}) == len(b)
