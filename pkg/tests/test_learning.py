import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpsim.analysis import priority_level
from tpsim.errors import StoreVersionError
from tpsim.learning import (
    CounterStore,
    StoreFormatError,
    format_store,
    learn,
    load_store,
    merge_app,
    merge_pc,
    parse_store,
    write_store,
)
from tpsim.profiler import AppCounters, PcCounters

A, C, E = 0xA0, 0xC0, 0xE0


def counters(**accs):
    return [PcCounters(int(k, 16), 1000, round(v * 1000), 10) for k, v in accs.items()]


def app(n):
    return AppCounters(n, 0, n)


def test_merge_pc_examples():
    assert merge_pc(None, 0.7, 0) == 0.7
    assert merge_pc(0.5, 0.7, 1, 8) == pytest.approx(0.6)
    assert merge_pc(0.5, 0.5, 5) == 0.5
    with pytest.raises(ValueError):
        merge_pc(0.5, 0.7, 0)


def test_merge_app_examples():
    assert merge_app(1000, 2000) == 2000
    assert merge_app(2000, 1000) == 2000
    assert merge_app(0, 0) == 0


def test_learn_from_nothing():
    store = learn(None, [PcCounters(A, 10, 8, 4)], app(100))
    assert store.loop_l == 1
    assert store.per_pc == {A: (0.8, 4)}
    assert store.allocated == 100


def test_learn_union_of_pcs():
    s = learn(None, counters(**{"0xa0": 0.8}), app(10))
    s = learn(s, counters(**{"0xc0": 0.9}), app(5))
    assert s.per_pc[A][0] == pytest.approx(0.8)
    assert s.per_pc[C][0] == pytest.approx(0.9)
    assert s.allocated == 10 and s.loop_l == 2


def test_same_band_stays():
    s = learn(None, counters(**{"0xa0": 0.8}), app(1))
    s = learn(s, counters(**{"0xa0": 0.9}), app(1))
    assert priority_level(s.per_pc[A][0]) == 3


def test_divergent_pc_converges_down():
    s = learn(None, counters(**{"0xe0": 0.9}), app(1))
    prev = 0.9
    gap = 0.8
    for l in range(1, 21):
        s = learn(s, counters(**{"0xe0": 0.1}), app(1))
        cur = s.per_pc[E][0]
        assert 0.1 <= cur <= prev
        # distance to 0.1 shrinks by (1 - 1/min(l+1, 8)) per loop
        gap *= 1 - 1 / min(l + 1, 8)
        assert cur == pytest.approx(0.1 + gap, abs=1e-12)
        prev = cur


def test_same_counters_twice_fixed_point():
    c = counters(**{"0xa0": 0.8, "0xc0": 0.3})
    s1 = learn(None, c, app(9))
    s2 = learn(s1, c, app(9))
    assert s1.per_pc == s2.per_pc


def test_misses_merged_and_rounded():
    s = learn(None, [PcCounters(A, 1, 1, 10)], app(1))
    s = learn(s, [PcCounters(A, 1, 1, 13)], app(1))
    assert s.per_pc[A][1] == 12  # 10 + 3/2 rounds half to even


def test_store_round_trip(tmp_path):
    s = CounterStore({A: (0.123456789, 5), C: (1.0, 0)}, allocated=77, loop_l=3, cap_L=4)
    p = tmp_path / "s.txt"
    write_store(p, s)
    assert load_store(p) == s
    assert "acc=0.123456789 " in p.read_text()
    assert format_store(load_store(p)) == p.read_text()


def test_store_version_mismatch():
    with pytest.raises(StoreVersionError):
        parse_store("PRFSTO02\n")
    with pytest.raises(StoreFormatError):
        parse_store("NOPE\n")
    with pytest.raises(StoreFormatError):
        parse_store("PRFSTO01\nmeta.loop_l=1\n")


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 50), st.integers(1, 16))
def test_merge_bounded(old, new, l, L):
    m = merge_pc(old, new, l, L)
    assert min(old, new) - 1e-15 <= m <= max(old, new) + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 30), st.integers(1, 12))
def test_convergence_rate(initial, v, k, L):
    l = L - 1 if L > 1 else 1
    m = initial
    for i in range(k):
        m = merge_pc(m, v, l + i, L)
    assert abs(m - v) <= (1 - 1 / L) ** k * abs(initial - v) + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=10))
def test_allocated_monotone(sizes):
    s = None
    prev = 0
    for n in sizes:
        s = learn(s, [], app(n))
        assert s.allocated >= prev
        prev = s.allocated
