import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpsim.cache import CacheConfig
from tpsim.engine import PrefetcherConfig
from tpsim.errors import UsageError
from tpsim.hints import CsrState, HintEntry
from tpsim.metadata import ReplacementMode
from tpsim.simulate import Policy, SimConfig, coverage, run_policy, simulate
from tpsim.trace import NOISE_PC, TEMPORAL_PC, MemoryAccess, Pattern, TraceSpec, generate_trace

SMALL = CacheConfig.from_geometry(32, 16, 8)
CFG = SimConfig(cache=SMALL)


def loop(n, reps, seed=0):
    # 2^15 lines = set index + tag of a 32-set table, so no two addresses alias
    return generate_trace(TraceSpec(pattern=Pattern.TEMPORAL_LOOP, unique_addrs=n, repetitions=reps, seed=seed, addr_space_lines=1 << 15))


def test_nopf_baseline():
    r = simulate(loop(300, 3), Policy.NOPF, CFG)
    assert r.coverage == 0 and r.issued == 0
    assert r.traffic_proxy == r.demand_misses


def test_temporal_loop_fitting_table_coverage():
    r = simulate(loop(1000, 25), Policy.NOFILTER, CFG)
    assert r.coverage >= 0.95


def test_simplified_steady_state():
    # only the first pass and the second pass's loop head miss
    cfg = SimConfig(cache=SMALL, prefetcher=PrefetcherConfig(simplified_mode=True), baseline_replacement=ReplacementMode.PROPHET, victim_buffer=False)
    for reps in (2, 3, 5):
        r = run_policy(loop(1000, reps), Policy.NOFILTER, cfg)
        assert r.demand_misses == 1000 + 1


def test_prophet_requires_manifest():
    with pytest.raises(UsageError):
        simulate(loop(10, 2), Policy.PROPHET, CFG)


def test_prophet_disabled_falls_back_to_nofilter():
    tr = generate_trace(TraceSpec(pattern=Pattern.INTERLEAVED_NOISE, unique_addrs=500, repetitions=3, noise_ratio=0.5))
    manifest = (CsrState(prophet_enabled=False, metadata_ways=2), [HintEntry(NOISE_PC, 0)])
    a = run_policy(tr, Policy.PROPHET, CFG, manifest)
    b = run_policy(tr, Policy.NOFILTER, CFG)
    assert (a.demand_misses, a.issued, a.useful) == (b.demand_misses, b.issued, b.useful)


def test_prophet_uses_csr_ways_and_filters():
    tr = generate_trace(TraceSpec(pattern=Pattern.INTERLEAVED_NOISE, unique_addrs=500, repetitions=3, noise_ratio=0.5))
    manifest = (CsrState(metadata_ways=3), [HintEntry(NOISE_PC, 0), HintEntry(TEMPORAL_PC, 1, 3)])
    r = run_policy(tr, Policy.PROPHET, CFG, manifest)
    assert r.metadata_ways == 3
    assert r.per_pc.get(NOISE_PC).issued == 0
    fixed = (CsrState(metadata_ways=3, resizing_from_profile=False), manifest[1])
    assert run_policy(tr, Policy.PROPHET, CFG, fixed).metadata_ways == 8


def test_insertion_policy_disabled_keeps_noise():
    tr = generate_trace(TraceSpec(pattern=Pattern.INTERLEAVED_NOISE, unique_addrs=500, repetitions=3, noise_ratio=0.5))
    manifest = (CsrState(metadata_ways=3, insertion_policy_enabled=False), [HintEntry(NOISE_PC, 0)])
    r = run_policy(tr, Policy.PROPHET, CFG, manifest)
    assert r.insertions > 1500


def test_storage_breakdown_defaults():
    tr = loop(50, 2)
    r = simulate(tr, Policy.PROPHET, SimConfig(), (CsrState(metadata_ways=8), []))
    assert r.storage_bits["replacement_state"] == 393_216
    assert r.storage_bits["hint_buffer"] == 1536
    assert r.storage_bits["victim_buffer"] == 2_818_048
    assert simulate(tr, Policy.NOPF).storage_bits["metadata_payload"] == 0


def test_coverage_formula():
    assert coverage(100, 40) == 0.6
    assert coverage(0, 0) == 0.0


def test_l1_fills_do_not_count_as_demand():
    tr = generate_trace(TraceSpec(pattern=Pattern.STRIDED_KERNEL, unique_addrs=400, repetitions=2, l1_stride_prefetch=True))
    r = simulate(tr, Policy.NOFILTER, CFG)
    assert r.demand_accesses == 800


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(list(Pattern)), st.integers(0, 1000), st.sampled_from(list(Policy)))
def test_report_invariants(pattern, seed, policy):
    tr = generate_trace(TraceSpec(pattern=pattern, unique_addrs=300, repetitions=3, noise_ratio=0.3, seed=seed))
    manifest = (CsrState(metadata_ways=4), [HintEntry(NOISE_PC, 0)])
    r = simulate(tr, policy, CFG, manifest)
    assert r.coverage <= 1
    assert 0 <= r.accuracy <= 1
    assert r.traffic_proxy >= r.demand_misses
    assert r.useful <= r.issued
    assert sum(s.issued for s in r.per_pc.values()) == r.issued


def test_deterministic():
    rng = random.Random(0)
    tr = [MemoryAccess(rng.choice([1, 2]), rng.randrange(2000)) for _ in range(5000)]
    a = simulate(tr, Policy.PATTERNCONF, CFG)
    b = simulate(tr, Policy.PATTERNCONF, CFG)
    assert a == b
