"""Counter profiling with the simplified prefetcher, plus the counter file.

Counter file layout::

    PRFCNT01
    app.insertions=<n>
    app.replacements=<n>
    app.allocated_end=<n>
    app.loop_l=<n>
    pc=0x<hex> issued=<n> useful=<n> misses=<n>
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from tpsim.cache import CacheConfig
from tpsim.engine import PrefetcherConfig
from tpsim.errors import CounterFormatError
from tpsim.metadata import ReplacementMode
from tpsim.simulate import EventSampler, Policy, SimConfig, run_policy
from tpsim.trace import MemoryAccess

COUNTER_MAGIC = "PRFCNT01"
HINT_PC_LIMIT = 128


@dataclass(frozen=True)
class PcCounters:
    pc: int
    issued: int
    useful: int
    demand_misses: int

    def __post_init__(self):
        if min(self.issued, self.useful, self.demand_misses) < 0:
            raise ValueError("negative counter")
        if self.useful > self.issued:
            raise ValueError(f"pc {self.pc:#x}: useful {self.useful} exceeds issued {self.issued}")

    @property
    def accuracy(self) -> float:
        """useful / issued; 0 when nothing was issued."""
        return self.useful / self.issued if self.issued else 0.0


@dataclass(frozen=True)
class AppCounters:
    insertions: int
    replacements: int
    allocated_entries_end: int
    loop_index_l: int = 0

    def __post_init__(self):
        if self.allocated_entries_end != self.insertions - self.replacements:
            raise ValueError("allocated entries must equal insertions - replacements")


class PebsSampler(EventSampler):
    """Every-kth-event sampling per PC and event type, or Bernoulli(1/k) when randomized."""

    def __init__(self, period: int, randomized: bool = False, seed: int = 0):
        if period < 1:
            raise ValueError("sample period must be >= 1")
        self.period = period
        self._rng = random.Random(seed) if randomized else None
        self._seen = {"issue": defaultdict(int), "useful": defaultdict(int)}
        self.samples = {"issue": defaultdict(int), "useful": defaultdict(int)}

    def _event(self, kind: str, pc: int) -> None:
        if self._rng is not None:
            if self._rng.random() * self.period < 1.0:
                self.samples[kind][pc] += 1
            return
        seen = self._seen[kind]
        seen[pc] += 1
        if seen[pc] % self.period == 0:
            self.samples[kind][pc] += 1

    def issue(self, pc: int) -> None:
        self._event("issue", pc)

    def useful(self, pc: int) -> None:
        self._event("useful", pc)

    def scaled(self, kind: str, pc: int) -> int:
        return self.samples[kind].get(pc, 0) * self.period


def profile(
    trace: Sequence[MemoryAccess],
    sample_period: int = 1,
    cache: CacheConfig = CacheConfig(),
    randomized: bool = False,
    seed: int = 0,
) -> Tuple[List[PcCounters], AppCounters]:
    """Run the simplified prefetcher (no filter, 1 MB table, degree 1) over ``trace``.

    Prefetch issue/useful events are sampled with ``sample_period`` and
    scaled back up; demand misses and the application counters are exact.
    """
    if not trace:
        raise ValueError("cannot profile an empty trace")
    config = SimConfig(cache=cache, prefetcher=PrefetcherConfig(simplified_mode=True))
    sampler = PebsSampler(sample_period, randomized, seed)
    result = run_policy(trace, Policy.NOFILTER, _simplified(config), sampler=sampler)

    counters = []
    for pc in sorted(result.per_pc):
        stats = result.per_pc[pc]
        if sample_period == 1 and not randomized:
            issued, useful = stats.issued, stats.useful
        else:
            issued = sampler.scaled("issue", pc)
            useful = min(sampler.scaled("useful", pc), issued)
        counters.append(PcCounters(pc, issued, useful, stats.demand_misses))
    app = AppCounters(result.insertions, result.replacements, result.insertions - result.replacements, 0)
    return counters, app


def _simplified(config: SimConfig) -> SimConfig:
    # all entries carry priority 3, so priority+LRU reduces to plain LRU
    return replace(config, baseline_replacement=ReplacementMode.PROPHET, victim_buffer=False)


def top_miss_pcs(counters: Iterable, k: int = HINT_PC_LIMIT) -> List[int]:
    """PCs by demand misses (descending), ties by PC (ascending), first ``k``."""
    ranked = sorted(counters, key=lambda c: (-c.demand_misses, c.pc))
    return [c.pc for c in ranked[:k]]


# ------------------------------------------------------------- counter file


def format_counters(counters: Iterable[PcCounters], app: AppCounters) -> str:
    lines = [
        COUNTER_MAGIC,
        f"app.insertions={app.insertions}",
        f"app.replacements={app.replacements}",
        f"app.allocated_end={app.allocated_entries_end}",
        f"app.loop_l={app.loop_index_l}",
    ]
    for c in sorted(counters, key=lambda c: c.pc):
        lines.append(f"pc={c.pc:#x} issued={c.issued} useful={c.useful} misses={c.demand_misses}")
    return "\n".join(lines) + "\n"


def write_counters(path, counters: Iterable[PcCounters], app: AppCounters) -> None:
    Path(path).write_text(format_counters(counters, app))


_APP_KEYS = {
    "app.insertions": "insertions",
    "app.replacements": "replacements",
    "app.allocated_end": "allocated_entries_end",
    "app.loop_l": "loop_index_l",
}


def parse_counters(text: str, source: str = "<counters>") -> Tuple[List[PcCounters], AppCounters]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != COUNTER_MAGIC:
        raise CounterFormatError(f"{source}: expected header {COUNTER_MAGIC!r}")
    app: Dict[str, int] = {}
    counters = []
    seen = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        try:
            if line.startswith("app."):
                key, _, value = line.partition("=")
                if key not in _APP_KEYS:
                    raise ValueError(f"unknown application counter {key!r}")
                app[_APP_KEYS[key]] = int(value)
            elif line.startswith("pc="):
                kv = dict(tok.split("=", 1) for tok in line.split())
                if set(kv) != {"pc", "issued", "useful", "misses"}:
                    raise ValueError(f"malformed counter line {line!r}")
                pc = int(kv["pc"], 16)
                if pc in seen:
                    raise ValueError(f"duplicate pc {pc:#x}")
                seen.add(pc)
                counters.append(PcCounters(pc, int(kv["issued"]), int(kv["useful"]), int(kv["misses"])))
            else:
                raise ValueError(f"unrecognised line {line!r}")
        except ValueError as exc:
            raise CounterFormatError(f"{source}:{lineno}: {exc}") from None
    missing = set(_APP_KEYS.values()) - set(app)
    if missing:
        raise CounterFormatError(f"{source}: missing application counters {sorted(missing)}")
    try:
        return counters, AppCounters(**app)
    except ValueError as exc:
        raise CounterFormatError(f"{source}: {exc}") from None


def load_counters(path) -> Tuple[List[PcCounters], AppCounters]:
    path = Path(path)
    return parse_counters(path.read_text(), str(path))
