"""Merge counters from successive program inputs into one persistent store.

Store file layout::

    PRFSTO01
    meta.loop_l=<n>
    meta.cap_L=<n>
    app.allocated=<n>
    pc=0x<hex> acc=<decimal, 9 places> misses=<n>
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from tpsim.errors import FormatError, StoreVersionError
from tpsim.profiler import AppCounters, PcCounters

STORE_MAGIC = "PRFSTO01"
STORE_FAMILY = "PRFSTO"
DEFAULT_CAP_L = 8


class StoreFormatError(FormatError):
    pass


@dataclass
class CounterStore:
    # pc -> (merged accuracy, merged demand misses)
    per_pc: Dict[int, Tuple[float, int]] = field(default_factory=dict)
    allocated: int = 0
    loop_l: int = 0
    cap_L: int = DEFAULT_CAP_L

    def __post_init__(self):
        if self.cap_L < 1:
            raise ValueError("cap_L must be >= 1")
        if self.loop_l < 0:
            raise ValueError("loop_l must be >= 0")
        for pc, (acc, misses) in self.per_pc.items():
            if not 0.0 <= acc <= 1.0:
                raise ValueError(f"pc {pc:#x}: accuracy {acc} outside [0, 1]")
            if misses < 0:
                raise ValueError(f"pc {pc:#x}: negative miss count")


def merge_pc(old: Optional[float], new: float, l: int, L: int = DEFAULT_CAP_L) -> float:
    """old + (new - old) / min(l + 1, L); just ``new`` when there is no old value."""
    if old is None:
        return new
    if l < 1:
        raise ValueError("loop index must be >= 1 when merging with an existing value")
    if L < 1:
        raise ValueError("L must be >= 1")
    return old + (new - old) / min(l + 1, L)


def merge_app(old: int, new: int) -> int:
    if old < 0 or new < 0:
        raise ValueError("allocated entry counts cannot be negative")
    return max(old, new)


def learn(
    store: Optional[CounterStore],
    counters: Iterable[PcCounters],
    app: AppCounters,
    cap_L: int = DEFAULT_CAP_L,
) -> CounterStore:
    """Return a new store with ``counters`` folded in; the input store is untouched."""
    if store is None:
        store = CounterStore(cap_L=cap_L)
    l, L = store.loop_l, store.cap_L
    per_pc = dict(store.per_pc)
    for c in counters:
        old = per_pc.get(c.pc)
        if old is None or l == 0:
            per_pc[c.pc] = (c.accuracy, c.demand_misses)
        else:
            acc = merge_pc(old[0], c.accuracy, l, L)
            misses = merge_pc(float(old[1]), float(c.demand_misses), l, L)
            per_pc[c.pc] = (min(max(acc, 0.0), 1.0), int(round(misses)))
    return CounterStore(
        per_pc=per_pc,
        allocated=merge_app(store.allocated, app.allocated_entries_end),
        loop_l=l + 1,
        cap_L=L,
    )


# --------------------------------------------------------------- store file


def format_store(store: CounterStore) -> str:
    lines = [
        STORE_MAGIC,
        f"meta.loop_l={store.loop_l}",
        f"meta.cap_L={store.cap_L}",
        f"app.allocated={store.allocated}",
    ]
    for pc in sorted(store.per_pc):
        acc, misses = store.per_pc[pc]
        lines.append(f"pc={pc:#x} acc={acc:.9f} misses={misses}")
    return "\n".join(lines) + "\n"


def write_store(path, store: CounterStore) -> None:
    Path(path).write_text(format_store(store))


_META_KEYS = {"meta.loop_l": "loop_l", "meta.cap_L": "cap_L", "app.allocated": "allocated"}


def is_store_text(text: str) -> bool:
    return text.startswith(STORE_FAMILY)


def parse_store(text: str, source: str = "<store>") -> CounterStore:
    lines = text.splitlines()
    header = lines[0].strip() if lines else ""
    if header != STORE_MAGIC:
        if header.startswith(STORE_FAMILY):
            raise StoreVersionError(f"{source}: store version {header!r} is not supported (expected {STORE_MAGIC!r})")
        raise StoreFormatError(f"{source}: expected header {STORE_MAGIC!r}")
    meta: Dict[str, int] = {}
    per_pc: Dict[int, Tuple[float, int]] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        try:
            if line.startswith(("meta.", "app.")):
                key, _, value = line.partition("=")
                if key not in _META_KEYS:
                    raise ValueError(f"unknown key {key!r}")
                meta[_META_KEYS[key]] = int(value)
            elif line.startswith("pc="):
                kv = dict(tok.split("=", 1) for tok in line.split())
                if set(kv) != {"pc", "acc", "misses"}:
                    raise ValueError(f"malformed store line {line!r}")
                pc = int(kv["pc"], 16)
                if pc in per_pc:
                    raise ValueError(f"duplicate pc {pc:#x}")
                per_pc[pc] = (float(kv["acc"]), int(kv["misses"]))
            else:
                raise ValueError(f"unrecognised line {line!r}")
        except ValueError as exc:
            raise StoreFormatError(f"{source}:{lineno}: {exc}") from None
    missing = set(_META_KEYS.values()) - set(meta)
    if missing:
        raise StoreFormatError(f"{source}: missing {sorted(missing)}")
    try:
        return CounterStore(per_pc=per_pc, **meta)
    except ValueError as exc:
        raise StoreFormatError(f"{source}: {exc}") from None


def load_store(path) -> CounterStore:
    path = Path(path)
    return parse_store(path.read_text(), str(path))

