"""Temporal prefetch engine: training, Markov-chain lookup, per-PC stats."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional

from tpsim.cache import DemandResult, FillResult, Outcome
from tpsim.hints import DEFAULT_HINT, Hint
from tpsim.metadata import MAX_PRIORITY, MetadataTable, ReplacementMode, UnboundedMarkovTable
from tpsim.trace import MemoryAccess
from tpsim.victim import VictimBuffer

CONF_MAX = 15
CONF_THRESHOLD = 8
CONF_INIT = CONF_THRESHOLD
_GLOBAL = object()


class InsertionMode(enum.Enum):
    PROPHET_HINTS = "ProphetHints"
    NO_FILTER = "NoFilter"
    PATTERN_CONF = "PatternConfBaseline"


class TrainingScope(enum.Enum):
    PER_PC = "per_pc"
    GLOBAL = "global"


@dataclass(frozen=True)
class PrefetcherConfig:
    degree: int = 1
    insertion_mode: InsertionMode = InsertionMode.NO_FILTER
    replacement_mode: ReplacementMode = ReplacementMode.PROPHET
    victim_buffer_enabled: bool = False
    simplified_mode: bool = False
    training_scope: TrainingScope = TrainingScope.PER_PC
    candidates_per_entry: int = 1
    vb_entries: int = 65536
    vb_ways: int = 16

    def __post_init__(self):
        if self.simplified_mode:
            object.__setattr__(self, "insertion_mode", InsertionMode.NO_FILTER)
            object.__setattr__(self, "degree", 1)
            object.__setattr__(self, "victim_buffer_enabled", False)
        if self.degree < 1:
            raise ValueError("degree must be >= 1")


class PrefetchEngine:
    """Trains a Markov table on the access stream and proposes prefetches.

    ``access()`` is the per-record entry point: it looks the current line up
    (emitting up to ``degree`` chained targets plus victim-buffer
    alternatives) and then trains ``previous -> current``.
    """

    def __init__(self, table, config: PrefetcherConfig = PrefetcherConfig(), victim_buffer: Optional[VictimBuffer] = None):
        self.table = table
        self.config = config
        self.degree = config.degree
        self.mode = config.insertion_mode
        self.victim_buffer = victim_buffer if config.victim_buffer_enabled else None
        self.per_pc = config.training_scope is TrainingScope.PER_PC
        # CSR can switch the hint-driven insertion filter off while keeping priorities
        self.honor_insert_bits = True
        self.last_addr_by_pc: Dict[object, int] = {}
        self.pattern_conf: Dict[int, int] = {}
        self.issued: Dict[int, int] = defaultdict(int)
        self.useful: Dict[int, int] = defaultdict(int)
        self.fills = 0

    # ------------------------------------------------------------- training

    def train(self, access: MemoryAccess, hint: Optional[Hint] = None) -> None:
        pc = access.pc
        cur = access.line_addr
        key = pc if self.per_pc else _GLOBAL
        prev = self.last_addr_by_pc.get(key)
        mode = self.mode
        priority = MAX_PRIORITY
        allowed = True
        if mode is InsertionMode.PROPHET_HINTS:
            h = hint or DEFAULT_HINT
            if self.honor_insert_bits and not h.insert_bit:
                return
            priority = h.priority
        elif mode is InsertionMode.PATTERN_CONF:
            conf = self.pattern_conf.get(pc, CONF_INIT)
            if prev is not None:
                stored = self.table.peek(prev)
                if stored is not None:
                    if stored == cur:
                        conf = min(CONF_MAX, conf + 1)
                    else:
                        conf = max(0, conf - 1)
            self.pattern_conf[pc] = conf
            allowed = conf >= CONF_THRESHOLD
        self.last_addr_by_pc[key] = cur
        if prev is None or prev == cur or not allowed:
            return
        self._insert(prev, cur, priority)

    def _insert(self, prev: int, cur: int, priority: int) -> None:
        vb = self.victim_buffer
        if vb is not None:
            old = self.table.entry(prev)
            if old is not None and old.target_for(prev) != cur:
                # a displaced target is an eviction of that correlation
                vb.vb_insert(old)
        evicted = self.table.insert(prev, cur, priority)
        if evicted is not None and vb is not None:
            vb.vb_insert(evicted)

    # ------------------------------------------------------------ prefetch

    def on_demand(self, access: MemoryAccess) -> List[int]:
        trigger = access.line_addr
        lookup = self.table.lookup
        vb = self.victim_buffer
        out: List[int] = []
        seen = {trigger}
        key = trigger
        for _ in range(self.degree):
            target = lookup(key)
            if target is None:
                break
            if target not in seen:
                seen.add(target)
                out.append(target)
            if vb is not None:
                for extra in vb.vb_lookup(key, target):
                    if extra not in seen:
                        seen.add(extra)
                        out.append(extra)
            key = target
        return out

    def access(self, access: MemoryAccess, hint: Optional[Hint] = None) -> List[int]:
        if (
            self.mode is InsertionMode.PROPHET_HINTS
            and self.honor_insert_bits
            and hint is not None
            and not hint.insert_bit
        ):
            # filtered requests are dropped before reaching the prefetcher
            return []
        targets = self.on_demand(access)
        self.train(access, hint)
        return targets

    # ----------------------------------------------------------- accounting

    def record_issue(self, pc: int, result: FillResult) -> None:
        self.issued[pc] += 1
        if result is FillResult.INSERTED:
            self.fills += 1

    def record_useful(self, pc: int) -> None:
        self.useful[pc] += 1

    def record_outcome(self, event) -> None:
        """Feed a cache event back: a DemandResult or an ``(pc, FillResult)`` issue."""
        if isinstance(event, DemandResult):
            if event.outcome is Outcome.HIT_ON_PREFETCH:
                self.record_useful(event.issuing_pc)
        else:
            pc, result = event
            self.record_issue(pc, result)

    def accuracy(self, pc: int) -> Optional[float]:
        issued = self.issued.get(pc, 0)
        if not issued:
            return None
        return self.useful.get(pc, 0) / issued


def make_engine(
    config: PrefetcherConfig,
    table_config=None,
) -> PrefetchEngine:
    """Engine with a fresh table (unbounded when ``table_config`` is None)."""
    table = UnboundedMarkovTable() if table_config is None else MetadataTable(table_config)
    vb = None
    if config.victim_buffer_enabled:
        vb = VictimBuffer(config.vb_entries, config.vb_ways, config.candidates_per_entry)
    return PrefetchEngine(table, config, vb)
