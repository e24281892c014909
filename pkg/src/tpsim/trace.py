"""Memory-access records, trace files, and synthetic trace generation.

A trace is a plain list of :class:`MemoryAccess` records in access order.
There are no timestamps; everything downstream is order-driven.

Binary layout: the 8-byte magic ``PRFTRC01`` followed by 17-byte
little-endian records ``(pc: u64, line_addr: u64, kind: u8)``.
Text layout: a ``pc,line_addr,kind`` header, then ``0x<hex>,0x<hex>,D|P`` rows.
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from tpsim.errors import TraceFormatError, TraceParseError, UnsupportedSpecError

LINE_ADDR_BITS = 58
BINARY_MAGIC = b"PRFTRC01"
TEXT_HEADER = "pc,line_addr,kind"
_RECORD = struct.Struct("<QQB")

MAX_FANOUT = 4
# Markov-target counts per address; the residual tail (>3 targets) is folded into 4.
DEFAULT_FANOUT_DIST: Tuple[Tuple[int, float], ...] = (
    (1, 0.5485),
    (2, 0.2088),
    (3, 0.0971),
    (4, 0.1456),
)

TEMPORAL_PC = 0x400A10
NOISE_PC = 0x400B24
CHASE_PC = 0x400C38
STRIDE_PC = 0x400D4C
MULTI_PC = 0x400E60

TEMPORAL_BASE = 1 << 26
CHASE_BASE = 1 << 27
STRIDE_BASE = 3 << 26
NOISE_BASE = 1 << 36  # above the 31-bit target window, like a separate mapping
NOISE_SPACE = 1 << 28


class AccessKind(enum.IntEnum):
    DEMAND = 0
    L1_PREFETCH_FILL = 1


@dataclass(frozen=True, slots=True)
class MemoryAccess:
    pc: int
    line_addr: int
    kind: AccessKind = AccessKind.DEMAND

    def __post_init__(self):
        if not 0 <= self.pc < 1 << 64:
            raise ValueError(f"pc out of range: {self.pc:#x}")
        if not 0 <= self.line_addr < 1 << LINE_ADDR_BITS:
            raise ValueError(f"line address exceeds {LINE_ADDR_BITS} bits: {self.line_addr:#x}")
        if not isinstance(self.kind, AccessKind):
            object.__setattr__(self, "kind", AccessKind(self.kind))

    @property
    def is_demand(self) -> bool:
        return self.kind is AccessKind.DEMAND


class TraceFormat(enum.Enum):
    BINARY = "binary"
    TEXT = "text"


class Pattern(enum.Enum):
    TEMPORAL_LOOP = "TemporalLoop"
    INTERLEAVED_NOISE = "InterleavedNoise"
    MULTI_TARGET = "MultiTarget"
    POINTER_CHASE = "PointerChase"
    STRIDED_KERNEL = "StridedKernel"
    MIXED = "Mixed"


@dataclass(frozen=True)
class TraceSpec:
    pattern: Pattern = Pattern.TEMPORAL_LOOP
    unique_addrs: int = 1024
    repetitions: int = 4
    noise_ratio: float = 0.0
    target_fanout_dist: Tuple[Tuple[int, float], ...] = DEFAULT_FANOUT_DIST
    seed: int = 0
    stride: int = 1
    # Temporal addresses are drawn from this many lines; keep it small to limit tag aliasing.
    addr_space_lines: int = 1 << 20
    l1_stride_prefetch: bool = False

    def __post_init__(self):
        if isinstance(self.pattern, str):
            object.__setattr__(self, "pattern", Pattern(self.pattern))
        object.__setattr__(
            self, "target_fanout_dist", tuple((int(f), float(p)) for f, p in self.target_fanout_dist)
        )
        if self.unique_addrs < 1:
            raise ValueError("unique_addrs must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 0.0 <= self.noise_ratio <= 1.0:
            raise ValueError("noise_ratio must lie in [0, 1]")
        if not self.target_fanout_dist:
            raise ValueError("target_fanout_dist is empty")
        total = sum(p for _, p in self.target_fanout_dist)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fanout probabilities sum to {total}, not 1")
        if any(p < 0 for _, p in self.target_fanout_dist):
            raise ValueError("negative fanout probability")
        if any(f < 1 for f, _ in self.target_fanout_dist):
            raise ValueError("fanout must be >= 1")
        if self.addr_space_lines < self.unique_addrs:
            raise ValueError("addr_space_lines smaller than unique_addrs")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit value")


# --------------------------------------------------------------------------- I/O


def write_trace(accesses: Iterable[MemoryAccess], path, fmt: TraceFormat = TraceFormat.BINARY) -> None:
    path = Path(path)
    if fmt is TraceFormat.BINARY:
        with path.open("wb") as f:
            f.write(BINARY_MAGIC)
            pack = _RECORD.pack
            f.write(b"".join(pack(a.pc, a.line_addr, int(a.kind)) for a in accesses))
    else:
        lines = [TEXT_HEADER]
        for a in accesses:
            lines.append(f"{a.pc:#x},{a.line_addr:#x},{'D' if a.kind is AccessKind.DEMAND else 'P'}")
        path.write_text("\n".join(lines) + "\n")


def load_trace(path, fmt: Optional[TraceFormat] = None) -> List[MemoryAccess]:
    """Read a trace file.

    With ``fmt=None`` the format is sniffed from the first bytes. A file
    that matches neither the binary magic nor the text header raises
    :class:`TraceFormatError`; bad records raise :class:`TraceParseError`
    carrying the byte offset (binary) or 1-based line number (text).
    """
    data = Path(path).read_bytes()
    if fmt is None:
        if data.startswith(BINARY_MAGIC):
            fmt = TraceFormat.BINARY
        elif data.split(b"\n", 1)[0].strip() == TEXT_HEADER.encode():
            fmt = TraceFormat.TEXT
        else:
            raise TraceFormatError(f"{path}: unrecognised trace format")
    if fmt is TraceFormat.BINARY:
        return _parse_binary(data, path)
    return _parse_text(data, path)


def _parse_binary(data: bytes, path) -> List[MemoryAccess]:
    if not data.startswith(BINARY_MAGIC):
        raise TraceFormatError(f"{path}: bad magic {data[:8]!r}")
    body = memoryview(data)[len(BINARY_MAGIC):]
    if len(body) % _RECORD.size:
        whole = len(body) // _RECORD.size
        raise TraceParseError(
            f"{path}: truncated record", len(BINARY_MAGIC) + whole * _RECORD.size
        )
    out = []
    for i, (pc, line, kind) in enumerate(_RECORD.iter_unpack(body)):
        try:
            out.append(MemoryAccess(pc, line, AccessKind(kind)))
        except ValueError as exc:
            raise TraceParseError(f"{path}: {exc}", len(BINARY_MAGIC) + i * _RECORD.size) from None
    return out


def _parse_text(data: bytes, path) -> List[MemoryAccess]:
    lines = data.decode("ascii", errors="replace").splitlines()
    if not lines or lines[0].strip() != TEXT_HEADER:
        raise TraceFormatError(f"{path}: missing header {TEXT_HEADER!r}")
    out = []
    for lineno, raw in enumerate(lines[1:], start=2):
        row = raw.strip()
        if not row:
            continue
        parts = row.split(",")
        try:
            if len(parts) != 3 or parts[2] not in ("D", "P"):
                raise ValueError(f"expected 'pc,line_addr,D|P', got {row!r}")
            pc = int(parts[0], 16)
            line = int(parts[1], 16)
            kind = AccessKind.DEMAND if parts[2] == "D" else AccessKind.L1_PREFETCH_FILL
            out.append(MemoryAccess(pc, line, kind))
        except ValueError as exc:
            raise TraceParseError(f"{path}: {exc}", f"line {lineno}") from None
    return out


# --------------------------------------------------------------------- generator


def generate_trace(spec: TraceSpec) -> List[MemoryAccess]:
    rng = random.Random(spec.seed)
    pattern = spec.pattern
    if pattern is Pattern.TEMPORAL_LOOP:
        out = _demand(TEMPORAL_PC, _temporal_loop(spec, rng))
    elif pattern is Pattern.INTERLEAVED_NOISE:
        out = _with_noise(_demand(TEMPORAL_PC, _temporal_loop(spec, rng)), spec.noise_ratio, rng)
    elif pattern is Pattern.MULTI_TARGET:
        out = _demand(MULTI_PC, _multi_target(spec, rng))
    elif pattern is Pattern.POINTER_CHASE:
        out = _demand(CHASE_PC, _pointer_chase(spec, rng))
    elif pattern is Pattern.STRIDED_KERNEL:
        out = _demand(STRIDE_PC, _strided(spec))
    else:
        streams = [
            _demand(TEMPORAL_PC, _temporal_loop(spec, rng)),
            _demand(CHASE_PC, _pointer_chase(spec, rng)),
            _demand(STRIDE_PC, _strided(spec)),
        ]
        out = _with_noise(_random_merge(streams, rng), spec.noise_ratio, rng)
    if spec.l1_stride_prefetch:
        out = add_l1_stride_prefetches(out)
    return out


def _demand(pc: int, lines: Sequence[int]) -> List[MemoryAccess]:
    return [MemoryAccess(pc, line) for line in lines]


def _temporal_loop(spec: TraceSpec, rng: random.Random) -> List[int]:
    offsets = rng.sample(range(spec.addr_space_lines), spec.unique_addrs)
    loop = [TEMPORAL_BASE + off for off in offsets]
    return loop * spec.repetitions


def _pointer_chase(spec: TraceSpec, rng: random.Random) -> List[int]:
    # heap-like node addresses visited as one cycle: walk[0] -> walk[1] -> ... -> walk[0]
    nodes = rng.sample(range(spec.addr_space_lines), spec.unique_addrs)
    rng.shuffle(nodes)
    walk = [CHASE_BASE + node for node in nodes]
    return walk * spec.repetitions


def _strided(spec: TraceSpec) -> List[int]:
    sweep = [STRIDE_BASE + i * spec.stride for i in range(spec.unique_addrs)]
    return sweep * spec.repetitions


def _with_noise(stream: List[MemoryAccess], ratio: float, rng: random.Random) -> List[MemoryAccess]:
    """Interleave uniform-random accesses so that ``ratio`` of the result is noise."""
    if ratio <= 0.0:
        return stream
    if ratio >= 1.0:
        return [MemoryAccess(NOISE_PC, NOISE_BASE + rng.randrange(NOISE_SPACE)) for _ in stream]
    n_noise = round(len(stream) * ratio / (1.0 - ratio))
    total = len(stream) + n_noise
    noise_slots = set(rng.sample(range(total), n_noise))
    out = []
    it = iter(stream)
    for slot in range(total):
        if slot in noise_slots:
            out.append(MemoryAccess(NOISE_PC, NOISE_BASE + rng.randrange(NOISE_SPACE)))
        else:
            out.append(next(it))
    return out


def _random_merge(streams: List[List[MemoryAccess]], rng: random.Random) -> List[MemoryAccess]:
    # order-preserving shuffle of several streams, weighted by what remains in each
    pos = [0] * len(streams)
    remaining = [len(s) for s in streams]
    out = []
    left = sum(remaining)
    while left:
        pick = rng.randrange(left)
        for i, r in enumerate(remaining):
            if pick < r:
                break
            pick -= r
        out.append(streams[i][pos[i]])
        pos[i] += 1
        remaining[i] -= 1
        left -= 1
    return out


def apportion(n: int, dist: Sequence[Tuple[int, float]]) -> List[int]:
    """Largest-remainder split of ``n`` items over the probabilities in ``dist``."""
    raw = [n * p for _, p in dist]
    counts = [int(x) for x in raw]
    short = n - sum(counts)
    by_remainder = sorted(range(len(dist)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in by_remainder[:short]:
        counts[i] += 1
    return counts


def _multi_target(spec: TraceSpec, rng: random.Random) -> List[int]:
    """Walk a graph whose out-degree per node follows the fanout distribution.

    The graph is a Hamiltonian cycle plus extra edges paired so that every
    node's in-degree equals its out-degree; an Eulerian circuit then visits
    each edge once per pass, so every address shows exactly its assigned
    number of distinct successors.
    """
    n = spec.unique_addrs
    too_big = [f for f, p in spec.target_fanout_dist if f > MAX_FANOUT and p > 0]
    if too_big:
        raise UnsupportedSpecError(f"fanout {max(too_big)} exceeds generator cap of {MAX_FANOUT}")
    addrs = [TEMPORAL_BASE + off for off in rng.sample(range(spec.addr_space_lines), n)]
    if n == 1:
        return addrs * (spec.repetitions + 1)

    fanouts = []
    for (f, _), count in zip(spec.target_fanout_dist, apportion(n, spec.target_fanout_dist)):
        fanouts.extend([f] * count)
    if max(fanouts) > n - 1:
        raise UnsupportedSpecError(f"fanout {max(fanouts)} needs more than {n} addresses")
    rng.shuffle(fanouts)
    fan = dict(zip(addrs, fanouts))

    succ = {a: [addrs[(i + 1) % n]] for i, a in enumerate(addrs)}
    out_stubs = [a for a in addrs for _ in range(fan[a] - 1)]
    in_stubs = list(out_stubs)
    rng.shuffle(in_stubs)
    extra = []
    for a, b in zip(out_stubs, in_stubs):
        extra.append((a, len(succ[a])))
        succ[a].append(b)

    def clashes(node, slot, target):
        return target == node or any(t == target for k, t in enumerate(succ[node]) if k != slot)

    budget = 200 * (len(extra) + 1)
    for a, k in extra:
        while clashes(a, k, succ[a][k]):
            budget -= 1
            if budget < 0:
                raise UnsupportedSpecError("could not realise fanout distribution without self/duplicate edges")
            c, j = extra[rng.randrange(len(extra))]
            b, d = succ[a][k], succ[c][j]
            if (c, j) == (a, k) or clashes(a, k, d) or clashes(c, j, b):
                continue
            succ[a][k], succ[c][j] = d, b

    # Hierholzer, iterative
    ptr = dict.fromkeys(addrs, 0)
    stack = [addrs[0]]
    circuit = []
    while stack:
        v = stack[-1]
        if ptr[v] < len(succ[v]):
            stack.append(succ[v][ptr[v]])
            ptr[v] += 1
        else:
            circuit.append(stack.pop())
    circuit.reverse()
    one_pass = circuit[:-1]
    return one_pass * spec.repetitions + [circuit[0]]


def add_l1_stride_prefetches(trace: Sequence[MemoryAccess], degree: int = 8) -> List[MemoryAccess]:
    """Insert the fills a per-PC degree-``degree`` stride prefetcher would issue.

    A PC whose last two line deltas agree (and are nonzero) triggers
    ``degree`` fills ahead of the current access.
    """
    last = {}
    out = []
    for acc in trace:
        out.append(acc)
        if acc.kind is not AccessKind.DEMAND:
            continue
        prev = last.get(acc.pc)
        line = acc.line_addr
        if prev is not None:
            prev_line, prev_delta = prev
            delta = line - prev_line
            if delta and delta == prev_delta:
                for k in range(1, degree + 1):
                    target = line + k * delta
                    if 0 <= target < 1 << LINE_ADDR_BITS:
                        out.append(MemoryAccess(acc.pc, target, AccessKind.L1_PREFETCH_FILL))
            last[acc.pc] = (line, delta)
        else:
            last[acc.pc] = (line, None)
    return out
