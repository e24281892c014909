"""Hint buffer, CSR state, and the hint-manifest file.

Manifest layout::

    PRFHNT01
    csr.prophet_enabled=1
    csr.metadata_ways=6
    csr.insertion_policy_enabled=1
    csr.resizing_from_profile=1
    pc=0x400a10 insert=1 prio=3
    pc=0x400b24 insert=0

``prio`` may be omitted when ``insert=0``. Blank lines and ``#`` comments
are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

from tpsim.errors import DuplicateHintError, HintCapacityError, ManifestError

MANIFEST_MAGIC = "PRFHNT01"
HINT_BUFFER_ENTRIES = 128
PC_TAG_BITS = 9
HINT_BITS = 3
ENTRY_BITS = PC_TAG_BITS + HINT_BITS
MAX_PRIORITY = 3


class Hint(NamedTuple):
    insert_bit: int
    priority: int


# unhinted instructions behave like the unfiltered baseline
DEFAULT_HINT = Hint(1, MAX_PRIORITY)


def pc_tag(pc: int) -> int:
    return (pc >> 2) & ((1 << PC_TAG_BITS) - 1)


@dataclass(frozen=True)
class HintEntry:
    pc: int
    insert_bit: int
    priority: int = 0

    def __post_init__(self):
        if self.insert_bit not in (0, 1):
            raise ValueError(f"insert bit must be 0 or 1, got {self.insert_bit}")
        if not 0 <= self.priority <= MAX_PRIORITY:
            raise ValueError(f"priority must lie in [0, {MAX_PRIORITY}], got {self.priority}")

    @property
    def pc_tag(self) -> int:
        return pc_tag(self.pc)

    @property
    def hint(self) -> Hint:
        return Hint(self.insert_bit, self.priority)


@dataclass(frozen=True)
class CsrState:
    prophet_enabled: bool = True
    metadata_ways: int = 0
    insertion_policy_enabled: bool = True
    resizing_from_profile: bool = True

    @property
    def runtime_policies_enabled(self) -> bool:
        # runtime insertion/resizing step aside whenever the profile-guided path is on
        return not self.prophet_enabled


def storage_bits(entries: int = HINT_BUFFER_ENTRIES) -> int:
    return entries * ENTRY_BITS


class HintBuffer:
    def __init__(self, entries: Iterable[HintEntry] = ()):
        entries = list(entries)
        if len(entries) > HINT_BUFFER_ENTRIES:
            raise HintCapacityError(f"{len(entries)} hints exceed the {HINT_BUFFER_ENTRIES}-entry hint buffer")
        self._by_tag: Dict[int, Hint] = {}
        for e in entries:
            # tag collisions: last writer wins, as the hardware would overwrite
            self._by_tag[e.pc_tag] = e.hint

    def __len__(self):
        return len(self._by_tag)

    def lookup(self, pc: int) -> Optional[Hint]:
        return self._by_tag.get(pc_tag(pc))

    def hint_for(self, pc: int) -> Hint:
        return self._by_tag.get(pc_tag(pc), DEFAULT_HINT)

    def storage_bits(self) -> int:
        return storage_bits()


# ----------------------------------------------------------------- manifest

_BOOL_FIELDS = {"prophet_enabled", "insertion_policy_enabled", "resizing_from_profile"}
_CSR_FIELDS = [f.name for f in fields(CsrState)]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_manifest(text: str, source: str = "<manifest>") -> Tuple[CsrState, List[HintEntry]]:
    csr_values = {}
    hints: List[HintEntry] = []
    seen = set()
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if not header_seen:
            if line != MANIFEST_MAGIC:
                raise ManifestError(f"{where}: expected header {MANIFEST_MAGIC!r}, got {line!r}")
            header_seen = True
            continue
        try:
            if line.startswith("csr."):
                key, _, value = line[4:].partition("=")
                key = key.strip()
                if key not in _CSR_FIELDS:
                    raise ValueError(f"unknown CSR field {key!r}")
                csr_values[key] = _parse_bool(value) if key in _BOOL_FIELDS else int(value)
            elif line.startswith("pc="):
                kv = dict(tok.split("=", 1) for tok in line.split())
                unknown = set(kv) - {"pc", "insert", "prio"}
                if unknown or "insert" not in kv:
                    raise ValueError(f"malformed hint line {line!r}")
                pc = int(kv["pc"], 16)
                insert = int(kv["insert"])
                prio = int(kv.get("prio", 0))
                if pc in seen:
                    raise DuplicateHintError(f"{where}: duplicate hint for pc {pc:#x}")
                seen.add(pc)
                hints.append(HintEntry(pc, insert, prio if insert else 0))
            else:
                raise ValueError(f"unrecognised line {line!r}")
        except DuplicateHintError:
            raise
        except ValueError as exc:
            raise ManifestError(f"{where}: {exc}") from None
        if len(hints) > HINT_BUFFER_ENTRIES:
            raise HintCapacityError(f"{where}: more than {HINT_BUFFER_ENTRIES} hint entries")
    if not header_seen:
        raise ManifestError(f"{source}: empty manifest")
    csr = CsrState(**csr_values)
    if csr.metadata_ways < 0:
        raise ManifestError(f"{source}: negative metadata_ways")
    return csr, hints


def load_manifest(path) -> Tuple[CsrState, List[HintEntry]]:
    path = Path(path)
    return parse_manifest(path.read_text(), str(path))


def format_manifest(csr: CsrState, hints: Iterable[HintEntry]) -> str:
    lines = [MANIFEST_MAGIC]
    for name in _CSR_FIELDS:
        value = getattr(csr, name)
        lines.append(f"csr.{name}={int(value)}")
    for h in hints:
        if h.insert_bit:
            lines.append(f"pc={h.pc:#x} insert=1 prio={h.priority}")
        else:
            lines.append(f"pc={h.pc:#x} insert=0")
    return "\n".join(lines) + "\n"


def write_manifest(path, csr: CsrState, hints: Iterable[HintEntry]) -> None:
    Path(path).write_text(format_manifest(csr, hints))
