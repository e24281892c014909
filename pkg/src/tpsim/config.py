"""key=value run configuration shared by the CLI subcommands.

Keys are ``<section>.<field>`` where section is one of ``cache``,
``prefetcher``, ``analysis``, ``trace`` (mirroring the dataclasses of the
same name) or ``run`` (policy, seed, sample period, learning cap, ...).
Values are converted using the type of the field's default.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional

from tpsim.analysis import AnalysisParams
from tpsim.cache import CacheConfig
from tpsim.engine import PrefetcherConfig
from tpsim.errors import UsageError
from tpsim.learning import DEFAULT_CAP_L
from tpsim.metadata import ReplacementMode
from tpsim.simulate import Policy, SimConfig
from tpsim.trace import TraceSpec


@dataclass(frozen=True)
class RunOptions:
    policy: Policy = Policy.NOFILTER
    seed: int = 0
    sample_period: int = 1
    cap_L: int = DEFAULT_CAP_L
    victim_buffer: bool = True
    baseline_replacement: ReplacementMode = ReplacementMode.SRRIP
    per_pc_csv: bool = False


@dataclass(frozen=True)
class RunConfig:
    cache: CacheConfig = CacheConfig(metadata_ways=8)
    prefetcher: PrefetcherConfig = PrefetcherConfig()
    analysis: AnalysisParams = AnalysisParams()
    trace: TraceSpec = TraceSpec()
    run: RunOptions = RunOptions()
    explicit: frozenset = field(default=frozenset(), compare=False)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            cache=self.cache,
            prefetcher=self.prefetcher,
            baseline_replacement=self.run.baseline_replacement,
            victim_buffer=self.run.victim_buffer,
            seed=self.run.seed,
        )

    def analysis_params(self) -> AnalysisParams:
        # hints are produced for the LLC being simulated unless told otherwise
        if "analysis.llc_sets" in self.explicit:
            return self.analysis
        return replace(self.analysis, llc_sets=self.cache.sets)


_SECTIONS = ("cache", "prefetcher", "analysis", "trace", "run")


def _convert(text: str, default, key: str):
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: not a boolean: {text!r}")
    if isinstance(default, enum.Enum):
        cls = type(default)
        for member in cls:
            if text in (member.value, member.name) or text.lower() == member.name.lower():
                return member
        raise ValueError(f"{key}: expected one of {[m.value for m in cls]}, got {text!r}")
    if isinstance(default, int):
        return int(text, 0)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        # fanout distribution: "1:0.5,2:0.25,3:0.25"
        pairs = []
        for item in text.split(","):
            f, _, p = item.partition(":")
            pairs.append((int(f), float(p)))
        return tuple(pairs)
    return text


def parse_config(text: str, source: str = "<config>", base: RunConfig = RunConfig()) -> RunConfig:
    values: Dict[str, Dict[str, object]] = {s: {} for s in _SECTIONS}
    explicit = set(base.explicit)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        section, _, name = key.partition(".")
        if not sep or section not in _SECTIONS or not name:
            raise UsageError(f"{source}:{lineno}: expected <section>.<field>=<value>, got {line!r}")
        target = getattr(base, section)
        known = {f.name: f for f in fields(target)}
        if name not in known:
            raise UsageError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[section][name] = _convert(value, getattr(target, name), key)
        except ValueError as exc:
            raise UsageError(f"{source}:{lineno}: {exc}") from None
        explicit.add(key)
    try:
        parts = {s: replace(getattr(base, s), **values[s]) for s in _SECTIONS}
    except ValueError as exc:
        raise UsageError(f"{source}: {exc}") from None
    return RunConfig(explicit=frozenset(explicit), **parts)


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    return parse_config(p.read_text(), str(p))


def with_seed(config: RunConfig, seed: Optional[int]) -> RunConfig:
    """Apply a command-line ``--seed`` to the run and the trace generator."""
    if seed is None:
        return config
    return replace(config, run=replace(config.run, seed=seed), trace=replace(config.trace, seed=seed))
