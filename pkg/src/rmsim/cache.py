"""Set-associative LRU cache structures.

Three pieces live here: a per-core shadow tag directory that records the
recency position of every hit so misses can be predicted for any way count,
a way-partitioned main cache used for ground-truth trace runs, and the trace
file format shared by both.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass


@dataclass(frozen=True)
class CacheGeometry:
    num_sets: int
    max_ways: int
    block_size_bytes: int = 64

    def __post_init__(self):
        if self.num_sets < 1 or self.num_sets & (self.num_sets - 1):
            raise ValueError("num_sets must be a power of two")
        if self.block_size_bytes < 1 or self.block_size_bytes & (self.block_size_bytes - 1):
            raise ValueError("block_size_bytes must be a power of two")
        if self.max_ways < 1:
            raise ValueError("max_ways must be positive")

    def set_index(self, address: int) -> int:
        return (address // self.block_size_bytes) % self.num_sets

    def tag(self, address: int) -> int:
        return (address // self.block_size_bytes) // self.num_sets


@dataclass
class AccessRecord:
    """One memory access: block address plus the issuing instruction's index
    within the fixed modular window. dep_index optionally points at the trace
    position of the load this one consumes."""

    address: int
    instruction_index: int
    is_load: bool = True
    dep_index: int | None = None


class RecencyProfile:
    """Hit counters per recency position plus the shadow-directory miss count."""

    def __init__(self, max_ways: int):
        self.hits_per_position = [0] * max_ways
        self.atd_misses = 0
        self.total_accesses = 0

    def record_hit(self, position: int):
        self.hits_per_position[position] += 1
        self.total_accesses += 1

    def record_miss(self):
        self.atd_misses += 1
        self.total_accesses += 1


def predict_misses(profile: RecencyProfile, ways: int, sample_period: int = 1) -> int:
    """Predicted miss count for a cache restricted to `ways` ways.

    Every hit at a recency position at or beyond the allocation would have
    missed, plus all outright misses; scaled up by the set-sampling period.
    """
    if not 1 <= ways <= len(profile.hits_per_position):
        raise ValueError(f"way count {ways} outside 1..{len(profile.hits_per_position)}")
    return (profile.atd_misses + sum(profile.hits_per_position[ways:])) * sample_period


class AtdDirectory:
    """Per-core shadow tag directory.

    Observes the core's full access stream unfiltered by the active partition
    and tracks an LRU stack of max_ways tags per (sampled) set.
    """

    def __init__(self, geometry: CacheGeometry, sample_period: int = 1):
        if sample_period < 1:
            raise ValueError("sample_period must be >= 1")
        self.geometry = geometry
        self.sample_period = sample_period
        self._sets = {}  # set index -> list of tags, MRU first
        self.profile = RecencyProfile(geometry.max_ways)

    def is_sampled(self, address: int) -> bool:
        return self.geometry.set_index(address) % self.sample_period == 0

    def access(self, rec: AccessRecord):
        """Look up one access.  Returns the pre-promotion recency position on a
        hit, or None on a miss; the stack and counters are updated either way."""
        idx = self.geometry.set_index(rec.address)
        if idx % self.sample_period != 0:
            raise ValueError("access maps to a set outside the sampling pattern")
        tag = self.geometry.tag(rec.address)
        stack = self._sets.setdefault(idx, [])
        try:
            position = stack.index(tag)
        except ValueError:
            position = None
        if position is None:
            self.profile.record_miss()
            stack.insert(0, tag)
            if len(stack) > self.geometry.max_ways:
                stack.pop()
            return None
        del stack[position]
        stack.insert(0, tag)
        self.profile.record_hit(position)
        return position


class PartitionedCache:
    """Shared LLC with per-core way masks.

    A core's lookup and replacement are confined to its own ways; LRU order is
    kept per set via access stamps.  Repartitioning only swaps masks, so lines
    stranded outside a core's new mask age out as the new owner replaces them.
    """

    def __init__(self, geometry: CacheGeometry, way_masks: dict):
        self.geometry = geometry
        self._tags = [[None] * geometry.max_ways for _ in range(geometry.num_sets)]
        self._stamps = [[0] * geometry.max_ways for _ in range(geometry.num_sets)]
        self._clock = 0
        self.miss_count = {}
        self.hit_count = {}
        self.way_masks = {}
        self.set_way_masks(way_masks)

    def set_way_masks(self, way_masks: dict):
        seen = set()
        for core_id, ways in way_masks.items():
            ways = tuple(ways)
            if not ways:
                raise ValueError(f"core {core_id} has an empty way mask")
            for w in ways:
                if not 0 <= w < self.geometry.max_ways:
                    raise ValueError(f"way {w} outside cache associativity")
                if w in seen:
                    raise ValueError(f"way {w} assigned to more than one core")
                seen.add(w)
            self.way_masks[core_id] = ways
            self.miss_count.setdefault(core_id, 0)
            self.hit_count.setdefault(core_id, 0)

    def access(self, core_id, rec: AccessRecord) -> bool:
        """Resolve one access within the core's mask.  Returns True on a hit."""
        mask = self.way_masks.get(core_id)
        if not mask:
            raise ValueError(f"core {core_id} has no way mask")
        idx = self.geometry.set_index(rec.address)
        tag = self.geometry.tag(rec.address)
        tags = self._tags[idx]
        stamps = self._stamps[idx]
        self._clock += 1
        for w in mask:
            if tags[w] == tag:
                stamps[w] = self._clock
                self.hit_count[core_id] += 1
                return True
        victim = None
        for w in mask:
            if tags[w] is None:
                victim = w
                break
        if victim is None:
            victim = min(mask, key=lambda w: stamps[w])
        tags[victim] = tag
        stamps[victim] = self._clock
        self.miss_count[core_id] += 1
        return False


def simulate_lru_misses(records, num_sets: int, ways: int, block_size: int = 64) -> int:
    """Directly simulate a `ways`-way LRU cache and count misses.

    Independent reference path for validating shadow-directory predictions.
    """
    return sum(simulate_lru_outcomes(records, num_sets, ways, block_size))


def simulate_lru_outcomes(records, num_sets: int, ways: int, block_size: int = 64):
    """Per-access miss flags (True = miss) from a direct LRU simulation."""
    sets = [OrderedDict() for _ in range(num_sets)]
    outcomes = []
    for rec in records:
        block = rec.address // block_size
        lru = sets[block % num_sets]  # least-recent first, most-recent last
        tag = block // num_sets
        if tag in lru:
            lru.move_to_end(tag)
            outcomes.append(False)
        else:
            outcomes.append(True)
            lru[tag] = True
            if len(lru) > ways:
                lru.popitem(last=False)
    return outcomes


def write_trace(path, records):
    """One access per line: address(hex) instruction_index(decimal) is_load(0/1)
    with an optional trailing dep_index column."""
    with open(path, "w") as fh:
        for rec in records:
            line = f"{rec.address:x} {rec.instruction_index} {int(rec.is_load)}"
            if rec.dep_index is not None:
                line += f" {rec.dep_index}"
            fh.write(line + "\n")


def read_trace(path):
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (3, 4):
                raise ValueError(f"{path}:{line_no}: expected 3 or 4 fields")
            dep = int(parts[3]) if len(parts) == 4 else None
            records.append(AccessRecord(int(parts[0], 16), int(parts[1]),
                                        bool(int(parts[2])), dep))
    return records
