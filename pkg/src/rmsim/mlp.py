"""Leading-miss counters attached to the shadow tag directory.

Memory stall time is governed by the first miss in each group of overlapping
accesses.  One counter per (core size, way allocation) classifies every
predicted miss as leading or overlapping using only the instruction index
carried with the access:

* distance to the last leading miss at or beyond the ROB size starts a new
  group;
* an arrival whose distance is smaller than the last overlapping distance
  came out of order, which is taken as evidence of a data dependency on the
  last leading miss, so it is counted as leading too.

An exact oracle over dependency-annotated traces is provided for validation.
"""

from __future__ import annotations

from .models import CORE_SIZES

DEFAULT_WINDOW = 4 * max(c.rob for c in CORE_SIZES.values())  # 1024, 10-bit index


class LeadingMissCounter:
    """lm_count plus the last-leading-miss index and last-overlap distance."""

    def __init__(self, rob_size: int, window: int = DEFAULT_WINDOW):
        if rob_size < 1 or rob_size > window:
            raise ValueError("rob_size must be in 1..window")
        self.rob_size = rob_size
        self.window = window
        self.lm_count = 0
        self.last_lm_index = None
        self.last_ov_dist = None

    def observe(self, instruction_index: int) -> bool:
        """Classify one predicted miss; True when it is a leading miss."""
        if self.last_lm_index is None:
            leading = True
        else:
            d = (instruction_index - self.last_lm_index) % self.window
            leading = d >= self.rob_size or (
                self.last_ov_dist is not None and d < self.last_ov_dist)
        if leading:
            self.lm_count += 1
            self.last_lm_index = instruction_index
            self.last_ov_dist = None
        else:
            self.last_ov_dist = (instruction_index - self.last_lm_index) % self.window
        return leading

    def reset(self):
        self.lm_count = 0
        self.last_lm_index = None
        self.last_ov_dist = None


class LmCounterBank:
    """One leading-miss counter per (core size, way allocation)."""

    def __init__(self, rob_by_size=None, max_ways: int = 16, window: int | None = None,
                 sample_period: int = 1):
        self.rob_by_size = dict(rob_by_size or {n: c.rob for n, c in CORE_SIZES.items()})
        self.max_ways = max_ways
        self.window = window or 4 * max(self.rob_by_size.values())
        self.sample_period = sample_period
        self.counters = {
            (size, w): LeadingMissCounter(rob, self.window)
            for size, rob in self.rob_by_size.items()
            for w in range(1, max_ways + 1)
        }

    def observe_miss(self, core_size: str, ways: int, instruction_index: int) -> bool:
        """Feed one predicted miss for a specific (core size, allocation)."""
        key = (core_size, ways)
        if key not in self.counters:
            raise ValueError(f"no counter for {key}")
        return self.counters[key].observe(instruction_index)

    def observe_outcome(self, hit_position, instruction_index: int):
        """Feed a shadow-directory outcome to every counter whose allocation
        would have missed: all of them on a miss, allocations at or below the
        hit's recency position otherwise."""
        limit = self.max_ways if hit_position is None else hit_position
        for w in range(1, limit + 1):
            for size in self.rob_by_size:
                self.counters[(size, w)].observe(instruction_index)

    def leading_misses(self, core_size: str, ways: int) -> int:
        key = (core_size, ways)
        if key not in self.counters:
            raise ValueError(f"no counter for {key}")
        return self.counters[key].lm_count * self.sample_period

    def reset(self):
        for counter in self.counters.values():
            counter.reset()


def oracle_leading_misses(events, rob_size: int, miss_positions) -> int:
    """Exact leading-miss count over an arrival-ordered trace.

    `events` is a sequence of (instruction_index, dep) pairs in arrival order,
    where dep is the trace position of the producing load or None; indices are
    true (unwrapped) values.  A miss leads iff it is not within rob_size
    instructions after the last leading miss or it transitively depends on it.
    """
    deps = []
    for pos, (_, dep) in enumerate(events):
        if dep is not None and dep >= pos:
            raise ValueError(f"event {pos} depends on a later event {dep}")
        deps.append(dep)

    def depends_on(pos, ancestor):
        d = deps[pos]
        while d is not None:
            if d == ancestor:
                return True
            d = deps[d]
        return False

    miss_set = set(miss_positions)
    count = 0
    last_pos = None
    last_index = None
    for pos, (index, _) in enumerate(events):
        if pos not in miss_set:
            continue
        if last_pos is None:
            leading = True
        else:
            within = 0 <= index - last_index < rob_size
            leading = not within or depends_on(pos, last_pos)
        if leading:
            count += 1
            last_pos = pos
            last_index = index
    return count
