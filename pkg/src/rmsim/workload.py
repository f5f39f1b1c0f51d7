"""Synthetic application library and ground-truth behavior.

Stands in for a detailed-simulation database: every application is a set of
phase profiles describing, in closed form, how execution time, miss counts,
memory-level parallelism and power respond to (core size, frequency, ways).
The module also synthesizes memory traces whose reuse-distance and miss-group
structure reproduce a profile's miss curve and MLP, categorizes applications
by cache and parallelism sensitivity, and builds scenario workload mixes.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .cache import (AccessRecord, AtdDirectory, CacheGeometry, RecencyProfile,
                    predict_misses, simulate_lru_outcomes)
from .mlp import LmCounterBank, oracle_leading_misses
from .models import CORE_ORDER, CORE_SIZES, IntervalStats, ResourceSetting

WAY_SAMPLES = (2, 4, 6, 8, 10, 12, 14, 16)
CATEGORIES = ("CS-PS", "CS-PI", "CI-PS", "CI-PI")

# Admissible (first-half, second-half) category pairs per scenario.  Kept as
# data so the mix construction can be adjusted without code changes.
SCENARIO_CELLS = {
    1: (("CS-PS", "CS-PS"), ("CS-PI", "CS-PS"), ("CI-PS", "CS-PS"),
        ("CI-PI", "CS-PS"), ("CI-PS", "CS-PI")),
    2: (("CS-PI", "CS-PI"), ("CI-PI", "CS-PI")),
    3: (("CI-PS", "CI-PS"), ("CI-PI", "CI-PS")),
    4: (("CI-PI", "CI-PI"),),
}

# Mix probabilities of the four scenarios, used to weight averaged savings.
SCENARIO_WEIGHTS = {1: 0.47, 2: 0.221, 3: 0.221, 4: 0.088}


@dataclass
class PhaseProfile:
    """Closed-form behavior of one application phase across all settings."""

    name: str
    instructions: int  # instruction count the base times below correspond to
    t0: float  # dispatch-scalable compute time at the baseline setting, s
    t_bp: float  # branch-prediction time at baseline, s
    t_cache: float  # cache-access time at baseline, s
    mpki_points: dict  # sampled ways -> misses per kilo-instruction
    mlp_base: dict  # core size name -> MLP at the baseline allocation
    mlp_w_slope: float  # relative MLP tilt per relative way change
    ilp_eff: dict  # core size name -> dispatch-scaling efficiency, (0, 1]
    mem_accesses_pki: float  # DRAM accesses per kilo-instruction at baseline ways
    p_dyn_base: float  # dynamic power at the baseline setting, W
    contention_penalty: float = 0.0  # extra seconds per miss beyond baseline
    mlp_true: dict | None = None  # (size, ways) -> exact MLP, overrides the analytic form
    mlp_observed: dict | None = None  # (size, ways) -> counter-estimated MLP

    def __post_init__(self):
        pts = sorted(self.mpki_points.items())
        for (_, a), (_, b) in zip(pts, pts[1:]):
            if b > a + 1e-12:
                raise ValueError(f"{self.name}: miss curve must be non-increasing")
        if abs(self.ilp_eff.get("M", 1.0) - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: baseline core must have unit ilp efficiency")

    def mpki(self, ways: float) -> float:
        pts = sorted(self.mpki_points.items())
        if ways <= pts[0][0]:
            return pts[0][1]
        if ways >= pts[-1][0]:
            return pts[-1][1]
        for (w0, m0), (w1, m1) in zip(pts, pts[1:]):
            if w0 <= ways <= w1:
                frac = (ways - w0) / (w1 - w0)
                return m0 + (m1 - m0) * frac
        raise AssertionError("unreachable")

    def misses(self, ways: int, instructions: int) -> float:
        return self.mpki(ways) * instructions / 1000.0

    def mlp_fn(self, size: str, ways: int, w_baseline: int = 8) -> float:
        if self.mlp_true is not None and (size, ways) in self.mlp_true:
            return max(1.0, self.mlp_true[(size, ways)])
        tilt = 1.0 + self.mlp_w_slope * (ways - w_baseline) / w_baseline
        return max(1.0, self.mlp_base[size] * tilt)

    def mlp_for_prediction(self, size: str, ways: int, w_baseline: int = 8) -> float:
        if self.mlp_observed is not None and (size, ways) in self.mlp_observed:
            return max(1.0, self.mlp_observed[(size, ways)])
        return self.mlp_fn(size, ways, w_baseline)


@dataclass
class AppProfile:
    """An application: its phases, their weights, and the per-interval phase
    sequence the simulator replays (repeating until the run ends)."""

    name: str
    phases: list
    weights: list
    phase_trace: list
    category: str | None = None


@dataclass(frozen=True)
class AppCategory:
    cache: str  # "CS" or "CI"
    parallelism: str  # "PS" or "PI"

    @property
    def label(self) -> str:
        return f"{self.cache}-{self.parallelism}"


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: int
    num_cores: int
    seed: int

    def __post_init__(self):
        if self.scenario not in (1, 2, 3, 4):
            raise ValueError("scenario must be 1..4")
        if self.num_cores < 2 or self.num_cores % 2:
            raise ValueError("num_cores must be even and at least 2")


def categorize(app: AppProfile, w_baseline: int = 8, mpki_floor: float = 0.2,
               mpki_variation: float = 0.20, mlp_variation: float = 0.30,
               mlp_floor: float = 2.0) -> AppCategory:
    """Classify an application from its phase profiles.

    Cache-sensitive when shrinking or growing the baseline allocation by half
    moves MPKI by more than the variation threshold (and baseline MPKI clears
    the floor); parallelism-sensitive when MLP moves by more than its
    threshold from the smallest to the largest core and clears the floor on
    the large core.  All statistics are instruction-weighted across phases.
    """
    w_lo, w_hi = w_baseline // 2, w_baseline + w_baseline // 2
    total_w = 0.0
    mpki_lo = mpki_b = mpki_hi = 0.0
    mlp = {size: 0.0 for size in CORE_ORDER}
    for phase, weight in zip(app.phases, app.weights):
        for probe in (w_lo, w_baseline, w_hi):
            if probe not in phase.mpki_points:
                raise ValueError(
                    f"{app.name}/{phase.name}: missing miss-curve sample at {probe} ways")
        share = weight * phase.instructions
        total_w += share
        mpki_lo += share * phase.mpki_points[w_lo]
        mpki_b += share * phase.mpki_points[w_baseline]
        mpki_hi += share * phase.mpki_points[w_hi]
        for size in CORE_ORDER:
            mlp[size] += share * phase.mlp_fn(size, w_baseline)
    mpki_lo, mpki_b, mpki_hi = mpki_lo / total_w, mpki_b / total_w, mpki_hi / total_w
    for size in mlp:
        mlp[size] /= total_w

    if mpki_b >= mpki_floor:
        variation = max(abs(mpki_lo - mpki_b), abs(mpki_hi - mpki_b)) / mpki_b
        cache = "CS" if variation > mpki_variation else "CI"
    else:
        cache = "CI"
    ps = (abs(mlp["L"] - mlp["S"]) / mlp["M"] > mlp_variation) and mlp["L"] >= mlp_floor
    return AppCategory(cache, "PS" if ps else "PI")


def build_scenario(spec: ScenarioSpec, library, cells=None):
    """Pick applications for each core of a scenario workload.

    A (first-half, second-half) category pair is drawn from the scenario's
    admissible cells, then each half is filled with seeded random picks from
    the matching category.  Deterministic under the spec's seed.
    """
    cells = tuple(cells or SCENARIO_CELLS[spec.scenario])
    by_cat = {}
    for app in library:
        cat = app.category or categorize(app).label
        by_cat.setdefault(cat, []).append(app)
    rng = random.Random(spec.seed)
    cell = cells[rng.randrange(len(cells))]
    for cat in cell:
        if not by_cat.get(cat):
            raise ValueError(f"library has no application in category {cat}")
    half = spec.num_cores // 2
    picks = []
    for i in range(spec.num_cores):
        cat = cell[0] if i < half else cell[1]
        apps = by_cat[cat]
        picks.append(apps[rng.randrange(len(apps))])
    return picks


# ---------------------------------------------------------------------------
# Ground truth


@dataclass
class GroundTruth:
    t: float
    e: float
    observed: IntervalStats


def actual_time_energy(profile: PhaseProfile, setting: ResourceSetting, constants):
    """True interval time and energy at a setting, without observed counters."""
    instr = constants.interval_instructions
    scale = instr / profile.instructions
    base = constants.baseline
    f_b, v_b, d_b = base.vf.frequency, base.vf.voltage, base.core.dispatch
    core, f, v = setting.core, setting.vf.frequency, setting.vf.voltage

    misses_w = profile.misses(setting.ways, instr)
    misses_b = profile.misses(base.ways, instr)
    lm_true = misses_w / profile.mlp_fn(core.name, setting.ways, base.ways)
    t0 = profile.t0 * scale * d_b / (core.dispatch * profile.ilp_eff[core.name])
    t1 = (profile.t_bp + profile.t_cache) * scale
    t_mem = lm_true * constants.l_mem + profile.contention_penalty * max(0.0, misses_w - misses_b)
    t = (t0 + t1) * f_b / f + t_mem

    p_dyn = profile.p_dyn_base * (v * v) / (v_b * v_b)
    p_static = constants.power.static_power(core, f)
    dram = profile.mem_accesses_pki * instr / 1000.0 + (misses_w - misses_b)
    e = (p_dyn + p_static) * t + dram * constants.e_mem
    return t, e


def ground_truth(profile: PhaseProfile, setting: ResourceSetting, constants,
                 phase_cache: dict | None = None) -> GroundTruth:
    """Run one interval of a phase at a setting.

    Returns the true time and energy plus the counters a manager would see:
    cycle components at the executed setting, the shadow-directory miss curve,
    the heuristic leading-miss table, and a power sample.  `phase_cache` may
    be passed to reuse the setting-independent curve tables across calls.
    """
    instr = constants.interval_instructions
    scale = instr / profile.instructions
    base = constants.baseline
    f_b, v_b, d_b = base.vf.frequency, base.vf.voltage, base.core.dispatch
    core, f, v = setting.core, setting.vf.frequency, setting.vf.voltage
    f_ratio = f_b / f

    misses_w = profile.misses(setting.ways, instr)
    misses_b = profile.misses(base.ways, instr)
    lm_true = misses_w / profile.mlp_fn(core.name, setting.ways, base.ways)
    t0_run = profile.t0 * scale * d_b / (core.dispatch * profile.ilp_eff[core.name]) * f_ratio
    t_bp_run = profile.t_bp * scale * f_ratio
    t_cache_run = profile.t_cache * scale * f_ratio
    t_mem = lm_true * constants.l_mem + profile.contention_penalty * max(0.0, misses_w - misses_b)
    t = t0_run + t_bp_run + t_cache_run + t_mem

    p_dyn = profile.p_dyn_base * (v * v) / (v_b * v_b)
    p_static = constants.power.static_power(core, f)
    dram = profile.mem_accesses_pki * instr / 1000.0 + (misses_w - misses_b)
    e = (p_dyn + p_static) * t + dram * constants.e_mem

    cached = phase_cache.get(id(profile)) if phase_cache is not None else None
    if cached is None:
        miss_curve = {w: profile.misses(w, instr)
                      for w in range(constants.w_min, constants.w_max + 1)}
        lm_table = {}
        for size in CORE_ORDER:
            for w in range(constants.w_min, constants.w_max + 1):
                m = miss_curve[w]
                lm_table[(size, w)] = (m / profile.mlp_for_prediction(size, w, base.ways)
                                       if m > 0 else 0.0)
        if phase_cache is not None:
            phase_cache[id(profile)] = (miss_curve, lm_table)
    else:
        miss_curve, lm_table = cached

    observed = IntervalStats(
        t_total=t,
        t_bp=t_bp_run,
        t_cache=t_cache_run,
        t_mem=t_mem,
        f_current=f,
        c_current=core,
        w_current=setting.ways,
        mem_accesses=dram,
        miss_curve=miss_curve,
        lm_table=lm_table,
        avg_mlp=profile.mlp_fn(core.name, setting.ways, base.ways),
        p_dyn_sample=p_dyn,
        v_sample=v,
        instructions=instr,
    )
    return GroundTruth(t, e, observed)


# ---------------------------------------------------------------------------
# Trace synthesis
#
# Misses form groups: a leading access, overlapping accesses within the small
# core's window, and optional band members placed so they overlap only under
# the medium or large core's window.  Reuse distances are realized exactly by
# mirroring per-set LRU stacks and touching the block at the target recency
# position.

_A_BAND = (5, 56)  # offsets overlapping under every core size
_DEP_OFFSETS = (1, 4)  # out-of-order dependent arrivals sit below the A band


@dataclass
class TraceTruth:
    """Construction-time facts about a synthesized trace, for validation."""

    true_indices: list
    dep_positions: list
    group_leading: dict  # core size name -> leading misses by construction


class _StackMirror:
    """Mirror of the shadow directory's per-set LRU stacks, used to pick an
    address with a chosen recency position."""

    def __init__(self, num_sets, max_ways, block_size=64):
        self.num_sets = num_sets
        self.max_ways = max_ways
        self.block_size = block_size
        self.stacks = [[] for _ in range(num_sets)]
        self.next_tag = [0] * num_sets

    def address(self, set_idx, tag):
        return (tag * self.num_sets + set_idx) * self.block_size

    def touch(self, set_idx, tag):
        stack = self.stacks[set_idx]
        if tag in stack:
            stack.remove(tag)
        stack.insert(0, tag)
        if len(stack) > self.max_ways:
            stack.pop()

    def pick_at_position(self, rng, position):
        """Address currently at the given recency position, or None if no set
        is deep enough yet."""
        start = rng.randrange(self.num_sets)
        for probe in range(self.num_sets):
            set_idx = (start + probe) % self.num_sets
            if len(self.stacks[set_idx]) > position:
                tag = self.stacks[set_idx][position]
                self.touch(set_idx, tag)
                return self.address(set_idx, tag)
        return None

    def pick_fresh(self, rng):
        set_idx = rng.randrange(self.num_sets)
        tag = self.next_tag[set_idx]
        self.next_tag[set_idx] += 1
        self.touch(set_idx, tag)
        return self.address(set_idx, tag)


def _miss_fractions(profile: PhaseProfile, max_ways: int):
    """Per-way miss fractions of the access stream and per-position hit mass."""
    apki = max(profile.mem_accesses_pki, 1.25 * profile.mpki(2), 1e-9)
    mpki1 = profile.mpki(2) + 0.5 * max(0.0, profile.mpki(2) - profile.mpki(4))
    r = {1: min(1.0, mpki1 / apki)}
    for w in range(2, max_ways + 1):
        r[w] = min(r[w - 1], profile.mpki(w) / apki)
    hit_mass = [max(0.0, 1.0 - r[1])]
    for p in range(1, max_ways):
        hit_mass.append(max(0.0, r[p] - r[p + 1]))
    atd_mass = r[max_ways]
    return r, hit_mass, atd_mass


def _group_mix(profile: PhaseProfile, w_baseline: int, dep_density: float):
    """Group-size mean and band probabilities realizing the MLP targets."""
    mlp_s = profile.mlp_fn("S", w_baseline, w_baseline)
    mlp_m = profile.mlp_fn("M", w_baseline, w_baseline)
    mlp_l = profile.mlp_fn("L", w_baseline, w_baseline)
    dep = dep_density if mlp_l > 1.2 else 0.0
    g_mean = mlp_l * (1.0 + dep)
    p_c = min(0.95, max(0.0, (1.0 + dep) * (mlp_l / mlp_m - 1.0)))
    p_b = min(0.95, max(0.0, (1.0 + dep) * mlp_l * (1.0 / mlp_s - 1.0 / mlp_m)))
    return g_mean, p_b, p_c, dep


def synth_trace(profile: PhaseProfile, length: int, seed: int, num_sets: int = 32,
                max_ways: int = 16, w_baseline: int = 8, dep_density: float = 0.15,
                window: int = 1024):
    """Synthesize a memory access trace for one phase.

    The reuse-distance distribution reproduces the profile's miss curve and
    the miss-group layout realizes its MLP at the baseline allocation.
    Deterministic under the seed.
    """
    records, _ = synth_trace_detailed(profile, length, seed, num_sets, max_ways,
                                      w_baseline, dep_density, window)
    return records


def synth_trace_detailed(profile: PhaseProfile, length: int, seed: int,
                         num_sets: int = 32, max_ways: int = 16,
                         w_baseline: int = 8, dep_density: float = 0.15,
                         window: int = 1024):
    if length < 1:
        raise ValueError("trace length must be positive")
    rng = random.Random(seed)
    r, hit_mass, atd_mass = _miss_fractions(profile, max_ways)
    g_mean, p_b, p_c, dep_prob = _group_mix(profile, w_baseline, dep_density)
    mirror = _StackMirror(num_sets, max_ways)

    r_base = r[w_baseline]
    hits_per_miss = (1.0 - r_base) / r_base if r_base > 1e-9 else None

    # Conditional position distributions for accesses intended to miss or hit
    # at the baseline allocation.
    miss_positions = list(range(w_baseline, max_ways)) + [None]  # None = fresh
    miss_weights = [hit_mass[p] for p in range(w_baseline, max_ways)] + [atd_mass]
    if sum(miss_weights) <= 0:
        miss_weights = [0.0] * (len(miss_positions) - 1) + [1.0]
    hit_positions = list(range(0, w_baseline))
    hit_weights = [hit_mass[p] for p in range(0, w_baseline)]
    if sum(hit_weights) <= 0:
        hit_weights = [1.0] + [0.0] * (w_baseline - 1)

    records = []
    true_indices = []
    group_leading = {"S": 0, "M": 0, "L": 0}
    idx = 0  # true instruction index of the next group's leader
    hit_debt = 0.0

    def emit(position_target, true_idx, dep_pos=None):
        if position_target is None:
            addr = mirror.pick_fresh(rng)
        else:
            addr = mirror.pick_at_position(rng, position_target)
            if addr is None:  # set not warm enough: becomes a compulsory miss
                addr = mirror.pick_fresh(rng)
        records.append(AccessRecord(addr, true_idx % window, True, dep_pos))
        true_indices.append(true_idx)

    def emit_group(base_idx, positions, weights, size, with_dep):
        """One access group at `base_idx`: a leader, members in the
        all-overlap band, optional members placed so they overlap only under
        the medium/large windows, and optionally one out-of-order dependent.
        Returns the index the next group may start at."""
        has_dep = with_dep and rng.random() < dep_prob
        has_b = rng.random() < p_b
        has_c = rng.random() < p_c
        min_size = 1 + (2 if has_dep else 0) + (1 if has_b else 0) + (1 if has_c else 0)
        g = max(min_size, size)
        extras = g - min_size
        bands = ["A"] + (["B"] if has_b else []) + (["C"] if has_c else [])
        split = {band: 0 for band in bands}
        for _ in range(extras):
            split[bands[rng.randrange(len(bands))]] += 1
        n_a = min(split["A"] + (1 if has_dep else 0),
                  _A_BAND[1] - _A_BAND[0] + 1)
        anchor = rng.randint(*_DEP_OFFSETS) if has_dep else 0
        a_offsets = sorted(rng.sample(range(_A_BAND[0], _A_BAND[1] + 1), n_a))
        leader_pos = len(records)
        tail = 0

        emit(rng.choices(positions, weights)[0], base_idx)  # leader
        for key in group_leading:
            group_leading[key] += 1
        for off in a_offsets:
            emit(rng.choices(positions, weights)[0], base_idx + off)
            tail = max(tail, off)
        if has_dep and a_offsets:
            emit(rng.choices(positions, weights)[0], base_idx + anchor,
                 dep_pos=leader_pos)
            for key in group_leading:
                group_leading[key] += 1
        else:
            anchor = 0
        b_head = None
        if has_b:
            b_head = anchor + 64 + rng.randint(0, 20)
            for off in [b_head] + sorted(b_head + o for o in
                                         rng.sample(range(1, 26), min(split["B"], 25))):
                emit(rng.choices(positions, weights)[0], base_idx + off)
                tail = max(tail, off)
            group_leading["S"] += 1
        if has_c:
            c_head = (b_head + 64 if b_head is not None else anchor + 128) + rng.randint(0, 12)
            for off in [c_head] + sorted(c_head + o for o in
                                         rng.sample(range(1, 26), min(split["C"], 25))):
                emit(rng.choices(positions, weights)[0], base_idx + off)
                tail = max(tail, off)
            group_leading["S"] += 1
            group_leading["M"] += 1
        # far enough that the next leader starts a fresh group under every
        # core size, even against a late band member
        return max(base_idx + anchor + 300, base_idx + tail + 280) + rng.randint(0, 160)

    g_size = lambda mean: max(1, int(mean) + (1 if rng.random() < mean - int(mean) else 0))

    if hits_per_miss is None:
        while len(records) < length:
            idx = emit_group(idx, hit_positions, hit_weights, g_size(g_mean), False)
        return records, TraceTruth(true_indices, [rec.dep_index for rec in records],
                                   group_leading)

    while len(records) < length:
        g = g_size(g_mean)
        idx = emit_group(idx, miss_positions, miss_weights, g, True)
        hit_debt += g * hits_per_miss
        while hit_debt >= 1.0 and len(records) < length:
            gh = min(g_size(max(g_mean, 2.0)), int(hit_debt) + 1)
            idx = emit_group(idx, hit_positions, hit_weights, gh, False)
            hit_debt -= gh

    return records, TraceTruth(true_indices, [rec.dep_index for rec in records],
                               group_leading)


def lm_validation_trace(seed: int, n_groups: int = 200, dep_density: float = 0.25,
                        p_b: float = 0.4, p_c: float = 0.35, mean_extras: float = 2.0,
                        window: int = 1024):
    """All-miss trace with controlled group geometry for counter validation.

    Every access touches a fresh block, so it misses at every allocation and
    the group structure is identical for every way count.  Arrival order
    respects the identification assumption: loads arrive in instruction order
    except dependents of the current leading miss, which arrive after an
    independent load has bypassed them.
    """
    rng = random.Random(seed)
    records = []
    true_indices = []
    expected = {"S": 0, "M": 0, "L": 0}
    idx = 0
    tag = 0

    def emit(true_idx, dep_pos=None):
        nonlocal tag
        records.append(AccessRecord(tag * 64, true_idx % window, True, dep_pos))
        true_indices.append(true_idx)
        tag += 1

    for _ in range(n_groups):
        has_dep = rng.random() < dep_density
        has_b = rng.random() < p_b
        has_c = rng.random() < p_c
        extras = rng.randint(0, int(2 * mean_extras))
        bands = ["A"] + (["B"] if has_b else []) + (["C"] if has_c else [])
        split = {band: 0 for band in bands}
        for _ in range(extras):
            split[bands[rng.randrange(len(bands))]] += 1
        n_a = split["A"] + (1 if has_dep else 0)
        anchor = rng.randint(*_DEP_OFFSETS) if has_dep else 0

        leader_pos = len(records)
        emit(idx)
        for size in expected:
            expected[size] += 1
        group_max = 0

        a_offsets = sorted(rng.sample(range(_A_BAND[0], _A_BAND[1] + 1),
                                      min(n_a, 50)))
        for off in a_offsets:
            emit(idx + off)
            group_max = max(group_max, off)
        if has_dep and a_offsets:
            emit(idx + anchor, dep_pos=leader_pos)
            for size in expected:
                expected[size] += 1
        else:
            anchor = 0
        if has_b:
            b_head = anchor + 64 + rng.randint(0, 20)
            for off in [b_head] + sorted(b_head + o for o in rng.sample(range(1, 26), split["B"])):
                emit(idx + off)
                group_max = max(group_max, off)
            expected["S"] += 1
        else:
            b_head = None
        if has_c:
            c_head = (b_head + 64 if b_head is not None else anchor + 128) + rng.randint(0, 12)
            for off in [c_head] + sorted(c_head + o for o in rng.sample(range(1, 26), split["C"])):
                emit(idx + off)
                group_max = max(group_max, off)
            expected["S"] += 1
            expected["M"] += 1

        idx = idx + anchor + 300 + rng.randint(0, 460)

    return records, TraceTruth(true_indices, [rec.dep_index for rec in records], expected)


def adversarial_trace(seed: int, n_events: int = 2000, window: int = 1024):
    """Arrival stream that breaks the identification assumption: arbitrary
    reordering and dependencies on non-leading loads."""
    rng = random.Random(seed)
    records = []
    true_indices = []
    idx = 0
    for pos in range(n_events):
        idx += rng.randint(1, 180)
        true_idx = idx + rng.randint(-120, 0)  # out-of-order without dependency
        dep = rng.randrange(pos) if pos and rng.random() < 0.2 else None
        records.append(AccessRecord(pos * 64, true_idx % window, True, dep))
        true_indices.append(true_idx)
    return records, TraceTruth(true_indices, [r.dep_index for r in records], {})


def trace_profile_phase(profile: PhaseProfile, trace_length: int = 12_000,
                        seed: int = 0, num_sets: int = 32, max_ways: int = 16,
                        w_baseline: int = 8, dep_density: float = 0.15):
    """Derive a phase's MLP tables from one synthesized trace.

    The same access stream yields both the exact per-(core size, ways) MLP
    (dependency-aware leading-miss count over direct per-way LRU outcomes) and
    the table the counter hardware would report.  The exact table becomes the
    phase's ground truth and the counter table drives predictions, so model
    error is precisely the measurement error of the counting heuristic.
    Cold-start accesses are excluded from both.
    """
    records, truth = synth_trace_detailed(profile, trace_length, seed, num_sets,
                                          max_ways, w_baseline, dep_density)
    geometry = CacheGeometry(num_sets, max_ways)
    atd = AtdDirectory(geometry)
    bank = LmCounterBank(max_ways=max_ways)
    warmup = min(2 * num_sets * max_ways, len(records) // 3)
    for i, rec in enumerate(records):
        if i == warmup:  # discard cold-start counts, keep the warm stacks
            atd.profile = RecencyProfile(max_ways)
            bank.reset()
        position = atd.access(rec)
        bank.observe_outcome(position, rec.instruction_index)

    # exact counts over the same warm window, per way count
    events = [(t, d if (d is None or d >= warmup) else None)
              for t, d in zip(truth.true_indices, truth.dep_positions)][warmup:]
    events = [(t, None if d is None else d - warmup) for t, d in events]
    observed = {}
    exact = {}
    for w in range(1, max_ways + 1):
        outcomes = simulate_lru_outcomes(records, num_sets, w)[warmup:]
        misses = predict_misses(atd.profile, w)
        miss_positions = [i for i, missed in enumerate(outcomes) if missed]
        for size in CORE_ORDER:
            lm_heur = bank.leading_misses(size, w)
            if misses > 0 and lm_heur > 0:
                observed[(size, w)] = max(1.0, misses / lm_heur)
            else:
                observed[(size, w)] = profile.mlp_fn(size, w, w_baseline)
            lm_exact = oracle_leading_misses(events, CORE_SIZES[size].rob,
                                             miss_positions)
            if len(miss_positions) > 0 and lm_exact > 0:
                exact[(size, w)] = max(1.0, len(miss_positions) / lm_exact)
            else:
                exact[(size, w)] = profile.mlp_fn(size, w, w_baseline)
    # a larger core never exposes less parallelism
    for w in range(1, max_ways + 1):
        for table in (exact, observed):
            table[("M", w)] = max(table[("M", w)], table[("S", w)])
            table[("L", w)] = max(table[("L", w)], table[("M", w)])
    profile.mlp_true = exact
    profile.mlp_observed = observed
    return exact, observed


# ---------------------------------------------------------------------------
# Library generation

_PARAM_RANGES = {
    # (mpki_hi, mpki_lo, shape) for cache-sensitive curves;
    # (mpki_base, tilt) for insensitive ones
    "CS-PS": dict(mpki_hi=(12.0, 22.0), mpki_lo=(0.6, 2.2), shape=(1.3, 2.8),
                  mlp_m=(2.2, 3.0), mlp_l_ratio=(1.3, 1.55), mlp_s_ratio=(0.55, 0.75),
                  cpi0=(0.30, 0.50), cpi1=(0.30, 0.50)),
    "CS-PI": dict(mpki_hi=(10.0, 20.0), mpki_lo=(0.6, 2.2), shape=(1.3, 2.8),
                  mlp_m=(1.15, 1.5), mlp_l_ratio=(1.0, 1.1), mlp_s_ratio=(0.93, 1.0),
                  cpi0=(0.15, 0.30), cpi1=(0.50, 0.80)),
    "CI-PS": dict(mpki_base=(6.0, 14.0), tilt=(0.0, 0.10),
                  mlp_m=(2.2, 3.0), mlp_l_ratio=(1.3, 1.55), mlp_s_ratio=(0.55, 0.75),
                  cpi0=(0.25, 0.45), cpi1=(0.25, 0.40)),
    "CI-PI": dict(mpki_base=(0.5, 3.0), tilt=(0.0, 0.10),
                  mlp_m=(1.15, 1.5), mlp_l_ratio=(1.0, 1.1), mlp_s_ratio=(0.93, 1.0),
                  cpi0=(0.10, 0.22), cpi1=(0.60, 0.90)),
}


def _uniform(rng, lo_hi):
    lo, hi = lo_hi
    return rng.uniform(lo, hi)


def _make_phase(category: str, name: str, rng: random.Random, instructions: int,
                f_baseline: float, jitter: float = 0.10) -> PhaseProfile:
    spec = _PARAM_RANGES[category]
    j = lambda: 1.0 + rng.uniform(-jitter, jitter)

    if "mpki_hi" in spec:
        hi = _uniform(rng, spec["mpki_hi"]) * j()
        lo = _uniform(rng, spec["mpki_lo"]) * j()
        shape = _uniform(rng, spec["shape"])
        mpki_points = {w: lo + (hi - lo) * ((16 - w) / 14.0) ** shape
                       for w in WAY_SAMPLES}
    else:
        base = _uniform(rng, spec["mpki_base"]) * j()
        tilt = _uniform(rng, spec["tilt"])
        mpki_points = {w: base * (1.0 + tilt * (16 - w) / 14.0) for w in WAY_SAMPLES}

    mlp_m = _uniform(rng, spec["mlp_m"]) * j()
    mlp_l = mlp_m * _uniform(rng, spec["mlp_l_ratio"])
    mlp_s = mlp_m * _uniform(rng, spec["mlp_s_ratio"])
    cpi0 = _uniform(rng, spec["cpi0"]) * j()
    cpi1 = _uniform(rng, spec["cpi1"]) * j()
    bp_share = rng.uniform(0.3, 0.5)

    return PhaseProfile(
        name=name,
        instructions=instructions,
        t0=cpi0 * instructions / f_baseline,
        t_bp=cpi1 * bp_share * instructions / f_baseline,
        t_cache=cpi1 * (1.0 - bp_share) * instructions / f_baseline,
        mpki_points=mpki_points,
        mlp_base={"S": mlp_s, "M": mlp_m, "L": mlp_l},
        mlp_w_slope=rng.uniform(0.0, 0.10),
        ilp_eff={"S": rng.uniform(0.85, 1.0), "M": 1.0, "L": rng.uniform(0.85, 1.0)},
        mem_accesses_pki=mpki_points[8] * rng.uniform(1.1, 1.4) + 0.2,
        p_dyn_base=rng.uniform(1.6, 2.4),
    )


def generate_app(category: str, name: str, seed: int, instructions: int = 1_000_000,
                 f_baseline: float = 2.0e9, min_phases: int = 3, max_phases: int = 8,
                 trace_length: int = 0, trace_sets: int = 32,
                 dep_density: float = 0.15) -> AppProfile:
    """Generate one application of the given category archetype."""
    rng = random.Random(seed)
    n_phases = rng.randint(min_phases, max_phases)
    phases = [_make_phase(category, f"{name}.p{i}", rng, instructions, f_baseline)
              for i in range(n_phases)]
    raw = [rng.random() + 0.25 for _ in range(n_phases)]
    total = sum(raw)
    weights = [x / total for x in raw]
    trace_len = max(24, 4 * n_phases)
    phase_trace = rng.choices(range(n_phases), weights=weights, k=trace_len)
    if trace_length > 0:
        for i, phase in enumerate(phases):
            trace_profile_phase(phase, trace_length, seed=seed * 1009 + i,
                                num_sets=trace_sets, dep_density=dep_density)
    return AppProfile(name, phases, weights, phase_trace, category=category)


def generate_library(seed: int, apps_per_category: int = 2,
                     instructions: int = 1_000_000, f_baseline: float = 2.0e9,
                     min_phases: int = 3, max_phases: int = 8,
                     trace_length: int = 12_000, trace_sets: int = 32,
                     dep_density: float = 0.15):
    """Generate the default application library: archetypes of each category
    with randomized parameters, optionally trace-profiled so predictions use
    counter-estimated MLP tables."""
    rng = random.Random(seed)
    apps = []
    for category in CATEGORIES:
        for i in range(apps_per_category):
            app_seed = rng.randrange(1 << 30)
            name = f"{category.lower()}-{i:02d}"
            apps.append(generate_app(category, name, app_seed, instructions,
                                     f_baseline, min_phases, max_phases,
                                     trace_length, trace_sets, dep_density))
    return apps


# ---------------------------------------------------------------------------
# Library serialization


def _phase_to_dict(phase: PhaseProfile) -> dict:
    doc = {
        "name": phase.name,
        "instructions": phase.instructions,
        "t0": phase.t0,
        "t_bp": phase.t_bp,
        "t_cache": phase.t_cache,
        "mpki_points": {str(w): m for w, m in phase.mpki_points.items()},
        "mlp_base": phase.mlp_base,
        "mlp_w_slope": phase.mlp_w_slope,
        "ilp_eff": phase.ilp_eff,
        "mem_accesses_pki": phase.mem_accesses_pki,
        "p_dyn_base": phase.p_dyn_base,
        "contention_penalty": phase.contention_penalty,
    }
    if phase.mlp_true is not None:
        doc["mlp_true"] = {f"{size}:{w}": v
                           for (size, w), v in phase.mlp_true.items()}
    if phase.mlp_observed is not None:
        doc["mlp_observed"] = {f"{size}:{w}": v
                               for (size, w), v in phase.mlp_observed.items()}
    return doc


def _table_from_dict(doc, key):
    if key not in doc:
        return None
    table = {}
    for label, v in doc[key].items():
        size, w = label.split(":")
        table[(size, int(w))] = v
    return table


def _phase_from_dict(doc: dict) -> PhaseProfile:
    return PhaseProfile(
        name=doc["name"],
        instructions=doc["instructions"],
        t0=doc["t0"],
        t_bp=doc["t_bp"],
        t_cache=doc["t_cache"],
        mpki_points={int(w): m for w, m in doc["mpki_points"].items()},
        mlp_base=dict(doc["mlp_base"]),
        mlp_w_slope=doc["mlp_w_slope"],
        ilp_eff=dict(doc["ilp_eff"]),
        mem_accesses_pki=doc["mem_accesses_pki"],
        p_dyn_base=doc["p_dyn_base"],
        contention_penalty=doc.get("contention_penalty", 0.0),
        mlp_true=_table_from_dict(doc, "mlp_true"),
        mlp_observed=_table_from_dict(doc, "mlp_observed"),
    )


def save_library(apps, path):
    doc = {"apps": [{
        "name": app.name,
        "category": app.category,
        "weights": app.weights,
        "phase_trace": app.phase_trace,
        "phases": [_phase_to_dict(p) for p in app.phases],
    } for app in apps]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_library(path):
    with open(path) as fh:
        doc = json.load(fh)
    apps = []
    for entry in doc["apps"]:
        apps.append(AppProfile(
            name=entry["name"],
            phases=[_phase_from_dict(p) for p in entry["phases"]],
            weights=list(entry["weights"]),
            phase_trace=list(entry["phase_trace"]),
            category=entry.get("category"),
        ))
    return apps
