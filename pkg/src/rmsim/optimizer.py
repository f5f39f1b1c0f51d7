"""Per-core and system-wide resource optimization.

Each invocation builds, for the invoking core, an energy curve mapping every
allowed way count to the cheapest QoS-feasible (core size, frequency) choice.
The system-wide step then reduces the per-core curves pairwise and picks the
way distribution that minimizes total predicted energy under the shared-ways
budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .models import (CORE_ORDER, CORE_SIZES, ResourceSetting, predict_energy,
                     predict_time)

INFEASIBLE = math.inf


class Policy(Enum):
    """RM1 repartitions ways only, RM2 adds per-core frequency scaling, RM3
    additionally resizes the core."""

    RM1 = "rm1"
    RM2 = "rm2"
    RM3 = "rm3"


@dataclass
class CurveEntry:
    energy: float
    core: object = None  # CoreConfig, absent when infeasible
    vf: object = None  # VfPoint, absent when infeasible
    time: float | None = None

    @property
    def frequency(self):
        return self.vf.frequency if self.vf is not None else None

    @property
    def feasible(self):
        return math.isfinite(self.energy)


class EnergyCurve:
    """Way count -> (minimal predicted energy, chosen core size, frequency)."""

    def __init__(self, w_min: int, w_max: int, entries: dict):
        self.w_min = w_min
        self.w_max = w_max
        self.entries = entries
        for w in range(w_min, w_max + 1):
            if w not in entries:
                raise ValueError(f"curve is missing an entry for {w} ways")

    def energy(self, ways: int) -> float:
        if self.w_min <= ways <= self.w_max:
            return self.entries[ways].energy
        return INFEASIBLE

    def entry(self, ways: int) -> CurveEntry:
        return self.entries[ways]

    def assignments(self, ways: int):
        return [ways]


class CombinedCurve:
    """Pairwise reduction of two curves over the sum of their way ranges.

    For every total the minimizing split is recorded so the chosen per-core
    assignment can be read back after the reduction.  Energy ties go to the
    most balanced split, then to the smallest left-hand way count, so a
    constant objective degrades to the even distribution.
    """

    def __init__(self, left, right, ops=None):
        self.left = left
        self.right = right
        self.w_min = left.w_min + right.w_min
        self.w_max = left.w_max + right.w_max
        self._energy = {}
        self._split = {}
        additions = 0
        for total in range(self.w_min, self.w_max + 1):
            best = INFEASIBLE
            best_wa = None
            best_rank = None
            lo = max(left.w_min, total - right.w_max)
            hi = min(left.w_max, total - right.w_min)
            for wa in range(lo, hi + 1):
                e = left.energy(wa) + right.energy(total - wa)
                additions += 1
                rank = (abs(2 * wa - total), wa)
                if e < best or (e == best and best_wa is not None and rank < best_rank):
                    best = e
                    best_wa = wa if math.isfinite(e) else None
                    best_rank = rank
            self._energy[total] = best
            self._split[total] = best_wa
        if ops is not None:
            ops[0] += additions

    def energy(self, total: int) -> float:
        if self.w_min <= total <= self.w_max:
            return self._energy[total]
        return INFEASIBLE

    def assignments(self, total: int):
        wa = self._split.get(total)
        if wa is None:
            raise ValueError(f"no feasible split for {total} total ways")
        return self.left.assignments(wa) + self.right.assignments(total - wa)


def combine_curves(a, b, ops=None) -> CombinedCurve:
    """Reduce two energy curves into one over their combined budget range."""
    return CombinedCurve(a, b, ops)


@dataclass
class Allocation:
    """System-wide outcome of one optimization step."""

    ways_per_core: tuple
    settings: tuple
    energy: float
    fallback: bool = False
    additions: int = 0


def even_split(total_ways: int, num_cores: int, w_min: int, w_max: int):
    base = total_ways // num_cores
    rem = total_ways - base * num_cores
    ways = [base + (1 if i < rem else 0) for i in range(num_cores)]
    if any(w < w_min or w > w_max for w in ways):
        raise ValueError("even split violates per-core way bounds")
    return ways


def global_optimize(curves, total_ways: int, baseline: ResourceSetting | None = None) -> Allocation:
    """Minimize total predicted energy subject to the total-ways budget.

    Curves are reduced pairwise in a balanced tree ordered by core index; the
    split bookkeeping is then walked back from the root.  When no feasible
    distribution exists the baseline even split is returned and flagged.
    """
    curves = list(curves)
    if not curves:
        raise ValueError("need at least one energy curve")
    ops = [0]
    nodes = curves
    while len(nodes) > 1:
        paired = [combine_curves(nodes[i], nodes[i + 1], ops)
                  for i in range(0, len(nodes) - 1, 2)]
        if len(nodes) % 2:
            paired.append(nodes[-1])
        nodes = paired
    root = nodes[0]
    total_energy = root.energy(total_ways)
    if not math.isfinite(total_energy):
        ways = even_split(total_ways, len(curves), curves[0].w_min, curves[0].w_max)
        settings = []
        for curve, w in zip(curves, ways):
            if baseline is not None:
                settings.append(ResourceSetting(baseline.core, baseline.vf, w))
            else:
                settings.append(None)
        return Allocation(tuple(ways), tuple(settings), INFEASIBLE,
                          fallback=True, additions=ops[0])
    ways = root.assignments(total_ways)
    settings = []
    for curve, w in zip(curves, ways):
        entry = curve.entry(w)
        settings.append(ResourceSetting(entry.core, entry.vf, w))
    return Allocation(tuple(ways), tuple(settings), total_energy,
                      fallback=False, additions=ops[0])


def exhaustive_optimize(curves, total_ways: int):
    """Enumerate every composition of the budget; reference for the reduction.

    Returns (energy, ways tuple); among equal-energy optima the
    lexicographically smallest way vector wins.
    """
    curves = list(curves)
    n = len(curves)
    best_energy = INFEASIBLE
    best_ways = None
    mins = [c.w_min for c in curves]
    maxs = [c.w_max for c in curves]
    suffix_min = [sum(mins[i:]) for i in range(n + 1)]
    suffix_max = [sum(maxs[i:]) for i in range(n + 1)]
    path = [0] * n

    def recurse(i, remaining, acc):
        nonlocal best_energy, best_ways
        if i == n - 1:
            if mins[i] <= remaining <= maxs[i]:
                e = acc + curves[i].energy(remaining)
                if e < best_energy:
                    path[i] = remaining
                    best_energy = e
                    best_ways = tuple(path)
            return
        for w in range(mins[i], maxs[i] + 1):
            rest = remaining - w
            if rest < suffix_min[i + 1] or rest > suffix_max[i + 1]:
                continue
            path[i] = w
            recurse(i + 1, rest, acc + curves[i].energy(w))

    recurse(0, total_ways, 0.0)
    return best_energy, best_ways


def local_optimize(stats, policy: Policy, baseline: ResourceSetting, model,
                   constants, perfect_eval=None, qos_bound=None) -> EnergyCurve:
    """Build the energy curve for one core from its last-interval statistics.

    For each way count the admissible (core size, frequency) grid is searched:
    RM1 admits only the baseline pair, RM2 sweeps frequency at the baseline
    core size, RM3 sweeps both.  Entries keep the QoS-feasible minimum-energy
    choice; way counts with no feasible pair are marked infeasible.  When
    `perfect_eval` is given it supplies (time, energy) for a setting directly
    and replaces the analytic models.  `qos_bound` overrides the re-predicted
    baseline time bound (anchored mode).
    """
    if policy is Policy.RM1:
        cores = (baseline.core,)
        freqs = (baseline.vf.frequency,)
    elif policy is Policy.RM2:
        cores = (baseline.core,)
        freqs = constants.vf.frequencies
    else:
        cores = tuple(CORE_SIZES[name] for name in CORE_ORDER)
        freqs = constants.vf.frequencies

    if qos_bound is not None:
        bound = qos_bound * constants.alpha
    elif perfect_eval is not None:
        bound = perfect_eval(baseline)[0] * constants.alpha
    else:
        bound = predict_time(stats, baseline, model, constants.l_mem) * constants.alpha

    entries = {}
    for w in range(constants.w_min, constants.w_max + 1):
        best = None
        for core in cores:
            for f in freqs:
                setting = ResourceSetting(core, constants.vf.lookup(f), w)
                if perfect_eval is not None:
                    t, e = perfect_eval(setting)
                    if t > bound:
                        continue
                else:
                    t = predict_time(stats, setting, model, constants.l_mem)
                    if t > bound:
                        continue
                    e = predict_energy(stats, setting, t, constants.power,
                                       constants.e_mem, stats.w_current)
                if best is None or e < best.energy:
                    best = CurveEntry(e, core, setting.vf, t)
        entries[w] = best if best is not None else CurveEntry(INFEASIBLE)
    return EnergyCurve(constants.w_min, constants.w_max, entries)


def rm_step(core_id: int, stats, cached_curves: dict, policy: Policy,
            baseline: ResourceSetting, model, constants, total_ways: int,
            perfect_eval=None, qos_bound=None) -> Allocation:
    """One manager invocation: refresh the invoking core's curve, then pick a
    new system-wide setting from the fresh plus cached curves.

    `cached_curves` maps core id to its last curve and is updated in place.
    """
    cached_curves[core_id] = local_optimize(stats, policy, baseline, model,
                                            constants, perfect_eval, qos_bound)
    curves = [cached_curves[cid] for cid in sorted(cached_curves)]
    return global_optimize(curves, total_ways, baseline)
