import math
import random

import pytest

from rmsim.config import SystemConfig
from rmsim.models import CORE_SIZES, CORE_ORDER, Model, ResourceSetting
from rmsim.optimizer import (CurveEntry, EnergyCurve, Policy, combine_curves,
                             even_split, exhaustive_optimize, global_optimize,
                             local_optimize, rm_step)
from rmsim.validate import random_curve, validate_optimizer
from rmsim.workload import ground_truth

SYSTEM = SystemConfig(num_cores=2)
CONSTANTS = SYSTEM.constants()
BASELINE = CONSTANTS.baseline


def curve(values, w_min=None, w_max=None):
    keys = sorted(values)
    w_min = w_min if w_min is not None else keys[0]
    w_max = w_max if w_max is not None else keys[-1]
    return EnergyCurve(w_min, w_max,
                       {w: CurveEntry(float(v)) for w, v in values.items()})


def test_combine_toy_example():
    a = curve({1: 10, 2: 6, 3: 5})
    b = curve({1: 8, 2: 4, 3: 3})
    combined = combine_curves(a, b)
    assert combined.energy(4) == 10.0
    assert combined.assignments(4) == [2, 2]


def test_combine_additive_identity():
    a = curve({1: 9, 2: 7, 3: 6})
    zero = curve({1: 0, 2: 0, 3: 0})
    combined = combine_curves(a, zero)
    for total in range(2, 7):
        lo, hi = max(1, total - 3), min(3, total - 1)
        assert combined.energy(total) == min(a.energy(w) for w in range(lo, hi + 1))


def test_combine_tie_determinism():
    a = curve({1: 5, 2: 5, 3: 5})
    b = curve({1: 5, 2: 5, 3: 5})
    c1 = combine_curves(a, b)
    c2 = combine_curves(a, b)
    for total in range(2, 7):
        assert c1.assignments(total) == c2.assignments(total)
    # equal-balance tie goes to the lower left-hand way count
    assert c1.assignments(5) == [2, 3]


def test_combine_infeasible_propagates():
    a = curve({1: 1, 2: math.inf, 3: 1})
    b = curve({1: math.inf, 2: 2, 3: 2})
    combined = combine_curves(a, b)
    assert combined.energy(3) == 3.0  # (1,2) is the only finite split
    assert math.isinf(curve({1: math.inf}).energy(1) + 1)
    with pytest.raises(ValueError):
        combine_curves(curve({1: math.inf, 2: math.inf}),
                       curve({1: math.inf, 2: math.inf})).assignments(2)


def test_global_two_core_extremes():
    dec = curve({w: 100 - w for w in range(2, 17)})
    inc = curve({w: 100 + w for w in range(2, 17)})
    alloc = global_optimize([dec, inc], 16)
    assert alloc.ways_per_core == (14, 2)


def test_global_constant_curves_even_split():
    for n in (2, 4, 8):
        flat = [curve({w: 3.0 for w in range(2, 17)}) for _ in range(n)]
        alloc = global_optimize(flat, 8 * n)
        assert alloc.ways_per_core == tuple([8] * n)


def test_global_matches_exhaustive_randomized():
    mismatches, trials = validate_optimizer(300, seed=17)
    assert trials == 300
    assert mismatches == 0


def test_global_budget_and_bounds():
    rng = random.Random(18)
    for _ in range(100):
        n = rng.randint(2, 4)
        total = rng.randint(2 * n, min(16 * n, 32))
        curves = [random_curve(rng, 2, 16) for _ in range(n)]
        alloc = global_optimize(curves, total)
        assert sum(alloc.ways_per_core) == total
        assert all(2 <= w <= 16 for w in alloc.ways_per_core)


def test_global_fallback_even_split():
    dead = [EnergyCurve(2, 16, {w: CurveEntry(math.inf) for w in range(2, 17)})
            for _ in range(2)]
    alloc = global_optimize(dead, 16, BASELINE)
    assert alloc.fallback
    assert alloc.ways_per_core == (8, 8)
    assert all(s.core is BASELINE.core and s.vf == BASELINE.vf
               for s in alloc.settings)


def test_even_split_bounds():
    assert even_split(16, 2, 2, 16) == [8, 8]
    assert even_split(17, 2, 2, 16) == [9, 8]
    with pytest.raises(ValueError):
        even_split(40, 2, 2, 16)


def test_reduction_cost_scales_with_range_squared():
    # additions per pairwise node equal the product of the operand range sizes
    def analytic(n):
        sizes = [15] * n
        total = 0
        while len(sizes) > 1:
            nxt = []
            for i in range(0, len(sizes) - 1, 2):
                total += sizes[i] * sizes[i + 1]
                nxt.append(sizes[i] + sizes[i + 1] - 1)
            if len(sizes) % 2:
                nxt.append(sizes[-1])
            sizes = nxt
        return total

    rng = random.Random(19)
    for n in (2, 4, 8):
        curves = [random_curve(rng, 2, 16, infeasible_rate=0.0) for _ in range(n)]
        alloc = global_optimize(curves, 8 * n)
        expected = analytic(n)
        assert expected / 2 <= alloc.additions <= 2 * expected


def stats_at_baseline(library):
    phase = library[0].phases[0]
    return ground_truth(phase, BASELINE, CONSTANTS).observed


def test_local_rm1_keeps_baseline_pair(library_untraced):
    stats = stats_at_baseline(library_untraced)
    result = local_optimize(stats, Policy.RM1, BASELINE, Model.M3, CONSTANTS)
    for w in range(2, 17):
        entry = result.entry(w)
        if entry.feasible:
            assert entry.core is BASELINE.core
            assert entry.frequency == BASELINE.vf.frequency
    assert result.entry(8).feasible  # identity point always admissible


def test_local_compute_bound_ignores_ways(library_untraced):
    stats = stats_at_baseline(library_untraced)
    stats.miss_curve = {w: 0.0 for w in range(2, 17)}
    stats.lm_table = {(s, w): 0.0 for s in CORE_ORDER for w in range(2, 17)}
    stats.mem_accesses = 0.0
    stats.t_mem = 0.0
    result = local_optimize(stats, Policy.RM3, BASELINE, Model.M3, CONSTANTS)
    picks = {(result.entry(w).core.name, result.entry(w).frequency)
             for w in range(2, 17)}
    assert len(picks) == 1


def test_local_matches_exhaustive_grid(library_untraced):
    stats = stats_at_baseline(library_untraced)
    result = local_optimize(stats, Policy.RM3, BASELINE, Model.M3, CONSTANTS)
    from rmsim.models import predict_energy, predict_time

    bound = predict_time(stats, BASELINE, Model.M3, CONSTANTS.l_mem)
    for w in (2, 5, 8, 11, 16):
        best = None
        for cname in CORE_ORDER:
            for f in CONSTANTS.vf.frequencies:
                tgt = ResourceSetting(CORE_SIZES[cname], CONSTANTS.vf.lookup(f), w)
                t = predict_time(stats, tgt, Model.M3, CONSTANTS.l_mem)
                if t > bound:
                    continue
                e = predict_energy(stats, tgt, t, CONSTANTS.power,
                                   CONSTANTS.e_mem, stats.w_current)
                if best is None or e < best:
                    best = e
        entry = result.entry(w)
        if best is None:
            assert not entry.feasible
        else:
            assert entry.energy == pytest.approx(best, rel=1e-12)


def test_policy_admissible_sets_nest(library_untraced):
    stats = stats_at_baseline(library_untraced)
    curves = {p: local_optimize(stats, p, BASELINE, Model.M3, CONSTANTS)
              for p in Policy}
    for w in range(2, 17):
        e1 = curves[Policy.RM1].energy(w)
        e2 = curves[Policy.RM2].energy(w)
        e3 = curves[Policy.RM3].energy(w)
        assert e3 <= e2 <= e1


def test_rm_step_single_core(library_untraced):
    system = SystemConfig(num_cores=1)
    constants = system.constants()
    stats = ground_truth(library_untraced[0].phases[0], constants.baseline,
                         constants).observed
    cache = {}
    alloc = rm_step(0, stats, cache, Policy.RM2, constants.baseline, Model.M3,
                    constants, total_ways=8)
    local = cache[0]
    assert alloc.ways_per_core == (8,)
    assert alloc.energy == local.energy(8)
    assert alloc.settings[0].ways == 8


def test_rm_step_uses_cached_curve(library_untraced):
    stats0 = ground_truth(library_untraced[0].phases[0], BASELINE, CONSTANTS).observed
    stats1 = ground_truth(library_untraced[1].phases[0], BASELINE, CONSTANTS).observed
    cache = {}
    rm_step(0, stats0, cache, Policy.RM3, BASELINE, Model.M3, CONSTANTS, 16)
    stale = cache[1] if 1 in cache else None
    assert stale is None
    rm_step(1, stats1, cache, Policy.RM3, BASELINE, Model.M3, CONSTANTS, 16)
    alloc = rm_step(0, stats0, cache, Policy.RM3, BASELINE, Model.M3, CONSTANTS, 16)
    direct = global_optimize([cache[0], cache[1]], 16, BASELINE)
    assert alloc.ways_per_core == direct.ways_per_core
    assert alloc.energy == direct.energy


def test_rm_step_fixed_point(library_untraced):
    stats = stats_at_baseline(library_untraced)
    cache = {}
    first = rm_step(0, stats, cache, Policy.RM3, BASELINE, Model.M3, CONSTANTS, 16)
    # core 1 identical stats
    second = rm_step(1, stats, cache, Policy.RM3, BASELINE, Model.M3, CONSTANTS, 16)
    third = rm_step(0, stats, cache, Policy.RM3, BASELINE, Model.M3, CONSTANTS, 16)
    assert second.ways_per_core == third.ways_per_core
    assert second.settings == third.settings
