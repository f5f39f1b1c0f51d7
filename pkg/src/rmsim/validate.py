"""Self-validation suites pinning the fast paths to independent references.

Three checks: shadow-directory miss predictions against direct per-way LRU
simulation, the leading-miss counter heuristic against the exact
dependency-aware count, and the recursive budget optimizer against exhaustive
enumeration.
"""

from __future__ import annotations

import math
import random

from .cache import (AccessRecord, AtdDirectory, CacheGeometry, predict_misses,
                    simulate_lru_misses, simulate_lru_outcomes)
from .mlp import LmCounterBank, oracle_leading_misses
from .models import CORE_ORDER, CORE_SIZES
from .optimizer import (CurveEntry, EnergyCurve, exhaustive_optimize,
                        global_optimize)
from .workload import adversarial_trace, lm_validation_trace


def random_locality_trace(rng: random.Random, length: int, footprint: int,
                          block_size: int = 64):
    """Address stream mixing reuse of recent blocks with fresh ones."""
    records = []
    history = []
    idx = 0
    rand = rng.random
    for _ in range(length):
        if history and rand() < 0.85:
            # bias toward recently used blocks for non-trivial hit positions
            pick = min(int(rng.expovariate(0.125)), len(history) - 1)
            block = history[-1 - pick]
        else:
            block = rng.randrange(footprint * 4)
        history.append(block)
        if len(history) > 600:
            del history[:300]
        idx += 1 + int(rand() * 3)
        records.append(AccessRecord(block * block_size, idx % 1024, True))
    return records


def validate_atd(n_traces: int = 100, seed: int = 0, min_len: int = 1000,
                 max_len: int = 100_000, predict_fn=predict_misses):
    """Compare shadow-directory predictions with direct LRU simulation for
    every way count.  Returns (mismatches, comparisons)."""
    rng = random.Random(seed)
    mismatches = 0
    comparisons = 0
    for _ in range(n_traces):
        exponent = rng.uniform(math.log10(min_len), math.log10(max_len))
        length = int(10 ** exponent)
        num_sets = rng.choice([4, 8, 16, 32, 64])
        geometry = CacheGeometry(num_sets, 16)
        footprint = int(num_sets * 16 * rng.uniform(0.5, 3.0))
        records = random_locality_trace(rng, length, footprint)
        atd = AtdDirectory(geometry)
        for rec in records:
            atd.access(rec)
        for ways in range(1, 17):
            predicted = predict_fn(atd.profile, ways)
            direct = simulate_lru_misses(records, num_sets, ways)
            comparisons += 1
            if predicted != direct:
                mismatches += 1
    return mismatches, comparisons


def heuristic_lm_counts(records, window: int = 1024, num_sets: int = 64):
    """Run a trace through the shadow directory and counter bank; returns the
    bank plus the per-way outcome needed elsewhere."""
    geometry = CacheGeometry(num_sets, 16)
    atd = AtdDirectory(geometry)
    bank = LmCounterBank(max_ways=16, window=window)
    for rec in records:
        position = atd.access(rec)
        bank.observe_outcome(position, rec.instruction_index)
    return bank


def validate_lm(n_traces: int = 100, seed: int = 0, n_adversarial: int = 100):
    """Check heuristic leading-miss counts against the exact dependency-aware
    oracle.

    On traces respecting the identification assumption the counts must match
    exactly for every core size; on adversarial traces only the mean absolute
    relative error is reported.  Returns (mismatches, comparisons, mean_err).
    """
    rng = random.Random(seed)
    mismatches = 0
    comparisons = 0
    for _ in range(n_traces):
        records, truth = lm_validation_trace(rng.randrange(1 << 30),
                                             n_groups=rng.randint(60, 160))
        bank = heuristic_lm_counts(records)
        events = [(t, d) for t, d in zip(truth.true_indices, truth.dep_positions)]
        all_miss = range(len(records))
        for size in CORE_ORDER:
            oracle = oracle_leading_misses(events, CORE_SIZES[size].rob, all_miss)
            for ways in (1, 8, 16):
                comparisons += 1
                if bank.leading_misses(size, ways) != oracle:
                    mismatches += 1
            if oracle != truth.group_leading[size]:
                mismatches += 1
            comparisons += 1

    errors = []
    for _ in range(n_adversarial):
        records, truth = adversarial_trace(rng.randrange(1 << 30),
                                           n_events=rng.randint(500, 2500))
        bank = heuristic_lm_counts(records, num_sets=4096)
        events = [(t, d) for t, d in zip(truth.true_indices, truth.dep_positions)]
        for size in CORE_ORDER:
            oracle = oracle_leading_misses(events, CORE_SIZES[size].rob,
                                           range(len(records)))
            heur = bank.leading_misses(size, 8)
            if oracle > 0:
                errors.append(abs(heur - oracle) / oracle)
    mean_err = sum(errors) / len(errors) if errors else 0.0
    return mismatches, comparisons, mean_err


def random_curve(rng: random.Random, w_min: int, w_max: int,
                 infeasible_rate: float = 0.05) -> EnergyCurve:
    entries = {}
    for w in range(w_min, w_max + 1):
        if rng.random() < infeasible_rate:
            entries[w] = CurveEntry(math.inf)
        else:
            entries[w] = CurveEntry(float(rng.randrange(1_000_000)))
    return EnergyCurve(w_min, w_max, entries)


def validate_optimizer(n_instances: int = 1000, seed: int = 0):
    """Compare the recursive reduction with exhaustive enumeration on random
    instances (2-4 cores, budget up to 32 ways).  Returns (mismatches, trials).
    """
    rng = random.Random(seed)
    mismatches = 0
    for _ in range(n_instances):
        n_cores = rng.randint(2, 4)
        w_min, w_max = 2, 16
        lo, hi = n_cores * w_min, min(n_cores * w_max, 32)
        total = rng.randint(lo, hi)
        curves = [random_curve(rng, w_min, w_max) for _ in range(n_cores)]
        best_energy, _ = exhaustive_optimize(curves, total)
        alloc = global_optimize(curves, total)
        if alloc.fallback:
            ok = not math.isfinite(best_energy)
        else:
            recomputed = sum(c.energy(w) for c, w in zip(curves, alloc.ways_per_core))
            ok = (alloc.energy == best_energy and recomputed == best_energy
                  and sum(alloc.ways_per_core) == total
                  and all(w_min <= w <= w_max for w in alloc.ways_per_core))
        if not ok:
            mismatches += 1
    return mismatches, n_instances


def run_all(atd_traces: int = 100, lm_traces: int = 100,
            optimizer_instances: int = 1000, seed: int = 0):
    """Run every suite; returns a result dict with a boolean `ok`."""
    atd_bad, atd_total = validate_atd(atd_traces, seed)
    lm_bad, lm_total, adv_err = validate_lm(lm_traces, seed + 1)
    opt_bad, opt_total = validate_optimizer(optimizer_instances, seed + 2)
    return {
        "atd": {"mismatches": atd_bad, "comparisons": atd_total},
        "lm": {"mismatches": lm_bad, "comparisons": lm_total,
               "adversarial_mean_abs_rel_error": adv_err},
        "optimizer": {"mismatches": opt_bad, "instances": opt_total},
        "ok": atd_bad == 0 and lm_bad == 0 and opt_bad == 0,
    }
