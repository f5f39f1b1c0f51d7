import math
import random

import numpy as np
import pytest

from rmsim.models import (CORE_SIZES, CORE_ORDER, IntervalStats, Model,
                          PowerTable, ResourceSetting, VfTable, derive_t0,
                          predict_energy, predict_energy_grid, predict_time,
                          predict_time_grid, qos_ok, vf_table)

VF = VfTable.linear()
L_MEM = 100e-9


def make_stats(t_total=0.1, t_bp=0.01, t_cache=0.01, t_mem=0.03, f=2e9,
               core="M", w=8, ma=1e6, misses=None, lm=None, avg_mlp=2.0,
               p_dyn=2.0, v=1.0):
    miss_curve = misses or {ww: 0.0 for ww in range(2, 17)}
    lm_table = lm or {(s, ww): 0.0 for s in CORE_ORDER for ww in range(2, 17)}
    return IntervalStats(t_total=t_total, t_bp=t_bp, t_cache=t_cache, t_mem=t_mem,
                         f_current=f, c_current=CORE_SIZES[core], w_current=w,
                         mem_accesses=ma, miss_curve=miss_curve, lm_table=lm_table,
                         avg_mlp=avg_mlp, p_dyn_sample=p_dyn, v_sample=v,
                         instructions=10**8)


def setting(core, f_ghz, w):
    return ResourceSetting(CORE_SIZES[core], VF.lookup(f_ghz * 1e9), w)


def test_vf_operating_points():
    assert vf_table(2e9).voltage == pytest.approx(1.0)
    assert vf_table(1e9).voltage == pytest.approx(0.8)
    assert vf_table(3.25e9).voltage == pytest.approx(1.25)
    assert len(VF.frequencies) == 10


def test_vf_off_grid_rejected():
    with pytest.raises(ValueError):
        vf_table(2.1e9)


def test_vf_voltage_monotone():
    volts = [p.voltage for p in VF.points]
    assert all(a <= b for a, b in zip(volts, volts[1:]))
    with pytest.raises(ValueError):
        VfTable([type(VF.points[0])(1e9, 1.0), type(VF.points[0])(2e9, 0.9)])


def test_predict_time_worked_example():
    stats = make_stats(lm={("L", 8): 200_000.0})
    t = predict_time(stats, setting("L", 2.5, 8), Model.M3, L_MEM)
    assert t == pytest.approx(0.056, rel=1e-12)


def test_predict_time_identity_case():
    # memory table consistent with the measured memory time at the current point
    stats = make_stats(lm={("M", 8): 0.03 / L_MEM})
    t = predict_time(stats, setting("M", 2.0, 8), Model.M3, L_MEM)
    assert t == pytest.approx(0.1, rel=1e-12)


def test_m1_never_below_m3():
    rng = random.Random(0)
    for _ in range(50):
        misses = {w: rng.uniform(0, 2e5) for w in range(2, 17)}
        mlp = rng.uniform(1.0, 6.0)
        lm = {(s, w): misses[w] / mlp for s in CORE_ORDER for w in range(2, 17)}
        stats = make_stats(misses=misses, lm=lm, avg_mlp=mlp)
        tgt = setting(rng.choice(CORE_ORDER), rng.choice([1.0, 2.0, 3.0]),
                      rng.randrange(2, 17))
        t1 = predict_time(stats, tgt, Model.M1, L_MEM)
        t3 = predict_time(stats, tgt, Model.M3, L_MEM)
        assert t1 >= t3 - 1e-15


def test_m2_equals_m3_when_mlp_consistent():
    rng = random.Random(1)
    misses = {w: rng.uniform(1e3, 2e5) for w in range(2, 17)}
    mlp = 2.7
    lm = {(s, w): misses[w] / mlp for s in CORE_ORDER for w in range(2, 17)}
    stats = make_stats(misses=misses, lm=lm, avg_mlp=mlp)
    for w in (2, 8, 16):
        tgt = setting("L", 1.5, w)
        assert predict_time(stats, tgt, Model.M2, L_MEM) == \
            pytest.approx(predict_time(stats, tgt, Model.M3, L_MEM), rel=1e-12)


def test_qos_reflexive_and_alpha():
    # lm table tuned so the target predicts just above the baseline prediction
    lm = {(s, w): 1e9 for s in CORE_ORDER for w in range(2, 17)}
    lm[("M", 8)] = 0.025 / L_MEM
    lm[("L", 8)] = 0.060 / L_MEM
    stats = make_stats(lm=lm)
    base = setting("M", 2.0, 8)
    target = setting("L", 2.5, 8)
    assert qos_ok(stats, base, base, 1.0, Model.M3, L_MEM)
    assert predict_time(stats, base, Model.M3, L_MEM) == pytest.approx(0.095)
    assert predict_time(stats, target, Model.M3, L_MEM) == pytest.approx(0.096)
    assert not qos_ok(stats, target, base, 1.0, Model.M3, L_MEM)
    assert qos_ok(stats, target, base, 1.05, Model.M3, L_MEM)


def test_predict_energy_worked_example():
    power = PowerTable(VF, explicit={("L", int(2.5e9)): 1.0})
    stats = make_stats(misses={8: 2e5, 6: 0.0}, ma=1e6)
    e = predict_energy(stats, setting("L", 2.5, 8), 0.05, power, 20e-9, w_last=6)
    assert e == pytest.approx(0.195, rel=1e-12)


def test_predict_energy_degenerate_tables():
    power = PowerTable(VF, explicit={("M", int(2e9)): 0.0})
    stats = make_stats(misses={8: 0.0})
    e = predict_energy(stats, setting("M", 2.0, 8), 0.04, power, 0.0, w_last=8)
    assert e == pytest.approx(2.0 * 0.04, rel=1e-12)


def test_predict_energy_dm_zero_at_last_allocation():
    power = PowerTable(VF)
    stats = make_stats(misses={w: 1e4 * w for w in range(2, 17)}, ma=5e5)
    e = predict_energy(stats, setting("M", 2.0, 8), 0.05, power, 20e-9, w_last=8)
    mem_term = 5e5 * 20e-9
    p = 2.0 + power.static_power(CORE_SIZES["M"], 2e9)
    assert e == pytest.approx(p * 0.05 + mem_term, rel=1e-12)


def test_predict_energy_missing_table_entry_rejected():
    power = PowerTable(VF, coeff_by_size={"M": 1.0})
    stats = make_stats()
    with pytest.raises(ValueError):
        predict_energy(stats, setting("L", 2.0, 8), 0.05, power, 0.0, 8)


def test_time_monotone_in_frequency_and_dispatch():
    stats = make_stats(lm={(s, w): 1e5 for s in CORE_ORDER for w in range(2, 17)})
    times = [predict_time(stats, setting("M", f / 1e9, 8), Model.M3, L_MEM)
             for f in VF.frequencies]
    assert all(a > b for a, b in zip(times, times[1:]))
    t_small = predict_time(stats, setting("S", 2.0, 8), Model.M3, L_MEM)
    t_large = predict_time(stats, setting("L", 2.0, 8), Model.M3, L_MEM)
    assert t_small >= t_large


def test_energy_monotone_in_voltage_and_time():
    power = PowerTable(VF)
    stats = make_stats(misses={w: 0.0 for w in range(2, 17)})
    e_low = predict_energy(stats, setting("M", 1.0, 8), 0.05, power, 0.0, 8)
    e_high = predict_energy(stats, setting("M", 3.25, 8), 0.05, power, 0.0, 8)
    assert e_high > e_low
    e_short = predict_energy(stats, setting("M", 2.0, 8), 0.04, power, 0.0, 8)
    e_long = predict_energy(stats, setting("M", 2.0, 8), 0.05, power, 0.0, 8)
    assert e_long > e_short


def test_negative_compute_time_clamps():
    stats = make_stats(t_total=0.03, t_bp=0.01, t_cache=0.01, t_mem=0.02)
    t0, clamped = derive_t0(stats)
    assert t0 == 0.0 and clamped
    t = predict_time(stats, setting("L", 2.0, 8), Model.M1, L_MEM)
    assert t == pytest.approx(0.02, rel=1e-12)  # only t1 scales


def test_grid_matches_scalar_paths():
    rng = random.Random(2)
    misses = {w: rng.uniform(1e3, 3e5) for w in range(2, 17)}
    lm = {(s, w): misses[w] / rng.uniform(1.0, 5.0)
          for s in CORE_ORDER for w in range(2, 17)}
    stats = make_stats(misses=misses, lm=lm, avg_mlp=2.3)
    cores = [CORE_SIZES[n] for n in CORE_ORDER]
    freqs = list(VF.frequencies)
    ways = list(range(2, 17))
    power = PowerTable(VF)
    for model in Model:
        grid = predict_time_grid(stats, cores, freqs, ways, model, L_MEM)
        e_grid = predict_energy_grid(stats, cores, freqs, ways, grid, power,
                                     VF, 20e-9, stats.w_current)
        for ci, c in enumerate(CORE_ORDER):
            for fi in (0, 4, 9):
                for wi in (0, 6, 14):
                    tgt = setting(c, freqs[fi] / 1e9, ways[wi])
                    t = predict_time(stats, tgt, model, L_MEM)
                    e = predict_energy(stats, tgt, t, power, 20e-9, stats.w_current)
                    assert grid[ci, fi, wi] == pytest.approx(t, rel=1e-12)
                    assert e_grid[ci, fi, wi] == pytest.approx(e, rel=1e-12)
