"""Analytic performance and energy models used by the resource manager.

The manager predicts the execution time and energy of the upcoming interval
for candidate (core size, frequency, way allocation) settings from counters
observed over the past interval.  Three memory-time variants are supported:

* M1 charges the full memory latency for every predicted cache miss.
* M2 divides the miss count by the average memory-level parallelism measured
  at the current setting, assuming it stays constant across settings.
* M3 charges latency only for the leading misses reported per (core size,
  allocation) by the shadow-directory counters.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


@dataclass(frozen=True)
class CoreConfig:
    """One point of the resizable core: S, M or L."""

    name: str
    dispatch: int
    rob: int
    rs: int
    lsq: int
    index: int  # position in the size ladder, used for deterministic tie-breaks


CORE_SIZES = {
    "S": CoreConfig("S", dispatch=2, rob=64, rs=16, lsq=10, index=0),
    "M": CoreConfig("M", dispatch=4, rob=128, rs=64, lsq=32, index=1),
    "L": CoreConfig("L", dispatch=8, rob=256, rs=128, lsq=64, index=2),
}
CORE_ORDER = ("S", "M", "L")


@dataclass(frozen=True)
class VfPoint:
    frequency: float  # Hz
    voltage: float  # V


class VfTable:
    """Discrete frequency grid with a voltage for each operating point."""

    def __init__(self, points):
        pts = sorted(points, key=lambda p: p.frequency)
        if not pts:
            raise ValueError("empty voltage/frequency table")
        for lo, hi in zip(pts, pts[1:]):
            if hi.voltage < lo.voltage:
                raise ValueError("voltage must be non-decreasing in frequency")
        self._points = tuple(pts)
        self._by_freq = {_freq_key(p.frequency): p for p in pts}

    @classmethod
    def linear(cls, f_min=1.0e9, f_max=3.25e9, step=0.25e9, v_anchor_lo=(1.0e9, 0.8),
               v_anchor_hi=(3.25e9, 1.25)):
        """Grid with voltage interpolated linearly between two anchor points."""
        f_lo, v_lo = v_anchor_lo
        f_hi, v_hi = v_anchor_hi
        slope = (v_hi - v_lo) / (f_hi - f_lo)
        points = []
        f = f_min
        while f <= f_max + 1e-3:
            points.append(VfPoint(f, v_lo + (f - f_lo) * slope))
            f += step
        return cls(points)

    def lookup(self, frequency: float) -> VfPoint:
        key = _freq_key(frequency)
        if key not in self._by_freq:
            raise ValueError(f"frequency {frequency} is not on the configured grid")
        return self._by_freq[key]

    def voltage(self, frequency: float) -> float:
        return self.lookup(frequency).voltage

    @property
    def frequencies(self):
        return tuple(p.frequency for p in self._points)

    @property
    def points(self):
        return self._points


def _freq_key(frequency: float) -> int:
    return int(round(frequency))


DEFAULT_VF_TABLE = VfTable.linear()


def vf_table(frequency: float, table: VfTable | None = None) -> VfPoint:
    """Return the (frequency, voltage) operating point for an on-grid frequency."""
    return (table or DEFAULT_VF_TABLE).lookup(frequency)


class PowerTable:
    """Static core power per (core size, frequency).

    Default form is coeff(core) * V(f)^2; an explicit per-point table can
    override it entry by entry.
    """

    def __init__(self, vf: VfTable, coeff_by_size=None, explicit=None):
        self.vf = vf
        self.coeff_by_size = dict(coeff_by_size or {"S": 0.6, "M": 1.0, "L": 1.6})
        self.explicit = dict(explicit or {})

    def static_power(self, core: CoreConfig, frequency: float) -> float:
        key = (core.name, _freq_key(frequency))
        if key in self.explicit:
            return self.explicit[key]
        if core.name not in self.coeff_by_size:
            raise ValueError(f"no static power entry for core size {core.name!r}")
        v = self.vf.voltage(frequency)
        return self.coeff_by_size[core.name] * v * v


@dataclass(frozen=True)
class ResourceSetting:
    """The (core size, voltage-frequency point, LLC ways) triple set per core."""

    core: CoreConfig
    vf: VfPoint
    ways: int


class Model(Enum):
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"


@dataclass
class IntervalStats:
    """Counters observable by the manager over one closed interval."""

    t_total: float  # seconds
    t_bp: float  # branch-prediction stall time, seconds
    t_cache: float  # cache-access stall time, seconds
    t_mem: float  # memory stall time, seconds
    f_current: float  # Hz
    c_current: CoreConfig
    w_current: int
    mem_accesses: float  # DRAM accesses over the interval
    miss_curve: dict  # ways -> predicted LLC misses (shadow directory)
    lm_table: dict  # (core size name, ways) -> predicted leading misses
    avg_mlp: float  # measured average MLP at the current setting
    p_dyn_sample: float  # sampled dynamic power, W
    v_sample: float  # voltage during the power sample, V
    instructions: int


def derive_t0(stats: IntervalStats):
    """Split the interval: returns (compute time scalable with dispatch width,
    whether it had to be clamped to zero)."""
    t1 = stats.t_bp + stats.t_cache
    t0 = stats.t_total - t1 - stats.t_mem
    if t0 < 0.0:
        return 0.0, True
    return t0, False


def _misses_at(stats: IntervalStats, ways: int) -> float:
    if ways not in stats.miss_curve:
        raise ValueError(f"miss curve has no entry for {ways} ways")
    return stats.miss_curve[ways]


def mem_time(stats: IntervalStats, target: ResourceSetting, model: Model,
             l_mem: float) -> float:
    """Predicted memory stall time of the next interval at the target setting."""
    misses = _misses_at(stats, target.ways)
    if model is Model.M1:
        return misses * l_mem
    if model is Model.M2:
        return misses / max(stats.avg_mlp, 1.0) * l_mem
    key = (target.core.name, target.ways)
    if key not in stats.lm_table:
        raise ValueError(f"leading-miss table has no entry for {key}")
    return stats.lm_table[key] * l_mem


def predict_time(stats: IntervalStats, target: ResourceSetting, model: Model,
                 l_mem: float) -> float:
    """Predict next-interval execution time at the target setting.

    Compute time scales with the dispatch-width ratio, compute plus
    branch/cache time scales with the frequency ratio, and memory time is
    frequency-independent.
    """
    t0, _ = derive_t0(stats)
    t1 = stats.t_bp + stats.t_cache
    scaled = (t0 * stats.c_current.dispatch / target.core.dispatch + t1)
    return scaled * stats.f_current / target.vf.frequency + mem_time(stats, target, model, l_mem)


def qos_ok(stats: IntervalStats, target: ResourceSetting, baseline: ResourceSetting,
           alpha: float, model: Model, l_mem: float) -> bool:
    """True when the target's predicted time stays within alpha times the
    predicted time at the baseline setting (both under the same model)."""
    t_target = predict_time(stats, target, model, l_mem)
    t_base = predict_time(stats, baseline, model, l_mem)
    return t_target <= t_base * alpha


def predict_energy(stats: IntervalStats, target: ResourceSetting, predicted_t: float,
                   power: PowerTable, e_mem: float, w_last: int) -> float:
    """Predict next-interval energy at the target setting.

    Dynamic power is the sampled value rescaled by the voltage ratio squared;
    memory energy charges the access count corrected by the miss delta between
    the target and the last allocation.
    """
    v = target.vf.voltage
    p_dyn = stats.p_dyn_sample * (v * v) / (stats.v_sample * stats.v_sample)
    p_static = power.static_power(target.core, target.vf.frequency)
    dm = _misses_at(stats, target.ways) - _misses_at(stats, w_last)
    return (p_dyn + p_static) * predicted_t + (stats.mem_accesses + dm) * e_mem


def predict_time_grid(stats: IntervalStats, cores, freqs, ways, model: Model,
                      l_mem: float) -> np.ndarray:
    """Vectorized predict_time over a full (core, frequency, ways) grid.

    Returns an array of shape (len(cores), len(freqs), len(ways)).
    """
    t0, _ = derive_t0(stats)
    t1 = stats.t_bp + stats.t_cache
    d_cur = stats.c_current.dispatch
    d = np.array([c.dispatch for c in cores], dtype=float)
    f = np.array(freqs, dtype=float)
    misses = np.array([stats.miss_curve[w] for w in ways], dtype=float)
    if model is Model.M1:
        tmem = np.broadcast_to(misses * l_mem, (len(cores), len(ways)))
    elif model is Model.M2:
        tmem = np.broadcast_to(misses / max(stats.avg_mlp, 1.0) * l_mem,
                               (len(cores), len(ways)))
    else:
        tmem = np.array([[stats.lm_table[(c.name, w)] for w in ways] for c in cores],
                        dtype=float) * l_mem
    scaled = t0 * d_cur / d + t1  # (n_c,)
    t = scaled[:, None] * (stats.f_current / f)[None, :]  # (n_c, n_f)
    return t[:, :, None] + tmem[:, None, :]


def predict_energy_grid(stats: IntervalStats, cores, freqs, ways, t_grid: np.ndarray,
                        power: PowerTable, vf: VfTable, e_mem: float,
                        w_last: int) -> np.ndarray:
    """Vectorized predict_energy matching the shape of predict_time_grid."""
    v = np.array([vf.voltage(f) for f in freqs], dtype=float)
    p_dyn = stats.p_dyn_sample * (v / stats.v_sample) ** 2  # (n_f,)
    p_static = np.array([[power.static_power(c, f) for f in freqs] for c in cores],
                        dtype=float)  # (n_c, n_f)
    p = p_dyn[None, :] + p_static
    misses = np.array([stats.miss_curve[w] for w in ways], dtype=float)
    e_memory = (stats.mem_accesses + misses - stats.miss_curve[w_last]) * e_mem
    return p[:, :, None] * t_grid + e_memory[None, None, :]
