"""Event-driven multicore simulation and QoS-violation evaluation.

One run advances a global timeline of per-core interval boundaries: the core
with the earliest boundary closes its interval against ground truth, the
manager is invoked on it, and the chosen system setting takes effect on each
core at its next interval start.  Manager instruction overhead, DVFS
transition cost and core-resize drain are charged to dedicated accumulators;
they do not perturb the boundary timeline, so disabling them changes total
energy by exactly the charged amount.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .models import (CORE_ORDER, CORE_SIZES, Model, ResourceSetting,
                     predict_energy_grid, predict_time, predict_time_grid)
from .optimizer import Policy, global_optimize, local_optimize
from .workload import AppProfile, actual_time_energy, ground_truth

POLICIES = ("idle", "rm1", "rm2", "rm3")


@dataclass
class OverheadModel:
    """Costs of running the manager and enforcing its decisions."""

    rm_instructions: int = 100_000
    dvfs_time: float = 15e-6  # seconds per VF transition
    dvfs_energy: float = 3e-6  # joules per VF transition
    resize_drain: bool = True  # drain the ROB before resizing
    enabled: bool = True

    @classmethod
    def from_config(cls, system: SystemConfig, enabled=None):
        return cls(rm_instructions=system.rm_instruction_count(),
                   dvfs_time=system.dvfs_time,
                   dvfs_energy=system.dvfs_energy,
                   resize_drain=system.resize_drain,
                   enabled=system.overheads_enabled if enabled is None else enabled)


@dataclass
class Violation:
    time: float
    core: int
    value: float


@dataclass
class RunMetrics:
    policy: str
    model: str | None
    perfect: bool
    per_core: list
    uncore_energy_j: float
    end_time_s: float
    total_energy_j: float
    overhead_energy_j: float
    violations: list
    fallbacks: int
    t0_clamps: int
    savings: float | None = None

    def recompute_total(self) -> float:
        app = sum(c["energy_j"] for c in self.per_core)
        return app + self.overhead_energy_j + self.uncore_energy_j


@dataclass
class _CoreRun:
    app: AppProfile
    setting: ResourceSetting
    target: ResourceSetting
    boundary: float = 0.0
    interval: int = 0
    retired: int = 0
    counting: bool = True
    energy: float = 0.0
    oh_rm: float = 0.0
    oh_dvfs: float = 0.0
    oh_resize: float = 0.0
    oh_time: float = 0.0
    last_tpi: float = 0.0  # seconds per instruction of the last closed interval
    last_power: float = 0.0


def violation_value(t_act_target: float, t_act_base: float) -> float:
    """Relative excess of the target's actual time over the baseline's."""
    if t_act_base <= 0:
        raise ValueError("baseline time must be positive")
    return (t_act_target - t_act_base) / t_act_base


def _phase_of(app: AppProfile, interval: int):
    return app.phases[app.phase_trace[interval % len(app.phase_trace)]]


def run(workload, policy: str, model: Model | None, system: SystemConfig,
        perfect: bool = False) -> RunMetrics:
    """Simulate one workload under a policy until every application retires
    its target instruction count.

    `workload` binds one application profile per core.  In perfect mode the
    manager reads times and energies of the next interval straight from
    ground truth and overheads are disabled, mirroring the idealized-results
    convention.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if len(workload) != system.num_cores:
        raise ValueError("workload must bind exactly one application per core")
    constants = system.constants()
    baseline = constants.baseline
    overheads = OverheadModel.from_config(system)
    if perfect:
        overheads.enabled = False
    policy_enum = None if policy == "idle" else Policy(policy)
    total_ways = system.total_ways
    target_instr = system.intervals_per_app * system.interval_instructions
    interval_instr = system.interval_instructions

    gt_cache = {}
    phase_cache = {}
    act_cache = {}

    def gt_at(phase, setting):
        key = (id(phase), setting)
        out = gt_cache.get(key)
        if out is None:
            out = ground_truth(phase, setting, constants, phase_cache)
            gt_cache[key] = out
        return out

    def act_at(phase, setting):
        key = (id(phase), setting)
        out = act_cache.get(key)
        if out is None:
            out = actual_time_energy(phase, setting, constants)
            act_cache[key] = out
        return out

    cores = []
    for app in workload:
        state = _CoreRun(app=app, setting=baseline, target=baseline)
        state.boundary = gt_at(_phase_of(app, 0), baseline).t
        cores.append(state)

    curves = {}
    violations = []
    fallbacks = 0
    t0_clamps = 0
    end_time = 0.0
    remaining = len(cores)

    while remaining:
        cid = min(range(len(cores)), key=lambda i: (cores[i].boundary, i))
        core = cores[cid]
        now = core.boundary
        phase = _phase_of(core.app, core.interval)
        gt = gt_at(phase, core.setting)

        if core.counting:
            core.energy += gt.e
        if core.setting != baseline:
            t_base = act_at(phase, baseline)[0]
            if gt.t > t_base:
                violations.append(Violation(now, cid, violation_value(gt.t, t_base)))

        core.retired += interval_instr
        core.interval += 1
        if core.counting and core.retired >= target_instr:
            core.counting = False
            remaining -= 1
            end_time = now
            if remaining == 0:
                break

        next_phase = _phase_of(core.app, core.interval)

        if policy_enum is not None:
            stats = gt.observed
            if stats.t_total < stats.t_bp + stats.t_cache + stats.t_mem:
                t0_clamps += 1
            core.last_tpi = gt.t / interval_instr
            core.last_power = stats.p_dyn_sample + constants.power.static_power(
                core.setting.core, core.setting.vf.frequency)

            qos_bound = None
            if perfect:
                # perfect mode also predicts every core's upcoming phase, so
                # all curves are rebuilt against ground truth of the interval
                # each core is about to run; nothing is served stale
                for j, other in enumerate(cores):
                    upcoming = _phase_of(other.app,
                                         other.interval + (0 if j == cid else 1))
                    curves[j] = local_optimize(
                        stats, policy_enum, baseline, model, constants,
                        perfect_eval=lambda setting, p=upcoming: act_at(p, setting))
            else:
                if system.anchored_qos:
                    qos_bound = act_at(phase, baseline)[0]
                curves[cid] = local_optimize(stats, policy_enum, baseline, model,
                                             constants, None, qos_bound)

            if overheads.enabled and core.counting:
                rm_time = overheads.rm_instructions * core.last_tpi
                core.oh_rm += core.last_power * rm_time
                core.oh_time += rm_time

            if len(curves) == len(cores):
                alloc = global_optimize([curves[i] for i in sorted(curves)],
                                        total_ways, baseline)
                if alloc.fallback:
                    fallbacks += 1
                for j, new_setting in enumerate(alloc.settings):
                    other = cores[j]
                    vf_changed = new_setting.vf != other.target.vf
                    size_changed = new_setting.core != other.target.core
                    if overheads.enabled and other.counting:
                        if vf_changed or system.apply_all_settings:
                            other.oh_dvfs += overheads.dvfs_energy
                            other.oh_time += overheads.dvfs_time
                        if (size_changed or system.apply_all_settings) and overheads.resize_drain:
                            drain_time = other.target.core.rob * (other.last_tpi or 0.0)
                            other.oh_resize += (other.last_power or 0.0) * drain_time
                            other.oh_time += drain_time
                    other.target = new_setting

        core.setting = core.target
        core.boundary = now + gt_at(next_phase, core.setting).t

    per_core = []
    overhead_total = 0.0
    for cid, core in enumerate(cores):
        overhead_total += core.oh_rm + core.oh_dvfs + core.oh_resize
        per_core.append({
            "core": cid,
            "app": core.app.name,
            "energy_j": core.energy,
            "rm_overhead_j": core.oh_rm,
            "dvfs_overhead_j": core.oh_dvfs,
            "resize_overhead_j": core.oh_resize,
            "overhead_time_s": core.oh_time,
            "intervals": core.interval,
        })
    uncore = constants.uncore_power * end_time
    total = sum(c["energy_j"] for c in per_core) + overhead_total + uncore
    return RunMetrics(
        policy=policy,
        model=model.value if model is not None else None,
        perfect=perfect,
        per_core=per_core,
        uncore_energy_j=uncore,
        end_time_s=end_time,
        total_energy_j=total,
        overhead_energy_j=overhead_total,
        violations=violations,
        fallbacks=fallbacks,
        t0_clamps=t0_clamps,
    )


def savings_fraction(metrics: RunMetrics, idle_metrics: RunMetrics) -> float:
    """Energy saved relative to the idle-manager run of the same workload."""
    return (idle_metrics.total_energy_j - metrics.total_energy_j) / idle_metrics.total_energy_j


# ---------------------------------------------------------------------------
# QoS-violation probability evaluation


@dataclass
class QosEvalStats:
    model: str
    probability: float
    expected_violation: float
    std_violation: float
    histogram: list  # (bin_lo, bin_hi, probability mass)
    case_weight: float
    violating_weight: float


def _actual_grids(phase, constants, cores, freqs, ways):
    """Ground-truth time and energy over the full setting grid for one phase."""
    instr = constants.interval_instructions
    scale = instr / phase.instructions
    base = constants.baseline
    f_b, v_b, d_b = base.vf.frequency, base.vf.voltage, base.core.dispatch
    d = np.array([c.dispatch for c in cores])
    ilp = np.array([phase.ilp_eff[c.name] for c in cores])
    f = np.array(freqs)
    misses = np.array([phase.misses(w, instr) for w in ways])
    misses_b = phase.misses(base.ways, instr)
    mlp = np.array([[phase.mlp_fn(c.name, w, base.ways) for w in ways] for c in cores])

    t0 = phase.t0 * scale * d_b / (d * ilp)  # (n_c,)
    t1 = (phase.t_bp + phase.t_cache) * scale
    t_mem = misses[None, :] / mlp * constants.l_mem \
        + phase.contention_penalty * np.maximum(0.0, misses - misses_b)[None, :]
    # compute plus branch/cache time scales with frequency; memory time does not
    t = ((t0[:, None] + t1) * (f_b / f)[None, :])[:, :, None] + t_mem[:, None, :]

    v = np.array([constants.vf.voltage(fx) for fx in freqs])
    p_dyn = phase.p_dyn_base * (v / v_b) ** 2
    p_static = np.array([[constants.power.static_power(c, fx) for fx in freqs]
                         for c in cores])
    dram = phase.mem_accesses_pki * instr / 1000.0 + (misses - misses_b)
    e = (p_dyn[None, :] + p_static)[:, :, None] * t + (dram * constants.e_mem)[None, None, :]
    return t, e


def qos_eval(library, model: Model, system: SystemConfig, perfect: bool = False,
             hist_bin: float = 0.02):
    """Estimate the probability and magnitude of QoS violations for a model.

    Iterates every phase of every application, every current setting, and the
    per-way-count targets the manager would select from the stats observed at
    that current setting.  A case violates when the prediction admits the
    target but its actual time exceeds the actual baseline time.  Cases are
    weighted by phase weight and uniformly over current settings and selected
    targets.
    """
    if not library:
        raise ValueError("application library is empty")
    constants = system.constants()
    baseline = constants.baseline
    cores = [CORE_SIZES[name] for name in CORE_ORDER]
    freqs = list(constants.vf.frequencies)
    ways = list(range(constants.w_min, constants.w_max + 1))
    b_c = next(i for i, c in enumerate(cores) if c.name == baseline.core.name)
    b_f = freqs.index(baseline.vf.frequency)
    b_w = ways.index(baseline.ways)
    n_currents = len(cores) * len(freqs) * len(ways)
    phase_cache = {}

    prob = 0.0
    total_weight = 0.0
    viol_weight = 0.0
    viol_sum = 0.0
    viol_sumsq = 0.0
    hist = {}

    n_apps = len(library)
    for app in library:
        for phase, phase_weight in zip(app.phases, app.weights):
            weight_phase = phase_weight / n_apps
            t_act, e_act = _actual_grids(phase, constants, cores, freqs, ways)
            t_act_base = t_act[b_c, b_f, b_w]
            for ci, core_cfg in enumerate(cores):
                for fi, f in enumerate(freqs):
                    for wi, w in enumerate(ways):
                        current = ResourceSetting(core_cfg, constants.vf.lookup(f), w)
                        stats = ground_truth(phase, current, constants, phase_cache).observed
                        if perfect:
                            t_pred = t_act
                            e_pred = e_act
                            t_pred_base = t_act_base
                        else:
                            t_pred = predict_time_grid(stats, cores, freqs, ways,
                                                       model, constants.l_mem)
                            e_pred = predict_energy_grid(stats, cores, freqs, ways,
                                                         t_pred, constants.power,
                                                         constants.vf, constants.e_mem, w)
                            t_pred_base = predict_time(stats, baseline, model,
                                                       constants.l_mem)
                        feasible = t_pred <= t_pred_base * constants.alpha
                        masked = np.where(feasible, e_pred, np.inf)
                        flat = masked.reshape(-1, len(ways))
                        feasible_ws = np.isfinite(flat).any(axis=0)
                        n_feas = int(feasible_ws.sum())
                        if n_feas == 0:
                            continue
                        weight_case = weight_phase / n_currents / n_feas
                        sel = flat.argmin(axis=0)  # first minimum: smallest (c, f)
                        for wj in np.nonzero(feasible_ws)[0]:
                            c_sel, f_sel = divmod(int(sel[wj]), len(freqs))
                            total_weight += weight_case
                            t_target = t_act[c_sel, f_sel, wj]
                            if t_target > t_act_base:
                                value = (t_target - t_act_base) / t_act_base
                                prob += weight_case
                                viol_weight += weight_case
                                viol_sum += weight_case * value
                                viol_sumsq += weight_case * value * value
                                b = int(value / hist_bin)
                                hist[b] = hist.get(b, 0.0) + weight_case

    expected = viol_sum / viol_weight if viol_weight > 0 else 0.0
    variance = viol_sumsq / viol_weight - expected ** 2 if viol_weight > 0 else 0.0
    histogram = [(b * hist_bin, (b + 1) * hist_bin, mass)
                 for b, mass in sorted(hist.items())]
    return QosEvalStats(
        model="perfect" if perfect else model.value,
        probability=prob,
        expected_violation=expected,
        std_violation=math.sqrt(max(0.0, variance)),
        histogram=histogram,
        case_weight=total_weight,
        violating_weight=viol_weight,
    )
