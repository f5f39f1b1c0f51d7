"""System and experiment configuration.

Defaults mirror the studied machine: three core sizes, a 1-3.25 GHz frequency
grid at 0.8-1.25 V, a shared LLC with eight ways per core partitionable in
2..16-way per-core shares, and 100 ns base memory latency.  Every analytic
constant can be overridden from a JSON document or CLI flags.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

from .models import (CORE_SIZES, PowerTable, ResourceSetting, VfTable)


@dataclass
class Constants:
    """Bundle of runtime constants handed to models and the optimizer."""

    vf: VfTable
    power: PowerTable
    l_mem: float
    e_mem: float
    alpha: float
    w_min: int
    w_max: int
    baseline: ResourceSetting
    interval_instructions: int
    uncore_power: float


@dataclass
class SystemConfig:
    num_cores: int = 2
    ways_per_core_baseline: int = 8
    w_min: int = 2
    w_max: int = 16
    f_min: float = 1.0e9
    f_max: float = 3.25e9
    f_step: float = 0.25e9
    v_anchor_lo: tuple = (1.0e9, 0.8)
    v_anchor_hi: tuple = (3.25e9, 1.25)
    baseline_frequency: float = 2.0e9
    baseline_core: str = "M"
    l_mem: float = 100e-9
    e_mem: float = 20e-9
    static_coeff: dict = field(default_factory=lambda: {"S": 0.6, "M": 1.0, "L": 1.6})
    static_table: dict = field(default_factory=dict)  # "S:2000000000" -> watts
    # nonzero uncore power couples policies through the wall clock; the default
    # keeps measured totals decomposable per manager decision
    uncore_power: float = 0.0
    interval_instructions: int = 100_000_000
    intervals_per_app: int = 100
    alpha: float = 1.0
    rm_instructions: dict = field(default_factory=lambda: {2: 51_000, 4: 73_000, 8: 100_000})
    dvfs_time: float = 15e-6
    dvfs_energy: float = 3e-6
    resize_drain: bool = True
    overheads_enabled: bool = True
    apply_all_settings: bool = False
    anchored_qos: bool = False

    @property
    def total_ways(self) -> int:
        return self.ways_per_core_baseline * self.num_cores

    def vf_table(self) -> VfTable:
        return VfTable.linear(self.f_min, self.f_max, self.f_step,
                              tuple(self.v_anchor_lo), tuple(self.v_anchor_hi))

    def power_table(self, vf: VfTable | None = None) -> PowerTable:
        vf = vf or self.vf_table()
        explicit = {}
        for key, watts in self.static_table.items():
            size, freq = key.split(":")
            explicit[(size, int(round(float(freq))))] = float(watts)
        return PowerTable(vf, self.static_coeff, explicit)

    def baseline_setting(self, vf: VfTable | None = None) -> ResourceSetting:
        vf = vf or self.vf_table()
        return ResourceSetting(CORE_SIZES[self.baseline_core],
                               vf.lookup(self.baseline_frequency),
                               self.ways_per_core_baseline)

    def constants(self) -> Constants:
        vf = self.vf_table()
        return Constants(
            vf=vf,
            power=self.power_table(vf),
            l_mem=self.l_mem,
            e_mem=self.e_mem,
            alpha=self.alpha,
            w_min=self.w_min,
            w_max=self.w_max,
            baseline=self.baseline_setting(vf),
            interval_instructions=self.interval_instructions,
            uncore_power=self.uncore_power,
        )

    def rm_instruction_count(self) -> int:
        table = {int(k): int(v) for k, v in self.rm_instructions.items()}
        if self.num_cores in table:
            return table[self.num_cores]
        nearest = min(table, key=lambda n: abs(n - self.num_cores))
        return table[nearest]


@dataclass
class LibraryConfig:
    seed: int = 7
    apps_per_category: int = 2
    profile_instructions: int = 1_000_000
    trace_profile: bool = True
    trace_length: int = 12_000
    trace_sets: int = 32
    dep_density: float = 0.15
    min_phases: int = 3
    max_phases: int = 8
    path: str | None = None  # load a serialized library instead of generating


@dataclass
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    library: LibraryConfig = field(default_factory=LibraryConfig)
    workloads: list = field(default_factory=list)  # dicts: scenario/num_cores/seed
    policies: list = field(default_factory=lambda: ["idle", "rm1", "rm2", "rm3"])
    models: list = field(default_factory=lambda: ["m3"])
    perfect_models: bool = False
    seeds: list = field(default_factory=lambda: [1])
    scenario_cells: dict | None = None  # scenario -> list of (cat1, cat2)

    def validate(self):
        if not self.policies:
            raise ValueError("config needs at least one policy")
        if not self.models:
            raise ValueError("config needs at least one model")
        if not self.seeds:
            raise ValueError("config needs explicit seeds")
        known = {"idle", "rm1", "rm2", "rm3"}
        for p in self.policies:
            if p not in known:
                raise ValueError(f"unknown policy {p!r}")
        for m in self.models:
            if m not in {"m1", "m2", "m3"}:
                raise ValueError(f"unknown model {m!r}")
        for w in self.workloads:
            if not isinstance(w, dict) or "scenario" not in w:
                raise ValueError("each workload needs at least a scenario number")
        return self


def _apply_overrides(obj, overrides: dict):
    for key, value in overrides.items():
        head, _, rest = key.partition(".")
        if not hasattr(obj, head):
            raise ValueError(f"unknown override target {key!r}")
        if rest:
            _apply_overrides(getattr(obj, head), {rest: value})
        else:
            setattr(obj, head, value)


def experiment_from_dict(doc: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if "system" in doc:
        for key, value in doc["system"].items():
            if not hasattr(cfg.system, key):
                raise ValueError(f"unknown system key {key!r}")
            setattr(cfg.system, key, value)
    if "library" in doc:
        for key, value in doc["library"].items():
            if not hasattr(cfg.library, key):
                raise ValueError(f"unknown library key {key!r}")
            setattr(cfg.library, key, value)
    for key in ("workloads", "policies", "models", "seeds"):
        if key in doc:
            setattr(cfg, key, doc[key])
    if "perfect_models" in doc:
        cfg.perfect_models = bool(doc["perfect_models"])
    if "scenario_cells" in doc:
        cfg.scenario_cells = {int(k): [tuple(c) for c in v]
                              for k, v in doc["scenario_cells"].items()}
    if "overrides" in doc:
        _apply_overrides(cfg, doc["overrides"])
    return cfg.validate()


def load_experiment(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed config {path}: {exc}") from exc
    return experiment_from_dict(doc)


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    doc = {
        "system": asdict(cfg.system),
        "library": asdict(cfg.library),
        "workloads": cfg.workloads,
        "policies": cfg.policies,
        "models": cfg.models,
        "perfect_models": cfg.perfect_models,
        "seeds": cfg.seeds,
    }
    if cfg.scenario_cells is not None:
        doc["scenario_cells"] = {str(k): [list(c) for c in v]
                                 for k, v in cfg.scenario_cells.items()}
    return doc
