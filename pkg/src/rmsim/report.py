"""Experiment orchestration and report emission.

Runs the configured (scenario x policy x model) grid including the idle
baseline, computes energy savings per run and scenario-weighted averages, and
writes a JSON report, CSV tables, and rendered figures for the savings and
QoS-violation results.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .config import ExperimentConfig, experiment_to_dict
from .engine import Violation, qos_eval, run, savings_fraction
from .models import Model
from .workload import (SCENARIO_WEIGHTS, ScenarioSpec, build_scenario,
                       generate_library, load_library)

POLICY_LABELS = {"idle": "Idle", "rm1": "RM1", "rm2": "RM2", "rm3": "RM3"}


def build_library(cfg: ExperimentConfig):
    lib = cfg.library
    if lib.path:
        return load_library(lib.path)
    trace_length = lib.trace_length if lib.trace_profile else 0
    return generate_library(
        seed=lib.seed,
        apps_per_category=lib.apps_per_category,
        instructions=lib.profile_instructions,
        f_baseline=cfg.system.baseline_frequency,
        min_phases=lib.min_phases,
        max_phases=lib.max_phases,
        trace_length=trace_length,
        trace_sets=lib.trace_sets,
        dep_density=lib.dep_density,
    )


def workload_specs(cfg: ExperimentConfig):
    """Materialize workload specs; defaults cover all four scenarios once per
    experiment seed."""
    if cfg.workloads:
        specs = []
        for doc in cfg.workloads:
            specs.append(ScenarioSpec(
                scenario=int(doc["scenario"]),
                num_cores=int(doc.get("num_cores", cfg.system.num_cores)),
                seed=int(doc.get("seed", cfg.seeds[0] * 1000 + int(doc["scenario"]))),
            ))
        return specs
    return [ScenarioSpec(scenario=s, num_cores=cfg.system.num_cores,
                         seed=seed * 1000 + s)
            for seed in cfg.seeds for s in (1, 2, 3, 4)]


def _run_cell(args):
    system, workload, policy, model_name, perfect = args
    model = Model(model_name) if model_name else None
    return run(workload, policy, model, system, perfect)


def run_experiment(cfg: ExperimentConfig, parallel: int = 0) -> dict:
    """Execute every configured cell and assemble the report document."""
    cfg.validate()
    library = build_library(cfg)
    specs = workload_specs(cfg)
    model_names = [None] if cfg.perfect_models else list(cfg.models)
    policies = [p for p in cfg.policies if p != "idle"]

    jobs = []
    meta = []
    for spec in specs:
        system = _system_for(cfg, spec)
        workload = build_scenario(spec, library, cfg.scenario_cells and
                                  cfg.scenario_cells.get(spec.scenario))
        jobs.append((system, workload, "idle", None, cfg.perfect_models))
        meta.append((spec, "idle", "perfect" if cfg.perfect_models else "none"))
        for policy in policies:
            for model_name in model_names:
                jobs.append((system, workload, policy, model_name, cfg.perfect_models))
                meta.append((spec, policy,
                             model_name if model_name else "perfect"))

    if parallel and parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(job) for job in jobs]

    idle_by_spec = {}
    for (spec, policy, _), metrics in zip(meta, results):
        if policy == "idle":
            idle_by_spec[spec] = metrics

    rows = []
    for (spec, policy, model_label), metrics in zip(meta, results):
        metrics.savings = savings_fraction(metrics, idle_by_spec[spec])
        rows.append({
            "scenario": spec.scenario,
            "num_cores": spec.num_cores,
            "workload_seed": spec.seed,
            "apps": [c["app"] for c in metrics.per_core],
            "policy": policy,
            "model": model_label,
            "total_energy_j": metrics.total_energy_j,
            "overhead_energy_j": metrics.overhead_energy_j,
            "uncore_energy_j": metrics.uncore_energy_j,
            "end_time_s": metrics.end_time_s,
            "savings": metrics.savings,
            "violations": [[v.time, v.core, v.value] for v in metrics.violations],
            "fallbacks": metrics.fallbacks,
            "t0_clamps": metrics.t0_clamps,
        })

    averages = _weighted_averages(rows)
    return {
        "config": experiment_to_dict(cfg),
        "runs": rows,
        "scenario_weights": SCENARIO_WEIGHTS,
        "weighted_average_savings": averages["weighted"],
        "plain_average_savings": averages["plain"],
        "per_scenario_savings": averages["per_scenario"],
    }


def _system_for(cfg: ExperimentConfig, spec: ScenarioSpec):
    if spec.num_cores == cfg.system.num_cores:
        return cfg.system
    import copy

    system = copy.deepcopy(cfg.system)
    system.num_cores = spec.num_cores
    return system


def _weighted_averages(rows):
    per_cell = {}
    for row in rows:
        key = (row["policy"], row["model"])
        per_cell.setdefault(key, {}).setdefault(row["scenario"], []).append(row["savings"])
    weighted = {}
    plain = {}
    per_scenario = {}
    for (policy, model), by_scenario in per_cell.items():
        label = f"{policy}/{model}"
        scen_means = {s: sum(v) / len(v) for s, v in by_scenario.items()}
        per_scenario[label] = {str(s): m for s, m in sorted(scen_means.items())}
        total_weight = sum(SCENARIO_WEIGHTS[s] for s in scen_means)
        weighted[label] = sum(SCENARIO_WEIGHTS[s] * m for s, m in scen_means.items()) / total_weight
        all_vals = [v for vals in by_scenario.values() for v in vals]
        plain[label] = sum(all_vals) / len(all_vals)
    return {"weighted": weighted, "plain": plain, "per_scenario": per_scenario}


# ---------------------------------------------------------------------------
# File emission


def write_report(report: dict, out_dir: str, figures: bool = True):
    """Write report.json plus CSV tables, and render figures next to them."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)

    with open(os.path.join(out_dir, "savings.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "num_cores", "workload_seed", "policy", "model",
                         "total_energy_j", "overhead_energy_j", "savings",
                         "violations", "fallbacks"])
        for row in report["runs"]:
            writer.writerow([row["scenario"], row["num_cores"], row["workload_seed"],
                             row["policy"], row["model"], repr(row["total_energy_j"]),
                             repr(row["overhead_energy_j"]), repr(row["savings"]),
                             len(row["violations"]), row["fallbacks"]])

    with open(os.path.join(out_dir, "violations.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "workload_seed", "policy", "model",
                         "time_s", "core", "value"])
        for row in report["runs"]:
            for time_s, core, value in row["violations"]:
                writer.writerow([row["scenario"], row["workload_seed"], row["policy"],
                                 row["model"], repr(time_s), core, repr(value)])

    if figures:
        render_savings_figure(report, os.path.join(out_dir, "fig_savings.png"))


def write_qos_report(stats_list, out_dir: str, figures: bool = True):
    """Write per-model violation statistics and histogram CSVs plus figures."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "qos_stats.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "probability", "expected_violation", "std_violation"])
        for st in stats_list:
            writer.writerow([st.model, repr(st.probability),
                             repr(st.expected_violation), repr(st.std_violation)])
    with open(os.path.join(out_dir, "qos_hist.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "bin_lo", "bin_hi", "mass"])
        for st in stats_list:
            for lo, hi, mass in st.histogram:
                writer.writerow([st.model, repr(lo), repr(hi), repr(mass)])
    doc = {st.model: {"probability": st.probability,
                      "expected_violation": st.expected_violation,
                      "std_violation": st.std_violation,
                      "histogram": st.histogram}
           for st in stats_list}
    with open(os.path.join(out_dir, "qos_stats.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    if figures:
        render_qos_figures(stats_list, out_dir)


def render_savings_figure(report: dict, path: str):
    """Grouped bars of scenario-average savings per policy/model cell."""
    per_scenario = report["per_scenario_savings"]
    if not per_scenario:
        return
    labels = sorted(per_scenario)
    scenarios = sorted({s for v in per_scenario.values() for s in v})
    width = 0.8 / max(1, len(labels))
    fig, ax = plt.subplots(figsize=(7, 3.2))
    for i, label in enumerate(labels):
        xs = [j + i * width for j in range(len(scenarios))]
        ys = [100.0 * per_scenario[label].get(s, 0.0) for s in scenarios]
        ax.bar(xs, ys, width=width, label=label)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(scenarios))])
    ax.set_xticklabels([f"Scenario {s}" for s in scenarios])
    ax.set_ylabel("energy savings (%)")
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_qos_figures(stats_list, out_dir: str):
    models = [st.model for st in stats_list]
    fig, axes = plt.subplots(1, 3, figsize=(9, 3))
    for ax, attr, title in zip(
            axes,
            ("probability", "expected_violation", "std_violation"),
            ("violation probability", "expected violation", "std of violation")):
        ax.bar(models, [getattr(st, attr) for st in stats_list], color="tab:blue")
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "fig_qos_stats.png"), dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 3.2))
    peak = max((mass for st in stats_list for _, _, mass in st.histogram), default=1.0)
    for st in stats_list:
        if not st.histogram:
            continue
        xs = [0.5 * (lo + hi) * 100 for lo, hi, _ in st.histogram]
        ys = [mass / peak for _, _, mass in st.histogram]
        ax.plot(xs, ys, marker="o", markersize=3, label=st.model)
    ax.set_xlabel("violation (%)")
    ax.set_ylabel("occurrences (normalized)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "fig_qos_hist.png"), dpi=150)
    plt.close(fig)


def run_qos_eval(cfg: ExperimentConfig, perfect: bool | None = None):
    """Evaluate violation statistics for every configured model."""
    library = build_library(cfg)
    perfect = cfg.perfect_models if perfect is None else perfect
    stats = []
    if perfect:
        stats.append(qos_eval(library, Model.M3, cfg.system, perfect=True))
        return stats
    for name in cfg.models:
        stats.append(qos_eval(library, Model(name), cfg.system, perfect=False))
    return stats
