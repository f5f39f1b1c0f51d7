"""Command-line interface.

Subcommands: `simulate` runs the configured experiment grid and writes the
report, `validate` runs the oracle self-checks, `qos-eval` emits violation
statistics per model, `categorize` prints the library's category table, and
`scenario-gen` materializes a scenario workload.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ExperimentConfig, _apply_overrides, load_experiment
from .report import (build_library, run_experiment, run_qos_eval, workload_specs,
                     write_qos_report, write_report)
from .workload import ScenarioSpec, build_scenario, categorize


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_experiment(args.config)
    else:
        cfg = ExperimentConfig().validate()
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed]
        cfg.library.seed = args.seed
    if getattr(args, "perfect_models", False):
        cfg.perfect_models = True
    for item in getattr(args, "override", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not of the form key=value")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        _apply_overrides(cfg, {key: parsed})
    return cfg


def cmd_simulate(args) -> int:
    try:
        cfg = _load_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg, parallel=args.parallel)
    write_report(report, args.out, figures=not args.no_figures)
    print(f"wrote {os.path.join(args.out, 'report.json')}")
    for label, value in sorted(report["weighted_average_savings"].items()):
        print(f"  weighted average savings {label}: {100 * value:.2f}%")
    return 0


def cmd_validate(args) -> int:
    from .validate import run_all

    results = run_all(atd_traces=args.traces, lm_traces=args.traces,
                      optimizer_instances=args.instances, seed=args.seed or 0)
    print(f"shadow directory vs direct LRU: {results['atd']['mismatches']} mismatches "
          f"in {results['atd']['comparisons']} comparisons")
    print(f"leading-miss heuristic vs oracle: {results['lm']['mismatches']} mismatches "
          f"in {results['lm']['comparisons']} comparisons "
          f"(adversarial mean abs rel error "
          f"{results['lm']['adversarial_mean_abs_rel_error']:.3f})")
    print(f"global optimizer vs exhaustive: {results['optimizer']['mismatches']} "
          f"mismatches in {results['optimizer']['instances']} instances")
    print("PASS" if results["ok"] else "FAIL")
    return 0 if results["ok"] else 1


def cmd_qos_eval(args) -> int:
    try:
        cfg = _load_config(args)
        stats = run_qos_eval(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_qos_report(stats, args.out, figures=not args.no_figures)
    for st in stats:
        print(f"{st.model}: probability={st.probability:.4f} "
              f"expected={st.expected_violation:.4f} std={st.std_violation:.4f}")
    return 0


def cmd_categorize(args) -> int:
    try:
        cfg = _load_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    library = build_library(cfg)
    rows = []
    for app in library:
        derived = categorize(app).label
        rows.append((app.name, derived, app.category or ""))
        print(f"{app.name:>14s}  {derived}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "categories.json")
        with open(path, "w") as fh:
            json.dump([{"app": n, "category": c, "labeled": l} for n, c, l in rows],
                      fh, indent=1, sort_keys=True)
        print(f"wrote {path}")
    return 0


def cmd_scenario_gen(args) -> int:
    try:
        cfg = _load_config(args)
        library = build_library(cfg)
        spec = ScenarioSpec(args.scenario, args.num_cores or cfg.system.num_cores,
                            args.seed if args.seed is not None else cfg.seeds[0])
        apps = build_scenario(spec, library, cfg.scenario_cells and
                              cfg.scenario_cells.get(spec.scenario))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    doc = {"scenario": spec.scenario, "num_cores": spec.num_cores, "seed": spec.seed,
           "apps": [{"core": i, "app": app.name, "category": app.category}
                    for i, app in enumerate(apps)]}
    print(json.dumps(doc, indent=1, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"scenario{spec.scenario}_workload.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmsim",
        description="QoS-constrained multicore resource management simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_default):
        p.add_argument("--config", help="experiment config (JSON)")
        p.add_argument("--seed", type=int, help="override experiment seed")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--parallel", type=int, default=0,
                       help="worker processes for independent runs")
        p.add_argument("--perfect-models", action="store_true",
                       help="read predictions from ground truth")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="override any config constant, e.g. "
                            "system.l_mem=8e-8 (repeatable)")
        p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")

    p = sub.add_parser("simulate", help="run the experiment grid and write reports")
    add_common(p, "results")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="run oracle self-checks")
    p.add_argument("--traces", type=int, default=100)
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("qos-eval", help="violation statistics per model")
    add_common(p, "results")
    p.set_defaults(func=cmd_qos_eval)

    p = sub.add_parser("categorize", help="derive application categories")
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--seed", type=int, help="override library seed")
    p.add_argument("--out", help="optional output directory")
    p.set_defaults(func=cmd_categorize)

    p = sub.add_parser("scenario-gen", help="materialize one scenario workload")
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--scenario", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--num-cores", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="optional output directory")
    p.set_defaults(func=cmd_scenario_gen)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
