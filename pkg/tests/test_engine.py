import copy

import pytest

from rmsim.config import SystemConfig
from rmsim.engine import (OverheadModel, qos_eval, run, savings_fraction,
                          violation_value)
from rmsim.models import Model
from rmsim.workload import (AppProfile, ScenarioSpec, build_scenario,
                            generate_library)
from tests.test_workload import make_phase, FLAT9


def small_system(**kw):
    defaults = dict(num_cores=2, intervals_per_app=12)
    defaults.update(kw)
    return SystemConfig(**defaults)


def two_apps(library):
    return build_scenario(ScenarioSpec(1, 2, 40), library)


def test_violation_value():
    assert violation_value(110.0, 100.0) == pytest.approx(0.10)
    assert violation_value(100.0, 100.0) == 0.0
    assert violation_value(95.0, 100.0) == pytest.approx(-0.05)
    with pytest.raises(ValueError):
        violation_value(1.0, 0.0)


def test_idle_run_never_deviates(library_untraced):
    system = small_system()
    apps = two_apps(library_untraced)
    idle = run(apps, "idle", None, system)
    again = run(apps, "idle", None, system)
    assert idle.violations == []
    assert savings_fraction(idle, again) == 0.0
    assert idle.overhead_energy_j == 0.0


def test_run_requires_matching_workload(library_untraced):
    with pytest.raises(ValueError):
        run(library_untraced[:1], "idle", None, small_system())
    with pytest.raises(ValueError):
        run(two_apps(library_untraced), "bogus", None, small_system())


def test_run_determinism(library):
    system = small_system()
    apps = two_apps(library)
    a = run(apps, "rm3", Model.M3, system)
    b = run(apps, "rm3", Model.M3, system)
    assert a.total_energy_j == b.total_energy_j
    assert a.end_time_s == b.end_time_s
    assert len(a.violations) == len(b.violations)
    for va, vb in zip(a.violations, b.violations):
        assert (va.time, va.core, va.value) == (vb.time, vb.core, vb.value)


def test_energy_accounting_closure(library):
    system = small_system()
    apps = two_apps(library)
    metrics = run(apps, "rm3", Model.M3, system)
    assert metrics.total_energy_j == pytest.approx(metrics.recompute_total(),
                                                   rel=1e-12)


def test_event_times_monotone(library):
    system = small_system(intervals_per_app=20)
    apps = two_apps(library)
    metrics = run(apps, "rm3", Model.M1, system)
    times = [v.time for v in metrics.violations]
    assert times == sorted(times)
    assert metrics.end_time_s > 0
    for core in metrics.per_core:
        assert core["intervals"] >= system.intervals_per_app


def test_perfect_runs_have_no_violations(library_untraced):
    system = small_system()
    for scenario in (1, 3):
        apps = build_scenario(ScenarioSpec(scenario, 2, 77), library_untraced)
        for policy in ("rm1", "rm2", "rm3"):
            metrics = run(apps, policy, None, system, perfect=True)
            assert metrics.violations == []
            assert metrics.overhead_energy_j == 0.0  # idealized mode


def test_overhead_closure_and_share(library):
    system = small_system(intervals_per_app=20)
    apps = two_apps(library)
    on = run(apps, "rm3", Model.M3, system)
    off_system = copy.deepcopy(system)
    off_system.overheads_enabled = False
    off = run(apps, "rm3", Model.M3, off_system)
    delta = on.total_energy_j - off.total_energy_j
    assert delta == pytest.approx(on.overhead_energy_j, rel=1e-12)
    assert on.overhead_energy_j > 0.0
    assert on.overhead_energy_j / on.total_energy_j < 0.005


def test_overhead_model_from_config():
    assert SystemConfig(num_cores=2).rm_instruction_count() == 51_000
    assert SystemConfig(num_cores=4).rm_instruction_count() == 73_000
    assert SystemConfig(num_cores=8).rm_instruction_count() == 100_000
    oh = OverheadModel.from_config(SystemConfig(num_cores=8))
    assert oh.dvfs_time == 15e-6 and oh.dvfs_energy == 3e-6


def test_anchored_qos_mode_runs(library):
    system = small_system(anchored_qos=True)
    apps = two_apps(library)
    metrics = run(apps, "rm3", Model.M3, system)
    assert metrics.total_energy_j > 0


def test_apply_all_settings_charges_every_decision(library):
    system = small_system(intervals_per_app=10)
    apps = two_apps(library)
    deltas = run(apps, "rm3", Model.M3, system)
    all_system = copy.deepcopy(system)
    all_system.apply_all_settings = True
    always = run(apps, "rm3", Model.M3, all_system)
    assert always.overhead_energy_j >= deltas.overhead_energy_j


def test_qos_eval_perfect_probability_zero(library_untraced):
    system = SystemConfig(num_cores=2)
    stats = qos_eval(library_untraced[:2], Model.M3, system, perfect=True)
    assert stats.probability == 0.0
    assert stats.expected_violation == 0.0
    assert stats.histogram == []


def test_qos_eval_rejects_empty_library():
    with pytest.raises(ValueError):
        qos_eval([], Model.M1, SystemConfig())


def test_qos_eval_m2_equals_m3_with_constant_mlp():
    # constant MLP in both core size and allocation: the constant-MLP
    # assumption is exact, so both models behave identically
    phase = make_phase(FLAT9, mlp=(2.0, 2.0, 2.0), ilp=(0.9, 1.0, 0.95))
    app = AppProfile("const", [phase], [1.0], [0], None)
    system = SystemConfig(num_cores=2)
    m2 = qos_eval([app], Model.M2, system)
    m3 = qos_eval([app], Model.M3, system)
    assert m2.probability == pytest.approx(m3.probability, abs=1e-15)
    assert m2.expected_violation == pytest.approx(m3.expected_violation, abs=1e-15)


def test_qos_eval_histogram_accounts_all_violations(library):
    system = SystemConfig(num_cores=2)
    st = qos_eval(library[:2], Model.M1, system)
    assert st.probability <= st.case_weight + 1e-12
    assert sum(m for _, _, m in st.histogram) == pytest.approx(st.probability,
                                                               rel=1e-9)
    assert st.violating_weight == pytest.approx(st.probability, rel=1e-12)


def test_model_ordering_on_small_subset(library):
    system = SystemConfig(num_cores=2)
    subset = [a for a in library if a.category in ("CS-PS", "CI-PS")][:2]
    p = {m: qos_eval(subset, m, system).probability
         for m in (Model.M1, Model.M2, Model.M3)}
    assert p[Model.M3] <= p[Model.M2] <= p[Model.M1]
