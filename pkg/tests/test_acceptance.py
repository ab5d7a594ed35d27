"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from esph import cli
from esph.diagnostics import analyze
from esph.dirac import (assemble_L, eliminate_resistive_es, eliminate_resistive_iso, oscillator_dirac_es,
                        simulate_dae_es, verify_dirac)
from esph.integrators import InputSignal, SimConfig, Trajectory, simulate, simulate_iso
from esph.io import read_trace
from esph.models import (REGISTRY, damped_oscillator_es, damped_oscillator_iso, duffing_es,
                         modulated_oscillator_es, oscillator_solution, wave_chain_es)
from esph.mor import ReductionBasis, pod_basis, reduce
from esph.structure import IsoPhSystem, assemble_phi, assemble_W, validate_structure

from conftest import random_es_dirac, random_iso_dirac

TOL = 1e-10


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def _x0(dim):
    return np.linspace(1.0, -0.5, dim)


@pytest.fixture(scope="module")
def balance_runs():
    inputs = {"zero": InputSignal.zero(1), "sine": InputSignal.from_callable(lambda t: 0.5 * math.sin(t), 1)}
    cfg = SimConfig(t_end=10.0, dt=1e-2)
    start = time.perf_counter()
    runs = {}
    for name, spec in REGISTRY.items():
        sys = spec.build()
        sim = simulate_iso if isinstance(sys, IsoPhSystem) else simulate
        for uname, u in inputs.items():
            runs[name, uname] = sim(sys, u, cfg, _x0(sys.state_dim))
    return runs, time.perf_counter() - start


def test_criterion_1_power_balance(balance_runs, verdict):
    runs, wall = balance_runs
    worst = max(analyze(tr).max_scaled_pbe_residual for tr in runs.values())
    verdict(1, worst <= TOL and wall < 5.0,
            f"max scaled PBE residual {worst:.2e} over {len(runs)} runs in {wall:.2f} s")


def test_criterion_2_dissipation_inequality(balance_runs, verdict):
    runs, _ = balance_runs
    worst = min(analyze(tr).min_scaled_di_margin for tr in runs.values())
    planted = Trajectory(times=np.array([0.0, 0.01]), states=np.zeros((2, 1)), outputs=np.zeros((1, 1)),
                         energies=np.array([1.0, 1.01]), supply_rates=np.zeros(1),
                         dissipation_rates=np.zeros(1), pbe_residuals=np.zeros(1), inputs=np.zeros((1, 1)),
                         scheme="discrete_gradient")
    rejected = analyze(planted).passed_di is False
    verdict(2, worst >= -TOL and rejected,
            f"min scaled DI margin {worst:.2e}, planted energy gain rejected: {rejected}")


def test_criterion_3_energy_conservation(verdict):
    cfg = SimConfig(t_end=100.0, dt=1e-2)
    start = time.perf_counter()
    drifts = {}
    for sys in (damped_oscillator_es(1, 1, 0), duffing_es(1, 1, 0), modulated_oscillator_es(0.5)):
        tr = simulate(sys, InputSignal.zero(1), cfg, [1.0, 0.5])
        assert tr.n_steps == 10_000
        drifts[sys.label] = float(np.max(np.abs(tr.energies - tr.energies[0])))
    wall = time.perf_counter() - start
    worst = max(drifts.values())
    verdict(3, worst <= 1e-9 and wall < 5.0, f"max energy drift {worst:.2e} in {wall:.2f} s")


def test_criterion_4_second_order_convergence(verdict):
    sys = damped_oscillator_es(1, 1, 0)
    T = 2 * math.pi
    exact = oscillator_solution(1, 1, 0, [1, 0], T)
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        tr = simulate(sys, InputSignal.zero(1), SimConfig(t_end=T, dt=dt, scheme="implicit_midpoint"), [1, 0])
        errs.append(float(np.linalg.norm(tr.states[-1] - exact)))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = all(abs(r - 4.0) <= 0.15 * 4.0 for r in ratios)
    verdict(4, ok, f"errors {', '.join(f'{e:.3e}' for e in errs)}; ratios {', '.join(f'{r:.4f}' for r in ratios)}")


def test_criterion_5_mor_structure(verdict):
    start = time.perf_counter()
    sys = wave_chain_es(20, 1.0, 0.5)
    x0 = np.zeros(40)
    x0[:20] = np.sin(np.pi * np.arange(1, 21) / 21)
    cfg = SimConfig(t_end=10.0, dt=1e-2)
    details, ok = [], True
    for uname, u in (("zero", InputSignal.zero(1)), ("sine", InputSignal.from_callable(lambda t: 0.5 * math.sin(t), 1))):
        full = simulate(sys, u, cfg, x0)
        basis = pod_basis(full.states, energy=0.9999)
        red = reduce(sys, basis)
        st = validate_structure(red)
        rep = analyze(simulate(red, u, cfg, basis.project(x0)))
        ok &= (st.passed and st.max_skew_defect <= 1e-12 and st.min_eigenvalue_phi >= -1e-10
               and rep.max_scaled_pbe_residual <= TOL and rep.min_scaled_di_margin >= -TOL)
        details.append(f"u={uname}: n={basis.reduced_dim}, PBE {rep.max_scaled_pbe_residual:.1e}, "
                       f"DI {rep.min_scaled_di_margin:.1e}")
    ident = reduce(sys, ReductionBasis(np.eye(40), np.ones(40), 1.0))
    u = InputSignal.from_callable(lambda t: 0.5 * math.sin(t), 1)
    dev = float(np.max(np.abs(simulate(ident, u, cfg, x0).states - full.states)))
    wall = time.perf_counter() - start
    ok &= dev <= 1e-10 and wall < 10.0
    verdict(5, ok, f"{'; '.join(details)}; identity basis deviation {dev:.1e}; {wall:.2f} s")


def test_criterion_6_dirac_elimination(verdict):
    dsys = oscillator_dirac_es(1, 1, 0.5)
    cfg = SimConfig(t_end=10.0, dt=1e-2)
    u = InputSignal.from_callable(math.sin, 1)
    dae = simulate_dae_es(dsys, u, cfg, [1, 0])
    elim = simulate(eliminate_resistive_es(dsys), u, cfg, [1, 0])
    dev = float(np.max(np.abs(dae.states - elim.states)))
    power = verify_dirac(assemble_L(dsys, [0.3, -0.2]), n_samples=1000, seed=42)
    verdict(6, dev <= 10 * cfg.newton_tol and power["max_power_defect"] <= 1e-12,
            f"DAE vs eliminated deviation {dev:.2e}; power defect {power['max_power_defect']:.1e}")


def test_criterion_7_cross_formulation(verdict):
    T = 2 * math.pi
    u = InputSignal.from_callable(math.sin, 1)
    es = simulate(damped_oscillator_es(1, 1, 0.5), u, SimConfig(t_end=T, dt=1e-3), [1, 0])
    iso = simulate_iso(damped_oscillator_iso(1, 1, 0.5), u, SimConfig(t_end=T, dt=1e-3), [1, 0])
    ref = simulate(damped_oscillator_es(1, 1, 0.5), u, SimConfig(t_end=T, dt=1e-3, scheme="reference_rk4"), [1, 0])
    d_ei = float(np.max(np.abs(es.states - iso.states)))
    d_er = float(np.max(np.abs(es.states - ref.states)))
    d_ir = float(np.max(np.abs(iso.states - ref.states)))
    verdict(7, max(d_ei, d_er, d_ir) <= 1e-4,
            f"es-iso {d_ei:.1e}, es-reference {d_er:.1e}, iso-reference {d_ir:.1e}")


def test_criterion_8_congruence_psd(verdict):
    rng = np.random.default_rng(42)
    worst_es = worst_iso = math.inf
    for _ in range(100):
        es = eliminate_resistive_es(random_es_dirac(rng))
        iso = eliminate_resistive_iso(random_iso_dirac(rng))
        worst_es = min(worst_es, np.linalg.eigvalsh(assemble_phi(es, np.zeros(4)))[0])
        worst_iso = min(worst_iso, np.linalg.eigvalsh(assemble_W(iso, np.zeros(4)))[0])
    verdict(8, min(worst_es, worst_iso) >= -1e-10,
            f"min eig phi {worst_es:.2e}, min eig W {worst_iso:.2e} over 100 draws")


def test_criterion_9_determinism_round_trip(tmp_path, verdict):
    config = {
        "model": "duffing_es", "model_params": {"d": 0.3}, "x0": [1.0, 0.0],
        "input": {"kind": "sine", "amplitude": 0.5}, "sim": {"t_end": 10.0, "dt": 0.01},
        "outputs": {"trace_path": "trace.csv", "report_path": "report.json"},
    }
    traces = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        (d / "run.json").write_text(json.dumps(config))
        assert cli.run("simulate", d / "run.json", seed=42) == 0
        traces.append((d / "trace.csv").read_bytes())
    identical = traces[0] == traces[1]
    reported = json.loads((tmp_path / "a" / "report.json").read_text())["balance"]
    again = analyze(read_trace(tmp_path / "a" / "trace.csv"))
    gap = max(abs(again.max_abs_pbe_residual - reported["max_abs_pbe_residual"]),
              abs(again.min_di_margin - reported["min_di_margin"]),
              abs(again.cumulative_ebe_defect - reported["cumulative_ebe_defect"]))
    verdict(9, identical and gap <= 1e-14, f"bit-identical traces: {identical}; re-analysis gap {gap:.1e}")
