"""``esph`` command line: simulate, reduce, verify and compare runs from a JSON config.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 solver
failure, 4 I/O error, 5 reduced system failed structure validation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import diagnostics, dirac, io, mor
from .errors import ConfigurationError, SolverError
from .integrators import InputSignal, SimConfig, simulate, simulate_iso
from .models import ModelSpec, get_model
from .structure import IsoPhSystem, random_states, validate_structure

log = logging.getLogger("esph")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO, EXIT_STRUCTURE = 0, 1, 2, 3, 4, 5
DEFAULT_SEED = 42

_SIM_KEYS = {"t0", "t_end", "dt", "scheme", "newton_tol", "newton_max_iter", "jacobian", "fd_step"}


@dataclass
class RunConfig:
    model: str
    model_params: dict
    x0: list
    input: dict
    sim: SimConfig
    outputs: dict
    mor: dict | None = None
    compare: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    base_dir: Path = Path(".")

    def path(self, key: str, default: str | None = None) -> Path | None:
        p = self.outputs.get(key, default)
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path, seed: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    for key in ("model", "x0", "sim", "outputs"):
        if key not in raw:
            raise ConfigurationError(f"{path}: missing required key {key!r}")
    sim = raw["sim"]
    if not isinstance(sim, dict) or set(sim) - _SIM_KEYS:
        raise ConfigurationError(f"sim must be an object with keys from {sorted(_SIM_KEYS)}")
    if "trace_path" not in raw["outputs"] or "report_path" not in raw["outputs"]:
        raise ConfigurationError("outputs needs trace_path and report_path")
    params = raw.get("model_params", {})
    if not isinstance(params, dict) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise ConfigurationError("model_params must map names to numbers")
    try:
        x0 = [float(v) for v in raw["x0"]]
        sim_cfg = SimConfig(**sim)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from None
    return RunConfig(
        model=str(raw["model"]),
        model_params=params,
        x0=x0,
        input=raw.get("input", {"kind": "zero"}),
        sim=sim_cfg,
        outputs=raw["outputs"],
        mor=raw.get("mor"),
        compare=raw.get("compare", {}),
        verify=raw.get("verify", {}),
        seed=int(seed if seed is not None else raw.get("seed", DEFAULT_SEED)),
        base_dir=path.parent,
    )


def build_input(spec: dict, ny: int, base_dir: Path = Path(".")) -> InputSignal:
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return InputSignal.zero(ny)
    if kind == "constant":
        value = np.broadcast_to(np.asarray(spec.get("value", spec.get("amplitude", 0.0)), float), (ny,))
        return InputSignal.constant(np.array(value))
    if kind == "sine":
        amp = np.broadcast_to(np.asarray(spec.get("amplitude", 1.0), float), (ny,)).copy()
        freq = float(spec.get("frequency", 1.0))
        phase = float(spec.get("phase", 0.0))
        return InputSignal.from_callable(lambda t: amp * math.sin(freq * t + phase), ny)
    if kind == "sampled":
        fname = spec.get("file")
        if not fname:
            raise ConfigurationError("sampled input needs a 'file'")
        fpath = Path(fname) if Path(fname).is_absolute() else base_dir / fname
        data = np.loadtxt(fpath, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != ny + 1:
            raise ConfigurationError(f"{fpath}: expected columns t,u_0..u_{ny - 1}")
        return InputSignal.sampled(data[:, 0], data[:, 1:])
    raise ConfigurationError(f"unknown input kind {kind!r}; use zero, constant, sine or sampled")


def _setup(cfg: RunConfig, registry):
    spec = get_model(cfg.model, registry)
    params = spec.resolve(cfg.model_params)
    try:
        system = spec.builder(**params)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    if len(cfg.x0) != system.state_dim:
        raise ConfigurationError(f"x0 has {len(cfg.x0)} entries, {cfg.model} needs {system.state_dim}")
    u = build_input(cfg.input, system.io_dim, cfg.base_dir)
    return spec, params, system, u


def _run(system, u, sim, x0):
    if isinstance(system, IsoPhSystem):
        return simulate_iso(system, u, sim, x0)
    return simulate(system, u, sim, x0)


def _metadata(cfg: RunConfig, params, wall: float) -> dict:
    return {
        "model": cfg.model,
        "params": params,
        "scheme": cfg.sim.scheme,
        "dt": cfg.sim.dt,
        "t0": cfg.sim.t0,
        "t_end": cfg.sim.t_end,
        "seed": cfg.seed,
        "wall_time_s": wall,
    }


def _balance_ok(report: diagnostics.BalanceReport) -> bool:
    if report.approximate:
        return True
    return bool(report.passed_pbe and report.passed_di)


def cmd_simulate(cfg: RunConfig, registry=None) -> int:
    spec, params, system, u = _setup(cfg, registry)
    start = time.perf_counter()
    traj = _run(system, u, cfg.sim, cfg.x0)
    wall = time.perf_counter() - start
    balance = diagnostics.analyze(traj)
    structure = validate_structure(system, seed=cfg.seed)
    io.write_trace(cfg.path("trace_path"), traj)
    report = {
        "metadata": _metadata(cfg, params, wall),
        "n_steps": traj.n_steps,
        "balance": balance.to_dict(),
        "structure": structure.to_dict(),
    }
    io.write_report(cfg.path("report_path"), report)
    log.info("simulate %s: %d steps, max |pbe| %.3e, min DI margin %.3e",
             cfg.model, traj.n_steps, balance.max_abs_pbe_residual, balance.min_di_margin)
    return EXIT_OK if _balance_ok(balance) else EXIT_FAIL


def _mor_target(mor_cfg: dict, N: int) -> dict:
    target = mor_cfg.get("target")
    if not isinstance(target, dict) or len(target) != 1 or not set(target) <= {"n", "energy"}:
        raise ConfigurationError("mor.target must be {'n': int} or {'energy': float}")
    if target.get("n") == "full":
        return {"n": N}
    return dict(target)


def cmd_reduce(cfg: RunConfig, registry=None) -> int:
    spec, params, system, u = _setup(cfg, registry)
    if isinstance(system, IsoPhSystem):
        raise ConfigurationError("reduction needs an es-pH model")
    if not cfg.mor:
        raise ConfigurationError("reduce needs a 'mor' section")
    stride = int(cfg.mor.get("snapshot_stride", 1))
    if stride < 1:
        raise ConfigurationError("mor.snapshot_stride must be >= 1")
    target = _mor_target(cfg.mor, system.state_dim)
    if cfg.sim.t_end == cfg.sim.t0:
        raise ConfigurationError("empty snapshot window (t_end == t0)")

    start = time.perf_counter()
    full = _run(system, u, cfg.sim, cfg.x0)
    basis = mor.pod_basis(full.states[::stride], **target)
    reduced_sys = mor.reduce(system, basis)
    reduced = simulate(reduced_sys, u, cfg.sim, basis.project(np.asarray(cfg.x0)))
    wall = time.perf_counter() - start

    trace = cfg.path("trace_path")
    io.write_trace(trace, full)
    io.write_trace(trace.with_name(trace.stem + ".reduced" + trace.suffix), reduced)
    mor.save_basis(cfg.path("basis_path", str(trace.with_suffix(".basis"))), basis.V)

    structure_r = validate_structure(reduced_sys, seed=cfg.seed)
    balance_r = diagnostics.analyze(reduced)
    report = {
        "metadata": _metadata(cfg, params, wall),
        "basis": {
            "full_dim": basis.full_dim,
            "reduced_dim": basis.reduced_dim,
            "energy_captured": basis.energy_captured,
            "tail_energy": mor.tail_energy(basis),
            "n_snapshots": len(full.states[::stride]),
        },
        "full": {"balance": diagnostics.analyze(full).to_dict()},
        "reduced": {"balance": balance_r.to_dict(), "structure": structure_r.to_dict()},
        "reduction_error": mor.reduction_error(full, reduced, basis),
    }
    io.write_report(cfg.path("report_path"), report)
    log.info("reduce %s: N=%d -> n=%d", cfg.model, basis.full_dim, basis.reduced_dim)
    if not structure_r.passed:
        return EXIT_STRUCTURE
    return EXIT_OK if _balance_ok(balance_r) else EXIT_FAIL


def cmd_verify(cfg: RunConfig, registry=None) -> int:
    spec, params, system, _ = _setup(cfg, registry)
    n_flows = int(cfg.verify.get("n_samples", 1000))
    n_states = int(cfg.verify.get("n_states", 10))
    structure = validate_structure(system, seed=cfg.seed)
    cert = {"metadata": _metadata(cfg, params, 0.0), "structure": structure.to_dict()}
    passed = structure.passed
    if spec.dirac is not None:
        dsys = spec.dirac(params)
        is_iso = isinstance(dsys, dirac.IsoDiracSystem)
        assemble = dirac.assemble_K if is_iso else dirac.assemble_L
        results = [dirac.verify_dirac(assemble(dsys, x), n_flows, cfg.seed)
                   for x in random_states(dsys.state_dim, n_states, cfg.seed)]
        worst = max(results, key=lambda r: (r["max_power_defect"], r["skew_defect"]))
        worst = dict(worst, passed=all(r["passed"] for r in results))
        passed = passed and worst["passed"]
        eliminated = dirac.eliminate_resistive_iso(dsys) if is_iso else dirac.eliminate_resistive_es(dsys)
        elim_structure = validate_structure(eliminated, seed=cfg.seed)
        passed = passed and elim_structure.passed
        cert["dirac"] = dict(worst, form="K" if is_iso else "L", n_states=n_states, n_flows=n_flows)
        cert["eliminated_structure"] = elim_structure.to_dict()
    else:
        cert["dirac"] = None
    cert["passed"] = bool(passed)
    io.write_report(cfg.path("report_path"), cert)
    return EXIT_OK if passed else EXIT_FAIL


def _compare_variants(cfg: RunConfig, spec: ModelSpec, params, registry):
    if spec.twin is None:
        raise ConfigurationError(f"{spec.name} has no iso/es twin to compare against")
    twin = get_model(spec.twin, registry)
    es_spec, iso_spec = (spec, twin) if spec.formulation == "es" else (twin, spec)
    es_sys = es_spec.builder(**params)
    iso_sys = iso_spec.builder(**params)
    if es_spec.dirac is None:
        raise ConfigurationError(f"{es_spec.name} has no Dirac form")
    return es_sys, iso_sys, es_spec.dirac(params)


def cmd_compare(cfg: RunConfig, registry=None) -> int:
    spec, params, system, u = _setup(cfg, registry)
    es_sys, iso_sys, dae_sys = _compare_variants(cfg, spec, params, registry)
    threshold = float(cfg.compare.get("threshold", 1e-3))
    x0 = np.asarray(cfg.x0)
    dg = SimConfig(**{**cfg.sim.__dict__, "scheme": "discrete_gradient"})
    ref = SimConfig(**{**cfg.sim.__dict__, "scheme": "reference_rk4"})
    start = time.perf_counter()
    runs = {
        "es": simulate(es_sys, u, cfg.sim, x0),
        "iso": simulate_iso(iso_sys, u, cfg.sim, x0),
        "dae": dirac.simulate_dae_es(dae_sys, u, dg, x0),
    }
    if cfg.compare.get("reference", True):
        runs["reference"] = simulate(es_sys, u, ref, x0)
    wall = time.perf_counter() - start

    trace = cfg.path("trace_path")
    for name, traj in runs.items():
        io.write_trace(trace.with_name(f"{trace.stem}.{name}{trace.suffix}"), traj)
    names = list(runs)
    deviations = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            dev = np.max(np.abs(runs[a].states - runs[b].states))
            deviations[f"{a}-{b}"] = float(dev)
    passed = all(v <= threshold for v in deviations.values())
    io.write_report(cfg.path("report_path"), {
        "metadata": _metadata(cfg, params, wall),
        "threshold": threshold,
        "max_state_deviation": deviations,
        "passed": passed,
    })
    return EXIT_OK if passed else EXIT_FAIL


COMMANDS = {
    "simulate": cmd_simulate,
    "reduce": cmd_reduce,
    "verify": cmd_verify,
    "compare": cmd_compare,
}


def run(command: str, config_path, seed: int | None = None,
        registry: Mapping[str, ModelSpec] | None = None) -> int:
    """Run one command and map failures onto exit codes."""
    try:
        cfg = load_config(config_path, seed)
        return COMMANDS[command](cfg, registry)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="esph", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--seed", type=int, default=None, help="seed for random state/flow sampling")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    args = parser.parse_args(argv)

    level = os.environ.get("ESPH_LOG", "ERROR" if args.quiet else "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")
    code = run(args.command, args.config, args.seed)
    if not args.quiet:
        print(f"esph {args.command}: exit {code}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
