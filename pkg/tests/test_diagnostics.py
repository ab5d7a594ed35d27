import dataclasses
import math

import numpy as np
import pytest

from esph.diagnostics import analyze, dissipation_inequality, energy_balance, pbe_residuals, power_balance
from esph.errors import MalformedTrajectoryError
from esph.integrators import InputSignal, SimConfig, Trajectory, simulate
from esph.models import damped_oscillator_es, duffing_es


def _traj(times, energies, supply, diss, scheme="discrete_gradient"):
    n = len(times) - 1
    return Trajectory(times=np.asarray(times, float), states=np.zeros((len(times), 1)),
                      outputs=np.zeros((n, 1)), energies=np.asarray(energies, float),
                      supply_rates=np.asarray(supply, float), dissipation_rates=np.asarray(diss, float),
                      pbe_residuals=np.zeros(n), inputs=np.zeros((n, 1)), scheme=scheme)


def test_single_state_trajectory():
    rep = analyze(_traj([0.0], [2.0], [], []))
    assert rep.max_abs_pbe_residual == 0.0 and rep.passed_pbe and rep.passed_di
    assert rep.cumulative_ebe_defect == 0.0


def test_planted_energy_gain_fails_dissipation():
    # energy rises with no supply: both checks must flag it
    rep = analyze(_traj([0.0, 0.1, 0.2], [1.0, 1.0, 1.5], [0.0, 0.0], [0.0, 0.0]))
    assert rep.passed_pbe is False and rep.passed_di is False
    assert rep.min_di_margin == pytest.approx(-0.5)
    assert rep.max_abs_pbe_residual == pytest.approx(0.5)


def test_scaled_tolerance():
    # residual 1e-7 on H = 1e3 scales to 1e-10
    rep = power_balance(_traj([0.0, 1.0], [1e3, 1e3 + 1e-7], [0.0], [0.0]))
    assert rep.passed_pbe
    assert rep.max_scaled_pbe_residual == pytest.approx(1e-10, rel=1e-3)


def test_malformed_lengths():
    good = _traj([0.0, 0.1, 0.2], [1.0, 0.9, 0.8], [0.0, 0.0], [1.0, 1.0])
    for bad in (dataclasses.replace(good, energies=good.energies[:2]),
                dataclasses.replace(good, supply_rates=good.supply_rates[:1]),
                dataclasses.replace(good, dissipation_rates=np.zeros(3)),
                dataclasses.replace(good, times=np.array([]), energies=np.array([]))):
        with pytest.raises(MalformedTrajectoryError):
            analyze(bad)


def test_simulation_balances_and_telescopes():
    sys = duffing_es(1, 1, 0.4)
    tr = simulate(sys, InputSignal.from_callable(lambda t: math.sin(2 * t), 1), SimConfig(t_end=5), [1, -0.5])
    rep = analyze(tr)
    assert rep.passed_pbe and rep.passed_di and not rep.approximate
    res = pbe_residuals(tr)
    np.testing.assert_allclose(res, tr.pbe_residuals, atol=1e-15)
    # the cumulative defect is the sum of per-step residuals
    assert energy_balance(tr) == pytest.approx(abs(res.sum()), abs=1e-14)


def test_approximate_schemes_have_no_verdict():
    tr = simulate(duffing_es(1, 1, 0.0), InputSignal.zero(1), SimConfig(t_end=1, scheme="implicit_midpoint"), [1.5, 0])
    rep = analyze(tr)
    assert rep.approximate and rep.passed_pbe is None and rep.passed_di is None
    assert rep.max_abs_pbe_residual > 0


def test_report_dict_omits_per_step_by_default():
    tr = simulate(damped_oscillator_es(), InputSignal.zero(1), SimConfig(t_end=0.5), [1, 0])
    rep = analyze(tr)
    assert "per_step_pbe_residuals" not in rep.to_dict()
    assert len(rep.to_dict(per_step=True)["di_margins"]) == tr.n_steps


def test_dissipation_margin_equals_dissipated_energy():
    tr = simulate(damped_oscillator_es(1, 1, 0.5), InputSignal.zero(1), SimConfig(t_end=3), [1, 0])
    margins = np.asarray(dissipation_inequality(tr).di_margins)
    np.testing.assert_allclose(margins, np.diff(tr.times) * tr.dissipation_rates, atol=1e-13)
