import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from esph.errors import ConfigurationError
from esph.models import REGISTRY, damped_oscillator_es, damped_oscillator_iso
from esph.structure import (EnergyFunctional, EsPhSystem, IsoPhSystem, OperatorField, assemble_lambda,
                            assemble_phi, assemble_W, assemble_Z, check_gradient, esph_output,
                            esph_residual, isoph_rhs, random_states, validate_structure)

from conftest import make_es


def test_lambda_oscillator():
    lam = assemble_lambda(damped_oscillator_es(1, 1, 0.5), [0.3, -1.2])
    np.testing.assert_array_equal(lam, [[0, -1, 1], [1, 0, 0], [-1, 0, 0]])
    assert np.max(np.abs(lam + lam.T)) == 0


def test_lambda_zero_fields():
    np.testing.assert_array_equal(assemble_lambda(make_es(1, 1), [0.7]), np.zeros((2, 2)))


def test_lambda_single_block():
    sys = make_es(2, 1, gamma=[[1], [0]])
    np.testing.assert_array_equal(assemble_lambda(sys, [0, 0]), [[0, 0, 1], [0, 0, 0], [-1, 0, 0]])


def test_phi_examples():
    np.testing.assert_array_equal(assemble_phi(damped_oscillator_es(1, 1, 0.5), [1, 2]), np.diag([0.5, 0, 0]))
    np.testing.assert_array_equal(assemble_phi(make_es(2, 1), [1, 2]), np.zeros((3, 3)))
    np.testing.assert_array_equal(assemble_phi(make_es(2, 1, rho=np.eye(2), sigma=[[1]]), [1, 2]), np.eye(3))


def test_wrong_state_length():
    with pytest.raises(ConfigurationError):
        assemble_lambda(damped_oscillator_es(), [1.0, 2.0, 3.0])


def test_declared_shape_mismatch():
    with pytest.raises(ConfigurationError):
        make_es(2, 1, gamma=np.zeros((3, 1)))


def test_field_returning_wrong_shape():
    bad = OperatorField(2, 2, lambda x: np.zeros((3, 3)), symmetry="skew")
    sys = EsPhSystem(2, 1, bad, OperatorField.zeros(2, 2), OperatorField.zeros(2, 1), OperatorField.zeros(2, 1),
                     OperatorField.zeros(1, 1), OperatorField.zeros(1, 1), damped_oscillator_es().hamiltonian)
    with pytest.raises(ConfigurationError):
        assemble_lambda(sys, [0.0, 0.0])


def test_residual_examples():
    osc = damped_oscillator_es(1, 1, 0.5)
    np.testing.assert_array_equal(esph_residual(osc, [0, 0], [0, 0], [0]), [0, 0])
    # (-omega + rho) = [[0.5, 1], [-1, 0]], grad H = (1, 0): row 1 = 0.5*0 + 1*(-1) + 1 = 0
    np.testing.assert_array_equal(esph_residual(osc, [1, 0], [0, -1], [0]), [0, 0])
    np.testing.assert_array_equal(esph_residual(damped_oscillator_es(1, 1, 0), [1, 0], [0, 0], [0]), [1, 0])


def test_output_examples():
    osc = damped_oscillator_es()
    assert esph_output(osc, [0.2, 0.1], [0.3, -0.7], [5.0])[0] == 0.3
    assert esph_output(make_es(2, 1), [1, 1], [1, 1], [1]) == [0]
    assert esph_output(make_es(2, 1, sigma=[[2.0]]), [0, 0], [4, 4], [1.5])[0] == 3.0


def test_isoph_rhs_examples():
    iso = damped_oscillator_iso(1, 1, 0)
    xdot, y = isoph_rhs(iso, [1, 0], [0])
    np.testing.assert_array_equal(xdot, [0, -1])
    np.testing.assert_array_equal(y, [0])
    xdot, y = isoph_rhs(iso, [0, 0], [0])
    np.testing.assert_array_equal(xdot, [0, 0])
    np.testing.assert_array_equal(y, [0])


def test_isoph_matched_ports_cancel_input():
    base = damped_oscillator_iso(1, 1, 0.3)
    G = OperatorField.const([[0.0], [1.0]])
    iso = IsoPhSystem(2, 1, base.J, base.R, G, G, base.S, base.Nf, base.hamiltonian)
    x = np.array([0.4, -0.2])
    np.testing.assert_array_equal(isoph_rhs(iso, x, [0.0])[0], isoph_rhs(iso, x, [7.0])[0])


def test_validate_structure_examples():
    rep = validate_structure(damped_oscillator_es(1, 1, 0.5), [(0, 0), (1, 2), (-3, 0.5)])
    assert rep.passed

    rep = validate_structure(make_es(2, 1, rho=np.diag([-1.0, 0.0])), [(0, 0)])
    assert not rep.passed
    assert rep.min_eigenvalue_phi == pytest.approx(-1.0)

    rep = validate_structure(make_es(2, 1, omega=np.eye(2)), [(0, 0)])
    assert not rep.passed
    assert rep.max_skew_defect == 2.0


def test_validate_iso():
    assert validate_structure(damped_oscillator_iso()).passed
    iso = damped_oscillator_iso()
    bad = IsoPhSystem(2, 1, iso.J, OperatorField.const(-np.eye(2), "symmetric_psd"), iso.G, iso.P, iso.S,
                      iso.Nf, iso.hamiltonian)
    assert not validate_structure(bad).passed


def test_validate_needs_samples():
    with pytest.raises(ConfigurationError):
        validate_structure(damped_oscillator_es(), [])


def test_fd_gradient_fallback():
    H = EnergyFunctional(2, lambda x: x[0] ** 3 + x[0] * x[1])
    np.testing.assert_allclose(H.grad(np.array([1.0, 2.0])), [5.0, 1.0], rtol=1e-8)


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registry_structure_and_gradients(name):
    sys = REGISTRY[name].build()
    N = sys.state_dim
    for x in random_states(N, 100, seed=7):
        if isinstance(sys, IsoPhSystem):
            lam, phi = assemble_Z(sys, x), assemble_W(sys, x)
        else:
            lam, phi = assemble_lambda(sys, x), assemble_phi(sys, x)
        assert np.max(np.abs(lam + lam.T)) <= 1e-12
        assert np.max(np.abs(phi - phi.T)) <= 1e-12
        assert np.linalg.eigvalsh(phi)[0] >= -1e-10
        assert check_gradient(sys.hamiltonian, x) <= 1e-5


@settings(max_examples=50, deadline=None)
@given(
    x=arrays(float, 2, elements=st.floats(-2, 2)),
    v=arrays(float, 2, elements=st.floats(-5, 5)),
    w=arrays(float, 2, elements=st.floats(-5, 5)),
    p=arrays(float, 1, elements=st.floats(-5, 5)),
    q=arrays(float, 1, elements=st.floats(-5, 5)),
    a=st.floats(-3, 3),
    b=st.floats(-3, 3),
)
def test_residual_affine_in_rates(x, v, w, p, q, a, b):
    sys = REGISTRY["duffing_es"].build({"d": 0.7})
    lhs = esph_residual(sys, x, a * v + b * w, a * p + b * q)
    rhs = (a * esph_residual(sys, x, v, p) + b * esph_residual(sys, x, w, q)
           - (a + b - 1) * sys.hamiltonian.grad(x))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
