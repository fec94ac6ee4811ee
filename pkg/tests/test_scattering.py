import warnings

import numpy as np
import pytest

from lipmax.calderon import MultipoleCoefficients, apply_calderon
from lipmax.errors import ParameterError, SingularityError
from lipmax.geometry import star_character
from lipmax.maxwell import MaterialTensors, assemble, solve_interior
from lipmax.meshes import ball_mesh, shell_mesh
from lipmax.quadrature import tri_rule
from lipmax.scattering import (PanelQuadrature, PlaneWave, evaluate_scattered, exterior_residual, kernels,
                               scattered_bounds)


def test_plane_wave_validation():
    with pytest.raises(ParameterError):
        PlaneWave((0, 0, 2), (1, 0, 0))
    with pytest.raises(ParameterError):
        PlaneWave((0, 0, 1), (0, 0, 1))


def test_plane_wave_solves_maxwell(rng):
    pw = PlaneWave((0.6, 0.0, 0.8), (0.8, 1j, -0.6), 1.7)
    x = rng.standard_normal((5, 3))
    res = exterior_residual(lambda y: (pw.E(y), pw.H(y)), x, pw.k0)
    for key in ("curl_E_rel", "curl_H_rel", "helmholtz_rel"):
        assert res[key].max() < 1e-5


def test_kernel_derivatives(rng):
    k0 = 1.3
    y = np.zeros(3)
    x = rng.standard_normal((4, 3)) + 2.0
    K = kernels(x, y, k0)
    h = 1e-5
    grad = np.stack([(kernels(x + h * e, y, k0)["g"] - kernels(x - h * e, y, k0)["g"]) / (2 * h)
                     for e in np.eye(3)], axis=-1)
    assert np.allclose(K["grad_g"], grad, atol=1e-8)
    a = np.array([1.0, -2.0, 0.5j])
    assert np.allclose(K["F2"] @ a, np.cross(K["grad_g"], a))
    # Helmholtz: laplace g + k0^2 g = 0 away from the source
    lap = sum((kernels(x + h * e, y, k0)["g"] - 2 * K["g"] + kernels(x - h * e, y, k0)["g"]) / h ** 2
              for e in np.eye(3))
    assert np.allclose(lap + k0 ** 2 * K["g"], 0, atol=1e-4)
    # F1 is trace-free up to the k0^2 part: tr(F1) = (i/k0)(laplace g + 3 k0^2 g) = 2 i k0 g
    assert np.allclose(np.trace(K["F1"], axis1=-2, axis2=-1), 2j * k0 * K["g"], atol=1e-12)


def test_kernel_singularity():
    with pytest.raises(SingularityError):
        kernels(np.zeros(3), np.zeros(3), 1.0)
    assert kernels(np.ones(3), np.zeros(3), 0.0)["F1"] is None


def test_panel_quadrature_area():
    q = PanelQuadrature.sphere(3, 2.0, order=3)
    assert q.w.sum() == pytest.approx(16 * np.pi, rel=1e-5)
    assert len(q.w) == 1280 * len(tri_rule(3)[1])
    assert np.allclose(np.linalg.norm(q.x, axis=1), 2.0)


@pytest.mark.parametrize("L", [1, 3])
def test_representation_reproduces_multipole(L, rng):
    k0 = 1.0
    m = MultipoleCoefficients.random(L, rng, 1.0, k0)
    d = rng.standard_normal((8, 3))
    x = 2.0 * d / np.linalg.norm(d, axis=1, keepdims=True)
    quad = PanelQuadrature.sphere(3, 1.0, order=3)
    Es = evaluate_scattered(x, m, quad, k0)
    exact = m.field(x)[0]
    assert np.linalg.norm(Es - exact) / np.linalg.norm(exact) <= 1e-3


def test_representation_is_linear(rng):
    quad = PanelQuadrature.sphere(2, 1.0, order=3)
    a = MultipoleCoefficients.random(2, rng)
    b = MultipoleCoefficients.random(2, rng)
    x = np.array([[0.0, 0.0, 3.0], [2.5, 0.5, 0.0]])
    lhs = evaluate_scattered(x, a + 2j * b, quad, 1.0)
    rhs = evaluate_scattered(x, a, quad, 1.0) + 2j * evaluate_scattered(x, b, quad, 1.0)
    assert np.allclose(lhs, rhs)
    pair = (a.evaluate(quad.x), apply_calderon(a).evaluate(quad.x))
    assert np.allclose(evaluate_scattered(x, pair, quad, 1.0), evaluate_scattered(x, a, quad, 1.0))


def test_near_boundary_warning(rng):
    quad = PanelQuadrature.sphere(1, 1.0)
    m = MultipoleCoefficients.random(1, rng)
    with pytest.warns(UserWarning, match="near-boundary"):
        evaluate_scattered(np.array([[0.0, 0.0, 1.05]]), m, quad, 1.0)


def test_outgoing_field_residuals(rng):
    m = MultipoleCoefficients.random(3, rng, 1.0, 1.0)
    x = 2.0 + rng.standard_normal((6, 3)) * 0.2
    res = exterior_residual(m.field, x, 1.0)
    for key in ("curl_E_rel", "curl_H_rel", "helmholtz_rel"):
        assert res[key].max() <= 1e-4


def test_scattered_bounds_scale_with_incidence(k1):
    ball = ball_mesh(4)
    mat = MaterialTensors(1 + 1j, 1 + 1j, 1.0)
    ch = star_character(ball)
    obs = shell_mesh(2.0, 3.0, level=0, layers=1)
    reps = []
    for a in (1.0, 3.0):
        inc = PlaneWave((0, 0, 1), (0, 1, 0), 1.0).scaled(a)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = solve_interior(assemble(mat, ball, 3, incident=inc))
        reps.append(scattered_bounds(sol, inc, ch, k1, 2.0, obs))
    for c1, c3 in zip(reps[0].checks, reps[1].checks):
        assert c3.lhs == pytest.approx(3 * c1.lhs, rel=1e-8)
        assert c3.rhs == pytest.approx(3 * c1.rhs, rel=1e-8)
        assert c1.passed and c3.passed
    consts = reps[0].checks[0].constants
    assert consts["C2"] == pytest.approx(2.0 * consts["C1"])
    assert consts["C3"] == pytest.approx(consts["C1"] * consts["C1_tilde"])
