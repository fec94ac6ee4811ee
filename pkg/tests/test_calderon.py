import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipmax.calderon import (MultipoleCoefficients, apply_calderon, block_matrix, calderon_blocks,
                             calderon_norm_lower_bound, pairing, positivity, project_tangential,
                             verify_calderon_properties)
from lipmax.errors import ParameterError
from lipmax.special import sphere_quadrature


def _fd_curl(f, x, h=1e-5):
    J = np.stack([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    return np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=-1)


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
def test_blocks_square_to_minus_identity(x):
    for l in range(1, 11):
        B = block_matrix(l, x, 1.0)
        assert np.linalg.norm(B @ B + np.eye(2), 2) <= 1e-10


@given(st.integers(1, 8), st.floats(0.1, 10.0), st.integers(0, 2 ** 31))
@settings(max_examples=30, deadline=None)
def test_involution_and_positivity(L, x, seed):
    m = MultipoleCoefficients.random(L, np.random.default_rng(seed), 1.0, x)
    cm = apply_calderon(m)
    assert (apply_calderon(cm) + m).l2_norm() <= 1e-10 * m.l2_norm()
    assert positivity(m) >= -1e-12 * m.l2_norm() ** 2


def test_calderon_against_field_traces(rng):
    # C maps nu x E to nu x H for the outgoing field; H by finite differences of E
    L, R, k0 = 3, 1.0, 1.3
    m = MultipoleCoefficients.random(L, rng, R, k0)
    d, w = sphere_quadrature(L + 6)
    E, H = m.field(R * d)
    H_fd = _fd_curl(lambda y: m.field(y)[0], R * d) / (1j * k0)
    assert np.allclose(H, H_fd, atol=1e-6 * np.abs(H).max())
    mE = project_tangential(np.cross(d, E), d, w, L, R, k0)
    mH = project_tangential(np.cross(d, H_fd), d, w, L, R, k0)
    assert np.allclose(mE.vector(), m.vector(), atol=1e-10)
    assert np.allclose(apply_calderon(m).vector(), mH.vector(), atol=1e-6 * np.abs(m.vector()).max())


def test_pairing_closed_form(rng):
    L, R = 3, 1.5
    u = MultipoleCoefficients.random(L, rng, R)
    v = MultipoleCoefficients.random(L, rng, R)
    d, w = sphere_quadrature(L + 4)
    quad = R ** 2 * np.sum(w * np.einsum("nd,nd->n", u.evaluate(d), np.cross(d, v.evaluate(d).conj())))
    assert pairing(u, v) == pytest.approx(quad, rel=1e-12)


def test_surrogate_norm_bound_by_svd():
    # block singular values in the weighted metric, computed by brute force
    L, x = 10, 1.0
    c1, c2 = calderon_blocks(L, x, 1.0)
    best = 0.0
    for l in range(1, L + 1):
        lam = 1 + l * (l + 1)
        D = np.diag([lam ** 0.25, lam ** -0.25])
        B = np.array([[0, c2[l - 1]], [c1[l - 1], 0]])
        best = max(best, np.linalg.svd(D @ B @ np.linalg.inv(D), compute_uv=False).max())
    info = calderon_norm_lower_bound(L, x, 1.0)
    assert info["C_est"] == pytest.approx(best, rel=1e-12)
    assert info["C_est"] == pytest.approx(np.sqrt(6.0), rel=1e-12)
    assert info["c_est"] * info["C_est"] == pytest.approx(1.0)


def test_surrogate_norm_sandwich(rng):
    rep = verify_calderon_properties(6, 1.0, 1.0, seed=3, n_samples=10, n_fields=2)
    assert rep.passed, rep.failures


def test_traces_of_amplitudes_round_trip(rng):
    L = 4
    A = rng.standard_normal(L * (L + 2)) + 0j
    B = rng.standard_normal(L * (L + 2)) + 0j
    m = MultipoleCoefficients.from_amplitudes(L, A, B, 1.2, 0.7)
    A2, B2 = m.amplitudes()
    assert np.allclose(A, A2) and np.allclose(B, B2)


def test_coefficient_validation():
    with pytest.raises(ParameterError):
        MultipoleCoefficients(2, np.zeros(3), np.zeros(8))
    with pytest.raises(ParameterError):
        MultipoleCoefficients(1, [np.nan, 0, 0], np.zeros(3))
    with pytest.raises(ParameterError):
        calderon_blocks(3, -1.0, 1.0)


def test_arithmetic(rng):
    a = MultipoleCoefficients.random(2, rng)
    b = MultipoleCoefficients.random(2, rng)
    assert np.allclose((a + b - b).vector(), a.vector())
    assert np.allclose((2 * a).vector(), 2 * a.vector())
    assert MultipoleCoefficients.zeros(2).l2_norm() == 0
