import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipmax.errors import ParameterError
from lipmax.extension import (GaussianProfile, _k1_fft, _k1_quad, build_bump, compute_k1, eta_extend,
                              extend_h12, pullback_check, verify_eta)
from lipmax.fem import FESpace
from lipmax.geometry import build_partition_of_unity, lipschitz_character, propose_chart_directions
from lipmax.meshes import unit_cube_mesh

# published value of the cutoff normalization
C_G_PUBLISHED = 0.133086
# value of the extension constant frozen from the two agreeing quadrature routes
K1_FROZEN = 3.651294348071162


def test_cutoff_normalization(bump):
    assert abs(bump.C_g - C_G_PUBLISHED) <= 1e-5


def test_cutoff_shape(bump):
    y = np.linspace(-4, 4, 801)
    f = bump.f(y)
    assert np.allclose(f[np.abs(y) <= 1], 1.0, atol=1e-12)
    assert np.all(f[np.abs(y) >= 3] == 0.0)
    assert np.allclose(f, bump.f(-y))
    assert np.all(np.diff(f[y >= 0]) <= 1e-15)


@given(st.floats(1.05, 2.95))
@settings(max_examples=30, deadline=None)
def test_cutoff_derivative(y):
    b = build_bump()
    h = 1e-5
    fd = (b.f(np.array(y + h)) - b.f(np.array(y - h))) / (2 * h)
    assert float(b.df(np.array(y))) == pytest.approx(float(fd), abs=1e-7)
    assert float(b.df(np.array(-y))) == pytest.approx(-float(fd), abs=1e-7)


def test_k1_routes_on_gaussian():
    # f = exp(-pi y^2) is its own transform: int (1 + t^2) exp(-2 pi t^2) dt in closed form
    exact = (1 + 1 / (4 * np.pi)) / np.sqrt(2)
    g = GaussianProfile()
    assert _k1_fft(g)[0] == pytest.approx(exact, rel=1e-10)
    assert _k1_quad(g) == pytest.approx(exact, rel=1e-10)


def test_k1_routes_agree(bump):
    info = compute_k1(bump)
    assert abs(info.k1_fft - info.k1_quad) <= 1e-3 * info.k1_quad
    assert info.k1 == pytest.approx(K1_FROZEN, rel=1e-9)
    assert info.meta["fft_tail_fraction"] < 1e-12


def test_eta_single_mode_ratio(bump, k1):
    # for one Fourier mode ||eta w||_H1^2 / ||w||_H1/2^2 = k1 / 2 exactly
    n, box = 16, 1.0
    x = np.arange(n) / n
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    w = np.exp(2j * np.pi * (2 * X1 - 3 * X2))
    ext, rep = verify_eta(w, bump, box, k1)
    assert rep.passed
    assert ext.h1_norm() / ext.h12_norm() == pytest.approx(np.sqrt(k1 / 2), rel=1e-10)


@given(st.integers(0, 2 ** 31))
@settings(max_examples=10, deadline=None)
def test_eta_bounds_random(seed):
    rng = np.random.default_rng(seed)
    n = 16
    c = np.zeros((n, n), complex)
    c[:4, :4] = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    w = np.fft.ifft2(c)
    ext, rep = verify_eta(w, build_bump(), 2.0)
    assert rep.passed
    # the trace of the lifting is the data at x3 = 0 at off-grid points as well
    xp = rng.uniform(0, 2, (5, 2))
    direct = ext(xp, np.zeros(5))
    modes = np.exp(2j * np.pi * (np.multiply.outer(xp[:, 0], ext.freqs[0].ravel())
                                 + np.multiply.outer(xp[:, 1], ext.freqs[1].ravel())))
    assert np.allclose(direct, modes @ ext.coeffs.ravel())


def test_eta_aliasing_warning(bump):
    w = np.cos(np.pi * np.arange(8))[:, None] * np.ones((8, 8))
    with pytest.warns(UserWarning, match="aliasing"):
        eta_extend(w, bump)


def test_eta_supported_on_band(bump):
    w = np.ones((8, 8))
    ext = eta_extend(w, bump)
    # the zero mode has lambda = 1: the lifting vanishes beyond x3 = 3
    assert np.abs(ext.on_grid(3.0)).max() == 0.0
    assert np.allclose(ext.on_grid(0.5), 1.0)


def test_boundary_extension_on_cube(cube2, bump, k1, rng):
    pu = build_partition_of_unity(cube2)
    dirs = propose_chart_directions(cube2)
    ch = lipschitz_character(cube2, dirs)
    for _ in range(3):
        K = rng.uniform(-2, 2, (3, 3))
        g = np.cos(cube2.vertices @ K.T).sum(axis=1)
        Eg, rep = extend_h12(g, cube2, pu, dirs, ch, bump, k1, grid_n=16)
        assert rep.passed, rep.failures
        assert rep.by_id("extension_trace_restoration")[0].lhs < 1e-6
        bv = cube2.boundary_vertices
        assert np.allclose(Eg.coeffs[bv], g[bv], atol=1e-9)


def test_extension_too_few_modes(bump, k1):
    # 16 nodes per face but only 9 Fourier modes
    mesh = unit_cube_mesh(3)
    pu = build_partition_of_unity(mesh)
    with pytest.raises(ParameterError, match="eta.grid_n"):
        extend_h12(np.ones(len(mesh.vertices)), mesh, pu, bump=bump, k1=k1, grid_n=2)


@pytest.mark.parametrize("A", [np.eye(3), np.diag([1.0, 1.5, 2.0]),
                               np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])])
def test_pullback_expanding_maps(cube2, rng, A):
    u = FESpace(cube2, "P1").random(rng)
    rep = pullback_check(u, A, s_values=(0.0, 0.5, 1.0))
    assert rep.passed


def test_pullback_identity_is_equality(cube2, rng):
    u = FESpace(cube2, "P1").random(rng)
    for c in pullback_check(u, np.eye(3)).checks:
        assert c.lhs == pytest.approx(c.rhs, rel=1e-10)


def test_pullback_contraction_exceeds_stated_constant(cube2):
    # For phi = x / 2 the pulled-back L2 norm grows by det(A)^(-1/2) = 2 sqrt 2 > M = 2:
    # the stated constant max(||A||, ||A^-1||) is not sufficient in L2.
    u = FESpace(cube2, "P1").interpolate(lambda x: np.ones(len(x)))
    c = pullback_check(u, 0.5 * np.eye(3), s_values=(0.0,)).checks[0]
    assert c.lhs / c.rhs == pytest.approx(np.sqrt(2.0), rel=1e-10)
    assert not c.passed


def test_pullback_singular_map(cube1, rng):
    with pytest.raises(ParameterError):
        pullback_check(FESpace(cube1, "P1").random(rng), np.zeros((3, 3)))
