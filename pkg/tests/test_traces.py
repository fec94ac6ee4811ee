import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lipmax.errors import CapabilityError, ConfigurationError, ScopeError
from lipmax.fem import DiscreteField, FESpace
from lipmax.geometry import graph_character, lipschitz_character, star_character
from lipmax.meshes import slab_mesh, unit_cube_mesh
from lipmax.surface import BoundaryField, Surface
from lipmax.traces import (TraceDomain, boundary_trace_suite, boundary_traces, flatten_maps, green_residual,
                           pi_field, random_smooth_p2, surface_diff, surface_div, traces_of_values,
                           verify_pi_bounds, verify_tangential_trace, verify_trace_inequality)

vec = arrays(float, (5, 3), elements=st.floats(-10, 10))


@given(vec, vec)
@settings(max_examples=50)
def test_trace_identities(u, n):
    nrm = np.linalg.norm(n, axis=1, keepdims=True)
    if nrm.min() < 1e-3:
        return
    n = n / nrm
    gt, pi, gn = traces_of_values(u, n)
    assert np.abs(np.einsum("nd,nd->n", gt, n)).max() < 1e-9
    assert np.abs(np.einsum("nd,nd->n", pi, n)).max() < 1e-9
    assert np.allclose(np.linalg.norm(gt, axis=1), np.linalg.norm(pi, axis=1))
    assert np.allclose(np.sum(u * u, 1), np.sum(pi * pi, 1) + gn ** 2)
    # pi(u) = nu x (u x nu) and gamma_t = nu x pi
    assert np.allclose(pi, np.cross(n, np.cross(u, n)))
    assert np.allclose(gt, np.cross(n, pi))


def test_boundary_traces_of_constant(cube1):
    u = FESpace(cube1, "edge").interpolate(lambda x: np.tile([1.0, 2.0, 3.0], (len(x), 1)))
    tb = boundary_traces(u)
    assert np.allclose(tb.gamma_n, tb.normals @ np.array([1.0, 2.0, 3.0]))
    assert tb.weights.sum() == pytest.approx(6.0)


def test_green_formula_sign(cube2, rng):
    E = FESpace(cube2, "edge")
    u, v = E.random(rng), E.random(rng)
    g = green_residual(u, v)
    scale = max(abs(g["volume"]), 1.0)
    assert g["residual"] < 1e-10 * scale
    assert g["residual_opposite_sign"] > 1e-3 * scale


def test_green_formula_closed_form_fields(cube1):
    u = (lambda x: np.column_stack([x[:, 1] ** 2, np.sin(x[:, 2]), x[:, 0] * x[:, 1]]).astype(complex),
         lambda x: np.column_stack([x[:, 0] - np.cos(x[:, 2]), -x[:, 1], -2 * x[:, 1]]).astype(complex))
    v = (lambda x: np.column_stack([0 * x[:, 0], x[:, 0] ** 2, 0 * x[:, 0]]).astype(complex),
         lambda x: np.column_stack([0 * x[:, 0], 0 * x[:, 0], 2 * x[:, 0]]).astype(complex))
    g = green_residual(u, v, mesh=cube1, vol_order=6, surf_order=5)
    assert g["residual"] < 1e-3 * max(abs(g["volume"]), 1.0)


def test_slab_exponential_is_tight():
    mesh = slab_mesh(5.0, 0.1)
    u = FESpace(mesh, "P2").interpolate(lambda x: np.exp(-x[:, 2]))
    dom = TraceDomain(mesh, star_character(mesh), (4,), (5,), graph_character(mesh, (4,)))
    c = verify_trace_inequality(u, dom, "graph_trace").checks[0]
    assert c.passed
    assert c.constants["ratio_lhs_rhs_core"] == pytest.approx(1.0, abs=1e-3)


def test_graph_trace_scope_errors(cube2):
    dom = TraceDomain(cube2, star_character(cube2), (4,), (5,), graph_character(cube2, (4,)))
    V = FESpace(cube2, "P2")
    with pytest.raises(ScopeError, match="constant"):
        verify_trace_inequality(V.interpolate(lambda x: np.ones(len(x))), dom, "graph_trace")
    with pytest.raises(ScopeError, match="truncation"):
        verify_trace_inequality(V.interpolate(lambda x: 1 + x[:, 2]), dom, "graph_trace")


def test_trace_inequality_rejects_bad_input(cube1):
    dom = TraceDomain(cube1, star_character(cube1))
    with pytest.raises(CapabilityError):
        verify_trace_inequality(FESpace(cube1, "edge").zero(), dom, "boundary_trace")
    with pytest.raises(ConfigurationError):
        verify_trace_inequality(FESpace(cube1, "P1").zero(), dom, "no_such_bound")
    with pytest.raises(ConfigurationError):
        verify_trace_inequality(FESpace(cube1, "P1").zero(), TraceDomain(cube1, None), "boundary_trace")


def test_scalar_trace_suite_on_cube(cube2, rng):
    dom = TraceDomain(cube2, star_character(cube2), (4,), (5,), graph_character(cube2, (4,)))
    fields = [random_smooth_p2(cube2, rng) for _ in range(4)]
    rep = boundary_trace_suite(fields, dom, seed=0)
    assert rep.passed and rep.meta["C_suite"] >= 0
    for u in fields:
        assert verify_trace_inequality(u, dom, "h12_trace").passed
    for _ in range(3):
        u = random_smooth_p2(cube2, rng, vanish_charts=(0, 1, 2, 3, 5))
        assert verify_trace_inequality(u, dom, "graph_trace").passed


def test_boundary_trace_constant_is_smallest(cube2, rng):
    dom = TraceDomain(cube2, star_character(cube2))
    u = random_smooth_p2(cube2, rng)
    c = verify_trace_inequality(u, dom, "boundary_trace").checks[0]
    assert c.margin == pytest.approx(0.0, abs=1e-10 * c.rhs) or c.constants["C_empirical"] == 0.0
    c_strict = verify_trace_inequality(u, dom, "boundary_trace", C=0.9 * c.constants["C_empirical"]).checks[0]
    assert c.constants["C_empirical"] == 0.0 or not c_strict.passed


def test_vector_trace_bounds(cube2, rng, k1):
    E = FESpace(cube2, "edge")
    ch = star_character(cube2)
    for _ in range(2):
        u = E.random(rng)
        assert verify_pi_bounds(u, ch, k1).passed
        assert verify_tangential_trace(u, ch, k1).passed


def test_pi_field_is_tangential(cube1, rng):
    u = FESpace(cube1, "edge").random(rng)
    pf = pi_field(u)
    nu = pf.surface.normals[pf.face_ids]
    assert np.abs(np.einsum("nd,nd->n", pf.values, nu)).max() < 1e-12


def test_surface_div_of_surface_curl_vanishes(cube2, rng):
    # div_s curl_s g = 0 on a closed surface, exactly for facetwise constant P1 curls
    surf = Surface.from_mesh(cube2)
    g = rng.standard_normal(len(cube2.vertices))
    curl = surface_diff(g, surf)["curl_surface"]
    fid = np.arange(len(surf.faces))
    m = BoundaryField(surf, fid, np.full((len(fid), 3), 1 / 3), surf.areas, curl, tangential=True)
    assert np.abs(surface_div(m)).max() < 1e-12


def test_surface_gradient_of_linear_data(cube2):
    surf = Surface.from_mesh(cube2)
    a = np.array([1.0, -2.0, 0.5])
    grad = surface_diff(cube2.vertices @ a, surf)["grad_surface"]
    nu = cube2.normals
    assert np.allclose(grad, a - (nu @ a)[:, None] * nu)


def test_flattening_identity_map(cube2, rng):
    u = random_smooth_p2(cube2, rng)
    out = flatten_maps(u, cube2, lambda y: np.zeros(len(y)), (4,))
    rep = out["report"]
    assert rep.passed
    h1 = rep.by_id("flatten_H1")[0]
    assert h1.lhs == pytest.approx(h1.constants["norm_u_H1"], rel=1e-12)


def test_flattening_sheared_cube(rng):
    mesh = unit_cube_mesh(2)
    slope = 1.5
    sheared = mesh.mapped(lambda v: v + np.column_stack([0 * v[:, 0], 0 * v[:, 0], slope * v[:, 0]]))
    V = FESpace(sheared, "P2")
    u = V.interpolate(lambda x: np.cos(x[:, 0] + 2 * x[:, 2]) + x[:, 1])
    out = flatten_maps(u, sheared, lambda y: slope * y[:, 0], (4,))
    rep = out["report"]
    assert rep.by_id("flatten_H1")[0].constants["M"] == pytest.approx(slope, rel=1e-12)
    assert rep.passed


def test_flattening_rejects_non_graph(cube2, rng):
    u = random_smooth_p2(cube2, rng)
    with pytest.raises(CapabilityError):
        flatten_maps(u, cube2, lambda y: 0.3 * y[:, 0], (4,))
