"""Lossy sphere under a plane wave: interior solve, bounds and the scattered field."""
import warnings

import numpy as np

from lipmax.config import load_config
from lipmax.scattering import PanelQuadrature, evaluate_scattered
from lipmax.suites import Context


def main():
    ctx = Context(load_config("lossy_sphere"))
    sol = ctx.solution
    print(f"mesh: {len(ctx.ball.tets)} tets, {sol.system.ndof} edge dofs, residual {sol.residual:.1e}")
    system = ctx.system
    m = system.projector.coefficients(sol.E.coeffs - system.space.interpolate(ctx.incident.E).coeffs, 1.0)
    quad = PanelQuadrature.sphere(3, system.projector.R)
    x = np.array([[0.0, 0.0, 2.0], [0.0, 0.0, -2.0], [2.0, 0.0, 0.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        Es = evaluate_scattered(x, m, quad, 1.0)
    for xi, e, f in zip(x, Es, m.field(x)[0]):
        print(f"x = {xi}: |E_s| = {np.linalg.norm(e):.5f} (multipole {np.linalg.norm(f):.5f})")


if __name__ == "__main__":
    main()
