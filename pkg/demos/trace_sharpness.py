"""Graph trace bound on the slab for u = exp(-x3): the ratio LHS/RHS approaches 1."""
import numpy as np

from lipmax.fem import FESpace
from lipmax.geometry import graph_character, star_character
from lipmax.meshes import slab_mesh
from lipmax.traces import TraceDomain, verify_trace_inequality


def main():
    print(f"{'h':>6} {'lhs':>12} {'rhs':>12} {'ratio':>10}")
    for h in (0.2, 0.1, 0.05):
        mesh = slab_mesh(5.0, h)
        dom = TraceDomain(mesh, star_character(mesh), (4,), (5,), graph_character(mesh, (4,)))
        u = FESpace(mesh, "P2").interpolate(lambda x: np.exp(-x[:, 2]))
        c = verify_trace_inequality(u, dom, "graph_trace").checks[0]
        print(f"{h:6.3f} {c.lhs:12.6f} {c.rhs:12.6f} {c.constants['ratio_lhs_rhs_core']:10.6f}")


if __name__ == "__main__":
    main()
