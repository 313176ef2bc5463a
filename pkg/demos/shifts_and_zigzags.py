"""Translation estimates and line-cut path lengths on a sequence of meshes."""

import numpy as np

from broken_sobolev.broken_norms import norm_breakdown
from broken_sobolev.dg_space import random_dg
from broken_sobolev.mesh_gen import l_shape_uniform, refine_red
from broken_sobolev.shift_lab import random_lines, shift_l2_sq, zigzag_bound_check

if __name__ == "__main__":
    mesh = l_shape_uniform(2)
    u = random_dg(mesh, 1, seed=2)
    h1h = norm_breakdown(u).h1h_norm_sq
    direction = np.array([1.0, 2.0]) / np.sqrt(5)
    print("||u(. + rho) - u||^2 / (|rho| ||u||_h^2), extended by zero")
    for size in (0.2, 0.1, 0.05, 0.025):
        ratio = shift_l2_sq(u, size * direction) / (size * h1h)
        print(f"  |rho| = {size:<6} ratio = {ratio:.4f}")

    print("\ninterior path length / bound over random lines")
    for level in range(3):
        reports = [zigzag_bound_check(mesh, ln) for ln in random_lines(mesh, 40, seed=level)]
        worst = max(r["interior_path_sum"] / r["bound"] for r in reports)
        print(f"  level {level}: {mesh.n_cells:>4} cells, worst ratio {worst:.3f}")
        mesh = refine_red(mesh)
