# A two-player game where min-max and max-min differ.
#
# Both players pick a sign; the drift, the source and the jump amplitude
# depend on the pair, so the Isaacs Hamiltonian is neither convex nor concave.
# Run:  python demos/two_player_game.py

import numpy as np

from nonlocal_isaacs import Grid, Scheme, SchemeParams, canonical_problem, hamiltonian_table, validate_assumptions

problem = canonical_problem("two_player_nonconvex", sigma=0.5)
print("\n".join(validate_assumptions(problem).lines()))

table = hamiltonian_table(problem, problem.u0, 0.0, [0.3])
print("\nbraced expression at x = 0.3 for a in {-1, 1} (rows) and b in {-1, 1} (columns):")
print(np.array2string(table, precision=4))
print(f"min_a max_b = {table.max(axis=1).min():.4f}, max_b min_a = {table.min(axis=0).max():.4f}")

grid = Grid.create(1 / 16, 1.0, 4.0, steps=16)
scheme = Scheme(problem, grid, SchemeParams(fixed_point_tol=1e-12))
field = scheme.solve()
its = [s.iterations for s in scheme.stats]
print(f"\nimplicit solve: {grid.steps} steps, fixed-point iterations per step {min(its)}..{max(its)}, "
      f"worst residual {max(s.residual for s in scheme.stats):.1e}")

# Same game with an explicit jump term and implicit drift.
mixed = Scheme(problem, grid, SchemeParams(theta=1.0, vartheta=0.0)).solve()
print(f"sup |implicit - mixed| at T = {np.max(np.abs(field.final - mixed.final)):.3e}")
