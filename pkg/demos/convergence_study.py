# Grid refinement studies and the consistency of the scheme's ingredients.
#
# Errors are measured against a 4x finer reference in the window |x| <= L/2.
# Run:  python demos/convergence_study.py   (about half a minute)

from nonlocal_isaacs import Coupling, Grid, canonical_problem, consistency_order, refinement_study, truncation_distance

print("refinement with delta = dx and dt = dx (implicit)\n")
for name, sigma in (("fractional_linear", 0.5), ("smooth_u0_variant", 1.5)):
    report = refinement_study(canonical_problem(name, sigma=sigma), 1 / 16, 3, Coupling())
    print(report.table(), "\n")

print("distance to the smallest truncation radius on a fixed grid\n")
grid = Grid.create(1 / 64, 1.0, 4.0, steps=16)
for sigma in (0.5, 1.5):
    rep = truncation_distance(canonical_problem("fractional_linear", sigma=sigma),
                              [2.0**-k for k in range(1, 7)], grid)
    print(rep.table(), "\n")

print("consistency slopes on exp(-x^2)")
for sigma in (0.5, 1.5):
    for ingredient in ("truncation", "drift", "quadrature", "local_correction"):
        res = consistency_order(ingredient, sigma)
        print(f"  sigma={sigma} {ingredient:<17} slope {res.slope:6.3f}  expected {res.expected:4.2f}")
