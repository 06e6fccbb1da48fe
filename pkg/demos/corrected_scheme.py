# Replacing the dropped small jumps by a second-order term.
#
# A manufactured solution v(t, x) = exp(-t) exp(-x^2) is made exact by a
# source term, so errors are measured against the true solution.
# With delta = sqrt(dx) the truncation error dominates the plain scheme.
# Run:  python demos/corrected_scheme.py

import math

from nonlocal_isaacs import Coupling, SeparableTarget, canonical_problem, manufactured_source, refinement_study
from nonlocal_isaacs.problem import gaussian_bump

target = SeparableTarget(lambda t: math.exp(-t), lambda t: -math.exp(-t), gaussian_bump())
problem = manufactured_source(canonical_problem("smooth_u0_variant", sigma=1.5), target)

for corrected in (False, True):
    coupling = Coupling(delta_rule="manual", delta_power=0.5, diffusion_correction=corrected)
    rep = refinement_study(problem, 1 / 8, 4, coupling, reference="exact", exact=target, k_u0_finite=True)
    rep.label = "with correction" if corrected else "plain truncation"
    print(rep.table(), "\n")
