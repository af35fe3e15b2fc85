"""Strong-minimality evidence for exponential families.

The heat family {1, (b_n/lambda_n) e^{n^2 t}} levels off; a family whose
weights fall like e^{-n^3} has no finite Dirichlet abscissa.
"""
import numpy as np

from interconnect import (ExponentialFamily, FunctionSpec, augmented_family,
                          build_heat_system, dirichlet_hypothesis,
                          strong_minimality_constant)

heat = build_heat_system(FunctionSpec.polynomial(0.0, 1.0), FunctionSpec.zero(), 12, 1.0)
fam = augmented_family(heat)
rep = strong_minimality_constant(fam, len(fam))
print("heat family gamma_n:")
for n, g in enumerate(rep.gamma_sequence, 1):
    print(f"  n = {n:2d}  gamma = {g:.4e}")
print("verdict:", rep.verdict, " certified bound:", f"{rep.certified_lower_bound:.2e}")
check = dirichlet_hypothesis(fam)
print("Dirichlet evidence:", check.hypothesis_holds,
      f"(sum 1/mu ~ {check.reciprocal_rate_sum_estimate:.3f}, "
      f"abscissa ~ {check.abscissa_estimate:.3f})")

n = np.arange(1, 9, dtype=float)
bad = dirichlet_hypothesis(ExponentialFamily(np.exp(-n**3), n**2, 1.0))
print("weights e^{-n^3}:", bad.hypothesis_holds, "|", "; ".join(bad.notes))
