"""Singular case: c1 = x (pi - x), c2 = 0, so (c, b2) = 0.

The wave control is only a distribution. The pipeline solves for a second
antiderivative U1 (u = U1'') and drives the wave with it directly.
"""
import numpy as np

from interconnect import FunctionSpec, InterconnectSpec, run_pipeline

x = FunctionSpec.polynomial(0.0, 1.0)
bump = FunctionSpec.polynomial(0.0, np.pi, -1.0)
rep = run_pipeline(InterconnectSpec(b1=x, b2=x, c1=bump, c2=FunctionSpec.zero(),
                                    phi0=FunctionSpec.sine(1.0, 0.5), N=8, M=2000))

ip = rep.classification.inner_products
print("case:", rep.classification.label)
print(f"(c, b2) = {ip['c_b2']:.3g},  (A2* c, b2) = {ip['A2c_b2']:.6f}"
      f"  (pi^4/12 = {np.pi**4 / 12:.6f})")
print("truncated K'(0) used as multiplier:", ip["modal_K1_0"])
print("control order:", rep.control_order, " U1(t1) =", rep.U[-1])
print(f"|v_hat - v|_inf = {rep.observation_error:.2e}, "
      f"terminal ratio = {rep.relative_terminal_norm:.2e}")
