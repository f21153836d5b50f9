"""Frozen reference values, each derived independently of the package.

bbar(0) = (1/pi) int_0^inf exp(-xi^4) dxi = Gamma(5/4) / pi.
int bbar(z) |z| dz = (2/pi) int_0^inf (1 - exp(-xi^4)) / xi^2 dxi = 2 Gamma(3/4) / pi.
Phi_lin(0) for a = -b = eps is eps times the second value.
"""
from __future__ import annotations

import math

BBAR0 = 0.2885168693082349
ABS_MOMENT0 = 0.7801245021788137
PHI_LIN0_EPS01 = 0.07801245021788137

# f_sigma(r) - r for the exponential model, sigma = 10, at r = -1 and r = 1
FSIGMA10_MINUS1 = 1.0 - 10.0 * (1.0 - math.exp(-0.1))  # 0.048374180...
FSIGMA10_PLUS1 = 10.0 * math.expm1(0.1) - 1.0  # 0.051709180...

# eigenmode sin(2x) after t = 0.1: damping exp(-0.1 * 2^4)
EIG_DAMP = 0.20189651799465538

# b(x, t) = t^(-1/4) bbar(x t^(-1/4)); at x = 0, t = 16 this is bbar(0) / 2
KERNEL_X0_T16 = 0.14425843465411742
