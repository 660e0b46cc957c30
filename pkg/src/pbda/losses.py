"""Probit-type losses used by the Gibbs formulas and the solvers.

All functions accept scalars or numpy arrays and are vectorized.  Scalars in
give Python floats out.
"""

import numpy as np
from scipy.special import erfc

SQRT_2PI = np.sqrt(2.0 * np.pi)
SATURATION = 40.0

__all__ = [
    "phi",
    "phi_prime",
    "phi_cvx",
    "phi_cvx_prime",
    "phi_dis",
    "phi_dis_prime",
]


def _check(a):
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss argument must be finite")
    return arr


def _out(a, value):
    return float(value) if np.ndim(a) == 0 else value


def phi(a):
    """Standard normal upper tail beyond ``a``: ``0.5 * (1 - erf(a / sqrt(2)))``."""
    x = _check(a)
    # erfc keeps full relative precision in the upper tail
    value = 0.5 * erfc(x / np.sqrt(2.0))
    value = np.where(x > SATURATION, 0.0, np.where(x < -SATURATION, 1.0, value))
    return _out(a, value)


def phi_prime(a):
    x = _check(a)
    return _out(a, -np.exp(-0.5 * x * x) / SQRT_2PI)


def phi_cvx(a):
    """Convex relaxation of ``phi``: linear for ``a <= 0``, ``phi`` above."""
    x = _check(a)
    # the max keeps phi_cvx >= phi exact under rounding near the seam
    value = np.where(x <= 0.0, np.maximum(0.5 - x / SQRT_2PI, phi(x)), phi(np.maximum(x, 0.0)))
    return _out(a, value)


def phi_cvx_prime(a):
    x = _check(a)
    value = np.where(x < 0.0, -1.0 / SQRT_2PI, phi_prime(x))
    return _out(a, value)


def phi_dis(a):
    """Probability that two independent posterior draws disagree at margin ``a``."""
    x = _check(a)
    value = 2.0 * phi(x) * phi(-x)
    value = np.where(np.abs(x) > SATURATION, 0.0, value)
    return _out(a, value)


def phi_dis_prime(a):
    x = _check(a)
    value = 2.0 * phi_prime(x) * (phi(-x) - phi(x))
    return _out(a, value)


# Fused, unchecked variants for solver inner loops.  Callers guarantee finite
# input; minimize() rejects non-finite objectives anyway.

_SQRT2 = np.sqrt(2.0)


def risk_loss_and_prime(a, convex=True):
    """``(phi_cvx(a), phi_cvx_prime(a))`` or, with ``convex=False``, ``phi`` and ``phi_prime``."""
    upper = 0.5 * erfc(a / _SQRT2)
    dens = np.exp(-0.5 * a * a) / SQRT_2PI
    if not convex:
        return upper, -dens
    neg = a < 0.0
    value = np.where(a <= 0.0, np.maximum(0.5 - a / SQRT_2PI, upper), upper)
    prime = np.where(neg, -1.0 / SQRT_2PI, -dens)
    return value, prime


def dis_and_prime(a):
    """``(phi_dis(a), phi_dis_prime(a))``."""
    upper = 0.5 * erfc(a / _SQRT2)
    lower = 0.5 * erfc(-a / _SQRT2)
    dens = np.exp(-0.5 * a * a) / SQRT_2PI
    return 2.0 * upper * lower, -2.0 * dens * (lower - upper)
