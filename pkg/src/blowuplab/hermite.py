"""Hermite polynomials for the Gaussian weight e^{-z^2/4}.

The family P_m used throughout is normalized so that

    P_m(z) = sum_{k=0}^{[m/2]} m!/(k! (m-2k)!) (-1)^k z^{m-2k},
    int P_m P_m' e^{-z^2/4} dz = sqrt(pi) 2^{m+1} m! delta_{mm'},

with P_0 = 1, P_1 = z, P_2 = z^2 - 2.  They are eigenfunctions of the
drifted 1d operator -d_zz + (z/2) d_z with eigenvalue m/2 and satisfy the
three-term recurrence P_{m+1} = z P_m - 2m P_{m-1} (used for evaluation;
it is numerically stable, unlike the alternating explicit sum) and
P_m' = m P_{m-1}.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import UnsupportedOrderError

__all__ = [
    "MAX_ORDER",
    "hermite_eval",
    "hermite_eval_explicit",
    "hermite_deriv",
    "hermite_norm_sq",
]

MAX_ORDER = 60


def _check_order(m: int) -> None:
    if m < 0:
        raise UnsupportedOrderError("order must be nonnegative")
    if m > MAX_ORDER:
        raise UnsupportedOrderError(
            f"order {m} above cap {MAX_ORDER} (factorial overflow guard)"
        )


def hermite_eval(m: int, z):
    """Evaluate P_m at ``z`` (scalar or array) by the three-term recurrence."""
    _check_order(m)
    z = np.asarray(z, dtype=float)
    p_prev = np.ones_like(z)
    if m == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = z.copy()
    for k in range(1, m):
        p, p_prev = z * p - 2.0 * k * p_prev, p
    return p if p.ndim else float(p)


def hermite_eval_explicit(m: int, z):
    """Evaluate P_m from the explicit alternating sum (exact coefficients).

    Kept as an independent cross-check of the recurrence for moderate m;
    the integer coefficients are exact, the float evaluation is not
    cancellation-safe for large m.
    """
    _check_order(m)
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    for k in range(m // 2 + 1):
        coeff = (-1) ** k * math.factorial(m) // (
            math.factorial(k) * math.factorial(m - 2 * k)
        )
        total = total + coeff * z ** (m - 2 * k)
    return total if total.ndim else float(total)


def hermite_deriv(m: int, z):
    """P_m'(z) = m P_{m-1}(z)."""
    _check_order(m)
    if m == 0:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        return out if out.ndim else 0.0
    return m * hermite_eval(m - 1, z)


def hermite_norm_sq(m: int) -> float:
    """Closed-form weighted norm: int P_m^2 e^{-z^2/4} dz = sqrt(pi) 2^{m+1} m!."""
    _check_order(m)
    return math.sqrt(math.pi) * float(2 ** (m + 1) * math.factorial(m))
