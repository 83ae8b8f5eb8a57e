"""Truncated bivariate series in (b, Z^2) with grid-function coefficients.

The boundary-layer expansion lives in the ring

    sum_{i=0}^{Ib} sum_{j=0}^{Jw} C_{ij}(r) b^i Z^{2j}

truncated independently in both variables (w = Z^2 throughout).  The
coefficients are radial samples; all arithmetic (addition, Cauchy product,
division by a unit, binomial powers of 1 + O(w) or 1 + O(b) series) is
closed on the ring and exact apart from floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BZSeries", "binom_coeffs"]


def binom_coeffs(alpha: float, kmax: int) -> np.ndarray:
    """Generalized binomial coefficients C(alpha, k), k = 0..kmax.

    Computed by the falling-factorial recurrence C(alpha, k+1) =
    C(alpha, k) (alpha - k)/(k + 1).
    """
    out = np.empty(kmax + 1)
    out[0] = 1.0
    for k in range(kmax):
        out[k + 1] = out[k] * (alpha - k) / (k + 1.0)
    return out


@dataclass
class BZSeries:
    """coeffs[i, j, :] is the radial coefficient of b^i Z^{2j}."""

    coeffs: np.ndarray

    @classmethod
    def zero(cls, ib: int, jw: int, n_r: int) -> "BZSeries":
        return cls(np.zeros((ib + 1, jw + 1, n_r)))

    @classmethod
    def from_radial(cls, values: np.ndarray, ib: int, jw: int) -> "BZSeries":
        s = cls.zero(ib, jw, values.size)
        s.coeffs[0, 0] = values
        return s

    @classmethod
    def from_w_table(cls, table: np.ndarray, ib: int) -> "BZSeries":
        """Pure-w series from table[k, :] = coefficient of Z^{2k}."""
        jw = table.shape[0] - 1
        s = cls.zero(ib, jw, table.shape[1])
        s.coeffs[0] = table
        return s

    @property
    def ib(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def jw(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def n_r(self) -> int:
        return self.coeffs.shape[2]

    def copy(self) -> "BZSeries":
        return BZSeries(self.coeffs.copy())

    def __add__(self, other: "BZSeries") -> "BZSeries":
        return BZSeries(self.coeffs + other.coeffs)

    def __sub__(self, other: "BZSeries") -> "BZSeries":
        return BZSeries(self.coeffs - other.coeffs)

    def __neg__(self) -> "BZSeries":
        return BZSeries(-self.coeffs)

    def scale(self, factor) -> "BZSeries":
        return BZSeries(self.coeffs * factor)

    def __mul__(self, other):
        if not isinstance(other, BZSeries):
            return self.scale(other)
        ib, jw, n = self.ib, self.jw, self.n_r
        out = np.zeros_like(self.coeffs)
        nz_self = np.argwhere(np.any(self.coeffs != 0.0, axis=2))
        nz_other = np.argwhere(np.any(other.coeffs != 0.0, axis=2))
        for i1, j1 in nz_self:
            c1 = self.coeffs[i1, j1]
            for i2, j2 in nz_other:
                if i1 + i2 > ib or j1 + j2 > jw:
                    continue
                out[i1 + i2, j1 + j2] += c1 * other.coeffs[i2, j2]
        return BZSeries(out)

    __rmul__ = __mul__

    def weight_ij(self, fn) -> "BZSeries":
        """Multiply coefficient (i, j) by the scalar fn(i, j)."""
        out = self.coeffs.copy()
        for i in range(self.ib + 1):
            for j in range(self.jw + 1):
                out[i, j] *= fn(i, j)
        return BZSeries(out)

    def half_z_dz(self) -> "BZSeries":
        """(1/2) Z dZ: multiplies the Z^{2j} coefficient by j."""
        return self.weight_ij(lambda i, j: j)

    def z_dz(self) -> "BZSeries":
        return self.weight_ij(lambda i, j: 2 * j)

    def b_db(self) -> "BZSeries":
        """b d_b at fixed Z: multiplies the b^i coefficient by i."""
        return self.weight_ij(lambda i, j: i)

    def mul_b(self) -> "BZSeries":
        """Multiplication by b (drops the top order)."""
        out = np.zeros_like(self.coeffs)
        out[1:] = self.coeffs[:-1]
        return BZSeries(out)

    def dZ2(self) -> "BZSeries":
        """d^2/dZ^2: Z^{2j} -> 2j (2j - 1) Z^{2j-2}."""
        out = np.zeros_like(self.coeffs)
        for j in range(1, self.jw + 1):
            out[:, j - 1] = self.coeffs[:, j] * (2 * j) * (2 * j - 1)
        return BZSeries(out)

    def divide(self, den: "BZSeries") -> "BZSeries":
        """self/den; den's (0,0) coefficient must be bounded away from zero."""
        out = np.zeros_like(self.coeffs)
        d00 = den.coeffs[0, 0]
        for i in range(self.ib + 1):
            for j in range(self.jw + 1):
                acc = self.coeffs[i, j].copy()
                for i2 in range(i + 1):
                    for j2 in range(j + 1):
                        if i2 == i and j2 == j:
                            continue
                        acc -= out[i2, j2] * den.coeffs[i - i2, j - j2]
                out[i, j] = acc / d00
        return BZSeries(out)

    def binomial_pow(self, alpha: float, kmax: int | None = None) -> "BZSeries":
        """(1 + y)^alpha for a series with unit constant term (y nilpotent)."""
        y = self.copy()
        y.coeffs[0, 0] = y.coeffs[0, 0] - 1.0
        if np.max(np.abs(y.coeffs[0, 0])) > 1e-12:
            raise ValueError("binomial_pow expects a unit constant term")
        kmax = self.ib + self.jw if kmax is None else kmax
        cs = binom_coeffs(alpha, kmax)
        out = BZSeries.zero(self.ib, self.jw, self.n_r)
        out.coeffs[0, 0] = 1.0
        ypow = y.copy()
        for k in range(1, kmax + 1):
            out = out + ypow.scale(cs[k])
            if k < kmax:
                ypow = ypow * y
        return out

    def eval_at(self, b: float, Z: np.ndarray, upto_i: int | None = None) -> np.ndarray:
        """Evaluate sum over (i <= upto_i, j) at scalar b and Z of shape (n_z,).

        Returns an array of shape (n_r, n_z).
        """
        upto_i = self.ib if upto_i is None else upto_i
        w = np.asarray(Z) ** 2
        out = np.zeros((self.n_r, w.size))
        for i in range(upto_i + 1):
            bi = b**i
            for j in range(self.jw + 1):
                col = self.coeffs[i, j]
                if not np.any(col):
                    continue
                out += bi * np.outer(col, w**j)
        return out

    def max_coeff_norm(self, weights: np.ndarray, i_max: int, j_max: int) -> float:
        """Largest weighted-L2 norm among coefficients with i <= i_max, j <= j_max."""
        worst = 0.0
        for i in range(min(i_max, self.ib) + 1):
            for j in range(min(j_max, self.jw) + 1):
                worst = max(
                    worst, float(np.sqrt(np.dot(weights, self.coeffs[i, j] ** 2)))
                )
        return worst