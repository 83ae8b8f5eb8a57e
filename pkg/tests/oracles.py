"""Independent oracles used by the test suite.

Everything here is deliberately implemented without the package's own
numerics: Gaussian moments in closed form, adaptive quadrature from scipy,
exact-rational recurrences for the constant-profile corrector hierarchy,
and polynomial-times-Gaussian trial fields with analytic derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import quad


def gaussian_radial_moment(n: int) -> float:
    """int_0^inf r^n e^{-r^2/4} dr = 2^n Gamma((n+1)/2)."""
    return 2.0**n * math.gamma((n + 1) / 2.0)


def gaussian_line_integral() -> float:
    """int_R e^{-z^2/4} dz = 2 sqrt(pi)."""
    return 2.0 * math.sqrt(math.pi)


def quad_radial(f, upper=np.inf) -> float:
    """Adaptive quadrature of int_0^upper f(r) r^2 e^{-r^2/4} dr."""
    val, _ = quad(
        lambda r: f(r) * r * r * math.exp(-0.25 * r * r), 0.0, upper, limit=200
    )
    return val


def hermite_reference(m: int, z: float) -> float:
    """P_m(z) from the explicit alternating sum with exact integers."""
    total = 0.0
    for k in range(m // 2 + 1):
        coeff = (-1) ** k * math.factorial(m) // (
            math.factorial(k) * math.factorial(m - 2 * k)
        )
        total += coeff * z ** (m - 2 * k)
    return total


# ---------------------------------------------------------------------------
# Exact-rational corrector hierarchy for the constant profile.
#
# With Phi = kappa = (1/(p-1))^{1/(p-1)} and integer p, every coefficient in
# the boundary-layer hierarchy is a constant multiple of kappa, so the whole
# construction closes over Q after factoring kappa out (kappa^p goes to
# kappa/(p-1)).  Series live in Q[b, w]/(b^{ib+1}, w^{jw+1}) with w = Z^2.
# ---------------------------------------------------------------------------


@dataclass
class RationalSeries:
    """Bivariate truncated polynomial sum_{i,j} c[i][j] b^i w^j over Q."""

    ib: int
    jw: int
    c: list

    @classmethod
    def zero(cls, ib: int, jw: int) -> "RationalSeries":
        return cls(ib, jw, [[Fraction(0)] * (jw + 1) for _ in range(ib + 1)])

    @classmethod
    def const(cls, val, ib: int, jw: int) -> "RationalSeries":
        s = cls.zero(ib, jw)
        s.c[0][0] = Fraction(val)
        return s

    def copy(self) -> "RationalSeries":
        return RationalSeries(self.ib, self.jw, [row[:] for row in self.c])

    def __add__(self, other):
        out = self.copy()
        for i in range(self.ib + 1):
            for j in range(self.jw + 1):
                out.c[i][j] += other.c[i][j]
        return out

    def __sub__(self, other):
        out = self.copy()
        for i in range(self.ib + 1):
            for j in range(self.jw + 1):
                out.c[i][j] -= other.c[i][j]
        return out

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            out = self.copy()
            for i in range(self.ib + 1):
                for j in range(self.jw + 1):
                    out.c[i][j] *= other
            return out
        out = RationalSeries.zero(self.ib, self.jw)
        for i1 in range(self.ib + 1):
            for j1 in range(self.jw + 1):
                if self.c[i1][j1] == 0:
                    continue
                for i2 in range(self.ib + 1 - i1):
                    for j2 in range(self.jw + 1 - j1):
                        if other.c[i2][j2] == 0:
                            continue
                        out.c[i1 + i2][j1 + j2] += self.c[i1][j1] * other.c[i2][j2]
        return out

    __rmul__ = __mul__

    def map_ij(self, fn) -> "RationalSeries":
        out = self.copy()
        for i in range(self.ib + 1):
            for j in range(self.jw + 1):
                out.c[i][j] = fn(i, j, self.c[i][j])
        return out


def binom_fraction(alpha: Fraction, k: int) -> Fraction:
    """Generalized binomial coefficient C(alpha, k) over Q."""
    num = Fraction(1)
    for i in range(k):
        num *= Fraction(alpha) - i
    return num / math.factorial(k)


def series_divide(num: RationalSeries, den: RationalSeries) -> RationalSeries:
    """num/den in the truncated ring (den.c[0][0] must be invertible)."""
    out = RationalSeries.zero(num.ib, num.jw)
    d00 = den.c[0][0]
    for i in range(num.ib + 1):
        for j in range(num.jw + 1):
            s = num.c[i][j]
            for i2 in range(i + 1):
                for j2 in range(j + 1):
                    if i2 == i and j2 == j:
                        continue
                    s -= out.c[i2][j2] * den.c[i - i2][j - j2]
            out.c[i][j] = s / d00
    return out


class KappaHierarchy:
    """Exact corrector hierarchy for the constant profile (units of kappa).

    Scalar reduction: the radial linearized operator acts on constants as
    multiplication by -1, the transversally scaled profile is
    kappa (1+w)^{-1/(p-1)}, and the nonlinearity closes over Q because
    kappa^p = kappa/(p-1).  Coefficients c_i, d_i and corrector constants
    v[(i, j)] come out as Fractions; ``residual()`` returns the full
    residual series on the (ib, jw)-truncated ring, whose (i <= n, j <= n)
    block must vanish identically after the solve.
    """

    def __init__(self, p: int, n: int, ib: int | None = None, jw: int | None = None):
        self.p = p
        self.n = n
        self.ib = ib if ib is not None else n + 1
        self.jw = jw if jw is not None else n + 3
        pm1 = p - 1
        self.g = [binom_fraction(Fraction(-1, pm1), j) for j in range(self.jw + 1)]
        self.gp = [binom_fraction(Fraction(-p, pm1), j) for j in range(self.jw + 1)]
        self.gm = [binom_fraction(Fraction(-1), j) for j in range(self.jw + 1)]
        self.v: dict = {}
        self.c: dict = {}
        self.d: dict = {}
        self._solve()

    def _mk(self) -> RationalSeries:
        return RationalSeries.zero(self.ib, self.jw)

    def _from_w(self, coeffs) -> RationalSeries:
        s = self._mk()
        for j in range(self.jw + 1):
            s.c[0][j] = coeffs[j]
        return s

    def residual(self) -> RationalSeries:
        p, pm1 = self.p, self.p - 1
        G = self._from_w(self.g)
        V = self._mk()
        for (i, j), val in self.v.items():
            V.c[i][j] = val
        B = self._mk()
        M = self._mk()
        for i in range(1, self.ib + 1):
            B.c[i][0] = self.c.get(i, Fraction(0))
            M.c[i][0] = self.d.get(i, Fraction(0))
        GV = G + V

        # (L_r + (1/2) Z dZ) V  ->  (j - 1) v_{ij}
        t1 = V.map_ij(lambda i, j, x: x * (j - 1))
        # -b dZ^2 (G + V)
        t2 = self._mk()
        for i in range(self.ib):
            for j in range(self.jw):
                t2.c[i + 1][j] -= GV.c[i][j + 1] * (2 * j + 2) * (2 * j + 1)
        # -[(G+V)^p - G^p - p G^{p-1} V] = -(1/(p-1)) g^p sum_{k>=2} C(p,k) (V/G)^k
        x = series_divide(V, G)
        acc = self._mk()
        xpow = x * x
        for k in range(2, self.ib + 1):
            acc = acc + binom_fraction(Fraction(p), k) * xpow
            xpow = xpow * x
        t3 = self._mk() - Fraction(1, pm1) * (self._from_w(self.gp) * acc)
        # -p (G^{p-1} - Phi^{p-1}) V = -(p/(p-1)) ((1+w)^{-1} - 1) V
        one = RationalSeries.const(1, self.ib, self.jw)
        t4 = self._mk() - Fraction(p, pm1) * ((self._from_w(self.gm) - one) * V)
        # -B(b) [ (1/2) Z dZ (G+V) + b db V ]
        t5 = self._mk() - B * (
            GV.map_ij(lambda i, j, x: x * j) + V.map_ij(lambda i, j, x: x * i)
        )
        # -M(b) (Lam + Z dZ)(G + V); Lam on constants = 2/(p-1)
        t6 = self._mk() - M * (
            Fraction(2, pm1) * GV + GV.map_ij(lambda i, j, x: x * 2 * j)
        )
        return t1 + t2 + t3 + t4 + t5 + t6

    def _probe(self, setter, i: int, j: int) -> Fraction:
        """Solve R(x) = 0 for an unknown entering the (i, j) residual linearly."""
        setter(Fraction(0))
        r0 = self.residual().c[i][j]
        setter(Fraction(1))
        slope = self.residual().c[i][j] - r0
        if slope == 0:
            raise ZeroDivisionError("degenerate probe")
        val = -r0 / slope
        setter(val)
        return val

    def _solve(self):
        for i in range(1, self.n + 1):
            for j in range(0, self.n + 1):
                if j == 0:
                    # orthogonality to the scaling mode forces v_{i,0} = 0
                    # for constants; d_i then closes the equation.
                    self.v[(i, 0)] = Fraction(0)
                    self._probe(lambda x, i=i: self.d.__setitem__(i, x), i, 0)
                elif j == 1:
                    # shifted kernel is the constants: solvability fixes c_i,
                    # orthogonality fixes v_{i,1} = 0.
                    self.v[(i, 1)] = Fraction(0)
                    self._probe(lambda x, i=i: self.c.__setitem__(i, x), i, 1)
                else:
                    self._probe(
                        lambda x, i=i, j=j: self.v.__setitem__((i, j), x), i, j
                    )


# ---------------------------------------------------------------------------
# Smooth trial fields with analytic derivatives: q(r^2, z^2) e^{-s (r^2+z^2)}
# ---------------------------------------------------------------------------


@dataclass
class PolyGaussField:
    """u = q(r^2, z^2) exp(-s (r^2 + z^2)) with closed-form derivatives.

    Even in both variables and smooth across the axis, so FD-free oracles
    (Hardy quotients, drifted-Laplacian bounds, spectral-gap probes) can
    evaluate gradients and Laplacians exactly.
    """

    coeffs: np.ndarray  # q coefficients, shape (deg_r2+1, deg_z2+1)
    s: float

    def _poly(self, r2, z2, dr=0, dz=0):
        out = np.zeros_like(r2)
        ni, nj = self.coeffs.shape
        for i in range(dr, ni):
            fi = math.perm(i, dr)
            for j in range(dz, nj):
                fj = math.perm(j, dz)
                out += fi * fj * self.coeffs[i, j] * r2 ** (i - dr) * z2 ** (j - dz)
        return out

    def value(self, r, z):
        r2, z2 = r * r, z * z
        return self._poly(r2, z2) * np.exp(-self.s * (r2 + z2))

    def grad(self, r, z):
        r2, z2 = r * r, z * z
        e = np.exp(-self.s * (r2 + z2))
        q = self._poly(r2, z2)
        ur = (self._poly(r2, z2, dr=1) - self.s * q) * 2 * r * e
        uz = (self._poly(r2, z2, dz=1) - self.s * q) * 2 * z * e
        return ur, uz

    def laplacian_cyl(self, r, z):
        """d_rr + (2/r) d_r + d_zz, valid on the axis by evenness."""
        r2, z2 = r * r, z * z
        e = np.exp(-self.s * (r2 + z2))
        q = self._poly(r2, z2)
        qa = self._poly(r2, z2, dr=1)
        qb = self._poly(r2, z2, dz=1)
        qaa = self._poly(r2, z2, dr=2)
        qbb = self._poly(r2, z2, dz=2)
        s = self.s
        # in t = r^2: radial part is 4 t d_tt + 6 d_t; in u = z^2: 4 u d_uu + 2 d_u
        rad = 4 * r2 * (qaa - 2 * s * qa + s * s * q) + 6 * (qa - s * q)
        zz = 4 * z2 * (qbb - 2 * s * qb + s * s * q) + 2 * (qb - s * q)
        return (rad + zz) * e

    @classmethod
    def random(cls, rng: np.random.Generator, deg: int = 2) -> "PolyGaussField":
        return cls(coeffs=rng.normal(size=(deg + 1, deg + 1)),
                   s=float(rng.uniform(0.15, 0.6)))
