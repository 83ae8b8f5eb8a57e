"""Shifted radial solves (L_r + j) u = f with decay selection.

Two independent homogeneous solutions bracket the behaviour at infinity:

    phi_1 ~ r^{g} e^{r^2/4},      phi_2 ~ r^{-c},    c = 2 (1/(p-1) + j - V_inf),

where V_inf is the large-r limit of p Phi^{p-1} (zero for decaying
profiles, p/(p-1) for the constant one) and g = c - 3.  Their Wronskian
satisfies r^2 e^{-r^2/4} (phi_1' phi_2 - phi_2' phi_1) = const, which is
normalized to one.  phi_1 is integrated outward (the growing direction is
stable there); for j = 1 the axis-regular solution IS the kernel element,
so phi_1 starts from the singular 1/r Frobenius branch instead.  phi_2 is
integrated inward from the algebraic seed (the Gaussian mode decays
relative to it in that direction).

The primary solver is a banded direct solve with a Robin condition at
r_max matching the phi_2 logarithmic slope; variation of constants

    u(r) = phi_1(r) int_r^inf f phi_2 w + phi_2(r) int_0^r f phi_1 w

is kept as an independent cross-check path.  At j = 1 the right-hand side
must be orthogonal to the kernel and the solution is projected onto the
complement.  phi_1 is used in plain arithmetic: with r_max <= 30 its
magnitude stays far below overflow, so no log-magnitude bookkeeping is
needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.linalg import solve_banded

from .errors import InwardIntegrationError, SolvabilityError
from .grids import GridFunction, RadialGrid
from .profiles import Profile, taylor_coefficients
from .spectral import assemble_radial_operator

__all__ = [
    "HomogeneousPair",
    "InverterResult",
    "homogeneous_pair",
    "solve_shifted",
    "variation_of_constants",
]


def _tail_exponent_c(profile: Profile, j: int) -> float:
    """Algebraic decay exponent of phi_2 for the given profile kind."""
    p = profile.p
    v_inf = p / (p - 1.0) if profile.kind == "constant_kappa" else 0.0
    return 2.0 * (1.0 / (p - 1.0) + j - v_inf)


def _potential_r2_coeff(profile: Profile) -> float:
    """Coefficient of the r^{-2} part of p Phi^{p-1} at infinity."""
    if profile.kind == "constant_kappa":
        return 0.0
    return profile.p * profile.c_inf ** (profile.p - 1.0)


@dataclass
class HomogeneousPair:
    """Independent homogeneous solutions with Wronskian normalization."""

    j: int
    grid: RadialGrid
    phi1: np.ndarray
    dphi1: np.ndarray
    phi2: np.ndarray
    dphi2: np.ndarray
    c: float  # phi_2 ~ r^{-c}

    def wronskian_product(self) -> np.ndarray:
        """r^2 e^{-r^2/4} (phi1' phi2 - phi2' phi1); identically 1 in exact
        arithmetic after normalization."""
        r = self.grid.nodes
        w = r * r * np.exp(-0.25 * r * r)
        return w * (self.dphi1 * self.phi2 - self.dphi2 * self.phi1)


def _hom_rhs(profile: Profile, j: int):
    p = profile.p

    def rhs(r, y):
        pot = 1.0 / (p - 1.0) + j - p * profile.value(r) ** (p - 1.0)
        return (y[1], (0.5 * r - 2.0 / r) * y[1] + pot * y[0])

    return rhs


def _integrate_outward(profile: Profile, j: int, grid: RadialGrid):
    """Axis-regular branch for j != 1, singular 1/r branch for j = 1."""
    p = profile.p
    r0 = 1e-4
    pot0 = 1.0 / (p - 1.0) + j - p * profile.value(0.0) ** (p - 1.0)
    if j != 1:
        # regular even series u = 1 + u2 r^2 + ...
        phi2_ax = taylor_coefficients([0.0], [profile.value(0.0)], [0.0], p, 2)[2, 0]
        v2 = pot0 / 6.0
        pot2 = -p * (p - 1.0) * profile.value(0.0) ** (p - 2.0) * phi2_ax
        v4 = ((1.0 + pot0) * v2 + pot2) / 20.0
        y0 = (1.0 + v2 * r0**2 + v4 * r0**4, 2.0 * v2 * r0 + 4.0 * v4 * r0**3)
    else:
        # singular branch u = 1/r + a1 r + ... (no log term in 3d)
        a1 = (pot0 - 0.5) / 2.0
        y0 = (1.0 / r0 + a1 * r0, -1.0 / r0**2 + a1)
    sol = solve_ivp(
        _hom_rhs(profile, j),
        (r0, grid.r_max),
        y0,
        method="DOP853",
        rtol=1e-12,
        atol=1e-300,
        dense_output=True,
    )
    r = grid.nodes
    vals = np.empty_like(r)
    dvals = np.empty_like(r)
    inside = r >= r0
    y = sol.sol(r[inside])
    vals[inside], dvals[inside] = y[0], y[1]
    if not inside.all():
        if j != 1:
            vals[0], dvals[0] = 1.0, 0.0
        else:  # singular at the axis: placeholder, never used in quadrature
            vals[0], dvals[0] = vals[1], dvals[1]
    return vals, dvals


def _integrate_inward(profile: Profile, j: int, grid: RadialGrid):
    c = _tail_exponent_c(profile, j)
    e1 = -c * (c - 1.0) - _potential_r2_coeff(profile)
    R = grid.r_max
    val = R ** (-c) * (1.0 + e1 / R**2)
    dval = -c * R ** (-c - 1.0) - (c + 2.0) * e1 * R ** (-c - 3.0)
    big = 1e12 * max(abs(val), 1.0) * (R / grid.nodes[1]) ** max(c + 2.0, 2.0)

    def blow(r, y):
        return abs(y[0]) - big

    blow.terminal = True
    sol = solve_ivp(
        _hom_rhs(profile, j),
        (R, grid.nodes[1]),
        (val, dval),
        method="DOP853",
        rtol=1e-12,
        atol=1e-300,
        events=blow,
        dense_output=True,
    )
    if sol.t_events[0].size:
        raise InwardIntegrationError(
            f"inward homogeneous solve for j={j} blew up at r={sol.t_events[0][0]:.3f}"
        )
    r = grid.nodes
    vals = np.empty_like(r)
    dvals = np.empty_like(r)
    y = sol.sol(r[1:])
    vals[1:], dvals[1:] = y[0], y[1]
    # axis column: generically ~ 1/r there; value excluded from quadratures
    vals[0], dvals[0] = vals[1], dvals[1]
    return vals, dvals


def homogeneous_pair(j: int, profile: Profile, grid: RadialGrid | None = None) -> HomogeneousPair:
    """Build (phi_1, phi_2) and normalize the Wronskian product to one."""
    if j < 0:
        raise ValueError("shift j must be nonnegative")
    grid = grid or RadialGrid.uniform(15.0, 0.0025)
    phi1, dphi1 = _integrate_outward(profile, j, grid)
    phi2, dphi2 = _integrate_inward(profile, j, grid)
    pair = HomogeneousPair(j, grid, phi1, dphi1, phi2, dphi2, _tail_exponent_c(profile, j))
    r = grid.nodes
    interior = (r >= 0.5) & (r <= grid.r_max - 2.0)
    scale = np.median(pair.wronskian_product()[interior])
    pair.phi2 /= scale
    pair.dphi2 /= scale
    return pair


def shift_kernels(profile: Profile, j: int, grid: RadialGrid) -> list[np.ndarray]:
    """Closed-form kernels of L_r + j.

    The shift j = 1 always carries the scaling mode.  The constant
    profile's spectrum is {-1, 0, 1, ...}, so its unshifted operator also
    has the exact polynomial kernel r^2 - 6; decaying profiles with a
    nondegenerate spectrum have trivial kernels for every other natural
    shift.
    """
    out = []
    if j == 1:
        out.append(_lam_phi_on(profile, grid))
    if j == 0 and profile.kind == "constant_kappa":
        out.append(grid.nodes**2 - 6.0)
    return out


@dataclass
class InverterResult:
    u: GridFunction
    j: int
    residual: float
    orth_defect: float


def _lam_phi_on(profile: Profile, grid: RadialGrid) -> np.ndarray:
    r = grid.nodes
    return profile.alpha * profile.value(r) + r * profile.dvalue(r)


def solve_shifted(
    f: GridFunction, j: int, profile: Profile, orth_tol: float = 1e-8
) -> InverterResult:
    """Banded direct solve of (L_r + j) u = f with the decay selection.

    The far boundary carries the Robin condition matching phi_2's
    logarithmic slope (first order; the Gaussian weight makes the
    committed error irrelevant).  For j = 1 the right side must satisfy
    |(f, LPhi)| <= orth_tol ||f|| in the weighted product, and the kernel
    component is removed from the solution.  For the constant profile the
    unshifted operator has the exact polynomial kernel r^2 - 6 (its
    spectrum contains zero); right side and solution are deflated against
    it the same way, since the discrete matrix is near-singular along that
    direction and would otherwise amplify roundoff.
    """
    grid: RadialGrid = f.grid
    op = assemble_radial_operator(profile, grid, shift=float(j))
    n = grid.n - 1
    h = grid.h

    c = _tail_exponent_c(profile, j)
    e1 = -c * (c - 1.0) - _potential_r2_coeff(profile)
    R = grid.r_max
    slope = -c / R - 2.0 * e1 / (R**3 * (1.0 + e1 / R**2))

    ab = np.zeros((3, grid.n))
    ab[0, 1:] = op.off_up
    ab[1, :] = op.diag
    ab[2, :-1] = op.off_lo
    rhs = f.values.copy()
    # Robin row: (u_N - u_{N-1})/h = slope * u_N
    ab[1, n] = 1.0 / h - slope
    ab[2, n - 1] = -1.0 / h
    rhs[n] = 0.0

    from .quadrature import radial_weights

    m = op.mass
    q = radial_weights(grid)  # 4th-order rule for the orthogonality bookkeeping
    kernels = shift_kernels(profile, j, grid)

    norm_f = np.sqrt(float(np.dot(q, f.values**2)))
    orth_defect = 0.0
    fv = f.values
    for ker in kernels:
        k_norm2 = float(np.dot(q, ker * ker))
        proj = float(np.dot(q, fv * ker))
        orth_defect = max(
            orth_defect, abs(proj) / max(norm_f * np.sqrt(k_norm2), 1e-300)
        )
        if orth_defect > orth_tol and norm_f > 1e-12:
            raise SolvabilityError(
                f"right-hand side not orthogonal to the shifted kernel: "
                f"defect {orth_defect:.2e} > {orth_tol:.0e}"
            )
        fv = fv - (proj / k_norm2) * ker
        rhs = fv.copy()
        rhs[n] = 0.0

    u = solve_banded((1, 1), ab, rhs)
    orth_u = 0.0
    for ker in kernels:
        # remove the kernel component (and the near-singular amplification)
        k_norm2 = float(np.dot(q, ker * ker))
        u = u - (float(np.dot(q, u * ker)) / k_norm2) * ker
        orth_u = max(
            orth_u,
            abs(float(np.dot(q, u * ker)))
            / max(np.sqrt(float(np.dot(q, u * u)) * k_norm2), 1e-300),
        )

    res_vec = op.apply(u) - fv
    res_vec[n] = 0.0  # boundary row replaced by the Robin condition
    residual = np.sqrt(float(np.dot(m, res_vec**2))) / max(norm_f, 1e-300)
    du = np.gradient(u, h, edge_order=2)
    out = GridFunction(grid, u, du)
    return InverterResult(out, j, residual, max(orth_u, orth_defect))


def variation_of_constants(
    f: GridFunction, pair: HomogeneousPair, profile: Profile
) -> np.ndarray:
    """Independent solution path through the homogeneous pair.

    u = phi_1 int_r^inf f phi_2 w + phi_2 int_0^r f phi_1 w, with the
    integrals truncated at r_max (the Gaussian weight makes the tail
    negligible) and evaluated by cumulative Simpson on the grid.
    """
    grid = pair.grid
    r = grid.nodes
    w = r * r * np.exp(-0.25 * r * r)
    g1 = f.values * pair.phi1 * w
    g2 = f.values * pair.phi2 * w
    inner = cumulative_simpson(g1, x=r, initial=0.0)
    # tail integral accumulated from the far end: its roundoff must stay
    # relative to the tail itself, since phi_1 amplifies any absolute error
    outer = cumulative_simpson(g2[::-1], x=-r[::-1], initial=0.0)[::-1]
    u = pair.phi1 * outer + pair.phi2 * inner
    u[0] = u[1]  # axis column of phi_2 is a placeholder
    if pair.j == 1:
        from .quadrature import radial_weights

        q = radial_weights(grid)
        lam = _lam_phi_on(profile, grid)
        u = u - (float(np.dot(q, u * lam)) / float(np.dot(q, lam * lam))) * lam
    return u
