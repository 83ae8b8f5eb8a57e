"""Weighted inner products and the coercivity diagnostics.

Measure conventions are set in :mod:`blowuplab.grids`: radial integrals use
r^2 e^{-r^2/4} dr, z-line integrals e^{-z^2/4} dz over the nodes as given,
and cylindrical integrals double the z >= 0 half-line.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, GridMismatchError
from .fd import cyl_gradient, cyl_laplacian
from .grids import CylGrid, GridFunction, LineGrid, RadialGrid, WeightKind

__all__ = [
    "weighted_inner",
    "weighted_norm",
    "radial_weights",
    "cyl_weights",
    "coercivity_ratio",
    "drift_laplacian_defect",
]


def radial_weights(grid: RadialGrid) -> np.ndarray:
    """Quadrature weights for int f r^2 e^{-r^2/4} dr on ``grid``."""
    return grid.mass_weights()


def cyl_weights(grid: CylGrid, kind: WeightKind) -> np.ndarray:
    """Quadrature weight matrix (n_r, n_z) for a cylindrical weight kind."""
    wr = grid.radial.mass_weights()
    z = grid.z_nodes
    wz = grid.z_quad_weights()
    if kind.kind == "rho_Y":
        wz = wz * np.exp(-0.25 * z * z)
    elif kind.kind == "nu_K":
        wz = wz / (1.0 + z ** (2 * kind.K))
    else:
        raise GridMismatchError(f"weight {kind.kind} not defined on a CylGrid")
    return np.outer(wr, wz)


def _line_weights(grid: LineGrid, kind: WeightKind) -> np.ndarray:
    z = grid.nodes
    w = grid.quad_weights()
    if kind.kind == "rho_z":
        return w * np.exp(-0.25 * z * z)
    if kind.kind == "nu_K":
        return w / (1.0 + z ** (2 * kind.K))
    raise GridMismatchError(f"weight {kind.kind} not defined on a LineGrid")


def weighted_inner(u: GridFunction, v: GridFunction, w: WeightKind) -> float:
    """Quadrature approximation of int u v (weight) (measure).

    Deterministic given the grid and the composite rule; raises
    GridMismatchError when the operands do not share a grid or the weight
    kind does not match the grid geometry.
    """
    if not u.same_grid(v):
        raise GridMismatchError("inner product operands must share a grid")
    grid = u.grid
    if isinstance(grid, RadialGrid):
        if w.kind != "rho_r":
            raise GridMismatchError(f"weight {w.kind} not defined on a RadialGrid")
        return float(np.dot(radial_weights(grid), u.values * v.values))
    if isinstance(grid, LineGrid):
        return float(np.dot(_line_weights(grid, w), u.values * v.values))
    return float(np.sum(cyl_weights(grid, w) * u.values * v.values))


def weighted_norm(u: GridFunction, w: WeightKind) -> float:
    return float(np.sqrt(max(weighted_inner(u, u, w), 0.0)))


def coercivity_ratio(u: GridFunction, K: int) -> float:
    """Hardy-type quotient with polynomial z-localization.

    Returns

        [ int nu_K |u|^2 (1+r^2) rho_r dY ] / [ int nu_K (|u|^2 + |grad u|^2) rho_r dY ]

    for a cylindrically symmetric ``u``; a uniform bound on this ratio over
    smooth decaying fields is what the property suite asserts.  The gradient
    is taken from stored derivative samples when present, else by
    fourth-order differences.
    """
    if not isinstance(u.grid, CylGrid):
        raise GridMismatchError("coercivity_ratio expects a cylindrical field")
    grid: CylGrid = u.grid
    w = cyl_weights(grid, WeightKind.nu_K(K))
    r = grid.radial.nodes[:, None]
    u2 = u.values**2
    num = float(np.sum(w * u2 * (1.0 + r * r)))
    ur, uz = cyl_gradient(u.values, grid.radial.h, grid.h_z)
    den = float(np.sum(w * (u2 + ur**2 + uz**2)))
    if den <= 0.0 or not np.isfinite(den):
        raise DegenerateInputError("zero or non-finite denominator in coercivity ratio")
    return num / den


def drift_laplacian_defect(u: GridFunction) -> tuple[float, float, float]:
    """Quadratures entering the drifted-Laplacian control estimate.

    Returns (||Delta u||^2, ||-Delta u + (1/2) Y.grad u||^2, ||u||_{H^1}^2),
    all in the Gaussian cylindrical measure; the property suite asserts

        ||Delta u||^2 <= 2 ||-Delta u + (1/2) Y.grad u||^2 + C ||u||_{H^1}^2

    with a constant C calibrated once.
    """
    if not isinstance(u.grid, CylGrid):
        raise GridMismatchError("drift_laplacian_defect expects a cylindrical field")
    grid: CylGrid = u.grid
    w = cyl_weights(grid, WeightKind.rho_Y())
    r, z = grid.meshes()
    lap = cyl_laplacian(u.values, grid.radial.nodes, grid.radial.h, grid.h_z)
    ur, uz = cyl_gradient(u.values, grid.radial.h, grid.h_z)
    drift = -lap + 0.5 * (r * ur + z * uz)
    lap_sq = float(np.sum(w * lap**2))
    drift_sq = float(np.sum(w * drift**2))
    h1_sq = float(np.sum(w * (u.values**2 + ur**2 + uz**2)))
    return lap_sq, drift_sq, h1_sq
