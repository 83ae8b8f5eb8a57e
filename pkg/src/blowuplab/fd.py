"""Finite-difference stencils on uniform grids.

Fourth-order central differences in the interior with one-sided stencils of
the same order at the edges.  These operate along a chosen axis of an array
so the same code serves radial lines and z-lines of cylindrical fields.
"""

from __future__ import annotations

import numpy as np

__all__ = ["diff1", "diff2", "cyl_gradient", "cyl_laplacian"]

# one-sided 4th/5-point first-derivative stencil at the boundary rows
_D1_EDGE = np.array(
    [
        [-25.0, 48.0, -36.0, 16.0, -3.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0],
    ]
) / 12.0
# one-sided second-derivative stencils (order 3 at the two edge rows)
_D2_EDGE = np.array(
    [
        [35.0, -104.0, 114.0, -56.0, 11.0],
        [11.0, -20.0, 6.0, 4.0, -1.0],
    ]
) / 12.0


def _apply_edge(out, values, table, h, axis, power):
    v = np.moveaxis(values, axis, 0)
    o = np.moveaxis(out, axis, 0)
    scale = h**power
    for row, coeffs in enumerate(table):
        o[row] = sum(c * v[k] for k, c in enumerate(coeffs)) / scale
        o[-1 - row] = (
            sum(((-1) ** power) * c * v[-1 - k] for k, c in enumerate(coeffs)) / scale
        )


def diff1(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Fourth-order first derivative along ``axis``."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    out = np.empty_like(v)
    out[2:-2] = (-v[4:] + 8.0 * v[3:-1] - 8.0 * v[1:-3] + v[:-4]) / (12.0 * h)
    res = np.moveaxis(out, 0, axis)
    _apply_edge(res, np.moveaxis(v, 0, axis), _D1_EDGE, h, axis, 1)
    return res


def diff2(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Fourth-order second derivative along ``axis``."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    out = np.empty_like(v)
    out[2:-2] = (
        -v[4:] + 16.0 * v[3:-1] - 30.0 * v[2:-2] + 16.0 * v[1:-3] - v[:-4]
    ) / (12.0 * h * h)
    res = np.moveaxis(out, 0, axis)
    _apply_edge(res, np.moveaxis(v, 0, axis), _D2_EDGE, h, axis, 2)
    return res


def cyl_gradient(values: np.ndarray, h_r: float, h_z: float):
    """(d_r u, d_z u) for a field of shape (n_r, n_z)."""
    return diff1(values, h_r, axis=0), diff1(values, h_z, axis=1)


def cyl_laplacian(values: np.ndarray, r: np.ndarray, h_r: float, h_z: float):
    """Cylindrical Laplacian d_rr + (2/r) d_r + d_zz of an even field.

    At the axis the even extension gives (2/r) d_r -> 2 d_rr, so the full
    radial part equals 3 d_rr there.
    """
    u_rr = diff2(values, h_r, axis=0)
    u_r = diff1(values, h_r, axis=0)
    out = u_rr + diff2(values, h_z, axis=1)
    out[1:] += 2.0 * u_r[1:] / r[1:, None]
    out[0] += 2.0 * u_rr[0]
    return out
