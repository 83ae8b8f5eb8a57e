"""Hot numeric kernels: batched tridiagonal sweeps and stencil updates.

Each kernel has a numba-compiled implementation and a pure-numpy fallback
(vectorized across the batch dimension); :mod:`blowuplab._accel` selects
between them via the ``BLOWUPLAB_DISABLE_NUMBA`` environment flag.  The
alternating-direction implicit stepper calls these once per direction per
time step, so they dominate the simulation runtime.  benchmarks/bench_kernels.py
compares the two paths.
"""

from __future__ import annotations

import numpy as np

from ._accel import NUMBA_ENABLED, njit, prange

__all__ = ["thomas_factor", "thomas_solve_many", "grad_even", "lap_even_cyl", "NUMBA_ENABLED"]


def thomas_factor(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray):
    """Precompute the forward-elimination factors of a tridiagonal matrix.

    ``lower[i]`` couples row i to i-1 (lower[0] unused), ``upper[i]`` row i
    to i+1 (upper[-1] unused).  Returns (cp, denom) reused by every solve
    against the same matrix.
    """
    n = diag.size
    cp = np.zeros(n)
    denom = np.zeros(n)
    denom[0] = diag[0]
    cp[0] = upper[0] / denom[0]
    for i in range(1, n):
        denom[i] = diag[i] - lower[i] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / denom[i]
    return cp, denom


def _thomas_solve_many_numpy(lower, cp, denom, rhs):
    """Solve along axis 0 for a batch of right-hand sides (n, m)."""
    n, m = rhs.shape
    dp = np.empty_like(rhs)
    dp[0] = rhs[0] / denom[0]
    for i in range(1, n):
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom[i]
    x = np.empty_like(rhs)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


if NUMBA_ENABLED:

    @njit(parallel=True, cache=True)
    def _thomas_solve_rows_numba(lower, cp, denom, rhs_t):  # pragma: no cover
        m, n = rhs_t.shape
        x = np.empty_like(rhs_t)
        for col in prange(m):
            row = rhs_t[col]
            out = x[col]
            out[0] = row[0] / denom[0]
            for i in range(1, n):
                out[i] = (row[i] - lower[i] * out[i - 1]) / denom[i]
            for i in range(n - 2, -1, -1):
                out[i] = out[i] - cp[i] * out[i + 1]
        return x


def thomas_solve_many(lower, cp, denom, rhs):
    """Batched tridiagonal solve; the batch runs along axis 1.

    The compiled path works on the transposed array so every thread sweeps
    a contiguous row (the solve direction is the fast axis in memory).
    """
    if NUMBA_ENABLED:
        return np.ascontiguousarray(
            _thomas_solve_rows_numba(lower, cp, denom, np.ascontiguousarray(rhs.T)).T
        )
    return _thomas_solve_many_numpy(lower, cp, denom, rhs)


# ---------------------------------------------------------------------------
# fused fourth-order stencils for even cylindrical fields
#
# Both directions mirror across the inner edge (the fields are even in r
# and in z) and fall back to one-sided stencils of the same order at the
# outer two rows.  The numpy fallbacks build the same values from padded
# slicing; the numba versions fuse the directional sweeps into one pass.
# ---------------------------------------------------------------------------


def _grad_even_numpy(U, h_r, h_z):
    from .fd import diff1

    ext_r = np.concatenate([U[2:0:-1, :], U], axis=0)
    ext_z = np.concatenate([U[:, 2:0:-1], U], axis=1)
    return diff1(ext_r, h_r, axis=0)[2:, :], diff1(ext_z, h_z, axis=1)[:, 2:]


def _lap_even_numpy(U, r, h_r, h_z):
    from .fd import diff1, diff2

    ext_r = np.concatenate([U[2:0:-1, :], U], axis=0)
    urr = diff2(ext_r, h_r, axis=0)[2:, :]
    ur = diff1(ext_r, h_r, axis=0)[2:, :]
    ext_z = np.concatenate([U[:, 2:0:-1], U], axis=1)
    uzz = diff2(ext_z, h_z, axis=1)[:, 2:]
    out = urr + uzz
    out[1:, :] += 2.0 * ur[1:, :] / r[1:, None]
    out[0, :] += 2.0 * urr[0, :]
    return out


if NUMBA_ENABLED:

    @njit(cache=True, inline="always")
    def _d1_at(u, h, k, n):  # pragma: no cover - numba
        if k == 0:
            return 0.0
        if k == 1:
            return (-u[3] + 8.0 * u[2] - 8.0 * u[0] + u[1]) / (12.0 * h)
        if k < n - 2:
            return (-u[k + 2] + 8.0 * u[k + 1] - 8.0 * u[k - 1] + u[k - 2]) / (12.0 * h)
        if k == n - 2:
            return (
                3.0 * u[n - 1]
                + 10.0 * u[n - 2]
                - 18.0 * u[n - 3]
                + 6.0 * u[n - 4]
                - u[n - 5]
            ) / (12.0 * h)
        return (
            25.0 * u[n - 1]
            - 48.0 * u[n - 2]
            + 36.0 * u[n - 3]
            - 16.0 * u[n - 4]
            + 3.0 * u[n - 5]
        ) / (12.0 * h)

    @njit(cache=True, inline="always")
    def _d2_at(u, h, k, n):  # pragma: no cover - numba
        h2 = 12.0 * h * h
        if k == 0:
            return (-2.0 * u[2] + 32.0 * u[1] - 30.0 * u[0]) / h2
        if k == 1:
            return (-u[3] + 16.0 * u[2] - 31.0 * u[1] + 16.0 * u[0]) / h2
        if k < n - 2:
            return (
                -u[k + 2] + 16.0 * u[k + 1] - 30.0 * u[k] + 16.0 * u[k - 1] - u[k - 2]
            ) / h2
        if k == n - 2:
            return (
                11.0 * u[n - 1]
                - 20.0 * u[n - 2]
                + 6.0 * u[n - 3]
                + 4.0 * u[n - 4]
                - u[n - 5]
            ) / h2
        return (
            35.0 * u[n - 1]
            - 104.0 * u[n - 2]
            + 114.0 * u[n - 3]
            - 56.0 * u[n - 4]
            + 11.0 * u[n - 5]
        ) / h2

    @njit(parallel=True, cache=True)
    def _d1_rows_numba(U, h):  # pragma: no cover - numba
        m, n = U.shape
        out = np.empty_like(U)
        for i in prange(m):
            row = U[i]
            orow = out[i]
            for k in range(n):
                orow[k] = _d1_at(row, h, k, n)
        return out

    @njit(parallel=True, cache=True)
    def _d2_rows_numba(U, h):  # pragma: no cover - numba
        m, n = U.shape
        out = np.empty_like(U)
        for i in prange(m):
            row = U[i]
            orow = out[i]
            for k in range(n):
                orow[k] = _d2_at(row, h, k, n)
        return out

    @njit(parallel=True, cache=True)
    def _radial_rows_numba(Ut, r, h):  # pragma: no cover - numba
        m, n = Ut.shape
        out = np.empty_like(Ut)
        for k in prange(m):
            row = Ut[k]
            orow = out[k]
            orow[0] = 3.0 * _d2_at(row, h, 0, n)
            for i in range(1, n):
                orow[i] = _d2_at(row, h, i, n) + 2.0 * _d1_at(row, h, i, n) / r[i]
        return out


def grad_even(U, h_r, h_z):
    """(d_r U, d_z U) for a field even across both inner edges.

    Compiled path: row sweeps in z on the array itself and in r on its
    transpose, so both directions run along contiguous memory.
    """
    if NUMBA_ENABLED:
        uz = _d1_rows_numba(np.ascontiguousarray(U), h_z)
        ur = np.ascontiguousarray(
            _d1_rows_numba(np.ascontiguousarray(U.T), h_r).T
        )
        return ur, uz
    return _grad_even_numpy(U, h_r, h_z)


def lap_even_cyl(U, r, h_r, h_z):
    """Cylindrical Laplacian d_rr + (2/r) d_r + d_zz of an even field."""
    if NUMBA_ENABLED:
        uzz = _d2_rows_numba(np.ascontiguousarray(U), h_z)
        rad_t = _radial_rows_numba(np.ascontiguousarray(U.T), r, h_r)
        uzz += rad_t.T
        return uzz
    return _lap_even_numpy(U, r, h_r, h_z)
