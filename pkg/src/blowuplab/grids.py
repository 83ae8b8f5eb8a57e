"""Grids, grid functions and weight descriptors.

Global measure convention
-------------------------
All four-dimensional integrals are reduced, for functions with even
cylindrical symmetry, to

    ∫_{R^4} f dY  ->  ∫∫ f(r, z) r^2 dr dz ,

i.e. the angular constant 4π is dropped uniformly and z-integrals over the
half-line z >= 0 carry an explicit factor 2 (every function in the even
symmetry class is even in z).  Since every quantity the package tests is a
ratio, an orthogonality relation or a law fitted in log scale, the dropped
constant never matters; it is fixed here once and used consistently
everywhere.

Quadrature is composite Simpson on the uniform grids (with a 3/8 correction
when the interval count is odd); the Gaussian weights absorb truncation at
the grid edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError

__all__ = [
    "RadialGrid",
    "LineGrid",
    "CylGrid",
    "GridFunction",
    "WeightKind",
    "composite_weights",
]


def composite_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson quadrature weights for ``n`` uniform nodes.

    For an even interval count this is plain composite Simpson (fourth
    order).  For an odd count the last three intervals use the Simpson 3/8
    rule so the full rule keeps its order.  ``n`` <= 2 degrades to the
    trapezoid rule.
    """
    if n < 2:
        return np.full(n, h)
    if n == 2:
        return np.array([0.5 * h, 0.5 * h])
    w = np.zeros(n)
    m = n - 1  # interval count
    if m % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= h / 3.0
    else:
        # Simpson on the first m-3 intervals, 3/8 on the final three.
        if m == 3:
            w[:] = np.array([3.0, 9.0, 9.0, 3.0]) * (h / 8.0)
        else:
            w[: n - 3] = composite_weights(n - 3, h)
            w[n - 4 :] += np.array([3.0, 9.0, 9.0, 3.0]) * (h / 8.0)
    return w


def _uniform_nodes(stop: float, h: float, start: float = 0.0) -> np.ndarray:
    n = int(round((stop - start) / h))
    if not np.isclose(start + n * h, stop, rtol=0, atol=1e-9 * max(1.0, abs(stop))):
        raise ValueError(f"span [{start}, {stop}] is not a multiple of h={h}")
    return start + h * np.arange(n + 1)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid on [0, r_max].

    The truncation radius must satisfy r_max >= 12 so that the Gaussian
    weight e^{-r^2/4} is below 1e-15 at the edge and truncation is
    negligible against every tolerance used downstream.
    """

    nodes: np.ndarray
    spacing: str = "uniform"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("radial grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise ValueError("radial grid must start at r = 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("radial nodes must be strictly increasing")
        if nodes[-1] < 12.0:
            raise ValueError("r_max must be >= 12 (weight negligible at truncation)")

    @classmethod
    def uniform(cls, r_max: float = 15.0, h: float = 0.02) -> "RadialGrid":
        return cls(_uniform_nodes(r_max, h))

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def h(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @property
    def n(self) -> int:
        return self.nodes.size

    def quad_weights(self) -> np.ndarray:
        """Bare quadrature weights (no measure factor)."""
        if self.spacing == "uniform":
            return composite_weights(self.n, self.h)
        w = np.zeros(self.n)  # trapezoid for graded grids
        d = np.diff(self.nodes)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        return w

    def mass_weights(self) -> np.ndarray:
        """Quadrature weights for the radial measure r^2 e^{-r^2/4} dr."""
        r = self.nodes
        return self.quad_weights() * r * r * np.exp(-0.25 * r * r)


@dataclass(frozen=True)
class LineGrid:
    """Uniform one-dimensional grid, possibly spanning negative coordinates.

    Used for z-line work (Hermite orthogonality and the like) where both
    signs of z are sampled explicitly and no parity assumption is made.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("line grid needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("line nodes must be strictly increasing")

    @classmethod
    def symmetric(cls, z_max: float = 20.0, h: float = 0.02) -> "LineGrid":
        return cls(_uniform_nodes(z_max, h, start=-z_max))

    @property
    def h(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @property
    def n(self) -> int:
        return self.nodes.size

    def quad_weights(self) -> np.ndarray:
        return composite_weights(self.n, self.h)


@dataclass(frozen=True)
class CylGrid:
    """Tensor grid for even cylindrically symmetric functions of (r, z).

    Only z >= 0 is stored; integrals double the z-half-line contribution.
    Fields on this grid are arrays of shape (n_r, n_z).
    """

    radial: RadialGrid
    z_nodes: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z_nodes, dtype=float)
        object.__setattr__(self, "z_nodes", z)
        if z.ndim != 1 or z.size < 2:
            raise ValueError("cylindrical grid needs at least two z nodes")
        if z[0] != 0.0:
            raise ValueError("z grid must start at z = 0 (even symmetry)")
        if np.any(np.diff(z) <= 0):
            raise ValueError("z nodes must be strictly increasing")

    @classmethod
    def uniform(
        cls,
        r_max: float = 15.0,
        h_r: float = 0.02,
        z_max: float = 40.0,
        h_z: float = 0.02,
    ) -> "CylGrid":
        return cls(RadialGrid.uniform(r_max, h_r), _uniform_nodes(z_max, h_z))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.radial.n, self.z_nodes.size)

    @property
    def h_z(self) -> float:
        return float(self.z_nodes[1] - self.z_nodes[0])

    @property
    def z_max(self) -> float:
        return float(self.z_nodes[-1])

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        """(r, z) meshes of shape (n_r, n_z)."""
        return np.meshgrid(self.radial.nodes, self.z_nodes, indexing="ij")

    def z_quad_weights(self) -> np.ndarray:
        """z-line quadrature weights including the even-symmetry doubling."""
        return 2.0 * composite_weights(self.z_nodes.size, self.h_z)


@dataclass(frozen=True)
class WeightKind:
    """Weight descriptor: one of rho_r, rho_z, rho_Y, nu_K.

    ``nu_K`` denotes the mixed measure nu_K(z) rho_r(r): polynomial
    localization 1/(1+z^{2K}) in z, Gaussian in r only.
    """

    kind: str
    K: int = 0

    _KINDS = ("rho_r", "rho_z", "rho_Y", "nu_K")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "nu_K" and self.K < 1:
            raise ValueError("nu_K requires K >= 1")

    @classmethod
    def rho_r(cls) -> "WeightKind":
        return cls("rho_r")

    @classmethod
    def rho_z(cls) -> "WeightKind":
        return cls("rho_z")

    @classmethod
    def rho_Y(cls) -> "WeightKind":
        return cls("rho_Y")

    @classmethod
    def nu_K(cls, K: int) -> "WeightKind":
        return cls("nu_K", K)


@dataclass(frozen=True)
class GridFunction:
    """Samples of a function on a grid, with optional derivative samples.

    For radial functions the even extension at the axis is implied: the
    first derivative vanishes at r = 0.
    """

    grid: RadialGrid | LineGrid | CylGrid
    values: np.ndarray
    dvalues: np.ndarray | None = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        expected = (
            self.grid.shape if isinstance(self.grid, CylGrid) else (self.grid.n,)
        )
        if values.shape != expected:
            raise GridMismatchError(
                f"values shape {values.shape} does not match grid shape {expected}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        if self.dvalues is not None:
            d = np.asarray(self.dvalues, dtype=float)
            object.__setattr__(self, "dvalues", d)
            if d.shape != values.shape:
                raise GridMismatchError("derivative samples shape mismatch")

    def same_grid(self, other: "GridFunction") -> bool:
        if type(self.grid) is not type(other.grid):
            return False
        if isinstance(self.grid, CylGrid):
            return self.grid.shape == other.grid.shape and np.array_equal(
                self.grid.radial.nodes, other.grid.radial.nodes
            ) and np.array_equal(self.grid.z_nodes, other.grid.z_nodes)
        return np.array_equal(self.grid.nodes, other.grid.nodes)
