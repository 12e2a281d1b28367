"""Computational domain: geometry, staggered layout, masks and quadrature.

Layout (TM polarization, uniform spacing h):

* ``Dz`` and ``theta`` on nodes ``(i, j)``, arrays of shape ``(nx+1, ny+1)``;
* ``Bx`` on x-faces ``(i, j+1/2)``, shape ``(nx+1, ny)``;
* ``By`` on y-faces ``(i+1/2, j)``, shape ``(nx, ny+1)``.

Array axis 0 is x, axis 1 is y. Row blocks for threading split axis 0.

On the annulus two node masks are kept: ``interior`` (theta, quadrature) holds
every node strictly inside, ``field_interior`` (Dz) only those more than half a
cell from either circle. Faces carry weight h^2 exactly when they touch a
``field_interior`` node.
"""

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import ConfigError
from .parallel import SERIAL, GridPool

RECTANGLE = "rectangle"
ANNULUS = "annulus"
DOMAIN_KINDS = (RECTANGLE, ANNULUS)

ANNULUS_R_INNER = 1.0
ANNULUS_R_OUTER = math.sqrt(2.0)

NODE_EXTERIOR = 0
NODE_BOUNDARY = 1
NODE_INTERIOR = 2

MIN_CELLS = 8

# inset of the annulus conductor, in cells
FIELD_INSET = 0.5

# arm order for the heat stencil: +x, -x, +y, -y
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Domain:
    kind: str
    n: int
    nx: int
    ny: int
    h: float
    x: np.ndarray
    y: np.ndarray
    node_kind: np.ndarray
    quad_weights: np.ndarray
    face_weights_x: np.ndarray
    face_weights_y: np.ndarray
    arms: np.ndarray
    field_mask: np.ndarray
    width: float
    height: float

    def __repr__(self):
        return f"Domain(kind={self.kind!r}, nx={self.nx}, ny={self.ny}, h={self.h:.6g})"

    @property
    def interior(self) -> np.ndarray:
        return self.node_kind == NODE_INTERIOR

    @property
    def field_interior(self) -> np.ndarray:
        """Nodes where Dz may be nonzero; a subset of ``interior``."""
        return self.field_mask

    @property
    def boundary(self) -> np.ndarray:
        return self.node_kind == NODE_BOUNDARY

    @property
    def node_shape(self) -> Tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @property
    def bx_shape(self) -> Tuple[int, int]:
        return (self.nx + 1, self.ny)

    @property
    def by_shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny + 1)

    @property
    def n_interior(self) -> int:
        return int(np.count_nonzero(self.interior))

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def face_coordinates(self):
        """((X, Y) of x-faces, (X, Y) of y-faces)."""
        ym = 0.5 * (self.y[:-1] + self.y[1:])
        xm = 0.5 * (self.x[:-1] + self.x[1:])
        return np.meshgrid(self.x, ym, indexing="ij"), np.meshgrid(xm, self.y, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.node_shape)

    def face_zeros(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.zeros(self.bx_shape), np.zeros(self.by_shape)

    def apply_mask(self, field: np.ndarray) -> np.ndarray:
        """Zero every non-interior node (discrete n^D = 0 and theta = 0)."""
        return np.where(self.interior, field, 0.0)

    def is_boundary_clean(self, field: np.ndarray) -> bool:
        return not np.any(field[~self.interior])

    def apply_field_mask(self, field: np.ndarray) -> np.ndarray:
        """Zero Dz outside the staircase conductor."""
        return np.where(self.field_mask, field, 0.0)

    def is_field_clean(self, field: np.ndarray) -> bool:
        return not np.any(field[~self.field_mask])

    def mask_symmetries(self) -> Dict[str, bool]:
        """Which grid symmetries leave the node classification unchanged."""
        out = {"reflect_x": bool(np.array_equal(self.node_kind, self.node_kind[::-1, :])),
               "reflect_y": bool(np.array_equal(self.node_kind, self.node_kind[:, ::-1]))}
        out["transpose"] = self.nx == self.ny and bool(np.array_equal(self.node_kind, self.node_kind.T))
        return out

    @property
    def area(self) -> float:
        return integrate_nodal(np.ones(self.node_shape), self)


def _annulus_inside(x, y):
    r2 = x * x + y * y
    return (r2 > ANNULUS_R_INNER ** 2) & (r2 < ANNULUS_R_OUTER ** 2)


def _classify(interior: np.ndarray) -> np.ndarray:
    node_kind = np.full(interior.shape, NODE_EXTERIOR, dtype=np.int8)
    near = np.zeros_like(interior)
    near[1:, :] |= interior[:-1, :]
    near[:-1, :] |= interior[1:, :]
    near[:, 1:] |= interior[:, :-1]
    near[:, :-1] |= interior[:, 1:]
    node_kind[near] = NODE_BOUNDARY
    node_kind[interior] = NODE_INTERIOR
    return node_kind


def _neighbour_interior(interior: np.ndarray, di: int, dj: int) -> np.ndarray:
    out = np.zeros_like(interior)
    nx1, ny1 = interior.shape
    src_i = slice(max(di, 0), nx1 + min(di, 0))
    dst_i = slice(max(-di, 0), nx1 + min(-di, 0))
    src_j = slice(max(dj, 0), ny1 + min(dj, 0))
    dst_j = slice(max(-dj, 0), ny1 + min(-dj, 0))
    out[dst_i, dst_j] = interior[src_i, src_j]
    return out


def _annulus_arms(X, Y, interior, h):
    """Distance along each grid direction to the circle crossing, for interior
    nodes whose neighbour in that direction is not interior."""
    arms = np.full((4,) + X.shape, h)
    for k, (di, dj) in enumerate(DIRECTIONS):
        cut = interior & ~_neighbour_interior(interior, di, dj)
        if not cut.any():
            continue
        x, y = X[cut], Y[cut]
        b = x * di + y * dj
        r2 = x * x + y * y
        best = np.full(x.shape, np.inf)
        for radius2 in (ANNULUS_R_INNER ** 2, ANNULUS_R_OUTER ** 2):
            disc = b * b - (r2 - radius2)
            ok = disc >= 0
            root = np.sqrt(np.where(ok, disc, 0.0))
            for s in (-b - root, -b + root):
                hit = ok & (s > 0) & (s <= h * (1 + 1e-12))
                best = np.where(hit & (s < best), s, best)
        best = np.where(np.isfinite(best), best, h)
        arms[k][cut] = np.clip(best, h / 100.0, h)
    return arms


def build_domain(kind: str, n: int, width: float = 1.0, height: float = 1.0) -> Domain:
    """Build a rectangle ``[0, width] x [0, height]`` or the annulus 1 < x^2+y^2 < 2.

    Parameters
    ----------
    kind : str
        ``"rectangle"`` or ``"annulus"``.
    n : int
        Cells per side (along x for the rectangle, across the bounding box for
        the annulus). Must be at least 8.
    width, height : float
        Rectangle extent; ignored for the annulus. ``height`` must be an integer
        multiple of the spacing ``width / n``.
    """
    if kind not in DOMAIN_KINDS:
        raise ConfigError(f"unknown domain kind {kind!r}, expected one of {DOMAIN_KINDS}", key="domain.kind")
    if int(n) != n or n < MIN_CELLS:
        raise ConfigError(f"need at least {MIN_CELLS} cells per side, got {n!r}", key="domain.n")
    n = int(n)

    if kind == RECTANGLE:
        if not (width > 0 and height > 0):
            raise ConfigError(f"rectangle extent must be positive, got {width}x{height}", key="domain")
        h = width / n
        ny = int(round(height / h))
        if ny < 2 or abs(ny * h - height) > 1e-9 * height:
            raise ConfigError(f"height {height} is not a multiple of h={h}", key="domain.height")
        nx = n
        x = h * np.arange(nx + 1)
        y = h * np.arange(ny + 1)
        interior = np.zeros((nx + 1, ny + 1), dtype=bool)
        interior[1:-1, 1:-1] = True
        node_kind = np.where(interior, NODE_INTERIOR, NODE_BOUNDARY).astype(np.int8)

        # dual-cell areas: half cells on edges, quarter cells at corners
        wx = np.full(nx + 1, h)
        wx[[0, -1]] = h / 2
        wy = np.full(ny + 1, h)
        wy[[0, -1]] = h / 2
        quad = np.outer(wx, wy)
        face_x = np.outer(wx, np.full(ny, h))
        face_y = np.outer(np.full(nx, h), wy)
        arms = np.full((4, nx + 1, ny + 1), h)
        field = interior
    else:
        nx = ny = n
        h = 2.0 * ANNULUS_R_OUTER / n
        # centred so that x -> -x and x <-> y map the grid onto itself exactly
        x = h * (np.arange(nx + 1) - n / 2.0)
        y = x.copy()
        width = height = 2.0 * ANNULUS_R_OUTER
        X, Y = np.meshgrid(x, y, indexing="ij")
        interior = _annulus_inside(X, Y)
        interior[[0, -1], :] = False
        interior[:, [0, -1]] = False
        node_kind = _classify(interior)
        quad = np.where(interior, h * h, 0.0)

        # Dz lives half a cell inside each circle so the faces around it do not
        # overhang the annulus
        R = np.hypot(X, Y)
        field = interior & (R > ANNULUS_R_INNER + FIELD_INSET * h) & (R < ANNULUS_R_OUTER - FIELD_INSET * h)
        face_x = np.where(field[:, :-1] | field[:, 1:], h * h, 0.0)
        face_y = np.where(field[:-1, :] | field[1:, :], h * h, 0.0)
        arms = _annulus_arms(X, Y, interior, h)

    return Domain(
        kind=kind,
        n=n,
        nx=nx,
        ny=ny,
        h=h,
        x=_frozen(x),
        y=_frozen(y),
        node_kind=_frozen(node_kind),
        quad_weights=_frozen(quad),
        face_weights_x=_frozen(face_x),
        face_weights_y=_frozen(face_y),
        arms=_frozen(arms),
        field_mask=_frozen(field),
        width=float(width),
        height=float(height),
    )


def integrate_nodal(field: np.ndarray, dom: Domain, pool: GridPool = SERIAL) -> float:
    """Quadrature of a nodal field: sum of field * quad_weights in fixed row order."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != dom.node_shape:
        raise ValueError(f"nodal field has shape {field.shape}, expected {dom.node_shape}")
    return pool.weighted_sum(field, dom.quad_weights)


def integrate_faces(fx: np.ndarray, fy: np.ndarray, dom: Domain, pool: GridPool = SERIAL) -> float:
    """Quadrature of a face-centred quantity given by its x-face and y-face parts."""
    return pool.weighted_sum(fx, dom.face_weights_x) + pool.weighted_sum(fy, dom.face_weights_y)
