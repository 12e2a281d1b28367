"""Discrete curl operators, energies and field snapshots.

The two curls are built as exact adjoints of each other under the node and
face quadratures of the domain:

    <curl_B(B), D>_nodes == <B, curl_D(D)>_faces   for every D vanishing off field_interior,

which is the discrete counterpart of the Green formula for H_0(curl). The whole
energy bookkeeping of the solvers rests on it.
"""

from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .data_types import FieldState
from .domain import NODE_EXTERIOR, Domain, integrate_faces, integrate_nodal
from .parallel import SERIAL, GridPool

FaceField = Tuple[np.ndarray, np.ndarray]

SNAPSHOT_COLUMNS = ("x", "y", "Dz", "Bx_interp", "By_interp", "theta")
CSV_FMT = "%.17g"


def curl_D(Dz: np.ndarray, dom: Domain, pool: GridPool = SERIAL) -> FaceField:
    """Curl of the out-of-plane field Dz, returned on the faces.

    x-part at (i, j+1/2): (Dz[i, j+1] - Dz[i, j]) / h
    y-part at (i+1/2, j): -(Dz[i+1, j] - Dz[i, j]) / h
    """
    h = dom.h
    cx = np.empty(dom.bx_shape)
    cy = np.empty(dom.by_shape)
    nx = dom.nx

    def kernel(rows):
        cx[rows] = (Dz[rows, 1:] - Dz[rows, :-1]) / h
        lo, hi = rows.start, min(rows.stop, nx)
        if hi > lo:
            cy[lo:hi] = (Dz[lo:hi] - Dz[lo + 1:hi + 1]) / h

    pool.run(kernel, nx + 1)
    return cx, cy


def curl_B(Bx: np.ndarray, By: np.ndarray, dom: Domain, pool: GridPool = SERIAL) -> np.ndarray:
    """Scalar curl of the in-plane face field, on nodes; zero off ``field_interior``."""
    h = dom.h
    out = np.zeros(dom.node_shape)
    interior = dom.field_interior
    nx = dom.nx

    def kernel(rows):
        lo, hi = max(rows.start, 1), min(rows.stop, nx)
        if hi <= lo:
            return
        value = (By[lo:hi, 1:-1] - By[lo - 1:hi - 1, 1:-1]) / h - (Bx[lo:hi, 1:] - Bx[lo:hi, :-1]) / h
        out[lo:hi, 1:-1] = np.where(interior[lo:hi, 1:-1], value, 0.0)

    pool.run(kernel, nx + 1)
    return out


def inner_nodes(a: np.ndarray, b: np.ndarray, dom: Domain, pool: GridPool = SERIAL) -> float:
    return integrate_nodal(a * b, dom, pool)


def inner_faces(a: FaceField, b: FaceField, dom: Domain, pool: GridPool = SERIAL) -> float:
    return integrate_faces(a[0] * b[0], a[1] * b[1], dom, pool)


def field_energy(Dz, Bx, By, dom: Domain, eps: float, mu: float, pool: GridPool = SERIAL) -> float:
    """1/2 [ (1/eps) |Dz|^2 + (1/mu) |B|^2 ] with node and face quadrature."""
    electric = integrate_nodal(Dz * Dz, dom, pool)
    magnetic = integrate_faces(Bx * Bx, By * By, dom, pool)
    return 0.5 * (electric / eps + magnetic / mu)


def total_energy(state: FieldState, dom: Domain, eps: float, mu: float, pool: GridPool = SERIAL) -> float:
    """E = 1/2 int [D^2/eps + B^2/mu] for the fields stored in ``state``."""
    return field_energy(state.Dz, state.Bx, state.By, dom, eps, mu, pool)


def staggered_energy(Dz, B_prev: FaceField, B_next: FaceField, dom: Domain, eps: float, mu: float,
                     pool: GridPool = SERIAL) -> float:
    """Leapfrog energy 1/2 [ (1/eps)|D^n|^2 + (1/mu) <B^{n-1/2}, B^{n+1/2}> ].

    Exactly conserved by the scheme when the conductivity and the source vanish.
    """
    electric = integrate_nodal(Dz * Dz, dom, pool)
    magnetic = integrate_faces(B_prev[0] * B_next[0], B_prev[1] * B_next[1], dom, pool)
    return 0.5 * (electric / eps + magnetic / mu)


def synchronized_b(state: FieldState, dom: Domain, dt: float, eps: float, pool: GridPool = SERIAL) -> FaceField:
    """B at the integer time of ``state``: B^{n-1/2} advanced by half a step."""
    cx, cy = curl_D(state.Dz, dom, pool)
    c = 0.5 * dt / eps
    return state.Bx - c * cx, state.By - c * cy


def faces_to_nodes(Bx: np.ndarray, By: np.ndarray) -> FaceField:
    """Average face values onto nodes; one-sided on the outer rows. For output only."""
    bx = np.empty((Bx.shape[0], Bx.shape[1] + 1))
    bx[:, 1:-1] = 0.5 * (Bx[:, :-1] + Bx[:, 1:])
    bx[:, 0] = Bx[:, 0]
    bx[:, -1] = Bx[:, -1]
    by = np.empty((By.shape[0] + 1, By.shape[1]))
    by[1:-1, :] = 0.5 * (By[:-1, :] + By[1:, :])
    by[0, :] = By[0, :]
    by[-1, :] = By[-1, :]
    return bx, by


def export_snapshot_csv(path, Dz, Bx, By, theta: Optional[np.ndarray], dom: Domain) -> Path:
    """Write x, y, Dz, Bx_interp, By_interp, theta for every non-exterior node."""
    path = Path(path)
    X, Y = dom.coordinates()
    bx, by = faces_to_nodes(Bx, By)
    if theta is None:
        theta = np.zeros(dom.node_shape)
    keep = dom.node_kind != NODE_EXTERIOR
    table = np.column_stack([a[keep] for a in (X, Y, Dz, bx, by, theta)])
    np.savetxt(path, table, fmt=CSV_FMT, delimiter=",", header=",".join(SNAPSHOT_COLUMNS), comments="")
    return path
