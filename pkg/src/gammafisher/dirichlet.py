"""Edge weights shared by the discrete generator and the Fisher information.

Both objects are written in ground-state coordinates: a function ``u`` with
``u_i = phi_i / sqrt(m_i)``, ``m_i = exp(-beta V_i) * vol``. For the edge
``(i, j)`` with ``a = beta (V_j - V_i) / 4`` the Dirichlet form is

    sum_edges h^-2 (phi_j e^a - phi_i e^-a)^2  =  <u, -L u>_m

so nothing ever multiplies an underflowed Gibbs weight by an overflowed
inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid

# largest exponent fed to exp(); beyond this the grid is far too coarse
EXP_CAP = 700.0


@dataclass(frozen=True)
class EdgeSet:
    head: np.ndarray
    tail: np.ndarray
    inv_h2: np.ndarray
    half_gap: np.ndarray  # beta (V_tail - V_head) / 2

    @property
    def quarter_gap(self) -> np.ndarray:
        return 0.5 * self.half_gap


def edge_set(grid: Grid, values, beta: float) -> EdgeSet:
    """Edges of ``grid`` with exponents for potential ``values`` at ``beta``."""
    values = np.asarray(values, dtype=float).reshape(-1)
    i, j, axis = grid.edges
    inv_h2 = 1.0 / grid.spacing[axis] ** 2
    return EdgeSet(i, j, inv_h2, 0.5 * beta * (values[j] - values[i]))


def _scaled(phi, expo):
    # phi * exp(expo) with 0 * exp(large) = 0
    out = np.zeros(np.broadcast_shapes(phi.shape, expo.shape))
    nz = phi != 0
    with np.errstate(over="ignore"):
        out[nz] = (phi * np.exp(np.minimum(expo, EXP_CAP)))[nz]
    return out


def dirichlet_form(phi, edges: EdgeSet) -> np.ndarray:
    """``sum_edges h^-2 (phi_j e^a - phi_i e^-a)^2`` for each column of ``phi``."""
    phi = np.asarray(phi, dtype=float)
    a = edges.quarter_gap
    if phi.ndim == 2:
        a = a[:, None]
        w = edges.inv_h2[:, None]
    else:
        w = edges.inv_h2
    diff = _scaled(phi[edges.tail], a) - _scaled(phi[edges.head], -a)
    return np.sum(w * diff * diff, axis=0)


def dirichlet_bilinear(phi, psi, edges: EdgeSet) -> float:
    a = edges.quarter_gap
    dphi = _scaled(phi[edges.tail], a) - _scaled(phi[edges.head], -a)
    dpsi = _scaled(psi[edges.tail], a) - _scaled(psi[edges.head], -a)
    return float(np.sum(edges.inv_h2 * dphi * dpsi))


def witten_diagonal(n_nodes: int, edges: EdgeSet) -> np.ndarray:
    """Diagonal of the symmetrized operator: ``sum_j h^-2 exp(beta (V_i - V_j) / 2)``."""
    g = edges.half_gap
    diag = np.zeros(n_nodes)
    np.add.at(diag, edges.head, edges.inv_h2 * np.exp(np.minimum(-g, EXP_CAP)))
    np.add.at(diag, edges.tail, edges.inv_h2 * np.exp(np.minimum(g, EXP_CAP)))
    return diag


def witten_potential(n_nodes: int, edges: EdgeSet) -> np.ndarray:
    """Discrete Witten potential ``U_i = sum_j h^-2 (exp(beta (V_i - V_j) / 2) - 1)``.

    The symmetrized operator equals the (nonnegative) flat graph Laplacian
    plus ``diag(U)``, hence ``phi^T S phi >= sum_i U_i phi_i^2``.
    """
    g = edges.half_gap
    out = np.zeros(n_nodes)
    np.add.at(out, edges.head, edges.inv_h2 * np.expm1(np.minimum(-g, EXP_CAP)))
    np.add.at(out, edges.tail, edges.inv_h2 * np.expm1(np.minimum(g, EXP_CAP)))
    return out
