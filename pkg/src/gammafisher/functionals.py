"""Prefactors and limit functionals, and the rescaled Fisher information.

``I``, ``J`` and ``J_k`` act on atomic measures (``I`` also on grid
measures). Note that :func:`eval_I` integrates ``|grad V|^2`` without a
factor one half, while the first-order limit of :func:`fisher_information`
along Gaussian recovery sequences is ``|grad V|^2 / 2``; both conventions
are reported side by side by the witness suite rather than reconciled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .dirichlet import dirichlet_form, edge_set, witten_potential
from .errors import AssumptionViolated, DegenerateInput, GridMismatch
from .grid import Grid
from .landscape import DEGENERACY_TOL, LandscapeReport

FLOOR_TOL = 1e-300


class _PlusInfinity:
    """The value ``+infinity`` of a functional off its effective domain.

    Compares greater than every real number and equal only to itself.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "PLUS_INF"

    def __str__(self):
        return "+inf"

    def __float__(self):
        return math.inf

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("PLUS_INF")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __reduce__(self):
        return (_PlusInfinity, ())


PLUS_INF = _PlusInfinity()


def is_infinite(value) -> bool:
    return value is PLUS_INF


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite convex combination of Dirac masses."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((tuple(float(v) for v in np.atleast_1d(p)), float(w)) for p, w in self.atoms)
        if not atoms:
            raise ValueError("empty measure")
        if any(w < 0 for _, w in atoms):
            raise ValueError("negative weight")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def dirac(cls, point) -> "AtomicMeasure":
        return cls(((point, 1.0),))

    @property
    def points(self) -> np.ndarray:
        return np.array([p for p, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def to_dict(self) -> dict:
        return {"atoms": [{"point": list(p), "weight": w} for p, w in self.atoms]}


@dataclass(frozen=True)
class GridMeasure:
    """Probability density (against ``dx``) on the nodes of a grid.

    ``root`` optionally carries a signed square root in ground-state
    coordinates, ``root_i**2 = density_i * vol``. Measures built from an
    amplitude (an eigenvector, a quasimode) keep it so that the Fisher
    information is the Dirichlet form of that amplitude; otherwise the
    nonnegative root is used.
    """

    grid: Grid
    density: np.ndarray
    beta: float | None = None
    root: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        dens = np.asarray(self.density, dtype=float).reshape(-1)
        if dens.size != self.grid.size:
            raise ValueError("density size does not match grid")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ValueError("density must be finite and nonnegative")
        mass = dens.sum() * self.grid.cell_volume
        if abs(mass - 1.0) > 1e-8:
            raise ValueError(f"density integrates to {mass!r}, not 1")
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")
        dens.setflags(write=False)
        object.__setattr__(self, "density", dens)

    @classmethod
    def from_density(cls, grid: Grid, density, beta=None) -> "GridMeasure":
        dens = np.asarray(density, dtype=float).reshape(-1)
        return cls(grid, dens / (dens.sum() * grid.cell_volume), beta)

    @classmethod
    def from_log_density(cls, grid: Grid, log_density, beta=None) -> "GridMeasure":
        logd = np.asarray(log_density, dtype=float).reshape(-1)
        logd = logd - logsumexp(logd) - math.log(grid.cell_volume)
        return cls(grid, np.exp(logd), beta)

    @classmethod
    def from_amplitude(cls, grid: Grid, root, beta=None) -> "GridMeasure":
        """Measure ``root**2 / vol``; ``root`` is normalized to unit Euclidean norm.

        Already-normalized input is kept bit for bit so that quantities computed
        from it elsewhere (Rayleigh quotients) stay exactly comparable.
        """
        root = np.asarray(root, dtype=float).reshape(-1)
        norm = np.linalg.norm(root)
        if abs(norm - 1.0) > 1e-14:
            root = root / norm
        return cls(grid, root ** 2 / grid.cell_volume, beta, root)

    def mix(self, weights, others) -> "GridMeasure":
        """Convex combination ``w_0 * self + sum_i w_i * others[i]`` (drops roots)."""
        dens = weights[0] * self.density
        for w, m in zip(weights[1:], others):
            if m.grid != self.grid:
                raise GridMismatch("cannot mix measures on different grids")
            dens = dens + w * m.density
        return GridMeasure.from_density(self.grid, dens, self.beta)

    def sqrt_root(self) -> np.ndarray:
        if self.root is not None:
            return self.root
        return np.sqrt(np.maximum(self.density, FLOOR_TOL) * self.grid.cell_volume)

    def mean(self, f_values) -> float:
        return float(np.sum(self.density * f_values) * self.grid.cell_volume)


def mixture(weights, measures) -> GridMeasure:
    weights = list(weights)
    measures = list(measures)
    return measures[0].mix(weights, measures[1:])


def gibbs_measure(grid: Grid, potential, beta: float) -> GridMeasure:
    """Normalized ``exp(-beta V)`` on the grid."""
    return GridMeasure.from_log_density(grid, -beta * potential.value(grid.points), beta)


def zeta(hess_eigs, degeneracy_tol: float = DEGENERACY_TOL) -> float:
    """Twice the total magnitude of the negative Hessian eigenvalues."""
    eigs = np.asarray(hess_eigs, dtype=float)
    if eigs.size == 0:
        raise ValueError("empty eigenvalue list")
    if np.any(np.abs(eigs) < degeneracy_tol):
        raise DegenerateInput(f"eigenvalue within {degeneracy_tol} of zero: {eigs.tolist()}")
    return float(np.sum(np.abs(eigs) - eigs))


def eta_k(report: LandscapeReport, k: int) -> float:
    """Eyring-Kramers prefactor of the ``k``-th minimum (``k >= 1``)."""
    if not 1 <= k <= report.n:
        raise ValueError(f"k must be in 1..{report.n}, got {k}")
    if not report.level_ok(k):
        raise AssumptionViolated(f"A.4/A.5 fail for level {k}")
    xk = np.asarray(report.minimum(k).hess_eigs)
    xs = np.asarray(report.saddle(k).hess_eigs)
    return float(abs(xs[0]) / math.pi * math.sqrt(np.prod(xk) / abs(np.prod(xs))))


def eval_I(mu, potential) -> float:
    """``integral |grad V|^2 dmu``."""
    if isinstance(mu, AtomicMeasure):
        g = potential.gradient(mu.points)
        return float(np.sum(mu.weights * np.sum(g ** 2, axis=-1)))
    g = potential.gradient(mu.grid.points)
    return mu.mean(np.sum(g ** 2, axis=-1))


def _default_atom_tol(report: LandscapeReport) -> float:
    res = report.settings.get("grid_resolution", 4000)
    box = report.potential.box
    return 2.0 * float(np.max((box[:, 1] - box[:, 0]) / res))


def _nearest(point, candidates, tol):
    best, dist = None, math.inf
    for i, c in enumerate(candidates):
        d = float(np.linalg.norm(np.asarray(point) - c.point))
        if d < dist:
            best, dist = i, d
    return best if dist <= tol else None


def eval_J(mu: AtomicMeasure, report: LandscapeReport, atom_tol: float | None = None):
    """``sum_y alpha_y zeta(y)``, or ``PLUS_INF`` off the critical set."""
    tol = _default_atom_tol(report) if atom_tol is None else atom_tol
    total = 0.0
    for point, w in mu.atoms:
        if w == 0:
            continue
        i = _nearest(point, report.critical_points, tol)
        if i is None:
            return PLUS_INF
        total += w * zeta(report.critical_points[i].hess_eigs)
    return total


def eval_Jk(mu: AtomicMeasure, report: LandscapeReport, k: int, atom_tol: float | None = None):
    """``alpha_k eta_k(x_k)`` if ``mu`` lives on ``x_0..x_k``, else ``PLUS_INF``."""
    if not 1 <= k <= report.n:
        raise ValueError(f"k must be in 1..{report.n}, got {k}")
    tol = _default_atom_tol(report) if atom_tol is None else atom_tol
    allowed = report.minima_ordered[: k + 1]
    alpha_k = 0.0
    for point, w in mu.atoms:
        if w == 0:
            continue
        i = _nearest(point, allowed, tol)
        if i is None:
            return PLUS_INF
        if i == k:
            alpha_k += w
    if alpha_k == 0.0:
        return 0.0
    return alpha_k * eta_k(report, k)


def fisher_information(mu: GridMeasure, potential, beta: float | None = None,
                       generator=None) -> float:
    """Rescaled Fisher information of a grid measure.

    Computed as ``(2 / beta^2) <h, -L h>_m`` with the edge weights of the
    discrete generator, ``h`` the square root of ``dmu/dm``.
    """
    if generator is not None:
        if generator.grid != mu.grid:
            raise GridMismatch(f"measure grid {mu.grid.describe()} differs from operator grid "
                               f"{generator.grid.describe()}")
        if beta is not None and beta != generator.beta:
            raise ValueError("beta differs from the generator's")
        beta = generator.beta
        edges = generator.edges
    else:
        beta = mu.beta if beta is None else beta
        if beta is None:
            raise ValueError("beta required")
        edges = edge_set(mu.grid, potential.value(mu.grid.points), beta)
    return float(2.0 / beta ** 2 * dirichlet_form(mu.sqrt_root(), edges))


def coercivity_bound(mu: GridMeasure, potential, beta: float):
    """Lower bounds on :func:`fisher_information` from the witness ``beta grad V``.

    Returns ``(continuum, discrete, slack)``: ``continuum`` is
    ``1/2 int (|grad V|^2 - 2 Lap V / beta) dmu`` with nodal quadrature;
    ``discrete`` is ``(2/beta^2) sum_i U_i mu_i vol`` with the discrete Witten
    potential ``U`` and is an exact lower bound; ``slack`` is
    ``sum_i mu_i vol max(0, continuum_i - discrete_i)``, so that
    ``fisher >= continuum - slack`` holds exactly.
    """
    grid = mu.grid
    pts = grid.points
    vals = potential.value(pts)
    g2 = np.sum(potential.gradient(pts) ** 2, axis=-1)
    cont = 0.5 * (g2 - 2.0 / beta * potential.laplacian(pts))
    disc = 2.0 / beta ** 2 * witten_potential(grid.size, edge_set(grid, vals, beta))
    mass = mu.density * grid.cell_volume
    return (float(np.sum(mass * cont)), float(np.sum(mass * disc)),
            float(np.sum(mass * np.maximum(cont - disc, 0.0))))
