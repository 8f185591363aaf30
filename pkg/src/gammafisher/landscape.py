"""Critical points, mountain-pass barriers and assumption checks.

The pipeline is :func:`find_critical_points` (Newton from a seed lattice),
:func:`compute_barriers` (union-find sweep of cell-centre values in
increasing order, then Newton refinement of the merging cell) and
:func:`verify_assumptions`. :func:`analyze` chains the three into a
:class:`LandscapeReport`.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .errors import NoConvergence, ResolutionTooCoarse
from .grid import sublevel_labels
from .potential import Potential

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
DEGENERACY_TOL = 1e-6
TIE_TOL = 1e-6

MINIMUM = "minimum"
SADDLE = "saddle-index-1"
HIGHER = "higher-index"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    value: float
    hess_eigs: tuple
    morse_index: int
    kind: str
    hess_vectors: tuple = field(default=(), compare=False, repr=False)
    grad_norm: float = field(default=0.0, compare=False)

    @property
    def point(self) -> np.ndarray:
        return np.asarray(self.location, dtype=float)

    @property
    def degenerate(self) -> bool:
        return self.kind == DEGENERATE

    def to_dict(self) -> dict:
        return {
            "location": list(self.location),
            "value": self.value,
            "hess_eigs": list(self.hess_eigs),
            "morse_index": self.morse_index,
            "kind": self.kind,
            "grad_norm": self.grad_norm,
        }


@dataclass(frozen=True)
class BarrierRecord:
    """Barrier of the minimum ``minima_ordered[min_index]``.

    ``W`` is ``merge_level - V(x_k)``; ``merge_level`` is the value at the
    refined saddle, or the raw sweep level when refinement failed
    (``refined`` is then False). ``grid_level`` always keeps the raw sweep level.
    """

    min_index: int
    W: float
    saddle: CriticalPoint
    merge_level: float
    grid_level: float
    refined: bool = True

    def to_dict(self) -> dict:
        return {
            "min_index": self.min_index,
            "W": self.W,
            "saddle": self.saddle.to_dict(),
            "merge_level": self.merge_level,
            "grid_level": self.grid_level,
            "refined": self.refined,
        }


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    scope: str
    detail: str
    failing_levels: tuple = ()

    def to_dict(self) -> dict:
        return {"passed": self.passed, "scope": self.scope, "detail": self.detail,
                "failing_levels": list(self.failing_levels)}


@dataclass(frozen=True)
class LandscapeReport:
    potential: Potential
    critical_points: tuple
    minima_ordered: tuple
    barriers: tuple
    assumption_flags: dict
    settings: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        """Number of non-global minima."""
        return len(self.minima_ordered) - 1

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.assumption_flags.values())

    def minimum(self, k: int) -> CriticalPoint:
        return self.minima_ordered[k]

    def barrier(self, k: int) -> BarrierRecord:
        for b in self.barriers:
            if b.min_index == k:
                return b
        raise KeyError(f"no barrier recorded for minimum {k}")

    def W(self, k: int) -> float:
        if k == 0 and not any(b.min_index == 0 for b in self.barriers):
            return math.inf
        return self.barrier(k).W

    def saddle(self, k: int) -> CriticalPoint:
        return self.barrier(k).saddle

    def level_ok(self, k: int, names=("A.4", "A.5")) -> bool:
        """True if the listed assumptions hold for barrier level ``k``."""
        for name in names:
            flag = self.assumption_flags.get(name)
            if flag is not None and not flag.passed and (
                    not flag.failing_levels or k in flag.failing_levels):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "potential": self.potential.to_dict(),
            "critical_points": [c.to_dict() for c in self.critical_points],
            "minima_ordered": [c.to_dict() for c in self.minima_ordered],
            "barriers": [b.to_dict() for b in self.barriers],
            "assumption_flags": {k: v.to_dict() for k, v in sorted(self.assumption_flags.items())},
        }


def classify(potential: Potential, x, degeneracy_tol: float = DEGENERACY_TOL) -> CriticalPoint:
    """Hessian eigendecomposition and Morse classification at ``x``."""
    x = np.asarray(x, dtype=float).reshape(potential.dimension)
    H = potential.hessian(x)
    eigs, vecs = np.linalg.eigh(H)
    # deterministic eigenvector signs: largest component positive
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] = -vecs[:, j]
    index = int(np.sum(eigs < 0))
    if np.any(np.abs(eigs) < degeneracy_tol):
        kind = DEGENERATE
    elif index == 0:
        kind = MINIMUM
    elif index == 1:
        kind = SADDLE
    else:
        kind = HIGHER
    return CriticalPoint(
        location=tuple(float(v) for v in x),
        value=float(potential.value(x)),
        hess_eigs=tuple(float(v) for v in eigs),
        morse_index=index,
        kind=kind,
        hess_vectors=tuple(tuple(float(v) for v in vecs[:, j]) for j in range(vecs.shape[1])),
        grad_norm=float(np.linalg.norm(potential.gradient(x))),
    )


def newton(potential: Potential, x0, grad_tol=GRAD_TOL, degeneracy_tol=DEGENERACY_TOL,
           max_iter=100, polish=3):
    """Newton iteration on the gradient with eigenvalue-floored Hessian.

    Returns the converged point; raises :class:`NoConvergence` past ``max_iter``
    or if the iterate leaves the box by more than a box width.
    """
    x = np.array(x0, dtype=float).reshape(potential.dimension)
    box = potential.box
    width = box[:, 1] - box[:, 0]
    converged_at = None
    for it in range(max_iter):
        g = potential.gradient(x)
        gnorm = np.linalg.norm(g)
        if gnorm <= grad_tol and converged_at is None:
            converged_at = it
        if converged_at is not None and it - converged_at >= polish:
            return x
        eigs, vecs = np.linalg.eigh(potential.hessian(x))
        floored = np.where(np.abs(eigs) < degeneracy_tol,
                           np.where(eigs < 0, -degeneracy_tol, degeneracy_tol), eigs)
        step = -vecs @ ((vecs.T @ g) / floored)
        # cap the step at half the box so wild seeds do not shoot off
        scale = np.max(np.abs(step) / (0.5 * width))
        if scale > 1.0:
            step = step / scale
        x = x + step
        if np.any(x < box[:, 0] - width) or np.any(x > box[:, 1] + width):
            raise NoConvergence(f"Newton left the box from seed {np.asarray(x0).tolist()}")
        if converged_at is not None and np.linalg.norm(step) <= 1e-15 * (1 + np.linalg.norm(x)):
            return x
    if converged_at is not None:
        return x
    raise NoConvergence(f"Newton did not converge in {max_iter} iterations from seed "
                        f"{np.asarray(x0).tolist()}")


def _seed_lattice(box, seeds_per_axis):
    axes = []
    for a, b in box:
        h = (b - a) / seeds_per_axis
        axes.append(a + h * (np.arange(seeds_per_axis) + 0.5))
    return list(itertools.product(*axes))


def find_critical_points(potential: Potential, seeds_per_axis: int = 16,
                         grad_tol: float = GRAD_TOL,
                         degeneracy_tol: float = DEGENERACY_TOL,
                         max_iter: int = 100) -> list:
    """All critical points reachable by Newton from a uniform seed lattice.

    Points outside the box are discarded; points closer than ``10 * grad_tol``
    are merged. The result is sorted lexicographically by location.
    """
    if seeds_per_axis < 8:
        raise ValueError("seeds_per_axis must be at least 8")
    box = potential.box
    found = []
    for seed in _seed_lattice(box, seeds_per_axis):
        try:
            x = newton(potential, seed, grad_tol, degeneracy_tol, max_iter)
        except NoConvergence as exc:
            log.debug("dropping seed: %s", exc)
            continue
        if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
            continue
        if np.linalg.norm(potential.gradient(x)) > grad_tol:
            continue
        radius = 10 * grad_tol
        if any(np.linalg.norm(x - y) <= radius for y in found):
            continue
        found.append(x)
    points = [classify(potential, x, degeneracy_tol) for x in found]
    points.sort(key=lambda c: c.location)
    return points


def _cell_centres(box, resolution):
    axes = []
    for a, b in box:
        h = (b - a) / resolution
        axes.append(a + h * (np.arange(resolution) + 0.5))
    shape = (resolution,) * len(box)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    return pts, shape


def _cell_of(box, resolution, x):
    idx = []
    for (a, b), xi in zip(box, x):
        h = (b - a) / resolution
        idx.append(int(np.clip(np.floor((xi - a) / h), 0, resolution - 1)))
    return idx


def _neighbours(flat, shape):
    multi = np.unravel_index(flat, shape)
    for ax in range(len(shape)):
        for s in (-1, 1):
            k = multi[ax] + s
            if 0 <= k < shape[ax]:
                m = list(multi)
                m[ax] = k
                yield int(np.ravel_multi_index(tuple(m), shape))


def _sweep(values, shape, minima_cells, minima_values, tie_tol):
    """Union-find sweep over cells in increasing value.

    Returns ``{minimum: (level, merge_cell)}`` for every minimum that meets a
    component holding a minimum at most as deep (ties within ``tie_tol``).
    """
    n_cells = values.size
    order = np.argsort(values, kind="stable")
    cell_to_min = {c: m for m, c in enumerate(minima_cells)}
    active = np.zeros(n_cells, dtype=bool)
    ds = DisjointSet()
    deepest = {}
    died = {}
    for c in order:
        c = int(c)
        level = float(values[c])
        ds.add(c)
        active[c] = True
        deepest[c] = cell_to_min.get(c, -1)
        for nb in _neighbours(c, shape):
            if not active[nb]:
                continue
            ra, rb = ds[c], ds[nb]
            if ra == rb:
                continue
            a, b = deepest[ra], deepest[rb]
            if a >= 0 and b >= 0:
                va, vb = minima_values[a], minima_values[b]
                if vb <= va + tie_tol and a not in died:
                    died[a] = (level, c)
                if va <= vb + tie_tol and b not in died:
                    died[b] = (level, c)
                keep = a if (va, a) < (vb, b) else b
            else:
                keep = a if a >= 0 else b
            ds.merge(ra, rb)
            deepest[ds[c]] = keep
    return died


def _order_minima(minima, W):
    """Indices of ``minima`` sorted by decreasing barrier, then value, then location."""
    def key(i):
        w = W.get(i, math.inf)
        return (-w, minima[i].value, minima[i].location)
    return sorted(range(len(minima)), key=key)


def compute_barriers(potential: Potential, report_minima, grid_resolution: int,
                     grad_tol: float = GRAD_TOL, degeneracy_tol: float = DEGENERACY_TOL,
                     tie_tol: float = TIE_TOL, critical_points=None):
    """Mountain-pass barriers of every minimum that has a deeper (or equal) rival.

    Parameters
    ----------
    report_minima : sequence of CriticalPoint
        Minima in any order.
    grid_resolution : int
        Cells per axis for the sweep.
    critical_points : sequence of CriticalPoint, optional
        Refined saddles are matched against these so that barrier records
        reference the same objects.

    Returns
    -------
    list of BarrierRecord
        ``min_index`` refers to the position in ``report_minima``.
    """
    minima = list(report_minima)
    if len(minima) < 2:
        return []
    box = potential.box
    pts, shape = _cell_centres(box, grid_resolution)
    values = potential.value(pts)
    cells = []
    for m in minima:
        c = int(np.ravel_multi_index(tuple(_cell_of(box, grid_resolution, m.location)), shape))
        if c in cells:
            raise ResolutionTooCoarse(
                f"minima {minima[cells.index(c)].location} and {m.location} share a cell "
                f"at resolution {grid_resolution}")
        cells.append(c)
    died = _sweep(values, shape, cells, [m.value for m in minima], tie_tol)
    known = list(critical_points or [])
    records = []
    for i in sorted(died):
        level, cell = died[i]
        refined = True
        try:
            x = newton(potential, pts[cell], grad_tol, degeneracy_tol)
            saddle = classify(potential, x, degeneracy_tol)
            if saddle.kind != SADDLE or saddle.grad_norm > grad_tol:
                raise NoConvergence(f"refinement reached a {saddle.kind} point")
        except NoConvergence as exc:
            log.warning("saddle refinement failed for minimum %s: %s", minima[i].location, exc)
            refined = False
            saddle = classify(potential, pts[cell], degeneracy_tol)
        if refined:
            for c in known:
                if np.linalg.norm(c.point - saddle.point) <= max(10 * grad_tol, 1e-9):
                    saddle = c
                    break
        merge_level = saddle.value if refined else level
        records.append(BarrierRecord(min_index=i, W=merge_level - minima[i].value,
                                     saddle=saddle, merge_level=merge_level,
                                     grid_level=level, refined=refined))
    return records


def _sublevel_cell(potential, resolution, level, x):
    pts, shape = _cell_centres(potential.box, resolution)
    labels, _ = sublevel_labels(potential.value(pts), shape, level)
    c = int(np.ravel_multi_index(tuple(_cell_of(potential.box, resolution, x)), shape))
    return labels, c


def verify_assumptions(potential: Potential, critical_points, barriers, tie_tol: float = TIE_TOL,
                       minima=None, beta0: float = 1.0, grid_resolution: int | None = None,
                       boundary_samples: int = 400) -> dict:
    """Check A.1-A.5; failures are returned as flags, never raised.

    ``barriers`` index into ``minima`` (defaults to the minima among
    ``critical_points`` in their given order).
    """
    cps = list(critical_points)
    if minima is None:
        minima = [c for c in cps if c.kind == MINIMUM]
    minima = list(minima)
    flags = {}

    degenerate = [c.location for c in cps if c.kind == DEGENERATE]
    flags["A.1"] = AssumptionCheck(
        "A.1", not degenerate, "global",
        "all critical points nondegenerate" if not degenerate
        else f"degenerate Hessian at {degenerate}")

    # A.2 / A.3 can only be probed on the truncated box
    d = potential.dimension
    samples = []
    t = np.linspace(0.0, 1.0, boundary_samples)
    box = potential.box
    for ax in range(d):
        for end in (0, 1):
            if d == 1:
                samples.append(np.array([[box[0, end]]]))
            else:
                other = 1 - ax
                pts = np.empty((boundary_samples, 2))
                pts[:, ax] = box[ax, end]
                pts[:, other] = box[other, 0] + t * (box[other, 1] - box[other, 0])
                samples.append(pts)
    bpts = np.vstack(samples)
    g = potential.gradient(bpts)
    witten = 0.25 * np.sum(g ** 2, axis=-1) - potential.laplacian(bpts) / (2 * beta0)
    boundary_min = float(np.min(witten))
    interior = [-potential.laplacian(m.point) / (2 * beta0) for m in minima] or [-math.inf]
    interior_max = float(np.max(interior))
    flags["A.2"] = AssumptionCheck(
        "A.2", boundary_min > interior_max, "box-local",
        f"min over boundary of |grad V|^2/4 - Lap V/(2 beta0) = {boundary_min:.6g}, "
        f"max at minima = {interior_max:.6g} (beta0 = {beta0:g})")
    flags["A.3"] = AssumptionCheck("A.3", True, "box-local",
                                   "exp(-beta V) is integrable on a bounded box")

    # A.4: another index-1 point at the same level, connected to the same well
    a4_fail = []
    notes = []
    resolution = grid_resolution or (4000 if d == 1 else 200)
    h = float(np.max((box[:, 1] - box[:, 0]) / resolution))
    xi_max = max((max(abs(e) for e in c.hess_eigs) for c in cps), default=1.0)
    for b in barriers:
        if not b.refined:
            a4_fail.append(b.min_index)
            notes.append(f"k={b.min_index}: saddle not refined")
            continue
        rivals = [c for c in cps if c.kind == SADDLE
                  and abs(c.value - b.saddle.value) <= tie_tol
                  and np.linalg.norm(c.point - b.saddle.point) > 10 * GRAD_TOL]
        if not rivals:
            continue
        level = b.saddle.value + tie_tol + xi_max * d * h * h
        labels, home = _sublevel_cell(potential, resolution, level, minima[b.min_index].location)
        for r in rivals:
            _, rc = _sublevel_cell(potential, resolution, level, r.location)
            if labels[home] != 0 and labels[rc] == labels[home]:
                a4_fail.append(b.min_index)
                notes.append(f"k={b.min_index}: saddles {b.saddle.location} and {r.location} "
                             f"tie at level {b.saddle.value:.10g}")
                break
    flags["A.4"] = AssumptionCheck(
        "A.4", not a4_fail, "global",
        "; ".join(notes) if notes else "each barrier has a unique communicating saddle",
        tuple(sorted(set(a4_fail))))

    a5_fail = set()
    for b1, b2 in itertools.combinations(barriers, 2):
        if abs(b1.W - b2.W) < tie_tol:
            a5_fail.update((b1.min_index, b2.min_index))
    ws = sorted((round(b.W, 12) for b in barriers), reverse=True)
    flags["A.5"] = AssumptionCheck(
        "A.5", not a5_fail, "global",
        f"barriers {ws}" + ("" if not a5_fail else f"; ties among minima {sorted(a5_fail)}"),
        tuple(sorted(a5_fail)))
    return flags


def analyze(potential: Potential, seeds_per_axis: int = 16, grid_resolution: int | None = None,
            grad_tol: float = GRAD_TOL, degeneracy_tol: float = DEGENERACY_TOL,
            tie_tol: float = TIE_TOL, beta0: float = 1.0) -> LandscapeReport:
    """Full landscape analysis of ``potential``."""
    resolution = grid_resolution or (4000 if potential.dimension == 1 else 200)
    cps = find_critical_points(potential, seeds_per_axis, grad_tol, degeneracy_tol)
    minima = [c for c in cps if c.kind == MINIMUM]
    raw = compute_barriers(potential, minima, resolution, grad_tol, degeneracy_tol,
                           tie_tol, critical_points=cps)
    W = {b.min_index: b.W for b in raw}
    order = _order_minima(minima, W)
    rank = {old: new for new, old in enumerate(order)}
    minima_ordered = tuple(minima[i] for i in order)
    barriers = tuple(sorted(
        (BarrierRecord(rank[b.min_index], b.W, b.saddle, b.merge_level, b.grid_level, b.refined)
         for b in raw), key=lambda b: b.min_index))
    points = list(cps)
    for b in barriers:
        if b.refined and b.saddle not in points:
            points.append(b.saddle)
    points.sort(key=lambda c: c.location)
    flags = verify_assumptions(potential, points, barriers, tie_tol, minima=minima_ordered,
                               beta0=beta0, grid_resolution=resolution)
    if minima_ordered and W.get(order[0], math.inf) != math.inf:
        flags["A.5"] = AssumptionCheck(
            "A.5", False, "global",
            flags["A.5"].detail + "; no unique global minimum",
            tuple(sorted(set(flags["A.5"].failing_levels) | {0})))
    settings = {"seeds_per_axis": seeds_per_axis, "grid_resolution": resolution,
                "grad_tol": grad_tol, "degeneracy_tol": degeneracy_tol, "tie_tol": tie_tol,
                "beta0": beta0}
    return LandscapeReport(potential, tuple(points), minima_ordered, barriers, flags, settings)
