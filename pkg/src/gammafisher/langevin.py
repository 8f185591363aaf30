"""Euler-Maruyama simulation of ``dX = -grad V dt + sqrt(2/beta) dW`` in a box.

The inner loop is a numba kernel specialised to polynomial potentials (the
exponent table and coefficients are passed as arrays). Every trajectory
draws its noise from its own stream, ``SeedSequence(seed, spawn_key=(i,))``,
so results do not depend on how trajectories are scheduled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import UnstableStep
from .functionals import GridMeasure
from .grid import Grid, sublevel_component
from .landscape import LandscapeReport, find_critical_points

log = logging.getLogger(__name__)

CHUNK = 1 << 16
STATUS_DONE, STATUS_UNSTABLE, STATUS_HIT = 0, 1, 2


@numba.njit(cache=True, nogil=True)
def _kernel(x, exps, coefs, lo, hi, spacing, shape, dt, sigma, noise, labels, state,
            hist, occupancy, events, t0, stop_label, max_inc):
    d = x.shape[0]
    nterm = exps.shape[0]
    g = np.zeros(d)
    for s in range(noise.shape[0]):
        for a in range(d):
            g[a] = 0.0
        for t in range(nterm):
            for a in range(d):
                e = exps[t, a]
                if e == 0:
                    continue
                term = coefs[t] * e * x[a] ** (e - 1)
                for b in range(d):
                    if b != a and exps[t, b] != 0:
                        term *= x[b] ** exps[t, b]
                g[a] += term
        for a in range(d):
            inc = -g[a] * dt + sigma * noise[s, a]
            if not abs(inc) <= max_inc:
                return s, STATUS_UNSTABLE
            y = x[a] + inc
            while y < lo[a] or y > hi[a]:
                if y < lo[a]:
                    y = 2.0 * lo[a] - y
                else:
                    y = 2.0 * hi[a] - y
            x[a] = y
        flat = 0
        for a in range(d):
            k = int(math.floor((x[a] - lo[a]) / spacing[a] + 0.5))
            if k < 0:
                k = 0
            elif k > shape[a] - 1:
                k = shape[a] - 1
            flat = flat * shape[a] + k
        if hist.size > 0:
            hist[flat] += 1
        lab = labels[flat]
        if lab >= 0:
            occupancy[lab] += 1
            if lab != state[0]:
                if state[0] >= 0:
                    if state[1] < events.shape[0]:
                        events[state[1], 0] = t0 + (s + 1) * dt
                        events[state[1], 1] = state[0]
                        events[state[1], 2] = lab
                    state[1] += 1
                state[0] = lab
                if lab == stop_label:
                    return s + 1, STATUS_HIT
    return noise.shape[0], STATUS_DONE


@dataclass(frozen=True)
class CoreMap:
    """Node labels of the delta-cores of the minima (``-1`` outside every core).

    The core of ``x_k`` is its component of ``{V <= V_hat - delta}``; cores are
    written in order ``k = 0, 1, ...`` so a later core overwrites an earlier one
    where they coincide.
    """

    grid: Grid
    labels: np.ndarray
    levels: tuple
    minima: tuple

    @property
    def count(self) -> int:
        return len(self.minima)


def core_map(report: LandscapeReport, grid: Grid, delta: float | None = None) -> CoreMap:
    from .quasimodes import default_delta
    if report.n < 1:
        raise ValueError("core maps need at least two minima")
    delta = default_delta(report) if delta is None else float(delta)
    values = report.potential.value(grid.points)
    labels = np.full(grid.size, -1, dtype=np.int64)
    levels = []
    for k, m in enumerate(report.minima_ordered):
        j = max(k, 1)
        level = report.minimum(j).value + report.W(j) - delta
        seed = int(grid.nearest_index(m.point)[0])
        comp = sublevel_component(values, grid.shape, level, seed)
        labels[comp] = k
        levels.append(level)
    return CoreMap(grid, labels, tuple(levels), tuple(m.location for m in report.minima_ordered))


def custom_cores(grid: Grid, masks) -> CoreMap:
    """Core map from explicit boolean node masks (label = position in ``masks``)."""
    labels = np.full(grid.size, -1, dtype=np.int64)
    for k, m in enumerate(masks):
        labels[np.asarray(m, dtype=bool)] = k
    return CoreMap(grid, labels, (), tuple(range(len(masks))))


@dataclass(frozen=True)
class TrajectoryStats:
    beta: float
    dt: float
    T: float
    seed: int
    index: int
    occupation: tuple  # fraction of steps spent in each core
    transition_times: tuple
    transitions: tuple  # (from, to) per transition
    end: tuple
    steps: int
    hit: bool = False

    def to_dict(self) -> dict:
        return {"beta": self.beta, "dt": self.dt, "T": self.T, "seed": self.seed,
                "index": self.index, "occupation": list(self.occupation),
                "transition_times": list(self.transition_times),
                "transitions": [list(p) for p in self.transitions], "end": list(self.end),
                "steps": self.steps, "hit": self.hit}


def _poly_arrays(potential):
    return (np.ascontiguousarray(potential.exponents, dtype=np.int64),
            np.ascontiguousarray(potential.coefficients, dtype=float))


def max_hessian_eigenvalue(potential, report: LandscapeReport | None = None) -> float:
    pts = report.critical_points if report is not None else find_critical_points(potential)
    return max(max(c.hess_eigs) for c in pts)


def stable_dt(potential, report: LandscapeReport | None = None) -> float:
    """Largest admissible step, ``0.1 / max(xi_max, 1)``."""
    return 0.1 / max(max_hessian_eigenvalue(potential, report), 1.0)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def simulate(potential, beta: float, x0, dt: float, T: float, seed: int, *,
             cores: CoreMap | None = None, grid: Grid | None = None, occupation: bool = False,
             stop_label: int = -1, noise: bool = True, index: int = 0,
             report: LandscapeReport | None = None, max_events: int = 100000):
    """Run one trajectory up to time ``T`` (or until it enters core ``stop_label``).

    Returns ``(TrajectoryStats, GridMeasure or None)``; the measure is the
    occupation histogram on ``grid`` (the core grid by default) when
    ``occupation`` is set.
    """
    box = np.asarray(potential.box, dtype=float)
    x = np.array(np.atleast_1d(x0), dtype=float)
    if x.shape != (potential.dimension,):
        raise ValueError("x0 has the wrong dimension")
    if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
        raise ValueError("x0 outside the box")
    if beta <= 0 or dt <= 0 or T <= 0:
        raise ValueError("beta, dt and T must be positive")
    limit = stable_dt(potential, report)
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt={dt:.4g} exceeds 0.1/max(xi_max, 1) = {limit:.4g}")
    grid = grid if grid is not None else (cores.grid if cores is not None else None)
    if grid is None:
        grid = Grid(box, (257,) * potential.dimension)
    if cores is not None and cores.grid != grid:
        labels = cores.labels[cores.grid.nearest_index(grid.points)]
    else:
        labels = cores.labels if cores is not None else np.full(grid.size, -1, dtype=np.int64)
    ncore = (cores.count if cores is not None else 0)
    exps, coefs = _poly_arrays(potential)
    lo, hi = box[:, 0].copy(), box[:, 1].copy()
    spacing = grid.spacing
    shape = np.asarray(grid.shape, dtype=np.int64)
    sigma = math.sqrt(2.0 / beta)
    max_inc = 0.5 * float(np.linalg.norm(hi - lo))
    state = np.array([-1, 0], dtype=np.int64)
    state[0] = labels[grid.nearest_index(x)[0]]
    hist = np.zeros(grid.size if occupation else 0, dtype=np.int64)
    occ = np.zeros(max(ncore, 1), dtype=np.int64)
    events = np.zeros((max_events, 3))
    rng = trajectory_rng(seed, index)
    total = int(math.ceil(T / dt - 1e-9))
    done, t, hit = 0, 0.0, False
    while done < total:
        n = min(CHUNK, total - done)
        z = rng.standard_normal((n, potential.dimension)) * math.sqrt(dt)
        if not noise:
            z[:] = 0.0
        steps, status = _kernel(x, exps, coefs, lo, hi, spacing, shape, dt, sigma, z, labels,
                                state, hist, occ, events, t, stop_label, max_inc)
        done += steps
        t = done * dt
        if status == STATUS_UNSTABLE:
            raise UnstableStep(f"increment above half the box diameter at t={t:.6g} (dt={dt})")
        if status == STATUS_HIT:
            hit = True
            break
    nev = min(int(state[1]), max_events)
    stats = TrajectoryStats(
        beta=float(beta), dt=float(dt), T=float(T), seed=int(seed), index=int(index),
        occupation=tuple(float(c) / max(done, 1) for c in occ[:ncore]),
        transition_times=tuple(float(v) for v in events[:nev, 0]),
        transitions=tuple((int(a), int(b)) for a, b in events[:nev, 1:]),
        end=tuple(float(v) for v in x), steps=done, hit=hit)
    measure = None
    if occupation:
        measure = GridMeasure.from_density(grid, hist.astype(float), beta)
    return stats, measure


def first_passage_times(potential, beta: float, x0, cores: CoreMap, target: int, n_traj: int,
                        seed: int, dt: float, t_max: float, executor=None,
                        report: LandscapeReport | None = None):
    """Hitting times of core ``target`` from ``x0``; ``inf`` marks censored runs."""
    def one(i):
        stats, _ = simulate(potential, beta, x0, dt, t_max, seed, cores=cores,
                            stop_label=target, index=i, report=report, max_events=1024)
        return stats.steps * dt if stats.hit else math.inf
    mapper = executor.map if executor is not None else map
    return np.array(list(mapper(one, range(n_traj))))


@dataclass(frozen=True)
class ExitSummary:
    beta: float
    k: int
    n_traj: int
    seed: int
    dt: float
    mean: float
    stderr: float
    cv: float
    censored: int
    t_max: float
    spectral_time: float
    kramers_time: float
    times: np.ndarray = field(repr=False, compare=False)

    @property
    def ratio_spectral(self) -> float:
        return self.mean / self.spectral_time

    @property
    def ratio_kramers(self) -> float:
        return self.mean / self.kramers_time

    def to_dict(self) -> dict:
        return {"beta": self.beta, "k": self.k, "n_traj": self.n_traj, "seed": self.seed,
                "dt": self.dt, "mean": self.mean, "stderr": self.stderr, "cv": self.cv,
                "censored": self.censored, "t_max": self.t_max,
                "spectral_time": self.spectral_time, "kramers_time": self.kramers_time,
                "ratio_spectral": self.ratio_spectral, "ratio_kramers": self.ratio_kramers}


def exit_time_experiment(potential, report: LandscapeReport, beta: float, k: int = 1,
                         n_traj: int = 200, seed: int = 0, dt: float | None = None,
                         delta: float | None = None, grid: Grid | None = None,
                         ell: float | None = None, executor=None) -> ExitSummary:
    """Mean first transition time from the core of ``x_1`` into the core of ``x_0``.

    Compared against ``1 / ell_1`` of the discrete generator and the
    Eyring-Kramers time ``2 exp(beta W_1) / eta_1``. Runs longer than 50 times
    the spectral prediction are censored and counted.
    """
    from .functionals import eta_k
    from .spectral import build_generator, lowest_eigenpairs
    if k != 1:
        raise ValueError("only k = 1 is supported")
    if n_traj < 100:
        raise ValueError("n_traj must be at least 100")
    if report.n < 1:
        raise ValueError("landscape has a single minimum")
    if grid is None:
        res = 4001 if potential.dimension == 1 else 201
        grid = Grid(potential.box, (res,) * potential.dimension)
    if ell is None:
        gen = build_generator(potential, grid, beta)
        ell = float(lowest_eigenpairs(gen, report.n).eigenvalues[1])
    spectral_time = 1.0 / ell
    kramers_time = 2.0 * math.exp(beta * report.W(1)) / eta_k(report, 1)
    dt = stable_dt(potential, report) if dt is None else dt
    cores = core_map(report, grid, delta)
    t_max = 50.0 * spectral_time
    times = first_passage_times(potential, beta, report.minimum(1).point, cores, 0, n_traj,
                                seed, dt, t_max, executor, report)
    ok = times[np.isfinite(times)]
    if ok.size == 0:
        raise RuntimeError("every trajectory was censored")
    mean = float(ok.mean())
    std = float(ok.std(ddof=1)) if ok.size > 1 else math.nan
    return ExitSummary(float(beta), k, n_traj, seed, float(dt), mean, std / math.sqrt(ok.size),
                       std / mean, int(times.size - ok.size), t_max, spectral_time,
                       kramers_time, times)


def total_variation(p: GridMeasure, q: GridMeasure) -> float:
    if p.grid != q.grid:
        raise ValueError("measures on different grids")
    return 0.5 * float(np.sum(np.abs(p.density - q.density)) * p.grid.cell_volume)
