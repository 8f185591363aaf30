"""Explicit trial functions and recovery measures for the three Gamma-limits.

All trial functions are stored in ground-state coordinates: the amplitude
``phi_i = u_i * sqrt(w_i)`` with ``w_i`` the node weight of the declared
norm (``exp(-beta V_i) vol`` for the m-norm, ``vol`` for the dx-norm), so the
declared norm is the Euclidean norm of ``phi`` and the Dirichlet form of
``u`` is :func:`~gammafisher.dirichlet.dirichlet_form` of ``phi``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .dirichlet import dirichlet_form, edge_set
from .errors import CutoffOverlap, DeltaTooLarge
from .functionals import (AtomicMeasure, GridMeasure, eval_I, eval_J, eval_Jk,
                          fisher_information, mixture)
from .grid import Grid, sublevel_component
from .landscape import DEGENERATE, LandscapeReport
from .spectral import build_generator, lowest_eigenpairs

log = logging.getLogger(__name__)

NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal function with a declared normalization (``"m"`` or ``"dx"``).

    ``amplitude`` holds ``u * sqrt(weight)``; ``log_weight`` the log node weights.
    """

    grid: Grid
    amplitude: np.ndarray
    log_weight: np.ndarray
    normalization: str
    beta: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.normalization not in ("m", "dx"):
            raise ValueError("normalization must be 'm' or 'dx'")
        norm = float(np.sum(self.amplitude ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"declared norm is {norm!r}, not 1")

    @property
    def values(self) -> np.ndarray:
        """Nodal values ``u``; may overflow where the weight underflows."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self.amplitude * np.exp(-0.5 * self.log_weight)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.amplitude ** 2)))

    def inner(self, other: "GridFunction") -> float:
        if other.grid != self.grid or other.normalization != self.normalization:
            raise ValueError("inner product needs a common grid and normalization")
        return float(self.amplitude @ other.amplitude)

    def measure(self) -> GridMeasure:
        """Probability measure ``u^2 dm`` (or ``u^2 dx``) with the signed root attached."""
        return GridMeasure.from_amplitude(self.grid, self.amplitude, self.beta)


def _unit(log_amp, sign=None):
    # exp of log-amplitudes normalized in log space
    la = np.asarray(log_amp, dtype=float)
    out = np.exp(la - 0.5 * logsumexp(2.0 * la))
    return out if sign is None else out * sign


def smoothstep(t):
    """Quintic ``6t^5 - 15t^4 + 10t^3`` clamped to [0, 1]; C^2 at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (t * (6.0 * t - 15.0) + 10.0)


def hermite_functions(n: int, s):
    """Normalized Hermite functions ``psi_0..psi_n`` at ``s`` by three-term recurrence."""
    s = np.asarray(s, dtype=float)
    out = [np.pi ** -0.25 * np.exp(-0.5 * s * s)]
    if n >= 1:
        out.append(math.sqrt(2.0) * s * out[0])
    for j in range(1, n):
        out.append(math.sqrt(2.0 / (j + 1)) * s * out[j] - math.sqrt(j / (j + 1)) * out[j - 1])
    return out


def _critical(report: LandscapeReport, z):
    if isinstance(z, (int, np.integer)):
        return int(z), report.critical_points[int(z)]
    z = np.asarray(z, dtype=float)
    d = [np.linalg.norm(c.point - z) for c in report.critical_points]
    i = int(np.argmin(d))
    if d[i] > 1e-6:
        raise ValueError(f"{z.tolist()} is not a critical point")
    return i, report.critical_points[i]


def default_cutoff_radius(report: LandscapeReport) -> float:
    """Largest ``r`` keeping every ball of radius ``2r`` disjoint and inside the box."""
    pts = [c.point for c in report.critical_points]
    box = report.potential.box
    dmin = min((float(np.linalg.norm(a - b)) for i, a in enumerate(pts) for b in pts[i + 1:]),
               default=math.inf)
    wall = min(float(np.min(np.minimum(p - box[:, 0], box[:, 1] - p))) for p in pts)
    return min(dmin / 4.0, wall / 2.0)


def check_cutoff(report: LandscapeReport, r: float):
    pts = [c.point for c in report.critical_points]
    box = report.potential.box
    for i, a in enumerate(pts):
        if np.any(a - 2 * r < box[:, 0]) or np.any(a + 2 * r > box[:, 1]):
            raise CutoffOverlap(f"ball of radius {2 * r:.4g} around {a.tolist()} leaves the box")
        for b in pts[i + 1:]:
            if np.linalg.norm(a - b) < 4 * r:
                raise CutoffOverlap(f"balls of radius {2 * r:.4g} around {a.tolist()} and "
                                    f"{b.tolist()} intersect")


def hermite_quasimode(report: LandscapeReport, z, n, beta: float, grid: Grid,
                      cutoff_radius: float | None = None) -> GridFunction:
    """Cut-off harmonic-oscillator eigenfunction at the critical point ``z``.

    The transformed amplitude is ``chi(|x - z|) * prod_i h_{n_i}(s_i)`` with
    ``s_i = sqrt(beta |xi_i| / 2) <v_i, x - z>`` along the Hessian
    eigenvectors; ``chi`` equals 1 up to radius ``r`` and 0 beyond ``2r``.
    The returned function is m-normalized.
    """
    idx, c = _critical(report, z)
    if c.kind == DEGENERATE:
        raise ValueError("degenerate critical point has no harmonic model")
    n = tuple(int(v) for v in np.atleast_1d(n))
    if len(n) != grid.dimension or min(n) < 0:
        raise ValueError("n must have one nonnegative entry per dimension")
    r = default_cutoff_radius(report) if cutoff_radius is None else float(cutoff_radius)
    check_cutoff(report, r)
    y = grid.points - c.point
    dist = np.linalg.norm(y, axis=-1)
    chi = 1.0 - smoothstep((dist - r) / r)
    amp = chi.copy()
    for xi, v, ni in zip(c.hess_eigs, c.hess_vectors, n):
        s = math.sqrt(0.5 * beta * abs(xi)) * (y @ np.asarray(v))
        amp *= hermite_functions(ni, s)[ni]
    amp *= math.sqrt(grid.cell_volume)
    norm = np.linalg.norm(amp)
    if norm == 0:
        raise ValueError("quasimode vanishes on the grid (cutoff below the grid spacing?)")
    amp = amp / norm
    values = potential_values(report, grid)
    log_m = -beta * values + math.log(grid.cell_volume)
    lam = 0.5 * float(np.sum(np.abs(c.hess_eigs) - np.asarray(c.hess_eigs))) + float(
        np.dot(n, np.abs(c.hess_eigs)))
    meta = {"point": idx, "location": list(c.location), "n": list(n), "cutoff_radius": r,
            "harmonic_level": lam}
    return GridFunction(grid, amp, log_m, "m", float(beta), meta)


def potential_values(report: LandscapeReport, grid: Grid) -> np.ndarray:
    return report.potential.value(grid.points)


def default_delta(report: LandscapeReport) -> float:
    """Half the smallest gap ``W_k - W_{k+1}`` (``W_{n+1} = 0``)."""
    W = [report.W(k) for k in range(1, report.n + 1)] + [0.0]
    return 0.5 * min(a - b for a, b in zip(W, W[1:]))


def _well_component(values, shape, seed, deeper, vhat):
    """Component of ``{V < c}`` around ``seed`` with ``c <= vhat`` the largest level
    at which it still excludes every ``deeper`` node (the grid saddle level)."""
    def merged(level):
        comp = sublevel_component(values, shape, level, seed, strict=True)
        return comp, bool(comp[deeper].any())
    comp, bad = merged(vhat)
    if not bad:
        return comp
    levels = np.unique(values[(values > values[seed]) & (values <= vhat)])
    lo, hi = 0, levels.size - 1  # merged(levels[hi]) is True
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if merged(levels[mid])[1]:
            hi = mid
        else:
            lo = mid
    return merged(levels[lo])[0]


def well_quasimode(report: LandscapeReport, k: int, beta: float, grid: Grid,
                   delta: float | None = None) -> GridFunction:
    """Smoothed indicator of the well of ``x_k``, m-normalized.

    ``chi = 1 - smoothstep((V - (V_hat - delta)) / delta)`` on the grid
    component ``B_k`` of ``{V < V_hat}`` containing ``x_k``, zero elsewhere;
    it equals 1 on the component at level ``V_hat - delta``.
    """
    if not 1 <= k <= report.n:
        raise ValueError(f"k must be in 1..{report.n}")
    delta = default_delta(report) if delta is None else float(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    bound = 2.0 * default_delta(report)
    if delta >= bound:
        raise DeltaTooLarge(f"delta={delta:.4g} must be below min_k(W_k - W_(k+1)) = {bound:.4g}")
    values = potential_values(report, grid)
    vhat = report.minimum(k).value + report.W(k)
    seed = int(grid.nearest_index(report.minimum(k).point)[0])
    core = sublevel_component(values, grid.shape, vhat - delta, seed)
    if not core[seed]:
        raise DeltaTooLarge(f"x_{k} is not below level V_hat - delta = {vhat - delta:.6g}")
    deeper = [int(grid.nearest_index(report.minimum(j).point)[0]) for j in range(k)]
    well = _well_component(values, grid.shape, seed, deeper, vhat)
    chi = np.where(well, 1.0 - smoothstep((values - (vhat - delta)) / delta), 0.0)
    chi[core] = 1.0
    log_m = -beta * values + math.log(grid.cell_volume)
    with np.errstate(divide="ignore"):
        la = np.log(chi) + 0.5 * log_m
    amp = _unit(la)
    log_Z = float(logsumexp(2.0 * np.log(chi[chi > 0]) + log_m[chi > 0]))
    meta = {"k": k, "delta": delta, "V_hat": vhat, "log_Z": log_Z,
            "core_nodes": int(core.sum()), "well_nodes": int(well.sum())}
    return GridFunction(grid, amp, log_m, "m", float(beta), meta)


def recovery_measure_I(xbar, beta: float, grid: Grid, potential=None) -> GridMeasure:
    """Gaussian ``exp(-2 beta |x - xbar|^2)`` normalized on the grid."""
    xbar = np.atleast_1d(np.asarray(xbar, dtype=float))
    box = np.asarray(grid.box)
    if np.any(xbar <= box[:, 0]) or np.any(xbar >= box[:, 1]):
        raise ValueError("xbar must lie in the box interior")
    d2 = np.sum((grid.points - xbar) ** 2, axis=-1)
    return GridMeasure.from_log_density(grid, -2.0 * beta * d2, beta)


def rayleigh_quotient(f: GridFunction, potential, edges=None) -> float:
    """``<u, -(1/beta) L u>`` for an m-normalized ``u``."""
    if edges is None:
        edges = edge_set(f.grid, potential.value(f.grid.points), f.beta)
    return float(dirichlet_form(f.amplitude, edges)) / f.beta


def residual(f: GridFunction, potential, level: float, generator=None) -> float:
    """``|| (-(1/beta) L - level) u ||_m`` on the grid."""
    gen = generator or build_generator(potential, f.grid, f.beta, check=False)
    S = gen.symmetrized()
    return float(np.linalg.norm(S @ f.amplitude / f.beta - level * f.amplitude))


def gram_matrix(functions) -> np.ndarray:
    A = np.column_stack([f.amplitude for f in functions])
    return A.T @ A


@dataclass(frozen=True)
class WitnessRow:
    beta: float
    level: str
    target: str
    target_value: float
    computed: float
    direct: float
    ratio: float | None

    def to_dict(self) -> dict:
        return {"beta": self.beta, "level": self.level, "target": self.target,
                "target_value": self.target_value, "computed": self.computed,
                "direct": self.direct, "ratio": self.ratio}


@dataclass(frozen=True)
class WitnessReport:
    """Witness values per ``beta`` and level.

    ``computed`` is the witness for the target measure: for mixtures it is the
    convex combination of the constituents' values, and ``direct`` the value
    on the mixed measure itself (never larger, by convexity). L1 targets use
    ``eval_I``; the L1 values tend to half of it at non-critical points.
    """

    rows: tuple
    meta: dict

    def select(self, level=None, target=None):
        return [r for r in self.rows if (level is None or r.level == level)
                and (target is None or r.target == target)]

    def to_dict(self) -> dict:
        return {"meta": self.meta, "rows": [r.to_dict() for r in self.rows]}

    def to_csv(self, fmt=repr) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["beta", "level", "target", "target_value", "computed", "direct", "ratio"]
        w.writerow(cols)
        for r in self.rows:
            d = r.to_dict()
            w.writerow([d[c] if isinstance(d[c], str) else ("" if d[c] is None else fmt(d[c]))
                        for c in cols])
        return buf.getvalue()


def _ratio(computed, target):
    # targets at critical points vanish up to gradient rounding
    return None if abs(target) < 1e-12 else float(computed / target)


def _label(points):
    return "+".join("delta(" + ",".join(f"{v:.6g}" for v in p) + ")" for p in points)


def _probe(report: LandscapeReport) -> np.ndarray:
    """A non-critical point: a quarter of the way from ``x_0`` to the nearest critical point."""
    x0 = report.minimum(0).point
    others = [c.point for c in report.critical_points if np.linalg.norm(c.point - x0) > 1e-9]
    if not others:
        return x0 + 0.25
    near = min(others, key=lambda p: float(np.linalg.norm(p - x0)))
    return x0 + 0.25 * (near - x0)


def gamma_witness_suite(report: LandscapeReport, potential, beta_list, grid: Grid,
                        cutoff_radius: float | None = None, executor=None) -> WitnessReport:
    """Tabulate the three Gamma-levels along ``beta_list`` against their limits.

    L1: ``I_beta`` of Gaussian recovery measures at every critical point and
    one probe, against ``eval_I``. L2: ``beta I_beta`` of Hermite ground
    quasimode measures (each critical point, then their uniform mixture)
    against ``eval_J``. L3: ``beta exp(beta W_k) I_beta`` of eigenfunction
    measures and mixtures against ``eval_Jk``; levels whose assumptions fail
    are skipped and listed in ``meta["skipped"]``.
    """
    crit = [c for c in report.critical_points if c.kind != DEGENERATE]
    probes = [c.point for c in crit] + [_probe(report)]
    skipped = [k for k in range(1, report.n + 1) if not report.level_ok(k)]

    def one(beta):
        beta = float(beta)
        rows = []
        for p in probes:
            mu = recovery_measure_I(p, beta, grid)
            val = fisher_information(mu, potential, beta)
            tv = eval_I(AtomicMeasure.dirac(p), potential)
            rows.append(WitnessRow(beta, "L1", _label([p]), tv, val, val, _ratio(val, tv)))
        # L2
        qms = [hermite_quasimode(report, report.critical_points.index(c), (0,) * grid.dimension,
                                 beta, grid, cutoff_radius) for c in crit]
        vals = []
        for c, q in zip(crit, qms):
            v = beta * fisher_information(q.measure(), potential, beta)
            vals.append(v)
            tv = eval_J(AtomicMeasure.dirac(c.point), report)
            rows.append(WitnessRow(beta, "L2", _label([c.point]), tv, v, v, _ratio(v, tv)))
        if len(crit) > 1:
            alpha = np.full(len(crit), 1.0 / len(crit))
            target = AtomicMeasure(tuple((c.point, a) for c, a in zip(crit, alpha)))
            mix = mixture(alpha, [q.measure() for q in qms])
            direct = beta * fisher_information(mix, potential, beta)
            comp = float(alpha @ np.asarray(vals))
            tv = eval_J(target, report)
            rows.append(WitnessRow(beta, "L2", _label([c.point for c in crit]), tv, comp,
                                   direct, _ratio(comp, tv)))
        # L3
        if report.n >= 1 and len(skipped) < report.n:
            gen = build_generator(potential, grid, beta)
            res = lowest_eigenpairs(gen, report.n)
            ell = res.eigenvalues
            for k in range(1, report.n + 1):
                if k in skipped:
                    continue
                scale = beta * math.exp(beta * report.W(k))
                meas = [res.measure(j) for j in range(k + 1)]
                fis = [fisher_information(m, potential, generator=gen) for m in meas]
                for j in (0, k):
                    v = scale * fis[j]
                    pt = report.minimum(j).point
                    tv = eval_Jk(AtomicMeasure.dirac(pt), report, k)
                    rows.append(WitnessRow(beta, f"L3.{k}", _label([pt]), tv, v, v,
                                           _ratio(v, tv)))
                alpha = np.full(k + 1, 1.0 / (k + 1))
                pts = [report.minimum(j).point for j in range(k + 1)]
                target = AtomicMeasure(tuple(zip(pts, alpha)))
                comp = float(scale * (alpha @ np.asarray(fis)))
                direct = scale * fisher_information(mixture(alpha, meas), potential, beta)
                tv = eval_Jk(target, report, k)
                rows.append(WitnessRow(beta, f"L3.{k}", _label(pts), tv, comp, direct,
                                       _ratio(comp, tv)))
        return rows

    mapper = executor.map if executor is not None else map
    rows = [r for chunk in mapper(one, beta_list) for r in chunk]
    meta = {"betas": [float(b) for b in beta_list], "grid": grid.describe(),
            "skipped": [{"k": k, "reason": "assumption A.4/A.5 fails"} for k in skipped],
            "I_convention": "eval_I integrates |grad V|^2; L1 values tend to half of it"}
    return WitnessReport(tuple(rows), meta)
