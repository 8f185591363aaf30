"""Discrete generator, low-lying spectrum and its harmonic / Kramers predictions.

The generator is the reversible nearest-neighbour chain

    (L u)_i = sum_{j~i} w_ij (u_j - u_i),   w_ij = h^-2 exp(-beta (V_mid - V_i)),

with ``V_mid = (V_i + V_j) / 2``. Conjugating by ``diag(sqrt(m))`` gives a
symmetric matrix whose off-diagonal entries are the constant ``-h^-2`` and
whose diagonal is ``sum_j h^-2 exp(beta (V_i - V_j) / 2)``; the spectrum is
computed from that form and each eigenvalue is then re-evaluated as the
Rayleigh quotient written as a sum of squares over edges, which keeps
exponentially small eigenvalues accurate to high relative precision.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.special import logsumexp

from .dirichlet import EdgeSet, dirichlet_form, edge_set, witten_diagonal
from .errors import AssumptionViolated, ResolutionGuardFailed, SolverStagnation
from .functionals import GridMeasure, eta_k, zeta
from .grid import Grid
from .landscape import DEGENERATE, LandscapeReport

log = logging.getLogger(__name__)

# classically allowed region (in units of -(1/beta) L) where the resolution guard applies
GUARD_LEVEL = 50.0
DENSE_LIMIT_2D = 1500


@dataclass(frozen=True, eq=False)
class DiscreteGenerator:
    grid: Grid
    beta: float
    values: np.ndarray
    edges: EdgeSet
    log_gibbs: np.ndarray
    guard: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def gibbs(self) -> np.ndarray:
        """``m_i = exp(-beta V_i) vol``; may underflow far from the minima."""
        return np.exp(self.log_gibbs)

    def rates(self):
        """Rates along each edge: ``(head -> tail, tail -> head)``."""
        g = self.edges.half_gap
        return self.edges.inv_h2 * np.exp(-g), self.edges.inv_h2 * np.exp(g)

    def matrix(self) -> sparse.csr_matrix:
        """Sparse ``L`` (rows sum to zero)."""
        fwd, bwd = self.rates()
        i, j = self.edges.head, self.edges.tail
        n = self.size
        off = sparse.coo_matrix((np.concatenate([fwd, bwd]),
                                 (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
        out = np.zeros(n)
        np.add.at(out, i, fwd)
        np.add.at(out, j, bwd)
        return (off - sparse.diags(out)).tocsr()

    def apply(self, u) -> np.ndarray:
        return self.matrix() @ np.asarray(u, dtype=float)

    def symmetrized(self) -> sparse.csr_matrix:
        """``S = diag(sqrt m) (-L) diag(sqrt m)^-1`` built without forming ``m``."""
        n = self.size
        i, j = self.edges.head, self.edges.tail
        off = -self.edges.inv_h2
        S = sparse.coo_matrix((np.concatenate([off, off]),
                               (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
        return (S + sparse.diags(witten_diagonal(n, self.edges))).tocsr()

    def ground_state(self) -> np.ndarray:
        """Unit kernel vector of ``S``: ``sqrt(m) / ||sqrt(m)||``."""
        return np.exp(0.5 * (self.log_gibbs - logsumexp(self.log_gibbs)))

    def dirichlet(self, phi) -> np.ndarray:
        return dirichlet_form(phi, self.edges)

    def describe(self) -> dict:
        return {"grid": self.grid.describe(), "beta": self.beta, "guard": self.guard}


def resolution_guard(potential, grid: Grid, beta: float, guard_level: float = GUARD_LEVEL):
    """``beta * |grad V| * h`` maximized over the classically allowed region.

    The region is where ``beta |grad V|^2 / 4 - Lap V / 2 <= guard_level``;
    outside it the ground-state transformed low modes decay exponentially.
    """
    pts = grid.points
    g = np.linalg.norm(potential.gradient(pts), axis=-1)
    witten = 0.25 * beta * g ** 2 - 0.5 * potential.laplacian(pts)
    region = witten <= guard_level
    h = float(np.max(grid.spacing))
    gmax = float(np.max(g[region])) if region.any() else 0.0
    return {"value": beta * gmax * h, "max_grad": gmax, "h": h, "guard_level": guard_level,
            "region_fraction": float(region.mean()),
            "h_bound": (1.0 / (beta * gmax)) if gmax > 0 else math.inf}


def build_generator(potential, grid: Grid, beta: float, guard_level: float = GUARD_LEVEL,
                    check: bool = True) -> DiscreteGenerator:
    """Assemble the detailed-balance generator of the Langevin diffusion on ``grid``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if grid.dimension != potential.dimension:
        raise ValueError("grid and potential dimensions differ")
    guard = resolution_guard(potential, grid, beta, guard_level)
    if check and guard["value"] > 1.0:
        raise ResolutionGuardFailed(
            f"beta*|grad V|*h = {guard['value']:.3g} > 1 on the allowed region; "
            f"need h <= {guard['h_bound']:.3g} (have {guard['h']:.3g})", guard["h_bound"])
    values = potential.value(grid.points)
    edges = edge_set(grid, values, beta)
    log_gibbs = -beta * values + math.log(grid.cell_volume)
    return DiscreteGenerator(grid, float(beta), values, edges, log_gibbs, guard)


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Lowest eigenpairs of ``-(1/beta) L``.

    ``vectors[:, k]`` are the eigenvectors in ground-state coordinates
    (``phi = Phi * sqrt(m)``), so the m-weighted orthonormality of ``Phi``
    is plain Euclidean orthonormality of the columns.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    beta: float
    grid: Grid
    solver: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    def eigenfunction(self, k: int, log_gibbs) -> np.ndarray:
        """``Phi_k = phi_k / sqrt(m)``; overflows where ``m`` underflows."""
        with np.errstate(over="ignore"):
            return self.vectors[:, k] * np.exp(-0.5 * np.asarray(log_gibbs))

    def measure(self, k: int) -> GridMeasure:
        """The probability measure ``Phi_k^2 m`` with the signed amplitude attached."""
        return GridMeasure.from_amplitude(self.grid, self.vectors[:, k], self.beta)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "grid": self.grid.describe(),
                "eigenvalues": self.eigenvalues.tolist(),
                "residuals": self.residuals.tolist(), "solver": self.solver}


def _orthonormalize(kernel, vecs):
    """Gram-Schmidt against the exact kernel, dropping the computed kernel copy."""
    proj = vecs - np.outer(kernel, kernel @ vecs)
    drop = int(np.argmin(np.linalg.norm(proj, axis=0)))
    rest = np.delete(proj, drop, axis=1)
    for _ in range(2):
        rest = rest - np.outer(kernel, kernel @ rest)
        rest, _ = np.linalg.qr(rest)
    return np.column_stack([kernel, rest])


def lowest_eigenpairs(gen: DiscreteGenerator, count: int, solver_tol: float = 1e-10,
                      max_iter: int | None = None) -> SpectralResult:
    """The ``count + 1`` smallest eigenpairs of ``-(1/beta) L``."""
    if count > 40:
        raise ValueError("count must be <= 40")
    k = count + 1
    n = gen.size
    if k >= n:
        raise ValueError("grid too small for the requested count")
    info = {"count": count, "solver_tol": solver_tol}
    if gen.grid.dimension == 1:
        diag = witten_diagonal(n, gen.edges)
        off = -gen.edges.inv_h2
        vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1),
                                      lapack_driver="stemr")
        info["method"] = "tridiagonal"
    elif n <= DENSE_LIMIT_2D:
        vals, vecs = eigh(gen.symmetrized().toarray(), subset_by_index=(0, k - 1))
        info["method"] = "dense"
    else:
        S = gen.symmetrized()
        sigma = -1.0
        try:
            vals, vecs = eigsh(S, k=k, sigma=sigma, which="LM", tol=solver_tol,
                               maxiter=max_iter)
        except ArpackNoConvergence as exc:
            raise SolverStagnation(
                f"shift-invert Lanczos did not converge ({len(exc.eigenvalues)} of {k})",
                {"converged": len(exc.eigenvalues), "requested": k}) from exc
        info["method"] = "shift-invert-lanczos"
        info["sigma"] = sigma
    order = np.argsort(vals)
    vecs = vecs[:, order]
    info["raw_eigenvalues"] = (vals[order] / gen.beta).tolist()
    phi = _orthonormalize(gen.ground_state(), vecs)
    rq = gen.dirichlet(phi) / gen.beta
    order = np.argsort(rq, kind="stable")
    rq, phi = rq[order], phi[:, order]
    for j in range(phi.shape[1]):
        if phi[np.argmax(np.abs(phi[:, j])), j] < 0:
            phi[:, j] = -phi[:, j]
    S = gen.symmetrized()
    res = np.linalg.norm(S @ phi / gen.beta - phi * rq, axis=0)
    return SpectralResult(rq, phi, res, gen.beta, gen.grid, info)


@dataclass(frozen=True)
class HarmonicPrediction:
    """Harmonic levels ``zeta(z)/2 + sum_i n_i |xi_i(z)|`` up to ``Lambda``."""

    entries: tuple  # (critical point index, n tuple, lambda)
    clusters: tuple  # (lambda, multiplicity, member entry indices)
    Lambda: float

    def multiplicities(self) -> dict:
        return {lam: mult for lam, mult, _ in self.clusters}

    def to_dict(self) -> dict:
        return {"Lambda": self.Lambda,
                "entries": [{"point": i, "n": list(nn), "lambda": lam}
                            for i, nn, lam in self.entries],
                "clusters": [{"lambda": lam, "multiplicity": m} for lam, m, _ in self.clusters]}


def default_Lambda(report: LandscapeReport) -> float:
    """1.25 times the largest harmonic ground level (first excitation if all are zero)."""
    levels = [0.5 * zeta(c.hess_eigs) for c in report.critical_points if c.kind != DEGENERATE]
    top = max(levels, default=0.0)
    if top > 0:
        return 1.25 * top
    return 1.25 * min(abs(e) for c in report.critical_points for e in c.hess_eigs)


def harmonic_spectrum(report: LandscapeReport, Lambda: float | None = None,
                      tie_tol: float = 1e-6) -> HarmonicPrediction:
    """Enumerate all harmonic levels ``<= Lambda`` and group ties."""
    Lambda = default_Lambda(report) if Lambda is None else float(Lambda)
    entries = []
    for idx, c in enumerate(report.critical_points):
        if c.kind == DEGENERATE:
            continue
        xi = np.abs(np.asarray(c.hess_eigs))
        base = 0.5 * zeta(c.hess_eigs)
        caps = [int(math.floor((Lambda - base) / x + 1e-9)) if Lambda >= base else -1 for x in xi]
        if min(caps) < 0:
            continue
        for nn in itertools.product(*(range(cap + 1) for cap in caps)):
            lam = base + float(np.dot(nn, xi))
            if lam <= Lambda + tie_tol:
                entries.append((idx, tuple(int(v) for v in nn), lam))
    entries.sort(key=lambda e: (e[2], e[0], e[1]))
    clusters = []
    for pos, e in enumerate(entries):
        if clusters and abs(e[2] - clusters[-1][0]) <= tie_tol * max(1.0, abs(e[2])):
            lam, mult, members = clusters[-1]
            clusters[-1] = (lam, mult + 1, members + (pos,))
        else:
            clusters.append((e[2], 1, (pos,)))
    return HarmonicPrediction(tuple(entries), tuple(clusters), Lambda)


def kramers_prediction(report: LandscapeReport, beta: float, k: int) -> float:
    """``eta_k / 2 * exp(-beta W_k)``."""
    if k < 1:
        raise ValueError("k = 0 has no barrier (W_0 = +inf)")
    if not report.level_ok(k):
        raise AssumptionViolated(f"A.4/A.5 fail for level {k}")
    return 0.5 * eta_k(report, k) * math.exp(-beta * report.W(k))


@dataclass(frozen=True)
class ComparisonReport:
    beta: float
    epsilon: float
    clusters: tuple  # dicts: lambda, expected, observed, match
    stray: tuple  # computed eigenvalues in [0, Lambda] outside every window
    complete: bool
    kramers: tuple  # dicts: beta, k, ell, prediction, ratio
    skipped: tuple = ()

    @property
    def clusters_match(self) -> bool:
        return self.complete and all(c["match"] for c in self.clusters)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "epsilon": self.epsilon, "clusters": list(self.clusters),
                "stray": list(self.stray), "complete": self.complete,
                "clusters_match": self.clusters_match, "kramers": list(self.kramers),
                "skipped": list(self.skipped)}


def default_epsilon(prediction: HarmonicPrediction) -> float:
    lams = [c[0] for c in prediction.clusters]
    if len(lams) < 2:
        return 0.5
    return 0.5 * float(np.min(np.diff(lams)))


def compare_spectra(result: SpectralResult, prediction_bounded: HarmonicPrediction,
                    prediction_kramers: dict | None = None,
                    epsilon: float | None = None) -> ComparisonReport:
    """Cluster counts against ``|S_lambda|`` and low eigenvalues against Kramers."""
    eps = default_epsilon(prediction_bounded) if epsilon is None else float(epsilon)
    ell = result.eigenvalues
    rows = []
    for lam, mult, _ in prediction_bounded.clusters:
        observed = int(np.sum((ell > lam - eps) & (ell < lam + eps)))
        rows.append({"lambda": lam, "expected": mult, "observed": observed,
                     "match": observed == mult})
    windows = [(lam - eps, lam + eps) for lam, _, _ in prediction_bounded.clusters]
    stray = tuple(float(v) for v in ell if v <= prediction_bounded.Lambda
                  and not any(a < v < b for a, b in windows))
    top = max((b for _, b in windows), default=0.0)
    complete = bool(ell[-1] >= min(top, prediction_bounded.Lambda))
    kr, skipped = [], []
    for k, pred in sorted((prediction_kramers or {}).items()):
        if pred is None:
            skipped.append({"k": k, "reason": "assumption A.4/A.5 fails"})
            continue
        rows_k = {"beta": result.beta, "k": k, "ell": float(ell[k]), "prediction": pred,
                  "ratio": float(ell[k] / pred)}
        kr.append(rows_k)
    return ComparisonReport(result.beta, eps, tuple(rows), stray, complete, tuple(kr),
                            tuple(skipped))


def kramers_predictions(report: LandscapeReport, beta: float) -> dict:
    """``{k: prediction or None}`` for every barrier level, None where assumptions fail."""
    out = {}
    for k in range(1, report.n + 1):
        try:
            out[k] = kramers_prediction(report, beta, k)
        except (AssumptionViolated, KeyError):
            out[k] = None
    return out


def spectrum_at(potential, report: LandscapeReport, grid: Grid, beta: float,
                count: int | None = None, solver_tol: float = 1e-10,
                guard_level: float = GUARD_LEVEL) -> SpectralResult:
    """Build the generator and compute enough eigenpairs to cover the harmonic window."""
    if count is None:
        pred = harmonic_spectrum(report)
        count = min(40, max(report.n + 2, sum(m for _, m, _ in pred.clusters) + 2))
    gen = build_generator(potential, grid, beta, guard_level)
    return lowest_eigenpairs(gen, count, solver_tol)


def kramers_sweep(potential, report: LandscapeReport, grid: Grid, betas, k: int = 1,
                  solver_tol: float = 1e-10, executor=None) -> list:
    """Rows ``{beta, k, ell, prediction, ratio}`` along a sweep of ``beta``."""
    def one(beta):
        gen = build_generator(potential, grid, beta)
        res = lowest_eigenpairs(gen, max(k, report.n) + 1, solver_tol)
        pred = kramers_prediction(report, beta, k)
        return {"beta": float(beta), "k": k, "ell": float(res.eigenvalues[k]),
                "prediction": pred, "ratio": float(res.eigenvalues[k] / pred)}
    mapper = executor.map if executor is not None else map
    return list(mapper(one, betas))


def drift_is_monotone(rows) -> bool:
    """True if ``|ratio - 1|`` strictly decreases along the sweep."""
    dev = [abs(r["ratio"] - 1.0) for r in sorted(rows, key=lambda r: r["beta"])]
    return all(b < a for a, b in zip(dev, dev[1:]))
