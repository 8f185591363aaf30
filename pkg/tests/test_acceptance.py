"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
import conftest  # noqa: E402

from gammafisher import (Grid, GridMeasure, analyze, build_generator, cli,  # noqa: E402
                         coercivity_bound, compare_spectra, double_well, eta_k,
                         exit_time_experiment, fisher_information, gibbs_measure, harmonic,
                         harmonic_spectrum, hermite_quasimode, lowest_eigenpairs, mixture,
                         recovery_measure_I, simulate)
from gammafisher.langevin import total_variation  # noqa: E402
from gammafisher.spectral import drift_is_monotone, kramers_sweep  # noqa: E402

SWEEP = (8.0, 12.0, 16.0, 20.0)


def record(n, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def grid():
    return Grid([[-3.0, 3.0]], [4001])


def test_criterion_01_landscape():
    t0 = time.perf_counter()
    sym = analyze(double_well())
    tilted = analyze(double_well(tilt=0.25))
    elapsed = time.perf_counter() - t0
    locs = [c.location[0] for c in sym.critical_points]
    hess = [c.hess_eigs[0] for c in sym.critical_points]
    # exact oracle: maximum of V on the segment between the saddle and the shallow minimum
    r = np.sort(np.roots([4.0, 0.0, -4.0, 0.25]).real)
    seg = np.linspace(r[1], r[2], 400001)
    w_oracle = ((seg ** 2 - 1) ** 2 + 0.25 * seg).max() - ((r[2] ** 2 - 1) ** 2 + 0.25 * r[2])
    flags = tilted.assumption_flags
    ok = (np.allclose(locs, [-1, 0, 1], atol=1e-8) and np.allclose(hess, [8, -4, 8], atol=1e-6)
          and np.allclose([b.W for b in sym.barriers], [1, 1], atol=1e-8)
          and not sym.assumption_flags["A.5"].passed
          and all(flags[k].passed for k in ("A.1", "A.4", "A.5"))
          and abs(tilted.W(1) - w_oracle) <= 1e-4 and elapsed < 1.0)
    record(1, ok, f"W1 error {abs(tilted.W(1) - w_oracle):.2e}, runtime {elapsed:.2f}s")


def test_criterion_02_clusters(grid):
    t0 = time.perf_counter()
    V = double_well()
    rep = analyze(V)
    pred = harmonic_spectrum(rep, 10.0)
    res = lowest_eigenpairs(build_generator(V, grid, 20.0), 10)
    cmp = compare_spectra(res, pred, epsilon=1.0)
    elapsed = time.perf_counter() - t0
    got = {c["lambda"]: (c["expected"], c["observed"]) for c in cmp.clusters}
    ok = got == {0.0: (2, 2), 4.0: (1, 1), 8.0: (3, 3)} and elapsed < 30
    record(2, ok, f"(lambda: expected, observed) {got}, runtime {elapsed:.1f}s")


@pytest.fixture(scope="module")
def sweep(grid):
    V = double_well(tilt=0.25)
    rep = analyze(V)
    t0 = time.perf_counter()
    rows = kramers_sweep(V, rep, grid, SWEEP)
    return rows, time.perf_counter() - t0


def test_criterion_03_eyring_kramers(sweep):
    rows, elapsed = sweep
    last = rows[-1]["ratio"]
    ok = abs(last - 1) <= 0.15 and drift_is_monotone(rows) and elapsed < 120
    ratios = ", ".join(f"{r['ratio']:.4f}" for r in rows)
    record(3, ok, f"ratios over beta {SWEEP}: {ratios}; runtime {elapsed:.1f}s")


def test_criterion_04_fisher_identity(grid):
    V = double_well(tilt=0.25)
    worst = 0.0
    for beta in SWEEP:
        gen = build_generator(V, grid, beta)
        res = lowest_eigenpairs(gen, 5)
        for k in range(6):
            f = fisher_information(res.measure(k), V, generator=gen)
            target = 2 * res.eigenvalues[k] / beta
            if target != 0:
                worst = max(worst, abs(f / target - 1))
            elif f != 0:
                worst = math.inf
    record(4, worst <= 1e-10, f"max relative error {worst:.2e} over k <= 5 and beta {SWEEP}")


def test_criterion_05_witness_level1(grid):
    t0 = time.perf_counter()
    beta = 20.0
    val = fisher_information(recovery_measure_I(0.0, beta, grid), harmonic(), beta)
    elapsed = time.perf_counter() - t0
    rel = abs(val / (9 / (8 * beta)) - 1)
    record(5, rel <= 0.02 and elapsed < 5, f"relative error {rel:.2e}, runtime {elapsed:.2f}s")


def test_criterion_06_witness_level2(grid):
    V = double_well()
    rep = analyze(V)
    vals = {}
    for beta in (50.0, 100.0):
        f = hermite_quasimode(rep, [0.0], (0,), beta, grid)
        vals[beta] = beta * fisher_information(f.measure(), V, beta)
    err = {b: abs(v / 8.0 - 1) for b, v in vals.items()}
    ok = err[100.0] <= 0.10 and err[100.0] < err[50.0]
    record(6, ok, f"beta*I at beta 50, 100: {vals[50.0]:.4f}, {vals[100.0]:.4f} (target 8)")


def test_criterion_07_witness_level3(grid):
    V = double_well(tilt=0.25)
    rep = analyze(V)
    eta = eta_k(rep, 1)
    dev = []
    for beta in SWEEP:
        gen = build_generator(V, grid, beta)
        res = lowest_eigenpairs(gen, 1)
        scaled = beta * math.exp(beta * rep.W(1)) * fisher_information(res.measure(1), V,
                                                                        generator=gen)
        dev.append(abs(scaled / eta - 1))
    ok = dev[-1] <= 0.15 and all(b < a for a, b in zip(dev, dev[1:]))
    record(7, ok, "relative deviation from eta_1: " + ", ".join(f"{d:.4f}" for d in dev))


def _random_measures(grid, rng, count):
    x = grid.points
    out = []
    for i in range(count):
        kind = i % 3
        if kind == 0:  # rough random walk in log-density
            logd = rng.normal(size=grid.size).cumsum() * rng.uniform(0.01, 0.3)
        elif kind == 1:  # random Gaussian bump
            box = np.asarray(grid.box)
            c = rng.uniform(box[:, 0], box[:, 1])
            logd = -rng.uniform(0.5, 50.0) * np.sum((x - c) ** 2, axis=-1)
        else:  # positive noise
            logd = np.log(rng.random(grid.size) + 1e-3)
        out.append(GridMeasure.from_log_density(grid, logd))
    return out


def test_criterion_08_coercivity_convexity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    cases = [(double_well(), Grid([[-3.0, 3.0]], [401])),
             (double_well(tilt=0.25), Grid([[-3.0, 3.0]], [401])),
             (harmonic(), Grid([[-3.0, 3.0]], [401])),
             (double_well(tilt=0.25, transverse=2.0), Grid([[-2.0, 2.0], [-1.5, 1.5]], [41, 31]))]
    violations, worst_slack = 0, 0.0
    for V, g in cases:
        measures = _random_measures(g, rng, 1000)
        betas = rng.uniform(1.0, 20.0, size=len(measures))
        fis = [fisher_information(mu, V, b) for mu, b in zip(measures, betas)]
        for mu, b, fi in zip(measures, betas, fis):
            cont, disc, slack = coercivity_bound(mu, V, b)
            worst_slack = max(worst_slack, slack)
            if fi < disc * (1 - 1e-12) or fi < cont - slack - 1e-12 * max(abs(cont), 1.0):
                violations += 1
        for j in range(len(measures)):
            a, c = measures[j], measures[(j + 1) % len(measures)]
            b = betas[j]
            mid = fisher_information(mixture([0.5, 0.5], [a, c]), V, b)
            if mid > 0.5 * (fisher_information(a, V, b) + fisher_information(c, V, b)) * (1 + 1e-12):
                violations += 1
    elapsed = time.perf_counter() - t0
    record(8, violations == 0 and elapsed < 60,
           f"{violations} violations in 4x1000 measures, largest quadrature slack {worst_slack:.3g}, "
           f"runtime {elapsed:.1f}s")


def test_criterion_09_langevin():
    t0 = time.perf_counter()
    V = double_well(tilt=0.25)
    rep = analyze(V)
    ex = exit_time_experiment(V, rep, 8.0, 1, 200, 0)
    ou = harmonic()
    g = Grid(ou.box, [64])
    _, occ = simulate(ou, 10.0, [0.0], 0.01, 1000.0, 0, grid=g, occupation=True,
                      report=analyze(ou))
    tv = total_variation(occ, gibbs_measure(g, ou, 10.0))
    elapsed = time.perf_counter() - t0
    ok = abs(ex.ratio_spectral - 1) <= 0.30 and ex.censored == 0 and tv <= 0.05 and elapsed < 300
    record(9, ok, f"mean exit / (1/ell_1) = {ex.ratio_spectral:.3f}, occupation TV {tv:.4f}, "
                  f"runtime {elapsed:.1f}s")


def test_criterion_10_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"potential": {"family": "double_well", "params": {"tilt": 0.25}},
                               "seed": 3}))
    trees = []
    for name, threads in (("a", 1), ("b", 1), ("c", 4)):
        assert cli.run("all", cfg, tmp_path / name, threads=threads) == 0
        root = tmp_path / name
        trees.append({p.relative_to(root).as_posix(): p.read_bytes()
                      for p in sorted(root.rglob("*")) if p.is_file()})
    ok = trees[0] == trees[1] == trees[2] and len(trees[0]) >= 10
    record(10, ok, f"{len(trees[0])} files byte-identical over 3 runs (1, 1 and 4 threads)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
