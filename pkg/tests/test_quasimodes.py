import math

import numpy as np
import pytest

from gammafisher import (Grid, build_generator, fisher_information, gamma_witness_suite,
                         hermite_quasimode, lowest_eigenpairs, recovery_measure_I, well_quasimode)
from gammafisher.errors import CutoffOverlap, DeltaTooLarge
from gammafisher.functionals import eta_k, mixture
from gammafisher.quasimodes import (default_cutoff_radius, default_delta, gram_matrix,
                                    hermite_functions, rayleigh_quotient, residual, smoothstep)


@pytest.fixture(scope="module")
def ou_grid():
    return Grid([[-4.0, 4.0]], [2001])


def test_hermite_recurrence_orthonormal():
    s = np.linspace(-12, 12, 20001)
    ds = s[1] - s[0]
    H = np.array(hermite_functions(12, s))
    G = H @ H.T * ds
    assert np.abs(G - np.eye(13)).max() < 1e-10


def test_smoothstep_profile():
    t = np.linspace(-0.5, 1.5, 2001)
    s = smoothstep(t)
    assert s.min() == 0.0 and s.max() == 1.0
    assert np.all(np.diff(s) >= 0)


def test_ou_ground_quasimode_is_flat(ou_report, ou_grid, ou):
    q = hermite_quasimode(ou_report, 0, (0,), 50.0, ou_grid)
    assert rayleigh_quotient(q, ou) <= 1e-6
    inside = np.abs(ou_grid.points[:, 0]) < q.meta["cutoff_radius"]
    vals = q.values[inside]
    assert np.allclose(vals, vals[0], rtol=1e-8)
    assert q.norm() == pytest.approx(1.0, abs=1e-10)


def test_saddle_quasimode_rayleigh(sym_report, sym, line_grid):
    q = hermite_quasimode(sym_report, 1, (0,), 100.0, line_grid)
    assert abs(rayleigh_quotient(q, sym) - 4.0) <= 0.1 * 4.0


def test_disjoint_supports_orthogonal(sym_report, line_grid):
    a = hermite_quasimode(sym_report, 0, (0,), 20.0, line_grid)
    b = hermite_quasimode(sym_report, 2, (0,), 20.0, line_grid)
    assert a.inner(b) == 0.0


def test_cutoff_overlap(sym_report, line_grid):
    assert default_cutoff_radius(sym_report) == pytest.approx(0.25)
    with pytest.raises(CutoffOverlap):
        hermite_quasimode(sym_report, 1, (0,), 20.0, line_grid, cutoff_radius=1.0 / 3.0)


def test_residual_decreases(sym_report, sym, line_grid):
    betas = [25.0, 100.0, 400.0]
    res = []
    for beta in betas:
        q = hermite_quasimode(sym_report, 1, (0,), beta, line_grid)
        res.append(residual(q, sym, 4.0))
    assert all(a / b >= 4.0 for a, b in zip(res, res[1:]))


def test_gram_near_identity(sym_report, line_grid):
    for beta in (50.0, 100.0):
        fam = [hermite_quasimode(sym_report, i, (n,), beta, line_grid)
               for i in range(3) for n in (0, 1)]
        G = gram_matrix(fam)
        assert np.abs(G - np.eye(len(fam))).max() <= 0.05


def test_well_quasimode_markov_bound(tilted_report, tilted, line_grid):
    consts = []
    for beta in (10.0, 15.0, 20.0):
        w = well_quasimode(tilted_report, 1, beta, line_grid)
        gen = build_generator(tilted, line_grid, beta)
        D = float(gen.dirichlet(w.amplitude))
        bound = math.exp(-beta * (w.meta["V_hat"] - w.meta["delta"]) - w.meta["log_Z"])
        consts.append(D / bound)
    # D <= C exp(-beta (V_hat - delta)) / Z with a beta-independent C
    assert max(consts) == consts[0] and consts[-1] < consts[0]


def test_well_quasimode_overlap_and_mass(tilted_report, tilted, line_grid):
    beta = 20.0
    w = well_quasimode(tilted_report, 1, beta, line_grid)
    res = lowest_eigenpairs(build_generator(tilted, line_grid, beta), 2)
    assert (w.amplitude @ res.vectors[:, 1]) ** 2 >= 0.99
    mass = w.measure().density * line_grid.cell_volume
    x = line_grid.points[:, 0]
    in_well = (x > tilted_report.saddle(1).location[0])
    assert mass[in_well].sum() >= 0.99


def test_well_quasimode_delta_checks(tilted_report, line_grid):
    assert default_delta(tilted_report) == pytest.approx(0.5 * tilted_report.W(1))
    with pytest.raises(DeltaTooLarge):
        well_quasimode(tilted_report, 1, 10.0, line_grid, delta=tilted_report.W(1))
    with pytest.raises(ValueError):
        well_quasimode(tilted_report, 0, 10.0, line_grid)


def test_recovery_measure_closed_form(ou, line_grid):
    beta = 20.0
    mu = recovery_measure_I(0.0, beta, line_grid)
    assert fisher_information(mu, ou, beta) == pytest.approx(9 / (8 * beta), rel=0.02)
    with pytest.raises(ValueError):
        recovery_measure_I(3.0, beta, line_grid)


def test_recovery_measure_limits(sym, line_grid):
    # non-critical point: I_beta -> |V'(x)|^2 / 2; critical point: -> 0
    vals = [fisher_information(recovery_measure_I(0.5, b, line_grid), sym, b) for b in (20, 80, 320)]
    assert abs(vals[-1] - 0.5 * 2.25) < abs(vals[0] - 0.5 * 2.25)
    assert vals[-1] == pytest.approx(0.5 * 2.25, rel=0.02)
    crit = [fisher_information(recovery_measure_I(1.0, b, line_grid), sym, b) for b in (20, 80, 320)]
    assert crit[0] > crit[1] > crit[2]


def test_convexity_transfer(sym_report, sym, line_grid):
    beta = 30.0
    ms = [hermite_quasimode(sym_report, i, (n,), beta, line_grid).measure()
          for i in range(3) for n in (0, 1)]
    alpha = np.random.default_rng(2).dirichlet(np.ones(len(ms)))
    lhs = fisher_information(mixture(alpha, ms), sym, beta)
    rhs = float(alpha @ [fisher_information(m, sym, beta) for m in ms])
    assert lhs <= rhs


@pytest.fixture(scope="module")
def witness(tilted_report, tilted, line_grid):
    return gamma_witness_suite(tilted_report, tilted, [8.0, 12.0, 16.0, 20.0], line_grid)


def test_witness_L3_exactness(witness, tilted_report, tilted, line_grid):
    for beta in (8.0, 20.0):
        res = lowest_eigenpairs(build_generator(tilted, line_grid, beta), 1)
        scale = math.exp(beta * tilted_report.W(1))
        rows = {r.target: r for r in witness.rows if r.beta == beta and r.level == "L3.1"}
        single = [r for t, r in rows.items() if "+" not in t and r.target_value > 0][0]
        assert single.computed == pytest.approx(2 * scale * res.eigenvalues[1], rel=1e-10)
        mix = [r for t, r in rows.items() if "+" in t][0]
        expect = 2 * scale * (0.5 * res.eigenvalues[1] + 0.5 * res.eigenvalues[0])
        assert mix.computed == pytest.approx(expect, rel=1e-10)
        assert mix.direct <= mix.computed


def test_witness_trends(witness, tilted_report):
    eta = eta_k(tilted_report, 1)
    l3 = [r for r in witness.rows if r.level == "L3.1" and r.target_value == pytest.approx(eta)]
    dev = [abs(r.computed / eta - 1) for r in l3]
    assert all(b < a for a, b in zip(dev, dev[1:]))
    zero = [r.computed for r in witness.rows if r.level == "L3.1" and r.target_value == 0]
    assert max(zero) < 1e-12
    for r in witness.rows:
        if r.level in ("L2",) or r.level.startswith("L3"):
            assert r.direct <= r.computed * (1 + 1e-12)


def test_witness_csv(witness):
    text = witness.to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "beta,level,target,target_value,computed,direct,ratio"
    assert len(lines) == len(witness.rows) + 1


def test_L2_saddle_targets_zeta(sym_report, sym, line_grid):
    rep = gamma_witness_suite(sym_report, sym, [50.0, 100.0], line_grid)
    rows = [r for r in rep.rows if r.level == "L2" and r.target == "delta(0)"]
    errs = [abs(r.computed - 8.0) for r in rows]
    assert errs[1] < errs[0] and errs[1] <= 0.8
    assert rep.meta["skipped"] == [{"k": 1, "reason": "assumption A.4/A.5 fails"}]
