import math

import numpy as np
import pytest

from gammafisher import (PLUS_INF, AtomicMeasure, Grid, GridMeasure, build_generator,
                         coercivity_bound, double_well, eta_k, eval_I, eval_J, eval_Jk,
                         fisher_information, gibbs_measure, harmonic, zeta)
from gammafisher.errors import AssumptionViolated, DegenerateInput, GridMismatch
from gammafisher.functionals import is_infinite


def test_zeta_examples():
    assert zeta([8.0]) == 0.0
    assert zeta([-4.0]) == 8.0
    assert zeta([-4.0, 4.0]) == 8.0
    with pytest.raises(DegenerateInput):
        zeta([1e-9, 3.0])


def test_eta_formula(tilted_report, tilted_roots):
    d2 = tilted_roots["d2"]
    oracle = math.sqrt(abs(d2[1]) * d2[2]) / math.pi
    assert eta_k(tilted_report, 1) == pytest.approx(oracle, rel=1e-9)
    # frozen value of the oracle above
    assert eta_k(tilted_report, 1) == pytest.approx(1.7010013084509226, rel=1e-9)
    with pytest.raises(ValueError):
        eta_k(tilted_report, 0)


def test_eta_reference_values():
    # 1D reduction sqrt(|V''(saddle)| V''(min)) / pi with values 8 and -4
    assert math.sqrt(4 * 8) / math.pi == pytest.approx(1.8006, abs=1e-4)


def test_eta_rejects_ties(sym_report):
    with pytest.raises(AssumptionViolated):
        eta_k(sym_report, 1)


def test_eta_2d_separable(tilted_report):
    from gammafisher import analyze
    rep2 = analyze(double_well(tilt=0.25, transverse=2.0))
    assert eta_k(rep2, 1) == pytest.approx(eta_k(tilted_report, 1), rel=1e-8)


def test_eval_I_examples(sym):
    assert eval_I(AtomicMeasure.dirac([0.0]), sym) == 0.0
    assert eval_I(AtomicMeasure.dirac([0.5]), sym) == pytest.approx(2.25)
    g = Grid([[0.0, 1.0]], [2001])
    dens = np.ones(g.size)
    dens[[0, -1]] = 0.5  # trapezoid weights
    mu = GridMeasure.from_density(g, dens)
    assert eval_I(mu, harmonic()) == pytest.approx(1.0 / 3.0, abs=1e-6)


def test_eval_J_examples(sym_report):
    assert eval_J(AtomicMeasure.dirac([0.0]), sym_report) == pytest.approx(8.0)
    assert eval_J(AtomicMeasure((([-1.0], 0.5), ([1.0], 0.5))), sym_report) == 0.0
    assert eval_J(AtomicMeasure.dirac([0.5]), sym_report) is PLUS_INF


def test_eval_Jk_examples(tilted_report):
    x0 = tilted_report.minimum(0).location
    x1 = tilted_report.minimum(1).location
    xs = tilted_report.saddle(1).location
    eta = eta_k(tilted_report, 1)
    assert eval_Jk(AtomicMeasure.dirac(x1), tilted_report, 1) == pytest.approx(eta)
    assert eval_Jk(AtomicMeasure.dirac(x0), tilted_report, 1) == 0.0
    assert eval_Jk(AtomicMeasure.dirac(xs), tilted_report, 1) is PLUS_INF
    mix = AtomicMeasure(((x0, 0.25), (x1, 0.75)))
    assert eval_Jk(mix, tilted_report, 1) == pytest.approx(0.75 * eta)


def test_plus_inf_marker_total_order():
    assert PLUS_INF > 1e308 and not PLUS_INF < 0 and PLUS_INF == PLUS_INF
    assert PLUS_INF >= PLUS_INF and float(PLUS_INF) == math.inf
    assert sorted([3.0, PLUS_INF, -1.0], key=float)[-1] is PLUS_INF
    assert is_infinite(PLUS_INF + 2.0)


def test_atomic_measure_validation():
    with pytest.raises(ValueError):
        AtomicMeasure((([0.0], 0.5),))
    with pytest.raises(ValueError):
        AtomicMeasure((([0.0], 1.5), ([1.0], -0.5)))


def test_grid_measure_validation():
    g = Grid([[0.0, 1.0]], [11])
    with pytest.raises(ValueError):
        GridMeasure(g, np.ones(11))
    with pytest.raises(ValueError):
        GridMeasure(g, -np.ones(11) / 1.1)


def test_fisher_gibbs_is_zero(sym, line_grid):
    mu = gibbs_measure(line_grid, sym, 20.0)
    assert fisher_information(mu, sym, 20.0) < 1e-20


def test_fisher_gaussian_closed_form(ou, line_grid):
    # mu ~ exp(-2 beta x^2) on V = x^2/2: I_beta = 9 / (8 beta)
    for beta in (10.0, 20.0, 40.0):
        mu = GridMeasure.from_log_density(line_grid, -2 * beta * line_grid.points[:, 0] ** 2, beta)
        assert fisher_information(mu, ou) == pytest.approx(9 / (8 * beta), rel=2e-2)


def test_fisher_shift_invariance(tilted, line_grid):
    rng = np.random.default_rng(0)
    mu = GridMeasure.from_log_density(line_grid, rng.normal(size=line_grid.size).cumsum() * 0.05)
    a = fisher_information(mu, tilted, 5.0)
    b = fisher_information(mu, tilted.shifted(123.0), 5.0)
    assert b == pytest.approx(a, rel=1e-12)


def test_fisher_grid_mismatch(sym):
    g1 = Grid([[-3.0, 3.0]], [401])
    g2 = Grid([[-3.0, 3.0]], [801])
    gen = build_generator(sym, g2, 2.0)
    mu = gibbs_measure(g1, sym, 2.0)
    with pytest.raises(GridMismatch):
        fisher_information(mu, sym, generator=gen)


def test_coercivity_bound_sanity(tilted, line_grid):
    mu = GridMeasure.from_log_density(line_grid, -8.0 * (line_grid.points[:, 0] - 0.3) ** 2, 4.0)
    fi = fisher_information(mu, tilted)
    cont, disc, slack = coercivity_bound(mu, tilted, 4.0)
    assert fi >= disc
    assert fi >= cont - slack
    assert slack >= 0


def test_J_linear_in_weights(sym_report):
    pts = [[-1.0], [0.0], [1.0]]
    w = np.array([0.2, 0.3, 0.5])
    mu = AtomicMeasure(tuple(zip(pts, w)))
    parts = [eval_J(AtomicMeasure.dirac(p), sym_report) for p in pts]
    assert eval_J(mu, sym_report) == pytest.approx(float(w @ parts))
