import json

import numpy as np
import pytest

import jobmatch as jm


def risk_market(n_grid=6):
    spec = jm.BasisSpec([(1, 1), (0, 1), (1, 0)], [True, True, False], [True, False, True])
    theta = jm.Theta(A=[0.1, -0.5, 0.0], Gamma=[0.2, 0.0, 0.8], sigma1=0.3, sigma2=0.2, t=1.0, s2=0.04)
    X = jm.linspace_grid(n_grid, -1.0, 1.0)
    Y = jm.linspace_grid(n_grid, 0.0, 2.0)
    mass = np.full(n_grid, 1.0 / n_grid)
    return spec, jm.build_market(X, mass, Y, mass, theta, spec)


def test_potentials_match_margins():
    rng = np.random.default_rng(0)
    phi = rng.normal(size=(5, 4))
    r = np.full(5, 0.2)
    c = np.full(4, 0.25)
    a, b, _, residual = jm.solve_potentials(phi, r, c, tol=1e-12)
    pi = np.exp(phi - a[:, None] - b[None, :])
    assert a[0] == 0.0
    assert residual <= 1e-12
    np.testing.assert_allclose(pi.sum(axis=1), r, atol=1e-12)
    np.testing.assert_allclose(pi.sum(axis=0), c, atol=1e-12)


def test_market_is_in_equilibrium():
    _, m = risk_market()
    np.testing.assert_allclose(m.pi_star.sum(axis=1), m.worker_masses, atol=1e-12)
    np.testing.assert_allclose(m.pi_star.sum(axis=0), m.firm_masses, atol=1e-12)


def test_sampling_is_deterministic():
    _, m = risk_market()
    s1 = jm.draw_sample(m, 50, 0.2, seed=3)
    s2 = jm.draw_sample(m, 50, 0.2, seed=3)
    np.testing.assert_array_equal(s1.workers, s2.workers)
    assert s1.transfers == s2.transfers
    assert s1.n_observed == sum(w is not None for w in s1.transfers)


def test_gradient_matches_finite_differences():
    spec, m = risk_market()
    s = jm.draw_sample(m, 60, 0.0, seed=1)
    th = jm.truth_for_sample(m, s)
    v = th.to_vector()
    g = jm.gradient(th, spec, s)
    h = 1e-5
    for k in (0, 3, 6, 7, 9):
        up, dn = v.copy(), v.copy()
        up[k] += h
        dn[k] -= h
        fd = (jm.log_likelihood(jm.Theta.from_vector(up), spec, s).total
              - jm.log_likelihood(jm.Theta.from_vector(dn), spec, s).total) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_estimate_and_report():
    spec, m = risk_market()
    s = jm.draw_sample(m, 800, 0.0, seed=5)
    r = jm.estimate(s, spec)
    assert r.converged
    assert r.method == "full"
    truth = jm.truth_for_sample(m, s).phi
    assert np.all(np.abs(r.phi_hat[[0, 2]] - truth[[0, 2]]) < 5 * r.phi_std_errors[[0, 2]])
    c = jm.estimate(s, spec, concentrated=True, std_errors=False)
    assert c.loglik.total == pytest.approx(r.loglik.total, abs=1e-6)
    doc = json.loads(jm.report_json(r, spec))
    assert doc["n"] == 800
    table = jm.format_table(r, spec)
    assert "sigma1" in table and spec.names[0] in table


def test_analysis_helpers():
    spec, m = risk_market()
    s = jm.draw_sample(m, 300, 0.0, seed=8)
    th = jm.truth_for_sample(m, s)
    assert jm.vsl(th, spec, 0, 50000.0, worker=[0.0]) > 0.0
    assert jm.gini([0.0, 0.0, 1.0]) == pytest.approx(2.0 / 3.0)
    h = jm.hedonic_vsl(s, [0], [0], 0, 50000.0)
    assert h["n_rows"] == 300
    cf = jm.risk_cap_counterfactual(th, spec, s, 0, 1.0, log_transfers=True)
    assert cf["residual_after"] <= 1e-10
    assert 0.0 < cf["share_changed"] <= 1.0


def test_errors_are_typed():
    spec = jm.BasisSpec([(1, 1)], [True], [True])
    s = jm.MatchSample(np.zeros((3, 1)), np.zeros((3, 1)))
    wrong_size = jm.Theta(A=[0.1, 0.2], Gamma=[0.0, 0.0], sigma1=1.0, sigma2=1.0)
    with pytest.raises(jm.ConfigError):
        jm.log_likelihood(wrong_size, spec, s)
    assert issubclass(jm.ConfigError, jm.Error)
