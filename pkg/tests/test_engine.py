import math

import numpy as np
import pytest

from asepkpz.engine import (Configuration, HeightField, Lattice, alternating_eta,
                            bernoulli_eta, event_rates, exact_generator,
                            mean_current, read_height_file, run_replicas,
                            simulate, sos_simulate, stationary_measure,
                            write_height_file)
from asepkpz.params import (ModelParams, ScalingParams, build_params,
                            equal_density_mu, params_from_mu, phase_point)


def p_interval(n, a=1.0, b=1.0):
    return build_params(ScalingParams.interval(n, a, b))


def test_event_rates_exclusion_and_boundary():
    p = p_interval(4)
    lat = Lattice.interval(4)
    r = event_rates(Configuration(np.array([1, 1, -1, 1])), p, lat)
    assert r.right[0] == 0 and r.left[0] == 0          # (+,+): blocked
    assert r.right[1] == p.p and r.left[1] == 0        # (+,-): right jump at p
    assert r.right[2] == 0 and r.left[2] == p.q        # (-,+): left jump at q
    assert r.create_left == 0 and r.annihilate_left == p.gamma   # occupied site 1
    assert r.create_right == 0 and r.annihilate_right == p.beta  # occupied site N
    r = event_rates(Configuration(np.array([-1, 1, -1, -1])), p, lat)
    assert r.create_left == p.alpha and r.annihilate_left == 0
    assert r.create_right == p.delta and r.annihilate_right == 0


def test_half_line_has_no_right_reservoir():
    p = p_interval(8, 1.0, 0.0)
    lat = Lattice.half_line(8)
    r = event_rates(Configuration(alternating_eta(8).eta), p, lat)
    assert r.create_right is None and r.annihilate_right is None


def test_blocked_system_is_constant():
    # all rates zero: full lattice with zero reservoir exchange
    p = ModelParams.from_rates(p=0.7, q=0.3, alpha=0.0, beta=0.0, gamma=0.0, delta=0.0)
    lat = Lattice.interval(5)
    init = Configuration(np.ones(5, dtype=np.int8))
    tr = simulate(init, p, lat, 10.0, [0.0, 5.0, 10.0], 1)
    assert tr.event_count == 0
    for eta in tr.etas:
        assert np.array_equal(eta, init.eta)


def test_two_state_occupation_fraction():
    # N = 1: on-rate alpha+delta, off-rate beta+gamma; long-run occupation
    # fraction matches the closed form within 3 sigma (batch means).
    p = ModelParams.from_rates(p=0.6, q=0.4, alpha=0.5, beta=0.35, gamma=0.15, delta=0.2)
    lat = Lattice.interval(1)
    target = (p.alpha + p.delta) / (p.alpha + p.beta + p.gamma + p.delta)
    horizon = 4000.0
    ts = np.linspace(0.0, horizon, 8001)
    tr = simulate(Configuration(np.array([-1])), p, lat, horizon, ts, 3)
    occ = np.array([(e[0] + 1) / 2 for e in tr.etas], dtype=float)
    batches = occ[1:].reshape(20, -1).mean(axis=1)
    se = batches.std(ddof=1) / math.sqrt(len(batches))
    assert abs(occ[1:].mean() - target) <= 3 * se


def test_determinism_byte_for_byte():
    p = p_interval(16)
    lat = Lattice.interval(16)
    init = bernoulli_eta(16, 9)
    a = simulate(init, p, lat, 30.0, [10.0, 30.0], 1234,
                 track_exp_integrals=(-p.lam, p.nu))
    b = simulate(init, p, lat, 30.0, [10.0, 30.0], 1234,
                 track_exp_integrals=(-p.lam, p.nu))
    assert a.event_count == b.event_count
    for i in range(2):
        assert np.array_equal(a.etas[i], b.etas[i])
        assert np.array_equal(a.heights[i], b.heights[i])
        assert np.array_equal(a.z_int[i], b.z_int[i])
    c = simulate(init, p, lat, 30.0, [10.0, 30.0], 1235)
    assert not all(np.array_equal(a.etas[i], c.etas[i]) for i in range(2))


def test_height_consistency_and_boundary_locality():
    p = p_interval(12, 2.0, 1.0)
    lat = Lattice.interval(12)
    tr = simulate(bernoulli_eta(12, 4), p, lat, 50.0, np.linspace(0, 50, 26), 77,
                  debug_checks=True)
    for i in range(len(tr.sample_times)):
        assert np.array_equal(np.diff(tr.heights[i]), tr.etas[i])
        assert tr.heights[i][0] == tr.h0s[i]
    assert tr.event_count > 0


def test_event_count_rate_long_run():
    # empirical event rate over >= 1e4 waits matches the stationary-average
    # total rate within 3 sigma (batch means over time windows)
    p = ModelParams.from_rates(p=0.6, q=0.4, alpha=0.5, beta=0.35, gamma=0.15, delta=0.2)
    lat = Lattice.interval(1)
    pi = stationary_measure(exact_generator(p, 1))
    rate = pi[0] * (p.alpha + p.delta) + pi[1] * (p.beta + p.gamma)
    tr = simulate(Configuration(np.array([-1])), p, lat, 25000.0, [25000.0], 77)
    assert tr.event_count >= 10 ** 4
    # batch estimate of the rate from independent windows
    def task(i, rng):
        return simulate(Configuration(np.array([-1])), p, lat, 1250.0, [1250.0],
                        rng).event_count / 1250.0
    samples = np.array(run_replicas(task, 20, 78))
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - rate) <= 3 * se


def test_event_wait_times_match_rate():
    # single active channel: N=1 with annihilation shut off; waits in the
    # empty state are Exp(alpha + delta)
    p = ModelParams.from_rates(p=0.6, q=0.4, alpha=0.8, beta=0.0, gamma=0.0, delta=0.3)
    lat = Lattice.interval(1)

    def task(i, rng):
        tr = simulate(Configuration(np.array([-1])), p, lat, 3.0, [3.0], rng)
        return tr.etas[0][0]

    # occupation locks in (no off-events): P(still empty at t) = exp(-1.1 t)
    outs = np.array(run_replicas(task, 20000, 11))
    frac_empty = float(np.mean(outs == -1))
    target = math.exp(-1.1 * 3.0)
    se = math.sqrt(target * (1 - target) / len(outs))
    assert abs(frac_empty - target) <= 3 * se


def test_sos_rates_and_staircase():
    p = p_interval(6, 1.0, 2.0)
    lat = Lattice.interval(6)
    # all-up staircase: no interior flips possible, only boundary moves
    h = HeightField(h=np.arange(7), h0_counter=0)
    tr = sos_simulate(h, p, lat, 0.0, [0.0], 1)
    assert np.array_equal(tr.heights[0], np.arange(7))
    # local slope (no extremum) has no flip: exercised implicitly by the
    # staircase; a valley flips up, a peak flips down
    hv = HeightField(h=np.array([0, 1, 0, 1, 0, 1, 0]), h0_counter=0)
    tr = sos_simulate(hv, p, lat, 4.0, [4.0], 5)
    assert np.all(np.abs(np.diff(tr.heights[0])) == 1)


def test_sos_matches_particle_distribution():
    # Equivalence of SOS and particle dynamics, asymmetric boundaries.
    n = 4
    p = p_interval(n, 0.25, 1.5)
    lat = Lattice.interval(n)
    init_eta = alternating_eta(n)
    init_h = HeightField.from_eta(init_eta.eta)
    horizon = 2.0

    hp = np.stack(run_replicas(
        lambda i, rng: simulate(init_eta, p, lat, horizon, [horizon], rng).heights[0],
        10000, 50))
    hs = np.stack(run_replicas(
        lambda i, rng: sos_simulate(init_h, p, lat, horizon, [horizon], rng).heights[0],
        10000, 60))
    se = np.sqrt(hp.var(axis=0, ddof=1) / len(hp) + hs.var(axis=0, ddof=1) / len(hs))
    z = np.abs(hp.mean(axis=0) - hs.mean(axis=0)) / se
    assert np.max(z) <= 3.0, z


def test_exact_generator_n1():
    p = ModelParams.from_rates(p=0.6, q=0.4, alpha=0.5, beta=0.35, gamma=0.15, delta=0.2)
    Q = exact_generator(p, 1).toarray()
    on = p.alpha + p.delta
    off = p.beta + p.gamma
    assert np.allclose(Q, [[-on, on], [off, -off]], atol=1e-15)


def test_generator_row_sums_and_size_guard():
    p = p_interval(6, 1.0, 2.0)
    Q = exact_generator(p, 6)
    assert np.max(np.abs(np.asarray(Q.sum(axis=1)).ravel())) <= 1e-14
    with pytest.raises(ValueError):
        exact_generator(p, 13)


def test_detailed_balance_symmetric_rates():
    # p = q with alpha = gamma, beta = delta: Q symmetric, uniform reversible
    p = ModelParams.from_rates(p=0.5, q=0.5, alpha=0.3, beta=0.2, gamma=0.3, delta=0.2)
    Q = exact_generator(p, 4).toarray()
    assert np.max(np.abs(Q - Q.T)) <= 1e-15
    pi = stationary_measure(Q)
    assert np.max(np.abs(pi - 1 / 16)) <= 1e-12


def test_stationary_two_state_closed_form():
    p = ModelParams.from_rates(p=0.7, q=0.3, alpha=0.45, beta=0.3, gamma=0.2, delta=0.15)
    pi = stationary_measure(exact_generator(p, 1))
    target = (p.alpha + p.delta) / (p.alpha + p.beta + p.gamma + p.delta)
    assert abs(pi[1] - target) <= 1e-14


def test_stationary_reducible_generator_rejected():
    # all-zero generator is reducible: the normalization solve is singular
    p = ModelParams.from_rates(p=0.0, q=0.0, alpha=0.0, beta=0.0, gamma=0.0, delta=0.0)
    with pytest.raises(np.linalg.LinAlgError):
        stationary_measure(exact_generator(p, 2))


def test_stationary_product_bernoulli_on_equal_density_line():
    eps = 0.25
    mu_b = 1.1
    p = params_from_mu(eps, equal_density_mu(eps, mu_b), mu_b)
    assert not p.in_scaling_class  # mu_A > 1: outside the weakly asymmetric class
    pi = stationary_measure(exact_generator(p, 5))
    rho = phase_point(p).rho_a
    bern = np.array([math.prod((rho if (s >> x) & 1 else 1 - rho) for x in range(5))
                     for s in range(32)])
    assert 0.5 * np.abs(pi - bern).sum() <= 1e-10


def test_mean_current_blocked_and_equal_density():
    p = ModelParams.from_rates(p=0.7, q=0.3, alpha=0.0, beta=0.4, gamma=0.0, delta=0.1)
    pi = stationary_measure(exact_generator(p, 3))
    assert abs(mean_current(pi, p, 3)) <= 1e-14
    # equal-density line: J_N equals rho(1-rho) for every N
    eps = 0.2
    mu_b = 1.05
    p = params_from_mu(eps, equal_density_mu(eps, mu_b), mu_b)
    rho = phase_point(p).rho_a
    for n in (4, 6, 8):
        pi = stationary_measure(exact_generator(p, n))
        assert abs(mean_current(pi, p, n) - rho * (1 - rho)) <= 1e-10


def test_mean_current_against_flux_count():
    # N = 2: exact stationary current vs a long-horizon Monte Carlo count of
    # net left-boundary entries.
    p = p_interval(2, 0.4, 0.9)
    lat = Lattice.interval(2)
    pi = stationary_measure(exact_generator(p, 2))
    j_exact = mean_current(pi, p, 2)

    def task(i, rng):
        horizon = 2000.0
        tr = simulate(bernoulli_eta(2, rng), p, lat, horizon, [horizon], rng)
        # net removals at the left boundary = h_T(0)/2; current counts entries
        return -tr.h0s[0] / 2.0 / horizon

    vals = np.array(run_replicas(task, 24, 17)) / (p.p - p.q)
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - j_exact) <= 3 * se


def test_half_line_truncation_doubling():
    # doubling the truncation length must not move statistics in a window
    # near the boundary beyond combined error bars
    from asepkpz.engine import halfline_truncation_length
    p = build_params(ScalingParams.half_line(1 / 16, 1.0))
    horizon = 8.0
    assert halfline_truncation_length(6, horizon) >= 24

    def occupation(length, seed):
        lat = Lattice.half_line(length)
        def task(i, rng):
            init = bernoulli_eta(length, rng)
            tr = simulate(init, p, lat, horizon, [horizon], rng)
            return tr.etas[0][:6].astype(float)
        return np.stack(run_replicas(task, 3000, seed))

    a = occupation(24, 21)
    b = occupation(48, 21)
    se = np.sqrt(a.var(axis=0) / len(a) + b.var(axis=0) / len(b))
    z = np.abs(a.mean(axis=0) - b.mean(axis=0)) / se
    assert np.max(z) <= 3.0


def test_height_file_roundtrip(tmp_path):
    h = HeightField.from_eta(alternating_eta(6).eta, h0_counter=0)
    path = tmp_path / "heights.txt"
    write_height_file(path, h)
    back = read_height_file(path)
    assert np.array_equal(back.h, h.h)
    assert back.h0_counter == h.h0_counter


def test_invalid_inputs():
    p = p_interval(4)
    lat = Lattice.interval(4)
    with pytest.raises(ValueError):
        Configuration(np.array([1, 0, -1, 1]))
    with pytest.raises(ValueError):
        simulate(Configuration(np.array([1, -1, 1, -1])), p, lat, 1.0, [0.5, 0.2], 1)
    with pytest.raises(ValueError):
        HeightField(h=np.array([0, 2, 1, 0, 1]), h0_counter=0)
    with pytest.raises(ValueError):
        Lattice("ring", 4)
