import itertools

import numpy as np
import pytest

from swarmharvest.scenario import (AssociationState, Deployment, RadioParams, Schedule,
                                   Scenario, TimeAllocation, generate_scenario)
from swarmharvest.scheduling import (build_schedule, compute_coefficients, compute_w,
                                     epochs_needed, heuristic_schedule, marginal_benefit,
                                     optimal_time, snr_threshold_ratios, time_objective)
from swarmharvest.errors import ParameterError
from swarmharvest.planner import initialize


def test_epochs_needed():
    assert epochs_needed(12, 4) == 3
    assert epochs_needed(13, 4) == 4
    assert epochs_needed(1, 4) == 1
    assert epochs_needed(0, 4) == 1
    assert epochs_needed(4, 4) == 1


def _toy(theta0, theta1, L, k_dev, gamma):
    """Bare coefficient holder for the time-split solver."""
    K = len(theta0)

    class C:
        pass

    c = C()
    c.theta0 = np.asarray(theta0, float)
    c.theta1 = np.asarray(theta1, float)
    c.gamma = gamma
    c.serving = np.zeros(K, int)
    s = np.zeros((K, L), dtype=np.int8)
    for i, k in enumerate(k_dev):
        s[i, k - 1] = 1
    sched = Schedule(s=s, epochs_per_uav=np.array([L]))
    return c, sched


def test_marginal_benefit_nondecreasing_in_epoch():
    time = TimeAllocation(0.4, 0.6)
    t0, t1 = np.array([2.0, 0.3]), np.array([1.0, 0.05])
    vals = np.stack([marginal_benefit(t0, t1, 4, k, time, gamma=3.0) for k in (1, 2, 3, 4)])
    assert np.all(np.diff(vals, axis=0) >= -1e-12)


def test_marginal_benefit_penalty_branch():
    time = TimeAllocation(0.5, 0.5)
    # snr = theta0 * L * tau0 / tau1 = 0.4 < gamma -> penalized by gamma/snr
    lo = marginal_benefit(np.array([0.1]), np.array([0.0]), 4, 1, time, gamma=2.0)
    snr = 0.1 * 4 * 0.5 / 0.5
    assert lo[0] == pytest.approx((0.5 / 4) * np.log1p(snr) - 2.0 / snr)
    # comfortably above the threshold: plain throughput term
    hi = marginal_benefit(np.array([10.0]), np.array([0.0]), 4, 1, time, gamma=2.0)
    assert hi[0] == pytest.approx((0.5 / 4) * np.log1p(40.0))


def _brute_force_schedule_value(theta0, theta1, L, M, time, gamma):
    K = len(theta0)
    best = -np.inf
    for assign in itertools.product(range(1, L + 1), repeat=K):
        counts = np.bincount(assign, minlength=L + 1)[1:]
        if np.any(counts > M):
            continue
        val = sum(float(marginal_benefit(np.array([theta0[i]]), np.array([theta1[i]]),
                                         L, k, time, gamma)[0])
                  for i, k in enumerate(assign))
        best = max(best, val)
    return best


def test_build_schedule_matches_enumeration():
    rng = np.random.default_rng(31)
    time = TimeAllocation(0.45, 0.55)
    for trial in range(20):
        K = int(rng.integers(3, 6))
        M = int(rng.integers(1, 3))
        gamma = float(rng.choice([1e-6, 0.5, 3.0]))
        theta0 = rng.uniform(0.05, 4.0, K)
        theta1 = rng.uniform(0.0, 2.0, K)
        L = epochs_needed(K, M)
        devices = np.column_stack([rng.uniform(-20, 20, (K, 2)), np.zeros(K)])
        scn = Scenario(devices=devices, uav_count=1, channel_count=M,
                       radio=RadioParams(gamma=gamma))
        assoc = AssociationState(dl_energy=np.ones((K, 1), np.int8),
                                 ul_info=np.ones((K, 1), np.int8),
                                 ul_energy=np.ones((K, 1), np.int8))
        coeff, _ = _toy(theta0, theta1, L, [1] * K, gamma)
        sched = build_schedule(scn, assoc, coeff, time)
        sched.validate(assoc, M)
        got = sum(float(marginal_benefit(np.array([theta0[i]]), np.array([theta1[i]]),
                                         L, int(sched.epoch_of[i]), time, gamma)[0])
                  for i in range(K))
        want = _brute_force_schedule_value(theta0, theta1, L, M, time, gamma)
        assert got == pytest.approx(want, abs=1e-10)


def test_heuristic_schedule_ring_order():
    # five devices on a line, one node at the origin, two per epoch
    devices = np.array([[1.0, 0, 0], [2.0, 0, 0], [5.0, 0, 0], [9.0, 0, 0], [14.0, 0, 0]])
    scn = Scenario(devices=devices, uav_count=1, channel_count=2)
    dep = Deployment(dl_positions=np.array([[0.0, 0, 30.0]]),
                     ul_positions=np.array([[0.0, 0, 30.0]]))
    assoc = AssociationState(dl_energy=np.ones((5, 1), np.int8),
                             ul_info=np.ones((5, 1), np.int8),
                             ul_energy=np.ones((5, 1), np.int8))
    ff = heuristic_schedule("ff", scn, dep, assoc)
    nf = heuristic_schedule("nf", scn, dep, assoc)
    assert ff.epochs_per_uav.tolist() == [3] and nf.epochs_per_uav.tolist() == [3]
    # outermost ring = {14, 9}, middle = {5, 2}, innermost remainder = {1}
    assert ff.epoch_of.tolist() == [3, 2, 2, 1, 1]
    assert nf.epoch_of.tolist() == [1, 2, 2, 3, 3]
    with pytest.raises(ParameterError):
        heuristic_schedule("rand", scn, dep, assoc)


def test_heuristic_schedule_respects_channel_budget():
    scn = generate_scenario(17, 50.0, seed=2, uav_count=2, channel_count=3)
    st = initialize(scn)
    for policy in ("nf", "ff"):
        sched = heuristic_schedule(policy, scn, st.deployment, st.assoc)
        sched.validate(st.assoc, scn.channel_count)


def test_optimal_time_slack_branch_matches_grid():
    rng = np.random.default_rng(17)
    for _ in range(10):
        K = int(rng.integers(2, 7))
        L = int(rng.integers(1, 4))
        theta0 = rng.uniform(0.5, 6.0, K)
        theta1 = rng.uniform(0.0, 3.0, K)
        k_dev = rng.integers(1, L + 1, K).tolist()
        coeff, sched = _toy(theta0, theta1, L, k_dev, gamma=1e-9)
        t = optimal_time(coeff, sched)
        grid = np.arange(1e-4, 1.0, 1e-4)
        vals = [time_objective(coeff, sched, g) for g in grid]
        best = max(vals)
        got = time_objective(coeff, sched, t.tau0)
        assert got >= best - 1e-3 * abs(best)


def test_optimal_time_binding_branch_ratio_one():
    rng = np.random.default_rng(19)
    for _ in range(10):
        K = int(rng.integers(2, 7))
        L = int(rng.integers(1, 4))
        # tiny harvesting coefficients force the threshold to bind
        theta0 = rng.uniform(0.01, 0.2, K)
        theta1 = rng.uniform(0.0, 0.05, K)
        k_dev = rng.integers(1, L + 1, K).tolist()
        coeff, sched = _toy(theta0, theta1, L, k_dev, gamma=3.0)
        t = optimal_time(coeff, sched)
        L_dev = np.maximum(sched.epochs_per_uav[coeff.serving], 1)
        ratios = snr_threshold_ratios(coeff.theta0, coeff.theta1, L_dev,
                                      sched.epoch_of, t, coeff.gamma)
        assert float(ratios.max()) == pytest.approx(1.0, abs=1e-8)


def test_compute_coefficients_small_instance():
    scn = generate_scenario(6, 30.0, seed=4, uav_count=2, channel_count=2)
    st = initialize(scn)
    coeff = compute_coefficients(scn, st.deployment, st.assoc, st.schedule, st.time)
    eps = scn.radio.epsilon
    g_ul = coeff.gain_ul
    g_dl = coeff.gain_dl
    own = g_ul[np.arange(6), coeff.serving]
    dl_sum = (st.assoc.dl_energy * g_dl).sum(axis=1)
    ul_sum = (st.assoc.ul_energy * g_ul).sum(axis=1)
    assert np.allclose(coeff.theta0, eps * own * dl_sum)
    assert np.allclose(coeff.theta1, eps * own * ul_sum)
    L_dev = np.maximum(st.schedule.epochs_per_uav[coeff.serving], 1)
    ratios = snr_threshold_ratios(coeff.theta0, coeff.theta1, L_dev,
                                  st.schedule.epoch_of, st.time, scn.radio.gamma)
    assert coeff.varpi == pytest.approx(float(ratios.max()))
    # w flags exactly the (device, epoch) pairs whose SNR would miss gamma
    w = compute_w(coeff, st.time, st.schedule.epochs_per_uav)
    L_max = int(np.max(st.schedule.epochs_per_uav))
    for i in range(6):
        for k in range(1, L_max + 1):
            if k > L_dev[i]:
                assert w[i, k - 1] == 0
                continue
            snr = (coeff.theta0[i] * L_dev[i] * st.time.tau0
                   + coeff.theta1[i] * (k - 1) * st.time.tau1) / st.time.tau1
            assert w[i, k - 1] == (1 if scn.radio.gamma / snr >= 1.0 else 0)
