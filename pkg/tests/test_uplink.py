"""Collection-phase association and placement tests.

Energy rows are checked against brute-force enumeration of the branch ratio
in its maximization form; collector choices against full assignment
enumeration (with per-candidate epoch-count recomputation); placement against
behavioral guarantees and a grid toy containing a harvest-while-collecting
link.
"""

import itertools
import math

import numpy as np
import pytest

from swarmharvest.channel import (activation_feasible, eh_coverage_limit,
                                  excess_path_function, gain_matrix)
from swarmharvest.downlink import binding_branch
from swarmharvest.errors import CoverageError
from swarmharvest.planner import initialize
from swarmharvest.scenario import RadioParams, Scenario, generate_scenario
from swarmharvest.scheduling import compute_coefficients
from swarmharvest.uplink import (sqrt_bound_constant, sqrt_bound_tight_distance,
                                 ul_energy_associate, ul_info_associate,
                                 ul_info_scores, ul_place, ul_ratio_terms)

from test_downlink import enumerate_rows, make_state, raw_quantities


def f3a_row_value(raw, i, row):
    """Collection-phase energy ratio of one candidate row, maximization form."""
    km1 = raw["k_dev"][i] - 1.0
    lam = raw["tau1"] / (raw["eps"] * raw["L_dev"][i] * raw["dl_sum"][i])
    gain = float((raw["g_ul"][i] * row).sum())
    if raw["varpi"] >= 1.0 - 1e-9:
        omega = raw["eps"] * raw["dl_sum"][i] * raw["bind_ratio"]
        s = omega + raw["eps"] * km1 * gain
        return s / (s + 1.0 / raw["g_serv"][i])
    return 1.0 / (lam / raw["g_serv"][i] + raw["eps"] * lam * km1 * gain
                  + raw["tau0"])


@pytest.mark.parametrize("gamma_db,want_binding", [(-40.0, False), (5.0, True)])
def test_ul_energy_matches_row_enumeration(gamma_db, want_binding):
    for seed in range(10):
        scn, st, coeff = make_state(seed, k=4 + seed % 3, n=2 + seed % 2,
                                    m=1, gamma_db=gamma_db)
        raw = raw_quantities(scn, st)
        assert binding_branch(coeff.varpi) == want_binding
        out = ul_energy_associate(scn, st.deployment, coeff, st.schedule,
                                  st.assoc.ul_info)
        feasible = activation_feasible(raw["g_ul"], scn.radio)
        saw_late = False
        for i in range(scn.device_count):
            assert out[i].sum() >= 1
            assert np.all(feasible[i][out[i] == 1])
            if raw["k_dev"][i] == 1:
                want = int(np.argmax(np.where(feasible[i], raw["g_ul"][i],
                                              -np.inf)))
                assert out[i].sum() == 1 and out[i, want] == 1
                continue
            saw_late = True
            got = f3a_row_value(raw, i, out[i])
            best = max(f3a_row_value(raw, i, row)
                       for row in enumerate_rows(feasible[i]))
            assert got >= best - 1e-12 * max(1.0, abs(best))
        assert saw_late


def test_ul_energy_unreachable_device_errors():
    scn, st, coeff = make_state(2, k=4, n=2, m=2)
    # push every collection-phase node out of harvesting reach of device 0
    dep = st.deployment
    far = dep.ul_positions.copy()
    far[:, 0] += 1e6
    from swarmharvest.scenario import Deployment
    dep2 = Deployment(dl_positions=dep.dl_positions, ul_positions=far)
    with pytest.raises(CoverageError):
        # coefficients from the original state; only the feasibility mask of
        # the new gains matters here
        g = gain_matrix(scn.devices, far, scn.channel)
        assert not activation_feasible(g, scn.radio).any()
        coeff2 = compute_coefficients(scn, dep2, st.assoc, st.schedule, st.time)
        ul_energy_associate(scn, dep2, coeff2, st.schedule, st.assoc.ul_info)


def recompute_scores(scn, st, g_dl, g_ul, L_per_node):
    """Collector scores and SNR mask from raw gains at given epoch counts."""
    eps = scn.radio.epsilon
    dl_sum = (st.assoc.dl_energy * g_dl).sum(axis=1)
    ul_sum = (st.assoc.ul_energy * g_ul).sum(axis=1)
    k_dev = st.schedule.epoch_of
    tau0, tau1 = st.time.tau0, st.time.tau1
    L = np.maximum(np.asarray(L_per_node, float), 1.0)[None, :]
    chi = L * tau0 * dl_sum[:, None] + ((k_dev - 1) * tau1 * ul_sum)[:, None]
    snr = eps * chi * g_ul / tau1
    mask = snr >= scn.radio.gamma * (1.0 - 1e-9)
    return (tau1 / L) * np.log1p(snr), mask


def test_ul_info_matches_assignment_enumeration():
    for seed in range(5):
        k = 4 + seed % 2
        scn, st, coeff = make_state(seed, k=k, n=2 + seed % 2, m=k,
                                    gamma_db=-40.0)
        assert np.all(st.schedule.epoch_of == 1)   # M >= K keeps one epoch
        out = ul_info_associate(scn, st.deployment, coeff, st.schedule,
                                st.assoc.ul_energy)
        g_dl = gain_matrix(scn.devices, st.deployment.dl_positions, scn.channel)
        g_ul = gain_matrix(scn.devices, st.deployment.ul_positions, scn.channel)

        def total(assign):
            counts = np.bincount(assign, minlength=scn.uav_count)
            L = np.maximum(np.ceil(counts / scn.channel_count), 1)
            scores, mask = recompute_scores(scn, st, g_dl, g_ul, L)
            if not all(mask[i, assign[i]] for i in range(k)):
                return -np.inf
            return float(sum(scores[i, assign[i]] for i in range(k)))

        got = total(np.argmax(out, axis=1))
        best = max(total(np.array(a))
                   for a in itertools.product(range(scn.uav_count), repeat=k))
        assert np.isfinite(got)
        assert got >= best - 1e-12 * max(1.0, abs(best))
        assert np.all(out.sum(axis=1) == 1)


def test_ul_info_masks_weak_node_and_errors_when_empty():
    devices = np.array([[0.0, 0.0, 0.0], [5.0, 5.0, 0.0]])
    scn = Scenario(devices=devices, uav_count=2, channel_count=2,
                   radio=RadioParams.from_dbm(gamma_db=-40.0))
    st = initialize(scn)
    from swarmharvest.scenario import Deployment
    pos = np.array([[0.0, 0.0, 40.0], [800.0, 0.0, 40.0]])
    dep = Deployment(dl_positions=st.deployment.dl_positions,
                     ul_positions=pos)
    coeff = compute_coefficients(scn, dep, st.assoc, st.schedule, st.time)
    scores, mask = ul_info_scores(scn, coeff, st.schedule)
    assert mask[:, 0].all() and not mask[:, 1].any()
    out = ul_info_associate(scn, dep, coeff, st.schedule, st.assoc.ul_energy)
    assert np.all(out[:, 0] == 1)

    tight = Scenario(devices=devices, uav_count=2, channel_count=2,
                     radio=RadioParams.from_dbm(gamma_db=60.0))
    st2 = initialize(tight)
    coeff2 = compute_coefficients(tight, st2.deployment, st2.assoc,
                                  st2.schedule, st2.time)
    with pytest.raises(CoverageError):
        ul_info_associate(tight, st2.deployment, coeff2, st2.schedule,
                          st2.assoc.ul_energy)


def test_ul_info_one_to_one_matches_permutation_enumeration():
    scn, st, coeff = make_state(11, k=3, n=3, m=3, gamma_db=-40.0)
    out = ul_info_associate(scn, st.deployment, coeff, st.schedule,
                            st.assoc.ul_energy, one_to_one=True)
    assert np.all(out.sum(axis=1) == 1)
    assert np.all(out.sum(axis=0) <= 1)
    scores, mask = ul_info_scores(scn, coeff, st.schedule)
    assert mask.all()
    got = float(scores[np.arange(3), np.argmax(out, axis=1)].sum())
    best = max(float(scores[np.arange(3), list(p)].sum())
               for p in itertools.permutations(range(3)))
    assert got >= best - 1e-12 * max(1.0, abs(best))


@pytest.mark.parametrize("gamma_db,binding", [(-40.0, False), (5.0, True)])
def test_ul_ratio_terms_branch_coefficients(gamma_db, binding):
    scn, st, coeff = make_state(5, k=5, n=2, m=2, gamma_db=gamma_db)
    assert binding_branch(coeff.varpi) == binding
    uav = 0
    served = st.assoc.served_devices(uav)
    assert served.size > 0
    phi1, phi2, rho1, rho2, rho3 = ul_ratio_terms(coeff, st.schedule, uav,
                                                  served)
    km1 = (st.schedule.epoch_of[served] - 1).astype(float)
    iota = coeff.iota[served, uav]
    eps = coeff.epsilon[served]
    if binding:
        assert np.allclose(phi1, iota + coeff.omega_cap[served], rtol=1e-12)
        assert np.allclose(phi2, eps * km1, rtol=1e-12)
        assert np.allclose(rho1, 1.0)
        assert np.allclose(rho2, phi1, rtol=1e-12)
        assert np.allclose(rho3, phi2, rtol=1e-12)
    else:
        lam = coeff.lambda_cap[served]
        assert np.allclose(phi1, 1.0)
        assert np.allclose(phi2, 0.0)
        assert np.allclose(rho1, lam, rtol=1e-12)
        assert np.allclose(rho2, lam * iota + st.time.tau0, rtol=1e-12)
        assert np.allclose(rho3, eps * lam * km1, rtol=1e-12)


def test_sqrt_bound_holds_and_is_tight():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(50):
        phi1 = rng.uniform(0.2, 5.0)
        phi2 = rng.uniform(0.0, 3.0)
        kt1 = rng.uniform(0.05, 2.0)
        kt2 = rng.uniform(-1.0, 1.0)
        kt3 = rng.uniform(-0.2, 2.0)
        if 2.0 * phi1 * kt3 + 2.0 * phi2 <= 0:
            assert sqrt_bound_constant(phi1, phi2, kt3) == 0.0
            continue
        const = sqrt_bound_constant(phi1, phi2, kt3)
        assert abs(const - math.sqrt(2 * phi1 * kt3 + 2 * phi2)) < 1e-12
        d = np.linspace(0.0, 50.0, 300)
        target = 2.0 * np.sqrt(phi1 * ((kt1 * d + kt2) ** 2 + kt3) + phi2)
        bound = np.sqrt(2.0 * phi1) * (kt1 * d + kt2) + const
        assert np.all(bound <= target + 1e-9)
        d_star = sqrt_bound_tight_distance(phi1, phi2, kt1, kt2, kt3)
        if d_star >= 0:
            t = 2.0 * math.sqrt(phi1 * ((kt1 * d_star + kt2) ** 2 + kt3) + phi2)
            b = math.sqrt(2.0 * phi1) * (kt1 * d_star + kt2) + const
            assert abs(t - b) <= 1e-9 * max(1.0, t)
            checked += 1
    assert checked >= 10


def exact_ul_value(scn, st, coeff, uav, xy, h):
    served = st.assoc.served_devices(uav)
    phi1, phi2, rho1, rho2, rho3 = ul_ratio_terms(coeff, st.schedule, uav,
                                                  served)
    b = st.assoc.ul_energy[served, uav].astype(bool)
    device_xy = scn.device_xy[served]
    r = np.linalg.norm(device_xy - np.asarray(xy, float)[None, :], axis=1)
    d = np.sqrt(r * r + h * h)
    loss = scn.channel.kappa0 ** 2 * excess_path_function(d, h, scn.channel)
    num = np.where(b, phi1 * loss + phi2, phi1)
    den = np.where(b, (rho1 * loss + rho2) * loss + rho3, rho1 * loss + rho2)
    return float(np.sum(num / den))


def ul_limits(scn, st, coeff, uav):
    served = st.assoc.served_devices(uav)
    tau1 = coeff.tau_snapshot[1]
    kappa_sq = scn.channel.kappa0 ** 2
    lim_snr = (coeff.epsilon[served] * coeff.chi[served, uav]
               / (tau1 * coeff.gamma * kappa_sq))
    return np.minimum(lim_snr, eh_coverage_limit(scn.radio, scn.channel))


def test_ul_place_single_device_hovers_overhead():
    devices = np.array([[-4.0, 6.0, 0.0]])
    scn = Scenario(devices=devices, uav_count=1, channel_count=1,
                   radio=RadioParams.from_dbm(gamma_db=-40.0))
    st = initialize(scn)
    coeff = compute_coefficients(scn, st.deployment, st.assoc, st.schedule,
                                 st.time)
    pos, val, xi, served = ul_place(scn, st.assoc, coeff, st.schedule, 0,
                                    np.array([30.0, -20.0, 40.0]))
    assert served.tolist() == [0]
    assert np.linalg.norm(pos[:2] - devices[0, :2]) < 0.1
    assert xi.shape == (1,)


def test_ul_place_no_regression_and_consistency():
    for seed in (0, 3):
        scn, st, coeff = make_state(seed, k=6, n=2, m=2, gamma_db=-40.0)
        for uav in range(scn.uav_count):
            served = st.assoc.served_devices(uav)
            if served.size == 0:
                continue
            init = st.deployment.ul_positions[uav]
            v0 = exact_ul_value(scn, st, coeff, uav, init[:2], init[2])
            pos, val, xi, back = ul_place(scn, st.assoc, coeff, st.schedule,
                                          uav, init)
            assert np.array_equal(back, served)
            assert val >= v0 - 1e-9
            v_re = exact_ul_value(scn, st, coeff, uav, pos[:2], pos[2])
            assert abs(val - v_re) <= 1e-9 * max(1.0, abs(val))
            assert scn.altitude_min - 1e-9 <= pos[2] <= scn.altitude_max + 1e-9
            lims = ul_limits(scn, st, coeff, uav)
            device_xy = scn.device_xy[served]
            r = np.linalg.norm(device_xy - pos[None, :2], axis=1)
            d = np.sqrt(r * r + pos[2] ** 2)
            assert np.all(excess_path_function(d, pos[2], scn.channel)
                          <= lims * (1.0 + 1e-6))


def test_ul_place_beats_exhaustive_grid_with_harvest_link():
    devices = np.array([[6.0, 2.0, 0.0], [-14.0, -9.0, 0.0]])
    scn = Scenario(devices=devices, uav_count=1, channel_count=1,
                   radio=RadioParams.from_dbm(gamma_db=-40.0))
    st = initialize(scn)
    coeff = compute_coefficients(scn, st.deployment, st.assoc, st.schedule,
                                 st.time)
    assert sorted(st.schedule.epoch_of.tolist()) == [1, 2]
    assert st.assoc.ul_energy.sum() == 2   # the late device harvests here
    lims = ul_limits(scn, st, coeff, 0)
    served = st.assoc.served_devices(0)
    phi1, phi2, rho1, rho2, rho3 = ul_ratio_terms(coeff, st.schedule, 0, served)
    b = st.assoc.ul_energy[served, 0].astype(bool)

    xs = np.arange(-25.0, 25.0 + 1e-9, 1.0)
    hs = np.arange(scn.altitude_min + 4.0, scn.altitude_max + 1e-9, 5.0)
    gx, gy, gh = np.meshgrid(xs, xs, hs, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gh.ravel()])
    diff = pts[:, None, :2] - devices[None, :, :2]
    d = np.sqrt((diff ** 2).sum(-1) + pts[:, 2:3] ** 2)
    excess = excess_path_function(d, pts[:, 2:3], scn.channel)
    feas = np.all(excess <= lims[None, :], axis=1)
    loss = scn.channel.kappa0 ** 2 * excess
    num = np.where(b[None, :], phi1 * loss + phi2, phi1)
    den = np.where(b[None, :], (rho1 * loss + rho2) * loss + rho3,
                   rho1 * loss + rho2)
    vals = (num / den).sum(axis=1)
    grid_best = vals[feas].max()
    _, val, _, _ = ul_place(scn, st.assoc, coeff, st.schedule, 0,
                            np.array([0.0, 0.0, 40.0]))
    assert val >= grid_best - 1e-3
