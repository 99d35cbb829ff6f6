import numpy as np
import pytest

from cyclesync.dynamics import DEFAULT_QUARTIC, AgentParams, eval_f_prime
from cyclesync.errors import ConfigError, NotOscillating
from cyclesync.master_stability import (
    from_eigenbasis,
    master_stability_function,
    mode_lyapunov,
    propagate_deviations,
    shock_response_compare,
    synchronized_orbit,
    time_resolved_volume_rate,
    to_eigenbasis,
)
from cyclesync.networks import (
    build_topology,
    generalized_laplacian,
    uniform_coupling,
)

Q = DEFAULT_QUARTIC


@pytest.fixture(scope="module")
def cycle_orbit():
    params = AgentParams.with_steady_state(-0.04, 0.4, 0.1, Q)
    return synchronized_orbit(params, Q, steps=30000, burn_in=2000)


@pytest.fixture(scope="module")
def two_clique_spec(two_clique_adj):
    return generalized_laplacian(two_clique_adj, eps=0.3)


class TestSynchronizedOrbit:
    def test_cycle_period_about_36(self, cycle_orbit):
        assert cycle_orbit.period == pytest.approx(36, abs=2)

    def test_node_scenario_not_oscillating(self):
        params = AgentParams.with_steady_state(-0.11, 0.4, 0.5, Q)
        with pytest.raises(NotOscillating):
            synchronized_orbit(params, Q, steps=4000)

    def test_orbit_mean_near_steady_state(self, cycle_orbit):
        period = int(round(cycle_orbit.period))
        assert np.mean(cycle_orbit.y[:period]) == pytest.approx(1.0, abs=0.15)

    def test_fprime_cache_consistent(self, cycle_orbit):
        np.testing.assert_allclose(cycle_orbit.fprime,
                                   eval_f_prime(Q, cycle_orbit.y), atol=1e-14)


class TestModeLyapunov:
    def test_zero_coupling_neutral_direction(self, cycle_orbit):
        est = mode_lyapunov(cycle_orbit, 0.0, burn_in=1000, window=25000)
        assert abs(est.mu1) < 1e-3

    def test_two_agent_transverse_mode_decays(self, cycle_orbit):
        # two coupled agents at eps = 0.3: transverse eigenvalue 0.6
        est = mode_lyapunov(cycle_orbit, 0.6, burn_in=1000, window=20000)
        assert est.mu1 < 0

    def test_exponent_ordering_and_volume_identity(self, cycle_orbit):
        for k in (0.0, 0.3, 0.9, 1.7):
            est = mode_lyapunov(cycle_orbit, k, burn_in=1000, window=15000)
            assert est.mu1 >= est.mu2
            assert est.mu1 + est.mu2 == pytest.approx(est.volume_rate.mean(),
                                                      abs=1e-6)

    def test_rejects_negative_coupling(self, cycle_orbit):
        with pytest.raises(ConfigError):
            mode_lyapunov(cycle_orbit, -0.1)


@pytest.fixture(scope="module")
def curve(cycle_orbit):
    grid = np.linspace(0, 2, 11)
    return master_stability_function(cycle_orbit, grid,
                                     burn_in=1000, window=15000)


class TestMasterStabilityFunction:

    def test_all_modes_decay_for_positive_coupling(self, curve):
        assert np.all(curve.mu1[1:] < 0)
        assert np.all(curve.mu2[1:] < 0)

    def test_largest_exponent_at_zero(self, curve):
        assert curve.mu1[0] == pytest.approx(0.0, abs=1e-3)
        assert curve.mu1[0] == curve.mu1.max()

    def test_small_modes_decay_slowest(self, curve):
        # effective couplings 0.09 vs 0.77 at unit coupling strength
        assert curve.interpolate(0.09) > curve.interpolate(0.77)

    def test_csv_export(self, curve, tmp_path):
        path = tmp_path / "msf.csv"
        curve.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "K,mu1,mu2"
        assert len(lines) == 1 + curve.k_grid.size


class TestVolumeRate:
    def test_zero_coupling_equals_jacobian_determinant(self, cycle_orbit):
        p = cycle_orbit.params
        series = time_resolved_volume_rate(cycle_orbit, 0.0)
        det = (1 - p.delta) * (p.alpha2 + cycle_orbit.fprime) - p.alpha1
        np.testing.assert_allclose(series, np.log(np.abs(det)), atol=1e-12)

    def test_tracks_interaction_slope(self, cycle_orbit):
        period = int(round(cycle_orbit.period))
        series = time_resolved_volume_rate(cycle_orbit, 0.6)[:period]
        slope = cycle_orbit.fprime[:period]
        corr = np.corrcoef(series, slope)[0, 1]
        assert corr > 0.9

    def test_minimum_near_output_peak(self, cycle_orbit):
        period = int(round(cycle_orbit.period))
        series = time_resolved_volume_rate(cycle_orbit, 0.6)[:period]
        t_min = int(np.argmin(series))
        t_peak = int(np.argmax(cycle_orbit.y[:period]))
        gap = min(abs(t_min - t_peak), period - abs(t_min - t_peak))
        assert gap <= 3


class TestEigenbasisTransform:
    def test_round_trip(self, two_clique_spec, rng):
        xi = rng.normal(0, 0.05, 12)
        back = from_eigenbasis(to_eigenbasis(xi, two_clique_spec), two_clique_spec)
        np.testing.assert_allclose(back, xi, atol=1e-10)

    def test_round_trip_on_series(self, two_clique_spec, rng):
        xi = rng.normal(0, 0.05, (20, 12))
        back = from_eigenbasis(to_eigenbasis(xi, two_clique_spec), two_clique_spec)
        np.testing.assert_allclose(back, xi, atol=1e-10)

    def test_reference_mode_projection(self, two_clique_spec):
        # y-shock (0.05, 0.03, 0.04, -0.03, -0.06, 0.00): slow-mode content
        # dominates because the cliques are pushed in opposite directions
        xi = np.zeros(12)
        xi[1::2] = [0.05, 0.03, 0.04, -0.03, -0.06, 0.00]
        zeta_y = to_eigenbasis(xi, two_clique_spec)[1::2]
        assert abs(zeta_y[0]) == pytest.approx(0.01, abs=0.005)
        assert abs(zeta_y[1]) == pytest.approx(0.09, abs=0.005)
        assert abs(zeta_y[2]) == pytest.approx(0.00, abs=0.005)

    def test_equal_shocks_have_no_transverse_content(self):
        pair = generalized_laplacian(build_topology("complete", 2), eps=0.3)
        xi = np.zeros(4)
        xi[1::2] = [0.07, 0.07]
        zeta_y = to_eigenbasis(xi, pair)[1::2]
        assert abs(zeta_y[1]) < 1e-12
        assert abs(zeta_y[0]) == pytest.approx(0.07 * np.sqrt(2), abs=1e-12)


class TestPropagateDeviations:
    def test_zero_deviation_stays_zero(self, cycle_orbit, two_clique_spec):
        xi, zeta = propagate_deviations(cycle_orbit, two_clique_spec,
                                        np.zeros(12), steps=100)
        assert np.all(xi == 0)
        assert np.all(zeta == 0)

    def test_transverse_mode_decays_parallel_persists(self, cycle_orbit):
        pair = generalized_laplacian(build_topology("complete", 2), eps=0.3)
        xi0 = np.zeros(4)
        xi0[1] = 0.1                     # shock on y of agent 1 only
        xi, zeta = propagate_deviations(cycle_orbit, pair, xi0, steps=400,
                                        start=0)
        z_y = zeta[:, 1::2]
        initial = np.abs(z_y[1])
        late = np.abs(z_y[-80:]).max(axis=0)
        assert late[1] < 0.01 * initial[1]          # transverse vanishes
        assert late[0] > 0.1 * initial[0]           # parallel persists

    def test_opposite_shocks_leave_parallel_mode_empty(self, cycle_orbit):
        pair = generalized_laplacian(build_topology("complete", 2), eps=0.3)
        xi0 = np.zeros(4)
        xi0[1], xi0[3] = 0.05, -0.05
        xi, zeta = propagate_deviations(cycle_orbit, pair, xi0, steps=300)
        assert np.max(np.abs(zeta[:, 0:2])) < 1e-12

    def test_pure_parallel_mode_keeps_nodes_identical(self, cycle_orbit,
                                                      two_clique_spec):
        zeta0 = np.zeros((6, 2))
        zeta0[0] = (0.0, 0.04)
        xi0 = from_eigenbasis(zeta0.reshape(-1), two_clique_spec)
        xi, _ = propagate_deviations(cycle_orbit, two_clique_spec, xi0, steps=200)
        y_dev = xi[:, 1::2]
        assert np.max(np.abs(y_dev - y_dev[:, :1])) < 1e-10

    def test_parallel_mode_matches_uncoupled_tangent(self, cycle_orbit,
                                                     two_clique_spec):
        # the zero-eigenvalue mode evolves exactly like the K = 0 tangent
        zeta0 = np.zeros((6, 2))
        zeta0[0] = (0.0, 0.04)
        xi0 = from_eigenbasis(zeta0.reshape(-1), two_clique_spec)
        _, zeta = propagate_deviations(cycle_orbit, two_clique_spec, xi0,
                                       steps=150)
        p = cycle_orbit.params
        vx, vy = 0.0, 0.04
        for t in range(150):
            fp = cycle_orbit.fprime[t]
            vx, vy = ((1 - p.delta) * vx + vy,
                      p.alpha1 * vx + (p.alpha2 + fp) * vy)
            assert zeta[t + 1, 0] == pytest.approx(vx, abs=1e-10)
            assert zeta[t + 1, 1] == pytest.approx(vy, abs=1e-10)

    def test_clique_modes_decay_faster_than_bridge_mode(self, cycle_orbit,
                                                        two_clique_spec):
        xi0 = np.zeros(12)
        xi0[1::2] = [0.05, 0.03, 0.04, -0.03, -0.06, 0.00]
        _, zeta = propagate_deviations(cycle_orbit, two_clique_spec, xi0,
                                       steps=600)
        z_y = np.abs(zeta[:, 1::2])

        def decay_time(mode):
            target = 0.1 * z_y[0, mode]
            below = np.flatnonzero(z_y[:, mode] <= target)
            below = below[below > 0]
            return int(below[0]) if below.size else zeta.shape[0]

        slow = decay_time(1)
        for mode in range(2, 6):
            assert decay_time(mode) < slow


@pytest.fixture(scope="module")
def pair_net():
    return uniform_coupling(build_topology("complete", 2), 0.3)


@pytest.fixture(scope="module")
def params():
    return AgentParams.with_steady_state(-0.04, 0.4, 0.1, Q)


class TestShockResponseCompare:

    def test_rmse_grows_with_shock_size(self, pair_net, params):
        rmses = []
        for u in (0.025, 0.05, 0.1, 0.2):
            resp = shock_response_compare(pair_net, params, Q,
                                          shock=[u, 0.0], tau=200)
            rmses.append(resp.rmse)
        assert all(a < b for a, b in zip(rmses, rmses[1:]))

    def test_phase_shift_sign_follows_shock_sign(self, pair_net, params):
        pos = shock_response_compare(pair_net, params, Q, shock=[0.2, 0.0],
                                     tau=200)
        neg = shock_response_compare(pair_net, params, Q, shock=[-0.2, 0.0],
                                     tau=200)
        assert pos.phase_shift > 0
        assert neg.phase_shift < 0

    def test_recession_shock_disturbs_more_than_peak_shock(self, pair_net,
                                                           params):
        orbit = synchronized_orbit(params, Q, steps=3000)
        period = int(round(orbit.period))
        seg = orbit.y[1000:1000 + period]
        t_peak = 1000 + int(np.argmax(seg))
        dy = np.diff(orbit.y[1000:1000 + 2 * period])
        t_recession = 1000 + int(np.argmin(dy))
        peak_resp = shock_response_compare(pair_net, params, Q,
                                           shock=[0.2, 0.0], tau=t_peak)
        rec_resp = shock_response_compare(pair_net, params, Q,
                                          shock=[0.2, 0.0], tau=t_recession)
        peak_z1 = np.abs(peak_resp.zeta[:, 1]).max()
        rec_z1 = np.abs(rec_resp.zeta[:, 1]).max()
        assert rec_z1 > peak_z1

    def test_linearization_error_vanishes_with_shock(self, pair_net, params):
        rmses = [shock_response_compare(pair_net, params, Q,
                                        shock=[u, 0.0], tau=200).rmse
                 for u in (0.1, 0.05, 0.025)]
        assert rmses[0] > rmses[1] > rmses[2]

    def test_csv_export(self, pair_net, params, tmp_path):
        resp = shock_response_compare(pair_net, params, Q, shock=[0.1, 0.0],
                                      tau=150)
        path = tmp_path / "resp.csv"
        resp.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "basis,node_or_mode,step,value"
        assert any(line.startswith("node,0,") for line in lines[1:])
        assert any(line.startswith("mode,1,") for line in lines[1:])
