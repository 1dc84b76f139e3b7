import numpy as np
import pytest

from hiernet.model import StepSizeSchedule
from hiernet.simulate import (
    derive_rng,
    initial_state,
    materialize_z0,
    project,
    run_trajectory,
    simulate_batch,
    spread,
    step,
    trajectory_to_csv,
)
from hiernet.spectral import build_sim_network


@pytest.fixture(scope="module")
def sim():
    return build_sim_network(0.8, 0.5)


SCHED = StepSizeSchedule(gamma=0.9, c=1.0)


class TestStep:
    def test_zero_state_absorbing(self, sim):
        net, _ = sim
        state = initial_state(np.zeros(4), master_seed=1)
        for _ in range(50):
            state = step(state, net, SCHED)
        assert np.array_equal(state.z, np.zeros(4))
        assert np.array_equal(state.ncnt, np.zeros(4))

    def test_ones_state_absorbing(self, sim):
        net, _ = sim
        state = initial_state(np.ones(4), master_seed=1)
        for _ in range(50):
            state = step(state, net, SCHED)
        assert np.array_equal(state.z, np.ones(4))
        assert np.array_equal(state.ncnt, np.ones(4))

    def test_counter_increments_and_bounds(self, sim):
        net, _ = sim
        state = initial_state([0.5, 0.5, 0.0, 0.0], master_seed=3)
        for k in range(200):
            state = step(state, net, SCHED)
            assert state.n == k + 1
            assert state.z.min() >= 0 and state.z.max() <= 1
            assert state.ncnt.min() >= 0 and state.ncnt.max() <= 1

    def test_ncnt_is_exact_action_average(self, sim):
        # after n steps the action mean times n must be an integer vector
        net, _ = sim
        state = initial_state([0.5, 0.5, 0.0, 0.0], master_seed=4)
        for _ in range(37):
            state = step(state, net, SCHED)
        counts = state.ncnt * 37
        assert np.abs(counts - np.round(counts)).max() < 1e-9

    def test_one_step_martingale_of_z_tilde(self, sim):
        # conditional mean of the synchronized component is preserved exactly;
        # checked by averaging one million single steps from a fixed state.
        net, spec = sim
        runs = 1_000_000
        z0 = np.array([0.3, 0.7, 0.2, 0.9])
        rng = derive_rng(2024, 0)
        u = rng.random((runs, 4))
        p = np.zeros(4)
        for h in range(4):
            p += z0[h] * net.weights[h]
        x = (u < p).astype(float)
        r0 = SCHED.step(1)
        z1 = z0 + r0 * (x - z0)
        q1 = np.real(spec.q1)
        z_tilde_1 = z1 @ q1 / 2.0
        z_tilde_0 = float(z0 @ q1 / 2.0)
        se = z_tilde_1.std(ddof=1) / np.sqrt(runs)
        assert abs(z_tilde_1.mean() - z_tilde_0) < 3 * se


class TestRunTrajectory:
    def test_study_config_runs_in_bounds(self, sim):
        net, _ = sim
        traj = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 20000, seed=11)
        assert traj.final.n == 20000
        for _, z, m in traj.records:
            assert z.min() >= 0 and z.max() <= 1
            assert m.min() >= 0 and m.max() <= 1

    def test_same_seed_reproduces_bitwise(self, sim):
        net, _ = sim
        a = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 2000, seed=7, run_index=3)
        b = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 2000, seed=7, run_index=3)
        assert np.array_equal(a.final.z, b.final.z)
        assert np.array_equal(a.final.ncnt, b.final.ncnt)
        for (na, za, ma), (nb, zb, mb) in zip(a.records, b.records):
            assert na == nb and np.array_equal(za, zb) and np.array_equal(ma, mb)

    def test_different_run_index_differs(self, sim):
        net, _ = sim
        a = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 500, seed=7, run_index=0)
        b = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 500, seed=7, run_index=1)
        assert not np.array_equal(a.final.z, b.final.z)

    def test_horizon_one_equals_manual_step(self, sim):
        net, _ = sim
        traj = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 1, seed=5, run_index=2)
        state = initial_state([0.5, 0.5, 0.0, 0.0], master_seed=5, run_index=2)
        state = step(state, net, SCHED)
        assert np.array_equal(traj.final.z, state.z)
        assert np.array_equal(traj.final.ncnt, state.ncnt)

    def test_zero_horizon_rejected(self, sim):
        net, _ = sim
        with pytest.raises(ValueError):
            run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 0, seed=1)

    def test_records_strictly_increasing_and_final_present(self, sim):
        net, _ = sim
        traj = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 1003, seed=1, record_stride=100)
        steps = [s for s, _, _ in traj.records]
        assert steps == sorted(set(steps))
        assert steps[-1] == 1003
        assert steps[0] >= 1  # the pre-action mean is never exposed

    def test_csv_export_round_trip(self, sim, tmp_path):
        net, _ = sim
        traj = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 100, seed=1, record_stride=10)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert data.dtype.names == ("n", "Z_1", "Z_2", "Z_3", "Z_4", "N_1", "N_2", "N_3", "N_4")
        assert data["n"][-1] == 100
        assert data["Z_1"][-1] == traj.final.z[0]


class TestBatchKernel:
    def test_block_size_does_not_change_streams(self, sim):
        net, _ = sim
        z0 = np.tile([0.5, 0.5, 0.0, 0.0], (8, 1))
        outs = []
        for block in (7, 64, 1000):
            rngs = [derive_rng(123, i) for i in range(8)]
            z, m, _, _ = simulate_batch(net.weights, SCHED, z0, 600, rngs, block=block)
            outs.append((z, m))
        for z, m in outs[1:]:
            assert np.array_equal(z, outs[0][0])
            assert np.array_equal(m, outs[0][1])

    def test_batch_rows_match_single_runs(self, sim):
        net, _ = sim
        z0 = np.tile([0.5, 0.5, 0.0, 0.0], (5, 1))
        rngs = [derive_rng(9, i) for i in range(5)]
        z, m, _, _ = simulate_batch(net.weights, SCHED, z0, 400, rngs)
        for i in range(5):
            traj = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 400, seed=9, run_index=i)
            assert np.array_equal(z[i], traj.final.z)
            assert np.array_equal(m[i], traj.final.ncnt)

    def test_materialize_z0_draws_only_masked_entries(self):
        rngs = [derive_rng(5, i) for i in range(3)]
        z0 = materialize_z0(
            np.array([0.0, 0.0, 1.0, 0.25]),
            np.array([True, True, False, False]),
            3,
            rngs,
        )
        assert z0.shape == (3, 4)
        assert np.array_equal(z0[:, 2], np.ones(3))
        assert np.array_equal(z0[:, 3], np.full(3, 0.25))
        assert len(np.unique(z0[:, 0])) == 3  # random per run


class TestProjection:
    def test_synchronized_state_projects_to_scalar(self, sim):
        net, spec = sim
        traj = run_trajectory(net, SCHED, [0.3, 0.3, 0.3, 0.3], 1, seed=1)
        traj.records = [(1, np.full(4, 0.42), np.full(4, 0.42))]
        series = project(traj, spec)
        assert series.z_tilde[0] == pytest.approx(0.42, abs=1e-12)
        assert np.abs(series.z_hat[0]).max() < 1e-12

    def test_reconstruction_identity(self, sim):
        net, spec = sim
        traj = run_trajectory(net, SCHED, [0.5, 0.5, 0.0, 0.0], 777, seed=13, record_stride=111)
        series = project(traj, spec)
        for k, (s, z, m) in enumerate(traj.records):
            recon_z = series.z_tilde[k] + series.z_hat[k]
            recon_n = series.z_tilde[k] + series.n_hat[k]
            assert np.abs(recon_z - z).max() < 1e-12
            assert np.abs(recon_n - m).max() < 1e-12

    def test_study_network_corner_state(self, sim):
        net, spec = sim
        traj = run_trajectory(net, SCHED, [1.0, 0.0, 0.0, 0.0], 1, seed=1)
        traj.records = [(1, np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(4))]
        series = project(traj, spec)
        assert series.z_tilde[0] == pytest.approx(0.5)

    def test_increments_recorded_when_requested(self, sim):
        net, spec = sim
        traj = run_trajectory(
            net, SCHED, [0.5, 0.5, 0.0, 0.0], 50, seed=3, collect_increments=True
        )
        assert traj.increments.shape == (50, 4)
        # increments are centered actions: entries in (-1, 1)
        assert np.abs(traj.increments).max() < 1.0
        series = project(traj, spec)
        assert series.increments is traj.increments


class TestSpread:
    @pytest.mark.parametrize(
        "vec,expected",
        [
            ([1, 1, 1, 1], 0.0),
            ([0, 1, 0, 0], 1.0),
            ([0.2, 0.5, 0.4, 0.3], 0.3),
        ],
    )
    def test_values(self, vec, expected):
        assert spread(vec) == pytest.approx(expected, abs=1e-15)


class TestLeadingGroupAutonomy:
    def test_leading_paths_identical_when_downstream_changes(self, sim):
        net, _ = sim
        runs = 16
        horizon = 800
        record = tuple(range(1, horizon + 1))
        outs = []
        for down in (0.0, 1.0):
            z0 = np.tile([0.5, 0.5, down, down], (runs, 1))
            rngs = [derive_rng(31, i) for i in range(runs)]
            z, m, recs, _ = simulate_batch(
                net.weights, SCHED, z0, horizon, rngs, record_steps=record
            )
            outs.append(recs)
        for s in record:
            assert np.array_equal(outs[0][s][0][:, :2], outs[1][s][0][:, :2])
        # downstream paths must differ
        assert not np.array_equal(outs[0][horizon][0][:, 2:], outs[1][horizon][0][:, 2:])
