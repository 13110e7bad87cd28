import numpy as np
import pytest

from diffnet.combine import metropolis, uniform
from diffnet.linalg import kron_lift, spectral_radius
from diffnet.network import (
    CombinationMatrices,
    LinkNoiseProfile,
    NetworkModel,
    NodeProfile,
    Topology,
    VarianceRanges,
    WeightTrajectory,
    link_index,
    random_network,
)
from diffnet.theory import (
    InstabilityError,
    assemble_mean_dynamics,
    assemble_noise_moments,
    bias,
    block_max_norm,
    network_emse,
    network_metrics,
    network_msd,
    series_emse,
    series_msd,
    stability_report,
    step_size_bounds,
    steady_state_metric,
    theory_report,
    tracking_metrics,
)

NOISY_RANGES = VarianceRanges(
    sigma_u2=(0.5, 2.0),
    sigma_v2=(0.01, 0.1),
    sigma_w2=(1e-3, 2e-2),
    sigma_d2=(1e-3, 2e-2),
    sigma_u_link2=(1e-3, 2e-2),
    sigma_psi2=(1e-3, 2e-2),
)


def scalar_network(mu=0.01, sigma_v2=1.0, r=1.0):
    return NetworkModel(
        topology=Topology.from_edges(1, []),
        nodes=NodeProfile(m_dim=1, r_u=np.array([[[r]]], dtype=complex),
                          sigma_v2=np.array([sigma_v2]), mu=np.array([mu])),
        link_noise=LinkNoiseProfile.zeros(0, 1),
        weights=WeightTrajectory(mode="constant", w0=np.array([1.0 + 0j])),
    )


def noisy_instance(seed, n=4, m=2, connectivity=0.6):
    net = random_network(seed, n, m, connectivity, NOISY_RANGES)
    topo = net.topology
    eye = np.eye(n)
    combos = [
        CombinationMatrices(a1=eye, c=eye, a2=uniform(topo)),
        CombinationMatrices(a1=uniform(topo), c=eye, a2=eye),
        CombinationMatrices(a1=eye, c=uniform(topo).T, a2=uniform(topo)),
        CombinationMatrices(a1=metropolis(topo), c=metropolis(topo), a2=uniform(topo)),
    ]
    return net, combos[seed % len(combos)]


class TestScalarOracle:
    def test_single_node_lms_closed_form(self):
        mu = 0.01
        net = scalar_network(mu=mu)
        mats = CombinationMatrices.identity(1)
        expected = mu ** 2 / (1.0 - (1.0 - mu) ** 2)
        msd, emse = network_metrics(net, mats)
        assert abs(msd - expected) <= 1e-10 * expected
        assert abs(emse - expected) <= 1e-10 * expected

    def test_single_node_mean_factor(self):
        net = scalar_network(mu=0.01)
        md = assemble_mean_dynamics(net, CombinationMatrices.identity(1))
        assert md.b.shape == (1, 1)
        assert md.b[0, 0] == pytest.approx(0.99, abs=1e-15)

    def test_scalar_bounds_all_two(self):
        net = scalar_network(mu=0.01)
        b = step_size_bounds(net, CombinationMatrices.identity(1))
        assert b.tight[0] == pytest.approx(2.0, abs=1e-14)
        assert b.robust[0] == pytest.approx(2.0, abs=1e-14)
        assert b.noise_free[0] == pytest.approx(2.0, abs=1e-14)
        assert b.c_doubly_stochastic
        assert bool(b.ok_tight()[0]) and bool(b.ok_robust()[0])


def literal_mean_matrices(net, mats):
    """Plain-loop transcription of the mean transition matrix and drift."""
    topo = net.topology
    n, m = net.n_nodes, net.m_dim
    pos = {lk: p for p, lk in enumerate(link_index(topo))}
    mu = net.nodes.mu

    r_prime = np.zeros((n, m, m), dtype=complex)
    drift = np.zeros((n, m), dtype=complex)
    w_o = np.asarray(net.weights.w0, dtype=complex)
    for k in range(n):
        for l in topo.neighbors(k):
            r_prime[k] += mats.c[l, k] * net.nodes.r_u[l]
            if l != k:
                noise = net.link_noise.r_u_link[pos[(int(l), k)]]
                r_prime[k] += mats.c[l, k] * noise
                drift[k] -= mats.c[l, k] * (noise @ w_o)

    b = np.zeros((n * m, n * m), dtype=complex)
    for k in range(n):
        for l in range(n):
            block = np.zeros((m, m), dtype=complex)
            for q in range(n):
                block += mats.a2[q, k] * (np.eye(m) - mu[q] * r_prime[q]) * mats.a1[l, q]
            b[k * m:(k + 1) * m, l * m:(l + 1) * m] = block
    return r_prime, b, drift.reshape(-1)


class TestMeanDynamics:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_literal_assembly(self, seed):
        net, mats = noisy_instance(seed)
        md = assemble_mean_dynamics(net, mats)
        r_ref, b_ref, z_ref = literal_mean_matrices(net, mats)
        assert np.allclose(md.r_prime, r_ref, atol=1e-12)
        assert np.allclose(md.b, b_ref, atol=1e-12)
        assert np.allclose(md.z, z_ref, atol=1e-12)

    def test_bias_zero_without_regressor_link_noise(self):
        net, _ = noisy_instance(0)
        net.link_noise.r_u_link[:] = 0.0
        mats = CombinationMatrices(a1=np.eye(4), c=uniform(net.topology).T,
                                   a2=uniform(net.topology))
        md = assemble_mean_dynamics(net, mats)
        assert np.all(md.z == 0.0)
        assert np.all(bias(md) == 0.0)

    def test_bias_is_the_fixed_point(self):
        net, _ = noisy_instance(2)
        mats = CombinationMatrices(a1=np.eye(4), c=uniform(net.topology).T,
                                   a2=uniform(net.topology))
        md = assemble_mean_dynamics(net, mats)
        assert np.any(md.z != 0.0)
        g = bias(md)
        rhs = -(md.a2_lift.T @ (md.big_m @ md.z))
        x = np.zeros_like(rhs)
        for _ in range(20000):
            x_next = md.b @ x + rhs
            if np.linalg.norm(x_next - x) <= 1e-16 * max(np.linalg.norm(x_next), 1e-300):
                x = x_next
                break
            x = x_next
        assert np.linalg.norm(x - g) <= 1e-10 * np.linalg.norm(g)

    def test_custom_target_overrides_network_target(self):
        net, mats = noisy_instance(2)
        other = np.full(net.m_dim, 2.0 + 1.0j)
        md = assemble_mean_dynamics(net, mats, w_o=other)
        assert np.array_equal(md.w_o, other)


class TestSteadyState:
    @pytest.mark.parametrize("seed", range(10))
    def test_general_path_collapses_when_no_data_sharing(self, seed):
        net = random_network(seed + 100, 5, 2, 0.5, NOISY_RANGES)
        mats = CombinationMatrices(a1=uniform(net.topology), c=np.eye(5),
                                   a2=metropolis(net.topology))
        general = network_metrics(net, mats, simplified=False)
        simplified = network_metrics(net, mats, simplified=True)
        for a, b in zip(general, simplified):
            assert abs(a - b) <= 1e-10 * abs(b)

    def test_simplified_path_requires_identity_sharing(self):
        net, _ = noisy_instance(1)
        mats = CombinationMatrices(a1=np.eye(4), c=uniform(net.topology).T,
                                   a2=uniform(net.topology))
        with pytest.raises(ValueError, match="identity"):
            network_metrics(net, mats, simplified=True)

    @pytest.mark.parametrize("seed", range(20))
    def test_series_agrees_with_direct_solve(self, seed):
        net, mats = noisy_instance(seed, n=4 + seed % 3)
        md = assemble_mean_dynamics(net, mats)
        nm = assemble_noise_moments(net, mats, md)
        msd_direct, emse_direct = network_metrics(net, mats)
        msd_series, terms = series_msd(md, nm)
        emse_series, _ = series_emse(md, nm, net.nodes.r_u)
        assert terms >= 1
        assert abs(msd_series - msd_direct) <= 1e-8 * abs(msd_direct)
        assert abs(emse_series - emse_direct) <= 1e-8 * abs(emse_direct)

    def test_series_rejects_unstable_recursion(self):
        net = scalar_network(mu=3.0)
        mats = CombinationMatrices.identity(1)
        md = assemble_mean_dynamics(net, mats)
        nm = assemble_noise_moments(net, mats, md)
        with pytest.raises(InstabilityError):
            series_msd(md, nm)

    def test_direct_solve_rejects_unstable_recursion(self):
        net = scalar_network(mu=3.0)
        with pytest.raises(InstabilityError):
            network_metrics(net, CombinationMatrices.identity(1))

    def test_intermediate_estimate_noise_raises_the_floor(self):
        net, _ = noisy_instance(3)
        mats = CombinationMatrices(a1=np.eye(4), c=np.eye(4), a2=uniform(net.topology))
        base = network_msd(net, mats)
        net.link_noise.r_psi *= 4.0
        worse = network_msd(net, mats)
        assert worse > base

    def test_metric_accepts_custom_weighting(self):
        net, mats = noisy_instance(4)
        md = assemble_mean_dynamics(net, mats)
        nm = assemble_noise_moments(net, mats, md)
        dim = net.n_nodes * net.m_dim
        msd = steady_state_metric(md, nm, np.eye(dim) / net.n_nodes)
        assert msd == pytest.approx(network_msd(net, mats), rel=1e-12)

    def test_emse_helper_matches_metric_pair(self):
        net, mats = noisy_instance(5)
        msd, emse = network_metrics(net, mats)
        assert network_emse(net, mats) == pytest.approx(emse, rel=1e-12)
        assert network_msd(net, mats) == pytest.approx(msd, rel=1e-12)


class TestStepSizeBounds:
    @pytest.mark.parametrize("seed", range(6))
    def test_robust_never_exceeds_noise_free(self, seed):
        net = random_network(seed + 40, 5, 2, 0.5, NOISY_RANGES)
        mats = CombinationMatrices(a1=np.eye(5), c=metropolis(net.topology),
                                   a2=uniform(net.topology))
        b = step_size_bounds(net, mats)
        assert b.c_doubly_stochastic
        assert np.all(b.robust <= b.noise_free + 1e-15)

    def test_zero_link_noise_makes_robust_equal_noise_free(self):
        net = random_network(7, 5, 2, 0.5, NOISY_RANGES)
        net.link_noise.r_u_link[:] = 0.0
        mats = CombinationMatrices(a1=np.eye(5), c=np.eye(5), a2=uniform(net.topology))
        b = step_size_bounds(net, mats)
        assert np.array_equal(b.robust, b.noise_free)

    def test_row_only_stochastic_sharing_skips_robust(self):
        net, _ = noisy_instance(1)
        mats = CombinationMatrices(a1=np.eye(4), c=uniform(net.topology).T,
                                   a2=uniform(net.topology))
        b = step_size_bounds(net, mats)
        assert not b.c_doubly_stochastic
        assert b.robust is None
        assert b.ok_robust() is None


class TestStability:
    @pytest.mark.parametrize("seed", range(50))
    def test_mean_radius_below_block_norm_bound(self, seed):
        net, mats = noisy_instance(seed, n=3 + seed % 4, connectivity=0.5)
        md = assemble_mean_dynamics(net, mats)
        info = stability_report(md)
        assert info.rho_b <= info.rho_spectral_bound + 1e-12
        assert info.rho_f == pytest.approx(info.rho_b ** 2, rel=1e-12)
        assert info.mean_stable and info.mean_square_stable

    def test_unstable_step_size_flagged(self):
        net = scalar_network(mu=3.0)
        md = assemble_mean_dynamics(net, CombinationMatrices.identity(1))
        info = stability_report(md)
        assert info.rho_b == pytest.approx(2.0, abs=1e-14)
        assert not info.mean_stable
        assert not info.mean_square_stable


class TestBlockMaxNorm:
    def test_vector_norm_is_largest_block(self):
        x = np.array([3.0, 4.0, 0.0, 1.0], dtype=complex)
        assert block_max_norm(x, 2) == pytest.approx(5.0, abs=1e-15)

    def test_vector_length_must_tile(self):
        with pytest.raises(ValueError, match="multiple"):
            block_max_norm(np.ones(5), 2)

    def test_combine_lift_has_unit_norm(self):
        net, _ = noisy_instance(0, n=6)
        a = uniform(net.topology)
        lift = kron_lift(a.T, 2)
        assert block_max_norm(lift, 2) == 1.0

    def test_unit_norm_is_attained_and_never_exceeded(self):
        net, _ = noisy_instance(1, n=6)
        lift = kron_lift(uniform(net.topology).T, 2)
        gen = np.random.default_rng(8)
        for _ in range(20):
            x = gen.standard_normal((6, 2)) + 1j * gen.standard_normal((6, 2))
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            y = lift @ x.reshape(-1)
            assert block_max_norm(y, 2) <= 1.0 + 1e-12
        same_block = np.tile(np.array([0.6, 0.8j]), 6)
        assert block_max_norm(lift @ same_block, 2) == pytest.approx(1.0, abs=1e-14)

    def test_block_diagonal_hermitian_gives_spectral_radius(self):
        gen = np.random.default_rng(3)
        blocks = []
        for _ in range(4):
            a = gen.standard_normal((3, 3)) + 1j * gen.standard_normal((3, 3))
            blocks.append(a + a.conj().T)
        x = np.zeros((12, 12), dtype=complex)
        for k, blk in enumerate(blocks):
            x[k * 3:(k + 1) * 3, k * 3:(k + 1) * 3] = blk
        expected = max(float(np.abs(np.linalg.eigvalsh(b)).max()) for b in blocks)
        assert block_max_norm(x, 3) == pytest.approx(expected, rel=1e-10)

    def test_fallback_estimate_brackets_scaled_lift(self):
        net, _ = noisy_instance(2, n=5)
        lift = 2.0 * kron_lift(uniform(net.topology).T, 2)
        est = block_max_norm(lift, 2)
        assert est <= 2.0 + 1e-9
        assert est >= 1.9

    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            block_max_norm(np.ones((4, 6)), 2)


class TestTracking:
    def random_walk_net(self, seed=11, eps=1e-5):
        net = random_network(seed, 4, 2, 0.6, NOISY_RANGES)
        net.weights = WeightTrajectory(mode="random_walk", w0=net.weights.w0,
                                       r_eta=eps * np.eye(2, dtype=complex))
        return net

    def test_zero_increment_matches_stationary(self):
        net = self.random_walk_net(eps=0.0)
        mats = CombinationMatrices(a1=np.eye(4), c=np.eye(4), a2=uniform(net.topology))
        tm = tracking_metrics(net, mats)
        assert tm.msd == tm.msd_stationary
        assert tm.emse == tm.emse_stationary

    def test_penalty_linear_in_increment_covariance(self):
        net = self.random_walk_net()
        mats = CombinationMatrices(a1=np.eye(4), c=np.eye(4), a2=uniform(net.topology))
        eye2 = np.eye(2, dtype=complex)
        one = tracking_metrics(net, mats, r_eta=1e-5 * eye2)
        two = tracking_metrics(net, mats, r_eta=2e-5 * eye2)
        d1 = one.msd - one.msd_stationary
        d2 = two.msd - two.msd_stationary
        assert d1 > 0
        assert d2 / d1 == pytest.approx(2.0, rel=1e-6)

    def test_requires_increment_covariance(self):
        net = random_network(12, 4, 2, 0.6, NOISY_RANGES)
        mats = CombinationMatrices(a1=np.eye(4), c=np.eye(4), a2=uniform(net.topology))
        with pytest.raises(ValueError, match="r_eta"):
            tracking_metrics(net, mats)

    def test_rejects_non_left_stochastic_combiners(self):
        net = self.random_walk_net()
        mats = CombinationMatrices(a1=np.eye(4), c=np.eye(4),
                                   a2=uniform(net.topology).T)
        with pytest.raises(ValueError, match="left-stochastic"):
            tracking_metrics(net, mats)


class TestTheoryReport:
    def test_stable_scalar_report(self):
        net = scalar_network(mu=0.01)
        report = theory_report(net, CombinationMatrices.identity(1))
        out = report.to_dict()
        assert out["warnings"] == []
        assert out["rho_b"] == pytest.approx(0.99, abs=1e-14)
        assert out["bias_norm"] == 0.0
        expected_db = 10.0 * np.log10(0.01 ** 2 / (1.0 - 0.99 ** 2))
        assert out["msd_db"] == pytest.approx(expected_db, abs=1e-9)
        assert out["emse_db"] == pytest.approx(expected_db, abs=1e-9)
        row = out["mu_bounds"][0]
        assert row["node"] == 1
        assert row["bound_tight"] == pytest.approx(2.0)
        assert row["ok_tight"] is True and row["ok_robust"] is True
        assert "msd_track_db" not in out

    def test_unstable_scalar_report_warns_and_skips_metrics(self):
        net = scalar_network(mu=3.0)
        report = theory_report(net, CombinationMatrices.identity(1))
        out = report.to_dict()
        assert out["msd_db"] is None and out["emse_db"] is None
        assert any(w.startswith("mean-unstable") for w in out["warnings"])
        assert any(w.startswith("mean-square-unstable") for w in out["warnings"])
        assert "nodes [1]" in out["warnings"][0]

    def test_near_unit_radius_marked_ill_conditioned(self):
        net = scalar_network(mu=1e-7)
        report = theory_report(net, CombinationMatrices.identity(1))
        assert any(w.startswith("ill-conditioned") for w in report.warnings)
        assert report.msd is not None

    def test_row_only_sharing_warns_about_robust_bound(self):
        net, _ = noisy_instance(1)
        mats = CombinationMatrices(a1=np.eye(4), c=uniform(net.topology).T,
                                   a2=uniform(net.topology))
        report = theory_report(net, mats)
        assert any("robust step-size bound skipped" in w for w in report.warnings)
        assert report.msd is not None

    def test_random_walk_report_includes_tracking(self):
        net = random_network(13, 4, 2, 0.6, NOISY_RANGES)
        net.weights = WeightTrajectory(mode="random_walk", w0=net.weights.w0,
                                       r_eta=1e-5 * np.eye(2, dtype=complex))
        mats = CombinationMatrices(a1=np.eye(4), c=np.eye(4), a2=uniform(net.topology))
        out = theory_report(net, mats).to_dict()
        assert out["msd_track_db"] > out["msd_db"]
        assert out["emse_track_db"] > out["emse_db"]
