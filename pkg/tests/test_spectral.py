import numpy as np
import pytest

from hiernet.model import validate_network
from hiernet.spectral import (
    IdentityViolation,
    JordanViolation,
    NormalizationImpossible,
    Regime,
    build_example1,
    build_example2,
    build_sim_network,
    classify_regime,
    from_user_spectral,
    pairwise_projection,
    spectral_from_json,
    spectral_to_json,
)

IDENTITY_CASES = [
    ("example1", lambda: build_example1(3, 0.3)),
    ("example1", lambda: build_example1(3, 0.5)),
    ("example1", lambda: build_example1(6, 0.3)),
    ("example1", lambda: build_example1(6, 0.5)),
    ("example2", lambda: build_example2(2, 2, 0.6, 0.3)),
    ("example2", lambda: build_example2(3, 2, 0.8, 0.1)),
    ("sim", lambda: build_sim_network(0.8, 0.5)),
    ("sim", lambda: build_sim_network(0.2, 0.5)),
]


@pytest.mark.parametrize("name,builder", IDENTITY_CASES)
def test_decomposition_identities(name, builder):
    net, spec = builder()
    n = net.n_agents
    ident = spec.left_matrix @ spec.right_matrix
    assert np.abs(ident - np.eye(n)).max() < 1e-10
    jordan = spec.left_matrix @ net.weights @ spec.right_matrix
    assert np.abs(jordan - spec.jordan_matrix()).max() < 1e-10
    recon = (
        np.outer(spec.q1, spec.p1)
        + spec.Q @ spec.jordan_matrix()[1:, 1:] @ spec.P.T
    )
    assert np.abs(recon - net.weights).max() < 1e-10
    resolution = np.outer(spec.q1, spec.p1) + spec.Q @ spec.P.T
    assert np.abs(resolution - np.eye(n)).max() < 1e-10
    assert spec.cumulative_indices[-1] == n - 1


class TestExample1:
    def test_chain_action_by_matrix_vector_products(self):
        # direct oracle: W q_2 = lam q_2 (chain head), W q_h = lam q_h + q_{h-1}
        net, spec = build_example1(3, 0.5)
        lam = 0.5
        w = net.weights
        q2 = spec.right_matrix[:, 1]
        q3 = spec.right_matrix[:, 2]
        assert np.abs(w @ q2 - lam * q2).max() < 1e-12
        assert np.abs(w @ q3 - (lam * q3 + q2)).max() < 1e-12

    def test_dominant_vector(self):
        _, spec = build_example1(3, 0.5)
        assert np.allclose(spec.q1, np.array([np.sqrt(3), 0, 0]))

    @pytest.mark.parametrize("n,alpha", [(2, 0.3), (4, 0.7), (7, 0.45)])
    def test_eigenvalue_structure(self, n, alpha):
        _, spec = build_example1(n, alpha)
        assert spec.eigenvalues[0] == 1
        assert spec.eigenvalues[1] == pytest.approx(1 - alpha)
        assert spec.block_orders == (n - 1,)
        assert spec.tau == pytest.approx(1 - alpha)
        assert spec.rho == n - 1

    def test_two_agents_single_order_one_block(self):
        _, spec = build_example1(2, 0.3)
        assert spec.block_orders == (1,)
        assert spec.rho == 1
        assert spec.tau == pytest.approx(0.7)


class TestExample2:
    def test_dominant_pair_normalization(self):
        _, spec = build_example2(2, 2, 0.6, 0.3)
        assert spec.p1 @ spec.q1 == pytest.approx(1.0)
        assert np.allclose(spec.q1, np.array([1, 1, 0, 0]))

    def test_leading_group_vectors(self):
        # second left/right pair of the leading group
        n1, n2 = 2, 2
        _, spec = build_example2(n1, n2, 0.6, 0.3)
        n = n1 + n2
        expected_p = (np.array([1, 1, 0, 0]) - n1 * np.array([0, 1, 0, 0])) / np.sqrt(n)
        expected_q = (np.sqrt(n) / n1) * np.array([1, -1, 0, 0])
        assert np.allclose(spec.left_matrix[1], expected_p)
        assert np.allclose(spec.right_matrix[:, 1], expected_q)

    @pytest.mark.parametrize("n1,n2,alpha,beta", [(2, 2, 0.6, 0.3), (4, 3, 0.5, 0.2)])
    def test_tau_and_orders(self, n1, n2, alpha, beta):
        _, spec = build_example2(n1, n2, alpha, beta)
        assert spec.tau == pytest.approx(alpha)
        assert spec.rho == 1
        assert all(r == 1 for r in spec.block_orders)

    def test_parameter_order_enforced(self):
        with pytest.raises(ValueError):
            build_example2(2, 2, 0.3, 0.6)


class TestSimNetwork:
    def test_eigenvalues_strong_case(self):
        _, spec = build_sim_network(0.8, 0.5)
        assert np.allclose(np.sort_complex(spec.eigenvalues), [0.5, 0.5, 0.6, 1.0])
        assert spec.tau == pytest.approx(0.6)

    def test_column_sums(self):
        net, _ = build_sim_network(0.37, 0.81)
        assert np.abs(net.weights.sum(axis=0) - 1).max() < 1e-12

    def test_dominant_right_eigenvector(self):
        net, spec = build_sim_network(0.8, 0.5)
        assert np.abs(net.weights @ spec.q1 - spec.q1).max() < 1e-12

    def test_eigenvalue_collision_still_valid(self):
        # 2 alpha - 1 = beta at alpha=0.75, beta=0.5: basis stays independent
        net, spec = build_sim_network(0.75, 0.5)
        spec.verify(net.weights)


class TestUserSpectral:
    def test_example1_round_trips(self):
        net, spec = build_example1(4, 0.5)
        spec2 = from_user_spectral(
            net, spec.eigenvalues, spec.block_orders, spec.left_matrix, spec.right_matrix
        )
        assert np.abs(spec2.right_matrix - spec.right_matrix).max() < 1e-12

    def test_swapped_chain_vectors_is_jordan_violation(self):
        net, spec = build_example1(4, 0.5)
        q = spec.right_matrix.copy()
        q[:, [1, 2]] = q[:, [2, 1]]
        p = np.linalg.inv(q)
        with pytest.raises(JordanViolation):
            from_user_spectral(net, spec.eigenvalues, spec.block_orders, p, q)

    def test_scale_freedom_renormalized(self):
        net, spec = build_example1(3, 0.5)
        p = spec.left_matrix.copy()
        q = spec.right_matrix.copy()
        p[0, :] = p[0, :] / 2.0
        q[:, 0] = q[:, 0] * 2.0
        spec2 = from_user_spectral(net, spec.eigenvalues, spec.block_orders, p, q)
        assert np.array_equal(spec2.p1, spec.p1)
        assert np.abs(spec2.q1 - spec.q1).max() < 1e-12

    def test_identity_violation(self):
        net, spec = build_example1(3, 0.5)
        q = spec.right_matrix.copy()
        q[:, 2] = q[:, 2] * 1.5  # break P~ Q~ = I without touching p1
        with pytest.raises(IdentityViolation):
            from_user_spectral(net, spec.eigenvalues, spec.block_orders, spec.left_matrix, q)

    def test_p1_not_proportional_to_ones(self):
        net, spec = build_example1(3, 0.5)
        p = spec.left_matrix.copy()
        p[0, 0] = p[0, 0] * 1.5
        with pytest.raises(NormalizationImpossible):
            from_user_spectral(net, spec.eigenvalues, spec.block_orders, p, spec.right_matrix)

    def test_complex_conjugate_chain_network(self):
        # one leader feeding a 3-cycle: eigenvalues {1, x, x w, x conj(w)} with
        # w a primitive cube root of unity; conjugate chains keep the
        # reconstruction real.
        x = 0.6
        w = np.zeros((4, 4))
        w[0, 0] = 1.0
        for j in range(1, 4):
            w[0, j] = 1 - x
            w[1 + (j % 3), j] = x
        net = validate_network(w, (1, 3))
        omega = np.exp(2j * np.pi / 3)
        qs = [np.array([2.0, 0, 0, 0], dtype=complex)]
        evs = [1.0 + 0j]
        for lam_unit in (1.0, omega, omega.conjugate()):
            v = np.array([0, 1, lam_unit ** -1, lam_unit ** -2], dtype=complex)
            full = np.zeros(4, dtype=complex)
            full[1:] = v[1:]
            mu = x * lam_unit
            full[0] = (1 - x) * v[1:].sum() / (mu - 1.0)
            qs.append(full)
            evs.append(mu)
        q_mat = np.column_stack(qs)
        p_mat = np.linalg.inv(q_mat)
        spec = from_user_spectral(net, evs, (1, 1, 1), p_mat, q_mat)
        assert spec.tau == pytest.approx(x)
        recon = np.outer(spec.q1, spec.p1) + spec.Q @ spec.jordan_matrix()[1:, 1:] @ spec.P.T
        assert np.abs(recon.imag).max() < 1e-10

    def test_json_round_trip(self):
        net, spec = build_example2(2, 2, 0.6, 0.3)
        data = spectral_to_json(spec)
        spec2 = spectral_from_json(net, data)
        assert np.abs(spec2.right_matrix - spec.right_matrix).max() < 1e-12
        assert spec2.block_orders == spec.block_orders


class TestRegime:
    def test_subpolynomial(self):
        _, spec = build_sim_network(0.8, 0.5)
        assert classify_regime(0.9, 1.0, spec) is Regime.SUBPOLYNOMIAL

    def test_boundary_at_exact_threshold(self):
        _, spec = build_example1(3, 0.5)  # tau = 0.5 = 1 - 1/2
        assert classify_regime(1.0, 1.0, spec) is Regime.CRITICAL_BOUNDARY

    def test_subcritical_inequality(self):
        _, spec = build_sim_network(0.8, 0.5)  # tau = 0.6 < 0.75
        assert classify_regime(1.0, 2.0, spec) is Regime.CRITICAL_SUBCRITICAL

    def test_unsupported_returned_not_raised(self):
        _, spec = build_sim_network(0.9, 0.5)  # tau = 0.8 > 0.75
        assert classify_regime(1.0, 2.0, spec) is Regime.UNSUPPORTED


class TestPairwiseProjection:
    def test_same_agent_rejected(self):
        _, spec = build_example2(2, 2, 0.6, 0.3)
        with pytest.raises(ValueError):
            pairwise_projection(spec, 1, 1)

    def test_antisymmetry(self):
        _, spec = build_sim_network(0.8, 0.5)
        p_ij, ptil_ij = pairwise_projection(spec, 0, 2)
        p_ji, ptil_ji = pairwise_projection(spec, 2, 0)
        assert np.abs(p_ij + p_ji).max() == 0
        assert np.abs(ptil_ij + ptil_ji).max() == 0

    def test_leading_pair_has_no_downstream_coordinates(self):
        # both agents in the leading group: difference lives in the
        # alpha-eigenvector coordinate only
        _, spec = build_example2(2, 2, 0.6, 0.3)
        p_ij, ptil_ij = pairwise_projection(spec, 0, 1)
        assert np.abs(p_ij[1:]).max() < 1e-12  # beta coordinates vanish
        assert abs(p_ij[0]) > 0.5
        assert ptil_ij[0] == 0
