import numpy as np
import pytest

from leadfollow.graphtop import (
    GershgorinDisc,
    LeaderGraph,
    gershgorin_discs,
    in_gershgorin_union,
    is_connected,
    jointly_connected,
    min_real_eig,
    random_graph,
    random_jointly_connected,
    structure_matrices,
    union,
    unreachable,
)

G = LeaderGraph.from_lists


class TestLeaderGraph:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            G(2, [(1, 1)])

    def test_rejects_edge_into_leader(self):
        with pytest.raises(ValueError):
            G(2, [(1, 0)])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError):
            G(2, [(1, 2, 0.0)])
        with pytest.raises(ValueError):
            G(2, [], [[1, -1.0]])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            G(2, [(1, 3)])

    def test_dict_round_trip(self):
        g = G(3, [(1, 2, 2.0), (2, 3)], [[1, 3.0]])
        assert LeaderGraph.from_dict(g.to_dict()) == g

    def test_equality_tolerance(self):
        assert G(2, [(1, 2, 1.0)]) == G(2, [(1, 2, 1.0 + 1e-13)])
        assert G(2, [(1, 2, 1.0)]) != G(2, [(1, 2, 1.0 + 1e-9)])


class TestStructureMatrices:
    def test_empty(self):
        sm = structure_matrices(G(2))
        for m in (sm.laplacian, sm.leader_diag, sm.h):
            np.testing.assert_array_equal(m, np.zeros((2, 2)))

    def test_path(self):
        sm = structure_matrices(G(2, [(1, 2)], [1]))
        np.testing.assert_array_equal(sm.laplacian, [[0, 0], [-1, 1]])
        np.testing.assert_array_equal(sm.leader_diag, np.diag([1, 0]))
        np.testing.assert_array_equal(sm.h, [[1, 0], [-1, 1]])
        np.testing.assert_array_equal(sm.adjacency, [[0, 0], [1, 0]])

    def test_weighted(self):
        sm = structure_matrices(G(2, [(1, 2, 2.0)], [[1, 3.0]]))
        np.testing.assert_array_equal(sm.h, [[3, 0], [-2, 2]])

    def test_laplacian_invariants(self, rng):
        for _ in range(50):
            g = random_graph(rng, int(rng.integers(1, 9)), 0.4, 0.3)
            sm = structure_matrices(g)
            lap = sm.laplacian
            np.testing.assert_array_equal(lap.sum(axis=1), 0)
            off = lap - np.diag(np.diag(lap))
            assert (off <= 0).all()
            assert (np.diag(lap) >= 0).all()
            np.testing.assert_array_equal(sm.h, lap + sm.leader_diag)

    def test_float_weights_row_sums(self, rng):
        edges = [(j, i, rng.uniform(0.1, 3)) for j in range(1, 6) for i in range(1, 6) if j != i]
        lap = structure_matrices(G(5, edges)).laplacian
        assert np.abs(lap.sum(axis=1)).max() <= 1e-12


class TestUnion:
    def test_self_union_doubles(self):
        g = G(3, [(1, 2, 1.5), (2, 3)], [[1, 2.0]])
        u = union([g, g], [1, 1])
        assert u == g.scaled(2.0)

    def test_hand_example(self):
        u = union([G(2, [(1, 2)]), G(2, [], [1])])
        np.testing.assert_array_equal(u.h, [[1, 0], [-1, 1]])

    def test_convex_combination_matches_matrix_sum(self, rng):
        gs = random_jointly_connected(rng, 6, 4, 0.2, 0.1)
        tau = rng.dirichlet(np.ones(4))
        expected = sum(t * g.h for t, g in zip(tau, gs))
        np.testing.assert_allclose(union(gs, tau).h, expected, atol=1e-12)

    def test_mismatched_n(self):
        with pytest.raises(ValueError):
            union([G(2), G(3)])

    def test_scale_count(self):
        with pytest.raises(ValueError):
            union([G(2), G(2)], [1.0])


class TestConnectivity:
    def test_examples(self):
        assert is_connected(G(1, [], [1]))
        assert not is_connected(G(2, [], [1]))
        assert unreachable(G(2, [], [1])) == [2]
        assert is_connected(G(3, [(1, 2), (2, 3)], [1]))

    def test_direction_matters(self):
        assert not is_connected(G(2, [(2, 1)], [1]))

    def test_joint(self):
        assert jointly_connected([G(3, [(1, 2), (2, 3)], [1])])
        g1, g2 = G(2, [], [1]), G(2, [(1, 2)])
        assert not is_connected(g1) and not is_connected(g2)
        assert jointly_connected([g1, g2])
        assert not jointly_connected([G(2, [], [1]), G(2, [], [1])])

    def test_generator_is_jointly_connected(self, rng):
        for _ in range(100):
            n, m = int(rng.integers(1, 9)), int(rng.integers(1, 6))
            gs = random_jointly_connected(rng, n, m)
            assert len(gs) == m
            assert jointly_connected(gs)


class TestGershgorin:
    def test_path(self):
        discs = gershgorin_discs([[1.0, 0.0], [-1.0, 1.0]])
        assert discs == [GershgorinDisc(1 + 0j, 0.0), GershgorinDisc(1 + 0j, 1.0)]

    def test_diagonal(self):
        assert all(d.radius == 0 for d in gershgorin_discs(np.diag([1.0, 2.0, 3.0])))

    def test_non_square(self):
        with pytest.raises(ValueError):
            gershgorin_discs(np.ones((2, 3)))

    def test_containment_on_random_graphs(self, rng):
        for _ in range(100):
            g = random_graph(rng, int(rng.integers(1, 9)), 0.4, 0.3)
            assert in_gershgorin_union(g.h, 1e-9)


class TestMinRealEig:
    def test_examples(self):
        assert min_real_eig([[1.0, 0.0], [-1.0, 1.0]]) == pytest.approx(1.0)
        assert min_real_eig(np.zeros((3, 3))) == 0.0

    def test_joint_connectivity_gives_positive(self, rng):
        for _ in range(50):
            gs = random_jointly_connected(rng, int(rng.integers(1, 9)), int(rng.integers(1, 6)))
            assert min_real_eig(union(gs).h) > 1e-9

    def test_closed_right_half_plane(self, rng):
        for _ in range(100):
            g = random_graph(rng, int(rng.integers(1, 9)), 0.3, 0.2)
            assert min_real_eig(g.h) >= -1e-9
