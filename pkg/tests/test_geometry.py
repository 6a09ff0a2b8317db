import numpy as np
import pytest
from hypothesis import given, strategies as st

import meshfd as m
from meshfd.errors import ConstructionError, InvalidInputError

from helpers import brute_force_knn, brute_force_range


class TestGenerateGrid:
    def test_1d_five_nodes(self):
        ns = m.generate_grid(1, 5, [(0.0, 1.0)])
        assert np.array_equal(ns.points.ravel(), [0.0, 0.25, 0.5, 0.75, 1.0])
        assert np.array_equal(ns.boundary_mask, [True, False, False, False, True])

    def test_2d_tensor_layout(self):
        n = 5
        ns = m.generate_grid(2, n, [(0.0, 1.0), (0.0, 1.0)])
        h = 1.0 / (n - 1)
        for i in range(n):
            for j in range(n):
                assert np.array_equal(ns.points[i * n + j], [i * h, j * h])

    def test_2d_two_per_axis_all_corners(self):
        ns = m.generate_grid(2, 2, [(0.0, 1.0), (0.0, 1.0)])
        assert ns.n == 4
        assert ns.boundary_mask.all()

    def test_boundary_marks_box_faces_only(self):
        ns = m.generate_grid(2, 4, [(0.0, 3.0), (-1.0, 1.0)])
        on_face = (
            (ns.points[:, 0] == 0.0) | (ns.points[:, 0] == 3.0)
            | (ns.points[:, 1] == -1.0) | (ns.points[:, 1] == 1.0)
        )
        assert np.array_equal(ns.boundary_mask, on_face)

    def test_invalid_inputs(self):
        with pytest.raises(InvalidInputError):
            m.generate_grid(0, 4, [])
        with pytest.raises(InvalidInputError):
            m.generate_grid(1, 1, [(0.0, 1.0)])
        with pytest.raises(InvalidInputError):
            m.generate_grid(1, 4, [(1.0, 1.0)])


class TestGenerateScattered:
    def test_seeded_random_reproducible(self):
        a = m.generate_scattered(2, 1, [(0, 1), (0, 1)], source="random", seed=7)
        b = m.generate_scattered(2, 1, [(0, 1), (0, 1)], source="random", seed=7)
        assert np.array_equal(a.points, b.points)
        assert not a.boundary_mask[0]

    def test_halton_distinct_all_pairs(self):
        ns = m.generate_scattered(2, 100, [(0, 1), (0, 1)], source="halton")
        diff = ns.points[:, None, :] - ns.points[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        assert dist.min() > 0.0
        assert int((~ns.boundary_mask).sum()) == 100
        assert int(ns.boundary_mask.sum()) > 0

    def test_identical_calls_identical_nodes(self):
        a = m.generate_scattered(2, 50, [(0, 1), (0, 1)], source="halton")
        b = m.generate_scattered(2, 50, [(0, 1), (0, 1)], source="halton")
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.boundary_mask, b.boundary_mask)

    def test_boundary_nodes_on_faces(self):
        ns = m.generate_scattered(2, 30, [(0, 1), (0, 1)], source="random", seed=3)
        for p in ns.points[ns.boundary_mask]:
            assert p.min() == 0.0 or p.max() == 1.0

    def test_count_zero_rejected(self):
        with pytest.raises(InvalidInputError):
            m.generate_scattered(2, 0, [(0, 1), (0, 1)])

    def test_unknown_source_rejected(self):
        with pytest.raises(InvalidInputError):
            m.generate_scattered(2, 5, [(0, 1), (0, 1)], source="sobolish")


class TestKnn:
    def test_1d_symmetric_neighbors(self):
        ns = m.generate_grid(1, 5, [(0.0, 1.0)])
        infl = m.knn(ns, [0.5], 3)
        assert set(infl.indices.tolist()) == {1, 2, 3}
        assert infl.indices[0] == 2  # the center node comes first

    def test_2d_five_star(self):
        n = 5
        ns = m.generate_grid(2, n, [(0.0, 1.0), (0.0, 1.0)])
        center = np.array([0.5, 0.5])
        infl = m.knn(ns, center, 5)
        idx = {tuple(ns.points[i]) for i in infl.indices}
        assert idx == {(0.5, 0.5), (0.25, 0.5), (0.75, 0.5), (0.5, 0.25), (0.5, 0.75)}

    def test_tie_broken_by_lower_index(self):
        ns = m.NodeSet(points=np.array([[0.0], [2.0]]), boundary_mask=[False, False])
        infl = m.knn(ns, [1.0], 1)
        assert infl.indices.tolist() == [0]

    def test_k_out_of_range(self):
        ns = m.generate_grid(1, 5, [(0.0, 1.0)])
        with pytest.raises(InvalidInputError):
            m.knn(ns, [0.5], 6)
        with pytest.raises(InvalidInputError):
            m.knn(ns, [0.5], 0)

    @given(
        n=st.integers(min_value=2, max_value=500),
        k=st.integers(min_value=1, max_value=500),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    def test_oracle_equivalence_random_clouds(self, n, k, seed):
        k = min(k, n)
        rng = np.random.default_rng(seed)
        pts = rng.random((n, 2))
        ns = m.NodeSet(points=pts, boundary_mask=np.zeros(n, dtype=bool))
        center = rng.random(2)
        infl = m.knn(ns, center, k)
        idx, dist = brute_force_knn(pts, center, k)
        assert np.array_equal(infl.indices, idx)
        assert np.allclose(infl.distances, dist, rtol=0, atol=0)


class TestRangeSearch:
    def test_five_star_radius(self):
        n = 5
        ns = m.generate_grid(2, n, [(0.0, 1.0), (0.0, 1.0)])
        h = 0.25
        infl = m.range_search(ns, [0.5, 0.5], h + 0.2 * h)
        assert infl.size == 5
        assert infl.radius == h

    def test_small_radius_empty(self):
        ns = m.generate_grid(2, 5, [(0.0, 1.0), (0.0, 1.0)])
        infl = m.range_search(ns, [0.51, 0.37], 1e-4)
        assert infl.size == 0
        assert infl.radius == 0.0

    def test_radius_beyond_diameter_returns_all(self):
        ns = m.generate_grid(2, 5, [(0.0, 1.0), (0.0, 1.0)])
        infl = m.range_search(ns, [0.5, 0.5], 10.0)
        assert infl.size == ns.n

    def test_nonpositive_radius_rejected(self):
        ns = m.generate_grid(1, 5, [(0.0, 1.0)])
        with pytest.raises(InvalidInputError):
            m.range_search(ns, [0.5], 0.0)

    @given(
        n=st.integers(min_value=1, max_value=500),
        seed=st.integers(min_value=0, max_value=10_000),
        radius=st.floats(min_value=1e-3, max_value=2.0),
    )
    def test_oracle_equivalence(self, n, seed, radius):
        rng = np.random.default_rng(seed)
        pts = rng.random((n, 2))
        ns = m.NodeSet(points=pts, boundary_mask=np.zeros(n, dtype=bool))
        center = rng.random(2)
        infl = m.range_search(ns, center, radius)
        idx, _ = brute_force_range(pts, center, radius)
        assert np.array_equal(infl.indices, idx)


class TestNodeSet:
    def test_coincident_nodes_rejected(self):
        with pytest.raises(ConstructionError):
            m.NodeSet(points=np.array([[0.1, 0.2], [0.1, 0.2]]), boundary_mask=[False, False])

    def test_points_are_read_only(self):
        ns = m.generate_grid(1, 3, [(0.0, 1.0)])
        with pytest.raises(ValueError):
            ns.points[0] = 9.0


class TestNodeCsv:
    def test_round_trip_bitwise(self, tmp_path):
        ns = m.generate_scattered(2, 17, [(0, 1), (0, 2)], source="random", seed=11)
        path = tmp_path / "nodes.csv"
        m.save_nodes(ns, path)
        back = m.load_nodes(path)
        assert np.array_equal(back.points, ns.points)
        assert np.array_equal(back.boundary_mask, ns.boundary_mask)

    def test_header_format(self, tmp_path):
        ns = m.generate_grid(2, 2, [(0, 1), (0, 1)])
        path = tmp_path / "nodes.csv"
        m.save_nodes(ns, path)
        assert path.read_text().splitlines()[0] == "x1,x2,boundary"

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2,boundary\n0.0,0.0,0\n0.5,1\n")
        with pytest.raises(InvalidInputError, match="ragged"):
            m.load_nodes(path)

    def test_bad_boundary_flag_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,boundary\n0.0,2\n")
        with pytest.raises(InvalidInputError):
            m.load_nodes(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,boundary\n0.0,0.0,0\n")
        with pytest.raises(InvalidInputError):
            m.load_nodes(path)

    def test_duplicate_rows_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("x1,boundary\n0.25,0\n0.25,0\n")
        with pytest.raises(ConstructionError):
            m.load_nodes(path)
