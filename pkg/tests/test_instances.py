import numpy as np
import pytest
from scipy import stats

from embedlab import (
    GeneratorKind,
    InvalidInputError,
    InvalidInstanceError,
    InvalidParameterError,
    evaluate_accuracy,
    generate_ground_truth_sphere,
    generate_poisson_quadruplets,
    generate_poisson_triplets,
    generate_uniform_quadruplets,
    generate_uniform_triplets,
    read_instance,
    write_instance,
)
from embedlab.instances import (
    default_points_path,
    quadruplet_tuple_count,
    read_points,
    triplet_tuple_count,
)
from embedlab._rng import derive_seed

from conftest import make_instance


class TestInstanceInvariants:
    def test_rejects_out_of_range_indices(self):
        with pytest.raises(InvalidInstanceError):
            make_instance(3, [[0, 1, 3]])

    def test_rejects_repeated_triplet_items(self):
        with pytest.raises(InvalidInstanceError):
            make_instance(4, [[0, 1, 1]])

    def test_rejects_equal_quadruplet_pairs(self):
        with pytest.raises(InvalidInstanceError):
            make_instance(4, [[0, 1, 1, 0]], quadruplet=True)
        make_instance(4, [[0, 1, 1, 2]], quadruplet=True)  # overlap of one item is fine

    def test_duplicates_count_with_multiplicity(self):
        inst = make_instance(3, [[0, 1, 2], [0, 1, 2]])
        assert inst.m == 2


class TestUniformTriplets:
    def test_smallest_case_uses_the_only_item_set(self):
        inst = generate_uniform_triplets(3, 1, seed=11)
        assert sorted(inst.constraints[0].tolist()) == [0, 1, 2]

    def test_figure_scale_count(self):
        inst = generate_uniform_triplets(4000, 10**6, seed=0)
        assert inst.m == 10**6

    def test_rejects_tiny_n(self):
        with pytest.raises(InvalidInstanceError):
            generate_uniform_triplets(2, 5, seed=0)

    def test_determinism(self):
        a = generate_uniform_triplets(20, 500, seed=42)
        b = generate_uniform_triplets(20, 500, seed=42)
        c = generate_uniform_triplets(20, 500, seed=43)
        assert np.array_equal(a.constraints, b.constraints)
        assert not np.array_equal(a.constraints, c.constraints)

    def test_orientation_frequencies(self):
        # Aggregated over all 3-item sets, each of the 6 orientations of a
        # set should carry 1/6 +- 0.03 of the draws.
        inst = generate_uniform_triplets(10, 5000, seed=7)
        cons = inst.constraints
        order = np.argsort(cons, axis=1)  # positions of sorted items
        orientation = order[:, 0] * 2 + (order[:, 1] > order[:, 2])
        counts = np.bincount(orientation, minlength=6)
        freqs = counts / counts.sum()
        assert np.all(np.abs(freqs - 1 / 6) <= 0.03)
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_ordered_triple_marginals(self):
        # every ordered distinct triple equally likely
        n, m = 5, 120_000
        inst = generate_uniform_triplets(n, m, seed=3)
        codes = (inst.constraints[:, 0] * n + inst.constraints[:, 1]) * n + inst.constraints[:, 2]
        counts = np.bincount(codes, minlength=n**3)
        valid = counts[counts.nonzero()]
        assert valid.size == triplet_tuple_count(n)
        assert stats.chisquare(valid).pvalue > 1e-3


class TestPoissonTriplets:
    def test_zero_lambda_is_empty(self):
        assert generate_poisson_triplets(3, 0.0, seed=5).m == 0

    def test_negative_lambda_rejected(self):
        with pytest.raises(InvalidParameterError):
            generate_poisson_triplets(10, -0.1, seed=0)

    def test_mean_count_matches_closed_form(self):
        n, lam, seeds = 100, 1e-5, 10_000
        expected = lam * triplet_tuple_count(n)
        total = sum(generate_poisson_triplets(n, lam, derive_seed(1, t)).m for t in range(seeds))
        assert abs(total / seeds - expected) <= 0.1

    def test_fixed_triple_multiplicity_is_poisson(self):
        # Kolmogorov-Smirnov on the multiplicity of one fixed ordered triple
        # across seeds, against the Poisson CDF (asymptotic critical value,
        # conservative for discrete distributions).
        n, lam, seeds = 50, 1e-4, 100_000
        target = np.array([4, 17, 32], dtype=np.int64)
        counts = np.zeros(seeds, dtype=np.int64)
        for t in range(seeds):
            inst = generate_poisson_triplets(n, lam, derive_seed(9, t))
            if inst.m:
                counts[t] = np.count_nonzero(np.all(inst.constraints == target, axis=1))
        kmax = int(counts.max()) + 1
        ecdf = np.array([(counts <= k).mean() for k in range(kmax)])
        cdf = stats.poisson.cdf(np.arange(kmax), lam)
        ks_stat = np.abs(ecdf - cdf).max()
        critical = 1.6276 / np.sqrt(seeds)  # alpha = 0.01
        assert ks_stat <= critical


class TestSphereInstances:
    def test_meta_points_have_perfect_accuracy(self):
        inst = generate_ground_truth_sphere(5, 2, 30, seed=2)
        assert evaluate_accuracy(inst.meta.ground_truth_points, inst) == 1.0

    def test_points_are_unit_norm(self):
        inst = generate_ground_truth_sphere(40, 8, 100, seed=6)
        norms = np.linalg.norm(inst.meta.ground_truth_points, axis=1)
        assert np.all(np.abs(norms - 1) <= 1e-9)

    def test_combinations_are_distinct(self):
        n = 8
        inst = generate_ground_truth_sphere(n, 3, n * (n - 1) * (n - 2) // 2, seed=4)
        lo = np.minimum(inst.constraints[:, 1], inst.constraints[:, 2])
        hi = np.maximum(inst.constraints[:, 1], inst.constraints[:, 2])
        keys = (inst.constraints[:, 0] * n + lo) * n + hi
        assert np.unique(keys).size == inst.m

    def test_m_beyond_combinations_rejected(self):
        with pytest.raises(InvalidParameterError):
            generate_ground_truth_sphere(5, 2, 31, seed=0)

    def test_orientation_matches_distances(self):
        inst = generate_ground_truth_sphere(20, 4, 300, seed=8)
        pts = inst.meta.ground_truth_points
        a, j, k = inst.constraints.T
        dj = ((pts[a] - pts[j]) ** 2).sum(axis=1)
        dk = ((pts[a] - pts[k]) ** 2).sum(axis=1)
        assert np.all(dj < dk)

    def test_figure_scale_configuration(self):
        inst = generate_ground_truth_sphere(1000, 128, 10**6, seed=1)
        assert inst.m == 10**6
        assert inst.meta.ground_truth_points.shape == (1000, 128)
        assert evaluate_accuracy(inst.meta.ground_truth_points, inst) == 1.0


class TestQuadrupletGenerators:
    def test_single_quadruplet_valid(self):
        inst = generate_uniform_quadruplets(4, 1, seed=13)
        a, b, c, d = inst.constraints[0]
        assert {a, b} != {c, d} and a != b and c != d

    def test_poisson_zero_lambda(self):
        assert generate_poisson_quadruplets(4, 0.0, seed=0).m == 0

    def test_poisson_mean_within_two_percent(self):
        n, lam, seeds = 100, 1e-7, 10_000
        expected = lam * quadruplet_tuple_count(n)
        total = sum(
            generate_poisson_quadruplets(n, lam, derive_seed(2, t)).m for t in range(seeds)
        )
        assert abs(total / seeds - expected) <= 0.02 * expected


class TestSerialization:
    def test_uniform_round_trip(self, tmp_path):
        inst = generate_uniform_triplets(15, 40, seed=21)
        path = str(tmp_path / "inst.txt")
        write_instance(path, inst)
        back = read_instance(path)
        assert back.n == inst.n
        assert np.array_equal(back.constraints, inst.constraints)
        assert back.meta.kind is GeneratorKind.UNIFORM_FIXED_M
        assert back.meta.seed == 21

    def test_poisson_lambda_round_trips(self, tmp_path):
        inst = generate_poisson_triplets(30, 1e-4, seed=3)
        path = str(tmp_path / "p.txt")
        write_instance(path, inst)
        back = read_instance(path)
        assert back.meta.lam == 1e-4

    def test_sphere_points_round_trip(self, tmp_path):
        inst = generate_ground_truth_sphere(10, 3, 25, seed=5)
        path = str(tmp_path / "s.txt")
        write_instance(path, inst)
        back = read_instance(path)
        assert np.array_equal(back.constraints, inst.constraints)
        assert np.array_equal(back.meta.ground_truth_points, inst.meta.ground_truth_points)
        assert evaluate_accuracy(back.meta.ground_truth_points, back) == 1.0
        pts = read_points(default_points_path(path))
        assert pts.shape == (10, 3)

    def test_quadruplet_round_trip(self, tmp_path):
        inst = generate_uniform_quadruplets(9, 12, seed=1)
        path = str(tmp_path / "q.txt")
        write_instance(path, inst)
        back = read_instance(path)
        assert back.is_quadruplet
        assert np.array_equal(back.constraints, inst.constraints)

    def test_hand_written_file(self, tmp_path):
        path = tmp_path / "hand.txt"
        path.write_text("triplets 4 2 0 external\n0 1 2\n3 2 0\n")
        inst = read_instance(str(path))
        assert inst.n == 4 and inst.m == 2

    def test_empty_poisson_file(self, tmp_path):
        inst = generate_poisson_triplets(5, 0.0, seed=2)
        path = str(tmp_path / "e.txt")
        write_instance(path, inst)
        assert read_instance(path).m == 0

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("nonsense\n")
        with pytest.raises(InvalidInputError):
            read_instance(str(path))

    def test_missing_points_file_rejected(self, tmp_path):
        inst = generate_ground_truth_sphere(6, 2, 10, seed=7)
        path = str(tmp_path / "s.txt")
        write_instance(path, inst)
        (tmp_path / "s.txt.points").unlink()
        with pytest.raises(InvalidInputError):
            read_instance(path)

    def test_truncated_body_rejected(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("triplets 4 2 0 external\n0 1 2\n")
        with pytest.raises(InvalidInputError):
            read_instance(str(path))


from hypothesis import given, settings
from hypothesis import strategies as st


@st.composite
def small_instances(draw):
    n = draw(st.integers(min_value=3, max_value=12))
    m = draw(st.integers(min_value=0, max_value=20))
    rows = []
    for _ in range(m):
        items = draw(
            st.lists(st.integers(0, n - 1), min_size=3, max_size=3, unique=True)
        )
        rows.append(items)
    if draw(st.booleans()) and rows:
        rows.append(rows[0])  # duplicates are legal and count with multiplicity
    return n, rows


@given(small_instances())
@settings(max_examples=60, deadline=None)
def test_serialization_round_trip_property(tmp_path_factory, case):
    n, rows = case
    arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    inst = make_instance(n, arr)
    path = str(tmp_path_factory.mktemp("rt") / "i.txt")
    write_instance(path, inst)
    back = read_instance(path)
    assert back.n == inst.n
    assert np.array_equal(back.constraints, inst.constraints)
