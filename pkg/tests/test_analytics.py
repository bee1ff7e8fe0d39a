import numpy as np
import numpy.testing as npt
import pytest

from floodstream.analytics import (
    AccumulationGrid,
    AnalyticsError,
    CompositeImage,
    accumulate,
    cluster_surfaces,
    composite_map,
    jaccard,
    outlier_scores,
    overlap_histogram,
    similarity_matrix,
)
from floodstream.backends import available_backends


def brute_counts(surfaces):
    return sum((s.cells > 0).astype(np.uint32) for s in surfaces)


class TestAccumulate:
    def test_counts_wet_cells_not_depths(self, make_surface):
        cells = np.array([[0, 1], [9, 255]], dtype=np.uint8)
        grid = accumulate([make_surface(cells)])
        npt.assert_array_equal(grid.counts, [[0, 1], [1, 1]])

    def test_matches_brute_force(self, make_surface):
        rng = np.random.default_rng(3)
        for _ in range(20):
            w, h = int(rng.integers(1, 65)), int(rng.integers(1, 65))
            k = int(rng.integers(1, 51))
            surfaces = [
                make_surface((w, h), seed=int(rng.integers(1 << 30))) for _ in range(k)
            ]
            grid = accumulate(surfaces)
            npt.assert_array_equal(grid.counts, brute_counts(surfaces))
            assert grid.n_inputs == k

    def test_order_invariant(self, make_surface):
        surfaces = [make_surface((40, 30), seed=i) for i in range(10)]
        forward = accumulate(surfaces)
        backward = accumulate(surfaces[::-1])
        npt.assert_array_equal(forward.counts, backward.counts)
        assert forward.digest() == backward.digest()

    def test_stack_validation(self, make_surface):
        with pytest.raises(AnalyticsError, match="at least one"):
            accumulate([])
        a = make_surface((8, 8), seed=0)
        b = make_surface((9, 8), seed=1, id="odd-one")
        with pytest.raises(AnalyticsError, match="odd-one"):
            accumulate([a, b])

    def test_variant_names_are_checked(self, make_surface):
        with pytest.raises(AnalyticsError, match="unknown kernel variant"):
            accumulate([make_surface((4, 4), seed=0)], variant="image9")


class TestAccumulationGrid:
    def test_rejects_counts_above_inputs(self):
        counts = np.full((2, 2), 3, dtype=np.uint32)
        with pytest.raises(AnalyticsError, match="exceeds"):
            AccumulationGrid(width=2, height=2, n_inputs=2, counts=counts)

    def test_rejects_wrong_dtype_and_shape(self):
        with pytest.raises(AnalyticsError, match="uint32"):
            AccumulationGrid(width=2, height=2, n_inputs=1, counts=np.zeros((2, 2)))
        with pytest.raises(AnalyticsError, match="shape"):
            AccumulationGrid(
                width=2, height=3, n_inputs=1, counts=np.zeros((2, 2), dtype=np.uint32)
            )

    def test_digest_covers_geometry_and_inputs(self):
        counts = np.zeros((2, 2), dtype=np.uint32)
        a = AccumulationGrid(width=2, height=2, n_inputs=0, counts=counts)
        b = AccumulationGrid(width=2, height=2, n_inputs=5, counts=counts.copy())
        assert a.digest() != b.digest()


class TestHistogram:
    def test_matches_bincount(self, make_surface):
        surfaces = [make_surface((32, 24), seed=i) for i in range(7)]
        grid = accumulate(surfaces)
        hist = overlap_histogram(grid)
        expected = np.bincount(grid.counts.ravel(), minlength=8)
        npt.assert_array_equal(hist.bins, expected)
        assert len(hist.bins) == 8  # one bin per overlap class 0..n
        assert sum(hist.bins) == 32 * 24
        assert hist.n_inputs == 7

    def test_empty_grid(self):
        hist = overlap_histogram(AccumulationGrid.empty(5, 4))
        assert hist.bins == [20]


class TestComposite:
    def test_pixel_formula(self, make_surface):
        surfaces = [make_surface((16, 16), seed=i) for i in range(5)]
        grid = accumulate(surfaces)
        image = composite_map(grid)
        counts = grid.counts
        covered = counts > 0
        # uncovered cells are fully transparent
        assert (image.pixels[~covered] == 0).all()
        # covered cells: blue with grey fading as agreement rises
        greys = np.floor(255.0 * (1.0 - counts[covered] / 5) + 0.5).astype(np.uint8)
        npt.assert_array_equal(image.pixels[covered][:, 0], greys)
        npt.assert_array_equal(image.pixels[covered][:, 1], greys)
        assert (image.pixels[covered][:, 2] == 255).all()
        assert (image.pixels[covered][:, 3] == 255).all()

    def test_full_agreement_is_saturated_blue(self, make_surface):
        cells = np.ones((4, 4), dtype=np.uint8)
        grid = accumulate([make_surface(cells, id="a"), make_surface(cells, id="b")])
        image = composite_map(grid)
        npt.assert_array_equal(image.pixels[0, 0], [0, 0, 255, 255])

    def test_basemap_shows_through_uncovered_cells(self, make_surface):
        cells = np.zeros((2, 2), dtype=np.uint8)
        cells[0, 0] = 1
        grid = accumulate([make_surface(cells)])
        base = CompositeImage(
            width=2, height=2, pixels=np.full((2, 2, 4), 7, dtype=np.uint8)
        )
        merged = composite_map(grid, basemap=base)
        npt.assert_array_equal(merged.pixels[0, 0], [0, 0, 255, 255])
        npt.assert_array_equal(merged.pixels[1, 1], [7, 7, 7, 7])

    def test_basemap_dimensions_must_match(self):
        grid = AccumulationGrid.empty(4, 4)
        base = CompositeImage(
            width=2, height=2, pixels=np.zeros((2, 2, 4), dtype=np.uint8)
        )
        with pytest.raises(AnalyticsError, match="basemap"):
            composite_map(grid, basemap=base)

    def test_png_bytes_round_trip(self, make_surface):
        from PIL import Image
        import io

        grid = accumulate([make_surface((8, 6), seed=1)])
        image = composite_map(grid)
        decoded = np.asarray(Image.open(io.BytesIO(image.png_bytes())))
        npt.assert_array_equal(decoded, image.pixels)


class TestJaccard:
    def test_hand_example(self, make_surface):
        a = np.zeros((1, 40), dtype=np.uint8)
        b = np.zeros((1, 40), dtype=np.uint8)
        a[0, :25] = 1
        b[0, 15:40] = 1  # intersection 10, union 40
        assert jaccard(make_surface(a), make_surface(b)) == 0.25

    def test_identical_and_disjoint(self, make_surface):
        a = make_surface((10, 10), seed=1)
        assert jaccard(a, a) == 1.0
        left = np.zeros((1, 4), dtype=np.uint8)
        right = np.zeros((1, 4), dtype=np.uint8)
        left[0, 0] = 1
        right[0, 3] = 1
        assert jaccard(make_surface(left), make_surface(right)) == 0.0

    def test_two_empty_surfaces_are_identical(self, make_surface):
        empty = np.zeros((3, 3), dtype=np.uint8)
        assert jaccard(make_surface(empty, id="a"), make_surface(empty, id="b")) == 1.0

    def test_size_mismatch(self, make_surface):
        with pytest.raises(AnalyticsError):
            jaccard(make_surface((3, 3), seed=0), make_surface((4, 3), seed=1))

    def test_matrix_is_symmetric_with_unit_diagonal(self, make_surface):
        surfaces = [make_surface((12, 12), seed=i) for i in range(6)]
        sim = similarity_matrix(surfaces)
        npt.assert_allclose(sim, sim.T)
        npt.assert_array_equal(np.diag(sim), np.ones(6))


def surfaces_with_similarity():
    """s1/s2 overlap at Jaccard 0.9; s3 is far from both."""
    base = np.zeros((8, 8), dtype=np.uint8)
    s1 = base.copy()
    s1.flat[0:10] = 1
    s2 = base.copy()
    s2.flat[0:9] = 1  # intersection 9, union 10
    s3 = base.copy()
    s3.flat[[0, 1, 2, 20, 21, 22, 23, 24, 25, 26]] = 1
    return s1, s2, s3


class TestClustering:
    def test_merges_only_above_tau(self, make_surface):
        s1, s2, s3 = surfaces_with_similarity()
        surfaces = [
            make_surface(s1, id="s1"),
            make_surface(s2, id="s2"),
            make_surface(s3, id="s3"),
        ]
        assert cluster_surfaces(surfaces, tau=0.8) == [["s1", "s2"], ["s3"]]
        # at a looser threshold everything collapses into one cluster
        assert cluster_surfaces(surfaces, tau=0.01) == [["s1", "s2", "s3"]]

    def test_complete_linkage_uses_weakest_pair(self, make_surface):
        # chain a-b-c with sim(a,b) = sim(b,c) = 0.9 but sim(a,c) small:
        # complete linkage refuses the second merge at tau 0.8
        base = np.zeros((10, 10), dtype=np.uint8)
        a = base.copy()
        a.flat[0:10] = 1
        b = base.copy()
        b.flat[1:11] = 1  # vs a: 9/11 = 0.818
        c = base.copy()
        c.flat[2:12] = 1  # vs b: 0.818, vs a: 8/12 = 0.667
        surfaces = [make_surface(x, id=n) for x, n in ((a, "a"), (b, "b"), (c, "c"))]
        clusters = cluster_surfaces(surfaces, tau=0.8)
        assert ["c"] in clusters or ["a"] in clusters
        assert len(clusters) == 2

    def test_input_order_does_not_matter(self, make_surface):
        s1, s2, s3 = surfaces_with_similarity()
        surfaces = [
            make_surface(s1, id="s1"),
            make_surface(s2, id="s2"),
            make_surface(s3, id="s3"),
        ]
        expected = cluster_surfaces(surfaces, tau=0.8)
        assert cluster_surfaces(surfaces[::-1], tau=0.8) == expected

    def test_tau_validation(self, make_surface):
        surfaces = [make_surface((4, 4), seed=0)]
        with pytest.raises(AnalyticsError, match="tau"):
            cluster_surfaces(surfaces, tau=0.0)
        with pytest.raises(AnalyticsError, match="tau"):
            cluster_surfaces(surfaces, tau=1.5)

    def test_single_surface(self, make_surface):
        assert cluster_surfaces([make_surface((4, 4), seed=0, id="only")]) == [["only"]]


class TestOutliers:
    def test_scores_are_one_minus_mean_similarity(self, make_surface):
        s1, s2, s3 = surfaces_with_similarity()
        surfaces = [
            make_surface(s1, id="s1"),
            make_surface(s2, id="s2"),
            make_surface(s3, id="s3"),
        ]
        sim = similarity_matrix(surfaces)
        scores = outlier_scores(surfaces)
        assert scores["s1"] == pytest.approx(1 - (sim[0, 1] + sim[0, 2]) / 2)
        assert scores["s3"] == pytest.approx(1 - (sim[2, 0] + sim[2, 1]) / 2)
        assert scores["s3"] == max(scores.values())  # the odd one out

    def test_requires_two_surfaces(self, make_surface):
        with pytest.raises(AnalyticsError, match="at least two"):
            outlier_scores([make_surface((4, 4), seed=0)])


class TestBackendParity:
    def test_backends_agree(self):
        backends = available_backends()
        if len(backends) < 2:
            pytest.skip("only one backend built")
        rng = np.random.default_rng(11)
        cells = (rng.random(4096) < 0.4).astype(np.uint8)
        other = (rng.random(4096) < 0.4).astype(np.uint8)

        results = {}
        for name, module in backends.items():
            counts = np.zeros(4096, dtype=np.uint32)
            module.accumulate_into(counts, cells)
            module.accumulate_into(counts, other)
            out = np.zeros((4096, 4), dtype=np.uint8)
            module.composite_fill(counts, 2, out)
            results[name] = (
                counts,
                np.asarray(module.overlap_counts(counts, 2)),
                module.pair_counts(cells, other),
                out,
            )
        names = list(results)
        for a, b in zip(results[names[0]], results[names[1]]):
            npt.assert_array_equal(a, b)
