import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vesselaug import elastic
from vesselaug.raster import BinaryMask, ImagePlane, Sample
from vesselaug.rng import SeedSpec, derive_stream

from conftest import checkerboard_sample


class TestElasticDeform:
    def test_alpha_zero_identity(self, small_sample):
        out = elastic.elastic_deform(small_sample, elastic.ElasticParams(0.0, 4.0),
                                     derive_stream(SeedSpec(1, "e")))
        assert np.array_equal(out.image.data, small_sample.image.data)
        assert np.array_equal(out.vessels.data, small_sample.vessels.data)

    def test_constant_image_unchanged(self):
        const = Sample(image=ImagePlane(np.full((30, 30), 0.42)),
                       vessels=BinaryMask(np.zeros((30, 30), dtype=np.uint8)), id="c")
        out = elastic.elastic_deform(const, elastic.ElasticParams(25.0, 3.0),
                                     derive_stream(SeedSpec(2, "e")))
        assert np.abs(out.image.data - 0.42).max() < 1e-12

    def test_displacement_scales_linearly_in_alpha(self):
        d10 = elastic.elastic_displacement(64, 64, 10.0, 4.0, derive_stream(SeedSpec(3, "e")))
        d20 = elastic.elastic_displacement(64, 64, 20.0, 4.0, derive_stream(SeedSpec(3, "e")))
        ratio = np.abs(d20[0]).mean() / np.abs(d10[0]).mean()
        assert abs(ratio - 2.0) <= 0.05

    def test_determinism(self, small_sample):
        params = elastic.ElasticParams(15.0, 3.0)
        a = elastic.elastic_deform(small_sample, params, derive_stream(SeedSpec(4, "e")))
        b = elastic.elastic_deform(small_sample, params, derive_stream(SeedSpec(4, "e")))
        assert np.array_equal(a.image.data, b.image.data)
        assert np.array_equal(a.vessels.data, b.vessels.data)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            elastic.ElasticParams(-1.0, 2.0)
        with pytest.raises(ValueError):
            elastic.ElasticParams(10.0, 0.0)


class TestGridDistort:
    def test_unit_factors_identity_within_tolerance(self, small_sample):
        out = elastic.grid_distort(small_sample, elastic.GridDistortParams(cells=4, limit=0.0),
                                   derive_stream(SeedSpec(5, "g")))
        assert np.abs(out.image.data - small_sample.image.data).max() <= 1e-6
        assert np.array_equal(out.vessels.data, small_sample.vessels.data)

    def test_boundary_example_by_hand(self):
        # 2 cells over extent 100, factors (1.2, 0.8): widths 60/40 already
        # sum to the extent, so the midpoint boundary maps 50 -> 60
        bounds = elastic.grid_axis_positions(100.0, np.array([1.2, 0.8]))
        assert bounds[0] == 0.0
        assert bounds[1] == pytest.approx(60.0, abs=1e-12)
        assert bounds[2] == 100.0

    def test_renormalization_preserves_extent_and_ratio(self):
        bounds = elastic.grid_axis_positions(100.0, np.array([1.2, 1.2]))
        assert bounds[-1] == 100.0
        assert bounds[1] == pytest.approx(50.0, abs=1e-12)

    @given(st.integers(min_value=0, max_value=2**31 - 1),
           st.integers(min_value=2, max_value=9))
    @settings(max_examples=25)
    def test_axis_map_is_strictly_monotone(self, seed, cells):
        rng = np.random.default_rng(seed)
        factors = rng.uniform(0.5, 1.5, cells)
        cmap = elastic.grid_map(24, 35, factors, factors[::-1])
        xs = cmap[0, :, 0]
        ys = cmap[:, 0, 1]
        assert (np.diff(xs) > 0).all()
        assert (np.diff(ys) > 0).all()
        assert xs[0] == 0.0 and xs[-1] == pytest.approx(34.0, abs=1e-9)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            elastic.GridDistortParams(cells=1, limit=0.2)
        with pytest.raises(ValueError):
            elastic.GridDistortParams(cells=4, limit=0.6)


class TestOpticalDistort:
    def test_k_zero_identity_bit_exact(self, small_sample):
        out = elastic.optical_distort(small_sample, elastic.OpticalDistortParams(0.0))
        assert np.array_equal(out.image.data, small_sample.image.data)
        assert np.array_equal(out.vessels.data, small_sample.vessels.data)

    def test_center_pixel_fixed(self):
        for k in (-0.5, -0.2, 0.3, 0.5):
            cmap = elastic.optical_map(21, 31, k)
            assert cmap[10, 15, 0] == 15.0
            assert cmap[10, 15, 1] == 10.0

    def test_corner_radius_formula(self):
        # at the corner r = 1, so the source radius is 1 + k
        k = 0.5
        cmap = elastic.optical_map(20, 30, k)
        cx, cy = (30 - 1) / 2.0, (20 - 1) / 2.0
        corner = np.hypot(cmap[0, 0, 0] - cx, cmap[0, 0, 1] - cy)
        assert corner == pytest.approx(1.5 * np.hypot(cx, cy), rel=1e-12)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            elastic.OpticalDistortParams(0.6)


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=10)
def test_warp_family_preserves_mask_values_and_dims(seed):
    sample = checkerboard_sample(26, 22)
    stream = derive_stream(SeedSpec(seed, "prop"))
    outs = [
        elastic.elastic_deform(sample, elastic.ElasticParams(20.0, 3.0), stream),
        elastic.grid_distort(sample, elastic.GridDistortParams(4, 0.4), stream),
        elastic.optical_distort(sample, elastic.OpticalDistortParams(-0.4)),
    ]
    for out in outs:
        assert set(np.unique(out.vessels.data)) <= {0, 1}
        assert (out.height, out.width) == (sample.height, sample.width)
