import math

import numpy as np
import pytest

from conftest import ellipse_bits
from wearclass.errors import DimensionMismatchError, EmptyShapeError
from wearclass.imgcore import BinaryMask, BinaryRegion
from wearclass.shapefeat import lattice_hull_area, shapefeat, shapefeat_from_mask, shapefeat_names


def test_names_in_serialization_order():
    assert shapefeat_names() == ['convex_area', 'eccentricity', 'perimeter', 'equivalent_diameter', 'extent',
                                 'filled_area', 'minor_axis_length', 'major_axis_length', 'r', 'solidity']


def test_lattice_hull_area_counts_pixel_centers():
    points = np.array([(x, y) for x in range(4) for y in range(4)])
    assert lattice_hull_area(points) == pytest.approx(16.0)
    assert lattice_hull_area(np.array([[3, 3]])) == pytest.approx(1.0)
    assert lattice_hull_area(np.array([[0, 0], [5, 0]])) == pytest.approx(6.0)


class TestRectangle:
    @pytest.fixture
    def features(self, rectangle_mask):
        return shapefeat_from_mask(rectangle_mask)

    def test_areas(self, features):
        assert features.filled_area == 400
        assert features.convex_area == pytest.approx(400.0)
        assert features.solidity == pytest.approx(1.0)
        assert features.extent == pytest.approx(1.0)

    def test_perimeter(self, features):
        assert features.perimeter == 96

    def test_axes(self, features):
        assert features.major_axis_length == pytest.approx(4.0 * math.sqrt(1600.0 / 12.0))
        assert features.minor_axis_length == pytest.approx(4.0 * math.sqrt(100.0 / 12.0))
        assert features.r == pytest.approx(0.25)
        assert features.eccentricity == pytest.approx(math.sqrt(1.0 - 1.0 / 16.0))

    def test_equivalent_diameter(self, features):
        assert features.equivalent_diameter == pytest.approx(math.sqrt(1600.0 / math.pi))


class TestEllipses:
    @pytest.mark.parametrize('radii, eccentricity, r', [
        ((25, 50), math.sqrt(0.75), 0.5),
        ((40, 40), 0.0, 1.0),
        ((15, 60), math.sqrt(1.0 - 1.0 / 16.0), 0.25),
    ])
    def test_axis_features_follow_the_semi_axes(self, radii, eccentricity, r):
        features = shapefeat_from_mask(BinaryMask(ellipse_bits(shape=(140, 140), center=(70, 70), radii=radii)))
        assert features.eccentricity == pytest.approx(eccentricity, abs=0.02)
        assert features.r == pytest.approx(r, abs=0.02)
        assert features.equivalent_diameter == pytest.approx(math.sqrt(4.0 * features.filled_area / math.pi))


class TestInvariances:
    def test_translation(self, ellipse_mask):
        shifted = BinaryMask(np.roll(ellipse_mask.bits, (5, -7), axis=(0, 1)))
        np.testing.assert_allclose(shapefeat_from_mask(shifted).as_array(),
                                   shapefeat_from_mask(ellipse_mask).as_array(), rtol=1e-12)

    def test_quarter_turn(self, ellipse_mask):
        a = shapefeat_from_mask(ellipse_mask).as_dict()
        b = shapefeat_from_mask(BinaryMask(np.rot90(ellipse_mask.bits))).as_dict()
        for name in ('convex_area', 'filled_area', 'extent', 'major_axis_length', 'minor_axis_length',
                     'eccentricity', 'r', 'solidity', 'equivalent_diameter'):
            assert b[name] == pytest.approx(a[name], rel=1e-9), name


class TestRanges:
    def test_unit_interval_features(self, ellipse_mask, disc_mask, rhombus_mask):
        for mask in (ellipse_mask, disc_mask, rhombus_mask):
            f = shapefeat_from_mask(mask)
            assert 0.0 <= f.eccentricity <= 1.0
            assert 0.0 < f.extent <= 1.0
            assert 0.0 < f.solidity <= 1.0
            assert 0.0 < f.r <= 1.0
            assert f.convex_area >= f.filled_area

    def test_hole_counts_in_filled_area_only(self):
        bits = np.zeros((30, 30), dtype=bool)
        bits[5:25, 5:25] = True
        bits[12:18, 12:18] = False
        f = shapefeat_from_mask(BinaryMask(bits))
        assert f.filled_area == 400
        assert f.solidity == pytest.approx(364.0 / 400.0)

    def test_single_pixel(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits[2, 2] = True
        f = shapefeat_from_mask(BinaryMask(bits))
        assert f.filled_area == 1
        assert f.solidity == pytest.approx(1.0)
        assert f.r == pytest.approx(1.0)


def test_largest_region_wins(rectangle_mask):
    bits = rectangle_mask.bits.copy()
    bits[30:33, 50:53] = True
    assert shapefeat_from_mask(BinaryMask(bits)).filled_area == 400


def test_empty_mask_raises():
    with pytest.raises(EmptyShapeError):
        shapefeat_from_mask(BinaryMask(np.zeros((8, 8), dtype=bool)))


def test_region_from_other_raster(rectangle_mask):
    region = BinaryRegion.from_mask(rectangle_mask)
    with pytest.raises(DimensionMismatchError):
        shapefeat(region, BinaryMask(np.zeros((10, 10), dtype=bool)))
