import numpy as np
import pytest
from skimage.draw import polygon

from conftest import insert_image
from wearclass.config import PreprocessConfig
from wearclass.errors import InsertNotFoundError, MissingEdgesError
from wearclass.imgcore import BinaryMask, BinaryRegion
from wearclass.preprocess import (DIAGONAL_RATIO, CuttingEdgeCrop, InsertGeometry, classify_completeness,
                                  extract_cutting_edges, locate_insert, process_insert, remove_center,
                                  segment_wear_region)


def _rhombus_insert(major=492, minor=300, margin=10):
    """
    Bright rhombus with a horizontal major diagonal on a dark background.
    """
    height, width = minor + 2 * margin + 1, major + 2 * margin + 1
    rows = [margin, margin + minor // 2, margin + minor, margin + minor // 2]
    cols = [margin + major // 2, margin + major, margin + major // 2, margin]
    image = np.full((height, width), 10, dtype=np.uint8)
    rr, cc = polygon(rows, cols, shape=image.shape)
    image[rr, cc] = 200
    return image


class TestInsertGeometry:
    def test_radius_from_diagonal(self):
        geometry = InsertGeometry.from_diagonal((10.0, 20.0), 492.0)
        assert geometry.center_radius_r == pytest.approx(100.0)
        assert DIAGONAL_RATIO == pytest.approx(4.92)

    def test_rejects_nonpositive_diagonal(self):
        with pytest.raises(ValueError):
            InsertGeometry.from_diagonal((0.0, 0.0), 0.0)


class TestLocateInsert:
    def test_square_insert(self, insert_gray):
        region, geometry = locate_insert(insert_gray)
        assert region.area == 120 * 120
        assert geometry.centroid == pytest.approx((99.5, 99.5))
        assert geometry.major_diagonal_d == pytest.approx(119.0 * np.sqrt(2.0))
        assert geometry.center_radius_r == pytest.approx(119.0 * np.sqrt(2.0) / 4.92)

    def test_rhombus_diagonal(self, rhombus_mask):
        image = rhombus_mask.bits.astype(np.uint8) * 200
        _, geometry = locate_insert(image)
        assert geometry.major_diagonal_d == pytest.approx(80.0, abs=2.0)

    def test_wide_rhombus(self):
        image = _rhombus_insert()
        _, geometry = locate_insert(image)
        assert geometry.major_diagonal_d == pytest.approx(492.0, abs=2.0)
        assert geometry.center_radius_r == pytest.approx(100.0, abs=0.5)
        assert geometry.center_radius_r == pytest.approx(geometry.major_diagonal_d / DIAGONAL_RATIO)
        _, turned = locate_insert(np.rot90(image))
        assert turned.major_diagonal_d == pytest.approx(geometry.major_diagonal_d, abs=1.0)

    def test_dark_image(self):
        with pytest.raises(InsertNotFoundError):
            locate_insert(np.zeros((32, 32), dtype=np.uint8))


def test_remove_center_keeps_the_circle():
    bits = np.ones((21, 21), dtype=bool)
    region = BinaryRegion.from_mask(BinaryMask(bits))
    geometry = InsertGeometry(centroid=(10.0, 10.0), major_diagonal_d=20.0, center_radius_r=5.0)
    ring = remove_center(region, geometry).bits
    assert not ring[10, 10]
    assert not ring[10, 14]
    assert ring[10, 15] and ring[15, 10]
    assert ring[0, 0]


class TestCuttingEdges:
    def test_four_crops_in_order(self, insert_gray):
        region, geometry = locate_insert(insert_gray)
        crops = extract_cutting_edges(insert_gray, region, geometry)
        assert [c.side for c in crops] == ['north', 'east', 'south', 'west']
        assert [c.rotation_applied for c in crops] == [0, 90, 180, 270]

    def test_crops_are_rotations_of_each_other(self, insert_gray):
        region, geometry = locate_insert(insert_gray)
        crops = extract_cutting_edges(insert_gray, region, geometry)
        for crop in crops[1:]:
            assert crop.image.shape == crops[0].image.shape
            np.testing.assert_array_equal(crop.valid, crops[0].valid)

    def test_edge_runs_along_the_top(self, insert_gray):
        region, geometry = locate_insert(insert_gray)
        crops = extract_cutting_edges(insert_gray, region, geometry)
        for crop in crops:
            top = crop.image[0][crop.valid[0]]
            assert top.size > 100
            assert np.count_nonzero(top == 255) == 60

    def test_rhombus_edges_come_out_horizontal(self):
        image = _rhombus_insert()
        region, geometry = locate_insert(image)
        crops = extract_cutting_edges(image, region, geometry)
        assert [c.side for c in crops] == ['north', 'east', 'south', 'west']
        for crop in crops:
            height, width = crop.image.shape
            assert width > height

    def test_missing_edges(self):
        image = np.zeros((200, 200), dtype=np.uint8)
        image[40:160, 40:160] = 200
        region, geometry = locate_insert(image)
        with pytest.raises(MissingEdgesError) as info:
            extract_cutting_edges(image, region, geometry, min_band_pixels=10 ** 6)
        assert set(info.value.missing) == {'north', 'south', 'east', 'west'}


class TestWearSegmentation:
    def test_band_is_segmented(self):
        image = np.full((40, 100), 120.0)
        image[0:6, 20:80] = 230.0
        mask = segment_wear_region(CuttingEdgeCrop.from_image(image))
        assert mask.count() == 6 * 60
        assert mask.bits[0:6, 20:80].all()

    def test_flat_crop_is_empty(self):
        mask = segment_wear_region(CuttingEdgeCrop.from_image(np.full((30, 60), 150.0)))
        assert not mask.any()

    def test_only_the_top_band_is_searched(self):
        image = np.full((40, 100), 120.0)
        image[30:38, 10:90] = 240.0
        assert not segment_wear_region(CuttingEdgeCrop.from_image(image)).any()


class TestCompleteness:
    def test_wide_is_complete(self, rectangle_mask):
        assert classify_completeness(rectangle_mask) == 'complete'

    def test_tall_is_incomplete(self, rectangle_mask):
        assert classify_completeness(BinaryMask(np.rot90(rectangle_mask.bits))) == 'incomplete'

    def test_empty_is_complete(self):
        assert classify_completeness(BinaryMask(np.zeros((5, 5), dtype=bool))) == 'complete'


def test_process_insert(insert_gray):
    edges = process_insert(insert_gray)
    assert [e.crop.side for e in edges] == ['north', 'east', 'south', 'west']
    for edge in edges:
        assert edge.completeness == 'complete'
        assert edge.mask.shape == edge.crop.image.shape
        assert 300 <= edge.mask.count() <= 420


def test_process_insert_with_config():
    image = insert_image(wear=(6, 60), wear_level=215)
    assert all(not e.mask.any() for e in process_insert(image, PreprocessConfig(min_contrast=50.0)))
    assert all(e.mask.any() for e in process_insert(image, PreprocessConfig(min_contrast=10.0)))
