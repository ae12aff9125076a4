"""
From an insert image to per-edge wear masks: insert location, center removal,
cutting edge cropping and rotation, wear segmentation.
"""
from __future__ import annotations

import logging
import typing as typ
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import pdist
from skimage.filters import sobel, threshold_otsu

from .config import PreprocessConfig
from .errors import InsertNotFoundError, MissingEdgesError
from .imgcore import BinaryMask, BinaryRegion, connected_components, convex_hull, morphology

__all__ = ['InsertGeometry', 'CuttingEdgeCrop', 'EdgeWear', 'DIAGONAL_RATIO',
           'locate_insert', 'remove_center', 'extract_cutting_edges', 'segment_wear_region',
           'classify_completeness', 'process_insert']

logger = logging.getLogger(__name__)

DIAGONAL_RATIO = 4.92

# quarter turns (counter-clockwise on screen) that bring each edge to the top of its crop
_QUARTER_TURNS = {'north': 0, 'east': 1, 'south': 2, 'west': 3}


@dataclass(frozen=True)
class InsertGeometry:
    """
    Position and size of an insert. ``center_radius_r`` is the radius of the
    central portion removed before cropping the edges.
    """
    centroid: tuple[float, float]
    major_diagonal_d: float
    center_radius_r: float

    @classmethod
    def from_diagonal(cls, centroid: tuple[float, float], major_diagonal_d: float,
                      ratio: float = DIAGONAL_RATIO) -> InsertGeometry:
        if major_diagonal_d <= 0:
            raise ValueError(f"the major diagonal must be positive, got {major_diagonal_d}")
        return cls(centroid=(float(centroid[0]), float(centroid[1])),
                   major_diagonal_d=float(major_diagonal_d),
                   center_radius_r=float(major_diagonal_d) / ratio)


@dataclass(frozen=True, eq=False)
class CuttingEdgeCrop:
    """
    One cutting edge, cropped and rotated so that the edge runs along the top of
    the crop.

    Attributes
    ----------
    image
        grayscale crop, zero outside ``valid``.
    valid
        the crop pixels that belong to this edge's sector of the insert.
    side
        position of the edge on the insert before rotation.
    rotation_applied
        counter-clockwise rotation in degrees, one of 0, 90, 180, 270.
    sector
        the sector pixels in the coordinates of the input image.
    """
    image: np.ndarray
    valid: np.ndarray
    side: str
    rotation_applied: int
    sector: typ.Optional[BinaryMask] = None

    @classmethod
    def from_image(cls, image: ArrayLike, side: str = 'north') -> CuttingEdgeCrop:
        """An already horizontal crop in which every pixel is valid."""
        image = np.asarray(image, dtype=np.float64)
        return cls(image=image, valid=np.ones(image.shape, dtype=bool), side=side, rotation_applied=0)


@dataclass(frozen=True, eq=False)
class EdgeWear:
    crop: CuttingEdgeCrop
    mask: BinaryMask
    completeness: str


def locate_insert(img: ArrayLike, threshold: float = 50,
                  ratio: float = DIAGONAL_RATIO) -> tuple[BinaryRegion, InsertGeometry]:
    """
    Find the insert as the largest bright region of ``img``.

    The major diagonal is the largest distance between two convex hull vertices,
    the center radius is the diagonal divided by ``ratio``.
    """
    mask = BinaryMask.from_gray(np.asarray(img), threshold)
    regions = connected_components(mask)
    if not regions:
        raise InsertNotFoundError()
    region = regions[0]
    hull = convex_hull(region.contour.points)
    diagonal = float(pdist(hull).max()) if hull.shape[0] > 1 else 1.0
    geometry = InsertGeometry.from_diagonal(region.centroid, diagonal, ratio)
    logger.debug("insert area %d, D=%.2f, R=%.2f", region.area, geometry.major_diagonal_d,
                 geometry.center_radius_r)
    return region, geometry


def remove_center(region: BinaryRegion, geom: InsertGeometry) -> BinaryMask:
    """
    The region without the open disc of radius R around the insert centroid.
    """
    cx, cy = geom.centroid
    outside = (region.xs - cx) ** 2 + (region.ys - cy) ** 2 >= geom.center_radius_r ** 2
    bits = np.zeros(region.image_shape, dtype=bool)
    bits[region.ys[outside], region.xs[outside]] = True
    return BinaryMask(bits)


def _sectors(shape: tuple[int, int], centroid: tuple[float, float]) -> dict[str, np.ndarray]:
    """
    Split the raster into four half-open quadrants along the two diagonals through
    ``centroid``. A quarter turn of the raster maps the quadrants onto each other.
    """
    ys, xs = np.indices(shape)
    u = xs - centroid[0]
    v = centroid[1] - ys
    return {
        'north': (v > u) & (v >= -u),
        'east': (v <= u) & (v > -u),
        'south': (v < u) & (v <= -u),
        'west': (v < -u) & (v >= u),
    }


def extract_cutting_edges(img: ArrayLike,
                          region: BinaryRegion,
                          geom: InsertGeometry,
                          edge_threshold: float = 0.1,
                          closing_radius: int = 2,
                          min_band_pixels: int = 20) -> list[CuttingEdgeCrop]:
    """
    Crop the four cutting edges of an insert.

    Borders are found on the Sobel gradient magnitude (pixels above
    ``edge_threshold`` times its maximum), closed with a disc of
    ``closing_radius``. The insert without its center is split into four
    quadrants along the diagonals; a quadrant holds a cutting edge when at least
    ``min_band_pixels`` border pixels fall into it. Every crop is rotated by the
    quarter turns that bring its edge to the top.

    Returns
    -------
        crops in the order north, east, south, west.
    """
    gray = np.asarray(img, dtype=np.float64)
    span = gray.max() - gray.min()
    gradient = sobel((gray - gray.min()) / span) if span > 0 else np.zeros_like(gray)
    peak = gradient.max()
    borders = BinaryMask(gradient > edge_threshold * peak) if peak > 0 else BinaryMask(np.zeros(gray.shape, bool))
    borders = morphology(borders, 'close', closing_radius)

    annulus = remove_center(region, geom)
    near_insert = morphology(annulus, 'dilate', closing_radius).bits

    crops = []
    missing = []
    for side, sector in _sectors(gray.shape, geom.centroid).items():
        band = borders.bits & sector & near_insert
        keep = annulus.bits & sector
        if np.count_nonzero(band) < min_band_pixels or not keep.any():
            missing.append(side)
            continue
        rows = np.flatnonzero(keep.any(axis=1))
        cols = np.flatnonzero(keep.any(axis=0))
        window = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
        valid = keep[window]
        image = np.where(valid, gray[window], 0.0)
        turns = _QUARTER_TURNS[side]
        crops.append(CuttingEdgeCrop(image=np.rot90(image, turns).copy(),
                                     valid=np.rot90(valid, turns).copy(),
                                     side=side,
                                     rotation_applied=90 * turns,
                                     sector=BinaryMask(keep)))
    if missing:
        raise MissingEdgesError(missing)
    return crops


def segment_wear_region(crop: CuttingEdgeCrop,
                        band_fraction: float = 0.35,
                        closing_radius: int = 2,
                        min_contrast: float = 20.0) -> BinaryMask:
    """
    Segment the wear region of a horizontal edge crop.

    Otsu's threshold is computed on the valid pixels of the top ``band_fraction``
    of the crop, where the edge line lies. Brighter pixels of that band are
    closed, hole-filled and reduced to the largest region. A band whose gray
    levels span less than ``min_contrast`` yields an empty mask.
    """
    image = np.asarray(crop.image, dtype=np.float64)
    empty = BinaryMask(np.zeros(image.shape, dtype=bool))
    band = np.zeros(image.shape, dtype=bool)
    band[:max(1, int(round(band_fraction * image.shape[0])))] = True
    band &= crop.valid
    values = image[band]
    if values.size < 2 or values.max() - values.min() < min_contrast:
        return empty

    threshold = threshold_otsu(values)
    wear = BinaryMask(band & (image > threshold))
    wear = morphology(wear, 'close', closing_radius)
    wear = morphology(wear, 'fill_holes')
    regions = connected_components(wear)
    if not regions:
        return empty
    return regions[0].to_mask()


def classify_completeness(mask: BinaryMask) -> str:
    """
    ``complete`` when the wear runs along the horizontal edge (bounding box at
    least as wide as tall), ``incomplete`` for a vertical remnant of an adjacent
    edge. Empty masks count as complete.
    """
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    if rows.size == 0:
        return 'complete'
    width = cols[-1] - cols[0] + 1
    height = rows[-1] - rows[0] + 1
    return 'complete' if width >= height else 'incomplete'


def process_insert(img: ArrayLike, config: typ.Optional[PreprocessConfig] = None) -> list[EdgeWear]:
    """
    Run the whole preprocessing chain on one insert image.

    Parameters
    ----------
    img
        grayscale insert image.
    config, optional
        a :class:`~wearclass.config.PreprocessConfig`, defaults if None.
    """
    config = PreprocessConfig() if config is None else config
    region, geometry = locate_insert(img, config.insert_threshold, config.diagonal_ratio)
    crops = extract_cutting_edges(img, region, geometry,
                                  edge_threshold=config.edge_threshold,
                                  closing_radius=config.edge_closing_radius,
                                  min_band_pixels=config.min_band_pixels)
    result = []
    for crop in crops:
        mask = segment_wear_region(crop,
                                   band_fraction=config.band_fraction,
                                   closing_radius=config.wear_closing_radius,
                                   min_contrast=config.min_contrast)
        result.append(EdgeWear(crop=crop, mask=mask, completeness=classify_completeness(mask)))
    return result
