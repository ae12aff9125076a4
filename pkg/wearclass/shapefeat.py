"""
ShapeFeat: ten scalar shape features of a binary wear region.
"""
from __future__ import annotations

import math
import typing as typ
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError, EmptyShapeError
from .imgcore import BinaryMask, BinaryRegion, connected_components, convex_hull, polygon_area, \
    second_central_moments, trace_boundary

__all__ = ['ShapeFeatVector', 'shapefeat', 'shapefeat_names', 'shapefeat_from_mask', 'lattice_hull_area']


@dataclass(frozen=True)
class ShapeFeatVector:
    """
    The ShapeFeat descriptor. Field order is the serialization order.

    Lengths are in pixels, areas in pixel counts, the remaining features are
    dimensionless.
    """
    convex_area: float
    eccentricity: float
    perimeter: float
    equivalent_diameter: float
    extent: float
    filled_area: float
    minor_axis_length: float
    major_axis_length: float
    r: float
    solidity: float

    def as_array(self) -> np.ndarray:
        return np.asarray(astuple(self), dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(shapefeat_names(), astuple(self)))


_NAMES = tuple(f.name for f in fields(ShapeFeatVector))


def shapefeat_names() -> list[str]:
    """
    Canonical feature order used in every table and in feature ranking.
    """
    return list(_NAMES)


def lattice_hull_area(points: np.ndarray) -> float:
    """
    Number of pixel centers inside or on the convex hull of ``points``.

    The hull of integer pixel centers is a lattice polygon, so Pick's theorem
    gives the count exactly: shoelace area plus half the lattice points on the
    hull boundary plus one.
    """
    hull = convex_hull(points).astype(np.int64)
    area = abs(polygon_area(hull)) if hull.shape[0] >= 3 else 0.0
    if hull.shape[0] == 1:
        boundary = 0
    else:
        steps = np.abs(np.roll(hull, -1, axis=0) - hull)
        boundary = int(np.gcd(steps[:, 0], steps[:, 1]).sum())
    return area + boundary / 2.0 + 1.0


def shapefeat(region: BinaryRegion, mask: typ.Optional[BinaryMask] = None) -> ShapeFeatVector:
    """
    Compute the ShapeFeat descriptor of a region.

    Parameters
    ----------
    region
        the wear region.
    mask, optional
        the raster the region was extracted from. Only used to check that the region
        belongs to it.

    Returns
    -------
        the ten features, unscaled.
    """
    if mask is not None and tuple(mask.shape) != tuple(region.image_shape):
        raise DimensionMismatchError(
            f"region was taken from a {region.image_shape} raster, got a {mask.shape} mask")

    area = float(region.area)
    contour = trace_boundary(region)
    ellipse = second_central_moments(region)

    local, _ = region.local_bits(pad=1)
    filled_area = float(np.count_nonzero(ndimage.binary_fill_holes(local)))
    convex_area = max(lattice_hull_area(contour.points), filled_area)

    width, height = region.bbox_size
    major = 2.0 * ellipse.a
    minor = 2.0 * ellipse.b

    return ShapeFeatVector(
        convex_area=convex_area,
        eccentricity=ellipse.eccentricity,
        perimeter=float(len(contour)),
        equivalent_diameter=math.sqrt(4.0 * area / math.pi),
        extent=area / float(width * height),
        filled_area=filled_area,
        minor_axis_length=minor,
        major_axis_length=major,
        r=minor / major if major > 0 else 1.0,
        solidity=area / convex_area,
    )


def shapefeat_from_mask(mask: BinaryMask) -> ShapeFeatVector:
    """
    ShapeFeat of the largest 8-connected region of ``mask``.
    """
    regions = connected_components(mask)
    if not regions:
        raise EmptyShapeError()
    return shapefeat(regions[0], mask)
