"""
Binary raster primitives shared by every descriptor: connected components,
Moore boundary tracing, convex hulls, disc morphology and second order moments.

Coordinates are ``(x, y)`` pixel centers with ``y`` growing downwards. A polygon
or contour is called counter-clockwise when its shoelace sum over ``(x, y)`` is
positive, which is the orientation ``scipy.spatial.ConvexHull`` returns.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike
from scipy import ndimage
from scipy.spatial import ConvexHull
from skimage.morphology import disk

try:
    from scipy.spatial import QhullError
except ImportError:  # scipy < 1.8
    from scipy.spatial.qhull import QhullError

__all__ = ['BinaryMask', 'BinaryRegion', 'Contour', 'MomentEllipse',
           'connected_components', 'trace_boundary', 'convex_hull', 'polygon_area',
           'second_central_moments', 'morphology', 'MORPHOLOGY_OPS']

logger = logging.getLogger(__name__)

# foreground is 8-connected, background (holes) 4-connected
_EIGHT = np.ones((3, 3), dtype=bool)

# Moore neighborhood, clockwise on screen starting west: (dx, dy)
_MOORE = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_MOORE_INDEX = {offset: i for i, offset in enumerate(_MOORE)}

MORPHOLOGY_OPS = ('dilate', 'erode', 'close', 'open', 'fill_holes')


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """
    A boolean raster. ``bits`` is stored row-major with shape ``(height, width)``.
    """
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 2 or bits.shape[0] == 0 or bits.shape[1] == 0:
            raise ValueError(f"a binary mask needs a non-empty 2d raster, got shape {bits.shape}")
        object.__setattr__(self, 'bits', bits.astype(bool, copy=False))

    @classmethod
    def from_gray(cls, image: ArrayLike, threshold: float = 127) -> BinaryMask:
        """
        Threshold a grayscale raster. Pixels strictly above ``threshold`` are foreground.
        """
        return cls(np.asarray(image) > threshold)

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def any(self) -> bool:
        return bool(self.bits.any())

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __repr__(self) -> str:
        return f"BinaryMask(width={self.width}, height={self.height}, foreground={self.count()})"


@dataclass(frozen=True, eq=False)
class BinaryRegion:
    """
    A connected set of foreground pixels together with the size of the raster it
    was taken from. Geometry is computed lazily and cached.
    """
    xs: np.ndarray
    ys: np.ndarray
    image_shape: tuple[int, int]

    def __post_init__(self) -> None:
        xs = np.asarray(self.xs, dtype=np.int64).ravel()
        ys = np.asarray(self.ys, dtype=np.int64).ravel()
        if xs.size == 0 or xs.size != ys.size:
            raise ValueError("a region needs at least one pixel")
        object.__setattr__(self, 'xs', xs)
        object.__setattr__(self, 'ys', ys)
        object.__setattr__(self, 'image_shape', tuple(int(s) for s in self.image_shape))

    @classmethod
    def from_mask(cls, mask: BinaryMask) -> BinaryRegion:
        """
        All foreground pixels of ``mask`` as one region. Connectivity is not checked;
        use :func:`connected_components` to split a mask.
        """
        ys, xs = np.nonzero(mask.bits)
        if xs.size == 0:
            raise ValueError("mask has no foreground")
        return cls(xs, ys, mask.shape)

    @property
    def pixels(self) -> np.ndarray:
        """(N, 2) array of ``(x, y)`` pixel coordinates."""
        return np.column_stack((self.xs, self.ys))

    @property
    def area(self) -> int:
        return int(self.xs.size)

    @cached_property
    def centroid(self) -> tuple[float, float]:
        return float(self.xs.mean()), float(self.ys.mean())

    @cached_property
    def bbox(self) -> tuple[int, int, int, int]:
        """Tight, inclusive ``(xmin, ymin, xmax, ymax)``."""
        return int(self.xs.min()), int(self.ys.min()), int(self.xs.max()), int(self.ys.max())

    @property
    def bbox_size(self) -> tuple[int, int]:
        xmin, ymin, xmax, ymax = self.bbox
        return xmax - xmin + 1, ymax - ymin + 1

    def local_bits(self, pad: int = 0) -> tuple[np.ndarray, tuple[int, int]]:
        """
        Rasterize the region into its bounding box.

        Parameters
        ----------
        pad, optional
            background margin added on every side, 0 by default.

        Returns
        -------
            the boolean crop and the ``(x, y)`` image coordinate of its top-left pixel.
        """
        xmin, ymin, _, _ = self.bbox
        w, h = self.bbox_size
        bits = np.zeros((h + 2 * pad, w + 2 * pad), dtype=bool)
        bits[self.ys - ymin + pad, self.xs - xmin + pad] = True
        return bits, (xmin - pad, ymin - pad)

    def to_mask(self) -> BinaryMask:
        """The region drawn into a raster of the original image size."""
        bits = np.zeros(self.image_shape, dtype=bool)
        bits[self.ys, self.xs] = True
        return BinaryMask(bits)

    @cached_property
    def contour(self) -> Contour:
        return trace_boundary(self)

    def __repr__(self) -> str:
        return f"BinaryRegion(area={self.area}, bbox={self.bbox})"


@dataclass(frozen=True, eq=False)
class Contour:
    """
    Closed boundary loop of ``(x, y)`` pixels. The first point is not repeated at the end.
    """
    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.int64).reshape(-1, 2)
        if points.shape[0] == 0:
            raise ValueError("a contour needs at least one point")
        object.__setattr__(self, 'points', points)

    def __len__(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class MomentEllipse:
    """
    Ellipse with the same normalized second central moments as a region.
    ``a`` and ``b`` are the semi-axes, ``c`` the focal half distance and
    ``theta`` the orientation of the major axis in radians, in ``(-pi/2, pi/2]``.
    """
    a: float
    b: float
    c: float
    theta: float

    @property
    def eccentricity(self) -> float:
        if self.a <= 0:
            return 0.0
        return min(1.0, self.c / self.a)


def connected_components(mask: BinaryMask) -> list[BinaryRegion]:
    """
    Split the foreground of ``mask`` into maximal 8-connected regions,
    sorted by area, largest first. Equal areas keep raster order.
    """
    labels, count = ndimage.label(mask.bits, structure=_EIGHT)
    if count == 0:
        return []
    regions = []
    for index, window in enumerate(ndimage.find_objects(labels), start=1):
        ys, xs = np.nonzero(labels[window] == index)
        regions.append(BinaryRegion(xs + window[1].start, ys + window[0].start, mask.shape))
    regions.sort(key=lambda r: r.area, reverse=True)
    return regions


def trace_boundary(region: BinaryRegion) -> Contour:
    """
    Moore-neighbor trace of the outer boundary of ``region``.

    The trace starts at the topmost, leftmost pixel, entering from the west, and
    runs counter-clockwise in ``(x, y)`` (clockwise as seen on screen). It stops
    with Jacob's criterion, re-entering the start pixel from the initial
    backtrack, or when the move out of the start pixel repeats the first one.
    """
    bits, (ox, oy) = region.local_bits(pad=1)
    start_y = int(np.argmax(bits.any(axis=1)))
    start_x = int(np.argmax(bits[start_y]))
    start = (start_x, start_y)
    start_backtrack = (start_x - 1, start_y)

    points = [start]
    p, b = start, start_backtrack
    first_move = None
    # every boundary pixel is entered at most once per incident background side
    max_steps = 4 * region.area + 8
    for _ in range(max_steps):
        direction = _MOORE_INDEX[(b[0] - p[0], b[1] - p[1])]
        previous = b
        nxt = None
        for k in range(1, 9):
            dx, dy = _MOORE[(direction + k) % 8]
            q = (p[0] + dx, p[1] + dy)
            if bits[q[1], q[0]]:
                nxt = q
                break
            previous = q
        if nxt is None:
            break  # isolated pixel
        if p == start:
            if first_move is None:
                first_move = nxt
            elif nxt == first_move:
                break
        p, b = nxt, previous
        if p == start and b == start_backtrack:
            break
        if p != start:
            points.append(p)
    else:
        logger.warning("boundary trace of region %r did not close after %d steps", region, max_steps)

    pts = np.asarray(points, dtype=np.int64)
    pts[:, 0] += ox
    pts[:, 1] += oy
    return Contour(pts)


def convex_hull(points: ArrayLike) -> np.ndarray:
    """
    Smallest convex polygon containing ``points``.

    Parameters
    ----------
    points
        (N, 2) array of ``(x, y)`` coordinates, N >= 1.

    Returns
    -------
        the hull vertices in counter-clockwise order. Collinear input yields the two
        extreme points and a single distinct point yields itself.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("convex hull of an empty point set")
    unique = np.unique(pts, axis=0)
    if unique.shape[0] < 3:
        return unique
    try:
        hull = ConvexHull(unique)
    except QhullError:
        # all points on one line: keep the extremes along the dominant direction
        direction = unique[-1] - unique[0]
        t = (unique - unique[0]) @ direction
        return unique[[int(np.argmin(t)), int(np.argmax(t))]]
    return unique[hull.vertices]


def polygon_area(polygon: ArrayLike) -> float:
    """
    Shoelace area of a polygon given by its ordered vertices. Counter-clockwise
    input gives a nonnegative value; fewer than three vertices give zero.
    """
    poly = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    if poly.shape[0] < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def second_central_moments(region: BinaryRegion) -> MomentEllipse:
    """
    Ellipse with the same normalized second central moments as ``region``.

    Every pixel is treated as a unit square, adding 1/12 to the x and y variances.
    The semi-axes are ``2 * sqrt(lambda)`` of the eigenvalues of the per-area
    moment matrix, which recovers the true semi-axes of a uniform ellipse.
    """
    x = region.xs.astype(np.float64)
    y = region.ys.astype(np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    mu20 = float(np.mean(dx * dx)) + 1.0 / 12.0
    mu02 = float(np.mean(dy * dy)) + 1.0 / 12.0
    mu11 = float(np.mean(dx * dy))

    common = math.sqrt(((mu20 - mu02) / 2.0) ** 2 + mu11 ** 2)
    mean = (mu20 + mu02) / 2.0
    lam_max = mean + common
    lam_min = max(mean - common, 0.0)
    a = 2.0 * math.sqrt(lam_max)
    b = 2.0 * math.sqrt(lam_min)
    c = math.sqrt(max(a * a - b * b, 0.0))
    theta = 0.5 * math.atan2(2.0 * mu11, mu20 - mu02)
    return MomentEllipse(a=a, b=b, c=c, theta=theta)


def morphology(mask: BinaryMask, op: str, se_radius: int = 1) -> BinaryMask:
    """
    Binary morphology with a disc structuring element.

    Parameters
    ----------
    mask
        the input raster.
    op
        one of ``dilate``, ``erode``, ``close``, ``open`` or ``fill_holes``.
    se_radius, optional
        radius of the disc in pixels, at least 1 for every operation but ``fill_holes``.

    Returns
    -------
        a new mask. Pixels outside the raster count as background for dilation and as
        foreground for erosion, so closing is extensive and idempotent.
    """
    if op not in MORPHOLOGY_OPS:
        raise ValueError(f"unknown morphology operation {op!r}, expected one of {MORPHOLOGY_OPS}")
    if op == 'fill_holes':
        return BinaryMask(ndimage.binary_fill_holes(mask.bits))
    if se_radius < 1:
        raise ValueError(f"structuring element radius must be >= 1, got {se_radius}")

    footprint = disk(int(se_radius)).astype(bool)

    def _dilate(bits: np.ndarray) -> np.ndarray:
        return ndimage.binary_dilation(bits, structure=footprint, border_value=0)

    def _erode(bits: np.ndarray) -> np.ndarray:
        return ndimage.binary_erosion(bits, structure=footprint, border_value=1)

    bits = mask.bits
    if op == 'dilate':
        out = _dilate(bits)
    elif op == 'erode':
        out = _erode(bits)
    elif op == 'close':
        out = _erode(_dilate(bits))
    else:
        out = _dilate(_erode(bits))
    return BinaryMask(out)

