"""
B-ORCHIZ contour descriptor: Zernike magnitudes of the size-normalized shape as
the global part, a boundary orientation histogram and an orientation
co-occurrence matrix as the local part.

The two local blocks are reconstructions. The traced boundary is resampled at
equal arc-length steps and lightly smoothed, so both blocks see the same number
of points whatever the raster resolution. The orientation chain is a histogram
of chord directions along the contour, cyclically shifted so that the modal
direction comes first. The co-occurrence matrix counts pairs of relative turns
(incoming, outgoing) at a fixed contour offset. Every direction or turn vote is
split linearly between its two nearest bins. Both blocks only use direction
differences or a modal shift, which makes them rotation invariant.
"""
from __future__ import annotations

import math
import typing as typ
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage
from skimage.transform import resize

from .errors import EmptyShapeError
from .imgcore import BinaryMask, Contour, connected_components, trace_boundary

__all__ = ['NormalizedShape', 'ZernikeIndex', 'BorchizVector', 'normalize_shape', 'zernike_indices',
           'zernike_magnitudes', 'boundary_orientation_chain', 'gradient_cooccurrence', 'borchiz',
           'borchiz_names']

NORMALIZED_SIZE = 128
CONTOUR_SAMPLES = 160
CONTOUR_SMOOTHING = 3.0
MIN_ROW_SHARE = 0.01

# sub-samples per pixel side for the Zernike integrals, per contour sample for the local blocks
_SUBSAMPLES = 8


@dataclass(frozen=True, eq=False)
class NormalizedShape:
    """
    A shape cropped to its bounding box and resized to a square frame, with
    graded values in [0, 255].
    """
    image: np.ndarray

    def __post_init__(self) -> None:
        image = np.asarray(self.image, dtype=np.float64)
        if image.ndim != 2 or image.shape[0] != image.shape[1]:
            raise ValueError(f"normalized shapes are square rasters, got {image.shape}")
        object.__setattr__(self, 'image', np.clip(image, 0.0, 255.0))

    @property
    def size(self) -> int:
        return int(self.image.shape[0])

    def to_mask(self) -> BinaryMask:
        return BinaryMask(self.image >= 127.5)


class ZernikeIndex(typ.NamedTuple):
    n: int
    m: int


@dataclass(frozen=True, eq=False)
class BorchizVector:
    """
    Raw B-ORCHIZ blocks. :meth:`as_array` gives the serialized descriptor, the
    concatenation of the blocks after scaling each to unit L2 norm.
    """
    zernike_mags: np.ndarray
    boc_hist: np.ndarray
    iegcm: np.ndarray

    @property
    def iegcm_flat(self) -> np.ndarray:
        return self.iegcm.ravel()

    def __len__(self) -> int:
        return self.zernike_mags.size + self.boc_hist.size + self.iegcm.size

    def as_array(self) -> np.ndarray:
        blocks = [self.zernike_mags, self.boc_hist, self.iegcm_flat]
        return np.concatenate([_unit(np.asarray(b, dtype=np.float64)) for b in blocks])


def _unit(block: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(block))
    return block / norm if norm > 0 else block


def normalize_shape(mask: BinaryMask, size: int = NORMALIZED_SIZE) -> NormalizedShape:
    """
    Crop ``mask`` to the bounding box of its foreground and resize the crop to
    ``size`` x ``size`` with bilinear interpolation of the 0/255 raster.
    """
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    if rows.size == 0:
        raise EmptyShapeError()
    crop = mask.bits[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1].astype(np.float64) * 255.0
    resized = resize(crop, (size, size), order=1, mode='edge', anti_aliasing=False,
                     preserve_range=True)
    return NormalizedShape(resized)


def zernike_indices(max_order: int = 10) -> list[ZernikeIndex]:
    """
    All ``(n, m)`` with ``0 <= m <= n <= max_order`` and ``n - m`` even, in
    lexicographic order. Order 10 gives 36 pairs.
    """
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    return [ZernikeIndex(n, m) for n in range(max_order + 1) for m in range(n % 2, n + 1, 2)]


def _radial_polynomials(rho: np.ndarray, max_order: int) -> dict[tuple[int, int], np.ndarray]:
    """
    Zernike radial polynomials by the q-recursive method.
    """
    rho2 = rho * rho
    inv_rho2 = np.divide(1.0, rho2, out=np.zeros_like(rho2), where=rho2 > 0)
    radial = {}
    for n in range(max_order + 1):
        radial[n, n] = rho ** n
        if n >= 2:
            radial[n, n - 2] = n * rho ** n - (n - 1) * rho ** (n - 2)
        for m in range(n, 3, -2):
            h3 = -4.0 * (m - 2) * (m - 3) / ((n + m - 2) * (n - m + 4))
            h2 = h3 * (n + m) * (n - m + 2) / (4.0 * (m - 1)) + (m - 2)
            h1 = m * (m - 1) / 2.0 - m * h2 + h3 * (n + m + 2) * (n - m) / 8.0
            radial[n, m - 4] = h1 * radial[n, m] + (h2 + h3 * inv_rho2) * radial[n, m - 2]
    return radial


@lru_cache(maxsize=8)
def _zernike_basis(size: int, max_order: int) -> np.ndarray:
    """
    Conjugated, weighted Zernike basis over a ``size`` x ``size`` frame, shape
    ``(n_moments, size * size)``. Built once and shared read-only.

    Each pixel entry integrates ``V*_nm`` over the part of the pixel inside the
    inscribed unit disc, on a regular sub-grid of ``_SUBSAMPLES`` x ``_SUBSAMPLES``
    points. The sub-grid is symmetric in the frame, so 90 degree rotations stay
    exact, and its area weight is pi / (sub-samples inside the disc).
    """
    fine = size * _SUBSAMPLES
    coords = (2.0 * np.arange(fine) + 1.0 - fine) / fine
    indices = zernike_indices(max_order)
    basis = np.zeros((len(indices), size, size), dtype=np.complex128)
    inside_count = 0
    for row in range(size):
        x, y = np.meshgrid(coords, coords[row * _SUBSAMPLES:(row + 1) * _SUBSAMPLES])
        rho = np.hypot(x, y)
        inside = rho <= 1.0
        inside_count += np.count_nonzero(inside)
        # unit phase as a complex number keeps 90 degree rotations exact
        phase = np.divide(x + 1j * y, rho, out=np.ones_like(rho, dtype=np.complex128), where=rho > 0)
        radial = _radial_polynomials(rho, max_order)
        for k, (n, m) in enumerate(indices):
            v_conj = np.where(inside, radial[n, m] * np.conj(phase) ** m, 0.0)
            cells = v_conj.reshape(_SUBSAMPLES, size, _SUBSAMPLES).sum(axis=(0, 2))
            basis[k, row] = cells * ((n + 1) / math.pi)
    basis *= math.pi / inside_count
    basis = basis.reshape(len(indices), size * size)
    basis.flags.writeable = False
    return basis


def zernike_magnitudes(img: typ.Union[NormalizedShape, np.ndarray], max_order: int = 10) -> np.ndarray:
    """
    Magnitudes ``|A_nm|`` of the Zernike moments of a square raster, in the order
    of :func:`zernike_indices`.
    """
    image = img.image if isinstance(img, NormalizedShape) else np.asarray(img, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ValueError(f"Zernike moments need a square raster, got {image.shape}")
    basis = _zernike_basis(int(image.shape[0]), int(max_order))
    return np.abs(basis @ image.ravel())


def _resample_closed(points: np.ndarray, samples: int) -> np.ndarray:
    """
    ``samples`` points at equal arc-length steps along the closed polygon ``points``.
    """
    closed = np.vstack([points, points[:1]]).astype(np.float64)
    steps = np.hypot(*np.diff(closed, axis=0).T)
    closed = closed[np.r_[True, steps > 0]]
    arc = np.r_[0.0, np.cumsum(steps[steps > 0])]
    at = np.arange(samples) * (arc[-1] / samples)
    return np.column_stack([np.interp(at, arc, closed[:, k]) for k in range(2)])


def _chord_angles(contour: Contour, stride: int, samples: int, smoothing: float) -> np.ndarray:
    # directions of chords ``stride`` samples long, sampled ``_SUBSAMPLES`` times per step
    if samples <= stride:
        raise ValueError(f"{samples} contour samples do not fit a chord of {stride}")
    points = _resample_closed(contour.points, samples * _SUBSAMPLES)
    if smoothing > 0:
        points = ndimage.gaussian_filter1d(points, smoothing * _SUBSAMPLES, axis=0, mode='wrap')
    chords = np.roll(points, -stride * _SUBSAMPLES, axis=0) - points
    return np.arctan2(-chords[:, 1], chords[:, 0])


def _split_bins(angles: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Lower bin, upper bin and weight of the upper bin for each angle; bin ``k`` is
    centered on ``2 pi k / bins``.
    """
    position = np.mod(angles, 2.0 * math.pi) * (bins / (2.0 * math.pi))
    lower = np.floor(position)
    weight = position - lower
    lower = lower.astype(np.int64) % bins
    return lower, (lower + 1) % bins, weight


def boundary_orientation_chain(contour: Contour, bins: int = 16, stride: int = 3,
                               samples: int = CONTOUR_SAMPLES,
                               smoothing: float = CONTOUR_SMOOTHING) -> np.ndarray:
    """
    Normalized histogram of chord directions between resampled contour points
    ``stride`` apart, cyclically shifted so the modal bin comes first.

    The contour is resampled to ``samples`` points at equal arc-length steps and
    smoothed by a circular Gaussian of ``smoothing`` steps. Contours of at most
    ``stride`` points give a single-bin histogram.
    """
    if bins < 4:
        raise ValueError(f"at least 4 orientation bins are required, got {bins}")
    hist = np.zeros(bins, dtype=np.float64)
    if len(contour) <= stride:
        hist[0] = 1.0
        return hist
    lower, upper, weight = _split_bins(_chord_angles(contour, stride, samples, smoothing), bins)
    hist += np.bincount(lower, weights=1.0 - weight, minlength=bins)
    hist += np.bincount(upper, weights=weight, minlength=bins)
    hist /= hist.sum()
    return np.roll(hist, -int(np.argmax(hist)))


def gradient_cooccurrence(contour: Contour, bins: int = 16, offset: int = 5, stride: int = 3,
                          samples: int = CONTOUR_SAMPLES,
                          smoothing: float = CONTOUR_SMOOTHING) -> np.ndarray:
    """
    Row-normalized ``bins`` x ``bins`` co-occurrence of relative turns along the
    closed contour: entry ``(a, b)`` collects points whose direction turned by
    ``a`` bins over the previous ``offset`` samples and turns by ``b`` bins over
    the next ``offset`` samples. Each vote is shared bilinearly between the four
    nearest cells. Contours of at most ``max(offset, stride)`` points give a zero
    matrix.
    """
    matrix = np.zeros((bins, bins), dtype=np.float64)
    if len(contour) <= max(offset, stride):
        return matrix
    if samples <= offset:
        raise ValueError(f"{samples} contour samples do not fit an offset of {offset}")
    angles = _chord_angles(contour, stride, samples, smoothing)
    shift = offset * _SUBSAMPLES
    in_lower, in_upper, in_weight = _split_bins(angles - np.roll(angles, shift), bins)
    out_lower, out_upper, out_weight = _split_bins(np.roll(angles, -shift) - angles, bins)
    for rows, row_weight in ((in_lower, 1.0 - in_weight), (in_upper, in_weight)):
        for cols, col_weight in ((out_lower, 1.0 - out_weight), (out_upper, out_weight)):
            np.add.at(matrix, (rows, cols), row_weight * col_weight)
    totals = matrix.sum(axis=1, keepdims=True)
    totals[totals < MIN_ROW_SHARE * totals.sum()] = 0.0
    return np.divide(matrix, totals, out=np.zeros_like(matrix), where=totals > 0)


def borchiz(mask: BinaryMask,
            size: int = NORMALIZED_SIZE,
            max_order: int = 10,
            bins: int = 16,
            stride: int = 3,
            offset: int = 5) -> BorchizVector:
    """
    Compute the B-ORCHIZ descriptor of the foreground of ``mask``.

    The Zernike block is computed on the normalized shape. The contour blocks are
    taken from the boundary of the largest region of ``mask`` itself; their
    arc-length resampling removes scale, and smoothing at a fixed fraction of the
    perimeter keeps the raster staircase out of the directions.

    Parameters
    ----------
    mask
        binary raster with a nonempty foreground.
    size, optional
        side of the normalized frame, 128 by default.
    max_order, optional
        highest Zernike order, 10 by default (36 magnitudes).
    bins, optional
        number of orientation bins of both local blocks, 16 by default.
    stride, optional
        chord length in resampled contour steps, 3 by default.
    offset, optional
        offset of the co-occurrence pairs in resampled contour steps, 5 by default.
    """
    shape = normalize_shape(mask, size=size)
    regions = connected_components(mask)
    if not regions:
        raise EmptyShapeError()
    contour = trace_boundary(regions[0])
    return BorchizVector(
        zernike_mags=zernike_magnitudes(shape, max_order),
        boc_hist=boundary_orientation_chain(contour, bins, stride),
        iegcm=gradient_cooccurrence(contour, bins, offset, stride),
    )


def borchiz_names(max_order: int = 10, bins: int = 16) -> list[str]:
    """
    Column names of the serialized descriptor.
    """
    names = [f"zernike_{n}_{m}" for n, m in zernike_indices(max_order)]
    names += [f"boc_{i:02d}" for i in range(bins)]
    names += [f"iegcm_{a:02d}_{b:02d}" for a in range(bins) for b in range(bins)]
    return names
