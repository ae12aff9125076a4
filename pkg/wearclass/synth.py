"""
Synthetic wear-region masks with known labels.

Every mask is a rough elliptic band hanging from the worn edge with some of its
area cut away from the lower boundary. Low and medium wear are the same family
of shapes at two sizes, so only the region features tell them apart. Medium and
high wear share sizes and the amount of area that is cut away; medium wear
loses it as one broad bay, high wear as narrow bites, so mainly the contour
features tell them apart.
"""
from __future__ import annotations

import logging
import os
import typing as typ

import numpy as np
from scipy import ndimage
from skimage.draw import disk, ellipse

from .config import PipelineConfig
from .dataset import WEAR_CLASSES, ManifestRecord, WearDataset
from .imageio_utils import write_frame, write_json, write_mask
from .imgcore import BinaryMask, connected_components

__all__ = ['SYNTH_SHAPE', 'SYNTH_PARAMS', 'generate_mask', 'synthesize']

logger = logging.getLogger(__name__)

SYNTH_SHAPE = (128, 192)

# major: semi-axis along the edge in pixels; aspect: across / along the edge;
# concavity: share of the area cut from the lower boundary; bites: 0 cuts one bay
_SHARED = {'aspect': (0.32, 0.42), 'concavity': (0.03, 0.09), 'jitter': 0.12}
SYNTH_PARAMS = {
    'L': {'major': (15.0, 21.0), 'bites': 0, **_SHARED},
    'M': {'major': (30.0, 42.0), 'bites': 0, **_SHARED},
    'H': {'major': (30.0, 42.0), 'bites': 3, **_SHARED},
}
INCOMPLETE_FRACTION = 0.2


def _rough_ellipse(bits: np.ndarray, center: tuple[float, float], major: float, minor: float,
                   angle: float, jitter: float, rng: np.random.Generator) -> None:
    # boundary roughness: a few random lobes around a base ellipse
    rr, cc = ellipse(center[0], center[1], minor, major, shape=bits.shape, rotation=angle)
    bits[rr, cc] = True
    for _ in range(rng.integers(2, 5)):
        t = rng.uniform(0.0, 2.0 * np.pi)
        r = rng.uniform(0.15, jitter * 2.5 + 0.15) * minor
        x = center[1] + major * np.cos(t) * np.cos(angle) - minor * np.sin(t) * np.sin(angle)
        y = center[0] - major * np.cos(t) * np.sin(angle) - minor * np.sin(t) * np.cos(angle)
        rr, cc = disk((y, x), max(r, 1.5), shape=bits.shape)
        bits[rr, cc] = True


def _lower_edge(bits: np.ndarray, x: float) -> int:
    col = int(np.clip(round(x), 0, bits.shape[1] - 1))
    rows = np.flatnonzero(bits[:, col])
    return int(rows[-1]) if rows.size else int(np.flatnonzero(bits.any(axis=1))[-1])


def _cut(bits: np.ndarray, disks: typ.Iterable[tuple[float, float, float]]) -> np.ndarray:
    cut = bits.copy()
    for y, x, radius in disks:
        rr, cc = disk((y, x), radius, shape=bits.shape)
        cut[rr, cc] = False
    return cut


def _cut_bay(bits: np.ndarray, x: float, radius: float, area: float) -> np.ndarray:
    # a shallow segment of a large disc, deepened until it removes ``area`` pixels
    bottom = _lower_edge(bits, x)
    total = np.count_nonzero(bits)
    for depth in np.arange(0.5, radius, 0.25):
        cut = _cut(bits, [(bottom + radius - depth, x, radius)])
        if total - np.count_nonzero(cut) >= area:
            return cut
    return cut


def _cut_bites(bits: np.ndarray, xs: typ.Sequence[float], area: float) -> np.ndarray:
    # half discs centered on the lower boundary, widened until they remove ``area`` pixels
    centers = [(_lower_edge(bits, x), x) for x in xs]
    total = np.count_nonzero(bits)
    for radius in np.arange(1.5, bits.shape[0] / 2.0, 0.25):
        cut = _cut(bits, [(y, x, radius) for y, x in centers])
        if total - np.count_nonzero(cut) >= area:
            return cut
    return cut


def generate_mask(label: str, rng: np.random.Generator,
                  shape: tuple[int, int] = SYNTH_SHAPE) -> BinaryMask:
    """
    One synthetic wear mask of class ``label`` with the worn edge at the top.
    """
    try:
        params = SYNTH_PARAMS[label]
    except KeyError:
        raise ValueError(f"unknown wear label {label!r}") from None
    width = shape[1]
    bits = np.zeros(shape, dtype=bool)
    major = rng.uniform(*params['major'])
    minor = major * rng.uniform(*params['aspect'])
    center = (minor + rng.uniform(2.0, 6.0), width / 2.0 + rng.uniform(-10.0, 10.0))
    angle = rng.uniform(-0.15, 0.15)
    _rough_ellipse(bits, center, major, minor, angle, params['jitter'], rng)

    area = rng.uniform(*params['concavity']) * np.count_nonzero(bits)
    if params['bites']:
        spread = np.linspace(-0.5, 0.5, params['bites']) + rng.uniform(-0.08, 0.08, params['bites'])
        bits = _cut_bites(bits, center[1] + spread * major, area)
    else:
        bits = _cut_bay(bits, center[1] + rng.uniform(-0.15, 0.15) * major,
                        rng.uniform(1.5, 2.5) * major, area)

    bits = ndimage.binary_fill_holes(bits)
    regions = connected_components(BinaryMask(bits))
    return regions[0].to_mask()


def synthesize(out_dir: typ.Union[str, os.PathLike], n_per_class: int = 50, seed: int = 0,
               classes: typ.Sequence[str] = WEAR_CLASSES,
               shape: tuple[int, int] = SYNTH_SHAPE,
               config_hash: typ.Optional[str] = None) -> WearDataset:
    """
    Write ``n_per_class`` masks per class as PNG files under ``out_dir/masks``,
    a ``manifest.csv`` and the generation parameters in ``synth.json``.

    Both files carry ``config_hash``, the hash of the default configuration with
    ``seed`` when it is not given. The same seed gives byte-identical files.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    if config_hash is None:
        config_hash = PipelineConfig(seed=seed).hash
    out_dir = os.fspath(out_dir)
    rng = np.random.Generator(np.random.PCG64(seed))
    sides = ('north', 'east', 'south', 'west')
    records = []
    for label in classes:
        for n in range(n_per_class):
            rid = f"{label}_{n:04d}"
            mask = generate_mask(label, rng, shape)
            incomplete = rng.uniform() < INCOMPLETE_FRACTION
            if incomplete:
                # remnant of the adjacent edge, standing upright
                mask = BinaryMask(np.rot90(mask.bits).copy())
            path = os.path.join('masks', f"{rid}.png")
            write_mask(os.path.join(out_dir, path), mask)
            records.append(ManifestRecord(id=rid, image_path=path.replace(os.sep, '/'),
                                          edge_side=sides[int(rng.integers(4))],
                                          completeness='incomplete' if incomplete else 'complete',
                                          label=label))
    dataset = WearDataset(records, out_dir)
    write_frame(os.path.join(out_dir, 'manifest.csv'), dataset.to_frame(),
                header_comment=f"config_hash={config_hash}", index=False)
    write_json(os.path.join(out_dir, 'synth.json'), {
        'config_hash': config_hash,
        'seed': seed,
        'n_per_class': n_per_class,
        'classes': list(classes),
        'shape': list(shape),
        'params': {c: SYNTH_PARAMS[c] for c in classes},
        'incomplete_fraction': INCOMPLETE_FRACTION,
    })
    logger.info("synthesized %d masks in %s", len(dataset), out_dir)
    return dataset
