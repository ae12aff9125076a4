import numpy as np
import pytest
from skimage.draw import disk, ellipse, polygon

from wearclass.imgcore import BinaryMask
from wearclass.synth import synthesize


def ellipse_bits(shape=(96, 128), center=(48, 64), radii=(20, 40), rotation=0.0):
    bits = np.zeros(shape, dtype=bool)
    rr, cc = ellipse(center[0], center[1], radii[0], radii[1], shape=shape, rotation=rotation)
    bits[rr, cc] = True
    return bits


def insert_image(size=200, side=120, wear=(6, 60), insert_level=200, wear_level=255, background=10):
    """
    Square insert on a dark background with a bright wear band centered on each
    of its four edges.
    """
    image = np.full((size, size), background, dtype=np.uint8)
    lo = (size - side) // 2
    hi = lo + side
    image[lo:hi, lo:hi] = insert_level
    depth, length = wear
    start = (size - length) // 2
    image[lo:lo + depth, start:start + length] = wear_level
    image[hi - depth:hi, start:start + length] = wear_level
    image[start:start + length, lo:lo + depth] = wear_level
    image[start:start + length, hi - depth:hi] = wear_level
    return image


@pytest.fixture
def ellipse_mask():
    return BinaryMask(ellipse_bits())


@pytest.fixture
def disc_mask():
    bits = np.zeros((81, 81), dtype=bool)
    rr, cc = disk((40, 40), 30, shape=bits.shape)
    bits[rr, cc] = True
    return BinaryMask(bits)


@pytest.fixture
def rectangle_mask():
    bits = np.zeros((40, 60), dtype=bool)
    bits[10:20, 5:45] = True
    return BinaryMask(bits)


@pytest.fixture
def rhombus_mask():
    bits = np.zeros((101, 101), dtype=bool)
    rr, cc = polygon([10, 50, 90, 50], [50, 90, 50, 10], shape=bits.shape)
    bits[rr, cc] = True
    return BinaryMask(bits)


@pytest.fixture
def insert_gray():
    return insert_image()


@pytest.fixture(scope='session')
def synth_dir(tmp_path_factory):
    """A small synthetic mask set shared by the dataset, evaluation and CLI tests."""
    out = tmp_path_factory.mktemp('synth')
    synthesize(out, n_per_class=12, seed=7)
    return out


@pytest.fixture
def three_class_blobs():
    """Separable descriptors of three classes, eight samples each."""
    rng = np.random.Generator(np.random.PCG64(3))
    centers = {'L': [0.1, 0.8, 0.2], 'M': [0.5, 0.5, 0.5], 'H': [0.9, 0.1, 0.8]}
    X, y = [], []
    for label, center in centers.items():
        X.append(np.asarray(center) + rng.normal(0.0, 0.03, size=(8, 3)))
        y += [label] * 8
    return np.clip(np.vstack(X), 0.0, 1.0), y
