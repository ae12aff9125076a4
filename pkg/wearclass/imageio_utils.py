"""
Raster input and output (PGM/PNG through Pillow) and atomic file writes.
"""
from __future__ import annotations

import contextlib
import json
import os
import tempfile
import typing as typ

import numpy as np
from PIL import Image

from .imgcore import BinaryMask

__all__ = ['read_gray', 'read_mask', 'write_gray', 'write_mask', 'atomic_path', 'write_text', 'write_json',
           'write_frame']

PathLike = typ.Union[str, os.PathLike]


def read_gray(path: PathLike) -> np.ndarray:
    """
    8-bit grayscale raster of an image file (PGM, PNG or anything Pillow reads).
    """
    with Image.open(path) as img:
        return np.asarray(img.convert('L'), dtype=np.uint8)


def read_mask(path: PathLike, threshold: float = 127) -> BinaryMask:
    return BinaryMask.from_gray(read_gray(path), threshold)


@contextlib.contextmanager
def atomic_path(path: PathLike) -> typ.Iterator[str]:
    """
    Yield a temporary path in the directory of ``path`` that replaces ``path``
    once the block exits without error.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    suffix = os.path.splitext(path)[1]
    fd, tmp = tempfile.mkstemp(prefix='.tmp-', suffix=suffix, dir=directory)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_gray(path: PathLike, image: np.ndarray) -> None:
    data = np.clip(np.rint(np.asarray(image, dtype=np.float64)), 0, 255).astype(np.uint8)
    with atomic_path(path) as tmp:
        Image.fromarray(data).save(tmp, format='PNG')


def write_mask(path: PathLike, mask: BinaryMask) -> None:
    """
    Write a mask as an 8-bit PNG with foreground 255.
    """
    write_gray(path, mask.bits.astype(np.uint8) * 255)


def write_text(path: PathLike, text: str) -> None:
    with atomic_path(path) as tmp:
        with open(tmp, 'w', encoding='utf-8', newline='\n') as fp:
            fp.write(text)


def write_json(path: PathLike, data: typ.Any) -> None:
    write_text(path, json.dumps(data, indent=2, sort_keys=True) + '\n')


def write_frame(path: PathLike, frame, header_comment: typ.Optional[str] = None, **kwargs) -> None:
    """
    Write a pandas DataFrame as CSV, optionally preceded by one ``#`` comment line.
    """
    text = frame.to_csv(lineterminator='\n', float_format='%.17g', **kwargs)
    if header_comment:
        text = f"# {header_comment}\n" + text
    write_text(path, text)
