"""
Manifests of wear-region masks and the descriptor tables computed from them.
"""
from __future__ import annotations

import logging
import os
import typing as typ
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from .borchiz import borchiz, borchiz_names
from .config import PipelineConfig
from .errors import DatasetError, WearClassError
from .imageio_utils import read_mask
from .shapefeat import shapefeat_from_mask, shapefeat_names

__all__ = ['WEAR_CLASSES', 'SIDES', 'COMPLETENESS', 'ManifestRecord', 'WearDataset', 'binarize_labels',
           'read_descriptor_table', 'extract_descriptors']

logger = logging.getLogger(__name__)

WEAR_CLASSES = ('L', 'M', 'H')
SIDES = ('north', 'south', 'east', 'west')
COMPLETENESS = ('complete', 'incomplete')

MANIFEST_COLUMNS = ['id', 'image_path', 'edge_side', 'completeness', 'label', 'source_image']


@dataclass(frozen=True)
class ManifestRecord:
    """
    One cutting edge: the path of its wear mask, the side of the insert it was
    taken from and, for training and evaluation, its wear label.
    """
    id: str
    image_path: str
    edge_side: str = 'north'
    completeness: str = 'complete'
    label: typ.Optional[str] = None
    source_image: typ.Optional[str] = None

    def __post_init__(self) -> None:
        if self.edge_side not in SIDES:
            raise DatasetError(f"record {self.id}: unknown edge side {self.edge_side!r}")
        if self.completeness not in COMPLETENESS:
            raise DatasetError(f"record {self.id}: completeness must be complete or incomplete, "
                               f"got {self.completeness!r}")
        if self.label is not None and self.label not in WEAR_CLASSES:
            raise DatasetError(f"record {self.id}: unknown wear label {self.label!r}")


def binarize_labels(labels: typ.Iterable[str]) -> list[str]:
    """
    Two-class wear labels: low and medium wear become ``L``, high wear stays ``H``.
    """
    result = []
    for label in labels:
        if label not in WEAR_CLASSES:
            raise DatasetError(f"unknown wear label {label!r}")
        result.append('H' if label == 'H' else 'L')
    return result


def _optional(value: typ.Any) -> typ.Optional[str]:
    if value is None or (isinstance(value, float) and np.isnan(value)) or value == '':
        return None
    return str(value)


class WearDataset(typ.Sequence[ManifestRecord]):
    """
    An ordered collection of manifest records with unique ids.

    Parameters
    ----------
    records
        the records.
    root, optional
        directory relative image paths are resolved against.
    """

    def __init__(self, records: typ.Iterable[ManifestRecord], root: typ.Union[str, os.PathLike] = '.') -> None:
        self.records = tuple(records)
        self.root = os.fspath(root)
        self._index = {}
        for position, record in enumerate(self.records):
            if record.id in self._index:
                raise DatasetError(f"duplicate record id {record.id!r}")
            self._index[record.id] = position

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, item):
        return self.records[item]

    def __repr__(self) -> str:
        counts = ', '.join(f"{c}={n}" for c, n in self.class_counts().items())
        return f"<WearDataset {len(self)} records ({counts})>"

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def labels(self) -> list[typ.Optional[str]]:
        return [r.label for r in self.records]

    @property
    def classes(self) -> list[str]:
        """Labels present, in the canonical L, M, H order."""
        present = {r.label for r in self.records if r.label is not None}
        return [c for c in WEAR_CLASSES if c in present]

    def class_counts(self) -> dict[str, int]:
        counts = {}
        for label in self.labels:
            if label is not None:
                counts[label] = counts.get(label, 0) + 1
        return {c: counts[c] for c in WEAR_CLASSES if c in counts}

    def resolve(self, record: ManifestRecord) -> str:
        if os.path.isabs(record.image_path):
            return record.image_path
        return os.path.join(self.root, record.image_path)

    def require_labels(self) -> None:
        missing = [r.id for r in self.records if r.label is None]
        if missing:
            shown = ', '.join(missing[:5]) + (', ...' if len(missing) > 5 else '')
            raise DatasetError(f"{len(missing)} record(s) without a wear label: {shown}")

    def check_paths(self) -> None:
        for record in self.records:
            if not os.path.exists(self.resolve(record)):
                raise DatasetError(f"record {record.id}: image {record.image_path} does not exist")

    def select(self, ids: typ.Iterable[str]) -> WearDataset:
        return WearDataset([self.records[self._index[i]] for i in ids], self.root)

    def subset(self, completeness: str = 'all') -> WearDataset:
        """
        The complete (Insert-C) or incomplete (Insert-I) edges, or everything for
        ``'all'``.
        """
        if completeness == 'all':
            return self
        if completeness not in COMPLETENESS:
            raise DatasetError(f"subset must be all, complete or incomplete, got {completeness!r}")
        return WearDataset([r for r in self.records if r.completeness == completeness], self.root)

    def binarize(self) -> WearDataset:
        self.require_labels()
        labels = binarize_labels(self.labels)
        return WearDataset([replace(r, label=lab) for r, lab in zip(self.records, labels)], self.root)

    def to_frame(self) -> pd.DataFrame:
        rows = [[r.id, r.image_path, r.edge_side, r.completeness, r.label or '', r.source_image or '']
                for r in self.records]
        return pd.DataFrame(rows, columns=MANIFEST_COLUMNS)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, root: typ.Union[str, os.PathLike] = '.') -> WearDataset:
        if 'image_path' not in frame.columns:
            raise DatasetError("manifest has no image_path column")
        records = []
        for row in frame.to_dict('records'):
            rid = _optional(row.get('id')) or os.path.splitext(os.path.basename(str(row['image_path'])))[0]
            records.append(ManifestRecord(
                id=rid,
                image_path=str(row['image_path']),
                edge_side=_optional(row.get('edge_side')) or 'north',
                completeness=_optional(row.get('completeness')) or 'complete',
                label=_optional(row.get('label')),
                source_image=_optional(row.get('source_image')),
            ))
        return cls(records, root)

    @classmethod
    def from_csv(cls, path: typ.Union[str, os.PathLike]) -> WearDataset:
        """
        Read a manifest CSV. Relative image paths are taken relative to the
        directory of the manifest.
        """
        try:
            frame = pd.read_csv(path, comment='#', dtype=str, keep_default_na=False)
        except (OSError, pd.errors.ParserError) as exc:
            raise DatasetError(f"cannot read manifest {os.fspath(path)}: {exc}") from exc
        dataset = cls.from_frame(frame, root=os.path.dirname(os.path.abspath(path)))
        logger.info("manifest %s: %r", os.fspath(path), dataset)
        return dataset


def read_descriptor_table(path: typ.Union[str, os.PathLike]) -> pd.DataFrame:
    """
    A descriptor CSV as a float DataFrame indexed by record id.
    """
    try:
        frame = pd.read_csv(path, comment='#', index_col=0)
    except (OSError, pd.errors.ParserError) as exc:
        raise DatasetError(f"cannot read descriptor table {os.fspath(path)}: {exc}") from exc
    frame.index = frame.index.astype(str)
    return frame.astype(np.float64)


def _describe(path: str, kind: str, config) -> np.ndarray:
    mask = read_mask(path, config.image.threshold)
    if kind == 'shapefeat':
        return shapefeat_from_mask(mask).as_array()
    params = config.borchiz
    return borchiz(mask, size=params.size, max_order=params.max_order, bins=params.bins,
                   stride=params.stride, offset=params.offset).as_array()


def _describe_row(record_id: str, path: str, kind: str, config) -> tuple[str, typ.Optional[np.ndarray], str]:
    try:
        return record_id, _describe(path, kind, config), ''
    except (WearClassError, OSError, ValueError) as exc:
        return record_id, None, f"{type(exc).__name__}: {exc}"


def extract_descriptors(dataset: WearDataset, kind: str, config=None,
                        n_jobs: int = 1, progress: bool = False) -> tuple[pd.DataFrame, dict[str, str]]:
    """
    Descriptor table of every record of ``dataset``.

    Parameters
    ----------
    dataset
        the records; images are read as binary masks.
    kind
        ``shapefeat`` or ``borchiz``.
    config, optional
        a :class:`~wearclass.config.PipelineConfig`, defaults if None.
    n_jobs, optional
        number of joblib workers.
    progress, optional
        show a progress bar.

    Returns
    -------
        the table indexed by record id with the canonical column names, and the
        error message of every record that failed.
    """
    config = PipelineConfig() if config is None else config
    if kind == 'shapefeat':
        columns = shapefeat_names()
    elif kind == 'borchiz':
        columns = borchiz_names(config.borchiz.max_order, config.borchiz.bins)
    else:
        raise ValueError(f"unknown descriptor {kind!r}, expected shapefeat or borchiz")

    records = tqdm(dataset.records, desc=kind, unit='mask', disable=not progress)
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_describe_row)(r.id, dataset.resolve(r), kind, config) for r in records)

    values, ids, failures = [], [], {}
    for record_id, vector, error in rows:
        if vector is None:
            logger.warning("record %s: %s", record_id, error)
            failures[record_id] = error
            continue
        ids.append(record_id)
        values.append(vector)
    frame = pd.DataFrame(np.asarray(values).reshape(len(values), len(columns)), index=ids, columns=columns)
    frame.index.name = 'id'
    return frame, failures
