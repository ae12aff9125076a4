"""
Named classification pipelines. Each descriptor/fusion strategy registers a
:class:`Pipeline` subclass under its configuration name.
"""
from __future__ import annotations

import typing as typ
from dataclasses import dataclass
from weakref import WeakValueDictionary

import numpy as np
import pandas as pd

from .config import PipelineConfig
from .errors import DatasetError, DimensionMismatchError

__all__ = ['DescriptorSet', 'Pipeline', 'register_pipeline', 'available_pipelines', 'PIPELINE_FORMAT']

PIPELINE_FORMAT = 'wearclass-pipeline'


@dataclass(frozen=True, eq=False)
class DescriptorSet:
    """
    ShapeFeat and B-ORCHIZ descriptors of the same items, row ``i`` of both
    arrays belonging to ``ids[i]``. Either array may be absent when a pipeline
    does not need it.
    """
    ids: tuple[str, ...]
    shape: typ.Optional[np.ndarray] = None
    contour: typ.Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, 'ids', tuple(str(i) for i in self.ids))
        for name in ('shape', 'contour'):
            block = getattr(self, name)
            if block is None:
                continue
            block = np.atleast_2d(np.asarray(block, dtype=np.float64))
            if block.shape[0] != len(self.ids):
                raise DimensionMismatchError(f"{block.shape[0]} {name} descriptors for {len(self.ids)} ids")
            object.__setattr__(self, name, block)

    def __len__(self) -> int:
        return len(self.ids)

    def require(self, name: str) -> np.ndarray:
        block = getattr(self, name)
        if block is None:
            raise DatasetError(f"this pipeline needs {name} descriptors")
        return block

    def take(self, rows: typ.Sequence[int]) -> DescriptorSet:
        rows = np.asarray(rows, dtype=np.int64)
        return DescriptorSet(ids=tuple(self.ids[i] for i in rows),
                             shape=None if self.shape is None else self.shape[rows],
                             contour=None if self.contour is None else self.contour[rows])

    def select(self, ids: typ.Iterable[str]) -> DescriptorSet:
        index = {i: n for n, i in enumerate(self.ids)}
        try:
            return self.take([index[str(i)] for i in ids])
        except KeyError as exc:
            raise DatasetError(f"no descriptors for record {exc.args[0]!r}") from None

    @classmethod
    def from_frames(cls, shape: typ.Optional[pd.DataFrame] = None,
                    contour: typ.Optional[pd.DataFrame] = None) -> DescriptorSet:
        """
        Align descriptor tables indexed by record id. The ids of the first table
        given fix the order.
        """
        frames = [f for f in (shape, contour) if f is not None]
        if not frames:
            raise DatasetError("no descriptor table given")
        ids = [str(i) for i in frames[0].index]
        blocks = {}
        for name, frame in (('shape', shape), ('contour', contour)):
            if frame is None:
                continue
            frame = frame.copy()
            frame.index = frame.index.astype(str)
            missing = set(ids).difference(frame.index)
            if missing:
                raise DatasetError(f"{name} table lacks {len(missing)} record(s), e.g. {sorted(missing)[0]!r}")
            blocks[name] = frame.loc[ids].to_numpy(dtype=np.float64)
        return cls(ids=tuple(ids), **blocks)


class Pipeline(object):
    """
    A classifier over a :class:`DescriptorSet`. Subclasses implement
    :meth:`fit`, :meth:`predict` and the model (de)serialization.
    """
    _pipelines = WeakValueDictionary()
    name = ''

    def __init__(self, config: PipelineConfig) -> None:
        self.config = config
        self.classes: tuple[str, ...] = ()

    @classmethod
    def _register(cls, clss, name):
        cls._pipelines[name] = clss

    @classmethod
    def from_name(cls, name: str, config: PipelineConfig) -> Pipeline:
        try:
            return cls._pipelines[name](config)
        except KeyError:
            raise ValueError(f"unknown pipeline {name!r}, expected one of {', '.join(available_pipelines())}") \
                from None

    @classmethod
    def from_config(cls, config: PipelineConfig) -> Pipeline:
        return cls.from_name(config.descriptor, config)

    def fit(self, data: DescriptorSet, labels: typ.Sequence[str]) -> Pipeline:
        raise NotImplementedError

    def predict_proba(self, data: DescriptorSet) -> typ.Optional[np.ndarray]:
        """
        Class distributions, one row per item in ``self.classes`` order, or None
        for pipelines that only vote.
        """
        return None

    def predict(self, data: DescriptorSet) -> list[str]:
        raise NotImplementedError

    def state_dict(self) -> dict[str, typ.Any]:
        raise NotImplementedError

    def load_state_dict(self, state: typ.Mapping[str, typ.Any]) -> None:
        raise NotImplementedError

    def to_dict(self) -> dict[str, typ.Any]:
        return {
            'format': PIPELINE_FORMAT,
            'version': 1,
            'pipeline': self.name,
            'config': self.config.to_dict(),
            'classes': list(self.classes),
            'state': self.state_dict(),
        }

    @classmethod
    def from_dict(cls, data: typ.Mapping[str, typ.Any]) -> Pipeline:
        if data.get('format') != PIPELINE_FORMAT:
            raise ValueError("not a pipeline model document")
        pipeline = cls.from_name(data['pipeline'], PipelineConfig.from_dict(data['config']))
        pipeline.classes = tuple(data['classes'])
        pipeline.load_state_dict(data['state'])
        return pipeline


def register_pipeline(name: str) -> typ.Callable:
    def _pipeline_decorator(pipeline_cls: typ.Type[Pipeline]) -> typ.Type[Pipeline]:
        assert issubclass(pipeline_cls, Pipeline)
        pipeline_cls.name = name
        Pipeline._register(pipeline_cls, name)
        return pipeline_cls
    return _pipeline_decorator


def available_pipelines() -> list[str]:
    return sorted(Pipeline._pipelines.keys())
