from __future__ import annotations

import logging
import typing as typ

import numpy as np
from sklearn.preprocessing import MinMaxScaler

from .classify import order_classes
from .fusion import SimilarityMatrix, cotransduction_classify, descriptor_distances, median_scale, rounds_for
from .pipelines import DescriptorSet, Pipeline, register_pipeline

__all__ = ['CotransductionKnn']

logger = logging.getLogger(__name__)

QUERY_ID = '<query>'


class _Graph(typ.NamedTuple):
    """Training side of one similarity graph."""
    descriptors: np.ndarray
    scale: np.ndarray
    offset: np.ndarray
    metric: str
    distances: np.ndarray
    sigma: float

    @classmethod
    def fit(cls, X: np.ndarray, metric: str) -> _Graph:
        scaler = MinMaxScaler(clip=True).fit(X)
        scaled = scaler.transform(X)
        distances = descriptor_distances(scaled, scaled, metric)
        distances = 0.5 * (distances + distances.T)
        np.fill_diagonal(distances, 0.0)
        return cls(scaled, scaler.scale_.copy(), scaler.min_.copy(), metric, distances, median_scale(distances))

    def with_query(self, x: np.ndarray) -> SimilarityMatrix:
        """Similarities over the training items followed by the query item."""
        q = np.clip(x * self.scale + self.offset, 0.0, 1.0)
        row = descriptor_distances(q[None, :], self.descriptors, self.metric)[0]
        n = self.descriptors.shape[0]
        distances = np.zeros((n + 1, n + 1))
        distances[:n, :n] = self.distances
        distances[n, :n] = distances[:n, n] = row
        return SimilarityMatrix(np.exp(-distances / self.sigma), tuple(str(i) for i in range(n)) + (QUERY_ID,))

    def to_dict(self) -> dict[str, typ.Any]:
        return {'descriptors': self.descriptors.tolist(), 'scale': self.scale.tolist(),
                'offset': self.offset.tolist(), 'metric': self.metric, 'sigma': self.sigma}

    @classmethod
    def from_dict(cls, data: typ.Mapping[str, typ.Any]) -> _Graph:
        descriptors = np.atleast_2d(np.asarray(data['descriptors'], dtype=np.float64))
        distances = descriptor_distances(descriptors, descriptors, data['metric'])
        distances = 0.5 * (distances + distances.T)
        np.fill_diagonal(distances, 0.0)
        return cls(descriptors, np.asarray(data['scale'], dtype=np.float64),
                   np.asarray(data['offset'], dtype=np.float64), data['metric'], distances, float(data['sigma']))


@register_pipeline('cotrans')
class CotransductionKnn(Pipeline):
    """
    k-NN over the co-transduction ranking of each query against the training
    set. The B-ORCHIZ graph plays the first role, ShapeFeat the second. Scaling
    and similarity scales come from the training items only.
    """

    def __init__(self, config) -> None:
        super().__init__(config)
        self.contour: typ.Optional[_Graph] = None
        self.shape: typ.Optional[_Graph] = None
        self.labels: tuple[str, ...] = ()

    def fit(self, data: DescriptorSet, labels: typ.Sequence[str]) -> CotransductionKnn:
        fusion = self.config.fusion
        self.contour = _Graph.fit(data.require('contour'), fusion.contour_metric)
        self.shape = _Graph.fit(data.require('shape'), fusion.shape_metric)
        self.labels = tuple(labels)
        self.classes = tuple(order_classes(self.labels))
        return self

    def predict(self, data: DescriptorSet, k: typ.Optional[int] = None) -> list[str]:
        if self.contour is None:
            raise RuntimeError("the cotrans pipeline is not fitted")
        fusion = self.config.fusion
        k = fusion.k if k is None else k
        k = min(k, len(self.labels))
        rounds = rounds_for(k, fusion.p, fusion.m)
        labels = {str(i): label for i, label in enumerate(self.labels)}
        contour, shape = data.require('contour'), data.require('shape')
        predictions = []
        for c, s in zip(contour, shape):
            predictions.append(cotransduction_classify(self.contour.with_query(c), self.shape.with_query(s),
                                                       QUERY_ID, labels, p=fusion.p, m=rounds, k=k,
                                                       steps=fusion.steps))
        logger.debug("co-transduction k=%d over %d rounds for %d queries", k, rounds, len(predictions))
        return predictions

    def state_dict(self) -> dict[str, typ.Any]:
        return {'contour': self.contour.to_dict(), 'shape': self.shape.to_dict(), 'labels': list(self.labels)}

    def load_state_dict(self, state: typ.Mapping[str, typ.Any]) -> None:
        self.contour = _Graph.from_dict(state['contour'])
        self.shape = _Graph.from_dict(state['shape'])
        self.labels = tuple(state['labels'])
