from __future__ import annotations

import typing as typ

import numpy as np

from .classify import ClassDistribution
from .fusion import late_fuse
from .pipelines import DescriptorSet, Pipeline, register_pipeline
from ._pipeline_svm import BorchizSvm, ShapeFeatSvm

__all__ = ['LateFusion']


@register_pipeline('late')
class LateFusion(Pipeline):
    """
    Independent ShapeFeat and B-ORCHIZ SVMs whose class distributions are
    averaged. The label is the most probable class of the average.
    """

    def __init__(self, config) -> None:
        super().__init__(config)
        self.shape = ShapeFeatSvm(config)
        self.contour = BorchizSvm(config)

    def fit(self, data: DescriptorSet, labels: typ.Sequence[str]) -> LateFusion:
        self.shape.fit(data, labels)
        self.contour.fit(data, labels)
        self.classes = self.shape.classes
        return self

    def distributions(self, data: DescriptorSet) -> list[ClassDistribution]:
        p_shape = self.shape.predict_proba(data)
        p_contour = self.contour.predict_proba(data)
        return [late_fuse(ClassDistribution(self.shape.classes, a), ClassDistribution(self.contour.classes, b))
                for a, b in zip(p_shape, p_contour)]

    def predict_proba(self, data: DescriptorSet) -> np.ndarray:
        fused = self.distributions(data)
        return np.stack([d.probs for d in fused]) if fused else np.empty((0, len(self.classes)))

    def predict(self, data: DescriptorSet) -> list[str]:
        return [d.label for d in self.distributions(data)]

    def state_dict(self) -> dict[str, typ.Any]:
        return {'shape': self.shape.state_dict(), 'contour': self.contour.state_dict()}

    def load_state_dict(self, state: typ.Mapping[str, typ.Any]) -> None:
        self.shape.load_state_dict(state['shape'])
        self.contour.load_state_dict(state['contour'])
        self.classes = self.shape.classes
