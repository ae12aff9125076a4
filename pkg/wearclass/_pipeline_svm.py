from __future__ import annotations

import typing as typ

import numpy as np

from .classify import KernelSpec, SvmModel, svm_predict_many, svm_train
from .fusion import early_fuse
from .pipelines import DescriptorSet, Pipeline, register_pipeline

__all__ = ['SvmPipeline', 'ShapeFeatSvm', 'BorchizSvm', 'EarlyFusionSvm']


class SvmPipeline(Pipeline):
    """
    One intersection-kernel SVM over the descriptor block(s) chosen by
    :meth:`features`.
    """
    model: typ.Optional[SvmModel] = None

    def features(self, data: DescriptorSet) -> np.ndarray:
        raise NotImplementedError

    def kernel(self) -> KernelSpec:
        return KernelSpec(self.config.classifier.kernel, self.config.classifier.gamma)

    def fit(self, data: DescriptorSet, labels: typ.Sequence[str]) -> SvmPipeline:
        self.model = svm_train(self.features(data), labels, self.kernel(), self.config.classifier.C)
        self.classes = self.model.classes
        return self

    def _predict(self, data: DescriptorSet) -> tuple[list[str], np.ndarray]:
        if self.model is None:
            raise RuntimeError(f"the {self.name} pipeline is not fitted")
        return svm_predict_many(self.model, self.features(data))

    def predict_proba(self, data: DescriptorSet) -> np.ndarray:
        return self._predict(data)[1]

    def predict(self, data: DescriptorSet) -> list[str]:
        return self._predict(data)[0]

    def state_dict(self) -> dict[str, typ.Any]:
        return {'svm': self.model.to_dict()}

    def load_state_dict(self, state: typ.Mapping[str, typ.Any]) -> None:
        self.model = SvmModel.from_dict(state['svm'])
        self.classes = self.model.classes


@register_pipeline('shapefeat')
class ShapeFeatSvm(SvmPipeline):
    def features(self, data: DescriptorSet) -> np.ndarray:
        return data.require('shape')


@register_pipeline('borchiz')
class BorchizSvm(SvmPipeline):
    def features(self, data: DescriptorSet) -> np.ndarray:
        return data.require('contour')


@register_pipeline('early')
class EarlyFusionSvm(SvmPipeline):
    """ShapeFeat and B-ORCHIZ concatenated, ShapeFeat first."""

    def features(self, data: DescriptorSet) -> np.ndarray:
        shape, contour = data.require('shape'), data.require('contour')
        return np.stack([early_fuse(s, c) for s, c in zip(shape, contour)]) if len(data) else \
            np.empty((0, shape.shape[1] + contour.shape[1]))
