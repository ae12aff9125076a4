import json

import numpy as np
import pandas as pd
import pytest

from wearclass.config import FusionConfig, PipelineConfig
from wearclass.errors import DatasetError, DimensionMismatchError
from wearclass.pipelines import DescriptorSet, Pipeline, available_pipelines

SHAPE_CENTERS = {'L': [0.1, 0.8, 0.2], 'M': [0.5, 0.5, 0.5], 'H': [0.9, 0.1, 0.8]}
CONTOUR_CENTERS = {'L': [0.7, 0.1, 0.1, 0.1], 'M': [0.2, 0.6, 0.1, 0.1], 'H': [0.1, 0.1, 0.4, 0.4]}


@pytest.fixture
def training():
    rng = np.random.Generator(np.random.PCG64(21))
    ids, labels, shape, contour = [], [], [], []
    for label in ('L', 'M', 'H'):
        for n in range(8):
            ids.append(f"{label}{n}")
            labels.append(label)
            shape.append(np.asarray(SHAPE_CENTERS[label]) + rng.normal(0.0, 0.03, 3))
            contour.append(np.asarray(CONTOUR_CENTERS[label]) + rng.uniform(0.0, 0.03, 4))
    return DescriptorSet(ids, np.clip(shape, 0, 1), np.asarray(contour)), labels


@pytest.fixture
def queries():
    return DescriptorSet(['qL', 'qM', 'qH'], list(SHAPE_CENTERS.values()), list(CONTOUR_CENTERS.values()))


def test_registry():
    assert available_pipelines() == ['borchiz', 'cotrans', 'early', 'late', 'shapefeat']
    with pytest.raises(ValueError):
        Pipeline.from_name('hog', PipelineConfig())


@pytest.mark.parametrize('name', ['shapefeat', 'borchiz', 'early', 'late', 'cotrans'])
class TestPipelines:
    def test_predicts_the_classes(self, name, training, queries):
        data, labels = training
        pipeline = Pipeline.from_config(PipelineConfig(descriptor=name)).fit(data, labels)
        assert pipeline.name == name
        assert pipeline.classes == ('L', 'M', 'H')
        assert pipeline.predict(queries) == ['L', 'M', 'H']

    def test_model_document(self, name, training, queries):
        data, labels = training
        pipeline = Pipeline.from_config(PipelineConfig(descriptor=name, seed=3)).fit(data, labels)
        document = json.loads(json.dumps(pipeline.to_dict()))
        restored = Pipeline.from_dict(document)
        assert restored.name == name
        assert restored.config == pipeline.config
        assert restored.predict(queries) == pipeline.predict(queries)
        proba = pipeline.predict_proba(queries)
        if proba is None:
            assert restored.predict_proba(queries) is None
        else:
            np.testing.assert_allclose(restored.predict_proba(queries), proba)


class TestProbabilities:
    def test_late_fusion_averages_the_svms(self, training, queries):
        data, labels = training
        late = Pipeline.from_config(PipelineConfig(descriptor='late')).fit(data, labels)
        expected = (late.shape.predict_proba(queries) + late.contour.predict_proba(queries)) / 2.0
        np.testing.assert_allclose(late.predict_proba(queries), expected)
        np.testing.assert_allclose(late.predict_proba(queries).sum(axis=1), 1.0)

    def test_svm_label_is_most_probable(self, training, queries):
        data, labels = training
        pipeline = Pipeline.from_config(PipelineConfig(descriptor='early')).fit(data, labels)
        proba = pipeline.predict_proba(queries)
        assert [pipeline.classes[i] for i in proba.argmax(axis=1)] == pipeline.predict(queries)


class TestCotransduction:
    def test_k_sweep(self, training, queries):
        data, labels = training
        pipeline = Pipeline.from_config(PipelineConfig(descriptor='cotrans')).fit(data, labels)
        for k in (3, 7, 9, 11):
            assert pipeline.predict(queries, k=k) == ['L', 'M', 'H']

    def test_k_is_capped_by_the_training_set(self, training, queries):
        data, labels = training
        config = PipelineConfig(descriptor='cotrans', fusion=FusionConfig(k=500))
        pipeline = Pipeline.from_config(config).fit(data, labels)
        assert len(pipeline.predict(queries)) == 3

    def test_needs_both_descriptors(self, training):
        data, labels = training
        with pytest.raises(DatasetError):
            Pipeline.from_config(PipelineConfig(descriptor='cotrans')).fit(DescriptorSet(data.ids, data.shape),
                                                                           labels)


class TestDescriptorSet:
    def test_from_frames_aligns_rows(self):
        shape = pd.DataFrame([[1.0], [2.0]], index=['a', 'b'], columns=['x'])
        contour = pd.DataFrame([[20.0, 0.0], [10.0, 0.0]], index=['b', 'a'], columns=['u', 'v'])
        data = DescriptorSet.from_frames(shape, contour)
        assert data.ids == ('a', 'b')
        np.testing.assert_array_equal(data.contour[:, 0], [10.0, 20.0])

    def test_missing_rows(self):
        shape = pd.DataFrame([[1.0], [2.0]], index=['a', 'b'])
        with pytest.raises(DatasetError):
            DescriptorSet.from_frames(shape, pd.DataFrame([[1.0]], index=['a']))

    def test_select_and_require(self):
        data = DescriptorSet(['a', 'b', 'c'], shape=np.arange(6.0).reshape(3, 2))
        np.testing.assert_array_equal(data.select(['c', 'a']).shape, [[4.0, 5.0], [0.0, 1.0]])
        with pytest.raises(DatasetError):
            data.select(['z'])
        with pytest.raises(DatasetError):
            data.require('contour')

    def test_row_count_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            DescriptorSet(['a', 'b'], shape=np.ones((3, 2)))
