import numpy as np
import pytest

from wearclass.classify import (ClassDistribution, KernelSpec, SvmModel, intersection_gram, intersection_kernel,
                                knn_classify, order_classes, svm_decision_values, svm_predict, svm_predict_many,
                                svm_train)
from wearclass.errors import DimensionMismatchError, SingleClassError

CENTERS = {'L': [0.1, 0.8, 0.2], 'M': [0.5, 0.5, 0.5], 'H': [0.9, 0.1, 0.8]}


class TestIntersectionKernel:
    def test_value(self):
        assert intersection_kernel([1, 2, 3], [3, 1, 0]) == pytest.approx(2.0)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            intersection_kernel([1, 2], [1, 2, 3])

    def test_gram_matches_pairwise_kernel(self):
        rng = np.random.Generator(np.random.PCG64(0))
        A, B = rng.uniform(size=(5, 7)), rng.uniform(size=(4, 7))
        gram = intersection_gram(A, B)
        expected = [[intersection_kernel(a, b) for b in B] for a in A]
        np.testing.assert_allclose(gram, expected)

    def test_gram_is_positive_semidefinite(self):
        rng = np.random.Generator(np.random.PCG64(1))
        X = rng.uniform(size=(40, 12))
        gram = intersection_gram(X, X)
        np.testing.assert_allclose(gram, gram.T)
        assert np.linalg.eigvalsh(gram).min() >= -1e-8

    def test_kernel_spec(self):
        with pytest.raises(ValueError):
            KernelSpec('poly')
        X = np.eye(3)
        np.testing.assert_allclose(KernelSpec('linear').gram(X, X), np.eye(3))
        np.testing.assert_allclose(np.diag(KernelSpec('rbf', gamma=0.5).gram(X, X)), np.ones(3))


def test_order_classes():
    assert order_classes(['H', 'x', 'L', 'a', 'H']) == ['L', 'H', 'a', 'x']


class TestClassDistribution:
    def test_label_and_lookup(self):
        d = ClassDistribution(('L', 'M', 'H'), [0.2, 0.5, 0.3])
        assert d.label == 'M'
        assert d['H'] == pytest.approx(0.3)
        assert d.as_dict() == pytest.approx({'L': 0.2, 'M': 0.5, 'H': 0.3})

    def test_tie_goes_to_first_class(self):
        assert ClassDistribution(('L', 'H'), [0.5, 0.5]).label == 'L'

    @pytest.mark.parametrize('probs', [[0.6, 0.6], [-0.1, 1.1], [0.5]])
    def test_invalid(self, probs):
        with pytest.raises((ValueError, DimensionMismatchError)):
            ClassDistribution(('L', 'H'), probs)


class TestSvm:
    @pytest.fixture
    def model(self, three_class_blobs):
        X, y = three_class_blobs
        return svm_train(X, y)

    def test_classes_and_pairs(self, model):
        assert model.classes == ('L', 'M', 'H')
        assert [(p.positive, p.negative) for p in model.pairs] == [('L', 'M'), ('L', 'H'), ('M', 'H')]
        assert all(p.calib_a > 0 for p in model.pairs)

    def test_predicts_class_centers(self, model):
        labels, probs = svm_predict_many(model, np.array(list(CENTERS.values())))
        assert labels == list(CENTERS)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        assert [model.classes[i] for i in probs.argmax(axis=1)] == labels

    def test_single_prediction(self, model):
        label, dist = svm_predict(model, CENTERS['H'])
        assert label == 'H'
        assert dist.label == 'H'
        assert dist.classes == model.classes
        with pytest.raises(DimensionMismatchError):
            svm_predict(model, np.ones((2, 3)))

    def test_out_of_range_inputs_are_clipped(self, model):
        label, _ = svm_predict(model, [5.0, -3.0, 4.0])
        assert label in model.classes
        np.testing.assert_array_equal(model.transform([[5.0, -3.0, 4.0]]).clip(0, 1),
                                      model.transform([[5.0, -3.0, 4.0]]))

    def test_feature_count_mismatch(self, model):
        with pytest.raises(DimensionMismatchError):
            svm_predict_many(model, np.ones((2, 4)))

    def test_serialization_keeps_predictions(self, model, three_class_blobs):
        X, _ = three_class_blobs
        restored = SvmModel.from_dict(model.to_dict())
        np.testing.assert_allclose(svm_predict_many(restored, X)[1], svm_predict_many(model, X)[1])
        assert model.to_dict()['normalizer']['kind'] == 'minmax'

    def test_calibration_is_serialized(self, model):
        document = model.to_dict()
        assert [p['calibration']['B'] for p in document['pairs']] == [p.calib_b for p in model.pairs]
        for pair in document['pairs']:
            del pair['calibration']['B']
        assert all(p.calib_b == 0.0 for p in SvmModel.from_dict(document).pairs)

    def test_uninformative_pair_stays_near_even(self):
        rng = np.random.Generator(np.random.PCG64(11))
        X = rng.uniform(size=(40, 5))
        model = svm_train(X, ['L', 'H'] * 20)
        pair = model.pairs[0]
        prob = pair.probability(pair.decision(model.kernel, model.transform(X)))
        assert np.abs(prob - 0.5).max() < 0.3

    def test_single_sample_class_is_calibrated_in_sample(self):
        model = svm_train([[0.0, 1.0], [1.0, 0.0], [0.9, 0.1], [0.8, 0.3]], ['L', 'H', 'H', 'H'])
        assert model.pairs[0].calib_a >= 0.0
        assert svm_predict(model, [0.0, 1.0])[0] in ('L', 'H')

    def test_rejects_foreign_documents(self, model):
        document = model.to_dict()
        document['version'] = 99
        with pytest.raises(ValueError):
            SvmModel.from_dict(document)

    def test_single_class(self):
        with pytest.raises(SingleClassError):
            svm_train(np.eye(3), ['L', 'L', 'L'])

    def test_bad_arguments(self, three_class_blobs):
        X, y = three_class_blobs
        with pytest.raises(ValueError):
            svm_train(X, y, C=0.0)
        with pytest.raises(DimensionMismatchError):
            svm_train(X, y[:-1])

    def test_constant_feature(self, three_class_blobs):
        X, y = three_class_blobs
        X = np.column_stack([X, np.full(len(y), 7.0)])
        model = svm_train(X, y)
        assert svm_predict(model, list(CENTERS['M']) + [7.0])[0] == 'M'


class TestDecisionValues:
    def test_positive_class_scores_higher(self, three_class_blobs):
        X, y = three_class_blobs
        keep = [i for i, label in enumerate(y) if label != 'M']
        model = svm_train(X[keep], [y[i] for i in keep])
        scores = svm_decision_values(model, np.array([CENTERS['L'], CENTERS['H']]), positive='H')
        assert scores[1] > 0 > scores[0]
        np.testing.assert_allclose(svm_decision_values(model, X[keep], positive='L'),
                                   -svm_decision_values(model, X[keep], positive='H'))

    def test_needs_two_classes(self, three_class_blobs):
        X, y = three_class_blobs
        with pytest.raises(ValueError):
            svm_decision_values(svm_train(X, y), X)


class TestKnn:
    def test_majority(self):
        assert knn_classify([0.9, 0.8, 0.7, 0.1], ['L', 'H', 'H', 'L'], 3) == 'H'

    def test_vote_tie_goes_to_similarity_mass(self):
        assert knn_classify([0.9, 0.8, 0.1], ['H', 'L', 'L'], 2) == 'H'

    def test_full_tie_goes_to_class_order(self):
        assert knn_classify([0.5, 0.5], ['H', 'L'], 2) == 'L'

    def test_equal_similarities_keep_item_order(self):
        assert knn_classify([0.5, 0.5, 0.5], ['M', 'H', 'L'], 1) == 'M'

    @pytest.mark.parametrize('k', [0, 4])
    def test_k_out_of_range(self, k):
        with pytest.raises(ValueError):
            knn_classify([0.3, 0.2, 0.1], ['L', 'M', 'H'], k)
