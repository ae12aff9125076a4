import pickle

import numpy as np
import pytest

from wearclass.config import EvalConfig, PipelineConfig
from wearclass.dataset import ManifestRecord, WearDataset, extract_descriptors
from wearclass.errors import DatasetError, PipelineRunError, SingleClassError, WearClassError
from wearclass.evaluation import (ConfusionCounts, accuracy, make_rng, monte_carlo_eval, roc_auc, stratified_split,
                                  wrapper_rank)
from wearclass.pipelines import DescriptorSet
from wearclass.shapefeat import shapefeat_names
from wearclass.synth import synthesize


def _dataset(counts):
    records = [ManifestRecord(f"{label}{n:03d}", f"{label}{n:03d}.png", label=label)
               for label, count in counts.items() for n in range(count)]
    return WearDataset(records)


def _blob_descriptors(dataset, seed=0, spread=0.05):
    rng = np.random.Generator(np.random.PCG64(seed))
    shape_centers = {'L': [0.2, 0.7, 0.3], 'M': [0.5, 0.5, 0.5], 'H': [0.8, 0.2, 0.7]}
    contour_centers = {'L': [0.6, 0.2, 0.2], 'M': [0.2, 0.6, 0.2], 'H': [0.2, 0.2, 0.6]}
    shape = [np.asarray(shape_centers[r.label]) + rng.normal(0.0, spread, 3) for r in dataset]
    contour = [np.asarray(contour_centers[r.label]) + rng.uniform(0.0, spread, 3) for r in dataset]
    return DescriptorSet(dataset.ids, np.clip(shape, 0, 1), np.asarray(contour))


class TestAccuracy:
    def test_binary_counts(self):
        confusion = ConfusionCounts.binary(tp=9, tn=8, fp=1, fn=2)
        assert accuracy(confusion) == pytest.approx(0.85)
        assert (confusion.tp, confusion.tn, confusion.fp, confusion.fn) == (9, 8, 1, 2)
        assert confusion.classes == ('L', 'H')

    def test_from_predictions(self):
        confusion = ConfusionCounts.from_predictions(['L', 'M', 'H', 'H'], ['L', 'H', 'H', 'M'])
        assert confusion.classes == ('L', 'M', 'H')
        np.testing.assert_array_equal(confusion.matrix, [[1, 0, 0], [0, 0, 1], [0, 1, 1]])
        assert accuracy(confusion) == pytest.approx(0.5)

    def test_sum(self):
        a = ConfusionCounts.binary(1, 2, 3, 4)
        assert (a + a).total == 20
        with pytest.raises(ValueError):
            a + ConfusionCounts(('L', 'M'), [[1, 0], [0, 1]])

    def test_empty(self):
        with pytest.raises(ValueError):
            accuracy(ConfusionCounts(('L', 'H'), np.zeros((2, 2))))

    def test_cells_need_two_classes(self):
        with pytest.raises(ValueError):
            ConfusionCounts(('L', 'M', 'H'), np.eye(3)).tp


class TestRocAuc:
    def test_value(self):
        assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_high_wear_is_positive(self):
        assert roc_auc([0.9, 0.1, 0.8], ['H', 'L', 'H']) == pytest.approx(1.0)
        assert roc_auc([0.9, 0.1, 0.8], ['H', 'L', 'H'], positive='L') == pytest.approx(0.0)

    def test_ties_count_half(self):
        assert roc_auc([0.5, 0.5], ['L', 'H']) == pytest.approx(0.5)

    def test_single_class(self):
        with pytest.raises(SingleClassError):
            roc_auc([0.1, 0.2], ['H', 'H'])


class TestStratifiedSplit:
    def test_class_sizes(self):
        plan = stratified_split(_dataset({'L': 260, 'H': 313}), frac=0.75, seed=0)
        train = [i[0] for i in plan.train_ids]
        assert train.count('L') == 195
        assert train.count('H') == 235
        assert len(plan.test_ids) == 573 - 430

    def test_partition(self):
        dataset = _dataset({'L': 10, 'M': 7, 'H': 5})
        plan = stratified_split(dataset, seed=3)
        assert set(plan.train_ids).isdisjoint(plan.test_ids)
        assert sorted(plan.train_ids + plan.test_ids) == sorted(dataset.ids)
        position = {i: n for n, i in enumerate(dataset.ids)}
        assert [position[i] for i in plan.train_ids] == sorted(position[i] for i in plan.train_ids)

    def test_every_class_on_both_sides(self):
        plan = stratified_split(_dataset({'L': 2, 'H': 3}), frac=0.9, seed=1)
        assert {i[0] for i in plan.train_ids} == {'L', 'H'}
        assert {i[0] for i in plan.test_ids} == {'L', 'H'}

    def test_seeded(self):
        dataset = _dataset({'L': 20, 'H': 20})
        assert stratified_split(dataset, seed=5) == stratified_split(dataset, seed=5)
        assert stratified_split(dataset, seed=5).train_ids != stratified_split(dataset, seed=6).train_ids

    def test_errors(self):
        with pytest.raises(DatasetError):
            stratified_split(_dataset({'L': 1, 'H': 5}))
        with pytest.raises(ValueError):
            stratified_split(_dataset({'L': 4, 'H': 4}), frac=1.0)

    def test_rng_is_pcg64(self):
        assert isinstance(make_rng(0).bit_generator, np.random.PCG64)


class TestMonteCarlo:
    @pytest.fixture
    def dataset(self):
        return _dataset({'L': 12, 'M': 12, 'H': 12})

    def _config(self, descriptor='late', runs=4):
        return PipelineConfig(descriptor=descriptor, seed=11, eval=EvalConfig(runs=runs))

    def test_report(self, dataset):
        report = monte_carlo_eval(dataset, _blob_descriptors(dataset), self._config(), subset='all')
        assert [r.run for r in report.runs] == [0, 1, 2, 3]
        assert [r.seed for r in report.runs] == [11, 12, 13, 14]
        assert report.mean_accuracy > 0.9
        assert report.confusion.total == 4 * 9
        assert report.config_hash == self._config().hash
        assert len(report.to_frame()) == 4

    def test_deterministic_and_parallel(self, dataset):
        descriptors = _blob_descriptors(dataset, spread=0.2)
        serial = monte_carlo_eval(dataset, descriptors, self._config('shapefeat'))
        again = monte_carlo_eval(dataset, descriptors, self._config('shapefeat'))
        parallel = monte_carlo_eval(dataset, descriptors, self._config('shapefeat'), n_jobs=2)
        assert serial.to_dict() == again.to_dict() == parallel.to_dict()

    def test_k_sweep(self, dataset):
        report = monte_carlo_eval(dataset, _blob_descriptors(dataset), self._config('cotrans', runs=2),
                                  ks=(3, 7))
        assert sorted(report.sweep) == [3, 7]
        assert list(report.to_frame().columns) == ['run', 'seed', 'accuracy', 'accuracy_k3', 'accuracy_k7']

    def test_k_sweep_ignored_for_svm(self, dataset):
        report = monte_carlo_eval(dataset, _blob_descriptors(dataset), self._config('shapefeat', runs=1), ks=(3,))
        assert report.sweep == {}

    def test_failing_run(self, dataset):
        descriptors = _blob_descriptors(dataset).select(dataset.ids[1:])
        with pytest.raises(PipelineRunError) as info:
            monte_carlo_eval(dataset, descriptors, self._config(runs=2))
        assert info.value.run == 0

    def test_run_error_survives_pickling(self):
        error = pickle.loads(pickle.dumps(PipelineRunError(3, ValueError('bad split'))))
        assert error.run == 3
        assert 'bad split' in str(error)

    def test_single_class(self):
        dataset = _dataset({'H': 6})
        with pytest.raises(SingleClassError):
            monte_carlo_eval(dataset, _blob_descriptors(dataset), self._config())


class TestWrapperRank:
    @pytest.fixture
    def data(self):
        rng = np.random.Generator(np.random.PCG64(2))
        labels = ['L'] * 20 + ['H'] * 20
        signal = np.r_[rng.normal(0.2, 0.05, 20), rng.normal(0.8, 0.05, 20)]
        X = np.column_stack([rng.uniform(size=40), signal, rng.uniform(size=40)])
        return X, labels

    def test_informative_feature_ranks_first(self, data):
        X, labels = data
        ranking = wrapper_rank(X, labels, ['noise_a', 'signal', 'noise_b'], repeats=3, seed=0)
        assert ranking.ranking[0] == 'signal'
        assert sorted(ranking.ranking) == ['noise_a', 'noise_b', 'signal']
        assert len(ranking.rounds) == 2
        assert ranking.rounds[0].auc > 0.95
        assert list(ranking.to_frame()['rank']) == [1, 2, 3]

    def test_deterministic(self, data):
        X, labels = data
        names = ['a', 'b', 'c']
        assert wrapper_rank(X, labels, names, seed=4) == wrapper_rank(X, labels, names, seed=4)

    def test_three_classes_need_binarizing(self, data):
        X, labels = data
        with pytest.raises(DatasetError, match='binarize'):
            wrapper_rank(X, labels[:-1] + ['M'], ['a', 'b', 'c'])

    def test_name_count(self, data):
        X, labels = data
        with pytest.raises(WearClassError):
            wrapper_rank(X, labels, ['a', 'b'])


@pytest.mark.slow
def test_random_labels_score_at_chance():
    rng = np.random.Generator(np.random.PCG64(17))
    dataset = _dataset({'L': 30, 'H': 30})
    descriptors = DescriptorSet(dataset.ids, rng.uniform(size=(60, 10)), rng.uniform(size=(60, 10)))
    config = PipelineConfig(descriptor='shapefeat', seed=0, eval=EvalConfig(runs=20))
    report = monte_carlo_eval(dataset, descriptors, config)
    assert abs(report.mean_accuracy - 0.5) <= 0.1


@pytest.mark.slow
def test_axis_ratio_ranks_first_across_seeds():
    names = shapefeat_names()
    first = 0
    for seed in range(20):
        rng = np.random.Generator(np.random.PCG64(seed))
        X = rng.uniform(size=(40, len(names)))
        X[:, names.index('r')] = np.r_[rng.normal(0.35, 0.1, 20), rng.normal(0.65, 0.1, 20)]
        ranking = wrapper_rank(X, ['L'] * 20 + ['H'] * 20, names, repeats=3, seed=seed)
        first += ranking.ranking[0] == 'r'
    assert first >= 18


@pytest.mark.slow
def test_late_fusion_beats_single_descriptors(tmp_path):
    wins = 0
    for seed in range(5):
        dataset = synthesize(tmp_path / str(seed), n_per_class=50, seed=seed)
        shape, _ = extract_descriptors(dataset, 'shapefeat')
        contour, _ = extract_descriptors(dataset, 'borchiz')
        descriptors = DescriptorSet.from_frames(shape, contour)
        means = {}
        for name in ('shapefeat', 'borchiz', 'late'):
            config = PipelineConfig(descriptor=name, seed=0, eval=EvalConfig(runs=20))
            means[name] = monte_carlo_eval(dataset, descriptors, config).mean_accuracy
        assert min(means.values()) > 0.5
        wins += means['late'] >= max(means['shapefeat'], means['borchiz'])
    assert wins >= 4
