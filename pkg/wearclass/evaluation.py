"""
Evaluation protocol: stratified Monte Carlo splits, accuracy, ROC AUC and
wrapper feature ranking by backward elimination.
"""
from __future__ import annotations

import logging
import math
import typing as typ
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.typing import ArrayLike
from sklearn.metrics import confusion_matrix, roc_auc_score

from .classify import KernelSpec, order_classes, svm_decision_values, svm_train
from .config import ClassifierConfig, PipelineConfig, config_hash
from .dataset import WearDataset
from .errors import DatasetError, PipelineRunError, SingleClassError, WearClassError
from .pipelines import DescriptorSet, Pipeline

__all__ = ['ConfusionCounts', 'SplitPlan', 'RunResult', 'EvalReport', 'RankingRound', 'WrapperRanking',
           'make_rng', 'stratified_split', 'accuracy', 'roc_auc', 'monte_carlo_eval', 'wrapper_rank']

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """The seeded 64-bit generator (PCG64) behind every split."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class ConfusionCounts:
    """
    Count matrix with true classes in rows and predicted classes in columns.
    """
    classes: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.int64)
        object.__setattr__(self, 'classes', tuple(self.classes))
        if matrix.shape != (len(self.classes), len(self.classes)):
            raise ValueError(f"a {len(self.classes)}-class confusion matrix cannot have shape {matrix.shape}")
        if np.any(matrix < 0):
            raise ValueError("confusion counts must be nonnegative")
        object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def from_predictions(cls, y_true: typ.Sequence[str], y_pred: typ.Sequence[str],
                         classes: typ.Optional[typ.Sequence[str]] = None) -> ConfusionCounts:
        classes = order_classes(list(y_true) + list(y_pred)) if classes is None else list(classes)
        return cls(tuple(classes), confusion_matrix(list(y_true), list(y_pred), labels=classes))

    @classmethod
    def binary(cls, tp: int, tn: int, fp: int, fn: int, positive: str = 'H', negative: str = 'L') -> ConfusionCounts:
        """Two-class counts, ``positive`` being high wear by default."""
        return cls((negative, positive), [[tn, fp], [fn, tp]])

    def _cell(self, true: int, pred: int) -> int:
        if len(self.classes) != 2:
            raise ValueError("tp, tn, fp and fn are defined for two classes only")
        return int(self.matrix[true, pred])

    @property
    def tp(self) -> int:
        return self._cell(1, 1)

    @property
    def tn(self) -> int:
        return self._cell(0, 0)

    @property
    def fp(self) -> int:
        return self._cell(0, 1)

    @property
    def fn(self) -> int:
        return self._cell(1, 0)

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        if self.classes != other.classes:
            raise ValueError(f"cannot add confusions over {self.classes} and {other.classes}")
        return ConfusionCounts(self.classes, self.matrix + other.matrix)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.matrix, index=list(self.classes), columns=list(self.classes))
        frame.index.name = 'true\\predicted'
        return frame


def accuracy(c: ConfusionCounts) -> float:
    """
    Correctly classified samples over all samples.
    """
    total = c.total
    if total == 0:
        raise ValueError("accuracy of an empty confusion matrix")
    return float(np.trace(c.matrix)) / total


def roc_auc(scores: ArrayLike, labels: typ.Sequence, positive: typ.Any = None) -> float:
    """
    Area under the ROC curve of ``scores`` for the ``positive`` label, tied
    scores counting one half.

    ``positive`` defaults to 1 for 0/1 labels and to ``'H'`` otherwise.
    """
    labels = list(labels)
    present = set(labels)
    if positive is None:
        positive = 1 if present <= {0, 1} else 'H'
    if len(present) != 2 or positive not in present:
        raise SingleClassError(f"ROC AUC needs two classes including {positive!r}, got {sorted(map(str, present))}")
    truth = np.asarray([label == positive for label in labels])
    return float(roc_auc_score(truth, np.asarray(scores, dtype=np.float64)))


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


def _split_positions(labels: typ.Sequence[str], frac: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(list(labels), dtype=object)
    train = []
    for label in order_classes(labels):
        members = np.flatnonzero(labels == label)
        n = members.size
        if n < 2:
            raise DatasetError(f"class {label!r} has {n} sample(s), a stratified split needs at least 2")
        # half-up rounding, at least one sample on each side
        count = min(max(int(math.floor(frac * n + 0.5)), 1), n - 1)
        train.append(rng.permutation(members)[:count])
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(labels.size), train)
    return train, test


def stratified_split(dataset: WearDataset, frac: float = 0.75, seed: int = 0) -> SplitPlan:
    """
    Split a labeled dataset class by class: each class is shuffled with its own
    draws from the seeded generator and ``round(frac * n_class)`` of it goes to
    training.
    """
    if not 0 < frac < 1:
        raise ValueError(f"frac must be in (0, 1), got {frac}")
    dataset.require_labels()
    train, test = _split_positions(dataset.labels, frac, make_rng(seed))
    ids = dataset.ids
    return SplitPlan(seed=seed, train_ids=tuple(ids[i] for i in train), test_ids=tuple(ids[i] for i in test))


@dataclass(frozen=True, eq=False)
class RunResult:
    run: int
    seed: int
    accuracy: float
    confusion: ConfusionCounts
    sweep: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class EvalReport:
    """
    Outcome of a Monte Carlo evaluation, runs sorted by index.
    """
    descriptor: str
    subset: str
    runs: tuple[RunResult, ...]
    config: dict[str, typ.Any]
    config_hash: str

    @property
    def accuracies(self) -> list[float]:
        return [r.accuracy for r in self.runs]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def confusion(self) -> ConfusionCounts:
        total = self.runs[0].confusion
        for run in self.runs[1:]:
            total = total + run.confusion
        return total

    @property
    def sweep(self) -> dict[int, float]:
        """Mean accuracy per evaluated k."""
        ks = sorted({k for r in self.runs for k in r.sweep})
        return {k: float(np.mean([r.sweep[k] for r in self.runs])) for k in ks}

    def to_dict(self) -> dict[str, typ.Any]:
        return {
            'descriptor': self.descriptor,
            'subset': self.subset,
            'runs': [{'run': r.run, 'seed': r.seed, 'accuracy': r.accuracy,
                      'sweep': {str(k): v for k, v in r.sweep.items()}} for r in self.runs],
            'mean_accuracy': self.mean_accuracy,
            'std_accuracy': self.std_accuracy,
            'classes': list(self.confusion.classes),
            'confusion': self.confusion.matrix.tolist(),
            'sweep': {str(k): v for k, v in self.sweep.items()},
            'config': self.config,
            'config_hash': self.config_hash,
        }

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.runs:
            row = {'run': r.run, 'seed': r.seed, 'accuracy': r.accuracy}
            row.update({f"accuracy_k{k}": v for k, v in sorted(r.sweep.items())})
            rows.append(row)
        return pd.DataFrame(rows)


def _evaluate_run(run: int, dataset: WearDataset, descriptors: DescriptorSet, config: PipelineConfig,
                  frac: float, ks: typ.Sequence[int]) -> RunResult:
    seed = config.seed + run
    try:
        plan = stratified_split(dataset, frac, seed)
        train_labels = [r.label for r in dataset.select(plan.train_ids)]
        test_labels = [r.label for r in dataset.select(plan.test_ids)]
        train = descriptors.select(plan.train_ids)
        test = descriptors.select(plan.test_ids)
        pipeline = Pipeline.from_config(config).fit(train, train_labels)
        predicted = pipeline.predict(test)
        sweep = {}
        for k in ks:
            sweep[int(k)] = accuracy(ConfusionCounts.from_predictions(
                test_labels, pipeline.predict(test, k=k), dataset.classes))
    except Exception as exc:
        raise PipelineRunError(run, exc) from exc
    confusion = ConfusionCounts.from_predictions(test_labels, predicted, dataset.classes)
    result = RunResult(run=run, seed=seed, accuracy=accuracy(confusion), confusion=confusion, sweep=sweep)
    logger.info("run %d (seed %d): accuracy %.4f", run, seed, result.accuracy)
    return result


def monte_carlo_eval(dataset: WearDataset,
                     descriptors: DescriptorSet,
                     config: PipelineConfig,
                     runs: typ.Optional[int] = None,
                     frac: typ.Optional[float] = None,
                     ks: typ.Sequence[int] = (),
                     subset: str = 'all',
                     n_jobs: typ.Optional[int] = None) -> EvalReport:
    """
    Stratified Monte Carlo evaluation of the configured pipeline.

    Run ``r`` splits with seed ``config.seed + r``, fits a fresh pipeline on the
    training part only and scores the test part.

    Parameters
    ----------
    dataset
        labeled records.
    descriptors
        descriptors of at least the records of ``dataset``.
    config
        pipeline configuration; ``runs``, ``frac`` and ``n_jobs`` default to its
        ``eval`` section.
    ks, optional
        extra k values to score, co-transduction only.
    subset, optional
        name of the record subset, recorded in the report.

    Raises
    ------
    PipelineRunError
        carrying the index of the first failing run.
    """
    runs = config.eval.runs if runs is None else runs
    frac = config.eval.frac if frac is None else frac
    n_jobs = config.eval.n_jobs if n_jobs is None else n_jobs
    dataset.require_labels()
    if len(dataset.classes) < 2:
        raise SingleClassError(f"evaluation needs at least two classes, got {dataset.classes}")
    if ks and config.descriptor != 'cotrans':
        logger.warning("k sweep ignored for the %s pipeline", config.descriptor)
        ks = ()
    logger.info("evaluating %s on %r: %d runs at %.2f/%.2f", config.descriptor, dataset, runs, frac, 1 - frac)

    results = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_run)(run, dataset, descriptors, config, frac, tuple(ks)) for run in range(runs))
    results = sorted(results, key=lambda r: r.run)
    report = EvalReport(descriptor=config.descriptor, subset=subset, runs=tuple(results),
                        config=config.to_dict(), config_hash=config_hash(config))
    logger.info("mean accuracy %.4f (std %.4f)", report.mean_accuracy, report.std_accuracy)
    return report


@dataclass(frozen=True)
class RankingRound:
    removed: str
    auc: float
    remaining: tuple[str, ...]


@dataclass(frozen=True)
class WrapperRanking:
    """
    Features from most to least relevant, and the elimination rounds that
    produced the order.
    """
    ranking: tuple[str, ...]
    rounds: tuple[RankingRound, ...]
    seed: int

    def to_frame(self) -> pd.DataFrame:
        auc = {r.removed: r.auc for r in self.rounds}
        return pd.DataFrame({'rank': np.arange(1, len(self.ranking) + 1),
                             'feature': list(self.ranking),
                             'auc_after_removal': [auc.get(f, np.nan) for f in self.ranking]})


def _subset_auc(X: np.ndarray, labels: np.ndarray, columns: list[int],
                splits: list[tuple[np.ndarray, np.ndarray]], kernel: KernelSpec, C: float,
                positive: str) -> float:
    scores = []
    for train, test in splits:
        model = svm_train(X[np.ix_(train, columns)], labels[train], kernel, C)
        decision = svm_decision_values(model, X[np.ix_(test, columns)], positive)
        scores.append(roc_auc(decision, labels[test], positive))
    return float(np.mean(scores))


def wrapper_rank(X: ArrayLike, labels: typ.Sequence[str], feature_names: typ.Sequence[str],
                 classifier: typ.Optional[ClassifierConfig] = None, repeats: int = 5, frac: float = 0.75,
                 seed: int = 0) -> WrapperRanking:
    """
    Rank features by backward elimination with an SVM wrapper.

    Each round drops the feature whose removal leaves the highest mean ROC AUC
    over ``repeats`` stratified splits (the same splits in every round). The
    last surviving feature ranks first, the first one removed ranks last.

    Raises
    ------
    DatasetError
        for labels with more than two classes; binarize them first.
    """
    classifier = ClassifierConfig() if classifier is None else classifier
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = np.asarray(list(labels), dtype=object)
    names = list(feature_names)
    if X.shape[1] != len(names):
        raise WearClassError(f"{X.shape[1]} feature columns for {len(names)} names")
    if len(names) < 2:
        raise ValueError("ranking needs at least two features")
    classes = order_classes(labels)
    if len(classes) != 2:
        raise DatasetError(f"wrapper ranking needs two classes, got {classes}; binarize the labels first")
    positive = 'H' if 'H' in classes else classes[1]

    rng = make_rng(seed)
    splits = [_split_positions(labels, frac, rng) for _ in range(repeats)]
    kernel = KernelSpec(classifier.kernel, classifier.gamma)

    remaining = list(range(len(names)))
    rounds = []
    while len(remaining) > 1:
        best = None
        for column in remaining:
            kept = [c for c in remaining if c != column]
            auc = _subset_auc(X, labels, kept, splits, kernel, classifier.C, positive)
            if best is None or auc > best[1]:
                best = (column, auc)
        remaining.remove(best[0])
        rounds.append(RankingRound(removed=names[best[0]], auc=best[1],
                                   remaining=tuple(names[c] for c in remaining)))
        logger.info("removed %s, AUC without it %.4f", names[best[0]], best[1])

    ranking = [names[remaining[0]]] + [r.removed for r in reversed(rounds)]
    return WrapperRanking(ranking=tuple(ranking), rounds=tuple(rounds), seed=seed)
