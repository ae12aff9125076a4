"""
Kernel SVM (one-vs-one, histogram intersection kernel by default) with
calibrated class distributions, and k-NN voting over similarity rows.
"""
from __future__ import annotations

import logging
import typing as typ
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import minimize
from sklearn.metrics.pairwise import linear_kernel, rbf_kernel
from sklearn.model_selection import StratifiedKFold
from sklearn.preprocessing import MinMaxScaler
from sklearn.svm import SVC

from .dataset import WEAR_CLASSES
from .errors import DimensionMismatchError, SingleClassError

__all__ = ['KernelSpec', 'ClassDistribution', 'PairwiseSvm', 'SvmModel', 'intersection_kernel',
           'intersection_gram', 'svm_train', 'svm_predict', 'svm_predict_many', 'knn_classify',
           'svm_decision_values', 'order_classes', 'MODEL_FORMAT']

logger = logging.getLogger(__name__)

MODEL_FORMAT = 'wearclass-svm'
MODEL_VERSION = 1

_GRAM_CHUNK = 1 << 22
CALIBRATION_FOLDS = 5


def order_classes(labels: typ.Iterable[str]) -> list[str]:
    """
    Distinct labels, wear classes in L, M, H order first and other labels sorted after.
    """
    present = set(labels)
    known = [c for c in WEAR_CLASSES if c in present]
    return known + sorted(present.difference(known))


def intersection_kernel(u: ArrayLike, v: ArrayLike) -> float:
    """
    Histogram intersection ``sum_i min(u_i, v_i)``.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionMismatchError(f"descriptors of length {u.size} and {v.size}")
    return float(np.minimum(u, v).sum())


def intersection_gram(A: ArrayLike, B: ArrayLike) -> np.ndarray:
    """
    Intersection kernel between the rows of ``A`` and the rows of ``B``, computed
    in row blocks to bound the temporary memory.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(f"descriptors of length {A.shape[1]} and {B.shape[1]}")
    gram = np.empty((A.shape[0], B.shape[0]), dtype=np.float64)
    step = max(1, _GRAM_CHUNK // max(1, B.shape[0] * B.shape[1]))
    for start in range(0, A.shape[0], step):
        block = A[start:start + step, None, :]
        gram[start:start + step] = np.minimum(block, B[None, :, :]).sum(axis=2)
    return gram


@dataclass(frozen=True)
class KernelSpec:
    """
    ``kind`` is one of ``intersection``, ``linear`` or ``rbf``; ``gamma`` is only
    used by the rbf kernel.
    """
    kind: str = 'intersection'
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ('intersection', 'linear', 'rbf'):
            raise ValueError(f"unknown kernel {self.kind!r}")

    def gram(self, A: ArrayLike, B: ArrayLike) -> np.ndarray:
        if self.kind == 'intersection':
            return intersection_gram(A, B)
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        if A.shape[1] != B.shape[1]:
            raise DimensionMismatchError(f"descriptors of length {A.shape[1]} and {B.shape[1]}")
        if self.kind == 'linear':
            return linear_kernel(A, B)
        return rbf_kernel(A, B, gamma=self.gamma)


@dataclass(frozen=True, eq=False)
class ClassDistribution:
    """
    Probabilities over ``classes``, summing to one.
    """
    classes: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64).ravel()
        object.__setattr__(self, 'classes', tuple(self.classes))
        if probs.shape != (len(self.classes),):
            raise DimensionMismatchError(f"{probs.size} probabilities for {len(self.classes)} classes")
        if np.any(probs < 0) or np.any(probs > 1) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"not a probability distribution: {probs}")
        probs.flags.writeable = False
        object.__setattr__(self, 'probs', probs)

    def __getitem__(self, label: str) -> float:
        return float(self.probs[self.classes.index(label)])

    def __eq__(self, other: typ.Any) -> bool:
        if not isinstance(other, ClassDistribution):
            return NotImplemented
        return self.classes == other.classes and np.array_equal(self.probs, other.probs)

    @property
    def label(self) -> str:
        """Most probable class, the first one in class order on ties."""
        return self.classes[int(np.argmax(self.probs))]

    def as_dict(self) -> dict[str, float]:
        return {c: float(p) for c, p in zip(self.classes, self.probs)}


@dataclass(frozen=True, eq=False)
class PairwiseSvm:
    """
    Binary SVM between ``positive`` (decision > 0) and ``negative``. The decision
    value is ``K(x, support_vectors) @ dual_coefs + bias`` and its probability of
    ``positive`` is ``1 / (1 + exp(-(calib_a * decision + calib_b)))``.
    """
    positive: str
    negative: str
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    calib_a: float = 1.0
    calib_b: float = 0.0

    def decision(self, kernel: KernelSpec, X: np.ndarray) -> np.ndarray:
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        return kernel.gram(X, self.support_vectors) @ self.dual_coefs + self.bias

    def probability(self, decision: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-(self.calib_a * decision + self.calib_b)))

    def to_dict(self) -> dict[str, typ.Any]:
        return {
            'classes': [self.positive, self.negative],
            'support_vectors': self.support_vectors.tolist(),
            'dual_coefs': self.dual_coefs.tolist(),
            'bias': self.bias,
            'calibration': {'A': self.calib_a, 'B': self.calib_b},
        }

    @classmethod
    def from_dict(cls, data: typ.Mapping[str, typ.Any], n_features: int) -> PairwiseSvm:
        sv = np.asarray(data['support_vectors'], dtype=np.float64).reshape(-1, n_features)
        coefs = np.asarray(data['dual_coefs'], dtype=np.float64).ravel()
        if coefs.shape[0] != sv.shape[0]:
            raise ValueError(f"{coefs.shape[0]} dual coefficients for {sv.shape[0]} support vectors")
        positive, negative = data['classes']
        return cls(positive=positive, negative=negative, support_vectors=sv, dual_coefs=coefs,
                   bias=float(data['bias']), calib_a=float(data['calibration']['A']),
                   calib_b=float(data['calibration'].get('B', 0.0)))


@dataclass(frozen=True, eq=False)
class SvmModel:
    """
    A trained one-vs-one SVM. Input descriptors are min-max scaled with the
    training statistics (``x * scale + offset`` clipped to [0, 1]) before the
    kernel is evaluated; support vectors are stored scaled.
    """
    kernel: KernelSpec
    C: float
    classes: tuple[str, ...]
    scale: np.ndarray
    offset: np.ndarray
    pairs: tuple[PairwiseSvm, ...] = field(default_factory=tuple)

    @property
    def n_features(self) -> int:
        return int(self.scale.shape[0])

    def transform(self, X: ArrayLike) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return np.clip(X * self.scale + self.offset, 0.0, 1.0)

    def to_dict(self) -> dict[str, typ.Any]:
        return {
            'format': MODEL_FORMAT,
            'version': MODEL_VERSION,
            'kernel': {'kind': self.kernel.kind, 'gamma': self.kernel.gamma},
            'C': self.C,
            'classes': list(self.classes),
            'normalizer': {'kind': 'minmax', 'scale': self.scale.tolist(), 'offset': self.offset.tolist()},
            'pairs': [p.to_dict() for p in self.pairs],
        }

    @classmethod
    def from_dict(cls, data: typ.Mapping[str, typ.Any]) -> SvmModel:
        if data.get('format') != MODEL_FORMAT or data.get('version') != MODEL_VERSION:
            raise ValueError(f"not a version {MODEL_VERSION} {MODEL_FORMAT} document")
        scale = np.asarray(data['normalizer']['scale'], dtype=np.float64)
        offset = np.asarray(data['normalizer']['offset'], dtype=np.float64)
        return cls(kernel=KernelSpec(**data['kernel']),
                   C=float(data['C']),
                   classes=tuple(data['classes']),
                   scale=scale,
                   offset=offset,
                   pairs=tuple(PairwiseSvm.from_dict(p, scale.shape[0]) for p in data['pairs']))


def _fit_sigmoid(decision: np.ndarray, positive: np.ndarray) -> tuple[float, float]:
    """
    Slope ``A >= 0`` and offset ``B`` of ``1 / (1 + exp(-(A * decision + B)))``,
    fitted by maximum likelihood on Platt's smoothed targets.
    """
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    target = np.where(positive, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def loss(params: np.ndarray) -> float:
        z = params[0] * decision + params[1]
        return float(np.sum(target * np.logaddexp(0.0, -z) + (1.0 - target) * np.logaddexp(0.0, z)))

    start = np.array([1.0, np.log((n_pos + 1.0) / (n_neg + 1.0))])
    result = minimize(loss, start, method='L-BFGS-B', bounds=[(0.0, 1e3), (None, None)])
    return float(result.x[0]), float(result.x[1])


def _held_out_decision(gram: np.ndarray, target: np.ndarray, C: float) -> typ.Optional[np.ndarray]:
    """
    Decision value of every sample from an SVM trained on the other folds, or
    ``None`` when the smaller class has fewer than two samples.
    """
    folds = min(CALIBRATION_FOLDS, int(np.bincount(target, minlength=2).min()))
    if folds < 2:
        return None
    decision = np.empty(target.size, dtype=np.float64)
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=0)
    for train, test in splitter.split(np.zeros((target.size, 1)), target):
        svc = SVC(kernel='precomputed', C=C, tol=1e-3)
        svc.fit(gram[np.ix_(train, train)], target[train])
        support = train[svc.support_]
        decision[test] = gram[np.ix_(test, support)] @ svc.dual_coef_[0] + svc.intercept_[0]
    return decision


def svm_train(X: ArrayLike, y: typ.Sequence[str], kernel: typ.Optional[KernelSpec] = None,
              C: float = 1.0) -> SvmModel:
    """
    Train a one-vs-one SVM.

    Every class pair gets a binary SVM solved by libsvm's SMO on the precomputed
    Gram matrix of the min-max scaled training descriptors, and a sigmoid fitted
    on decision values held out by stratified ``CALIBRATION_FOLDS``-fold
    cross-validation. Pairs whose smaller class has a single sample are
    calibrated on their training decision values.

    Parameters
    ----------
    X
        training descriptors, one row per sample.
    y
        labels.
    kernel, optional
        the kernel, intersection by default.
    C, optional
        box constraint, 1.0 by default.
    """
    kernel = KernelSpec() if kernel is None else kernel
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(list(y), dtype=object)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} descriptors for {y.shape[0]} labels")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    classes = order_classes(y)
    if len(classes) < 2:
        raise SingleClassError(f"at least two classes are required, got {classes}")

    scaler = MinMaxScaler(clip=True).fit(X)
    Xs = scaler.transform(X)
    gram = kernel.gram(Xs, Xs)

    pairs = []
    for i, positive in enumerate(classes):
        for negative in classes[i + 1:]:
            rows = np.flatnonzero((y == positive) | (y == negative))
            target = (y[rows] == positive).astype(int)
            pair_gram = gram[np.ix_(rows, rows)]
            svc = SVC(kernel='precomputed', C=C, tol=1e-3)
            svc.fit(pair_gram, target)
            support = rows[svc.support_]
            coefs = svc.dual_coef_[0].astype(np.float64)
            bias = float(svc.intercept_[0])
            decision = _held_out_decision(pair_gram, target, C)
            if decision is None:
                decision = gram[np.ix_(rows, support)] @ coefs + bias
            calib_a, calib_b = _fit_sigmoid(decision, target.astype(bool))
            pairs.append(PairwiseSvm(positive=positive, negative=negative,
                                     support_vectors=Xs[support].copy(),
                                     dual_coefs=coefs, bias=bias, calib_a=calib_a, calib_b=calib_b))
            logger.debug("pair %s/%s: %d support vectors", positive, negative, support.size)

    return SvmModel(kernel=kernel, C=float(C), classes=tuple(classes),
                    scale=scaler.scale_.astype(np.float64), offset=scaler.min_.astype(np.float64),
                    pairs=tuple(pairs))


def _couple(r: np.ndarray) -> np.ndarray:
    """
    Class probabilities from pairwise probabilities ``r[i, j] = P(i | i or j)``
    by minimizing ``sum_ij (r[j, i] p_i - r[i, j] p_j)^2`` subject to ``sum p = 1``.
    """
    k = r.shape[0]
    Q = -r.T * r
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, (r.T ** 2).sum(axis=1) - np.diag(r) ** 2)
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = Q
    system[:k, k] = 1.0
    system[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    p = np.linalg.lstsq(system, rhs, rcond=None)[0][:k]
    p = np.clip(p, 0.0, None)
    total = p.sum()
    return p / total if total > 0 else np.full(k, 1.0 / k)


def svm_predict_many(model: SvmModel, X: ArrayLike) -> tuple[list[str], np.ndarray]:
    """
    Labels and class distributions (one row per sample, columns in
    ``model.classes`` order) for a batch of descriptors.

    The label is the one-vs-one vote winner, vote ties going to the class with
    the larger coupled probability and then to the first class. The coupled
    distribution is reconciled with the vote by swapping the probability of the
    voted class with the largest one when they differ.
    """
    Xs = model.transform(X)
    k = len(model.classes)
    index = {c: i for i, c in enumerate(model.classes)}
    votes = np.zeros((Xs.shape[0], k))
    pairwise = np.full((Xs.shape[0], k, k), 0.0)
    for pair in model.pairs:
        i, j = index[pair.positive], index[pair.negative]
        decision = pair.decision(model.kernel, Xs)
        prob = np.clip(pair.probability(decision), 1e-7, 1.0 - 1e-7)
        wins = decision >= 0
        votes[wins, i] += 1
        votes[~wins, j] += 1
        pairwise[:, i, j] = prob
        pairwise[:, j, i] = 1.0 - prob

    labels = []
    probs = np.empty((Xs.shape[0], k))
    for n in range(Xs.shape[0]):
        p = _couple(pairwise[n]) if k > 2 else np.array([pairwise[n, 0, 1], pairwise[n, 1, 0]])
        tied = np.flatnonzero(votes[n] == votes[n].max())
        winner = int(tied[np.argmax(p[tied])])
        top = int(np.argmax(p))
        if top != winner and p[top] > p[winner]:
            p[[top, winner]] = p[[winner, top]]
        probs[n] = p / p.sum()
        labels.append(model.classes[winner])
    return labels, probs


def svm_predict(model: SvmModel, x: ArrayLike) -> tuple[str, ClassDistribution]:
    """
    Predict the label and class distribution of one descriptor.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatchError(f"expected a single descriptor, got shape {x.shape}")
    labels, probs = svm_predict_many(model, x[None, :])
    return labels[0], ClassDistribution(model.classes, probs[0])


def knn_classify(sim_row: ArrayLike, labels: typ.Sequence[str], k: int) -> str:
    """
    Majority label among the ``k`` most similar labeled items.

    Equal similarities keep the item order. Vote ties go to the label with the
    larger summed similarity, then to the first label in class order.
    """
    sim_row = np.asarray(sim_row, dtype=np.float64).ravel()
    if sim_row.shape[0] != len(labels):
        raise DimensionMismatchError(f"{sim_row.shape[0]} similarities for {len(labels)} labels")
    if not 1 <= k <= len(labels):
        raise ValueError(f"k must be in [1, {len(labels)}], got {k}")
    top = np.argsort(-sim_row, kind='stable')[:k]
    counts: dict[str, int] = {}
    mass: dict[str, float] = {}
    for item in top:
        label = labels[item]
        counts[label] = counts.get(label, 0) + 1
        mass[label] = mass.get(label, 0.0) + float(sim_row[item])
    order = {c: i for i, c in enumerate(order_classes(counts))}
    return min(counts, key=lambda c: (-counts[c], -mass[c], order[c]))


def svm_decision_values(model: SvmModel, X: ArrayLike, positive: typ.Optional[str] = None) -> np.ndarray:
    """
    Signed decision values of a two-class model, larger meaning more likely
    ``positive`` (the second class by default).
    """
    if len(model.pairs) != 1:
        raise ValueError(f"decision values need a two-class model, got classes {model.classes}")
    pair = model.pairs[0]
    positive = model.classes[1] if positive is None else positive
    if positive not in (pair.positive, pair.negative):
        raise ValueError(f"{positive!r} is not a class of this model")
    decision = pair.decision(model.kernel, model.transform(X))
    return decision if positive == pair.positive else -decision
