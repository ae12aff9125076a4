"""
Descriptor fusion: early concatenation, co-transduction over two similarity
graphs and late averaging of class distributions.
"""
from __future__ import annotations

import logging
import math
import os
import typing as typ
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy.spatial.distance import cdist
from sklearn.metrics.pairwise import additive_chi2_kernel

from .classify import ClassDistribution, knn_classify
from .errors import DimensionMismatchError
from .imageio_utils import write_frame

__all__ = ['SimilarityMatrix', 'CotransState', 'Transduction', 'early_fuse', 'descriptor_distances',
           'median_scale', 'similarity_from_descriptors', 'graph_transduction', 'iterative_transduction',
           'cotransduce', 'cotransduction_classify', 'rounds_for', 'late_fuse', 'METRICS']

logger = logging.getLogger(__name__)

METRICS = ('l1', 'l2', 'chi2')


def early_fuse(d1: ArrayLike, d2: ArrayLike) -> np.ndarray:
    """
    Concatenate two descriptors, ``d1`` first.
    """
    d1 = np.asarray(d1, dtype=np.float64).ravel()
    d2 = np.asarray(d2, dtype=np.float64).ravel()
    if d1.size == 0 or d2.size == 0:
        raise ValueError("cannot fuse an empty descriptor")
    return np.concatenate([d1, d2])


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """
    Square table of nonnegative similarities over ``ids``, each item most similar
    to itself.
    """
    values: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        ids = tuple(str(i) for i in self.ids)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatchError(f"similarity matrices are square, got {values.shape}")
        if values.shape[0] != len(ids):
            raise DimensionMismatchError(f"{values.shape[0]} rows for {len(ids)} ids")
        if len(set(ids)) != len(ids):
            raise ValueError("similarity matrix ids must be unique")
        if np.any(values < 0):
            raise ValueError("similarities must be nonnegative")
        if values.size and np.any(np.diag(values) < values.max(axis=1)):
            raise ValueError("every item must be most similar to itself")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'ids', ids)

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, item: str) -> int:
        try:
            return self.ids.index(str(item))
        except ValueError:
            raise KeyError(f"unknown item {item!r}") from None

    def transition(self) -> np.ndarray:
        """
        Row-stochastic transition matrix. A row without mass becomes a self loop.
        """
        totals = self.values.sum(axis=1, keepdims=True)
        P = np.divide(self.values, totals, out=np.zeros_like(self.values), where=totals > 0)
        empty = np.flatnonzero(totals.ravel() == 0)
        P[empty, empty] = 1.0
        return P

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, index=list(self.ids), columns=list(self.ids))
        frame.index.name = 'id'
        return frame

    def to_csv(self, path: typ.Union[str, os.PathLike]) -> None:
        write_frame(path, self.to_frame())

    @classmethod
    def from_csv(cls, path: typ.Union[str, os.PathLike]) -> SimilarityMatrix:
        frame = pd.read_csv(path, comment='#', index_col=0, dtype={0: str})
        frame.index = frame.index.astype(str)
        if list(frame.index) != [str(c) for c in frame.columns]:
            raise ValueError(f"{os.fspath(path)}: row and column ids differ")
        return cls(frame.to_numpy(dtype=np.float64), tuple(frame.index))


def descriptor_distances(A: ArrayLike, B: ArrayLike, metric: str = 'l1') -> np.ndarray:
    """
    Pairwise distances between the rows of ``A`` and ``B``. ``chi2`` is the
    chi-squared distance ``sum (a - b)^2 / (a + b)`` for nonnegative inputs.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(f"descriptors of length {A.shape[1]} and {B.shape[1]}")
    if metric == 'l1':
        return cdist(A, B, 'cityblock')
    if metric == 'l2':
        return cdist(A, B, 'euclidean')
    if metric == 'chi2':
        return np.maximum(-additive_chi2_kernel(A, B), 0.0)
    raise ValueError(f"unknown metric {metric!r}, expected one of {', '.join(METRICS)}")


def median_scale(distances: np.ndarray) -> float:
    """
    Median of the off-diagonal distances of a square distance matrix, 1.0 when
    that median is zero.
    """
    n = distances.shape[0]
    upper = distances[np.triu_indices(n, k=1)]
    sigma = float(np.median(upper)) if upper.size else 0.0
    if sigma <= 0:
        logger.warning("degenerate similarity scale (all items identical), using 1.0")
        return 1.0
    return sigma


def similarity_from_descriptors(D: ArrayLike, metric: str = 'l1',
                                ids: typ.Optional[typ.Sequence[str]] = None,
                                sigma: typ.Optional[float] = None) -> SimilarityMatrix:
    """
    ``s_ij = exp(-dist(d_i, d_j) / sigma)``.

    Parameters
    ----------
    D
        descriptors, one row per item, at least two.
    metric, optional
        ``l1``, ``l2`` or ``chi2``.
    ids, optional
        item identifiers, the row numbers by default.
    sigma, optional
        distance scale. Defaults to the median pairwise distance of ``D``; pass
        the scale of a training set to keep test items out of it.
    """
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    if D.shape[0] < 2:
        raise ValueError("at least two items are required")
    distances = descriptor_distances(D, D, metric)
    distances = 0.5 * (distances + distances.T)
    np.fill_diagonal(distances, 0.0)
    if sigma is None:
        sigma = median_scale(distances)
    ids = tuple(str(i) for i in range(D.shape[0])) if ids is None else tuple(ids)
    return SimilarityMatrix(np.exp(-distances / sigma), ids)


class Transduction(typ.NamedTuple):
    """Scores of the non-query items, in item order."""
    items: np.ndarray
    scores: np.ndarray


def graph_transduction(P: ArrayLike, query_set: typ.Iterable[int], steps: int = 50) -> Transduction:
    """
    Propagate relevance from the query items through a transition matrix.

    ``f`` starts at 1 on ``query_set`` and 0 elsewhere and is updated ``steps``
    times by ``f <- P f``, the query items being clamped back to 1 after every
    update.
    """
    P = np.asarray(P, dtype=np.float64)
    query = np.unique(np.fromiter(query_set, dtype=np.int64))
    if query.size == 0:
        raise ValueError("the query set is empty")
    f = np.zeros(P.shape[0])
    f[query] = 1.0
    for _ in range(steps):
        f = P @ f
        f[query] = 1.0
    items = np.setdiff1d(np.arange(P.shape[0]), query)
    return Transduction(items=items, scores=f[items])


def _top(f: Transduction, allowed: typ.Container[int], p: int) -> list[tuple[int, float]]:
    # stable: equal scores keep item order
    order = np.argsort(-f.scores, kind='stable')
    picked = []
    for position in order:
        item = int(f.items[position])
        if item in allowed:
            picked.append((item, float(f.scores[position])))
            if len(picked) == p:
                break
    return picked


@dataclass
class CotransState:
    """
    Pools of one co-transduction run over item indices.

    ``Y1``/``Y2`` are the query pools of the first and second graph, ``X1``/``X2``
    the items still unlabeled for each of them.
    """
    query: int
    p: int
    m: int
    Y1: list[int] = field(default_factory=list)
    Y2: list[int] = field(default_factory=list)
    X1: set[int] = field(default_factory=set)
    X2: set[int] = field(default_factory=set)
    j: int = 0
    retrieved: list[tuple[int, float, int]] = field(default_factory=list)

    @classmethod
    def start(cls, n: int, query: int, p: int, m: int) -> CotransState:
        others = set(range(n)) - {query}
        return cls(query=query, p=p, m=m, Y1=[query], Y2=[query], X1=set(others), X2=set(others))

    def check(self) -> None:
        assert not self.X1.intersection(self.Y1) and not self.X2.intersection(self.Y2)
        assert len(self.Y1) <= 1 + self.j * self.p and len(self.Y2) <= 1 + self.j * self.p

    def ranking(self) -> list[int]:
        """Retrieved items by round, then by decreasing score, without repeats."""
        seen = set()
        ranked = []
        for _, _, item in sorted(self.retrieved, key=lambda r: (r[0], -r[1], r[2])):
            if item not in seen:
                seen.add(item)
                ranked.append(item)
        return ranked


def _cotransduce(P1: np.ndarray, P2: np.ndarray, query: int, p: int, m: int, steps: int) -> CotransState:
    state = CotransState.start(P1.shape[0], query, p, m)
    for j in range(1, m + 1):
        if not state.X1 and not state.X2:
            break
        state.j = j
        f1 = graph_transduction(P1, state.Y1, steps)
        f2 = graph_transduction(P2, state.Y2, steps)
        to_y2 = _top(f1, state.X2, p)
        to_y1 = _top(f2, state.X1, p)
        for item, score in to_y2:
            state.Y2.append(item)
            state.X2.discard(item)
            state.retrieved.append((j, score, item))
        for item, score in to_y1:
            state.Y1.append(item)
            state.X1.discard(item)
            state.retrieved.append((j, score, item))
        state.check()
    return state


def cotransduce(S1: SimilarityMatrix, S2: SimilarityMatrix, query: str, p: int = 3, m: int = 3,
                steps: int = 50) -> list[str]:
    """
    Rank database items for ``query`` by co-transduction over two similarity
    matrices.

    Every round transduces on both graphs from their current pools. The top
    ``p`` items of the first graph not yet pooled by the second are added to the
    second pool, and symmetrically. The run stops after ``m`` rounds or when both
    graphs are out of unlabeled items.

    Returns
    -------
        the pooled items except the query, by round and then by transduction
        score.
    """
    if S1.ids != S2.ids:
        raise DimensionMismatchError("both similarity matrices must cover the same items in the same order")
    if p < 1 or m < 1:
        raise ValueError(f"p and m must be >= 1, got p={p}, m={m}")
    state = _cotransduce(S1.transition(), S2.transition(), S1.index(query), p, m, steps)
    return [S1.ids[i] for i in state.ranking()]


def iterative_transduction(S: SimilarityMatrix, query: str, p: int = 3, m: int = 3,
                           steps: int = 50) -> list[str]:
    """
    Single-graph ranking: the query pool grows by the top ``p`` transduced items
    per round. Co-transduction with two equal matrices reduces to this.
    """
    P = S.transition()
    q = S.index(query)
    pool = [q]
    ranked = []
    for _ in range(m):
        picked = _top(graph_transduction(P, pool, steps), set(range(len(S))) - set(pool), p)
        if not picked:
            break
        for item, _ in picked:
            pool.append(item)
            ranked.append(item)
    return [S.ids[i] for i in ranked]


def cotransduction_classify(S1: SimilarityMatrix, S2: SimilarityMatrix, query: str,
                            labels: typ.Mapping[str, str], p: int = 3, m: int = 3, k: int = 3,
                            steps: int = 50) -> str:
    """
    Majority label of the top ``k`` co-transduction neighbors of ``query``.

    ``labels`` maps the database items (the query excluded) to their labels.
    Neighbors are weighted by rank for tie breaking.
    """
    ranking = cotransduce(S1, S2, query, p, m, steps)
    if k > len(ranking):
        raise ValueError(f"k={k} exceeds the {len(ranking)} retrieved items; raise m or p")
    top = ranking[:k]
    sims = [1.0 / (rank + 1) for rank in range(len(top))]
    return knn_classify(sims, [labels[i] for i in top], k)


def rounds_for(k: int, p: int, m: int) -> int:
    """Rounds needed so that at least ``k`` items get retrieved."""
    return max(m, math.ceil(k / p))


def late_fuse(p_shape: ClassDistribution, p_contour: ClassDistribution) -> ClassDistribution:
    """
    Average two class distributions over the same classes.
    """
    if set(p_shape.classes) != set(p_contour.classes) or len(p_shape.classes) != len(p_contour.classes):
        raise ValueError(f"class sets differ: {p_shape.classes} vs {p_contour.classes}")
    other = np.array([p_contour[c] for c in p_shape.classes])
    return ClassDistribution(p_shape.classes, (p_shape.probs + other) / 2.0)
