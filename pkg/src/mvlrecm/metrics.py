"""Scoring hard, fuzzy and credal partitions against ground truth.

A solution assigns each object a subset of the clusters, encoded as a
bitmask (see :mod:`mvlrecm.powerset`). Hard and hardened fuzzy partitions
are the special case where every subset is a singleton; use
:func:`labels_to_subsets` to convert 1-based labels.

Accuracy counts an object as correct when its (relabelled) subset contains
the true label. Pair counts follow the credal extension of the pair
confusion matrix:

====  ============  =========================================
TP    same truth    subsets intersect
FN    same truth    subsets are disjoint
FP    other truth   both subsets are the same singleton
TN    other truth   otherwise (including any empty subset)
====  ============  =========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "LabeledSolution",
    "PairConfusion",
    "MetricsReport",
    "METRIC_NAMES",
    "labels_to_subsets",
    "credal_accuracy",
    "best_mapping",
    "apply_mapping",
    "exhaustive_accuracy",
    "pair_confusion",
    "precision_recall_f_ri",
    "imprecision_rate",
    "nmi_purity",
    "evaluate",
]

METRIC_NAMES = ("acc", "nmi", "purity", "f_score", "precision", "recall", "ri", "ir")


def labels_to_subsets(labels) -> np.ndarray:
    """1-based hard labels to singleton bitmasks."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and labels.min() < 1:
        raise ValueError("labels are 1-based")
    return np.left_shift(1, labels - 1).astype(np.int64)


def _popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    out = np.zeros(a.shape, dtype=np.int64)
    while np.any(a):
        out += a & 1
        a = a >> 1
    return out


@dataclass(frozen=True)
class LabeledSolution:
    """Ground truth (1-based labels) paired with a solution (subset bitmasks)."""

    ground_truth: np.ndarray
    solution: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.ground_truth, dtype=np.int64)
        s = np.asarray(self.solution, dtype=np.int64)
        if g.ndim != 1 or g.shape != s.shape:
            raise ValueError(f"ground truth and solution lengths differ: {g.shape} vs {s.shape}")
        if g.size and g.min() < 1:
            raise ValueError("ground-truth labels are 1-based")
        if s.size and s.min() < 0:
            raise ValueError("solution subsets must be non-negative bitmasks")
        object.__setattr__(self, "ground_truth", g)
        object.__setattr__(self, "solution", s)

    @classmethod
    def from_labels(cls, ground_truth, predicted) -> "LabeledSolution":
        """Hard partition given as 1-based predicted labels."""
        return cls(ground_truth, labels_to_subsets(predicted))

    @property
    def n(self) -> int:
        return int(self.ground_truth.size)

    def n_clusters(self, hint: int | None = None) -> int:
        c = int(self.ground_truth.max()) if self.n else 1
        if self.n and self.solution.max() > 0:
            c = max(c, int(self.solution.max()).bit_length())
        return max(c, hint or 0)


@dataclass(frozen=True)
class PairConfusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    nmi: float
    purity: float
    f_score: float
    precision: float
    recall: float
    ri: float
    ir: float

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in METRIC_NAMES}


# ---------------------------------------------------------------------------
# accuracy


def _as_solution(sol, solution=None) -> LabeledSolution:
    if isinstance(sol, LabeledSolution):
        return sol
    return LabeledSolution(sol, solution)


def _overlap_counts(sol: LabeledSolution, C: int) -> np.ndarray:
    """``W[s, g]``: objects with true label ``g`` whose subset contains cluster ``s``."""
    W = np.zeros((C, C), dtype=np.int64)
    for s in range(C):
        inside = (sol.solution >> s) & 1 == 1
        W[s] = np.bincount(sol.ground_truth[inside] - 1, minlength=C)[:C]
    return W


def best_mapping(sol: LabeledSolution, n_clusters: int | None = None) -> np.ndarray:
    """Relabelling of solution clusters that maximizes credal accuracy.

    An object is correct under a permutation ``pi`` when some member ``s``
    of its subset has ``pi(s)`` equal to its label. Since ``pi`` is
    one-to-one at most one member can match, so the number of correct
    objects is ``sum_s W[s, pi(s)]`` and the best ``pi`` is a linear
    assignment on ``W``.

    Returns
    -------
    mapping : (C,) int array
        ``mapping[s]`` is the 0-based true label given to solution cluster ``s``.
    """
    C = sol.n_clusters(n_clusters)
    W = _overlap_counts(sol, C)
    rows, cols = linear_sum_assignment(W, maximize=True)
    mapping = np.empty(C, dtype=np.int64)
    mapping[rows] = cols
    return mapping


def apply_mapping(subsets, mapping) -> np.ndarray:
    """Relabel each subset's members through ``mapping``."""
    subsets = np.asarray(subsets, dtype=np.int64)
    out = np.zeros_like(subsets)
    for s, t in enumerate(mapping):
        out |= ((subsets >> s) & 1) << int(t)
    return out


def _accuracy_under(sol: LabeledSolution, mapping) -> float:
    if sol.n == 0:
        return 0.0
    mapped = apply_mapping(sol.solution, mapping)
    hit = (mapped >> (sol.ground_truth - 1)) & 1
    return float(hit.mean())


def credal_accuracy(sol, solution=None, n_clusters: int | None = None, mapping=None) -> float:
    """Fraction of objects whose relabelled subset contains the true label.

    Accepts a :class:`LabeledSolution` or ``(ground_truth, solution)``.
    ``mapping`` fixes the relabelling instead of optimizing it.
    """
    sol = _as_solution(sol, solution)
    if mapping is None:
        mapping = best_mapping(sol, n_clusters)
    return _accuracy_under(sol, mapping)


def exhaustive_accuracy(sol, solution=None, n_clusters: int | None = None) -> float:
    """Credal accuracy maximized by trying every permutation. For small ``C`` only."""
    sol = _as_solution(sol, solution)
    C = sol.n_clusters(n_clusters)
    return max(_accuracy_under(sol, p) for p in permutations(range(C)))


# ---------------------------------------------------------------------------
# pair counting


def pair_confusion(sol, solution=None) -> PairConfusion:
    """Credal pair confusion counts over all unordered object pairs."""
    sol = _as_solution(sol, solution)
    g_vals, g = np.unique(sol.ground_truth, return_inverse=True)
    s_vals, s = np.unique(sol.solution, return_inverse=True)
    cnt = np.zeros((g_vals.size, s_vals.size), dtype=np.int64)
    np.add.at(cnt, (g, s), 1)

    n = sol.n
    n_g = cnt.sum(axis=1)
    same_pairs = int(np.sum(n_g * (n_g - 1) // 2))
    diff_pairs = n * (n - 1) // 2 - same_pairs

    meets = (s_vals[:, None] & s_vals[None, :]) != 0
    # ordered pairs of same-truth objects with intersecting subsets, minus self-pairs
    tp2 = np.einsum("gs,st,gt->", cnt, meets.astype(np.int64), cnt) - int(np.sum(cnt[:, meets.diagonal()]))
    tp = int(tp2 // 2)

    singleton = _popcount(s_vals) == 1
    col = cnt[:, singleton]
    fp = int(np.sum(col.sum(axis=0) * (col.sum(axis=0) - 1) // 2) - np.sum(col * (col - 1) // 2))
    return PairConfusion(tp=tp, fp=fp, tn=diff_pairs - fp, fn=same_pairs - tp)


def precision_recall_f_ri(pc: PairConfusion) -> tuple[float, float, float, float]:
    """Precision, recall, F-score and Rand index; 0/0 counts as 0."""
    if pc.total == 0:
        raise ValueError("pair-based scores need at least two objects")
    precision = pc.tp / (pc.tp + pc.fp) if pc.tp + pc.fp else 0.0
    recall = pc.tp / (pc.tp + pc.fn) if pc.tp + pc.fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    ri = (pc.tp + pc.tn) / pc.total
    return precision, recall, f, ri


# ---------------------------------------------------------------------------
# other scores


def imprecision_rate(sol, solution=None) -> float:
    """Fraction of objects assigned to a subset of two or more clusters."""
    sol = _as_solution(sol, solution)
    if sol.n == 0:
        return 0.0
    return float(np.mean(_popcount(sol.solution) >= 2))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi_purity(sol, solution=None) -> tuple[float, float]:
    """NMI (geometric normalization) and purity.

    Each distinct subset, meta-clusters and the empty set included, is
    treated as its own cluster. NMI is 0 when either side has a single
    group.
    """
    sol = _as_solution(sol, solution)
    if sol.n == 0:
        return 0.0, 0.0
    _, g = np.unique(sol.ground_truth, return_inverse=True)
    _, s = np.unique(sol.solution, return_inverse=True)
    cont = np.zeros((g.max() + 1, s.max() + 1))
    np.add.at(cont, (g, s), 1)
    purity = float(cont.max(axis=0).sum() / sol.n)

    h_g = _entropy(cont.sum(axis=1))
    h_s = _entropy(cont.sum(axis=0))
    if h_g == 0 or h_s == 0:
        return 0.0, purity
    pij = cont / sol.n
    outer = pij.sum(axis=1, keepdims=True) @ pij.sum(axis=0, keepdims=True)
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    nmi = mi / math.sqrt(h_g * h_s)
    return min(max(nmi, 0.0), 1.0), purity


def evaluate(ground_truth, solution, n_clusters: int | None = None) -> MetricsReport:
    """All eight scores for one solution."""
    sol = LabeledSolution(ground_truth, solution)
    precision, recall, f, ri = precision_recall_f_ri(pair_confusion(sol))
    nmi, purity = nmi_purity(sol)
    return MetricsReport(
        acc=credal_accuracy(sol, n_clusters=n_clusters),
        nmi=nmi,
        purity=purity,
        f_score=f,
        precision=precision,
        recall=recall,
        ri=ri,
        ir=imprecision_rate(sol),
    )
