"""Focal elements over a finite frame of discernment.

A subset of the frame ``{a_1, ..., a_C}`` is encoded as an integer bitmask:
bit ``k`` is set when ``a_{k+1}`` belongs to the subset. Index 0 is the
empty set and index ``2**C - 1`` is the whole frame. Mass vectors and
mass matrices throughout the package use this column order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Frame",
    "FocalElement",
    "enumerate_nonempty",
    "meta_center",
    "meta_centers",
    "format_subset",
    "parse_subset",
    "cardinality",
]


def cardinality(index: int) -> int:
    """Number of singletons in the subset encoded by ``index``."""
    return int(index).bit_count()


def format_subset(index: int) -> str:
    """Render a subset as a brace list of 1-based labels, e.g. ``"{1,3}"``."""
    members = [str(k + 1) for k in range(int(index).bit_length()) if index >> k & 1]
    return "{" + ",".join(members) + "}"


def parse_subset(text: str) -> int:
    """Inverse of :func:`format_subset`.

    Accepts ``"{1,3}"``, ``"{}"`` and bare integers such as ``"2"`` (read as the
    singleton ``{2}``, which is how hard partitions are usually written).
    """
    s = text.strip()
    if s.startswith("{") and s.endswith("}"):
        body = s[1:-1].strip()
        if not body:
            return 0
        labels = [int(tok) for tok in body.split(",")]
    else:
        labels = [int(s)]
    index = 0
    for lab in labels:
        if lab < 1:
            raise ValueError(f"labels are 1-based, got {lab} in {text!r}")
        index |= 1 << (lab - 1)
    return index


@dataclass(frozen=True)
class FocalElement:
    index: int
    cardinality: int

    @classmethod
    def from_index(cls, index: int) -> "FocalElement":
        return cls(int(index), cardinality(index))

    @property
    def members(self) -> tuple[int, ...]:
        """0-based singleton positions contained in this subset."""
        return tuple(k for k in range(self.index.bit_length()) if self.index >> k & 1)

    @property
    def is_empty(self) -> bool:
        return self.index == 0

    def __contains__(self, k: int) -> bool:
        return bool(self.index >> k & 1)

    def __str__(self) -> str:
        return format_subset(self.index)


@dataclass(frozen=True)
class Frame:
    """Frame of discernment with ``n_clusters`` singletons.

    ``max_clusters`` guards against accidental exponential blow-up of the
    power set; raise it explicitly when more clusters are really wanted.
    """

    n_clusters: int
    max_clusters: int = 16

    def __post_init__(self):
        if int(self.n_clusters) != self.n_clusters or self.n_clusters < 1:
            raise ValueError(f"n_clusters must be a positive integer, got {self.n_clusters!r}")
        if self.n_clusters > self.max_clusters:
            raise ValueError(
                f"n_clusters={self.n_clusters} exceeds the limit of {self.max_clusters} "
                f"(the power set would have 2**{self.n_clusters} elements)"
            )

    @property
    def n_focal(self) -> int:
        return 1 << self.n_clusters

    @property
    def full(self) -> int:
        """Index of the whole frame."""
        return self.n_focal - 1

    def cardinalities(self) -> np.ndarray:
        """Cardinality of every subset, indexed 0..F-1 (entry 0 is 0)."""
        return np.array([cardinality(j) for j in range(self.n_focal)], dtype=np.int64)

    def membership(self) -> np.ndarray:
        """Indicator matrix of shape (F, C); row ``j`` is 1 where ``a_k`` is in ``A_j``."""
        j = np.arange(self.n_focal)[:, None]
        k = np.arange(self.n_clusters)[None, :]
        return ((j >> k) & 1).astype(float)

    def singletons(self) -> np.ndarray:
        return 1 << np.arange(self.n_clusters)


def enumerate_nonempty(frame: Frame) -> list[FocalElement]:
    """All nonempty focal elements in ascending index order."""
    return [FocalElement.from_index(j) for j in range(1, frame.n_focal)]


def meta_center(element: FocalElement | int, centers) -> np.ndarray:
    """Mean of the singleton centers belonging to ``element``.

    Parameters
    ----------
    element : FocalElement or int
        Nonempty subset.
    centers : array_like, shape (C, D)
        Singleton cluster centers, one per row.

    Raises
    ------
    ValueError
        If ``element`` is the empty set or refers to clusters beyond ``C``.
    """
    if not isinstance(element, FocalElement):
        element = FocalElement.from_index(element)
    V = np.asarray(centers, dtype=float)
    if element.is_empty:
        raise ValueError("the empty set has no center")
    if element.index >= 1 << V.shape[0]:
        raise ValueError(f"subset {element} refers to clusters beyond the {V.shape[0]} centers given")
    return V[list(element.members)].mean(axis=0)


def meta_centers(frame: Frame, centers) -> np.ndarray:
    """Centers of all nonempty subsets, shape (F-1, D), row ``j-1`` for index ``j``."""
    V = np.asarray(centers, dtype=float)
    S = frame.membership()[1:]
    return (S @ V) / S.sum(axis=1, keepdims=True)
