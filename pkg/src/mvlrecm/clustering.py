"""Multi-view evidential c-means with low-rank mass fusion (MvLRECM).

Every object receives, in every view, a mass of belief over all subsets of
the ``C`` clusters. Masses live in arrays of shape (N, F) with ``F = 2**C``;
column 0 is the empty set (noise) and column ``j`` is the subset whose
bitmask is ``j`` (see :mod:`mvlrecm.powerset`).

The optimizer cycles through four blocks:

1. centers ``V`` from a C x C linear system per view,
2. view weights ``w`` from an entropy-regularized softmax of view costs,
3. masses ``M`` in closed form, pulled towards the low-rank targets ``Z``,
4. targets ``Z`` by singular value thresholding of each object's F x Q
   mass matrix, after which ``M`` is reset to the column-normalized ``Z``.

With a single view and ``theta = 0`` the procedure is plain evidential
c-means (ECM); :func:`ecm_fit` is that parameterization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .lowrank import svt_batch
from .powerset import Frame, meta_centers

__all__ = [
    "MvlrecmParams",
    "MultiViewDataset",
    "CredalState",
    "CredalPartition",
    "init_state",
    "distances",
    "center_system",
    "update_centers",
    "view_costs",
    "update_weights",
    "entropy_weights",
    "update_masses",
    "update_lowrank",
    "objective",
    "unify",
    "decide",
    "fit",
    "ecm_fit",
    "ecm_average",
]

log = logging.getLogger(__name__)

DIST_FLOOR = 1e-9
_DENOM_FLOOR = 1e-300
_TIE_ATOL = 1e-12


@dataclass(frozen=True)
class MvlrecmParams:
    """Hyper-parameters of the optimizer.

    ``rho=None`` means ``2 ** (-C / 2)``, resolved once per fit. The mass
    fuzzifier is fixed at 2 and is not a parameter.
    """

    alpha: float = 2.0
    delta: float = 20.0
    theta: float = 10.0
    eta: float = 10.0
    rho: Optional[float] = None
    max_iter: int = 100
    tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        problems = []
        if not self.alpha >= 0:
            problems.append(f"alpha must be >= 0 (got {self.alpha})")
        if not self.delta > 0:
            problems.append(f"delta must be > 0 (got {self.delta})")
        if not self.theta >= 0:
            problems.append(f"theta must be >= 0 (got {self.theta})")
        if not self.eta > 0:
            problems.append(f"eta must be > 0 (got {self.eta})")
        if self.rho is not None and not self.rho >= 0:
            problems.append(f"rho must be >= 0 (got {self.rho})")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            problems.append(f"max_iter must be a positive integer (got {self.max_iter})")
        if not self.tol > 0:
            problems.append(f"tol must be > 0 (got {self.tol})")
        if problems:
            raise ValueError("; ".join(problems))

    def resolve_rho(self, n_clusters: int) -> float:
        return 2.0 ** (-n_clusters / 2) if self.rho is None else float(self.rho)

    def resolved(self, n_clusters: int) -> "MvlrecmParams":
        return replace(self, rho=self.resolve_rho(n_clusters))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "delta": self.delta,
            "theta": self.theta,
            "eta": self.eta,
            "rho": self.rho,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass
class MultiViewDataset:
    """Row-aligned views of the same ``N`` objects.

    ``labels`` holds optional 1-based ground-truth cluster labels.
    """

    views: list
    labels: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if len(self.views) == 0:
            raise ValueError("a dataset needs at least one view")
        views = []
        for q, X in enumerate(self.views):
            X = np.asarray(X, dtype=float)
            if X.ndim == 1:
                X = X[:, None]
            if X.ndim != 2 or X.shape[1] < 1:
                raise ValueError(f"view {q} must be a 2-D array with at least one column, got shape {X.shape}")
            if X.shape[0] == 0:
                raise ValueError(f"view {q} is empty")
            if not np.all(np.isfinite(X)):
                raise ValueError(f"view {q} has non-finite entries")
            views.append(X)
        rows = {X.shape[0] for X in views}
        if len(rows) != 1:
            raise ValueError(f"views disagree on the number of objects: {[X.shape[0] for X in views]}")
        self.views = views
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (self.n_objects,):
                raise ValueError(f"expected {self.n_objects} labels, got shape {labels.shape}")
            if labels.size and labels.min() < 1:
                raise ValueError("labels are 1-based")
            self.labels = labels.astype(np.int64)

    @property
    def n_objects(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(X.shape[1] for X in self.views)

    @property
    def n_classes(self) -> Optional[int]:
        return None if self.labels is None else int(self.labels.max())


@dataclass
class CredalState:
    """Optimizer variables.

    M : list of (N, F) arrays, one per view.
    V : list of (C, D_q) arrays, one per view.
    w : (Q,) view weights.
    Z : (N, F, Q) low-rank targets; ``Z[i]`` is object ``i``'s stacked masses.
    J : objective value for the current variables.
    """

    M: list
    V: list
    w: np.ndarray
    Z: np.ndarray
    J: float = math.nan

    def mass_stack(self) -> np.ndarray:
        """Masses as one (N, F, Q) array."""
        return np.stack(self.M, axis=-1)

    def copy(self) -> "CredalState":
        return CredalState(
            [m.copy() for m in self.M], [v.copy() for v in self.V], self.w.copy(), self.Z.copy(), self.J
        )


@dataclass
class CredalPartition:
    unified_mass: np.ndarray
    decision: np.ndarray
    params_used: MvlrecmParams
    iterations: int
    converged: bool
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective_history: list = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return self.unified_mass.shape[1].bit_length() - 1


def _frame_of(state: CredalState) -> Frame:
    return Frame(state.M[0].shape[1].bit_length() - 1)


# ---------------------------------------------------------------------------
# initialization


def init_state(data: MultiViewDataset, n_clusters: int, params: MvlrecmParams) -> CredalState:
    """Random objects as centers, uniform weights, uniform nonempty masses.

    The same ``C`` object indices seed the centers of every view.
    """
    frame = Frame(n_clusters)
    N, Q, F = data.n_objects, data.n_views, frame.n_focal
    if N < n_clusters:
        raise ValueError(f"cannot pick {n_clusters} distinct centers from {N} objects")
    rng = np.random.default_rng(params.seed)
    idx = np.sort(rng.choice(N, size=n_clusters, replace=False))
    V = [X[idx].copy() for X in data.views]
    w = np.full(Q, 1.0 / Q)
    m0 = np.full((N, F), 1.0 / (F - 1))
    m0[:, 0] = 0.0
    M = [m0.copy() for _ in range(Q)]
    Z = np.stack(M, axis=-1)
    return CredalState(M, V, w, Z)


# ---------------------------------------------------------------------------
# geometry


def _sqdist(X: np.ndarray, V: np.ndarray, frame: Frame) -> np.ndarray:
    Vbar = meta_centers(frame, V)
    d2 = (X * X).sum(1)[:, None] - 2.0 * X @ Vbar.T + (Vbar * Vbar).sum(1)[None, :]
    # cancellation can leave tiny negatives
    return np.maximum(d2, 0.0)


def distances(data: MultiViewDataset, state: CredalState, n_clusters: int) -> list:
    """Euclidean distance of each object to each nonempty subset center.

    Returns one (N, F-1) array per view; column ``j-1`` is subset ``j``.
    """
    frame = Frame(n_clusters)
    return [np.sqrt(_sqdist(X, V, frame)) for X, V in zip(data.views, state.V)]


def _floored_sqdist(X, V, frame):
    return np.maximum(_sqdist(X, V, frame), DIST_FLOOR**2)


# ---------------------------------------------------------------------------
# block updates


def center_system(M: np.ndarray, X: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Normal equations ``H V = B`` for one view's centers.

    Parameters
    ----------
    M : (N, F) masses of the view.
    X : (N, D) data of the view.
    alpha : cardinality penalty exponent.

    Returns
    -------
    H : (C, C) array
    B : (C, D) array
    """
    F = M.shape[1]
    frame = Frame(F.bit_length() - 1)
    S = frame.membership()[1:]
    card = S.sum(axis=1)
    u = M[:, 1:] ** 2
    B = (u @ (S * card[:, None] ** (alpha - 1))).T @ X
    H = S.T @ ((u.sum(axis=0) * card ** (alpha - 2))[:, None] * S)
    return H, B


def _solve_centers(H: np.ndarray, B: np.ndarray) -> np.ndarray:
    C = H.shape[0]
    singular = not np.all(np.isfinite(H)) or np.linalg.cond(H) > 1e12
    if not singular:
        try:
            return np.linalg.solve(H, B)
        except np.linalg.LinAlgError:
            pass
    ridge = 1e-10 * (1.0 + np.trace(H) / C)
    log.debug("center system is singular, adding ridge %.3g", ridge)
    return np.linalg.solve(H + ridge * np.eye(C), B)


def update_centers(state: CredalState, data: MultiViewDataset, params: MvlrecmParams) -> list:
    """New centers for every view, each the solution of its normal equations."""
    return [_solve_centers(*center_system(M, X, params.alpha)) for M, X in zip(state.M, data.views)]


def view_costs(state: CredalState, data: MultiViewDataset, params: MvlrecmParams) -> np.ndarray:
    """Per-view evidential clustering cost (the bracketed term of the objective)."""
    frame = _frame_of(state)
    cpen = frame.cardinalities()[1:].astype(float) ** params.alpha
    psi = np.empty(data.n_views)
    for q, (X, V, M) in enumerate(zip(data.views, state.V, state.M)):
        d2 = _floored_sqdist(X, V, frame)
        psi[q] = np.sum(cpen * M[:, 1:] ** 2 * d2) + params.delta**2 * np.sum(M[:, 0] ** 2)
    return psi


def update_weights(state: CredalState, data: MultiViewDataset, params: MvlrecmParams) -> np.ndarray:
    """Entropy-regularized view weights, ``w ∝ exp(-Psi_q / eta)``.

    Computed as a shifted softmax so that large cost ratios do not
    overflow; the constant ``exp(-1)`` factor cancels on normalization.
    """
    return entropy_weights(view_costs(state, data, params), params.eta)


def entropy_weights(costs, eta: float) -> np.ndarray:
    """Minimizer of ``sum w_q costs_q + eta * sum w_q ln w_q`` over the simplex."""
    z = -np.asarray(costs, dtype=float) / eta
    e = np.exp(z - z.max())
    return e / e.sum()


def _project_rows(M: np.ndarray) -> np.ndarray:
    """Clamp negatives and renormalize each row to sum 1."""
    M = np.maximum(M, 0.0)
    s = M.sum(axis=1, keepdims=True)
    bad = s[:, 0] <= 0
    if np.any(bad):
        M[bad] = 0.0
        M[bad, 1:] = 1.0 / (M.shape[1] - 1)
        s[bad] = 1.0
    return M / s


def update_masses(state: CredalState, data: MultiViewDataset, params: MvlrecmParams) -> list:
    """Closed-form mass allocation for every view.

    For each object the masses minimize the view's weighted clustering cost
    plus ``theta * ||m - z||^2`` on the simplex's affine hull. Entries that
    come out negative are clamped to zero and the row renormalized.
    """
    frame = _frame_of(state)
    cpen = frame.cardinalities()[1:].astype(float) ** params.alpha
    theta = params.theta
    out = []
    for q, (X, V) in enumerate(zip(data.views, state.V)):
        wq = state.w[q]
        d2 = _floored_sqdist(X, V, frame)
        a = np.empty((X.shape[0], frame.n_focal))
        a[:, 1:] = wq * cpen * d2 + theta
        a[:, 0] = wq * params.delta**2 + theta
        a = np.maximum(a, _DENOM_FLOOR)
        inv = 1.0 / a
        if theta > 0:
            z = state.Z[:, :, q]
            gap = (1.0 - theta * np.sum(z * inv, axis=1)) / np.sum(inv, axis=1)
            m = (gap[:, None] + theta * z) * inv
        else:
            m = inv / np.sum(inv, axis=1, keepdims=True)
        m[:, 0] = 1.0 - m[:, 1:].sum(axis=1)
        out.append(_project_rows(m))
    return out


def _normalize_columns(Z: np.ndarray) -> np.ndarray:
    """Clamp (N, F, Q) stack at zero and make each (object, view) column sum 1."""
    Z = np.maximum(Z, 0.0)
    s = Z.sum(axis=1, keepdims=True)
    empty = s[:, 0, :] <= 0
    if np.any(empty):
        F = Z.shape[1]
        uniform = np.full(F, 1.0 / (F - 1))
        uniform[0] = 0.0
        i, q = np.nonzero(empty)
        Z[i, :, q] = uniform
        s[i, 0, q] = 1.0
    return Z / s


def update_lowrank(state: CredalState, params: MvlrecmParams) -> tuple[np.ndarray, list]:
    """Low-rank targets and the renormalized masses.

    Each object's F x Q mass matrix is shrunk by singular value
    thresholding at ``rho / 2``; the result is clamped at zero and every
    view column rescaled to a mass function. The normalized matrix replaces
    both ``Z`` and ``M``.

    Returns
    -------
    Z : (N, F, Q) array
    M : list of (N, F) arrays
    """
    frame = _frame_of(state)
    rho = params.resolve_rho(frame.n_clusters)
    Z = _normalize_columns(svt_batch(state.mass_stack(), rho / 2.0))
    return Z, [Z[:, :, q].copy() for q in range(Z.shape[2])]


def objective(state: CredalState, data: MultiViewDataset, params: MvlrecmParams) -> float:
    """Value of the full MvLRECM objective at ``state``."""
    frame = _frame_of(state)
    cpen = frame.cardinalities()[1:].astype(float) ** params.alpha
    J = 0.0
    for wq, X, V, M in zip(state.w, data.views, state.V, state.M):
        d2 = _sqdist(X, V, frame)
        J += wq * (np.sum(cpen * M[:, 1:] ** 2 * d2) + params.delta**2 * np.sum(M[:, 0] ** 2))
    if params.theta > 0:
        rho = params.resolve_rho(frame.n_clusters)
        Mst = state.mass_stack()
        nuc = np.linalg.svd(state.Z, compute_uv=False).sum()
        J += params.theta * (rho * nuc + np.sum((Mst - state.Z) ** 2))
    w = state.w[state.w > 0]
    J += params.eta * float(np.sum(w * np.log(w)))
    return float(J)


# ---------------------------------------------------------------------------
# fusion and decision


def unify(M: Sequence[np.ndarray], w: np.ndarray) -> np.ndarray:
    """Weighted average of the per-view mass matrices."""
    return np.tensordot(np.asarray(w, dtype=float), np.stack(M), axes=1)


def decide(unified_mass: np.ndarray) -> np.ndarray:
    """Subset with the largest mass for each object.

    Ties (within 1e-12) go to the smaller cardinality, then the smaller index.
    """
    F = unified_mass.shape[1]
    card = np.array([j.bit_count() for j in range(F)])
    order = np.lexsort((np.arange(F), card))
    ranked = unified_mass[:, order]
    top = ranked >= ranked.max(axis=1, keepdims=True) - _TIE_ATOL
    return order[np.argmax(top, axis=1)]


# ---------------------------------------------------------------------------
# driver


def _prime_masses(state: CredalState, data: MultiViewDataset, params: MvlrecmParams) -> CredalState:
    # masses from the initial centers; uniform masses would pull every
    # center onto the grand mean in the first center update
    M = update_masses(state, data, replace(params, theta=0.0))
    return CredalState(M, state.V, state.w, np.stack(M, axis=-1))


def fit(
    data: MultiViewDataset,
    n_clusters: int,
    params: Optional[MvlrecmParams] = None,
    callback: Optional[Callable[[int, CredalState], None]] = None,
) -> tuple[CredalState, CredalPartition]:
    """Run MvLRECM to convergence.

    Parameters
    ----------
    data : MultiViewDataset
    n_clusters : int
        Number of singleton clusters ``C``.
    params : MvlrecmParams, optional
        Defaults to ``MvlrecmParams()``.
    callback : callable, optional
        Called as ``callback(iteration, state)`` after every full sweep.

    Returns
    -------
    state : CredalState
        Final variables.
    partition : CredalPartition
        Unified masses and the per-object decision.
    """
    params = (params or MvlrecmParams()).resolved(n_clusters)
    state = _prime_masses(init_state(data, n_clusters, params), data, params)
    state.J = objective(state, data, params)
    history = [state.J]
    converged = False
    it = 0
    for it in range(1, params.max_iter + 1):
        J_old = state.J
        state.V = update_centers(state, data, params)
        state.w = update_weights(state, data, params)
        state.M = update_masses(state, data, params)
        if params.theta > 0:
            state.Z, state.M = update_lowrank(state, params)
        else:
            state.Z = state.mass_stack()
        state.J = objective(state, data, params)
        history.append(state.J)
        if callback is not None:
            callback(it, state)
        if abs(J_old - state.J) < params.tol:
            converged = True
            break
    log.debug("fit finished after %d iterations (converged=%s, J=%.6g)", it, converged, state.J)
    unified = unify(state.M, state.w)
    partition = CredalPartition(
        unified_mass=unified,
        decision=decide(unified),
        params_used=params,
        iterations=it,
        converged=converged,
        weights=state.w.copy(),
        objective_history=history,
    )
    return state, partition


def ecm_fit(
    view,
    n_clusters: int,
    alpha: float = 2.0,
    delta: float = 20.0,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-4,
) -> CredalPartition:
    """Single-view evidential c-means, i.e. :func:`fit` with one view and no fusion."""
    params = MvlrecmParams(alpha=alpha, delta=delta, theta=0.0, eta=1.0, max_iter=max_iter, tol=tol, seed=seed)
    return fit(MultiViewDataset([view]), n_clusters, params)[1]


def ecm_average(data: MultiViewDataset, n_clusters: int, params: Optional[MvlrecmParams] = None) -> CredalPartition:
    """ECM on each view separately, fused by averaging the mass matrices.

    This is the usual multi-view baseline for a single-view credal method.
    """
    params = params or MvlrecmParams()
    parts = [
        ecm_fit(X, n_clusters, params.alpha, params.delta, params.seed, params.max_iter, params.tol)
        for X in data.views
    ]
    w = np.full(data.n_views, 1.0 / data.n_views)
    unified = unify([p.unified_mass for p in parts], w)
    return CredalPartition(
        unified_mass=unified,
        decision=decide(unified),
        params_used=replace(params, theta=0.0).resolved(n_clusters),
        iterations=max(p.iterations for p in parts),
        converged=all(p.converged for p in parts),
        weights=w,
    )
