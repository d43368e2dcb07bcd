from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlrecm import MultiViewDataset, MvlrecmParams, ecm_average, ecm_fit, fit
from mvlrecm.clustering import (
    CredalState,
    center_system,
    decide,
    distances,
    entropy_weights,
    init_state,
    objective,
    unify,
    update_centers,
    update_lowrank,
    update_masses,
    update_weights,
    view_costs,
)
from conftest import small_dataset
from oracles import masses_kkt, objective_loop, subset_distances_loop


def _random_state(rng, data, C, theta_target=True):
    F = 2**C
    state = init_state(data, C, MvlrecmParams(seed=int(rng.integers(1000))))
    state.V = [X[rng.choice(X.shape[0], C, replace=False)] + 0.1 * rng.standard_normal((C, X.shape[1])) for X in data.views]
    M = [rng.dirichlet(np.ones(F), size=data.n_objects) for _ in data.views]
    state.M = M
    w = rng.dirichlet(np.ones(data.n_views))
    state.w = w
    state.Z = np.stack(M, axis=-1) if theta_target else state.Z
    return state


# ---------------------------------------------------------------------------
# parameters and data containers


def test_params_validation_lists_every_problem():
    with pytest.raises(ValueError) as exc:
        MvlrecmParams(delta=0, eta=-1, max_iter=0)
    msg = str(exc.value)
    assert "delta" in msg and "eta" in msg and "max_iter" in msg


def test_rho_default():
    assert MvlrecmParams().resolve_rho(4) == pytest.approx(0.25)
    assert MvlrecmParams(rho=0.3).resolve_rho(4) == 0.3
    assert MvlrecmParams().resolved(2).rho == pytest.approx(0.5)


def test_dataset_validation():
    with pytest.raises(ValueError):
        MultiViewDataset([])
    with pytest.raises(ValueError):
        MultiViewDataset([np.ones((3, 2)), np.ones((4, 2))])
    with pytest.raises(ValueError):
        MultiViewDataset([np.array([[np.inf, 1.0]])])
    with pytest.raises(ValueError):
        MultiViewDataset([np.ones((3, 2))], labels=[0, 1, 2])
    d = MultiViewDataset([np.arange(4.0)], labels=[1, 2, 2, 1])
    assert d.dims == (1,) and d.n_classes == 2


def test_init_state_shapes(toy):
    st_ = init_state(toy, 3, MvlrecmParams())
    assert len(st_.M) == 2 and st_.M[0].shape == (30, 8)
    assert st_.Z.shape == (30, 8, 2)
    np.testing.assert_allclose(st_.w, [0.5, 0.5])
    np.testing.assert_allclose(st_.M[0].sum(axis=1), 1.0)
    assert np.all(st_.M[0][:, 0] == 0)
    # same objects seed every view
    idx0 = [np.flatnonzero((toy.views[0] == v).all(axis=1))[0] for v in st_.V[0]]
    idx1 = [np.flatnonzero((toy.views[1] == v).all(axis=1))[0] for v in st_.V[1]]
    assert idx0 == idx1


def test_init_needs_enough_objects():
    with pytest.raises(ValueError):
        init_state(MultiViewDataset([np.ones((2, 2))]), 3, MvlrecmParams())


# ---------------------------------------------------------------------------
# single blocks against independent computations


def test_distances_match_loops(rng, toy):
    state = _random_state(rng, toy, 3)
    for got, X, V in zip(distances(toy, state, 3), toy.views, state.V):
        np.testing.assert_allclose(got, subset_distances_loop(X, V), rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("theta", [0.0, 0.5])
def test_masses_match_kkt_solution(rng, toy, theta):
    C = 2
    params = MvlrecmParams(alpha=1.5, delta=3.0, theta=theta)
    state = _random_state(rng, toy, C)
    new = update_masses(state, toy, params)
    card = np.array([0, 1, 1, 2], dtype=float)
    checked = 0
    for q, (X, V) in enumerate(zip(toy.views, state.V)):
        d = subset_distances_loop(X, V)
        for i in range(toy.n_objects):
            costs = state.w[q] * np.concatenate([[params.delta**2], card[1:] ** params.alpha * d[i] ** 2])
            ref = masses_kkt(costs, theta, state.Z[i, :, q])
            if np.all(ref >= 0):
                np.testing.assert_allclose(new[q][i], ref, rtol=1e-9, atol=1e-12)
                checked += 1
    assert checked > toy.n_objects  # most rows need no clamping


def test_mass_update_is_a_minimizer_at_theta_zero(rng, toy):
    params = MvlrecmParams(theta=0.0)
    state = _random_state(rng, toy, 3)
    state.M = update_masses(state, toy, params)
    state.Z = state.mass_stack()
    J = objective(state, toy, params)
    for _ in range(50):
        trial = state.copy()
        q = rng.integers(2)
        i = rng.integers(toy.n_objects)
        m = trial.M[q][i] + 0.01 * rng.standard_normal(8)
        m = np.maximum(m, 0)
        trial.M[q][i] = m / m.sum()
        trial.Z = trial.mass_stack()
        assert objective(trial, toy, params) >= J - 1e-9


def test_center_system_stationary(rng, toy):
    """Finite-difference gradient of the objective in V vanishes at the solved centers."""
    params = MvlrecmParams(theta=0.0, alpha=2.0)
    state = _random_state(rng, toy, 3)
    state.V = update_centers(state, toy, params)
    for q in range(toy.n_views):
        H, B = center_system(state.M[q], toy.views[q], params.alpha)
        assert np.linalg.norm(H @ state.V[q] - B) <= 1e-8 * (1 + np.linalg.norm(B))
        scale = np.abs(view_costs(state, toy, params)).max()
        for k in range(3):
            for s in range(toy.dims[q]):
                def J(eps):
                    t = state.copy()
                    t.V[q][k, s] += eps
                    return objective(t, toy, params)
                h = 1e-4
                g = (J(h) - J(-h)) / (2 * h)
                assert abs(g) <= 1e-6 * scale


def test_center_system_matches_direct_sum(rng):
    # H and B assembled term by term
    N, C, D, alpha = 6, 2, 3, 1.7
    M = rng.dirichlet(np.ones(4), size=N)
    X = rng.standard_normal((N, D))
    H_ref = np.zeros((C, C))
    B_ref = np.zeros((C, D))
    for i in range(N):
        for j in range(1, 4):
            mem = [k for k in range(C) if j >> k & 1]
            c = len(mem)
            for l in mem:
                B_ref[l] += c ** (alpha - 1) * M[i, j] ** 2 * X[i]
                for k in mem:
                    H_ref[l, k] += c ** (alpha - 2) * M[i, j] ** 2
    H, B = center_system(M, X, alpha)
    np.testing.assert_allclose(H, H_ref, rtol=1e-12)
    np.testing.assert_allclose(B, B_ref, rtol=1e-12)


def test_singular_center_system_gets_ridge():
    # all mass on the empty set: H = 0
    M = np.zeros((5, 4))
    M[:, 0] = 1.0
    data = MultiViewDataset([np.random.default_rng(0).standard_normal((5, 2))])
    state = CredalState([M], [np.zeros((2, 2))], np.ones(1), M[..., None])
    V = update_centers(state, data, MvlrecmParams())
    assert np.all(np.isfinite(V[0]))


def test_entropy_weights_worked_values():
    eta = 2.0
    w = entropy_weights([1.0, 1.0 + eta * np.log(4.0)], eta)
    np.testing.assert_allclose(w, [0.8, 0.2], rtol=1e-12)
    assert entropy_weights([5.0, 5.0, 5.0], 1.0) == pytest.approx(np.ones(3) / 3)
    # huge cost gaps do not overflow
    w = entropy_weights([0.0, 1e6], 1e-3)
    assert np.all(np.isfinite(w)) and w[0] == 1.0


def test_weight_update_minimizes_its_block(rng, toy):
    params = MvlrecmParams(theta=0.0, eta=50.0)
    state = _random_state(rng, toy, 2)
    state.w = update_weights(state, toy, params)
    J = objective(state, toy, params)
    for _ in range(100):
        t = state.copy()
        t.w = rng.dirichlet(np.ones(2))
        assert objective(t, toy, params) >= J - 1e-9


def test_objective_matches_loops(rng):
    data = small_dataset(rng, n=8, dims=(2, 1))
    params = MvlrecmParams(alpha=1.3, delta=2.5, theta=0.7, eta=3.0, rho=0.4)
    state = _random_state(rng, data, 2)
    state.Z = state.mass_stack() + 0.05 * rng.standard_normal(state.Z.shape)
    ref = objective_loop(data.views, state.V, state.M, state.w, state.Z, 1.3, 2.5, 0.7, 3.0, 0.4)
    assert objective(state, data, params) == pytest.approx(ref, rel=1e-10)


def test_lowrank_step_returns_normalized_columns(rng, toy):
    state = _random_state(rng, toy, 3)
    Z, M = update_lowrank(state, MvlrecmParams(rho=0.5))
    assert np.all(Z >= 0)
    np.testing.assert_allclose(Z.sum(axis=1), 1.0, atol=1e-12)
    for q in range(2):
        np.testing.assert_array_equal(M[q], Z[:, :, q])


def test_lowrank_step_reduces_rank_when_views_agree(rng, toy):
    state = _random_state(rng, toy, 2)
    shared = rng.dirichlet(np.ones(4), size=toy.n_objects)
    state.M = [np.clip(shared + 0.01 * rng.standard_normal(shared.shape), 0, None) for _ in range(2)]
    Z, _ = update_lowrank(state, MvlrecmParams(rho=0.2))
    ranks = [np.linalg.matrix_rank(Z[i], tol=1e-8) for i in range(toy.n_objects)]
    assert max(ranks) == 1


# ---------------------------------------------------------------------------
# fusion and decisions


def test_unify_is_weighted_average():
    a, b = np.array([[0.2, 0.8]]), np.array([[0.6, 0.4]])
    np.testing.assert_allclose(unify([a, b], [0.25, 0.75]), [[0.5, 0.5]])


def test_decision_tie_break():
    m = np.array(
        [
            [0.0, 0.3, 0.3, 0.4],  # clear winner {1,2}
            [0.0, 0.0, 0.5, 0.5],  # tie {2} vs {1,2}: smaller cardinality
            [0.0, 0.5, 0.5, 0.0],  # tie {1} vs {2}: smaller index
            [0.5, 0.0, 0.0, 0.5],  # tie empty vs {1,2}: empty has cardinality 0
            [0.0, 0.5 + 1e-13, 0.5, 0.0],  # within tolerance -> still {1}
        ]
    )
    assert list(decide(m)) == [3, 2, 1, 0, 1]
    assert list(decide(np.array([[0.0, 0.5, 0.5 + 1e-6, 0.0]]))) == [2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_decision_is_an_argmax(seed, C):
    m = np.random.default_rng(seed).dirichlet(np.ones(2**C), size=20)
    d = decide(m)
    np.testing.assert_allclose(m[np.arange(20), d], m.max(axis=1), atol=1e-12)


# ---------------------------------------------------------------------------
# full runs


def test_fit_invariants_and_history(toy):
    seen = []

    def cb(it, s):
        seen.append(it)
        for M in s.M:
            assert np.all(M >= 0)
            np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-9)
        assert abs(s.w.sum() - 1) <= 1e-12

    state, part = fit(toy, 2, MvlrecmParams(max_iter=15), callback=cb)
    assert seen == list(range(1, part.iterations + 1))
    assert len(part.objective_history) == part.iterations + 1
    assert part.unified_mass.shape == (30, 4)
    assert part.n_clusters == 2
    np.testing.assert_allclose(part.unified_mass.sum(axis=1), 1.0)
    assert part.params_used.rho == pytest.approx(0.5)


def test_fit_is_deterministic(toy):
    _, a = fit(toy, 2, MvlrecmParams(max_iter=10, seed=4))
    _, b = fit(toy, 2, MvlrecmParams(max_iter=10, seed=4))
    np.testing.assert_array_equal(a.unified_mass, b.unified_mass)


def test_fit_recovers_separated_blobs(rng):
    data = small_dataset(rng, n=60, dims=(2, 2))
    _, part = fit(data, 2, MvlrecmParams(theta=1.0, eta=1e4))
    from mvlrecm.metrics import credal_accuracy

    assert credal_accuracy(data.labels, part.decision) == 1.0


def test_theta_zero_descends(rng):
    data = small_dataset(rng, n=25, dims=(2, 1, 3), n_classes=3)
    _, part = fit(data, 3, MvlrecmParams(theta=0.0, tol=1e-12, max_iter=60))
    h = np.array(part.objective_history)
    assert np.all(np.diff(h) <= 1e-10 * (1 + np.abs(h[:-1])))


def test_ecm_midpoint_object_prefers_meta_cluster():
    # two tight groups and one object exactly between them
    X = np.array([[0.0], [0.1], [-0.1], [10.0], [10.1], [9.9], [5.0]])
    part = ecm_fit(X, 2, alpha=1.0, delta=50.0)
    m = part.unified_mass[-1]
    assert m[3] > m[1] and m[3] > m[2]
    assert part.decision[-1] == 3


def test_ecm_far_object_goes_to_empty_set():
    X = np.array([[0.0], [0.1], [-0.1], [3.0], [3.1], [2.9], [500.0]])
    part = ecm_fit(X, 2, delta=2.0)
    assert part.decision[-1] == 0
    assert set(part.decision[:3]) | set(part.decision[3:6]) <= {1, 2}


def test_ecm_equals_single_view_fit(rng):
    X = rng.standard_normal((40, 2))
    params = MvlrecmParams(theta=0.0, seed=3, max_iter=30)
    _, a = fit(MultiViewDataset([X]), 3, params)
    b = ecm_fit(X, 3, seed=3, max_iter=30)
    np.testing.assert_array_equal(a.unified_mass, b.unified_mass)


def test_ecm_average(toy):
    part = ecm_average(toy, 2, MvlrecmParams(max_iter=20))
    single = [ecm_fit(X, 2, max_iter=20).unified_mass for X in toy.views]
    np.testing.assert_allclose(part.unified_mass, (single[0] + single[1]) / 2)
    assert part.params_used.theta == 0.0


def test_objective_history_recorded_when_max_iter_hit(toy):
    _, part = fit(toy, 2, replace(MvlrecmParams(), max_iter=2, tol=1e-300))
    assert part.iterations == 2 and not part.converged
