import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from pbda.gibbs import domain_disagreement
from pbda.data import MoonsConfig, gen_moons
from pbda.models import DualModel, KernelSpec, LinearModel, kernel_matrix
from pbda.optimize import (
    Hyperparams,
    KernelMap,
    MultiPBDAProblem,
    NumericalError,
    PBDADualProblem,
    PBDAProblem,
    PBGD3DualProblem,
    PBGD3Problem,
    Settings,
    make_trainer,
    minimize,
    multi_pbda_objective,
    pbda_dual_objective,
    pbda_gradient,
    pbda_objective,
    pbgd3_dual_gradient,
    pbgd3_dual_objective,
    pbgd3_gradient,
    pbgd3_objective,
    train_multi_pbda,
    train_pbda,
    train_pbgd3,
)
from pbda.samples import LabeledSample, UnlabeledSample, normalized_rows
from pbda.verify import finite_difference_error

seeds = st.integers(0, 2**32 - 1)


def data(seed, m=12, d=3, shift=1.0):
    rng = np.random.default_rng(seed)
    S = LabeledSample(rng.standard_normal((m, d)), rng.choice([-1.0, 1.0], m))
    T = UnlabeledSample(rng.standard_normal((m, d)) + shift)
    return rng, S, T


def test_hyperparams_validated():
    Hyperparams(1.0, 0.0)
    with pytest.raises(ValueError):
        Hyperparams(0.0)
    with pytest.raises(ValueError):
        Hyperparams(1.0, -1.0)


def test_zero_point_objectives():
    rng, S, T = data(0)
    assert pbgd3_objective(np.zeros(3), S, 2.5) == 2.5 * len(S) / 2
    assert pbda_objective(np.zeros(3), S, T, 7.0, 2.5) == 2.5 * len(S) / 2  # phi_dis(0) on both sides
    K = kernel_matrix(S.X, S.X, KernelSpec("rbf", 0.5))
    assert pbgd3_dual_objective(np.zeros(len(S)), K, S.y, 2.5) == 2.5 * len(S) / 2


def test_dimension_and_size_errors():
    rng, S, T = data(1)
    with pytest.raises(ValueError):
        pbgd3_objective(np.zeros(4), S, 1.0)
    with pytest.raises(ValueError):
        pbda_objective(np.zeros(3), S, T.subset(range(5)), 1.0, 1.0)
    with pytest.raises(ValueError):
        PBGD3DualProblem(np.ones((3, 4)), [1, 1, 1], 1.0)
    with pytest.raises(ValueError):
        PBGD3DualProblem(np.diag([1.0, 0.0]), [1, 1], 1.0)


@given(seeds)
def test_pbda_with_zero_A_is_pbgd3(seed):
    rng, S, T = data(seed)
    w = rng.standard_normal(3)
    assert pbda_objective(w, S, T, 0.0, 1.7) == pbgd3_objective(w, S, 1.7)
    np.testing.assert_array_equal(pbda_gradient(w, S, T, 0.0, 1.7), pbgd3_gradient(w, S, 1.7))


@given(seeds)
def test_same_instances_cancel(seed):
    rng, S, _ = data(seed)
    w = rng.standard_normal(3) * 3
    p = PBDAProblem(S, S.unlabeled(), 5.0, 1.0)
    assert p.bracket(w) == 0.0
    assert p.value(w) == pbgd3_objective(w, S, 1.0)


@given(seeds)
def test_pbda_dominates_pbgd3(seed):
    rng, S, T = data(seed)
    w = rng.standard_normal(3) * 2
    assert pbda_objective(w, S, T, float(rng.uniform(0, 10)), 1.0) >= pbgd3_objective(w, S, 1.0)


@given(seeds)
def test_pbgd3_midpoint_convexity(seed):
    rng, S, _ = data(seed)
    p = PBGD3Problem(S, 3.0)
    a, b = rng.standard_normal(3) * 3, rng.standard_normal(3) * 3
    assert p.value(0.5 * (a + b)) <= 0.5 * (p.value(a) + p.value(b)) + 1e-12


@given(seeds)
def test_gradients_match_finite_differences(seed):
    rng, S, T = data(seed, m=int(np.random.default_rng(seed).integers(3, 10)))
    m, d = len(S), S.dim
    C, A = rng.uniform(0.1, 5), rng.uniform(0.1, 5)
    assert finite_difference_error(PBGD3Problem(S, C).value_and_grad, rng.standard_normal(d)) < 1e-6
    p = PBDAProblem(S, T, A, C)
    w = rng.standard_normal(d)
    if abs(p.bracket(w)) > 1e-3:
        assert finite_difference_error(p.value_and_grad, w) < 1e-5
    K = kernel_matrix(S.X, S.X, KernelSpec("rbf", 0.7))
    assert finite_difference_error(PBGD3DualProblem(K, S.y, C).value_and_grad, rng.standard_normal(m) * 0.5) < 1e-6


def test_nonconvex_option_gradient():
    rng, S, T = data(3)
    p = PBDAProblem(S, T, 2.0, 3.0, convex=False)
    w = rng.standard_normal(3)
    assert abs(p.bracket(w)) > 1e-3
    assert finite_difference_error(p.value_and_grad, w) < 1e-5


def test_kink_uses_zero_subgradient():
    rng, S, _ = data(4)
    w = rng.standard_normal(3)
    p = PBDAProblem(S, S.unlabeled(), 3.0, 1.0)
    np.testing.assert_array_equal(p.grad(w), PBGD3Problem(S, 1.0).grad(w))


def test_primal_dual_consistency_linear_kernel():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((8, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    y = rng.choice([-1.0, 1.0], 8)
    Xt = rng.standard_normal((8, 3))
    Xt /= np.linalg.norm(Xt, axis=1, keepdims=True)
    S, T = LabeledSample(X, y), UnlabeledSample(Xt)
    lin = KernelSpec("linear")
    for _ in range(10):
        alpha = rng.standard_normal(8)
        w = X.T @ alpha
        K = kernel_matrix(X, X, lin)
        assert pbgd3_dual_objective(alpha, K, y, 2.0) == pytest.approx(pbgd3_objective(w, S, 2.0), abs=1e-10)
        beta = rng.standard_normal(16)
        anchors = np.vstack([X, Xt])
        w2 = anchors.T @ beta
        K2 = kernel_matrix(anchors, anchors, lin)
        assert pbda_dual_objective(beta, K2, y, 3.0, 2.0) == pytest.approx(pbda_objective(w2, S, T, 3.0, 2.0), abs=1e-9)


def test_dual_gradient_is_chain_rule_of_primal():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((6, 2))
    y = rng.choice([-1.0, 1.0], 6)
    alpha = rng.standard_normal(6)
    K = X @ X.T
    g_dual = pbgd3_dual_gradient(alpha, K, y, 1.5)
    g_primal = pbgd3_gradient(X.T @ alpha, LabeledSample(X, y), 1.5)
    np.testing.assert_allclose(g_dual, X @ g_primal, rtol=1e-10, atol=1e-12)


def test_multisource_reductions():
    rng, S, T = data(7)
    w = rng.standard_normal(3)
    single = multi_pbda_objective(w, [S], [1.0], T, 2.0, 1.5)
    assert single == pbda_objective(w, S, T, 2.0, 1.5)
    twice = multi_pbda_objective(w, [S, S], [0.5, 0.5], T, 2.0, 1.5)
    assert twice == pytest.approx(pbda_objective(w, S, T, 2.0, 1.5), rel=1e-14)
    with pytest.raises(ValueError):
        MultiPBDAProblem([S, S], [0.7, 0.7], T, 1.0, 1.0)


def test_minimize_quadratic_and_determinism():
    w0 = np.array([1.0, -2.0, 3.5])
    res = minimize(lambda w: (0.5 * np.sum((w - w0) ** 2), w - w0), np.zeros(3))
    assert res.converged and np.max(np.abs(res.x - w0)) < 1e-8
    rng, S, _ = data(8, m=40)
    p = PBGD3Problem(S, 10.0)
    a = minimize(p.value_and_grad, np.zeros(3))
    b = minimize(p.value_and_grad, np.zeros(3))
    assert np.array_equal(a.x, b.x) and a.iterations == b.iterations and a.value == b.value


def test_minimize_rejects_non_finite():
    with pytest.raises(NumericalError):
        minimize(lambda w: (float("nan"), np.zeros_like(w)), np.zeros(2))


@given(seeds)
def test_pbgd3_converges_from_any_start(seed):
    rng, S, _ = data(seed, m=30, d=4)
    p = PBGD3Problem(S, float(rng.uniform(0.5, 20)))
    results = [minimize(p.value_and_grad, rng.standard_normal(4) * 3) for _ in range(2)]
    for r in results:
        assert r.converged and r.grad_norm <= 1e-6
    assert np.max(np.abs(results[0].x - results[1].x)) < 1e-5
    assert abs(results[0].value - results[1].value) < 1e-6


def test_pbgd3_same_value_from_five_starts():
    rng, S, _ = data(9, m=50, d=5)
    p = PBGD3Problem(S, 5.0)
    values = [minimize(p.value_and_grad, rng.standard_normal(5) * 4).value for _ in range(5)]
    assert max(values) - min(values) < 1e-6


def test_train_pbda_zero_A_equals_pbgd3():
    S = gen_moons(MoonsConfig(40, 0, seed=1))
    T = gen_moons(MoonsConfig(40, 30, seed=2)).unlabeled()
    for kernel in (None, KernelSpec("rbf", 2.0)):
        a = train_pbgd3(S, 3.0, kernel)
        b = train_pbda(S, T, 0.0, 3.0, kernel)
        np.testing.assert_array_equal(a.predict(T.X), b.predict(T.X))
        assert b.info["A"] == 0.0


def test_kernel_training_returns_dual_model_with_right_anchors():
    S = gen_moons(MoonsConfig(30, 0, seed=1))
    T = gen_moons(MoonsConfig(30, 20, seed=2)).unlabeled()
    k = KernelSpec("rbf", 2.0)
    g = train_pbgd3(S, 10.0, k)
    assert isinstance(g, DualModel) and g.anchors.shape[0] == len(S)
    d = train_pbda(S, T, 1.0, 10.0, k)
    assert d.anchors.shape[0] == 2 * len(S)
    assert d.info["converged"] and g.info["converged"]


def test_kernel_map_reparametrization_preserves_objective():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((20, 2))
    K = kernel_matrix(X, X, KernelSpec("rbf", 1.0))
    kmap = KernelMap(K)
    y = rng.choice([-1.0, 1.0], 20)
    alpha = rng.standard_normal(20) * 0.3
    dual = PBGD3DualProblem(K, y, 2.0).value(alpha)
    beta = kmap.to_beta(alpha)
    primal = PBGD3Problem.from_normalized(kmap.normalized, y, 2.0).value(beta)
    assert primal == pytest.approx(dual, rel=1e-9)
    np.testing.assert_allclose(K @ kmap.to_alpha(beta), K @ alpha, atol=1e-8)


def test_kernel_training_matches_dual_problem_optimum():
    S = gen_moons(MoonsConfig(25, 0, seed=3))
    k = KernelSpec("rbf", 1.0)
    model = train_pbgd3(S, 5.0, k)
    K = kernel_matrix(S.X, S.X, k)
    p = PBGD3DualProblem(K, S.y, 5.0)
    assert p.value(model.alphas) == pytest.approx(model.info["objective"], rel=1e-8)
    ref = minimize(p.value_and_grad, np.zeros(len(S)), tol=1e-6, max_iter=20000)
    assert model.info["objective"] <= ref.value + 1e-6


def test_dense_and_sparse_training_agree():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((30, 6))
    X[rng.random(X.shape) < 0.5] = 0.0
    y = rng.choice([-1.0, 1.0], 30)
    a = train_pbgd3(LabeledSample(X, y), 2.0)
    b = train_pbgd3(LabeledSample(sp.csr_matrix(X), y), 2.0)
    assert np.array_equal(a.weights, b.weights)


def test_unequal_sizes_option():
    rng, S, T = data(12, m=10)
    T_big = UnlabeledSample(np.vstack([T.X, T.X]))
    with pytest.raises(ValueError):
        PBDAProblem(S, T_big, 1.0, 1.0)
    w = rng.standard_normal(3)
    # duplicating every target point leaves the averaged disagreement unchanged
    a = PBDAProblem(S, T, 1.0, 1.0).value(w)
    b = PBDAProblem(S, T_big, 1.0, 1.0, unequal_sizes=True).value(w)
    assert b == pytest.approx(a, rel=1e-13)
    # the optimum sits on the |.| kink, so compare reached objectives rather than gradient norms
    m = train_pbda(S, T_big, 1.0, 1.0, settings=Settings(unequal_sizes=True))
    ref = train_pbda(S, T, 1.0, 1.0)
    assert m.info["objective"] == pytest.approx(ref.info["objective"], rel=1e-8)


def test_multisource_training():
    rng, S, T = data(13, m=20)
    _, S2, _ = data(14, m=20)
    m = train_multi_pbda([S, S2], [0.3, 0.7], T, 2.0, 1.0)
    assert isinstance(m, LinearModel)
    p = MultiPBDAProblem([S, S2], [0.3, 0.7], T, 2.0, 1.0)
    assert p.value(m.weights) == pytest.approx(m.info["objective"], rel=1e-12)
    assert m.info["objective"] < p.value(np.zeros(3))


def test_pbda_regularizes_domain_disagreement():
    # measured effect: on most moons draws PBDA lowers dis(S, T) relative to its PBGD3 start
    wins = 0
    for seed in range(10):
        S = gen_moons(MoonsConfig(50, 0, seed=100 + seed))
        T = gen_moons(MoonsConfig(50, 30, seed=200 + seed)).unlabeled()
        Sn, Tn = LabeledSample(normalized_rows(S.X), S.y), UnlabeledSample(normalized_rows(T.X))
        warm = train_pbgd3(S, 1.0)
        model = train_pbda(S, T, 1.0, 1.0, warm=warm)
        wins += domain_disagreement(model, Sn.unlabeled(), Tn) <= domain_disagreement(warm, Sn.unlabeled(), Tn)
    assert wins >= 8


def test_make_trainer():
    S = gen_moons(MoonsConfig(20, 0, seed=1))
    T = gen_moons(MoonsConfig(20, 10, seed=2)).unlabeled()
    assert isinstance(make_trainer("pbgd3", C=2.0)(S), LinearModel)
    assert isinstance(make_trainer("pbda", 1.0, 2.0, KernelSpec("rbf", 1.0))(S, T), DualModel)
    with pytest.raises(ValueError):
        make_trainer("svm")
