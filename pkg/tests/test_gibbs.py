import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pbda.gibbs import (
    domain_disagreement,
    empirical_terms,
    gibbs_joint_error,
    gibbs_risk,
    gibbs_self_disagreement,
    kl_gaussian,
    mc_gibbs_oracle,
    model_kl,
    model_margins,
    normalized_margins,
    predict,
)
from pbda.losses import phi, phi_dis
from pbda.models import DualModel, KernelSpec, LinearModel
from pbda.samples import LabeledSample, UnlabeledSample
from pbda.verify import random_linear_case

PHI_1 = 0.15865525393145705
PHI_DIS_1 = 0.26696752866280387


def test_predict_examples():
    assert predict(LinearModel([1.0, 0.0]), [2.0, 5.0]) == 1
    assert predict(LinearModel([1.0, 0.0]), [-1.0, 3.0]) == -1
    assert predict(LinearModel([0.0, 0.0]), [-4.0, 7.0]) == 1
    with pytest.raises(ValueError):
        predict(LinearModel([1.0, 0.0]), [1.0, 2.0, 3.0])


def test_zero_model_values():
    rng = np.random.default_rng(1)
    S = LabeledSample(rng.standard_normal((9, 3)), rng.choice([-1.0, 1.0], 9))
    w0 = LinearModel(np.zeros(3))
    assert gibbs_risk(w0, S) == 0.5
    assert gibbs_self_disagreement(w0, S.unlabeled()) == 0.5
    assert gibbs_joint_error(w0, S) == 0.25
    assert kl_gaussian(w0) == 0.0


def test_single_point_oracles():
    # margin exactly 1: x = (2, 0), w = (1, 0)
    model = LinearModel([1.0, 0.0])
    S = LabeledSample([[2.0, 0.0]], [1.0])
    assert gibbs_risk(model, S) == pytest.approx(PHI_1, rel=1e-14)
    assert gibbs_self_disagreement(model, S.unlabeled()) == pytest.approx(PHI_DIS_1, rel=1e-14)
    assert gibbs_joint_error(model, S) == pytest.approx(0.025171489600055118, rel=1e-13)


def test_domain_disagreement_example():
    model = LinearModel([1.0, 0.0])
    S = UnlabeledSample([[0.0, 1.0], [0.0, -3.0]])  # orthogonal to w: margin 0
    T = UnlabeledSample([[5.0, 0.0], [0.5, 0.0]])  # margin 1
    assert domain_disagreement(model, S, T) == pytest.approx(0.23303247133719613, rel=1e-13)
    assert domain_disagreement(model, T, S) == domain_disagreement(model, S, T)
    assert domain_disagreement(model, S, S) == 0.0


def test_flipped_copy_gives_half():
    rng = np.random.default_rng(2)
    S = LabeledSample(rng.standard_normal((15, 4)), rng.choice([-1.0, 1.0], 15))
    both = LabeledSample(np.vstack([S.X, S.X]), np.concatenate([S.y, -S.y]))
    model = LinearModel(rng.standard_normal(4) * 3)
    assert gibbs_risk(model, both) == pytest.approx(0.5, abs=1e-15)


def test_kl_examples():
    assert kl_gaussian(LinearModel([3.0, 4.0])) == 12.5
    w = np.array([0.3, -1.2, 2.0])
    assert kl_gaussian(LinearModel(w)) == kl_gaussian(LinearModel(-w))


def test_zero_instance_has_margin_zero():
    model = LinearModel([1.0, 2.0])
    m = normalized_margins(model, np.array([[0.0, 0.0], [3.0, 4.0]]))
    assert m[0] == 0.0 and m[1] == pytest.approx(11.0 / 5.0)
    S = LabeledSample([[0.0, 0.0]], [-1.0])
    assert gibbs_risk(model, S) == 0.5


def test_empty_sample_rejected():
    with pytest.raises(ValueError):
        gibbs_risk(LinearModel([1.0]), LabeledSample(np.zeros((0, 1)), []))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        gibbs_risk(LinearModel([1.0, 2.0]), LabeledSample([[1.0, 2.0, 3.0]], [1.0]))


def test_dense_and_sparse_agree_bitwise():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 12))
    X[rng.random(X.shape) < 0.6] = 0.0
    y = rng.choice([-1.0, 1.0], 40)
    model = LinearModel(rng.standard_normal(12))
    dense, sparse = LabeledSample(X, y), LabeledSample(sp.csr_matrix(X), y)
    for fn in (gibbs_risk, gibbs_joint_error):
        assert fn(model, dense) == fn(model, sparse)
    assert gibbs_self_disagreement(model, dense.unlabeled()) == gibbs_self_disagreement(model, sparse.unlabeled())
    # stored explicit zeros and CSC layout canonicalize to the same reduction order
    assert np.array_equal(normalized_margins(model, sp.csc_matrix(X)), normalized_margins(model, X))
    with_zero = sp.csr_matrix(X)
    with_zero.data[0] = 0.0  # still stored, now zero
    assert np.array_equal(normalized_margins(model, with_zero), normalized_margins(model, with_zero.toarray()))


cases = st.integers(0, 2**32 - 1).map(lambda s: random_linear_case(np.random.default_rng(s)))


@given(cases)
def test_exact_decomposition(case):
    model, S = case
    lhs = gibbs_risk(model, S)
    rhs = 0.5 * gibbs_self_disagreement(model, S.unlabeled()) + gibbs_joint_error(model, S)
    assert abs(lhs - rhs) <= 1e-12


@given(arrays(float, 200, elements=st.floats(-30, 30)))
def test_per_example_identity(a):
    np.testing.assert_allclose(phi(a), 0.5 * phi_dis(a) + phi(a) ** 2, rtol=0, atol=1e-12)


@given(cases, st.floats(0.01, 100.0))
def test_vote_scale_invariance(case, c):
    model, S = case
    scaled = LinearModel(c * model.weights)
    np.testing.assert_array_equal(model.predict(S.X), scaled.predict(S.X))


def test_risk_non_increasing_when_margins_correct():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 3))
    w = rng.standard_normal(3)
    y = np.where(X @ w >= 0, 1.0, -1.0)
    S = LabeledSample(X, y)
    risks = [gibbs_risk(LinearModel(c * w), S) for c in np.linspace(0.1, 20, 50)]
    assert all(b <= a for a, b in zip(risks, risks[1:]))


def test_self_disagreement_vanishes_under_scaling():
    X = np.array([[1.0, 0.2], [2.0, -0.5], [0.7, 0.1]])
    w = np.array([1.0, 0.0])
    vals = [gibbs_self_disagreement(LinearModel(c * w), UnlabeledSample(X)) for c in (1, 2, 4, 8, 16)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-20


@given(st.integers(0, 2**32 - 1))
def test_disagreement_triangle(seed):
    rng = np.random.default_rng(seed)
    model = LinearModel(rng.standard_normal(3) * 2)
    A, B, C = (UnlabeledSample(rng.standard_normal((int(rng.integers(1, 20)), 3))) for _ in range(3))
    assert domain_disagreement(model, A, C) <= domain_disagreement(model, A, B) + domain_disagreement(model, B, C) + 1e-15


def test_mc_oracle_zero_model_and_determinism():
    rng = np.random.default_rng(5)
    S = LabeledSample(rng.standard_normal((10, 2)), rng.choice([-1.0, 1.0], 10))
    model = LinearModel(np.zeros(2))
    est, se = mc_gibbs_oracle(model, S, 100_000, seed=11)
    assert abs(est - 0.5) <= 3 * se
    assert mc_gibbs_oracle(model, S, 5000, seed=3) == mc_gibbs_oracle(model, S, 5000, seed=3)
    with pytest.raises(ValueError):
        mc_gibbs_oracle(model, S, 999, seed=0)


def test_mc_oracle_matches_closed_forms():
    rng = np.random.default_rng(6)
    model, S = random_linear_case(rng)
    for quantity, fn in (("risk", gibbs_risk), ("joint", gibbs_joint_error)):
        est, se = mc_gibbs_oracle(model, S, 50_000, seed=1, quantity=quantity)
        assert abs(est - fn(model, S)) <= 4 * se
    est, se = mc_gibbs_oracle(model, S, 50_000, seed=1, quantity="disagreement")
    assert abs(est - gibbs_self_disagreement(model, S.unlabeled())) <= 4 * se


def test_dual_model_margins_and_kl_match_primal_for_linear_kernel():
    rng = np.random.default_rng(7)
    anchors = rng.standard_normal((6, 3))
    alphas = rng.standard_normal(6)
    dual = DualModel(alphas, anchors, KernelSpec("linear"))
    primal = LinearModel(dual.primal_weights())
    X = rng.standard_normal((10, 3))
    np.testing.assert_allclose(model_margins(dual, X), model_margins(primal, X), rtol=1e-12)
    assert model_kl(dual) == pytest.approx(model_kl(primal), rel=1e-12)
    S = LabeledSample(X, rng.choice([-1.0, 1.0], 10))
    a, b = empirical_terms(dual, S, S.unlabeled()), empirical_terms(primal, S, S.unlabeled())
    assert a["empirical_risk"] == pytest.approx(b["empirical_risk"], rel=1e-12)
    assert a["empirical_dis"] == 0.0
