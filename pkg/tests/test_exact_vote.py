import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pbda import exact_vote as ev
from pbda.exact_vote import FiniteDomain, FiniteVote

seeds = st.integers(0, 2**32 - 1)


def instance(seed, n_domains=2, **kw):
    return ev.random_instance(np.random.default_rng(seed), n_domains=n_domains, **kw)


def test_weights_validated():
    with pytest.raises(ValueError):
        FiniteVote([[1, -1]], [0.5])
    with pytest.raises(ValueError):
        FiniteVote([[1, -1], [1, 1]], [0.6, 0.5])
    with pytest.raises(ValueError):
        FiniteDomain([1, -1], [0.5, 0.5 + 1e-9])
    with pytest.raises(ValueError):
        FiniteDomain([1, 0], [0.5, 0.5])
    with pytest.raises(ValueError):
        FiniteVote([[1, 2]], [1.0])


def test_coverage_mismatch():
    vote = FiniteVote([[1, -1, 1]], [1.0])
    with pytest.raises(ValueError):
        ev.exact_gibbs_risk(vote, FiniteDomain([1, 1], [0.5, 0.5]))


def test_point_mass_vote_is_plain_risk():
    P = np.array([[1, -1, 1, 1], [-1, -1, 1, -1]])
    dom = FiniteDomain([1, 1, 1, -1], [0.1, 0.2, 0.3, 0.4])
    vote = FiniteVote(P, [0.0, 1.0])
    assert ev.exact_gibbs_risk(vote, dom) == pytest.approx(0.1 + 0.2)
    assert ev.exact_disagreement(vote, dom) == 0.0


def test_complementary_pair():
    rng = np.random.default_rng(0)
    h = rng.choice([-1.0, 1.0], 10)
    vote = FiniteVote(np.vstack([h, -h]), [0.5, 0.5])
    dom = FiniteDomain(rng.choice([-1.0, 1.0], 10), rng.dirichlet(np.ones(10)))
    assert ev.exact_gibbs_risk(vote, dom) == pytest.approx(0.5, abs=1e-15)
    assert ev.exact_disagreement(vote, dom) == pytest.approx(0.5, abs=1e-15)


def test_matches_direct_enumeration():
    rng = np.random.default_rng(1)
    vote, (dom,) = ev.random_instance(rng, n_hypotheses=4, n_points=8, n_domains=1)
    P, rho, mass, y = vote.predictions, vote.posterior, dom.mass, dom.labels
    risk = sum(rho[h] * mass[x] * (P[h, x] != y[x]) for h in range(4) for x in range(8))
    dis = sum(
        rho[h] * rho[g] * mass[x] * (P[h, x] != P[g, x])
        for h, g in itertools.product(range(4), repeat=2)
        for x in range(8)
    )
    joint = sum(
        rho[h] * rho[g] * mass[x] * (P[h, x] != y[x]) * (P[g, x] != y[x])
        for h, g in itertools.product(range(4), repeat=2)
        for x in range(8)
    )
    assert ev.exact_gibbs_risk(vote, dom) == pytest.approx(risk, abs=1e-15)
    assert ev.exact_disagreement(vote, dom) == pytest.approx(dis, abs=1e-15)
    assert ev.exact_joint_error(vote, dom) == pytest.approx(joint, abs=1e-15)


def test_unanimous_correct_vote():
    y = np.array([1.0, -1.0, 1.0])
    vote = FiniteVote(np.vstack([y, y]), [0.3, 0.7])
    dom = FiniteDomain(y, [0.2, 0.3, 0.5])
    assert ev.exact_majority_vote_risk(vote, dom) == 0.0
    assert ev.c_bound(vote, dom) >= 0.0


def test_vote_tie_goes_positive():
    vote = FiniteVote([[1, -1], [-1, 1]], [0.5, 0.5])
    dom = FiniteDomain([1, 1], [0.5, 0.5])
    assert ev.exact_majority_vote_risk(vote, dom) == 0.0


def test_c_bound_inapplicable_returns_none():
    h = np.array([1.0, 1.0])
    vote = FiniteVote(np.vstack([h, -h]), [0.5, 0.5])  # disagreement exactly 1/2
    assert ev.c_bound(vote, FiniteDomain([1, -1], [0.5, 0.5])) is None
    always_wrong = FiniteVote([[-1.0, -1.0]], [1.0])
    assert ev.c_bound(always_wrong, FiniteDomain([1, 1], [0.5, 0.5])) is None


def test_divergences_degenerate_cases():
    vote, (ds, _) = instance(3)
    assert ev.h_delta_h_distance(vote.predictions, ds, ds) == 0.0
    assert ev.h_delta_h_distance(vote.predictions[:1], ds, _) == 0.0
    assert ev.exact_dis_rho(vote, ds, ds) == 0.0
    assert ev.exact_lambda(vote, ds, ds) == 0.0
    single = FiniteVote(vote.predictions[:1], [1.0])
    assert ev.exact_dis_rho(single, ds, _) == 0.0


def test_ben_david_and_mansour_terms():
    vote, (ds, _) = instance(4, n_hypotheses=6)
    mu, h = ev.ben_david_terms(vote.predictions, ds, ds)
    nu, hs, ht = ev.mansour_terms(vote.predictions, ds, ds)
    assert h == hs == ht and nu == 0.0
    P = np.vstack([vote.predictions, ds.labels])
    mu, h = ev.ben_david_terms(P, ds, FiniteDomain(ds.labels, np.full(ds.labels.size, 1 / ds.labels.size)))
    assert mu == 0.0 and h == P.shape[0] - 1


def test_argmin_ties_take_lowest_index():
    P = np.array([[1, 1], [1, 1], [-1, -1]])
    dom = FiniteDomain([1, 1], [0.5, 0.5])
    assert ev.ben_david_terms(P, dom, dom)[1] == 0


def test_point_mass_mixture():
    vote, (ds, du, dt) = instance(5, n_domains=3)
    assert ev.exact_dis_rho_mixture(vote, [ds, du], [0.0, 1.0], dt) == pytest.approx(ev.exact_dis_rho(vote, du, dt), abs=1e-15)


def test_finite_kl():
    vote = FiniteVote([[1], [-1]], [0.5, 0.5], [0.25, 0.75])
    assert vote.kl() == pytest.approx(0.5 * np.log(2) + 0.5 * np.log(2 / 3))
    assert FiniteVote([[1], [-1]], [1.0, 0.0], [0.0, 1.0]).kl() == np.inf


@given(seeds)
def test_risk_decomposition(seed):
    vote, (dom,) = instance(seed, n_domains=1)
    lhs = ev.exact_gibbs_risk(vote, dom)
    rhs = 0.5 * ev.exact_disagreement(vote, dom) + ev.exact_joint_error(vote, dom)
    assert abs(lhs - rhs) <= 1e-12


@given(seeds)
def test_vote_risk_factor_two_and_c_bound(seed):
    vote, (dom, _) = instance(seed)
    rb, rg = ev.exact_majority_vote_risk(vote, dom), ev.exact_gibbs_risk(vote, dom)
    assert rb <= 2 * rg + 1e-12
    cb = ev.c_bound(vote, dom)
    if cb is not None:
        assert rb <= cb + 1e-12


@given(seeds)
def test_disagreement_below_h_delta_h(seed):
    vote, (ds, dt) = instance(seed)
    assert ev.exact_dis_rho(vote, ds, dt) <= ev.h_delta_h_distance(vote.predictions, ds, dt) + 1e-12


@given(seeds)
def test_adaptation_inequalities(seed):
    vote, (ds, dt) = instance(seed)
    rt = ev.exact_gibbs_risk(vote, dt)
    rhs = ev.exact_gibbs_risk(vote, ds) + 0.5 * ev.exact_dis_rho(vote, ds, dt) + ev.exact_lambda(vote, ds, dt)
    assert rt <= rhs + 1e-12
    mu, _ = ev.ben_david_terms(vote.predictions, ds, dt)
    hdh = ev.h_delta_h_distance(vote.predictions, ds, dt)
    assert np.all(ev.hypothesis_risks(vote.predictions, dt) <= ev.hypothesis_risks(vote.predictions, ds) + hdh + mu + 1e-12)


@given(seeds)
def test_dis_rho_pseudometric(seed):
    vote, (a, b, c) = instance(seed, n_domains=3)
    assert ev.exact_dis_rho(vote, a, b) == ev.exact_dis_rho(vote, b, a)
    assert ev.exact_dis_rho(vote, a, c) <= ev.exact_dis_rho(vote, a, b) + ev.exact_dis_rho(vote, b, c) + 1e-12


@given(seeds, st.integers(2, 4))
def test_mixture_inequality(seed, n_sources):
    rng = np.random.default_rng(seed)
    vote, domains = ev.random_instance(rng, n_domains=n_sources + 1)
    *sources, target = domains
    v = rng.dirichlet(np.ones(n_sources))
    mixed = ev.exact_dis_rho_mixture(vote, sources, v, target)
    avg = sum(vj * ev.exact_dis_rho(vote, s, target) for vj, s in zip(v, sources))
    assert mixed <= avg + 1e-12


def test_random_instance_respects_caps():
    rng = np.random.default_rng(9)
    for _ in range(50):
        vote, doms = ev.random_instance(rng)
        assert 1 <= vote.n_hypotheses <= 16 and 1 <= vote.n_points <= 64
        assert all(d.mass.size == vote.n_points for d in doms)
