"""Exact Gibbs, majority-vote and divergence quantities on finite hypothesis classes.

Hypotheses are prediction tables over a shared finite instance set, so every
expectation is a finite sum.  These functions are the brute-force oracle the
linear closed forms and the bound inequalities are checked against.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FiniteVote",
    "FiniteDomain",
    "pair_disagreements",
    "exact_gibbs_risk",
    "exact_disagreement",
    "exact_joint_error",
    "exact_majority_vote_risk",
    "c_bound",
    "h_delta_h_distance",
    "ben_david_terms",
    "mansour_terms",
    "hypothesis_risks",
    "exact_dis_rho",
    "exact_dis_rho_mixture",
    "exact_lambda",
    "random_instance",
]

_TOL = 1e-12


def _probability(v, name):
    v = np.asarray(v, dtype=float).ravel()
    if np.any(v < 0) or abs(v.sum() - 1.0) > _TOL:
        raise ValueError(f"{name} must be non-negative and sum to 1")
    return v


@dataclass(frozen=True)
class FiniteVote:
    predictions: np.ndarray  # (n_hypotheses, n_points), entries in {-1, +1}
    posterior: np.ndarray
    prior: np.ndarray | None = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.predictions, dtype=float))
        if not np.all(np.isin(P, (-1.0, 1.0))):
            raise ValueError("predictions must be -1 or +1")
        post = _probability(self.posterior, "posterior")
        prior = post if self.prior is None else _probability(self.prior, "prior")
        if post.shape[0] != P.shape[0] or prior.shape[0] != P.shape[0]:
            raise ValueError("one weight per hypothesis is required")
        object.__setattr__(self, "predictions", P)
        object.__setattr__(self, "posterior", post)
        object.__setattr__(self, "prior", prior)

    @property
    def n_hypotheses(self):
        return self.predictions.shape[0]

    @property
    def n_points(self):
        return self.predictions.shape[1]

    def kl(self):
        """KL(posterior || prior) with the 0 ln 0 = 0 convention."""
        q, p = self.posterior, self.prior
        keep = q > 0
        if np.any(p[keep] == 0):
            return np.inf
        return float(np.sum(q[keep] * np.log(q[keep] / p[keep])))


@dataclass(frozen=True)
class FiniteDomain:
    labels: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.labels, dtype=float).ravel()
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        mass = _probability(self.mass, "mass")
        if mass.shape != y.shape:
            raise ValueError("one mass value per labeled point is required")
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "mass", mass)


def _mass(marginal):
    if isinstance(marginal, FiniteDomain):
        return marginal.mass
    return _probability(marginal, "marginal")


def _table(hypotheses):
    if isinstance(hypotheses, FiniteVote):
        return hypotheses.predictions
    return np.atleast_2d(np.asarray(hypotheses, dtype=float))


def _covers(P, mass):
    if P.shape[1] != mass.shape[0]:
        raise ValueError(f"prediction tables cover {P.shape[1]} points, distribution has {mass.shape[0]}")


def _errors(P, domain):
    _covers(P, domain.mass)
    return (P != domain.labels[None, :]).astype(float)


def pair_disagreements(hypotheses, marginal):
    """Matrix of ``R_D(h, h')``, the mass where two hypotheses disagree."""
    P = _table(hypotheses)
    mass = _mass(marginal)
    _covers(P, mass)
    # [h != h'] = (1 - h h') / 2 for +-1 tables
    return 0.5 * (1.0 - (P * mass) @ P.T)


def exact_gibbs_risk(vote, domain):
    return float(vote.posterior @ (_errors(vote.predictions, domain) @ domain.mass))


def exact_disagreement(vote, marginal):
    D = pair_disagreements(vote, marginal)
    return float(vote.posterior @ D @ vote.posterior)


def exact_joint_error(vote, domain):
    err = vote.posterior @ _errors(vote.predictions, domain)
    return float(domain.mass @ (err * err))


def _vote_labels(vote):
    score = vote.posterior @ vote.predictions
    return np.where(score >= 0.0, 1.0, -1.0)


def exact_majority_vote_risk(vote, domain):
    _covers(vote.predictions, domain.mass)
    return float(domain.mass @ (_vote_labels(vote) != domain.labels))


def c_bound(vote, domain):
    """``1 - (1 - 2 R(G))^2 / (1 - 2 R(G, G))``, or ``None`` when inapplicable.

    The bound needs a positive denominator and a Gibbs risk below one half.
    """
    risk = exact_gibbs_risk(vote, domain)
    dis = exact_disagreement(vote, domain)
    denominator = 1.0 - 2.0 * dis
    if denominator <= 0.0 or risk >= 0.5:
        return None
    return 1.0 - (1.0 - 2.0 * risk) ** 2 / denominator


def h_delta_h_distance(hypotheses, marginal_s, marginal_t):
    """Half the H-delta-H distance: largest pairwise disagreement gap."""
    gap = pair_disagreements(hypotheses, marginal_t) - pair_disagreements(hypotheses, marginal_s)
    return float(np.max(np.abs(gap)))


def hypothesis_risks(hypotheses, domain):
    """Plain 0-1 risk of each hypothesis."""
    return _errors(_table(hypotheses), domain) @ domain.mass


def ben_david_terms(hypotheses, domain_s, domain_t):
    """``(mu, h_star)``: best combined source+target risk and its index."""
    joint = hypothesis_risks(hypotheses, domain_s) + hypothesis_risks(hypotheses, domain_t)
    h_star = int(np.argmin(joint))  # argmin keeps the lowest index on ties
    return float(joint[h_star]), h_star


def mansour_terms(hypotheses, domain_s, domain_t):
    """``(nu, hS_star, hT_star)`` with ``nu = R_{D_S}(hS_star, hT_star)``."""
    hs = int(np.argmin(hypothesis_risks(hypotheses, domain_s)))
    ht = int(np.argmin(hypothesis_risks(hypotheses, domain_t)))
    nu = pair_disagreements(hypotheses, domain_s)[hs, ht]
    return float(nu), hs, ht


def exact_dis_rho(vote, marginal_s, marginal_t):
    return abs(exact_disagreement(vote, marginal_t) - exact_disagreement(vote, marginal_s))


def exact_dis_rho_mixture(vote, marginals_s, weights, marginal_t):
    """Domain disagreement between a weighted mixture of sources and the target."""
    v = _probability(weights, "mixture weights")
    if v.shape[0] != len(marginals_s):
        raise ValueError("one weight per source is required")
    mixed = sum(vj * exact_disagreement(vote, m) for vj, m in zip(v, marginals_s))
    return abs(exact_disagreement(vote, marginal_t) - mixed)


def exact_lambda(vote, domain_s, domain_t):
    return abs(exact_joint_error(vote, domain_t) - exact_joint_error(vote, domain_s))


def random_instance(rng, n_hypotheses=None, n_points=None, n_domains=2):
    """Random finite vote plus ``n_domains`` labeled domains on a shared instance set.

    Posterior and masses are Dirichlet draws; some entries are zeroed to
    exercise sparse supports.
    """
    H = int(n_hypotheses or rng.integers(1, 17))
    N = int(n_points or rng.integers(1, 65))
    P = rng.choice([-1.0, 1.0], size=(H, N))

    def simplex(k):
        p = rng.dirichlet(np.full(k, rng.uniform(0.2, 2.0)))
        if k > 1 and rng.random() < 0.3:
            p[rng.random(k) < 0.3] = 0.0
            if p.sum() == 0:
                p[rng.integers(k)] = 1.0
        return p / p.sum()

    vote = FiniteVote(P, simplex(H), simplex(H))
    base = rng.choice([-1.0, 1.0], size=N)
    domains = []
    for _ in range(n_domains):
        y = base.copy()
        flip = rng.random(N) < rng.uniform(0.0, 0.3)
        y[flip] *= -1
        domains.append(FiniteDomain(y, simplex(N)))
    return vote, domains
