"""Self-checking suites: exact finite-vote inequalities, Monte-Carlo agreement,
finite-difference gradients and bound consistency.

Each suite is deterministic given ``seed`` and returns a :class:`SuiteReport`
listing every check with its count of violations and the worst slack seen.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as B
from . import exact_vote as ev
from .gibbs import gibbs_joint_error, gibbs_risk, gibbs_self_disagreement, mc_gibbs_oracle
from .losses import phi, phi_dis
from .models import KernelSpec, LinearModel, kernel_matrix
from .optimize import (
    MultiPBDAProblem,
    PBDADualProblem,
    PBDAProblem,
    PBGD3DualProblem,
    PBGD3Problem,
)
from .samples import LabeledSample, UnlabeledSample

__all__ = ["CheckResult", "SuiteReport", "SUITES", "run_suite", "finite_difference_error"]


@dataclass
class CheckResult:
    name: str
    checked: int = 0
    violations: int = 0
    worst: float = 0.0  # largest violation amount (or largest error for tolerance checks)

    def record(self, ok, amount=0.0):
        self.checked += 1
        if not ok:
            self.violations += 1
        if math.isfinite(amount):
            self.worst = max(self.worst, float(amount))

    @property
    def passed(self):
        return self.checked > 0 and self.violations == 0

    def to_dict(self):
        return {"name": self.name, "checked": self.checked, "violations": self.violations,
                "worst": self.worst, "passed": self.passed}


@dataclass
class SuiteReport:
    suite: str
    seed: int
    trials: int
    checks: dict = field(default_factory=dict)

    def check(self, name):
        return self.checks.setdefault(name, CheckResult(name))

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def to_dict(self):
        return {"suite": self.suite, "seed": self.seed, "trials": self.trials, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks.values()]}


# -- finite votes ------------------------------------------------------------------


def finite_vote_suite(seed=0, trials=200, identity_trials=1000):
    """Exact identities and every population-level inequality on random finite classes."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("finite-vote", seed, trials)

    a = rng.uniform(-8.0, 8.0, identity_trials)
    gap = np.abs(phi(a) - (0.5 * phi_dis(a) + phi(a) ** 2))
    for g in gap:
        rep.check("per-example identity").record(g <= 1e-12, g)
    for _ in range(identity_trials):
        vote, (dom,) = ev.random_instance(rng, n_domains=1)
        g = abs(ev.exact_gibbs_risk(vote, dom) - (0.5 * ev.exact_disagreement(vote, dom) + ev.exact_joint_error(vote, dom)))
        rep.check("risk decomposition").record(g <= 1e-12, g)

    for _ in range(trials):
        vote, (ds, dt, du) = ev.random_instance(rng, n_domains=3)
        P = vote.predictions
        rs, rt = ev.exact_gibbs_risk(vote, ds), ev.exact_gibbs_risk(vote, dt)

        hdh = ev.h_delta_h_distance(P, ds, dt)
        dis = ev.exact_dis_rho(vote, ds, dt)
        rep.check("dis <= half H-delta-H").record(dis <= hdh + 1e-12, dis - hdh)

        rb = ev.exact_majority_vote_risk(vote, ds)
        rep.check("vote risk <= twice Gibbs risk").record(rb <= 2 * rs + 1e-12, rb - 2 * rs)

        cb = ev.c_bound(vote, ds)
        if cb is not None:
            rep.check("C-bound").record(rb <= cb + 1e-12, rb - cb)

        lam = ev.exact_lambda(vote, ds, dt)
        rhs = rs + 0.5 * dis + lam
        rep.check("adaptation bound").record(rt <= rhs + 1e-12, rt - rhs)

        mu, _ = ev.ben_david_terms(P, ds, dt)
        risk_s = ev.hypothesis_risks(P, ds)
        risk_t = ev.hypothesis_risks(P, dt)
        worst = float(np.max(risk_t - (risk_s + hdh + mu)))
        rep.check("H-delta-H adaptation bound").record(worst <= 1e-12, worst)

        v = rng.dirichlet(np.ones(2))
        mixed = ev.exact_dis_rho_mixture(vote, [ds, du], v, dt)
        avg = v[0] * ev.exact_dis_rho(vote, ds, dt) + v[1] * ev.exact_dis_rho(vote, du, dt)
        rep.check("mixture disagreement").record(mixed <= avg + 1e-12, mixed - avg)

        d_st, d_su, d_ut = dis, ev.exact_dis_rho(vote, ds, du), ev.exact_dis_rho(vote, du, dt)
        rep.check("disagreement triangle").record(d_st <= d_su + d_ut + 1e-12, d_st - d_su - d_ut)
        rep.check("disagreement symmetry").record(
            abs(d_st - ev.exact_dis_rho(vote, dt, ds)) <= 1e-15, abs(d_st - ev.exact_dis_rho(vote, dt, ds))
        )
    return rep


# -- Monte Carlo ----------------------------------------------------------------------


def random_linear_case(rng, max_dim=6, max_points=40):
    """Random ``(model, sample)`` with margins spread over the interesting range."""
    d = int(rng.integers(1, max_dim + 1))
    m = int(rng.integers(1, max_points + 1))
    X = rng.standard_normal((m, d)) * rng.uniform(0.1, 3.0, d)
    y = rng.choice([-1.0, 1.0], m)
    w = rng.standard_normal(d) * rng.uniform(0.0, 3.0)
    return LinearModel(w), LabeledSample(X, y)


def mc_gaussian_suite(seed=0, trials=20, n_draws=100_000, n_sigma=3.0):
    """Closed-form Gibbs risk, self-disagreement and joint error against Monte-Carlo draws."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("mc-gaussian", seed, trials)
    closed = {"risk": gibbs_risk, "disagreement": gibbs_self_disagreement, "joint": gibbs_joint_error}
    for t in range(trials):
        model, sample = random_linear_case(rng)
        for quantity, fn in closed.items():
            exact = fn(model, sample)
            est, se = mc_gibbs_oracle(model, sample, n_draws, seed=[seed, t], quantity=quantity)
            z = abs(est - exact) / se if se > 0 else (0.0 if est == exact else math.inf)
            rep.check(f"{quantity} within {n_sigma:g} standard errors").record(z <= n_sigma, z)
    return rep


# -- gradients ------------------------------------------------------------------------


def finite_difference_error(value_and_grad, x, step=1e-5):
    """Relative error ``||g - g_fd|| / max(||g_fd||, 1e-8)`` against central differences."""
    x = np.asarray(x, dtype=float)
    _, g = value_and_grad(x)
    fd = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        fd[j] = (value_and_grad(x + e)[0] - value_and_grad(x - e)[0]) / (2.0 * step)
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-8))


def _rand_problem_data(rng, m, d):
    X = rng.standard_normal((m, d))
    y = rng.choice([-1.0, 1.0], m)
    Xt = rng.standard_normal((m, d)) + rng.uniform(-1.0, 1.0, d)
    return LabeledSample(X, y), UnlabeledSample(Xt)


def _away_from_kink(bracket, threshold=1e-3):
    return abs(bracket) >= threshold


def _redraw(draw, bracket, tries=10_000):
    """Draw points until the bracket clears the kink."""
    for _ in range(tries):
        x = draw()
        if _away_from_kink(bracket(x)):
            return x
    raise RuntimeError("could not draw a point away from the kink")


def gradient_suite(seed=0, trials=100, rel_tol=1e-5):
    """Analytic gradients of every objective against central differences (step 1e-5).

    PBDA points whose bracketed disagreement sum lies within 1e-3 of zero
    (the ``|.|`` kink) are redrawn.
    """
    rng = np.random.default_rng(seed)
    rep = SuiteReport("gradients", seed, trials)

    def point(d, scale=1.0):
        return rng.standard_normal(d) * scale

    for _ in range(trials):
        # in one dimension every normalized margin is +-w, so the bracket is identically zero
        m, d = int(rng.integers(3, 12)), int(rng.integers(2, 6))
        S, T = _rand_problem_data(rng, m, d)
        C, A = float(rng.uniform(0.1, 5.0)), float(rng.uniform(0.1, 5.0))
        convex = bool(rng.random() < 0.8)

        p = PBGD3Problem(S, C, convex)
        err = finite_difference_error(p.value_and_grad, point(d))
        rep.check("pbgd3 primal").record(err < rel_tol, err)

        p = PBDAProblem(S, T, A, C, convex)
        w = _redraw(lambda: point(d), p.bracket)
        err = finite_difference_error(p.value_and_grad, w)
        rep.check("pbda primal").record(err < rel_tol, err)

        S2, _ = _rand_problem_data(rng, m, d)
        v = rng.dirichlet(np.ones(2))
        p = MultiPBDAProblem([S, S2], v, T, A, C, convex)
        w = _redraw(lambda: point(d), lambda w: _multi_bracket(p, w))
        err = finite_difference_error(p.value_and_grad, w)
        rep.check("pbda multisource").record(err < rel_tol, err)

        kernel = KernelSpec("rbf", float(rng.uniform(0.1, 2.0)))
        K = kernel_matrix(S.X, S.X, kernel)
        p = PBGD3DualProblem(K, S.y, C, convex)
        err = finite_difference_error(p.value_and_grad, point(m, 0.5))
        rep.check("pbgd3 dual").record(err < rel_tol, err)

        anchors = np.vstack([S.X, T.X])
        K = kernel_matrix(anchors, anchors, kernel)
        p = PBDADualProblem(K, S.y, A, C, convex)
        alpha = _redraw(lambda: point(2 * m, 0.5), lambda a: _dual_bracket(p, a))
        err = finite_difference_error(p.value_and_grad, alpha)
        rep.check("pbda dual").record(err < rel_tol, err)
    return rep


def _multi_bracket(problem, w):
    s = sum(vj * np.sum(phi_dis(X @ w)) for vj, X in zip(problem.v, problem.Xs))
    return s - np.sum(phi_dis(problem.Xt @ w))


def _dual_bracket(problem, alpha):
    marg = (problem.K @ alpha) / problem.sqrt_diag
    d = phi_dis(marg)
    return problem.ws * np.sum(d[: problem.m]) - problem.wt * np.sum(d[problem.m:])


# -- bounds ---------------------------------------------------------------------------


def consistency_residues(kind, emp, kl_div, delta, exponents=range(2, 9)):
    """Bound minus empirical term at ``m = 10^k`` with ``c = 1/sqrt(m)`` or ``alpha = 1/(2 sqrt(m))``."""
    out = []
    for k in exponents:
        m = 10.0 ** k
        if kind == "catoni":
            value = B.catoni_bound(emp, kl_div, m, delta, 1.0 / math.sqrt(m)).value
        else:
            value = B.dis_catoni_bound(emp, kl_div, m, delta, 1.0 / (2.0 * math.sqrt(m))).value
        out.append(value - emp)
    return out


def bounds_suite(seed=0, trials=1000):
    rng = np.random.default_rng(seed)
    rep = SuiteReport("bounds-consistency", seed, trials)
    for _ in range(trials):
        emp = float(rng.uniform(0.0, 1.0))
        kl_div = float(rng.exponential(5.0))
        m = int(rng.integers(1, 100_000))
        delta = float(rng.uniform(0.001, 1.0))
        s = B.seeger_bound(emp, kl_div, m, delta).value
        mc = B.mcallester_bound(emp, kl_div, m, delta).value
        rep.check("seeger <= mcallester").record(s <= mc + 1e-12, s - mc)
        rep.check("seeger >= empirical").record(s >= emp - 1e-12, emp - s)
        dis = float(rng.uniform(0.0, 0.5))
        ds = B.dis_seeger_bound(dis, kl_div, m, delta).value
        dm = B.dis_mcallester_bound(dis, kl_div, m, delta).value
        rep.check("dis seeger <= dis mcallester").record(ds <= dm + 1e-12, ds - dm)

        q = float(rng.uniform(0.0, 0.99))
        eps = float(rng.uniform(1e-6, 0.5))
        p = B.kl_inverse_upper(q, eps)
        if p < 1.0 - 1e-6:  # nearer 1, one ulp of p moves kl by more than the tolerance
            err = abs(B.kl_bernoulli(q, p) - eps)
            rep.check("kl inverse self-consistency").record(err <= 1e-9, err)

    sweeps = {"catoni": (0.1, 2.0, 0.05), "dis_catoni": (0.1, 0.5, 0.1)}
    for kind, (emp, kl_div, delta) in sweeps.items():
        res = consistency_residues(kind, emp, kl_div, delta)
        decreasing = all(b < a for a, b in zip(res, res[1:]))
        rep.check(f"{kind} residues strictly decreasing").record(decreasing, 0.0)
        rep.check(f"{kind} residue below 1e-3 at m=1e8").record(0.0 <= res[-1] < 1e-3, res[-1])
    return rep


SUITES = {
    "finite-vote": finite_vote_suite,
    "mc-gaussian": mc_gaussian_suite,
    "gradients": gradient_suite,
    "bounds-consistency": bounds_suite,
}


def run_suite(name, seed=0, trials=None):
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}") from None
    return fn(seed) if trials is None else fn(seed, trials)
