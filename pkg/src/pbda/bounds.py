"""PAC-Bayes bound evaluators: supervised, domain disagreement, domain adaptation, multisource.

Each evaluator takes empirical ingredients and returns a :class:`BoundReport`
carrying the value and everything that went into it.  ``kl_div`` is always
``KL(posterior || prior)``; the disagreement bounds double it internally
because they are stated on pairs of hypotheses.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoundReport",
    "kl_bernoulli",
    "kl_inverse_upper",
    "seeger_bound",
    "mcallester_bound",
    "catoni_bound",
    "dis_seeger_bound",
    "dis_mcallester_bound",
    "dis_catoni_bound",
    "dis_unequal_bound",
    "da_seeger_bound",
    "da_catoni_bound",
    "da_mcallester_bound",
    "multi_dis_catoni_union",
    "multi_dis_catoni_direct",
    "multi_da_catoni_bound",
    "BOUNDS",
    "evaluate",
]

BISECTION_TOL = 1e-12
BISECTION_MAX_ITER = 200


@dataclass
class BoundReport:
    name: str
    value: float
    ingredients: dict = field(default_factory=dict)
    valid: bool = True

    def to_dict(self):
        return {
            "name": self.name,
            "value": float(self.value),
            "ingredients": {k: float(v) for k, v in self.ingredients.items()},
            "valid": bool(self.valid),
        }

    def to_json(self, **kwargs):
        # json emits floats with repr, i.e. shortest round-tripping form (<= 17 digits)
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], float(d["value"]), {k: float(v) for k, v in d["ingredients"].items()}, bool(d["valid"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def kl_bernoulli(q, p):
    """Binary KL divergence ``kl(q || p)`` with ``0 ln 0 = 0``."""
    if not (0.0 <= q <= 1.0) or not (0.0 <= p <= 1.0):
        raise ValueError(f"kl arguments must lie in [0, 1], got q={q}, p={p}")
    if p in (0.0, 1.0):
        if q == p:
            return 0.0
        raise ValueError(f"kl(q || p) is infinite for p={p} and q={q}")
    value = 0.0
    if q > 0.0:
        value += q * math.log(q / p)
    if q < 1.0:
        value += (1.0 - q) * math.log((1.0 - q) / (1.0 - p))
    return max(value, 0.0)


def kl_inverse_upper(q, eps):
    """Largest ``p`` in ``[q, 1]`` with ``kl(q || p) <= eps``, by bisection.

    ``kl(q || .)`` increases strictly on ``[q, 1)``, so the feasible set is an
    interval.  Returns 1 when the whole interval is feasible.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0.0 or q == 1.0:
        return float(q)
    # kl(q || p) -> inf as p -> 1 unless q == 1, so an interior root exists
    # Bisect down to adjacent doubles (well past BISECTION_TOL): near p = 1 the
    # slope of kl(q || .) is steep and a 1e-12 bracket leaves visible kl error.
    lo, hi = q, 1.0
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl_bernoulli(q, mid) <= eps:
            lo = mid
        else:
            hi = mid
    return float(lo)


def _check(m=None, delta=None, c=None, alpha=None, kl_div=None, m_prime=None):
    if m is not None and m < 1:
        raise ValueError("sample size must be at least 1")
    if m_prime is not None and m_prime < 1:
        raise ValueError("sample size must be at least 1")
    if delta is not None and not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if c is not None and not c > 0:
        raise ValueError("c must be positive")
    if alpha is not None and not alpha > 0:
        raise ValueError("alpha must be positive")
    if kl_div is not None and kl_div < 0:
        raise ValueError("KL divergence must be non-negative")


def catoni_factor(c):
    """``c / (1 - exp(-c))`` computed stably for small ``c``."""
    return c / -math.expm1(-c)


def dis_catoni_factor(alpha):
    """``2 alpha / (1 - exp(-2 alpha))``."""
    return catoni_factor(2.0 * alpha)


def _report(name, value, valid=True, **ingredients):
    return BoundReport(name, float(value), ingredients, bool(valid and math.isfinite(value)))


# -- supervised risk -------------------------------------------------------


def seeger_bound(emp_risk, kl_div, m, delta):
    _check(m=m, delta=delta, kl_div=kl_div)
    eps = (kl_div + math.log(2.0 * math.sqrt(m) / delta)) / m
    value = kl_inverse_upper(emp_risk, eps)
    return _report("seeger", value, empirical_risk=emp_risk, kl_term=kl_div, delta=delta, m=m, epsilon=eps)


def mcallester_bound(emp_risk, kl_div, m, delta):
    _check(m=m, delta=delta, kl_div=kl_div)
    value = emp_risk + math.sqrt((kl_div + math.log(2.0 * math.sqrt(m) / delta)) / (2.0 * m))
    return _report("mcallester", value, empirical_risk=emp_risk, kl_term=kl_div, delta=delta, m=m)


def catoni_bound(emp_risk, kl_div, m, delta, c):
    _check(m=m, delta=delta, c=c, kl_div=kl_div)
    value = catoni_factor(c) * (emp_risk + (kl_div + math.log(1.0 / delta)) / (m * c))
    return _report("catoni", value, empirical_risk=emp_risk, kl_term=kl_div, delta=delta, m=m, c=c)


# -- domain disagreement ---------------------------------------------------


def dis_seeger_bound(emp_dis, kl_div, m, delta):
    _check(m=m, delta=delta, kl_div=kl_div)
    eps = (2.0 * kl_div + math.log(2.0 * math.sqrt(m) / delta)) / m
    value = 2.0 * kl_inverse_upper((emp_dis + 1.0) / 2.0, eps) - 1.0
    return _report("dis_seeger", value, empirical_dis=emp_dis, kl_term=kl_div, delta=delta, m=m, epsilon=eps)


def dis_mcallester_bound(emp_dis, kl_div, m, delta):
    _check(m=m, delta=delta, kl_div=kl_div)
    value = emp_dis + 2.0 * math.sqrt((2.0 * kl_div + math.log(2.0 * math.sqrt(m) / delta)) / (2.0 * m))
    return _report("dis_mcallester", value, empirical_dis=emp_dis, kl_term=kl_div, delta=delta, m=m)


def dis_catoni_bound(emp_dis, kl_div, m, delta, alpha):
    _check(m=m, delta=delta, alpha=alpha, kl_div=kl_div)
    a_prime = dis_catoni_factor(alpha)
    value = a_prime * (emp_dis + (2.0 * kl_div + math.log(2.0 / delta)) / (m * alpha) + 1.0) - 1.0
    return _report("dis_catoni", value, empirical_dis=emp_dis, kl_term=kl_div, delta=delta, m=m, alpha=alpha)


def dis_unequal_bound(emp_dis, kl_div, m, m_prime, delta):
    """Disagreement bound for source and target samples of different sizes."""
    _check(m=m, m_prime=m_prime, delta=delta, kl_div=kl_div)
    value = (
        emp_dis
        + math.sqrt((2.0 * kl_div + math.log(4.0 * math.sqrt(m) / delta)) / (2.0 * m))
        + math.sqrt((2.0 * kl_div + math.log(4.0 * math.sqrt(m_prime) / delta)) / (2.0 * m_prime))
    )
    return _report("dis_unequal", value, empirical_dis=emp_dis, kl_term=kl_div, delta=delta, m=m, m_prime=m_prime)


# -- domain adaptation -----------------------------------------------------


def da_seeger_bound(emp_risk, emp_dis, kl_div, m, delta, lam=0.0):
    _check(m=m, delta=delta, kl_div=kl_div)
    log_term = math.log(4.0 * math.sqrt(m) / delta)
    sup_risk = kl_inverse_upper(emp_risk, (kl_div + log_term) / m)
    sup_dis = 2.0 * kl_inverse_upper((emp_dis + 1.0) / 2.0, (2.0 * kl_div + log_term) / m) - 1.0
    value = sup_risk + 0.5 * sup_dis + lam
    return _report(
        "da_seeger", value,
        empirical_risk=emp_risk, empirical_dis=emp_dis, kl_term=kl_div, delta=delta, m=m, **{"lambda": lam},
    )


def da_catoni_bound(emp_risk, emp_dis, kl_div, m, delta, c, alpha, lam=0.0):
    _check(m=m, delta=delta, c=c, alpha=alpha, kl_div=kl_div)
    c_prime = catoni_factor(c)
    a_prime = dis_catoni_factor(alpha)
    value = (
        c_prime * emp_risk
        + a_prime * 0.5 * emp_dis
        + (c_prime / c + a_prime / alpha) * (kl_div + math.log(3.0 / delta)) / m
        + lam
        + 0.5 * (a_prime - 1.0)
    )
    return _report(
        "da_catoni", value,
        empirical_risk=emp_risk, empirical_dis=emp_dis, kl_term=kl_div, delta=delta, m=m, c=c, alpha=alpha,
        **{"lambda": lam},
    )


def da_mcallester_bound(emp_risk, emp_dis, kl_div, m1, m2, m_prime, delta, lam=0.0):
    """Risk on a labeled sample of size ``m1``; disagreement on ``m2`` source and ``m_prime`` target points."""
    _check(m=m1, delta=delta, kl_div=kl_div)
    _check(m=m2, m_prime=m_prime)
    value = (
        emp_risk
        + 0.5 * emp_dis
        + lam
        + math.sqrt((kl_div + math.log(4.0 * math.sqrt(m1) / delta)) / (2.0 * m1))
        + math.sqrt((2.0 * kl_div + math.log(8.0 * math.sqrt(m2) / delta)) / (8.0 * m2))
        + math.sqrt((2.0 * kl_div + math.log(8.0 * math.sqrt(m_prime) / delta)) / (8.0 * m_prime))
    )
    return _report(
        "da_mcallester", value,
        empirical_risk=emp_risk, empirical_dis=emp_dis, kl_term=kl_div, delta=delta,
        m1=m1, m2=m2, m_prime=m_prime, **{"lambda": lam},
    )


# -- multisource -----------------------------------------------------------


def _mixture_weights(v, n):
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != n or np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
        raise ValueError("v must be a probability vector with one weight per source")
    return v


def multi_dis_catoni_union(per_source_emp_dis, v, kl_div, m, delta, alpha, n=None):
    """Union bound over sources: pays ``ln n`` and uses the v-average of per-source disagreements."""
    dis = np.asarray(per_source_emp_dis, dtype=float).ravel()
    n = dis.shape[0] if n is None else int(n)
    if n != dis.shape[0]:
        raise ValueError("n must equal the number of sources")
    v = _mixture_weights(v, n)
    _check(m=m, delta=delta, alpha=alpha, kl_div=kl_div)
    a_prime = dis_catoni_factor(alpha)
    avg = float(v @ dis)
    value = a_prime * (avg + (2.0 * kl_div + math.log(2.0 / delta) + math.log(n)) / (m * alpha) + 1.0) - 1.0
    return _report(
        "multi_dis_catoni_union", value,
        empirical_dis=avg, kl_term=kl_div, delta=delta, m=m, alpha=alpha, n_sources=n,
    )


def multi_dis_catoni_direct(emp_dis_mixture, kl_div, m, delta, alpha):
    """Direct bound on the mixture disagreement ``|sum_j v_j R_Sj(G,G) - R_T(G,G)|``."""
    report = dis_catoni_bound(emp_dis_mixture, kl_div, m, delta, alpha)
    report.name = "multi_dis_catoni_direct"
    return report


def multi_da_catoni_bound(emp_risk_mixture, emp_dis_mixture, kl_div, m, delta, c, alpha, lambda_v=0.0):
    report = da_catoni_bound(emp_risk_mixture, emp_dis_mixture, kl_div, m, delta, c, alpha, lambda_v)
    report.name = "multi_da_catoni"
    return report


BOUNDS = {
    "seeger": seeger_bound,
    "mcallester": mcallester_bound,
    "catoni": catoni_bound,
    "dis_seeger": dis_seeger_bound,
    "dis_mcallester": dis_mcallester_bound,
    "dis_catoni": dis_catoni_bound,
    "dis_unequal": dis_unequal_bound,
    "da_seeger": da_seeger_bound,
    "da_catoni": da_catoni_bound,
    "da_mcallester": da_mcallester_bound,
    "multi_dis_catoni_union": multi_dis_catoni_union,
    "multi_dis_catoni_direct": multi_dis_catoni_direct,
    "multi_da_catoni": multi_da_catoni_bound,
}


def evaluate(name, **ingredients):
    """Evaluate a bound by name; ``lambda`` is accepted as an alias of ``lam``."""
    try:
        fn = BOUNDS[name]
    except KeyError:
        raise ValueError(f"unknown bound {name!r}; choose from {sorted(BOUNDS)}") from None
    if "lambda" in ingredients:
        key = "lambda_v" if name == "multi_da_catoni" else "lam"
        ingredients[key] = ingredients.pop("lambda")
    return fn(**ingredients)
