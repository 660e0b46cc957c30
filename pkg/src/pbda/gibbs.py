"""Closed-form Gibbs quantities for the isotropic Gaussian posterior centered at ``w``.

A posterior draw ``w' ~ N(w, I)`` labels ``x`` with ``sign(w'.x)``; integrating
over the draw turns every 0-1 expectation into a function of the normalized
margin ``w.x / ||x||``.  Zero instances get margin 0.
"""

import numpy as np

from .losses import phi, phi_dis
from .models import DualModel, LinearModel, kernel_matrix
from .samples import as_csr, row_norms

__all__ = [
    "predict",
    "normalized_margins",
    "gibbs_risk",
    "gibbs_self_disagreement",
    "domain_disagreement",
    "gibbs_joint_error",
    "kl_gaussian",
    "mc_gibbs_oracle",
    "model_margins",
    "model_kl",
    "empirical_terms",
]


def _weights(model):
    if isinstance(model, LinearModel):
        return model.weights
    return LinearModel(model).weights


def predict(model, x):
    """Majority-vote label of a single instance; a zero dot product gives +1."""
    w = _weights(model)
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != w.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {w.shape[0]}")
    return 1 if float(x @ w) >= 0.0 else -1


def normalized_margins(model, X):
    """``w.x_i / ||x_i||`` for every row of ``X`` (dense or sparse)."""
    w = _weights(model)
    if X.shape[1] != w.shape[0]:
        raise ValueError(f"dimension mismatch: data has {X.shape[1]}, model has {w.shape[0]}")
    M = as_csr(X)
    dots = M @ w
    norms = row_norms(M)
    return np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)


def _nonempty(sample):
    if len(sample) == 0:
        raise ValueError("sample is empty")
    return sample


def gibbs_risk(model, sample):
    _nonempty(sample)
    return float(np.mean(phi(sample.y * normalized_margins(model, sample.X))))


def gibbs_self_disagreement(model, sample):
    """Expected disagreement of two independent posterior draws on ``sample``."""
    _nonempty(sample)
    return float(np.mean(phi_dis(normalized_margins(model, sample.X))))


def domain_disagreement(model, source, target):
    return abs(gibbs_self_disagreement(model, source) - gibbs_self_disagreement(model, target))


def gibbs_joint_error(model, sample):
    """Probability that two independent posterior draws both err."""
    _nonempty(sample)
    return float(np.mean(phi(sample.y * normalized_margins(model, sample.X)) ** 2))


def kl_gaussian(model):
    w = _weights(model)
    return 0.5 * float(w @ w)


def mc_gibbs_oracle(model, sample, n_draws, seed, quantity="risk", chunk=2000):
    """Monte-Carlo estimate of a Gibbs quantity by drawing ``w' ~ N(w, I)``.

    ``quantity`` is one of ``"risk"``, ``"disagreement"`` or ``"joint"``; the
    latter two draw an independent pair per replicate.  Returns
    ``(estimate, std_error)`` over the per-draw sample averages.
    """
    if n_draws < 1000:
        raise ValueError("n_draws must be at least 1000")
    if quantity not in ("risk", "disagreement", "joint"):
        raise ValueError(f"unknown quantity {quantity!r}")
    w = _weights(model)
    _nonempty(sample)
    X = sample.dense()
    if X.shape[1] != w.shape[0]:
        raise ValueError("dimension mismatch")
    y = getattr(sample, "y", None)
    if quantity != "disagreement" and y is None:
        raise ValueError(f"{quantity!r} needs a labeled sample")
    rng = np.random.default_rng(seed)
    per_draw = np.empty(n_draws)
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        W1 = w + rng.standard_normal((n, w.shape[0]))
        p1 = np.where(X @ W1.T >= 0.0, 1.0, -1.0)
        if quantity == "risk":
            vals = (p1 != y[:, None]).mean(axis=0)
        else:
            W2 = w + rng.standard_normal((n, w.shape[0]))
            p2 = np.where(X @ W2.T >= 0.0, 1.0, -1.0)
            if quantity == "disagreement":
                vals = (p1 != p2).mean(axis=0)
            else:
                vals = ((p1 != y[:, None]) & (p2 != y[:, None])).mean(axis=0)
        per_draw[done:done + n] = vals
        done += n
    return float(per_draw.mean()), float(per_draw.std(ddof=1) / np.sqrt(n_draws))


def model_margins(model, X):
    """Normalized margins for primal or kernel models.

    For a dual model the feature-space norm is ``sqrt(k(x, x))``, so the
    margin is the decision value over that root (zero when it vanishes).
    """
    if isinstance(model, DualModel):
        f = model.decision_function(X)
        if model.kernel.kind == "rbf":
            return f
        norms = row_norms(X)
        return np.divide(f, norms, out=np.zeros_like(f), where=norms > 0)
    return normalized_margins(model, X)


def model_kl(model):
    """``KL = ||w||^2 / 2``; for dual models ``alpha^T K alpha / 2`` over the anchors."""
    if isinstance(model, DualModel):
        K = kernel_matrix(model.anchors, model.anchors, model.kernel)
        return 0.5 * float(model.alphas @ K @ model.alphas)
    return kl_gaussian(model)


def empirical_terms(model, source, target=None):
    """Empirical Gibbs risk on ``source``, KL and (with a target) the domain disagreement."""
    _nonempty(source)
    ms = model_margins(model, source.X)
    out = {"empirical_risk": float(np.mean(phi(source.y * ms))), "kl": model_kl(model), "m": len(source)}
    if target is not None:
        _nonempty(target)
        mt = model_margins(model, target.X)
        out["empirical_dis"] = abs(float(np.mean(phi_dis(ms))) - float(np.mean(phi_dis(mt))))
        out["m_prime"] = len(target)
    return out
