"""PBGD3 and PBDA objectives (primal and kernel dual), a quasi-Newton driver, and trainers.

Objectives are built once per data set as small problem objects that cache
the normalized instances or the kernel matrix; the module-level
``*_objective`` / ``*_gradient`` functions are thin wrappers for one-off
evaluation and testing.
"""

import hashlib
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize as _scipy_minimize

from .losses import dis_and_prime, risk_loss_and_prime
from .models import DualModel, KernelSpec, LinearModel, kernel_matrix
from .samples import normalized_rows

__all__ = [
    "Hyperparams",
    "Settings",
    "NumericalError",
    "PBGD3Problem",
    "PBDAProblem",
    "MultiPBDAProblem",
    "PBGD3DualProblem",
    "PBDADualProblem",
    "pbgd3_objective",
    "pbgd3_gradient",
    "pbgd3_dual_objective",
    "pbgd3_dual_gradient",
    "pbda_objective",
    "pbda_gradient",
    "pbda_dual_objective",
    "pbda_dual_gradient",
    "multi_pbda_objective",
    "multi_pbda_gradient",
    "MinimizeResult",
    "KernelMap",
    "minimize",
    "train_pbgd3",
    "train_pbda",
    "train_multi_pbda",
    "make_trainer",
]


class NumericalError(RuntimeError):
    """The objective or gradient became non-finite during minimization."""


@dataclass(frozen=True)
class Hyperparams:
    C: float
    A: float = 0.0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.A >= 0:
            raise ValueError("A must be non-negative")


@dataclass(frozen=True)
class Settings:
    tol: float = 1e-6
    max_iter: int = 2000
    convex: bool = True  # phi_cvx for the source risk; False gives the non-convex phi
    unequal_sizes: bool = False




def _sign(x):
    # s = 0 exactly on the kink is a valid subgradient choice
    return float(np.sign(x))


def _dis_scale(m, m_prime, unequal):
    """Weights turning per-point phi_dis values into the bracketed disagreement sum."""
    if m == m_prime:
        return 1.0, 1.0
    if not unequal:
        raise ValueError(
            f"source has {m} points and target {m_prime}; equal sizes are required "
            "unless the unequal_sizes option is set"
        )
    return 1.0, m / m_prime


# -- primal ----------------------------------------------------------------


class PBGD3Problem:
    """``C sum_i loss(y_i w.x_i/||x_i||) + ||w||^2 / 2``."""

    def __init__(self, S, C, convex=True):
        self._setup(normalized_rows(S.X), S.y, C, convex)

    def _setup(self, Xn, y, C, convex):
        if not C > 0:
            raise ValueError("C must be positive")
        self.Xn = Xn
        self.y = np.asarray(y, dtype=float)
        self.C = float(C)
        self.convex = convex

    @classmethod
    def from_normalized(cls, Xn, y, C, convex=True):
        """Build from rows already divided by their norms (e.g. kernel-map features)."""
        self = cls.__new__(cls)
        self._setup(Xn, y, C, convex)
        return self

    @property
    def dim(self):
        return self.Xn.shape[1]

    def _check(self, w):
        w = np.asarray(w, dtype=float).ravel()
        if w.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: w has {w.shape[0]}, data has {self.dim}")
        return w

    def value_and_grad(self, w):
        w = self._check(w)
        a = self.y * (self.Xn @ w)
        loss, dloss = risk_loss_and_prime(a, self.convex)
        value = self.C * np.sum(loss) + 0.5 * (w @ w)
        grad = self.Xn.T @ (self.C * self.y * dloss) + w
        return float(value), np.asarray(grad).ravel()

    def value(self, w):
        return self.value_and_grad(w)[0]

    def grad(self, w):
        return self.value_and_grad(w)[1]


class PBDAProblem(PBGD3Problem):
    """PBGD3 objective plus ``A |sum_i phi_dis(source margin) - phi_dis(target margin)|``."""

    def __init__(self, S, T, A, C, convex=True, unequal_sizes=False):
        if T.dim != S.dim:
            raise ValueError("source and target dimensions differ")
        self._setup(normalized_rows(S.X), S.y, C, convex)
        self._setup_target(normalized_rows(T.X), A, unequal_sizes)

    def _setup_target(self, Xt, A, unequal_sizes):
        if not A >= 0:
            raise ValueError("A must be non-negative")
        self.Xt = Xt
        self.A = float(A)
        self.ws, self.wt = _dis_scale(self.Xn.shape[0], Xt.shape[0], unequal_sizes)

    @classmethod
    def from_normalized(cls, Xs, y, Xt, A, C, convex=True, unequal_sizes=False):
        self = cls.__new__(cls)
        self._setup(Xs, y, C, convex)
        self._setup_target(Xt, A, unequal_sizes)
        return self

    def bracket(self, w):
        w = self._check(w)
        return self.ws * np.sum(dis_and_prime(self.Xn @ w)[0]) - self.wt * np.sum(dis_and_prime(self.Xt @ w)[0])

    def value_and_grad(self, w):
        w = self._check(w)
        ms = self.Xn @ w
        loss, dloss = risk_loss_and_prime(self.y * ms, self.convex)
        ds, ds_prime = dis_and_prime(ms)
        dt, dt_prime = dis_and_prime(self.Xt @ w)
        b = self.ws * np.sum(ds) - self.wt * np.sum(dt)
        value = self.C * np.sum(loss) + 0.5 * (w @ w)
        value += self.A * abs(b)
        u = self.C * self.y * dloss
        s = _sign(b)
        if s != 0.0 and self.A != 0.0:
            u = u + (self.A * s * self.ws) * ds_prime
            grad = self.Xn.T @ u - self.Xt.T @ ((self.A * s * self.wt) * dt_prime) + w
        else:
            grad = self.Xn.T @ u + w
        return float(value), np.asarray(grad).ravel()


class MultiPBDAProblem:
    """Multisource PBDA with fixed mixture weights ``v`` over source samples."""

    def __init__(self, sources, v, T, A, C, convex=True):
        v = np.asarray(v, dtype=float).ravel()
        if v.shape[0] != len(sources) or np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
            raise ValueError("v must be a probability vector with one weight per source")
        if not C > 0 or not A >= 0:
            raise ValueError("need C > 0 and A >= 0")
        m = len(T)
        for S in sources:
            if len(S) != m:
                raise ValueError("every source sample must have the target's size")
            if S.dim != T.dim:
                raise ValueError("source and target dimensions differ")
        self.Xs = [normalized_rows(S.X) for S in sources]
        self.ys = [S.y for S in sources]
        self.Xt = normalized_rows(T.X)
        self.v = v
        self.A = float(A)
        self.C = float(C)
        self.convex = convex

    @property
    def dim(self):
        return self.Xt.shape[1]

    def value_and_grad(self, w):
        w = np.asarray(w, dtype=float).ravel()
        if w.shape[0] != self.dim:
            raise ValueError("dimension mismatch")
        risk = 0.0
        dis_s = 0.0
        grad = w.copy()
        dis_grad = np.zeros_like(w)
        for vj, X, y in zip(self.v, self.Xs, self.ys):
            ms = X @ w
            loss, dloss = risk_loss_and_prime(y * ms, self.convex)
            ds, ds_prime = dis_and_prime(ms)
            risk += vj * np.sum(loss)
            dis_s += vj * np.sum(ds)
            grad += self.C * vj * (X.T @ (y * dloss))
            dis_grad += vj * (X.T @ ds_prime)
        dt, dt_prime = dis_and_prime(self.Xt @ w)
        b = dis_s - np.sum(dt)
        value = self.C * risk + 0.5 * (w @ w)
        value += self.A * abs(b)
        s = _sign(b)
        if s != 0.0 and self.A != 0.0:
            grad += self.A * s * (dis_grad - self.Xt.T @ dt_prime)
        return float(value), np.asarray(grad).ravel()

    def value(self, w):
        return self.value_and_grad(w)[0]

    def grad(self, w):
        return self.value_and_grad(w)[1]


# -- dual ------------------------------------------------------------------


def _check_gram(K):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("kernel matrix must be square")
    if not np.all(np.isfinite(K)):
        raise NumericalError("kernel matrix has non-finite entries (overflowing features?)")
    d = np.diag(K)
    if np.any(d <= 0):
        raise ValueError("kernel matrix has a non-positive diagonal entry")
    if not np.allclose(K, K.T, rtol=1e-10, atol=1e-12):
        raise ValueError("kernel matrix must be symmetric")
    return K, np.sqrt(d)


class PBGD3DualProblem:
    """PBGD3 in the representer coefficients: ``w = sum_j alpha_j phi(x_j)``."""

    def __init__(self, K, labels, C, convex=True):
        self.K, self.sqrt_diag = _check_gram(K)
        self.y = np.asarray(labels, dtype=float).ravel()
        if self.y.shape[0] > self.K.shape[0]:
            raise ValueError("more labels than anchor points")
        if not C > 0:
            raise ValueError("C must be positive")
        self.m = self.y.shape[0]
        self.C = float(C)
        self.convex = convex

    @property
    def dim(self):
        return self.K.shape[0]

    def _margins(self, alpha):
        alpha = np.asarray(alpha, dtype=float).ravel()
        if alpha.shape[0] != self.dim:
            raise ValueError(f"alpha has {alpha.shape[0]} entries, kernel matrix has {self.dim} rows")
        Ka = self.K @ alpha
        return alpha, Ka, Ka / self.sqrt_diag

    def _risk_terms(self, marg):
        m = self.m
        loss, dloss = risk_loss_and_prime(self.y * marg[:m], self.convex)
        u = np.zeros(self.dim)
        u[:m] = self.C * self.y * dloss / self.sqrt_diag[:m]
        return self.C * np.sum(loss), u

    def value_and_grad(self, alpha):
        alpha, Ka, marg = self._margins(alpha)
        risk, u = self._risk_terms(marg)
        value = risk + 0.5 * (alpha @ Ka)
        return float(value), self.K @ u + Ka

    def value(self, alpha):
        return self.value_and_grad(alpha)[0]

    def grad(self, alpha):
        return self.value_and_grad(alpha)[1]


class PBDADualProblem(PBGD3DualProblem):
    """Kernel PBDA over source-then-target anchors (first ``m`` rows are the source)."""

    def __init__(self, K, labels, A, C, convex=True, unequal_sizes=False):
        super().__init__(K, labels, C, convex)
        if not A >= 0:
            raise ValueError("A must be non-negative")
        self.A = float(A)
        self.ws, self.wt = _dis_scale(self.m, self.dim - self.m, unequal_sizes)

    def value_and_grad(self, alpha):
        alpha, Ka, marg = self._margins(alpha)
        risk, u = self._risk_terms(marg)
        m = self.m
        d, d_prime = dis_and_prime(marg)
        b = self.ws * np.sum(d[:m]) - self.wt * np.sum(d[m:])
        value = risk + self.A * abs(b) + 0.5 * (alpha @ Ka)
        s = _sign(b)
        if s != 0.0 and self.A != 0.0:
            g = d_prime / self.sqrt_diag
            g[:m] *= self.ws
            g[m:] *= -self.wt
            u = u + self.A * s * g
        return float(value), self.K @ u + Ka


# -- one-off wrappers --------------------------------------------------------


def pbgd3_objective(w, S, C):
    return PBGD3Problem(S, C).value(w)


def pbgd3_gradient(w, S, C):
    return PBGD3Problem(S, C).grad(w)


def pbda_objective(w, S, T, A, C, unequal_sizes=False):
    return PBDAProblem(S, T, A, C, unequal_sizes=unequal_sizes).value(w)


def pbda_gradient(w, S, T, A, C, unequal_sizes=False):
    return PBDAProblem(S, T, A, C, unequal_sizes=unequal_sizes).grad(w)


def multi_pbda_objective(w, sources, v, T, A, C):
    return MultiPBDAProblem(sources, v, T, A, C).value(w)


def multi_pbda_gradient(w, sources, v, T, A, C):
    return MultiPBDAProblem(sources, v, T, A, C).grad(w)


def pbgd3_dual_objective(alpha, K, labels, C):
    return PBGD3DualProblem(K, labels, C).value(alpha)


def pbgd3_dual_gradient(alpha, K, labels, C):
    return PBGD3DualProblem(K, labels, C).grad(alpha)


def pbda_dual_objective(alpha, K, labels, A, C, unequal_sizes=False):
    return PBDADualProblem(K, labels, A, C, unequal_sizes=unequal_sizes).value(alpha)


def pbda_dual_gradient(alpha, K, labels, A, C, unequal_sizes=False):
    return PBDADualProblem(K, labels, A, C, unequal_sizes=unequal_sizes).grad(alpha)


# -- minimization ------------------------------------------------------------


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    grad_norm: float
    message: str = ""


def minimize(value_and_grad, x0, tol=1e-6, max_iter=2000):
    """Minimize a smooth(ish) objective with L-BFGS and a strong-Wolfe line search.

    Stops once the gradient 2-norm is at most ``tol`` or after ``max_iter``
    iterations; ``converged`` reports which.  Deterministic for a given start.
    """
    x0 = np.asarray(x0, dtype=float).ravel().copy()

    def fun(x):
        value, grad = value_and_grad(x)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite objective or gradient (value={value}) at |x|={np.linalg.norm(x):.3g}")
        return value, grad

    value, grad = fun(x0)
    if np.linalg.norm(grad) <= tol:
        return MinimizeResult(x0, value, 0, True, float(np.linalg.norm(grad)), "initial point is stationary")
    res = _scipy_minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": tol / np.sqrt(x0.size), "ftol": 0.0, "maxcor": 20, "maxls": 50},
    )
    value, grad = fun(res.x)
    gnorm = float(np.linalg.norm(grad))
    return MinimizeResult(res.x, value, int(res.nit), gnorm <= tol, gnorm, str(res.message))


# -- trainers ----------------------------------------------------------------


def _info(result, **extra):
    d = {
        "objective": result.value,
        "iterations": result.iterations,
        "converged": result.converged,
        "grad_norm": result.grad_norm,
    }
    d.update(extra)
    return d


def _stack(*Xs):
    if any(sp.issparse(X) for X in Xs):
        return sp.vstack([sp.csr_matrix(X) for X in Xs]).tocsr()
    return np.vstack(Xs)


class KernelMap:
    """Empirical kernel map of a Gram matrix, ``K ~= Phi Phi^T``.

    Solving in ``beta = Phi^T alpha`` instead of ``alpha`` keeps the same
    objective values (``||beta||^2 = alpha^T K alpha``, ``Phi beta = K alpha``)
    but makes the regularizer the identity, which the quasi-Newton driver
    handles far better than the raw dual.  Eigen-directions below
    ``rcond * max eigenvalue`` are dropped.
    """

    def __init__(self, K, rcond=1e-10):
        K, sqrt_diag = _check_gram(K)
        evals, evecs = np.linalg.eigh(K)
        keep = evals > rcond * max(evals[-1], 0.0)
        self.U = evecs[:, keep]
        self.root = np.sqrt(evals[keep])
        self.features = self.U * self.root
        self.normalized = self.features / sqrt_diag[:, None]

    def to_beta(self, alpha):
        return self.features.T @ alpha

    def to_alpha(self, beta):
        return self.U @ (beta / self.root)


_KMAP_CACHE = OrderedDict()
_KMAP_CACHE_SIZE = 16


def _fingerprint(X):
    h = hashlib.blake2b(digest_size=16)
    if sp.issparse(X):
        M = sp.csr_matrix(X)
        for part in (M.indptr, M.indices, M.data):
            h.update(np.ascontiguousarray(part).tobytes())
    else:
        h.update(np.ascontiguousarray(X, dtype=float).tobytes())
    h.update(repr(X.shape).encode())
    return h.hexdigest()


def kernel_map(X, kernel):
    """:class:`KernelMap` of ``X`` under ``kernel``, memoized on the data bytes.

    Grid searches retrain on the same fold many times; the eigendecomposition
    is the dominant cost there and depends only on the anchors and the kernel.
    """
    key = (_fingerprint(X), kernel)
    kmap = _KMAP_CACHE.get(key)
    if kmap is None:
        kmap = KernelMap(kernel_matrix(X, X, kernel))
        _KMAP_CACHE[key] = kmap
        if len(_KMAP_CACHE) > _KMAP_CACHE_SIZE:
            _KMAP_CACHE.popitem(last=False)
    else:
        _KMAP_CACHE.move_to_end(key)
    return kmap


def train_pbgd3(S, C, kernel=None, settings=Settings(), init=None):
    """Source-only learner; returns a primal model, or a dual one if ``kernel`` is given.

    ``init`` is a starting weight vector (primal) or coefficient vector (dual).
    """
    if kernel is None:
        problem = PBGD3Problem(S, C, settings.convex)
        x0 = np.zeros(problem.dim) if init is None else init
        res = minimize(problem.value_and_grad, x0, settings.tol, settings.max_iter)
        model = LinearModel(res.x)
    else:
        kmap = kernel_map(S.X, kernel)
        problem = PBGD3Problem.from_normalized(kmap.normalized, S.y, C, settings.convex)
        x0 = np.zeros(problem.dim) if init is None else kmap.to_beta(init)
        res = minimize(problem.value_and_grad, x0, settings.tol, settings.max_iter)
        model = DualModel(kmap.to_alpha(res.x), S.X, kernel)
    model.info = _info(res, algo="pbgd3", C=C)
    return model


def train_pbda(S, T, A, C, kernel=None, settings=Settings(), warm=None):
    """PBDA warm-started from the convex PBGD3 solution.

    ``warm`` may carry a PBGD3 model already trained on ``S`` with the same
    ``C`` and kernel.  With ``A == 0`` the PBGD3 model itself is returned.
    """
    if warm is None:
        warm = train_pbgd3(S, C, kernel, settings)
    if A == 0:
        model = type(warm)(**{k: getattr(warm, k) for k in warm.__dataclass_fields__})
        model.info = dict(warm.info, algo="pbda", A=0.0)
        return model
    if kernel is None:
        problem = PBDAProblem(S, T, A, C, settings.convex, settings.unequal_sizes)
        res = minimize(problem.value_and_grad, warm.weights, settings.tol, settings.max_iter)
        model = LinearModel(res.x)
    else:
        anchors = _stack(S.X, T.X)
        kmap = kernel_map(anchors, kernel)
        m = len(S)
        problem = PBDAProblem.from_normalized(
            kmap.normalized[:m], S.y, kmap.normalized[m:], A, C, settings.convex, settings.unequal_sizes
        )
        x0 = kmap.to_beta(np.concatenate([warm.alphas, np.zeros(len(T))]))
        res = minimize(problem.value_and_grad, x0, settings.tol, settings.max_iter)
        model = DualModel(kmap.to_alpha(res.x), anchors, kernel)
    model.info = _info(res, algo="pbda", A=A, C=C, warm_start_iterations=warm.info["iterations"])
    return model


def train_multi_pbda(sources, v, T, A, C, settings=Settings()):
    """Primal multisource PBDA, warm-started from the ``A = 0`` (convex) problem."""
    warm = MultiPBDAProblem(sources, v, T, 0.0, C, settings.convex)
    res0 = minimize(warm.value_and_grad, np.zeros(warm.dim), settings.tol, settings.max_iter)
    if A == 0:
        model = LinearModel(res0.x)
        model.info = _info(res0, algo="pbda-multi", A=0.0, C=C)
        return model
    problem = MultiPBDAProblem(sources, v, T, A, C, settings.convex)
    res = minimize(problem.value_and_grad, res0.x, settings.tol, settings.max_iter)
    model = LinearModel(res.x)
    model.info = _info(res, algo="pbda-multi", A=A, C=C, warm_start_iterations=res0.iterations)
    return model


def make_trainer(algo, A=0.0, C=1.0, kernel=None, settings=Settings()):
    """Return ``trainer(source, target) -> model`` for ``"pbgd3"`` or ``"pbda"``.

    The PBGD3 trainer ignores the target sample.
    """
    if algo == "pbgd3":
        return lambda S, T=None: train_pbgd3(S, C, kernel, settings)
    if algo == "pbda":
        return lambda S, T: train_pbda(S, T, A, C, kernel, settings)
    raise ValueError(f"unknown algorithm {algo!r}")
