"""Linear (primal) and kernel-expansion (dual) classifiers, plus JSON I/O."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .samples import as_csr

__all__ = ["KernelSpec", "LinearModel", "DualModel", "kernel_matrix", "load_model", "save_model"]


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("rbf kernel needs gamma > 0")
        elif self.gamma is not None:
            raise ValueError("gamma is only meaningful for the rbf kernel")

    def to_dict(self):
        d = {"kind": self.kind}
        if self.gamma is not None:
            d["gamma"] = float(self.gamma)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d.get("gamma"))

    def __str__(self):
        return "linear" if self.kind == "linear" else f"rbf(gamma={self.gamma:g})"


def kernel_matrix(X1, X2, kernel):
    """Dense Gram matrix ``k(X1[i], X2[j])``."""
    if kernel.kind == "linear":
        if sp.issparse(X1) or sp.issparse(X2):
            G = as_csr(X1) @ as_csr(X2).T
            return np.asarray(G.todense())
        return np.asarray(X1, dtype=float) @ np.asarray(X2, dtype=float).T
    A = X1.toarray() if sp.issparse(X1) else np.asarray(X1, dtype=float)
    B = X2.toarray() if sp.issparse(X2) else np.asarray(X2, dtype=float)
    return np.exp(-kernel.gamma * cdist(A, B, "sqeuclidean"))


def _sign(values):
    # ties go to +1
    return np.where(values >= 0.0, 1.0, -1.0)


@dataclass
class LinearModel:
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @property
    def dim(self):
        return self.weights.shape[0]

    def decision_function(self, X):
        if X.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: model has {self.dim}, data has {X.shape[-1]}")
        if sp.issparse(X):
            return as_csr(X) @ self.weights
        return np.asarray(X, dtype=float) @ self.weights

    def predict(self, X):
        return _sign(self.decision_function(X))

    def to_dict(self):
        return {"type": "primal", "weights": self.weights.tolist(), "kernel": {"kind": "linear"}}


@dataclass
class DualModel:
    """``h(x) = sign(sum_i alphas[i] * k(anchors[i], x))``."""

    alphas: np.ndarray
    anchors: object
    kernel: KernelSpec

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float).ravel()
        if self.anchors.shape[0] != self.alphas.shape[0]:
            raise ValueError("one coefficient per anchor point is required")

    def decision_function(self, X):
        if X.shape[-1] != self.anchors.shape[1]:
            raise ValueError("dimension mismatch between anchors and data")
        return kernel_matrix(X, self.anchors, self.kernel) @ self.alphas

    def predict(self, X):
        return _sign(self.decision_function(X))

    def primal_weights(self):
        """Explicit ``w = sum_i alphas[i] x_i``; linear kernel only."""
        if self.kernel.kind != "linear":
            raise ValueError("primal weights exist only for the linear kernel")
        A = self.anchors
        return np.asarray(A.T @ self.alphas).ravel()

    def to_dict(self, anchors_ref=None):
        d = {"type": "dual", "alphas": self.alphas.tolist(), "kernel": self.kernel.to_dict()}
        if anchors_ref is not None:
            d["anchors_ref"] = str(anchors_ref)
            d["n_features"] = int(self.anchors.shape[1])
        else:
            A = self.anchors.toarray() if sp.issparse(self.anchors) else np.asarray(self.anchors)
            d["anchors"] = A.tolist()
        return d


def save_model(model, path, anchors_ref=None, extra=None):
    d = model.to_dict(anchors_ref) if isinstance(model, DualModel) else model.to_dict()
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=1))


def model_from_dict(d, base_dir=None):
    if d["type"] == "primal":
        return LinearModel(d["weights"])
    if d["type"] != "dual":
        raise ValueError(f"unknown model type {d['type']!r}")
    kernel = KernelSpec.from_dict(d["kernel"])
    if "anchors" in d:
        anchors = np.asarray(d["anchors"], dtype=float)
    else:
        from .data import read_svmlight

        ref = Path(d["anchors_ref"])
        if base_dir is not None and not ref.is_absolute():
            ref = Path(base_dir) / ref
        anchors = read_svmlight(ref, n_features=d.get("n_features")).X
    return DualModel(d["alphas"], anchors, kernel)


def load_model(path):
    path = Path(path)
    return model_from_dict(json.loads(path.read_text()), base_dir=path.parent)
