"""Labeled and unlabeled samples, dense or sparse."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["LabeledSample", "UnlabeledSample", "as_csr", "row_norms", "normalized_rows"]


def _as_matrix(X):
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"instances must be a 2-d array, got shape {X.shape}")
    return X


def as_csr(X):
    """Canonical CSR form: sorted indices, no stored zeros.

    Dense and sparse inputs holding the same numbers map to identical CSR
    structures, so every reduction downstream runs in the same order.
    """
    M = sp.csr_matrix(X, dtype=float, copy=True)
    M.eliminate_zeros()
    M.sort_indices()
    return M


def row_norms(X):
    M = as_csr(X)
    return np.sqrt(np.asarray(M.multiply(M).sum(axis=1)).ravel())


def normalized_rows(X):
    """CSR copy of ``X`` with each row scaled to unit norm; zero rows stay zero."""
    M = as_csr(X)
    norms = row_norms(M)
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return as_csr(sp.diags(scale) @ M)


@dataclass(frozen=True)
class UnlabeledSample:
    X: object

    def __post_init__(self):
        X = _as_matrix(self.X)
        object.__setattr__(self, "X", X)

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.X)

    def subset(self, idx):
        return UnlabeledSample(self.X[np.asarray(idx, dtype=int)])

    def dense(self):
        return self.X.toarray() if self.is_sparse else self.X


@dataclass(frozen=True)
class LabeledSample:
    X: object
    y: np.ndarray

    def __post_init__(self):
        X = _as_matrix(self.X)
        y = np.asarray(self.y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} instances but {y.shape[0]} labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.X)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return LabeledSample(self.X[idx], self.y[idx])

    def unlabeled(self):
        return UnlabeledSample(self.X)

    def dense(self):
        return self.X.toarray() if self.is_sparse else self.X

    def flipped(self):
        return LabeledSample(self.X, -self.y)
