"""Rotated two-moons generator, svmlight text I/O and seeded sampling helpers."""

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .samples import LabeledSample, UnlabeledSample, as_csr

__all__ = [
    "MoonsConfig",
    "gen_moons",
    "rotate",
    "read_svmlight",
    "write_svmlight",
    "SvmlightFormatError",
    "split",
    "subsample",
]


@dataclass(frozen=True)
class MoonsConfig:
    n_per_class: int = 150
    rotation_degrees: float = 0.0
    noise_sd: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if int(self.n_per_class) < 1:
            raise ValueError("n_per_class must be at least 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown MoonsConfig keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def rotate(X, degrees):
    """Rotate 2-d points anticlockwise about the origin."""
    t = math.radians(degrees)
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    return np.asarray(X, dtype=float) @ R.T


def gen_moons(config, thetas=None):
    """Two inter-twinning half circles, label +1 on the upper moon.

    Upper moon: ``(cos t, sin t)``; lower moon: ``(1 - cos t, 1/2 - sin t)``,
    ``t`` uniform on ``[0, pi]``.  Gaussian noise is added before the whole
    cloud is rotated by ``config.rotation_degrees``.  ``thetas`` (a pair of
    arrays) overrides the random angles.
    """
    n = int(config.n_per_class)
    rng = np.random.default_rng(config.seed)
    if thetas is None:
        t_pos = rng.uniform(0.0, math.pi, n)
        t_neg = rng.uniform(0.0, math.pi, n)
    else:
        t_pos, t_neg = (np.asarray(t, dtype=float).ravel() for t in thetas)
        if t_pos.shape[0] != n or t_neg.shape[0] != n:
            raise ValueError("thetas must hold n_per_class angles per moon")
    upper = np.column_stack([np.cos(t_pos), np.sin(t_pos)])
    lower = np.column_stack([1.0 - np.cos(t_neg), 0.5 - np.sin(t_neg)])
    X = np.vstack([upper, lower])
    y = np.concatenate([np.ones(n), -np.ones(n)])
    if config.noise_sd > 0:
        X = X + rng.normal(0.0, config.noise_sd, X.shape)
    order = rng.permutation(2 * n)
    X, y = X[order], y[order]
    return LabeledSample(rotate(X, config.rotation_degrees), y)


# -- svmlight ----------------------------------------------------------------


class SvmlightFormatError(ValueError):
    pass


def _parse_label(token, where):
    try:
        value = float(token)
    except ValueError:
        raise SvmlightFormatError(f"{where}: bad label {token!r}") from None
    if value not in (-1.0, 1.0):
        raise SvmlightFormatError(f"{where}: label must be -1 or +1, got {token!r}")
    return value


def read_svmlight(path, n_features=None):
    """Read ``<label> <index>:<value> ...`` lines into a sparse :class:`LabeledSample`.

    Indices are 1-based and strictly increasing within a line.  Text after
    ``#`` is ignored, except a ``# n_features=<d>`` header which fixes the
    dimension when ``n_features`` is not given.
    """
    labels, indptr, indices, values = [], [0], [], []
    hinted = None
    max_index = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line, _, comment = raw.partition("#")
            comment = comment.strip()
            if comment.startswith("n_features="):
                hinted = int(comment.split("=", 1)[1])
            tokens = line.split()
            if not tokens:
                continue
            where = f"{path}:{lineno}"
            labels.append(_parse_label(tokens[0], where))
            last = 0
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise SvmlightFormatError(f"{where}: malformed feature {tok!r}") from None
                if not sep or j < 1:
                    raise SvmlightFormatError(f"{where}: malformed feature {tok!r}")
                if j <= last:
                    raise SvmlightFormatError(f"{where}: feature indices must be strictly increasing")
                last = j
                if v != 0.0:
                    indices.append(j - 1)
                    values.append(v)
            max_index = max(max_index, last)
            indptr.append(len(indices))
    d = n_features if n_features is not None else (hinted if hinted is not None else max_index)
    if d < max_index:
        raise SvmlightFormatError(f"{path}: feature index {max_index} exceeds n_features={d}")
    X = sp.csr_matrix(
        (np.asarray(values, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), d),
    )
    return LabeledSample(X, np.asarray(labels))


def write_svmlight(sample, path, labels=None):
    """Write a sample; unlabeled samples need explicit ``labels`` (e.g. predictions)."""
    y = getattr(sample, "y", None) if labels is None else np.asarray(labels, dtype=float)
    if y is None:
        raise ValueError("unlabeled sample: pass labels explicitly")
    M = as_csr(sample.X)
    with open(path, "w") as fh:
        fh.write(f"# n_features={M.shape[1]}\n")
        for i in range(M.shape[0]):
            lo, hi = M.indptr[i], M.indptr[i + 1]
            feats = " ".join(f"{j + 1}:{v:.17g}" for j, v in zip(M.indices[lo:hi], M.data[lo:hi]))
            label = "+1" if y[i] > 0 else "-1"
            fh.write(f"{label} {feats}\n" if feats else f"{label}\n")
    return Path(path)


# -- sampling ----------------------------------------------------------------


def split(sample, fraction, seed):
    """Seeded random split into ``floor(fraction * m)`` and the remaining points."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    m = len(sample)
    perm = np.random.default_rng(seed).permutation(m)
    n_a = int(math.floor(fraction * m))
    return sample.subset(np.sort(perm[:n_a])), sample.subset(np.sort(perm[n_a:]))


def subsample(sample, n, seed):
    """``n`` points drawn without replacement, in a seeded random order."""
    if not 0 <= n <= len(sample):
        raise ValueError(f"cannot draw {n} points from a sample of {len(sample)}")
    idx = np.random.default_rng(seed).choice(len(sample), size=n, replace=False)
    return sample.subset(idx)


def unlabeled(sample):
    return sample if isinstance(sample, UnlabeledSample) else sample.unlabeled()
