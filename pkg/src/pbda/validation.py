"""k-fold cross-validation, reverse (circular) validation and grid search.

A *trainer* is any callable ``trainer(source, target) -> model`` where
``source`` is a :class:`LabeledSample`, ``target`` an :class:`UnlabeledSample`
(or ``None`` for source-only learners) and ``model`` has ``predict(X)``.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .models import KernelSpec
from .samples import LabeledSample

__all__ = [
    "FoldPlan",
    "make_fold_plan",
    "GridSpec",
    "ScoreTable",
    "GridResult",
    "cv_risk",
    "reverse_cv_risk",
    "grid_search",
    "CRITERIA",
]

CRITERIA = ("cv", "rcv", "mean_cv_rcv")


def _partition(m, k, rng):
    return tuple(np.sort(part) for part in np.array_split(rng.permutation(m), k))


@dataclass(frozen=True)
class FoldPlan:
    k: int
    source_folds: tuple
    target_folds: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        for name, folds in (("source", self.source_folds), ("target", self.target_folds)):
            if folds is None:
                continue
            if len(folds) != self.k:
                raise ValueError(f"{name} plan has {len(folds)} folds, expected {self.k}")
            if any(len(f) == 0 for f in folds):
                raise ValueError(f"{name} plan has an empty fold")
            flat = np.concatenate(folds)
            if not np.array_equal(np.sort(flat), np.arange(flat.size)):
                raise ValueError(f"{name} folds must partition 0..m-1")

    @property
    def m_source(self):
        return sum(len(f) for f in self.source_folds)

    @property
    def m_target(self):
        return None if self.target_folds is None else sum(len(f) for f in self.target_folds)

    def source_split(self, i):
        """``(train indices, held-out indices)`` of the source for fold ``i``."""
        held = self.source_folds[i]
        return np.setdiff1d(np.arange(self.m_source), held), held

    def target_split(self, i):
        if self.target_folds is None:
            raise ValueError("fold plan has no target folds")
        held = self.target_folds[i]
        return np.setdiff1d(np.arange(self.m_target), held), held

    def reordered(self, order):
        """Same membership, folds listed in a different order."""
        order = list(order)
        tf = None if self.target_folds is None else tuple(self.target_folds[i] for i in order)
        return FoldPlan(self.k, tuple(self.source_folds[i] for i in order), tf, self.seed)

    def to_dict(self):
        return {
            "k": self.k,
            "seed": self.seed,
            "source_folds": [f.tolist() for f in self.source_folds],
            "target_folds": None if self.target_folds is None else [f.tolist() for f in self.target_folds],
        }


def make_fold_plan(m_source, k, seed, m_target=None):
    """Seeded uniform shuffle of each sample, then ``k`` contiguous chunks (sizes within one)."""
    if m_source < k or (m_target is not None and m_target < k):
        raise ValueError(f"cannot cut {k} non-empty folds from samples of size {m_source}/{m_target}")
    rng = np.random.default_rng(seed)
    source = _partition(m_source, k, rng)
    target = None if m_target is None else _partition(m_target, k, rng)
    return FoldPlan(k, source, target, seed)


def _error(model, sample):
    return float(np.mean(model.predict(sample.X) != sample.y))


def cv_risk(trainer, S, fold_plan, T=None):
    """Mean held-out 0-1 error over the folds.

    When ``T`` is given (and the plan has target folds) the trainer sees the
    matching target training part; it never sees held-out source labels.
    """
    if fold_plan.m_source != len(S):
        raise ValueError("fold plan does not match the source size")
    errors = []
    for i in range(fold_plan.k):
        train, held = fold_plan.source_split(i)
        target = None
        if T is not None:
            target = T.subset(fold_plan.target_split(i)[0]) if fold_plan.target_folds is not None else T
        model = trainer(S.subset(train), target)
        errors.append(_error(model, S.subset(held)))
    return math.fsum(errors) / len(errors)  # correctly rounded, so fold order cannot matter


def reverse_cv_risk(trainer, S, T, fold_plan):
    """Reverse validation risk averaged over folds.

    Per fold: learn ``h`` on the source and target training parts, label the
    target training part with ``h``, learn the reverse classifier with the
    self-labeled target as source and the unlabeled source part as target
    (same trainer, hence same hyperparameters), and score it on the held-out
    source fold.
    """
    if fold_plan.target_folds is None:
        raise ValueError("reverse validation needs target folds")
    if fold_plan.m_source != len(S) or fold_plan.m_target != len(T):
        raise ValueError("fold plan does not match the sample sizes")
    errors = []
    for i in range(fold_plan.k):
        s_train, s_held = fold_plan.source_split(i)
        t_train, _ = fold_plan.target_split(i)
        source = S.subset(s_train)
        target = T.subset(t_train)
        forward = trainer(source, target)
        self_labeled = LabeledSample(target.X, forward.predict(target.X))
        backward = trainer(self_labeled, source.unlabeled())
        errors.append(_error(backward, S.subset(s_held)))
    return math.fsum(errors) / len(errors)  # correctly rounded, so fold order cannot matter


# -- grid search ----------------------------------------------------------------


def _log_grid(lo, hi, n):
    return tuple(float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n))


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grid; a kernel value of ``None`` means the primal linear learner."""

    A_values: tuple = field(default_factory=lambda: _log_grid(0.01, 1e6, 20))
    C_values: tuple = field(default_factory=lambda: _log_grid(1.0, 1e8, 20))
    kernel_values: tuple = (None,)

    def __post_init__(self):
        A = tuple(float(a) for a in self.A_values)
        C = tuple(float(c) for c in self.C_values)
        kernels = tuple(self.kernel_values)
        if not A or not C or not kernels:
            raise ValueError("grid lists must be non-empty")
        if any(not a >= 0 for a in A) or any(not c > 0 for c in C):
            raise ValueError("grid needs A >= 0 and C > 0")
        object.__setattr__(self, "A_values", A)
        object.__setattr__(self, "C_values", C)
        object.__setattr__(self, "kernel_values", kernels)

    @classmethod
    def log_spaced(cls, A_range=(0.01, 1e6), C_range=(1.0, 1e8), n_A=20, n_C=20, kernel_values=(None,)):
        return cls(_log_grid(*A_range, n_A), _log_grid(*C_range, n_C), tuple(kernel_values))

    def cells(self):
        """``(A, C, kernel)`` in grid order: kernel outermost, then A, then C."""
        return [(a, c, k) for k in self.kernel_values for a in self.A_values for c in self.C_values]

    def __len__(self):
        return len(self.A_values) * len(self.C_values) * len(self.kernel_values)

    def to_dict(self):
        return {
            "A_values": list(self.A_values),
            "C_values": list(self.C_values),
            "kernel_values": [None if k is None else k.to_dict() for k in self.kernel_values],
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"A_values", "C_values", "kernel_values"}
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        kernels = tuple(None if k is None else KernelSpec.from_dict(k) for k in d.get("kernel_values", [None]))
        return cls(d["A_values"], d["C_values"], kernels)


_COLUMNS = ("A", "C", "kernel", "gamma", "cv", "rcv", "criterion", "rank")


def _kernel_columns(kernel):
    if kernel is None:
        return "primal", ""
    return kernel.kind, "" if kernel.gamma is None else repr(float(kernel.gamma))


def _fmt(x):
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return repr(float(x))


@dataclass
class ScoreTable:
    """One row per grid cell in grid order; ``failed`` cells score ``inf``."""

    rows: list
    criterion: str

    def __len__(self):
        return len(self.rows)

    def to_tsv(self):
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(_COLUMNS)
        for r in self.rows:
            kind, gamma = _kernel_columns(r["kernel"])
            w.writerow([_fmt(r["A"]), _fmt(r["C"]), kind, gamma, _fmt(r["cv"]), _fmt(r["rcv"]), _fmt(r["criterion"]), r["rank"]])
        return buf.getvalue()

    def to_dict(self):
        rows = []
        for r in self.rows:
            d = dict(r)
            d["kernel"] = None if r["kernel"] is None else r["kernel"].to_dict()
            for key in ("cv", "rcv", "criterion"):
                v = d[key]
                d[key] = None if v is None or not math.isfinite(v) else v
            rows.append(d)
        return {"criterion": self.criterion, "rows": rows}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class GridResult:
    best: dict
    table: ScoreTable


def grid_search(trainer_factory, S, T, grid, fold_plan, criterion="rcv"):
    """Score every grid cell and return the lowest-scoring ``(A, C, kernel)``.

    ``trainer_factory(A, C, kernel)`` builds a trainer.  Ties are broken by
    smaller ``A``, then smaller ``C``, then grid order.  A cell whose trainer
    raises scores ``inf`` and carries the error message in the table.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    rows = []
    for index, (A, C, kernel) in enumerate(grid.cells()):
        row = {"A": A, "C": C, "kernel": kernel, "cv": math.nan, "rcv": math.nan, "failed": False, "error": ""}
        try:
            trainer = trainer_factory(A, C, kernel)
            if criterion in ("cv", "mean_cv_rcv"):
                row["cv"] = cv_risk(trainer, S, fold_plan, T)
            if criterion in ("rcv", "mean_cv_rcv"):
                row["rcv"] = reverse_cv_risk(trainer, S, T, fold_plan)
        except Exception as exc:  # noqa: BLE001 - a failed cell must not abort the search
            row["failed"] = True
            row["error"] = f"{type(exc).__name__}: {exc}"
        if row["failed"]:
            row["criterion"] = math.inf
        elif criterion == "cv":
            row["criterion"] = row["cv"]
        elif criterion == "rcv":
            row["criterion"] = row["rcv"]
        else:
            row["criterion"] = 0.5 * (row["cv"] + row["rcv"])
        row["index"] = index
        rows.append(row)
    order = sorted(range(len(rows)), key=lambda i: (rows[i]["criterion"], rows[i]["A"], rows[i]["C"], i))
    for rank, i in enumerate(order, 1):
        rows[i]["rank"] = rank
    top = rows[order[0]]
    best = {"A": top["A"], "C": top["C"], "kernel": top["kernel"], "score": top["criterion"]}
    return GridResult(best, ScoreTable(rows, criterion))
