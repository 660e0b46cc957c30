"""Rotated-moons adaptation benchmark: PBGD3 picked by CV versus PBDA picked by reverse CV."""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import MoonsConfig, gen_moons
from .models import KernelSpec
from .optimize import Settings, make_trainer
from .validation import GridSpec, grid_search, make_fold_plan

__all__ = ["BenchmarkConfig", "run_moons_benchmark", "moons_task"]


@dataclass(frozen=True)
class BenchmarkConfig:
    angles: tuple = (10.0, 20.0, 30.0, 40.0)
    repeats: int = 10
    n_per_class: int = 150
    test_per_class: int = 500
    noise_sd: float = 0.05
    gammas: tuple = (2.0,)
    A_range: tuple = (0.01, 1e6)
    C_range: tuple = (1.0, 1e8)
    grid_size: int = 7
    folds: int = 5
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 2000

    def __post_init__(self):
        if self.repeats < 1 or self.grid_size < 1 or self.folds < 2:
            raise ValueError("repeats and grid_size must be positive and folds at least 2")
        for name in ("angles", "gammas", "A_range", "C_range"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown benchmark keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def grids(self):
        kernels = tuple(KernelSpec("rbf", g) for g in self.gammas)
        n = self.grid_size
        pbda = GridSpec.log_spaced(self.A_range, self.C_range, n, n, kernels)
        pbgd3 = GridSpec((0.0,), pbda.C_values, kernels)
        return pbgd3, pbda


def moons_task(config, angle, repeat):
    """``(source, target, test)`` for one angle and repeat, seeded from ``config.seed``.

    The source is unrotated; target and test share the rotation ``angle``.
    """
    ss = np.random.SeedSequence([config.seed, repeat, int(round(angle * 1000))])
    s_seed, t_seed, e_seed, f_seed = (int(c.generate_state(1)[0]) for c in ss.spawn(4))
    base = dict(noise_sd=config.noise_sd)
    S = gen_moons(MoonsConfig(config.n_per_class, 0.0, seed=s_seed, **base))
    T = gen_moons(MoonsConfig(config.n_per_class, angle, seed=t_seed, **base))
    test = gen_moons(MoonsConfig(config.test_per_class, angle, seed=e_seed, **base))
    return S, T.unlabeled(), test, f_seed


def _factory(algo, settings):
    return lambda A, C, kernel: make_trainer(algo, A, C, kernel, settings)


def run_moons_benchmark(config=BenchmarkConfig(), progress=None):
    """Run every (angle, repeat) task; returns a JSON-ready report with per-run details and means."""
    settings = Settings(tol=config.tol, max_iter=config.max_iter)
    pbgd3_grid, pbda_grid = config.grids()
    runs = []
    for angle in config.angles:
        for r in range(config.repeats):
            t0 = time.perf_counter()
            S, T, test, fold_seed = moons_task(config, angle, r)
            plan = make_fold_plan(len(S), config.folds, fold_seed, m_target=len(T))
            run = {"angle": angle, "repeat": r}
            for algo, grid, criterion in (("pbgd3", pbgd3_grid, "cv"), ("pbda", pbda_grid, "rcv")):
                result = grid_search(_factory(algo, settings), S, T, grid, plan, criterion)
                best = result.best
                model = make_trainer(algo, best["A"], best["C"], best["kernel"], settings)(S, T)
                run[algo] = {
                    "A": best["A"],
                    "C": best["C"],
                    "gamma": best["kernel"].gamma,
                    "score": best["score"],
                    "test_error": float(np.mean(model.predict(test.X) != test.y)),
                }
            run["seconds"] = time.perf_counter() - t0
            runs.append(run)
            if progress is not None:
                progress(run)
    table = []
    for angle in config.angles:
        sel = [run for run in runs if run["angle"] == angle]
        table.append(
            {
                "angle": angle,
                "pbgd3_cv": float(np.mean([run["pbgd3"]["test_error"] for run in sel])),
                "pbda_rcv": float(np.mean([run["pbda"]["test_error"] for run in sel])),
            }
        )
    return {"config": config.to_dict(), "table": table, "runs": runs}
