"""End-to-end scenarios with pass/fail checks, shared by the CLI and the test suite."""

import operator
from dataclasses import dataclass

import numpy as np

from .data_io import gen_agnostic, gen_realizable, philox
from .evalgap import (build_grid, build_link_grid, build_weight_grid, ComparatorGrid, comparator_losses,
                      counterexample_fixture, omnigap_table)
from .learners import TrainConfig, ideal_omnitron_fit, isotron_fit, omnitron_fit
from .links import PiecewiseLinearLink
from .pav import pav_fit

_OPS = {"<=": operator.le, ">=": operator.ge}


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    op: str
    required: float

    @property
    def passed(self):
        return bool(_OPS[self.op](self.measured, self.required))

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured {self.measured:.12g} {self.op} {self.required:.12g}"


def counterexample_checks():
    rep = counterexample_fixture()
    return [
        Check("E[ml(w* x, y)]", rep.ml_at_wstar, "<=", -0.02),
        Check("min_w E[pl(w x, y)]", rep.min_pl_over_w, ">=", 0.01),
        Check("gap", rep.gap, ">=", 0.03),
    ]


def pav_omnigap_checks(n=2000, seed=0):
    data = gen_agnostic(1, n, seed, "flip10")
    p = pav_fit(data.features[:, 0], data.labels)
    links = build_link_grid(1.0, data.L, 0.1, cap=13, seed=seed)
    grid = ComparatorGrid(links, build_weight_grid(1, 1.0, sign=1))
    og, _ = omnigap_table(p, grid, data)
    return [Check(f"max omnigap of PAV over {og.size} monotone pairs", float(og.max()), "<=", 1e-9)]


REALIZABLE_LINK = PiecewiseLinearLink([-1.0, -0.2, 0.4, 1.0], [0.1, 0.3, 0.9, 1.0], lr=1.0, beta=1.0)


def isotron_realizable_run(d=5, n=10_000, T=100, seed=7):
    w_star = philox(seed, 9).standard_normal(d)
    w_star /= np.linalg.norm(w_star)
    data = gen_realizable(d, n, REALIZABLE_LINK, w_star, seed, "expected")
    trace = isotron_fit(data, TrainConfig(T=T, eta=1.0, beta=1.0, R=1.0))
    # expected-mode labels make the generating model's squared loss exactly 0
    best = min(step.sq_loss for step in trace)
    return best, trace


def isotron_realizable_checks(**kw):
    best, _ = isotron_realizable_run(**kw)
    return [Check("min_t excess squared loss", best, "<=", 0.01 + 1e-3)]


def erm_omni_run(n=2000, T=100, eps=0.1, seed=0, grid_eps=0.025, grid_cap=64):
    data = gen_agnostic(1, n, seed, "flip10")
    cfg = TrainConfig(T=T, eps=eps, beta=1.0, R=1.0, seed=seed)
    model = ideal_omnitron_fit(data, cfg)
    grid = build_grid(1, 1.0, data.L, 1.0, grid_eps, cap=grid_cap, seed=seed)
    og, pl = omnigap_table(model, grid, data)
    return float(pl.max()), float(og.max()), model, grid


def erm_omni_checks(**kw):
    pl, _, _, _ = erm_omni_run(**kw)
    return [Check("max grid omniprediction gap", pl, "<=", 0.1 + 0.05)]


def omnitron_trend_run(sizes=(500, 2000, 8000), seeds=range(5), T=100, eps=0.1, beta=1.0,
                       n_holdout=10_000, grid_eps=0.025, grid_cap=32):
    """Median held-out max loss gap of the stochastic Omnitron per oracle-set size.

    Seeds are shared across sizes (common random numbers), so a larger
    oracle set extends the smaller one instead of redrawing it.
    """
    hold = gen_agnostic(1, n_holdout, 999, "flip10")
    grid = build_grid(1, beta, hold.L, 1.0, grid_eps, cap=grid_cap)
    comparator = comparator_losses(grid, hold)
    medians = {}
    for n in sizes:
        gaps = []
        for s in seeds:
            cfg = TrainConfig(T=T, eps=eps, beta=beta, R=1.0, seed=s)
            oracle = gen_agnostic(1, n, 1000 + s, "flip10")
            stream = gen_agnostic(1, T, 5000 + s, "flip10")
            model = omnitron_fit(oracle, stream, cfg)
            _, pl = omnigap_table(model, grid, hold, comparator)
            gaps.append(pl.max())
        medians[n] = float(np.median(gaps))
    return medians


def omnitron_trend_checks(**kw):
    medians = omnitron_trend_run(**kw)
    sizes = sorted(medians)
    checks = [Check(f"median gap at n={b} vs n={a}", medians[b] - medians[a], "<=", 0.0)
              for a, b in zip(sizes, sizes[1:])]
    checks.append(Check(f"median gap at n={sizes[-1]}", medians[sizes[-1]], "<=", 0.2))
    return checks


TARGETS = {
    "counterexample": counterexample_checks,
    "pav-omnigap": pav_omnigap_checks,
    "isotron-realizable": isotron_realizable_checks,
    "erm-omni": erm_omni_checks,
}
