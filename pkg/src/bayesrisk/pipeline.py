"""End-to-end PAC classification trials.

One trial: draw a labeled sample from the true source (label by prior,
atom by that class's distribution), split it by label, estimate each
class distribution by add-lambda counting over the known domain, build
the plug-in predictor from the estimates and the true priors, and score
its exact excess risk by full summation. The experiment layer repeats
trials over a grid of sample sizes and reports how often the excess
misses the (epsilon, delta) target, plus the achieved per-class
divergences.

Every trial also re-checks the relevant risk bound at the divergences it
actually achieved; that check is an unconditional theorem consequence,
so it must hold in 100% of trials, not merely 1 - delta of them.

Trials draw from generators spawned deterministically off the master
seed, so runs are reproducible and trials could be evaluated in
parallel; aggregation is a sequential reduction over the trial index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .bounds import BoundReport, check_theorem1, check_theorem2
from .classify import CostMatrix, LabeledSource
from .distributions import Distribution, Domain, kl_divergence, l1_distance


@dataclass(frozen=True)
class TrialConfig:
    """Ground truth, estimator, and targets for a batch of trials.

    ``cost`` selects the mode: a matrix means cost loss, ``None`` means
    log loss. ``laplace`` is the add-lambda estimator weight; left unset
    it defaults to 0 in cost mode and 1 in log-loss mode (log loss needs
    estimates with full support).
    """

    source: LabeledSource
    cost: Optional[CostMatrix]
    sample_size: int
    trials: int
    epsilon_target: float
    delta_target: float
    seed: int = 0
    laplace: Optional[float] = None
    n_grid: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.sample_size < 1:
            raise ValueError("sample_size must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.laplace is not None and self.laplace < 0.0:
            raise ValueError("laplace weight must be non-negative")
        if not self.epsilon_target > 0.0:
            raise ValueError("epsilon_target must be positive")
        if not 0.0 < self.delta_target < 1.0:
            raise ValueError("delta_target must lie in (0, 1)")
        if self.n_grid is not None:
            if not self.n_grid or any(n < 1 for n in self.n_grid):
                raise ValueError("n_grid entries must be positive")
            object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))

    @property
    def log_loss_mode(self) -> bool:
        return self.cost is None

    @property
    def resolved_laplace(self) -> float:
        if self.laplace is not None:
            return float(self.laplace)
        return 1.0 if self.log_loss_mode else 0.0


@dataclass(frozen=True)
class TrialOutcome:
    """Split sizes, achieved per-class divergences, and the bound check."""

    counts: tuple[int, ...]
    l1_per_class: tuple[float, ...]
    kl_per_class: tuple[float, ...]
    report: BoundReport

    @property
    def excess(self) -> float:
        return self.report.excess

    @property
    def satisfied(self) -> bool:
        return self.report.satisfied


def empirical_estimator(
    samples: Iterable, domain: Domain, laplace: float = 0.0
) -> Distribution:
    """Add-lambda frequency estimate over the known domain.

    ``mass(x) = (count(x) + laplace) / (len(samples) + laplace * m)``;
    with ``laplace == 0`` and no samples the estimate defaults to uniform.
    Samples may be atom identifiers or atom indices.
    """
    if laplace < 0.0:
        raise ValueError("laplace weight must be non-negative")
    m = domain.size
    counts = np.zeros(m)
    total = 0
    for s in samples:
        idx = s if isinstance(s, (int, np.integer)) else domain.index(s)
        counts[idx] += 1.0
        total += 1
    denom = total + laplace * m
    if denom == 0.0:
        return Distribution(domain, np.full(m, 1.0 / m))
    return Distribution(domain, (counts + laplace) / denom)


def run_trial(
    config: TrialConfig, rng: np.random.Generator, sample_size: Optional[int] = None
) -> TrialOutcome:
    """One sample-split-estimate-classify round with exact scoring.

    A class that drew no samples falls back to the uniform estimate, so
    degenerate splits still produce a total predictor.
    """
    source = config.source
    k, m = source.k, source.domain.size
    n = config.sample_size if sample_size is None else int(sample_size)
    lam = config.resolved_laplace
    labels = rng.choice(k, size=n, p=source.priors)
    counts = np.bincount(labels, minlength=k)
    est = []
    for i in range(k):
        drawn = (
            rng.choice(m, size=int(counts[i]), p=source.class_dists[i].mass)
            if counts[i]
            else ()
        )
        est.append(empirical_estimator(drawn, source.domain, lam))
    est = tuple(est)
    l1s = tuple(l1_distance(d, e) for d, e in zip(source.class_dists, est))
    kls = tuple(kl_divergence(d, e) for d, e in zip(source.class_dists, est))
    if config.log_loss_mode:
        report = check_theorem2(source, est)
    else:
        report = check_theorem1(source, est, config.cost)
    return TrialOutcome(tuple(int(c) for c in counts), l1s, kls, report)


TRIAL_CSV_COLUMNS = (
    "n",
    "trial",
    "excess",
    "bound",
    "satisfied",
    "risk_opt",
    "risk_plugin",
    "max_l1",
    "max_kl",
    "counts",
)


@dataclass(frozen=True)
class ExperimentSummary:
    """Per-trial rows plus per-sample-size aggregates."""

    mode: str
    n_grid: tuple[int, ...]
    trials: int
    rows: tuple[dict, ...]
    per_n: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_grid": list(self.n_grid),
            "trials": self.trials,
            "per_n": [dict(entry) for entry in self.per_n],
        }

    def csv_rows(self) -> list[list]:
        return [[row[col] for col in TRIAL_CSV_COLUMNS] for row in self.rows]


def _quantile(values: Sequence[float], q: float) -> float:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return math.inf
    return float(np.quantile(finite, q))


def run_pac_experiment(config: TrialConfig) -> ExperimentSummary:
    """Repeat trials across the sample-size grid and aggregate.

    Needs at least 30 trials per grid point for the reported violation
    fraction (the empirical delta) to mean anything.
    """
    if config.trials < 30:
        raise ValueError("at least 30 trials are needed for a meaningful delta estimate")
    grid = config.n_grid or (config.sample_size,)
    streams = np.random.SeedSequence(config.seed).spawn(len(grid) * config.trials)
    rows = []
    per_n = []
    for gi, n in enumerate(grid):
        outcomes = []
        for t in range(config.trials):
            rng = np.random.default_rng(streams[gi * config.trials + t])
            outcome = run_trial(config, rng, sample_size=n)
            outcomes.append(outcome)
            rows.append(
                {
                    "n": n,
                    "trial": t,
                    "excess": outcome.report.excess,
                    "bound": outcome.report.bound,
                    "satisfied": outcome.report.satisfied,
                    "risk_opt": outcome.report.risk_opt,
                    "risk_plugin": outcome.report.risk_plugin,
                    "max_l1": max(outcome.l1_per_class),
                    "max_kl": max(outcome.kl_per_class),
                    "counts": "|".join(str(c) for c in outcome.counts),
                }
            )
        excesses = [o.report.excess for o in outcomes]
        max_l1s = [max(o.l1_per_class) for o in outcomes]
        max_kls = [max(o.kl_per_class) for o in outcomes]
        per_n.append(
            {
                "n": n,
                "violation_fraction": float(
                    np.mean([e > config.epsilon_target for e in excesses])
                ),
                "satisfied_fraction": float(np.mean([o.report.satisfied for o in outcomes])),
                "mean_excess": float(np.mean(excesses)),
                "median_excess": float(np.median(excesses)),
                "l1_q50": _quantile(max_l1s, 0.5),
                "l1_q90": _quantile(max_l1s, 0.9),
                "kl_q50": _quantile(max_kls, 0.5),
                "kl_q90": _quantile(max_kls, 0.9),
            }
        )
    mode = "logloss" if config.log_loss_mode else "cost"
    return ExperimentSummary(mode, tuple(grid), config.trials, tuple(rows), tuple(per_n))


def config_to_dict(config: TrialConfig) -> dict:
    data = {
        "priors": [float(g) for g in config.source.priors],
        "classes": [d.to_dict() for d in config.source.class_dists],
        "cost": config.cost.to_list() if config.cost is not None else None,
        "sample_size": config.sample_size,
        "trials": config.trials,
        "epsilon_target": config.epsilon_target,
        "delta_target": config.delta_target,
        "seed": config.seed,
        "laplace": config.laplace,
        "n_grid": list(config.n_grid) if config.n_grid else None,
    }
    return data


def config_from_dict(data: dict) -> TrialConfig:
    source = LabeledSource(
        np.asarray(data["priors"], dtype=float),
        tuple(Distribution.from_dict(c) for c in data["classes"]),
    )
    cost = CostMatrix(np.asarray(data["cost"], dtype=float)) if data.get("cost") else None
    return TrialConfig(
        source=source,
        cost=cost,
        sample_size=int(data["sample_size"]),
        trials=int(data["trials"]),
        epsilon_target=float(data["epsilon_target"]),
        delta_target=float(data["delta_target"]),
        seed=int(data.get("seed", 0)),
        laplace=None if data.get("laplace") is None else float(data["laplace"]),
        n_grid=tuple(data["n_grid"]) if data.get("n_grid") else None,
    )


def with_seed(config: TrialConfig, seed: int) -> TrialConfig:
    return replace(config, seed=seed)
