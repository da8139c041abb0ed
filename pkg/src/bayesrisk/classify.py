"""Plug-in Bayes classifiers and their exact risks.

A labeled source is a mixture: class priors ``g_1..g_k`` plus one
class-conditional distribution per label on a shared domain. Two losses
are supported:

- cost-matrix loss, ``risk(f) = sum_x sum_i c[i, f(x)] * g_i * D_i(x)``,
  minimized pointwise by ``argmin_j sum_i c[i, j] * g_i * D_i(x)``;
- log loss for stochastic rules,
  ``risk(f) = sum_x D(x) * sum_i -log2(f_i(x)) * Pr_i(x)`` where
  ``Pr_i(x) = g_i * D_i(x) / D(x)`` is the label posterior.

Risks are exact summations over the domain, never sampled, so the bound
checks built on them carry no statistical noise. Labels are 0-based
indices; argmin ties break toward the smallest label, and atoms with zero
mixture mass (which contribute nothing to any risk) get the smallest
label from classifiers and the uniform row from stochastic rules.

Class priors are exact inputs throughout; only the class-conditional
distributions are ever estimated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .distributions import Distribution, Domain

PRIOR_SUM_TOL = 1e-12
ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LabeledSource:
    """Class priors plus per-class distributions; induces the joint over atoms x labels."""

    priors: np.ndarray
    class_dists: tuple[Distribution, ...]

    def __post_init__(self) -> None:
        priors = np.asarray(self.priors, dtype=float).copy()
        dists = tuple(self.class_dists)
        if len(dists) < 2:
            raise ValueError("a labeled source needs at least two classes")
        if priors.shape != (len(dists),):
            raise ValueError("one prior per class distribution required")
        if not np.all(np.isfinite(priors)) or np.any(priors <= 0.0):
            raise ValueError("every class prior must be positive")
        if abs(float(priors.sum()) - 1.0) > PRIOR_SUM_TOL:
            raise ValueError("class priors must sum to 1")
        domain = dists[0].domain
        for d in dists[1:]:
            if d.domain != domain:
                raise ValueError("all class distributions must share one domain")
        priors.flags.writeable = False
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "class_dists", dists)

    @property
    def k(self) -> int:
        return len(self.class_dists)

    @property
    def domain(self) -> Domain:
        return self.class_dists[0].domain

    @cached_property
    def weighted_mass(self) -> np.ndarray:
        """(k, m) matrix ``W[i, x] = g_i * D_i(x)``; read-only."""
        w = self.priors[:, None] * np.stack([d.mass for d in self.class_dists])
        w.flags.writeable = False
        return w

    @cached_property
    def mixture_mass(self) -> np.ndarray:
        """Marginal atom mass ``D(x) = sum_i g_i * D_i(x)``; read-only."""
        mix = self.weighted_mass.sum(axis=0)
        mix.flags.writeable = False
        return mix

    def mixture_distribution(self) -> Distribution:
        return Distribution(self.domain, self.mixture_mass)

    def to_dict(self) -> dict:
        return {
            "priors": [float(g) for g in self.priors],
            "classes": [d.to_dict() for d in self.class_dists],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LabeledSource":
        return cls(
            np.asarray(data["priors"], dtype=float),
            tuple(Distribution.from_dict(c) for c in data["classes"]),
        )


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """k x k non-negative misclassification costs; ``costs[i, j]`` prices truth ``i`` labeled ``j``."""

    costs: np.ndarray

    def __post_init__(self) -> None:
        costs = np.asarray(self.costs, dtype=float).copy()
        if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
            raise ValueError("cost matrix must be square")
        if not np.all(np.isfinite(costs)) or np.any(costs < 0.0):
            raise ValueError("costs must be finite and non-negative")
        if float(costs.max()) <= 0.0:
            raise ValueError("cost matrix must have at least one positive entry")
        costs.flags.writeable = False
        object.__setattr__(self, "costs", costs)

    @classmethod
    def zero_one(cls, k: int) -> "CostMatrix":
        """Unit cost for every misclassification, zero on the diagonal."""
        return cls(np.ones((k, k)) - np.eye(k))

    @property
    def k(self) -> int:
        return self.costs.shape[0]

    @property
    def max_cost(self) -> float:
        return float(self.costs.max())

    def to_list(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.costs]


CostLike = Union[CostMatrix, np.ndarray, Sequence[Sequence[float]]]


def as_cost_array(cost: CostLike, k: int) -> np.ndarray:
    """Coerce to a validated (k, k) float array.

    Unlike :class:`CostMatrix`, an all-zero matrix is accepted here: risk
    evaluation and the linearity property are well defined for it even
    though it makes every classifier trivially optimal.
    """
    arr = cost.costs if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=float)
    if arr.shape != (k, k):
        raise ValueError(f"cost matrix has shape {arr.shape}, expected ({k}, {k})")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError("costs must be finite and non-negative")
    return arr


@dataclass(frozen=True, eq=False)
class Classifier:
    """Total label table over a domain."""

    domain: Domain
    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=int).copy()
        if labels.shape != (self.domain.size,):
            raise ValueError("one label per domain atom required")
        if np.any(labels < 0):
            raise ValueError("labels must be non-negative indices")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    def label(self, atom: str) -> int:
        return int(self.labels[self.domain.index(atom)])


@dataclass(frozen=True, eq=False)
class StochasticRule:
    """Per-atom probability vector over the k labels."""

    domain: Domain
    table: np.ndarray

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=float).copy()
        if table.ndim != 2 or table.shape[0] != self.domain.size:
            raise ValueError("rule table must have one row per domain atom")
        if not np.all(np.isfinite(table)) or np.any(table < 0.0):
            raise ValueError("rule rows must be non-negative")
        if np.any(np.abs(table.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("every rule row must sum to 1")
        table.flags.writeable = False
        object.__setattr__(self, "table", table)

    @property
    def k(self) -> int:
        return self.table.shape[1]

    def row(self, atom: str) -> np.ndarray:
        return self.table[self.domain.index(atom)]


def bayes_classifier(source: LabeledSource, cost: CostLike) -> Classifier:
    """Pointwise cost-minimizing label table for the given source.

    ``labels[x] = argmin_j sum_i c[i, j] * g_i * D_i(x)``; np.argmin
    resolves ties toward the smallest label, which also covers atoms with
    zero mixture mass (all scores zero there).
    """
    costs = as_cost_array(cost, source.k)
    scores = source.weighted_mass.T @ costs
    return Classifier(source.domain, np.argmin(scores, axis=1))


def risk(f: Classifier, source: LabeledSource, cost: CostLike) -> float:
    """Expected cost of ``f`` on the source, by exact summation."""
    if f.domain != source.domain:
        raise ValueError("classifier and source domains differ")
    costs = as_cost_array(cost, source.k)
    if np.any(f.labels >= source.k):
        raise ValueError("classifier labels exceed the source's class count")
    return float(np.sum(source.weighted_mass * costs[:, f.labels]))


def posterior(source: LabeledSource, atom: str) -> np.ndarray:
    """Label posterior ``[g_i * D_i(x) / D(x)]_i`` at one atom."""
    col = source.weighted_mass[:, source.domain.index(atom)]
    total = float(col.sum())
    if total == 0.0:
        raise ValueError(f"atom outside mixture support: {atom!r}")
    return col / total


def posterior_rule(source: LabeledSource) -> StochasticRule:
    """Tabulated label posterior; the log-loss optimal stochastic rule.

    Atoms with zero mixture mass get the uniform row: their log-loss
    weight is zero, so any fixed choice is sound and this one keeps the
    table total.
    """
    w = source.weighted_mass
    mix = source.mixture_mass
    table = np.full((source.domain.size, source.k), 1.0 / source.k)
    covered = mix > 0.0
    table[covered] = (w[:, covered] / mix[covered]).T
    return StochasticRule(source.domain, table)


def plugin_rule(estimated: LabeledSource) -> StochasticRule:
    """Posterior rule computed from estimated class distributions.

    The caller supplies the true (known) priors inside ``estimated``; only
    the class-conditional distributions are estimates.
    """
    return posterior_rule(estimated)


def logloss_risk(rule: StochasticRule, source: LabeledSource) -> float:
    """Expected negative log2-likelihood of the true label under ``rule``.

    ``sum_x D(x) sum_i -log2(rule_i(x)) * Pr_i(x)`` with ``0 log 0 := 0``;
    ``math.inf`` when the rule puts zero probability somewhere the source
    puts posterior mass.
    """
    if rule.domain != source.domain:
        raise ValueError("rule and source domains differ")
    if rule.k != source.k:
        raise ValueError("rule and source class counts differ")
    w = source.weighted_mass.T
    weighted = w > 0.0
    vals = rule.table[weighted]
    if np.any(vals == 0.0):
        return math.inf
    return max(0.0, float(-np.sum(w[weighted] * np.log2(vals))))
