"""Risk-bound computation, verification, and tightness probing.

Two bounds are checked against exact excess risks:

- cost loss: if every class satisfies ``L1(D_i, D'_i) <= eps / g_i`` then
  the plug-in classifier's risk exceeds the Bayes risk by at most
  ``eps * k * max_ij c_ij``;
- log loss: if every class satisfies ``KL(D_i || D'_i) <= eps / g_i``
  then the plug-in rule's log-loss risk exceeds the optimum by at most
  ``k * eps``, and the excess obeys the exact identity
  ``excess = sum_i g_i * KL(D_i || D'_i) - KL(D || D')`` with ``D, D'``
  the prior-weighted mixtures.

Checkers invert the hypothesis: the effective ``eps`` is
``max_i g_i * divergence_i``, the tightest budget for which the
hypothesis holds, which makes every check as strict as possible. An
infinite per-class KL gives an infinite bound (vacuous hypothesis,
trivially satisfied) so randomized sweeps stay total.

The two-atom constructions reproduce the matching lower bounds: the cost
construction leaves slack exactly ``2 * gamma * max_cost`` against the
k=2 bound, and the log-loss construction meets its bound exactly when
the estimated mixture coincides with the true one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .classify import (
    CostLike,
    CostMatrix,
    LabeledSource,
    bayes_classifier,
    logloss_risk,
    plugin_rule,
    posterior_rule,
    risk,
)
from .distributions import Distribution, Domain, kl_divergence, l1_distance, make_distribution

BOUND_TOL = 1e-9
EXCESS_TOL = 1e-12

L1 = "L1"
KL = "KL"


@dataclass(frozen=True)
class PerturbationBudget:
    """Divergence budget: per-class divergence is allowed up to ``epsilon / g_i``."""

    metric: str
    epsilon: float

    def __post_init__(self) -> None:
        if self.metric not in (L1, KL):
            raise ValueError(f"metric must of be one of {L1!r}, {KL!r}")
        if not math.isfinite(self.epsilon) or self.epsilon < 0.0:
            raise ValueError("budget epsilon must be finite and non-negative")


@dataclass(frozen=True)
class BoundReport:
    """Exact risks of the optimal and plug-in predictors against one bound."""

    risk_opt: float
    risk_plugin: float
    excess: float
    bound: float
    satisfied: bool
    slack: float
    epsilon: float

    def __post_init__(self) -> None:
        if not (self.excess >= -EXCESS_TOL):
            raise ValueError(f"negative excess {self.excess!r}: optimality violated")
        expected = self.bound == math.inf or self.excess <= self.bound + BOUND_TOL
        if self.satisfied != expected:
            raise ValueError("satisfied flag inconsistent with excess and bound")

    def csv_row(self) -> list:
        return [self.risk_opt, self.risk_plugin, self.excess, self.bound, self.slack, self.satisfied]

    CSV_COLUMNS = ("risk_opt", "risk_plugin", "excess", "bound", "slack", "satisfied")

    def to_dict(self) -> dict:
        return {
            "risk_opt": self.risk_opt,
            "risk_plugin": self.risk_plugin,
            "excess": self.excess,
            "bound": self.bound,
            "slack": self.slack,
            "satisfied": self.satisfied,
            "epsilon": self.epsilon,
        }


def _report(risk_opt: float, risk_plugin: float, bound: float, epsilon: float) -> BoundReport:
    excess = risk_plugin - risk_opt
    satisfied = bound == math.inf or excess <= bound + BOUND_TOL
    slack = math.inf if bound == math.inf else bound - excess
    return BoundReport(
        risk_opt=risk_opt,
        risk_plugin=risk_plugin,
        excess=excess,
        bound=bound,
        satisfied=satisfied,
        slack=slack,
        epsilon=epsilon,
    )


def theorem1_bound(epsilon: float, k: int, cost: CostLike) -> float:
    """Cost-loss excess bound ``epsilon * k * max_ij c_ij``."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be non-negative")
    arr = cost.costs if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=float)
    return epsilon * k * float(arr.max())


def theorem2_bound(epsilon: float, k: int) -> float:
    """Log-loss excess bound ``k * epsilon`` (bits)."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be non-negative")
    return k * epsilon


def _check_estimates(true_source: LabeledSource, est_dists: Sequence[Distribution]) -> tuple[Distribution, ...]:
    est = tuple(est_dists)
    if len(est) != true_source.k:
        raise ValueError("one estimated distribution per class required")
    for d in est:
        if d.domain != true_source.domain:
            raise ValueError("estimates must live on the source's domain")
    return est


def check_theorem1(
    true_source: LabeledSource, est_dists: Sequence[Distribution], cost: CostLike
) -> BoundReport:
    """Exactly evaluate the cost-loss bound for one (source, estimates, cost) instance.

    The effective budget is ``eps = max_i g_i * L1(D_i, D'_i)``; the report
    compares the exact excess risk of the plug-in classifier against
    ``eps * k * max_ij c_ij``. The guarantee is unconditional, so
    ``satisfied`` is True on every valid instance.
    """
    est = _check_estimates(true_source, est_dists)
    l1s = [l1_distance(d, e) for d, e in zip(true_source.class_dists, est)]
    eps = max(float(g) * v for g, v in zip(true_source.priors, l1s))
    bound = theorem1_bound(eps, true_source.k, cost)
    est_source = LabeledSource(true_source.priors, est)
    f_star = bayes_classifier(true_source, cost)
    f_prime = bayes_classifier(est_source, cost)
    return _report(
        risk(f_star, true_source, cost), risk(f_prime, true_source, cost), bound, eps
    )


def check_theorem2(true_source: LabeledSource, est_dists: Sequence[Distribution]) -> BoundReport:
    """Exactly evaluate the log-loss bound for one (source, estimates) instance.

    ``eps = max_i g_i * KL(D_i || D'_i)``; infinite per-class KL yields an
    infinite bound (the hypothesis is vacuous there).
    """
    est = _check_estimates(true_source, est_dists)
    kls = [kl_divergence(d, e) for d, e in zip(true_source.class_dists, est)]
    eps = max(float(g) * v for g, v in zip(true_source.priors, kls))
    bound = theorem2_bound(eps, true_source.k) if math.isfinite(eps) else math.inf
    est_source = LabeledSource(true_source.priors, est)
    r_opt = logloss_risk(posterior_rule(true_source), true_source)
    r_plugin = logloss_risk(plugin_rule(est_source), true_source)
    return _report(r_opt, r_plugin, bound, eps)


def excess_logloss_identity(
    true_source: LabeledSource, est_dists: Sequence[Distribution]
) -> tuple[float, float]:
    """Both sides of the exact excess-log-loss identity.

    Returns ``(lhs, rhs)`` where ``lhs`` is the plug-in rule's excess
    log-loss risk and ``rhs = sum_i g_i * KL(D_i || D'_i) - KL(D || D')``
    with the prior-weighted mixtures ``D, D'``. The two agree to float
    round-off whenever every per-class KL is finite.
    """
    est = _check_estimates(true_source, est_dists)
    kls = [kl_divergence(d, e) for d, e in zip(true_source.class_dists, est)]
    if not all(math.isfinite(v) for v in kls):
        raise ValueError(
            "per-class KL divergence is infinite: estimate supports must cover the true class supports"
        )
    est_source = LabeledSource(true_source.priors, est)
    lhs = logloss_risk(plugin_rule(est_source), true_source) - logloss_risk(
        posterior_rule(true_source), true_source
    )
    mix_kl = kl_divergence(true_source.mixture_distribution(), est_source.mixture_distribution())
    rhs = sum(float(g) * v for g, v in zip(true_source.priors, kls)) - mix_kl
    return lhs, rhs


def _two_atom_params(epsilon_prime: float, gamma: float) -> None:
    ok = (
        math.isfinite(epsilon_prime)
        and math.isfinite(gamma)
        and epsilon_prime >= 0.0
        and gamma >= 0.0
        and epsilon_prime + gamma < 0.5
    )
    if not ok:
        raise ValueError(
            f"parameter out of range: need epsilon_prime >= 0, gamma >= 0, "
            f"epsilon_prime + gamma < 1/2; got ({epsilon_prime!r}, {gamma!r})"
        )


def _two_atom_instance(
    epsilon_prime: float, gamma: float
) -> tuple[LabeledSource, tuple[Distribution, Distribution]]:
    _two_atom_params(epsilon_prime, gamma)
    domain = Domain(("x0", "x1"))
    d0 = Distribution(domain, np.array([0.5 + epsilon_prime, 0.5 - epsilon_prime]))
    d1 = Distribution(domain, np.array([0.5 - epsilon_prime, 0.5 + epsilon_prime]))
    e0 = Distribution(domain, np.array([0.5 - gamma, 0.5 + gamma]))
    e1 = Distribution(domain, np.array([0.5 + gamma, 0.5 - gamma]))
    source = LabeledSource(np.array([0.5, 0.5]), (d0, d1))
    return source, (e0, e1)


def example1_construction(
    epsilon_prime: float, gamma: float
) -> tuple[LabeledSource, tuple[Distribution, Distribution], CostMatrix]:
    """Two-atom, two-class instance whose plug-in classifier flips every label.

    True classes put mass ``1/2 +- epsilon_prime`` on the two atoms; the
    estimates lean ``gamma`` the other way, so under 0/1 cost the optimal
    risk is ``1/2 - epsilon_prime``, the plug-in risk is
    ``1/2 + epsilon_prime``, and the cost bound is approached within
    ``2 * gamma`` as ``gamma`` shrinks.
    """
    source, est = _two_atom_instance(epsilon_prime, gamma)
    return source, est, CostMatrix.zero_one(2)


def example2_construction(
    epsilon_prime: float, gamma: float
) -> tuple[LabeledSource, tuple[Distribution, Distribution]]:
    """The same two-atom instance in the log-loss setting.

    The true and estimated mixtures both equal the uniform distribution,
    so the excess log-loss equals the per-class KL divergence exactly and
    the log-loss bound is met with zero slack.
    """
    return _two_atom_instance(epsilon_prime, gamma)


def random_l1_perturbation(
    d: Distribution, budget: float, rng: np.random.Generator
) -> Distribution:
    """Random valid distribution within L1 distance ``budget`` of ``d``.

    A zero-sum signed transfer vector of L1 norm ``budget`` is added,
    clipped to keep non-negativity, and renormalized; if clipping pushed
    the distance past the budget the result is pulled back along the
    segment toward ``d``, which scales the L1 distance linearly.
    """
    if not 0.0 <= budget <= 2.0:
        raise ValueError("L1 budget must lie in [0, 2]")
    m = d.domain.size
    if budget == 0.0 or m == 1:
        return d
    v = rng.standard_normal(m)
    v -= v.mean()
    norm = float(np.abs(v).sum())
    if norm == 0.0:
        return d
    v *= budget / norm
    cand = np.clip(d.mass + v, 0.0, None)
    perturbed = make_distribution(d.domain, cand)
    achieved = l1_distance(d, perturbed)
    if achieved > budget:
        t = budget / achieved
        perturbed = Distribution(d.domain, d.mass + t * (perturbed.mass - d.mass))
    return perturbed


def support_safe_perturbation(
    d: Distribution,
    budget: float,
    rng: np.random.Generator,
    floor: float = 0.05,
) -> Distribution:
    """Randomly perturbed estimate with full support (finite KL guaranteed)."""
    rough = random_l1_perturbation(d, budget, rng)
    lam = float(rng.uniform(0.2 * floor, floor))
    mass = (1.0 - lam) * rough.mass + lam / d.domain.size
    return Distribution(d.domain, mass)


def random_source(
    rng: np.random.Generator, k: int, m: int, domain: Optional[Domain] = None
) -> LabeledSource:
    """Random labeled source with priors bounded away from zero."""
    if domain is None:
        domain = Domain.indexed(m)
    priors = rng.uniform(0.05, 1.0, k)
    priors /= priors.sum()
    alpha = float(rng.choice([0.3, 1.0, 3.0]))
    dists = tuple(
        make_distribution(domain, rng.gamma(alpha, 1.0, m) + 1e-300) for _ in range(k)
    )
    return LabeledSource(priors, dists)


def random_cost(rng: np.random.Generator, k: int) -> CostMatrix:
    """Random cost matrix: 0/1, dense random, or scaled zero-diagonal."""
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return CostMatrix.zero_one(k)
    if kind == 1:
        c = rng.uniform(0.0, 1.0, (k, k))
        c[0, 1] += 1.0
        return CostMatrix(c)
    c = rng.uniform(0.1, 5.0, (k, k))
    np.fill_diagonal(c, 0.0)
    return CostMatrix(c)


def random_theorem1_instance(
    rng: np.random.Generator, k_max: int = 5, m_max: int = 64
) -> tuple[LabeledSource, tuple[Distribution, ...], CostMatrix]:
    k = int(rng.integers(2, k_max + 1))
    m = int(rng.integers(2, m_max + 1))
    source = random_source(rng, k, m)
    est = tuple(
        random_l1_perturbation(d, float(rng.uniform(0.0, 2.0)), rng)
        for d in source.class_dists
    )
    return source, est, random_cost(rng, k)


def random_theorem2_instance(
    rng: np.random.Generator, k_max: int = 5, m_max: int = 64
) -> tuple[LabeledSource, tuple[Distribution, ...]]:
    k = int(rng.integers(2, k_max + 1))
    m = int(rng.integers(2, m_max + 1))
    source = random_source(rng, k, m)
    est = tuple(
        support_safe_perturbation(d, float(rng.uniform(0.0, 1.5)), rng)
        for d in source.class_dists
    )
    return source, est


# ---------------------------------------------------------------------------
# Tightness search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TightnessResult:
    """Best instance found by the search and its excess/bound ratio."""

    source: LabeledSource
    est_dists: tuple[Distribution, ...]
    excess: float
    bound: float
    ratio: float


def _divergence(metric: str, p: Distribution, q: Distribution) -> float:
    return l1_distance(p, q) if metric == L1 else kl_divergence(p, q)


def _project_into_budget(
    metric: str, true_d: Distribution, est: Distribution, limit: float
) -> Distribution:
    """Pull ``est`` toward ``true_d`` until the per-class divergence fits."""
    if _divergence(metric, true_d, est) <= limit:
        return est
    if metric == L1:
        t = limit / l1_distance(true_d, est)
        return Distribution(true_d.domain, true_d.mass + t * (est.mass - true_d.mass))
    lo, hi = 0.0, 1.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        blend = Distribution(true_d.domain, (1.0 - mid) * true_d.mass + mid * est.mass)
        if kl_divergence(true_d, blend) <= limit:
            lo = mid
        else:
            hi = mid
    return Distribution(true_d.domain, (1.0 - lo) * true_d.mass + lo * est.mass)


class _SearchState:
    """Mutable (source, estimates) pair under a fixed budget and cost."""

    def __init__(self, metric, priors, true_masses, est_masses, domain, cost, epsilon):
        self.metric = metric
        self.priors = priors
        self.true_masses = [np.asarray(t, dtype=float) for t in true_masses]
        self.est_masses = [np.asarray(e, dtype=float) for e in est_masses]
        self.domain = domain
        self.cost = cost
        self.epsilon = epsilon

    def limits(self) -> list[float]:
        return [self.epsilon / float(g) for g in self.priors]

    def materialize(self) -> tuple[LabeledSource, tuple[Distribution, ...]]:
        dists = tuple(Distribution(self.domain, t) for t in self.true_masses)
        source = LabeledSource(self.priors, dists)
        est = tuple(
            _project_into_budget(
                self.metric, d, Distribution(self.domain, e), lim
            )
            for d, e, lim in zip(dists, self.est_masses, self.limits())
        )
        return source, est

    def excess(self) -> float:
        source, est = self.materialize()
        est_source = LabeledSource(source.priors, est)
        if self.metric == L1:
            f_star = bayes_classifier(source, self.cost)
            f_prime = bayes_classifier(est_source, self.cost)
            return risk(f_prime, source, self.cost) - risk(f_star, source, self.cost)
        value = logloss_risk(plugin_rule(est_source), source) - logloss_risk(
            posterior_rule(source), source
        )
        return value if math.isfinite(value) else -math.inf

    def copy(self) -> "_SearchState":
        return _SearchState(
            self.metric,
            self.priors,
            [t.copy() for t in self.true_masses],
            [e.copy() for e in self.est_masses],
            self.domain,
            self.cost,
            self.epsilon,
        )


def _transfer(mass: np.ndarray, a: int, b: int, step: float) -> bool:
    moved = min(step, float(mass[a]))
    if moved <= 0.0:
        return False
    mass[a] -= moved
    mass[b] += moved
    return True


def _climb(state: _SearchState, rng: np.random.Generator) -> tuple[float, _SearchState]:
    """Coordinate hill climbing with step halving (20 levels from 0.1 * budget)."""
    best_val = state.excess()
    best = state
    m = state.domain.size
    k = len(state.true_masses)
    for level in range(20):
        step = 0.1 * state.epsilon * 0.5**level
        if step <= 0.0:
            break
        for _ in range(2):
            accepted = False
            if m <= 6:
                pairs = [(a, b) for a in range(m) for b in range(m) if a != b]
            else:
                pairs = [
                    tuple(rng.choice(m, size=2, replace=False)) for _ in range(24)
                ]
            for i in range(k):
                for which in ("est", "true"):
                    for a, b in pairs:
                        trial = best.copy()
                        masses = (
                            trial.est_masses[i] if which == "est" else trial.true_masses[i]
                        )
                        if not _transfer(masses, a, b, step):
                            continue
                        val = trial.excess()
                        if val > best_val + 1e-15:
                            best_val = val
                            best = trial
                            accepted = True
            if not accepted:
                break
    return best_val, best


def _seed_l1_lower_bound(epsilon: float) -> tuple[np.ndarray, list, list]:
    s = min(epsilon, 0.45)
    source, est, _ = example1_construction(0.9 * s, 0.1 * s)
    return (
        np.asarray(source.priors),
        [d.mass.copy() for d in source.class_dists],
        [d.mass.copy() for d in est],
    )


def _seed_kl_lower_bound(epsilon: float) -> tuple[np.ndarray, list, list]:
    # Bisect the class separation until the per-class KL of the mirrored
    # two-atom instance uses the whole per-class budget 2 * epsilon.
    gamma = 1e-3
    target = 2.0 * epsilon

    def per_class_kl(ep: float) -> float:
        src, est = example2_construction(ep, gamma)
        return kl_divergence(src.class_dists[0], est[0])

    hi_ep = 0.5 - gamma - 1e-9
    lo, hi = 0.0, hi_ep
    if per_class_kl(hi_ep) > target:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if per_class_kl(mid) <= target:
                lo = mid
            else:
                hi = mid
    else:
        lo = hi_ep
    source, est = example2_construction(lo, gamma)
    return (
        np.asarray(source.priors),
        [d.mass.copy() for d in source.class_dists],
        [d.mass.copy() for d in est],
    )


def tightness_search(
    k: int,
    m: int,
    cost: Optional[CostLike],
    budget: PerturbationBudget,
    iterations: int,
    rng: np.random.Generator,
    include_analytic_seed: bool = True,
) -> TightnessResult:
    """Random-restart coordinate search maximizing excess risk within the budget.

    ``iterations`` counts restarts; each restart climbs with step halving.
    When ``k == m == 2`` the first restart starts from the analytic
    two-atom lower-bound family, which already attains ratio
    ``(epsilon - gamma) / epsilon`` with ``gamma = epsilon / 10`` in the
    L1 metric. The returned ratio never exceeds 1 (plus float tolerance)
    because the bound is a theorem.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if budget.metric == L1 and cost is None:
        raise ValueError("the L1 metric needs a cost matrix")
    domain = Domain.indexed(m)
    if budget.metric == L1:
        bound = theorem1_bound(budget.epsilon, k, cost)
    else:
        bound = theorem2_bound(budget.epsilon, k)

    uniform = np.full(m, 1.0 / m)
    if budget.epsilon == 0.0 or bound == 0.0:
        dists = tuple(Distribution(domain, uniform) for _ in range(k))
        source = LabeledSource(np.full(k, 1.0 / k), dists)
        return TightnessResult(source, dists, 0.0, bound, 0.0)

    best_val = -math.inf
    best_state: Optional[_SearchState] = None
    for restart in range(iterations):
        if restart == 0 and include_analytic_seed and k == 2 and m == 2:
            if budget.metric == L1:
                priors, true_masses, est_masses = _seed_l1_lower_bound(budget.epsilon)
            else:
                priors, true_masses, est_masses = _seed_kl_lower_bound(budget.epsilon)
        else:
            priors = (
                np.full(k, 1.0 / k)
                if rng.random() < 0.5
                else np.asarray(random_source(rng, k, m, domain).priors)
            )
            true_masses = [
                make_distribution(domain, rng.gamma(0.6, 1.0, m) + 1e-300).mass.copy()
                for _ in range(k)
            ]
            est_masses = []
            for t in true_masses:
                d = Distribution(domain, t)
                if budget.metric == L1:
                    cap = min(budget.epsilon / priors.min(), 2.0)
                    est_masses.append(random_l1_perturbation(d, cap, rng).mass.copy())
                else:
                    est_masses.append(
                        support_safe_perturbation(d, 1.0, rng).mass.copy()
                    )
        state = _SearchState(
            budget.metric, priors, true_masses, est_masses, domain, cost, budget.epsilon
        )
        val, state = _climb(state, rng)
        if val > best_val:
            best_val = val
            best_state = state

    source, est = best_state.materialize()
    excess = max(best_val, 0.0)
    ratio = excess / bound if bound > 0.0 else 0.0
    return TightnessResult(source, est, excess, bound, ratio)
