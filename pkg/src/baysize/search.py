"""Simulation-based sample size search.

For a candidate maximum sample size ``n`` the Bayes-factor cutoff is calibrated
as an order statistic of ``B`` null trials, power is the fraction of ``C``
alternative trials whose Bayes factor falls strictly below that cutoff, and a
bracketed bisection over ``n`` finds the smallest ``n`` reaching the target.

Every simulated trial draws from its own stream seeded by
``(root_seed, phase, scenario, n, trial_index)``, so results do not depend on
how trials are split across worker processes.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .bayes_factor import BayesFactorBatch, HypothesisPrior
from .design import DesignConfig, EquivalenceInterval, simulate_trials
from .priors import FittingPriorSpec
from .scenarios import H0SamplingPrior, ScenarioSpec, default_scenarios, draw_h0, scenario_p1

logger = logging.getLogger(__name__)

PHASE_CALIBRATION = 0
PHASE_POWER = 1

_CHUNK = 250


@dataclass(frozen=True)
class SearchConfig:
    alpha: float
    beta: float
    n_upper: int
    n_lower: int | None = None
    calib_trials: int = 1000
    power_trials: int = 1000
    convergence_eps: int = 1
    h0_prior: H0SamplingPrior = H0SamplingPrior.ORDER_STATISTICS_UNIFORM
    h1_scenarios: tuple[ScenarioSpec, ...] = ()
    root_seed: int = 0
    round_to_cohort: bool = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.calib_trials < 1 or self.power_trials < 1:
            raise ValueError("calib_trials and power_trials must be at least 1")
        if self.convergence_eps < 1:
            raise ValueError("convergence_eps must be a positive integer")
        if self.n_lower is not None and not 1 <= self.n_lower <= self.n_upper:
            raise ValueError("need 1 <= n_lower <= n_upper")
        object.__setattr__(self, "h0_prior", H0SamplingPrior(self.h0_prior))
        object.__setattr__(self, "h1_scenarios", tuple(self.h1_scenarios))

    def lower_bound(self, design: DesignConfig) -> int:
        n_lower = self.n_lower if self.n_lower is not None else design.cohort_size
        if n_lower > self.n_upper:
            raise ValueError("n_lower exceeds n_upper")
        return n_lower

    def scenarios(self, ei: EquivalenceInterval, num_doses: int) -> tuple[ScenarioSpec, ...]:
        return self.h1_scenarios or tuple(default_scenarios(ei, num_doses))


@dataclass
class CalibrationResult:
    cutoff_log_bf: float
    empirical_type1: float
    sorted_log_bfs: np.ndarray = field(repr=False)
    rank: int = 0
    degenerate: bool = False


@dataclass
class PowerResult:
    power: float
    n: int
    per_scenario_power: np.ndarray
    mc_se: np.ndarray
    scenario_labels: tuple[str, ...] = ()

    @property
    def power_max(self) -> float:
        return float(self.per_scenario_power.max())


@dataclass
class Evaluation:
    n: int
    power: float
    cutoff_log_bf: float = float("nan")
    empirical_type1: float = float("nan")


@dataclass
class SearchResult:
    n_star: int | None
    feasible: bool
    target_power: float
    evaluations: list[Evaluation]
    n_unrounded: int | None = None

    @property
    def num_evaluations(self) -> int:
        return len(self.evaluations)


def trial_rng(root_seed: int, phase: int, scenario: int, n: int, index: int) -> np.random.Generator:
    return np.random.default_rng([root_seed, phase, scenario, n, index])


def _log_bf_chunk(job) -> np.ndarray:
    (phase, scenario, n, start, stop, root_seed, design, spec, hp, h0_kind, p_star) = job
    cfg = design.with_max_patients(n)
    T = stop - start
    u = np.empty((T, n))
    p = np.empty((T, design.num_doses))
    for t in range(T):
        rng = trial_rng(root_seed, phase, scenario, n, start + t)
        p[t] = draw_h0(h0_kind, design.num_doses, design.ei, rng) if p_star is None else p_star
        u[t] = rng.random(n)
    X, N, _ = simulate_trials(p, cfg, u)
    return BayesFactorBatch(spec, hp).log_bf(X, N)


def simulate_log_bfs(n: int, trials: int, *, phase: int, scenario: int, root_seed: int,
                     design: DesignConfig, spec: FittingPriorSpec,
                     hp: HypothesisPrior | None = None,
                     h0_prior: H0SamplingPrior | None = None,
                     p_star: np.ndarray | None = None,
                     workers: int = 1) -> np.ndarray:
    """Log Bayes factors of ``trials`` simulated trials, in trial-index order.

    Exactly one of ``h0_prior`` (null sampling prior) and ``p_star`` (point
    mass alternative) selects where true toxicities come from.
    """
    if (h0_prior is None) == (p_star is None):
        raise ValueError("give exactly one of h0_prior and p_star")
    jobs = [
        (phase, scenario, n, s, min(s + _CHUNK, trials), root_seed, design, spec, hp,
         h0_prior, None if p_star is None else np.asarray(p_star, dtype=float))
        for s in range(0, trials, _CHUNK)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_log_bf_chunk, jobs))
    else:
        parts = [_log_bf_chunk(job) for job in jobs]
    return np.concatenate(parts)


def cutoff_from_sample(log_bfs: Sequence[float], alpha: float) -> CalibrationResult:
    """Cutoff at the ``floor(B * alpha)``-th order statistic (rank at least 1)."""
    s = np.sort(np.asarray(log_bfs, dtype=float))
    B = len(s)
    rank = math.floor(B * alpha)
    degenerate = rank < 1
    if degenerate:
        warnings.warn(
            f"floor(B * alpha) = 0 for B={B}, alpha={alpha}; using the smallest "
            "Bayes factor as cutoff",
            RuntimeWarning,
            stacklevel=2,
        )
        rank = 1
    cutoff = float(s[rank - 1])
    type1 = float(np.count_nonzero(s < cutoff)) / B
    return CalibrationResult(cutoff, type1, s, rank, degenerate)


def calibrate_cutoff(n: int, cfg: SearchConfig, design: DesignConfig, spec: FittingPriorSpec,
                     hp: HypothesisPrior | None = None, workers: int = 1) -> CalibrationResult:
    """Type I error calibration at maximum sample size ``n``."""
    if n < cfg.lower_bound(design):
        raise ValueError(f"n={n} is below n_lower")
    log_bfs = simulate_log_bfs(
        n, cfg.calib_trials, phase=PHASE_CALIBRATION, scenario=0, root_seed=cfg.root_seed,
        design=design, spec=spec, hp=hp, h0_prior=cfg.h0_prior, workers=workers,
    )
    return cutoff_from_sample(log_bfs, cfg.alpha)


def power_from_samples(n: int, cutoff_log_bf: float, samples: Sequence[np.ndarray],
                       labels: Sequence[str] = ()) -> PowerResult:
    """Fraction of each scenario's log Bayes factors strictly below the cutoff."""
    per = np.array([np.count_nonzero(np.asarray(s) < cutoff_log_bf) / len(s) for s in samples])
    sizes = np.array([len(s) for s in samples])
    se = np.sqrt(per * (1 - per) / sizes)
    return PowerResult(float(per.min()), n, per, se, tuple(labels))


def _scenario_log_bfs(n, cfg, design, spec, hp, scenarios, workers):
    out = []
    for k, sc in enumerate(scenarios):
        p_star = scenario_p1(sc, design.ei, design.num_doses)
        out.append(simulate_log_bfs(
            n, cfg.power_trials, phase=PHASE_POWER, scenario=k, root_seed=cfg.root_seed,
            design=design, spec=spec, hp=hp, p_star=p_star, workers=workers,
        ))
    return out


def estimate_power(n: int, cutoff_log_bf: float, cfg: SearchConfig, design: DesignConfig,
                   spec: FittingPriorSpec, scenario: ScenarioSpec | Sequence[ScenarioSpec] | None = None,
                   hp: HypothesisPrior | None = None, workers: int = 1) -> PowerResult:
    """Power at ``n`` for one scenario or, by default, the configured list.

    With several scenarios the reported power is their minimum.
    """
    if scenario is None:
        scenarios = cfg.scenarios(design.ei, design.num_doses)
    elif isinstance(scenario, ScenarioSpec):
        scenarios = (scenario,)
    else:
        scenarios = tuple(scenario)
    samples = _scenario_log_bfs(n, cfg, design, spec, hp, scenarios, workers)
    return power_from_samples(n, cutoff_log_bf, samples, [s.label for s in scenarios])


def bisect_sample_size(power_fn: Callable[[int], float | Evaluation], n_lower: int, n_upper: int,
                       target: float, eps: int = 1) -> SearchResult:
    """Bracketed bisection for the smallest ``n`` with ``power_fn(n) >= target``.

    Starts at ``n_upper``. A power above ``target`` moves the upper bracket
    down to ``n``, otherwise the lower bracket moves up; the next candidate is
    the ceiling of the midpoint of ``n`` and the opposite bracket. The loop
    stops when consecutive candidates differ by less than ``eps``. The ceiling
    never lands on an untested ``n_lower``, so it is probed once at the end if
    the search settled just above it.
    """
    if not 1 <= n_lower <= n_upper:
        raise ValueError("need 1 <= n_lower <= n_upper")
    seen: dict[int, Evaluation] = {}
    order: list[Evaluation] = []

    def evaluate(n: int) -> Evaluation:
        if n not in seen:
            res = power_fn(n)
            ev = res if isinstance(res, Evaluation) else Evaluation(n, float(res))
            seen[n] = ev
            order.append(ev)
            logger.info("n=%d power=%.4f", n, ev.power)
        return seen[n]

    top = evaluate(n_upper)
    if top.power < target:
        return SearchResult(None, False, target, order)

    lo, hi = n_lower, n_upper
    n = n_upper
    while True:
        if seen[n].power > target:
            hi = n
            nxt = math.ceil((n + lo) / 2)
        else:
            lo = n
            nxt = math.ceil((hi + n) / 2)
        nxt = min(max(nxt, n_lower), n_upper)
        if abs(nxt - n) < eps:
            break
        evaluate(nxt)
        n = nxt

    if lo == n_lower and n_lower not in seen and n_lower + 1 in seen:
        evaluate(n_lower)

    passing = [ev.n for ev in order if ev.power >= target]
    return SearchResult(min(passing), True, target, order)


def find_sample_size(cfg: SearchConfig, design: DesignConfig, spec: FittingPriorSpec,
                     hp: HypothesisPrior | None = None, workers: int = 1) -> SearchResult:
    """Smallest ``n`` whose calibrated power reaches ``1 - beta``."""

    def power_at(n: int) -> Evaluation:
        cal = calibrate_cutoff(n, cfg, design, spec, hp, workers)
        pw = estimate_power(n, cal.cutoff_log_bf, cfg, design, spec, hp=hp, workers=workers)
        return Evaluation(n, pw.power, cal.cutoff_log_bf, cal.empirical_type1)

    result = bisect_sample_size(power_at, cfg.lower_bound(design), cfg.n_upper,
                                1.0 - cfg.beta, cfg.convergence_eps)
    result.n_unrounded = result.n_star
    if result.feasible and cfg.round_to_cohort:
        k = design.cohort_size
        result.n_star = -(-result.n_star // k) * k
    return result


@dataclass
class TableCell:
    half_effect: float
    alpha: float
    n: int
    power_min: float
    power_max: float
    mc_se: float
    per_scenario_power: np.ndarray
    cutoff_log_bf: float
    empirical_type1: float


def power_table(half_effects: Sequence[float], alphas: Sequence[float], ns: Sequence[int],
                cfg: SearchConfig, design: DesignConfig, spec: FittingPriorSpec,
                hp: HypothesisPrior | None = None, workers: int = 1) -> list[TableCell]:
    """Min and max power across scenarios for every (half effect, alpha, n).

    Each half effect ``h`` sets ``eps1 = eps2 = h`` around the design's
    ``p_T``. The null and alternative samples at a given ``(h, n)`` are shared
    by all alphas, so power is monotone in alpha within a table.
    Cells come back in grid order: half effect, then alpha, then n.
    """
    if not (half_effects and alphas and ns):
        raise ValueError("power table grid must be nonempty")
    cells = []
    for h in half_effects:
        ei = EquivalenceInterval(design.ei.p_T, h, h)
        d_h = replace(design, ei=ei)
        s_h = replace(spec, ei=ei)
        scenarios = cfg.scenarios(ei, design.num_doses)
        by_n = {}
        for n in ns:
            null = simulate_log_bfs(
                n, cfg.calib_trials, phase=PHASE_CALIBRATION, scenario=0,
                root_seed=cfg.root_seed, design=d_h, spec=s_h, hp=hp,
                h0_prior=cfg.h0_prior, workers=workers,
            )
            alt = _scenario_log_bfs(n, cfg, d_h, s_h, hp, scenarios, workers)
            by_n[n] = (null, alt)
        for a in alphas:
            for n in ns:
                null, alt = by_n[n]
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    cal = cutoff_from_sample(null, a)
                pw = power_from_samples(n, cal.cutoff_log_bf, alt)
                cells.append(TableCell(
                    h, a, n, pw.power, pw.power_max, float(pw.mc_se.max()),
                    pw.per_scenario_power, cal.cutoff_log_bf, cal.empirical_type1,
                ))
    return cells
