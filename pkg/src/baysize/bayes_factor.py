"""Bayes factor of H0 (no dose is the MTD) against H1 (one dose is the MTD).

Each submodel's marginal likelihood factorizes over doses into truncated
beta-binomial integrals without the binomial coefficient. The mTPI-2 allocation
probabilities depend on the data alone, so they cancel between hypotheses and
the counts ``(X_d, N_d)`` are sufficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, logsumexp

from .design import TrialOutcome
from .priors import (
    FittingPriorSpec,
    Hypothesis,
    Submodel,
    TruncatedBeta,
    fitting_prior_submodel,
    prior_arrays,
    submodels,
)
from .special import log_beta_interval_mass


@dataclass(frozen=True)
class HypothesisPrior:
    """Submodel weights within each hypothesis; uniform unless given.

    ``hypothesis_prob`` is carried for completeness. It does not enter the
    Bayes factor, which is a ratio of marginal likelihoods.
    """

    weights_h0: tuple[float, ...] | None = None
    weights_h1: tuple[float, ...] | None = None
    hypothesis_prob: tuple[float, float] = (0.5, 0.5)

    def resolved(self, num_doses: int) -> tuple[np.ndarray, np.ndarray]:
        return (
            _normalize(self.weights_h0, num_doses + 1, "weights_h0"),
            _normalize(self.weights_h1, num_doses, "weights_h1"),
        )


def _normalize(w, size, name):
    if w is None:
        return np.full(size, 1.0 / size)
    w = np.asarray(w, dtype=float)
    if w.shape != (size,):
        raise ValueError(f"{name} must have {size} entries")
    if np.any(w < 0) or not w.sum() > 0:
        raise ValueError(f"{name} must be non-negative with a positive sum")
    return w / w.sum()


@dataclass
class BayesFactorResult:
    log_bf: float
    log_marginal_h0: float
    log_marginal_h1: float
    per_submodel_log_marginals: tuple[np.ndarray, np.ndarray] = field(repr=False)

    @property
    def bf(self) -> float:
        return float(np.exp(self.log_bf))


def log_marginal_dose(x: int, n: int, prior: TruncatedBeta) -> float:
    """``log ∫ p^x (1-p)^(n-x) TruncBeta(p) dp`` in closed form."""
    if not 0 <= x <= n:
        raise ValueError(f"need 0 <= x <= n, got x={x}, n={n}")
    if n == 0:
        return 0.0
    a, b = prior.a + x, prior.b + n - x
    post = betaln(a, b) + log_beta_interval_mass(a, b, prior.lo, prior.hi)
    return float(post - prior.log_normalizer)


def log_marginal_submodel(y: TrialOutcome, sub: Submodel, spec: FittingPriorSpec) -> float:
    if y.num_doses != spec.num_doses:
        raise ValueError("trial outcome and prior disagree on the number of doses")
    factors = fitting_prior_submodel(sub, spec)
    return sum(
        log_marginal_dose(int(x), int(n), f)
        for x, n, f in zip(y.dlt_counts, y.patient_counts, factors)
    )


def _mixture(log_m: np.ndarray, w: np.ndarray) -> np.ndarray:
    keep = w > 0
    return logsumexp(log_m[..., keep] + np.log(w[keep]), axis=-1)


def bayes_factor(y: TrialOutcome, spec: FittingPriorSpec,
                 hp: HypothesisPrior | None = None) -> BayesFactorResult:
    hp = hp or HypothesisPrior()
    w0, w1 = hp.resolved(spec.num_doses)
    m0 = np.array([log_marginal_submodel(y, s, spec)
                   for s in submodels(Hypothesis.H0, spec.num_doses)])
    m1 = np.array([log_marginal_submodel(y, s, spec)
                   for s in submodels(Hypothesis.H1, spec.num_doses)])
    h0, h1 = float(_mixture(m0, w0)), float(_mixture(m1, w1))
    return BayesFactorResult(h0 - h1, h0, h1, (m0, m1))


class BayesFactorBatch:
    """Vectorized log Bayes factors for many trials under one fitting prior.

    Intended for the Monte Carlo loops; agrees with :func:`bayes_factor`.
    """

    def __init__(self, spec: FittingPriorSpec, hp: HypothesisPrior | None = None):
        self.spec = spec
        hp = hp or HypothesisPrior()
        self.w0, self.w1 = hp.resolved(spec.num_doses)
        subs, a, b, lo, hi = prior_arrays(spec)
        self.subs = subs
        # c = 0 makes every factor depend only on its interval; collapse the
        # submodel axis to the three distinct (LI, EI, HI) priors
        keys = np.stack([a, b, lo, hi], axis=-1).reshape(-1, 4)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        self._uniq = uniq
        self._inverse = inverse.reshape(a.shape)

    def log_marginals(self, X, N) -> np.ndarray:
        """Per-submodel log marginals, shape ``(T, 2D + 1)``; H0 family first."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        N = np.atleast_2d(np.asarray(N, dtype=float))
        a, b, lo, hi = (self._uniq[:, k] for k in range(4))
        log_norm = betaln(a, b) + log_beta_interval_mass(a, b, lo, hi)
        # (T, D, U): every dose under every distinct prior factor
        pa = a + X[..., None]
        pb = b + (N - X)[..., None]
        per = betaln(pa, pb) + log_beta_interval_mass(pa, pb, lo, hi) - log_norm
        per = np.where(N[..., None] > 0, per, 0.0)
        D = self.spec.num_doses
        dose_idx = np.broadcast_to(np.arange(D), self._inverse.shape)
        # per[:, dose, prior_of(sub, dose)] summed over doses
        return per[:, dose_idx, self._inverse].sum(axis=-1)

    def log_bf(self, X, N) -> np.ndarray:
        m = self.log_marginals(X, N)
        D = self.spec.num_doses
        return _mixture(m[:, : D + 1], self.w0) - _mixture(m[:, D + 1:], self.w1)
