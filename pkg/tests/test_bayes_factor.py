import math

import numpy as np
import pytest
from scipy import integrate

from baysize.bayes_factor import (
    BayesFactorBatch,
    HypothesisPrior,
    bayes_factor,
    log_marginal_dose,
    log_marginal_submodel,
)
from baysize.design import DesignConfig, EquivalenceInterval, TrialOutcome, simulate_trials
from baysize.priors import (
    FittingPriorSpec,
    Hypothesis,
    Submodel,
    TruncatedBeta,
    fitting_prior_submodel,
    submodels,
)

EI = EquivalenceInterval(0.3, 0.1, 0.1)


def quad_log_marginal_dose(x, n, f):
    val, _ = integrate.quad(lambda p: p ** x * (1 - p) ** (n - x) * f.pdf(p), f.lo, f.hi,
                            epsabs=0, epsrel=1e-12, limit=200)
    return math.log(val)


def quad_log_marginal_submodel(y, sub, spec):
    total = 0.0
    for x, n, f in zip(y.dlt_counts, y.patient_counts, fitting_prior_submodel(sub, spec)):
        if n > 0:
            total += quad_log_marginal_dose(int(x), int(n), f)
    return total


def test_dose_marginal_examples():
    assert log_marginal_dose(0, 0, TruncatedBeta(1, 1, 0.2, 0.4)) == 0.0
    assert log_marginal_dose(1, 2, TruncatedBeta(1, 1, 0.0, 1.0)) == pytest.approx(math.log(1 / 6))
    f = TruncatedBeta(1, 1, 0.2, 0.4)
    assert log_marginal_dose(2, 6, f) == pytest.approx(quad_log_marginal_dose(2, 6, f), rel=1e-8)


def test_submodel_marginals_match_quadrature():
    rng = np.random.default_rng(11)
    for c in (0.0, 48.0):
        spec = FittingPriorSpec(EI, 5, c=c)
        for _ in range(25):
            N = rng.integers(0, 13, 5)
            X = rng.integers(0, N + 1)
            y = TrialOutcome(X, N)
            for h in Hypothesis:
                for sub in submodels(h, 5):
                    got = log_marginal_submodel(y, sub, spec)
                    ref = quad_log_marginal_submodel(y, sub, spec)
                    assert got == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_single_dose_submodel_is_dose_marginal():
    spec = FittingPriorSpec(EI, 1, c=48.0)
    sub = Submodel(Hypothesis.H1, 1)
    y = TrialOutcome([2], [9])
    f = fitting_prior_submodel(sub, spec)[0]
    assert log_marginal_submodel(y, sub, spec) == log_marginal_dose(2, 9, f)


def test_empty_trial_gives_unit_bf():
    spec = FittingPriorSpec(EI, 5)
    res = bayes_factor(TrialOutcome(np.zeros(5), np.zeros(5)), spec)
    assert res.log_bf == 0.0 and res.bf == 1.0


def test_single_dose_example_by_hand():
    spec = FittingPriorSpec(EI, 1)
    res = bayes_factor(TrialOutcome([1], [3]), spec)

    def m(lo, hi):
        val, _ = integrate.quad(lambda p: p * (1 - p) ** 2, lo, hi, epsrel=1e-13)
        return val / (hi - lo)

    expect = (0.5 * m(0.0, 0.2) + 0.5 * m(0.4, 1.0)) / m(0.2, 0.4)
    assert res.bf == pytest.approx(expect, rel=1e-10)


def test_evidence_peaks_inside_ei():
    spec = FittingPriorSpec(EI, 1)
    lbf = {x: bayes_factor(TrialOutcome([x], [30]), spec).log_bf for x in (0, 9, 30)}
    assert lbf[9] < lbf[0] and lbf[9] < lbf[30]


def test_duplicating_data_changes_bf():
    spec = FittingPriorSpec(EI, 5)
    y = TrialOutcome([0, 1, 2, 0, 0], [3, 6, 9, 0, 0])
    y2 = TrialOutcome(2 * y.dlt_counts, 2 * y.patient_counts)
    assert bayes_factor(y, spec).log_bf != pytest.approx(bayes_factor(y2, spec).log_bf)


def test_weights_permuted_with_labels():
    # relabeling submodels together with their weights leaves the mixture unchanged
    spec = FittingPriorSpec(EI, 5, c=48.0)
    y = TrialOutcome([0, 1, 3, 2, 0], [3, 6, 9, 3, 0])
    res = bayes_factor(y, spec, HypothesisPrior(weights_h1=(0.1, 0.2, 0.3, 0.25, 0.15)))
    m0, m1 = res.per_submodel_log_marginals
    w1 = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    perm = np.array([3, 0, 4, 2, 1])
    from scipy.special import logsumexp
    h1 = logsumexp(m1[perm] + np.log(w1[perm]))
    assert h1 == pytest.approx(res.log_marginal_h1, rel=1e-14)


def test_zero_weight_submodel_skipped():
    spec = FittingPriorSpec(EI, 3)
    y = TrialOutcome([0, 1, 2], [3, 3, 6])
    full = bayes_factor(y, spec, HypothesisPrior(weights_h1=(0.0, 1.0, 1.0)))
    m1 = full.per_submodel_log_marginals[1]
    assert full.log_marginal_h1 == pytest.approx(np.logaddexp(m1[1], m1[2]) - math.log(2))


def test_weight_validation():
    with pytest.raises(ValueError):
        HypothesisPrior(weights_h1=(1.0, 1.0)).resolved(5)
    with pytest.raises(ValueError):
        HypothesisPrior(weights_h0=(0, 0, 0, 0, 0, 0)).resolved(5)


@pytest.mark.parametrize("c", [0.0, 48.0])
def test_batch_matches_scalar(c):
    spec = FittingPriorSpec(EI, 5, c=c)
    rng = np.random.default_rng(3)
    N = rng.integers(0, 20, (200, 5))
    X = rng.integers(0, N + 1)
    batch = BayesFactorBatch(spec).log_bf(X, N)
    for t in range(200):
        assert batch[t] == pytest.approx(bayes_factor(TrialOutcome(X[t], N[t]), spec).log_bf,
                                         rel=1e-12, abs=1e-12)


def test_bf_depends_only_on_counts():
    # different patient orders that land on the same counts give the same BF
    cfg = DesignConfig(EI, 5, 12)
    rng = np.random.default_rng(5)
    p = np.full((4000, 5), 0.3)
    X, N, _ = simulate_trials(p, cfg, rng.random((4000, 12)))
    lbf = BayesFactorBatch(FittingPriorSpec(EI, 5)).log_bf(X, N)
    seen = {}
    hits = 0
    for t in range(len(X)):
        key = (tuple(X[t]), tuple(N[t]))
        if key in seen:
            assert lbf[t] == lbf[seen[key]]
            hits += 1
        else:
            seen[key] = t
    assert hits > 100


@pytest.mark.parametrize("c", [0.0, 48.0])
def test_log_bf_finite_for_reachable_data(c):
    spec = FittingPriorSpec(EI, 5, c=c)
    batch = BayesFactorBatch(spec)
    rng = np.random.default_rng(8)
    T = 2000
    p = np.sort(rng.choice([0.0, 0.001, 0.3, 0.999, 1.0], (T, 5)), axis=1)
    p[: T // 2] = np.sort(rng.uniform(0, 1, (T // 2, 5)), axis=1)
    X, N, _ = simulate_trials(p, DesignConfig(EI, 5, 200), rng.random((T, 200)))
    assert np.all(np.isfinite(batch.log_bf(X, N)))
    # extreme corners that a long trial can reach
    extremes_X = np.array([[0, 0, 0, 0, 0], [0, 0, 0, 0, 198], [3, 0, 0, 0, 0]])
    extremes_N = np.array([[200, 0, 0, 0, 0], [0, 0, 0, 2, 198], [3, 0, 0, 0, 0]])
    assert np.all(np.isfinite(batch.log_bf(extremes_X, extremes_N)))
