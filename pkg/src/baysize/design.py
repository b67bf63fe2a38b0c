"""mTPI-2 dose-finding trial engine.

Decisions come from the unit probability mass (UPM) rule: the unit interval is
tiled by the equivalence interval (EI) plus intervals of the same width above
and below it, and the dose moves toward whichever interval carries the largest
posterior mass per unit length. A dose whose posterior puts more than
``safety_threshold`` mass above the target is excluded together with every
higher dose; excluding dose 1 ends the trial.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .special import beta_upper_tail, log_beta_interval_mass

# Values this close to an EI edge count as on the edge (0.3 - 0.1 != 0.2).
EDGE_TOL = 1e-12

# Interval fragments shorter than this come from floating-point residue when
# tiling and are dropped.
_MIN_FRAGMENT = 1e-9


@dataclass(frozen=True)
class EquivalenceInterval:
    """Target rate ``p_T`` with EI ``[p_T - eps1, p_T + eps2]``."""

    p_T: float
    eps1: float
    eps2: float

    def __post_init__(self):
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("eps1 and eps2 must be positive")
        if not self.p_T - self.eps1 > 0:
            raise ValueError("p_T - eps1 must exceed 0")
        if not self.p_T + self.eps2 < 1:
            raise ValueError("p_T + eps2 must be below 1")

    @property
    def lower(self) -> float:
        return self.p_T - self.eps1

    @property
    def upper(self) -> float:
        return self.p_T + self.eps2

    @property
    def width(self) -> float:
        """Effect size ``eps1 + eps2``."""
        return self.eps1 + self.eps2

    def contains(self, p: float) -> bool:
        """Closed-interval membership."""
        return self.lower - EDGE_TOL <= p <= self.upper + EDGE_TOL

    def contains_open(self, p: float) -> bool:
        return self.lower + EDGE_TOL < p < self.upper - EDGE_TOL


@dataclass(frozen=True)
class DesignConfig:
    ei: EquivalenceInterval
    num_doses: int
    max_patients: int
    cohort_size: int = 3
    start_dose: int = 1
    safety_threshold: float = 0.95
    safety_prior_shape: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.num_doses < 1:
            raise ValueError("num_doses must be a positive integer")
        if self.cohort_size < 1:
            raise ValueError("cohort_size must be a positive integer")
        if not 1 <= self.start_dose <= self.num_doses:
            raise ValueError(f"start_dose must lie in 1..{self.num_doses}")
        if self.max_patients < self.cohort_size:
            raise ValueError("max_patients must be at least cohort_size")
        if not 0 < self.safety_threshold < 1:
            raise ValueError("safety_threshold must lie in (0, 1)")
        a0, b0 = self.safety_prior_shape
        if not (a0 > 0 and b0 > 0):
            raise ValueError("safety_prior_shape entries must be positive")
        object.__setattr__(self, "safety_prior_shape", (float(a0), float(b0)))

    def with_max_patients(self, n: int) -> "DesignConfig":
        return DesignConfig(
            ei=self.ei,
            num_doses=self.num_doses,
            max_patients=n,
            cohort_size=self.cohort_size,
            start_dose=self.start_dose,
            safety_threshold=self.safety_threshold,
            safety_prior_shape=self.safety_prior_shape,
        )


@dataclass
class TrialOutcome:
    """Per-dose DLT counts ``X_d`` and patient counts ``N_d`` of one trial."""

    dlt_counts: np.ndarray
    patient_counts: np.ndarray
    terminated_early: bool = False
    total_treated: int = field(default=-1)

    def __post_init__(self):
        self.dlt_counts = np.asarray(self.dlt_counts, dtype=np.int64)
        self.patient_counts = np.asarray(self.patient_counts, dtype=np.int64)
        if self.dlt_counts.shape != self.patient_counts.shape:
            raise ValueError("dlt_counts and patient_counts differ in length")
        if np.any(self.dlt_counts < 0) or np.any(self.dlt_counts > self.patient_counts):
            raise ValueError("need 0 <= X_d <= N_d for every dose")
        if self.total_treated < 0:
            self.total_treated = int(self.patient_counts.sum())
        elif self.total_treated != int(self.patient_counts.sum()):
            raise ValueError("total_treated must equal the sum of patient_counts")

    @property
    def num_doses(self) -> int:
        return len(self.patient_counts)

    def __eq__(self, other):
        if not isinstance(other, TrialOutcome):
            return NotImplemented
        return (
            np.array_equal(self.dlt_counts, other.dlt_counts)
            and np.array_equal(self.patient_counts, other.patient_counts)
            and self.terminated_early == other.terminated_early
            and self.total_treated == other.total_treated
        )


class DoseDecision(enum.IntEnum):
    # ordered from least to most toxic response
    ESCALATE = 0
    STAY = 1
    DEESCALATE = 2
    DEESCALATE_AND_EXCLUDE = 3


def upm_intervals(ei: EquivalenceInterval) -> list[tuple[float, float, DoseDecision]]:
    """Tile (0, 1) for the UPM rule, in tie-break preference order.

    The EI comes first, then intervals by increasing distance from the EI,
    the lower one before the upper one at equal distance.
    """
    w = ei.width
    below, above = [], []
    edge = ei.lower
    while edge > _MIN_FRAGMENT:
        below.append((max(edge - w, 0.0), edge, DoseDecision.ESCALATE))
        edge -= w
    edge = ei.upper
    while edge < 1.0 - _MIN_FRAGMENT:
        above.append((edge, min(edge + w, 1.0), DoseDecision.DEESCALATE))
        edge += w

    out = [(ei.lower, ei.upper, DoseDecision.STAY)]
    for k in range(max(len(below), len(above))):
        if k < len(below):
            out.append(below[k])
        if k < len(above):
            out.append(above[k])
    return out


@lru_cache(maxsize=64)
def _decision_table(
    p_T: float,
    eps1: float,
    eps2: float,
    threshold: float,
    prior: tuple[float, float],
    n_max: int,
) -> tuple[np.ndarray, np.ndarray]:
    ei = EquivalenceInterval(p_T, eps1, eps2)
    intervals = upm_intervals(ei)
    lo = np.array([iv[0] for iv in intervals])
    hi = np.array([iv[1] for iv in intervals])
    moves = np.array([int(iv[2]) for iv in intervals], dtype=np.int8)

    n = np.arange(n_max + 1)[:, None]
    x = np.arange(n_max + 1)[None, :]
    valid = x <= n
    a = prior[0] + np.where(valid, x, 0)
    b = prior[1] + np.where(valid, n - x, 0)

    log_upm = log_beta_interval_mass(
        a[..., None], b[..., None], lo, hi
    ) - np.log(hi - lo)
    # argmax returns the first maximum, which is the preferred interval
    decision = moves[np.argmax(log_upm, axis=-1)]

    tail = beta_upper_tail(a, b, p_T)
    unsafe = (tail > threshold) & valid
    decision = np.where(unsafe & (n > 0), np.int8(DoseDecision.DEESCALATE_AND_EXCLUDE), decision)
    decision = np.where(valid & (n > 0), decision, np.int8(-1)).astype(np.int8)
    decision.setflags(write=False)
    unsafe.setflags(write=False)
    return decision, unsafe


def decision_table(ei: EquivalenceInterval, n_max: int, threshold: float = 0.95,
                   prior: tuple[float, float] = (1.0, 1.0)):
    """Precomputed ``(decision[n, x], unsafe[n, x])`` for ``0 <= x <= n <= n_max``.

    ``unsafe`` is the exclusion / safety-stop indicator. Cells with ``x > n``
    or ``n = 0`` hold decision ``-1``.
    """
    return _decision_table(
        float(ei.p_T), float(ei.eps1), float(ei.eps2), float(threshold),
        (float(prior[0]), float(prior[1])), int(n_max),
    )


def mtpi2_decision(x: int, n: int, ei: EquivalenceInterval, threshold: float = 0.95,
                   prior: tuple[float, float] = (1.0, 1.0)) -> DoseDecision:
    """mTPI-2 decision for ``x`` DLTs among ``n`` patients at the current dose."""
    if n <= 0:
        raise ValueError("mtpi2_decision needs at least one treated patient")
    if not 0 <= x <= n:
        raise ValueError(f"need 0 <= x <= n, got x={x}, n={n}")
    table, _ = decision_table(ei, n, threshold, prior)
    return DoseDecision(int(table[n, x]))


def safety_stop(x1: int, n1: int, p_T: float, threshold: float = 0.95,
                prior: tuple[float, float] = (1.0, 1.0)) -> bool:
    """True iff ``Pr(p_1 > p_T | x1 of n1)`` exceeds ``threshold``."""
    if not 0 <= x1 <= n1:
        raise ValueError(f"need 0 <= x1 <= n1, got x1={x1}, n1={n1}")
    tail = beta_upper_tail(prior[0] + x1, prior[1] + n1 - x1, p_T)
    return bool(tail > threshold)


def simulate_trial(p_true, cfg: DesignConfig, rng: np.random.Generator) -> TrialOutcome:
    """Run one mTPI-2 trial against the true toxicity vector ``p_true``.

    Patient outcomes are ``u < p_true[dose]`` for ``u`` read in order from a
    single ``rng.random(cfg.max_patients)`` draw, so the stream consumption
    is fixed regardless of the path taken.
    """
    p = np.asarray(p_true, dtype=float)
    if p.shape != (cfg.num_doses,):
        raise ValueError(f"p_true must have {cfg.num_doses} entries")
    u = rng.random(cfg.max_patients)
    return _run_trial(p, u, cfg)


def _run_trial(p: np.ndarray, u: np.ndarray, cfg: DesignConfig) -> TrialOutcome:
    decisions, unsafe = decision_table(
        cfg.ei, cfg.max_patients, cfg.safety_threshold, cfg.safety_prior_shape
    )
    D = cfg.num_doses
    x = [0] * D
    n = [0] * D
    ceiling = D  # doses >= ceiling are excluded
    d = cfg.start_dose - 1
    treated = 0
    stopped = False
    while treated < cfg.max_patients:
        m = min(cfg.cohort_size, cfg.max_patients - treated)
        x[d] += int(np.count_nonzero(u[treated:treated + m] < p[d]))
        n[d] += m
        treated += m
        if d == 0 and unsafe[n[0], x[0]]:
            stopped = True
            break
        dec = decisions[n[d], x[d]]
        if dec == DoseDecision.ESCALATE:
            if d + 1 < ceiling:
                d += 1
        elif dec == DoseDecision.DEESCALATE:
            d = max(d - 1, 0)
        elif dec == DoseDecision.DEESCALATE_AND_EXCLUDE:
            ceiling = min(ceiling, d)
            if d == 0:
                stopped = True
                break
            d -= 1
    return TrialOutcome(np.array(x), np.array(n), stopped, treated)


def simulate_trials(p_true, cfg: DesignConfig, uniforms: np.ndarray):
    """Vectorized counterpart of :func:`simulate_trial` for many trials.

    ``p_true`` has shape ``(T, D)`` (or ``(D,)``, broadcast) and ``uniforms``
    shape ``(T, max_patients)``; row ``t`` of ``uniforms`` plays the role of
    the per-trial ``rng.random(max_patients)`` draw. Returns arrays
    ``(X, N, terminated_early)`` with shapes ``(T, D)``, ``(T, D)``, ``(T,)``.
    """
    u = np.asarray(uniforms, dtype=float)
    T = u.shape[0]
    D = cfg.num_doses
    p = np.broadcast_to(np.asarray(p_true, dtype=float), (T, D))
    decisions, unsafe = decision_table(
        cfg.ei, cfg.max_patients, cfg.safety_threshold, cfg.safety_prior_shape
    )
    X = np.zeros((T, D), dtype=np.int64)
    N = np.zeros((T, D), dtype=np.int64)
    dose = np.full(T, cfg.start_dose - 1)
    ceiling = np.full(T, D)
    active = np.ones(T, dtype=bool)
    stopped = np.zeros(T, dtype=bool)
    rows = np.arange(T)

    treated = 0
    while treated < cfg.max_patients:
        m = min(cfg.cohort_size, cfg.max_patients - treated)
        r = rows[active]
        d = dose[r]
        tox = np.count_nonzero(u[r, treated:treated + m] < p[r, d][:, None], axis=1)
        X[r, d] += tox
        N[r, d] += m
        treated += m

        xd, nd = X[r, d], N[r, d]
        stop = (d == 0) & unsafe[nd, xd]
        dec = decisions[nd, xd]
        excl = (dec == DoseDecision.DEESCALATE_AND_EXCLUDE) & ~stop
        stop |= excl & (d == 0)

        up = (dec == DoseDecision.ESCALATE) & (d + 1 < ceiling[r])
        down = (dec == DoseDecision.DEESCALATE) | excl
        ceiling[r] = np.where(excl, np.minimum(ceiling[r], d), ceiling[r])
        new_d = np.where(up, d + 1, np.where(down, np.maximum(d - 1, 0), d))
        dose[r] = new_d
        stopped[r] = stop
        active[r] = ~stop
        if not active.any():
            break
    return X, N, stopped
