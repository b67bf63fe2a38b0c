"""Fitting priors: truncated-Beta products over the augmented submodels.

Under H1 the ``D`` submodels ``M_{1d}`` put exactly dose ``d`` in the EI,
doses below it in the lower interval (LI) and doses above it in the higher
interval (HI). Under H0 the ``D + 1`` submodels ``M_{0d}`` put doses ``1..d``
in LI and the rest in HI.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .design import EquivalenceInterval
from .special import log_beta_interval_mass

DEFAULT_MODE_CONSTANTS = (0.6, 0.9, 1.05, 1.2)


class Hypothesis(enum.IntEnum):
    H0 = 0
    H1 = 1


class Region(enum.IntEnum):
    LI = 0
    EI = 1
    HI = 2


@dataclass(frozen=True)
class Submodel:
    hypothesis: Hypothesis
    index: int

    def __str__(self):
        return f"M{int(self.hypothesis)}{self.index}"

    def regions(self, num_doses: int) -> list[Region]:
        """Interval assignment of every dose under this submodel."""
        d = self.index
        if self.hypothesis == Hypothesis.H1:
            if not 1 <= d <= num_doses:
                raise ValueError(f"H1 submodel index must lie in 1..{num_doses}, got {d}")
            return [Region.LI] * (d - 1) + [Region.EI] + [Region.HI] * (num_doses - d)
        if not 0 <= d <= num_doses:
            raise ValueError(f"H0 submodel index must lie in 0..{num_doses}, got {d}")
        return [Region.LI] * d + [Region.HI] * (num_doses - d)


def submodels(hypothesis: Hypothesis, num_doses: int) -> list[Submodel]:
    hypothesis = Hypothesis(hypothesis)
    start = 1 if hypothesis == Hypothesis.H1 else 0
    return [Submodel(hypothesis, d) for d in range(start, num_doses + 1)]


@dataclass(frozen=True)
class TruncatedBeta:
    """``Beta(a, b)`` density restricted to ``(lo, hi)`` and renormalized."""

    a: float
    b: float
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Beta shapes must be positive")
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise ValueError(f"degenerate interval ({self.lo}, {self.hi})")

    @property
    def log_normalizer(self) -> float:
        """``log[B(a, b) * (I_hi - I_lo)]``."""
        return float(betaln(self.a, self.b)
                     + log_beta_interval_mass(self.a, self.b, self.lo, self.hi))

    def logpdf(self, p):
        p = np.asarray(p, dtype=float)
        inside = (p > self.lo) & (p < self.hi)
        with np.errstate(divide="ignore"):
            val = ((self.a - 1) * np.log(p) + (self.b - 1) * np.log1p(-p)
                   - self.log_normalizer)
        return np.where(inside, val, -np.inf)

    def pdf(self, p):
        return np.exp(self.logpdf(p))


@dataclass(frozen=True)
class FittingPriorSpec:
    ei: EquivalenceInterval
    num_doses: int
    c: float = 0.0
    mode_constants: tuple[float, float, float, float] = DEFAULT_MODE_CONSTANTS

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("dispersion c must be non-negative")
        if self.num_doses < 1:
            raise ValueError("num_doses must be a positive integer")
        a1, a2, a3, a4 = self.mode_constants
        if not (0 < a1 < 1 and 0 < a2 < 1):
            raise ValueError("mode constants a1, a2 must lie in (0, 1)")
        if not (a3 > 1 and a4 > 1):
            raise ValueError("mode constants a3, a4 must exceed 1")
        if not (a3 * self.ei.upper < 1 and a4 * self.ei.upper < 1):
            raise ValueError("a3 * (p_T + eps2) and a4 * (p_T + eps2) must be below 1")
        object.__setattr__(self, "mode_constants", tuple(float(v) for v in self.mode_constants))

    def region_bounds(self, region: Region) -> tuple[float, float]:
        if region == Region.LI:
            return 0.0, self.ei.lower
        if region == Region.EI:
            return self.ei.lower, self.ei.upper
        return self.ei.upper, 1.0


def recipe_mode_vector(i: int, j: int, spec: FittingPriorSpec) -> np.ndarray:
    """Mode vector ``q^{ij}`` indexed as in the reference mode recipe.

    For ``i = 0`` the recipe's column ``j`` has ``D - j`` doses below the EI;
    :func:`mode_vector` maps that onto the submodel with the same layout.
    """
    D = spec.num_doses
    a1, a2, a3, a4 = spec.mode_constants
    low, high = spec.ei.lower, spec.ei.upper
    if i == 1:
        if not 1 <= j <= D:
            raise ValueError(f"H1 column index must lie in 1..{D}")
        pivot = j
    elif i == 0:
        if not 0 <= j <= D:
            raise ValueError(f"H0 column index must lie in 0..{D}")
        pivot = D - j + 1  # position of the first HI dose
    else:
        raise ValueError("hypothesis index must be 0 or 1")

    q = np.empty(D)
    for k in range(1, D + 1):
        if k < pivot - 1:
            q[k - 1] = a1 * low
        elif k == pivot - 1:
            q[k - 1] = a2 * low
        elif k == pivot and i == 1:
            q[k - 1] = spec.ei.p_T
        elif (i == 1 and k == pivot + 1) or (i == 0 and k == pivot):
            q[k - 1] = a3 * high
        else:
            q[k - 1] = a4 * high
    return q


def mode_table(spec: FittingPriorSpec) -> dict[str, np.ndarray]:
    """All mode vectors keyed by their reference column label (``"M13"``, ``"M00"``, ...)."""
    D = spec.num_doses
    out = {f"M1{j}": recipe_mode_vector(1, j, spec) for j in range(1, D + 1)}
    out.update({f"M0{j}": recipe_mode_vector(0, j, spec) for j in range(0, D + 1)})
    return out


def mode_vector(sub: Submodel, spec: FittingPriorSpec) -> np.ndarray:
    """Pseudo-modes for each dose under submodel ``sub``.

    H0 submodels are matched to the recipe column with the same number of
    LI doses, so every mode falls inside the interval its dose is assigned to.
    """
    sub.regions(spec.num_doses)  # validates the index
    if sub.hypothesis == Hypothesis.H1:
        return recipe_mode_vector(1, sub.index, spec)
    return recipe_mode_vector(0, spec.num_doses - sub.index, spec)


def trunc_beta_from_mode(q: float, c: float, interval: tuple[float, float]) -> TruncatedBeta:
    if not 0 < q < 1:
        raise ValueError("mode q must lie in (0, 1)")
    if not c >= 0:
        raise ValueError("dispersion c must be non-negative")
    lo, hi = interval
    return TruncatedBeta(c * q + 1.0, c * (1.0 - q) + 1.0, float(lo), float(hi))


def fitting_prior_submodel(sub: Submodel, spec: FittingPriorSpec) -> list[TruncatedBeta]:
    q = mode_vector(sub, spec)
    return [
        trunc_beta_from_mode(qk, spec.c, spec.region_bounds(region))
        for qk, region in zip(q, sub.regions(spec.num_doses))
    ]


def prior_arrays(spec: FittingPriorSpec):
    """Stack every submodel's factors into arrays for vectorized evaluation.

    Returns ``(subs, a, b, lo, hi)`` where ``subs`` lists the H0 family then
    the H1 family and each array has shape ``(2D + 1, D)``.
    """
    subs = submodels(Hypothesis.H0, spec.num_doses) + submodels(Hypothesis.H1, spec.num_doses)
    factors = [fitting_prior_submodel(s, spec) for s in subs]
    a, b, lo, hi = (np.array([[getattr(f, attr) for f in row] for row in factors])
                    for attr in ("a", "b", "lo", "hi"))
    return subs, a, b, lo, hi
