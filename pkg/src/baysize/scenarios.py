"""Sampling priors: true toxicity vectors under H0 and H1.

H1 is a point mass at a scenario vector with one dose in the EI. H0 draws keep
every dose at or below the lower EI edge; the all-toxic region is left to the
trial's safety rules.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .design import EquivalenceInterval

# Step between consecutive doses above the MTD's upper neighbour.
UPPER_STEP = 0.1


class H0SamplingPrior(str, enum.Enum):
    ORDER_STATISTICS_UNIFORM = "order_statistics_uniform"
    MONOTONE_UNIFORM = "monotone_uniform"
    POINT_MASS_LOWER_EDGE = "point_mass_lower_edge"


def draw_h0(kind: H0SamplingPrior, num_doses: int, ei: EquivalenceInterval,
            rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Toxicity vector(s) from the H0 sampling prior.

    With ``size`` given, returns ``size`` independent draws stacked along the
    first axis.
    """
    kind = H0SamplingPrior(kind)
    if num_doses < 1:
        raise ValueError("num_doses must be a positive integer")
    top = ei.lower
    shape = (num_doses,) if size is None else (size, num_doses)
    if kind is H0SamplingPrior.POINT_MASS_LOWER_EDGE:
        return np.full(shape, top)
    if kind is H0SamplingPrior.ORDER_STATISTICS_UNIFORM:
        return np.sort(rng.uniform(0.0, top, size=shape), axis=-1)
    # p_1 ~ U(0, top), p_d ~ U(p_{d-1}, top)
    u = rng.random(shape)
    p = np.empty(shape)
    prev = np.zeros(shape[:-1])
    for d in range(num_doses):
        prev = prev + (top - prev) * u[..., d]
        p[..., d] = prev
    return p


@dataclass(frozen=True)
class ScenarioSpec:
    """An H1 scenario, either an explicit vector or the MTD geometry.

    Parametric fields: ``d_star`` is the 1-based MTD dose, ``lambda1`` its
    offset above the lower EI edge, ``rho1`` the gap from the lower EI edge
    down to dose ``d_star - 1`` and ``rho2`` the gap from the upper EI edge
    up to dose ``d_star + 1``.
    """

    p_star: tuple[float, ...] | None = None
    d_star: int | None = None
    lambda1: float | None = None
    rho1: float = 0.0
    rho2: float = 0.0
    name: str | None = None

    def __post_init__(self):
        if self.p_star is not None:
            if self.d_star is not None or self.lambda1 is not None:
                raise ValueError("give either p_star or the parametric fields, not both")
            object.__setattr__(self, "p_star", tuple(float(v) for v in self.p_star))
        elif self.d_star is None or self.lambda1 is None:
            raise ValueError("parametric scenario needs d_star and lambda1")

    @classmethod
    def mtd_at(cls, d_star: int, ei: EquivalenceInterval) -> "ScenarioSpec":
        """MTD at ``p_T`` with its neighbours on the EI edges."""
        return cls(d_star=d_star, lambda1=ei.eps1, rho1=0.0, rho2=0.0, name=f"mtd{d_star}")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.p_star is not None:
            return "p=" + "/".join(f"{v:g}" for v in self.p_star)
        return f"d{self.d_star}_l{self.lambda1:g}_r{self.rho1:g}_{self.rho2:g}"


def default_scenarios(ei: EquivalenceInterval, num_doses: int) -> list[ScenarioSpec]:
    """One scenario per dose level as the MTD."""
    return [ScenarioSpec.mtd_at(d, ei) for d in range(1, num_doses + 1)]


def _check_h1_vector(p: np.ndarray, ei: EquivalenceInterval) -> int:
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError(f"scenario entries must lie in (0, 1): {p.tolist()}")
    if np.any(np.diff(p) <= 0):
        raise ValueError(f"scenario entries must be strictly increasing: {p.tolist()}")
    in_closed = [d for d, v in enumerate(p) if ei.contains(v)]
    in_open = [d for d, v in enumerate(p) if ei.contains_open(v)]
    # the MTD may sit on an EI edge (lambda1 = 0 or eps1 + eps2), neighbours
    # may touch the edges but never enter the open EI
    if len(in_open) > 1 or not in_closed:
        raise ValueError(f"scenario must have exactly one dose in the EI: {p.tolist()}")
    if in_open:
        return in_open[0] + 1
    # all closed-EI entries are on edges; the MTD is the one a scenario names
    return in_closed[0] + 1


def scenario_p1(spec: ScenarioSpec, ei: EquivalenceInterval, num_doses: int) -> np.ndarray:
    """Resolve a scenario into its toxicity vector."""
    if spec.p_star is not None:
        p = np.array(spec.p_star)
        if p.shape != (num_doses,):
            raise ValueError(f"p_star must have {num_doses} entries")
        _check_h1_vector(p, ei)
        return p

    d_star, lam, rho1, rho2 = spec.d_star, spec.lambda1, spec.rho1, spec.rho2
    if not 1 <= d_star <= num_doses:
        raise ValueError(f"d_star must lie in 1..{num_doses}")
    if not 0 <= lam <= ei.width:
        raise ValueError("lambda1 must lie in [0, eps1 + eps2]")
    if rho1 < 0 or rho2 < 0:
        raise ValueError("rho1 and rho2 must be non-negative")

    p = np.empty(num_doses)
    k = d_star - 1  # 0-based MTD position
    p[k] = ei.lower + lam
    if k > 0:
        below = ei.lower - rho1
        if not below > 0:
            raise ValueError("rho1 must be smaller than p_T - eps1")
        p[k - 1] = below
        # remaining lower doses equally spaced inside (0, below)
        m = k - 1
        p[:m] = below * np.arange(1, m + 1) / (m + 1)
    if k < num_doses - 1:
        above = ei.upper + rho2
        if not above < 1:
            raise ValueError("rho2 must be smaller than 1 - (p_T + eps2)")
        p[k + 1] = above
        m = num_doses - k - 2
        step = min(UPPER_STEP, (1.0 - above) / (m + 1))
        p[k + 2:] = above + step * np.arange(1, m + 1)
    _check_h1_vector(p, ei)
    return p


def draw_h1(spec: ScenarioSpec, ei: EquivalenceInterval, num_doses: int) -> np.ndarray:
    """Point-mass H1 sampling prior: always the scenario vector."""
    return scenario_p1(spec, ei, num_doses)
