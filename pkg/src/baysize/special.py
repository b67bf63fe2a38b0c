"""Log-space helpers for the regularized incomplete beta function.

The Bayes factor needs ``log(I_hi(a, b) - I_lo(a, b))`` for shapes that grow
with the number of treated patients. Evaluating the difference naively loses
all precision once both endpoints sit in the upper tail, so the complemented
form ``Ic_lo - Ic_hi`` is used there. Cells that still come out with too few
significant digits are recomputed with mpmath.
"""

from __future__ import annotations

import mpmath
import numpy as np
from scipy.special import betainc, betaincc

# Below this fraction of retained significant digits the float64 difference
# is recomputed at high precision.
_CANCELLATION_RATIO = 1e-8
_MP_DPS = 50


def _log_mass_mp(a: float, b: float, lo: float, hi: float) -> float:
    with mpmath.workdps(_MP_DPS):
        mass = mpmath.betainc(a, b, lo, hi, regularized=True)
        if mass <= 0:
            # mpmath's own cancellation; fall back to the integral directly
            mass = mpmath.quad(lambda t: t ** (a - 1) * (1 - t) ** (b - 1), [lo, hi])
            mass /= mpmath.beta(a, b)
        return float(mpmath.log(mass))


def log_beta_interval_mass(a, b, lo, hi):
    """Return ``log P(lo < p < hi)`` for ``p ~ Beta(a, b)``, elementwise.

    All arguments broadcast against each other. The result is finite whenever
    ``lo < hi`` and the shapes are positive.
    """
    a, b, lo, hi = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (a, b, lo, hi))
    )
    mean = a / (a + b)
    upper_tail = lo >= mean

    i_lo = betainc(a, b, lo)
    i_hi = betainc(a, b, hi)
    ic_lo = betaincc(a, b, lo)
    ic_hi = betaincc(a, b, hi)

    diff = np.where(upper_tail, ic_lo - ic_hi, i_hi - i_lo)
    scale = np.where(upper_tail, ic_lo, i_hi)

    with np.errstate(divide="ignore", invalid="ignore"):
        bad = ~(diff > _CANCELLATION_RATIO * scale) | ~(diff > 0)
        out = np.log(np.where(bad, 1.0, diff))

    if np.any(bad):
        out = np.array(out, copy=True, ndmin=1)
        flat = [np.ravel(v) for v in (a, b, lo, hi)]
        for i in np.flatnonzero(bad):
            out.flat[i] = _log_mass_mp(*(float(v[i]) for v in flat))
        out = out.reshape(a.shape)
    return out if out.ndim else float(out)


def beta_upper_tail(a, b, t):
    """``P(p > t)`` for ``p ~ Beta(a, b)``."""
    return betaincc(a, b, t)
