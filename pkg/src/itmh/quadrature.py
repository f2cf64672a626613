"""Adaptive quadrature over the real line with divergence detection.

Integrals of densities and variance integrands are computed on expanding
symmetric intervals: an initial panel ``[-L0, L0]`` plus rings
``[L, 2L]`` on both sides, doubling ``L`` until the last ring contributes
less than ``tail_rtol`` of the accumulated total.  If the rings are still
contributing past ``L_MAX`` the integral is declared divergent.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

L0_DEFAULT = 8.0
L_MAX = 1.0e6
TAIL_RTOL = 1.0e-10
EPSABS = 1.0e-12
EPSREL = 1.0e-10


class DivergentIntegralError(ArithmeticError):
    """Raised when an expanding-interval integral fails to converge."""


@dataclass(frozen=True)
class LineIntegral:
    value: float
    diverged: bool
    l_final: float


def integrate_interval(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    breakpoints: Sequence[float] = (),
) -> float:
    """Integrate ``fn`` on ``[lo, hi]``, splitting at interior breakpoints."""
    knots = [lo]
    for b in sorted(set(float(b) for b in breakpoints)):
        if lo < b < hi:
            knots.append(b)
    knots.append(hi)
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        val, _ = quad(fn, a, b, epsabs=EPSABS, epsrel=EPSREL, limit=200)
        total += val
    return total


def integrate_line(
    fn: Callable[[float], float],
    breakpoints: Sequence[float] = (),
    l0: float = L0_DEFAULT,
    tail_rtol: float = TAIL_RTOL,
) -> LineIntegral:
    """Integrate ``fn`` over the whole real line.

    Returns a :class:`LineIntegral`; ``diverged`` is set instead of raising
    so callers can map non-convergence to an infinite variance.
    """
    bps = [float(b) for b in breakpoints if np.isfinite(b)]
    lcur = max(l0, *(2.0 * abs(b) for b in bps)) if bps else l0
    total = integrate_interval(fn, -lcur, lcur, breakpoints=[0.0, *bps])
    scale = max(abs(total), 1e-12)
    while True:
        ring = integrate_interval(fn, lcur, 2.0 * lcur) + integrate_interval(
            fn, -2.0 * lcur, -lcur
        )
        total += ring
        scale = max(scale, abs(total))
        lcur *= 2.0
        if abs(ring) <= tail_rtol * scale:
            return LineIntegral(total, False, lcur)
        if lcur > L_MAX:
            return LineIntegral(total, True, lcur)


def integrate_line_strict(
    fn: Callable[[float], float],
    breakpoints: Sequence[float] = (),
    what: str = "integral",
) -> float:
    """Like :func:`integrate_line` but raises on divergence."""
    res = integrate_line(fn, breakpoints=breakpoints)
    if res.diverged:
        raise DivergentIntegralError(
            f"{what} did not converge on [-L, L] up to L = {res.l_final:g}"
        )
    return res.value
