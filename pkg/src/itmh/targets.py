"""Target and trial densities on the real line (plus finite atom spaces).

Everything is handled in log space: a target exposes ``log_pi_unnorm`` and,
when known analytically, the log normalizing constant.  Trials expose
``log_q_unnorm``.  Importance weights are formed as differences of the two,
so normalizing constants never enter the sampling path.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, ndtr

from .quadrature import integrate_line_strict

PROB_TOL = 1e-12


class TargetKind(Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"
    POLY_TAIL = "poly_tail"
    SUPER_EXP = "super_exp"
    FINITE_DISCRETE = "finite_discrete"


class TrialKind(Enum):
    TEMPERED = "tempered"
    EXPLICIT_FINITE = "explicit_finite"
    ATOM_MIXTURE = "atom_mixture"
    SET_MIXTURE = "set_mixture"


@dataclass(frozen=True, eq=False)
class TargetModel:
    """Immutable description of a target distribution.

    ``log_pi_unnorm`` accepts scalars or numpy arrays.  For finite targets
    the argument is an atom index.  ``log_normalizer`` is
    ``log(integral of exp(log_pi_unnorm))`` when known in closed form.
    """

    kind: TargetKind
    params: Tuple[float, ...]
    log_pi_unnorm: Callable
    log_normalizer: Optional[float] = None
    cdf: Optional[Callable] = None
    probabilities: Optional[np.ndarray] = None

    def kernel_args(self) -> Tuple[int, float, float]:
        """(code, p0, p1) triple consumed by the simulation kernels."""
        from . import kernels

        if self.kind is TargetKind.GAUSSIAN:
            return kernels.KIND_GAUSSIAN, self.params[0], self.params[1]
        if self.kind is TargetKind.STUDENT_T:
            return kernels.KIND_STUDENT_T, self.params[0], 0.0
        if self.kind is TargetKind.POLY_TAIL:
            g = self.params[0]
            return kernels.KIND_POLY_TAIL, g, math.log((g - 1.0) / 2.0)
        if self.kind is TargetKind.SUPER_EXP:
            return kernels.KIND_SUPER_EXP, self.params[0], self.params[1]
        raise ValueError(f"{self.kind.value} targets cannot be simulated on the line")


@dataclass(frozen=True, eq=False)
class TrialModel:
    """Trial (proposal) distribution, either tempered or in explicit form."""

    kind: TrialKind
    log_q_unnorm: Callable
    base_target: Optional[TargetModel] = None
    beta: Optional[float] = None
    probabilities: Optional[np.ndarray] = None
    params: Tuple[float, ...] = ()


MODE_SELF_NORMALIZED = "self_normalized"
MODE_EXACT = "exact"


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """log w = log pi - log q, up to an additive constant.

    In ``exact`` mode ``log_zratio`` holds the constant that turns the
    unnormalized log weight into the true Radon-Nikodym derivative:
    ``log w(x) = log_w_unnorm(x) + log_zratio``.
    """

    log_w_unnorm: Callable
    mode: str = MODE_SELF_NORMALIZED
    log_zratio: Optional[float] = None

    def log_w(self, x):
        if self.mode != MODE_EXACT:
            raise ValueError("exact weights unavailable: weight is self-normalized only")
        return self.log_w_unnorm(x) + self.log_zratio


# ---------------------------------------------------------------------------
# target constructors
# ---------------------------------------------------------------------------


def gaussian(mean: float = 0.0, sd: float = 1.0) -> TargetModel:
    """Normal target with density exp(-(x-mean)^2 / (2 sd^2)) / Z."""
    if not (np.isfinite(mean) and sd > 0):
        raise ValueError(f"invalid gaussian parameters mean={mean}, sd={sd}")

    def log_pi(x):
        d = (np.asarray(x, dtype=float) - mean) / sd
        return -0.5 * d * d

    def cdf(x):
        return ndtr((np.asarray(x, dtype=float) - mean) / sd)

    log_norm = 0.5 * math.log(2.0 * math.pi) + math.log(sd)
    return TargetModel(TargetKind.GAUSSIAN, (mean, sd), log_pi, log_norm, cdf)


def student_t(dof: float) -> TargetModel:
    """Student-t target; log density -(dof+1)/2 * log(1 + x^2/dof)."""
    if not dof > 0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    half = 0.5 * (dof + 1.0)

    def log_pi(x):
        x = np.asarray(x, dtype=float)
        return -half * np.log1p(x * x / dof)

    log_norm = gammaln(dof / 2.0) - gammaln(half) + 0.5 * math.log(dof * math.pi)
    if dof == 4:
        # algebraic antiderivative, cross-checked against quadrature in tests
        def cdf(x):
            x = np.asarray(x, dtype=float)
            u = x / np.sqrt(4.0 + x * x)
            return 0.5 + 0.25 * u * (3.0 - u * u)

    else:
        cdf = _symmetric_quadrature_cdf(log_pi, log_norm)
    return TargetModel(TargetKind.STUDENT_T, (dof,), log_pi, log_norm, cdf)


def poly_tail(gamma: float) -> TargetModel:
    """Polynomial-tail target (gamma-1)/2 * (1+|x|)^(-gamma), normalized."""
    if not gamma > 1:
        raise ValueError(f"tail index must exceed 1 for normalizability, got {gamma}")
    log_pref = math.log((gamma - 1.0) / 2.0)

    def log_pi(x):
        x = np.asarray(x, dtype=float)
        return log_pref - gamma * np.log1p(np.abs(x))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        half_tail = 0.5 * np.power(1.0 + np.abs(x), -(gamma - 1.0))
        return np.where(x >= 0, 1.0 - half_tail, half_tail)

    return TargetModel(TargetKind.POLY_TAIL, (gamma,), log_pi, 0.0, cdf)


def super_exp(a: float, omega: float) -> TargetModel:
    """Super-exponential target with density proportional to exp(-a |x|^omega)."""
    if not (a > 0 and omega > 1):
        raise ValueError(f"require a > 0 and omega > 1, got a={a}, omega={omega}")

    def log_pi(x):
        x = np.asarray(x, dtype=float)
        return -a * np.abs(x) ** omega

    log_norm = math.log(2.0) + gammaln(1.0 + 1.0 / omega) - math.log(a) / omega
    cdf = _symmetric_quadrature_cdf(log_pi, log_norm)
    return TargetModel(TargetKind.SUPER_EXP, (a, omega), log_pi, log_norm, cdf)


def finite_discrete(probabilities) -> TargetModel:
    """Finite target over atom indices 0..N-1."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("probabilities must be a non-empty 1-d vector")
    if not np.all(p > 0):
        raise ValueError("all atom masses must be strictly positive")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"atom masses sum to {p.sum()!r}, not 1 within {PROB_TOL}")
    logp = np.log(p)

    def log_pi(i):
        return logp[np.asarray(i, dtype=int)]

    return TargetModel(
        TargetKind.FINITE_DISCRETE, tuple(p), log_pi, 0.0, None, probabilities=p
    )


def _symmetric_quadrature_cdf(log_pi, log_norm: float) -> Callable:
    """CDF of a density symmetric about 0, by cumulative quadrature from 0."""

    def dens(t: float) -> float:
        return math.exp(float(log_pi(t)) - log_norm)

    def cdf(x):
        arr = np.asarray(x, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        absx = np.abs(flat)
        order = np.argsort(absx)
        mass = np.empty_like(absx)
        acc, prev = 0.0, 0.0
        for idx in order:
            s = absx[idx]
            if s > prev:
                seg, _ = quad(dens, prev, s, epsabs=1e-13, epsrel=1e-11, limit=200)
                acc += seg
                prev = s
            mass[idx] = acc
        out = np.where(flat >= 0, 0.5 + mass, 0.5 - mass)
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    return cdf


# ---------------------------------------------------------------------------
# trial constructors
# ---------------------------------------------------------------------------


def tempered(target: TargetModel, beta: float) -> TrialModel:
    """Trial with density proportional to pi^beta.

    For polynomial-tail targets (and Student-t, whose tails decay like
    |x|^-(dof+1)) the tempered density is normalizable only when
    beta * tail_index > 1; smaller beta is rejected.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"inverse temperature must lie in (0, 1], got {beta}")
    tail_index = None
    if target.kind is TargetKind.POLY_TAIL:
        tail_index = target.params[0]
    elif target.kind is TargetKind.STUDENT_T:
        tail_index = target.params[0] + 1.0
    if tail_index is not None and beta * tail_index <= 1.0:
        raise ValueError(
            f"beta={beta} gives an unnormalizable trial for tail index "
            f"{tail_index}; need beta > {1.0 / tail_index:.6g}"
        )

    def log_q(x):
        return beta * target.log_pi_unnorm(x)

    return TrialModel(TrialKind.TEMPERED, log_q, base_target=target, beta=beta)


def explicit_finite(probabilities) -> TrialModel:
    """Finite trial given directly as a probability vector (zeros allowed)."""
    q = np.asarray(probabilities, dtype=float)
    if q.ndim != 1 or q.size < 1:
        raise ValueError("probabilities must be a non-empty 1-d vector")
    if np.any(q < 0):
        raise ValueError("trial masses must be non-negative")
    if abs(q.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"trial masses sum to {q.sum()!r}, not 1 within {PROB_TOL}")
    with np.errstate(divide="ignore"):
        logq = np.log(q)

    def log_q(i):
        return logq[np.asarray(i, dtype=int)]

    return TrialModel(TrialKind.EXPLICIT_FINITE, log_q, probabilities=q)


def atom_mixture(target: TargetModel, x_star: int, c: float) -> TrialModel:
    """Finite trial placing mass c on atom ``x_star`` and c' * pi elsewhere."""
    if target.kind is not TargetKind.FINITE_DISCRETE:
        raise ValueError("atom_mixture requires a finite target")
    if not 0.0 < c < 1.0:
        raise ValueError(f"atom mass must lie strictly in (0, 1), got {c}")
    p = target.probabilities
    if not 0 <= x_star < p.size:
        raise ValueError(f"atom index {x_star} out of range for {p.size} atoms")
    q = p * (1.0 - c) / (1.0 - p[x_star])
    q[x_star] = c
    trial = explicit_finite(q / q.sum())
    return TrialModel(
        TrialKind.ATOM_MIXTURE,
        trial.log_q_unnorm,
        base_target=target,
        probabilities=trial.probabilities,
        params=(float(x_star), c),
    )


def set_mixture(target: TargetModel, interval: Tuple[float, float], c: float) -> TrialModel:
    """Trial that re-weights pi to place mass c on the interval A.

    Density: c * pi / P(A) on A and (1-c) * pi / (1 - P(A)) off A.
    """
    if target.kind is TargetKind.FINITE_DISCRETE:
        raise ValueError("set_mixture requires a continuous target")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError(f"interval must satisfy lo < hi, got ({lo}, {hi})")
    if not 0.0 < c < 1.0:
        raise ValueError(f"set mass must lie strictly in (0, 1), got {c}")
    p = interval_probability(target, lo, hi)
    if not 0.0 < p < 1.0:
        raise ValueError(f"target mass of A must be strictly interior, got {p}")
    shift_in = math.log(c / p)
    shift_out = math.log((1.0 - c) / (1.0 - p))

    def log_q(x):
        x = np.asarray(x, dtype=float)
        base = target.log_pi_unnorm(x)
        return base + np.where((x >= lo) & (x <= hi), shift_in, shift_out)

    return TrialModel(
        TrialKind.SET_MIXTURE, log_q, base_target=target, params=(lo, hi, c, p)
    )


def interval_probability(target: TargetModel, lo: float, hi: float) -> float:
    """P(lo <= X <= hi) under the target, via its CDF or quadrature."""
    if target.cdf is not None:
        return float(target.cdf(hi) - target.cdf(lo))
    log_norm = log_partition(target)

    def dens(t):
        return math.exp(float(target.log_pi_unnorm(t)) - log_norm)

    val, _ = quad(dens, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)
    return val


def log_partition(target: TargetModel) -> float:
    """log of the integral of the unnormalized target density."""
    if target.log_normalizer is not None:
        return target.log_normalizer
    if target.kind is TargetKind.FINITE_DISCRETE:
        return 0.0

    def dens(t):
        return math.exp(float(target.log_pi_unnorm(t)))

    return math.log(integrate_line_strict(dens, what="target normalizer"))


def log_partition_trial(trial: TrialModel) -> float:
    """log of the integral of the unnormalized trial density."""
    if trial.probabilities is not None:
        return 0.0

    def dens(t):
        return math.exp(float(trial.log_q_unnorm(t)))

    return math.log(integrate_line_strict(dens, what="trial normalizer"))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def log_density(target: TargetModel, x):
    """Unnormalized log density (log atom mass for finite targets)."""
    if target.kind is TargetKind.FINITE_DISCRETE:
        idx = np.asarray(x)
        if np.any(idx < 0) or np.any(idx >= target.probabilities.size):
            raise ValueError("atom index out of range")
        return target.log_pi_unnorm(idx)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("log_density requires finite x")
    return target.log_pi_unnorm(arr)


def cdf_eval(target: TargetModel, x):
    """CDF value in [0, 1]; raises for kinds with no CDF available."""
    if target.cdf is None:
        raise ValueError(f"target kind {target.kind.value} has no CDF")
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cdf_eval requires finite x")
    return target.cdf(arr)


def weight(trial: TrialModel, target: TargetModel, exact: bool = False) -> WeightFunction:
    """Importance weight w = pi/q as a log-space function.

    With ``exact=True`` the normalizing-constant ratio is computed (by
    summation for finite spaces, quadrature otherwise) so that true weights
    are available for the unnormalized importance sampling estimator.
    """

    def log_w(x):
        return np.asarray(
            target.log_pi_unnorm(x) - trial.log_q_unnorm(x), dtype=float
        )

    if not exact:
        return WeightFunction(log_w, MODE_SELF_NORMALIZED)
    log_zratio = log_partition_trial(trial) - log_partition(target)
    return WeightFunction(log_w, MODE_EXACT, log_zratio)


def sample_trial(trial: TrialModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw i.i.d. samples from trials that admit direct sampling.

    Supported: finite trials, and tempered Gaussians (where pi^beta is again
    a Gaussian).  Everything else must go through the MCMC sampler.
    """
    if trial.probabilities is not None:
        return rng.choice(trial.probabilities.size, size=size, p=trial.probabilities)
    if (
        trial.kind is TrialKind.TEMPERED
        and trial.base_target.kind is TargetKind.GAUSSIAN
    ):
        mean, sd = trial.base_target.params
        return rng.normal(mean, sd / math.sqrt(trial.beta), size=size)
    raise ValueError(f"no direct sampler for trial kind {trial.kind.value}")
