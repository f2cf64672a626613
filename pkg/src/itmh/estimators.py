"""Importance-sampling estimators, asymptotic variances, worst-case risk and
minimax-optimal trial construction.

Risk here always means the worst-case ratio sup_f sigma^2(Q, f) / sigma^2(Pi, f)
over mean-zero unit-variance f, where sigma^2(Q, f) = Pi([f - Pi(f)]^2 w) is
the asymptotic variance of the self-normalized estimator under trial Q.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .quadrature import integrate_line
from .targets import (
    TargetKind,
    TargetModel,
    TrialKind,
    TrialModel,
    WeightFunction,
    atom_mixture,
    interval_probability,
    log_partition,
    log_partition_trial,
    set_mixture,
)

KIND_PLAIN = "plain"
KIND_SELF_NORMALIZED = "self_normalized"
KIND_CTMC_TIME_AVERAGE = "ctmc_time_average"
KIND_COMBINED_MULTIPLE = "combined_multiple"

CASE_INFINITE_WEIGHT = "infinite_weight"
CASE_TIED_TOP = "tied_top"
CASE_LAMBDA_ROOT = "lambda_root"
CASE_NO_ATOM_ESS_SUP = "no_atom_ess_sup"
CASE_LARGE_ATOM_CLOSED_FORM = "large_atom_closed_form"

TIE_RTOL = 1e-10
ROOT_RTOL = 1e-12
PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class EstimateRecord:
    """One replicate's estimate plus bookkeeping metadata."""

    value: float
    n: int
    estimator_kind: str
    seed: Optional[int] = None
    init_state: Optional[float] = None
    degenerate: bool = False


@dataclass(frozen=True)
class RiskReport:
    """Worst-case variance ratio of a trial, with the certifying case."""

    risk: float
    case_tag: str
    lambda_root: Optional[float] = None
    witness: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ConcentratedSetReport:
    """Concentrated-set trial plus its efficiency diagnostics."""

    trial: TrialModel
    set_mass: float
    within_efficiency_window: bool
    risk_bound: Optional[float] = None


@dataclass(frozen=True)
class MultipleIsPlan:
    """Weights and sample split for combining two self-normalized estimates."""

    t: float
    delta: float
    trial_x: TrialModel
    trial_y: TrialModel
    n_x: int
    n_y: int

    def __post_init__(self):
        if not 0.0 < self.t < 1.0:
            raise ValueError(f"combination weight t must be interior, got {self.t}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"sample fraction delta must be interior, got {self.delta}")
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("both batches need at least one sample")


# ---------------------------------------------------------------------------
# point estimators
# ---------------------------------------------------------------------------


def plain_is(samples, f: Callable, weightfn: WeightFunction) -> EstimateRecord:
    """Unnormalized estimator (1/n) sum f(X_i) w(X_i); needs exact weights."""
    if weightfn.mode != "exact":
        raise ValueError("plain_is needs exact weights; use snis for unnormalized ones")
    samples = np.asarray(samples)
    w = np.exp(np.asarray(weightfn.log_w(samples), dtype=float))
    fx = np.asarray(f(samples), dtype=float)
    return EstimateRecord(float(np.mean(fx * w)), samples.size, KIND_PLAIN)


def snis(samples, f: Callable, weightfn: WeightFunction) -> EstimateRecord:
    """Self-normalized estimator sum f w / sum w, computed in log space.

    The largest log weight is subtracted before exponentiation, so additive
    constants in ``log_w_unnorm`` cancel.  A batch whose weights all vanish
    in log space is returned with the ``degenerate`` flag set.
    """
    samples = np.asarray(samples)
    if samples.size < 1:
        raise ValueError("snis needs at least one sample")
    lw = np.asarray(weightfn.log_w_unnorm(samples), dtype=float)
    m = float(np.max(lw))
    if not np.isfinite(m):
        return EstimateRecord(
            math.nan, samples.size, KIND_SELF_NORMALIZED, degenerate=True
        )
    v = np.exp(lw - m)
    fx = np.asarray(f(samples), dtype=float)
    value = float(np.sum(fx * v) / np.sum(v))
    return EstimateRecord(value, samples.size, KIND_SELF_NORMALIZED)


def snis_ctmc(path, f: Callable) -> EstimateRecord:
    """Time average over a jump path: sum f(X_i) W_i / sum W_i."""
    states = np.asarray(path.states, dtype=float)
    holds = np.asarray(path.holding_times, dtype=float)
    if states.size < 1:
        raise ValueError("empty jump path")
    fx = np.asarray(f(states), dtype=float)
    value = float(np.sum(fx * holds) / np.sum(holds))
    return EstimateRecord(value, states.size, KIND_CTMC_TIME_AVERAGE)


# ---------------------------------------------------------------------------
# asymptotic variances
# ---------------------------------------------------------------------------


def _function_breakpoints(f) -> Tuple[float, ...]:
    return tuple(getattr(f, "breakpoints", ()))


def _trial_breakpoints(trial: TrialModel) -> Tuple[float, ...]:
    if trial.kind is TrialKind.SET_MIXTURE:
        return trial.params[0], trial.params[1]
    return ()


def target_mean(target: TargetModel, f: Callable) -> float:
    """Pi(f), by exact summation or expanding quadrature."""
    if target.kind is TargetKind.FINITE_DISCRETE:
        p = target.probabilities
        idx = np.arange(p.size)
        return float(np.sum(p * np.asarray(f(idx), dtype=float)))
    log_norm = log_partition(target)

    def integrand(x: float) -> float:
        return float(f(x)) * math.exp(float(target.log_pi_unnorm(x)) - log_norm)

    res = integrate_line(integrand, breakpoints=_function_breakpoints(f))
    if res.diverged:
        return math.inf
    return res.value


def target_variance(target: TargetModel, f: Callable) -> float:
    """sigma^2(Pi, f) = Pi(f^2) - Pi(f)^2."""
    if target.kind is TargetKind.FINITE_DISCRETE:
        p = target.probabilities
        fx = np.asarray(f(np.arange(p.size)), dtype=float)
        mu = float(np.sum(p * fx))
        return float(np.sum(p * (fx - mu) ** 2))
    mu = target_mean(target, f)
    if not np.isfinite(mu):
        return math.inf
    log_norm = log_partition(target)

    def integrand(x: float) -> float:
        d = float(f(x)) - mu
        return d * d * math.exp(float(target.log_pi_unnorm(x)) - log_norm)

    res = integrate_line(integrand, breakpoints=_function_breakpoints(f))
    return math.inf if res.diverged else res.value


def asymptotic_variance(trial: TrialModel, target: TargetModel, f: Callable) -> float:
    """sigma^2(Q, f) = Pi([f - Pi(f)]^2 w) with w = pi/q (normalized ratio).

    Finite targets are summed exactly; continuous ones use expanding
    quadrature, reporting +inf when the integral fails to converge.
    """
    if target.kind is TargetKind.FINITE_DISCRETE:
        if trial.probabilities is None:
            raise ValueError("finite target needs a finite trial")
        p = target.probabilities
        q = trial.probabilities
        fx = np.asarray(f(np.arange(p.size)), dtype=float)
        mu = float(np.sum(p * fx))
        dev2 = (fx - mu) ** 2
        with np.errstate(divide="ignore"):
            w = np.where(q > 0, p / q, math.inf)
        if np.any((dev2 > 0) & np.isinf(w)):
            return math.inf
        terms = np.where(dev2 > 0, p * dev2 * np.where(np.isinf(w), 0.0, w), 0.0)
        return float(np.sum(terms))

    mu = target_mean(target, f)
    if not np.isfinite(mu):
        return math.inf
    log_norm = log_partition(target)
    log_norm_q = log_partition_trial(trial)

    def integrand(x: float) -> float:
        d = float(f(x)) - mu
        log_dens = (
            2.0 * float(target.log_pi_unnorm(x))
            - float(trial.log_q_unnorm(x))
            - 2.0 * log_norm
            + log_norm_q
        )
        return d * d * math.exp(log_dens)

    bps = _function_breakpoints(f) + _trial_breakpoints(trial)
    res = integrate_line(integrand, breakpoints=bps)
    return math.inf if res.diverged else res.value


# ---------------------------------------------------------------------------
# worst-case risk on finite spaces
# ---------------------------------------------------------------------------


def _check_prob_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"{name} must be a 1-d vector with at least two entries")
    if np.any(v < 0):
        raise ValueError(f"{name} has negative entries")
    if abs(v.sum() - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"{name} sums to {v.sum()!r}, not 1")
    return v


def _two_point_witness(pi: np.ndarray, i: int, j: int) -> np.ndarray:
    """Mean-zero unit-variance function supported on atoms i and j."""
    f = np.zeros(pi.size)
    tot = pi[i] + pi[j]
    f[i] = math.sqrt(pi[j] / (pi[i] * tot))
    f[j] = -math.sqrt(pi[i] / (pi[j] * tot))
    return f


def worst_case_risk_finite(pi, q) -> RiskReport:
    """Worst-case variance ratio of trial q for a finite target pi.

    Three cases: +inf when the top weight is infinite; the top weight itself
    when it is tied; otherwise the unique root lambda of
    sum_i pi_i / (w_i - lambda) = 0 between the two largest weights, located
    by bisection (the left side is strictly increasing there).
    """
    pi = _check_prob_vector(pi, "pi")
    if np.any(pi == 0):
        raise ValueError("pi must be strictly positive everywhere")
    q = _check_prob_vector(q, "q")
    with np.errstate(divide="ignore"):
        w = np.where(q > 0, pi / q, math.inf)
    order = np.argsort(w)[::-1]
    i1, i2 = int(order[0]), int(order[1])
    w1, w2 = float(w[i1]), float(w[i2])
    if math.isinf(w1):
        return RiskReport(math.inf, CASE_INFINITE_WEIGHT)
    if w1 - w2 <= TIE_RTOL * w1:
        return RiskReport(w1, CASE_TIED_TOP, witness=_two_point_witness(pi, i1, i2))

    def g(lam: float) -> float:
        return float(np.sum(pi / (w - lam)))

    eps = 1e-12 * (w1 - w2)
    a, b = w2 + eps, w1 - eps
    if g(a) >= 0.0:
        lam = a
    elif g(b) <= 0.0:
        lam = b
    else:
        while (b - a) > ROOT_RTOL * abs(b):
            mid = 0.5 * (a + b)
            if g(mid) < 0.0:
                a = mid
            else:
                b = mid
        lam = 0.5 * (a + b)
    raw = 1.0 / (w - lam)
    witness = raw / math.sqrt(float(np.sum(pi * raw * raw)))
    return RiskReport(lam, CASE_LAMBDA_ROOT, lambda_root=lam, witness=witness)


# ---------------------------------------------------------------------------
# minimax constructions
# ---------------------------------------------------------------------------


def minimax_trial_atom(target: TargetModel, x_star: int) -> Tuple[TrialModel, float]:
    """Optimal trial when atom x_star carries mass p > 1/2.

    The trial halves the atom's mass and spreads the rest proportionally to
    pi; its worst-case ratio is 4 p (1 - p).
    """
    if target.kind is not TargetKind.FINITE_DISCRETE:
        raise ValueError("minimax_trial_atom needs a finite target")
    p = float(target.probabilities[x_star])
    if p <= 0.5:
        raise ValueError(
            f"atom mass {p} is not greater than 1/2; without a dominant atom "
            "no trial beats sampling the target itself"
        )
    return atom_mixture(target, x_star, 0.5), 4.0 * p * (1.0 - p)


def trial_family_risk(p: float, c: float) -> float:
    """Worst-case ratio p(1-p) / (c(1-c)) of the atom-mass-c trial family."""
    if not 0.5 < p < 1.0:
        raise ValueError(f"atom mass p must lie in (1/2, 1), got {p}")
    if not 0.0 < c < 1.0:
        raise ValueError(f"trial atom mass c must lie in (0, 1), got {c}")
    return p * (1.0 - p) / (c * (1.0 - c))


def concentrated_set_risk_bound(p: float, r: float) -> float:
    """Upper bound 4p(1-p) + (p - 1/2) p^2 r^2 for the c=1/2 set trial over
    functions whose oscillation on the set is at most r."""
    if not 0.5 < p < 1.0:
        raise ValueError(f"set mass p must lie in (1/2, 1), got {p}")
    if r < 0:
        raise ValueError("oscillation bound must be non-negative")
    return 4.0 * p * (1.0 - p) + (p - 0.5) * p * p * r * r


def concentrated_set_trial(
    target: TargetModel,
    interval: Tuple[float, float],
    c: float,
    osc_bound: Optional[float] = None,
) -> ConcentratedSetReport:
    """Trial concentrating mass c on an interval A of a continuous target.

    The trial density is c pi / P(A) on A and (1-c) pi / (1 - P(A)) off it.
    Efficiency requires 1 - P(A) < c < P(A); a trial outside that window is
    still constructed but flagged.  With c = 1/2, P(A) > 1/2 and an
    oscillation bound r, the worst-case-risk upper bound is reported.
    """
    trial = set_mixture(target, interval, c)
    p = trial.params[3]
    window_ok = (1.0 - p) < c < p
    bound = None
    if osc_bound is not None and abs(c - 0.5) < 1e-12 and p > 0.5:
        bound = concentrated_set_risk_bound(p, osc_bound)
    return ConcentratedSetReport(trial, p, window_ok, bound)


def two_point_test_function(E, p: float) -> Callable:
    """Step function sqrt((1-p)/p) on E and -sqrt(p/(1-p)) off E.

    ``E`` is an interval (lo, hi), an index collection (finite targets), or a
    boolean membership predicate.  Given p = Pi(E), the function has
    Pi(f) = 0 and Pi(f^2) = 1.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"set mass p must lie strictly in (0, 1), got {p}")
    hi_val = math.sqrt((1.0 - p) / p)
    lo_val = -math.sqrt(p / (1.0 - p))
    breakpoints: Tuple[float, ...] = ()
    if callable(E):
        member = E
    elif isinstance(E, tuple) and len(E) == 2:
        lo, hi = float(E[0]), float(E[1])
        breakpoints = (lo, hi)

        def member(x):
            x = np.asarray(x)
            return (x >= lo) & (x <= hi)

    else:
        idx = np.asarray(sorted(E), dtype=int)

        def member(x):
            return np.isin(np.asarray(x), idx)

    def f(x):
        return np.where(member(x), hi_val, lo_val)

    f.breakpoints = breakpoints
    return f


# ---------------------------------------------------------------------------
# multiple importance sampling
# ---------------------------------------------------------------------------


def combined_multiple_is(
    plan: MultipleIsPlan,
    target: TargetModel,
    samples_x,
    samples_y,
    f: Callable,
) -> EstimateRecord:
    """t-weighted average of the two per-trial self-normalized estimates."""
    from .targets import weight

    rec_x = snis(samples_x, f, weight(plan.trial_x, target))
    rec_y = snis(samples_y, f, weight(plan.trial_y, target))
    degenerate = rec_x.degenerate or rec_y.degenerate
    value = plan.t * rec_x.value + (1.0 - plan.t) * rec_y.value
    n = int(np.asarray(samples_x).size + np.asarray(samples_y).size)
    return EstimateRecord(value, n, KIND_COMBINED_MULTIPLE, degenerate=degenerate)


def multiple_is_asym_variance(
    plan: MultipleIsPlan, target: TargetModel, f: Callable
) -> float:
    """(t^2/delta) sigma^2(Q_X, f) + ((1-t)^2/(1-delta)) sigma^2(Q_Y, f)."""
    var_x = asymptotic_variance(plan.trial_x, target, f)
    var_y = asymptotic_variance(plan.trial_y, target, f)
    t, d = plan.t, plan.delta
    return (t * t / d) * var_x + ((1.0 - t) ** 2 / (1.0 - d)) * var_y
