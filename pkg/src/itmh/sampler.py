"""Random-walk Metropolis-Hastings on a tempered target, plus the associated
continuous-time jump process.

The discrete chain targets q proportional to pi^beta and accepts a move from
x to y with probability min(1, (pi(y)/pi(x))^beta).  The jump process holds
at each state for an exponential time with mean pi(x)^(1-beta) (unnormalized
time units; diagnostics that need the normalized generator rescale time by a
quadrature-computed constant).

Every replicate owns an independent RNG stream derived from
``(master_seed, replicate_index)`` through ``numpy.random.SeedSequence``,
which makes results independent of worker scheduling and backend.
"""

import csv
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr, ndtri

from . import kernels
from .estimators import EstimateRecord, snis
from .quadrature import integrate_line_strict
from .targets import TargetModel, WeightFunction, log_partition


@dataclass(frozen=True, eq=False)
class RwmhKernel:
    """Random-walk MH kernel for q proportional to pi^beta.

    The proposal increment is N(0, proposal_sd^2); with ``truncated=True``
    it is conditioned on [-h, h] where h defaults to ``proposal_sd`` (so the
    truncation halfwidth equals one proposal standard deviation).
    """

    target: TargetModel
    beta: float = 1.0
    proposal_sd: float = 1.0
    truncated: bool = False
    truncation_halfwidth: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.proposal_sd > 0:
            raise ValueError(f"proposal_sd must be positive, got {self.proposal_sd}")
        if self.truncation_halfwidth is None:
            object.__setattr__(self, "truncation_halfwidth", self.proposal_sd)
        if not self.truncation_halfwidth > 0:
            raise ValueError("truncation halfwidth must be positive")
        tail = None
        from .targets import TargetKind

        if self.target.kind is TargetKind.POLY_TAIL:
            tail = self.target.params[0]
        elif self.target.kind is TargetKind.STUDENT_T:
            tail = self.target.params[0] + 1.0
        if tail is not None and self.beta * tail <= 1.0:
            raise ValueError(
                f"beta={self.beta} leaves pi^beta unnormalizable for tail index {tail}"
            )

    def draw_fn(self) -> kernels.DrawFn:
        """Proposal-increment sampler consuming one draw per increment."""
        sd = self.proposal_sd
        if not self.truncated:
            return lambda gen, n: gen.standard_normal(n) * sd
        h = self.truncation_halfwidth
        lo = ndtr(-h / sd)
        span = ndtr(h / sd) - lo
        return lambda gen, n: ndtri(lo + span * gen.random(n)) * sd

    def proposal_density(self) -> Callable[[np.ndarray], np.ndarray]:
        """Density of the proposal increment (kappa)."""
        sd = self.proposal_sd
        norm = sd * math.sqrt(2.0 * math.pi)
        if not self.truncated:
            return lambda z: np.exp(-0.5 * (np.asarray(z) / sd) ** 2) / norm
        h = self.truncation_halfwidth
        span = ndtr(h / sd) - ndtr(-h / sd)

        def dens(z):
            z = np.asarray(z, dtype=float)
            body = np.exp(-0.5 * (z / sd) ** 2) / (norm * span)
            return np.where(np.abs(z) <= h, body, 0.0)

        return dens


@dataclass(frozen=True, eq=False)
class JumpPath:
    """Trajectory of the jump process.

    ``states[k]`` is occupied on ``[jump_times[k], jump_times[k] + holding_times[k])``
    with ``jump_times[0] == 0``.  ``clamped`` counts holding-rate evaluations
    clamped in log space to avoid overflow.
    """

    states: np.ndarray
    holding_times: np.ndarray
    jump_times: np.ndarray
    seed: Optional[int] = None
    clamped: int = 0

    def __post_init__(self):
        n = self.states.size
        if n < 1 or self.holding_times.size != n or self.jump_times.size != n:
            raise ValueError("states, holding_times and jump_times must share length >= 1")
        if not np.all(self.holding_times > 0):
            raise ValueError("holding times must be strictly positive")
        if self.jump_times[0] != 0.0 or np.any(np.diff(self.jump_times) <= 0):
            raise ValueError("jump times must start at 0 and be strictly increasing")

    @property
    def end_time(self) -> float:
        return float(self.jump_times[-1] + self.holding_times[-1])

    def to_csv(self, file) -> None:
        """Write columns (k, X_k, W_k, T_k)."""
        writer = csv.writer(file)
        writer.writerow(["k", "X_k", "W_k", "T_k"])
        for k in range(self.states.size):
            writer.writerow(
                [
                    k + 1,
                    format(self.states[k], ".17g"),
                    format(self.holding_times[k], ".17g"),
                    format(self.jump_times[k], ".17g"),
                ]
            )


def replicate_rng(master_seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for one replicate of one experiment."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(replicate,))
    return np.random.Generator(np.random.PCG64(ss))


def replicate_streams(master_seed: int, start: int, count: int) -> List[np.random.Generator]:
    return [replicate_rng(master_seed, start + k) for k in range(count)]


def log_time_shift(kernel: RwmhKernel) -> float:
    """log(Z_beta / Z_pi): converts unnormalized holding means to the
    normalized-generator time scale (mean Z_beta * pi_norm^(1-beta))."""
    if kernel.beta == 1.0:
        return 0.0
    log_pi = kernel.target.log_pi_unnorm
    beta = kernel.beta

    def dens(t: float) -> float:
        return math.exp(beta * float(log_pi(t)))

    log_zbeta = math.log(integrate_line_strict(dens, what="tempered normalizer"))
    return log_zbeta - log_partition(kernel.target)


# ---------------------------------------------------------------------------
# single-step operations
# ---------------------------------------------------------------------------


def propose(kernel: RwmhKernel, x: float, rng: np.random.Generator) -> float:
    """One proposal draw x + z."""
    return float(x + kernel.draw_fn()(rng, 1)[0])


def log_accept_prob(kernel: RwmhKernel, x: float, y: float) -> float:
    """log of min(1, (pi(y)/pi(x))^beta)."""
    diff = kernel.beta * float(
        kernel.target.log_pi_unnorm(y) - kernel.target.log_pi_unnorm(x)
    )
    return min(0.0, diff)

def mh_step(
    kernel: RwmhKernel, x: float, rng: np.random.Generator
) -> Tuple[float, bool]:
    """One MH update; returns (next_state, accepted)."""
    y = propose(kernel, x, rng)
    u = rng.random()
    logu = math.log(u) if u > 0.0 else -math.inf
    if logu < log_accept_prob(kernel, x, y):
        return y, True
    return x, False


# ---------------------------------------------------------------------------
# trajectory simulation
# ---------------------------------------------------------------------------


def simulate_jump_chain(
    kernel: RwmhKernel, x0: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n states of the embedded (jump) chain started from x0.

    x0 itself is not recorded; rejected moves appear as repeated states.
    """
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    kind, p0, p1 = kernel.target.kernel_args()
    out = kernels.mh_chain_batch(
        kind, p0, p1, kernel.beta, float(x0), int(n), [rng], kernel.draw_fn()
    )
    return out[0]


def simulate_jump_chain_batch(
    kernel: RwmhKernel,
    x0: float,
    n: int,
    streams: Sequence[np.random.Generator],
) -> np.ndarray:
    """Stacked jump chains, one row per replicate stream."""
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    kind, p0, p1 = kernel.target.kernel_args()
    return kernels.mh_chain_batch(
        kind, p0, p1, kernel.beta, float(x0), int(n), list(streams), kernel.draw_fn()
    )


def simulate_ctmc(
    kernel: RwmhKernel,
    x0: float,
    rng: np.random.Generator,
    n_jumps: Optional[int] = None,
    t_max: Optional[float] = None,
    normalized_time: bool = False,
    seed: Optional[int] = None,
) -> JumpPath:
    """Simulate the jump process from x0 under one of two horizons.

    ``n_jumps`` records exactly that many states (the first being x0);
    ``t_max`` stops at the first state whose holding interval covers t_max,
    so the last jump time is <= t_max < end_time.
    """
    if (n_jumps is None) == (t_max is None):
        raise ValueError("specify exactly one of n_jumps or t_max")
    if n_jumps is not None and n_jumps < 1:
        raise ValueError("n_jumps must be >= 1")
    if t_max is not None and not t_max >= 0:
        raise ValueError("t_max must be non-negative")
    kind, p0, p1 = kernel.target.kernel_args()
    shift = log_time_shift(kernel) if normalized_time else 0.0
    states, holds, clamped = kernels.ctmc_path(
        kind,
        p0,
        p1,
        kernel.beta,
        shift,
        float(x0),
        rng,
        kernel.draw_fn(),
        n_jumps=int(n_jumps) if n_jumps is not None else 0,
        t_max=float(t_max) if t_max is not None else -1.0,
    )
    jump_times = np.concatenate(([0.0], np.cumsum(holds)[:-1]))
    return JumpPath(states, holds, jump_times, seed=seed, clamped=clamped)


def ctmc_states_on_grid(
    kernel: RwmhKernel,
    x0: float,
    grid: np.ndarray,
    streams: Sequence[np.random.Generator],
    normalized_time: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """State of the jump process at each grid time, one row per replicate."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("grid must be non-empty, non-negative and increasing")
    kind, p0, p1 = kernel.target.kernel_args()
    shift = log_time_shift(kernel) if normalized_time else 0.0
    return kernels.ctmc_grid_batch(
        kind, p0, p1, kernel.beta, shift, float(x0), grid, list(streams), kernel.draw_fn()
    )


def hitting_times(
    kernel: RwmhKernel,
    x0: float,
    d_level: float,
    streams: Sequence[np.random.Generator],
    max_jumps: int = 10**7,
    normalized_time: bool = True,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First entry times into [-D, D] per replicate: (tau, hit, jumps)."""
    if d_level <= 0:
        raise ValueError("the central interval halfwidth must be positive")
    kind, p0, p1 = kernel.target.kernel_args()
    shift = log_time_shift(kernel) if normalized_time else 0.0
    return kernels.hitting_time_batch(
        kind,
        p0,
        p1,
        kernel.beta,
        shift,
        float(x0),
        float(d_level),
        list(streams),
        kernel.draw_fn(),
        int(max_jumps),
    )


# ---------------------------------------------------------------------------
# lookups and estimators on trajectories
# ---------------------------------------------------------------------------


def state_at(path: JumpPath, t: float) -> float:
    """Piecewise-constant trajectory lookup, valid for 0 <= t < end_time."""
    if not 0.0 <= t < path.end_time:
        raise ValueError(f"t={t} outside the simulated horizon [0, {path.end_time})")
    idx = int(np.searchsorted(path.jump_times, t, side="right")) - 1
    return float(path.states[idx])


def snis_beta(
    chain: np.ndarray,
    target: TargetModel,
    beta: float,
    f: Callable,
    seed: Optional[int] = None,
    init_state: Optional[float] = None,
) -> EstimateRecord:
    """Self-normalized estimate over chain states with weights pi^(1-beta).

    At beta=1 the weights are identically one and the estimate reduces to the
    plain time average, bit for bit.
    """
    chain = np.asarray(chain, dtype=float)
    if chain.size < 1:
        raise ValueError("chain must be non-empty")
    log_w = WeightFunction(lambda x: (1.0 - beta) * target.log_pi_unnorm(x))
    rec = snis(chain, f, log_w)
    return EstimateRecord(
        value=rec.value,
        n=rec.n,
        estimator_kind=rec.estimator_kind,
        seed=seed,
        init_state=init_state,
        degenerate=rec.degenerate,
    )


def chain_to_csv(chain: np.ndarray, target: TargetModel, beta: float, file) -> None:
    """Write chain rows (i, X_i, log_weight_unnorm)."""
    log_w = (1.0 - beta) * np.asarray(target.log_pi_unnorm(chain), dtype=float)
    writer = csv.writer(file)
    writer.writerow(["i", "X_i", "log_weight_unnorm"])
    for i, (x, lw) in enumerate(zip(np.asarray(chain), log_w), start=1):
        writer.writerow([i, format(x, ".17g"), format(lw, ".17g")])
