"""Hot simulation loops: Metropolis-Hastings chains and the jump process.

Each kernel exists twice: a numba ``@njit`` version that walks one replicate
at a time, and a pure-numpy version that advances all replicates in lockstep
(vectorized over the replicate axis).  ``ITMH_DISABLE_JIT=1`` selects the
numpy path; see :mod:`itmh._jit`.

Randomness is consumed from one ``numpy.random.Generator`` per replicate in
blocks of ``CHUNK`` draws per kind (proposal increments, acceptance
uniforms, exponential holding draws, in that block order).  Both backends
consume identical prefixes of each stream, so a replicate's trajectory does
not depend on the backend or on how replicates are grouped.
"""

import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ._jit import JIT_ENABLED, njit

KIND_GAUSSIAN = 0
KIND_STUDENT_T = 1
KIND_POLY_TAIL = 2
KIND_SUPER_EXP = 3

CHUNK = 1024
LOG_CLAMP = 700.0  # exp(700) is near the float64 overflow edge

DrawFn = Callable[[np.random.Generator, int], np.ndarray]


@njit(cache=True)
def _log_pi(kind: int, p0: float, p1: float, x: float) -> float:
    if kind == KIND_GAUSSIAN:
        d = (x - p0) / p1
        return -0.5 * d * d
    elif kind == KIND_STUDENT_T:
        return -0.5 * (p0 + 1.0) * np.log1p(x * x / p0)
    elif kind == KIND_POLY_TAIL:
        return p1 - p0 * np.log1p(abs(x))
    else:
        return -p0 * abs(x) ** p1


def log_pi_vec(kind: int, p0: float, p1: float, x: np.ndarray) -> np.ndarray:
    if kind == KIND_GAUSSIAN:
        d = (x - p0) / p1
        return -0.5 * d * d
    elif kind == KIND_STUDENT_T:
        return -0.5 * (p0 + 1.0) * np.log1p(x * x / p0)
    elif kind == KIND_POLY_TAIL:
        return p1 - p0 * np.log1p(np.abs(x))
    else:
        return -p0 * np.abs(x) ** p1


# ---------------------------------------------------------------------------
# Metropolis-Hastings jump chain (discrete time, fixed length)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _mh_chain_jit(kind, p0, p1, beta, x0, z, u, out):
    x = x0
    lpx = _log_pi(kind, p0, p1, x)
    for i in range(z.shape[0]):
        y = x + z[i]
        lpy = _log_pi(kind, p0, p1, y)
        if np.log(u[i]) < beta * (lpy - lpx):
            x = y
            lpx = lpy
        out[i] = x
    return out


def _mh_chain_np(kind, p0, p1, beta, x0, z, u, out):
    x = x0
    lpx = log_pi_vec(kind, p0, p1, np.asarray(x0))
    with np.errstate(divide="ignore"):
        logu = np.log(u)
    for i in range(z.shape[0]):
        y = x + z[i]
        lpy = log_pi_vec(kind, p0, p1, np.asarray(y))
        if logu[i] < beta * (lpy - lpx):
            x = y
            lpx = lpy
        out[i] = x
    return out


def _mh_chain_batch_np(kind, p0, p1, beta, x0, Z, U, out):
    n_rep, n = Z.shape
    x = np.full(n_rep, x0, dtype=float)
    lpx = log_pi_vec(kind, p0, p1, x)
    with np.errstate(divide="ignore"):
        logU = np.log(U)
    for i in range(n):
        y = x + Z[:, i]
        lpy = log_pi_vec(kind, p0, p1, y)
        acc = logU[:, i] < beta * (lpy - lpx)
        x = np.where(acc, y, x)
        lpx = np.where(acc, lpy, lpx)
        out[:, i] = x
    return out


def mh_chain_batch(
    kind: int,
    p0: float,
    p1: float,
    beta: float,
    x0: float,
    n: int,
    streams: Sequence[np.random.Generator],
    draw: DrawFn,
) -> np.ndarray:
    """States of ``len(streams)`` independent MH chains, shape (R, n).

    Rejected proposals leave the state unchanged (recorded as a repeat).
    """
    n_rep = len(streams)
    Z = np.empty((n_rep, n))
    U = np.empty((n_rep, n))
    for k, gen in enumerate(streams):
        Z[k] = draw(gen, n)
        U[k] = gen.random(n)
    out = np.empty((n_rep, n))
    if JIT_ENABLED:
        for k in range(n_rep):
            _mh_chain_jit(kind, p0, p1, beta, x0, Z[k], U[k], out[k])
    else:
        _mh_chain_batch_np(kind, p0, p1, beta, x0, Z, U, out)
    return out


# ---------------------------------------------------------------------------
# continuous-time walker: holding times with mean exp(log_shift) * pi^(1-beta)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _ctmc_grid_chunk_jit(
    kind, p0, p1, beta, log_shift, x, lpx, t, gi, grid, out, z, u, e
):
    m = z.shape[0]
    n_grid = grid.shape[0]
    clamped = 0
    j = 0
    while j < m and gi < n_grid:
        lw = log_shift + (1.0 - beta) * lpx
        if lw > LOG_CLAMP:
            lw = LOG_CLAMP
            clamped += 1
        elif lw < -LOG_CLAMP:
            lw = -LOG_CLAMP
            clamped += 1
        t_next = t + e[j] * np.exp(lw)
        while gi < n_grid and grid[gi] < t_next:
            out[gi] = x
            gi += 1
        t = t_next
        y = x + z[j]
        lpy = _log_pi(kind, p0, p1, y)
        if np.log(u[j]) < beta * (lpy - lpx):
            x = y
            lpx = lpy
        j += 1
    return x, lpx, t, gi, clamped


def ctmc_grid_batch(
    kind: int,
    p0: float,
    p1: float,
    beta: float,
    log_shift: float,
    x0: float,
    grid: np.ndarray,
    streams: Sequence[np.random.Generator],
    draw: DrawFn,
) -> Tuple[np.ndarray, np.ndarray]:
    """State of each replicate's jump process at every grid time.

    Returns ``(states, clamped)`` with ``states`` of shape (R, len(grid))
    and ``clamped`` counting holding-rate clamps per replicate.
    """
    grid = np.ascontiguousarray(grid, dtype=float)
    n_rep = len(streams)
    n_grid = grid.size
    out = np.empty((n_rep, n_grid))
    clamped = np.zeros(n_rep, dtype=np.int64)
    if JIT_ENABLED:
        for k, gen in enumerate(streams):
            x, t, gi = float(x0), 0.0, 0
            lpx = float(_log_pi(kind, p0, p1, x))
            while gi < n_grid:
                z = draw(gen, CHUNK)
                u = gen.random(CHUNK)
                e = gen.standard_exponential(CHUNK)
                x, lpx, t, gi, c = _ctmc_grid_chunk_jit(
                    kind, p0, p1, beta, log_shift, x, lpx, t, gi, grid, out[k], z, u, e
                )
                clamped[k] += c
        return out, clamped

    x = np.full(n_rep, x0, dtype=float)
    lpx = log_pi_vec(kind, p0, p1, x)
    t = np.zeros(n_rep)
    gi = np.zeros(n_rep, dtype=np.int64)
    active = gi < n_grid
    col = CHUNK
    Z = np.empty((n_rep, CHUNK))
    U = np.empty((n_rep, CHUNK))
    E = np.empty((n_rep, CHUNK))
    while np.any(active):
        if col == CHUNK:
            for k, gen in enumerate(streams):
                Z[k] = draw(gen, CHUNK)
                U[k] = gen.random(CHUNK)
                E[k] = gen.standard_exponential(CHUNK)
            col = 0
        lw_raw = log_shift + (1.0 - beta) * lpx
        lw = np.clip(lw_raw, -LOG_CLAMP, LOG_CLAMP)
        clamped += active & (lw != lw_raw)
        t_next = t + E[:, col] * np.exp(lw)
        hi = np.searchsorted(grid, t_next, side="left")
        for k in np.nonzero(active & (hi > gi))[0]:
            out[k, gi[k] : hi[k]] = x[k]
        gi = np.where(active, np.maximum(gi, hi), gi)
        t = np.where(active, t_next, t)
        y = x + Z[:, col]
        lpy = log_pi_vec(kind, p0, p1, y)
        with np.errstate(divide="ignore"):
            acc = active & (np.log(U[:, col]) < beta * (lpy - lpx))
        x = np.where(acc, y, x)
        lpx = np.where(acc, lpy, lpx)
        active = gi < n_grid
        col += 1
    return out, clamped


@njit(cache=True)
def _ctmc_path_chunk_jit(
    kind,
    p0,
    p1,
    beta,
    log_shift,
    x,
    lpx,
    t,
    count,
    n_jumps,
    t_max,
    states_buf,
    hold_buf,
    z,
    u,
    e,
):
    m = z.shape[0]
    clamped = 0
    rec = 0
    done = False
    j = 0
    while j < m:
        lw = log_shift + (1.0 - beta) * lpx
        if lw > LOG_CLAMP:
            lw = LOG_CLAMP
            clamped += 1
        elif lw < -LOG_CLAMP:
            lw = -LOG_CLAMP
            clamped += 1
        w = e[j] * np.exp(lw)
        states_buf[rec] = x
        hold_buf[rec] = w
        rec += 1
        count += 1
        t = t + w
        if n_jumps > 0 and count >= n_jumps:
            done = True
            break
        if t_max >= 0.0 and t > t_max:
            done = True
            break
        y = x + z[j]
        lpy = _log_pi(kind, p0, p1, y)
        if np.log(u[j]) < beta * (lpy - lpx):
            x = y
            lpx = lpy
        j += 1
    return x, lpx, t, count, rec, j, clamped, done


def ctmc_path(
    kind: int,
    p0: float,
    p1: float,
    beta: float,
    log_shift: float,
    x0: float,
    gen: np.random.Generator,
    draw: DrawFn,
    n_jumps: int = 0,
    t_max: float = -1.0,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """One trajectory of the jump process: (states, holding_times, clamped).

    Stops after ``n_jumps`` recorded states, or at the first state whose
    holding interval covers ``t_max`` (so the last jump time is <= t_max and
    the trajectory extends beyond it).
    """
    if JIT_ENABLED:
        states_parts: List[np.ndarray] = []
        hold_parts: List[np.ndarray] = []
        x, t, count, clamped = float(x0), 0.0, 0, 0
        lpx = float(_log_pi(kind, p0, p1, x))
        states_buf = np.empty(CHUNK)
        hold_buf = np.empty(CHUNK)
        done = False
        while not done:
            z = draw(gen, CHUNK)
            u = gen.random(CHUNK)
            e = gen.standard_exponential(CHUNK)
            x, lpx, t, count, rec, _, c, done = _ctmc_path_chunk_jit(
                kind, p0, p1, beta, log_shift, x, lpx, t, count,
                n_jumps, t_max, states_buf, hold_buf, z, u, e,
            )
            clamped += c
            states_parts.append(states_buf[:rec].copy())
            hold_parts.append(hold_buf[:rec].copy())
        return np.concatenate(states_parts), np.concatenate(hold_parts), clamped

    states: List[float] = []
    holds: List[float] = []
    x, t, clamped = float(x0), 0.0, 0
    lpx = float(log_pi_vec(kind, p0, p1, np.asarray(x)))
    col = CHUNK
    z = u = e = None
    while True:
        if col == CHUNK:
            z = draw(gen, CHUNK)
            u = gen.random(CHUNK)
            e = gen.standard_exponential(CHUNK)
            col = 0
        lw = log_shift + (1.0 - beta) * lpx
        if abs(lw) > LOG_CLAMP:
            lw = math.copysign(LOG_CLAMP, lw)
            clamped += 1
        w = e[col] * math.exp(lw)
        states.append(x)
        holds.append(w)
        t += w
        if n_jumps > 0 and len(states) >= n_jumps:
            break
        if t_max >= 0.0 and t > t_max:
            break
        y = x + z[col]
        lpy = float(log_pi_vec(kind, p0, p1, np.asarray(y)))
        logu = math.log(u[col]) if u[col] > 0.0 else -math.inf
        if logu < beta * (lpy - lpx):
            x = y
            lpx = lpy
        col += 1
    return np.asarray(states), np.asarray(holds), clamped


@njit(cache=True)
def _hitting_chunk_jit(kind, p0, p1, beta, log_shift, x, lpx, t, d_level, z, u, e):
    m = z.shape[0]
    clamped = 0
    hit = False
    j = 0
    while j < m:
        lw = log_shift + (1.0 - beta) * lpx
        if lw > LOG_CLAMP:
            lw = LOG_CLAMP
            clamped += 1
        elif lw < -LOG_CLAMP:
            lw = -LOG_CLAMP
            clamped += 1
        t = t + e[j] * np.exp(lw)
        y = x + z[j]
        lpy = _log_pi(kind, p0, p1, y)
        if np.log(u[j]) < beta * (lpy - lpx):
            x = y
            lpx = lpy
        j += 1
        if abs(x) <= d_level:
            hit = True
            break
    return x, lpx, t, j, clamped, hit


def hitting_time_batch(
    kind: int,
    p0: float,
    p1: float,
    beta: float,
    log_shift: float,
    x0: float,
    d_level: float,
    streams: Sequence[np.random.Generator],
    draw: DrawFn,
    max_jumps: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First entry times of the jump process into [-D, D].

    Returns ``(tau, hit, jumps)``; ``hit`` is False for trajectories censored
    at ``max_jumps`` (their ``tau`` is the accumulated time so far).
    """
    n_rep = len(streams)
    tau = np.zeros(n_rep)
    hit = np.zeros(n_rep, dtype=bool)
    jumps = np.zeros(n_rep, dtype=np.int64)
    if abs(x0) <= d_level:
        return tau, np.ones(n_rep, dtype=bool), jumps
    if JIT_ENABLED:
        for k, gen in enumerate(streams):
            x, t = float(x0), 0.0
            lpx = float(_log_pi(kind, p0, p1, x))
            while jumps[k] < max_jumps and not hit[k]:
                budget = min(CHUNK, max_jumps - jumps[k])
                z = draw(gen, CHUNK)
                u = gen.random(CHUNK)
                e = gen.standard_exponential(CHUNK)
                x, lpx, t, used, _, h = _hitting_chunk_jit(
                    kind, p0, p1, beta, log_shift, x, lpx, t, d_level,
                    z[:budget], u[:budget], e[:budget],
                )
                jumps[k] += used
                hit[k] = h
            tau[k] = t
        return tau, hit, jumps

    x = np.full(n_rep, x0, dtype=float)
    lpx = log_pi_vec(kind, p0, p1, x)
    active = ~hit
    col = CHUNK
    Z = np.empty((n_rep, CHUNK))
    U = np.empty((n_rep, CHUNK))
    E = np.empty((n_rep, CHUNK))
    while np.any(active):
        if col == CHUNK:
            for k, gen in enumerate(streams):
                Z[k] = draw(gen, CHUNK)
                U[k] = gen.random(CHUNK)
                E[k] = gen.standard_exponential(CHUNK)
            col = 0
        lw = np.clip(log_shift + (1.0 - beta) * lpx, -LOG_CLAMP, LOG_CLAMP)
        tau = np.where(active, tau + E[:, col] * np.exp(lw), tau)
        y = x + Z[:, col]
        lpy = log_pi_vec(kind, p0, p1, y)
        with np.errstate(divide="ignore"):
            acc = active & (np.log(U[:, col]) < beta * (lpy - lpx))
        x = np.where(acc, y, x)
        lpx = np.where(acc, lpy, lpx)
        jumps += active
        hit = hit | (active & (np.abs(x) <= d_level))
        active = ~hit & (jumps < max_jumps)
        col += 1
    return tau, hit, jumps
