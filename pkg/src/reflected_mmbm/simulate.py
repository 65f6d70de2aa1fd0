"""Monte Carlo simulation of the modulated Brownian motion and its reflection.

Phase switches are drawn exactly from the generator; a time step that
contains a switch is split at the switch epoch.  Within a constant-phase
piece the increment is Gaussian.  Reflection in ``[0, B]`` uses either

* ``'clip'``: ``W <- min(B, max(0, W + dX))``, local times collect the
  clipped amounts;
* ``'bridge'`` (default): the extremum of the Brownian bridge over the
  piece is sampled given its endpoint, and the one-sided Skorokhod map is
  applied at the nearer barrier.  This is exact in law except for pieces
  that touch both barriers, which is exponentially unlikely when
  ``sigma^2 dt << B^2``.

Either way ``W = x0 + X + L - U`` holds at every recorded point.
Replication ``r`` draws from its own stream seeded by ``(seed, r)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ModelError
from .model import MmbmModel, flip
from .reflection import StripSpec

__all__ = [
    "SimConfig",
    "PathRecord",
    "default_dt",
    "simulate_path",
    "estimate_passage",
    "estimate_stationary",
    "estimate_overflow",
    "estimate_epoch",
    "estimate_overflow_jumps",
    "estimate_exit",
    "PassageEstimate",
    "ExitEstimate",
    "StationaryEstimate",
    "OverflowEstimate",
    "EpochSample",
    "OverflowJumps",
]

_MODES = {"clip": 0, "bridge": 1}


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls.

    ``dt=None`` picks :func:`default_dt`.  ``horizon`` is the path length
    for long-run estimators and the time cut-off for passage estimation
    without killing.
    """

    dt: float | None = None
    horizon: float = 1000.0
    replications: int = 10_000
    seed: int = 12345
    estimator: str = "stationary"
    burn_in: float = 0.1
    batches: int = 20
    reflection: str = "bridge"

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ModelError("dt must be positive")
        if self.replications < 1:
            raise ModelError("need at least one replication")
        if not self.horizon > 0:
            raise ModelError("horizon must be positive")
        if self.reflection not in _MODES:
            raise ModelError(f"reflection must be one of {sorted(_MODES)}")
        if not 0 <= self.burn_in < 1:
            raise ModelError("burn_in is a fraction in [0, 1)")
        if self.batches < 2:
            raise ModelError("batch means need at least two batches")


@dataclass(frozen=True)
class PathRecord:
    """A sampled path at step ends and phase-switch epochs."""

    t: np.ndarray
    X: np.ndarray
    J: np.ndarray
    W: np.ndarray
    L: np.ndarray
    U: np.ndarray
    x0: float
    B: float


def default_dt(model: MmbmModel, B: float) -> float:
    """``1e-3 * min(1, B^2 / max sigma2, B / max |mu|)``."""
    c = 1.0
    s = model.sigma2.max()
    m = np.abs(model.mu).max()
    if s > 0:
        c = min(c, B * B / s)
    if m > 0:
        c = min(c, B / m)
    return 1e-3 * c


def _dt(model, B, config):
    return config.dt if config.dt is not None else default_dt(model, B)


def _chain(model):
    rate = -np.diag(model.Q).copy()
    n = model.n
    cdf = np.zeros((n, n))
    for i in range(n):
        if rate[i] > 0:
            p = np.where(np.arange(n) == i, 0.0, model.Q[i] / rate[i])
            cdf[i] = np.cumsum(p)
            cdf[i, -1] = 1.0
    return rate, cdf


def _seeds(seed, n):
    return np.random.SeedSequence(seed).generate_state(n, dtype=np.uint32).astype(np.int64)


# --- kernels ----------------------------------------------------------------


@njit(cache=True)
def _seed(s):
    np.random.seed(s)


@njit(cache=True)
def _holding(rate):
    if rate <= 0.0:
        return np.inf
    return np.random.exponential(1.0 / rate)


@njit(cache=True)
def _jump(j, cdf):
    u = np.random.random()
    n = cdf.shape[1]
    for k in range(n):
        if u < cdf[j, k] and k != j:
            return k
    for k in range(n - 1, -1, -1):
        if k != j:
            return k
    return j


@njit(cache=True)
def _advance(w, h, m, s, B, mode):
    """Reflected move over a constant-phase piece: ``(w', dX, dL, dU)``."""
    y = m * h
    if s > 0.0:
        y += s * math.sqrt(h) * np.random.standard_normal()
    if mode == 0 or s == 0.0:
        z = w + y
        dl = max(0.0, -z)
        du = max(0.0, z - B)
        return z + dl - du, y, dl, du
    e = -2.0 * s * s * h * math.log(1.0 - np.random.random())
    r = math.sqrt(y * y + e)
    if w <= 0.5 * B:
        lo = 0.5 * (y - r)
        dl = max(0.0, -(w + lo))
        z = w + y + dl
        du = max(0.0, z - B)
        return z - du, y, dl, du
    hi = 0.5 * (y + r)
    du = max(0.0, w + hi - B)
    z = w + y - du
    dl = max(0.0, -z)
    return z + dl, y, dl, du


@njit(cache=True)
def _k_path(mu, sd, rate, cdf, B, x0, j0, dt, n_steps, mode, seed):
    _seed(seed)
    cap = n_steps + 16
    t_ = np.empty(cap)
    X_ = np.empty(cap)
    J_ = np.empty(cap, dtype=np.int64)
    W_ = np.empty(cap)
    L_ = np.empty(cap)
    U_ = np.empty(cap)
    t, X, W, L, U, j = 0.0, 0.0, x0, 0.0, 0.0, j0
    k = 0
    t_[k], X_[k], J_[k], W_[k], L_[k], U_[k] = t, X, j, W, L, U
    k += 1
    nxt = _holding(rate[j])
    for _ in range(n_steps):
        rem = dt
        while True:
            h = min(rem, nxt)
            W, dx, dl, du = _advance(W, h, mu[j], sd[j], B, mode)
            X += dx
            L += dl
            U += du
            t += h
            rem -= h
            nxt -= h
            switched = nxt <= 0.0 and rem > 0.0
            if switched or rem <= 0.0:
                if k >= cap:
                    cap2 = 2 * cap
                    t_ = np.concatenate((t_, np.empty(cap2 - cap)))
                    X_ = np.concatenate((X_, np.empty(cap2 - cap)))
                    J_ = np.concatenate((J_, np.empty(cap2 - cap, dtype=np.int64)))
                    W_ = np.concatenate((W_, np.empty(cap2 - cap)))
                    L_ = np.concatenate((L_, np.empty(cap2 - cap)))
                    U_ = np.concatenate((U_, np.empty(cap2 - cap)))
                    cap = cap2
                t_[k], X_[k], J_[k], W_[k], L_[k], U_[k] = t, X, j, W, L, U
                k += 1
            if nxt <= 0.0:
                j = _jump(j, cdf)
                nxt = _holding(rate[j])
            if rem <= 0.0:
                break
    return t_[:k], X_[:k], J_[:k], W_[:k], L_[:k], U_[:k]


@njit(cache=True)
def _k_longrun(mu, sd, rate, cdf, B, x0, j0, dt, n_burn, n_per_batch, n_batches, levels, mode, seed):
    """Post-burn-in grid samples of (W, J) and phase-split local times per batch."""
    _seed(seed)
    n = mu.size
    nl = levels.size
    occ = np.zeros((n_batches, n, nl))
    cnt = np.zeros((n_batches, n))
    dL = np.zeros((n_batches, n))
    dU = np.zeros((n_batches, n))
    W, j = x0, j0
    nxt = _holding(rate[j])
    total = n_burn + n_per_batch * n_batches
    for step in range(total):
        b = (step - n_burn) // n_per_batch
        rem = dt
        while rem > 0.0:
            h = min(rem, nxt)
            W, dx, dl, du = _advance(W, h, mu[j], sd[j], B, mode)
            if b >= 0:
                dL[b, j] += dl
                dU[b, j] += du
            rem -= h
            nxt -= h
            if nxt <= 0.0:
                j = _jump(j, cdf)
                nxt = _holding(rate[j])
        if b >= 0:
            cnt[b, j] += 1.0
            for i in range(nl):
                if W <= levels[i]:
                    occ[b, j, i] += 1.0
    return occ, cnt, dL, dU


@njit(cache=True)
def _k_passage(mu, sd, rate, cdf, x, q, j0s, horizon, dt, mode, seeds):
    """Phase at the first time X > x (unreflected, from 0), or -1 if none."""
    nrep = j0s.size
    out = np.full(nrep, -1, dtype=np.int64)
    for r in range(nrep):
        _seed(seeds[r])
        j = j0s[r]
        X, t = 0.0, 0.0
        life = np.random.exponential(1.0 / q) if q > 0.0 else np.inf
        stop = min(life, horizon)
        nxt = _holding(rate[j])
        done = False
        while not done and t < stop:
            h = min(dt, nxt, stop - t)
            y = mu[j] * h
            if sd[j] > 0.0:
                y += sd[j] * math.sqrt(h) * np.random.standard_normal()
            Y = X + y
            if Y > x:
                done = True
            elif mode == 1 and sd[j] > 0.0:
                # bridge maximum exceeds x with prob exp(-2 (x - X)(x - Y) / (s^2 h))
                p = math.exp(-2.0 * (x - X) * (x - Y) / (sd[j] * sd[j] * h))
                if np.random.random() < p:
                    done = True
            if done:
                out[r] = j
                break
            X = Y
            t += h
            nxt -= h
            if nxt <= 0.0:
                j = _jump(j, cdf)
                nxt = _holding(rate[j])
    return out


@njit(cache=True)
def _k_exit(mu, sd, rate, cdf, a, b, j0s, q, dt, mode, seeds):
    """Exit side (+1 above a, -1 below -b, 0 none) and phase of the free process."""
    nrep = j0s.size
    side = np.zeros(nrep, dtype=np.int64)
    phase = np.full(nrep, -1, dtype=np.int64)
    for r in range(nrep):
        _seed(seeds[r])
        j = j0s[r]
        X, t = 0.0, 0.0
        life = np.random.exponential(1.0 / q) if q > 0.0 else np.inf
        nxt = _holding(rate[j])
        while t < life:
            h = min(dt, nxt, life - t)
            y = mu[j] * h
            if sd[j] > 0.0:
                y += sd[j] * math.sqrt(h) * np.random.standard_normal()
            Y = X + y
            s = 0
            if Y >= a:
                s = 1
            elif Y <= -b:
                s = -1
            elif mode == 1 and sd[j] > 0.0:
                v = sd[j] * sd[j] * h
                if np.random.random() < math.exp(-2.0 * (a - X) * (a - Y) / v):
                    s = 1
                elif np.random.random() < math.exp(-2.0 * (X + b) * (Y + b) / v):
                    s = -1
            if s != 0:
                side[r] = s
                phase[r] = j
                break
            X = Y
            t += h
            nxt -= h
            if nxt <= 0.0:
                j = _jump(j, cdf)
                nxt = _holding(rate[j])
    return side, phase


@njit(cache=True)
def _k_epoch(mu, sd, rate, cdf, B, x0, j0s, q, dt, mode, seeds):
    nrep = j0s.size
    Wn = np.empty(nrep)
    Jn = np.empty(nrep, dtype=np.int64)
    Ln = np.empty(nrep)
    Un = np.empty(nrep)
    for r in range(nrep):
        _seed(seeds[r])
        j = j0s[r]
        W, L, U, t = x0, 0.0, 0.0, 0.0
        T = np.random.exponential(1.0 / q)
        nxt = _holding(rate[j])
        while t < T:
            h = min(dt, nxt, T - t)
            W, dx, dl, du = _advance(W, h, mu[j], sd[j], B, mode)
            L += dl
            U += du
            t += h
            nxt -= h
            if nxt <= 0.0 and t < T:
                j = _jump(j, cdf)
                nxt = _holding(rate[j])
        Wn[r], Jn[r], Ln[r], Un[r] = W, j, L, U
    return Wn, Jn, Ln, Un


@njit(cache=True)
def _k_jumps(mu, sd, rate, cdf, B, j0, dt, n_steps, mode, seed):
    """Overflow accumulated between successive increases of L, with L at each jump."""
    _seed(seed)
    sizes = np.empty(1024)
    at = np.empty(1024)
    k = 0
    W, L, pending, j = 0.0, 0.0, 0.0, j0
    nxt = _holding(rate[j])
    for _ in range(n_steps):
        rem = dt
        while rem > 0.0:
            h = min(rem, nxt)
            W, dx, dl, du = _advance(W, h, mu[j], sd[j], B, mode)
            pending += du
            if dl > 0.0:
                if pending > 0.0:
                    if k >= sizes.size:
                        sizes = np.concatenate((sizes, np.empty(sizes.size)))
                        at = np.concatenate((at, np.empty(at.size)))
                    sizes[k] = pending
                    at[k] = L
                    k += 1
                    pending = 0.0
                L += dl
            rem -= h
            nxt -= h
            if nxt <= 0.0:
                j = _jump(j, cdf)
                nxt = _holding(rate[j])
    return sizes[:k], at[:k], L


# --- public API -------------------------------------------------------------


def _params(model):
    rate, cdf = _chain(model)
    return (np.ascontiguousarray(model.mu, dtype=float), np.sqrt(model.sigma2), rate, cdf)


def simulate_path(model: MmbmModel, strip: StripSpec, j0: int, config: SimConfig) -> PathRecord:
    """One path of ``(X, J, W, L, U)`` up to ``config.horizon``."""
    if not 0 <= j0 < model.n:
        raise ModelError(f"initial state {j0} out of range")
    dt = _dt(model, strip.B, config)
    n_steps = int(math.ceil(config.horizon / dt))
    mu, sd, rate, cdf = _params(model)
    seed = int(_seeds(config.seed, 1)[0])
    t, X, J, W, L, U = _k_path(mu, sd, rate, cdf, float(strip.B), float(strip.x0), int(j0),
                               float(dt), n_steps, _MODES[config.reflection], seed)
    return PathRecord(t, X, J, W, L, U, float(strip.x0), float(strip.B))


@dataclass(frozen=True)
class PassageEstimate:
    """Estimated ``P_i(tau_x < e_q, J(tau_x) = j)``; columns follow ``index``."""

    x: float
    direction: str
    mean: np.ndarray
    se: np.ndarray
    index: np.ndarray
    replications: int


def estimate_passage(model: MmbmModel, q: float, x: float, direction: str,
                     config: SimConfig) -> PassageEstimate:
    """Indicator-mean estimate of ``Pi expm(Lambda x)`` with binomial standard errors.

    ``config.replications`` paths are run from each initial state.  Without
    killing, paths that have not crossed by ``config.horizon`` count as
    never crossing.  With ``reflection='bridge'`` a crossing between grid
    points is also detected, using the Brownian-bridge maximum; with
    ``'clip'`` only a sign change of ``X - x`` counts.
    """
    if not x > 0:
        raise ModelError("passage level must be positive")
    if direction not in ("up", "down"):
        raise ModelError("direction must be 'up' or 'down'")
    base = flip(model) if direction == "down" else model
    index = model.phases.e_plus if direction == "up" else model.phases.e_minus
    mu, sd, rate, cdf = _params(base)
    dt = config.dt if config.dt is not None else default_dt(model, x)
    n, R = model.n, config.replications
    j0s = np.repeat(np.arange(n), R)
    seeds = _seeds(config.seed, n * R)
    out = _k_passage(mu, sd, rate, cdf, float(x), float(q), j0s, float(config.horizon), float(dt),
                     _MODES[config.reflection], seeds)
    hits = np.zeros((n, n))
    np.add.at(hits, (j0s[out >= 0], out[out >= 0]), 1.0)
    p = hits / R
    p = p[:, index]
    return PassageEstimate(float(x), direction, p, np.sqrt(p * (1 - p) / R), index, R)


@dataclass(frozen=True)
class ExitEstimate:
    """Two-sided exit of the free process from ``(-b, a)`` started at 0.

    ``up[i, j]`` estimates ``P_i(exit above a before e_q, J = j)`` and
    ``down[i, j]`` the same below ``-b``; both are ``N x N``.
    """

    a: float
    b: float
    up: np.ndarray
    down: np.ndarray
    up_se: np.ndarray
    down_se: np.ndarray
    replications: int


def estimate_exit(model: MmbmModel, q: float, a: float, b: float, config: SimConfig) -> ExitEstimate:
    """Indicator means for the exit matrices, ``config.replications`` paths per initial state.

    Without killing the exit happens almost surely; ``config.horizon`` is not used.
    """
    if not (a >= 0 and b >= 0 and a + b > 0):
        raise ModelError("need a, b >= 0 and a + b > 0")
    if q == 0 and a + b == float("inf"):
        raise ModelError("finite levels are needed without killing")
    mu, sd, rate, cdf = _params(model)
    dt = config.dt if config.dt is not None else default_dt(model, a + b)
    n, R = model.n, config.replications
    j0s = np.repeat(np.arange(n), R)
    side, phase = _k_exit(mu, sd, rate, cdf, float(a), float(b), j0s, float(q), float(dt),
                          _MODES[config.reflection], _seeds(config.seed, n * R))
    up = np.zeros((n, n))
    dn = np.zeros((n, n))
    np.add.at(up, (j0s[side == 1], phase[side == 1]), 1.0)
    np.add.at(dn, (j0s[side == -1], phase[side == -1]), 1.0)
    up /= R
    dn /= R
    return ExitEstimate(float(a), float(b), up, dn, np.sqrt(up * (1 - up) / R), np.sqrt(dn * (1 - dn) / R), R)


@dataclass(frozen=True)
class StationaryEstimate:
    """Long-run occupation estimates with batch-means standard errors.

    ``cdf[k, i]`` estimates ``P(W <= levels[k] | J = i)``.
    """

    levels: np.ndarray
    cdf: np.ndarray
    se: np.ndarray
    state_fraction: np.ndarray
    samples: int


def _batches(config, dt):
    n_total = int(math.ceil(config.horizon / dt))
    n_burn = int(config.burn_in * n_total)
    per = max(1, (n_total - n_burn) // config.batches)
    return n_burn, per


def _longrun(model, strip, config, levels, j0):
    dt = _dt(model, strip.B, config)
    n_burn, per = _batches(config, dt)
    mu, sd, rate, cdf = _params(model)
    seed = int(_seeds(config.seed, 1)[0])
    occ, cnt, dL, dU = _k_longrun(mu, sd, rate, cdf, float(strip.B), float(strip.x0), int(j0), float(dt),
                                  n_burn, per, config.batches, np.asarray(levels, dtype=float),
                                  _MODES[config.reflection], seed)
    return occ, cnt, dL, dU, per * dt


def estimate_stationary(model: MmbmModel, strip: StripSpec, config: SimConfig, levels=None,
                        j0: int = 0) -> StationaryEstimate:
    """Per-state empirical CDF of the reflected level from one long path.

    The first ``burn_in`` fraction of the horizon is discarded; the rest is
    cut into ``batches`` equal batches for the standard errors.
    """
    if levels is None:
        levels = np.linspace(0.0, strip.B, 21)
    levels = np.asarray(levels, dtype=float)
    occ, cnt, _, _, _ = _longrun(model, strip, config, levels, j0)
    nb = config.batches
    tot = cnt.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = occ.sum(axis=0) / tot[:, None]
        # batch means for a ratio estimator, linearized
        dev = occ - ratio[None] * cnt[:, :, None]
        se = np.sqrt((dev ** 2).sum(axis=0) / (nb * (nb - 1))) / (tot[:, None] / nb)
    return StationaryEstimate(levels, ratio.T, se.T, tot / tot.sum(), int(tot.sum()))


@dataclass(frozen=True)
class OverflowEstimate:
    """Long-run ``L(t)/t`` and ``U(t)/t`` split by the active phase (length-N vectors)."""

    unused: np.ndarray
    overflow: np.ndarray
    unused_se: np.ndarray
    overflow_se: np.ndarray
    time: float


def estimate_overflow(model: MmbmModel, strip: StripSpec, config: SimConfig, j0: int = 0) -> OverflowEstimate:
    """Phase-split unused capacity and overflow rates with batch-means errors."""
    _, _, dL, dU, tb = _longrun(model, strip, config, np.zeros(0), j0)
    nb = config.batches
    rl, ru = dL / tb, dU / tb
    return OverflowEstimate(
        rl.mean(axis=0), ru.mean(axis=0),
        rl.std(axis=0, ddof=1) / np.sqrt(nb), ru.std(axis=0, ddof=1) / np.sqrt(nb),
        tb * nb,
    )


@dataclass(frozen=True)
class EpochSample:
    """State of the reflected system at an Exp(q) time, one entry per replication."""

    j0: np.ndarray
    W: np.ndarray
    J: np.ndarray
    L: np.ndarray
    U: np.ndarray

    def joint_survival(self, x: float, n_states: int):
        """``(mean, se)`` of ``P_i(W >= x, J = j)`` as ``n x n`` arrays."""
        p = np.zeros((n_states, n_states))
        counts = np.bincount(self.j0, minlength=n_states).astype(float)
        hit = self.W >= x
        np.add.at(p, (self.j0[hit], self.J[hit]), 1.0)
        p /= counts[:, None]
        return p, np.sqrt(p * (1 - p) / counts[:, None])


def estimate_epoch(model: MmbmModel, strip: StripSpec, q: float, config: SimConfig) -> EpochSample:
    """Run ``config.replications`` paths from each initial state to an Exp(q) time."""
    if not q > 0:
        raise ModelError("need q > 0")
    dt = _dt(model, strip.B, config)
    mu, sd, rate, cdf = _params(model)
    n, R = model.n, config.replications
    j0s = np.repeat(np.arange(n), R)
    seeds = _seeds(config.seed, n * R)
    W, J, L, U = _k_epoch(mu, sd, rate, cdf, float(strip.B), float(strip.x0), j0s, float(q),
                          float(dt), _MODES[config.reflection], seeds)
    return EpochSample(j0s, W, J, L, U)


@dataclass(frozen=True)
class OverflowJumps:
    """Jumps of ``x -> U(tau^L_x)`` observed along one path."""

    sizes: np.ndarray
    at: np.ndarray
    local_time: float

    @property
    def jump_rate(self):
        """``(estimate, se)`` of jumps per unit of lower local time (Poisson count)."""
        n = self.sizes.size
        return n / self.local_time, math.sqrt(n) / self.local_time

    @property
    def size_rate(self):
        """``(estimate, se)`` of the exponential rate of the jump sizes."""
        n = self.sizes.size
        r = 1.0 / self.sizes.mean()
        return r, r / math.sqrt(n)


def estimate_overflow_jumps(model: MmbmModel, strip: StripSpec, config: SimConfig, j0: int = 0) -> OverflowJumps:
    """Sizes of the overflow batches between successive visits to the empty buffer."""
    dt = _dt(model, strip.B, config)
    mu, sd, rate, cdf = _params(model)
    seed = int(_seeds(config.seed, 1)[0])
    n_steps = int(math.ceil(config.horizon / dt))
    sizes, at, L = _k_jumps(mu, sd, rate, cdf, float(strip.B), int(j0), float(dt), n_steps,
                            _MODES[config.reflection], seed)
    return OverflowJumps(sizes, at, float(L))
