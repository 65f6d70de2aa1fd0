"""Transforms at inverse local times and stationary overflow rates.

Notation: ``L`` and ``U`` are the local times at 0 and ``B``, ``tau^L_x``
and ``tau^U_x`` their right inverses.  Observed at ``tau^L_x``, the pair
``(X, J)`` is a Markov additive process with matrix exponent ``F^L``:

    E_{x0}[exp(a X(tau^L_x) - q tau^L_x); J(tau^L_x)] = init^L exp(F^L x).

The upper counterpart is written for the level measured from ``B``:

    E_{x0}[exp(a (X(tau^U_x) - B) - q tau^U_x); J(tau^U_x)] = init^U exp(F^U x),

so that both transforms share the admissible interval ``(rho-, -rho+)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, NumericalError
from .linalg import expm, stationary_of_generator
from .model import MmbmModel
from .passage import PassagePair, passage_pairs, perron_eigenvalue
from .reflection import StripSpec, k_matrices

__all__ = [
    "LocalTimeTransform",
    "OverflowRates",
    "admissible_interval",
    "localtime_transform",
    "block_residual",
    "busy_period_transform",
    "overflow_rates",
    "overflow_rates_limit",
    "brownian_overflow_process",
    "brownian_busy_transform",
    "brownian_williams_transform",
    "brownian_exponent",
]

ENDPOINT_RTOL = 1e-8


@dataclass(frozen=True)
class LocalTimeTransform:
    """Everything the two-barrier system looks like at inverse local times.

    ``ML = initL @ inv(FL)`` is ``N x N-`` and ``MU = initU @ inv(FU)`` is
    ``N x N+``; ``kL`` and ``kU`` are the Perron eigenvalues of ``FL`` and
    ``FU``.  ``residual`` is the block-system residual, scaled by
    ``max(1, ||right side||)``.
    """

    alpha: float
    q: float
    x0: float
    B: float
    ML: np.ndarray
    MU: np.ndarray
    FL: np.ndarray
    FU: np.ndarray
    initL: np.ndarray
    initU: np.ndarray
    kL: float
    kU: float
    residual: float


@dataclass(frozen=True)
class OverflowRates:
    """Long-run local-time rates split by phase.

    ``unused[j] = kappaL * piL[j]`` over ``j`` in ``E-`` (pushing at 0) and
    ``overflow[j] = kappaU * piU[j]`` over ``j`` in ``E+`` (loss at ``B``).
    """

    unused: np.ndarray
    overflow: np.ndarray
    kappaL: float
    kappaU: float
    piL: np.ndarray
    piU: np.ndarray
    e_minus: np.ndarray
    e_plus: np.ndarray


def admissible_interval(model: MmbmModel, q: float = 0.0, pairs=None):
    """Open interval ``(rho-, -rho+)`` of transform arguments."""
    up, down = pairs if pairs is not None else passage_pairs(model, q)
    return down.rho, -up.rho


def _check_alpha(alpha, lo, hi):
    margin_lo = ENDPOINT_RTOL * (1.0 + abs(lo)) if np.isfinite(lo) else 0.0
    margin_hi = ENDPOINT_RTOL * (1.0 + abs(hi)) if np.isfinite(hi) else 0.0
    if not (lo + margin_lo <= alpha <= hi - margin_hi):
        raise ModelError(f"alpha = {alpha} outside the admissible interval ({lo:.12g}, {hi:.12g})")


def _resolvents(up: PassagePair, down: PassagePair, alpha):
    nm, npl = down.index.size, up.index.size
    Rm = np.linalg.inv(down.Lambda - alpha * np.eye(nm)) if nm else np.zeros((0, 0))
    Rp = np.linalg.inv(up.Lambda + alpha * np.eye(npl)) if npl else np.zeros((0, 0))
    return Rm, Rp


def _m_matrices(up, down, B, x0, alpha, Kp, Km):
    Ppm = up.Pi[down.index]
    Pmp = down.Pi[up.index]
    Rm, Rp = _resolvents(up, down, alpha)
    left = down.Pi @ Rm @ expm(down.Lambda * x0)
    right = up.Pi @ Rp @ expm(up.Lambda * (B - x0))
    ML = (left + right @ Pmp @ expm(down.Lambda * B)) @ Km
    MU = (right + left @ Ppm @ expm(up.Lambda * B)) @ Kp
    return ML, MU, left, right


def block_residual(up, down, B, ML, MU, left, right):
    """Residual of ``[ML, MU] [[I, -Pi+_- e^{B L+}], [-Pi-_+ e^{B L-}, I]] = [left, right]``."""
    Ppm = up.Pi[down.index]
    Pmp = down.Pi[up.index]
    r1 = ML - MU @ Pmp @ expm(down.Lambda * B) - left
    r2 = MU - ML @ Ppm @ expm(up.Lambda * B) - right
    scale = max(1.0, np.abs(left).max(initial=0.0), np.abs(right).max(initial=0.0))
    return float(max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0)) / scale)


def localtime_transform(model: MmbmModel, B: float, x0: float, q: float, alpha: float,
                        pairs=None) -> LocalTimeTransform:
    """Matrices ``M^L``, ``M^U``, ``F^L``, ``F^U`` and the initial transforms.

    Parameters
    ----------
    model : MmbmModel
    B : float
        Buffer size.
    x0 : float
        Initial level in ``[0, B]``.
    q : float
        Killing rate.  q = 0 requires nonzero asymptotic drift.
    alpha : float
        Transform argument inside ``(rho-, -rho+)``.
    pairs : (PassagePair, PassagePair), optional
        Precomputed ``(up, down)`` pairs for this model and ``q``.
    """
    StripSpec(B, x0)
    if q == 0 and model.is_zero_drift:
        raise ModelError("q = 0 with zero asymptotic drift is excluded")
    up, down = pairs if pairs is not None else passage_pairs(model, q)
    _check_alpha(alpha, down.rho, -up.rho)
    Kp, Km = k_matrices(up, down, B)
    ML, MU, left, right = _m_matrices(up, down, B, x0, alpha, Kp, Km)
    res = block_residual(up, down, B, ML, MU, left, right)

    ML0 = ML if x0 == 0 else _m_matrices(up, down, B, 0.0, alpha, Kp, Km)[0]
    MUB = MU if x0 == B else _m_matrices(up, down, B, B, alpha, Kp, Km)[1]
    try:
        FL = np.linalg.inv(ML0[down.index]) if down.index.size else np.zeros((0, 0))
        FU = np.linalg.inv(MUB[up.index]) if up.index.size else np.zeros((0, 0))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular restriction matrix at alpha = {alpha}") from exc
    kL, kU = perron_eigenvalue(FL), perron_eigenvalue(FU)
    if (down.index.size and not kL < 0) or (up.index.size and not kU < 0):
        raise NumericalError(f"Perron eigenvalues kL = {kL}, kU = {kU} are not negative")
    return LocalTimeTransform(
        alpha=float(alpha), q=float(q), x0=float(x0), B=float(B),
        ML=ML, MU=MU, FL=FL, FU=FU, initL=ML @ FL, initU=MU @ FU,
        kL=kL, kU=kU, residual=res,
    )


def busy_period_transform(model: MmbmModel, B: float, q: float, alpha: float, pairs=None,
                          closed_form: bool | None = None) -> np.ndarray:
    """``E_B[exp(a U(tau_0^L) - q tau_0^L); J(tau_0^L)]``, an ``N x N-`` matrix.

    Starting full, the overflow accumulated until the buffer first empties.
    When every variance is positive the explicit expression in ``Lambda+-``
    is used; otherwise (or with ``closed_form=False``) the initial transform
    of :func:`localtime_transform` at ``x0 = B``.
    """
    if closed_form is None:
        closed_form = bool(np.all(model.sigma2 > 0))
    if not closed_form:
        return localtime_transform(model, B, B, q, alpha, pairs=pairs).initL
    if not np.all(model.sigma2 > 0):
        raise ModelError("the closed form needs every variance positive")
    StripSpec(B)
    if q == 0 and model.is_zero_drift:
        raise ModelError("q = 0 with zero asymptotic drift is excluded")
    up, down = pairs if pairs is not None else passage_pairs(model, q)
    _check_alpha(alpha, down.rho, -up.rho)
    I = np.eye(model.n)
    Lp, Lm = up.Lambda, down.Lambda
    A = Lm - alpha * I
    mid = expm(-B * Lm) @ (Lp + alpha * I) + A @ expm(B * Lp)
    return np.linalg.solve(A, (Lp + Lm) @ np.linalg.solve(mid, A))


def _rhs_overflow(model, up, down):
    k = model.kappa
    nm, npl = down.index.size, up.index.size
    if k > 0:
        return np.concatenate([np.zeros(nm), k * stationary_of_generator(up.Lambda, tol=1e-8)])
    return np.concatenate([-k * stationary_of_generator(down.Lambda, tol=1e-8), np.zeros(npl)])


def overflow_rates(model: MmbmModel, B: float) -> OverflowRates:
    """Long-run unused-capacity and overflow rates per phase (q = 0).

    Solves ``(x_L, x_U) [[I, -Pi+_- e^{B L+}], [-Pi-_+ e^{B L-}, I]] = r`` with
    ``r = kappa (0, pi+)`` for positive drift and ``-kappa (pi-, 0)`` for
    negative drift, ``pi+-`` being the stationary vector of the recurrent
    ``Lambda``.
    """
    StripSpec(B)
    if model.is_zero_drift:
        raise ModelError("zero asymptotic drift: the overflow system is singular and needs an extra equation")
    up, down = passage_pairs(model, 0.0)
    nm = down.index.size
    G = np.block([[np.eye(nm), -up.Pi[down.index] @ expm(up.Lambda * B)],
                  [-down.Pi[up.index] @ expm(down.Lambda * B), np.eye(up.index.size)]])
    r = _rhs_overflow(model, up, down)
    x = np.linalg.solve(G.T, r)
    xL, xU = x[:nm], x[nm:]
    kL, kU = float(xL.sum()), float(xU.sum())
    return OverflowRates(
        unused=xL, overflow=xU, kappaL=kL, kappaU=kU,
        piL=xL / kL if kL > 0 else xL, piU=xU / kU if kU > 0 else xU,
        e_minus=down.index, e_plus=up.index,
    )


def overflow_rates_limit(model: MmbmModel, B: float, q: float = 1e-6, x0: float = 0.0):
    """``(-q ML(0), -q MU(0))`` at a small killing rate.

    Every row approximates the long-run rates ``(kappaL piL, kappaU piU)``
    as q decreases to 0.
    """
    t = localtime_transform(model, B, x0, q, 0.0)
    return -q * t.ML, -q * t.MU


# --- single Brownian state, variance 1 ------------------------------------


def _gamma(mu, q):
    return math.sqrt(mu * mu + 2.0 * q)


def brownian_exponent(mu: float, B: float, q: float, alpha: float) -> float:
    """``F^L(alpha, q)`` for a single Brownian state with unit variance."""
    g = _gamma(mu, q)
    if g == 0:
        # mu = q = 0: limit g coth(Bg) -> 1/B
        return alpha * alpha / (1.0 / B - alpha)
    return 2.0 * (0.5 * alpha * alpha + mu * alpha - q) / (g / math.tanh(B * g) - (mu + alpha))


def brownian_busy_transform(mu: float, B: float, q: float, alpha: float) -> float:
    """``E_B[exp(alpha U(tau_0^L) - q tau_0^L)]`` for unit variance.

    Valid on the admissible interval and, by analytic continuation, for
    every ``alpha <= 0`` when ``q > 0``.
    """
    g = _gamma(mu, q)
    if g == 0:
        return 1.0 / (1.0 - alpha * B)
    return math.exp(-B * mu) / (math.cosh(B * g) - (mu + alpha) / g * math.sinh(B * g))


def brownian_williams_transform(mu: float, B: float, q: float, alpha: float) -> float:
    """``E_0[exp(-alpha L(tau_0^U) - q tau_0^U)]`` for unit variance.

    For ``mu = q = 0`` this is ``1 / (1 + alpha B)``.
    """
    g = _gamma(mu, q)
    if g == 0:
        return 1.0 / (1.0 + alpha * B)
    return math.exp(B * mu) / (math.cosh(B * g) + (mu + alpha) / g * math.sinh(B * g))


def brownian_overflow_process(mu: float, B: float):
    """Rates of the compound Poisson process ``x -> U(tau^L_x)``.

    Returns ``(jump_rate, jump_size_rate)``: jumps arrive at rate
    ``2 mu / (1 - exp(-2 mu B))`` per unit of lower local time and are
    exponential with rate ``2 mu / (exp(2 mu B) - 1)``; both equal ``1/B``
    when ``mu = 0``.  Unit variance.
    """
    if not B > 0:
        raise ModelError(f"buffer size must be positive, got {B}")
    if mu == 0:
        return 1.0 / B, 1.0 / B
    t = 2.0 * mu * B
    return 2.0 * mu / -math.expm1(-t), 2.0 * mu / math.expm1(t)
