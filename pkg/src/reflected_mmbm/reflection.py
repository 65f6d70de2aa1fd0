"""Stationary and exponential-epoch laws of the process reflected in [0, B].

The two-barrier exit matrices are

    C(a, b) = P(tau_a^+ < tau_b^-, J(tau_a^+))     (N x N+)
    D(a, b) = P(tau_b^- < tau_a^+, J(tau_b^-))     (N x N-)

and the stationary law of the reflected *time-reversed* model is
``P(W >= x | J) = C(x, B - x) 1``.  The public functions answer for the
caller's model and reverse the background chain internally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError, NumericalError
from .linalg import expm
from .model import MmbmModel, flip, time_reverse
from .passage import PassagePair, passage_pairs

__all__ = [
    "StripSpec",
    "CrossingMatrices",
    "ReflectedLaw",
    "k_matrices",
    "crossing_matrices",
    "crossing_matrices_zero_drift",
    "stationary_law",
    "exp_epoch_law",
    "epoch_distribution",
    "DEFAULT_GRID",
]

DEFAULT_GRID = 201
TRANSIENCE_MARGIN = 1e-12


@dataclass(frozen=True)
class StripSpec:
    """Buffer size and initial level."""

    B: float
    x0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.B) and self.B > 0):
            raise ModelError(f"buffer size must be positive and finite, got {self.B}")
        if not (0 <= self.x0 <= self.B):
            raise ModelError(f"initial level {self.x0} outside [0, {self.B}]")


@dataclass(frozen=True)
class CrossingMatrices:
    a: float
    b: float
    C: np.ndarray
    D: np.ndarray
    Kp: np.ndarray | None
    Km: np.ndarray | None
    residual: float


@dataclass(frozen=True)
class ReflectedLaw:
    """Per-state stationary law of the reflected process on a grid.

    ``survival[k, i] = P(W >= grid[k] | J = i)`` and
    ``cdf[k, i] = P(W <= grid[k] | J = i)``.  By convention
    ``survival`` is 1 at level 0 and ``cdf`` is 1 at level ``B``.
    ``density`` is the absolutely continuous part, point masses are in
    ``mass0`` and ``massB``.
    """

    B: float
    grid: np.ndarray
    survival: np.ndarray
    cdf: np.ndarray
    density: np.ndarray
    mass0: np.ndarray
    massB: np.ndarray
    conditioning: str = "stationary law of the reflected process of the given model"


def _blocks(up: PassagePair, down: PassagePair):
    """``(Pi+_-, Pi-_+)``: each Pi restricted to the other direction's rows."""
    return up.Pi[down.index], down.Pi[up.index]


def _transient_inverse(P, name):
    n = P.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    r = np.abs(np.linalg.eigvals(P)).max()
    if r >= 1.0 - TRANSIENCE_MARGIN:
        raise NumericalError(f"{name}: spectral radius {r:.15g} of the loop matrix is not below 1")
    return np.linalg.inv(np.eye(n) - P)


def k_matrices(up: PassagePair, down: PassagePair, B: float):
    """``(K+, K-)`` for strip width ``B``.

    ``K+ = (I - Pi-_+ e^{B L-} Pi+_- e^{B L+})^{-1}`` and symmetrically for K-.
    """
    Ppm, Pmp = _blocks(up, down)
    Eu = expm(up.Lambda * B)
    Ed = expm(down.Lambda * B)
    Kp = _transient_inverse(Pmp @ Ed @ Ppm @ Eu, "K+")
    Km = _transient_inverse(Ppm @ Eu @ Pmp @ Ed, "K-")
    return Kp, Km


def _cd_residual(up, down, a, b, C, D):
    Ppm, Pmp = _blocks(up, down)
    Eu_ab = expm(up.Lambda * (a + b))
    Ed_ab = expm(down.Lambda * (a + b))
    r1 = C - (up.Pi @ expm(up.Lambda * a) - D @ Ppm @ Eu_ab)
    r2 = D - (down.Pi @ expm(down.Lambda * b) - C @ Pmp @ Ed_ab)
    return float(max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0)))


def _check_levels(a, b):
    if a < 0 or b < 0 or a + b <= 0:
        raise ModelError(f"need a, b >= 0 with a + b > 0, got a={a}, b={b}")


def _crossing_from_pairs(up, down, a, b):
    Ppm, Pmp = _blocks(up, down)
    Kp, Km = k_matrices(up, down, a + b)
    Eu_a, Ed_b = expm(up.Lambda * a), expm(down.Lambda * b)
    Eu_ab, Ed_ab = expm(up.Lambda * (a + b)), expm(down.Lambda * (a + b))
    C = (up.Pi @ Eu_a - down.Pi @ Ed_b @ Ppm @ Eu_ab) @ Kp
    D = (down.Pi @ Ed_b - up.Pi @ Eu_a @ Pmp @ Ed_ab) @ Km
    return CrossingMatrices(a, b, C, D, Kp, Km, _cd_residual(up, down, a, b, C, D))


def crossing_matrices(model: MmbmModel, q: float, a: float, b: float) -> CrossingMatrices:
    """Exit matrices ``C(a, b)``, ``D(a, b)`` of the free process from ``(-b, a)``.

    Raises
    ------
    ModelError
        For q = 0 with zero asymptotic drift; use
        :func:`crossing_matrices_zero_drift` instead.
    """
    _check_levels(a, b)
    if q == 0 and model.is_zero_drift:
        raise ModelError("q = 0 and zero drift: use crossing_matrices_zero_drift")
    up, down = passage_pairs(model, q)
    return _crossing_from_pairs(up, down, a, b)


def _drift_corrector(model):
    """A solution ``h`` of ``Q h = -mu`` (exists when the drift is zero)."""
    h, *_ = np.linalg.lstsq(model.Q, -model.mu, rcond=None)
    h = h - model.pi @ h
    if np.abs(model.Q @ h + model.mu).max() > 1e-9 * max(1.0, np.abs(model.mu).max()):
        raise NumericalError("Q h = -mu has no solution; is the drift really zero?")
    return h


def _zero_drift_system(up, down, a, b, h):
    """Coefficient matrix and right side of ``[C, D] G = R`` plus the h-equation."""
    Ppm, Pmp = _blocks(up, down)
    npl, nmi = up.index.size, down.index.size
    G = np.block([[np.eye(npl), Pmp @ expm(down.Lambda * (a + b))],
                  [Ppm @ expm(up.Lambda * (a + b)), np.eye(nmi)]])
    g = np.concatenate([a + h[up.index], -b + h[down.index]])
    return np.column_stack([G, g])


def _solve_rows(Gaug, Raug):
    sol, *_ = np.linalg.lstsq(Gaug.T, Raug.T, rcond=None)
    return sol.T


def crossing_matrices_zero_drift(model: MmbmModel, a: float, b: float) -> CrossingMatrices:
    """Exit matrices for q = 0 and zero asymptotic drift.

    The two linear relations between C and D lose one rank per row in this
    case; the missing row equation is

        C (a 1 + h_+) + D (-b 1 + h_-) = h,   Q h + mu = 0.

    The result does not depend on which solution ``h`` is used.
    """
    _check_levels(a, b)
    if not model.is_zero_drift:
        raise ModelError(f"asymptotic drift {model.kappa:.6g} is not zero; use crossing_matrices")
    up, down = passage_pairs(model, 0.0, zero_drift=True)
    h = _drift_corrector(model)
    Gaug = _zero_drift_system(up, down, a, b, h)
    R = np.column_stack([up.Pi @ expm(up.Lambda * a), down.Pi @ expm(down.Lambda * b), h])
    Y = _solve_rows(Gaug, R)
    npl = up.index.size
    C, D = Y[:, :npl], Y[:, npl:]
    res = max(_cd_residual(up, down, a, b, C, D), float(np.abs(Y @ Gaug - R).max()))
    if res > 1e-8:
        raise NumericalError(f"zero-drift crossing system residual {res:.3g}")
    return CrossingMatrices(a, b, C, D, None, None, res)


def _as_grid(B, grid):
    if grid is None:
        grid = DEFAULT_GRID
    if np.isscalar(grid):
        n = int(grid)
        if n < 2:
            raise ModelError("grid needs at least two points")
        return np.linspace(0.0, B, n)
    x = np.asarray(grid, dtype=float).ravel()
    if x.size == 0 or x.min() < 0 or x.max() > B:
        raise ModelError(f"grid levels must lie in [0, {B}]")
    return x


def _law_from_pairs(up, down, B, x):
    """Survival, cdf and density vectors of the hat-law at each level."""
    Ppm, Pmp = _blocks(up, down)
    Kp, Km = k_matrices(up, down, B)
    Lu, Ld = up.Lambda, down.Lambda
    EuB, EdB = expm(Lu * B), expm(Ld * B)
    onep, onem = np.ones(up.index.size), np.ones(down.index.size)
    vp, vm = Kp @ onep, Km @ onem
    tail_p = Ppm @ EuB @ vp          # Pi+_- e^{B L+} K+ 1
    tail_m = Pmp @ EdB @ vm          # Pi-_+ e^{B L-} K- 1
    n = up.Pi.shape[0]
    S = np.empty((x.size, n))
    F = np.empty((x.size, n))
    dens = np.empty((x.size, n))
    for k, xk in enumerate(x):
        Eu, Ed = expm(Lu * xk), expm(Ld * (B - xk))
        S[k] = up.Pi @ Eu @ vp - down.Pi @ Ed @ tail_p
        F[k] = down.Pi @ Ed @ vm - up.Pi @ Eu @ tail_m
        dens[k] = -(up.Pi @ Eu @ Lu @ vp + down.Pi @ Ed @ Ld @ tail_p)
    mass0 = (down.Pi - up.Pi @ Pmp) @ EdB @ vm
    massB = (up.Pi - down.Pi @ Ppm) @ EuB @ vp
    return S, F, dens, mass0, massB


def _law_zero_drift(up, down, model, B, x):
    h = _drift_corrector(model)
    npl = up.index.size
    n = model.n
    Gaug = _zero_drift_system(up, down, 0.0, B, h)  # a + b = B throughout
    Lu, Ld = up.Lambda, down.Lambda
    S = np.empty((x.size, n))
    F = np.empty((x.size, n))
    dens = np.empty((x.size, n))
    for k, xk in enumerate(x):
        G = Gaug.copy()
        G[:npl, -1] = xk + h[up.index]
        G[npl:, -1] = -(B - xk) + h[down.index]
        Eu, Ed = expm(Lu * xk), expm(Ld * (B - xk))
        Y = _solve_rows(G, np.column_stack([up.Pi @ Eu, down.Pi @ Ed, h]))
        # differentiate [C, D] G(x) = R(x) in x; the h-column derivative uses C1 + D1 = 1
        dY = _solve_rows(G, np.column_stack([up.Pi @ Eu @ Lu, -down.Pi @ Ed @ Ld, -np.ones(n)]))
        S[k] = Y[:, :npl].sum(axis=1)
        F[k] = Y[:, npl:].sum(axis=1)
        dens[k] = -dY[:, :npl].sum(axis=1)
    return S, F, dens, F[0] if x[0] == 0 else None, S[-1] if x[-1] == B else None


def stationary_law(model: MmbmModel, B: float, grid=None) -> ReflectedLaw:
    """Stationary law of ``(W, J)`` for the model reflected in ``[0, B]``.

    Parameters
    ----------
    model : MmbmModel
    B : float
        Buffer size.
    grid : int or array_like, optional
        Number of evenly spaced levels (default 201) or explicit levels in
        ``[0, B]``.

    Notes
    -----
    The closed form expresses the law of the reflected *reversed* model
    through the passage matrices of the forward one, so the passage
    matrices used here are those of ``time_reverse(model)``.  With zero
    asymptotic drift the zero-drift exit matrices are used instead.
    """
    StripSpec(B)
    x = _as_grid(B, grid)
    rev = time_reverse(model)
    if model.is_zero_drift:
        up, down = passage_pairs(rev, 0.0, zero_drift=True)
        full = np.unique(np.concatenate([[0.0, B], x]))
        S, F, dens, m0, mB = _law_zero_drift(up, down, rev, B, full)
        pos = np.searchsorted(full, x)
        S, F, dens = S[pos], F[pos], dens[pos]
    else:
        up, down = passage_pairs(rev, 0.0)
        S, F, dens, m0, mB = _law_from_pairs(up, down, B, x)
    S = S.copy()
    F = F.copy()
    S[x == 0] = 1.0
    F[x == B] = 1.0
    return ReflectedLaw(float(B), x, S, F, dens, m0, mB)


def epoch_distribution(model: MmbmModel, q: float) -> np.ndarray:
    """``P(J(e_q)) = q (qI - Q)^{-1}``."""
    if q <= 0:
        raise ModelError("need q > 0")
    return q * np.linalg.inv(q * np.eye(model.n) - model.Q)


def _epoch_bottom(model: MmbmModel, B, q, x):
    """``[i, j] = P_i(W(e_q) >= x, J(e_q) = j)`` from W(0) = 0, x in [0, B].

    ``x = 0`` returns the right limit ``P_i(W(e_q) > 0, J(e_q) = j)``.
    """
    rev = time_reverse(model)
    up, down = passage_pairs(rev, q)
    pi = model.pi
    P = epoch_distribution(rev, q)[up.index]
    Ppm, Pmp = _blocks(up, down)
    Kp, _ = k_matrices(up, down, B)
    EuB = expm(up.Lambda * B)
    out = np.empty((x.size, model.n, model.n))
    for k, xk in enumerate(x):
        C = (up.Pi @ expm(up.Lambda * xk) - down.Pi @ expm(down.Lambda * (B - xk)) @ Ppm @ EuB) @ Kp
        # hat-transposed: [j, i] of pi_j C P / pi_i
        out[k] = ((pi[:, None] * (C @ P)) / pi[None, :]).T
    return out


def exp_epoch_law(model: MmbmModel, B: float, q: float, start: str = "bottom", x=None) -> np.ndarray:
    """Law of the reflected process at an independent Exp(q) time.

    Parameters
    ----------
    model : MmbmModel
    B : float
    q : float
        Rate of the exponential epoch, ``q > 0``.
    start : {'bottom', 'top'}
        Initial level 0 or ``B``.  Interior starting levels have no closed form.
    x : float or array_like
        Levels in ``(0, B]``.

    Returns
    -------
    ndarray
        ``out[..., i, j] = P_i(W(e_q) >= x, J(e_q) = j)``; a leading axis
        is present when ``x`` is an array.
    """
    StripSpec(B)
    if not (q > 0 and np.isfinite(q)):
        raise ModelError(f"exponential epoch needs a finite q > 0, got {q}")
    if start not in ("bottom", "top"):
        raise ModelError("only boundary starts ('bottom' or 'top') have a closed form")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if xs.size == 0 or xs.min() <= 0 or xs.max() > B:
        raise ModelError(f"levels must lie in (0, {B}]")
    if start == "bottom":
        out = _epoch_bottom(model, B, q, xs)
    else:
        # W from B equals B - (reflection of -X from 0): P(W >= x) = P(J) - P(W~ > B - x)
        tilde = _epoch_bottom(flip(model), B, q, B - xs)
        out = epoch_distribution(model, q)[None] - tilde
    return out[0] if scalar else out
