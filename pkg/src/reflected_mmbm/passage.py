"""First-passage matrices of the free (unreflected) process.

For the down direction, ``Pi[i, j] = P_i(J(tau_0^-) = j)`` over ``j`` in
``E-`` and ``Lambda`` is the generator of the level-indexed chain
``J(tau_x^-)``, so that ``P(J(tau_x^-)) = Pi expm(Lambda x)``.  Both are
q-killed: passage after an independent Exp(q) time does not count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError, NumericalError
from .linalg import expm, quadratic_eigenpairs
from .model import MmbmModel, flip

__all__ = [
    "PassagePair",
    "passage_matrices",
    "passage_pairs",
    "crossing_probability",
    "perron_eigenvalue",
    "passage_residual",
]

COND_MAX = 1e12
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class PassagePair:
    """First-passage data for one direction.

    Attributes
    ----------
    direction : {'up', 'down'}
    q : float
    Pi : ndarray, shape (N, Nd)
    Lambda : ndarray, shape (Nd, Nd)
    rho : float
        Perron eigenvalue of ``Lambda`` (``-inf`` when ``Nd == 0``).
    index : ndarray of int
        The states ``E+`` or ``E-`` labelling the columns of ``Pi``.
    residual : float
        Infinity norm of the quadratic matrix equation residual.
    """

    direction: str
    q: float
    Pi: np.ndarray
    Lambda: np.ndarray
    rho: float
    index: np.ndarray
    residual: float

    @property
    def own_rows(self) -> np.ndarray:
        """``Pi`` restricted to its own phase rows (the identity)."""
        return self.Pi[self.index]


def perron_eigenvalue(Lambda) -> float:
    """Rightmost (real) eigenvalue of ``Lambda``; ``-inf`` for an empty matrix."""
    Lambda = np.asarray(Lambda, dtype=float)
    if Lambda.size == 0:
        return -np.inf
    ev = np.linalg.eigvals(Lambda)
    return float(ev[np.argmax(ev.real)].real)


def passage_residual(model: MmbmModel, pair: PassagePair) -> float:
    """``|| 1/2 D_s2 Pi L^2 -+ D_mu Pi L + (Q - qI) Pi ||_inf``; sign ``-`` for up."""
    sgn = -1.0 if pair.direction == "up" else 1.0
    P, L = pair.Pi, pair.Lambda
    if P.shape[1] == 0:
        return 0.0
    PL = P @ L
    R = (0.5 * model.sigma2[:, None] * (PL @ L) + sgn * model.mu[:, None] * PL
         + (model.Q - pair.q * np.eye(model.n)) @ P)
    return float(np.abs(R).max())


def _real_basis(roots, V):
    """Real pair ``(W, G)`` with ``W G = V diag(roots)`` spanning the same space."""
    m = roots.size
    W = np.zeros((V.shape[0], m))
    G = np.zeros((m, m))
    tol = 1e-10
    used = np.zeros(m, dtype=bool)
    k = 0
    for i in np.argsort(roots.real, kind="stable"):
        if used[i]:
            continue
        s = roots[i]
        if abs(s.imag) <= tol * (1.0 + abs(s)):
            W[:, k] = V[:, i].real
            G[k, k] = s.real
            used[i] = True
            k += 1
            continue
        cand = np.flatnonzero(~used)
        cand = cand[cand != i]
        j = cand[np.argmin(np.abs(roots[cand] - np.conj(s)))]
        if abs(roots[j] - np.conj(s)) > 1e-6 * (1.0 + abs(s)):
            raise NumericalError(f"root {s} has no conjugate partner in the selected set")
        if s.imag < 0:
            i, s = j, roots[j]
        v = V[:, i]
        a, b = s.real, s.imag
        W[:, k], W[:, k + 1] = v.real, v.imag
        G[k:k + 2, k:k + 2] = [[a, b], [-b, a]]
        used[i] = used[j] = True
        k += 2
    return W, G


def _down_pair(model: MmbmModel, q: float, zero_drift: bool):
    cls = model.phases
    idx = cls.e_minus
    nd = idx.size
    if nd == 0:
        return np.zeros((model.n, 0)), np.zeros((0, 0)), idx
    sd = quadratic_eigenpairs(model, q, zero_drift=zero_drift)
    order = np.argsort(sd.roots.real, kind="stable")
    sel, rest = order[:nd], order[nd:]
    if sel.size < nd:
        raise NumericalError("fewer roots than down-phases")
    if rest.size and sd.roots[sel].real.max() >= sd.roots[rest].real.min():
        raise NumericalError("root sets for the two directions are not separated")
    if q > 0 and (sd.roots[sel].real.max() >= 0 or (rest.size and sd.roots[rest].real.min() <= 0)):
        raise NumericalError("root count does not match the phase classes")
    W, G = _real_basis(sd.roots[sel], sd.vectors[:, sel])
    Wm = W[idx]
    c = np.linalg.cond(Wm)
    if not np.isfinite(c) or c > COND_MAX:
        raise NumericalError(
            f"eigenvector block is ill-conditioned (cond {c:.3g}); perturb q or parameters"
        )
    # Lambda = Wm G Wm^{-1},  Pi = W Wm^{-1}
    Lam = np.linalg.solve(Wm.T, (Wm @ G).T).T
    Pi = np.linalg.solve(Wm.T, W.T).T
    Pi[idx] = np.eye(nd)
    return Pi, Lam, idx


def passage_matrices(model: MmbmModel, q: float = 0.0, direction: str = "down", *,
                     zero_drift: bool = False) -> PassagePair:
    """First-passage pair ``(Pi, Lambda)`` for one direction and killing rate.

    The down pair is assembled from the ``N-`` roots of the quadratic
    polynomial with the smallest real parts (at q = 0 the zero root belongs
    to the down set iff the asymptotic drift is negative).  The up pair is
    the down pair of the model with negated drifts.

    Parameters
    ----------
    model : MmbmModel
    q : float
        Killing rate ``>= 0``.
    direction : {'down', 'up'}
    zero_drift : bool
        Permit q = 0 with zero asymptotic drift.  Both directions are then
        recurrent; used by the zero-drift crossing matrices.

    Raises
    ------
    DefectiveSpectrumError
        Non-semisimple roots (including q = 0 with zero drift unless
        ``zero_drift``).
    NumericalError
        Ill-conditioned eigenvector block or residual above ``1e-8``.
    """
    if direction not in ("up", "down"):
        raise ModelError(f"direction must be 'up' or 'down', got {direction!r}")
    if q < 0 or not np.isfinite(q):
        raise ModelError(f"killing rate must be finite and >= 0, got {q}")
    if model.phases.degenerate:
        raise ModelError("degenerate model: every state has zero drift and zero variance")
    base = flip(model) if direction == "up" else model
    Pi, Lam, idx = _down_pair(base, float(q), zero_drift)
    pair = PassagePair(direction, float(q), Pi, Lam, perron_eigenvalue(Lam), idx, 0.0)
    res = passage_residual(model, pair)
    scale = max(1.0, np.abs(model.Q).max() + q)
    if res > RESIDUAL_TOL * scale:
        raise NumericalError(f"passage matrices residual {res:.3g} exceeds tolerance")
    object.__setattr__(pair, "residual", res)
    return pair


def passage_pairs(model: MmbmModel, q: float = 0.0, *, zero_drift: bool = False):
    """``(up, down)`` passage pairs."""
    return (passage_matrices(model, q, "up", zero_drift=zero_drift),
            passage_matrices(model, q, "down", zero_drift=zero_drift))


def crossing_probability(pair: PassagePair, x: float) -> np.ndarray:
    """``P(J(tau_x)) = Pi expm(Lambda x)`` for a level ``x >= 0``."""
    if x < 0:
        raise ModelError(f"level must be >= 0, got {x}")
    return pair.Pi @ expm(pair.Lambda * x)
