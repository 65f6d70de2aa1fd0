"""Dense linear-algebra kernels used by the analytic modules.

The quadratic eigenproblem solved here is

    F(s) v = 0,   F(s) = 1/2 diag(sigma2) s^2 + diag(mu) s + (Q - q I),

whose root/vector pairs generate the first-passage matrices of the
modulated Brownian motion.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .errors import DefectiveSpectrumError, ModelError, NumericalError

if TYPE_CHECKING:
    from .model import MmbmModel

__all__ = [
    "SpectralData",
    "expm",
    "stationary_of_generator",
    "is_irreducible",
    "quadratic_eigenpairs",
    "quadratic_residual",
]


def _square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ModelError(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ModelError(f"{name} has non-finite entries")
    return A


def expm(A):
    """Matrix exponential.

    Scaling and squaring with a Pade approximant (scipy's Al-Mohy/Higham
    implementation).

    Parameters
    ----------
    A : (n, n) array_like

    Returns
    -------
    ndarray, shape (n, n)

    Raises
    ------
    ModelError
        If `A` is not square or has non-finite entries.
    NumericalError
        If the result overflows.
    """
    A = _square(A)
    if A.shape[0] == 0:
        return np.zeros((0, 0))
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(A)
    if not np.all(np.isfinite(E)):
        raise NumericalError(
            f"matrix exponential overflowed (norm of argument {np.linalg.norm(A, np.inf):.3g})"
        )
    return E


def is_irreducible(Q, tol=0.0):
    """True when the directed graph of positive off-diagonal rates is strongly connected."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n <= 1:
        return True
    adj = (Q > tol).astype(int)
    np.fill_diagonal(adj, 0)
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    return ncomp == 1


def stationary_of_generator(Q, tol=1e-10):
    """Stationary probability vector of an irreducible generator.

    Parameters
    ----------
    Q : (n, n) array_like
        Conservative transition-rate matrix (nonnegative off-diagonal
        entries, zero row sums up to ``tol * max(1, ||Q||)``).
    tol : float
        Relative tolerance for the generator checks.

    Returns
    -------
    pi : ndarray, shape (n,)
        Solution of ``pi @ Q = 0`` with ``pi.sum() == 1``.
    """
    Q = _square(Q, "Q")
    n = Q.shape[0]
    if n == 0:
        raise ModelError("empty generator")
    scale = max(1.0, np.abs(Q).max())
    off = Q - np.diag(np.diag(Q))
    if off.min() < -tol * scale:
        raise ModelError("generator has negative off-diagonal entries")
    if np.abs(Q.sum(axis=1)).max() > tol * scale:
        raise ModelError("generator rows do not sum to zero")
    if not is_irreducible(Q):
        raise ModelError("generator is reducible")
    if n == 1:
        return np.ones(1)
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    if pi.min() <= 0:
        raise NumericalError("stationary vector has non-positive entries")
    return pi / pi.sum()


@dataclass(frozen=True)
class SpectralData:
    """Roots and unit-norm null vectors of the quadratic matrix polynomial.

    Attributes
    ----------
    roots : ndarray of complex, shape (m,)
    vectors : ndarray of complex, shape (n, m)
        Column ``k`` is the null vector for ``roots[k]``.
    semisimple : ndarray of bool, shape (m,)
        False only for the collapsed zero root of a zero-drift model at q = 0.
    condition : float
        2-norm condition number of the linearization's eigenvector matrix.
    q : float
    """

    roots: np.ndarray
    vectors: np.ndarray
    semisimple: np.ndarray
    condition: float
    q: float


def quadratic_residual(model, q, s, v):
    """``|| F(s) v ||_inf`` for the model's quadratic matrix polynomial."""
    F = 0.5 * np.diag(model.sigma2) * s**2 + np.diag(model.mu) * s + model.Q - q * np.eye(model.n)
    return np.abs(F @ v).max()


def _linearize(Q, mu, sigma2, q):
    """First-order companion form of F(s) after eliminating frozen states.

    Returns ``(H, R, Z, elim)`` with ``H y = s y`` equivalent to F(s) v = 0,
    where ``v[R] = y[:len(R)]`` and ``v[Z] = elim @ v[R]``.
    """
    n = len(mu)
    A0 = Q - q * np.eye(n)
    diff = sigma2 > 0
    frozen = ~diff & (mu == 0)
    R = np.flatnonzero(~frozen)
    Z = np.flatnonzero(frozen)
    if R.size == 0:
        raise ModelError("degenerate model: every state has zero drift and zero variance")
    A = A0[np.ix_(R, R)]
    elim = np.zeros((Z.size, R.size))
    if Z.size:
        # frozen rows carry no power of s, so v_Z is an affine image of v_R
        elim = -np.linalg.solve(A0[np.ix_(Z, Z)], A0[np.ix_(Z, R)])
        A = A + A0[np.ix_(R, Z)] @ elim
    nr = R.size
    dpos = np.flatnonzero(diff[R])
    nd = dpos.size
    H = np.zeros((nr + nd, nr + nd))
    for t, p in enumerate(dpos):
        i = R[p]
        half = 0.5 * sigma2[i]
        H[p, nr + t] = 1.0
        H[nr + t, :nr] = -A[p] / half
        H[nr + t, nr + t] = -mu[i] / half
    for p in np.flatnonzero(~diff[R]):
        H[p, :nr] = -A[p] / mu[R[p]]
    return H, R, Z, elim


def _normalize_columns(V):
    V = V / np.linalg.norm(V, axis=0)
    # fix the complex phase so the largest component is real positive
    k = np.argmax(np.abs(V), axis=0)
    ph = V[k, np.arange(V.shape[1])]
    return V * (np.abs(ph) / ph)


def quadratic_eigenpairs(model: MmbmModel, q: float = 0.0, *, zero_drift: bool = False) -> SpectralData:
    """All roots of ``det F(s) = 0`` with their null vectors.

    The number of roots equals ``2 #{sigma2 > 0} + #{sigma2 = 0, mu != 0}``.
    For q > 0, ``N-`` roots lie in the open left half-plane and ``N+`` in
    the right one.  For q = 0 and nonzero asymptotic drift exactly one root
    is zero and it is returned as ``0`` with the normalized all-ones vector.

    Parameters
    ----------
    model : MmbmModel
    q : float
        Killing rate, ``q >= 0``.
    zero_drift : bool
        Only meaningful for q = 0 and zero asymptotic drift.  The double root
        at zero is then collapsed into a single root with the all-ones vector
        (its Jordan chain is dropped).  Without this flag that case raises.

    Raises
    ------
    DefectiveSpectrumError
        Clustered roots whose vectors are linearly dependent, including the
        zero-drift double root at q = 0 unless ``zero_drift`` is set.
    """
    if q < 0 or not np.isfinite(q):
        raise ModelError(f"killing rate must be finite and >= 0, got {q}")
    Q, mu, sigma2 = model.Q, model.mu, model.sigma2
    n = model.n
    H, R, Z, elim = _linearize(Q, mu, sigma2, q)
    nr = R.size
    scale = max(1.0, np.abs(H).max())

    roots, Y = np.linalg.eig(H)
    Yn = Y / np.linalg.norm(Y, axis=0)
    try:
        cond = float(np.linalg.cond(Yn))
    except np.linalg.LinAlgError:
        cond = np.inf

    semisimple = np.ones(roots.size, dtype=bool)
    keep = np.ones(roots.size, dtype=bool)
    zero_idx = None
    if q == 0:
        order = np.argsort(np.abs(roots))
        if model.is_zero_drift:
            if not zero_drift:
                raise DefectiveSpectrumError(
                    "defective spectrum; perturb q or parameters "
                    "(zero asymptotic drift gives a double root at 0 when q = 0)"
                )
            zero_idx = order[0]
            keep[order[1]] = False
            semisimple[zero_idx] = False
        else:
            zero_idx = order[0]
            if abs(roots[zero_idx]) > 1e-8 * scale:
                raise NumericalError(f"expected a zero root at q = 0, smallest root is {roots[zero_idx]}")

    _check_clusters(roots[keep], Yn[:, keep])

    V = np.zeros((n, roots.size), dtype=complex)
    V[R] = Y[:nr]
    if Z.size:
        V[Z] = elim @ Y[:nr]
    if zero_idx is not None:
        roots = roots.copy()
        roots[zero_idx] = 0.0
        V[:, zero_idx] = 1.0
    V = _normalize_columns(V)
    return SpectralData(
        roots=roots[keep],
        vectors=V[:, keep],
        semisimple=semisimple[keep],
        condition=cond,
        q=float(q),
    )


def _check_clusters(roots, Y, rtol=1e-7, min_sv=1e-6):
    m = roots.size
    seen = np.zeros(m, dtype=bool)
    for k in range(m):
        if seen[k]:
            continue
        close = np.abs(roots - roots[k]) <= rtol * (1.0 + np.abs(roots[k]))
        seen |= close
        if close.sum() > 1:
            sv = np.linalg.svd(Y[:, close], compute_uv=False)
            if sv[-1] < min_sv:
                raise DefectiveSpectrumError(
                    f"defective spectrum near s = {roots[k]:.6g}; perturb q or parameters"
                )
