"""Markov-modulated Brownian motion: parameters, phase classes, drift, reversal."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ModelError
from .linalg import is_irreducible, stationary_of_generator

__all__ = [
    "MmbmModel",
    "PhaseClasses",
    "validate",
    "asymptotic_drift",
    "time_reverse",
    "flip",
    "restrict_rows",
    "random_model",
]

# generator row sums within this multiple of ||Q|| are repaired on construction
ROW_SUM_RTOL = 1e-12
# |kappa| below this multiple of max|mu| counts as zero drift
ZERO_DRIFT_RTOL = 1e-12


def _readonly(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PhaseClasses:
    """Index sets of states that can move up (``e_plus``) or down (``e_minus``)."""

    e_plus: np.ndarray
    e_minus: np.ndarray
    n_states: int
    degenerate: bool = False

    @property
    def n_plus(self) -> int:
        return int(self.e_plus.size)

    @property
    def n_minus(self) -> int:
        return int(self.e_minus.size)


@dataclass(frozen=True, eq=False)
class MmbmModel:
    """Markov-modulated Brownian motion.

    While the background chain sits in state ``i`` the level moves as a
    Brownian motion with drift ``mu[i]`` and variance ``sigma2[i]``.

    Parameters
    ----------
    Q : (N, N) array_like
        Irreducible generator of the background chain.  Row sums within
        ``1e-12 * ||Q||`` of zero are absorbed into the diagonal.
    mu : (N,) array_like
        Drift per state.
    sigma2 : (N,) array_like
        Variance per state, ``>= 0``.
    labels : sequence of str, optional
    """

    Q: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        s2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        n = mu.size
        if n < 1:
            raise ModelError("model needs at least one state")
        if Q.shape != (n, n) or s2.shape != (n,) or mu.ndim != 1:
            raise ModelError(f"inconsistent shapes: Q {Q.shape}, mu {mu.shape}, sigma2 {s2.shape}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(s2))):
            raise ModelError("model parameters must be finite")
        if np.any(s2 < 0):
            raise ModelError("variances must be nonnegative")
        off = Q - np.diag(np.diag(Q))
        if np.any(off < 0):
            raise ModelError("generator has negative off-diagonal entries")
        rs = Q.sum(axis=1)
        if np.abs(rs).max() > ROW_SUM_RTOL * max(np.abs(Q).max(), 1e-300):
            raise ModelError("generator rows must sum to zero")
        Q = Q - np.diag(rs)
        if not is_irreducible(Q):
            raise ModelError("generator is reducible")
        labels = tuple(str(x) for x in self.labels) if self.labels else tuple(str(i) for i in range(n))
        if len(labels) != n:
            raise ModelError("one label per state is required")
        object.__setattr__(self, "Q", _readonly(Q))
        object.__setattr__(self, "mu", _readonly(mu))
        object.__setattr__(self, "sigma2", _readonly(s2))
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.mu.size

    @cached_property
    def pi(self) -> np.ndarray:
        return _readonly(stationary_of_generator(self.Q))

    @cached_property
    def kappa(self) -> float:
        return float(self.pi @ self.mu)

    @property
    def is_zero_drift(self) -> bool:
        return abs(self.kappa) <= ZERO_DRIFT_RTOL * max(np.abs(self.mu).max(), 1e-300)

    @cached_property
    def phases(self) -> PhaseClasses:
        s2, mu = self.sigma2, self.mu
        plus = np.flatnonzero(~((s2 == 0) & (mu <= 0)))
        minus = np.flatnonzero(~((s2 == 0) & (mu >= 0)))
        return PhaseClasses(plus, minus, self.n, degenerate=(plus.size == 0 and minus.size == 0))

    def __repr__(self):
        return f"MmbmModel(n={self.n}, mu={self.mu.tolist()}, sigma2={self.sigma2.tolist()}, kappa={self.kappa:.6g})"


def validate(model: MmbmModel) -> PhaseClasses:
    """Check the model and return its phase classes.

    Construction already rejects invalid generators and variances, so this
    only re-derives ``E+`` and ``E-``.  A model whose states all have zero
    drift and zero variance is returned with ``degenerate=True``; spectral
    routines refuse such models.
    """
    if not isinstance(model, MmbmModel):
        raise ModelError("expected an MmbmModel")
    return model.phases


def asymptotic_drift(model: MmbmModel) -> float:
    """Long-run rate ``kappa = sum_i pi_i mu_i`` of the free process."""
    return model.kappa


def time_reverse(model: MmbmModel) -> MmbmModel:
    """Same drifts and variances, background chain replaced by its time reversal."""
    pi = model.pi
    Qr = (model.Q.T * pi[None, :]) / pi[:, None]
    Qr = Qr - np.diag(Qr.sum(axis=1))  # keep rows exactly conservative
    return MmbmModel(Qr, model.mu, model.sigma2, model.labels)


def flip(model: MmbmModel) -> MmbmModel:
    """The model of ``-X``: drifts negated."""
    return MmbmModel(model.Q, -model.mu, model.sigma2, model.labels)


def restrict_rows(M, cls: PhaseClasses, sign: str) -> np.ndarray:
    """Keep the rows of ``M`` indexed by ``E+`` (``sign='+'``) or ``E-`` (``sign='-'``)."""
    M = np.asarray(M)
    idx = {"+": cls.e_plus, "-": cls.e_minus}.get(sign)
    if idx is None:
        raise ModelError(f"sign must be '+' or '-', got {sign!r}")
    if M.ndim == 0 or M.shape[0] != cls.n_states:
        raise ModelError(f"expected {cls.n_states} rows, got {M.shape[0] if M.ndim else 0}")
    return M[idx]


def random_model(rng, n: int, *, zero_variance: float = 0.0, frozen: float = 0.0,
                 sigma2_range=(0.2, 2.0), mu_range=(-2.0, 2.0), rate_range=(0.2, 2.0),
                 labels: Sequence[str] | None = None) -> MmbmModel:
    """Draw a model with a dense random generator.

    ``zero_variance`` is the probability that a state is linear (sigma2 = 0),
    ``frozen`` the probability that such a state also has zero drift.
    """
    rng = np.random.default_rng(rng)
    Q = rng.uniform(*rate_range, size=(n, n))
    np.fill_diagonal(Q, 0.0)
    Q -= np.diag(Q.sum(axis=1))
    s2 = rng.uniform(*sigma2_range, size=n)
    mu = rng.uniform(*mu_range, size=n)
    lin = rng.random(n) < zero_variance
    s2[lin] = 0.0
    fz = lin & (rng.random(n) < frozen)
    mu[fz] = 0.0
    # a linear state with tiny drift makes the pencil badly scaled
    small = lin & ~fz & (np.abs(mu) < 0.2)
    mu[small] = np.copysign(0.2, mu[small] + 1e-300)
    if np.all(fz):
        mu[0], s2[0] = 1.0, 1.0
    return MmbmModel(Q, mu, s2, labels or ())
