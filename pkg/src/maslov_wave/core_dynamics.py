"""Model definition for the doubly-diffusive FitzHugh-Nagumo traveling wave.

The traveling-wave ODE in the co-moving frame is written as a first-order
system in ``U = (u, v, w, y)`` with ``u' = w`` and ``v' = eps * y``.  This
module collects the vector field, its linearization (the eigenvalue system
at a real spectral parameter), and the spectral data of the rest state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

EPS_MAX = 1e-3


class ParameterError(ValueError):
    """Raised when model parameters leave their admissible region."""


@dataclass(frozen=True)
class Params:
    """Model constants.

    ``c`` defaults to the singular speed ``sqrt(2) * (a - 1/2)`` when left as
    ``None``.
    """

    a: float = 0.25
    gamma: float = 1.0
    eps: float = 1e-3
    c: float | None = None
    eps_max: float = EPS_MAX

    def __post_init__(self):
        if not (0.0 < self.a < 0.5):
            raise ParameterError(f"threshold a={self.a} must satisfy 0 < a < 1/2")
        if self.eps < 0:
            raise ParameterError(f"eps={self.eps} must be non-negative")
        if self.gamma < 0:
            raise ParameterError(f"gamma={self.gamma} must be non-negative")
        if self.c is None:
            object.__setattr__(self, "c", math.sqrt(2.0) * (self.a - 0.5))

    @property
    def c_star(self) -> float:
        return math.sqrt(2.0) * (self.a - 0.5)

    @property
    def discriminant(self) -> float:
        """(gamma*eps - a)^2 - 4*eps; must be >= 0 for real rest eigenvalues."""
        return (self.gamma * self.eps - self.a) ** 2 - 4.0 * self.eps

    @property
    def is_small_eps(self) -> bool:
        return self.eps <= self.eps_max

    def with_(self, **kw) -> "Params":
        return replace(self, **kw)

    def require_small_eps(self) -> None:
        if not self.is_small_eps:
            warnings.warn(
                f"eps={self.eps} exceeds eps_max={self.eps_max}; "
                "small-eps orderings are not guaranteed",
                stacklevel=2,
            )


def cubic_eval(u, a: float):
    """Return ``(f, f', f'')`` for the bistable cubic ``u(1-u)(u-a)``."""
    f = u * (1.0 - u) * (u - a)
    fp = -3.0 * u * u + 2.0 * (1.0 + a) * u - a
    fpp = -6.0 * u + 2.0 * (1.0 + a)
    return f, fp, fpp


def vector_field(U, p: Params) -> np.ndarray:
    """Traveling-wave vector field ``F(U)``; accepts shape (4,) or (4, n)."""
    U = np.asarray(U, dtype=float)
    u, v, w, y = U
    f = u * (1.0 - u) * (u - p.a)
    return np.array([w, p.eps * y, -p.c * w - f + v, -p.c * y + p.gamma * v - u])


def jacobian(U, p: Params) -> np.ndarray:
    """Jacobian of :func:`vector_field` at a single point."""
    return linearization(float(U[0]), 0.0, p)


def linearization(u_base: float, lam: float, p: Params) -> np.ndarray:
    """Matrix of the eigenvalue system at spectral parameter ``lam``.

    At ``lam == 0`` this is the variational matrix of the traveling-wave ODE
    and ``eps`` may vanish; otherwise ``eps > 0`` is required because of the
    ``lam/eps`` entry.
    """
    if lam != 0.0 and p.eps == 0.0:
        raise ZeroDivisionError("lam/eps entry undefined: lam != 0 with eps == 0")
    fp = -3.0 * u_base * u_base + 2.0 * (1.0 + p.a) * u_base - p.a
    lam_over_eps = lam / p.eps if lam != 0.0 else 0.0
    return np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, p.eps],
            [lam - fp, 1.0, -p.c, 0.0],
            [-1.0, lam_over_eps + p.gamma, 0.0, -p.c],
        ]
    )


def linearization_batch(u_base, lam: float, p: Params) -> np.ndarray:
    """Vectorized :func:`linearization` over an array of base values."""
    u_base = np.atleast_1d(np.asarray(u_base, dtype=float))
    if lam != 0.0 and p.eps == 0.0:
        raise ZeroDivisionError("lam/eps entry undefined: lam != 0 with eps == 0")
    fp = -3.0 * u_base**2 + 2.0 * (1.0 + p.a) * u_base - p.a
    A = np.zeros((u_base.size, 4, 4))
    A[:, 0, 2] = 1.0
    A[:, 1, 3] = p.eps
    A[:, 2, 0] = lam - fp
    A[:, 2, 1] = 1.0
    A[:, 2, 2] = -p.c
    A[:, 3, 0] = -1.0
    A[:, 3, 1] = (lam / p.eps if lam != 0.0 else 0.0) + p.gamma
    A[:, 3, 3] = -p.c
    return A


def asymptotic_matrix(lam: complex, p: Params) -> np.ndarray:
    """Limit of the eigenvalue matrix as the wave returns to rest (complex lam allowed)."""
    if lam != 0 and p.eps == 0.0:
        raise ZeroDivisionError("lam/eps entry undefined: lam != 0 with eps == 0")
    dtype = complex if np.iscomplexobj(lam) or isinstance(lam, complex) else float
    A = np.zeros((4, 4), dtype=dtype)
    A[0, 2] = 1.0
    A[1, 3] = p.eps
    A[2, 0] = lam + p.a
    A[2, 1] = 1.0
    A[2, 2] = -p.c
    A[3, 0] = -1.0
    A[3, 1] = (lam / p.eps if lam != 0 else 0.0) + p.gamma
    A[3, 3] = -p.c
    return A


@dataclass
class RestSpectrum:
    """Sorted real eigenvalues and eigenvectors (columns) of the rest-state matrix."""

    mu: np.ndarray
    eigvecs: np.ndarray
    closed_form: bool = True

    @property
    def mu1(self) -> float:
        return float(self.mu[0])

    @property
    def mu2(self) -> float:
        return float(self.mu[1])

    @property
    def mu3(self) -> float:
        return float(self.mu[2])

    @property
    def mu4(self) -> float:
        return float(self.mu[3])

    def ordering_holds(self, c: float) -> bool:
        m1, m2, m3, m4 = self.mu
        return bool(m1 < m2 < 0 < -c < m3 < m4)


def rest_eigenvalues(lam: float, p: Params) -> np.ndarray:
    """Closed-form rest-state eigenvalues at real ``lam``, ascending.

    Raises :class:`ParameterError` when the discriminant is negative.
    """
    disc = p.discriminant
    if disc < 0:
        raise ParameterError(f"negative discriminant {disc:.3e}: rest eigenvalues are complex")
    root = math.sqrt(disc)
    base = p.c**2 + 2.0 * (2.0 * lam + p.a + p.gamma * p.eps)
    inner_lo, inner_hi = base - 2.0 * root, base + 2.0 * root
    if inner_lo < 0:
        raise ParameterError("rest eigenvalues are complex for this lambda")
    s_lo, s_hi = math.sqrt(inner_lo), math.sqrt(inner_hi)
    half_c = -0.5 * p.c
    return np.array([half_c - 0.5 * s_hi, half_c - 0.5 * s_lo, half_c + 0.5 * s_lo, half_c + 0.5 * s_hi])


def _real_eigvec(A: np.ndarray, mu: float) -> np.ndarray:
    # Null vector of A - mu I via SVD; sign fixed by largest component positive.
    _, _, vh = np.linalg.svd(A - mu * np.eye(4))
    vec = vh[-1]
    vec = vec / np.linalg.norm(vec)
    k = int(np.argmax(np.abs(vec)))
    return vec if vec[k] > 0 else -vec


def rest_spectrum(lam: float, p: Params) -> RestSpectrum:
    """Eigen-data of the rest-state matrix at real ``lam``.

    Uses the closed form when the discriminant allows it, otherwise falls back
    to a numeric eigensolve and flags ``closed_form=False``.  With ``eps == 0``
    only ``lam == 0`` is meaningful; the tie at zero is kept in slot two.
    """
    if p.eps == 0.0 and lam != 0.0:
        raise ZeroDivisionError("lam/eps entry undefined: lam != 0 with eps == 0")
    A = asymptotic_matrix(float(lam), p)
    try:
        mu = rest_eigenvalues(lam, p)
        closed = True
    except ParameterError:
        warnings.warn("discriminant negative; using numeric eigensolve", stacklevel=2)
        w = np.linalg.eigvals(A)
        mu = np.sort(w.real)
        closed = False
    vecs = np.column_stack([_real_eigvec(A, m) for m in mu])
    return RestSpectrum(mu=mu, eigvecs=vecs, closed_form=closed)


@dataclass
class SpectrumMargin:
    """Result of scanning the essential spectrum over a lambda grid."""

    lambdas: np.ndarray
    min_abs_real_mu: np.ndarray
    tol: float
    bound: float | None  # largest Re(lambda) with an imaginary-axis eigenvalue; None if none found

    @property
    def hits(self) -> np.ndarray:
        return self.lambdas[self.min_abs_real_mu < self.tol]


def essential_spectrum_margin(lambda_grid, p: Params, tol: float = 1e-3) -> SpectrumMargin:
    """For each lambda report ``min |Re mu|`` over eigenvalues of the asymptotic matrix."""
    if p.eps <= 0:
        raise ParameterError("essential spectrum scan requires eps > 0")
    lams = np.asarray(lambda_grid, dtype=complex).ravel()
    margins = np.empty(lams.size)
    for i, lam in enumerate(lams):
        mu = np.linalg.eigvals(asymptotic_matrix(complex(lam), p))
        margins[i] = np.min(np.abs(mu.real))
    hit = margins < tol
    bound = float(np.max(lams[hit].real)) if hit.any() else None
    return SpectrumMargin(lambdas=lams, min_abs_real_mu=margins, tol=tol, bound=bound)


def essential_spectrum_curves(kappa, p: Params) -> np.ndarray:
    """Dispersion-relation oracle: lambdas with an eigenvalue ``i*kappa`` of the asymptotic matrix.

    Returns an array of shape (len(kappa), 2).
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    out = np.empty((kappa.size, 2), dtype=complex)
    R = np.array([[-p.a, -1.0], [p.eps, -p.eps * p.gamma]])
    for i, k in enumerate(kappa):
        sym = (-(k**2) + 1j * p.c * k) * np.eye(2) + R
        out[i] = np.linalg.eigvals(sym)
    return out
