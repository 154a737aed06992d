"""Symplectic form, Plücker coordinates of 2-planes in R^4 and their induced flow."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

# omega(x, y) = <x, J y> = x1 y3 - x3 y1 - x2 y4 + x4 y2
J = np.array(
    [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ]
)

PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LABELS = ("p12", "p13", "p14", "p23", "p24", "p34")
_INDEX = {pr: k for k, pr in enumerate(PAIRS)}


class RankDeficientFrame(ValueError):
    pass


class BasisMismatch(ValueError):
    pass


class SingularBasis(ValueError):
    pass


class IntegrationFailure(RuntimeError):
    pass


def symplectic_form(x, y) -> float:
    return float(np.asarray(x, float) @ J @ np.asarray(y, float))


# ---------------------------------------------------------------- frames and points


@dataclass
class LagrangianFrame:
    """Two column vectors spanning a plane; ``basis_tag`` names the coordinate basis."""

    cols: np.ndarray
    basis_tag: str = "standard"
    lagrangian: bool = True

    def __post_init__(self):
        self.cols = np.array(self.cols, dtype=float).reshape(4, 2)
        s = np.linalg.svd(self.cols / np.linalg.norm(self.cols, axis=0, keepdims=True).clip(1e-300),
                          compute_uv=False)
        if not np.all(np.isfinite(s)) or s[-1] <= 1e-12:
            raise RankDeficientFrame("frame columns are (numerically) dependent")

    @property
    def omega(self) -> float:
        return symplectic_form(self.cols[:, 0], self.cols[:, 1])

    def lagrangian_residual(self) -> float:
        n = np.linalg.norm(self.cols[:, 0]) * np.linalg.norm(self.cols[:, 1])
        return abs(self.omega) / n

    def orthonormal(self) -> "LagrangianFrame":
        q, _ = np.linalg.qr(self.cols)
        return LagrangianFrame(q, self.basis_tag, self.lagrangian)


@dataclass
class PluckerPoint:
    """Homogeneous coordinates (p12, p13, p14, p23, p24, p34) of a 2-plane."""

    coords: np.ndarray
    basis_tag: str = "standard"

    def __post_init__(self):
        self.coords = np.array(self.coords, dtype=float).reshape(6)
        if not np.any(self.coords):
            raise ValueError("all Plücker coordinates vanish")

    def __getattr__(self, name):
        if name in LABELS:
            return float(self.coords[LABELS.index(name)])
        raise AttributeError(name)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def normalized(self) -> "PluckerPoint":
        """Unit norm, first non-negligible coordinate positive."""
        c = self.coords / self.norm
        k = int(np.argmax(np.abs(c) > 1e-12))
        return PluckerPoint(c if c[k] > 0 else -c, self.basis_tag)

    def relation_residual(self) -> float:
        return plucker_relation(self.coords) / self.norm ** 2

    def lagrangian_residual(self) -> float:
        return lagrangian_residual(self.coords)

    def frame(self) -> LagrangianFrame:
        return LagrangianFrame(frame_from_plucker(self.coords), self.basis_tag)


def plucker_relation(p: np.ndarray) -> float:
    p = np.asarray(p)
    return float(abs(p[0] * p[5] - p[1] * p[4] + p[2] * p[3]))


def lagrangian_residual(p: np.ndarray) -> float:
    """|p13 - p24| / |P|; zero exactly on Lagrangian planes for the form above."""
    p = np.asarray(p)
    return float(abs(p[1] - p[4]) / np.linalg.norm(p))


def omega_from_plucker(p: np.ndarray) -> float:
    """omega(v1, v2) of the spanning pair, linear in the coordinates."""
    return float(p[1] - p[4])


def minors(M: np.ndarray) -> np.ndarray:
    """The six 2x2 minors of a 4x2 matrix (or a stack of them)."""
    M = np.asarray(M, float)
    a, b = M[..., :, 0], M[..., :, 1]
    return np.stack([a[..., i] * b[..., j] - a[..., j] * b[..., i] for i, j in PAIRS], axis=-1)


def plucker_embed(F, basis_tag: str | None = None) -> PluckerPoint:
    if isinstance(F, LagrangianFrame):
        cols, tag = F.cols, F.basis_tag
    else:
        cols, tag = np.asarray(F, float).reshape(4, 2), "standard"
        LagrangianFrame(cols, tag, lagrangian=False)  # rank check
    return PluckerPoint(minors(cols), basis_tag or tag)


def frame_from_plucker(p: np.ndarray) -> np.ndarray:
    """A 4x2 frame whose minors equal ``p`` (which must satisfy the Plücker relation).

    Contracting the bivector with e_i* and e_j* for its largest coordinate
    p_ij gives two vectors of the plane whose wedge is p_ij times it.
    """
    p = np.asarray(p, float)
    P = np.zeros((4, 4))
    for k, (i, j) in enumerate(PAIRS):
        P[i, j], P[j, i] = p[k], -p[k]
    k = int(np.argmax(np.abs(p)))
    i, j = PAIRS[k]
    return np.column_stack([P[:, i] / p[k], P[:, j]])


# ---------------------------------------------------------------- induced linear maps


def induced_matrix(B: np.ndarray) -> np.ndarray:
    """6x6 matrix of the derivation v1^v2 -> Bv1^v2 + v1^Bv2 in the p_ij basis."""
    B = np.asarray(B, float)
    M = np.zeros((6, 6))
    for col, (i, j) in enumerate(PAIRS):
        # B e_i ^ e_j + e_i ^ B e_j
        for k in range(4):
            for (s, t, coef) in ((k, j, B[k, i]), (i, k, B[k, j])):
                if s == t or coef == 0.0:
                    continue
                if s < t:
                    M[_INDEX[(s, t)], col] += coef
                else:
                    M[_INDEX[(t, s)], col] -= coef
    return M


def induced_derivative(B: np.ndarray, P) -> np.ndarray:
    p = P.coords if isinstance(P, PluckerPoint) else np.asarray(P, float)
    return induced_matrix(B) @ p


def second_compound(Phi: np.ndarray) -> np.ndarray:
    """C2(Phi): how a linear map of R^4 acts on Plücker coordinates."""
    Phi = np.asarray(Phi, float)
    C = np.empty((6, 6))
    for r, (i, j) in enumerate(PAIRS):
        for s, (k, l) in enumerate(PAIRS):
            C[r, s] = Phi[i, k] * Phi[j, l] - Phi[i, l] * Phi[j, k]
    return C


def detection_form(P, Q) -> float:
    """det[v1 v2 w1 w2] written in the two sets of Plücker coordinates."""
    if isinstance(P, PluckerPoint) and isinstance(Q, PluckerPoint) and P.basis_tag != Q.basis_tag:
        raise BasisMismatch(f"{P.basis_tag} vs {Q.basis_tag}")
    p = P.coords if isinstance(P, PluckerPoint) else np.asarray(P, float)
    q = Q.coords if isinstance(Q, PluckerPoint) else np.asarray(Q, float)
    return float(p[0] * q[5] - p[1] * q[4] + p[2] * q[3] + p[3] * q[2] - p[4] * q[1] + p[5] * q[0])


def intersection(F1: np.ndarray, F2: np.ndarray, rel_tol: float = 1e-7):
    """Dimension and basis of span(F1) ∩ span(F2) from the stacked 4x4 matrix.

    Returns ``(dim, vectors)`` with vectors given as combinations of F1's
    columns (shape (4, dim)).
    """
    Q1, _ = np.linalg.qr(np.asarray(F1, float))
    Q2, _ = np.linalg.qr(np.asarray(F2, float))
    M = np.hstack([Q1, -Q2])
    _, s, vt = np.linalg.svd(M)
    dim = int(np.sum(s < rel_tol * s[0]))
    null = vt[4 - dim:].T if dim else np.zeros((4, 0))
    vecs = Q1 @ null[:2]
    if dim:
        vecs /= np.linalg.norm(vecs, axis=0, keepdims=True)
    return dim, vecs, s


def change_basis(obj, new_basis):
    """Express a frame or Plücker point in the basis given by the columns of ``new_basis``."""
    Bm = np.asarray(new_basis, float).reshape(4, 4)
    if np.linalg.cond(Bm) > 1e12:
        raise SingularBasis("new basis is (numerically) singular")
    Binv = np.linalg.inv(Bm)
    if isinstance(obj, LagrangianFrame):
        return LagrangianFrame(Binv @ obj.cols, "eigenbasis", lagrangian=False)
    if isinstance(obj, PluckerPoint):
        return PluckerPoint(second_compound(Binv) @ obj.coords, "eigenbasis")
    arr = np.asarray(obj, float)
    if arr.shape == (4, 2):
        return Binv @ arr
    if arr.shape == (6,):
        return second_compound(Binv) @ arr
    raise TypeError("expected a frame or Plücker coordinates")


# ---------------------------------------------------------------- propagation

_G = math.sqrt(3.0) / 6.0


def magnus_step(A_of_z: Callable[[float], np.ndarray], z: float, h: float) -> np.ndarray:
    """Fourth-order Magnus propagator over [z, z+h] (two Gauss nodes)."""
    A1 = A_of_z(z + (0.5 - _G) * h)
    A2 = A_of_z(z + (0.5 + _G) * h)
    Om = 0.5 * h * (A1 + A2) + (math.sqrt(3.0) / 12.0) * h * h * (A2 @ A1 - A1 @ A2)
    return expm(Om)


@dataclass
class PluckerPath:
    """Unit-norm Plücker samples with continuously chosen sign.

    ``log_scale[k]`` is log of the norm that was divided out up to sample k,
    so ``exp(log_scale) * coords`` is the unnormalized bivector.
    """

    z: np.ndarray
    coords: np.ndarray
    log_scale: np.ndarray
    A_of_z: Callable = field(repr=False, default=None)
    n_rejected: int = 0

    def point(self, k: int) -> PluckerPoint:
        return PluckerPoint(self.coords[k])

    def max_lagrangian_residual(self) -> float:
        return float(np.max(np.abs(self.coords[:, 1] - self.coords[:, 4])))

    def max_relation_residual(self) -> float:
        c = self.coords
        return float(np.max(np.abs(c[:, 0] * c[:, 5] - c[:, 1] * c[:, 4] + c[:, 2] * c[:, 3])))

    def at(self, z: float) -> np.ndarray:
        """Unit-norm coordinates at an arbitrary z, re-propagated from the nearest earlier sample."""
        return _resample(self.z, self.coords, self.A_of_z, z, second_compound)


def _resample(zs, xs, A_of_z, z, lift, h_target: float = 0.05):
    forward = zs[-1] >= zs[0]
    key = zs if forward else -zs
    k = int(np.searchsorted(key, z if forward else -z, side="right")) - 1
    k = min(max(k, 0), zs.size - 1)
    z0, x0 = float(zs[k]), xs[k]
    if z == z0:
        return x0.copy()
    n = max(1, int(math.ceil(abs(z - z0) / h_target)))
    h = (z - z0) / n
    x = np.array(x0, float)
    for i in range(n):
        x = lift(magnus_step(A_of_z, z0 + i * h, h)) @ x
        x /= np.linalg.norm(x)
    return x


def _identity_lift(Phi):
    return Phi


def integrate_projective(A_of_z: Callable[[float], np.ndarray], x0: np.ndarray, z_span, lift=_identity_lift,
                         tol: float = 1e-10, h0: float = 0.05, h_min: float = 1e-6, h_max: float = 5.0,
                         z_eval=None, max_steps: int = 200000):
    """Adaptive Magnus integration of ``x' = A x`` (or a lifted version) with unit renormalization.

    ``lift`` maps the 4x4 step propagator to the operator acting on ``x``
    (identity for vectors, the second compound for Plücker coordinates).
    The step is controlled by comparing one step with two half steps on
    the projective point.  Returns ``(z, X, log_scale, n_rejected)``.
    """
    x = np.array(x0, float)
    z0, z1 = float(z_span[0]), float(z_span[1])
    direction = 1.0 if z1 >= z0 else -1.0
    stops = np.array([z1]) if z_eval is None else np.unique(np.append(np.asarray(z_eval, float), z1))
    stops = stops[(stops - z0) * direction > 0]
    stops = stops[np.argsort(direction * stops)]
    nrm = np.linalg.norm(x)
    x = x / nrm
    zs, xs, logs = [z0], [x.copy()], [math.log(nrm)]
    z, h, log_s = z0, h0, math.log(nrm)
    rejected = 0
    si = 0
    for _ in range(max_steps):
        if si >= stops.size:
            break
        target = stops[si]
        remaining = abs(target - z)
        hs = min(h, remaining)
        big = lift(magnus_step(A_of_z, z, direction * hs)) @ x
        half = lift(magnus_step(A_of_z, z, direction * hs / 2)) @ x
        small = lift(magnus_step(A_of_z, z + direction * hs / 2, direction * hs / 2)) @ half
        n_small = np.linalg.norm(small)
        err = np.linalg.norm(big / np.linalg.norm(big) - small / n_small) / 15.0
        if not np.isfinite(err):
            raise IntegrationFailure(f"non-finite state at z={z}")
        if err <= tol or hs <= h_min:
            if hs <= h_min and err > tol:
                raise IntegrationFailure(f"step size underflow at z={z:.6g} (err {err:.2e})")
            z = target if hs == remaining else z + direction * hs
            log_s += math.log(n_small)
            x = small / n_small
            zs.append(z)
            xs.append(x.copy())
            logs.append(log_s)
            if z == target:
                si += 1
            if hs == h:
                h = min(h_max, hs * min(3.0, max(0.3, 0.9 * (tol / max(err, 1e-300)) ** 0.2)))
        else:
            rejected += 1
            h = max(h_min, hs * max(0.2, 0.9 * (tol / err) ** 0.2))
    else:
        raise IntegrationFailure("maximum number of steps exceeded")
    return np.array(zs), np.array(xs), np.array(logs), rejected


def integrate_plucker(A_of_z: Callable[[float], np.ndarray], P0, z_span, tol: float = 1e-10,
                      h0: float = 0.05, h_min: float = 1e-6, h_max: float = 5.0,
                      z_eval: np.ndarray | None = None, lagrangian: bool = True,
                      max_steps: int = 200000) -> PluckerPath:
    """Adaptive renormalized integration of the induced flow on Plücker coordinates.

    Each step maps the coordinates through the second compound of a Magnus
    propagator, so the Plücker relation and (when ``A + c/2 I`` is
    Hamiltonian) the Lagrangian condition hold to rounding.  ``z_eval``
    points are forced to be step endpoints.
    """
    p = P0.coords if isinstance(P0, PluckerPoint) else np.asarray(P0, float)
    zs, ps, logs, rej = integrate_projective(A_of_z, p, z_span, lift=second_compound, tol=tol, h0=h0,
                                             h_min=h_min, h_max=h_max, z_eval=z_eval, max_steps=max_steps)
    path = PluckerPath(zs, ps, logs, A_of_z, rej)
    if lagrangian and path.max_lagrangian_residual() > 1e-8:
        raise IntegrationFailure(f"Lagrangian residual {path.max_lagrangian_residual():.2e} exceeds 1e-8")
    return path


@dataclass
class FramePath:
    """Frame samples, orthonormalized each step; ``log_det`` tracks the area scale."""

    z: np.ndarray
    frames: np.ndarray  # (n, 4, k)
    log_det: np.ndarray


def integrate_frame(A_of_z: Callable[[float], np.ndarray], F0: np.ndarray, z_span, h: float = 0.05,
                    z_eval: np.ndarray | None = None, orthonormalize: bool = True) -> FramePath:
    """Fixed-step Magnus integration of column solutions, QR-renormalized every step."""
    F = np.array(F0, float)
    if F.ndim == 1:
        F = F[:, None]
    z0, z1 = float(z_span[0]), float(z_span[1])
    grid = np.linspace(z0, z1, max(2, int(math.ceil(abs(z1 - z0) / h)) + 1))
    if z_eval is not None:
        grid = np.unique(np.concatenate([grid, np.asarray(z_eval, float)]))
        grid = grid if z1 >= z0 else grid[::-1]
        grid = grid[(grid - z0) * np.sign(z1 - z0 or 1) >= 0]
    frames, logs = [F.copy()], [0.0]
    ld = 0.0
    for za, zb in zip(grid[:-1], grid[1:]):
        F = magnus_step(A_of_z, za, zb - za) @ F
        if orthonormalize:
            Q, R = np.linalg.qr(F)
            sgn = np.sign(np.diag(R))
            sgn[sgn == 0] = 1.0
            Q, R = Q * sgn, (R.T * sgn).T
            ld += float(np.sum(np.log(np.abs(np.diag(R)))))
            F = Q
        frames.append(F.copy())
        logs.append(ld)
    return FramePath(grid, np.array(frames), np.array(logs))
