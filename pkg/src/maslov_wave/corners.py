"""Corner problems at the landing and jump-off points, and the fixed points of the induced flow on Λ(2).

All objects here live at eps = 0 with c = c*. Plücker coordinates are taken in the
layer eigenbasis (eta1, eta2, eta3, eta4) at the corner, ordered (12, 13, 14, 23, 24, 34).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core_dynamics import Params, cubic_eval, linearization
from .grassmann import change_basis, detection_form, minors, symplectic_form
from .singular import (
    corner_points,
    jump_off_u,
    k_closed_form,
    layer_eigenpairs,
    layer_eigenvalues,
    singular_speed,
)

SQ2 = math.sqrt(2.0)
LAGRANGIAN_PAIRS = ((0, 1), (0, 2), (1, 3), (2, 3))
PAIR_NAMES = ("X12", "X13", "X24", "X34")


class CornerAssertionError(AssertionError):
    """A corner inequality or orientation check failed."""


def _eps0(p: Params) -> Params:
    return p.with_(eps=0.0, c=singular_speed(p.a))


def stable_plane_limit(p: Params) -> np.ndarray:
    """eps -> 0 limit of V^s(0): slow kernel direction and fast stable direction at the origin."""
    a, g = p.a, p.gamma
    c = singular_speed(a)
    return np.column_stack([[1.0, -a, 0.0, -(1.0 + g * a) / c], [1.0, 0.0, -a * SQ2, SQ2]])


def landing_basis(p: Params, u: float = 1.0) -> np.ndarray:
    """Eigenbasis at a landing corner, with eta4 divided by f'(u) so that its u-entry is 1."""
    E = layer_eigenpairs(u, _eps0(p)).eta.copy()
    E[:, 3] /= cubic_eval(u, p.a)[1]
    return E


def nu_basis(p: Params) -> np.ndarray:
    """Coefficients (in the landing eigenbasis) of a spanning pair for V^s(0)."""
    a = p.a
    c = singular_speed(a)
    nu1 = [-2.0, 0.0, 2.0 * c * (2 * a - 3), (2 * a - 1) * (a - 1)]
    nu2 = [2.0 * (2 * a - 1), a * (3 - 2 * a), (2 * a - 1) * (2 * a - 3) / (-c), 1 - 2 * a]
    return np.column_stack([nu1, nu2])


def corner_h_closed(a: float) -> float:
    return 8 * a * (1 - a) * math.sqrt((1 - 2 * a) * (3 - 2 * a)) - 4 * a * (1 - 2 * a) * (3 - 2 * a)


@dataclass
class LandingReport:
    corner: str
    a: float
    u: float
    k: float
    k_closed: float
    omega_23: float
    W_plus: list
    W_minus: list
    W_lagrangian_residual: float
    nu_span_angle: float
    A: float
    B: float
    C: float
    h_min: float
    h_min_closed: float
    h_argmin: float
    h_min_sampled: float
    conjugate_points: int


@dataclass
class JumpOffReport:
    a: float
    u_tau: float
    entrance_coefficient: float
    exit_coefficient: float
    path: str
    det_in: float
    det_out: float
    det_in_closed: float
    det_out_closed: float
    beta_min_sampled: float
    growth_rate: float
    conjugate_points: int


def _scaled_plucker(P: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, float]:
    """Rescale ``P`` onto ``target``; also return the sine of the projective angle between them."""
    s = float(P @ target) / float(P @ P)
    Q = s * P
    angle = np.linalg.norm(Q - target) / np.linalg.norm(target)
    return Q, float(angle)


def landing_corner(p: Params, which: str = "p", z_grid=None) -> LandingReport:
    """Heteroclinic passage X13 -> X24 at a landing corner, tested against V^s(0)."""
    a = p.a
    u = 1.0 if which == "p" else jump_off_u(a) - 1.0
    E = landing_basis(p, u)
    e1, e2, e3, e4 = E.T
    k = -symplectic_form(e2, e3) / symplectic_form(e1, e4)

    W = {s: np.column_stack([e1 + s * e2, e3 + s * k * e4]) for s in (1.0, -1.0)}
    W_coords = {s: minors(change_basis(W[s], E)) for s in W}
    lag = max(abs(symplectic_form(*W[s].T)) for s in W)

    # V^s(0) in the eigenbasis, rescaled onto nu1 ^ nu2 so that A, B, C carry their natural size
    Vs_eta = change_basis(stable_plane_limit(p), E)
    P, angle = _scaled_plucker(minors(Vs_eta), minors(nu_basis(p)))
    p12, p13, p14, p23, p24, p34 = P
    A, B, C = -p24, -(k * p23 + p14), -k * p13
    if min(A, B, C) <= 0:
        raise CornerAssertionError(f"coefficient sign pattern broken: A={A}, B={B}, C={C}")
    h_min = 2.0 * math.sqrt(A * C) - B
    z_star = math.log(A / C) / SQ2
    zs = np.linspace(z_star - 30, z_star + 30, 6001) if z_grid is None else np.asarray(z_grid)
    h = A * np.exp(-zs / SQ2) - B + C * np.exp(zs / SQ2)
    # direct detection form along the explicit path, in the same basis
    g_plus = np.column_stack([np.zeros_like(zs), np.exp(-zs / SQ2), k * np.ones_like(zs),
                              np.ones_like(zs), k * np.exp(zs / SQ2), np.zeros_like(zs)])
    beta = np.array([detection_form(g, P) for g in g_plus])
    if not np.allclose(beta, h, rtol=1e-9, atol=1e-9 * np.max(np.abs(h))):
        raise CornerAssertionError("detection form along the connecting path disagrees with h(z)")
    if h_min <= 0 or np.any(h <= 0):
        raise CornerAssertionError(f"h has a zero: min h = {h_min}")
    return LandingReport(
        corner=which, a=a, u=u, k=k, k_closed=SQ2 / (3 - 2 * a), omega_23=symplectic_form(e2, e3),
        W_plus=W_coords[1.0].tolist(), W_minus=W_coords[-1.0].tolist(), W_lagrangian_residual=lag,
        nu_span_angle=angle, A=A, B=B, C=C, h_min=h_min, h_min_closed=corner_h_closed(a),
        h_argmin=z_star, h_min_sampled=float(h.min()), conjugate_points=0,
    )


def jump_off_basis(p: Params) -> np.ndarray:
    """Eigenbasis at q, with the slow eigenvector rescaled to have v-entry 1."""
    return layer_eigenpairs(jump_off_u(p.a), _eps0(p)).eta


def reference_plane_limit(u_tau: float, p: Params) -> np.ndarray:
    a, g = p.a, p.gamma
    c = singular_speed(a)
    fp = cubic_eval(u_tau, a)[1]
    mu1, _ = layer_eigenvalues(u_tau, c, a)
    return np.column_stack([[1.0, fp, 0.0, (g * fp - 1.0) / c], [fp, 0.0, fp * mu1, mu1]])


def jump_off_dets_closed(u_tau: float, p: Params) -> tuple[float, float]:
    a = p.a
    c = singular_speed(a)
    fp = cubic_eval(u_tau, a)[1]
    mu1, _ = layer_eigenvalues(u_tau, c, a)
    d = -fp - a
    Q = SQ2 / 2 - mu1
    return d * (d * a * SQ2 + 2 * Q * a * a - d * mu1) / (-2 * a * c), fp * fp * a * (SQ2 - 2 * mu1) / 2


def jump_off_corner(p: Params, u_tau: float, z_grid=None) -> JumpOffReport:
    """Passage X24 -> X34 at q, tested against the reference plane E^s(0, tau) in its fast-slow limit."""
    a, g = p.a, p.gamma
    c = singular_speed(a)
    lo = 2.0 / 3.0 * (a - 0.5)
    if not (lo < u_tau < 0):
        raise ValueError(f"u_tau={u_tau} outside ({lo}, 0)")
    E = jump_off_basis(p)
    e1, e2, e3, e4 = E.T
    mu = layer_eigenpairs(jump_off_u(a), _eps0(p)).mu
    us = jump_off_u(a)
    # slow tangent at q on the right branch, oriented by the slow flow dv/dz = eps (g v - u)/c
    fp = cubic_eval(us, a)[1]
    vs = corner_points(p)["q"][1]
    tangent = np.array([1.0 / fp, 1.0, 0.0, (g - 1.0 / fp) / c]) * np.sign((g * vs - us) / c)
    coef = np.linalg.solve(E, tangent)
    entrance = float(coef[1])
    if entrance <= 0 or np.linalg.norm(np.delete(coef, 1)) > 1e-14 * np.linalg.cond(E) * abs(entrance):
        raise CornerAssertionError(f"entrance direction is not a positive multiple of eta2: {coef}")
    # the back leaves q with y-offset moving by c K in the eta3 = e4 direction
    exit_coef = c * k_closed_form(a)
    path = "gamma-" if exit_coef < 0 else "gamma+"
    sgn = -1.0 if exit_coef < 0 else 1.0

    R = reference_plane_limit(u_tau, p)
    d_in = float(np.linalg.det(np.column_stack([R, e2, e4])))
    d_out = float(np.linalg.det(np.column_stack([R, sgn * e3, e4])))
    ci, co = jump_off_dets_closed(u_tau, p)
    rate = float(mu[2] - mu[1])
    zs = np.linspace(-60.0, 60.0, 2401) if z_grid is None else np.asarray(z_grid)
    # beta along (eta2 + sgn e^{rate z} eta3) ^ eta4, evaluated through Plücker coordinates
    Rc = minors(change_basis(R, E))
    beta = np.array([detection_form(np.array([0, 0, 0, 0, 1.0, sgn * math.exp(rate * z)]), Rc) for z in zs])
    beta *= np.linalg.det(E)
    if d_in <= 0 or d_out <= 0 or np.any(beta <= 0):
        raise CornerAssertionError(f"jump-off determinants not positive: {d_in}, {d_out}")
    return JumpOffReport(
        a=a, u_tau=u_tau, entrance_coefficient=entrance, exit_coefficient=exit_coef, path=path,
        det_in=d_in, det_out=d_out, det_in_closed=ci, det_out_closed=co,
        beta_min_sampled=float(beta.min()), growth_rate=rate, conjugate_points=0,
    )


def corner_diagnostics(which: str, params: Params, u_tau: float = -0.005) -> dict:
    """Report for corner ``which`` in {'p', 'q', 'q_hat'}; raises CornerAssertionError on failure."""
    if which in ("p", "q_hat"):
        return asdict(landing_corner(params, which))
    if which == "q":
        return asdict(jump_off_corner(params, u_tau))
    raise ValueError(f"unknown corner {which!r}")


def a_grid(n: int = 50, lo: float = 0.01, hi: float = 0.49) -> np.ndarray:
    return np.linspace(lo, hi, n)


def corner_sweep(a_values=None, gamma: float = 1.0, u_tau_fracs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict:
    """Both corner analyses over an a-grid; u_tau samples are fractions of (2/3(a-1/2), 0)."""
    a_values = a_grid() if a_values is None else np.asarray(a_values)
    landing, jump = [], []
    for a in a_values:
        p = Params(a=float(a), gamma=gamma, eps=1e-4)
        landing.append(asdict(landing_corner(p)))
        lo = 2.0 / 3.0 * (a - 0.5)
        for f in u_tau_fracs:
            jump.append(asdict(jump_off_corner(p, float(lo * f))))
    return {"landing": landing, "jump_off": jump}


# ---------------------------------------------------------------- fixed points of the induced flow


@dataclass
class FixedPoint:
    name: str
    lagrangian: bool
    omega: float
    rates: list
    unstable_dim: int
    stable_dim: int
    hyperbolic: bool
    fixed_residual: float
    invariance_residual: float


@dataclass
class ShaymanReport:
    u: float
    eigenvalues: list
    points: list = field(default_factory=list)
    non_lagrangian: dict = field(default_factory=dict)

    def unstable_dims(self) -> dict:
        return {fp.name: fp.unstable_dim for fp in self.points}


def _chart_linearization(B: np.ndarray, E: np.ndarray, i: int, j: int):
    """Linear part of the Riccati flow at span{eta_i, eta_j}, restricted to the tangent of Λ(2).

    Nearby planes are span{eta_i + m00 eta_k + m10 eta_l, eta_j + m01 eta_k + m11 eta_l};
    the chart variable is vec(M) in column-major order.
    """
    k, l = [m for m in range(4) if m not in (i, j)]
    perm = [i, j, k, l]
    Bp = B[np.ix_(perm, perm)]
    B11, B21, B22 = Bp[:2, :2], Bp[2:, :2], Bp[2:, 2:]
    L = np.kron(np.eye(2), B22) - np.kron(B11.T, np.eye(2))
    # linearized omega(v_i, v_j) in the chart
    om = lambda x, y: symplectic_form(E[:, x], E[:, y])
    row = np.array([om(k, j), om(l, j), om(i, k), om(i, l)])
    _, _, Vt = np.linalg.svd(row[None, :])
    N = Vt[1:].T  # orthonormal kernel, 4 x 3
    R = N.T @ L @ N
    inv_res = float(np.linalg.norm(L @ N - N @ R) / max(np.linalg.norm(L), 1.0))
    return R, float(np.linalg.norm(B21)), inv_res


def shayman_classification(u: float, params: Params, hyper_tol: float = 1e-9) -> ShaymanReport:
    """Unstable dimensions of the Lagrangian eigenplanes X_ij for the eps = 0 system frozen at ``u``."""
    p0 = _eps0(params)
    eig = layer_eigenpairs(u, p0)
    mu = eig.mu
    if np.min(np.diff(np.sort(mu))) < 1e-10:
        raise ValueError(f"eigenvalue collision at u={u}: {mu}")
    order = np.argsort(mu)
    E = eig.eta[:, order]
    mu = mu[order]
    A = linearization(u, 0.0, p0)
    B = np.linalg.solve(E, A @ E)
    rep = ShaymanReport(u=u, eigenvalues=mu.tolist())
    for (i, j), name in zip(LAGRANGIAN_PAIRS, PAIR_NAMES):
        omega = symplectic_form(E[:, i], E[:, j])
        R, fixed_res, inv_res = _chart_linearization(B, E, i, j)
        rates = np.sort(np.linalg.eigvals(R).real)
        rep.points.append(FixedPoint(
            name=name, lagrangian=abs(omega) < 1e-12, omega=float(omega), rates=rates.tolist(),
            unstable_dim=int(np.sum(rates > hyper_tol)), stable_dim=int(np.sum(rates < -hyper_tol)),
            hyperbolic=bool(np.all(np.abs(rates) > hyper_tol)), fixed_residual=fixed_res,
            invariance_residual=inv_res,
        ))
    for i, j in ((0, 3), (1, 2)):
        rep.non_lagrangian[f"X{i + 1}{j + 1}"] = float(symplectic_form(E[:, i], E[:, j]))
    return rep
