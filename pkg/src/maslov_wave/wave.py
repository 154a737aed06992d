"""Traveling pulse (and front) at eps > 0 by collocation with projection boundary conditions.

The unknowns are the states on a non-uniform z-mesh plus the speed ``c``.
Interior equations are Hermite-Simpson collocation; the ends are pinned to
the unstable / stable subspaces of the rest-state matrix, and translation is
fixed by ``u(0) = 1/2`` on the front.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicHermiteSpline
from scipy.sparse.linalg import splu

from .core_dynamics import Params, ParameterError, asymptotic_matrix
from .singular import (
    CriticalBranch,
    corner_points,
    front_profile,
    front_y,
    jump_off_u,
    jump_off_v,
    singular_speed,
    slow_flow_rhs,
)

log = logging.getLogger(__name__)


class NewtonDivergence(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual


class DomainTooShort(RuntimeError):
    pass


# ---------------------------------------------------------------- field with speed


def _field(U: np.ndarray, c: float, p: Params) -> np.ndarray:
    """Vector field on an array of states with shape (n, 4)."""
    u, v, w, y = U.T
    f = u * (1.0 - u) * (u - p.a)
    return np.column_stack([w, p.eps * y, -c * w - f + v, -c * y + p.gamma * v - u])


def _field_jac(U: np.ndarray, c: float, p: Params) -> np.ndarray:
    u = U[:, 0]
    fp = -3.0 * u * u + 2.0 * (1.0 + p.a) * u - p.a
    J = np.zeros((U.shape[0], 4, 4))
    J[:, 0, 2] = 1.0
    J[:, 1, 3] = p.eps
    J[:, 2, 0] = -fp
    J[:, 2, 1] = 1.0
    J[:, 2, 2] = -c
    J[:, 3, 0] = -1.0
    J[:, 3, 1] = p.gamma
    J[:, 3, 3] = -c
    return J


def _field_dc(U: np.ndarray) -> np.ndarray:
    out = np.zeros_like(U)
    out[:, 2] = -U[:, 2]
    out[:, 3] = -U[:, 3]
    return out


# ---------------------------------------------------------------- boundary subspaces


@dataclass
class BoundarySubspaces:
    """Unstable plane (left end) and stable plane (right end) of the rest-state matrix."""

    unstable: np.ndarray  # 4x2 orthonormal columns
    stable: np.ndarray
    mu: np.ndarray
    left_rows_stable: np.ndarray  # 2x4: annihilate the unstable plane
    left_rows_unstable: np.ndarray  # 2x4: annihilate the stable plane

    def projector(self, which: str) -> np.ndarray:
        """Spectral projector onto the named invariant plane."""
        X = self.unstable if which == "unstable" else self.stable
        rows = self.left_rows_unstable if which == "unstable" else self.left_rows_stable
        # P = X (rows X)^-1 rows, with rows annihilating the complementary plane.
        return X @ np.linalg.solve(rows @ X, rows)


def boundary_projectors(p: Params, lam: float = 0.0, hyperbolic_tol: float = 1e-12) -> BoundarySubspaces:
    """Invariant planes of the rest-state matrix at real ``lam``.

    Uses a real Schur decomposition, so it stays well defined when two
    eigenvalues come close.
    """
    if p.eps == 0.0 and lam != 0.0:
        raise ZeroDivisionError("lam/eps entry undefined")
    A = asymptotic_matrix(float(lam), p)
    mu = np.linalg.eigvals(A)
    if np.min(np.abs(mu.real)) <= hyperbolic_tol:
        raise ParameterError("rest state is not hyperbolic")
    n_pos = int(np.sum(mu.real > 0))
    if n_pos != 2:
        raise ParameterError(f"expected a 2/2 split of the rest spectrum, got {n_pos} unstable")
    from scipy.linalg import schur

    _, Zu, _ = schur(A, output="real", sort="rhp")
    _, Zs, _ = schur(A, output="real", sort="lhp")
    unstable, stable = Zu[:, :2], Zs[:, :2]
    # Rows annihilating a plane: left-null space of the plane's basis.
    rows_kill_unstable = np.linalg.svd(unstable.T)[2][2:]  # orthogonal complement of unstable
    rows_kill_stable = np.linalg.svd(stable.T)[2][2:]
    # Left invariant subspaces: rows r with r A = nu r spanning the stable-eigen left space
    # annihilate the unstable plane.
    _, Zlu, _ = schur(A.T, output="real", sort="rhp")
    _, Zls, _ = schur(A.T, output="real", sort="lhp")
    left_stable = Zls[:, :2].T  # left eigen-rows for stable eigenvalues: kill unstable plane
    left_unstable = Zlu[:, :2].T
    del rows_kill_unstable, rows_kill_stable
    return BoundarySubspaces(
        unstable=unstable, stable=stable, mu=np.sort(mu.real),
        left_rows_stable=left_stable, left_rows_unstable=left_unstable,
    )


# ---------------------------------------------------------------- profile container


@dataclass
class WaveProfile:
    """Solved wave on a mesh, with a C1 Hermite interpolant."""

    z: np.ndarray
    U: np.ndarray  # shape (n, 4)
    c: float
    params: Params
    residual: float
    kind: str = "pulse"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self._dU = _field(self.U, self.c, self.params_c)
        self._interp = CubicHermiteSpline(self.z, self.U, self._dU, axis=0)

    @property
    def params_c(self) -> Params:
        return self.params.with_(c=self.c)

    @property
    def eps(self) -> float:
        return self.params.eps

    @property
    def c_eps(self) -> float:
        return self.c

    def __call__(self, z) -> np.ndarray:
        return self._interp(z)

    def derivative(self, z) -> np.ndarray:
        """Velocity ``phi'(z)`` evaluated through the vector field at the interpolated state."""
        U = np.atleast_2d(self._interp(z))
        dU = _field(U, self.c, self.params_c)
        return dU if np.ndim(z) else dU[0]

    def u_hat(self, z) -> np.ndarray:
        return self._interp(z)[..., 0]

    @property
    def span(self) -> tuple[float, float]:
        return float(self.z[0]), float(self.z[-1])

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["z", "u", "v", "w", "y"])
            for zi, row in zip(self.z, self.U):
                wr.writerow([f"{zi:.17g}"] + [f"{x:.17g}" for x in row])


# ---------------------------------------------------------------- seed


def _slow_table(branch, v0, v1, pc, n=4000):
    """``(v, zeta)`` along a slow passage, ``zeta`` the slow time from ``v0``."""
    vv = np.linspace(v0, v1, n)
    rates = np.array([slow_flow_rhs(v, branch, pc) for v in vv])
    inv = 1.0 / rates
    zeta = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(vv))])
    return vv, zeta


def _on_branch(branch, v, c, g):
    u = np.array([branch.inverse(x) for x in np.atleast_1d(v)])
    return np.column_stack([u, v, np.zeros_like(u), (g * v - u) / c])


def pulse_seed(p: Params, z_left: float = -40.0, v_end_frac: float = 1e-3, n_dense: int = 20001,
               layer_half: float = 12.0):
    """Singular-orbit template laid out on the fast z scale for the given ``eps``.

    Returns ``(z, U)`` on a dense uniform grid with the front centred at z = 0.
    """
    if p.eps <= 0:
        raise ParameterError("seed needs eps > 0 to place slow segments")
    a, g, eps = p.a, p.gamma, p.eps
    c = singular_speed(a)
    pc = p.with_(c=c)
    vs = jump_off_v(a)
    q = corner_points(p)["q"]
    right, left = CriticalBranch("right", a), CriticalBranch("left", a)

    vR, zetaR = _slow_table(right, 0.0, vs, pc)
    vL, zetaL = _slow_table(left, vs, v_end_frac * vs, pc, n=8000)
    t_right, t_left = zetaR[-1] / eps, zetaL[-1] / eps
    z_back = t_right + layer_half
    z_tail = z_back + layer_half
    z = np.linspace(z_left, z_tail + t_left, n_dense)
    U = np.zeros((z.size, 4))

    # front plus the slow drift it hands over to (additive composite)
    m = z < z_back - layer_half
    zf = z[m]
    uf, wf = front_profile(zf)
    front = np.column_stack([uf, np.zeros_like(uf), wf, front_y(zf, a, closed=True)])
    vr = np.interp(np.maximum(zf, 0.0) * eps, zetaR, vR)
    drift = _on_branch(right, vr, c, g) - corner_points(p)["p"]
    U[m] = front + (zf > 0)[:, None] * drift

    m = (z >= z_back - layer_half) & (z < z_tail)
    s = z[m] - z_back
    ub, wb, yb = back_profile_arrays(s, a)
    U[m] = np.column_stack([ub, np.full_like(ub, vs), wb, q[3] + yb])

    m = z >= z_tail
    vl = np.interp((z[m] - z_tail) * eps, zetaL, vL)
    U[m] = _on_branch(left, vl, c, g)
    return z, U


def back_profile_arrays(s, a):
    uf, wf = front_profile(s)
    return jump_off_u(a) - uf, -wf, -front_y(s, a, closed=True)


def front_seed(p: Params, z_left: float = -40.0, z_right: float = 60.0, n_dense: int = 4001):
    """Nagumo-front template for the large-gamma heteroclinic."""
    a, g = p.a, p.gamma
    c = singular_speed(a)
    z = np.linspace(z_left, z_right, n_dense)
    uf, wf = front_profile(z)
    yf = front_y(z, a, closed=True)
    Q = front_target(p)
    U = np.column_stack([uf * Q[0] / 1.0, uf * Q[1], wf, yf * (1 - uf) * 0 + yf])
    # y relaxes to (gamma v - u)/c on the right branch; blend towards Q.
    U[:, 3] = yf + uf * ((g * Q[1] - Q[0]) / c + 1.0 / c)
    return z, U


# ---------------------------------------------------------------- mesh


def build_mesh(z_dense: np.ndarray, U_dense: np.ndarray, c: float, p: Params, resolution: float = 0.12,
               h_min: float = 0.02, h_max: float | None = None, max_ratio: float = 1.15) -> np.ndarray:
    """Non-uniform mesh that concentrates nodes where the profile bends.

    Local step ~ ``resolution * |U''|^(-1/4)``, clipped to [h_min, h_max] and
    graded so neighbouring steps differ by at most ``max_ratio``.  The node
    z = 0 is always included.
    """
    if h_max is None:
        h_max = float(np.clip(0.04 / max(p.eps, 1e-12), 1.0, 8.0))
    F = _field(U_dense, c, p)
    J = _field_jac(U_dense, c, p)
    U2 = np.einsum("nij,nj->ni", J, F)
    mag = np.linalg.norm(U2, axis=1) + np.linalg.norm(F, axis=1) * 1e-2
    h_loc = np.clip(resolution * (mag + 1e-300) ** -0.25, h_min, h_max)
    # Grade: limit growth between neighbours (forward and backward sweeps on the dense grid).
    dz = np.diff(z_dense)
    for _ in range(2):
        for i in range(1, h_loc.size):
            h_loc[i] = min(h_loc[i], h_loc[i - 1] + (max_ratio - 1.0) * dz[i - 1] * h_loc[i - 1] / max(h_loc[i - 1], 1e-12) * 1.0)
        for i in range(h_loc.size - 2, -1, -1):
            h_loc[i] = min(h_loc[i], h_loc[i + 1] + (max_ratio - 1.0) * dz[i])
    density = 1.0 / h_loc
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * dz)])
    i0 = int(np.searchsorted(z_dense, 0.0))
    c0 = np.interp(0.0, z_dense, cum)
    n_left = max(4, int(math.ceil(c0)))
    n_right = max(4, int(math.ceil(cum[-1] - c0)))
    left = np.interp(np.linspace(0.0, c0, n_left + 1), cum, z_dense)
    right = np.interp(np.linspace(c0, cum[-1], n_right + 1), cum, z_dense)
    del i0
    mesh = np.concatenate([left[:-1], [0.0], right[1:]])
    return mesh


# ---------------------------------------------------------------- collocation Newton


@dataclass
class _Problem:
    p: Params
    z: np.ndarray
    left_rows: np.ndarray  # constraint rows at the left end (2x4), depend on c
    right_rows: np.ndarray
    phase_index: int
    bc_rows_fn: object  # c -> (left_rows, right_rows)
    right_state: np.ndarray | None = None  # pulse: None (origin), front: fixed point Q


def _residual_and_jac(prob: _Problem, X: np.ndarray, want_jac: bool = True):
    p = prob.p
    n = prob.z.size
    U = X[:-1].reshape(n, 4)
    c = X[-1]
    h = np.diff(prob.z)[:, None]
    F = _field(U, c, p)
    Fc = _field_dc(U)
    Ui, Uj = U[:-1], U[1:]
    Fi, Fj = F[:-1], F[1:]
    Um = 0.5 * (Ui + Uj) + h / 8.0 * (Fi - Fj)
    Fm = _field(Um, c, p)
    R = Uj - Ui - h / 6.0 * (Fi + 4.0 * Fm + Fj)
    Lr, Rr = prob.bc_rows_fn(c)
    right_ref = np.zeros(4) if prob.right_state is None else prob.right_state
    bc = np.concatenate([Lr @ U[0], Rr @ (U[-1] - right_ref), [U[prob.phase_index, 0] - 0.5]])
    res = np.concatenate([R.ravel(), bc])
    if not want_jac:
        return res, None
    J = _field_jac(U, c, p)
    Jm = _field_jac(Um, c, p)
    Ji, Jj = J[:-1], J[1:]
    I4 = np.eye(4)
    hh = h[:, :, None]
    dUm_dUi = 0.5 * I4 + hh / 8.0 * Ji
    dUm_dUj = 0.5 * I4 - hh / 8.0 * Jj
    dR_dUi = -I4 - hh / 6.0 * (Ji + 4.0 * Jm @ dUm_dUi)
    dR_dUj = I4 - hh / 6.0 * (Jj + 4.0 * Jm @ dUm_dUj)
    Fci, Fcj = Fc[:-1], Fc[1:]
    dUm_dc = h / 8.0 * (Fci - Fcj)
    Fcm = _field_dc(Um)
    dR_dc = -h / 6.0 * (Fci + 4.0 * (Fcm + np.einsum("nij,nj->ni", Jm, dUm_dc)) + Fcj)

    m = n - 1
    rows, cols, vals = [], [], []
    blk_r = (np.arange(m)[:, None, None] * 4 + np.arange(4)[None, :, None]) * np.ones((1, 1, 4), int)
    blk_ci = (np.arange(m)[:, None, None] * 4 + np.arange(4)[None, None, :]) * np.ones((1, 4, 1), int)
    rows += [blk_r.ravel(), blk_r.ravel()]
    cols += [blk_ci.ravel(), (blk_ci + 4).ravel()]
    vals += [dR_dUi.ravel(), dR_dUj.ravel()]
    nc = 4 * n
    rows.append(np.arange(4 * m))
    cols.append(np.full(4 * m, nc))
    vals.append(dR_dc.ravel())
    # boundary rows
    r0 = 4 * m
    # d(bc)/dc by finite difference of the projection rows
    dc = 1e-7
    Lr2, Rr2 = prob.bc_rows_fn(c + dc)
    dbc_dc = np.concatenate([(Lr2 - Lr) @ U[0], (Rr2 - Rr) @ (U[-1] - right_ref)]) / dc
    for k in range(2):
        rows.append(np.full(4, r0 + k)); cols.append(np.arange(4)); vals.append(Lr[k])
        rows.append(np.full(4, r0 + 2 + k)); cols.append(4 * (n - 1) + np.arange(4)); vals.append(Rr[k])
    rows.append(np.arange(r0, r0 + 4)); cols.append(np.full(4, nc)); vals.append(dbc_dc)
    rows.append(np.array([r0 + 4])); cols.append(np.array([4 * prob.phase_index])); vals.append(np.array([1.0]))
    Jac = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nc + 1, nc + 1)
    )
    return res, Jac


def _newton(prob: _Problem, X0: np.ndarray, tol: float = 1e-10, max_iter: int = 60):
    """Damped Newton with the natural monotonicity test.

    A trial step is accepted when the simplified Newton correction (old
    factorization, new residual) shrinks; this is insensitive to the very
    different scales of the collocation and boundary rows.
    """
    X = X0.copy()
    res, Jac = _residual_and_jac(prob, X)
    nrm = np.linalg.norm(res, np.inf)
    history = [nrm]
    lam = 1.0
    for it in range(max_iter):
        if nrm <= tol:
            break
        lu = splu(Jac)
        dX = -lu.solve(res)
        dn = np.linalg.norm(dX)
        lam = min(1.0, 4.0 * lam)
        while True:
            Xt = X + lam * dX
            rt, _ = _residual_and_jac(prob, Xt, want_jac=False)
            dbar = np.linalg.norm(lu.solve(rt))
            if np.all(np.isfinite(rt)) and dbar <= (1.0 - 0.25 * lam) * dn + 1e-14:
                break
            lam *= 0.5
            if lam < 1.0 / 4096:
                raise NewtonDivergence("damped Newton failed to decrease the correction", nrm)
        X = Xt
        res, Jac = _residual_and_jac(prob, X)
        nrm = np.linalg.norm(res, np.inf)
        history.append(nrm)
        log.debug("newton it=%d step=%.3g residual=%.3e c=%.12f", it, lam, nrm, X[-1])
    if nrm > tol:
        raise NewtonDivergence("Newton did not reach tolerance", nrm)
    return X, Jac, history


def _pulse_bc_rows(p: Params):
    def rows(c):
        bs = boundary_projectors(p.with_(c=c))
        return bs.left_rows_stable, bs.left_rows_unstable

    return rows


def _condition_estimate(Jac) -> float:
    from scipy.sparse.linalg import onenormest, LinearOperator

    lu = splu(Jac)
    n = Jac.shape[0]
    inv = LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="T"), dtype=float)
    return float(onenormest(Jac) * onenormest(inv))


def solve_collocation(p: Params, z_mesh: np.ndarray, U_guess: np.ndarray, c_guess: float, kind: str = "pulse",
                      tol: float = 1e-10, tol_bc: float = 1e-5, right_state=None) -> WaveProfile:
    """Newton-solve the discretized boundary value problem on a fixed mesh."""
    phase_index = int(np.argmin(np.abs(z_mesh)))
    if abs(z_mesh[phase_index]) > 1e-12:
        raise ValueError("mesh must contain z = 0")
    if right_state is None:
        bc_rows = _pulse_bc_rows(p)
    else:
        bc_rows = _front_bc_rows(p, right_state)
    prob = _Problem(p=p, z=z_mesh, left_rows=None, right_rows=None, phase_index=phase_index,
                    bc_rows_fn=bc_rows, right_state=right_state)
    X0 = np.concatenate([U_guess.ravel(), [c_guess]])
    X, Jac, hist = _newton(prob, X0, tol=tol)
    U = X[:-1].reshape(-1, 4)
    c = float(X[-1])
    end_left = float(np.linalg.norm(U[0]))
    end_right = float(np.linalg.norm(U[-1] - (0 if right_state is None else right_state)))
    if max(end_left, end_right) > tol_bc:
        raise DomainTooShort(f"endpoint defect {max(end_left, end_right):.2e} exceeds tol_bc={tol_bc:.1e}")
    prof = WaveProfile(z=z_mesh.copy(), U=U, c=c, params=p, residual=float(hist[-1]), kind=kind,
                       info={"newton_history": hist, "endpoint_defect": (end_left, end_right)})
    prof.info["jacobian"] = Jac
    return prof


def default_mesh_for(p: Params, z: np.ndarray, U: np.ndarray, c: float, refine: int = 0, **kw) -> np.ndarray:
    mesh = build_mesh(z, U, c, p, **kw)
    for _ in range(refine):
        mid = 0.5 * (mesh[1:] + mesh[:-1])
        mesh = np.sort(np.concatenate([mesh, mid]))
    return mesh


def solve_pulse(p: Params, seed=None, L_dom: float | None = None, tol: float = 1e-10, tol_bc: float = 1e-3,
                resolution: float = 0.12, refine: int = 0, log_condition: bool = False,
                v_end_frac: float = 1e-4) -> WaveProfile:
    """Homoclinic pulse at ``p.eps`` seeded from the singular orbit (or a previous profile).

    ``seed`` may be a :class:`WaveProfile` (warm start, interpolated onto a new
    mesh) or ``None``/a ``SingularOrbit`` (the eps = 0 template laid out on
    the fast scale).
    """
    if not (0.0 < p.eps):
        raise ParameterError("solve_pulse needs eps > 0")
    p.require_small_eps()
    z_left = -40.0 if L_dom is None else -abs(L_dom)
    if isinstance(seed, WaveProfile):
        zd = np.linspace(seed.z[0], seed.z[-1], 40001)
        Ud = seed(zd)
        c0 = seed.c
    else:
        zd, Ud = pulse_seed(p, z_left=z_left, v_end_frac=v_end_frac)
        c0 = singular_speed(p.a)
    mesh = default_mesh_for(p, zd, Ud, c0, refine=refine, resolution=resolution)
    Ug = np.column_stack([np.interp(mesh, zd, Ud[:, k]) for k in range(4)])
    prof = solve_collocation(p, mesh, Ug, c0, tol=tol, tol_bc=tol_bc)
    if log_condition:
        prof.info["condition"] = _condition_estimate(prof.info["jacobian"])
        log.info("BVP Jacobian condition estimate %.3e", prof.info["condition"])
    return prof


def remesh(profile: WaveProfile, refine: int = 0, resolution: float = 0.12, tol: float = 1e-10,
           tol_bc: float = 1e-3) -> WaveProfile:
    """Re-solve on a mesh adapted to ``profile`` (optionally uniformly refined)."""
    zd = np.linspace(profile.z[0], profile.z[-1], 40001)
    Ud = profile(zd)
    mesh = default_mesh_for(profile.params, zd, Ud, profile.c, refine=refine, resolution=resolution)
    Ug = profile(mesh)
    return solve_collocation(profile.params, mesh, Ug, profile.c, tol=tol, tol_bc=tol_bc, kind=profile.kind,
                             right_state=None if profile.kind == "pulse" else front_target(profile.params))


def back_centre(profile: WaveProfile, level: float = 0.4) -> float:
    """First downward crossing of ``u = level`` after the front."""
    z = profile.z
    u = profile.U[:, 0]
    idx = np.nonzero((u[:-1] >= level) & (u[1:] < level) & (z[:-1] > 0))[0]
    if idx.size == 0:
        raise ValueError("profile has no back")
    i = idx[0]
    return float(z[i] + (level - u[i]) * (z[i + 1] - z[i]) / (u[i + 1] - u[i]))


def warm_start(profile: WaveProfile, eps_new: float, half: float = 15.0, n_dense: int = 40001):
    """Map a solved profile onto the z-layout expected at ``eps_new``.

    The two fast layers keep their shape; the plateau and the slow tail are
    stretched by ``eps_old / eps_new`` so the slow time along them is kept.
    """
    r = profile.eps / eps_new
    zb = back_centre(profile)
    zl, zr = profile.span
    plateau = max(zb - 2 * half, 0.0)
    zb_new = 2 * half + plateau * r
    old = np.array([zl, half, zb - half, zb + half, zr])
    new = np.array([zl, half, zb_new - half, zb_new + half, zb_new + half + (zr - zb - half) * r])
    z_new = np.linspace(new[0], new[-1], n_dense)
    U = profile(np.interp(z_new, new, old))
    return z_new, U


def continue_in_eps(p: Params, eps_list, seed: WaveProfile | None = None, max_bisect: int = 4,
                    **kw) -> list[WaveProfile]:
    """Solve along ``eps_list``, each solve warm-started from the previous one.

    If a step fails, intermediate eps values (geometric midpoints) are tried
    before giving up.  Only profiles at the requested eps are returned.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        return []
    out: list[WaveProfile] = []
    prev = seed
    for target in eps_list:
        prof = None
        pending = [target]
        depth = 0
        while pending:
            eps = pending[-1]
            pe = p.with_(eps=eps)
            try:
                if prev is None:
                    cur = solve_pulse(pe, **kw)
                else:
                    cur = _solve_from(prev, pe, **kw)
            except (NewtonDivergence, DomainTooShort, ParameterError) as err:
                if prev is None or depth >= max_bisect:
                    raise RuntimeError(f"continuation failed at eps={eps:.6g}: {err}") from err
                mid = math.sqrt(prev.eps * eps)
                log.info("step to eps=%.3g failed (%s); inserting %.3g", eps, err, mid)
                pending.append(mid)
                depth += 1
                continue
            pending.pop()
            prev = cur
            if not pending:
                prof = cur
        prof.info["c_previous"] = out[-1].c if out else None
        out.append(prof)
    return out


def _solve_from(prev: WaveProfile, p: Params, resolution: float = 0.12, refine: int = 0, tol: float = 1e-10,
                tol_bc: float = 1e-3, log_condition: bool = False, **_ignored) -> WaveProfile:
    zd, Ud = warm_start(prev, p.eps)
    mesh = default_mesh_for(p, zd, Ud, prev.c, refine=refine, resolution=resolution)
    Ug = np.column_stack([np.interp(mesh, zd, Ud[:, k]) for k in range(4)])
    prof = solve_collocation(p, mesh, Ug, prev.c, tol=tol, tol_bc=tol_bc)
    if log_condition:
        prof.info["condition"] = _condition_estimate(prof.info["jacobian"])
    return prof


@dataclass
class BranchPoint:
    eps: float
    c: float
    v_max: float
    deps_ds: float


@dataclass
class BranchTrace:
    points: list
    fold_eps: float | None

    @property
    def eps_max_reached(self) -> float:
        return max(pt.eps for pt in self.points)


def trace_eps_branch(start: WaveProfile, eps_stop_low: float | None = None, ds: float = 0.02,
                     ds_max: float = 0.1, max_steps: int = 200, eps_unit: float = 1e-3) -> BranchTrace:
    """Pseudo-arclength continuation of the pulse family in ``eps`` on a fixed mesh.

    Starts at ``start`` heading towards larger eps and stops once eps has
    turned round and dropped below ``eps_stop_low`` (default: the start eps).
    A sign change of d(eps)/ds marks a fold; its location is estimated by
    quadratic interpolation through the three points around the turn.
    """
    p0 = start.params
    z = start.z
    phase = int(np.argmin(np.abs(z)))

    def G(X, eps, jac=True):
        pe = p0.with_(eps=eps)
        prob = _Problem(p=pe, z=z, left_rows=None, right_rows=None, phase_index=phase,
                        bc_rows_fn=_pulse_bc_rows(pe))
        return _residual_and_jac(prob, X, jac)

    def full(X, eps):
        r, J = G(X, eps)
        de = 1e-9
        ge = (G(X, eps + de, False)[0] - r) / de
        return r, sp.hstack([J, sp.csc_matrix(ge[:, None])]).tocsc()

    Y = np.concatenate([start.U.ravel(), [start.c, start.eps]])
    w = np.full(Y.size, 1.0 / Y.size)  # squared weights: RMS norm on the profile
    w[-1] = (1.0 / eps_unit) ** 2
    rhs_t = np.zeros(Y.size)
    rhs_t[-1] = 1.0

    def tangent(J, t_prev):
        A = sp.vstack([J, sp.csr_matrix((w * t_prev)[None, :])]).tocsc()
        t = splu(A).solve(rhs_t)
        t /= math.sqrt(np.dot(w * t, t))
        return t if np.dot(w * t, t_prev) >= 0 else -t

    _, J = full(Y[:-1], Y[-1])
    e_last = np.zeros(Y.size)
    e_last[-1] = 1.0
    t = tangent(J, e_last)
    stop = start.eps if eps_stop_low is None else eps_stop_low
    pts = [BranchPoint(float(Y[-1]), float(Y[-2]), float(start.U[:, 1].max()), float(t[-1]))]
    for _ in range(max_steps):
        Yk = Y + ds * t
        ok = False
        for it in range(12):
            r, J = full(Yk[:-1], Yk[-1])
            res = np.concatenate([r, [np.dot(w * t, Yk - Y) - ds]])
            if np.max(np.abs(res)) < 1e-9:
                ok = True
                break
            A = sp.vstack([J, sp.csr_matrix((w * t)[None, :])]).tocsc()
            Yk = Yk - splu(A).solve(res)
        if not ok:
            ds *= 0.5
            if ds < 1e-5:
                break
            continue
        t = tangent(J, t)
        Y = Yk
        pts.append(BranchPoint(float(Y[-1]), float(Y[-2]), float(Y[:-2].reshape(-1, 4)[:, 1].max()), float(t[-1])))
        if it < 5:
            ds = min(1.4 * ds, ds_max)
        if Y[-1] < stop and any(pt.deps_ds < 0 for pt in pts):
            break
    fold = None
    for i in range(1, len(pts) - 1):
        if pts[i - 1].deps_ds > 0 >= pts[i + 1].deps_ds or (pts[i - 1].deps_ds > 0 > pts[i].deps_ds):
            j = min(max(i, 1), len(pts) - 2)
            cs = np.array([pts[j - 1].c, pts[j].c, pts[j + 1].c])
            es = np.array([pts[j - 1].eps, pts[j].eps, pts[j + 1].eps])
            coef = np.polyfit(cs, es, 2)
            if coef[0] < 0:
                cf = -coef[1] / (2 * coef[0])
                fold = float(np.polyval(coef, cf))
            else:
                fold = float(es.max())
            break
    return BranchTrace(points=pts, fold_eps=fold)


# ---------------------------------------------------------------- large-gamma front


def front_roots(p: Params) -> np.ndarray:
    """Real roots of ``u = gamma f(u)`` in ascending order."""
    a, g = p.a, p.gamma
    # gamma*(-u^3 + (1+a)u^2 - a u) - u = 0  ->  u * (-g u^2 + g(1+a) u - (g a + 1)) = 0
    if g == 0:
        return np.array([0.0])
    quad_roots = np.roots([-g, g * (1 + a), -(g * a + 1.0)])
    real = np.sort(quad_roots[np.abs(quad_roots.imag) < 1e-12].real)
    return np.concatenate([[0.0], real])


def front_target(p: Params) -> np.ndarray:
    roots = front_roots(p)
    if roots.size != 3 or not (roots[0] < roots[1] < roots[2]):
        raise ParameterError(f"u = gamma f(u) must have three roots; found {roots.size}")
    u3 = roots[2]
    return np.array([u3, u3 / p.gamma, 0.0, 0.0])


def _front_bc_rows(p: Params, Q: np.ndarray):
    def rows(c):
        pc = p.with_(c=c)
        left = boundary_projectors(pc).left_rows_stable
        A = _field_jac(Q[None, :], c, pc)[0]
        from scipy.linalg import schur

        mu = np.linalg.eigvals(A)
        n_unst = int(np.sum(mu.real > 0))
        _, Zlu, _ = schur(A.T, output="real", sort="rhp")
        right = Zlu[:, :n_unst].T
        return left, right

    return rows


def solve_front(p: Params, L_dom: float = 40.0, z_right: float | None = None, tol: float = 1e-10,
                resolution: float = 0.12) -> WaveProfile:
    """Heteroclinic front from the origin to ``Q = (u3, u3/gamma, 0, 0)``."""
    Q = front_target(p)
    A_Q = _field_jac(Q[None, :], singular_speed(p.a), p)[0]
    n_unst = int(np.sum(np.linalg.eigvals(A_Q).real > 0))
    if n_unst != 2:
        raise ParameterError(f"fixed point Q has {n_unst} unstable directions; need 2 for a 2+2 split")
    if z_right is None:
        # slow approach to Q along the right branch happens on the 1/eps scale
        z_right = min(60.0 + 8.0 / max(p.eps, 1e-6), 4000.0)
    zd = np.linspace(-abs(L_dom), z_right, 40001)
    a, g = p.a, p.gamma
    c = singular_speed(a)
    uf, wf = front_profile(zd)
    yf = front_y(zd, a, closed=True)
    # Template: Nagumo front to (1, 0) followed by slow drift up to Q on the right branch.
    right = CriticalBranch("right", a)
    pc = p.with_(c=c)
    v = np.zeros_like(zd)
    # dv/dzeta = (g v - g^{-1}(v))/c, from v=0 towards Q[1]
    vv = 0.0
    for i in range(1, zd.size):
        if zd[i] > 0:
            rate = slow_flow_rhs(vv, right, pc)
            vv = min(vv + p.eps * (zd[i] - zd[i - 1]) * rate, Q[1])
        v[i] = vv
    u_slow = np.array([right.inverse(x) for x in v])
    u = np.where(zd > 0, u_slow * uf + (1 - uf) * uf, uf)
    y = yf + uf * ((g * v - u_slow) / c + 1.0 / c)
    Ud = np.column_stack([u, v, wf, y])
    mesh = default_mesh_for(p, zd, Ud, c, resolution=resolution)
    Ug = np.column_stack([np.interp(mesh, zd, Ud[:, k]) for k in range(4)])
    prof = solve_collocation(p, mesh, Ug, c, kind="front", tol=tol, tol_bc=1e-3, right_state=Q)
    return prof


class NoPulseFound(RuntimeError):
    """Continuation could not reach the requested eps (for example past a fold of the branch)."""


def pulse_at(p: Params, eps_start: float = 1e-4, ratio: float = 2.0, **kw) -> WaveProfile:
    """Pulse at ``p.eps``: direct solve for small eps, otherwise continuation up from ``eps_start``."""
    if p.eps <= eps_start * (1 + 1e-12):
        return solve_pulse(p, **kw)
    n = max(1, int(math.ceil(math.log(p.eps / eps_start) / math.log(ratio))))
    ladder = list(np.geomspace(eps_start, p.eps, n + 1))
    try:
        return continue_in_eps(p, ladder, **kw)[-1]
    except RuntimeError as err:
        raise NoPulseFound(f"no pulse reached at eps={p.eps:.6g} (a={p.a}, gamma={p.gamma}): {err}") from err
