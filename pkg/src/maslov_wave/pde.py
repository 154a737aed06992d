"""Method-of-lines simulation of the co-moving reaction-diffusion system around a solved pulse.

    u_t = u_zz + c u_z + f(u) - v
    v_t = v_zz + c v_z + eps (u - gamma v)

Space: second-order central differences with Dirichlet data at the rest state.
Time: second-order semi-implicit BDF (diffusion and advection implicit, reaction explicit).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import splu

from .core_dynamics import Params, cubic_eval
from .wave import WaveProfile, back_centre

log = logging.getLogger(__name__)


class BlowUp(RuntimeError):
    pass


class GridError(ValueError):
    pass


@dataclass
class PDEGrid:
    z0: float
    z1: float
    nx: int
    dt: float
    params: Params
    bc_left: tuple = (0.0, 0.0)
    bc_right: tuple = (0.0, 0.0)
    z: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 3 or self.z1 <= self.z0 or self.dt <= 0:
            raise GridError("need nx >= 3, z1 > z0 and dt > 0")
        self.z = np.linspace(self.z0, self.z1, self.nx)
        # explicit reaction: dt times the reaction Lipschitz constant must stay below 1
        lip = self.reaction_lipschitz()
        if self.dt * lip > 1.0:
            raise GridError(f"dt={self.dt} violates dt * L_reaction <= 1 (L = {lip:.3g})")

    @property
    def dx(self) -> float:
        return (self.z1 - self.z0) / (self.nx - 1)

    def reaction_lipschitz(self) -> float:
        u = np.linspace(-0.5, 1.5, 401)
        fp = cubic_eval(u, self.params.a)[1]
        return float(np.max(np.abs(fp)) + 1.0 + self.params.eps * (1.0 + self.params.gamma))

    def nodes_across(self, width: float) -> float:
        return width / self.dx


def grid_for(profile: WaveProfile, dx: float = 0.2, dt: float = 0.1, pad: float = 0.0) -> PDEGrid:
    z0, z1 = profile.span
    z0, z1 = z0 - pad, z1 + pad
    nx = int(round((z1 - z0) / dx)) + 1
    return PDEGrid(z0, z1, nx, dt, profile.params_c)


def _operator(grid: PDEGrid) -> sp.csc_matrix:
    """Interior operator d_zz + c d_z for one field (Dirichlet values handled separately)."""
    n = grid.nx - 2
    h = grid.dx
    c = grid.params.c
    lo = 1.0 / h**2 - c / (2 * h)
    hi = 1.0 / h**2 + c / (2 * h)
    return sp.diags([lo * np.ones(n - 1), -2.0 / h**2 * np.ones(n), hi * np.ones(n - 1)], [-1, 0, 1], format="csc")


def _boundary_vector(grid: PDEGrid, left: float, right: float) -> np.ndarray:
    n = grid.nx - 2
    h, c = grid.dx, grid.params.c
    b = np.zeros(n)
    b[0] = (1.0 / h**2 - c / (2 * h)) * left
    b[-1] = (1.0 / h**2 + c / (2 * h)) * right
    return b


def _reaction(u: np.ndarray, v: np.ndarray, p: Params):
    f = cubic_eval(u, p.a)[0]
    return f - v, p.eps * (u - p.gamma * v)


@dataclass
class DecayTrace:
    t: np.ndarray
    d: np.ndarray
    k: np.ndarray
    grid: PDEGrid = field(repr=False)
    final_state: np.ndarray = field(repr=False, default=None)

    @property
    def ratio(self) -> float:
        return float(self.d[0] / self.d[-1]) if self.d[-1] > 0 else math.inf

    def decay_rate(self, tail: float = 0.5) -> float:
        """Least-squares slope of log d over the last ``tail`` fraction of the run."""
        m = self.t >= self.t[0] + (1 - tail) * (self.t[-1] - self.t[0])
        d = np.maximum(self.d[m], 1e-300)
        return float(np.polyfit(self.t[m], np.log(d), 1)[0])

    def eventually_decreasing(self, tail: float = 0.5, slack: float = 1e-12) -> bool:
        m = self.t >= self.t[0] + (1 - tail) * (self.t[-1] - self.t[0])
        return bool(np.all(np.diff(self.d[m]) <= slack + 1e-3 * self.d[m][:-1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "d", "k"])
            for row in zip(self.t, self.d, self.k):
                w.writerow([f"{x:.17g}" for x in row])


def profile_on(profile: WaveProfile, z: np.ndarray) -> np.ndarray:
    """(u, v) of the profile at z, held at the endpoint values outside its domain."""
    zc = np.clip(z, profile.z[0], profile.z[-1])
    U = profile(zc)
    return np.stack([U[..., 0], U[..., 1]], axis=-1)


def shifted_distance(state: np.ndarray, profile: WaveProfile, z: np.ndarray, k_prev: float = 0.0,
                     window: float = 2.0) -> tuple[float, float]:
    """min over k in [k_prev - window, k_prev + window] of sup |state - phi(. + k)|."""

    def dist(k):
        return float(np.max(np.abs(state - profile_on(profile, z + k))))

    res = minimize_scalar(dist, bounds=(k_prev - window, k_prev + window), method="bounded",
                          options={"xatol": 1e-7})
    k = float(res.x)
    best = min(res.fun, dist(k_prev))
    if best == dist(k_prev) and best < res.fun:
        k = k_prev
    return float(best), k


def bump(center: float, amplitude: float = 0.05, width: float = 2.0) -> Callable:
    """u-only Gaussian bump of sup-norm ``amplitude``."""
    return lambda z: np.stack([amplitude * np.exp(-(((z - center) / width) ** 2)), np.zeros_like(z)], axis=-1)


def translation_mode(profile: WaveProfile, amplitude: float = 0.01) -> Callable:
    def pert(z):
        zc = np.clip(z, profile.z[0], profile.z[-1])
        dU = profile.derivative(zc)
        return amplitude * np.stack([dU[..., 0], dU[..., 1]], axis=-1)

    return pert


def zero_perturbation(z):
    return np.zeros((np.size(z), 2))


def plateau_centre(profile: WaveProfile) -> float:
    """Midpoint between the front (z = 0) and the back."""
    return 0.5 * back_centre(profile)


def evolve(grid: PDEGrid, profile: WaveProfile, perturbation: Callable, T_end: float,
           n_out: int = 200, blowup: float = 10.0, amplitude_cap: float | None = None) -> DecayTrace:
    """Evolve phi + perturbation and record the shift-minimized sup distance to the profile family."""
    p = grid.params
    z = grid.z
    zi = z[1:-1]
    base = profile_on(profile, z)
    pert = np.asarray(perturbation(z), float).reshape(-1, 2)
    if amplitude_cap is not None and np.max(np.abs(pert)) > amplitude_cap * (1 + 1e-12):
        raise ValueError("perturbation exceeds the configured amplitude")
    W = base + pert
    W[0] = grid.bc_left
    W[-1] = grid.bc_right
    u, v = W[1:-1, 0].copy(), W[1:-1, 1].copy()

    L = _operator(grid)
    I = sp.identity(zi.size, format="csc")
    bu = _boundary_vector(grid, grid.bc_left[0], grid.bc_right[0])
    bv = _boundary_vector(grid, grid.bc_left[1], grid.bc_right[1])
    dt = grid.dt
    euler = splu((I - dt * L).tocsc())
    bdf2 = splu((1.5 * I - dt * L).tocsc())

    n_steps = int(math.ceil(T_end / dt))
    out_every = max(1, n_steps // n_out)

    def full(uu, vv):
        S = np.empty((z.size, 2))
        S[0], S[-1] = grid.bc_left, grid.bc_right
        S[1:-1, 0], S[1:-1, 1] = uu, vv
        return S

    ts, ds, ks = [], [], []
    d0, k = shifted_distance(full(u, v), profile, z, 0.0)
    ts.append(0.0), ds.append(d0), ks.append(k)

    Nu_old, Nv_old = _reaction(u, v, p)
    u_old, v_old = u.copy(), v.copy()
    # first step: IMEX Euler
    u = euler.solve(u + dt * (Nu_old + bu))
    v = euler.solve(v + dt * (Nv_old + bv))
    for n in range(1, n_steps):
        Nu, Nv = _reaction(u, v, p)
        ru = 2.0 * u - 0.5 * u_old + dt * (2.0 * Nu - Nu_old + bu)
        rv = 2.0 * v - 0.5 * v_old + dt * (2.0 * Nv - Nv_old + bv)
        u_old, v_old, Nu_old, Nv_old = u, v, Nu, Nv
        u, v = bdf2.solve(ru), bdf2.solve(rv)
        if (n + 1) % out_every == 0 or n + 1 == n_steps:
            if not (np.all(np.isfinite(u)) and max(np.max(np.abs(u)), np.max(np.abs(v))) <= blowup):
                raise BlowUp(f"state left the ball of radius {blowup} at t={(n + 1) * dt:.4g}")
            d, k = shifted_distance(full(u, v), profile, z, k)
            ts.append((n + 1) * dt), ds.append(d), ks.append(k)
    return DecayTrace(np.array(ts), np.array(ds), np.array(ks), grid, full(u, v))


def discrete_steady_state(grid: PDEGrid, profile: WaveProfile, T_relax: float = 200.0) -> DecayTrace:
    """Run the unperturbed profile; the resulting distance is the discretization floor."""
    return evolve(grid, profile, zero_perturbation, T_relax)
