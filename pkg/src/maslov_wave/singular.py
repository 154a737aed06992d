"""The eps = 0 singular pulse.

Fast front (McKean's explicit Nagumo front), slow climb up the right branch
of the critical manifold, fast back, and slow return along the left branch.
All closed forms are provided together with quadrature-based versions so the
two can be checked against each other.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.special import expit, gamma as gamma_fn

from .core_dynamics import Params, ParameterError, cubic_eval, linearization

SQ2 = math.sqrt(2.0)
BETA = SQ2 / 2.0  # front steepness


class QuadratureError(RuntimeError):
    pass


class BranchError(ValueError):
    pass


def singular_speed(a: float) -> float:
    if not (0.0 < a < 0.5):
        raise ParameterError(f"threshold a={a} must satisfy 0 < a < 1/2")
    return SQ2 * (a - 0.5)


def jump_off_u(a: float) -> float:
    return 2.0 * (a + 1.0) / 3.0


def jump_off_v(a: float) -> float:
    return float(cubic_eval(jump_off_u(a), a)[0])


def inflection_u(a: float) -> float:
    return (1.0 + a) / 3.0


def k_closed_form(a: float) -> float:
    """Bounding constant of the front y-profile, ``2 pi / (sqrt2 sin(pi(1-2a)))``."""
    return 2.0 * math.pi / (SQ2 * math.sin(math.pi * (1.0 - 2.0 * a)))


# ---------------------------------------------------------------- quadrature


def trapezoid_improper(func, lo: float, hi: float, h: float = 0.05, rtol: float = 1e-12,
                       max_halvings: int = 12) -> tuple[float, float]:
    """Composite trapezoid on a truncated interval, halving ``h`` until converged.

    Smooth, exponentially decaying integrands converge geometrically, so the
    returned error estimate is the change over the last halving.
    """
    n = max(2, int(math.ceil((hi - lo) / h)))
    z = np.linspace(lo, hi, n + 1)
    vals = func(z)
    step = (hi - lo) / n
    total = step * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    for _ in range(max_halvings):
        mids = z[:-1] + 0.5 * step
        mvals = func(mids)
        new_total = 0.5 * total + 0.5 * step * mvals.sum()
        err = abs(new_total - total)
        z = np.sort(np.concatenate([z, mids]))
        step *= 0.5
        total = new_total
        if err <= rtol * max(abs(total), 1e-300):
            return total, err
    raise QuadratureError(f"trapezoid did not converge (last change {err:.3e})")


def _truncation(a: float, tail: float = 1e-14) -> tuple[float, float]:
    # Integrands decay like exp(sqrt2*a*z) at -inf and exp(c* z) at +inf.
    c = singular_speed(a)
    left = math.log(tail) / (SQ2 * a)
    right = math.log(tail) / c
    return left - 5.0, right + 5.0


# ---------------------------------------------------------------- fast front


def front_profile(z, a: float | None = None):
    """McKean front ``u = 1/(1+exp(-z/sqrt2))`` and ``w = u'``.

    The profile does not depend on ``a``; the argument is accepted for a
    uniform call signature.
    """
    z = np.asarray(z, dtype=float)
    u = expit(BETA * z)
    w = BETA * u * expit(-BETA * z)
    return u, w


def front_u_inverse(u):
    """z at which the front reaches ``u`` (0 < u < 1)."""
    u = np.asarray(u, dtype=float)
    return np.log(u / (1.0 - u)) / BETA


def front_y(z, a: float, closed: bool = False):
    """Bounded solution of ``y' = -c* y - u`` along the front.

    Computed as ``exp(-c* z) * int_z^inf exp(c* s) u(s) ds`` by quadrature, or
    through the hypergeometric closed form when ``closed`` is true.
    """
    c = singular_speed(a)
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty_like(z_arr)
    if closed:
        out[:] = _front_y_series(z_arr, a)
    else:
        for i, zi in enumerate(z_arr):
            # int_0^inf exp(c t) u(z + t) dt; finite left endpoint, so adaptive
            # Gauss-Kronrod instead of the tail-truncated trapezoid.
            val, err = quad(lambda t, zi=zi: math.exp(c * t) * float(expit(BETA * (zi + t))),
                            0.0, math.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
            if not np.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
                raise QuadratureError(f"front_y quadrature failed at z={zi}")
            out[i] = val
    return out if np.ndim(z) else float(out[0])


def _front_y_series(z, a):
    # exp(-cz) int_z^inf exp(cs) u(s) ds via the substitution x = exp(-beta s):
    # equals (1/beta) * exp(-cz) * int_0^{X} x^{r-1}/(1+x) dx, r = -c/beta = 1-2a.
    from scipy.special import hyp2f1

    c = singular_speed(a)
    r = -c / BETA
    X = np.exp(-BETA * z)
    out = np.empty_like(z)
    small = X <= 0.5
    # int_0^X x^{r-1}/(1+x) dx = X^r/r * 2F1(1, r; r+1; -X)
    # (X^r = exp(cz) cancels the prefactor exactly; keeps large z finite)
    out[small] = hyp2f1(1.0, r, r + 1.0, -X[small]) / r
    # Large X: int_0^inf = pi/sin(pi r); subtract int_X^inf x^{r-1}/(1+x) dx
    # = X^{r-1}/(1-r) * 2F1(1, 1-r; 2-r; -1/X).
    big = ~small
    Xb = X[big]
    tail = Xb ** (r - 1.0) / (1.0 - r) * hyp2f1(1.0, 1.0 - r, 2.0 - r, -1.0 / Xb)
    out[big] = (math.pi / math.sin(math.pi * r) - tail) * np.exp(-c * z[big])
    return out / BETA


def k_quadrature(a: float) -> float:
    """``K = int exp(c* z) u_front(z) dz`` by refined trapezoid."""
    c = singular_speed(a)
    lo, hi = _truncation(a)
    val, _ = trapezoid_improper(lambda s: np.exp(c * s) * front_profile(s)[0], lo, hi, h=0.1)
    return val


# ---------------------------------------------------------------- fast back


def back_profile(z, a: float):
    """Nagumo back from ``q`` to ``q_hat`` as ``(u, w, y_offset)``.

    ``y_offset = y - y_q`` is the displacement of ``y`` from its value at the
    jump-off point; it runs from 0 to ``1/c*`` and equals ``-front_y``.
    """
    us = jump_off_u(a)
    uf, wf = front_profile(z)
    return us - uf, -wf, -front_y(z, a)


# ---------------------------------------------------------------- critical manifold


@dataclass(frozen=True)
class CriticalBranch:
    """An outer (normally hyperbolic) branch of ``v = f(u)`` with its inverse."""

    side: str
    a: float

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")

    @property
    def knee(self) -> float:
        a = self.a
        disc = math.sqrt((1.0 + a) ** 2 - 3.0 * a)
        return ((1.0 + a) - disc) / 3.0 if self.side == "left" else ((1.0 + a) + disc) / 3.0

    @property
    def u_range(self) -> tuple[float, float]:
        return (-math.inf, self.knee) if self.side == "left" else (self.knee, math.inf)

    @property
    def v_limit(self) -> float:
        """Extremal v on the branch (local min for left, local max for right)."""
        return float(cubic_eval(self.knee, self.a)[0])

    def contains_v(self, v: float) -> bool:
        return v >= self.v_limit if self.side == "left" else v <= self.v_limit

    def inverse(self, v: float, tol: float = 1e-12) -> float:
        """``g(v)``: the u on this branch with ``f(u) = v`` (safeguarded Newton)."""
        if not self.contains_v(v):
            raise BranchError(f"v={v} outside the image of the {self.side} branch")
        a = self.a
        knee = self.knee
        # Bracket [lo, hi] with f(lo) - v and f(hi) - v of opposite sign; f decreasing.
        if self.side == "left":
            hi, lo, step = knee, knee - 1.0, 1.0
            while cubic_eval(lo, a)[0] < v:
                step *= 2.0
                lo = knee - step
        else:
            lo, hi, step = knee, knee + 1.0, 1.0
            while cubic_eval(hi, a)[0] > v:
                step *= 2.0
                hi = knee + step
        x = 0.5 * (lo + hi)
        for _ in range(200):
            fx, fpx, _ = cubic_eval(x, a)
            r = fx - v
            if r > 0:
                lo = x
            else:
                hi = x
            if abs(r) <= tol * 1e-3 or hi - lo <= tol:
                return x
            x_new = x - r / fpx if fpx != 0 else 0.5 * (lo + hi)
            if not (lo < x_new < hi):
                x_new = 0.5 * (lo + hi)
            if abs(x_new - x) <= tol:
                return x_new
            x = x_new
        return x

    def inverse_derivatives(self, v: float) -> tuple[float, float, float]:
        """``g(v), g'(v), g''(v)`` on the branch."""
        u = self.inverse(v)
        _, fp, fpp = cubic_eval(u, self.a)
        return u, 1.0 / fp, -fpp / fp**3


def slow_flow_rhs(v: float, branch: CriticalBranch, p: Params) -> float:
    """Reduced slow flow ``dv/dzeta = (gamma v - g(v)) / c`` on ``branch``."""
    return (p.gamma * v - branch.inverse(v)) / p.c


# ---------------------------------------------------------------- layer eigen-data


@dataclass
class LayerEigen:
    u: float
    mu: np.ndarray  # (mu1, 0, -c, mu4)
    eta: np.ndarray  # columns eta1..eta4

    def residuals(self, p: Params) -> np.ndarray:
        A = linearization(self.u, 0.0, p.with_(eps=0.0))
        return np.array([np.linalg.norm(A @ self.eta[:, i] - self.mu[i] * self.eta[:, i]) for i in range(4)])


def layer_eigenvalues(u: float, c: float, a: float) -> tuple[float, float]:
    """Stable/unstable eigenvalues ``mu1(u), mu4(u)`` of the (u, w) layer linearization."""
    fp = cubic_eval(u, a)[1]
    root = math.sqrt(c * c - 4.0 * fp)
    return 0.5 * (-c - root), 0.5 * (-c + root)


def layer_eigenpairs(u: float, p: Params) -> LayerEigen:
    """eps = 0 eigenpairs at a point of the critical manifold with abscissa ``u``.

    Eigenvectors follow the generic pattern ``eta2 = (1, f', 0, (gamma f'-1)/c)``,
    ``eta4 = (f', 0, f' mu4, mu4)``, ``eta3 = e4``, ``eta1 = (f', 0, f' mu1, mu1)``.
    At the jump-off abscissa ``u*`` the slow eigenvector is rescaled by ``-1/a``.
    """
    a, c, g = p.a, p.c, p.gamma
    fp = cubic_eval(u, a)[1]
    if fp >= 0:
        raise BranchError(f"f'({u}) = {fp} >= 0: point is not normally hyperbolic")
    mu1, mu4 = layer_eigenvalues(u, c, a)
    eta1 = np.array([fp, 0.0, fp * mu1, mu1])
    eta2 = np.array([1.0, fp, 0.0, (g * fp - 1.0) / c])
    eta3 = np.array([0.0, 0.0, 0.0, 1.0])
    eta4 = np.array([fp, 0.0, fp * mu4, mu4])
    if math.isclose(u, jump_off_u(a), rel_tol=0, abs_tol=1e-12):
        eta2 = eta2 * (-1.0 / a)
    return LayerEigen(u=u, mu=np.array([mu1, 0.0, -c, mu4]), eta=np.column_stack([eta1, eta2, eta3, eta4]))


# ---------------------------------------------------------------- Melnikov integrals


@dataclass
class MelnikovIntegrals:
    front: float
    back: float
    front_err: float
    back_err: float


def melnikov_integrals(a: float, h: float = 0.1) -> MelnikovIntegrals:
    """Transversality integrals along the front and back.

    ``front = int exp(c* s) w_f(s)^2 ds`` (positive) and
    ``back = int exp(c* z) w_b(z) dz`` (negative, equal to ``c* K``).
    """
    c = singular_speed(a)
    lo, hi = _truncation(a)
    front, ef = trapezoid_improper(lambda s: np.exp(c * s) * front_profile(s)[1] ** 2, lo, hi, h=h)
    back, eb = trapezoid_improper(lambda s: -np.exp(c * s) * front_profile(s)[1], lo, hi, h=h)
    return MelnikovIntegrals(front=front, back=back, front_err=ef, back_err=eb)


def melnikov_front_closed(a: float) -> float:
    """Beta-function value of the front Melnikov integral."""
    return BETA * gamma_fn(1.0 + 2.0 * a) * gamma_fn(3.0 - 2.0 * a) / 6.0


# ---------------------------------------------------------------- assembled orbit

SEGMENTS = ("front", "slow_right", "back", "slow_left")


@dataclass
class SingularOrbit:
    """Sampled singular pulse; each segment is an array of rows (param, u, v, w, y)."""

    params: Params
    front: np.ndarray
    slow_right: np.ndarray
    back: np.ndarray
    slow_left: np.ndarray
    p: np.ndarray
    q: np.ndarray
    q_hat: np.ndarray
    u_star: float
    v_star: float
    K: float
    constants: dict = field(default_factory=dict)

    def segments(self):
        return {name: getattr(self, name) for name in SEGMENTS}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["z_or_v", "u", "v", "w", "y", "segment_tag"])
            for name in SEGMENTS:
                for row in getattr(self, name):
                    wr.writerow([f"{x:.17g}" for x in row] + [name])


def corner_points(p: Params) -> dict[str, np.ndarray]:
    a, g = p.a, p.gamma
    c = singular_speed(a)
    us, vs = jump_off_u(a), jump_off_v(a)
    return {
        "origin": np.zeros(4),
        "p": np.array([1.0, 0.0, 0.0, -1.0 / c]),
        "q": np.array([us, vs, 0.0, (g * vs - us) / c]),
        "q_hat": np.array([us - 1.0, vs, 0.0, (g * vs - us + 1.0) / c]),
    }


def _slow_segment(p: Params, side: str, v0: float, v1: float, n: int) -> np.ndarray:
    a, g = p.a, p.gamma
    c = singular_speed(a)
    br = CriticalBranch(side, a)
    vs = np.linspace(v0, v1, n)
    rows = []
    for v in vs:
        u = br.inverse(v)
        rows.append([v, u, v, 0.0, (g * v - u) / c])
    return np.array(rows)


def assemble_singular_orbit(p: Params, z_inf: float | None = None, n_fast: int = 401,
                            n_slow: int = 201, y_closed: bool = True) -> SingularOrbit:
    """Build the four-segment singular pulse at ``c = c*`` (``p.eps`` is ignored)."""
    a = p.a
    c = singular_speed(a)
    if z_inf is None:
        z_inf = 30.0
    zs = np.linspace(-z_inf, z_inf, n_fast)
    uf, wf = front_profile(zs)
    yf = front_y(zs, a, closed=y_closed)
    front = np.column_stack([zs, uf, np.zeros_like(zs), wf, yf])
    corners = corner_points(p)
    us, vs = jump_off_u(a), jump_off_v(a)
    slow_right = _slow_segment(p, "right", 0.0, vs, n_slow)
    ub, wb, yb_off = back_profile(zs, a) if not y_closed else (us - uf, -wf, -yf)
    back = np.column_stack([zs, ub, np.full_like(zs, vs), wb, corners["q"][3] + yb_off])
    slow_left = _slow_segment(p, "left", vs, 0.0, n_slow)
    # Endpoints are exact corner values; interior fast samples carry tails.
    K = k_closed_form(a)
    return SingularOrbit(
        params=p, front=front, slow_right=slow_right, back=back, slow_left=slow_left,
        p=corners["p"], q=corners["q"], q_hat=corners["q_hat"], u_star=us, v_star=vs, K=K,
        constants={"c_star": c, "u_star": us, "v_star": vs, "K": K, "K_quadrature": k_quadrature(a),
                   "u_landing_left": us - 1.0},
    )


def slow_time(p: Params, side: str, v0: float, v1: float) -> float:
    """Slow time ``zeta`` to travel from ``v0`` to ``v1`` on a branch."""
    br = CriticalBranch(side, p.a)
    c = singular_speed(p.a)
    pp = p.with_(c=c)
    sol = solve_ivp(lambda t, v: [1.0 / slow_flow_rhs(v[0], br, pp)], (v0, v1), [0.0],
                    rtol=1e-10, atol=1e-12)
    return float(sol.y[0, -1])


def layer_shoot(a: float, y_offset: float, z0: float = -12.0, z_end: float = 40.0, p: Params | None = None):
    """Integrate the layer problem (v = 0, c = c*) from a point on the front with perturbed y.

    Returns the solution object; ``y`` escapes to +/- infinity for offsets of
    either sign, which is the cylinder shooting picture.
    """
    gamma = 1.0 if p is None else p.gamma
    c = singular_speed(a)
    u0, w0 = front_profile(z0)
    y0 = front_y(z0, a, closed=True) + y_offset

    def rhs(_, s):
        u, w, y = s
        f = u * (1 - u) * (u - a)
        return [w, -c * w - f, -c * y - u + gamma * 0.0]

    return solve_ivp(rhs, (z0, z_end), [float(u0), float(w0), float(y0)], rtol=1e-11, atol=1e-13,
                     dense_output=True)
