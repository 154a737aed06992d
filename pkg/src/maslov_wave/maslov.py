"""Conjugate points, crossing forms and the Maslov index of the pulse."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles
from scipy.optimize import brentq

from .core_dynamics import Params, cubic_eval, linearization
from .grassmann import (
    J,
    IntegrationFailure,
    _resample,
    detection_form,
    frame_from_plucker,
    integrate_plucker,
    integrate_projective,
    magnus_step,
    intersection,
    lagrangian_residual,
    minors,
    symplectic_form,
)
from .singular import corner_points, inflection_u, jump_off_u, layer_eigenvalues
from .wave import WaveProfile, back_centre

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
GAMMA_THRESHOLD = 1e-6
CORNER_RADIUS = 0.05
DEFAULT_U_TAU = -0.005


class NoAdmissibleTau(RuntimeError):
    pass


class DegenerateCrossing(RuntimeError):
    def __init__(self, z: float, value: float):
        super().__init__(f"crossing at z={z:.10g} has |Gamma|={abs(value):.2e} below threshold")
        self.z = z
        self.value = value


class UnresolvedCrossings(RuntimeError):
    pass


# ---------------------------------------------------------------- rest-state planes


def rest_eigenvector(mu: float, lam: float, p: Params) -> np.ndarray:
    """Eigenvector of the rest matrix with unit u-component, continuous in ``lam``."""
    X = mu * mu + p.c * mu
    v = X - lam - p.a
    return np.array([1.0, v, mu, mu * v / p.eps])


def rest_planes(lam: float, p: Params):
    """``(V^u, V^s)`` as 4x2 frames ordered by eigenvalue; orientation fixed analytically."""
    from .core_dynamics import rest_eigenvalues

    mu = np.sort(rest_eigenvalues(lam, p))
    vecs = [rest_eigenvector(m, lam, p) for m in mu]
    vecs = [x / np.linalg.norm(x) for x in vecs]
    Vs = np.column_stack([vecs[0], vecs[1]])
    Vu = np.column_stack([vecs[2], vecs[3]])
    return Vu, Vs, mu


def A_along(profile: WaveProfile, lam: float):
    pc = profile.params_c

    def A(z):
        return linearization(float(profile.u_hat(z)), lam, pc)

    return A


# ---------------------------------------------------------------- bundles


@dataclass
class BundlePath:
    """A z-sampled path of Lagrangian planes with continuous orientation."""

    z: np.ndarray
    coords: np.ndarray  # (n, 6) unit Plücker
    lam: float
    kind: str
    method: str
    _at: object = field(repr=False, default=None)

    def at(self, z: float) -> np.ndarray:
        return self._at(z)

    def frame_at(self, z: float) -> np.ndarray:
        return frame_from_plucker(self.at(z))

    def max_lagrangian_residual(self) -> float:
        return float(max(lagrangian_residual(c) for c in self.coords))

    def max_relation_residual(self) -> float:
        c = self.coords
        return float(np.max(np.abs(c[:, 0] * c[:, 5] - c[:, 1] * c[:, 4] + c[:, 2] * c[:, 3])))


def _unit(x):
    return x / np.linalg.norm(x)


def _anchored_plane(dphi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Plücker point of span{phi', psi}, with psi corrected to be omega-orthogonal to phi'."""
    e1 = _unit(dphi)
    e2 = psi - np.dot(psi, e1) * e1
    e2 = _unit(e2)
    # omega(e1, e2 + s J e1) = omega(e1, e2) - s|e1|^2
    e2 = e2 + symplectic_form(e1, e2) * (J @ e1)
    q = minors(np.column_stack([e1, e2]))
    return q / np.linalg.norm(q)


def compute_unstable_bundle(profile: WaveProfile, lam: float, z_end: float | None = None, tol: float = 1e-10,
                            method: str = "auto", z_eval=None) -> BundlePath:
    """E^u(lam, z) from the left end of the profile to ``z_end``.

    At lam = 0 the default is the anchored form span{phi'(z), psi(z)}, where
    phi' comes from the profile itself and psi is one forward solution.
    Plain forward Plücker integration of the plane is unstable along the
    right slow branch (the plane sits on a saddle of the induced flow), so
    it is only used for lam != 0 or when requested.
    """
    p = profile.params_c
    zl = profile.z[0]
    z_end = profile.z[-1] if z_end is None else float(z_end)
    A = A_along(profile, lam)
    Vu, _, _ = rest_planes(lam, p)
    if method == "auto":
        method = "anchored" if lam == 0.0 else "plucker"
    if method == "plucker":
        path = integrate_plucker(A, minors(Vu), (zl, z_end), tol=tol, z_eval=z_eval)
        return BundlePath(path.z, path.coords, lam, "unstable", "plucker", path.at)
    if lam != 0.0:
        raise ValueError("anchored bundle is only valid at lam = 0")
    d0 = _unit(profile.derivative(zl))
    # psi: the part of V^u orthogonal to phi'(zl)
    Q, _ = np.linalg.qr(Vu)
    psi0 = Q[:, 1] if abs(np.dot(Q[:, 0], d0)) > abs(np.dot(Q[:, 1], d0)) else Q[:, 0]
    psi0 = _unit(psi0 - np.dot(psi0, d0) * d0)
    zs, psis, _, _ = integrate_projective(A, psi0, (zl, z_end), tol=tol, z_eval=z_eval)
    coords = np.array([_anchored_plane(profile.derivative(z), s) for z, s in zip(zs, psis)])

    def at(z):
        s = _resample(zs, psis, A, z, lambda M: M)
        return _anchored_plane(profile.derivative(z), s)

    return BundlePath(zs, coords, 0.0, "unstable", "anchored", at)


def compute_stable_bundle(profile: WaveProfile, lam: float, z_end: float, tol: float = 1e-10,
                          z_eval=None) -> BundlePath:
    """E^s(lam, z) integrated backward from the right end of the profile down to ``z_end``."""
    p = profile.params_c
    A = A_along(profile, lam)
    _, Vs, _ = rest_planes(lam, p)
    path = integrate_plucker(A, minors(Vs), (profile.z[-1], float(z_end)), tol=tol, z_eval=z_eval)
    return BundlePath(path.z, path.coords, lam, "stable", "plucker", path.at)


# ---------------------------------------------------------------- reference plane


def reference_plane_model(u_tau: float, p: Params) -> np.ndarray:
    """Fast-slow limit of E^s(0, tau) on the left branch: slow direction plus fast stable direction."""
    f, fp, _ = cubic_eval(u_tau, p.a)
    c = p.c
    mu1, _ = layer_eigenvalues(u_tau, c, p.a)
    return np.column_stack([[1.0, fp, 0.0, (p.gamma * fp - 1.0) / c], [fp, 0.0, fp * mu1, mu1]])


def plane_angle(F1: np.ndarray, F2: np.ndarray) -> float:
    return float(np.max(subspace_angles(np.asarray(F1), np.asarray(F2))))


@dataclass
class ReferencePlane:
    tau: float
    u_tau: float
    coords: np.ndarray
    transversality_margin: float
    model_angle: float
    stable_path: BundlePath = field(repr=False, default=None)

    @property
    def frame(self) -> np.ndarray:
        return frame_from_plucker(self.coords)


def find_tau(profile: WaveProfile, u_tau: float = DEFAULT_U_TAU) -> float:
    """Location on the left-branch return where the profile reaches ``u_tau``."""
    a = profile.params.a
    landing = jump_off_u(a) - 1.0
    if not (landing < u_tau < 0.0):
        raise NoAdmissibleTau(f"u_tau={u_tau} must lie strictly between {landing:.6g} and 0")
    zb = back_centre(profile)
    z, u = profile.z, profile.U[:, 0]
    i_min = int(np.argmin(np.where(z > zb, u, np.inf)))
    if u[i_min] >= u_tau:
        raise NoAdmissibleTau("profile never goes below u_tau on the return")
    idx = np.nonzero((z[:-1] >= z[i_min]) & (u[:-1] < u_tau) & (u[1:] >= u_tau))[0]
    if idx.size == 0:
        raise NoAdmissibleTau("profile does not recover to u_tau inside the domain")
    i = idx[0]
    return float(brentq(lambda s: float(profile.u_hat(s)) - u_tau, z[i], z[i + 1], xtol=1e-12))


def compute_reference_plane(profile: WaveProfile, u_tau: float = DEFAULT_U_TAU, tol: float = 1e-10,
                            margin_threshold: float = 1e-6) -> ReferencePlane:
    tau = find_tau(profile, u_tau)
    Es = compute_stable_bundle(profile, 0.0, tau, tol=tol)
    Vu, _, _ = rest_planes(0.0, profile.params_c)
    pu = minors(Vu)
    pu /= np.linalg.norm(pu)
    margin = float(min(abs(detection_form(pu, c)) for c in Es.coords))
    if margin <= margin_threshold:
        raise NoAdmissibleTau(f"E^s(0,z) meets V^u(0) for some z >= tau (margin {margin:.2e})")
    coords = Es.coords[-1]
    model = reference_plane_model(float(profile.u_hat(tau)), profile.params_c)
    angle = plane_angle(frame_from_plucker(coords), model)
    return ReferencePlane(tau=tau, u_tau=float(profile.u_hat(tau)), coords=coords, transversality_margin=margin,
                          model_angle=angle, stable_path=Es)


# ---------------------------------------------------------------- crossings


@dataclass
class Crossing:
    z: float
    dim: int
    xi: list
    gamma_value: float
    sign: int
    segment: str
    u: float


@dataclass
class ConjugateLedger:
    entries: list
    tau: float
    n_plus: int
    endpoint_gamma: float
    endpoint_alignment: float
    total: int | None = None
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    beta_trace: np.ndarray | None = field(default=None, repr=False)  # rows (z, u_hat, beta)

    @property
    def signs(self) -> list[int]:
        return [e.sign for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "params": self.params,
            "entries": [
                {"z": e.z, "dim": e.dim, "gamma": e.gamma_value, "sign": e.sign, "segment": e.segment,
                 "u": e.u, "xi": list(map(float, e.xi))}
                for e in self.entries
            ],
            "endpoint": {"tau": self.tau, "n_plus": self.n_plus, "gamma": self.endpoint_gamma},
            "total": self.total,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path=None) -> str:
        from .io import dumps_json

        text = dumps_json(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _json_float(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def crossing_form_sign(xi: np.ndarray, z_star: float, profile: WaveProfile,
                       threshold: float = GAMMA_THRESHOLD) -> tuple[float, int]:
    """Gamma = omega(xi, A(0, z*) xi) and its sign.

    Regularity is judged on unit xi.  The returned value uses xi scaled to
    unit u-component (the usual normalization of eigen-directions here);
    if the u-component is negligible, the unit-norm value is returned.
    """
    xi = _unit(np.asarray(xi, float))
    A = linearization(float(profile.u_hat(z_star)), 0.0, profile.params_c)
    val = symplectic_form(xi, A @ xi)
    if abs(val) <= threshold:
        raise DegenerateCrossing(z_star, val)
    if abs(xi[0]) > 1e-3:
        val = val / xi[0] ** 2
    return val, int(np.sign(val))


def classify_segment(profile: WaveProfile, z: float, radius: float = CORNER_RADIUS) -> str:
    U = profile(z)
    corners = corner_points(profile.params)
    for name in ("p", "q", "q_hat"):
        if np.linalg.norm(U - corners[name]) < radius:
            return "corner"
    fast = abs(U[2]) > 1e-2
    if fast:
        return "front" if z < back_centre(profile) else "back"
    return "slow_right" if U[0] > inflection_u(profile.params.a) else "slow_left"


def locate_conjugate_points(profile: WaveProfile, Eu: BundlePath, ref: ReferencePlane, ztol: float = 1e-8,
                            end_guard: float = 1e-6, subdivide: int = 6) -> list[Crossing]:
    """Zeros of the detection form between E^u(0, z) and the reference plane on (-L, tau)."""
    q = ref.coords
    zs = Eu.z
    keep = zs < ref.tau - end_guard
    zs = zs[keep]
    beta = np.array([detection_form(c, q) for c in Eu.coords[keep]])
    # Refine intervals where |beta| dips without a sign change (possible double zero).
    extra = []
    for k in range(1, beta.size - 1):
        if beta[k - 1] * beta[k] > 0 and beta[k] * beta[k + 1] > 0 and abs(beta[k]) < min(abs(beta[k - 1]), abs(beta[k + 1])):
            for zz in np.linspace(zs[k - 1], zs[k + 1], 2 * subdivide + 1)[1:-1]:
                extra.append(zz)
    if extra:
        z_all = np.concatenate([zs, extra])
        b_all = np.concatenate([beta, [detection_form(Eu.at(zz), q) for zz in extra]])
        order = np.argsort(z_all)
        zs, beta = z_all[order], b_all[order]
    out = []
    Es_frame = frame_from_plucker(q)
    for k in range(beta.size - 1):
        if beta[k] == 0.0 or beta[k] * beta[k + 1] < 0:
            za, zb = zs[k], zs[k + 1]
            if beta[k] == 0.0:
                zstar = za
            else:
                zstar = brentq(lambda s: detection_form(Eu.at(s), q), za, zb, xtol=ztol, rtol=1e-15)
            dim, vecs, _ = intersection(frame_from_plucker(Eu.at(zstar)), Es_frame)
            if dim == 0:
                # the tolerance in z leaves a tiny angle; take the closest direction
                dim_eff, vecs = 1, _closest_direction(frame_from_plucker(Eu.at(zstar)), Es_frame)
            else:
                dim_eff = dim
            xi = vecs[:, 0]
            val, sgn = crossing_form_sign(xi, zstar, profile)
            out.append(Crossing(float(zstar), int(dim_eff), xi.tolist(), float(val), sgn,
                                classify_segment(profile, zstar), float(profile.u_hat(zstar))))
    return out


def _closest_direction(F1, F2):
    Q1, _ = np.linalg.qr(F1)
    Q2, _ = np.linalg.qr(F2)
    _, _, vt = np.linalg.svd(np.hstack([Q1, -Q2]))
    v = Q1 @ vt[-1, :2]
    return _unit(v)[:, None]


def maslov_index(entries, n_plus: int) -> int:
    return int(sum(int(e.sign if hasattr(e, "sign") else e) for e in entries) + int(n_plus))


def compute_maslov(profile: WaveProfile, u_tau: float = DEFAULT_U_TAU, tol: float = 1e-10,
                   max_tau_shifts: int = 3) -> ConjugateLedger:
    """Full conjugate-point ledger and Maslov index at lam = 0."""
    target = u_tau
    for attempt in range(max_tau_shifts + 1):
        try:
            return _compute_maslov_once(profile, target, tol)
        except DegenerateCrossing as err:
            log.warning("%s; moving tau", err)
            target = target * 1.05
    raise DegenerateCrossing(float("nan"), 0.0)


def _compute_maslov_once(profile: WaveProfile, u_tau: float, tol: float) -> ConjugateLedger:
    ref = compute_reference_plane(profile, u_tau, tol=tol)
    Eu = compute_unstable_bundle(profile, 0.0, z_end=ref.tau, tol=tol)
    entries = locate_conjugate_points(profile, Eu, ref)
    # endpoint: phi'(tau) lies in both planes
    dphi = _unit(profile.derivative(ref.tau))
    dim, vecs, svals = intersection(frame_from_plucker(Eu.coords[-1]), ref.frame)
    xi_end = vecs[:, 0] if dim else _closest_direction(frame_from_plucker(Eu.coords[-1]), ref.frame)[:, 0]
    align = float(math.acos(min(1.0, abs(np.dot(_unit(xi_end), dphi)))))
    g_end, _ = crossing_form_sign(dphi, ref.tau, profile)
    n_plus = int(g_end > 0)
    p = profile.params
    ledger = ConjugateLedger(entries=entries, tau=ref.tau, n_plus=n_plus, endpoint_gamma=float(g_end),
                             endpoint_alignment=align,
                             params={"a": p.a, "gamma": p.gamma, "eps": p.eps, "c": profile.c, "u_tau": ref.u_tau})
    ledger.total = maslov_index(entries, n_plus)
    beta = np.array([detection_form(cz, ref.coords) for cz in Eu.coords])
    ledger.beta_trace = np.column_stack([Eu.z, profile.u_hat(Eu.z), beta])
    ledger.diagnostics = {
        "reference_model_angle": ref.model_angle,
        "transversality_margin": ref.transversality_margin,
        "max_lagrangian_residual_unstable": Eu.max_lagrangian_residual(),
        "max_lagrangian_residual_stable": ref.stable_path.max_lagrangian_residual(),
        "endpoint_dim": int(dim),
        "endpoint_alignment_rad": align,
        "n_unstable_samples": int(Eu.z.size),
    }
    return ledger


# ---------------------------------------------------------------- eigenvalue scan


@dataclass
class ScanResult:
    lambdas: np.ndarray
    values: np.ndarray
    sign_changes: int
    zeros: int
    failed_at: float | None = None

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "lambdas": self.lambdas.tolist(), "detection": self.values.tolist(),
                "sign_changes": self.sign_changes, "zeros": self.zeros, "failed_at": self.failed_at}


def evans_detection(profile: WaveProfile, lam: float, z_match: float = 0.0, tol: float = 1e-10) -> float:
    """Detection form between E^u(lam, z_match) and E^s(lam, z_match); zero iff lam is an eigenvalue."""
    Eu = compute_unstable_bundle(profile, lam, z_end=z_match, tol=tol, method="plucker")
    Es = compute_stable_bundle(profile, lam, z_match, tol=tol)
    return detection_form(Eu.coords[-1], Es.coords[-1])


def eigenvalue_scan(profile: WaveProfile, lambda_grid, tol: float = 1e-10, z_match: float = 0.0) -> ScanResult:
    lams = np.asarray(lambda_grid, float)
    if np.any(lams <= 0):
        raise ValueError("scan grid must be positive (the translation eigenvalue sits at 0)")
    vals = []
    failed = None
    for lam in lams:
        try:
            vals.append(evans_detection(profile, float(lam), z_match, tol))
        except IntegrationFailure as err:
            log.warning("scan stopped at lam=%.4g: %s", lam, err)
            failed = float(lam)
            break
    vals = np.array(vals)
    s = np.sign(vals)
    zeros = int(np.sum(s == 0))
    nz = s[s != 0]
    changes = int(np.sum(nz[1:] != nz[:-1]))
    return ScanResult(lams[: vals.size], vals, changes, zeros, failed)


# ---------------------------------------------------------------- symplectic conservation


@dataclass
class ConservationReport:
    lam: float
    z_span: tuple
    max_drift: float
    max_lagrangian_residual: float
    n_windows: int
    n_steps: int


def symplectic_conservation(profile: WaveProfile, lam: float, z_span=None, tol: float = 1e-10,
                            window_norm: float = 1e3, bundle: str = "unstable") -> ConservationReport:
    """Check that e^{cz} omega(u, v) is constant for all pairs of solutions along a bundle integration.

    The chosen bundle is integrated over ``z_span`` (backwards for the stable one); its accepted step grid is then
    replayed with the same propagator. Over each window the transfer matrix Phi must
    satisfy e^{c dz} Phi^T J Phi = J, which is the conservation law for every pair of
    basis solutions at once. Windows close when ||Phi|| exceeds ``window_norm``, so
    the entries of Phi^T J Phi stay well above rounding.
    """
    p = profile.params_c
    z0, z1 = (profile.z[0], profile.z[-1]) if z_span is None else z_span
    A = A_along(profile, lam)
    Vu, Vs, _ = rest_planes(lam, p)
    if bundle == "unstable":
        path = integrate_plucker(A, minors(Vu), (z0, z1), tol=tol, lagrangian=True)
    elif bundle == "stable":
        path = integrate_plucker(A, minors(Vs), (z1, z0), tol=tol, lagrangian=True)
    else:
        raise ValueError(f"bundle must be 'unstable' or 'stable', got {bundle!r}")
    zs = path.z
    worst, windows = 0.0, 1
    Phi, zw = np.eye(4), zs[0]
    for za, zb in zip(zs[:-1], zs[1:]):
        Phi = magnus_step(A, za, zb - za) @ Phi
        d = float(np.max(np.abs(math.exp(p.c * (zb - zw)) * Phi.T @ J @ Phi - J)))
        worst = max(worst, d)
        if np.linalg.norm(Phi, 2) > window_norm:
            Phi, zw, windows = np.eye(4), zb, windows + 1
    return ConservationReport(lam=float(lam), z_span=(float(z0), float(z1)), max_drift=worst,
                              max_lagrangian_residual=path.max_lagrangian_residual(),
                              n_windows=windows, n_steps=len(zs) - 1)
