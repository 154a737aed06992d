"""``maslov-wave`` command line: one subcommand per experiment, JSON config plus flag overrides."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .io import SCHEMA_VERSION, write_csv, write_json

log = logging.getLogger("maslov_wave")

SUBCOMMANDS = ("singular-orbit", "solve-wave", "maslov", "corners", "spectrum-scan", "pde-sim")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    a: float = 0.25
    gamma: float = 1.0
    eps: float = 1e-4
    eps_list: list = field(default_factory=list)
    L_dom: float | None = None
    resolution: float = 0.12
    tol: float = 1e-10
    tol_bc: float = 1e-3
    u_tau: float = -0.005
    lam_min: float = 0.01
    lam_max: float = 1.0
    n_lam: int = 50
    n_a: int = 50
    pde_dx: float = 0.1
    pde_dt: float = 0.1
    pde_T: float = 400.0
    pde_amplitude: float = 0.05
    pde_perturbation: str = "bump"
    out: str = "out"

    def validate(self) -> "RunConfig":
        from .core_dynamics import Params

        Params(a=self.a, gamma=self.gamma, eps=self.eps)  # raises on a domain violation
        for name in ("resolution", "tol", "tol_bc", "lam_max", "pde_dx", "pde_dt", "pde_T", "pde_amplitude"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.lam_min < self.lam_max:
            raise ConfigError("need 0 < lam_min < lam_max (lam = 0 is the translation eigenvalue)")
        if self.n_lam < 2 or self.n_a < 1:
            raise ConfigError("n_lam >= 2 and n_a >= 1 required")
        if any(e <= 0 for e in self.eps_list):
            raise ConfigError("eps_list entries must be positive")
        if self.pde_perturbation not in ("bump", "translation", "zero"):
            raise ConfigError(f"unknown perturbation {self.pde_perturbation!r}")
        return self

    @property
    def params(self):
        from .core_dynamics import Params

        return Params(a=self.a, gamma=self.gamma, eps=self.eps)

    def resolved(self) -> dict:
        """Config as embedded in outputs; the output directory is left out so runs are relocatable."""
        d = asdict(self)
        d.pop("out")
        return d

    def pulse_kw(self) -> dict:
        kw = {"resolution": self.resolution, "tol": self.tol, "tol_bc": self.tol_bc}
        if self.L_dom is not None:
            kw["L_dom"] = self.L_dom
        return kw


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path:
        with open(path) as fh:
            data = json.load(fh)
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**data).validate()


# ---------------------------------------------------------------- subcommands


def _singular_orbit(cfg: RunConfig, out: Path) -> list[Path]:
    from .singular import (assemble_singular_orbit, jump_off_u, jump_off_v, k_closed_form, k_quadrature,
                           melnikov_front_closed, melnikov_integrals, singular_speed)

    p = cfg.params
    orbit = assemble_singular_orbit(p)
    orbit.to_csv(out / "orbit.csv")
    mel = melnikov_integrals(p.a)
    consts = {
        "c_star": singular_speed(p.a), "u_star": jump_off_u(p.a), "v_star": jump_off_v(p.a),
        "K_closed": k_closed_form(p.a), "K_quadrature": k_quadrature(p.a),
        "melnikov_front": mel.front, "melnikov_front_closed": melnikov_front_closed(p.a),
        "melnikov_back": mel.back,
        "corners": {"p": orbit.p, "q": orbit.q, "q_hat": orbit.q_hat},
    }
    write_json(out / "constants.json", _wrap(cfg, consts))
    return [out / "orbit.csv", out / "constants.json"]


def _solve_wave(cfg: RunConfig, out: Path) -> list[Path]:
    from .wave import continue_in_eps, pulse_at

    p = cfg.params
    eps_list = sorted(cfg.eps_list) if cfg.eps_list else [cfg.eps]
    profiles, failure = [], None
    try:
        if len(eps_list) == 1:
            profiles = [pulse_at(p.with_(eps=eps_list[0]), **cfg.pulse_kw())]
        else:
            first = pulse_at(p.with_(eps=eps_list[0]), **cfg.pulse_kw())
            profiles = [first] + continue_in_eps(p, eps_list[1:], seed=first, **cfg.pulse_kw())
    except RuntimeError as err:
        failure = str(err)
    paths = []
    rows = []
    for prof in profiles:
        path = out / f"profile_eps{prof.eps:.6g}.csv"
        prof.to_csv(path)
        paths.append(path)
        rows.append({"eps": prof.eps, "c": prof.c, "c_minus_c_star": prof.c - p.c_star,
                     "residual": prof.residual, "n_mesh": int(prof.z.size)})
    report = {"speeds": rows, "c_star": p.c_star, "failure": failure}
    if len(rows) >= 2:
        e = np.array([r["eps"] for r in rows])
        d = np.abs([r["c_minus_c_star"] for r in rows])
        report["loglog_slope"] = float(np.polyfit(np.log(e), np.log(d), 1)[0])
    write_json(out / "speeds.json", _wrap(cfg, report))
    paths.append(out / "speeds.json")
    if failure is not None:
        raise RuntimeError(failure)
    return paths


def _maslov(cfg: RunConfig, out: Path) -> list[Path]:
    from .maslov import compute_maslov
    from .wave import pulse_at

    prof = pulse_at(cfg.params, **cfg.pulse_kw())
    ledger = compute_maslov(prof, u_tau=cfg.u_tau, tol=cfg.tol)
    data = ledger.to_dict()
    data["config"] = cfg.resolved()
    write_json(out / "ledger.json", data)
    write_csv(out / "beta_trace.csv", ["z", "u", "beta"], ledger.beta_trace.tolist())
    return [out / "ledger.json", out / "beta_trace.csv"]


def _corners(cfg: RunConfig, out: Path) -> list[Path]:
    from .corners import a_grid, corner_sweep, shayman_classification
    from .singular import jump_off_u

    sweep = corner_sweep(a_grid(cfg.n_a), gamma=cfg.gamma)
    p = cfg.params
    shay = {}
    for label, u in (("origin", 0.0), ("p", 1.0), ("q", jump_off_u(p.a))):
        rep = shayman_classification(u, p)
        shay[label] = {"u": u, "eigenvalues": rep.eigenvalues, "unstable_dims": rep.unstable_dims(),
                       "points": [asdict(fp) for fp in rep.points], "non_lagrangian_omega": rep.non_lagrangian}
    write_json(out / "corners.json", _wrap(cfg, {"sweep": sweep, "shayman": shay}))
    return [out / "corners.json"]


def _spectrum_scan(cfg: RunConfig, out: Path) -> list[Path]:
    from .maslov import eigenvalue_scan
    from .wave import pulse_at

    prof = pulse_at(cfg.params, **cfg.pulse_kw())
    grid = np.linspace(cfg.lam_min, cfg.lam_max, cfg.n_lam)
    res = eigenvalue_scan(prof, grid, tol=cfg.tol)
    write_csv(out / "scan.csv", ["lambda", "detection"], np.column_stack([res.lambdas, res.values]).tolist())
    summary = {"sign_changes": res.sign_changes, "zeros": res.zeros, "failed_at": res.failed_at,
               "n_evaluated": int(res.lambdas.size), "c": prof.c}
    write_json(out / "scan.json", _wrap(cfg, summary))
    return [out / "scan.csv", out / "scan.json"]


def _pde_sim(cfg: RunConfig, out: Path) -> list[Path]:
    from .pde import bump, evolve, grid_for, plateau_centre, translation_mode, zero_perturbation
    from .wave import pulse_at, remesh

    prof = remesh(pulse_at(cfg.params, **cfg.pulse_kw()), refine=1, tol_bc=cfg.tol_bc)
    grid = grid_for(prof, dx=cfg.pde_dx, dt=cfg.pde_dt)
    pert = {"bump": lambda: bump(plateau_centre(prof), cfg.pde_amplitude),
            "translation": lambda: translation_mode(prof, 0.01),
            "zero": lambda: zero_perturbation}[cfg.pde_perturbation]()
    trace = evolve(grid, prof, pert, cfg.pde_T)
    trace.to_csv(out / "decay.csv")
    summary = {"d0": trace.d[0], "d_end": trace.d[-1], "ratio": trace.ratio, "k_end": trace.k[-1],
               "nx": grid.nx, "dx": grid.dx, "c": prof.c}
    write_json(out / "decay.json", _wrap(cfg, summary))
    return [out / "decay.csv", out / "decay.json"]


HANDLERS = {
    "singular-orbit": _singular_orbit,
    "solve-wave": _solve_wave,
    "maslov": _maslov,
    "corners": _corners,
    "spectrum-scan": _spectrum_scan,
    "pde-sim": _pde_sim,
}


def _wrap(cfg: RunConfig, payload: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "config": cfg.resolved(), "result": payload}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="maslov-wave", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with RunConfig keys")
        sp.add_argument("--a", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--eps-list", type=lambda s: [float(x) for x in s.split(",")], dest="eps_list")
        sp.add_argument("--u-tau", type=float, dest="u_tau")
        sp.add_argument("--perturbation", dest="pde_perturbation", choices=["bump", "translation", "zero"])
        sp.add_argument("--T", type=float, dest="pde_T")
        sp.add_argument("--out", help="output directory")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in ("a", "gamma", "eps", "eps_list", "u_tau", "pde_perturbation",
                                               "pde_T", "out")}
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, OSError, TypeError) as err:
        print(json.dumps({"schema_version": SCHEMA_VERSION, "status": "error", "stage": "config",
                          "error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return 2
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"schema_version": SCHEMA_VERSION, "command": args.command, "config": cfg.resolved()}
    try:
        paths = HANDLERS[args.command](cfg, out)
    except Exception as err:  # report every module failure in a structured way
        manifest.update(status="error", error=type(err).__name__, message=str(err))
        write_json(out / "manifest.json", manifest)
        log.debug("%s", traceback.format_exc())
        print(json.dumps({"status": "error", "error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return 1
    manifest.update(status="ok", artifacts=sorted(str(pth.name) for pth in paths))
    write_json(out / "manifest.json", manifest)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
