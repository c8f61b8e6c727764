"""Command-line front end.

Exit codes: 0 success, 1 integration failure, 2 domain or hypothesis error,
3 periodic search that ran cleanly but found nothing.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import action_angle as aa
from . import unperturbed as ua
from .dynamics import PerturbationSpec, PhysParams, to_cartesian
from .errors import DomainError, IntegrationError, RegimeError
from .integrator import DEFAULT_CONFIG, IntegratorConfig, integrate
from .periodic import SHOOT_CONFIG, SearchConfig, find_periodic
from .serialize import dumps, fmt_float

EXIT_OK, EXIT_FAIL, EXIT_DOMAIN, EXIT_EMPTY = 0, 1, 2, 3
SWEEP_COLUMNS = ["n", "k", "sign", "eps", "found", "min_residual", "max_closeness", "status"]


@dataclass
class RunConfig:
    params: PhysParams = field(default_factory=PhysParams)
    integrator: IntegratorConfig = DEFAULT_CONFIG
    perturbation: PerturbationSpec | None = None
    output: dict = field(default_factory=lambda: {"format": "json", "path": None})
    jobs: int = 1

    @classmethod
    def from_args(cls, args):
        raw = json.loads(Path(args.config).read_text()) if args.config else {}
        p = dict(raw.get("params", {}))
        for key in ("m", "c", "alpha"):
            if getattr(args, key) is not None:
                p[key] = getattr(args, key)
        params = PhysParams(**p)
        integ = raw.get("integrator")
        integ = IntegratorConfig.from_dict(integ) if integ else None
        overrides = {}
        if args.rel_tol is not None:
            overrides["rel_tol"] = args.rel_tol
        if args.abs_tol is not None:
            overrides["abs_tol"] = args.abs_tol
        pert = raw.get("perturbation")
        pert = PerturbationSpec.from_dict(pert) if pert else None
        out = {"format": "json", "path": None, **raw.get("output", {})}
        if args.format is not None:
            out["format"] = args.format
        if args.out is not None:
            out["path"] = args.out
        jobs = args.jobs if args.jobs is not None else int(raw.get("jobs", 1))
        cfg = cls(params, integ or DEFAULT_CONFIG, pert, out, jobs)
        cfg._integ_given = integ is not None
        cfg._overrides = overrides
        if overrides:
            cfg.integrator = cfg.integrator.replace(**overrides)
        return cfg

    def shooting_integrator(self):
        """Integrator settings for shooting: the tight default unless configured."""
        if getattr(self, "_integ_given", False):
            return self.integrator
        return SHOOT_CONFIG.replace(**getattr(self, "_overrides", {}))


def _emit(report, cfg, stream):
    if cfg.output["format"] == "csv" and isinstance(report, dict):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(report):
            w.writerow([k, fmt_float(v) if isinstance(v, float) else v])
        stream.write(buf.getvalue())
    else:
        stream.write(dumps(report))


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif isinstance(v, (list, tuple)):
            for i, x in enumerate(v):
                if isinstance(x, (list, tuple)):
                    for j, y in enumerate(x):
                        yield f"{key}[{i}][{j}]", y
                else:
                    yield f"{key}[{i}]", x
        else:
            yield key, v


def _outdir(cfg):
    d = Path(cfg.output["path"] or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _perturbation(args, cfg, T):
    if getattr(args, "pert", None):
        return PerturbationSpec.from_json(args.pert)
    if getattr(args, "pert_kind", None):
        return PerturbationSpec(args.pert_kind, amplitude=args.amplitude,
                                period=args.pert_period or T, table_path=args.table)
    if cfg.perturbation is not None:
        return cfg.perturbation
    return PerturbationSpec("dipole-cos", amplitude=1.0, period=T)


# ---------------------------------------------------------------------------
# Commands


def cmd_classify(h, L, cfg):
    oc = ua.classify(h, L, cfg.params)
    rep = {"h": h, "L": L, **oc.to_dict()}
    rep["violated"] = [k for k, v in oc.conditions.items() if not v]
    return rep


def _torus_report(torus, params):
    I = aa.torus_actions(torus, params)
    return {
        "T": torus.T, "n": torus.n, "k": torus.k, "sign": torus.sign,
        "h": torus.h, "L": torus.L, "k_star": torus.k_star, "r_star": torus.r_star,
        "T_star": ua.t_star(torus.n, params),
        "actions": [I.I1, I.I2],
        "resonance_vector": aa.resonance_vector(I, torus.T, params).tolist(),
        "det_hessian": aa.det_hess_K0(I, params),
    }


def cmd_torus(T, n, k, sign, cfg):
    return _torus_report(ua.make_torus(T, n, k, sign, cfg.params), cfg.params)


def cmd_actions(h, L, cfg):
    I = aa.actions_from(h, L, cfg.params)
    return {"h": h, "L": L, "I1": I.I1, "I2": I.I2, "K0": aa.K0(I, cfg.params),
            "grad_K0": aa.grad_K0(I, cfg.params).tolist(),
            "hessian_K0": aa.hess_K0(I, cfg.params).tolist(),
            "det_hessian": aa.det_hess_K0(I, cfg.params)}


def orbit_curves(h, L, cfg, n_periods=1, samples=721):
    """Closed-form orbit ``rho(theta)`` and the integrated trajectory over ``n_periods`` radial periods.

    Both start at the pericenter on the positive x1 axis. Returns
    ``(rho_csv_text, trajectory, summary)``.
    """
    params = cfg.params
    oc = ua.require_closed(h, L, params, allow_circular=True)
    r_m, r_M = ua.radial_bounds(h, abs(L), params)
    span = n_periods * ua.apsidal_angle(abs(L), params)
    theta = span * np.arange(samples) / (samples - 1)
    rho = ua.polar_orbit_rho(theta, h, abs(L), 0.0, params)
    rho = np.broadcast_to(rho, theta.shape)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "rho", "x1", "x2"])
    s = math.copysign(1.0, L)
    for th, r in zip(theta, rho):
        w.writerow([fmt_float(v) for v in (th, r, r * math.cos(th), s * r * math.sin(th))])
    T = n_periods * ua.period_radial(h, params)
    z0 = to_cartesian((r_m, 0.0, 0.0, L)).z
    traj = integrate(z0, 0.0, T, params, config=cfg.integrator)
    r_num = traj.radius
    r_cf = ua.polar_orbit_rho(s * traj.theta, h, abs(L), 0.0, params)
    summary = {"h": h, "L": L, "class": oc.tag, "r_min": r_m, "r_max": r_M,
               "rho_coefficients": list(ua.rho_coefficients(h, abs(L), params)),
               "apsidal_angle": ua.apsidal_angle(abs(L), params),
               "period": T, "steps": int(len(traj.times)),
               "sup_gap": float(np.max(np.abs(r_num - r_cf)))}
    return buf.getvalue(), traj, summary


def cmd_orbit(args, cfg):
    params = cfg.params
    n_periods = 1
    if args.T is not None:
        if args.n is None or args.k is None:
            raise DomainError("--T needs --n and --k")
        torus = ua.make_torus(args.T, args.n, args.k, args.sign, params)
        h, L, n_periods = torus.h, torus.L, torus.n
    else:
        if args.h is None:
            raise DomainError("orbit needs --h with --L or --n/--k, or --T/--n/--k")
        h = args.h
        if args.L is not None:
            L = args.L
        elif args.n is not None and args.k is not None:
            L = args.sign * ua.commensurable_L(args.n, args.k, params)
            n_periods = args.n
        else:
            raise DomainError("orbit needs --L or --n/--k")
    rho_text, traj, summary = orbit_curves(h, L, cfg, n_periods, args.samples)
    out = _outdir(cfg)
    _write(out / "rho.csv", rho_text)
    traj.to_csv(out / "trajectory.csv")
    summary["files"] = ["rho.csv", "trajectory.csv"]
    _write(out / "orbit.json", dumps(summary))
    return summary


def run_search(T, n, k, sign, eps, pert, cfg, n_omega=12, n_tau=12):
    search = SearchConfig(n_omega=n_omega, n_tau=n_tau, jobs=cfg.jobs,
                          integrator=cfg.shooting_integrator())
    return find_periodic(T, n, k, sign, eps, pert, cfg.params, search)


def cmd_find_periodic(args, cfg):
    pert = _perturbation(args, cfg, args.T)
    res = run_search(args.T, args.n, args.k, args.sign, args.eps, pert, cfg,
                     args.n_omega, args.n_tau)
    out = _outdir(cfg)
    files = []
    for i, s in enumerate(res.solutions):
        name = f"solution_{i:03d}.csv"
        s.trajectory.to_csv(out / name)
        files.append(name)
    _write(out / "result.json", res.to_json())
    return res, files


def _grid_cells(spec):
    if "cells" in spec:
        return [(int(c["n"]), int(c["k"]), int(c.get("sign", 1)), float(c["eps"]))
                for c in spec["cells"]]
    g = spec.get("grid", {})
    keys = ("n", "k", "sign", "eps")
    vals = [g.get(key, [1] if key == "sign" else []) for key in keys]
    return [(int(n), int(k), int(s), float(e)) for n, k, s, e in itertools.product(*vals)]


def cmd_sweep(spec_path, cfg):
    spec = json.loads(Path(spec_path).read_text())
    T = float(spec.get("T", 20 * math.pi))
    pert = PerturbationSpec.from_dict(spec["perturbation"]) if "perturbation" in spec \
        else (cfg.perturbation or PerturbationSpec("dipole-cos", 1.0, T))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    rows = []
    for n, k, sign, eps in _grid_cells(spec):
        try:
            res = run_search(T, n, k, sign, eps, pert, cfg, int(spec.get("n_omega", 12)),
                             int(spec.get("n_tau", 12)))
            found = len(res)
            min_res = min((s.residual for s in res), default=math.nan)
            max_close = max((s.closeness for s in res), default=math.nan)
            status = "ok" if found else "empty"
        except (DomainError, IntegrationError) as exc:
            found, min_res, max_close, status = 0, math.nan, math.nan, f"error: {exc}"
        row = [n, k, sign, fmt_float(eps), found, fmt_float(min_res), fmt_float(max_close),
               status]
        w.writerow(row)
        rows.append(dict(zip(SWEEP_COLUMNS, row)))
    out = _outdir(cfg)
    _write(out / "sweep.csv", buf.getvalue())
    return rows


# ---------------------------------------------------------------------------
# Argument parsing


def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--m", type=float, help="rest mass (default 1)")
    g.add_argument("--c", type=float, help="speed of light (default 1)")
    g.add_argument("--alpha", type=float, help="strength of the attractive 1/r potential (default 1)")
    g.add_argument("--rel-tol", type=float, help="integrator relative tolerance")
    g.add_argument("--abs-tol", type=float, help="integrator absolute tolerance")
    g.add_argument("--out", help="output file or directory")
    g.add_argument("--format", choices=["json", "csv"], help="report format on stdout")
    g.add_argument("--jobs", type=int, help="threads for concurrent shooting")
    g.add_argument("--config", help="JSON file with params/integrator/perturbation/output")
    return p


def _pert_args(p):
    p.add_argument("--pert", help="JSON file describing the perturbation")
    p.add_argument("--pert-kind", choices=["none", "dipole-cos", "radial-cos", "custom-table"])
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--pert-period", type=float, help="period of U in t (default T)")
    p.add_argument("--table", help="CSV table t,r,theta,U for custom-table")


def build_parser():
    common = _common()
    ap = argparse.ArgumentParser(
        prog="relkepler",
        description="Relativistic Kepler problem H0 = m c^2 sqrt(1 + |p|^2/(m^2 c^2)) - alpha/|x| "
                    "and its T-periodic perturbations H0 + eps U(t, x).")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common],
                       help="closed-orbit regime of (h, L)",
                       description="Classify (h, L): closed orbits need 0 < h < m c^2 and "
                                   "alpha^2/c^2 < L^2 < alpha^2 m^2 c^2/(m^2 c^4 - h^2); "
                                   "equality on the right is the circular orbit. Reports "
                                   "r* = (alpha^2 - L^2 c^2)/(-alpha h) and the apsidal radii.")
    p.add_argument("--h", type=float, required=True, help="energy level of H0")
    p.add_argument("--L", type=float, required=True, help="angular momentum")

    p = sub.add_parser("torus", parents=[common],
                       help="resonant torus (T, n, k) constants",
                       description="Energy h with n T_h = T, T_h = 2 pi alpha m^2 c^3/(m^2 c^4 - h^2)^(3/2); "
                                   "L = (alpha/c) sqrt(k^2/(k^2 - n^2)); k* = floor(m c^2 n/h) + 1; "
                                   "needs T > 2 pi n alpha/(m c^3), gcd(n, k) = 1 and k >= k*. "
                                   "Also prints the actions, T grad K0/(2 pi) and det of the Hessian of K0.")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--sign", type=int, choices=[1, -1], default=1)

    p = sub.add_parser("actions", parents=[common],
                       help="actions, K0, gradient and Hessian at (h, L)",
                       description="I1 = A(h, L)/(2 pi) + L, I2 = L, with A the area inside "
                                   "l^2 = phi_{h,L}(r); K0 = m c^2 S/sqrt(S^2 + alpha^2/c^2), "
                                   "S = I1 - I2 + sqrt(c^2 I2^2 - alpha^2)/c.")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--L", type=float, required=True)

    p = sub.add_parser("orbit", parents=[common],
                       help="closed-form orbit rho(theta) and integrated trajectory CSVs",
                       description="Writes rho.csv with 1/rho = A cos(nu theta) + B, "
                                   "nu = sqrt(1 - alpha^2/(c^2 L^2)), trajectory.csv from the "
                                   "integrator, and orbit.json with the sup gap between them.")
    p.add_argument("--h", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--sign", type=int, choices=[1, -1], default=1)
    p.add_argument("--samples", type=int, default=721)

    p = sub.add_parser("find-periodic", parents=[common],
                       help="shooting search for T-periodic solutions near a resonant torus",
                       description="Multi-start Newton shooting on Phi_T(z) - z seeded from the "
                                   "(T, n, k, sign) torus; certified solutions have winding "
                                   "sign*k and 2n crossings of r*. Writes result.json and one "
                                   "trajectory CSV per solution. Exit 3 if none is found.")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--sign", type=int, choices=[1, -1], default=1)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--n-omega", type=int, default=12)
    p.add_argument("--n-tau", type=int, default=12)
    _pert_args(p)

    p = sub.add_parser("sweep", parents=[common],
                       help="find-periodic over a grid of (n, k, sign, eps)",
                       description="Spec file keys: T, perturbation, n_omega, n_tau, and either "
                                   "cells: [{n, k, sign, eps}] or grid: {n: [], k: [], sign: [], "
                                   "eps: []}. Writes sweep.csv with columns " + ",".join(SWEEP_COLUMNS))
    p.add_argument("spec", help="JSON sweep specification")
    return ap


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        if args.command == "classify":
            _emit(cmd_classify(args.h, args.L, cfg), cfg, stdout)
        elif args.command == "torus":
            _emit(cmd_torus(args.T, args.n, args.k, args.sign, cfg), cfg, stdout)
        elif args.command == "actions":
            _emit(cmd_actions(args.h, args.L, cfg), cfg, stdout)
        elif args.command == "orbit":
            _emit(cmd_orbit(args, cfg), cfg, stdout)
        elif args.command == "find-periodic":
            res, files = cmd_find_periodic(args, cfg)
            doc = res.to_dict()
            doc["files"] = ["result.json", *files]
            _emit(doc, cfg, stdout)
            if not res.solutions:
                stderr.write("search ran cleanly but found no periodic solution\n")
                return EXIT_EMPTY
        elif args.command == "sweep":
            rows = cmd_sweep(args.spec, cfg)
            _emit({"cells": len(rows), "file": "sweep.csv"}, cfg, stdout)
    except RegimeError as exc:
        stderr.write(f"error: {exc}\n")
        stderr.write(dumps(exc.to_dict()))
        return EXIT_DOMAIN
    except DomainError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except IntegrationError as exc:
        stderr.write(f"integration failed: {exc}\n")
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
