"""Command-line front end.

Usage: ``spincurv <command> [--config FILE] [flags]`` with commands
identities, geometry, solve, mass, spinor-op, sobolev, theorem1 and all.

Settings come from built-in defaults, then an INI-style config file, then the
``SPINCURV_OUT`` environment variable (output directory only), then flags.
Exit status: 0 all checks pass, 1 a check failed, 2 bad configuration or
input, 3 solver failure. Output files are written only once a command has
finished, each through a temporary file and a rename.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .clifford import build_clifford_rep, conjugated_rep, constant_curvature_tensor, random_curvature_tensor, spinor_curvature_square_stats
from .dirac import NegativeScalarCurvatureError, SolverError, decay_exponent, solve_boundary_problem
from .estimates import eta_catalog, mass_scaling_trend, theorem1_report
from .geometry import (
    Bump,
    MetricField,
    check_asymptotic_flatness,
    conformal_metric,
    curvature_at,
    euclidean_isoperimetric_constant,
    flat_metric,
    scalar_curvature_l1,
    sphere_directions,
)
from .grid import Grid, GridGeometry
from .mass import adm_mass, mass_inequality_report, mass_normalization
from .report import SCHEMA_VERSION, export_field, write_csv, write_json
from .sobolev import coarea_check, layer_cake, level_profile, reference_functions, sobolev_check
from .spinor_op import build_spinor_basis, exceptional_set, sobolev_exponent, spinor_operator_field

log = logging.getLogger("spincurv")

ENV_OUT = "SPINCURV_OUT"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
COMMANDS = ("identities", "geometry", "solve", "mass", "spinor-op", "sobolev", "theorem1", "all")
PDE_COMMANDS = {"solve", "mass", "spinor-op", "sobolev", "theorem1", "all"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int = 3
    metric: str = "conformal"
    m: float = 1.0
    bump_amplitude: float = 0.0
    bump_center: tuple | None = None
    bump_width: float = 1.0
    h: float = 0.25
    R_max: float = 8.0
    r_core: float | None = None
    tol: float = 1e-8
    max_iter: int = 100_000
    c_n: float | None = None
    k: float | None = None
    eta: str = "all"
    seed: int = 0
    out: str = "spincurv-out"
    refine: bool = False
    trend: bool = False

    def validate(self, command: str):
        if not 3 <= self.n <= 6:
            raise ConfigError("n must be between 3 and 6")
        if command in PDE_COMMANDS and self.n >= 5:
            raise ConfigError(f"'{command}' solves PDEs on n-dimensional grids; only n = 3, 4 are supported")
        if self.metric not in ("flat", "conformal"):
            raise ConfigError(f"unknown metric family {self.metric!r}")
        for name in ("h", "R_max", "tol", "bump_width"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("m", "bump_amplitude"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        for name in ("c_n", "k", "r_core"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_iter <= 0:
            raise ConfigError("max_iter must be positive")
        if self.eta not in ("all", "cutoff", "gaussian", "bump"):
            raise ConfigError(f"unknown weight {self.eta!r}")
        if self.bump_center is not None and len(self.bump_center) != self.n:
            raise ConfigError("bump center must have n coordinates")

    def metric_field(self, m: float | None = None) -> MetricField:
        if self.metric == "flat":
            return flat_metric(self.n, k_override=self.k)
        bump = None
        if self.bump_amplitude > 0:
            center = self.bump_center or (2.0,) + (0.0,) * (self.n - 1)
            bump = Bump(self.bump_amplitude, tuple(center), self.bump_width)
        return conformal_metric(self.n, self.m if m is None else m, bump=bump, k_override=self.k)

    def geometry(self, m: float | None = None) -> GridGeometry:
        metric = self.metric_field(m)
        rc = 0.5 * self.h if self.r_core is None else self.r_core
        if metric.family == "flat":
            rc = 0.0 if self.r_core is None else self.r_core
        return GridGeometry(metric, Grid(self.n, self.h, rc, self.R_max))


_SECTIONS = {
    "metric": {"family": "metric", "n": "n", "m": "m", "bump_amplitude": "bump_amplitude",
               "bump_center": "bump_center", "bump_width": "bump_width"},
    "grid": {"h": "h", "r_max": "R_max", "r_core": "r_core"},
    "solver": {"tol": "tol", "max_iter": "max_iter"},
    "constants": {"c_n": "c_n", "k": "k"},
    "run": {"eta": "eta", "seed": "seed", "out": "out", "refine": "refine", "trend": "trend"},
}


def _convert(name: str, raw):
    types = {f.name: f.type for f in fields(RunConfig)}
    t = types[name]
    if raw is None:
        return None
    try:
        if name == "bump_center":
            return tuple(float(v) for v in str(raw).replace(" ", "").split(",") if v)
        if name in ("refine", "trend"):
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return s in ("1", "true", "yes", "on")
        if "int" in str(t):
            return int(raw)
        if "float" in str(t):
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def load_config(path: str | None) -> dict:
    """Values from an INI file, keyed by RunConfig field name."""
    if path is None:
        return {}
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            name = _SECTIONS[sec][key]
            out[name] = _convert(name, raw)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spincurv", description="Curvature estimates via Dirac solutions.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--metric", choices=("flat", "conformal"))
    p.add_argument("--m", type=float)
    p.add_argument("--bump-amplitude", type=float)
    p.add_argument("--bump-center")
    p.add_argument("--bump-width", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--R-max", dest="R_max", type=float)
    p.add_argument("--r-core", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--c-n", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--eta", choices=("all", "cutoff", "gaussian", "bump"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--refine", action="store_true", default=None, help="add manufactured-field refinement studies")
    p.add_argument("--trend", action="store_true", default=None, help="record the theorem ratio over m in {0.25, 0.5, 1}")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = load_config(args.config)
    if os.environ.get(ENV_OUT):
        values["out"] = os.environ[ENV_OUT]
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = _convert(f.name, v)
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate(args.command)
    return cfg


# ---------------------------------------------------------------------------
# pipelines


class Session:
    """Shared state for one run: geometry, Dirac basis and cached data."""

    def __init__(self, cfg: RunConfig, want_basis: bool = False):
        self.cfg = cfg
        self.want_basis = want_basis
        self._geom = None
        self._basis = None
        self._op = None
        self.cache: dict = {}
        self.csv: dict = {}
        self.fields: dict = {}

    @property
    def geom(self) -> GridGeometry:
        if self._geom is None:
            self._geom = self.cfg.geometry()
        return self._geom

    @property
    def basis(self):
        if self._basis is None:
            self._basis = build_spinor_basis(self.geom, tol=self.cfg.tol, maxiter=self.cfg.max_iter)
        return self._basis

    @property
    def first_solution(self):
        """Solution with data (1, 0, ..., 0); reuses the basis if already built."""
        if self._basis is not None or self.want_basis:
            return self.basis.solutions[0]
        if "first" not in self.cache:
            psi0 = np.zeros(self.geom.N, dtype=complex)
            psi0[0] = 1.0
            self.cache["first"] = solve_boundary_problem(self.geom, psi0, tol=self.cfg.tol, maxiter=self.cfg.max_iter)
        return self.cache["first"]

    @property
    def op(self):
        if self._op is None:
            self._op = spinor_operator_field(self.basis)
        return self._op

    @property
    def c_n(self) -> float:
        return self.cfg.c_n or mass_normalization(self.cfg.n)


def run_identities(s: Session) -> dict:
    cfg = s.cfg
    n = cfg.n
    rng = np.random.default_rng(cfg.seed)
    rep = build_clifford_rep(n)
    anti, herm = rep.clifford_residuals()
    Rs = np.stack([random_curvature_tensor(n, rng) for _ in range(100)])
    st = spinor_curvature_square_stats(rep, Rs)
    N = rep.N
    rel = np.abs(st["trace_sum"] - N / 8 * st["riemann_norm_sq"]) / st["riemann_norm_sq"]
    excess = st["op_norm"] - np.sqrt(N / 8) * st["riemann_norm_sq"]
    const = spinor_curvature_square_stats(rep, constant_curvature_tensor(n))
    const_expected = N / 8 * 2 * n * (n - 1)
    # the trace identities do not depend on the chosen representation
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    U, _ = np.linalg.qr(A)
    st_u = spinor_curvature_square_stats(conjugated_rep(rep, U), Rs)
    rep_dev = float(np.abs(st_u["trace_sum"] - st["trace_sum"]).max())
    out = {
        "n": n, "N": N, "seed": cfg.seed,
        "anticommutator_residual": anti, "hermiticity_residual": herm,
        "trace_identity_max_rel_error": float(rel.max()),
        "op_norm_max_excess": float(excess.max()),
        "constant_curvature_trace_sum": float(const["trace_sum"]),
        "constant_curvature_expected": const_expected,
        "representation_change_deviation": rep_dev,
    }
    out["pass"] = bool(
        anti < 1e-12 and herm < 1e-12 and rel.max() < 1e-10 and excess.max() <= 1e-10
        and abs(const["trace_sum"] - const_expected) <= 1e-10 and rep_dev < 1e-10
    )
    return out


def run_geometry(s: Session) -> dict:
    cfg = s.cfg
    metric = cfg.metric_field()
    R = cfg.R_max
    rc = metric.r_core
    radii = [max(2 * R, 4 * rc) * f for f in (1, 2, 4, 8)]
    decay = check_asymptotic_flatness(metric, radii)
    dirs = sphere_directions(cfg.n)
    shells = np.linspace(max(rc, 0.1) * 1.05, R, 24)
    pts = (shells[:, None, None] * dirs[None]).reshape(-1, cfg.n)
    tau = curvature_at(metric, pts).scalar
    out = {"decay": decay.to_dict(), "min_scalar_curvature": float(tau.min())}
    ok = decay.passed or metric.family == "flat"
    ok &= float(tau.min()) >= -1e-8
    if metric.family == "flat":
        out["adm_mass"] = 0.0
    else:
        am = adm_mass(metric, [R * f for f in (1, 2, 4, 8, 16)], c_n=s.c_n)
        rel = abs(am.mass - metric.total_mass) / metric.total_mass if metric.total_mass > 0 else abs(am.mass)
        out.update(adm_mass=am.mass, adm_sequence=am.sequence, adm_radii=am.radii, adm_monotone=am.monotone,
                   expected_mass=metric.total_mass, adm_rel_error=rel)
        ok &= rel < 5e-3
        if cfg.n == 3:
            out["scalar_curvature_l1"] = scalar_curvature_l1(metric, [R, 2 * R])
    out["pass"] = bool(ok)
    return out


def run_solve(s: Session) -> dict:
    cfg = s.cfg
    geom = s.geom
    sol = s.first_solution
    out = {
        "iterations": sol.iterations, "relative_residual": sol.residual, "least_squares_residual_l2": sol.dirac_residual,
        "sup_norm": sol.sup_norm, "psi0": [1.0] + [0.0] * (geom.N - 1),
    }
    ok = sol.sup_norm <= 1 + 1e-6 and sol.residual <= cfg.tol * 1.01
    if geom.metric.family != "flat" and geom.metric.m_param > 0:
        fit = decay_exponent(sol, geom)
        out["decay_exponent"] = fit.exponent
        out["decay_expected"] = 2.0 - cfg.n
        ok &= abs(fit.exponent - (2.0 - cfg.n)) <= 0.3
    out["pass"] = bool(ok)
    s.fields["psi"] = sol.field
    if cfg.refine and cfg.n == 3:
        from .studies import divY_study, weitzenbock_study

        rows = []
        conv = {}
        for name, metric in (("flat", flat_metric(3)), ("conformal", conformal_metric(3, 1.0))):
            for study, fn in (("weitzenbock", weitzenbock_study), ("divY", divY_study)):
                tab = fn(metric)
                conv[f"{study}_{name}"] = [list(r) for r in tab]
                rows += [(f"{study}_{name}",) + tuple(r) for r in tab]
        s.csv["convergence.csv"] = (("study", "h", "value", "ratio", "fitted_order"), rows)
        out["convergence"] = conv
    return out


def run_mass(s: Session) -> dict:
    geom = s.geom
    sol = s.first_solution
    rep = mass_inequality_report(geom, sol.psi0, solution=sol, c_n=s.c_n)
    d = rep.to_dict()
    if geom.metric.family != "flat":
        d["energy_ratio"] = 4.0 * rep.grad_energy / (rep.c_n * rep.psi0_norm_sq * rep.mass) if rep.mass else None
    ok = rep.passed
    if geom.metric.family == "flat":
        ok &= abs(rep.mass) < 1e-12
    d["pass"] = bool(ok)
    return d


def run_spinor_op(s: Session) -> dict:
    geom = s.geom
    op = s.op
    N = geom.N
    exc = exceptional_set(op, N / 32.0, basis=s.basis, c_n=s.c_n)
    summ = op.summary()
    out = {"summary": summ, "exceptional_set": exc.to_dict(), "outer_gram_deviation": s.basis.outer_gram_deviation()}
    ok = summ["max_op_norm"] <= 1 + 1e-6 and summ["min_gram_eigenvalue"] >= -1e-9
    ok &= summ["max_gram_eigenvalue"] <= 1 + 1e-6
    if geom.metric.family != "flat":
        ok &= exc.grad_h_sq <= exc.grad_bound * 1.05 and exc.measure <= exc.sobolev_bound_measured
    else:
        ok &= float(op.h_values.max()) < 1e-12
    out["pass"] = bool(ok)
    grid = geom.grid
    sl = grid.active & (np.abs(grid.points[..., -1]) < 0.5 * grid.h)
    pts = grid.points[sl]
    rows = [tuple(p) + (float(v),) for p, v in zip(pts, op.h_box[sl])]
    s.csv["h_slice.csv"] = (tuple(f"x{i + 1}" for i in range(grid.n)) + ("h",), rows)
    s.fields["h"] = np.where(grid.active, op.h_box, np.nan)
    return out


def run_sobolev(s: Session) -> dict:
    geom = s.geom
    cfg = s.cfg
    k = cfg.k or euclidean_isoperimetric_constant(cfg.n)
    q = sobolev_exponent(cfg.n)
    out = {"k": k, "q": q}
    ok = True
    # reference shapes on the flat grid of the same size
    flat = GridGeometry(flat_metric(cfg.n), Grid(cfg.n, cfg.h, 0.0, min(cfg.R_max, 5.0)))
    refs = {}
    for name, f in reference_functions(flat).items():
        sc = sobolev_check(f, flat, k)
        entry = {"lhs": sc.lhs, "rhs": sc.rhs, "ratio": sc.ratio}
        if cfg.n == 3:
            prof = level_profile(f, flat)
            entry["layer_cake_discrepancy"] = layer_cake(f, flat, q, prof)[2]
            entry["coarea_discrepancy"] = coarea_check(f, flat, 1.5, prof)[2]
            ok &= entry["layer_cake_discrepancy"] < 0.02 and entry["coarea_discrepancy"] < 0.02
        ok &= sc.ratio < 1
        refs[name] = entry
    out["reference"] = refs
    if geom.metric.family != "flat":
        hb = s.op.h_box
        sc = sobolev_check(hb, geom, k)
        hrep = {"lhs": sc.lhs, "rhs": sc.rhs, "ratio": sc.ratio}
        if cfg.n == 3:
            prof = level_profile(hb, geom)
            hrep["layer_cake_discrepancy"] = layer_cake(hb, geom, q, prof)[2]
            hrep["coarea_discrepancy"] = coarea_check(hb, geom, 1.5, prof)[2]
            s.csv["level_profile.csv"] = (("threshold", "volume", "area"), prof.rows())
        out["h_field"] = hrep
        ok &= sc.ratio < 1
    out["pass"] = bool(ok)
    return out


def run_theorem1(s: Session) -> dict:
    cfg = s.cfg
    geom = s.geom
    etas = eta_catalog(cfg.R_max)
    names = list(etas) if cfg.eta == "all" else [cfg.eta]
    out = {}
    ok = True
    if geom.metric.family == "flat":
        # no curvature: every term of the chain vanishes
        act = geom.grid.active
        R2 = geom.point_curvature(act)["riemann_norm_sq"]
        lhs = float(np.sum(geom.volume_weights[act] * R2))
        out["flat"] = {"lhs": lhs, "exceptional_measure": float(exceptional_set(s.op, geom.N / 32.0).measure)}
        ok = lhs == 0.0 and out["flat"]["exceptional_measure"] == 0.0
        out["pass"] = bool(ok)
        return out
    reports = {}
    for name in names:
        rep = theorem1_report(geom, s.basis, etas[name], op_field=s.op, c_n=s.c_n, _cache=s.cache)
        reports[name] = rep.to_dict()
        ok &= rep.passed
    out["reports"] = reports
    cb, _ = s.cache["cbound"]
    grid = geom.grid
    rows = [tuple(p) + (float(v),) for p, v in zip(cb.coords, cb.slack)]
    s.csv["curvature_bound_slack.csv"] = (tuple(f"x{i + 1}" for i in range(grid.n)) + ("slack",), rows)
    srows = []
    for name, r in reports.items():
        srows.append((name, r["lhs"], r["middle"], r["rhs"], r["slack_lower"], r["slack_upper"]))
    s.csv["theorem_slacks.csv"] = (("eta", "lhs", "middle", "rhs", "slack_lower", "slack_upper"), srows)
    if cfg.trend and cfg.metric == "conformal":
        eta = etas[names[0]]
        trend_reports = {}
        for m in (0.25, 0.5, 1.0):
            g = cfg.geometry(m)
            b = build_spinor_basis(g, tol=cfg.tol, maxiter=cfg.max_iter)
            trend_reports[m] = theorem1_report(g, b, eta, c_n=s.c_n)
        out["mass_trend"] = mass_scaling_trend(trend_reports)
    out["pass"] = bool(ok)
    return out


PIPELINES = {
    "identities": run_identities,
    "geometry": run_geometry,
    "solve": run_solve,
    "mass": run_mass,
    "spinor-op": run_spinor_op,
    "sobolev": run_sobolev,
    "theorem1": run_theorem1,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    s = Session(cfg, want_basis=args.command == "all")
    names = [c for c in COMMANDS if c != "all"] if args.command == "all" else [args.command]
    sections = {}
    try:
        for name in names:
            log.info("running %s", name)
            sections[name.replace("-", "_")] = PIPELINES[name](s)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (NegativeScalarCurvatureError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    passed = all(sec.get("pass", False) for sec in sections.values())
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "sections": sections,
        "pass": passed,
    }
    report["config"].pop("out")
    out = Path(cfg.out)
    for fname, (header, rows) in s.csv.items():
        write_csv(out / fname, header, rows)
    meta = {"n": cfg.n, "h": cfg.h, "R_max": cfg.R_max, "metric": cfg.metric, "m": cfg.m}
    for key, arr in s.fields.items():
        export_field(out / f"{key}.npy", arr, dict(meta, field=key))
    write_json(out / "report.json", report)
    for name, sec in sections.items():
        print(f"{name}: {'pass' if sec.get('pass') else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
