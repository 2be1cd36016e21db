"""Command-line front end.

    python -m onduloid {analyze,sigma,branch,verify} --config run.ini [--out DIR] [--threads N]

Exit codes: 0 success, 1 numerical failure, 2 structural assumption not
satisfied (certification refused), 64 usage or configuration error.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import json
import logging
import math
import operator
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ball_spectra as bs
from . import continuation as cont
from . import cylinder_spectra as cyl
from . import dtn
from .nonlinearity import Nonlinearity, first_dirichlet_eigenvalue
from .numerics import BallGeometry, ConvergenceError, UniformGrid1D, integrate_weighted
from .radial_ball import (AssumptionError, ScaleInvariantFamily, ShootingConfig, ode_residual,
                          robin_constant_from_curvature, solve_ground_profile)

EXIT_OK, EXIT_NUMERIC, EXIT_ASSUMPTION, EXIT_USAGE = 0, 1, 2, 64
log = logging.getLogger("onduloid")


class ConfigError(ValueError):
    pass


# -- configuration ---------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """A float, optionally written as arithmetic in ``pi``, ``e`` and ``lambda1_n<k>``."""
    names = {"pi": math.pi, "e": math.e}
    names.update({f"lambda1_n{k}": first_dirichlet_eigenvalue(k) for k in range(1, 7)})

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in names:
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"cannot parse number {text!r}")

    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def _floats(text: str):
    return [parse_number(x) for x in text.replace(";", ",").split(",") if x.strip()]


@dataclass(frozen=True)
class RunConfig:
    f: Nonlinearity
    n: int
    radial_nodes: int = 801
    k_eigs: int = 4
    dtn_radial: int = 101
    t_modes: int = 16
    assumption_tol: float = 1e-4
    kernel_tol: float = 1e-6
    T_values: tuple = ()
    k_max: int = 8
    s_values: tuple = (0.0,)
    K: int = 8

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        try:
            return cls._from_parser(cp, path.parent)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    @classmethod
    def _from_parser(cls, cp, base: Path) -> "RunConfig":
        if "nonlinearity" not in cp or "problem" not in cp:
            raise ConfigError("sections [nonlinearity] and [problem] are required")
        nl = cp["nonlinearity"]
        kind = nl.get("kind", "").strip()
        if kind == "tabulated":
            f = Nonlinearity.from_csv(base / nl["f_table"], base / nl["df_table"])
        elif kind in ("constant", "power_minus_linear", "gelfand", "linear"):
            f = getattr(Nonlinearity, kind)(parse_number(nl["param"]))
        else:
            raise ConfigError(f"unknown nonlinearity kind {kind!r}")
        n = int(cp["problem"]["n"])
        if n < 1:
            raise ConfigError("n must be >= 1")
        f.check_dimension(n)
        g = cp["grid"] if "grid" in cp else {}
        tol = cp["tolerances"] if "tolerances" in cp else {}
        kw = {}
        if "radial_nodes" in g:
            kw["radial_nodes"] = int(g["radial_nodes"])
        if "dtn_radial_nodes" in g:
            kw["dtn_radial"] = int(g["dtn_radial_nodes"])
        if "t_modes" in g:
            kw["t_modes"] = int(g["t_modes"])
        if "eigenpairs" in g:
            kw["k_eigs"] = int(g["eigenpairs"])
        if "assumption" in tol:
            kw["assumption_tol"] = parse_number(tol["assumption"])
        if "kernel" in tol:
            kw["kernel_tol"] = parse_number(tol["kernel"])
        if "sigma" in cp:
            sg = cp["sigma"]
            if "t_values" in sg:
                kw["T_values"] = tuple(_floats(sg["t_values"]))
            elif "t_count" in sg:
                cnt = int(sg["t_count"])
                kw["T_values"] = tuple(np.linspace(parse_number(sg["t_min"]),
                                                   parse_number(sg["t_max"]), cnt)) if cnt else ()
            if "k_max" in sg:
                kw["k_max"] = int(sg["k_max"])
        if "branch" in cp:
            br = cp["branch"]
            if "s_values" in br:
                kw["s_values"] = tuple(_floats(br["s_values"]))
            if "modes" in br:
                kw["K"] = int(br["modes"])
        cfg = cls(f, n, **kw)
        cfg.validate()
        return cfg

    def validate(self):
        if self.radial_nodes < 21 or (self.radial_nodes - 1) % 2:
            raise ConfigError("radial_nodes must be odd and >= 21")
        if self.dtn_radial < 11:
            raise ConfigError("dtn_radial_nodes must be >= 11")
        if self.assumption_tol <= 0 or self.kernel_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.K > self.t_modes:
            raise ConfigError("branch modes must not exceed t_modes")
        if any(t <= 0 for t in self.T_values):
            raise ConfigError("periods must be positive")
        if any(abs(s) >= 1 for s in self.s_values):
            raise ConfigError("|s| must be below 1")

    def describe(self) -> dict:
        return {"nonlinearity": self.f.label(), "kind": self.f.kind, "param": self.f.param,
                "n": self.n, "radial_nodes": self.radial_nodes,
                "dtn_radial_levels": list(self.dtn_grid.radial_levels()),
                "t_modes": self.t_modes}

    @property
    def geom(self) -> BallGeometry:
        return BallGeometry(self.n)

    @property
    def dtn_grid(self) -> dtn.DtNGrid:
        return dtn.DtNGrid(n_radial=self.dtn_radial, M=self.t_modes)


# -- shared pipeline ---------------------------------------------------------------

def _num(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in x]
    return x


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_num(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class Analysis:
    cfg: RunConfig
    profile: object
    dirichlet: bs.Spectrum
    robin: bs.Spectrum | None
    assumption: bs.AssumptionReport
    report: dict
    ok: bool

    @property
    def exit_code(self) -> int:
        if self.ok:
            return EXIT_OK
        # an inconclusive extrapolation is a resolution problem, not a verdict on f
        return EXIT_NUMERIC if self.assumption.inconclusive else EXIT_ASSUMPTION


def analyze(cfg: RunConfig) -> Analysis:
    geom = cfg.geom
    sc = ShootingConfig(n_points=cfg.radial_nodes)
    scale_invariant = False
    try:
        prof = solve_ground_profile(cfg.f, geom, sc)
    except ScaleInvariantFamily as exc:
        prof, scale_invariant = exc.profile, True
    D = bs.dirichlet_spectrum(prof, cfg.f, geom, k=cfg.k_eigs)
    ass = bs.check_assumptions(D, cfg.assumption_tol)
    res = {"resolution": {"radial_nodes": cfg.radial_nodes, "eigen_levels": list(D.levels)}}
    ev = lambda spec: [{"value": float(x), "error_estimate": float(e)}
                       for x, e in zip(spec.eigenvalues, spec.error_estimates)]
    rep = {
        "config": cfg.describe(), **res,
        "phi1": {"center_value": prof.center_value, "d_at_1": prof.d_at_1,
                 "scale_invariant_family": scale_invariant,
                 "ode_residual": ode_residual(prof, cfg.f)},
        "c": prof.robin_c,
        "gamma_D": ev(D), "l": D.negative_count,
        "assumption_check": ass.as_dict(),
    }
    if scale_invariant:
        rep["assumption_check"]["message"] = (
            "Assumption 2 unverified: scale-invariant family (linear f), " + ass.message)
    if not ass.passed or scale_invariant:
        rep["verdict"] = ("inconclusive: refine the radial grid" if ass.inconclusive
                          else "Assumption 2 unverified")
        return Analysis(cfg, prof, D, None, ass, rep, False)
    R = bs.robin_spectrum(prof, cfg.f, geom, prof.robin_c, k=max(2, cfg.k_eigs))
    g1, gD1 = float(R.eigenvalues[0]), float(D.eigenvalues[0])
    q, rhs = bs.flux_derivative_identity(prof, cfg.f, geom, prof.robin_c)
    holds = bs.robin_below_dirichlet(g1, gD1)
    tb = cyl.t_bar(gD1)
    rep.update({
        "gamma_1": {"value": g1, "error_estimate": float(R.error_estimates[0])},
        "gamma_robin": ev(R),
        "T_bar": None if math.isinf(tb) else tb, "T_bar_infinite": math.isinf(tb),
        "robin_below_dirichlet": {"holds": holds, "Q_phi1_prime": q, "identity_rhs": rhs},
    })
    if holds:
        ts = cyl.t_star(g1)
        rep["T_star"] = {"value": ts,
                         "error_estimate": abs(ts) * 0.5 * float(R.error_estimates[0]) / abs(g1)}
    rep["verdict"] = "pass" if holds else "gamma_1 < min(0, gamma_D1) fails"
    return Analysis(cfg, prof, D, R, ass, rep, holds)


@contextmanager
def _executor(threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            yield ex
    else:
        yield None


# -- commands ------------------------------------------------------------------------

def cmd_analyze(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    an = analyze(cfg)
    _write_json(out / "report.json", an.report)
    if not an.ok:
        print(an.report["verdict"], file=sys.stderr)
        return an.exit_code
    return EXIT_OK


def cmd_sigma(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    an = analyze(cfg)
    if not an.ok:
        _write_json(out / "report.json", an.report)
        print(an.report["verdict"], file=sys.stderr)
        return an.exit_code
    gD1 = float(an.dirichlet.eigenvalues[0])
    tb = cyl.t_bar(gD1)
    T = np.asarray(cfg.T_values, dtype=float)
    keep = T < tb
    if not np.all(keep):
        log.warning("clipped %d period(s) at or above T_bar = %.12g", int(np.sum(~keep)), tb)
    T = T[keep]
    with _executor(threads) as ex:
        curve = cyl.sigma_curve(an.profile, cfg.f, cfg.geom, an.profile.robin_c, T,
                                cfg.k_max, gD1, executor=ex)
    out.mkdir(parents=True, exist_ok=True)
    cyl.export_sigma_csv(curve, out / "sigma.csv")
    meta = {"config": cfg.describe(), "T_bar": None if math.isinf(tb) else tb,
            "T_star": an.report["T_star"], "clipped": int(np.sum(~keep)),
            "sign_changes": [[float(curve.T_values[i]), float(curve.T_values[i + 1])]
                             for i in curve.sign_changes()],
            "dominance_violations": curve.dominance_violations(),
            "flux_levels": list(cyl.fd_levels(an.profile))}
    _write_json(out / "sigma.json", meta)
    return EXIT_OK


def cmd_branch(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    an = analyze(cfg)
    if not an.ok:
        _write_json(out / "report.json", an.report)
        print(an.report["verdict"], file=sys.stderr)
        return an.exit_code
    cert = cont.certify_bifurcation(an.profile, cfg.f, cfg.geom, dirichlet=an.dirichlet,
                                    robin=an.robin, kernel_tol=cfg.kernel_tol,
                                    assumption_tol=cfg.assumption_tol)
    if not cert.certified:
        _write_json(out / "certification.json", cert.as_dict())
        print(cert.message, file=sys.stderr)
        return EXIT_ASSUMPTION
    setup = cont.BranchSetup.from_certificate(an.profile, cfg.f, cfg.geom, cert,
                                              grid=cfg.dtn_grid)
    with _executor(threads) as ex:
        branch = cont.extend_branch(setup, cfg.s_values, cfg.K, executor=ex)
    diag = cont.branch_diagnostics(branch)
    out.mkdir(parents=True, exist_ok=True)
    cont.export_branch_csv(branch, out / "branch.csv")
    points = [{"s": p.s, "T_s": p.T_s, "v": list(p.v_s.coefficients), "K": p.K,
               "flux_constant": p.flux_constant, "flux_deviation": p.flux_deviation,
               "newton_residual": p.newton_residual,
               "g_error_estimate": p.dtn.error_estimate if p.dtn else 0.0,
               "dtn_levels": list(p.dtn.levels) if p.dtn else []} for p in branch.points]
    _write_json(out / "branch_points.json", {"config": cfg.describe(), "points": points})
    _write_json(out / "branch_diagnostics.json",
                {"certification": cert.as_dict(), "diagnostics": diag.as_dict(),
                 "truncated": list(branch.truncated)})
    return EXIT_NUMERIC if branch.truncated else EXIT_OK


# -- invariant suite ----------------------------------------------------------------

@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        return dict(self.__dict__)


def _le(name, value, tol, detail=""):
    value = float(value)
    return Check(name, value, tol, bool(np.isfinite(value) and value <= tol), detail)


def run_invariants(cfg: RunConfig, executor=None):
    """Every invariant of the library evaluated at the configured resolution."""
    geom, f = cfg.geom, cfg.f
    an = analyze(cfg)
    prof, D = an.profile, an.dirichlet
    checks = []
    grid = UniformGrid1D(prof.grid.n_points)
    h = grid.h
    checks.append(_le("ode_residual", ode_residual(prof, f), 1e-8))
    checks.append(_le("boundary_value", abs(prof.values[-1]), 1e-10))
    checks.append(_le("robin_constant_curvature", abs(prof.robin_c -
                      robin_constant_from_curvature(prof)), 50 * h * h,
                      "one-sided O(h^2) comparison"))
    checks.append(Check("assumption_2", an.assumption.min_abs_eigenvalue, cfg.assumption_tol,
                        an.assumption.passed and an.ok, an.assumption.message))
    if not an.ok:
        return an, checks
    R = an.robin
    c = prof.robin_c
    w = geom.radial_weight(prof.r)
    for spec in (D, R):
        ray = max(abs(bs.quadratic_form_Q(prof, f, geom, c if spec.bc == bs.ROBIN else 0.0,
                                          spec.eigenfunctions[:, j], spec.derivatives[:, j],
                                          spec.bc == bs.ROBIN) - spec.eigenvalues[j])
                  for j in range(spec.k))
        checks.append(_le(f"rayleigh_{spec.bc}", ray, 1e-6))
        gram = np.array([[geom.omega_n * integrate_weighted(
            spec.eigenfunctions[:, i] * spec.eigenfunctions[:, j], w, grid)
            for j in range(spec.k)] for i in range(spec.k)])
        checks.append(_le(f"orthogonality_{spec.bc}", np.max(np.abs(gram - np.diag(np.diag(gram)))), 1e-8))
        checks.append(_le(f"normalization_{spec.bc}", np.max(np.abs(np.diag(gram) - 1)), 1e-8))
        checks.append(Check(f"simplicity_{spec.bc}", float(np.min(np.diff(spec.eigenvalues))), 1e-6,
                            bool(np.min(np.diff(spec.eigenvalues)) > 1e-6)))
        checks.append(_le(f"extrapolation_error_{spec.bc}", np.max(spec.error_estimates),
                          cfg.assumption_tol / 10))
        checks.append(_le(f"boundary_condition_{spec.bc}", np.max(spec.boundary_residuals()), 1e-8))
    q, rhs = bs.flux_derivative_identity(prof, f, geom, c)
    if cfg.n == 1:
        checks.append(_le("flux_derivative_identity", abs(q), 1e-6))
    else:
        checks.append(_le("flux_derivative_identity", abs(q - rhs), 1e-4))
    g1, gD1 = float(R.eigenvalues[0]), float(D.eigenvalues[0])
    checks.append(Check("robin_below_dirichlet", g1 - min(0.0, gD1), 0.0, bs.robin_below_dirichlet(g1, gD1)))
    tb = cyl.t_bar(gD1)
    ts = cyl.t_star(g1)
    ts_root = cyl.find_t_star_by_root(prof, f, geom, c, gD1)
    checks.append(_le("t_star_cross_check", abs(ts - ts_root), 1e-4))
    tr = cyl.transversality(prof, f, geom, c, ts, t_bar_value=tb)
    checks.append(_le("transversality_rel_error", tr.rel_error, 1e-4))
    checks.append(Check("transversality_negative", tr.fd_value, 0.0, tr.fd_value < 0))
    T_hi = min(1.5 * ts, ts + 0.95 * (tb - ts)) if math.isfinite(tb) else 1.5 * ts
    T_samp = np.linspace(0.3 * ts, T_hi, 12)
    curve = cyl.sigma_curve(prof, f, geom, c, T_samp, cfg.k_max, gD1, executor=executor)
    checks.append(Check("mode_dominance", float(len(curve.dominance_violations())), 0.0,
                        not curve.dominance_violations()))
    checks.append(Check("sigma_sign_changes", float(len(curve.sign_changes())), 1.0,
                        len(curve.sign_changes()) == 1))
    ab = np.array([cyl.alpha_beta(D, g1, t)[:2] for t in T_samp])
    checks.append(Check("alpha_beta_monotone", float(np.max(np.diff(ab, axis=0))), 0.0,
                        bool(np.all(np.diff(ab, axis=0) <= 1e-12))))
    T_lin = 0.8 * ts
    coeffs = [1.0, 0.5, -0.25]
    sk = [cyl.sigma_k(prof, f, c, k, T_lin) for k in (1, 2, 3)]
    qt = cyl.q_T_quadrature(prof, f, geom, c, T_lin, coeffs)
    checks.append(_le("cylinder_form_identity", abs(qt - T_lin * geom.omega_n *
                                              cyl.jt_quadratic(coeffs, T_lin, sk)), 1e-6))
    dg = cfg.dtn_grid
    K = min(cfg.k_max, dg.M)
    diffs = []
    for k in range(1, K + 1):
        wk = dtn.EvenFourierProfile.mode(k)
        diffs.append(abs(dtn.ht_apply_2d(prof, f, geom, wk, T_lin, c, dg).coefficients[k - 1]
                         - cyl.sigma_k(prof, f, c, k, T_lin)))
    checks.append(_le("ht_reconciliation", max(diffs), 5e-5))
    rng = np.random.default_rng(20240607)
    w1 = dtn.EvenFourierProfile(rng.standard_normal(4))
    w2 = dtn.EvenFourierProfile(rng.standard_normal(4))
    checks.append(_le("ht_self_adjoint", dtn.self_adjointness_defect(prof, f, geom, w1, w2,
                                                                      T_lin, c, dg), 1e-8))
    sol = dtn.linear_cylinder_solve(prof, f, geom, dtn.EvenFourierProfile([1.0]), T_lin, c, dg)
    orth = dtn.orthogonality_check(sol, D, prof, geom)
    checks.append(_le("linear_solution_orthogonality",
                      max([abs(x) for x in orth.z_integrals] + [abs(orth.flux_integral)]), 1e-8))
    lin = dtn.fd_linearization_check(prof, f, geom, dtn.EvenFourierProfile([1.0, 0.5]), T_lin,
                                     grid=dg)
    checks.append(Check("linearization_order", lin.min_order, 0.9, lin.passed,
                        f"r/eps = {list(lin.ratios)}"))
    g0 = dtn.evaluate_g(prof, f, geom, dtn.EvenFourierProfile.zero(2), T_lin, dg)
    checks.append(_le("g_at_zero", np.max(np.abs(g0.g.coefficients)), 1e-10))
    vtest = dtn.EvenFourierProfile([0.1, 0.05])
    errs = [dtn.pullback_check(cfg.n, vtest, T_lin, m, dg.M) for m in (51, 101, 201)]
    order = math.log2(errs[1] / errs[2])
    checks.append(Check("pullback_order", order, 1.8, order >= 1.8, f"errors {errs}"))
    return an, checks


def cmd_verify(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    with _executor(threads) as ex:
        an, checks = run_invariants(cfg, ex)
    ok = all(ch.passed for ch in checks)
    _write_json(out / "verify.json", {"config": cfg.describe(), "all_passed": ok,
                                      "checks": [ch.as_dict() for ch in checks]})
    for ch in checks:
        print(f"{'PASS' if ch.passed else 'FAIL'} {ch.name}: {ch.value:.3e} (tol {ch.tol:.1e})")
    if ok:
        return EXIT_OK
    if not an.ok:
        return an.exit_code
    return EXIT_NUMERIC


COMMANDS = {"analyze": cmd_analyze, "sigma": cmd_sigma, "branch": cmd_branch,
            "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onduloid", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = RunConfig.from_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, Path(args.out), args.threads)
    except AssumptionError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (ConvergenceError, ArithmeticError, cyl.InconsistencyError, dtn.DomainValidityError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
