"""Command-line front end: ``analyze``, ``synthesize``, ``pipeline``, ``selftest``.

Configs and summaries are INI documents; time series are CSV with a fixed
header. Floats are written with 17 significant digits so files round-trip
and repeated runs are byte-identical.

Exit codes: 0 success (any verdict), 1 selftest failure, 2 config error,
3 numeric range failure, 4 pipeline stage failure (partial report written).
"""
from __future__ import annotations

import argparse
import configparser
import io
import math
import os
import sys
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import heatwave as hw
from . import minimality as mini
from .spectral import GridFunction, TimeGrid, evolve_modal, terminal_norm
from .synthesis import build_moment_problem, solve_moment_problem
from .volterra import (ConvolutionKernel, SecondKindProblem, resolvent_series,
                       solve_second_kind_direct)

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_RANGE = 3
EXIT_STAGE = 4

OUT_ENV = "INTERCONNECT_OUT"
DEFAULT_OUT = "interconnect-out"
FUNCTION_NAMES = ("b1", "b2", "c1", "c2", "phi0", "psi0", "psi1")


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def fmt_list(xs) -> str:
    return " ".join(fmt(x) for x in xs)


@dataclass(frozen=True)
class FamilyConfig:
    weights: tuple
    rates: tuple
    has_constant: bool = False


@dataclass(frozen=True)
class RunConfig:
    name: str = "scenario"
    functions: dict = field(default_factory=dict)
    N: int = 8
    M: int = 2000
    t1: float = 1.0
    tolerances: hw.Tolerances = field(default_factory=hw.Tolerances)
    out_dir: str | None = None
    seed: int = 0
    family: FamilyConfig | None = None

    def function(self, name) -> hw.FunctionSpec:
        return self.functions.get(name) or hw.FunctionSpec.zero()

    def interconnect_spec(self) -> hw.InterconnectSpec:
        try:
            return hw.InterconnectSpec(
                **{k: self.function(k) for k in FUNCTION_NAMES},
                N=self.N, t1=self.t1, M=self.M, tolerances=self.tolerances)
        except ValueError as err:
            raise ConfigError(str(err)) from err


def _floats(text, what):
    try:
        vals = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as err:
        raise ConfigError(f"{what}: {err}") from err
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{what}: values must be finite")
    return vals


def _bool(text, what):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected a boolean, got {text!r}")


def _number(sec, key, cast, default, what):
    if key not in sec:
        return default
    try:
        val = cast(sec[key])
    except ValueError as err:
        raise ConfigError(f"{what}: {err}") from err
    if isinstance(val, float) and not math.isfinite(val):
        raise ConfigError(f"{what} must be finite")
    return val


_TOL_KEYS = {
    "classification": float, "resolvent": float, "ridge": float,
    "minimality_floor": float, "decrement_rate": float,
}


def parse_config(text: str) -> RunConfig:
    """Parse an INI config; raise :class:`ConfigError` on any problem."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"unreadable config: {err}") from err
    scen = cp["scenario"] if cp.has_section("scenario") else {}
    grid = cp["grid"] if cp.has_section("grid") else {}
    name = scen.get("name", "scenario")
    seed = _number(scen, "seed", int, 0, "seed")
    N = _number(grid, "N", int, 8, "N")
    M = _number(grid, "M", int, 2000, "M")
    t1 = _number(grid, "t1", float, 1.0, "t1")
    funcs = {}
    for fn in FUNCTION_NAMES:
        if not cp.has_section(fn):
            continue
        sec = cp[fn]
        kind = sec.get("kind", "polynomial").strip()
        data = _floats(sec.get("data", ""), f"{fn}.data")
        if not data:
            raise ConfigError(f"{fn}: function data is empty")
        try:
            funcs[fn] = hw.FunctionSpec(kind, data)
        except ValueError as err:
            raise ConfigError(f"{fn}: {err}") from err
    tol_kwargs = {}
    if cp.has_section("tolerances"):
        sec = cp["tolerances"]
        for key, cast in _TOL_KEYS.items():
            if key in sec:
                tol_kwargs[key] = _number(sec, key, cast, None, key)
        if "require_dirichlet" in sec:
            tol_kwargs["require_dirichlet"] = _bool(sec["require_dirichlet"],
                                                    "require_dirichlet")
        if "solver" in sec:
            solver = sec["solver"].strip()
            if solver not in ("direct", "resolvent"):
                raise ConfigError(f"unknown solver {solver!r}")
            tol_kwargs["solver"] = solver
    family = None
    if cp.has_section("family"):
        sec = cp["family"]
        w = _floats(sec.get("weights", ""), "family.weights")
        r = _floats(sec.get("rates", ""), "family.rates")
        if len(w) != len(r):
            raise ConfigError("family weights and rates differ in length")
        family = FamilyConfig(w, r, _bool(sec.get("has_constant", "false"),
                                          "family.has_constant"))
    out_dir = None
    if cp.has_section("output") and cp["output"].get("directory"):
        out_dir = cp["output"]["directory"]
    cfg = RunConfig(name, funcs, N, M, t1, hw.Tolerances(**tol_kwargs),
                    out_dir, seed, family)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.N < 1:
        raise ConfigError(f"N must be positive, got {cfg.N}")
    if cfg.M < 2:
        raise ConfigError(f"M must be at least 2, got {cfg.M}")
    if not (math.isfinite(cfg.t1) and cfg.t1 > 0):
        raise ConfigError(f"t1 must be positive, got {cfg.t1}")
    tol = cfg.tolerances
    for f in fields(tol):
        val = getattr(tol, f.name)
        if isinstance(val, float) and not math.isfinite(val):
            raise ConfigError(f"{f.name} must be finite")
    if tol.classification <= 0 or tol.resolvent <= 0:
        raise ConfigError("tolerances must be positive")
    if tol.ridge < 0:
        raise ConfigError("ridge must be nonnegative")


def format_config(cfg: RunConfig) -> str:
    """INI text that :func:`parse_config` maps back to ``cfg``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["scenario"] = {"name": cfg.name, "seed": fmt(cfg.seed)}
    cp["grid"] = {"N": fmt(cfg.N), "M": fmt(cfg.M), "t1": fmt(cfg.t1)}
    for fn in FUNCTION_NAMES:
        if fn in cfg.functions:
            spec = cfg.functions[fn]
            cp[fn] = {"kind": spec.kind, "data": fmt_list(spec.data)}
    tol = cfg.tolerances
    cp["tolerances"] = {
        **{k: fmt(getattr(tol, k)) for k in _TOL_KEYS},
        "require_dirichlet": fmt(tol.require_dirichlet),
        "solver": tol.solver,
    }
    if cfg.family is not None:
        cp["family"] = {"weights": fmt_list(cfg.family.weights),
                        "rates": fmt_list(cfg.family.rates),
                        "has_constant": fmt(cfg.family.has_constant)}
    if cfg.out_dir:
        cp["output"] = {"directory": cfg.out_dir}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _write_ini(path: Path, sections: dict) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for name, items in sections.items():
        cp[name] = {k: v if isinstance(v, str) else fmt(v) for k, v in items.items()}
    with open(path, "w", newline="\n") as fh:
        cp.write(fh)


def _write_csv(path: Path, header, columns) -> None:
    rows = np.column_stack(columns)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def _minimality_sections(rep: mini.MinimalityReport | None,
                         dch: mini.DirichletCheck | None) -> dict:
    out = {}
    if rep is not None:
        out["minimality"] = {
            "verdict": rep.verdict,
            "gamma": fmt_list(rep.gamma_sequence),
            "certified_lower_bound": rep.certified_lower_bound,
            "last_relative_decrement": rep.last_relative_decrement,
            "floor": rep.floor,
            "decrement_rate": rep.decrement_rate,
        }
    if dch is not None:
        out["dirichlet"] = {
            "hypothesis_holds": dch.hypothesis_holds,
            "reciprocal_rate_sum_estimate": dch.reciprocal_rate_sum_estimate,
            "abscissa_estimate": dch.abscissa_estimate,
            "rate_growth_exponent": dch.rate_growth_exponent,
            "shift": dch.shift,
            "window": fmt_list(dch.window),
            "notes": "; ".join(dch.notes),
        }
    return out


# -- commands ---------------------------------------------------------------

def _analysis_family(cfg: RunConfig) -> mini.ExponentialFamily:
    if cfg.family is not None:
        return mini.ExponentialFamily(cfg.family.weights, cfg.family.rates,
                                      cfg.t1, cfg.family.has_constant)
    heat = hw.build_heat_system(cfg.function("b1"), cfg.function("phi0"),
                                cfg.N, cfg.t1)
    return mini.augmented_family(heat)


def cmd_analyze(cfg: RunConfig, out: Path) -> int:
    sections = {"scenario": {"name": cfg.name}}
    code = EXIT_OK
    rep = dch = None
    try:
        fam = _analysis_family(cfg)
    except ValueError as err:
        print(f"warning: degenerate family: {err}", file=sys.stderr)
        sections["minimality"] = {"verdict": mini.DEGENERATE, "reason": str(err)}
        fam = None
    if fam is not None:
        try:
            rep = mini.strong_minimality_constant(
                fam, len(fam), floor=cfg.tolerances.minimality_floor,
                decrement_rate=cfg.tolerances.decrement_rate)
        except mini.GramRangeError as err:
            print(f"error: {err}", file=sys.stderr)
            sections["range_failure"] = {"largest_usable_n": err.largest_usable,
                                         "message": str(err)}
            code = EXIT_RANGE
        try:
            dch = mini.dirichlet_hypothesis(fam)
        except ValueError as err:
            sections["dirichlet"] = {"hypothesis_holds": "false",
                                     "notes": f"not assessed: {err}"}
        sections.update(_minimality_sections(rep, dch))
    out.mkdir(parents=True, exist_ok=True)
    _write_ini(out / "analysis.txt", sections)
    if rep is not None:
        n = np.arange(1, rep.gamma_sequence.size + 1)
        _write_csv(out / "gamma.csv", ["n", "gamma"], [n, rep.gamma_sequence])
    return code


def cmd_synthesize(cfg: RunConfig, out: Path) -> int:
    spec = cfg.interconnect_spec()
    try:
        heat = hw.build_heat_system(spec.b1, spec.phi0, cfg.N, cfg.t1)
        alpha = hw.initial_observation(spec.c1, spec.c2, spec.psi0, spec.psi1, cfg.N)
        problem = build_moment_problem(heat, alpha)
        grid = TimeGrid(cfg.t1, cfg.M)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ctrl = solve_moment_problem(problem, grid, cfg.tolerances.ridge, alpha=alpha)
    except mini.GramRangeError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RANGE
    traj = evolve_modal(heat, ctrl.v)
    free = evolve_modal(heat, GridFunction(grid, 0.0))
    out.mkdir(parents=True, exist_ok=True)
    _write_ini(out / "synthesis.txt", {
        "scenario": {"name": cfg.name},
        "synthesis": {
            "alpha": alpha,
            "moment_residual": ctrl.residual,
            "ridge": ctrl.ridge,
            "terminal_norm": terminal_norm(traj),
            "uncontrolled_terminal_norm": terminal_norm(free),
            "coefficients": fmt_list(ctrl.coefficients),
            "warnings": "; ".join(ctrl.warnings),
        },
    })
    header = ["t", "v", "u"] + [f"mode_{j}" for j in range(1, heat.N + 1)]
    _write_csv(out / "synthesis.csv", header,
               [grid.nodes, ctrl.v_values, ctrl.u_values, *traj.mode_values])
    return EXIT_OK


def write_pipeline_report(rep: hw.InterconnectReport, out: Path, name="scenario") -> None:
    """Summary INI plus ``timeseries.csv``; no wall-clock data is written."""
    out.mkdir(parents=True, exist_ok=True)
    summary = {"scenario": name, "ok": rep.ok}
    if rep.classification is not None:
        summary["classification"] = rep.classification.label
        for k, v in rep.classification.inner_products.items():
            summary[k] = v
    if rep.control_order is not None:
        summary["order"] = rep.control_order
    for key in ("kappa", "alpha", "moment_residual", "synthesis_terminal_norm",
                "terminal_norm", "uncontrolled_terminal_norm",
                "relative_terminal_norm", "observation_error", "v_norm",
                "volterra_residual", "modal_tail"):
        summary[key] = getattr(rep, key)
    sections = {"summary": summary}
    sections.update(_minimality_sections(rep.minimality, rep.dirichlet))
    if rep.b1_unnormalized is not None:
        sections["coefficients"] = {"b1_unnormalized": fmt_list(rep.b1_unnormalized)}
    sections["failures"] = dict(sorted(rep.failures.items()))
    sections["warnings"] = {f"w{i}": w for i, w in enumerate(rep.warnings, 1)}
    _write_ini(out / "summary.txt", sections)

    M1 = rep.grid.M + 1
    nan = np.full(M1, np.nan)

    def col(x):
        return nan if x is None else x

    modes = rep.heat_modes if rep.heat_modes is not None else np.full((rep.spec.N, M1), np.nan)
    header = ["t", "v", "v_hat", "U", "u"] + [
        f"terminal_mode_{j}" for j in range(1, modes.shape[0] + 1)]
    _write_csv(out / "timeseries.csv", header,
               [rep.grid.nodes, col(rep.v), col(rep.v_hat), col(rep.U),
                col(rep.u), *modes])


def cmd_pipeline(cfg: RunConfig, out: Path) -> int:
    spec = cfg.interconnect_spec()
    rep = hw.run_pipeline(spec)
    write_pipeline_report(rep, out, cfg.name)
    for stage, seconds in rep.timings.items():
        print(f"timing {stage}: {seconds:.3f}s", file=sys.stderr)
    if not rep.ok:
        for stage, msg in rep.failures.items():
            print(f"error: stage {stage}: {msg}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


# -- selftest ---------------------------------------------------------------

def run_selftest(seed: int = 0, kernel_perturbation: float = 0.0) -> list:
    """Analytic-oracle checks; returns ``(name, passed, detail)`` tuples.

    ``kernel_perturbation`` adds a constant to every Volterra kernel used
    here, which must make the oracle checks fail.
    """
    results = []

    def check(name, err, tol):
        results.append((name, bool(err <= tol), f"error {err:.3e} tol {tol:.1e}"))

    grid = TimeGrid(1.0, 1000)
    t = grid.nodes
    eps = float(kernel_perturbation)

    # constant kernel: U' + U = 1 gives U = 1 - exp(-t)
    prob = SecondKindProblem(1.0, lambda s: np.ones_like(s) + eps, GridFunction(grid, t))
    U_d = solve_second_kind_direct(prob).values
    U_r = resolvent_series(prob).values
    exact = 1.0 - np.exp(-t)
    check("volterra_direct_constant_kernel", np.max(np.abs(U_d - exact)), 1e-4)
    check("volterra_resolvent_constant_kernel", np.max(np.abs(U_r - exact)), 1e-4)

    # random smooth kernel a exp(-b t) + c: solvers must agree
    rng = np.random.default_rng(seed)
    a, b, c = rng.uniform(0.2, 1.5, size=3)
    prob = SecondKindProblem(1.0, lambda s: a * np.exp(-b * s) + c + eps,
                             GridFunction(grid, np.sin(t)))
    diff = np.max(np.abs(solve_second_kind_direct(prob).values
                         - resolvent_series(prob).values))
    check("volterra_solver_agreement_random_kernel", diff, 1e-6)

    # single-mode wave: z1 = 1 - cos t for b2 = sin x, U = t
    from .volterra import DistributionalControl
    ctrl = DistributionalControl(0, GridFunction(grid, t), GridFunction(grid, 1.0))
    sine1 = hw.FunctionSpec.sine(1.0)
    wave = hw.simulate_wave(sine1, ctrl, hw.FunctionSpec.zero(),
                            hw.FunctionSpec.zero(), 1, grid)
    check("wave_single_mode_forced", np.max(np.abs(wave.position[0] - (1 - np.cos(t)))), 1e-10)
    free = hw.simulate_wave(sine1, None, sine1, hw.FunctionSpec.zero(), 1, grid)
    check("wave_single_mode_free", np.max(np.abs(free.position[0] - np.cos(t))), 1e-12)
    kern = hw.wave_kernel(hw.FunctionSpec.zero(), sine1, sine1, 1)
    check("wave_kernel_single_mode", np.max(np.abs(kern(t) - np.pi / 2 * np.cos(t))), 1e-12)

    # Gram closed forms
    fam = mini.ExponentialFamily([1.0, 1.0], [-1.0, -4.0], 1.0)
    g = mini.gram_matrix(fam, 2).entries
    ref = np.array([[-np.expm1(-2) / 2, -np.expm1(-5) / 5],
                    [-np.expm1(-5) / 5, -np.expm1(-8) / 8]])
    check("gram_two_exponentials", np.max(np.abs(g - ref)), 1e-14)
    fam = mini.ExponentialFamily([1.0], [1.0], 1.0, has_constant=True)
    g = mini.gram_matrix(fam, 2).entries
    e = np.e
    ref = np.array([[1.0, e - 1.0], [e - 1.0, (e * e - 1.0) / 2]])
    check("gram_constant_and_growing", np.max(np.abs(g - ref)), 1e-14)
    return results


def cmd_selftest(out: Path | None, seed: int, perturbation: float) -> int:
    results = run_selftest(seed, perturbation)
    passed = sum(ok for _, ok, _ in results)
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in results]
    lines.append(f"{passed}/{len(results)} passed")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "selftest.txt").write_text(f"seed {seed}\n" + text)
    return EXIT_OK if passed == len(results) else EXIT_SELFTEST


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interconnect",
        description="Null controllability of a heat equation driven through a wave equation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("analyze", "synthesize", "pipeline"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--modes", type=int, help="number of modes N")
        p.add_argument("--grid", type=int, help="number of time steps M")
        p.add_argument("--horizon", type=float, help="control horizon t1")
    p = sub.add_parser("selftest")
    p.add_argument("--out", help="also write selftest.txt here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb-kernel", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def _out_dir(flag, cfg: RunConfig | None) -> Path:
    if flag:
        return Path(flag)
    if cfg is not None and cfg.out_dir:
        return Path(cfg.out_dir)
    return Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)


def load_config(path, modes=None, grid=None, horizon=None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    cfg = parse_config(text)
    overrides = {k: v for k, v in (("N", modes), ("M", grid), ("t1", horizon))
                 if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
        validate(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        out = Path(args.out) if args.out else None
        return cmd_selftest(out, args.seed, args.perturb_kernel)
    try:
        cfg = load_config(args.config, args.modes, args.grid, args.horizon)
        out = _out_dir(args.out, cfg)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(format_config(cfg))
        handler = {"analyze": cmd_analyze, "synthesize": cmd_synthesize,
                   "pipeline": cmd_pipeline}[args.command]
        return handler(cfg, out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
