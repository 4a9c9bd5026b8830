"""Command-line front end.

Subcommands: modulus, product, star, conditional, cross-validate, sweep.
A run is a fully validated ExperimentConfig (JSON config file plus flag
overrides, unknown keys rejected) executed to a deterministic CSV or JSON
artifact: stable field order, 17-significant-digit floats, no timestamps.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 hypothesis-check failure under --strict-conditions.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import comparison, conditional, product, profiles, star
from .errors import ConfigError, SectionError

_MODES = ("modulus", "product", "star", "conditional", "cross-validate", "sweep")

_NUMERIC_EXIT = 2
_CONDITION_EXIT = 3


# ---------------------------------------------------------------------------
# Deterministic serialization
# ---------------------------------------------------------------------------

def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _render_json(obj, indent=0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_render_json(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise ConfigError(f"cannot serialize value of type {type(obj).__name__}")


def render_json(obj) -> str:
    return _render_json(obj) + "\n"


def render_csv(columns, rows) -> str:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return format_float(v)
        return str(v)

    lines = [",".join(columns)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """A fully-specified experiment. Optional fields are per-mode."""
    mode: str
    profile: str | None = None
    profiles: str | None = None
    radial: str | None = None
    body: str | None = None
    theta: str | None = None
    theta_axis: int | None = None
    dim: int | None = None
    p: float | None = None
    T: float | None = None
    T_grid: str | None = None
    t_grid: str | None = None
    r: float | None = None
    omega: float | None = None
    grid_points: int | None = None
    shells: int | None = None
    directions: int | None = None
    delta: float | None = None
    mc_samples: int | None = None
    seed: int | None = None
    sigma: float | None = None
    growth_omega: float | None = None
    t0: float | None = None
    strict_conditions: bool = False
    out: str | None = None
    format: str | None = None

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"mode {self.mode!r} requires field {name!r}")

    def forbid(self, *names):
        for name in names:
            if getattr(self, name) not in (None, False):
                raise ConfigError(
                    f"field {name!r} does not apply to mode {self.mode!r}")


_REQUIRED = {
    "modulus": ("profile", "r", "t_grid"),
    "product": ("profiles", "theta", "T", "r"),
    "star": ("body", "radial", "t_grid"),
    "conditional": ("profile", "T"),
    "cross-validate": ("p", "dim", "T_grid"),
    "sweep": ("profiles", "theta", "T_grid", "r"),
}

_ALLOWED_EXTRA = {
    "modulus": set(),
    "product": {"shells", "directions", "sigma", "growth_omega", "t0"},
    "star": {"theta", "theta_axis", "dim", "omega", "grid_points"},
    "conditional": {"delta", "mc_samples", "seed"},
    "cross-validate": {"omega", "grid_points"},
    "sweep": {"shells", "directions"},
}
_COMMON = {"mode", "strict_conditions", "out", "format"}


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.mode not in _MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}; expected one of {_MODES}")
    cfg.require(*_REQUIRED[cfg.mode])
    allowed = set(_REQUIRED[cfg.mode]) | _ALLOWED_EXTRA[cfg.mode] | _COMMON
    for f in dc_fields(cfg):
        if f.name in allowed:
            continue
        cfg.forbid(f.name)
    if cfg.format not in (None, "csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {cfg.format!r}")
    return cfg


def _parse_floats(text: str, field: str):
    try:
        vals = [float(v) for v in str(text).split(",") if v != ""]
    except ValueError as exc:
        raise ConfigError(f"field {field!r}: {exc}") from None
    if not vals:
        raise ConfigError(f"field {field!r} is empty")
    return vals


def config_from_sources(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults < config file < explicit flags into a config."""
    known = {f.name for f in dc_fields(ExperimentConfig)}
    merged: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config parse error at line {exc.lineno} column {exc.colno}: "
                f"{exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in doc.items():
            name = str(key).replace("-", "_")
            if name not in known:
                raise ConfigError(f"unknown config key {key!r}")
            merged[name] = val
    for name in known:
        val = getattr(args, name, None)
        if name == "strict_conditions":
            if val:
                merged[name] = True
        elif val is not None:
            merged[name] = val
    if "mode" not in merged:
        raise ConfigError("no mode given")
    cfg = ExperimentConfig(**merged)
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# Mode runners
# ---------------------------------------------------------------------------

def _emit(cfg: ExperimentConfig, default_format: str, csv_payload, json_payload):
    fmt = cfg.format or default_format
    text = (render_csv(*csv_payload) if fmt == "csv"
            else render_json(json_payload))
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _comparison_dict(cmp: comparison.GaussComparison) -> dict:
    return {
        "sup_abs": cmp.sup_abs,
        "sup_rel": cmp.sup_rel,
        "ks_1d": cmp.ks_1d,
        "bound_surrogate": cmp.bound_surrogate,
        "bound_valid": cmp.bound_valid,
        "n_points": cmp.n_points,
        "max_spacing": cmp.max_spacing,
    }


def _run_modulus(cfg: ExperimentConfig) -> int:
    prof = profiles.parse_profile_spec(cfg.profile)
    r = float(cfg.r)
    t_grid = sorted(_parse_floats(cfg.t_grid, "t_grid"))
    rows = []
    for t in t_grid:
        xi = profiles.modulus_xi(prof, r, t)
        if prof.tag.startswith("power:"):
            p = float(prof.tag.split(":")[1])
            r_max = profiles.power_validity_radius(p, t)
            bound = 2.0 * t ** (-p / 2.0)
        else:
            r_max = None
            bound = None
        rows.append((t, xi, r_max, bound))
    cols = ("t", "xi", "r_max", "bound_power")
    json_payload = {"mode": "modulus", "profile": cfg.profile, "r": r,
                    "rows": [dict(zip(cols, row)) for row in rows]}
    _emit(cfg, "csv", (cols, rows), json_payload)
    return 0


def _product_pieces(cfg: ExperimentConfig):
    specs = [s for s in str(cfg.profiles).split(",") if s]
    profs = tuple(profiles.parse_profile_spec(s) for s in specs)
    density = product.ProductDensity(profs)
    theta = np.asarray(_parse_floats(cfg.theta, "theta"))
    if theta.size != density.n:
        raise ConfigError(
            f"theta has {theta.size} coordinates but {density.n} profiles given")
    direction = product.Direction(theta)
    grid = comparison.ShellGrid(r=float(cfg.r),
                                shells=int(cfg.shells or 20),
                                directions=int(cfg.directions or 500))
    return density, direction, grid, profs


def _check_product_conditions(cfg, profs, T) -> bool:
    sigma = float(cfg.sigma or 1.5)
    growth_omega = float(cfg.growth_omega or 0.5)
    t0 = float(cfg.t0 or 1.0)
    grid = sorted({max(2.0 * t0, T / 4.0), max(2.0 * t0, T / 2.0),
                   max(2.0 * t0, T)})
    report = profiles.check_product_conditions(list(profs), sigma,
                                               growth_omega, t0, grid)
    if not report.passed:
        print(f"condition check failed: {report.first_violation}",
              file=sys.stderr)
    return report.passed


def _run_product(cfg: ExperimentConfig) -> int:
    density, direction, grid, profs = _product_pieces(cfg)
    T = float(cfg.T)
    if cfg.strict_conditions and not _check_product_conditions(cfg, profs, T):
        return _CONDITION_EXIT
    frame = product.build_frame(density, direction, T)
    cmp = product.section_error(density, frame, float(cfg.r), grid=grid)
    payload = {"mode": "product",
               "profiles": cfg.profiles,
               "frame": product.frame_to_dict(frame),
               "comparison": _comparison_dict(cmp)}
    cols = ("T", "lambda", "log_alpha", "y_min", "sup_rel", "sup_abs",
            "ks_1d", "bound_surrogate", "bound_valid")
    row = (frame.T, frame.lam, frame.log_alpha, frame.y_min, cmp.sup_rel,
           cmp.sup_abs, cmp.ks_1d, cmp.bound_surrogate, cmp.bound_valid)
    _emit(cfg, "json", (cols, [row]), payload)
    return 0


def _run_sweep(cfg: ExperimentConfig) -> int:
    density, direction, grid, profs = _product_pieces(cfg)
    t_values = sorted(_parse_floats(cfg.T_grid, "T_grid"))
    if cfg.strict_conditions:
        for T in t_values:
            if not _check_product_conditions(cfg, profs, T):
                return _CONDITION_EXIT
    rows = []
    for T in t_values:
        frame = product.build_frame(density, direction, T)
        cmp = product.section_error(density, frame, float(cfg.r), grid=grid)
        rows.append((T, cmp.sup_rel, cmp.sup_abs, cmp.ks_1d,
                     cmp.bound_surrogate, cmp.bound_valid,
                     frame.log_alpha, frame.lam, frame.y_min))
    cols = ("T", "sup_rel", "sup_abs", "ks_1d", "bound_surrogate",
            "bound_valid", "log_alpha", "lambda", "y_min")
    json_payload = {"mode": "sweep", "profiles": cfg.profiles,
                    "r": float(cfg.r),
                    "rows": [dict(zip(cols, row)) for row in rows]}
    _emit(cfg, "csv", (cols, rows), json_payload)
    return 0


def _run_star(cfg: ExperimentConfig) -> int:
    n = int(cfg.dim or 3)
    body = star.parse_body_spec(cfg.body, n)
    rho = profiles.parse_radial_spec(cfg.radial)
    t_grid = sorted(_parse_floats(cfg.t_grid, "t_grid"))
    if cfg.theta is not None and cfg.theta_axis is not None:
        raise ConfigError("give either theta or theta_axis, not both")
    if cfg.theta is not None:
        theta = body.boundary_point(np.asarray(_parse_floats(cfg.theta, "theta")))
    else:
        axis = int(cfg.theta_axis or 1)
        if not 1 <= axis <= n:
            raise ConfigError(f"theta_axis must be in 1..{n}")
        v = np.zeros(n)
        v[axis - 1] = 1.0
        theta = body.boundary_point(v)
    omega = comparison.BoxGrid(halfwidth=float(cfg.omega or 2.0),
                               points_per_axis=int(cfg.grid_points or 21))

    if cfg.strict_conditions:
        if len(t_grid) < 2:
            raise ConfigError("strict condition checks need >= 2 grid points")
        r_eff = (1.0 + float(np.max(np.atleast_1d(omega.halfwidth)))
                 * np.sqrt(n - 1)) ** 2
        report = profiles.check_radial_conditions(rho, r_eff, t_grid)
        if not report.passed:
            print(f"radial condition check failed: t*rho' trend ok="
                  f"{report.increasing_ok}, ratio trend ok="
                  f"{report.decreasing_ok}", file=sys.stderr)
            return _CONDITION_EXIT

    frame = star.apex_frame(body, theta)
    sweeps = star.star_convergence_sweep(body, rho, frame, omega, t_grid)
    rows = []
    for t, cmp in zip(t_grid, sweeps):
        rows.append((t, cmp.sup_abs, cmp.sup_rel, frame.log_alpha(rho, t),
                     frame.beta(rho, t)))
    cols = ("t", "sup_abs", "sup_rel", "log_alpha", "beta")
    json_payload = {"mode": "star", "body": cfg.body, "radial": cfg.radial,
                    "dim": n,
                    "theta": [float(v) for v in theta],
                    "rows": [dict(zip(cols, row)) for row in rows]}
    _emit(cfg, "csv", (cols, rows), json_payload)
    return 0


def _run_conditional(cfg: ExperimentConfig) -> int:
    prof = profiles.parse_profile_spec(cfg.profile)
    T = float(cfg.T)
    law = conditional.conditional_density(prof, T)
    ks_norm = conditional.ks_to_moment_normal(law)
    payload = {"mode": "conditional", "profile": cfg.profile, "T": T,
               "mu": law.mu, "var": law.var,
               "support": [law.v_lo, law.v_hi],
               "ks_moment_normal": ks_norm}
    mc_block = None
    if cfg.mc_samples:
        sample = conditional.conditional_mc(prof, T, float(cfg.delta or 0.01),
                                            int(cfg.mc_samples),
                                            int(cfg.seed or 0))
        ks_mc = comparison.ks_empirical(sample, law.cdf)
        mc_block = {"delta": float(cfg.delta or 0.01),
                    "n_samples": int(cfg.mc_samples),
                    "seed": int(cfg.seed or 0),
                    "mean": float(np.mean(sample)),
                    "var": float(np.var(sample)),
                    "ks_vs_quadrature": ks_mc}
        payload["mc"] = mc_block
    cols = ["T", "mu", "var", "ks_moment_normal"]
    row = [T, law.mu, law.var, ks_norm]
    if mc_block:
        cols += ["mc_mean", "mc_var", "mc_ks"]
        row += [mc_block["mean"], mc_block["var"], mc_block["ks_vs_quadrature"]]
    _emit(cfg, "json", (tuple(cols), [tuple(row)]), payload)
    return 0


def _run_cross_validate(cfg: ExperimentConfig) -> int:
    n = int(cfg.dim)
    p = float(cfg.p)
    t_values = sorted(_parse_floats(cfg.T_grid, "T_grid"))
    direction = product.Direction(np.ones(n))
    omega = comparison.BoxGrid(halfwidth=float(cfg.omega or 2.0),
                               points_per_axis=int(cfg.grid_points or 21))
    rows = []
    reports = []
    for T in t_values:
        rep = star.cross_validate_lp(p, n, direction, T, omega=omega)
        reports.append(rep.to_dict())
        rows.append((T, rep.t_star, rep.product_error, rep.star_error,
                     rep.mtm_deviation, rep.base_point_gap))
    cols = ("T", "t_star", "product_error", "star_error", "mtm_deviation",
            "base_point_gap")
    json_payload = {"mode": "cross-validate", "p": p, "dim": n,
                    "reports": reports}
    _emit(cfg, "csv", (cols, rows), json_payload)
    return 0


_RUNNERS = {
    "modulus": _run_modulus,
    "product": _run_product,
    "star": _run_star,
    "conditional": _run_conditional,
    "cross-validate": _run_cross_validate,
    "sweep": _run_sweep,
}


def run_config(cfg: ExperimentConfig) -> int:
    """Execute a validated config; returns the process exit code."""
    return _RUNNERS[cfg.mode](cfg)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", help="JSON config file; flags override its fields")
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.add_argument("--format", choices=("csv", "json"),
                    help="output format (default: csv for curves, json for frames)")
    sp.add_argument("--seed", type=int, help="random seed for Monte Carlo")
    sp.add_argument("--strict-conditions", action="store_true",
                    dest="strict_conditions",
                    help="exit 3 when the growth/balance hypotheses fail")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sections",
        description="Gaussian normalization of far-out density sections.",
        epilog="CSV schemas per mode are documented in docs/cli-schemas.md.")
    sub = ap.add_subparsers(dest="mode")

    sp = sub.add_parser("modulus", help="smoothness modulus xi along a t grid; "
                        "CSV columns: t,xi,r_max,bound_power")
    sp.add_argument("--profile", help='profile spec: "power:4", "cosh", "gaussian"')
    sp.add_argument("--r", type=float, help="perturbation radius r")
    sp.add_argument("--t-grid", dest="t_grid", help="comma-separated t values")
    _add_common(sp)

    sp = sub.add_parser("product", help="one product-section frame + error report")
    sp.add_argument("--profiles", help="comma-separated profile specs, one per axis")
    sp.add_argument("--theta", help="comma-separated direction coordinates")
    sp.add_argument("--T", type=float, help="section offset")
    sp.add_argument("--r", type=float, help="comparison radius")
    sp.add_argument("--shells", type=int, help="radial shells in the sup grid")
    sp.add_argument("--directions", type=int, help="directions per shell")
    sp.add_argument("--sigma", type=float, help="balance factor for condition checks")
    sp.add_argument("--growth-omega", dest="growth_omega", type=float,
                    help="growth exponent for condition checks")
    sp.add_argument("--t0", type=float, help="condition-check threshold t0")
    _add_common(sp)

    sp = sub.add_parser("sweep", help="product pipeline over a T grid; CSV columns: "
                        "T,sup_rel,sup_abs,ks_1d,bound_surrogate,bound_valid,"
                        "log_alpha,lambda,y_min")
    sp.add_argument("--profiles")
    sp.add_argument("--theta")
    sp.add_argument("--T-grid", dest="T_grid", help="comma-separated offsets")
    sp.add_argument("--r", type=float)
    sp.add_argument("--shells", type=int)
    sp.add_argument("--directions", type=int)
    _add_common(sp)

    sp = sub.add_parser("star", help="star-section sweep over a t grid; CSV "
                        "columns: t,sup_abs,sup_rel,log_alpha,beta")
    sp.add_argument("--body", help='body spec: "euclidean", "lp:4", "orlicz:exp", '
                    '"orlicz:power:3", "lorentz:p=4:w=1,2,3"')
    sp.add_argument("--radial", help='radial spec: "power:4", "halfsquare", "exp"')
    sp.add_argument("--dim", type=int, help="ambient dimension (default 3)")
    sp.add_argument("--theta", help="apex ray (projected onto the boundary)")
    sp.add_argument("--theta-axis", dest="theta_axis", type=int,
                    help="apex at the k-th coordinate axis (1-based)")
    sp.add_argument("--t-grid", dest="t_grid")
    sp.add_argument("--omega", type=float, help="half-width of the comparison box")
    sp.add_argument("--grid-points", dest="grid_points", type=int,
                    help="grid points per box axis (default 21)")
    _add_common(sp)

    sp = sub.add_parser("conditional", help="law of X+2Y given X+Y=T")
    sp.add_argument("--profile")
    sp.add_argument("--T", type=float)
    sp.add_argument("--delta", type=float, help="Monte Carlo slab width")
    sp.add_argument("--mc-samples", dest="mc_samples", type=int,
                    help="number of Monte Carlo samples (0 disables)")
    _add_common(sp)

    sp = sub.add_parser("cross-validate", help="product vs star pipelines on "
                        "exp(-||x||_p^p); CSV columns: T,t_star,product_error,"
                        "star_error,mtm_deviation,base_point_gap")
    sp.add_argument("--p", type=float)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--T-grid", dest="T_grid")
    sp.add_argument("--omega", type=float)
    sp.add_argument("--grid-points", dest="grid_points", type=int)
    _add_common(sp)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.mode is None:
        ap.print_help(sys.stderr)
        return 1
    try:
        cfg = config_from_sources(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return run_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SectionError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _NUMERIC_EXIT


if __name__ == "__main__":
    sys.exit(main())
