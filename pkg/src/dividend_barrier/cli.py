"""Command-line front end.

    dividend-barrier solve    [--config FILE] [--out PATH] [--format csv|json] ...
    dividend-barrier barrier  --epsilon 0.01 ...
    dividend-barrier capital  --epsilon 0.05 --b 150 ...
    dividend-barrier sweep    --variable delta --values 0.1,0.2,0.4 ...
    dividend-barrier simulate --x 50 --b 100 --seed 7 ...
    dividend-barrier validate ...

Settings come from a flat ``key = value`` file (``--config``) and are
overridden by flags of the same name (``--n-points`` for ``n_points``).
Summaries go to stderr, data rows to ``--out`` or stdout.
Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 failed validation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, DomainError, NumericalError, UnsupportedCaseError
from .model import ModelParams, RiskConstraint
from .policy import FeedbackPolicy
from .risk import (barrier_ruin, lower_bound_epsilon0, optimal_value, risk_capital,
                   solve_b_star)
from .simulate import SimConfig, simulate_reflected
from .survival import solve_survival
from .value_function import closed_form_b0, f, solve_b0, solve_value_function

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4
SWEEP_VARIABLES = ("delta", "epsilon", "sigma2", "mu", "x")


@dataclass
class RunConfig:
    # model (defaults: the worked example with b = 100)
    mu: float = 2.0
    sigma2: float = 50.0
    delta: float = 0.2
    c: float = 0.05
    alpha: float = 0.5
    beta: float = 8.0
    # risk constraint
    T: float = 10.0
    epsilon: float | None = None
    # barrier and query points; b = None means the unconstrained optimum b0
    b: float | None = None
    x: float | None = None
    x_min: float = 0.0
    x_max: float | None = None
    n_points: int = 201
    # sweeps
    variable: str | None = None
    values: str | None = None
    quantity: str | None = None
    # numerics
    nx: int = 2000
    nt: int = 4000
    dt: float = 1e-3
    n_paths: int = 100_000
    seed: int = 0
    antithetic: bool = False
    monitoring: str = "grid"
    # output
    out: str | None = None
    format: str = "csv"
    grid_csv: str | None = None
    paths_csv: str | None = None

    def params(self) -> ModelParams:
        return ModelParams.from_sigma2(self.mu, self.sigma2, self.delta, self.c, self.alpha,
                                       self.beta)

    def sim_config(self) -> SimConfig:
        return SimConfig(dt=self.dt, n_paths=self.n_paths, seed=self.seed,
                         antithetic=self.antithetic, monitoring=self.monitoring)

    def value_list(self) -> list[float]:
        if not self.values:
            raise ConfigError("this command needs 'values' (comma-separated list)")
        try:
            vals = [float(v) for v in self.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad values list {self.values!r}: {exc}") from None
        if not vals:
            raise ConfigError("empty values list")
        return vals

    def x_grid(self, upper: float) -> np.ndarray:
        hi = upper if self.x_max is None else self.x_max
        if self.n_points < 1 or hi < self.x_min or self.x_min < 0:
            raise ConfigError(f"empty or invalid x range [{self.x_min}, {hi}] "
                              f"with n_points={self.n_points}")
        return np.linspace(self.x_min, hi, self.n_points)


_FIELD_TYPES = {fl.name: fl.type for fl in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if "None" in kind and raw.lower() in ("", "none"):
        return None
    try:
        if kind.startswith("float"):
            return float(raw)
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {kind}") from None
    return raw


def read_config(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; unknown keys are errors."""
    out = {}
    try:
        text = open(path).read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[key] = _coerce(key, val)
    return out


def build_config(ns: argparse.Namespace) -> RunConfig:
    settings = read_config(ns.config) if ns.config else {}
    for key in _FIELD_TYPES:
        raw = getattr(ns, key, None)
        if raw is not None:
            settings[key] = _coerce(key, raw)
    cfg = RunConfig(**settings)
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
    cfg.params()  # validate before any compute
    if cfg.epsilon is not None:
        RiskConstraint(cfg.T, cfg.epsilon)
    elif not cfg.T > 0:
        raise ConfigError(f"T must be > 0, got {cfg.T}")
    return cfg


# --- output -----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render(records: list[dict], fmt: str, summary: dict | None = None) -> str:
    if fmt == "json":
        doc = {"records": [{k: _jsonable(v) for k, v in r.items()} for r in records]}
        if summary:
            doc["summary"] = {k: _jsonable(v) for k, v in summary.items()}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if records:
        w.writerow(list(records[0]))
        for r in records:
            w.writerow([_fmt(v) for v in r.values()])
    return buf.getvalue()


def emit(cfg: RunConfig, records: list[dict], summary: dict | None = None):
    if summary:
        for k, v in summary.items():
            print(f"# {k} = {_fmt(v)}", file=sys.stderr)
    text = render(records, cfg.format, summary)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- commands ---------------------------------------------------------------

def _barrier(cfg: RunConfig, params: ModelParams) -> float:
    return solve_b0(params) if cfg.b is None else cfg.b


def cmd_solve(cfg: RunConfig) -> int:
    params = cfg.params()
    b = _barrier(cfg, params)
    sol = solve_value_function(params, b)
    xs = cfg.x_grid(b)
    gv = np.atleast_1d(sol.value(xs))
    fv = np.atleast_1d(f(xs, params))
    av = np.atleast_1d(FeedbackPolicy.from_params(params).a_star(xs))
    records = [{"x": float(x), "f": float(a), "g": float(g), "a_star": float(s)}
               for x, a, g, s in zip(xs, fv, gv, av)]
    summary = {"x_alpha": sol.x_alpha, "x_beta": sol.x_beta, "b0": sol.b0, "b": sol.b,
               "k1": sol.k1, "k2": sol.k2, "k3": sol.k3, "k4": sol.k4}
    emit(cfg, records, summary)
    return EXIT_OK


def _need_epsilon(cfg: RunConfig) -> float:
    if cfg.epsilon is None:
        raise ConfigError("this command needs epsilon")
    return cfg.epsilon


def cmd_barrier(cfg: RunConfig) -> int:
    params = cfg.params()
    eps = _need_epsilon(cfg)
    x = cfg.x
    if x is None:
        x = solve_b0(params)
    opt, V = optimal_value(x, params, cfg.T, eps, nx=cfg.nx, nt=cfg.nt)
    rec = {"epsilon": eps, "b0": opt.b0, "b_star": opt.b_star, "constrained": opt.constrained,
           "psi_b0": opt.psi_b0, "psi_b_star": opt.psi_b_star, "epsilon0": opt.epsilon0,
           "x": opt.x, "value": V, "cost_of_safety": opt.cost_of_safety,
           "value_ratio": opt.value_ratio}
    emit(cfg, [rec])
    return EXIT_OK


def cmd_capital(cfg: RunConfig) -> int:
    params = cfg.params()
    eps_list = cfg.value_list() if cfg.values else [_need_epsilon(cfg)]
    b = _barrier(cfg, params)
    records = [{"epsilon": e, "b": b,
                "x": risk_capital(b, params, cfg.T, e, nx=cfg.nx, nt=cfg.nt)} for e in eps_list]
    if cfg.grid_csv:
        solve_survival(b, params, cfg.T, nx=cfg.nx, nt=cfg.nt).to_csv(cfg.grid_csv)
    emit(cfg, records)
    return EXIT_OK


def _g_rows(name, value, params, b, xs):
    sol = solve_value_function(params, b)
    return [{name: value, "x": float(x), "g": float(g)}
            for x, g in zip(xs, np.atleast_1d(sol.value(xs)))]


def cmd_sweep(cfg: RunConfig) -> int:
    var = cfg.variable
    if var not in SWEEP_VARIABLES:
        raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {var!r}")
    base = cfg.params()
    records: list[dict] = []
    if var == "x":
        b = _barrier(cfg, base)
        sol = solve_value_function(base, b)
        xs = np.array(cfg.value_list()) if cfg.values else cfg.x_grid(b)
        av = np.atleast_1d(FeedbackPolicy.from_params(base).a_star(xs))
        records = [{"x": float(x), "g": float(g), "a_star": float(a)}
                   for x, g, a in zip(xs, np.atleast_1d(sol.value(xs)), av)]
    elif var == "epsilon":
        quantity = cfg.quantity or "barrier"
        for e in cfg.value_list():
            if quantity == "barrier":
                opt = solve_b_star(base, cfg.T, e, nx=cfg.nx, nt=cfg.nt)
                records.append({"epsilon": e, "b_star": opt.b_star,
                                "constrained": opt.constrained, "psi_b_star": opt.psi_b_star})
            elif quantity == "capital":
                b = _barrier(cfg, base)
                records.append({"epsilon": e, "b": b,
                                "x": risk_capital(b, base, cfg.T, e, nx=cfg.nx, nt=cfg.nt)})
            else:
                raise ConfigError(f"epsilon sweep quantity must be barrier or capital, "
                                  f"got {quantity!r}")
    else:
        quantity = cfg.quantity or "g"
        for v in cfg.value_list():
            params = base.replace(**{var: v})
            if quantity == "g":
                b = 100.0 if cfg.b is None else cfg.b
                records += _g_rows(var, v, params, b, cfg.x_grid(b))
            elif quantity == "barrier":
                eps = _need_epsilon(cfg)
                opt = solve_b_star(params, cfg.T, eps, nx=cfg.nx, nt=cfg.nt)
                records.append({var: v, "epsilon": eps, "b_star": opt.b_star,
                                "constrained": opt.constrained})
            else:
                raise ConfigError(f"{var} sweep quantity must be g or barrier, got {quantity!r}")
    emit(cfg, records)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    params = cfg.params()
    b = _barrier(cfg, params)
    x = b if cfg.x is None else cfg.x
    batch = simulate_reflected(x, b, params, cfg.T, cfg.sim_config())
    if cfg.paths_csv:
        batch.to_csv(cfg.paths_csv)
    rec = {"x": x, "b": b, "T": cfg.T, "n_paths": cfg.n_paths, "seed": cfg.seed,
           "ruin_fraction": batch.ruin_fraction.value, "ruin_stderr": batch.ruin_fraction.stderr,
           "dividends": batch.discounted_dividends.value,
           "dividends_stderr": batch.discounted_dividends.stderr}
    emit(cfg, [rec])
    return EXIT_OK


def validation_checks(cfg: RunConfig) -> list[dict]:
    """Cross-checks between closed forms, the PDE and Monte Carlo."""
    params = cfg.params()
    b0 = solve_b0(params)
    b = _barrier(cfg, params)
    sol = solve_value_function(params, b)
    free = solve_value_function(params, b0)
    rows = []

    def check(name, measured, threshold, ok):
        rows.append({"check": name, "measured": float(measured), "threshold": float(threshold),
                     "passed": bool(ok)})

    gaps = sol.smooth_fit_gaps()
    worst = max(max(abs(v), abs(d)) for v, d in gaps.values())
    check("smooth_fit", worst, 1e-8, worst <= 1e-8)
    xs = np.linspace(0.0, b, 1000)
    hjb = float(np.max(np.abs(sol.hjb_residual(xs[xs < b]))))
    check("hjb_residual", hjb, 1e-6, hjb < 1e-6)
    slope = float(np.min(sol.derivative(xs)))
    check("min_g_prime", slope, 1 - 1e-10, slope >= 1 - 1e-10)
    f1 = float(free.derivative(b0 * (1 - 1e-15)))
    check("f_prime_at_b0", abs(f1 - 1.0), 1e-8, abs(f1 - 1.0) < 1e-8)
    f2 = abs(float(free.curvature_at_barrier()))
    check("f_second_at_b0", f2, 1e-8, f2 < 1e-8)
    cf = closed_form_b0(params)
    if cf is not None:
        rel = abs(cf - b0) / b0
        check("b0_closed_form", rel, 1e-8, rel <= 1e-8)
    grid = solve_survival(b, params, cfg.T, nx=cfg.nx, nt=cfg.nt, keep="final")
    lo = float(np.min(grid.final))
    hi = float(np.max(grid.final))
    spill = max(0.0, -lo, hi - 1.0)
    check("pde_max_principle", spill, 1e-12, spill <= 1e-12)
    psi_b0 = barrier_ruin(b0, params, cfg.T, cfg.nx, cfg.nt)
    eps0 = lower_bound_epsilon0(b0, params, cfg.T)
    check("epsilon0_bound", psi_b0 - eps0, 0.0, psi_b0 >= eps0)
    mc = simulate_reflected(b, b, params, cfg.T, cfg.sim_config()).ruin_fraction
    z = abs(grid.ruin(b) - mc.value) / mc.stderr if mc.stderr > 0 else 0.0
    check("pde_vs_mc_ruin_z", z, 3.0, z <= 3.0)
    return rows


def cmd_validate(cfg: RunConfig) -> int:
    rows = validation_checks(cfg)
    emit(cfg, rows)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_VALIDATION


COMMANDS = {"solve": cmd_solve, "barrier": cmd_barrier, "capital": cmd_capital,
            "sweep": cmd_sweep, "simulate": cmd_simulate, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dividend-barrier",
                                     description="Optimal dividend barrier under a ruin constraint")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value settings file")
        for key in _FIELD_TYPES:
            # values stay strings here; build_config coerces them after the file is read
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="V")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = build_config(ns)
        return COMMANDS[ns.command](cfg)
    except (ConfigError, DomainError, UnsupportedCaseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
