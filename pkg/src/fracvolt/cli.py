"""Command-line front end: configuration, dispatch, report emission.

Subcommands: simulate, eta, lambda, car2, estimate, clt-check, selftest.
Exit codes: 0 success, 1 validation error (model or configuration violates
a hypothesis or invariant), 2 numerical failure (an accuracy target was
not met), 64 usage error. Errors are one line on stderr in the form
``fracvolt: error: <category>: <message>``.

Configuration files are JSON (the library supports Python 3.10, which has
no TOML reader in the standard library). Flags override file values, file
values override defaults. A model block looks like

    {"h": 0.6,
     "components": [
        {"kernel": {"variant": "exponential",
                    "params": {"sigma": 1.0, "theta": 1.0}},
         "polynomial": [-1.0, 0.0, 1.0]}]}

with ``polynomial`` holding monomial coefficients (c_0 + c_1 x + ...) of a
centered polynomial. The shorthand ``{"h": ..., "car2": {"theta0": ...,
"theta1": ...}, "polynomial": [...]}`` expands to the two-component state
model (X, X') with the shared polynomial. All floats are serialized at full
round-trip precision, and seeded outputs are bit-identical across reruns
and worker counts.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from ._accel import direct_convolution
from .asymptotics import ModelSpec, eta, lambda_matrix
from .car2 import (
    Car2Params,
    confidence_intervals,
    delta_method_cov,
    empirical_moments,
    estimate_theta,
    lambda_closed_form,
    m_infinity,
    spectral_constants,
)
from .errors import FracvoltError, NumericalError, ValidationError
from .fgn import SimGrid
from .hermite import monomial_to_hermite
from .kernels import check_admissibility, kernel_from_dict
from .mc import ExperimentConfig, report_to_dict, run_clt_experiment
from .quadrature import cross_correlation, double_weighted_integral
from .volterra import _convolve_kernel, simulate_paths

SCHEMA_VERSION = 1

_FMT = "%.17g"  # CSV cell format; JSON uses repr, which round-trips too


class _Parser(argparse.ArgumentParser):
    """argparse with the BSD-style usage exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(64, f"fracvolt: error: usage: {message}\n")


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return data


def _check_writable(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ValidationError(f"output directory does not exist: {parent}")
    if not os.access(parent, os.W_OK):
        raise ValidationError(f"output directory is not writable: {parent}")


def _model_block(data: dict) -> dict:
    # accept either a bare model block or a full config with a "model" key
    return data["model"] if "model" in data else data


def _expansion_from_config(coeffs, where: str):
    if not isinstance(coeffs, (list, tuple)) or not coeffs:
        raise ValidationError(
            f"{where}: 'polynomial' must be a non-empty list of monomial "
            "coefficients [c0, c1, ...]"
        )
    return monomial_to_hermite(np.asarray(coeffs, dtype=np.float64))


def _kernels_and_polys(mdict: dict):
    """(kernel specs, polynomial coefficient lists or None, h) from a model block."""
    if "h" not in mdict:
        raise ValidationError("model block must set 'h'")
    h = float(mdict["h"])
    if "car2" in mdict:
        block = mdict["car2"]
        try:
            params = Car2Params(theta0=float(block["theta0"]),
                                theta1=float(block["theta1"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(
                "model 'car2' block must set numeric 'theta0' and 'theta1'"
            ) from exc
        kernels = (
            kernel_from_dict({"variant": "car2_first",
                              "params": {"p": params.p, "q": params.q}}),
            kernel_from_dict({"variant": "car2_second",
                              "params": {"p": params.p, "q": params.q}}),
        )
        poly = mdict.get("polynomial")
        return kernels, (poly, poly), h
    comps = mdict.get("components")
    if not isinstance(comps, list) or not comps:
        raise ValidationError(
            "model block needs either 'components' (list) or a 'car2' block"
        )
    kernels, polys = [], []
    for i, comp in enumerate(comps):
        if not isinstance(comp, dict) or "kernel" not in comp:
            raise ValidationError(f"components[{i}] must be an object with a 'kernel'")
        kernels.append(kernel_from_dict(comp["kernel"]))
        polys.append(comp.get("polynomial"))
    return tuple(kernels), tuple(polys), h


def model_from_config(data: dict) -> ModelSpec:
    """Full model (kernels + polynomials) from a parsed config."""
    mdict = _model_block(data)
    kernels, polys, h = _kernels_and_polys(mdict)
    expansions = []
    for i, poly in enumerate(polys):
        if poly is None:
            raise ValidationError(
                f"component {i + 1} is missing 'polynomial' (monomial "
                "coefficients of the centered test function)"
            )
        expansions.append(_expansion_from_config(poly, f"component {i + 1}"))
    return ModelSpec(kernels=kernels, expansions=tuple(expansions), h=h)


def _effective(flag_value, file_config: dict, key: str, default=None):
    if flag_value is not None:
        return flag_value
    if key in file_config:
        return file_config[key]
    return default


def _require(value, name: str):
    if value is None:
        raise ValidationError(f"missing required parameter: {name}")
    return value


def _emit_json(payload: dict, out_path: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _grid2(a) -> list:
    return [[float(x) for x in row] for row in np.asarray(a, dtype=np.float64)]


def _vec(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=np.float64)]


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    data = _load_json(args.model)
    kernels, _, h = _kernels_and_polys(_model_block(data))
    T = float(_require(_effective(args.T, data, "T"), "--T"))
    dt = float(_require(_effective(args.dt, data, "dt"), "--dt"))
    seed = int(_effective(args.seed, data, "master_seed", 0))
    n_paths = int(_effective(args.paths, data, "n_paths", 1))
    if n_paths < 1:
        raise ValidationError(f"--paths must be >= 1, got {n_paths}")
    n_steps = round(T / dt)
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValidationError(f"T must be an integral multiple of dt, got T={T}, dt={dt}")
    grid = SimGrid(dt=dt, n_steps=n_steps)

    if args.out is not None:
        _check_writable(args.out)
    k = len(kernels)
    header = "path_id,t," + ",".join(f"X{i + 1}" for i in range(k))
    dest = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        dest.write(header + "\n")
        for pid in range(n_paths):
            bundle = simulate_paths(kernels, grid, h, seed, path_index=pid)
            cols = bundle.values
            for m, t in enumerate(grid.times):
                row = ",".join(_FMT % cols[i, m] for i in range(k))
                dest.write(f"{pid},{_FMT % t},{row}\n")
    finally:
        if args.out:
            dest.close()
    return 0


def _conditions_block(model: ModelSpec) -> dict:
    h_max = 1.0 - 1.0 / (2.0 * model.q_star)
    reports = [
        check_admissibility(spec, model.h.h, model.expansions[i].rank, 1e-6)
        for i, spec in enumerate(model.kernels)
    ]
    return {
        "breuer": bool(all(r.condition_breuer for r in reports)),
        "positivity": bool(all(r.eta_positive for r in reports)),
        "dol2": bool(all(r.condition_dol2 for r in reports)),
        "h_range": bool(0.5 < model.h.h < h_max),
    }


def _cmd_eta(args) -> int:
    model = model_from_config(_load_json(args.model))
    tol = args.tol if args.tol is not None else 1e-7
    etas = eta(model, tol=tol)
    _emit_json({
        "schema_version": SCHEMA_VERSION,
        "h": model.h.h,
        "etas": _vec(etas.eta),
        "error_bounds": _vec(etas.error_bounds),
    }, args.out)
    return 0


def _cmd_lambda(args) -> int:
    model = model_from_config(_load_json(args.model))
    tol = args.tol if args.tol is not None else 1e-6
    lam = lambda_matrix(model, tol=tol)
    etas = eta(model)
    _emit_json({
        "schema_version": SCHEMA_VERSION,
        "h": model.h.h,
        "etas": _vec(etas.eta),
        "lambda": _grid2(lam.entries),
        "error_bounds": _grid2(lam.error_bounds),
        "conditions": _conditions_block(model),
    }, args.out)
    return 0


def _cmd_car2(args) -> int:
    params = Car2Params(theta0=args.theta0, theta1=args.theta1)
    report = lambda_closed_form(params, args.h)
    consts = spectral_constants(args.h)
    _emit_json({
        "schema_version": SCHEMA_VERSION,
        "h": float(args.h),
        "theta0": float(args.theta0),
        "theta1": float(args.theta1),
        "p": float(params.p),
        "q": float(params.q),
        "constants": {
            "kappa": consts.kappa,
            "d_h": consts.d_h,
            "e_h": consts.e_h,
            "k_h": consts.k_h,
            "a_h": consts.a_h,
            "alpha_h": consts.alpha_h,
            "beta_h": consts.beta_h,
        },
        "m_infinity": [report.eta1_sq, report.eta2_sq],
        "lambda": _grid2(report.lambda_matrix()),
        "provenance": dict(report.provenance),
        "printed_form_discrepancies": dict(report.notes),
    }, args.out)
    return 0


def _read_state_csv(path: str):
    """(times, 2 x n values) from a simulate CSV holding exactly one path."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            body = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ValidationError(f"cannot read input CSV {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"input CSV {path} is not numeric: {exc}") from exc
    expected = ["path_id", "t", "X1", "X2"]
    if header != expected:
        raise ValidationError(
            f"input CSV must have columns {','.join(expected)}, got {','.join(header)}"
        )
    if body.size == 0:
        raise ValidationError("input CSV has no data rows")
    ids = np.unique(body[:, 0])
    if ids.shape[0] != 1:
        raise ValidationError(
            f"input CSV must hold exactly one path, found path_id values {ids.tolist()}"
        )
    times = body[:, 1]
    if times.shape[0] < 2 or np.any(np.diff(times) <= 0):
        raise ValidationError("input CSV times must be strictly increasing")
    return times, body[:, 2:4].T


def _cmd_estimate(args) -> int:
    if (args.input is None) == (args.m1 is None and args.m2 is None):
        raise ValidationError("pass either --input or both --m1 and --m2")
    if args.input is not None:
        times, values = _read_state_csv(args.input)
        m1, m2 = empirical_moments(times, values)
        T = float(args.T) if args.T is not None else float(times[-1] - times[0])
    else:
        if args.m1 is None or args.m2 is None:
            raise ValidationError("--m1 and --m2 must be given together")
        m1, m2 = float(args.m1), float(args.m2)
        T = float(_require(args.T, "--T"))

    params = estimate_theta((m1, m2), args.h)
    cov = delta_method_cov(params, args.h, T)
    ci = confidence_intervals(params, cov)
    _emit_json({
        "schema_version": SCHEMA_VERSION,
        "h": float(args.h),
        "T": T,
        "m_hat": [m1, m2],
        "theta_hat": {"theta0": params.theta0, "theta1": params.theta1},
        "p": float(params.p),
        "q": float(params.q),
        "cov": _grid2(cov),
        "ci_99": {"theta0": [float(v) for v in ci[0]],
                  "theta1": [float(v) for v in ci[1]]},
    }, args.out)
    return 0


def _cmd_clt_check(args) -> int:
    data = _load_json(args.config)
    if "model" not in data:
        raise ValidationError("clt-check config must contain a 'model' block")
    model = model_from_config(data)
    cfg = ExperimentConfig(
        model=model,
        functional=str(_effective(args.functional, data, "functional", "V")),
        T=float(_require(_effective(args.T, data, "T"), "T")),
        dt=float(_require(_effective(args.dt, data, "dt"), "dt")),
        n_paths=int(_require(_effective(args.paths, data, "n_paths"), "n_paths")),
        master_seed=int(_effective(args.seed, data, "master_seed", 0)),
        workers=int(_effective(args.threads, data, "workers", 1)),
    )
    for path in (args.out, args.samples_out):
        if path is not None:
            _check_writable(path)

    report = run_clt_experiment(cfg, force=args.force)
    _emit_json(report_to_dict(report), args.out)

    if args.samples_out is not None:
        k = model.k
        with open(args.samples_out, "w", encoding="utf-8") as fh:
            fh.write("path_id," + ",".join(f"V{i + 1}" for i in range(k)) + "\n")
            for pid, row in enumerate(report.samples):
                fh.write(f"{pid}," + ",".join(_FMT % v for v in row) + "\n")
    return 0


# ---------------------------------------------------------------------------
# selftest: oracle equivalences that must hold on any installation
# ---------------------------------------------------------------------------

def _selftest_fft_vs_direct() -> float:
    rng = np.random.default_rng(20240309)
    n = 2048
    lags = rng.standard_normal(n + 1)
    inc = rng.standard_normal(n)
    fast = _convolve_kernel(lags, inc)
    slow = direct_convolution(lags, inc)
    gap = float(np.abs(fast - slow).max() / max(np.abs(slow).max(), 1e-300))
    if gap > 1e-10:
        raise NumericalError(f"FFT and direct convolution disagree: {gap:.3e}")
    return gap


def _selftest_plancherel() -> float:
    # time-domain self/cross integrals of the CAR(2) kernel pair against
    # the closed forms obtained from their Fourier transforms
    p, q = -1.0, -2.0
    d2 = (p - q) ** 2
    closed = {
        (1, 1): (-1.0 / (2 * p) - 1.0 / (2 * q) + 2.0 / (p + q)) / d2,
        (2, 2): (-p / 2 - q / 2 + 2 * p * q / (p + q)) / d2,
    }
    from .kernels import Car2First, Car2Second
    specs = {1: Car2First(p=p, q=q), 2: Car2Second(p=p, q=q)}
    worst = 0.0
    for (i, j), target in closed.items():
        got = float(cross_correlation(specs[i], specs[j]).eval(np.array([0.0]))[0])
        worst = max(worst, abs(got - target) / abs(target))
    if worst > 1e-4:
        raise NumericalError(f"Plancherel self-test failed: relative gap {worst:.3e}")
    return worst


def _selftest_cauchy_schwarz(n_cases: int = 60) -> float:
    # with |x|, |y| in place of the kernels, the double weighted integral at
    # any shift is dominated by the geometric mean of the shift-zero self
    # integrals, uniformly in the shift
    from .kernels import Car2First, Car2Second, Exponential
    rng = np.random.default_rng(915)
    pool = []
    for _ in range(8):
        pool.append(Exponential(sigma=float(rng.uniform(0.5, 2.0)),
                                theta=float(rng.uniform(0.5, 3.0))))
    for _ in range(4):
        roots = -np.sort(rng.uniform(0.5, 4.0, size=2))
        if abs(roots[0] - roots[1]) < 0.1:
            roots[1] -= 0.2
        pool.append(Car2First(p=float(roots[0]), q=float(roots[1])))
        pool.append(Car2Second(p=float(roots[0]), q=float(roots[1])))
    h_grid = (0.55, 0.6, 0.65, 0.7)
    self_integral = {}

    def rho_abs(spec_a, spec_b, a, hh):
        return double_weighted_integral(spec_a, spec_b, a, hh, absolute=True).value

    worst = -np.inf
    for _ in range(n_cases):
        ia, ib = (int(v) for v in rng.integers(0, len(pool), size=2))
        hh = float(rng.choice(h_grid))
        a = float(rng.uniform(-5.0, 5.0))
        key_a, key_b = (ia, hh), (ib, hh)
        if key_a not in self_integral:
            self_integral[key_a] = rho_abs(pool[ia], pool[ia], 0.0, hh)
        if key_b not in self_integral:
            self_integral[key_b] = rho_abs(pool[ib], pool[ib], 0.0, hh)
        bound = np.sqrt(self_integral[key_a] * self_integral[key_b])
        val = rho_abs(pool[ia], pool[ib], a, hh)
        worst = max(worst, (val - bound) / bound)
    if worst > 1e-10:
        raise NumericalError(
            f"Cauchy-Schwarz bound violated by relative excess {worst:.3e}"
        )
    return worst


def _cmd_selftest(args) -> int:
    gap = _selftest_fft_vs_direct()
    print(f"selftest: fft-vs-direct ok (relative gap {gap:.3e})")
    gap = _selftest_plancherel()
    print(f"selftest: plancherel ok (relative gap {gap:.3e})")
    excess = _selftest_cauchy_schwarz()
    print(f"selftest: cauchy-schwarz bound ok (worst signed slack {excess:.3e})")
    return 0


# ---------------------------------------------------------------------------
# parser assembly and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(
        prog="fracvolt",
        description="Fractional Volterra process simulation and CLT asymptotics",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"fracvolt {__version__} (report schema {SCHEMA_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="simulate paths to CSV")
    p.add_argument("--model", required=True, help="model config JSON")
    p.add_argument("--T", type=float, default=None, help="horizon")
    p.add_argument("--dt", type=float, default=None, help="grid step")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--paths", type=int, default=None, help="number of paths")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("eta", help="limiting normalizers eta_i")
    p.add_argument("--model", required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None, help="output JSON (default stdout)")
    p.set_defaults(handler=_cmd_eta)

    p = sub.add_parser("lambda", help="asymptotic covariance matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None, help="output JSON (default stdout)")
    p.set_defaults(handler=_cmd_lambda)

    p = sub.add_parser("car2", help="CAR(2) closed forms")
    p.add_argument("--theta0", type=float, required=True)
    p.add_argument("--theta1", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--out", default=None, help="output JSON (default stdout)")
    p.set_defaults(handler=_cmd_car2)

    p = sub.add_parser("estimate", help="moment estimator for (theta0, theta1)")
    p.add_argument("--input", default=None, help="state CSV (path_id,t,X1,X2)")
    p.add_argument("--m1", type=float, default=None, help="time average of X^2")
    p.add_argument("--m2", type=float, default=None, help="time average of X'^2")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--T", type=float, default=None, help="horizon for the CI scaling")
    p.add_argument("--out", default=None, help="output JSON (default stdout)")
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("clt-check", help="seeded Monte Carlo CLT experiment")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", default=None, help="report JSON (default stdout)")
    p.add_argument("--samples-out", default=None, help="per-path samples CSV")
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None, help="worker processes")
    p.add_argument("--functional", choices=("U", "V"), default=None)
    p.add_argument("--force", action="store_true",
                   help="run models outside the theorem hypotheses; the report "
                        "is stamped OUT OF THEOREM SCOPE")
    p.set_defaults(handler=_cmd_clt_check)

    p = sub.add_parser("selftest", help="oracle equivalence suite")
    p.set_defaults(handler=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ValidationError as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"fracvolt: error: validation: {msg}\n")
        return 1
    except NumericalError as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"fracvolt: error: numerical: {msg}\n")
        return 2
    except FracvoltError as exc:  # defensive: the two families above cover all
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"fracvolt: error: internal: {msg}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
