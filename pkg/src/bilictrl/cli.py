"""Batch driver: JSON config in, JSON/CSV artifacts out.

Subcommands
    check-mu    weighted coupling lower-bound report for a potential
    simulate    propagate one of the flows under a prescribed control
    synthesize  steer to a target and re-verify the control independently
    moment      standalone trigonometric moment solve

Exit codes: 0 success, 2 non-convergence or solver failure, 3 invalid
configuration, 4 hypothesis or gap-condition violation.  A config may hold
a single run or a {"sweep": [...]} list; sweep entries run in isolated
subdirectories and may be parallelized with --jobs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io
from .basis import BasisSpec, Geometry, SpectralState
from .controls import ControlSignal
from .coupling import (PotentialSpec, builtin_potential, check_hypothesis,
                       coupling_matrix)
from .errors import (AccuracyError, BilictrlError, ConfigError,
                     ConvergenceError, GapConditionError,
                     HypothesisViolationError, IllPosedError)
from .moments import MomentProblem, solve_moments
from .nls import (physical_norm, propagate_nls, synthesize_nls,
                  zeta_from_physical)
from .schrodinger import PropagatorConfig, Scheme, ground_state, propagate
from .synthesis import (SynthesisConfig, Variant, canonical_target,
                        synthesize)
from .wave import (NonlinearitySpec, WaveState, builtin_nonlinearity,
                   propagate_wave, synthesize_wave)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG = 3
EXIT_HYPOTHESIS = 4

PROBLEMS = ("schrodinger", "schrodinger_h5", "schrodinger_radial", "nls", "wave")

_TOP_KEYS = {"problem", "n_modes", "T", "mu", "target", "control",
             "nonlinearity", "propagator", "synthesis", "moment", "check",
             "output_dir", "label"}
_MU_KEYS = {"builtin", "table", "endpoint_derivatives"}
_TABLE_KEYS = {"x", "values"}
_TARGET_KEYS = {"mode", "epsilon", "component", "coefficients"}
_COEFF_KEYS = {"re", "im", "w_re", "wt_re"}
_CONTROL_KEYS = {"constant", "sin", "csv", "zero"}
_SIN_KEYS = {"amplitude", "omega"}
_PROP_KEYS = {"dt", "scheme", "store_every", "fixed_point_tol",
              "max_fixed_point_iters", "drift_abort"}
_SYN_KEYS = {"tolerance", "max_iters", "damping", "moment_grid"}
_MOMENT_KEYS = {"frequencies", "targets_re", "targets_im", "linear_moment",
                "derivative_form", "grid_size"}
_CHECK_KEYS = {"max_mode", "threshold"}
_F_KEYS = {"builtin", "zero"}


def _expect_keys(section: dict, allowed: set, context: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{context} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _validate_single(cfg: dict) -> None:
    _expect_keys(cfg, _TOP_KEYS, "config")
    problem = cfg.get("problem")
    if problem not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}, got {problem!r}")
    if "mu" in cfg:
        _expect_keys(cfg["mu"], _MU_KEYS, "mu")
        if "table" in cfg["mu"]:
            _expect_keys(cfg["mu"]["table"], _TABLE_KEYS, "mu.table")
    if "target" in cfg:
        _expect_keys(cfg["target"], _TARGET_KEYS, "target")
        if "coefficients" in cfg["target"]:
            _expect_keys(cfg["target"]["coefficients"], _COEFF_KEYS,
                         "target.coefficients")
    if "control" in cfg:
        _expect_keys(cfg["control"], _CONTROL_KEYS, "control")
        if "sin" in cfg["control"]:
            _expect_keys(cfg["control"]["sin"], _SIN_KEYS, "control.sin")
    if "propagator" in cfg:
        _expect_keys(cfg["propagator"], _PROP_KEYS, "propagator")
    if "synthesis" in cfg:
        _expect_keys(cfg["synthesis"], _SYN_KEYS, "synthesis")
    if "moment" in cfg:
        _expect_keys(cfg["moment"], _MOMENT_KEYS, "moment")
    if "check" in cfg:
        _expect_keys(cfg["check"], _CHECK_KEYS, "check")
    if "nonlinearity" in cfg:
        _expect_keys(cfg["nonlinearity"], _F_KEYS, "nonlinearity")


def _geometry_for(problem: str) -> Geometry:
    if problem in ("schrodinger", "schrodinger_h5"):
        return Geometry.INTERVAL_DIRICHLET
    if problem == "schrodinger_radial":
        return Geometry.BALL3D_RADIAL
    return Geometry.INTERVAL_NEUMANN


def _build_basis(cfg: dict) -> BasisSpec:
    n = cfg.get("n_modes", 32)
    if not isinstance(n, int) or n < 1:
        raise ConfigError("n_modes must be a positive integer")
    return BasisSpec(_geometry_for(cfg["problem"]), n)


def _horizon(cfg: dict) -> float:
    try:
        T = float(cfg["T"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError("T (horizon) must be a number") from None
    if T <= 0:
        raise ConfigError("T must be positive")
    return T


def _build_mu(cfg: dict) -> PotentialSpec:
    section = cfg.get("mu")
    if section is None:
        raise ConfigError("section 'mu' is required")
    if "builtin" in section:
        try:
            return builtin_potential(section["builtin"])
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    if "table" in section:
        x = np.asarray(section["table"]["x"], dtype=float)
        y = np.asarray(section["table"]["values"], dtype=float)
        if x.shape != y.shape or x.size < 2:
            raise ConfigError("mu.table needs matching x/values arrays")
        deriv = section.get("endpoint_derivatives")
        deriv = tuple(float(v) for v in deriv) if deriv is not None else None
        return PotentialSpec(lambda t, x=x, y=y: np.interp(t, x, y),
                             deriv, "table")
    raise ConfigError("mu needs either 'builtin' or 'table'")


def _build_propagator(cfg: dict) -> PropagatorConfig:
    section = cfg.get("propagator", {})
    scheme = section.get("scheme", "strang_split")
    try:
        scheme = Scheme(scheme)
    except ValueError:
        raise ConfigError(f"unknown scheme {scheme!r}") from None
    try:
        return PropagatorConfig(
            dt=section.get("dt"),
            scheme=scheme,
            fixed_point_tol=section.get("fixed_point_tol", 1e-12),
            max_fixed_point_iters=section.get("max_fixed_point_iters", 200),
            drift_abort=section.get("drift_abort", 1e-6),
            store_every=section.get("store_every", 8),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_synthesis(cfg: dict, problem: str) -> SynthesisConfig:
    section = cfg.get("synthesis", {})
    variant = (Variant.H10_CONTROL_H5_TARGET if problem == "schrodinger_h5"
               else Variant.L2_CONTROL_H3_TARGET)
    try:
        return SynthesisConfig(
            tolerance=section.get("tolerance", 1e-6),
            max_iters=section.get("max_iters", 12),
            damping=section.get("damping", 1.0),
            variant=variant,
            propagator=_build_propagator(cfg),
            moment_grid=section.get("moment_grid", 4096),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_control(cfg: dict, horizon: float, grid_size: int = 4096) -> ControlSignal:
    section = cfg.get("control", {"zero": True})
    if "csv" in section:
        try:
            data = np.loadtxt(section["csv"], delimiter=",", skiprows=1)
        except OSError as exc:
            raise ConfigError(f"cannot read control csv: {exc}") from None
        if data.ndim != 2 or data.shape[1] < 2:
            raise ConfigError("control csv needs columns t,u")
        t, uvals = data[:, 0], data[:, 1]
        grid = np.linspace(0.0, horizon, grid_size + 1)
        return ControlSignal(horizon, np.interp(grid, t, uvals))
    if "constant" in section:
        c = float(section["constant"])
        return ControlSignal(horizon, np.full(grid_size + 1, c))
    if "sin" in section:
        amp = float(section["sin"].get("amplitude", 1.0))
        omega = float(section["sin"].get("omega", 1.0))
        return ControlSignal.from_callable(
            lambda t: amp * np.sin(omega * t), horizon, grid_size)
    return ControlSignal.zeros(horizon, grid_size)


def _fit_coefficients(values: np.ndarray, basis: BasisSpec,
                      order: float) -> np.ndarray:
    """Truncate a longer coefficient vector once its tail is negligible."""
    n = basis.n_modes
    if values.size == n:
        return values
    if values.size < n:
        raise ConfigError(f"need {n} coefficients, got {values.size}")
    big = BasisSpec(basis.geometry, values.size)
    weights = big.sobolev_weights(order)
    total = np.linalg.norm(weights * values)
    tail = np.linalg.norm(weights[n:] * values[n:])
    if total > 0 and tail > 1e-10 * total:
        raise ConfigError(
            f"target tail beyond mode {n} carries {tail / total:.2e} of its "
            "norm; the truncation is under-resolved"
        )
    return values[:n]


def _build_schrodinger_target(cfg, basis, coupling, horizon) -> SpectralState:
    section = cfg.get("target")
    if section is None:
        raise ConfigError("section 'target' is required for synthesize")
    if "coefficients" in section:
        re = np.asarray(section["coefficients"].get("re", []), dtype=float)
        im = np.asarray(section["coefficients"].get("im", []), dtype=float)
        if re.size != im.size:
            raise ConfigError("coefficients re/im must have equal length")
        c = _fit_coefficients(re + 1j * im, basis, 3.0)
        state = SpectralState(basis, c)
        if abs(state.l2_norm() - 1.0) > 1e-8:
            raise ConfigError("target coefficients are not unit norm")
        return state
    mode = section.get("mode")
    eps = section.get("epsilon")
    if mode is None or eps is None:
        raise ConfigError("target needs mode/epsilon or coefficients")
    return canonical_target(coupling, horizon, int(mode), float(eps))


def _build_nls_target(cfg, basis, horizon) -> SpectralState:
    section = cfg.get("target")
    if section is None:
        raise ConfigError("section 'target' is required for synthesize")
    mode = int(section.get("mode", 1))
    eps = float(section.get("epsilon", 1e-2))
    basis.check_mode(mode)
    c = np.zeros(basis.n_modes, dtype=complex)
    c[0] = 1.0
    c[mode] += eps
    c /= np.linalg.norm(c)
    return SpectralState(basis, np.exp(-1j * horizon) * c)


def _build_wave_target(cfg, basis) -> WaveState:
    section = cfg.get("target")
    if section is None:
        raise ConfigError("section 'target' is required for synthesize")
    mode = int(section.get("mode", 1))
    eps = float(section.get("epsilon", 1e-2))
    component = section.get("component", "w")
    basis.check_mode(mode)
    w = np.zeros(basis.n_modes)
    wt = np.zeros(basis.n_modes)
    w[0] = 1.0
    if component == "w":
        w[mode] += eps
    elif component == "wt":
        wt[mode] += eps
    else:
        raise ConfigError("target.component must be 'w' or 'wt'")
    return WaveState(basis, w, wt)


def _build_nonlinearity(cfg: dict) -> NonlinearitySpec:
    section = cfg.get("nonlinearity", {"zero": True})
    if section.get("zero"):
        return builtin_nonlinearity("zero")
    try:
        return builtin_nonlinearity(section["builtin"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from None


def _state_json(coeffs, norms: dict) -> dict:
    return {
        "coeffs_re": [float(c.real) for c in coeffs],
        "coeffs_im": [float(c.imag) for c in coeffs],
        "norms": norms,
    }


def run_check_mu(cfg: dict, out_dir: str) -> int:
    basis = _build_basis(cfg)
    mu = _build_mu(cfg)
    section = cfg.get("check", {})
    max_mode = int(section.get("max_mode", 200))
    threshold = float(section.get("threshold", 1e-13))
    report = check_hypothesis(mu, basis, max_mode, threshold)
    io.write_json(report.to_json_dict(), os.path.join(out_dir, "hypothesis_report.json"))
    io.write_csv(os.path.join(out_dir, "hypothesis_wk.csv"), ["k", "w_k"],
                 zip(report.modes.astype(float), report.values))
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def run_simulate(cfg: dict, out_dir: str) -> int:
    problem = cfg["problem"]
    basis = _build_basis(cfg)
    horizon = _horizon(cfg)
    mu = _build_mu(cfg)
    coupling = coupling_matrix(mu, basis)
    pcfg = _build_propagator(cfg)
    u = _build_control(cfg, horizon)

    if problem in ("schrodinger", "schrodinger_h5", "schrodinger_radial"):
        traj = propagate(ground_state(basis), u, coupling, pcfg)
        traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
        final = traj.final
        io.write_json(_state_json(final.coeffs, {
            "l2": final.l2_norm(), "h3": final.sobolev_norm(3.0)}),
            os.path.join(out_dir, "final_state.json"))
    elif problem == "nls":
        traj = propagate_nls(u, coupling, horizon, pcfg)
        traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
        final = traj.final
        io.write_json(_state_json(final.coeffs, {
            "l2_physical": physical_norm(final),
            "h2": final.sobolev_norm(2.0)}),
            os.path.join(out_dir, "final_state.json"))
    else:
        f = _build_nonlinearity(cfg)
        traj = propagate_wave(u, coupling, f, horizon, pcfg)
        traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
        final = traj.final
        io.write_json({
            "w_re": [float(v) for v in final.w],
            "wt_re": [float(v) for v in final.wt],
            "norms": {"energy": final.energy(),
                      "product": final.deviation().product_norm()},
        }, os.path.join(out_dir, "final_state.json"))
    return EXIT_OK


def run_synthesize(cfg: dict, out_dir: str) -> int:
    problem = cfg["problem"]
    basis = _build_basis(cfg)
    horizon = _horizon(cfg)
    mu = _build_mu(cfg)
    coupling = coupling_matrix(mu, basis)
    scfg = _build_synthesis(cfg, problem)

    if problem in ("schrodinger", "schrodinger_h5", "schrodinger_radial"):
        target = _build_schrodinger_target(cfg, basis, coupling, horizon)
        report = synthesize(target, mu, horizon, scfg)
        redo = propagate(ground_state(basis), report.control, coupling,
                         scfg.propagator).final
        independent = {
            "l2_norm_error": abs(redo.l2_norm() - 1.0),
            "full_h3": (redo - target).sobolev_norm(3.0),
            "full_h5": (redo - target).sobolev_norm(5.0),
        }
    elif problem == "nls":
        target = _build_nls_target(cfg, basis, horizon)
        report = synthesize_nls(target, coupling, horizon, scfg)
        redo = propagate_nls(report.control, coupling, horizon,
                             scfg.propagator).final
        independent = {
            "l2_norm_error": abs(physical_norm(redo) - 1.0),
            "full_h2": (redo - zeta_from_physical(target, horizon)).sobolev_norm(2.0),
        }
    else:
        f = _build_nonlinearity(cfg)
        target = _build_wave_target(cfg, basis)
        report = synthesize_wave(target, coupling, f, horizon, scfg)
        redo = propagate_wave(report.control, coupling, f, horizon,
                              scfg.propagator).final
        independent = {"product_residual": (redo - target).product_norm()}

    doc = report.to_json_dict()
    doc["independent_residuals"] = independent
    io.write_json(doc, os.path.join(out_dir, "synthesis_report.json"))
    report.control_to_csv(os.path.join(out_dir, "control.csv"))
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def run_moment(cfg: dict, out_dir: str) -> int:
    section = cfg.get("moment")
    if section is None:
        raise ConfigError("section 'moment' is required")
    horizon = _horizon(cfg)
    freqs = np.asarray(section.get("frequencies", []), dtype=float)
    re = np.asarray(section.get("targets_re", []), dtype=float)
    im = np.asarray(section.get("targets_im", np.zeros_like(re)), dtype=float)
    if freqs.size == 0 or freqs.size != re.size or re.size != im.size:
        raise ConfigError("moment needs matching frequencies/targets arrays")
    lin = section.get("linear_moment")
    try:
        problem = MomentProblem(horizon, freqs, re + 1j * im,
                                linear_moment=lin,
                                derivative_form=bool(section.get(
                                    "derivative_form", False)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    solution = solve_moments(problem, grid_size=int(section.get("grid_size", 4096)))
    io.write_json(solution.to_json_dict(),
                  os.path.join(out_dir, "moment_solution.json"))
    return EXIT_OK


_COMMANDS = {
    "check-mu": run_check_mu,
    "simulate": run_simulate,
    "synthesize": run_synthesize,
    "moment": run_moment,
}


def _run_entry(command: str, cfg: dict, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    try:
        _validate_single(cfg)
        return _COMMANDS[command](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HypothesisViolationError, GapConditionError, IllPosedError) as exc:
        print(f"hypothesis/gap violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ConvergenceError, AccuracyError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except BilictrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bilictrl",
        description="bilinear-control simulation and synthesis driver")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for sweep configs")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if "sweep" in cfg:
        extra = set(cfg) - {"sweep", "output_dir"}
        if extra or not isinstance(cfg["sweep"], list):
            print("config error: a sweep config holds only 'sweep' and "
                  "'output_dir'", file=sys.stderr)
            return EXIT_CONFIG
        base = args.out or cfg.get("output_dir", "out")
        entries = cfg["sweep"]
        dirs = [os.path.join(base, f"entry_{i:03d}") for i in range(len(entries))]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(_run_entry, [args.command] * len(entries),
                                      entries, dirs))
        else:
            codes = [_run_entry(args.command, entry, d)
                     for entry, d in zip(entries, dirs)]
        return max(codes, default=EXIT_OK)

    out_dir = args.out or cfg.get("output_dir", "out")
    return _run_entry(args.command, cfg, out_dir)


if __name__ == "__main__":
    sys.exit(main())
