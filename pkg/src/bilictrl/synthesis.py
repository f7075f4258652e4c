"""Control synthesis around the free ground trajectory.

Steering works in three stages.  The desired terminal state is projected
onto the tangent space of the unit sphere at the freely evolved ground
state; the tangent deviation is converted into a trigonometric moment
problem whose solution is the control of the linearized dynamics; and a
chord Newton iteration (the frozen right inverse of the linearization at
zero control) removes the nonlinear mismatch.  Because the flow conserves
the l^2 norm, matching the tangent component on the sphere forces the full
state to match, up to a factor of two in the residual.

The same loop serves the plain L^2 controls with order-3 target regularity
and the H^1_0 controls with order-5 targets; the latter solves the moment
problem for the control derivative and recovers an endpoint-vanishing
control by exact antidifferentiation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .basis import BasisSpec, SpectralState
from .controls import ControlSignal
from .coupling import CouplingMatrix, PotentialSpec, coupling_matrix
from .errors import HypothesisViolationError, OutOfNeighborhoodError
from .moments import MomentProblem, MomentSolution, solve_moments
from .schrodinger import PropagatorConfig, ground_state, propagate

DIVISION_GUARD = 1e-13


class Variant(str, Enum):
    L2_CONTROL_H3_TARGET = "l2"
    H10_CONTROL_H5_TARGET = "h10"


class FrequencyFamily(str, Enum):
    SCHRODINGER_DIRICHLET = "schrodinger_dirichlet"
    SCHRODINGER_RADIAL = "schrodinger_radial"
    NLS_DEFOCUSING = "nls_defocusing"
    NLS_FOCUSING = "nls_focusing"
    WAVE = "wave"


def frequency_set(family: FrequencyFamily, basis: BasisSpec, count: int) -> np.ndarray:
    """Increasing moment-problem frequencies, zero first; ``count`` entries."""
    if count > basis.n_modes:
        raise ValueError("count exceeds the basis truncation")
    family = FrequencyFamily(family)
    if family in (FrequencyFamily.SCHRODINGER_DIRICHLET,
                  FrequencyFamily.SCHRODINGER_RADIAL):
        lam = basis.eigenvalues()[:count]
        return lam - lam[0]
    if family is FrequencyFamily.WAVE:
        return np.pi * np.arange(count, dtype=float)
    lam = (np.pi * np.arange(count, dtype=float)) ** 2
    shift = 2.0 if family is FrequencyFamily.NLS_DEFOCUSING else -2.0
    if family is FrequencyFamily.NLS_FOCUSING and np.any(lam[1:] + shift <= 0):
        raise ValueError("focusing frequencies are not all real on this domain")
    return np.sqrt(lam * np.maximum(lam + shift, 0.0))


@dataclass
class TangentProjector:
    """Projection onto { xi : Re <xi, reference> = 0 } and the sphere lift."""

    horizon: float
    basis: BasisSpec

    def __post_init__(self):
        self.reference = _free_ground_at(self.basis, self.horizon)

    def project(self, state: SpectralState) -> SpectralState:
        alpha = np.real(state.inner(self.reference))
        return state - alpha * self.reference

    def lift(self, tangent_part: SpectralState) -> SpectralState:
        """Unit-norm state on the positive branch with the given tangent part."""
        r2 = tangent_part.l2_norm() ** 2
        if r2 >= 1.0:
            raise OutOfNeighborhoodError(
                f"tangent part has norm {np.sqrt(r2):.6f} >= 1; no sphere lift"
            )
        return tangent_part + np.sqrt(1.0 - r2) * self.reference


def _free_ground_at(basis: BasisSpec, horizon: float) -> SpectralState:
    lam1 = basis.eigenvalues()[0]
    return SpectralState.unit_mode(
        basis, basis.index_origin, np.exp(-1j * lam1 * horizon)
    )


def tangent_project(state: SpectralState, proj: TangentProjector) -> SpectralState:
    return proj.project(state)


def sphere_lift(tangent_part: SpectralState, proj: TangentProjector) -> SpectralState:
    return proj.lift(tangent_part)


def guard_ground_row(coupling: CouplingMatrix) -> None:
    """Refuse potentials whose ground-row coupling vanishes on a retained mode."""
    bad = np.abs(coupling.ground_row) < DIVISION_GUARD
    if np.any(bad):
        k = int(coupling.basis.modes[np.argmax(bad)])
        raise HypothesisViolationError(
            f"coupling of the lowest mode to mode {k} is below {DIVISION_GUARD:.0e}; "
            "moment targets would divide by it", mode=k,
        )


def linearized_targets(psi_f_tangent: SpectralState, coupling: CouplingMatrix,
                       horizon: float) -> MomentProblem:
    """Moment problem whose solution drives the linearized flow to the target.

    Mode k of the linearized response is i B[0][k] e^{-i lambda_k T} times
    the moment of the control at frequency lambda_k - lambda_1, so the
    target for that frequency is <Psi_f, phi_k> e^{i lambda_k T} / (i B[0][k]).
    Tangency of Psi_f makes the zero-frequency target real.
    """
    basis = coupling.basis
    guard_ground_row(coupling)
    row = coupling.ground_row
    lam = basis.eigenvalues()
    d = psi_f_tangent.coeffs * np.exp(1j * lam * horizon) / (1j * row)
    return MomentProblem(horizon, lam - lam[0], d)


def linearized_targets_h10(psi_f_tangent: SpectralState, coupling: CouplingMatrix,
                           horizon: float) -> MomentProblem:
    """Derivative-form variant: constraints on v' for an H^1_0 control v.

    Integrating the plain constraints by parts with v(0) = v(T) = 0 turns
    the frequency-w constraint into one on v' with target multiplied by
    -i w, the zero-frequency constraint into the t-weighted linear moment,
    and adds the zero-mean constraint on v'.
    """
    basis = coupling.basis
    guard_ground_row(coupling)
    row = coupling.ground_row
    lam = basis.eigenvalues()
    d0 = psi_f_tangent.coeffs[0] * np.exp(1j * lam[0] * horizon) / (1j * row[0])
    if abs(d0.imag) > 1e-10 * max(1.0, abs(d0)):
        raise ValueError("target is not tangent: zero-frequency datum not real")
    d = (lam[0] - lam) * psi_f_tangent.coeffs * np.exp(1j * lam * horizon) / row
    d[0] = 0.0  # zero mean of v'
    return MomentProblem(horizon, lam - lam[0], d,
                         linear_moment=-float(d0.real), derivative_form=True)


@dataclass
class SynthesisConfig:
    tolerance: float = 1e-6          # tangent residual in the variant's norm
    max_iters: int = 12
    damping: float = 1.0
    variant: Variant = Variant.L2_CONTROL_H3_TARGET
    propagator: PropagatorConfig = field(default_factory=PropagatorConfig)
    moment_grid: int = 4096

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")

    @property
    def target_order(self) -> float:
        return 5.0 if self.variant is Variant.H10_CONTROL_H5_TARGET else 3.0


@dataclass
class SynthesisReport:
    converged: bool
    iterations: int
    residual_history: list[float]
    control: ControlSignal
    control_norm: float
    terminal_state: SpectralState
    terminal_residuals: dict
    variant: Variant
    moment_diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "variant": self.variant.value,
            "residual_history": [float(r) for r in self.residual_history],
            "control_norm": float(self.control_norm),
            "terminal_residuals": {k: float(v) for k, v in
                                   self.terminal_residuals.items()},
            "moment_diagnostics": {k: float(v) for k, v in
                                   self.moment_diagnostics.items()},
        }

    def control_to_csv(self, path, float_fmt: str = "%.17g") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "u"])
            for t, s in zip(self.control.times, self.control.samples):
                writer.writerow([float_fmt % t, float_fmt % s])


def _control_norm(u: ControlSignal, variant: Variant) -> float:
    if variant is Variant.H10_CONTROL_H5_TARGET:
        return u.h10_norm()
    return u.l2_norm()


def chord_newton(u0: ControlSignal, evaluate, solve_correction,
                 tolerance: float, max_iters: int, damping: float):
    """Generic chord Newton driver shared by the three synthesis front ends.

    ``evaluate(u)`` returns (aux, residual, residual_norm) where aux is
    whatever terminal data the caller wants back; ``solve_correction``
    maps a residual to a control increment on the grid of ``u0``.  A step
    that fails to decrease the residual is halved up to five times; if no
    decrease is found the loop stops with converged = False.  Accepted
    steps therefore decrease the recorded residual history strictly.
    """
    u = u0
    aux, residual, res_norm = evaluate(u)
    history = [res_norm]
    diagnostics = {}
    converged = res_norm < tolerance
    iterations = 0
    while not converged and iterations < max_iters:
        correction, diagnostics = solve_correction(residual)
        step = damping
        accepted = False
        for _ in range(6):  # full step plus at most 5 halvings
            u_trial = u + step * correction
            aux_t, r_t, rn_t = evaluate(u_trial)
            if rn_t < res_norm:
                u, aux, residual, res_norm = u_trial, aux_t, r_t, rn_t
                accepted = True
                break
            step *= 0.5
        iterations += 1
        if not accepted:
            break
        history.append(res_norm)
        converged = res_norm < tolerance
    return u, aux, residual, res_norm, history, converged, iterations, diagnostics


def _moment_diag(solution: MomentSolution) -> dict:
    return {
        "gram_condition": solution.gram_condition,
        "ingham_lower": solution.ingham_bounds[0],
        "ingham_upper": solution.ingham_bounds[1],
    }


def synthesize(psi_f: SpectralState, mu: PotentialSpec, horizon: float,
               cfg: SynthesisConfig | None = None) -> SynthesisReport:
    """Chord Newton synthesis of a control steering the ground mode to psi_f.

    The right inverse of the linearization at zero control is frozen across
    iterations: each step solves the moment problem for the current tangent
    mismatch and adds the (possibly damped) correction to the control.
    """
    cfg = cfg or SynthesisConfig()
    basis = psi_f.basis
    if abs(psi_f.l2_norm() - 1.0) > 1e-9:
        raise ValueError("terminal state must lie on the unit sphere")
    coupling = coupling_matrix(mu, basis)
    guard_ground_row(coupling)
    proj = TangentProjector(horizon, basis)
    if np.real(psi_f.inner(proj.reference)) <= 0.0:
        raise OutOfNeighborhoodError(
            "terminal state is not on the positive branch around the reference"
        )

    order = cfg.target_order
    targets_of = (linearized_targets_h10
                  if cfg.variant is Variant.H10_CONTROL_H5_TARGET
                  else linearized_targets)
    target_tangent = proj.project(psi_f)
    start = ground_state(basis)

    def evaluate(u):
        traj = propagate(start, u, coupling, cfg.propagator)
        residual = target_tangent - proj.project(traj.final)
        return traj, residual, residual.sobolev_norm(order)

    def correct(residual):
        solution = solve_moments(targets_of(residual, coupling, horizon),
                                 grid_size=cfg.moment_grid)
        return solution.control, _moment_diag(solution)

    (u, traj, _, res_norm, history, converged,
     iterations, diag) = chord_newton(
        ControlSignal.zeros(horizon, cfg.moment_grid), evaluate, correct,
        cfg.tolerance, cfg.max_iters, cfg.damping)

    final = traj.final
    terminal = {
        "l2_norm_error": abs(final.l2_norm() - 1.0),
        f"tangent_h{order:g}": res_norm,
        "full_h3": (final - psi_f).sobolev_norm(3.0),
        f"full_h{order:g}": (final - psi_f).sobolev_norm(order),
    }
    return SynthesisReport(
        converged=converged,
        iterations=iterations,
        residual_history=history,
        control=u,
        control_norm=_control_norm(u, cfg.variant),
        terminal_state=final,
        terminal_residuals=terminal,
        variant=cfg.variant,
        moment_diagnostics=diag,
    )


def canonical_target(coupling: CouplingMatrix, horizon: float, mode: int,
                     epsilon: float) -> SpectralState:
    """Unit-sphere target a distance ~epsilon from the evolved ground state.

    The tangent part epsilon * i B[0][mode] e^{-i lambda T} along the given
    mode makes the corresponding moment datum exactly epsilon.
    """
    basis = coupling.basis
    basis.check_mode(mode)
    j = mode - basis.index_origin
    lam = basis.eigenvalue(mode)
    amp = epsilon * 1j * coupling.ground_row[j] * np.exp(-1j * lam * horizon)
    tangent = SpectralState.unit_mode(basis, mode, amp)
    return TangentProjector(horizon, basis).lift(tangent)
