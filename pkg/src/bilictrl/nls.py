"""Cubic Schrodinger flow with Neumann ends, written around e^{-it}.

The physical state psi is factored as psi(t, x) = e^{-it} (1 + zeta(t, x)),
which turns the constant reference into the zero solution.  The linear part
of the zeta equation couples real and imaginary parts:

    i d/dt zeta = -zeta'' + 2 Re(zeta) + [g(zeta) - 2 Re(zeta)] - u mu (1 + zeta),
    g(z) = (|1 + z|^2 - 1)(1 + z),

and its group rotates each cosine mode k >= 1 in the (Re, Im) plane with
angular rate sqrt(lambda_k (lambda_k + 2)) while preserving the quadratic
form (lambda_k + 2) Re^2 + lambda_k Im^2.  Mode 0 is secular: its imaginary
part drifts linearly with slope -2 Re.

Propagation Strang-splits between this group and the remaining pointwise
nonlinearity plus control kick, evaluated on a twice-oversampled cosine
collocation grid so the cubic terms do not alias back onto retained modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSpec, Geometry, SpectralState
from .controls import ControlSignal, as_time_function
from .coupling import CouplingMatrix
from .errors import BasisMismatchError, ConfigError, ConvergenceError
from .moments import MomentProblem, solve_moments
from .quadrature import oscillatory_rule
from .schrodinger import PropagatorConfig
from .synthesis import (SynthesisConfig, SynthesisReport, Variant,
                        chord_newton, _moment_diag, guard_ground_row)

CONTROL_BUDGET = 0.5  # L^2 smallness required for the splitting to be trusted

NLSState = SpectralState  # coefficients of zeta on the Neumann basis


def _require_neumann(basis: BasisSpec) -> None:
    if basis.geometry is not Geometry.INTERVAL_NEUMANN:
        raise BasisMismatchError("this flow lives on the Neumann cosine basis")


def _group_rates(basis: BasisSpec):
    lam = basis.eigenvalues()
    beta = np.sqrt(lam * (lam + 2.0))
    ratio_a = np.zeros_like(lam)
    ratio_b = np.zeros_like(lam)
    ratio_a[1:] = np.sqrt(lam[1:] / (lam[1:] + 2.0))
    ratio_b[1:] = np.sqrt((lam[1:] + 2.0) / lam[1:])
    return beta, ratio_a, ratio_b


def nls_group_apply(state: NLSState, t: float) -> NLSState:
    """Apply the linearized group for time t, mode by mode."""
    _require_neumann(state.basis)
    beta, ratio_a, ratio_b = _group_rates(state.basis)
    a = state.coeffs.real.copy()
    b = state.coeffs.imag.copy()
    cb, sb = np.cos(beta * t), np.sin(beta * t)
    a_new = a * cb + ratio_a * b * sb
    b_new = -ratio_b * a * sb + b * cb
    a_new[0] = a[0]
    b_new[0] = b[0] - 2.0 * t * a[0]
    return SpectralState(state.basis, a_new + 1j * b_new)


@dataclass
class NLSTrajectory:
    basis: BasisSpec
    times: np.ndarray
    coeffs: np.ndarray            # zeta coefficients, (n_snapshots, N)
    norm_l2: np.ndarray           # physical norm of 1 + zeta
    norm_h2: np.ndarray           # H^2 norm of zeta

    @property
    def final(self) -> NLSState:
        return SpectralState(self.basis, self.coeffs[-1].copy())

    def to_csv(self, path, float_fmt: str = "%.17g") -> None:
        import csv
        header = ["t", "norm_l2", "norm_h2"]
        for k in self.basis.modes:
            header += [f"re_c{k}", f"im_c{k}"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, t in enumerate(self.times):
                row = [t, self.norm_l2[i], self.norm_h2[i]]
                for c in self.coeffs[i]:
                    row += [c.real, c.imag]
                writer.writerow([float_fmt % v for v in row])


def physical_norm(zeta: NLSState) -> float:
    """l^2 norm of the reconstructed wave function 1 + zeta."""
    c = zeta.coeffs.copy()
    c[0] += 1.0
    return float(np.linalg.norm(c))


def _collocation(basis: BasisSpec):
    n = basis.n_modes
    x = (np.arange(2 * n) + 0.5) / (2 * n)
    phi = basis.mode_matrix(x)
    return phi, 2 * n


def propagate_nls(u: ControlSignal, coupling: CouplingMatrix, horizon: float,
                  cfg: PropagatorConfig | None = None) -> NLSTrajectory:
    """Nonlinear zeta flow from zero data under the sampled control."""
    cfg = cfg or PropagatorConfig()
    basis = coupling.basis
    _require_neumann(basis)
    if u.l2_norm() > CONTROL_BUDGET:
        raise ConfigError(
            f"control norm {u.l2_norm():.3f} exceeds the smallness budget "
            f"{CONTROL_BUDGET}; the splitting contraction is not guaranteed"
        )
    steps = cfg.steps_for(horizon)
    dt = horizon / steps
    umid = u.values((np.arange(steps) + 0.5) * dt)

    beta, ratio_a, ratio_b = _group_rates(basis)
    cb, sb = np.cos(beta * dt / 2.0), np.sin(beta * dt / 2.0)
    phi, n_coll = _collocation(basis)
    B = coupling.entries
    one = np.zeros(basis.n_modes)
    one[0] = 1.0
    w2 = basis.sobolev_weights(2.0)

    def group_half(c):
        a, b = c.real, c.imag
        a_new = a * cb + ratio_a * b * sb
        b_new = -ratio_b * a * sb + b * cb
        a_new[0] = a[0]
        b_new[0] = b[0] - dt * a[0]
        return a_new + 1j * b_new

    def kick_field(c, um):
        z = c @ phi
        g = (np.abs(1.0 + z) ** 2 - 1.0) * (1.0 + z)
        gc = (phi @ g) / n_coll
        return -1j * (gc - (c + np.conj(c)) - um * (B @ (one + c)))

    snap = np.arange(0, steps + 1, max(1, cfg.store_every))
    if snap[-1] != steps:
        snap = np.append(snap, steps)
    out = np.empty((snap.size, basis.n_modes), dtype=complex)
    phys = np.empty(snap.size)
    h2 = np.empty(snap.size)

    c = np.zeros(basis.n_modes, dtype=complex)
    pos = 0
    for m in range(steps + 1):
        if pos < snap.size and m == snap[pos]:
            out[pos] = c
            phys[pos] = physical_norm(SpectralState(basis, c))
            h2[pos] = np.linalg.norm(w2 * c)
            if abs(phys[pos] - 1.0) > cfg.drift_abort:
                raise ConvergenceError(
                    f"physical norm drift {abs(phys[pos] - 1.0):.3e} at "
                    f"t={m * dt:.6g}; reduce dt"
                )
            pos += 1
        if m == steps:
            break
        c = group_half(c)
        k1 = kick_field(c, umid[m])
        k2 = kick_field(c + 0.5 * dt * k1, umid[m])
        c = c + dt * k2
        c = group_half(c)

    return NLSTrajectory(basis, snap * dt, out, phys, h2)


def propagate_nls_linearized(v, coupling: CouplingMatrix,
                             horizon: float) -> NLSState:
    """Terminal state of the linearization at the reference, by quadrature.

    Mode k collects the cosine/sine moments of v at rate
    sqrt(lambda_k (lambda_k + 2)); mode 0 collects the plain and
    (T - s)-weighted integrals with the secular factor -2.
    """
    basis = coupling.basis
    _require_neumann(basis)
    m = coupling.ground_row
    lam = basis.eigenvalues()
    beta, ratio_a, ratio_b = _group_rates(basis)
    vf = as_time_function(v)
    t, w = oscillatory_rule(horizon, float(beta[-1]))
    vals = np.asarray(vf(t), dtype=float)

    arg = np.outer(beta[1:], horizon - t)
    cos_m = np.cos(arg) @ (w * vals)
    sin_m = np.sin(arg) @ (w * vals)
    a = np.empty(basis.n_modes)
    b = np.empty(basis.n_modes)
    a[0] = m[0] * np.sum(w * vals)
    b[0] = -2.0 * m[0] * np.sum(w * (horizon - t) * vals)
    a[1:] = m[1:] * cos_m
    b[1:] = -ratio_b[1:] * m[1:] * sin_m
    return SpectralState(basis, 1j * (a + 1j * b))


def nls_linearized_targets(xi_f: NLSState, coupling: CouplingMatrix,
                           horizon: float) -> MomentProblem:
    """Moment problem steering the linearized flow to xi_f.

    Requires xi_f tangent (real part of the mean vanishes); the secular
    mode contributes both the zero-frequency datum and the linear moment
    T * d_0.
    """
    basis = coupling.basis
    _require_neumann(basis)
    guard_ground_row(coupling)
    m = coupling.ground_row
    c = xi_f.coeffs
    if abs(c[0].real) > 1e-10 * max(1.0, abs(c[0])):
        raise ValueError("target is not tangent: mean has a real part")
    lam = basis.eigenvalues()
    beta = np.sqrt(lam * (lam + 2.0))
    ratio_a = np.zeros_like(lam)
    ratio_a[1:] = np.sqrt(lam[1:] / (lam[1:] + 2.0))

    d = np.empty(basis.n_modes, dtype=complex)
    d[0] = c[0].imag / m[0]
    d[1:] = (np.exp(1j * beta[1:] * horizon)
             * (c[1:].imag - 1j * ratio_a[1:] * c[1:].real) / m[1:])
    return MomentProblem(horizon, beta, d, linear_moment=float(horizon * d[0].real))


def zeta_from_physical(psi_f: SpectralState, horizon: float) -> NLSState:
    """Coefficients of zeta(T) = e^{iT} psi_f - 1."""
    _require_neumann(psi_f.basis)
    c = np.exp(1j * horizon) * psi_f.coeffs
    c[0] -= 1.0
    return SpectralState(psi_f.basis, c)


def _project_mean(state: NLSState) -> NLSState:
    c = state.coeffs.copy()
    c[0] = 1j * c[0].imag
    return SpectralState(state.basis, c)


def synthesize_nls(psi_f: SpectralState, mu, horizon: float,
                   cfg: SynthesisConfig | None = None) -> SynthesisReport:
    """Chord Newton synthesis for the cubic flow around e^{-it}.

    psi_f holds the physical terminal coefficients on the cosine basis; it
    must be unit norm and close to the rotated constant in H^2.
    """
    from .coupling import coupling_matrix

    cfg = cfg or SynthesisConfig()
    basis = psi_f.basis
    _require_neumann(basis)
    if abs(psi_f.l2_norm() - 1.0) > 1e-9:
        raise ValueError("terminal state must lie on the unit sphere")
    coupling = mu if isinstance(mu, CouplingMatrix) else coupling_matrix(mu, basis)
    guard_ground_row(coupling)

    zeta_target = _project_mean(zeta_from_physical(psi_f, horizon))

    def evaluate(u):
        traj = propagate_nls(u, coupling, horizon, cfg.propagator)
        residual = zeta_target - _project_mean(traj.final)
        return traj, residual, residual.sobolev_norm(2.0)

    def correct(residual):
        solution = solve_moments(nls_linearized_targets(residual, coupling, horizon),
                                 grid_size=cfg.moment_grid)
        return solution.control, _moment_diag(solution)

    (u, traj, _, res_norm, history, converged,
     iterations, diag) = chord_newton(
        ControlSignal.zeros(horizon, cfg.moment_grid), evaluate, correct,
        cfg.tolerance, cfg.max_iters, cfg.damping)

    final = traj.final
    full = final - zeta_from_physical(psi_f, horizon)
    terminal = {
        "l2_norm_error": abs(physical_norm(final) - 1.0),
        "tangent_h2": res_norm,
        "full_h2": full.sobolev_norm(2.0),
    }
    return SynthesisReport(
        converged=converged,
        iterations=iterations,
        residual_history=history,
        control=u,
        control_norm=u.l2_norm(),
        terminal_state=final,
        terminal_residuals=terminal,
        variant=Variant.L2_CONTROL_H3_TARGET,
        moment_diagnostics=diag,
    )
