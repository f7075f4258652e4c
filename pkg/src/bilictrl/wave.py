"""Nonlinear wave equation with Neumann ends in first-order form.

The state is the pair (w, w_t) expanded over the cosine basis; the free
group rotates each mode k >= 1 at rate k pi and drifts the zero mode
linearly in its velocity.  The forcing collects a pointwise nonlinearity
f(w, w_t), required to vanish to second order at the rest state (1, 0),
and the bilinear control term u(t) mu(x) (w + w_t).

The moment family of the linearization at rest has frequencies k pi with
constant gap pi, so the window must be longer than 2 for the family to be
a Riesz sequence; target assembly refuses shorter horizons.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import BasisSpec, Geometry, SpectralState
from .controls import ControlSignal, as_time_function
from .coupling import CouplingMatrix
from .errors import (BasisMismatchError, ConfigError, ConvergenceError,
                     GapConditionError)
from .moments import MomentProblem, solve_moments
from .quadrature import oscillatory_rule
from .schrodinger import PropagatorConfig
from .synthesis import (SynthesisConfig, SynthesisReport, Variant,
                        chord_newton, _moment_diag, guard_ground_row)

CONTROL_BUDGET = 0.5
MIN_HORIZON = 2.0


def _require_neumann(basis: BasisSpec) -> None:
    if basis.geometry is not Geometry.INTERVAL_NEUMANN:
        raise BasisMismatchError("the wave flow lives on the Neumann cosine basis")


@dataclass
class WaveState:
    """Real coefficient pair (w, w_t) on the cosine basis."""

    basis: BasisSpec
    w: np.ndarray = field(repr=False)
    wt: np.ndarray = field(repr=False)

    def __post_init__(self):
        _require_neumann(self.basis)
        w = np.asarray(self.w, dtype=float)
        wt = np.asarray(self.wt, dtype=float)
        n = self.basis.n_modes
        if w.shape != (n,) or wt.shape != (n,):
            raise ValueError(f"coefficient vectors must have length {n}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(wt))):
            raise ValueError("non-finite coefficient")
        self.w, self.wt = w, wt

    @classmethod
    def rest(cls, basis: BasisSpec) -> "WaveState":
        w = np.zeros(basis.n_modes)
        w[0] = 1.0
        return cls(basis, w, np.zeros(basis.n_modes))

    def deviation(self) -> "WaveState":
        d = self.w.copy()
        d[0] -= 1.0
        return WaveState(self.basis, d, self.wt.copy())

    def copy(self) -> "WaveState":
        return WaveState(self.basis, self.w.copy(), self.wt.copy())

    def energy(self) -> float:
        lam = self.basis.eigenvalues()
        return float(np.sum(lam * self.w**2) + np.sum(self.wt**2))

    def product_norm(self, order_w: float = 3.0, order_wt: float = 2.0) -> float:
        sw = self.basis.sobolev_weights(order_w)
        swt = self.basis.sobolev_weights(order_wt)
        return float(np.linalg.norm(sw * self.w) + np.linalg.norm(swt * self.wt))

    def __sub__(self, other: "WaveState") -> "WaveState":
        if other.basis != self.basis:
            raise BasisMismatchError("wave states on different bases")
        return WaveState(self.basis, self.w - other.w, self.wt - other.wt)


@dataclass
class NonlinearitySpec:
    """Pointwise forcing f(w, w_t), flat to second order at the rest state."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = ""

    def __post_init__(self):
        v0 = float(self.func(np.array([1.0]), np.array([0.0]))[0])
        h = 1e-5
        dw = (float(self.func(np.array([1.0 + h]), np.array([0.0]))[0])
              - float(self.func(np.array([1.0 - h]), np.array([0.0]))[0])) / (2 * h)
        dwt = (float(self.func(np.array([1.0]), np.array([h]))[0])
               - float(self.func(np.array([1.0]), np.array([-h]))[0])) / (2 * h)
        if abs(v0) > 1e-8 or np.hypot(dw, dwt) > 1e-8:
            raise ConfigError(
                f"nonlinearity must vanish to second order at (1, 0); "
                f"got f={v0:.2e}, |grad|={np.hypot(dw, dwt):.2e}"
            )

    def __call__(self, w, wt):
        return np.asarray(self.func(np.asarray(w), np.asarray(wt)), dtype=float)


_BUILTIN_F = {
    "zero": lambda: NonlinearitySpec(lambda w, wt: np.zeros_like(w), "zero"),
    "quadratic_displacement": lambda: NonlinearitySpec(
        lambda w, wt: (w - 1.0) ** 2, "quadratic_displacement"),
    "cubic_displacement": lambda: NonlinearitySpec(
        lambda w, wt: (w - 1.0) ** 3, "cubic_displacement"),
}


def builtin_nonlinearity(name: str) -> NonlinearitySpec:
    try:
        return _BUILTIN_F[name]()
    except KeyError:
        raise KeyError(f"unknown builtin nonlinearity {name!r}; "
                       f"available: {sorted(_BUILTIN_F)}") from None


def wave_group_apply(state: WaveState, t: float) -> WaveState:
    """Free evolution for time t: per-mode rotation, secular zero mode."""
    k = state.basis.modes.astype(float)
    rate = np.pi * k
    c, s = np.cos(rate * t), np.sin(rate * t)
    w = state.w * c
    wt = state.wt * c
    w[1:] += state.wt[1:] * s[1:] / rate[1:]
    wt[1:] -= rate[1:] * state.w[1:] * s[1:]
    w[0] = state.w[0] + state.wt[0] * t
    wt[0] = state.wt[0]
    return WaveState(state.basis, w, wt)


@dataclass
class WaveTrajectory:
    basis: BasisSpec
    times: np.ndarray
    w: np.ndarray                # (n_snapshots, N)
    wt: np.ndarray
    energy: np.ndarray

    @property
    def final(self) -> WaveState:
        return WaveState(self.basis, self.w[-1].copy(), self.wt[-1].copy())

    def to_csv(self, path, float_fmt: str = "%.17g") -> None:
        header = ["t", "energy"]
        for k in self.basis.modes:
            header += [f"w_c{k}", f"wt_c{k}"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, t in enumerate(self.times):
                row = [t, self.energy[i]]
                for a, b in zip(self.w[i], self.wt[i]):
                    row += [a, b]
                writer.writerow([float_fmt % v for v in row])


def propagate_wave(u: ControlSignal, coupling: CouplingMatrix,
                   f: NonlinearitySpec, horizon: float,
                   cfg: PropagatorConfig | None = None,
                   state0: WaveState | None = None) -> WaveTrajectory:
    """Strang split between the free group and the pointwise kick.

    The kick only accelerates: w is frozen while w_t picks up
    f(w, w_t) + u mu (w + w_t), integrated by explicit midpoint; the
    nonlinearity is evaluated on a twice-oversampled collocation grid and
    the control term exactly in mode space through the coupling matrix.
    """
    cfg = cfg or PropagatorConfig()
    basis = coupling.basis
    _require_neumann(basis)
    if u.l2_norm() > CONTROL_BUDGET:
        raise ConfigError(
            f"control norm {u.l2_norm():.3f} exceeds the smallness budget "
            f"{CONTROL_BUDGET}"
        )
    state = (state0 or WaveState.rest(basis)).copy()
    steps = cfg.steps_for(horizon)
    dt = horizon / steps
    umid = u.values((np.arange(steps) + 0.5) * dt)

    k = basis.modes.astype(float)
    rate = np.pi * k
    ch, sh = np.cos(rate * dt / 2.0), np.sin(rate * dt / 2.0)
    inv_rate = np.zeros_like(rate)
    inv_rate[1:] = 1.0 / rate[1:]
    n = basis.n_modes
    x = (np.arange(2 * n) + 0.5) / (2 * n)
    phi = basis.mode_matrix(x)
    B = coupling.entries

    def group_half(w, wt):
        w2 = w * ch + wt * sh * inv_rate
        wt2 = -rate * w * sh + wt * ch
        w2[0] = w[0] + 0.5 * dt * wt[0]
        wt2[0] = wt[0]
        return w2, wt2

    def accel(w, wt, um):
        fv = f(w @ phi, wt @ phi)
        return (phi @ fv) / (2 * n) + um * (B @ (w + wt))

    snap = np.arange(0, steps + 1, max(1, cfg.store_every))
    if snap[-1] != steps:
        snap = np.append(snap, steps)
    out_w = np.empty((snap.size, n))
    out_wt = np.empty((snap.size, n))
    energy = np.empty(snap.size)

    w, wt = state.w, state.wt
    pos = 0
    for m in range(steps + 1):
        if pos < snap.size and m == snap[pos]:
            out_w[pos], out_wt[pos] = w, wt
            lam = rate**2
            energy[pos] = float(np.sum(lam * w**2) + np.sum(wt**2))
            pos += 1
        if m == steps:
            break
        w, wt = group_half(w, wt)
        a1 = accel(w, wt, umid[m])
        a2 = accel(w, wt + 0.5 * dt * a1, umid[m])
        wt = wt + dt * a2
        w, wt = group_half(w, wt)
        if not np.all(np.isfinite(wt)):
            raise ConvergenceError("wave step diverged; reduce dt or the control")

    return WaveTrajectory(basis, snap * dt, out_w, out_wt, energy)


def propagate_wave_linearized(v, coupling: CouplingMatrix,
                              horizon: float) -> WaveState:
    """Response of the linearization at rest, by variation of constants.

    Mode k >= 1 collects m_k times the sine/cosine moments of v at rate
    k pi; the zero mode integrates v directly and with weight (T - s).
    """
    basis = coupling.basis
    _require_neumann(basis)
    m = coupling.ground_row
    rate = np.pi * basis.modes.astype(float)
    vf = as_time_function(v)
    t, wq = oscillatory_rule(horizon, float(rate[-1]))
    vals = np.asarray(vf(t), dtype=float)

    arg = np.outer(rate[1:], horizon - t)
    cos_m = np.cos(arg) @ (wq * vals)
    sin_m = np.sin(arg) @ (wq * vals)
    w = np.empty(basis.n_modes)
    wt = np.empty(basis.n_modes)
    w[0] = m[0] * np.sum(wq * (horizon - t) * vals)
    wt[0] = m[0] * np.sum(wq * vals)
    w[1:] = m[1:] * sin_m / rate[1:]
    wt[1:] = m[1:] * cos_m
    return WaveState(basis, w, wt)


def _targets_from_deviation(dev: WaveState, coupling: CouplingMatrix,
                            horizon: float) -> MomentProblem:
    if horizon <= MIN_HORIZON:
        raise GapConditionError(
            f"horizon {horizon} is too short: the k*pi frequency family needs "
            f"a window longer than {MIN_HORIZON}"
        )
    guard_ground_row(coupling)
    m = coupling.ground_row
    rate = np.pi * dev.basis.modes.astype(float)
    d = np.empty(dev.basis.n_modes, dtype=complex)
    d[0] = dev.wt[0] / m[0]
    d[1:] = ((dev.wt[1:] - 1j * rate[1:] * dev.w[1:])
             * np.exp(1j * rate[1:] * horizon) / m[1:])
    d_lin = (horizon * dev.wt[0] - dev.w[0]) / m[0]
    return MomentProblem(horizon, rate, d, linear_moment=float(d_lin))


def wave_linearized_targets(target: WaveState, coupling: CouplingMatrix,
                            horizon: float) -> MomentProblem:
    """Moment problem steering the rest state to the given absolute target."""
    return _targets_from_deviation(target.deviation(), coupling, horizon)


def synthesize_wave(target: WaveState, mu, f: NonlinearitySpec, horizon: float,
                    cfg: SynthesisConfig | None = None) -> SynthesisReport:
    """Chord Newton synthesis toward a terminal pair near rest.

    Residuals are measured in the product of the order-3 norm on w and the
    order-2 norm on w_t.  Horizons at or below the gap threshold are
    refused outright.
    """
    from .coupling import coupling_matrix

    cfg = cfg or SynthesisConfig()
    basis = target.basis
    if horizon <= MIN_HORIZON:
        raise GapConditionError(
            f"horizon {horizon} is too short for the k*pi family; need T > 2"
        )
    coupling = mu if isinstance(mu, CouplingMatrix) else coupling_matrix(mu, basis)
    guard_ground_row(coupling)

    def evaluate(u):
        traj = propagate_wave(u, coupling, f, horizon, cfg.propagator)
        residual = target - traj.final
        return traj, residual, residual.product_norm()

    def correct(residual):
        solution = solve_moments(
            _targets_from_deviation(residual, coupling, horizon),
            grid_size=cfg.moment_grid)
        return solution.control, _moment_diag(solution)

    (u, traj, _, res_norm, history, converged,
     iterations, diag) = chord_newton(
        ControlSignal.zeros(horizon, cfg.moment_grid), evaluate, correct,
        cfg.tolerance, cfg.max_iters, cfg.damping)

    final = traj.final
    terminal = {
        "product_residual": res_norm,
        "w_h3": WaveState(basis, (final.w - target.w),
                          np.zeros(basis.n_modes)).product_norm(3.0, 0.0),
        "wt_h2": WaveState(basis, np.zeros(basis.n_modes),
                           (final.wt - target.wt)).product_norm(0.0, 2.0),
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
