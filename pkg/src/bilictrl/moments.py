"""Minimal-norm real solutions of trigonometric moment problems.

Given 0 = w_0 < w_1 < ... < w_K, a horizon T and complex targets d_k with
d_0 real, find a real v on (0, T) with

    int_0^T v(t) exp(i w_k t) dt = d_k        for all k,

optionally together with the linear constraint int_0^T t v(t) dt = d~.
The frequency list is extended symmetrically (w_{-k} = -w_k, d_{-k} =
conj(d_k)) and v is sought in the span of the exponential family, where the
constraints reduce to a Hermitian Gram system.  For separated frequencies
and a long enough window the family is a Riesz basis of its span, so the
Gram matrix is well conditioned and its extreme eigenvalues are empirical
frame bounds; both are reported with every solution.

With ``derivative_form`` the expansion solves the constraints for the
derivative of the control; the control itself is recovered by exact
antidifferentiation and vanishes at both endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .controls import ControlSignal
from .errors import AccuracyError, IllPosedError
from .quadrature import oscillatory_rule

_IMAG_TOL = 1e-12


@dataclass
class MomentProblem:
    horizon: float
    frequencies: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    linear_moment: float | None = None
    derivative_form: bool = False

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        d = np.asarray(self.targets, dtype=complex)
        if w.ndim != 1 or w.shape != d.shape:
            raise ValueError("frequencies and targets must be 1-d of equal length")
        if abs(w[0]) > 0:
            raise ValueError("the zero frequency must be first")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if abs(d[0].imag) > _IMAG_TOL:
            raise ValueError(f"target at the zero frequency must be real, "
                             f"got imaginary part {d[0].imag:.3e}")
        d[0] = d[0].real
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        self.frequencies = w
        self.targets = d
        if self.linear_moment is not None:
            self.linear_moment = float(self.linear_moment)


def extended_frequencies(frequencies: np.ndarray) -> np.ndarray:
    w = np.asarray(frequencies, dtype=float)
    return np.concatenate([-w[:0:-1], w])


def _exp_moment(delta: np.ndarray, horizon: float) -> np.ndarray:
    """int_0^T exp(i delta t) dt, elementwise and removable at delta = 0."""
    delta = np.asarray(delta, dtype=float)
    safe = np.where(delta == 0.0, 1.0, delta)
    out = (np.exp(1j * safe * horizon) - 1.0) / (1j * safe)
    return np.where(delta == 0.0, horizon + 0j, out)


def _t_exp_moment(delta: np.ndarray, horizon: float) -> np.ndarray:
    """int_0^T t exp(i delta t) dt."""
    delta = np.asarray(delta, dtype=float)
    safe = np.where(delta == 0.0, 1.0, delta)
    e = np.exp(1j * safe * horizon)
    out = horizon * e / (1j * safe) + (e - 1.0) / safe**2
    return np.where(delta == 0.0, horizon**2 / 2.0 + 0j, out)


def gram_matrix(frequencies: np.ndarray, horizon: float) -> np.ndarray:
    """Hermitian Gram matrix of the symmetrically extended exponentials."""
    w = np.asarray(frequencies, dtype=float)
    if np.unique(w).size != w.size:
        raise ValueError("duplicate frequencies")
    omega = extended_frequencies(w)
    G = _exp_moment(omega[:, None] - omega[None, :], horizon)
    return 0.5 * (G + G.conj().T)


def ingham_bounds_empirical(frequencies: np.ndarray, horizon: float):
    """Extreme Gram eigenvalues: empirical frame bounds of the finite family."""
    ev = scipy.linalg.eigvalsh(gram_matrix(frequencies, horizon))
    return float(ev[0]), float(ev[-1])


@dataclass
class MomentSolution:
    problem: MomentProblem
    control: ControlSignal
    coefficients: np.ndarray          # over the extended family
    linear_coefficient: float | None  # multiple of t adjoined for d~
    residuals: np.ndarray             # per constraint, complex
    linear_residual: complex | None
    gram_condition: float
    ingham_bounds: tuple[float, float]
    control_norm: float

    def evaluate_expansion(self, t) -> np.ndarray:
        """The solved expansion (the control, or its derivative in
        derivative form), evaluated exactly."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        omega = extended_frequencies(self.problem.frequencies)
        vals = np.exp(-1j * np.outer(t, omega)) @ self.coefficients
        if self.linear_coefficient is not None:
            vals = vals + self.linear_coefficient * t
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.max(np.abs(vals.imag)) > _IMAG_TOL * scale:
            raise AccuracyError("reconstructed control is not real")
        return vals.real

    def evaluate(self, t) -> np.ndarray:
        """The control itself, exactly evaluated (dense output)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not self.problem.derivative_form:
            return self.evaluate_expansion(t)
        omega = extended_frequencies(self.problem.frequencies)
        safe = np.where(omega == 0.0, 1.0, omega)
        anti = (1.0 - np.exp(-1j * np.outer(t, safe))) / (1j * safe)
        anti[:, omega == 0.0] = t[:, None]
        vals = anti @ self.coefficients
        if self.linear_coefficient is not None:
            vals = vals + 0.5 * self.linear_coefficient * t**2
        return vals.real

    def to_json_dict(self) -> dict:
        p = self.problem
        d = {
            "horizon": float(p.horizon),
            "frequencies": [float(w) for w in p.frequencies],
            "targets_re": [float(x) for x in p.targets.real],
            "targets_im": [float(x) for x in p.targets.imag],
            "derivative_form": bool(p.derivative_form),
            "residuals_re": [float(x) for x in self.residuals.real],
            "residuals_im": [float(x) for x in self.residuals.imag],
            "gram_condition": float(self.gram_condition),
            "ingham_lower": float(self.ingham_bounds[0]),
            "ingham_upper": float(self.ingham_bounds[1]),
            "evaluation_map_bound": float(np.sqrt(max(self.ingham_bounds[1], 0.0))),
            "control_norm_l2": float(self.control_norm),
            "control_samples": [float(x) for x in self.control.samples],
        }
        if p.linear_moment is not None:
            d["linear_moment"] = float(p.linear_moment)
            d["linear_residual_re"] = float(np.real(self.linear_residual))
            d["linear_residual_im"] = float(np.imag(self.linear_residual))
        return d


def _solve_hermitian(mat: np.ndarray, rhs: np.ndarray, condition_cap: float,
                     eig_floor: float = 1e-12):
    """Eigendecomposition solve with small-eigenvalue truncation."""
    evals, vecs = scipy.linalg.eigh(mat)
    top = evals[-1]
    if top <= 0:
        raise IllPosedError("Gram matrix is numerically singular")
    condition = top / max(evals[0], np.finfo(float).tiny)
    if condition > condition_cap:
        raise IllPosedError(
            f"Gram condition {condition:.3e} above cap {condition_cap:.1e}; "
            "increase the horizon or drop high frequencies"
        )
    keep = evals > eig_floor * top
    proj = vecs[:, keep].conj().T @ rhs
    sol = vecs[:, keep] @ (proj / evals[keep])
    return sol, condition


def solve_moments(problem: MomentProblem, grid_size: int = 4096,
                  condition_cap: float = 1e14,
                  residual_tol: float = 1e-8) -> MomentSolution:
    """Solve the moment problem; the result carries its own residual audit.

    The returned control samples are exact evaluations of the trigonometric
    expansion on the output grid, and every constraint is re-integrated by
    an independent oscillation-resolving quadrature before returning.
    """
    T = problem.horizon
    freqs = problem.frequencies
    omega = extended_frequencies(freqs)
    d_ext = np.concatenate([np.conj(problem.targets[:0:-1]), problem.targets])

    G = gram_matrix(freqs, T)
    bounds = ingham_bounds_empirical(freqs, T)
    if problem.linear_moment is None:
        sol, condition = _solve_hermitian(G, d_ext, condition_cap)
        coeffs, lin_coeff = sol, None
    else:
        g = _t_exp_moment(omega, T)
        n = omega.size
        M = np.zeros((n + 1, n + 1), dtype=complex)
        M[:n, :n] = G
        M[:n, n] = g
        M[n, :n] = np.conj(g)
        M[n, n] = T**3 / 3.0
        rhs = np.concatenate([d_ext, [problem.linear_moment]])
        sol, condition = _solve_hermitian(M, rhs, condition_cap)
        coeffs, lin_coeff = sol[:n], sol[n]
        if abs(lin_coeff.imag) > _IMAG_TOL * max(1.0, abs(lin_coeff)):
            raise AccuracyError("linear coefficient acquired an imaginary part")
        lin_coeff = float(lin_coeff.real)

    # conjugate symmetry c_{-k} = conj(c_k) makes the expansion real; the
    # solve preserves it up to rounding, enforce it exactly
    coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1]))

    solution = MomentSolution(
        problem=problem,
        control=ControlSignal(T, np.zeros(grid_size + 1)),
        coefficients=coeffs,
        linear_coefficient=lin_coeff,
        residuals=np.zeros(freqs.size, dtype=complex),
        linear_residual=None,
        gram_condition=condition,
        ingham_bounds=bounds,
        control_norm=0.0,
    )

    # independent residual audit on the solved expansion
    t, w = oscillatory_rule(T, 2.0 * float(freqs[-1]),
                            min_panels=max(32, (4 * grid_size) // 10))
    vals = solution.evaluate_expansion(t)
    quad = np.exp(1j * np.outer(freqs, t)) @ (w * vals)
    residuals = quad - problem.targets
    lin_res = None
    if problem.linear_moment is not None:
        lin_res = complex(np.sum(w * t * vals) - problem.linear_moment)
    worst = np.max(np.abs(residuals))
    if lin_res is not None:
        worst = max(worst, abs(lin_res))
    if worst > residual_tol:
        raise AccuracyError(
            f"moment residual {worst:.3e} above {residual_tol:.1e} after "
            "truncated-spectrum solve; the problem is too stiff for this horizon"
        )

    times = np.linspace(0.0, T, grid_size + 1)
    samples = solution.evaluate(times)
    control = ControlSignal(T, samples)
    solution.control = control
    solution.residuals = residuals
    solution.linear_residual = lin_res
    solution.control_norm = control.l2_norm()
    return solution
