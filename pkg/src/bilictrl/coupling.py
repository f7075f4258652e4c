"""Coupling matrices for a multiplicative potential and their lower bounds.

The control enters the dynamics through the matrix B[j][k] = <mu phi_j, phi_k>.
Control synthesis divides by the ground-row entries B[0][:], so it needs them
bounded away from zero; ``check_hypothesis`` measures the decay-weighted
ground-row magnitudes over a finite mode range and reports the smallest one.
The appropriate weight is k^3 for the sine and radial bases and max(1, k)^2
for the cosine basis, matching the generic decay rate of the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import BasisSpec, Geometry, _panel_rule
from .errors import QuadratureError


@dataclass
class PotentialSpec:
    """Pointwise real potential with optional endpoint slopes mu'(0), mu'(1)."""

    func: Callable[[np.ndarray], np.ndarray]
    endpoint_derivatives: tuple[float, float] | None = None
    name: str = ""

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def endpoint_slopes(self) -> tuple[float, float]:
        """Supplied slopes, or one-sided 4th-order finite differences."""
        if self.endpoint_derivatives is not None:
            return self.endpoint_derivatives
        h = 1e-4
        stencil = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
        left = float(stencil @ self(np.arange(5) * h))
        right = float(-stencil @ self(1.0 - np.arange(5) * h))
        return left, right


_BUILTINS = {
    "x_squared": lambda: PotentialSpec(lambda x: x**2, (0.0, 2.0), "x_squared"),
    "sin_pi_x": lambda: PotentialSpec(
        lambda x: np.sin(np.pi * x), (np.pi, -np.pi), "sin_pi_x"
    ),
    "one": lambda: PotentialSpec(lambda x: np.ones_like(x), (0.0, 0.0), "one"),
}


def builtin_potential(name: str) -> PotentialSpec:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin potential {name!r}; "
                       f"available: {sorted(_BUILTINS)}") from None


@dataclass
class CouplingMatrix:
    basis: BasisSpec
    entries: np.ndarray  # real symmetric, (N, N)

    @property
    def ground_row(self) -> np.ndarray:
        """Couplings of the lowest mode to every retained mode."""
        return self.entries[0]


def _coupling_once(mu, basis: BasisSpec, panels: int) -> np.ndarray:
    x, w = _panel_rule(panels)
    phi = basis.mode_matrix(x)
    density = w * basis.volume_weight(x) * mu(x)
    return (phi * density) @ phi.T


def coupling_matrix(mu: PotentialSpec, basis: BasisSpec, tol: float = 1e-12,
                    max_doublings: int = 6) -> CouplingMatrix:
    """Assemble B[j][k] = <mu phi_j, phi_k> by panel-doubling quadrature."""
    panels = max(16, 2 * basis.n_modes)
    prev = _coupling_once(mu, basis, panels)
    for _ in range(max_doublings):
        panels *= 2
        cur = _coupling_once(mu, basis, panels)
        if np.max(np.abs(cur - prev)) < tol:
            sym = 0.5 * (cur + cur.T)
            return CouplingMatrix(basis, sym)
        prev = cur
    raise QuadratureError(
        f"coupling quadrature did not converge to {tol} within {panels} panels"
    )


def hypothesis_weight(basis: BasisSpec, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if basis.geometry is Geometry.INTERVAL_NEUMANN:
        return np.maximum(k, 1.0) ** 2
    return k**3


@dataclass
class HypothesisReport:
    """Finite verification of the coupling lower bound, not a proof of it."""

    geometry: Geometry
    potential: str
    max_mode: int
    modes: np.ndarray
    values: np.ndarray          # w_k = weight(k) * |B[0][k]|
    c_min: float
    argmin_mode: int
    threshold: float
    passed: bool
    asymptote_estimate: float | None = None

    def to_json_dict(self) -> dict:
        d = {
            "geometry": self.geometry.value,
            "potential": self.potential,
            "max_mode": int(self.max_mode),
            "modes": [int(k) for k in self.modes],
            "values": [float(v) for v in self.values],
            "c_min": float(self.c_min),
            "argmin_mode": int(self.argmin_mode),
            "threshold": float(self.threshold),
            "passed": bool(self.passed),
        }
        if self.asymptote_estimate is not None:
            d["asymptote_estimate"] = float(self.asymptote_estimate)
        return d


def check_hypothesis(mu: PotentialSpec, basis: BasisSpec, max_mode: int,
                     threshold: float = 0.0) -> HypothesisReport:
    """Weighted ground-row magnitudes w_k for all modes up to ``max_mode``.

    A failing report (c_min below threshold) is a valid result, not an error.
    For the sine basis the large-k plateau 4|(-1)^(K+1) mu'(1) - mu'(0)|/pi^2
    is reported as a diagnostic when endpoint slopes are available.
    """
    origin = basis.index_origin
    needed = max_mode - origin + 1
    work = basis if basis.n_modes >= needed else BasisSpec(basis.geometry, needed)
    row = coupling_matrix(mu, work).ground_row[:needed]
    modes = work.modes[:needed]
    values = hypothesis_weight(work, modes) * np.abs(row)
    imin = int(np.argmin(values))
    asymptote = None
    if basis.geometry in (Geometry.INTERVAL_DIRICHLET, Geometry.BALL3D_RADIAL):
        d0, d1 = mu.endpoint_slopes()
        asymptote = 4.0 * abs((-1.0) ** (max_mode + 1) * d1 - d0) / np.pi**2
    return HypothesisReport(
        geometry=basis.geometry,
        potential=mu.name,
        max_mode=max_mode,
        modes=modes,
        values=values,
        c_min=float(values[imin]),
        argmin_mode=int(modes[imin]),
        threshold=threshold,
        passed=bool(values[imin] >= threshold),
        asymptote_estimate=asymptote,
    )
