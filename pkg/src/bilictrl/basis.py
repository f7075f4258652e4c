"""Closed-form eigenbases, spectral states and weighted Sobolev norms.

Three geometries are supported, each with explicit eigenpairs of the
(negative) Laplacian:

* interval with Dirichlet ends:  lambda_k = (k pi)^2,  phi_k = sqrt(2) sin(k pi x),  k >= 1
* interval with Neumann ends:    lambda_0 = 0, phi_0 = 1,
                                 lambda_k = (k pi)^2,  phi_k = sqrt(2) cos(k pi x),  k >= 1
* radial functions on the unit 3-ball with a Dirichlet boundary:
                                 lambda_k = (k pi)^2,  phi_k = sin(k pi r)/(r sqrt(2 pi)),  k >= 1

The radial inner product carries the volume weight 4 pi r^2 dr, which makes
the family orthonormal exactly as in the interval cases.  The H^s norm
weights mode k by k^s; in the Neumann case the zero mode is weighted by
max(k, 1)^s so that the norm stays equivalent to the usual one.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BasisMismatchError, QuadratureError

SQRT2 = np.sqrt(2.0)


class Geometry(str, Enum):
    INTERVAL_DIRICHLET = "interval_dirichlet"
    INTERVAL_NEUMANN = "interval_neumann"
    BALL3D_RADIAL = "ball3d_radial"


@dataclass(frozen=True)
class BasisSpec:
    """A truncated eigenbasis: geometry plus number of retained modes."""

    geometry: Geometry
    n_modes: int

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")

    @property
    def index_origin(self) -> int:
        return 0 if self.geometry is Geometry.INTERVAL_NEUMANN else 1

    @property
    def modes(self) -> np.ndarray:
        """Physical mode indices, starting at the index origin."""
        o = self.index_origin
        return np.arange(o, o + self.n_modes)

    def check_mode(self, k: int) -> None:
        o = self.index_origin
        if not (o <= k < o + self.n_modes):
            raise IndexError(f"mode {k} outside range [{o}, {o + self.n_modes - 1}]")

    def eigenvalue(self, k: int) -> float:
        self.check_mode(k)
        return (k * np.pi) ** 2

    def eigenvalues(self) -> np.ndarray:
        return (self.modes * np.pi) ** 2

    def eval_mode(self, k: int, x) -> np.ndarray:
        """Pointwise value of the k-th eigenfunction (limit value at r=0)."""
        self.check_mode(k)
        x = np.asarray(x, dtype=float)
        if self.geometry is Geometry.INTERVAL_DIRICHLET:
            return SQRT2 * np.sin(k * np.pi * x)
        if self.geometry is Geometry.INTERVAL_NEUMANN:
            if k == 0:
                return np.ones_like(x)
            return SQRT2 * np.cos(k * np.pi * x)
        # sin(k pi r) / r = k pi sinc(k r), regular through r = 0
        return k * np.pi * np.sinc(k * x) / np.sqrt(2.0 * np.pi)

    def mode_matrix(self, x) -> np.ndarray:
        """Matrix phi_k(x_j), shape (n_modes, len(x))."""
        x = np.asarray(x, dtype=float)
        return np.vstack([self.eval_mode(k, x) for k in self.modes])

    def volume_weight(self, x) -> np.ndarray:
        """Measure density against dx: 1 on intervals, 4 pi r^2 on the ball."""
        x = np.asarray(x, dtype=float)
        if self.geometry is Geometry.BALL3D_RADIAL:
            return 4.0 * np.pi * x**2
        return np.ones_like(x)

    def k_star(self) -> np.ndarray:
        """Sobolev index weights: k, with the Neumann zero mode counted as 1."""
        return np.maximum(self.modes, 1).astype(float)

    def sobolev_weights(self, s: float) -> np.ndarray:
        return self.k_star() ** float(s)


def eigenpair(basis: BasisSpec, k: int):
    """Eigenvalue and a closed-form evaluator for mode k."""
    lam = basis.eigenvalue(k)
    return lam, lambda x: basis.eval_mode(k, x)


@dataclass
class SpectralState:
    """Complex coefficient vector against a basis; entry j is <psi, phi_{modes[j]}>."""

    basis: BasisSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.basis.n_modes,):
            raise ValueError(
                f"expected {self.basis.n_modes} coefficients, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c.view(float))):
            raise ValueError("non-finite coefficient")
        self.coeffs = c

    @classmethod
    def zero(cls, basis: BasisSpec) -> "SpectralState":
        return cls(basis, np.zeros(basis.n_modes, dtype=complex))

    @classmethod
    def unit_mode(cls, basis: BasisSpec, k: int, amplitude=1.0) -> "SpectralState":
        basis.check_mode(k)
        c = np.zeros(basis.n_modes, dtype=complex)
        c[k - basis.index_origin] = amplitude
        return cls(basis, c)

    def coeff(self, k: int) -> complex:
        self.basis.check_mode(k)
        return self.coeffs[k - self.basis.index_origin]

    def copy(self) -> "SpectralState":
        return SpectralState(self.basis, self.coeffs.copy())

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def sobolev_norm(self, s: float) -> float:
        return float(np.linalg.norm(self.basis.sobolev_weights(s) * self.coeffs))

    def tail_fraction(self) -> float:
        n = self.l2_norm()
        return abs(self.coeffs[-1]) / n if n > 0 else 0.0

    def evaluate(self, x) -> np.ndarray:
        """Pointwise synthesis sum_k c_k phi_k(x)."""
        return self.coeffs @ self.basis.mode_matrix(x)

    def _check_same_basis(self, other: "SpectralState") -> None:
        if self.basis != other.basis:
            raise BasisMismatchError(f"{self.basis} vs {other.basis}")

    def inner(self, other: "SpectralState") -> complex:
        """L^2 product, conjugate linear in the second slot."""
        self._check_same_basis(other)
        return complex(np.sum(self.coeffs * np.conj(other.coeffs)))

    def __add__(self, other: "SpectralState") -> "SpectralState":
        self._check_same_basis(other)
        return SpectralState(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralState") -> "SpectralState":
        self._check_same_basis(other)
        return SpectralState(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralState":
        return SpectralState(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__


def inner_product(f: SpectralState, g: SpectralState) -> complex:
    return f.inner(g)


def sobolev_norm(state: SpectralState, s: float) -> float:
    return state.sobolev_norm(s)


@functools.lru_cache(maxsize=64)
def _panel_rule(panels: int, nodes_per_panel: int = 10):
    """Composite Gauss-Legendre nodes and weights on (0, 1)."""
    x0, w0 = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1] - edges[0])
    x = (mid + half * x0[None, :]).ravel()
    w = np.tile(half * w0, panels)
    return x, w


def _project_once(f, basis: BasisSpec, panels: int) -> np.ndarray:
    x, w = _panel_rule(panels)
    fx = np.asarray(f(x), dtype=complex)
    return basis.mode_matrix(x) @ (w * basis.volume_weight(x) * fx)


def project_function(f, basis: BasisSpec, tol: float = 1e-12,
                     initial_panels: int | None = None,
                     max_doublings: int = 6) -> SpectralState:
    """Expand a pointwise function over the basis by adaptive quadrature.

    Panels are doubled until two successive coefficient vectors agree to
    ``tol`` in max norm; eigenfunctions are smooth and oscillatory, so the
    panel rule converges spectrally once the oscillation is resolved.
    """
    panels = initial_panels or max(16, basis.n_modes)
    prev = _project_once(f, basis, panels)
    for _ in range(max_doublings):
        panels *= 2
        cur = _project_once(f, basis, panels)
        if np.max(np.abs(cur - prev)) < tol:
            return SpectralState(basis, cur)
        prev = cur
    raise QuadratureError(
        f"projection did not converge to {tol} within {panels} panels"
    )
