"""System parameters, the classical Hamiltonian and the curved-space geometry.

The configuration space is R^N with the conformally flat metric

    ds^2 = (1 + eta/|q|) dq^2

and the Hamiltonian is

    H = |q| p^2 / (2 (eta + |q|)) - k / (eta + |q|),

which reduces to the Kepler-Coulomb problem p^2/2 - k/|q| at eta = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularOriginError


@dataclass(frozen=True)
class ModelParams:
    """One instance of the deformed Kepler-Coulomb system.

    eta is the deformation length, k the coupling, hbar the (arbitrary-unit)
    Planck constant and dim the configuration-space dimension N.
    """

    eta: float = 0.0
    k: float = 1.0
    hbar: float = 1.0
    dim: int = 3

    def __post_init__(self):
        if not math.isfinite(self.eta) or self.eta < 0:
            raise DomainError(f"eta must be finite and >= 0, got {self.eta!r}")
        if not math.isfinite(self.k):
            raise DomainError(f"k must be finite, got {self.k!r}")
        if not math.isfinite(self.hbar) or self.hbar <= 0:
            raise DomainError(f"hbar must be > 0, got {self.hbar!r}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise DomainError(f"dim must be an integer >= 2, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    def replace(self, **changes) -> "ModelParams":
        values = {"eta": self.eta, "k": self.k, "hbar": self.hbar, "dim": self.dim}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class PhaseState:
    """Cartesian position and conjugate momentum."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise DomainError(f"q and p lengths differ: {q.size} vs {p.size}")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.q.size

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.q))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, y) -> "PhaseState":
        y = np.asarray(y, dtype=float)
        n = y.size // 2
        return cls(y[:n], y[n:])


@dataclass(frozen=True)
class HypersphericalPoint:
    """Radius and angles (theta_1..theta_{N-2} in [0, pi], theta_{N-1} in [0, 2 pi))."""

    r: float
    theta: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if not self.r > 0:
            raise DomainError(f"hyperspherical radius must be > 0, got {self.r!r}")
        if theta.size < 1:
            raise DomainError("at least one angle is required (N >= 2)")
        polar = theta[:-1]
        if np.any(polar < 0) or np.any(polar > np.pi):
            raise DomainError("polar angles must lie in [0, pi]")
        if not 0 <= theta[-1] < 2 * np.pi:
            raise DomainError("azimuthal angle must lie in [0, 2 pi)")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.theta.size + 1


def _check_radius(r: float, what: str = "r") -> float:
    r = float(r)
    if not r > 0:
        raise SingularOriginError(f"{what} must be > 0 (origin is singular), got {r!r}")
    return r


def kinetic_energy(state: PhaseState, params: ModelParams) -> float:
    r = _check_radius(state.radius, "|q|")
    return r * float(state.p @ state.p) / (2.0 * (params.eta + r))


def potential_energy(r: float, params: ModelParams) -> float:
    r = _check_radius(r)
    return -params.k / (params.eta + r)


def eval_hamiltonian(state: PhaseState, params: ModelParams) -> float:
    """Classical energy of ``state``."""
    r = _check_radius(state.radius, "|q|")
    p2 = float(state.p @ state.p)
    return (r * p2 / 2.0 - params.k) / (params.eta + r)


def metric_factor(r: float, params: ModelParams) -> float:
    """Squared conformal factor 1 + eta/r."""
    if r == 0 and params.eta == 0:
        return 1.0
    r = _check_radius(r)
    return 1.0 + params.eta / r


def conformal_factor(r: float, params: ModelParams) -> float:
    return math.sqrt(metric_factor(r, params))


def scalar_curvature(r: float, params: ModelParams) -> float:
    r = _check_radius(r)
    eta, n = params.eta, params.dim
    if eta == 0:
        return 0.0
    return eta * (n - 1) * (4 * (n - 3) * r + 3 * (n - 2) * eta) / (4 * r * (eta + r) ** 3)


def green_function(r: float, params: ModelParams) -> float:
    """Radial Green function U(r), antiderivative of 1/(r^2 f(r)).

    The integration constant is zero: U = -(2/eta) sqrt(1 + eta/r) for
    eta > 0 and U = -1/r in the flat case.
    """
    r = _check_radius(r)
    eta = params.eta
    if eta == 0:
        return -1.0 / r
    return -(2.0 / eta) * math.sqrt(1.0 + eta / r)


def green_function_integrand(r: float, params: ModelParams) -> float:
    r = _check_radius(r)
    return 1.0 / (r * r * math.sqrt(1.0 + params.eta / r))


def intrinsic_potentials(r: float, params: ModelParams, A: float = 1.0, B: float = 0.0,
                         C: float = 1.0, D: float = 0.0) -> tuple[float, float]:
    """Intrinsic Kepler-Coulomb and oscillator potentials at radius r.

    Returns (A sqrt(1 + eta/r) + B, C r/(r + eta) + D). Multiplicative
    constants coming from the Green function are absorbed into A and C.
    """
    r = _check_radius(r)
    u_kc = A * math.sqrt(1.0 + params.eta / r) + B
    u_o = C * r / (r + params.eta) + D
    return u_kc, u_o


def oscillator_constants(params: ModelParams) -> tuple[float, float]:
    """(C, D) making the intrinsic oscillator equal -k/(eta + r)."""
    if params.eta == 0:
        raise DomainError("the oscillator identification C = k/eta needs eta > 0")
    c = params.k / params.eta
    return c, -c


def from_hyperspherical(point: HypersphericalPoint) -> np.ndarray:
    theta = point.theta
    n = point.dim
    q = np.empty(n)
    sin_prod = 1.0
    for j in range(n - 1):
        q[j] = point.r * math.cos(theta[j]) * sin_prod
        sin_prod *= math.sin(theta[j])
    q[n - 1] = point.r * sin_prod
    return q


def to_hyperspherical(q) -> HypersphericalPoint:
    q = np.asarray(q, dtype=float).reshape(-1)
    n = q.size
    if n < 2:
        raise DomainError("need at least two coordinates")
    r = float(np.linalg.norm(q))
    if not r > 0:
        raise SingularOriginError("angles are undefined at the origin")
    theta = np.empty(n - 1)
    # tail[j] = sqrt(q_{j+1}^2 + ... + q_{N-1}^2) (zero-based), built from the end for accuracy
    tail = np.sqrt(np.cumsum((q[::-1] ** 2))[::-1])
    for j in range(n - 2):
        theta[j] = math.atan2(tail[j + 1], q[j])
    phi = math.atan2(q[n - 1], q[n - 2])
    if phi < 0:
        phi += 2 * math.pi
        if phi >= 2 * math.pi:
            phi = 0.0
    theta[n - 2] = phi
    return HypersphericalPoint(r, theta)
