"""Closed-form bound spectrum and radial eigenfunctions.

With the effective principal number nu = n + l + (N - 1)/2 and the
energy-dependent coupling K = k + eta E, the radial equation is a hydrogen
problem with charge K.  Its quantisation condition

    E = -K^2 / (2 hbar^2 nu^2)

is quadratic in E; the admissible root is

    E = [-a - eta k + sqrt(a^2 + 2 a eta k)] / eta^2,   a = hbar^2 nu^2,

evaluated here through the cancellation-free conjugate form

    E = -k^2 / (a + eta k + sqrt(a^2 + 2 a eta k)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError
from .model import ModelParams


def effective_principal(n: int, l: int, dim: int) -> float:
    return n + l + (dim - 1) / 2.0


def _check_quantum_numbers(n: int, l: int) -> None:
    if int(n) != n or int(l) != l or n < 0 or l < 0:
        raise DomainError(f"quantum numbers must be integers >= 0, got n={n!r}, l={l!r}")


def kepler_energy(n: int, l: int, params: ModelParams) -> float:
    """Undeformed level -k^2 / (2 hbar^2 nu^2)."""
    _check_quantum_numbers(n, l)
    nu = effective_principal(n, l, params.dim)
    return -params.k ** 2 / (2.0 * params.hbar ** 2 * nu ** 2)


def energy(n: int, l: int, params: ModelParams) -> float:
    """Bound-state energy E(n, l); depends on n and l only through n + l."""
    _check_quantum_numbers(n, l)
    if params.k <= 0:
        raise DomainError("bound states require k > 0")
    nu = effective_principal(n, l, params.dim)
    a = params.hbar ** 2 * nu ** 2
    ek = params.eta * params.k
    return -params.k ** 2 / (a + ek + math.sqrt(a * a + 2.0 * a * ek))


def energy_direct(n: int, l: int, params: ModelParams) -> float:
    """The "+" root in its textbook form; loses digits as eta -> 0."""
    _check_quantum_numbers(n, l)
    if params.eta == 0:
        return kepler_energy(n, l, params)
    nu = effective_principal(n, l, params.dim)
    a = params.hbar ** 2 * nu ** 2
    ek = params.eta * params.k
    return (-a - ek + math.sqrt(a * a + 2.0 * a * ek)) / params.eta ** 2


def energy_minus_branch(n: int, l: int, params: ModelParams) -> float:
    """Second root of the quantisation quadratic (diagnostic only).

    It has K = k + eta E < 0 and diverges as eta -> 0, so it never
    corresponds to a bound level.
    """
    _check_quantum_numbers(n, l)
    if params.eta == 0:
        raise DomainError("the second root does not exist at eta = 0")
    nu = effective_principal(n, l, params.dim)
    a = params.hbar ** 2 * nu ** 2
    ek = params.eta * params.k
    return (-a - ek - math.sqrt(a * a + 2.0 * a * ek)) / params.eta ** 2


def coupling(E: float, params: ModelParams) -> float:
    """Energy-dependent coupling K = k + eta E."""
    return params.k + params.eta * E


def perturbative_energy(n: int, l: int, params: ModelParams) -> float:
    """First-order expansion E0 + eta k^3 / (2 hbar^4 nu^4)."""
    nu = effective_principal(n, l, params.dim)
    return kepler_energy(n, l, params) + params.eta * params.k ** 3 / (2.0 * params.hbar ** 4 * nu ** 4)


def first_order_slope(n: int, l: int, params: ModelParams) -> float:
    nu = effective_principal(n, l, params.dim)
    return params.k ** 3 / (2.0 * params.hbar ** 4 * nu ** 4)


def angular_eigenvalue(l: int, params: ModelParams) -> float:
    """Eigenvalue hbar^2 l (l + N - 2) of the total angular momentum."""
    if int(l) != l or l < 0:
        raise DomainError(f"l must be an integer >= 0, got {l!r}")
    return params.hbar ** 2 * l * (l + params.dim - 2)


def harmonic_multiplicity(dim: int, l: int) -> int:
    """Number of independent degree-l hyperspherical harmonics on S^{N-1}."""
    if l == 0:
        return 1
    if dim == 2:
        return 2
    return (2 * l + dim - 2) * math.comb(l + dim - 3, l) // (dim - 2)


def degeneracy(principal: int, params: ModelParams) -> int:
    """Number of states with n + l equal to ``principal``."""
    if int(principal) != principal or principal < 0:
        raise DomainError(f"principal number must be an integer >= 0, got {principal!r}")
    return sum(harmonic_multiplicity(params.dim, l) for l in range(principal + 1))


def laguerre(n: int, alpha: float, x):
    """Generalised Laguerre polynomial L_n^alpha(x) by the three-term recurrence.

    (k+1) L_{k+1} = (2k + 1 + alpha - x) L_k - (k + alpha) L_{k-1}
    """
    if int(n) != n or n < 0:
        raise DomainError(f"degree must be an integer >= 0, got {n!r}")
    if not alpha > -1:
        raise DomainError(f"alpha must be > -1, got {alpha!r}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for j in range(1, n):
        prev, cur = cur, ((2 * j + 1 + alpha - x) * cur - (j + alpha) * prev) / (j + 1)
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class QuantumLevel:
    n: int
    l: int
    energy: float
    coupling: float

    @property
    def principal(self) -> int:
        return self.n + self.l


def level(n: int, l: int, params: ModelParams) -> QuantumLevel:
    """Bound level (n, l); raises DomainError if K > 0 fails."""
    E = energy(n, l, params)
    K = coupling(E, params)
    if not (E < 0 and K > 0):
        raise DomainError(f"level ({n}, {l}) is not admitted: E={E}, K={K}")
    return QuantumLevel(n, l, E, K)


def _gauss_laguerre(order: int):
    return special.roots_laguerre(order)


@dataclass(frozen=True)
class RadialWavefunction:
    """psi(r) = C r^l exp(-K r/(hbar^2 nu)) L_n^{2l+N-2}(2 K r/(hbar^2 nu)).

    C is fixed so that the norm with measure (1 + eta/r) r^{N-1} dr is one.
    """

    level: QuantumLevel
    params: ModelParams
    normalization: float = field(default=1.0)

    @property
    def decay(self) -> float:
        nu = effective_principal(self.level.n, self.level.l, self.params.dim)
        return self.level.coupling / (self.params.hbar ** 2 * nu)

    @property
    def alpha(self) -> int:
        return 2 * self.level.l + self.params.dim - 2

    def unnormalized(self, r):
        r = np.asarray(r, dtype=float)
        c = self.decay
        return r ** self.level.l * np.exp(-c * r) * laguerre(self.level.n, self.alpha, 2 * c * r)

    def __call__(self, r):
        return self.normalization * self.unnormalized(r)

    def cutoff_radius(self, rel: float = 1e-18) -> float:
        """Radius beyond which psi^2 r^{N-1} stays below ``rel`` of its peak."""
        c = self.decay
        # envelope r^(2l + N - 1 + 2n) exp(-2 c r) peaks at p/(2c)
        power = 2 * self.level.l + self.params.dim - 1 + 2 * self.level.n
        peak = max(power / (2 * c), 1.0 / c)
        r = peak
        log_peak = power * math.log(peak) - 2 * c * peak
        while power * math.log(r) - 2 * c * r - log_peak > math.log(rel):
            r *= 1.25
        return r


def _norm_sq_exact(psi: RadialWavefunction) -> float:
    # integrand is polynomial x exp(-2 c r), so Gauss-Laguerre is exact
    n, l, dim = psi.level.n, psi.level.l, psi.params.dim
    c = psi.decay
    order = n + l + dim + 4
    x, w = _gauss_laguerre(order)
    r = x / (2 * c)
    lag = laguerre(n, psi.alpha, 2 * c * r)
    poly = r ** (2 * l + dim - 2) * (r + psi.params.eta) * lag ** 2
    return float(np.sum(w * poly) / (2 * c))


def eigenfunction(lvl: QuantumLevel, params: ModelParams) -> RadialWavefunction:
    if not (lvl.energy < 0 and lvl.coupling > 0):
        raise DomainError("eigenfunction requested for a non-admitted level")
    raw = RadialWavefunction(lvl, params, 1.0)
    return RadialWavefunction(lvl, params, 1.0 / math.sqrt(_norm_sq_exact(raw)))


def radial_eigenfunction(n: int, l: int, params: ModelParams) -> RadialWavefunction:
    return eigenfunction(level(n, l, params), params)


def inner_product(a: RadialWavefunction, b: RadialWavefunction, tol: float = 1e-13) -> float:
    """Weighted radial product int psi_a psi_b (1 + eta/r) r^{N-1} dr by adaptive quadrature."""
    if a.level.l != b.level.l or a.params != b.params:
        raise DomainError("inner products compare states with equal l and parameters")
    eta, dim = a.params.eta, a.params.dim
    r_cut = max(a.cutoff_radius(), b.cutoff_radius())

    def integrand(r):
        return a(r) * b(r) * (r + eta) * r ** (dim - 2)

    # split at a few scale lengths so QUADPACK sees every lobe
    scale = 1.0 / max(a.decay, b.decay)
    edges = [0.0] + [s for s in np.geomspace(scale / 4, r_cut, 12) if s < r_cut] + [r_cut]
    edges = sorted(set(edges))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(integrand, lo, hi, epsabs=tol, epsrel=tol, limit=200)
        if not math.isfinite(val) or err > 1e-9:
            raise ConvergenceError(f"quadrature on [{lo}, {hi}] did not converge (err={err})")
        total += val
    return total


def node_count(psi: RadialWavefunction, samples: int = 20000) -> int:
    r = np.linspace(0, psi.cutoff_radius(1e-12), samples)[1:]
    v = psi(r)
    s = np.sign(v[np.abs(v) > 1e-300])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def level_table(n_max: int, l_max: int, params: ModelParams) -> list[dict]:
    """Rows ordered l-major then n."""
    rows = []
    for l in range(l_max + 1):
        for n in range(n_max + 1):
            E = energy(n, l, params)
            rows.append({
                "n": n,
                "l": l,
                "N_principal": n + l,
                "E_formula": E,
                "K": coupling(E, params),
                "E_perturbative": perturbative_energy(n, l, params),
                "degeneracy": degeneracy(n + l, params),
            })
    return rows
