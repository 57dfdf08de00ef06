"""Grid realisations of the quantum operators on a Cartesian box in N = 2 or 3.

All derivatives use fourth-order central stencils with zero values outside
the box, so test fields must vanish near the box boundary.  The box itself
is placed away from the origin, where the Hamiltonian's coefficients are
singular.  Residuals of exact operator identities (commutators, the
Runge-Lenz square) then measure pure discretisation error and should fall
like h^4 under refinement.

Momentum is p = -i hbar grad, angular momentum J_ij = q_i p_j - q_j p_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SingularOriginError
from .model import ModelParams

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
STENCIL_HALF_WIDTH = 2


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with ``points`` cell-centred nodes per axis."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: int

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or len(self.lower) not in (2, 3):
            raise DomainError("boxes are 2- or 3-dimensional")
        widths = np.subtract(self.upper, self.lower)
        if np.any(widths <= 0):
            raise DomainError("box upper corner must exceed lower corner")
        if not np.allclose(widths, widths[0], rtol=1e-12):
            raise DomainError("box must be a cube so the mesh step is isotropic")
        if self.points < 16:
            raise DomainError("need at least 16 points per axis")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def h(self) -> float:
        return (self.upper[0] - self.lower[0]) / self.points

    def axes(self) -> list[np.ndarray]:
        h = self.h
        return [lo + (np.arange(self.points) + 0.5) * h for lo in self.lower]

    def refined(self, factor: int = 2) -> "Box":
        return Box(self.lower, self.upper, self.points * factor)

    def distance_to_origin(self) -> float:
        closest = np.clip(0.0, self.lower, self.upper)
        return float(np.linalg.norm(closest))


class GridField:
    """Complex samples on a :class:`Box` together with cached coordinates."""

    def __init__(self, values: np.ndarray, box: Box, _coords=None):
        self.values = np.asarray(values, dtype=complex)
        if self.values.shape != (box.points,) * box.dim:
            raise DomainError(f"values shape {self.values.shape} does not match the box")
        self.box = box
        if _coords is None:
            mesh = np.meshgrid(*box.axes(), indexing="ij")
            r = np.sqrt(sum(m * m for m in mesh))
            _coords = (mesh, r)
        self._coords = _coords

    @property
    def q(self) -> list[np.ndarray]:
        return self._coords[0]

    @property
    def r(self) -> np.ndarray:
        return self._coords[1]

    @property
    def h(self) -> float:
        return self.box.h

    @property
    def dim(self) -> int:
        return self.box.dim

    def like(self, values: np.ndarray) -> "GridField":
        return GridField(values, self.box, self._coords)

    def __add__(self, other: "GridField") -> "GridField":
        return self.like(self.values + other.values)

    def __sub__(self, other: "GridField") -> "GridField":
        return self.like(self.values - other.values)

    def scale(self, c) -> "GridField":
        return self.like(c * self.values)

    def multiply(self, coeff: np.ndarray) -> "GridField":
        return self.like(coeff * self.values)


def _stencil(values: np.ndarray, axis: int, weights: np.ndarray) -> np.ndarray:
    pad = [(0, 0)] * values.ndim
    pad[axis] = (STENCIL_HALF_WIDTH, STENCIL_HALF_WIDTH)
    v = np.pad(values, pad)
    n = values.shape[axis]
    out = np.zeros_like(values)
    for offset, w in enumerate(weights):
        if w == 0:
            continue
        sl = [slice(None)] * values.ndim
        sl[axis] = slice(offset, offset + n)
        out += w * v[tuple(sl)]
    return out


def derivative(field: GridField, axis: int) -> GridField:
    return field.like(_stencil(field.values, axis, _D1) / field.h)


def laplacian(field: GridField) -> GridField:
    out = sum(_stencil(field.values, a, _D2) for a in range(field.dim))
    return field.like(out / field.h ** 2)


def apply_momentum(field: GridField, j: int, params: ModelParams) -> GridField:
    return derivative(field, j).scale(-1j * params.hbar)


def check_field(field: GridField, tol: float = 1e-14, margin: int = 4) -> None:
    """Raise if the field is not negligible near the box edge or the origin."""
    v = np.abs(field.values)
    peak = v.max()
    if peak == 0:
        return
    edge = np.zeros_like(v, dtype=bool)
    for a in range(field.dim):
        sl = [slice(None)] * field.dim
        sl[a] = slice(0, margin)
        edge[tuple(sl)] = True
        sl[a] = slice(-margin, None)
        edge[tuple(sl)] = True
    if v[edge].max(initial=0) > tol * peak:
        raise DomainError("test field does not vanish near the box boundary")
    near = field.r < margin * field.h
    if np.any(near) and v[near].max() > tol * peak:
        raise SingularOriginError("test field does not vanish near the origin")


def apply_hamiltonian(field: GridField, params: ModelParams) -> GridField:
    """(|q| / (2 (eta + |q|))) (-hbar^2 lap - 2k/|q|) applied pointwise."""
    r = field.r
    if np.any(r == 0):
        raise SingularOriginError("grid contains the origin")
    kin = laplacian(field).values * (-params.hbar ** 2 / 2)
    return field.like((r * kin - params.k * field.values) / (params.eta + r))


def apply_angular(field: GridField, i: int, j: int, params: ModelParams) -> GridField:
    """J_ij = q_i p_j - q_j p_i with zero-based indices."""
    n = field.dim
    if not (0 <= i < n and 0 <= j < n):
        raise DomainError(f"indices must lie in [0, {n})")
    if i == j:
        return field.scale(0.0)
    q = field.q
    dj = derivative(field, j).values
    di = derivative(field, i).values
    return field.like(-1j * params.hbar * (q[i] * dj - q[j] * di))


def _casimir(field: GridField, indices: Sequence[int], params: ModelParams) -> GridField:
    out = field.scale(0.0)
    for a, i in enumerate(indices):
        for j in indices[a + 1:]:
            out = out + apply_angular(apply_angular(field, i, j, params), i, j, params)
    return out


def apply_casimir(field: GridField, m: int, params: ModelParams, lower: bool = False) -> GridField:
    """C^(m) (first m indices) or C_(m) (last m indices) as sums of J_ij^2."""
    n = field.dim
    if not 2 <= m <= n:
        raise DomainError(f"m must satisfy 2 <= m <= {n}")
    indices = list(range(n - m, n)) if lower else list(range(m))
    return _casimir(field, indices, params)


def apply_runge_lenz(field: GridField, i: int, params: ModelParams) -> GridField:
    """Symmetrised Runge-Lenz component plus (q_i/|q|)(eta H + k)."""
    n = field.dim
    if not 0 <= i < n:
        raise DomainError(f"index must lie in [0, {n})")
    out = np.zeros_like(field.values)
    for j in range(n):
        if j == i:
            continue
        # J_ji = q_j p_i - q_i p_j = -J_ij
        a = apply_angular(field, j, i, params)
        out += 0.5 * apply_momentum(a, j, params).values
        out += 0.5 * apply_angular(apply_momentum(field, j, params), j, i, params).values
    tail = apply_hamiltonian(field, params).values * params.eta + params.k * field.values
    out += field.q[i] / field.r * tail
    return field.like(out)


def interior_mask(box: Box, margin: int) -> np.ndarray:
    mask = np.ones((box.points,) * box.dim, dtype=bool)
    for a in range(box.dim):
        sl = [slice(None)] * box.dim
        sl[a] = slice(0, margin)
        mask[tuple(sl)] = False
        sl[a] = slice(-margin, None)
        mask[tuple(sl)] = False
    return mask


def weighted_inner(a: GridField, b: GridField, params: ModelParams, mask=None) -> complex:
    """sum conj(a) b (1 + eta/|q|) h^N, optionally restricted to ``mask``."""
    w = (1.0 + params.eta / a.r) * a.h ** a.dim
    prod = np.conj(a.values) * b.values * w
    if mask is not None:
        prod = prod[mask]
    return complex(prod.sum())


def weighted_norm(a: GridField, params: ModelParams, mask=None) -> float:
    return math.sqrt(max(weighted_inner(a, a, params, mask).real, 0.0))


Operator = Callable[[GridField], GridField]


def commutator_residual(op_a: Operator, op_b: Operator, field: GridField, params: ModelParams,
                        margin: int = 2 * 2 * STENCIL_HALF_WIDTH) -> float:
    """||(AB - BA) f||_w / ||f||_w over the doubly-interior region."""
    diff = op_a(op_b(field)) - op_b(op_a(field))
    mask = interior_mask(field.box, margin)
    return weighted_norm(diff, params, mask) / weighted_norm(field, params)


def runge_lenz_square_residual(field: GridField, params: ModelParams,
                               margin: int = 2 * 2 * STENCIL_HALF_WIDTH) -> float:
    """Relative residual of sum R_i^2 = 2 H (L^2 + hbar^2 (N-1)^2/4) + (eta H + k)^2."""
    n = field.dim
    lhs = field.scale(0.0)
    for i in range(n):
        lhs = lhs + apply_runge_lenz(apply_runge_lenz(field, i, params), i, params)
    L2f = apply_casimir(field, n, params)
    shifted = L2f + field.scale(params.hbar ** 2 * (n - 1) ** 2 / 4)
    rhs = apply_hamiltonian(shifted, params).scale(2.0)
    g = apply_hamiltonian(field, params).scale(params.eta) + field.scale(params.k)
    rhs = rhs + apply_hamiltonian(g, params).scale(params.eta) + g.scale(params.k)
    mask = interior_mask(field.box, margin)
    return weighted_norm(lhs - rhs, params, mask) / weighted_norm(field, params)


def adjointness_residual(op: Operator, phi: GridField, psi: GridField, params: ModelParams) -> float:
    """|<phi, A psi>_w - <A phi, psi>_w| / (||phi||_w ||A psi||_w)."""
    a_psi = op(psi)
    lhs = weighted_inner(phi, a_psi, params)
    rhs = weighted_inner(op(phi), psi, params)
    return abs(lhs - rhs) / (weighted_norm(phi, params) * weighted_norm(a_psi, params))


# test fields


@dataclass(frozen=True)
class BumpSpec:
    """Sum of off-origin Gaussian bumps times low-degree polynomials."""

    centers: tuple[tuple[float, ...], ...]
    width: float
    coefficients: tuple[tuple[complex, ...], ...]  # per bump: constant + linear terms
    wavevectors: tuple[tuple[float, ...], ...] | None = None

    def evaluate(self, box: Box) -> GridField:
        mesh = np.meshgrid(*box.axes(), indexing="ij")
        total = np.zeros(mesh[0].shape, dtype=complex)
        for b, (c, coeff) in enumerate(zip(self.centers, self.coefficients)):
            d2 = sum((m - ci) ** 2 for m, ci in zip(mesh, c))
            poly = coeff[0] + sum(a * (m - ci) / self.width
                                  for a, m, ci in zip(coeff[1:], mesh, c))
            g = poly * np.exp(-d2 / (2 * self.width ** 2))
            if self.wavevectors is not None:
                g = g * np.exp(1j * sum(kk * m for kk, m in zip(self.wavevectors[b], mesh)))
            total += g
        return GridField(total, box)


def random_bumps(rng: np.random.Generator, box: Box, count: int = 3, width: float = 0.6,
                 clearance: float = 8.6, complex_values: bool = True) -> BumpSpec:
    """Bumps whose centres sit ``clearance`` widths plus the check margin inside the box.

    The Gaussian tail exp(-x^2/2) at 8.6 widths is below 1e-16, leaving room
    for the linear polynomial factor.
    """
    pad = clearance * width + 4 * box.h
    lo = np.array(box.lower) + pad
    hi = np.array(box.upper) - pad
    if np.any(hi <= lo):
        raise DomainError("box too small for the requested bump clearance")
    centers, coeffs = [], []
    for _ in range(count):
        centers.append(tuple(rng.uniform(lo, hi)))
        c = rng.normal(size=box.dim + 1)
        if complex_values:
            c = c + 1j * rng.normal(size=box.dim + 1)
        coeffs.append(tuple(complex(x) for x in c))
    return BumpSpec(tuple(centers), width, tuple(coeffs))


def default_box(dim: int, points: int, half_width: float = 6.0, gap: float = 2.0) -> Box:
    """Cube on the diagonal whose nearest corner is ``gap`` away from the origin."""
    c = half_width + gap / math.sqrt(dim)
    lower = tuple(c - half_width for _ in range(dim))
    upper = tuple(c + half_width for _ in range(dim))
    return Box(lower, upper, points)


@dataclass
class ConvergenceStudy:
    name: str
    steps: list[float]
    residuals: list[float]

    @property
    def orders(self) -> list[float]:
        out = []
        for (h0, r0), (h1, r1) in zip(zip(self.steps, self.residuals),
                                      zip(self.steps[1:], self.residuals[1:])):
            out.append(math.log(r0 / r1) / math.log(h0 / h1) if r1 > 0 else math.inf)
        return out

    def as_rows(self) -> list[dict]:
        orders = [None] + self.orders
        return [{"check": self.name, "h": h, "residual": r, "observed_order": o}
                for h, r, o in zip(self.steps, self.residuals, orders)]


def convergence_study(name: str, residual: Callable[[GridField], float], bumps: BumpSpec,
                      box: Box, levels: int = 3) -> ConvergenceStudy:
    """Evaluate ``residual`` on ``levels`` successive halvings of the mesh."""
    steps, res = [], []
    for lev in range(levels):
        b = box.refined(2 ** lev)
        field = bumps.evaluate(b)
        check_field(field)
        steps.append(b.h)
        res.append(residual(field))
    return ConvergenceStudy(name, steps, res)


def theorem_checks(params: ModelParams, dim: int = 2, points: int | None = None, levels: int = 3,
                   seed: int = 0) -> list[ConvergenceStudy]:
    """Convergence studies for [H, C^(N)], [H, R_1] and the R^2 identity.

    In three dimensions [H, C_(2)] is added and the default base grid is
    32^3 on a wider box, which keeps the finest level at 128^3.
    """
    p = params.replace(dim=dim)
    if points is None:
        points = 256 if dim == 2 else 32
    box = default_box(dim, points, half_width=6.0 if dim == 2 else 9.0)
    bumps = random_bumps(np.random.default_rng(seed), box)
    H = lambda f: apply_hamiltonian(f, p)
    studies = [
        convergence_study(f"[H, C^({dim})]",
                          lambda f: commutator_residual(H, lambda g: apply_casimir(g, dim, p), f, p),
                          bumps, box, levels),
        convergence_study("[H, R_1]",
                          lambda f: commutator_residual(H, lambda g: apply_runge_lenz(g, 0, p), f, p),
                          bumps, box, levels),
        convergence_study("R^2 identity", lambda f: runge_lenz_square_residual(f, p), bumps, box, levels),
    ]
    if dim == 3:
        studies.insert(1, convergence_study(
            "[H, C_(2)]",
            lambda f: commutator_residual(H, lambda g: apply_casimir(g, 2, p, lower=True), f, p),
            bumps, box, levels))
    return studies
