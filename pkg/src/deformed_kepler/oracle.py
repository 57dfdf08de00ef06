"""Finite-difference radial eigensolver used as an independent check of the spectrum.

Writing psi(r) = r^{-(N-1)/2} u(r) removes the first-derivative term from the
radial equation and leaves the symmetric generalised problem

    -(hbar^2/2) u'' + [hbar^2 (l(l+N-2) + (N-1)(N-3)/4) / (2 r^2) - k/r] u
        = E (1 + eta/r) u,

which is equivalent to the hydrogen-type form with charge K = k + eta E
(move E eta/r to the left).  Central differences on a uniform grid give a
symmetric tridiagonal A and a positive diagonal B; the pencil (A, B) is
reduced to B^{-1/2} A B^{-1/2}, still tridiagonal, and sliced with LAPACK's
bisection for the lowest eigenvalues only.

In even dimensions u behaves like r^{l + 1/2} at the origin, which spoils the
second-order accuracy of the three-point stencil for small l.  There the
``"flux"`` scheme is used instead: psi itself on a cell-centred grid, with
the radial Laplacian in conservation form

    -(hbar^2 / 2) r^{1-N} d/dr (r^{N-1} dpsi/dr),

cell volumes int r^{N-1} dr and a zero-flux inner face at r = 0.  Both
schemes give a symmetric tridiagonal A and positive diagonal B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, DomainError
from .model import ModelParams


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes r_min, r_min + h, ..., r_max.

    Vertex grids (the default) put Dirichlet conditions one step outside the
    node range, at r_min - h and r_max + h; the default ``r_min = h`` places
    the inner condition on the origin, where u vanishes like
    r^{l + (N-1)/2}.  Cell-centred grids (``staggered=True``) have
    r_min = h/2 so the lowest cell face is the origin.
    """

    r_max: float
    points: int
    r_min: float | None = None
    staggered: bool = False

    def __post_init__(self):
        if int(self.points) != self.points or self.points < 100:
            raise DomainError(f"grid needs at least 100 points, got {self.points!r}")
        if not self.r_max > 0:
            raise DomainError("r_max must be > 0")
        if self.r_min is None:
            if self.staggered:
                r_min = self.r_max / (2 * self.points - 1)
            else:
                r_min = self.r_max / self.points
            object.__setattr__(self, "r_min", r_min)
        if not 0 < self.r_min < self.r_max:
            raise DomainError(f"need 0 < r_min < r_max, got {self.r_min}, {self.r_max}")

    @property
    def spacing(self) -> float:
        return (self.r_max - self.r_min) / (self.points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.points)

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same boundary locations, spacing divided by ``factor``."""
        h = self.spacing / factor
        if self.staggered:
            inner_face = self.r_min - self.spacing / 2
            outer_face = self.r_max + self.spacing / 2
            points = round((outer_face - inner_face) / h)
            return RadialGrid(outer_face - h / 2, points, inner_face + h / 2, staggered=True)
        boundary = self.r_min - self.spacing
        r_min = boundary + h
        points = round((self.r_max - r_min) / h) + 1
        return RadialGrid(r_min + (points - 1) * h, points, r_min)


def default_scheme(dim: int) -> str:
    return "flux" if dim % 2 == 0 else "u"


def centrifugal_coefficient(l: int, dim: int) -> float:
    """l(l+N-2) + (N-1)(N-3)/4, the 1/r^2 strength after the u-substitution."""
    return l * (l + dim - 2) + (dim - 1) * (dim - 3) / 4.0


@dataclass(frozen=True)
class DiscretizedRadialProblem:
    """Pencil (A, B) on ``grid``.

    For scheme "u" the unknowns are u = r^{(N-1)/2} psi; for "flux" they are
    psi itself, with cell volumes folded into B.
    """

    grid: RadialGrid
    l: int
    params: ModelParams
    diag: np.ndarray  # A diagonal
    offdiag: np.ndarray  # A off-diagonal
    weight: np.ndarray  # B diagonal
    scheme: str = "u"

    def stiffness_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def radial_potential(r, l: int, params: ModelParams):
    r = np.asarray(r, dtype=float)
    hb2 = params.hbar ** 2
    return hb2 * centrifugal_coefficient(l, params.dim) / (2 * r * r) - params.k / r


def discretize(l: int, params: ModelParams, grid: RadialGrid,
               scheme: str | None = None) -> DiscretizedRadialProblem:
    """Assemble (A, B) for angular momentum l.

    ``scheme`` is "u" (three-point stencil on u) or "flux" (conservative form
    on psi, needs a staggered grid); by default "u" for odd N, "flux" for even N.
    """
    if int(l) != l or l < 0:
        raise DomainError(f"l must be an integer >= 0, got {l!r}")
    scheme = scheme or default_scheme(params.dim)
    r = grid.nodes
    h = grid.spacing
    hb2 = params.hbar ** 2
    if scheme == "u":
        kin = hb2 / (2 * h * h)
        diag = 2 * kin + radial_potential(r, l, params)
        off = np.full(r.size - 1, -kin)
        weight = 1.0 + params.eta / r
    elif scheme == "flux":
        if not grid.staggered:
            raise DomainError("the flux scheme needs a staggered (cell-centred) grid")
        n = params.dim
        face_hi = (r + h / 2) ** (n - 1)
        face_lo = np.maximum(r - h / 2, 0.0) ** (n - 1)
        vol = ((r + h / 2) ** n - np.maximum(r - h / 2, 0.0) ** n) / (n * h)
        pot = hb2 * l * (l + n - 2) / (2 * r * r) - params.k / r
        diag = hb2 / (2 * h * h) * (face_hi + face_lo) + vol * pot
        off = -hb2 / (2 * h * h) * face_hi[:-1]
        weight = vol * (1.0 + params.eta / r)
    else:
        raise DomainError(f"unknown scheme {scheme!r}")
    return DiscretizedRadialProblem(grid, int(l), params, diag, off, weight, scheme)


def lowest_eigenpairs(prob: DiscretizedRadialProblem, count: int):
    """The ``count`` smallest generalised eigenvalues with B-orthonormal vectors.

    Returns (energies, vectors) where vectors[:, j] holds the scheme's
    unknowns on the grid nodes, normalised so that h * sum(B v^2) = 1.
    """
    if count < 1 or count >= prob.grid.points // 4:
        raise DomainError(f"count must satisfy 1 <= count << points, got {count}")
    s = 1.0 / np.sqrt(prob.weight)
    d = prob.diag * s * s
    e = prob.offdiag * s[:-1] * s[1:]
    try:
        w, v = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1),
                                       lapack_driver="stebz")
    except (linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}") from exc
    if w.size != count or not np.all(np.isfinite(w)):
        raise ConvergenceError(f"expected {count} eigenvalues, got {w.size}")
    u = v * s[:, None] / math.sqrt(prob.grid.spacing)
    # deterministic sign: positive near the origin
    for j in range(u.shape[1]):
        lead = u[np.argmax(np.abs(u[:, j]) > 1e-8 * np.abs(u[:, j]).max()), j]
        if lead < 0:
            u[:, j] = -u[:, j]
    return w, u


def b_gram(prob: DiscretizedRadialProblem, vectors: np.ndarray) -> np.ndarray:
    return prob.grid.spacing * (vectors.T * prob.weight) @ vectors


def apply_operator(u: np.ndarray, E: float, l: int, params: ModelParams, grid: RadialGrid) -> np.ndarray:
    """(A - E B) u at interior nodes, with u given on all nodes."""
    r = grid.nodes
    h = grid.spacing
    u = np.asarray(u, dtype=float)
    lap = (u[2:] - 2 * u[1:-1] + u[:-2]) / (h * h)
    ri = r[1:-1]
    return (-params.hbar ** 2 / 2 * lap + radial_potential(ri, l, params) * u[1:-1]
            - E * (1 + params.eta / ri) * u[1:-1])


def residual_vector(psi_samples, E: float, l: int, params: ModelParams, grid: RadialGrid) -> np.ndarray:
    r = grid.nodes
    u = np.asarray(psi_samples, dtype=float) * r ** ((params.dim - 1) / 2)
    return apply_operator(u, E, l, params, grid)


def _weighted_norm(values: np.ndarray, r: np.ndarray, eta: float, h: float) -> float:
    return math.sqrt(h * float(np.sum(values ** 2 * (1 + eta / r))))


def residual_norm(psi_samples, E: float, l: int, params: ModelParams, grid: RadialGrid) -> float:
    """Weighted norm of (op - E) psi over interior nodes relative to the norm of psi.

    Both norms are taken in the u = r^{(N-1)/2} psi representation, where the
    radial measure r^{N-1} dr becomes dr.
    """
    r = grid.nodes
    u = np.asarray(psi_samples, dtype=float) * r ** ((params.dim - 1) / 2)
    res = apply_operator(u, E, l, params, grid)
    ri = r[1:-1]
    # divide by the weight so the residual lives in the same space as u
    res = res / (1 + params.eta / ri)
    h = grid.spacing
    return _weighted_norm(res, ri, params.eta, h) / _weighted_norm(u, r, params.eta, h)


def extrapolated_residual_norm(psi, E: float, l: int, params: ModelParams, grid: RadialGrid) -> float:
    """Residual after Richardson elimination of the h^2 term.

    ``psi`` is a callable. Residual vectors on ``grid`` and on its 2x
    refinement are combined at the shared nodes as (4 res_fine - res_coarse)/3.
    """
    fine = grid.refined(2)
    rc, rf = grid.nodes, fine.nodes
    wc = 1 + params.eta / rc[1:-1]
    res_c = residual_vector(psi(rc), E, l, params, grid) / wc
    res_f_all = residual_vector(psi(rf), E, l, params, fine)
    # coarse node i coincides with fine node 2i + 1, i.e. fine-interior index 2i
    shared = res_f_all[2 * np.arange(1, rc.size - 1)]
    res_f = shared / wc
    res = (4 * res_f - res_c) / 3
    u = psi(rc) * rc ** ((params.dim - 1) / 2)
    h = grid.spacing
    return _weighted_norm(res, rc[1:-1], params.eta, h) / _weighted_norm(u, rc, params.eta, h)


def default_grid(n: int, l: int, params: ModelParams, points: int = 6000,
                 extent: float = 8.0, scheme: str | None = None) -> RadialGrid:
    """Grid sized to ``extent`` times the outer turning point of level index n.

    The extent is enlarged when needed so the exponential tail beyond the
    turning point has decayed by at least exp(-45) in psi^2.

    The turning point comes from a coarse pre-solve on the same
    discretisation, so sizing does not consult the closed-form spectrum.
    """
    if params.k <= 0:
        raise DomainError("bound states require k > 0")
    scheme = scheme or default_scheme(params.dim)
    staggered = scheme == "flux"
    nu = n + l + (params.dim - 1) / 2
    hb2 = params.hbar ** 2
    # generous first guess: hydrogen extent, inflated by the deformation
    r_guess = 8 * (2 * hb2 * nu * nu / params.k + params.eta) * (1 + params.eta * params.k / hb2)
    for _ in range(8):
        coarse = RadialGrid(r_guess, max(2000, 40 * (n + 1)), staggered=staggered)
        E = lowest_eigenpairs(discretize(l, params, coarse, scheme), n + 1)[0][n]
        if E < 0:
            break
        r_guess *= 2
    else:
        raise ConvergenceError(f"no bound level with index {n} found for l={l}")
    r_turn = outer_turning_point(E, l, params)
    # psi^2 decays like exp(-2 kappa r) beyond the turning point; keep 45 e-folds
    kappa = math.sqrt(-2.0 * E) / params.hbar
    r_max = max(extent * r_turn, r_turn + 45.0 / (2.0 * kappa))
    return RadialGrid(r_max, points, staggered=staggered)


def outer_turning_point(E: float, l: int, params: ModelParams) -> float:
    """Largest root of E r^2 + (k + eta E) r - hbar^2 c_l / 2 = 0 for E < 0.

    c_l is the centrifugal coefficient of the u-form (the Langer-free
    reduced potential); it only sets the grid extent.
    """
    if not E < 0:
        raise DomainError("turning points need E < 0")
    a, b = E, params.k + params.eta * E
    c = -params.hbar ** 2 * centrifugal_coefficient(l, params.dim) / 2
    disc = b * b - 4 * a * c
    if disc < 0:
        raise DomainError("energy below the potential minimum")
    return (-b - math.sqrt(disc)) / (2 * a)


@dataclass(frozen=True)
class OracleResult:
    n: int
    l: int
    energy: float
    grid: RadialGrid
    energy_refined: float | None = None

    @property
    def extrapolated(self) -> float | None:
        if self.energy_refined is None:
            return None
        return (4 * self.energy_refined - self.energy) / 3


def oracle_energy(n: int, l: int, params: ModelParams, points: int = 6000,
                  grid: RadialGrid | None = None, refine: bool = False,
                  scheme: str | None = None) -> OracleResult:
    """Generalised eigenvalue with index n in the l sector."""
    scheme = scheme or default_scheme(params.dim)
    grid = grid or default_grid(n, l, params, points, scheme=scheme)
    w, _ = lowest_eigenpairs(discretize(l, params, grid, scheme), n + 1)
    refined = None
    if refine:
        w2, _ = lowest_eigenpairs(discretize(l, params, grid.refined(2), scheme), n + 1)
        refined = float(w2[n])
    return OracleResult(n, l, float(w[n]), grid, refined)


def observed_order(err_coarse: float, err_fine: float, factor: float = 2.0) -> float:
    if err_fine == 0:
        return math.inf
    return math.log(abs(err_coarse) / abs(err_fine)) / math.log(factor)


def count_bound_states(l: int, params: ModelParams, grid: RadialGrid, limit: int = 400,
                       scheme: str | None = None) -> int:
    """Number of negative generalised eigenvalues (at most ``limit``)."""
    prob = discretize(l, params, grid, scheme)
    count = min(limit, grid.points // 4 - 1)
    w, _ = lowest_eigenpairs(prob, count)
    return int(np.sum(w < 0))
