"""Constants of motion and a finite-difference Poisson bracket.

Observables are plain callables ``f(state) -> float`` so that any of the
integrals below, or user-built combinations, can be fed to
:func:`poisson_bracket` and :func:`jacobian_rank`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateSampleError, DomainError, SingularOriginError
from .model import ModelParams, PhaseState, eval_hamiltonian

Observable = Callable[[PhaseState], float]


def angular_momentum_matrix(state: PhaseState) -> np.ndarray:
    """J[i, j] = q_i p_j - q_j p_i."""
    q, p = state.q, state.p
    return np.outer(q, p) - np.outer(p, q)


def angular_casimirs(state: PhaseState, m: int) -> tuple[float, float]:
    """Return (C^(m), C_(m)), sums of J_ij^2 over the first / last m indices."""
    n = state.dim
    if not 2 <= m <= n:
        raise DomainError(f"m must satisfy 2 <= m <= {n}, got {m}")
    J2 = angular_momentum_matrix(state) ** 2
    upper = float(np.sum(np.triu(J2[:m, :m], 1)))
    lower = float(np.sum(np.triu(J2[n - m:, n - m:], 1)))
    return upper, lower


def total_angular_momentum_sq(state: PhaseState) -> float:
    q, p = state.q, state.p
    # Lagrange identity; avoids building J
    return float((q @ q) * (p @ p) - (q @ p) ** 2)


def runge_lenz(state: PhaseState, params: ModelParams) -> np.ndarray:
    """Deformed Laplace-Runge-Lenz vector.

    R_i = sum_j p_j (q_j p_i - q_i p_j) + (q_i/|q|) (eta H + k)
    """
    q, p = state.q, state.p
    r = state.radius
    if not r > 0:
        raise SingularOriginError("Runge-Lenz vector is undefined at the origin")
    h = eval_hamiltonian(state, params)
    angular = (p @ q) * p - (p @ p) * q
    return angular + q / r * (params.eta * h + params.k)


@dataclass(frozen=True)
class IntegralSet:
    energy: float
    casimirs_upper: np.ndarray  # C^(m), m = 2..N
    casimirs_lower: np.ndarray  # C_(m), m = 2..N
    runge_lenz: np.ndarray

    @property
    def L2(self) -> float:
        return float(self.casimirs_upper[-1])

    def as_dict(self) -> dict[str, float]:
        out = {"H": self.energy}
        for m, (cu, cl) in enumerate(zip(self.casimirs_upper, self.casimirs_lower), start=2):
            out[f"C^({m})"] = float(cu)
            out[f"C_({m})"] = float(cl)
        for i, ri in enumerate(self.runge_lenz, start=1):
            out[f"R_{i}"] = float(ri)
        return out


def integral_set(state: PhaseState, params: ModelParams) -> IntegralSet:
    pairs = [angular_casimirs(state, m) for m in range(2, state.dim + 1)]
    return IntegralSet(
        energy=eval_hamiltonian(state, params),
        casimirs_upper=np.array([u for u, _ in pairs]),
        casimirs_lower=np.array([l for _, l in pairs]),
        runge_lenz=runge_lenz(state, params),
    )


def runge_lenz_identity_residual(state: PhaseState, params: ModelParams) -> float:
    """Relative residual of R^2 = 2 L^2 H + (eta H + k)^2."""
    R = runge_lenz(state, params)
    h = eval_hamiltonian(state, params)
    L2 = total_angular_momentum_sq(state)
    lhs = float(R @ R)
    rhs = 2.0 * L2 * h + (params.eta * h + params.k) ** 2
    scale = max(abs(lhs), abs(2.0 * L2 * h), (params.eta * h + params.k) ** 2, 1e-300)
    return abs(lhs - rhs) / scale


# observable catalogue


def hamiltonian_obs(params: ModelParams) -> Observable:
    return lambda s: eval_hamiltonian(s, params)


def angular_obs(i: int, j: int) -> Observable:
    """J_ij with zero-based indices."""
    return lambda s: float(s.q[i] * s.p[j] - s.q[j] * s.p[i])


def casimir_upper_obs(m: int) -> Observable:
    return lambda s: angular_casimirs(s, m)[0]


def casimir_lower_obs(m: int) -> Observable:
    return lambda s: angular_casimirs(s, m)[1]


def runge_lenz_obs(i: int, params: ModelParams) -> Observable:
    return lambda s: float(runge_lenz(s, params)[i])


def _step(state: PhaseState, rel_step: float) -> float:
    return rel_step * max(1.0, float(np.linalg.norm(state.as_vector())))


def gradient(f: Observable, state: PhaseState, rel_step: float = 1e-4) -> np.ndarray:
    """Gradient of f in (q, p), central differences with one Richardson level.

    The step is ``rel_step * max(1, |(q, p)|)``; the result has O(h^4)
    truncation error.
    """
    y0 = state.as_vector()
    h = _step(state, rel_step)
    if np.linalg.norm(y0[: state.dim]) <= 2 * h:
        raise SingularOriginError("finite-difference stencil reaches the origin")
    grad = np.empty_like(y0)
    for a in range(y0.size):
        d = []
        for step in (h, h / 2):
            yp = y0.copy()
            ym = y0.copy()
            yp[a] += step
            ym[a] -= step
            d.append((f(PhaseState.from_vector(yp)) - f(PhaseState.from_vector(ym))) / (2 * step))
        grad[a] = (4 * d[1] - d[0]) / 3
    return grad


def poisson_bracket(f: Observable, g: Observable, state: PhaseState, rel_step: float = 1e-4) -> float:
    """{f, g} = sum_i df/dq_i dg/dp_i - df/dp_i dg/dq_i."""
    n = state.dim
    gf = gradient(f, state, rel_step)
    gg = gradient(g, state, rel_step)
    return float(gf[:n] @ gg[n:] - gf[n:] @ gg[:n])


def independence_observables(params: ModelParams, fixed_index: int = 0) -> list[Observable]:
    """H, C^(m), C_(m) (m = 2..N) and R_i for one fixed i."""
    n = params.dim
    obs = [hamiltonian_obs(params)]
    obs += [casimir_upper_obs(m) for m in range(2, n + 1)]
    obs += [casimir_lower_obs(m) for m in range(2, n + 1)]
    obs.append(runge_lenz_obs(fixed_index, params))
    return obs


def jacobian(observables: Sequence[Observable], state: PhaseState) -> np.ndarray:
    return np.array([gradient(f, state) for f in observables])


def numerical_rank(matrix: np.ndarray, rel_tol: float = 1e-8) -> int:
    sv = np.linalg.svd(matrix, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def functional_independence(samples: Sequence[PhaseState], params: ModelParams,
                            fixed_index: int = 0, rel_tol: float = 1e-8) -> int:
    """Maximum Jacobian rank of the integral set over ``samples``.

    Raises DegenerateSampleError (with ``.rank`` set) if no sample reaches
    the full count 2N - 1.
    """
    n = params.dim
    if not samples:
        raise DomainError("need at least one sample state")
    obs = independence_observables(params, fixed_index)
    rank = max(numerical_rank(jacobian(obs, s), rel_tol) for s in samples)
    if rank < 2 * n - 1:
        err = DegenerateSampleError(f"Jacobian rank {rank} < {2 * n - 1} on every sample")
        err.rank = rank
        raise err
    return rank


def random_states(rng: np.random.Generator, dim: int, count: int,
                  q_scale: float = 1.0, p_scale: float = 1.0, r_min: float = 0.2) -> list[PhaseState]:
    """Gaussian phase-space samples with |q| >= r_min."""
    out = []
    while len(out) < count:
        q = rng.normal(scale=q_scale, size=dim)
        if np.linalg.norm(q) < r_min:
            continue
        out.append(PhaseState(q, rng.normal(scale=p_scale, size=dim)))
    return out


# Poisson algebra


@dataclass(frozen=True)
class BracketRelation:
    """{f, g} = expected, all three as observables."""

    name: str
    f: Observable
    g: Observable
    expected: Observable


def _delta(a: int, b: int) -> float:
    return 1.0 if a == b else 0.0


def _zero(_s: PhaseState) -> float:
    return 0.0


def algebra_relations(params: ModelParams) -> list[BracketRelation]:
    """Every bracket of the symmetry algebra, zero-based indices.

    {J_ij, J_kl} = d_ik J_jl - d_jk J_il + d_jl J_ik - d_il J_jk
    {J_ij, R_k}  = d_ik R_j - d_jk R_i
    {R_i, R_j}   = -2 H J_ij
    {H, J_ij} = {H, R_i} = {H, C} = 0
    """
    n = params.dim
    H = hamiltonian_obs(params)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rel = []
    for a, (i, j) in enumerate(pairs):
        for k, l in pairs[a + 1:]:
            terms = [(c, x, y) for c, x, y in ((_delta(i, k), j, l), (-_delta(j, k), i, l),
                                               (_delta(j, l), i, k), (-_delta(i, l), j, k)) if c]

            def expected(s, terms=terms):
                return sum(c * angular_obs(x, y)(s) for c, x, y in terms)

            rel.append(BracketRelation(f"{{J{i}{j},J{k}{l}}}", angular_obs(i, j), angular_obs(k, l), expected))
    for i, j in pairs:
        for k in range(n):
            def expected(s, i=i, j=j, k=k):
                R = runge_lenz(s, params)
                return _delta(i, k) * R[j] - _delta(j, k) * R[i]

            rel.append(BracketRelation(f"{{J{i}{j},R{k}}}", angular_obs(i, j), runge_lenz_obs(k, params), expected))
        rel.append(BracketRelation(
            f"{{R{i},R{j}}}", runge_lenz_obs(i, params), runge_lenz_obs(j, params),
            lambda s, i=i, j=j: -2.0 * eval_hamiltonian(s, params) * angular_obs(i, j)(s)))
        rel.append(BracketRelation(f"{{H,J{i}{j}}}", H, angular_obs(i, j), _zero))
    for k in range(n):
        rel.append(BracketRelation(f"{{H,R{k}}}", H, runge_lenz_obs(k, params), _zero))
    for m in range(2, n + 1):
        rel.append(BracketRelation(f"{{H,C^({m})}}", H, casimir_upper_obs(m), _zero))
        rel.append(BracketRelation(f"{{H,C_({m})}}", H, casimir_lower_obs(m), _zero))
    return rel


def relation_residual(rel: BracketRelation, state: PhaseState) -> float:
    """|{f, g} - expected| / max(1, |expected|)."""
    e = rel.expected(state)
    return abs(poisson_bracket(rel.f, rel.g, state) - e) / max(1.0, abs(e))
