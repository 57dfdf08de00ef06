"""Classical trajectories, invariant drift and the reduced radial problem."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import CollisionError, DomainError, SingularOriginError
from .integrals import integral_set
from .model import ModelParams, PhaseState, eval_hamiltonian


def equations_of_motion(state: PhaseState, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Hamilton's equations (dq/dt, dp/dt)."""
    dy = _rhs(0.0, state.as_vector(), params)
    n = state.dim
    return dy[:n], dy[n:]


def _rhs(t, y, params: ModelParams):
    n = y.size // 2
    q, p = y[:n], y[n:]
    r = math.sqrt(float(q @ q))
    if r == 0:
        raise SingularOriginError("equations of motion are singular at the origin")
    s = params.eta + r
    dq = (r / s) * p
    dHdr = (params.eta * float(p @ p) / 2 + params.k) / (s * s)
    dp = -(dHdr / r) * q
    return np.concatenate([dq, dp])


def _integral_vector(y: np.ndarray, params: ModelParams) -> tuple[list[str], np.ndarray]:
    d = integral_set(PhaseState.from_vector(y), params).as_dict()
    return list(d), np.array(list(d.values()))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 2N)
    params: ModelParams
    invariant_drift: dict[str, float] = field(default_factory=dict)
    dense: object = None  # callable t -> state vector(s)
    halted: bool = False
    halt_time: float | None = None

    @property
    def dim(self) -> int:
        return self.states.shape[1] // 2

    def state(self, i: int) -> PhaseState:
        return PhaseState.from_vector(self.states[i])

    def at(self, t) -> np.ndarray:
        if self.dense is None:
            raise DomainError("trajectory has no dense output")
        return self.dense(t)

    @property
    def max_drift(self) -> float:
        return max(self.invariant_drift.values()) if self.invariant_drift else 0.0


def _drift_table(states: np.ndarray, params: ModelParams) -> dict[str, float]:
    """Max deviation of each integral from its initial value, relative to its group scale.

    Scales: |H0| for the energy, L^2 for every Casimir and max(|R|, |eta H0 + k|)
    for each Runge-Lenz component.  Components that start at zero are thus
    measured against the size of their vector, and for near-circular orbits
    (|R| -> 0) against the size of the terms that cancel inside R.
    """
    names, first = _integral_vector(states[0], params)
    values = np.array([_integral_vector(y, params)[1] for y in states])
    dev = np.max(np.abs(values - first), axis=0)
    n = states.shape[1] // 2
    L2 = first[names.index(f"C^({n})")]
    R = np.array([first[names.index(f"R_{i}")] for i in range(1, n + 1)])
    Rnorm = float(np.linalg.norm(R))
    Rterm = abs(params.eta * first[names.index("H")] + params.k)
    out = {}
    for name, d, v in zip(names, dev, first):
        if name == "H":
            scale = abs(v)
        elif name.startswith("C"):
            scale = max(abs(v), abs(L2))
        else:
            scale = max(abs(v), Rnorm, Rterm)
        out[name] = float(d / scale) if scale > 0 else float(d)
    return out


def halt_radius(params: ModelParams) -> float:
    return 1e-8 * params.eta if params.eta > 0 else 1e-10


def integrate_orbit(state0: PhaseState, t_end: float, params: ModelParams, tol: float = 1e-12,
                    max_step: float = np.inf) -> Trajectory:
    """Integrate with DOP853 (embedded 8(5,3) Runge-Kutta with dense output).

    rtol = atol = tol.  Orbits reaching the halt radius near the origin stop
    there with ``halted`` set.
    """
    if not 1e-14 <= tol <= 1e-4:
        raise DomainError(f"tol must lie in [1e-14, 1e-4], got {tol}")
    if state0.radius <= 0:
        raise SingularOriginError("initial position is the origin")
    if state0.dim != params.dim:
        raise DomainError(f"state dimension {state0.dim} != params.dim {params.dim}")
    if not t_end > 0:
        raise DomainError("t_end must be > 0")
    r_halt = halt_radius(params)

    def collision(t, y, _params):
        n = y.size // 2
        return float(np.linalg.norm(y[:n])) - r_halt

    collision.terminal = True
    collision.direction = -1

    sol = integrate.solve_ivp(_rhs, (0.0, t_end), state0.as_vector(), method="DOP853",
                              rtol=tol, atol=tol, dense_output=True, events=collision,
                              args=(params,), max_step=max_step)
    halted = sol.status == 1
    if sol.status == -1:
        last = float(sol.t[-1])
        raise CollisionError(f"integration failed at t={last}: {sol.message}", last)
    states = sol.y.T.copy()
    traj = Trajectory(sol.t.copy(), states, params, dense=sol.sol, halted=halted,
                      halt_time=float(sol.t[-1]) if halted else None)
    traj.invariant_drift = _drift_table(states, params)
    return traj


# reduced radial problem


@dataclass(frozen=True)
class RadialState:
    r: float
    p_r: float
    L2: float


def radial_state(state: PhaseState) -> RadialState:
    r = state.radius
    if not r > 0:
        raise SingularOriginError("radial reduction undefined at the origin")
    p_r = float(state.q @ state.p) / r
    L2 = float((state.q @ state.q) * (state.p @ state.p) - (state.q @ state.p) ** 2)
    return RadialState(r, p_r, max(L2, 0.0))


def reduced_hamiltonian(rs: RadialState, params: ModelParams) -> float:
    """r/(2(eta + r)) (p_r^2 + L^2/r^2) - k/(eta + r)."""
    r = rs.r
    if not r > 0:
        raise SingularOriginError("r must be > 0")
    s = params.eta + r
    return r / (2 * s) * (rs.p_r ** 2 + rs.L2 / (r * r)) - params.k / s


@dataclass(frozen=True)
class EffectiveProblem:
    L2: float
    params: ModelParams
    energy: float | None = None

    def __post_init__(self):
        if not self.L2 >= 0:
            raise DomainError(f"L2 must be >= 0, got {self.L2!r}")


def effective_potential(r, prob: EffectiveProblem):
    """L^2/(2 r (eta + r)) - k/(eta + r); accepts scalars or arrays."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise SingularOriginError("effective potential needs r > 0")
    eta, k = prob.params.eta, prob.params.k
    out = prob.L2 / (2 * r_arr * (eta + r_arr)) - k / (eta + r_arr)
    return float(out) if out.ndim == 0 else out


def effective_potential_derivative(r: float, prob: EffectiveProblem) -> float:
    if not r > 0:
        raise SingularOriginError("r must be > 0")
    eta, k = prob.params.eta, prob.params.k
    s = eta + r
    return -prob.L2 * (eta + 2 * r) / (2 * r * r * s * s) + k / (s * s)


def q_transform(r: float, params: ModelParams) -> float:
    """Flattening coordinate Q(r) = sqrt(r(eta + r)) + eta log(sqrt(r) + sqrt(r + eta))."""
    if not r > 0:
        raise SingularOriginError("r must be > 0")
    eta = params.eta
    return math.sqrt(r * (eta + r)) + eta * math.log(math.sqrt(r) + math.sqrt(r + eta))


def p_transform(r: float, p_r: float, params: ModelParams) -> float:
    if not r > 0:
        raise SingularOriginError("r must be > 0")
    return math.sqrt(r / (params.eta + r)) * p_r


def turning_points(E: float, prob: EffectiveProblem) -> list[float]:
    """Positive roots of E r^2 + (E eta + k) r - L^2/2 = 0, sorted.

    An empty list means E is below the potential minimum (no motion).
    """
    eta, k = prob.params.eta, prob.params.k
    a, b, c = E, E * eta + k, -prob.L2 / 2
    if a == 0:
        roots = [] if b == 0 else [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            if disc > -1e-12 * b * b:
                disc = 0.0
            else:
                return []
        sq = math.sqrt(disc)
        # stable pair of roots
        qq = -0.5 * (b + math.copysign(sq, b)) if b != 0 else -0.5 * sq
        roots = []
        if qq != 0:
            roots += [qq / a, c / qq]
        else:
            roots += [0.0, 0.0]
    return sorted(r for r in roots if r > 0)


def circular_radius(prob: EffectiveProblem) -> float:
    """Unique positive critical point of the effective potential."""
    k, eta, L2 = prob.params.k, prob.params.eta, prob.L2
    if k <= 0:
        raise DomainError("circular orbits need k > 0")
    if not L2 > 0:
        raise DomainError("circular orbits need L2 > 0")
    return (L2 + math.sqrt(L2 * L2 + 2 * k * eta * L2)) / (2 * k)


def circular_state(prob: EffectiveProblem, dim: int | None = None) -> PhaseState:
    """Circular orbit in the (q_1, q_2) plane."""
    dim = dim or prob.params.dim
    rc = circular_radius(prob)
    q = np.zeros(dim)
    p = np.zeros(dim)
    q[0] = rc
    p[1] = math.sqrt(prob.L2) / rc
    return PhaseState(q, p)


def planar_state(r: float, p_r: float, L2: float, dim: int) -> PhaseState:
    """State in the (q_1, q_2) plane with given radius, radial momentum and L^2."""
    q = np.zeros(dim)
    p = np.zeros(dim)
    q[0] = r
    p[0] = p_r
    p[1] = math.sqrt(L2) / r
    return PhaseState(q, p)


def _radial_velocity(traj: Trajectory, t: float) -> float:
    y = traj.at(t)
    n = y.size // 2
    dq = _rhs(t, y, traj.params)[:n]
    return float(y[:n] @ dq)


def pericentre_times(traj: Trajectory) -> np.ndarray:
    """Times where dr/dt crosses zero upward, bisected on the dense output."""
    n = traj.dim
    vr = np.array([float(y[:n] @ _rhs(0.0, y, traj.params)[:n]) for y in traj.states])
    out = []
    for i in range(len(vr) - 1):
        if vr[i] < 0 <= vr[i + 1]:
            a, b = traj.times[i], traj.times[i + 1]
            if vr[i + 1] == 0:
                out.append(b)
                continue
            out.append(optimize.brentq(lambda t: _radial_velocity(traj, t), a, b, xtol=1e-14, rtol=1e-15))
    return np.array(out)


def radial_period(traj: Trajectory) -> float:
    """Mean spacing of pericentre passages; the azimuthal period for circular orbits.

    Circular orbits are recognised first: their dr/dt is pure roundoff and
    its sign changes carry no timing information.
    """
    s0 = traj.state(0)
    rs = radial_state(s0)
    if rs.L2 > 0 and traj.params.k > 0:
        rc = circular_radius(EffectiveProblem(rs.L2, traj.params))
        if abs(rs.r - rc) <= 1e-6 * rc and abs(rs.p_r) <= 1e-9 * math.sqrt(rs.L2) / rc:
            omega = math.sqrt(rs.L2) / (rc * (traj.params.eta + rc))
            return 2 * math.pi / omega
    peri = pericentre_times(traj)
    if peri.size >= 2:
        return float(np.mean(np.diff(peri)))
    raise DomainError("fewer than two pericentre passages; integrate longer")


def radial_period_formula(E: float, params: ModelParams) -> float:
    """Closed-form radial period 2 pi (eta + c) / sqrt(-2E), c = -(eta E + k)/(2E).

    Writing r = c - A cos(theta) between the turning points turns
    dt = dr / r_dot into (eta + r) d(theta) / sqrt(-2E); c is their midpoint.
    """
    if not E < 0:
        raise DomainError("the radial period is defined for E < 0")
    c = -(params.eta * E + params.k) / (2 * E)
    return 2 * math.pi * (params.eta + c) / math.sqrt(-2 * E)


def orbit_closure(traj: Trajectory) -> float:
    """Minimal phase-space distance to the initial state over (T_r/2, t_end]."""
    s0 = traj.state(0)
    E = eval_hamiltonian(s0, traj.params)
    rs = radial_state(s0)
    if not E < 0:
        raise DomainError("orbit closure is defined for bound orbits only (E < 0)")
    tp = turning_points(E, EffectiveProblem(rs.L2, traj.params))
    if rs.L2 > 0 and len(tp) < 1:
        raise DomainError("no classically allowed region")
    T = radial_period(traj)
    y0 = s0.as_vector()
    t_end = float(traj.times[-1])

    def dist(t):
        return float(np.linalg.norm(traj.at(t) - y0))

    best = math.inf
    m = 1
    while m * T <= t_end + 1e-12 * T:
        lo = max(m * T - T / 4, T / 2)
        hi = min(m * T + T / 4, t_end)
        res = optimize.minimize_scalar(dist, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, T)})
        best = min(best, float(res.fun), dist(min(m * T, t_end)))
        m += 1
    if not math.isfinite(best):
        raise DomainError("trajectory shorter than one radial period")
    return best


def potential_scan(r_values, etas, k: float, L2: float) -> np.ndarray:
    """Effective potential table, one column per eta."""
    r_values = np.asarray(r_values, dtype=float)
    cols = [effective_potential(r_values, EffectiveProblem(L2, ModelParams(eta=e, k=k)))
            for e in etas]
    return np.column_stack(cols)
