"""Command-line entry point.

    deformed-kepler {spectrum,effpot,simulate,verify,oracle} [--config run.json]
                    [--out DIR] [--seed S] [--quiet]

A run is described by one JSON document holding the model parameters
(eta, k, hbar, dim), an optional seed and one block per subcommand, e.g.

    {"eta": 0.1, "k": 1.0, "dim": 3, "spectrum": {"n_max": 2, "l_max": 2}}

Exit codes: 0 success, 1 verification or numerical failure, 2 bad
configuration.  Outputs contain no timestamps, so equal inputs give
byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import dynamics, integrals, operators, oracle, spectrum
from .errors import (ConvergenceError, DegenerateSampleError, DeformedKeplerError,
                     DomainError)
from .model import ModelParams, PhaseState, eval_hamiltonian

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    params: ModelParams
    seed: int = 0
    blocks: dict[str, dict] = field(default_factory=dict)

    def block(self, name: str) -> dict:
        b = self.blocks.get(name, {})
        if not isinstance(b, dict):
            raise ConfigError(f"'{name}' block must be a JSON object")
        return b


_PARAM_KEYS = ("eta", "k", "hbar", "dim")
_COMMANDS = ("spectrum", "effpot", "simulate", "verify", "oracle")


def parse_config(doc: dict, seed: int | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - set(_PARAM_KEYS) - set(_COMMANDS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        params = ModelParams(**{k: doc[k] for k in _PARAM_KEYS if k in doc})
    except (TypeError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc
    s = doc.get("seed", 0) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2 ** 64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {s!r}")
    return RunConfig(params, s, {c: doc[c] for c in _COMMANDS if c in doc})


def _get(block: dict, key: str, default, kind: type | tuple = (int, float),
         check: Callable[[Any], bool] | None = None, what: str = ""):
    v = block.get(key, default)
    if isinstance(v, bool) and kind is not bool or not isinstance(v, kind):
        raise ConfigError(f"{key} has the wrong type: {v!r}")
    if isinstance(v, float) and not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    if check is not None and not check(v):
        raise ConfigError(f"{key} {what}, got {v!r}")
    return v


# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text + "\n")


class Reporter:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def info(self, msg: str) -> None:
        if not self.quiet:
            print(msg)

    @staticmethod
    def error(msg: str) -> None:
        print(f"error: {msg}", file=sys.stderr)


# commands


def cmd_spectrum(cfg: RunConfig, out: Path, rep: Reporter) -> int:
    b = cfg.block("spectrum")
    n_max = _get(b, "n_max", 3, int, lambda v: v >= 0, "must be >= 0")
    l_max = _get(b, "l_max", 2, int, lambda v: v >= 0, "must be >= 0")
    if cfg.params.k <= 0:
        raise ConfigError("bound spectrum requires k > 0")
    rows = spectrum.level_table(n_max, l_max, cfg.params)
    header = ["n", "l", "N_principal", "E_formula", "K", "E_perturbative", "degeneracy"]
    write_csv(out / "spectrum.csv", header, ([r[h] for h in header] for r in rows))
    rep.info(f"spectrum: {len(rows)} levels -> {out / 'spectrum.csv'}")
    return EXIT_OK


def _eta_label(e: float) -> str:
    return f"U_eff(eta={e:g})"


def cmd_effpot(cfg: RunConfig, out: Path, rep: Reporter) -> int:
    b = cfg.block("effpot")
    k = float(_get(b, "k", 8.0))
    L2 = float(_get(b, "L2", 2.0, check=lambda v: v >= 0, what="must be >= 0"))
    r_min = float(_get(b, "r_min", 0.05, check=lambda v: v > 0, what="must be > 0"))
    r_max = float(_get(b, "r_max", 2.0, check=lambda v: v > r_min, what="must exceed r_min"))
    points = _get(b, "points", 391, int, lambda v: v >= 2, "must be >= 2")
    etas = b.get("etas", [0.0, 0.05, 0.2, 0.4])
    if (not isinstance(etas, list) or not etas
            or not all(isinstance(e, (int, float)) and not isinstance(e, bool) and e >= 0 for e in etas)):
        raise ConfigError("etas must be a non-empty list of numbers >= 0")
    r = np.linspace(r_min, r_max, points)
    table = dynamics.potential_scan(r, [float(e) for e in etas], k, L2)
    header = ["r"] + [_eta_label(float(e)) for e in etas]
    write_csv(out / "effpot.csv", header, (np.concatenate([[ri], row]) for ri, row in zip(r, table)))
    rep.info(f"effpot: {points} radii x {len(etas)} curves -> {out / 'effpot.csv'}")
    return EXIT_OK


def _vector(b: dict, key: str, dim: int) -> np.ndarray:
    v = b[key]
    if not isinstance(v, list) or len(v) != dim or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{key} must be a list of {dim} numbers")
    return np.array(v, dtype=float)


def _initial_state(b: dict, params: ModelParams) -> PhaseState:
    n = params.dim
    if "q0" in b or "p0" in b:
        q, p = _vector(b, "q0", n), _vector(b, "p0", n)
        if np.linalg.norm(q) == 0:
            raise ConfigError("q0 must not be the origin")
        return PhaseState(q, p)
    L2 = float(_get(b, "L2", 1.0, check=lambda v: v > 0, what="must be > 0"))
    if "r0" in b:
        r0 = float(_get(b, "r0", 1.0, check=lambda v: v > 0, what="must be > 0"))
        return dynamics.planar_state(r0, float(_get(b, "p_r", 0.0)), L2, n)
    if params.k <= 0:
        raise ConfigError("the default circular orbit needs k > 0")
    return dynamics.circular_state(dynamics.EffectiveProblem(L2, params))


def cmd_simulate(cfg: RunConfig, out: Path, rep: Reporter) -> int:
    b = cfg.block("simulate")
    params = cfg.params
    tol = float(_get(b, "tol", 1e-12, check=lambda v: 1e-14 <= v <= 1e-4, what="must lie in [1e-14, 1e-4]"))
    bound = float(_get(b, "drift_bound", 1e-9, check=lambda v: v > 0, what="must be > 0"))
    state0 = _initial_state(b, params)
    E = eval_hamiltonian(state0, params)
    if "t_end" in b:
        t_end = float(_get(b, "t_end", 1.0, check=lambda v: v > 0, what="must be > 0"))
    else:
        periods = float(_get(b, "periods", 20, check=lambda v: v > 0, what="must be > 0"))
        if not E < 0:
            raise ConfigError("unbound initial state: give t_end instead of periods")
        t_end = periods * dynamics.radial_period_formula(E, params)

    traj = dynamics.integrate_orbit(state0, t_end, params, tol=tol)
    names = list(integrals.integral_set(state0, params).as_dict())
    n = params.dim
    header = (["t"] + [f"q{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)]
              + ["r", "H", "L2"] + [f"R_{i}" for i in range(1, n + 1)])

    def rows():
        for t, y in zip(traj.times, traj.states):
            s = PhaseState.from_vector(y)
            d = integrals.integral_set(s, params)
            yield [t, *y, s.radius, d.energy, d.L2, *d.runge_lenz]

    write_csv(out / "trajectory.csv", header, rows())
    drifts = {k: traj.invariant_drift[k] for k in names}
    passed = max(drifts.values()) < bound
    report = {
        "params": {"eta": params.eta, "k": params.k, "hbar": params.hbar, "dim": n},
        "tol": tol,
        "t_end": t_end,
        "steps": int(traj.times.size),
        "energy": E,
        "drift": drifts,
        "max_drift": max(drifts.values()),
        "drift_bound": bound,
        "halted": traj.halted,
        "halt_time": traj.halt_time,
        "closure_distance": None,
        "radial_period": None,
        "passed": passed,
    }
    if E < 0 and not traj.halted:
        try:
            report["radial_period"] = dynamics.radial_period(traj)
            report["closure_distance"] = dynamics.orbit_closure(traj)
        except DomainError as exc:
            report["closure_note"] = str(exc)
    write_json(out / "drift.json", report)
    rep.info(f"simulate: {traj.times.size} steps, max drift {report['max_drift']:.3e} "
             f"({'pass' if passed else 'FAIL'}) -> {out}")
    return EXIT_OK if passed else EXIT_FAIL


_VERIFY_THRESHOLDS = {"bracket": 1e-7, "identity": 1e-10, "min_order": 2.0, "adjoint": 1e-6}


def cmd_verify(cfg: RunConfig, out: Path, rep: Reporter) -> int:
    b = cfg.block("verify")
    params = cfg.params
    th = dict(_VERIFY_THRESHOLDS)
    over = b.get("thresholds", {})
    if not isinstance(over, dict) or set(over) - set(th):
        raise ConfigError(f"thresholds must be an object with keys from {sorted(th)}")
    for key in over:
        th[key] = float(_get(over, key, th[key], check=lambda v: v > 0, what="must be > 0"))
    samples = _get(b, "samples", 100, int, lambda v: v >= 1, "must be >= 1")
    id_samples = _get(b, "identity_samples", 1000, int, lambda v: v >= 1, "must be >= 1")
    g = b.get("grid", {})
    if not isinstance(g, dict):
        raise ConfigError("grid must be an object")
    gdim = _get(g, "dim", 2, int, lambda v: v in (2, 3), "must be 2 or 3")
    gpoints = _get(g, "points", 256 if gdim == 2 else 32, int, lambda v: v >= 16, "must be >= 16")
    levels = _get(g, "levels", 3, int, lambda v: v >= 2, "must be >= 2")

    rng = np.random.default_rng(cfg.seed)
    report: dict[str, Any] = {"params": {"eta": params.eta, "k": params.k, "hbar": params.hbar,
                                         "dim": params.dim},
                              "seed": cfg.seed, "thresholds": th}
    ok = True

    states = integrals.random_states(rng, params.dim, samples)
    brackets = {}
    for rel in integrals.algebra_relations(params):
        brackets[rel.name] = max(integrals.relation_residual(rel, s) for s in states)
    b_ok = max(brackets.values()) <= th["bracket"]
    report["poisson_algebra"] = {"max_residual": brackets, "passed": b_ok}
    ok &= b_ok

    id_states = integrals.random_states(rng, params.dim, id_samples)
    id_res = max(integrals.runge_lenz_identity_residual(s, params) for s in id_states)
    report["runge_lenz_identity"] = {"max_residual": id_res, "passed": id_res <= th["identity"]}
    ok &= id_res <= th["identity"]

    try:
        rank = integrals.functional_independence(states[:10], params)
    except DegenerateSampleError as exc:
        rank = exc.rank
    expected = 2 * params.dim - 1
    report["functional_independence"] = {"rank": rank, "expected": expected, "passed": rank == expected}
    ok &= rank == expected

    gp = params.replace(dim=gdim)
    studies = operators.theorem_checks(gp, dim=gdim, points=gpoints, levels=levels, seed=cfg.seed)
    comm = {}
    for s in studies:
        comm[s.name] = {"h": s.steps, "residual": s.residuals, "observed_order": s.orders,
                        "passed": min(s.orders) >= th["min_order"]}
        ok &= comm[s.name]["passed"]
    report["operator_commutators"] = {"grid_dim": gdim, "base_points": gpoints, "studies": comm}

    # adjointness is a truncation-level property, so test it on the finest mesh
    box = operators.default_box(gdim, gpoints * 2 ** (levels - 1), half_width=6.0 if gdim == 2 else 9.0)
    frng = np.random.default_rng([cfg.seed, 1])
    phi = operators.random_bumps(frng, box).evaluate(box)
    psi = operators.random_bumps(frng, box).evaluate(box)
    adj = {
        "H": operators.adjointness_residual(lambda f: operators.apply_hamiltonian(f, gp), phi, psi, gp),
        "R_1": operators.adjointness_residual(lambda f: operators.apply_runge_lenz(f, 0, gp), phi, psi, gp),
        f"C^({gdim})": operators.adjointness_residual(
            lambda f: operators.apply_casimir(f, gdim, gp), phi, psi, gp),
    }
    a_ok = max(adj.values()) <= th["adjoint"]
    report["self_adjointness"] = {"points": box.points, "residual": adj, "passed": a_ok}
    ok &= a_ok

    report["passed"] = bool(ok)
    write_json(out / "verify.json", report)
    rep.info(f"verify: {'all checks passed' if ok else 'FAILED'} -> {out / 'verify.json'}")
    return EXIT_OK if ok else EXIT_FAIL


def _levels(b: dict) -> list[tuple[int, int]]:
    if "levels" in b:
        lv = b["levels"]
        if not isinstance(lv, list) or not lv or not all(
                isinstance(x, list) and len(x) == 2 and all(isinstance(v, int) and not isinstance(v, bool)
                                                             and v >= 0 for v in x) for x in lv):
            raise ConfigError("levels must be a non-empty list of [n, l] pairs of integers >= 0")
        return [tuple(x) for x in lv]
    n_max = _get(b, "n_max", 3, int, lambda v: v >= 0, "must be >= 0")
    l_max = _get(b, "l_max", 2, int, lambda v: v >= 0, "must be >= 0")
    return [(n, l) for l in range(l_max + 1) for n in range(n_max + 1)]


def cmd_oracle(cfg: RunConfig, out: Path, rep: Reporter) -> int:
    b = cfg.block("oracle")
    params = cfg.params
    if params.k <= 0:
        raise ConfigError("bound levels require k > 0")
    levels = _levels(b)
    points = _get(b, "points", 6000, int, lambda v: v >= 100, "must be >= 100")
    C = float(_get(b, "C", 1.0, check=lambda v: v > 0, what="must be > 0"))
    refine = _get(b, "refine", True, bool)
    for n, _ in levels:
        if points // 4 <= n + 1:
            raise ConfigError(f"points too small for level index {n}")

    rows, ok, failure = [], True, None
    for n, l in levels:
        E = spectrum.energy(n, l, params)
        try:
            res = oracle.oracle_energy(n, l, params, points, refine=refine)
        except (ConvergenceError, np.linalg.LinAlgError, DomainError) as exc:
            failure = f"eigensolver failed for (n={n}, l={l}): {exc}"
            ok = False
            break
        diff = abs(res.energy - E)
        order = None
        if refine:
            order = oracle.observed_order(diff, abs(res.energy_refined - E))
        h = res.grid.spacing
        ok &= diff <= C * h * h
        rows.append([n, l, E, res.energy, diff, h, order])
    write_csv(out / "oracle.csv",
              ["n", "l", "E_formula", "E_oracle", "abs_diff", "grid_h", "observed_order"], rows)
    if failure:
        rep.error(failure)
    rep.info(f"oracle: {len(rows)} levels, {'within' if ok else 'OUTSIDE'} C*h^2 -> {out / 'oracle.csv'}")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "spectrum": cmd_spectrum,
    "effpot": cmd_effpot,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    common.add_argument("--seed", type=int, default=None, help="RNG seed, overrides the config")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")
    parser = argparse.ArgumentParser(prog="deformed-kepler",
                                     description="Deformed Kepler-Coulomb workflows.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "closed-form level table",
        "effpot": "effective potential curves for several eta",
        "simulate": "integrate an orbit and report integral drift",
        "verify": "classical and grid operator checks",
        "oracle": "finite-difference radial eigenvalues against the closed form",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    rep = Reporter(args.quiet)
    try:
        doc = {}
        if args.config is not None:
            try:
                doc = json.loads(args.config.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        cfg = parse_config(doc, args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, rep)
    except ConfigError as exc:
        rep.error(str(exc))
        return EXIT_CONFIG
    except DeformedKeplerError as exc:
        rep.error(str(exc))
        return EXIT_FAIL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
