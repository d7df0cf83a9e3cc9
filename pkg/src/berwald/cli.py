"""Command-line front end: classify | decide | verify | integrate.

Every command takes ``--config <path>`` (a JSON scenario), optional ``--out``
for the report, ``--seed`` to override the scenario seed, and repeatable
``--tolerance KEY=VALUE`` overrides.  Exit codes: 0 on success or a
metrizable verdict, 2 on a checked negative, 1 on errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import (
    FIT_TOLERANCE_KEYS,
    VERIFY_TOLERANCE_KEYS,
    decide_options,
    load_config,
    sample_points,
    scenario_connection,
)
from .connection import NonmetricityCoefficients, classify_family
from .errors import BerwaldError, ConfigError
from .metrizability import VERDICT_NOT_METRIZABLE, decide
from .report import EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK, build_report, canonical_json
from .verification import (
    compare_trajectories,
    integrate_autoparallel,
    integrate_geodesic,
    verify_bundle,
    write_trajectory_csv,
)
from .errors import DegenerateHessianError


def _parse_tolerances(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError([("--tolerance", f"expected KEY=VALUE, got {pair!r}")])
        key, value = pair.split("=", 1)
        key = key.strip()
        if key not in FIT_TOLERANCE_KEYS | VERIFY_TOLERANCE_KEYS | {"bins"}:
            raise ConfigError([("--tolerance", f"unknown tolerance key {key!r}")])
        out[key] = int(value) if key == "bins" else float(value)
    return out


def _emit(doc, out_path):
    text = canonical_json(doc)
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _decide_body(config, seed, tol):
    conn = scenario_connection(config)
    points = sample_points(config, n=2 * config.count)
    options = decide_options(config, seed=seed, tolerance_overrides=tol)
    report = decide(conn, points, options)
    return conn, report, {"decision": report.to_dict(), "verdict": report.verdict}


def cmd_classify(config, seed, tol):
    tags = classify_family(NonmetricityCoefficients(*config.coefficients))
    return {"subfamily_tags": tags}, EXIT_OK


def cmd_decide(config, seed, tol):
    _, report, body = _decide_body(config, seed, tol)
    code = EXIT_OK if report.verdict != VERDICT_NOT_METRIZABLE else EXIT_NEGATIVE
    return body, code


def cmd_verify(config, seed, tol):
    conn, report, body = _decide_body(config, seed, tol)
    if report.lagrangian is None:
        body["verification"] = {"passed": False, "reason": "no Lagrangian constructed"}
        return body, EXIT_NEGATIVE
    if config.expected_case is not None:
        got = getattr(report.lagrangian, "case", None)
        if got != config.expected_case:
            body["verification"] = {
                "passed": False,
                "reason": f"constructed case {got!r} != requested {config.expected_case!r}",
            }
            return body, EXIT_NEGATIVE
    rng = np.random.default_rng(config.seed if seed is None else seed)
    points = sample_points(config, n=config.count, rng=rng)
    xs, vs = [], []
    for x in points:
        cand = rng.standard_normal((8, 4))
        mask = report.lagrangian.admissible(np.broadcast_to(x, cand.shape), cand)
        take = cand[mask][:2]
        if take.size:
            xs.append(np.broadcast_to(x, take.shape).copy())
            vs.append(take)
    states = (np.concatenate(xs), np.concatenate(vs)) if xs else (np.empty((0, 4)), np.empty((0, 4)))
    ics = config.initial_conditions or _default_initial_conditions(report.lagrangian, points, rng)
    verify_tol = dict(config.verify_tolerances)
    verify_tol.update({k: v for k, v in tol.items() if k in VERIFY_TOLERANCE_KEYS})
    summary = verify_bundle(
        report.lagrangian,
        conn,
        states,
        ics,
        step=config.step,
        steps=config.steps,
        tolerances=verify_tol,
    )
    body["verification"] = summary.to_dict()
    return body, EXIT_OK if summary.passed else EXIT_NEGATIVE


def _default_initial_conditions(lagrangian, points, rng, k=3):
    ics = []
    for x in points:
        cand = 0.5 * rng.standard_normal((16, 4))
        mask = lagrangian.admissible(np.broadcast_to(x, cand.shape), cand)
        if np.any(mask):
            ics.append((x, cand[mask][0]))
        if len(ics) >= k:
            break
    if not ics:
        raise ConfigError([("integration", "no admissible initial conditions found")])
    return ics


def cmd_integrate(config, seed, tol):
    conn, report, body = _decide_body(config, seed, tol)
    if not config.initial_conditions:
        raise ConfigError([("integration.initial_conditions", "at least one is required")])
    runs = []
    for i, (x0, v0) in enumerate(config.initial_conditions):
        entry = {"initial_condition": {"x": x0.tolist(), "v": v0.tolist()}}
        auto = integrate_autoparallel(conn, x0, v0, config.step, config.steps)
        entry["autoparallel"] = {
            "steps": auto.steps,
            "final_x": auto.x[-1].tolist(),
            "final_v": auto.v[-1].tolist(),
            "truncated": auto.truncated,
        }
        if config.trajectory_prefix:
            path = f"{config.trajectory_prefix}-auto-{i:03d}.csv"
            write_trajectory_csv(auto, path)
            entry["autoparallel"]["csv"] = path
        if report.lagrangian is not None:
            try:
                geo = integrate_geodesic(
                    report.lagrangian, x0, v0, config.step, config.steps
                )
                cmp_result = compare_trajectories(auto, geo)
                entry["geodesic"] = {
                    "steps": geo.steps,
                    "final_x": geo.x[-1].tolist(),
                    "truncated": geo.truncated,
                    "max_coordinate_deviation": cmp_result.max_coordinate_deviation,
                    "max_velocity_deviation": cmp_result.max_velocity_deviation,
                }
                if config.trajectory_prefix:
                    path = f"{config.trajectory_prefix}-geo-{i:03d}.csv"
                    write_trajectory_csv(geo, path)
                    entry["geodesic"]["csv"] = path
            except DegenerateHessianError as exc:
                entry["geodesic"] = {"unavailable": str(exc)}
        runs.append(entry)
    body["trajectories"] = runs
    return body, EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "decide": cmd_decide,
    "verify": cmd_verify,
    "integrate": cmd_integrate,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="berwald",
        description="Build one-form-nonmetricity connections, decide their "
        "metrizability, construct the metrizing Lagrangian, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON scenario")
        p.add_argument("--out", default=None, help="report path (default: stdout)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument(
            "--tolerance",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a tolerance (repeatable)",
        )
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        tol = _parse_tolerances(args.tolerance)
        body, code = COMMANDS[args.command](config, args.seed, tol)
        doc = build_report(args.command, config, config.seed, body)
        _emit(doc, args.out)
        return code
    except ConfigError as exc:
        doc = {
            "error": "configuration",
            "problems": [{"path": p, "message": m} for p, m in exc.problems],
        }
        _emit(doc, args.out)
        return EXIT_ERROR
    except BerwaldError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)}, args.out)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
