"""Declarative scenario configuration: parsing, validation, sampling.

A scenario is one JSON document that names catalog families, the coefficient
triple, a sampling box and the command-specific options.  Validation collects
every problem with a path into the document, so a bad config fails once with
a complete list instead of piecemeal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .catalog import build_free_function, build_metric, build_oneform
from .connection import NonmetricityCoefficients, VectorialConnection
from .errors import ConfigError
from .fields import DIM
from .metrizability import DecideOptions, FitTolerances

__all__ = ["ScenarioConfig", "parse_config", "load_config", "scenario_connection", "sample_points"]

VERIFY_TOLERANCE_KEYS = {
    "delta_residual",
    "spray_residual",
    "coincidence",
    "conservation",
    "euler_lagrange",
}
FIT_TOLERANCE_KEYS = {
    "residual",
    "constancy",
    "bin_spread",
    "formula",
    "ode",
    "zero",
    "lambda_floor",
    "null_norm",
    "oneform_floor",
}


@dataclass
class ScenarioConfig:
    """Validated scenario; fields mirror the config document."""

    name: str
    metric: dict
    oneform: dict
    coefficients: tuple
    domain_min: np.ndarray
    domain_max: np.ndarray
    count: int = 200
    seed: int = 0
    delta_a: float = 1e-6
    delta_b: float = 1e-6
    cone_sign: int = 1
    kappa: float = 1.0
    free_function: dict | None = None
    constants: dict = field(default_factory=dict)
    expected_case: str | None = None
    fit_tolerances: dict = field(default_factory=dict)
    verify_tolerances: dict = field(default_factory=dict)
    step: float = 1e-3
    steps: int = 1000
    initial_conditions: list = field(default_factory=list)
    trajectory_prefix: str | None = None
    raw: dict = field(default_factory=dict)

    def with_seed(self, seed):
        return self if seed is None else replace(self, seed=int(seed))


def _num_list(value, n, path, errors):
    try:
        vals = [float(v) for v in value]
    except (TypeError, ValueError):
        errors.append((path, f"expected a list of {n} numbers"))
        return None
    if len(vals) != n or not all(np.isfinite(vals)):
        errors.append((path, f"expected {n} finite numbers"))
        return None
    return vals


def parse_config(text):
    """Parse and validate a JSON scenario document.

    Raises ConfigError carrying every (path, message) problem found.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("$", f"not valid JSON: {exc}")]) from exc
    if not isinstance(doc, dict):
        raise ConfigError([("$", "top level must be an object")])
    errors = []
    known = {
        "name",
        "metric",
        "oneform",
        "coefficients",
        "domain",
        "sampling",
        "tolerances",
        "construction",
        "integration",
        "output",
        "lagrangian",
    }
    for key in doc:
        if key not in known:
            errors.append((key, "unknown section"))

    name = doc.get("name", "scenario")

    metric = doc.get("metric") or {}
    family = metric.get("family")
    params = metric.get("params", {})
    if family is None:
        errors.append(("metric.family", "required"))
    else:
        try:
            build_metric(family, params)
        except ValueError as exc:
            errors.append(("metric", str(exc)))

    oneform = doc.get("oneform") or {}
    of_family = oneform.get("family")
    of_params = oneform.get("params", {})
    if of_family is None:
        errors.append(("oneform.family", "required"))
    else:
        try:
            build_oneform(of_family, of_params)
        except ValueError as exc:
            errors.append(("oneform", str(exc)))

    coeffs = doc.get("coefficients")
    ctuple = None
    if coeffs is None:
        errors.append(("coefficients", "required"))
    else:
        vals = _num_list(coeffs, 3, "coefficients", errors)
        if vals is not None:
            if vals == [0.0, 0.0, 0.0]:
                errors.append(
                    (
                        "coefficients",
                        "coefficients not all zero: a one-form-built nonmetricity "
                        "needs (c1, c2, c3) != (0, 0, 0)",
                    )
                )
            else:
                ctuple = tuple(vals)

    domain = doc.get("domain") or {}
    dmin = _num_list(domain.get("min", [-1.0] * DIM), DIM, "domain.min", errors)
    dmax = _num_list(domain.get("max", [1.0] * DIM), DIM, "domain.max", errors)
    if dmin is not None and dmax is not None and not all(
        lo < hi for lo, hi in zip(dmin, dmax)
    ):
        errors.append(("domain", "min must be strictly below max per coordinate"))

    sampling = doc.get("sampling") or {}
    count = sampling.get("count", 200)
    if not isinstance(count, int) or count < 10:
        errors.append(("sampling.count", "must be an integer >= 10"))
    seed = sampling.get("seed", 0)
    if not isinstance(seed, int):
        errors.append(("sampling.seed", "must be an integer"))
    cone_sign = sampling.get("cone_sign", 1)
    if cone_sign not in (-1, 1):
        errors.append(("sampling.cone_sign", "must be -1 or +1"))
    delta_a = float(sampling.get("delta_a", 1e-6))
    delta_b = float(sampling.get("delta_b", 1e-6))
    if delta_a <= 0 or delta_b <= 0:
        errors.append(("sampling", "admissibility margins must be positive"))

    tolerances = doc.get("tolerances") or {}
    fit_tol, verify_tol = {}, {}
    for key, value in tolerances.items():
        if key in FIT_TOLERANCE_KEYS:
            fit_tol[key] = float(value)
        elif key in VERIFY_TOLERANCE_KEYS:
            verify_tol[key] = float(value)
        elif key == "bins":
            fit_tol[key] = int(value)
        else:
            errors.append((f"tolerances.{key}", "unknown tolerance"))

    construction = doc.get("construction") or {}
    kappa = float(construction.get("kappa", 1.0))
    if kappa == 0.0:
        errors.append(("construction.kappa", "kappa must be nonzero"))
    ff = construction.get("free_function")
    if ff is not None:
        try:
            build_free_function(ff.get("family"), ff.get("params", {}))
        except ValueError as exc:
            errors.append(("construction.free_function", str(exc)))
    constants = construction.get("constants", {})
    unknown_constants = set(constants) - {"C1", "C2", "C3", "C4"}
    if unknown_constants:
        errors.append(
            ("construction.constants", f"unknown constants {sorted(unknown_constants)}")
        )

    lagrangian = doc.get("lagrangian") or {}
    expected_case = lagrangian.get("case")

    integration = doc.get("integration") or {}
    step = float(integration.get("step", 1e-3))
    steps = integration.get("steps", 1000)
    if step <= 0:
        errors.append(("integration.step", "must be positive"))
    if not isinstance(steps, int) or steps < 1:
        errors.append(("integration.steps", "must be an integer >= 1"))
    ics = []
    for i, entry in enumerate(integration.get("initial_conditions", [])):
        x0 = _num_list(entry.get("x", None) or [], DIM, f"integration.initial_conditions[{i}].x", errors)
        v0 = _num_list(entry.get("v", None) or [], DIM, f"integration.initial_conditions[{i}].v", errors)
        if x0 is not None and v0 is not None:
            ics.append((np.array(x0), np.array(v0)))

    output = doc.get("output") or {}
    trajectory_prefix = output.get("trajectory_prefix")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        name=name,
        metric={"family": family, "params": params},
        oneform={"family": of_family, "params": of_params},
        coefficients=ctuple,
        domain_min=np.array(dmin),
        domain_max=np.array(dmax),
        count=count,
        seed=seed,
        delta_a=delta_a,
        delta_b=delta_b,
        cone_sign=cone_sign,
        kappa=kappa,
        free_function=ff,
        constants=dict(constants),
        expected_case=expected_case,
        fit_tolerances=fit_tol,
        verify_tolerances=verify_tol,
        step=step,
        steps=steps,
        initial_conditions=ics,
        trajectory_prefix=trajectory_prefix,
        raw=doc,
    )


def load_config(path):
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def scenario_connection(config):
    metric = build_metric(config.metric["family"], config.metric["params"])
    oneform = build_oneform(config.oneform["family"], config.oneform["params"])
    return VectorialConnection(
        metric, oneform, NonmetricityCoefficients(*config.coefficients)
    )


def sample_points(config, n=None, rng=None):
    """Uniform points in the domain box, restricted to the field domains."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n = 2 * config.count if n is None else n
    conn = scenario_connection(config)
    out = []
    total = 0
    for _ in range(64):
        draw = rng.uniform(config.domain_min, config.domain_max, size=(n, DIM))
        keep = draw[conn.in_domain(draw)]
        if keep.size:
            out.append(keep)
            total += keep.shape[0]
        if total >= n:
            break
    if total < n:
        raise ConfigError(
            [("domain", "could not draw enough in-domain sample points")]
        )
    return np.concatenate(out)[:n]


def decide_options(config, seed=None, tolerance_overrides=None):
    fit_kwargs = dict(config.fit_tolerances)
    for key, value in (tolerance_overrides or {}).items():
        if key in FIT_TOLERANCE_KEYS or key == "bins":
            fit_kwargs[key] = value
    free_function = None
    if config.free_function is not None:
        free_function = build_free_function(
            config.free_function.get("family"), config.free_function.get("params", {})
        )
    return DecideOptions(
        kappa=config.kappa,
        cone_sign=config.cone_sign,
        free_function=free_function,
        constants=dict(config.constants),
        tolerances=FitTolerances(**fit_kwargs),
        seed=config.seed if seed is None else seed,
    )
