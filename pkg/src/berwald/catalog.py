"""Built-in families of metrics, one-forms and free functions.

Every family is a pure evaluator written with jet-aware arithmetic, so the
same definition serves plain evaluation, derivative extraction and Lagrangian
composition.  The registries back the declarative scenario configs: a config
references families by name, which keeps runs reproducible without code
changes.
"""

from __future__ import annotations

import numpy as np

from .fields import DIM, MetricField, OneFormField
from .jets import jexp, jpow, jsqrt

__all__ = [
    "METRIC_FAMILIES",
    "ONEFORM_FAMILIES",
    "FREE_FUNCTIONS",
    "build_metric",
    "build_oneform",
    "build_free_function",
]

_MINKOWSKI_SIGNS = (-1.0, 1.0, 1.0, 1.0)


def _constant_matrix(diag):
    rows = [[diag[i] if i == j else 0.0 for j in range(DIM)] for i in range(DIM)]

    def fn(coords):
        return rows

    return fn


def _metric_euclidean(params):
    _expect_keys(params, set())
    return MetricField(_constant_matrix((1.0,) * DIM), "euclidean", params)


def _metric_minkowski(params):
    _expect_keys(params, set())
    return MetricField(_constant_matrix(_MINKOWSKI_SIGNS), "minkowski", params)


def _metric_diag_power(params):
    """Diagonal metric with entries coeff * (x^axis)^power per slot."""
    _expect_keys(params, {"entries"})
    entries = params.get("entries", [{}] * DIM)
    if len(entries) != DIM:
        raise ValueError(f"'entries' must list {DIM} diagonal slots")
    spec = []
    for e in entries:
        _expect_keys(e, {"coeff", "axis", "power"})
        coeff = float(e.get("coeff", 1.0))
        axis = int(e.get("axis", 0))
        power = int(e.get("power", 0))
        if coeff == 0.0:
            raise ValueError("zero diagonal coefficient makes the metric singular")
        if not 0 <= axis < DIM:
            raise ValueError(f"axis must be in 0..{DIM - 1}")
        spec.append((coeff, axis, power))

    def fn(coords):
        rows = [[0.0] * DIM for _ in range(DIM)]
        for i, (coeff, axis, power) in enumerate(spec):
            rows[i][i] = coeff if power == 0 else coeff * jpow(coords[axis], power)
        return rows

    return MetricField(fn, "diag-power", params)


def _metric_conformal_flat(params):
    """exp(2*rate*x^0) times the flat Lorentzian metric."""
    _expect_keys(params, {"rate"})
    rate = float(params.get("rate", 1.0))

    def fn(coords):
        factor = jexp(2.0 * rate * coords[0])
        return [
            [factor * _MINKOWSKI_SIGNS[i] if i == j else 0.0 for j in range(DIM)]
            for i in range(DIM)
        ]

    return MetricField(fn, "conformal-flat", params)


def _oneform_constant(params):
    _expect_keys(params, {"components"})
    comps = params.get("components")
    if comps is None:
        raise ValueError("'components' is required")
    comps = [float(c) for c in comps]
    if len(comps) != DIM or not any(comps):
        raise ValueError(f"'components' must be {DIM} numbers, not all zero")

    def fn(coords):
        return list(comps)

    return OneFormField(fn, "constant", params)


def _oneform_exact_exponential(params):
    """h(x^0) dx^0 with h either scale*exp(rate*x^0) or scale*(x^0)^degree."""
    _expect_keys(params, {"h", "scale", "rate", "degree"})
    h = params.get("h", "exp")
    scale = float(params.get("scale", 1.0))
    if scale == 0.0:
        raise ValueError("'scale' must be nonzero")
    if h == "exp":
        rate = float(params.get("rate", 1.0))

        def fn(coords):
            return [scale * jexp(rate * coords[0]), 0.0, 0.0, 0.0]

    elif h == "poly":
        degree = int(params.get("degree", 1))
        if degree < 0:
            raise ValueError("'degree' must be >= 0")

        def fn(coords):
            lead = scale if degree == 0 else scale * jpow(coords[0], degree)
            return [lead, 0.0, 0.0, 0.0]

    else:
        raise ValueError("'h' must be one of: exp, poly")
    return OneFormField(fn, "exact-exponential", params)


def _oneform_radial(params):
    """h(r) dr on r > r_min, with dr the unit radial one-form of the chart.

    Profiles h: ``inverse`` (scale/r), ``one`` (scale), ``power``
    (scale * r^power) and ``rational`` (scale * r / (c0 - r^2), defined on
    r^2 < c0).
    """
    _expect_keys(params, {"h", "scale", "power", "r_min", "c0"})
    h = params.get("h", "inverse")
    scale = float(params.get("scale", 1.0))
    r_min = float(params.get("r_min", 1e-6))
    if scale == 0.0:
        raise ValueError("'scale' must be nonzero")
    if h == "rational":
        c0 = float(params.get("c0", 1.0))
        if c0 <= 0.0:
            raise ValueError("'c0' must be positive for the rational profile")

        def fn(coords):
            r2 = coords[0] * coords[0]
            for i in range(1, DIM):
                r2 = r2 + coords[i] * coords[i]
            denom = c0 - r2
            return [scale * coords[i] / denom for i in range(DIM)]

        def domain(x):
            r = np.sqrt(np.sum(x**2, axis=-1))
            return (r > r_min) & (r**2 < 0.98 * c0)

        return OneFormField(fn, "radial", params, domain=domain)
    if h == "inverse":
        power = -1
    elif h == "one":
        power = 0
    elif h == "power":
        power = int(params.get("power", 1))
    else:
        raise ValueError("'h' must be one of: inverse, one, power, rational")

    def fn(coords):
        r2 = coords[0] * coords[0]
        for i in range(1, DIM):
            r2 = r2 + coords[i] * coords[i]
        r = jsqrt(r2)
        # h(r)/r multiplies x_mu; exponent shifted by one for the dr factor
        factor = scale * jpow(r, power - 1) if power != 1 else scale
        return [factor * coords[i] for i in range(DIM)]

    def domain(x):
        return np.sqrt(np.sum(x**2, axis=-1)) > r_min

    return OneFormField(fn, "radial", params, domain=domain)


class FreeFunction:
    """Named one-variable function usable inside Lagrangian constructions."""

    def __init__(self, name, params, fn, formula):
        self.name = name
        self.params = dict(params)
        self.fn = fn
        self.formula = formula

    def __call__(self, z):
        return self.fn(z)

    def __repr__(self):
        return f"FreeFunction({self.formula!r})"


def _free_affine(params):
    _expect_keys(params, {"c0", "c1"})
    c0 = float(params.get("c0", 1.0))
    c1 = float(params.get("c1", 1.0))
    if c1 == 0.0:
        raise ValueError("affine free function needs c1 != 0 (else it is constant)")
    return FreeFunction(
        "affine", params, lambda z: c0 + c1 * z, f"{c0} + {c1}*z"
    )


def _free_exponential(params):
    _expect_keys(params, {"c0", "c1"})
    c0 = float(params.get("c0", 1.0))
    c1 = float(params.get("c1", 1.0))
    if c0 == 0.0 or c1 == 0.0:
        raise ValueError("exponential free function needs c0, c1 != 0")
    return FreeFunction(
        "exponential", params, lambda z: c0 * jexp(c1 * z), f"{c0}*exp({c1}*z)"
    )


def _free_constant(params):
    _expect_keys(params, {"c0"})
    c0 = float(params.get("c0", 1.0))
    return FreeFunction("constant", params, lambda z: c0 + 0.0 * z, f"{c0}")


METRIC_FAMILIES = {
    "euclidean": _metric_euclidean,
    "minkowski": _metric_minkowski,
    "diag-power": _metric_diag_power,
    "conformal-flat": _metric_conformal_flat,
}

ONEFORM_FAMILIES = {
    "constant": _oneform_constant,
    "exact-exponential": _oneform_exact_exponential,
    "radial": _oneform_radial,
}

FREE_FUNCTIONS = {
    "affine": _free_affine,
    "exponential": _free_exponential,
    "constant": _free_constant,
}


def _expect_keys(params, allowed):
    unknown = set(params) - allowed
    if unknown:
        raise ValueError(f"unknown parameter(s): {sorted(unknown)}")


def build_metric(family, params=None):
    if family not in METRIC_FAMILIES:
        raise ValueError(
            f"unknown metric family {family!r}; available: {sorted(METRIC_FAMILIES)}"
        )
    return METRIC_FAMILIES[family](params or {})


def build_oneform(family, params=None):
    if family not in ONEFORM_FAMILIES:
        raise ValueError(
            f"unknown one-form family {family!r}; available: {sorted(ONEFORM_FAMILIES)}"
        )
    return ONEFORM_FAMILIES[family](params or {})


def build_free_function(family, params=None):
    if family not in FREE_FUNCTIONS:
        raise ValueError(
            f"unknown free function {family!r}; available: {sorted(FREE_FUNCTIONS)}"
        )
    return FREE_FUNCTIONS[family](params or {})
