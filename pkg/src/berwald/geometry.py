"""Chart-level tensor calculus: Christoffel symbols, covariant derivatives,
index gymnastics.  Everything is batched: a leading batch shape on ``x``
carries through to every output."""

from __future__ import annotations

import numpy as np

from .errors import SingularMetricError
from .fields import as_points, as_vectors

SINGULAR_DET_TOL = 1e-12

__all__ = [
    "SINGULAR_DET_TOL",
    "inverse_metric",
    "christoffel_symbols",
    "covariant_derivative_oneform",
    "raise_index",
    "lower_index",
]


def _checked_inverse(a):
    det = np.linalg.det(a)
    if np.any(np.abs(det) < SINGULAR_DET_TOL):
        raise SingularMetricError(
            f"|det a| fell below {SINGULAR_DET_TOL:g} (min {np.min(np.abs(det)):.3e})"
        )
    return np.linalg.inv(a)


def inverse_metric(metric, x):
    """a^{mn}(x); raises SingularMetricError below the determinant tolerance."""
    return _checked_inverse(metric.components(as_points(x)))


def christoffel_symbols(metric, x):
    """Levi-Civita connection coefficients, shape (..., 4, 4, 4).

    Index layout: ``out[..., m, n, r]`` is the upper-``m``, lower-``(n, r)``
    symbol, symmetric in ``(n, r)``.
    """
    a, da = metric.with_derivs(as_points(x))
    ainv = _checked_inverse(a)
    # da[..., m, n, s] = d_s a_mn
    t1 = np.swapaxes(da, -1, -2)        # [..., l, n, r] = d_n a_lr
    t2 = da                              # [..., l, n, r] = d_r a_ln
    t3 = np.moveaxis(da, -1, -3)         # [..., l, n, r] = d_l a_nr
    return 0.5 * np.einsum("...ml,...lnr->...mnr", ainv, t1 + t2 - t3)


def covariant_derivative_oneform(metric, oneform, x):
    """Levi-Civita covariant derivative of a one-form, ``out[..., m, n]``."""
    x = as_points(x)
    gamma = christoffel_symbols(metric, x)
    b, db = oneform.with_derivs(x)
    return np.swapaxes(db, -1, -2) - np.einsum("...smn,...s->...mn", gamma, b)


def raise_index(metric, x, covector):
    """b^m = a^{mn} b_n."""
    ainv = inverse_metric(metric, x)
    return np.einsum("...mn,...n->...m", ainv, as_vectors(covector))


def lower_index(metric, x, vector):
    """b_m = a_{mn} b^n."""
    a = metric.components(as_points(x))
    return np.einsum("...mn,...n->...m", a, as_vectors(vector))
