"""Coefficient fields on a fixed 4-dimensional coordinate chart.

A field wraps a pure evaluator that maps the four chart coordinates to its
components.  Evaluators are written against the jet arithmetic in
:mod:`berwald.jets`, so the same code path yields plain values, first and
second coordinate derivatives, batched over arbitrarily many points.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet, seed_vector

DIM = 4

__all__ = ["DIM", "MetricField", "OneFormField", "as_points", "as_vectors"]


def as_points(x):
    """Validate and shape an array of chart points, (..., 4)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != DIM:
        raise ValueError(f"points must have {DIM} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite coordinates")
    return x

as_vectors = as_points  # tangent vectors share the shape contract


def _fill(out, entry, index):
    out[(...,) + index] = entry.f if isinstance(entry, Jet) else entry


def _fill_grad(out, entry, index):
    if isinstance(entry, Jet):
        out[(...,) + index + (slice(None),)] = entry.g


def _fill_hess(out, entry, index):
    if isinstance(entry, Jet) and entry.h is not None:
        out[(...,) + index + (slice(None), slice(None))] = entry.h


class MetricField:
    """Symmetric rank-2 field a_mn(x), derivative-capable to second order."""

    def __init__(self, fn, name="custom", params=None, domain=None):
        self.fn = fn
        self.name = name
        self.params = dict(params or {})
        self._domain = domain

    def __repr__(self):
        return f"MetricField({self.name!r}, params={self.params})"

    def in_domain(self, x):
        x = as_points(x)
        ok = np.ones(x.shape[:-1], dtype=bool)
        if self._domain is not None:
            ok &= self._domain(x)
        return ok

    def entries(self, coords):
        """Raw 4x4 nested list for jet-or-float coordinate entries."""
        return self.fn(list(coords))

    def components(self, x):
        x = as_points(x)
        rows = self.entries([x[..., i] for i in range(DIM)])
        out = np.zeros(x.shape[:-1] + (DIM, DIM))
        for i in range(DIM):
            for j in range(DIM):
                _fill(out, rows[i][j], (i, j))
        return out

    def with_derivs(self, x, order=1):
        """Components plus derivative blocks, derivative indices last.

        Returns ``(a, da)`` for ``order=1`` and ``(a, da, d2a)`` for
        ``order=2`` with ``da[..., m, n, s] = d a_mn / d x^s``.
        """
        x = as_points(x)
        shape = x.shape[:-1]
        rows = self.entries(seed_vector(x, n=DIM, order=order))
        a = np.zeros(shape + (DIM, DIM))
        da = np.zeros(shape + (DIM, DIM, DIM))
        d2a = np.zeros(shape + (DIM, DIM, DIM, DIM)) if order >= 2 else None
        for i in range(DIM):
            for j in range(DIM):
                e = rows[i][j]
                _fill(a, e, (i, j))
                _fill_grad(da, e, (i, j))
                if order >= 2:
                    _fill_hess(d2a, e, (i, j))
        return (a, da) if order == 1 else (a, da, d2a)

    def determinant(self, x):
        return np.linalg.det(self.components(x))


class OneFormField:
    """Covector field b_m(x), derivative-capable to first order."""

    def __init__(self, fn, name="custom", params=None, domain=None):
        self.fn = fn
        self.name = name
        self.params = dict(params or {})
        self._domain = domain

    def __repr__(self):
        return f"OneFormField({self.name!r}, params={self.params})"

    def in_domain(self, x):
        x = as_points(x)
        ok = np.ones(x.shape[:-1], dtype=bool)
        if self._domain is not None:
            ok &= self._domain(x)
        return ok

    def entries(self, coords):
        return self.fn(list(coords))

    def components(self, x):
        x = as_points(x)
        comps = self.entries([x[..., i] for i in range(DIM)])
        out = np.zeros(x.shape[:-1] + (DIM,))
        for i in range(DIM):
            _fill(out, comps[i], (i,))
        return out

    def with_derivs(self, x, order=1):
        """Returns ``(b, db)`` with ``db[..., m, s] = d b_m / d x^s``."""
        x = as_points(x)
        shape = x.shape[:-1]
        comps = self.entries(seed_vector(x, n=DIM, order=order))
        b = np.zeros(shape + (DIM,))
        db = np.zeros(shape + (DIM, DIM))
        d2b = np.zeros(shape + (DIM, DIM, DIM)) if order >= 2 else None
        for i in range(DIM):
            e = comps[i]
            _fill(b, e, (i,))
            _fill_grad(db, e, (i,))
            if order >= 2:
                _fill_hess(d2b, e, (i,))
        return (b, db) if order == 1 else (b, db, d2b)
