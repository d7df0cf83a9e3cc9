"""Symmetric affine connections whose nonmetricity is built from one one-form.

The connection splits as ``Gamma = Gamma_LC + D`` where ``D`` is an algebraic
distortion assembled from the metric ``a``, a one-form ``b`` and three real
constants ``(c1, c2, c3)``.  The module also classifies the classical
subfamilies these constants select and provides the autoparallel right-hand
side used by the integrators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import as_points, as_vectors
from .geometry import christoffel_symbols, inverse_metric

TAG_WEYL = "weyl"
TAG_SCHROEDINGER = "schroedinger"
TAG_COMPLETELY_SYMMETRIC = "completely-symmetric"
TAG_GENERIC = "generic"

__all__ = [
    "NonmetricityCoefficients",
    "classify_family",
    "VectorialConnection",
    "LeviCivitaConnection",
    "TAG_WEYL",
    "TAG_SCHROEDINGER",
    "TAG_COMPLETELY_SYMMETRIC",
    "TAG_GENERIC",
]


@dataclass(frozen=True)
class NonmetricityCoefficients:
    """The constants (c1, c2, c3); not all of them may vanish."""

    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        vals = (self.c1, self.c2, self.c3)
        if not all(np.isfinite(vals)):
            raise ValueError("coefficients must be finite")
        if vals == (0.0, 0.0, 0.0):
            raise ValueError("coefficients (c1, c2, c3) must not all be zero")

    def as_tuple(self):
        return (self.c1, self.c2, self.c3)


def classify_family(coeffs, tol=1e-12):
    """All subfamily tags matched by the coefficient constraints.

    The constraints are not mutually exclusive, so a list is returned;
    ``generic`` appears exactly when nothing else matches.
    """
    c1, c2, c3 = coeffs.as_tuple()
    tags = []
    if abs(c2) <= tol and abs(c3) <= tol:
        tags.append(TAG_WEYL)
    if abs(c1 + 2.0 * c2) <= tol and abs(c3) <= tol:
        tags.append(TAG_SCHROEDINGER)
    if abs(c1 - c2) <= tol:
        tags.append(TAG_COMPLETELY_SYMMETRIC)
    return tags or [TAG_GENERIC]


class LeviCivitaConnection:
    """Distortion-free connection of a metric; mainly a test shim and baseline."""

    def __init__(self, metric):
        self.metric = metric

    def in_domain(self, x):
        return self.metric.in_domain(x)

    def coefficients(self, x):
        return christoffel_symbols(self.metric, x)

    def autoparallel_acceleration(self, x, v):
        gamma = self.coefficients(x)
        v = as_vectors(v)
        return -np.einsum("...mnr,...n,...r->...m", gamma, v, v)


class VectorialConnection:
    """Symmetric connection with one-form-built nonmetricity."""

    def __init__(self, metric, oneform, coeffs):
        if not isinstance(coeffs, NonmetricityCoefficients):
            coeffs = NonmetricityCoefficients(*coeffs)
        self.metric = metric
        self.oneform = oneform
        self.coeffs = coeffs

    def __repr__(self):
        return (
            f"VectorialConnection(metric={self.metric.name!r}, "
            f"oneform={self.oneform.name!r}, coeffs={self.coeffs.as_tuple()})"
        )

    def in_domain(self, x):
        return self.metric.in_domain(x) & self.oneform.in_domain(x)

    def subfamily_tags(self):
        return classify_family(self.coeffs)

    # -- tensors -------------------------------------------------------------

    def nonmetricity(self, x):
        """Q_mnr = c1 b_m a_nr + c2 (b_r a_mn + b_n a_rm) + c3 b_m b_n b_r."""
        x = as_points(x)
        c1, c2, c3 = self.coeffs.as_tuple()
        a = self.metric.components(x)
        b = self.oneform.components(x)
        q = c1 * np.einsum("...m,...nr->...mnr", b, a)
        q += c2 * (
            np.einsum("...r,...mn->...mnr", b, a)
            + np.einsum("...n,...rm->...mnr", b, a)
        )
        q += c3 * np.einsum("...m,...n,...r->...mnr", b, b, b)
        return q

    def distortion(self, x):
        """D^m_nr, symmetric in the lower pair; raises on a singular metric."""
        x = as_points(x)
        c1, c2, c3 = self.coeffs.as_tuple()
        a = self.metric.components(x)
        b = self.oneform.components(x)
        b_up = np.einsum("...mn,...n->...m", inverse_metric(self.metric, x), b)
        eye = np.eye(4)
        d = 0.5 * (2.0 * c2 - c1) * np.einsum("...m,...nr->...mnr", b_up, a)
        d += 0.5 * c1 * np.einsum("...n,mr->...mnr", b, eye)
        d += 0.5 * c1 * np.einsum("...r,mn->...mnr", b, eye)
        d += 0.5 * c3 * np.einsum("...m,...n,...r->...mnr", b_up, b, b)
        return d

    def distortion_from_nonmetricity(self, x):
        """Rebuild D from Q by raising indices; cross-check for the closed form."""
        x = as_points(x)
        q = self.nonmetricity(x)
        ainv = inverse_metric(self.metric, x)
        t1 = np.einsum("...nrs,...sm->...mnr", q, ainv)   # Q_nr^m
        t2 = np.einsum("...rsn,...sm->...mnr", q, ainv)   # Q_r^m_n
        t3 = np.einsum("...ms,...snr->...mnr", ainv, q)   # Q^m_nr
        return 0.5 * (t1 + t2 - t3)

    def coefficients(self, x):
        """Full connection coefficients Gamma = Gamma_LC + D."""
        return christoffel_symbols(self.metric, x) + self.distortion(x)

    # -- velocity contractions -----------------------------------------------

    def contracted_distortion(self, x, v):
        """D^n_m = D^n_mr v^r plus its contractions with v_n and b_n.

        Returns ``(dmat, dv, db)`` with ``dmat[..., n, m]`` carrying the upper
        index first.
        """
        x, v = as_points(x), as_vectors(v)
        d = self.distortion(x)
        dmat = np.einsum("...nmr,...r->...nm", d, v)
        a = self.metric.components(x)
        v_low = np.einsum("...mn,...n->...m", a, v)
        b = self.oneform.components(x)
        dv = np.einsum("...nm,...n->...m", dmat, v_low)
        db = np.einsum("...nm,...n->...m", dmat, b)
        return dmat, dv, db

    def contracted_distortion_closed(self, x, v):
        """The two contractions from their closed-form expressions."""
        x, v = as_points(x), as_vectors(v)
        c1, c2, c3 = self.coeffs.as_tuple()
        a = self.metric.components(x)
        ainv = inverse_metric(self.metric, x)
        b = self.oneform.components(x)
        v_low = np.einsum("...mn,...n->...m", a, v)
        big_a = np.einsum("...m,...m->...", v_low, v)
        big_b = np.einsum("...m,...m->...", b, v)
        bb = np.einsum("...mn,...m,...n->...", ainv, b, b)
        dv = (
            c2 * big_b[..., None] * v_low
            + 0.5 * (c3 * big_b**2 + c1 * big_a)[..., None] * b
        )
        db = (c2 - 0.5 * c1) * bb[..., None] * v_low + (
            (c1 + 0.5 * c3 * bb) * big_b
        )[..., None] * b
        return dv, db

    def autoparallel_acceleration(self, x, v):
        """-Gamma^m_nr v^n v^r, the autoparallel second-order right-hand side."""
        gamma = self.coefficients(x)
        v = as_vectors(v)
        return -np.einsum("...mnr,...n,...r->...m", gamma, v, v)
