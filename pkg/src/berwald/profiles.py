"""Scalar profiles of the one-form norm, fitted from scattered samples.

The metrizability fits produce per-sample values of functions that are
supposed to depend on the one-form norm alone.  A :class:`ScalarProfile`
interpolates those samples (cubic spline through deduplicated nodes) so the
constructed Lagrangians can evaluate them, with derivatives, anywhere in the
sampled range.  :class:`ProfileIntegral` provides the anchored antiderivative
``t^w / profile(t)`` that the closed-form solutions need; the anchor constant
is absorbed into the free constants of those solutions.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .jets import Jet, lift

__all__ = ["ScalarProfile", "ProfileIntegral", "adaptive_simpson"]


def _dedupe(t, y, tol):
    order = np.argsort(t)
    t, y = np.asarray(t, float)[order], np.asarray(y, float)[order]
    keep_t, keep_y = [t[0]], [y[0]]
    counts = [1]
    for ti, yi in zip(t[1:], y[1:]):
        if ti - keep_t[-1] <= tol:
            # merge near-duplicates by running mean
            counts[-1] += 1
            keep_t[-1] += (ti - keep_t[-1]) / counts[-1]
            keep_y[-1] += (yi - keep_y[-1]) / counts[-1]
        else:
            keep_t.append(ti)
            keep_y.append(yi)
            counts.append(1)
    return np.array(keep_t), np.array(keep_y)


class ScalarProfile:
    """Smooth function of one scalar, interpolated from (t, value) samples."""

    def __init__(self, grid, values):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be matching 1-d arrays")
        self.grid = grid
        self.values = values
        if grid.size == 1:
            self._spline = None
        else:
            bc = "not-a-knot" if grid.size >= 4 else "natural"
            self._spline = CubicSpline(grid, values, bc_type=bc, extrapolate=True)

    @classmethod
    def from_samples(cls, t, y, dedupe_tol=None):
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if t.size == 0:
            raise ValueError("no samples")
        span = float(t.max() - t.min())
        tol = dedupe_tol if dedupe_tol is not None else max(1e-9, 1e-6 * span)
        grid, values = _dedupe(t, y, tol)
        return cls(grid, values)

    @classmethod
    def from_function(cls, fn, lo, hi, n=129):
        grid = np.linspace(lo, hi, n)
        return cls(grid, fn(grid))

    @property
    def lo(self):
        return float(self.grid[0])

    @property
    def hi(self):
        return float(self.grid[-1])

    def __call__(self, t):
        if self._spline is None:
            return np.full_like(np.asarray(t, dtype=float), self.values[0])
        return self._spline(t)

    def derivative(self, t, k=1):
        if self._spline is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self._spline(t, nu=k)

    def jet(self, u):
        """Apply the profile to a jet via the spline's chain rule."""
        if not isinstance(u, Jet):
            return self(u)
        t = u.f
        d2 = self.derivative(t, 2) if u.h is not None else None
        d3 = self.derivative(t, 3) if u.t is not None else None
        return lift(u, self(t), self.derivative(t, 1), d2, d3)

    def table(self, bins=64):
        """Evenly binned table of the profile, for reports."""
        if self.grid.size == 1:
            return {"t": [self.lo], "value": [float(self.values[0])]}
        centers = np.linspace(self.lo, self.hi, bins)
        return {"t": centers.tolist(), "value": self(centers).tolist()}


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=24):
    """Adaptive Simpson quadrature of a scalar callable on [a, b]."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lmid, rmid = 0.5 * (lo + mid), 0.5 * (mid + hi)
        fl, fr = f(lmid), f(rmid)
        left = simpson(lo, mid, flo, fl, fmid)
        right = simpson(mid, hi, fmid, fr, fhi)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, mid, flo, fl, fmid, left, eps / 2.0, depth + 1) + recurse(
            mid, hi, fmid, fr, fhi, right, eps / 2.0, depth + 1
        )

    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol * (1.0 + abs(whole)), 0)


class ProfileIntegral:
    """Anchored antiderivative I(t) = int_anchor^t s**w num(s) / lam(s) ds.

    ``num`` is an optional numerator profile (default 1).  Values come from
    per-panel adaptive Simpson accumulated on a dense grid (then splined for
    fast lookup); derivatives come from the integrand itself, so jet
    propagation stays exact regardless of the lookup error.
    """

    def __init__(
        self,
        lam,
        weight_power=1,
        numerator=None,
        lo=None,
        hi=None,
        anchor=None,
        panels=256,
    ):
        self.lam = lam
        self.num = numerator
        self.w = int(weight_power)
        lo = lam.lo if lo is None else float(lo)
        hi = lam.hi if hi is None else float(hi)
        if hi <= lo:
            hi = lo + max(1e-9, abs(lo) * 1e-9)
        pad = 0.05 * (hi - lo)
        lo, hi = lo - pad, hi + pad
        self.anchor = lo if anchor is None else float(anchor)
        lam_vals = lam(np.linspace(lo, hi, 1024))
        if np.any(np.abs(lam_vals) < 1e-14) or np.min(lam_vals) * np.max(lam_vals) < 0:
            raise ValueError("profile crosses zero; the anchored integral is undefined")
        nodes = np.linspace(lo, hi, panels + 1)
        acc = np.zeros(panels + 1)
        for i in range(panels):
            acc[i + 1] = acc[i] + adaptive_simpson(
                self._integrand_scalar, nodes[i], nodes[i + 1]
            )
        acc -= np.interp(self.anchor, nodes, acc)
        self._lookup = CubicSpline(nodes, acc, extrapolate=True)

    def _numerator(self, t, k=0):
        if self.num is None:
            if k == 0:
                return np.ones_like(np.asarray(t, dtype=float))
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.num(t) if k == 0 else self.num.derivative(t, k)

    def _integrand_scalar(self, t):
        return t**self.w * float(self._numerator(t)) / float(self.lam(t))

    def _q(self, t, k=0):
        """k-th derivative of q(t) = t^w * num(t)."""
        w = self.w
        if k == 0:
            return t**w * self._numerator(t)
        if k == 1:
            return w * t ** (w - 1) * self._numerator(t) + t**w * self._numerator(t, 1)
        return (
            w * (w - 1) * t ** (w - 2) * self._numerator(t)
            + 2.0 * w * t ** (w - 1) * self._numerator(t, 1)
            + t**w * self._numerator(t, 2)
        )

    def integrand(self, t):
        return self._q(t) / self.lam(t)

    def integrand_d1(self, t):
        lamv = self.lam(t)
        lamd = self.lam.derivative(t, 1)
        return (self._q(t, 1) * lamv - self._q(t) * lamd) / lamv**2

    def integrand_d2(self, t):
        lamv = self.lam(t)
        lamd = self.lam.derivative(t, 1)
        lamdd = self.lam.derivative(t, 2)
        q, qd, qdd = self._q(t), self._q(t, 1), self._q(t, 2)
        return (
            qdd * lamv**2 - q * lamdd * lamv - 2.0 * qd * lamd * lamv + 2.0 * q * lamd**2
        ) / lamv**3

    def __call__(self, t):
        return self._lookup(t)

    def jet(self, u):
        if not isinstance(u, Jet):
            return self(u)
        t = u.f
        d2 = self.integrand_d1(t) if u.h is not None else None
        d3 = self.integrand_d2(t) if u.t is not None else None
        return lift(u, self(t), self.integrand(t), d2, d3)
