"""Forward-mode jets: truncated Taylor propagation through field evaluators.

A :class:`Jet` carries the value of a scalar expression together with its
partial derivatives up to order 1, 2 or 3 with respect to ``n`` seed
variables.  Coefficient blocks are numpy arrays, so a jet can hold a whole
batch of evaluation points at once (the value block has an arbitrary batch
shape ``S``, the gradient ``S+(n,)``, and so on).

All arithmetic needed by the field catalog and the Lagrangian evaluators is
provided: ``+ - * /``, integer and real powers, ``exp``, ``log``, ``sqrt``,
plus a generic chain rule (:func:`lift`) for custom scalar functions such as
interpolated profiles.  Derivatives are exact to machine precision; central
finite differences appear in this package only inside tests, as an oracle.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Jet",
    "seed",
    "seed_vector",
    "lift",
    "jexp",
    "jlog",
    "jsqrt",
    "jpow",
    "value_of",
    "grad_of",
    "solve_jet_system",
]


def _as_const(x):
    return x.f if isinstance(x, Jet) else x


class Jet:
    """Taylor coefficients of one scalar expression in ``n`` seed variables."""

    __slots__ = ("f", "g", "h", "t")

    # keep numpy from absorbing jets into object arrays: defer to __r*__ ops
    __array_ufunc__ = None

    def __init__(self, f, g, h=None, t=None):
        self.f = f
        self.g = g
        self.h = h
        self.t = t

    @property
    def n(self):
        return self.g.shape[-1]

    @property
    def order(self):
        if self.t is not None:
            return 3
        if self.h is not None:
            return 2
        return 1

    def __repr__(self):
        return f"Jet(order={self.order}, n={self.n}, f={self.f!r})"

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            h = self.h + other.h if self.h is not None else None
            t = self.t + other.t if self.t is not None else None
            return Jet(self.f + other.f, self.g + other.g, h, t)
        return Jet(self.f + other, self.g, self.h, self.t)

    __radd__ = __add__

    def __neg__(self):
        return Jet(
            -self.f,
            -self.g,
            None if self.h is None else -self.h,
            None if self.t is None else -self.t,
        )

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            k = np.asarray(other)
            ke = k[..., None]
            h = None if self.h is None else k[..., None, None] * self.h
            t = None if self.t is None else k[..., None, None, None] * self.t
            return Jet(self.f * k, ke * self.g, h, t)
        a, b = self, other
        f = a.f * b.f
        af = np.asarray(a.f)[..., None]
        bf = np.asarray(b.f)[..., None]
        g = af * b.g + bf * a.g
        h = t = None
        if a.h is not None:
            cross = a.g[..., :, None] * b.g[..., None, :]
            h = (
                af[..., None] * b.h
                + bf[..., None] * a.h
                + cross
                + np.swapaxes(cross, -1, -2)
            )
            if a.t is not None:
                t = (
                    af[..., None, None] * b.t
                    + bf[..., None, None] * a.t
                    + _sym_gh(a.g, b.h)
                    + _sym_gh(b.g, a.h)
                )
        return Jet(f, g, h, t)

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.f
        return lift(self, 1.0 / v, -1.0 / v**2, 2.0 / v**3, -6.0 / v**4)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        return jpow(self, exponent)


def _sym_gh(g, h):
    """Symmetrized grad x hess contribution to a third-order block."""
    t1 = g[..., :, None, None] * h[..., None, :, :]
    t2 = g[..., None, :, None] * h[..., :, None, :]
    t3 = g[..., None, None, :] * h[..., :, :, None]
    return t1 + t2 + t3


def lift(u, f0, f1, f2=None, f3=None):
    """Chain rule: apply a scalar function with known derivatives to a jet.

    ``f0 .. f3`` are the function value and derivatives evaluated at ``u.f``
    (arrays broadcastable against the batch shape).  ``f2``/``f3`` may be
    omitted for low-order jets.
    """
    if not isinstance(u, Jet):
        return f0
    f1 = np.asarray(f1)
    g = f1[..., None] * u.g
    h = t = None
    if u.h is not None:
        if f2 is None:
            raise ValueError("second derivative required for an order-2 jet")
        f2 = np.asarray(f2)
        gg = u.g[..., :, None] * u.g[..., None, :]
        h = f1[..., None, None] * u.h + f2[..., None, None] * gg
        if u.t is not None:
            if f3 is None:
                raise ValueError("third derivative required for an order-3 jet")
            f3 = np.asarray(f3)
            ggg = gg[..., :, :, None] * u.g[..., None, None, :]
            t = (
                f1[..., None, None, None] * u.t
                + f2[..., None, None, None] * _sym_gh(u.g, u.h)
                + f3[..., None, None, None] * ggg
            )
    return Jet(f0, g, h, t)


def jexp(u):
    if not isinstance(u, Jet):
        return np.exp(u)
    e = np.exp(u.f)
    return lift(u, e, e, e, e)


def jlog(u):
    if not isinstance(u, Jet):
        return np.log(u)
    v = u.f
    return lift(u, np.log(v), 1.0 / v, -1.0 / v**2, 2.0 / v**3)


def jsqrt(u):
    if not isinstance(u, Jet):
        return np.sqrt(u)
    r = np.sqrt(u.f)
    return lift(u, r, 0.5 / r, -0.25 / r**3, 0.375 / r**5)


def _powi(u, k):
    """Integer power by binary exponentiation; valid for any sign of base."""
    if k == 0:
        return np.ones_like(np.asarray(_as_const(u), dtype=float))
    if k < 0:
        return _powi(u.reciprocal() if isinstance(u, Jet) else 1.0 / u, -k)
    out = None
    base = u
    while k:
        if k & 1:
            out = base if out is None else out * base
        k >>= 1
        if k:
            base = base * base
    return out


def jpow(u, exponent):
    """``u ** exponent`` for a constant real exponent.

    Integer-valued exponents work for any sign of the base (binary
    exponentiation); fractional exponents require a strictly positive base,
    which the admissibility cones of the Lagrangian families guarantee.
    """
    if not isinstance(u, Jet):
        return np.power(u, exponent)
    k = round(float(exponent))
    if abs(exponent - k) < 1e-12:
        return _powi(u, k)
    v = u.f
    if np.any(v <= 0):
        raise ValueError("fractional power of a non-positive base")
    a = exponent
    f0 = np.power(v, a)
    return lift(
        u,
        f0,
        a * f0 / v,
        a * (a - 1.0) * f0 / v**2,
        a * (a - 1.0) * (a - 2.0) * f0 / v**3,
    )


# -- seeding and unpacking --------------------------------------------------


def seed(value, index, n, order=1):
    """Jet for the seed variable at position ``index`` among ``n``."""
    value = np.asarray(value, dtype=float)
    shape = value.shape
    g = np.zeros(shape + (n,))
    g[..., index] = 1.0
    h = np.zeros(shape + (n, n)) if order >= 2 else None
    t = np.zeros(shape + (n, n, n)) if order >= 3 else None
    return Jet(value, g, h, t)


def seed_vector(values, n, order=1, offset=0):
    """Seed a list of jets from the columns of ``values`` (shape ``S+(k,)``)."""
    values = np.asarray(values, dtype=float)
    k = values.shape[-1]
    return [seed(values[..., i], offset + i, n, order) for i in range(k)]


def value_of(x):
    """Float value block of a jet or plain number."""
    return x.f if isinstance(x, Jet) else np.asarray(x, dtype=float)


def grad_of(x, n, batch_shape=()):
    """Gradient block, or zeros when the entry is a constant."""
    if isinstance(x, Jet):
        return x.g
    return np.zeros(np.shape(np.asarray(x)) + (n,)) if batch_shape == () else np.zeros(
        batch_shape + (n,)
    )


# -- small dense linear solves over jets -------------------------------------


def solve_jet_system(mat, rhs):
    """Solve a small linear system whose entries are jets or constants.

    Gaussian elimination with a pivot order chosen from the value blocks
    (worst case over the batch), so one elimination order serves every batch
    element.  Raises ``np.linalg.LinAlgError`` on a (near-)zero pivot.
    """
    m = len(rhs)
    a = [list(row) for row in mat]
    b = list(rhs)
    for k in range(m):
        scores = []
        for r in range(k, m):
            v = np.abs(np.asarray(value_of(a[r][k])))
            scores.append(float(v.min()) if v.ndim else float(v))
        piv = k + int(np.argmax(scores))
        if scores[piv - k] < 1e-13:
            raise np.linalg.LinAlgError("pivot below tolerance in jet solve")
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            b[k], b[piv] = b[piv], b[k]
        inv_piv = (
            a[k][k].reciprocal() if isinstance(a[k][k], Jet) else 1.0 / a[k][k]
        )
        for i in range(k + 1, m):
            factor = a[i][k] * inv_piv
            for j in range(k + 1, m):
                a[i][j] = a[i][j] - factor * a[k][j]
            b[i] = b[i] - factor * b[k]
            a[i][k] = 0.0
    out = [None] * m
    for i in range(m - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, m):
            acc = acc - a[i][j] * out[j]
        out[i] = acc * (
            a[i][i].reciprocal() if isinstance(a[i][i], Jet) else 1.0 / a[i][i]
        )
    return out
