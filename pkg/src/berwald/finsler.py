"""Finsler Lagrangians and their canonical machinery.

A Lagrangian here is an evaluator L(x, xdot) on an admissible cone, written
in jet arithmetic so that velocity Hessians, spray coefficients and
horizontal derivatives all come out of the same code path with exact
derivatives.  The two constructed families (norm/one-form combinations with
and without extra dependence on the one-form norm) live here alongside the
generic diagnostics: quadraticity of the spray and nondegeneracy scans.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateHessianError,
    InadmissibleError,
    InsufficientDirectionsError,
)
from .fields import DIM, as_points, as_vectors
from .jets import Jet, jexp, jpow, jsqrt, seed_vector, solve_jet_system, value_of


def _reciprocal(x):
    return x.reciprocal() if isinstance(x, Jet) else 1.0 / x

__all__ = [
    "FinslerLagrangian",
    "QuadraticLagrangian",
    "SumLagrangian",
    "AlphaBetaLagrangian",
    "GeneralizedLagrangian",
    "SprayResult",
    "BerwaldFit",
    "NondegeneracyScan",
    "lagrangian_value",
    "metric_tensor",
    "spray",
    "geodesic_acceleration",
    "horizontal_derivative",
    "horizontal_residual",
    "berwald_quadraticity",
    "nondegeneracy_scan",
]

HESSIAN_DET_TOL = 1e-12
BERWALD_RESIDUAL_THRESHOLD = 1e-6


def _contract_metric(rows, u, w):
    """sum_ij rows[i][j] * u[i] * w[j], skipping exact-zero entries."""
    acc = None
    for i in range(DIM):
        for j in range(DIM):
            e = rows[i][j]
            if isinstance(e, (int, float)) and e == 0.0:
                continue
            term = e * u[i] * w[j]
            acc = term if acc is None else acc + term
    return acc


def _contract_form(comps, u):
    acc = None
    for i in range(DIM):
        e = comps[i]
        if isinstance(e, (int, float)) and e == 0.0:
            continue
        term = e * u[i] if not isinstance(e, (int, float)) else u[i] * e
        acc = term if acc is None else acc + term
    return acc


class FinslerLagrangian:
    """Base class: positively 2-homogeneous evaluator on a conic domain."""

    kappa = 1.0

    def _evaluate(self, x_entries, v_entries):
        raise NotImplementedError

    def admissible(self, x, v):
        raise NotImplementedError

    def describe(self):
        return {"family": type(self).__name__}

    def value(self, x, v):
        x, v = as_points(x), as_vectors(v)
        out = self._evaluate(
            [x[..., i] for i in range(DIM)], [v[..., i] for i in range(DIM)]
        )
        return value_of(out)


class QuadraticLagrangian(FinslerLagrangian):
    """L = a_mn(x) xdot^m xdot^n; the pseudo-Riemannian baseline."""

    def __init__(self, metric, kappa=1.0):
        self.metric = metric
        self.kappa = float(kappa)

    def _evaluate(self, x_entries, v_entries):
        rows = self.metric.entries(x_entries)
        out = _contract_metric(rows, v_entries, v_entries)
        return out if self.kappa == 1.0 else self.kappa * out

    def admissible(self, x, v):
        x, v = as_points(x), as_vectors(v)
        ok = np.sum(v * v, axis=-1) > 0
        return ok & self.metric.in_domain(x)

    def describe(self):
        return {
            "family": "quadratic",
            "formula": "kappa * A",
            "constants": {"kappa": self.kappa},
        }


class SumLagrangian(FinslerLagrangian):
    """Pointwise sum of 2-homogeneous Lagrangians (used for controls)."""

    def __init__(self, parts):
        self.parts = list(parts)

    def _evaluate(self, x_entries, v_entries):
        acc = None
        for part in self.parts:
            term = part._evaluate(x_entries, v_entries)
            acc = term if acc is None else acc + term
        return acc

    def admissible(self, x, v):
        ok = None
        for part in self.parts:
            m = part.admissible(x, v)
            ok = m if ok is None else ok & m
        return ok

    def describe(self):
        return {"family": "sum", "parts": [p.describe() for p in self.parts]}


ALPHA_BETA_CASES = ("power-law", "m-kropina", "riemannian", "exponential")


class AlphaBetaLagrangian(FinslerLagrangian):
    """L = kappa * A * phi(s) with s = B^2 / A.

    Cases: ``power-law`` (phi = s^lam), ``m-kropina``
    (phi = s^e (s+tau)^(1-e) with e = c1/(tau c3)), ``riemannian``
    (phi = tau + s) and ``exponential`` (phi = s exp(-c1/(c3 s))).
    """

    def __init__(
        self,
        metric,
        oneform,
        case,
        constants,
        kappa=1.0,
        cone_sign=1,
        delta_a=1e-6,
        delta_b=1e-6,
    ):
        if case not in ALPHA_BETA_CASES:
            raise ValueError(f"case must be one of {ALPHA_BETA_CASES}")
        if kappa == 0.0:
            raise ValueError("kappa must be nonzero")
        self.metric = metric
        self.oneform = oneform
        self.case = case
        self.constants = dict(constants)
        self.kappa = float(kappa)
        self.cone_sign = int(cone_sign)
        self.delta_a = float(delta_a)
        self.delta_b = float(delta_b)
        if case == "power-law":
            lam = self.constants["lambda"]
            self._fractional = abs(lam - round(lam)) > 1e-12
            self._needs_b = self._fractional or lam < 0
            if self._fractional and self.cone_sign < 0:
                raise ValueError(
                    "fractional power-law exponents need the positive-A cone"
                )
        elif case == "riemannian":
            self._fractional = False
            self._needs_b = False
        else:
            self._fractional = case == "m-kropina"
            self._needs_b = True
            if case == "m-kropina" and self.cone_sign < 0:
                raise ValueError("the m-Kropina case needs the positive-A cone")

    def _phi(self, s):
        c = self.constants
        if self.case == "power-law":
            return jpow(s, c["lambda"])
        if self.case == "m-kropina":
            e = c["c1"] / (c["tau"] * c["c3"])
            return jpow(s, e) * jpow(s + c["tau"], 1.0 - e)
        if self.case == "riemannian":
            return c["tau"] + s
        # exponential: s * exp(-c1 A / (c3 B^2)), written pole-free in s
        return s * jexp((-c["c1"] / c["c3"]) * s.reciprocal())

    def _evaluate(self, x_entries, v_entries):
        a_rows = self.metric.entries(x_entries)
        b_comps = self.oneform.entries(x_entries)
        big_a = _contract_metric(a_rows, v_entries, v_entries)
        big_b = _contract_form(b_comps, v_entries)
        s = (big_b * big_b) / big_a
        return self.kappa * big_a * self._phi(s)

    def admissible(self, x, v):
        x, v = as_points(x), as_vectors(v)
        a = self.metric.components(x)
        b = self.oneform.components(x)
        big_a = np.einsum("...mn,...m,...n->...", a, v, v)
        big_b = np.einsum("...m,...m->...", b, v)
        v2 = np.sum(v * v, axis=-1)
        ok = self.cone_sign * big_a > self.delta_a * v2
        if self._needs_b:
            b2 = np.sum(b * b, axis=-1)
            ok &= np.abs(big_b) > self.delta_b * np.sqrt(v2 * b2)
        if self.case == "m-kropina":
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.where(big_a != 0.0, big_b**2 / big_a, np.inf)
            ok &= s + self.constants["tau"] > self.delta_a
        return ok & self.metric.in_domain(x) & self.oneform.in_domain(x)

    def describe(self):
        c = self.constants
        formulas = {
            "power-law": f"{self.kappa}*A*s^{c.get('lambda')}",
            "m-kropina": "kappa*A*s^(c1/(tau*c3))*(s+tau)^(1-c1/(tau*c3))",
            "riemannian": f"{self.kappa}*({c.get('tau')}*A + B^2)",
            "exponential": "kappa*B^2*exp(-c1/(c3*s))",
        }
        return {
            "family": "alpha-beta",
            "case": self.case,
            "constants": {**c, "kappa": self.kappa},
            "cone_sign": self.cone_sign,
            "formula": formulas[self.case],
        }


GENERALIZED_CASES = ("i", "ii-a", "ii-b", "ii-c")


class GeneralizedLagrangian(FinslerLagrangian):
    """L = kappa * A * phi(nb, p) with nb the one-form norm and p = U^2/A.

    Cases by coefficient pattern (c3 = 0 unless noted):

    - ``i`` (c3 != 0, c1 = c2 = 0): phi = (p/eps) e^g F(e^-g (eps-p)/(p eps))
      with g = c3 eps * Ig(nb), Ig the nb^3/lam antiderivative; F free.
    - ``ii-a`` (c2 = 0, c1 != 0): phi = e^(c1 rho(nb)) F(p) with F free.
    - ``ii-b``/``ii-c`` (c2 != 0): phi = K(nb) (D0(nb) + nb c2 p), the
      conformal-quadratic solution, with D0 = tau + eps nb (c1/2 - c2) and
      K = e^(2 c1 rho + 2 eps sigma) / nb, sigma the tau/lam antiderivative.
      The two tags split on c1 = 2 c2, where the tau family admits an extra
      closed-form constant.

    Norm-dependent factors run through fitted profiles; the free functions
    must be jet-capable.
    """

    def __init__(
        self,
        metric,
        oneform,
        case,
        constants,
        epsilon,
        rho=None,
        gint=None,
        tau_model=None,
        free_function=None,
        kappa=1.0,
        cone_sign=1,
        delta_a=1e-6,
        delta_b=1e-6,
        delta_u=1e-6,
    ):
        if case not in GENERALIZED_CASES:
            raise ValueError(f"case must be one of {GENERALIZED_CASES}")
        if epsilon not in (-1, 1):
            raise ValueError("epsilon must be +1 or -1")
        if case == "i":
            if free_function is None:
                raise ValueError("case 'i' needs a free function of one variable")
            if gint is None:
                raise ValueError("case 'i' needs the cubic-weight profile integral")
        if case == "ii-a" and (rho is None or free_function is None):
            raise ValueError("case 'ii-a' needs rho and a free function of p")
        if case in ("ii-b", "ii-c") and (rho is None or tau_model is None):
            raise ValueError(f"case {case!r} needs rho and a tau model")
        self.metric = metric
        self.oneform = oneform
        self.case = case
        self.constants = dict(constants)
        self.epsilon = int(epsilon)
        self.rho = rho
        self.gint = gint
        self.tau_model = tau_model
        self.free_function = free_function
        self.kappa = float(kappa)
        self.cone_sign = int(cone_sign)
        self.delta_a = float(delta_a)
        self.delta_b = float(delta_b)
        self.delta_u = float(delta_u)

    def phi_of(self, nb, p):
        """phi as a function of the norm and p; nb, p may be jets."""
        eps = float(self.epsilon)
        c = self.constants
        if self.case == "i":
            g = (c["c3"] * eps) * self.gint.jet(nb)
            expg = jexp(g)
            z = jexp(-g) * (eps - p) * _reciprocal(p * eps)
            return (p / eps) * expg * self.free_function(z)
        r = self.rho.jet(nb)
        if self.case == "ii-a":
            return jexp(c["c1"] * r) * self.free_function(p)
        # ii-b / ii-c: conformal-quadratic form
        c1, c2 = c["c1"], c["c2"]
        tau = self.tau_model.tau(nb)
        d0 = tau + (eps * (0.5 * c1 - c2)) * nb
        big_k = jexp((2.0 * c1) * r + (2.0 * eps) * self.tau_model.sigma(nb)) * _reciprocal(nb)
        return big_k * (d0 + c2 * nb * p)

    def _norm_and_u_contraction(self, x_entries, v_entries):
        a_rows = self.metric.entries(x_entries)
        b_comps = self.oneform.entries(x_entries)
        big_a = _contract_metric(a_rows, v_entries, v_entries)
        big_b = _contract_form(b_comps, v_entries)
        b_up = solve_jet_system(a_rows, b_comps)
        bb = _contract_form(b_comps, b_up)
        nb = jsqrt(float(self.epsilon) * bb)
        return big_a, big_b, nb

    def _evaluate(self, x_entries, v_entries):
        big_a, big_b, nb = self._norm_and_u_contraction(x_entries, v_entries)
        big_u = big_b / nb
        p = (big_u * big_u) / big_a
        return self.kappa * big_a * self.phi_of(nb, p)

    def admissible(self, x, v):
        x, v = as_points(x), as_vectors(v)
        a = self.metric.components(x)
        b = self.oneform.components(x)
        ainv = np.linalg.inv(a)
        bb = np.einsum("...mn,...m,...n->...", ainv, b, b)
        big_a = np.einsum("...mn,...m,...n->...", a, v, v)
        v2 = np.sum(v * v, axis=-1)
        b2 = np.sum(b * b, axis=-1)
        ok = self.cone_sign * big_a > self.delta_a * v2
        ok &= self.epsilon * bb > self.delta_b * b2
        if self.case == "i":
            big_b = np.einsum("...m,...m->...", b, v)
            ok &= np.abs(big_b) > self.delta_u * np.sqrt(v2 * b2)
        return ok & self.metric.in_domain(x) & self.oneform.in_domain(x)

    def describe(self):
        formulas = {
            "i": "(p/eps)*exp(c3*eps*Ig(|b|))*F(exp(-c3*eps*Ig(|b|))*(eps-p)/(p*eps))",
            "ii-a": "exp(c1*rho(|b|))*F(p)",
            "ii-b": "K(|b|)*(D0(|b|) + |b|*c2*p), K = exp(2*c1*rho + 2*eps*sigma)/|b|, "
            "D0 = tau + eps*|b|*(c1/2 - c2)",
            "ii-c": "K(|b|)*(D0(|b|) + |b|*c2*p), K = exp(2*c1*rho + 2*eps*sigma)/|b|, "
            "D0 = tau + eps*|b|*(c1/2 - c2)",
        }
        out = {
            "family": "generalized-alpha-beta",
            "case": self.case,
            "constants": {**self.constants, "kappa": self.kappa},
            "epsilon": self.epsilon,
            "cone_sign": self.cone_sign,
            "formula": "A * " + formulas[self.case],
        }
        if self.free_function is not None:
            out["free_function"] = {
                "name": self.free_function.name,
                "params": self.free_function.params,
                "formula": self.free_function.formula,
            }
        return out


# -- canonical machinery -----------------------------------------------------


@dataclass
class SprayResult:
    """Spray coefficients G^m and, optionally, N^n_m = d G^n / d xdot^m."""

    coefficients: np.ndarray
    nonlinear: np.ndarray | None = None


def _require_admissible(lagrangian, x, v):
    ok = lagrangian.admissible(x, v)
    if not np.all(ok):
        bad = int(np.sum(~ok))
        raise InadmissibleError(f"{bad} point(s) outside the admissible cone")


def lagrangian_value(lagrangian, x, v):
    _require_admissible(lagrangian, x, v)
    return lagrangian.value(x, v)


def metric_tensor(lagrangian, x, v):
    """g_mn(x, xdot) = half the velocity Hessian of L; exactly symmetric."""
    x, v = as_points(x), as_vectors(v)
    _require_admissible(lagrangian, x, v)
    vj = seed_vector(v, n=DIM, order=2)
    out = lagrangian._evaluate([x[..., i] for i in range(DIM)], vj)
    return 0.5 * out.h


def _spray_blocks(lagrangian, x, v, order, check_det=True):
    xj = seed_vector(x, n=2 * DIM, order=order, offset=0)
    vj = seed_vector(v, n=2 * DIM, order=order, offset=DIM)
    out = lagrangian._evaluate(xj, vj)
    dx = out.g[..., :DIM]
    gmat = 0.5 * out.h[..., DIM:, DIM:]
    mixed = out.h[..., :DIM, DIM:]  # [sigma, nu] = d_sigma ddot_nu L
    hvec = np.einsum("...s,...sn->...n", v, mixed) - dx
    if check_det:
        det = np.linalg.det(gmat)
        if np.any(np.abs(det) < HESSIAN_DET_TOL):
            raise DegenerateHessianError(
                f"|det g| fell below {HESSIAN_DET_TOL:g} "
                f"(min {np.min(np.abs(det)):.3e})"
            )
    return out, gmat, hvec


def spray(lagrangian, x, v, nonlinear=True):
    """Spray coefficients G^m = (1/4) g^{mn} (xdot^s d_s ddot_n L - d_n L).

    With ``nonlinear=True`` the result also carries N^n_m = ddot_m G^n,
    computed from third-order jets (no finite differencing).
    """
    x, v = as_points(x), as_vectors(v)
    _require_admissible(lagrangian, x, v)
    order = 3 if nonlinear else 2
    out, gmat, hvec = _spray_blocks(lagrangian, x, v, order)
    ginv = np.linalg.inv(gmat)
    coeffs = 0.25 * np.einsum("...mn,...n->...m", ginv, hvec)
    if not nonlinear:
        return SprayResult(coeffs, None)
    t = out.t
    dgmat = 0.5 * t[..., DIM:, DIM:, DIM:]  # [k, m, n] = ddot_k g_mn
    dginv = -np.einsum("...ma,...kab,...bn->...kmn", ginv, dgmat, ginv)
    h = out.h
    dhvec = (
        h[..., :DIM, DIM:]
        - np.swapaxes(h[..., :DIM, DIM:], -1, -2)
        + np.einsum("...s,...snk->...kn", v, t[..., :DIM, DIM:, DIM:])
    )  # [k, n] = ddot_k H_n
    nonlin = 0.25 * (
        np.einsum("...kmn,...n->...mk", dginv, hvec)
        + np.einsum("...mn,...kn->...mk", ginv, dhvec)
    )
    return SprayResult(coeffs, nonlin)


def geodesic_acceleration(lagrangian, x, v):
    """-2 G^m, the second-order geodesic right-hand side."""
    return -2.0 * spray(lagrangian, x, v, nonlinear=False).coefficients


def horizontal_derivative(lagrangian, connection, x, v):
    """delta_m L = d_m L - Gamma^n_mr xdot^r ddot_n L for the given connection."""
    return horizontal_residual(lagrangian, connection, x, v)[0]


def horizontal_residual(lagrangian, connection, x, v):
    """Horizontal derivative together with a per-sample magnitude scale.

    The scale sums the magnitudes of the two terms being cancelled plus |L|,
    so a relative residual |delta_m L| / scale is meaningful even where one
    term vanishes.
    """
    x, v = as_points(x), as_vectors(v)
    _require_admissible(lagrangian, x, v)
    xj = seed_vector(x, n=2 * DIM, order=1, offset=0)
    vj = seed_vector(v, n=2 * DIM, order=1, offset=DIM)
    out = lagrangian._evaluate(xj, vj)
    dx = out.g[..., :DIM]
    dv = out.g[..., DIM:]
    gamma = connection.coefficients(x)
    nlin = np.einsum("...nmr,...r->...nm", gamma, v)
    delta = dx - np.einsum("...nm,...n->...m", nlin, dv)
    scale = (
        np.abs(value_of(out.f))
        + np.max(np.abs(dx), axis=-1)
        + np.max(np.einsum("...nm,...n->...m", np.abs(nlin), np.abs(dv)), axis=-1)
    )
    return delta, scale


_SYM_PAIRS = [(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


@dataclass
class BerwaldFit:
    """Quadratic-form fit of the spray over sampled directions."""

    residuals: np.ndarray          # per-sample max relative fit residual
    fitted_gamma: np.ndarray       # (N, 4, 4, 4) symmetric in the lower pair
    max_residual: float
    threshold: float = BERWALD_RESIDUAL_THRESHOLD
    directions_used: list = field(default_factory=list)

    @property
    def is_quadratic(self):
        return bool(self.max_residual < self.threshold)


def berwald_quadraticity(
    lagrangian,
    points,
    n_directions=20,
    rng=None,
    min_usable=10,
    threshold=BERWALD_RESIDUAL_THRESHOLD,
):
    """Fit 2G(x, .) by a quadratic form in the velocity at each point.

    Returns the per-point relative fit residual and the fitted connection
    coefficients.  Raises InsufficientDirectionsError when fewer than
    ``min_usable`` admissible directions can be found at some point.
    """
    points = as_points(points)
    if points.ndim == 1:
        points = points[None, :]
    rng = np.random.default_rng(0) if rng is None else rng
    residuals = []
    gammas = []
    used = []
    for x in points:
        dirs = None
        for pool in (n_directions, 4 * n_directions):
            cand = rng.standard_normal((pool, DIM))
            cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
            mask = lagrangian.admissible(np.broadcast_to(x, (pool, DIM)), cand)
            if int(mask.sum()) >= min_usable:
                dirs = cand[mask]
                break
        if dirs is None:
            raise InsufficientDirectionsError(
                f"fewer than {min_usable} admissible directions at {x.tolist()}"
            )
        xs = np.broadcast_to(x, dirs.shape)
        y = 2.0 * spray(lagrangian, xs, dirs, nonlinear=False).coefficients
        design = np.empty((dirs.shape[0], len(_SYM_PAIRS)))
        for col, (i, j) in enumerate(_SYM_PAIRS):
            design[:, col] = dirs[:, i] * dirs[:, j] * (1.0 if i == j else 2.0)
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        pred = design @ coef
        denom = max(float(np.max(np.abs(y))), 1e-12)
        residuals.append(float(np.max(np.abs(y - pred))) / denom)
        gamma = np.zeros((DIM, DIM, DIM))
        for col, (i, j) in enumerate(_SYM_PAIRS):
            gamma[:, i, j] = coef[col]
            gamma[:, j, i] = coef[col]
        gammas.append(gamma)
        used.append(dirs.shape[0])
    residuals = np.array(residuals)
    return BerwaldFit(
        residuals=residuals,
        fitted_gamma=np.array(gammas),
        max_residual=float(residuals.max()),
        threshold=threshold,
        directions_used=used,
    )


@dataclass
class NondegeneracyScan:
    min_abs_det: float
    signature_counts: dict
    determinants: np.ndarray

    @property
    def is_nondegenerate(self):
        return self.min_abs_det > HESSIAN_DET_TOL


def nondegeneracy_scan(lagrangian, x, v):
    """min |det g| over the samples plus an eigenvalue-sign histogram."""
    g = metric_tensor(lagrangian, x, v)
    dets = np.linalg.det(g)
    eig = np.linalg.eigvalsh(g)
    patterns = ["(" + "".join("+" if e > 0 else "-" for e in row) + ")" for row in np.atleast_2d(eig)]
    return NondegeneracyScan(
        min_abs_det=float(np.min(np.abs(dets))),
        signature_counts=dict(Counter(patterns)),
        determinants=np.atleast_1d(dets),
    )
