"""Dynamic verification: trajectory integration and coincidence checks.

Fixed-step classical RK4 keeps runs bit-reproducible; step-halving supplies
the error estimate.  The spray-vs-connection check degrades gracefully on
Lagrangians with a singular velocity Hessian: there it verifies the same
coincidence identity premultiplied by the Hessian (the Euler-Lagrange form),
which is algebraically equivalent wherever the Hessian is invertible and is
the only well-defined form where it is not.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateHessianError, IntegrationError
from .fields import DIM, as_points, as_vectors
from .finsler import _spray_blocks, horizontal_residual, spray

__all__ = [
    "Trajectory",
    "ComparisonResult",
    "SprayConnectionResult",
    "VerificationSummary",
    "integrate_autoparallel",
    "integrate_geodesic",
    "compare_trajectories",
    "lagrangian_drift",
    "euler_lagrange_residual",
    "spray_vs_connection",
    "measured_convergence_order",
    "verify_bundle",
    "write_trajectory_csv",
]

BLOWUP_LIMIT = 1e12


@dataclass
class Trajectory:
    """RK4 output: states at s_k = k*step (batch dims allowed)."""

    s: np.ndarray
    x: np.ndarray
    v: np.ndarray
    step: float
    steps: int
    method: str = "rk4"
    truncated: bool = False
    truncation_reason: str = ""

    @property
    def span(self):
        return float(self.s[-1] - self.s[0])


@dataclass
class ComparisonResult:
    max_coordinate_deviation: float
    max_velocity_deviation: float
    parameter_span: float
    n_compared: int


@dataclass
class SprayConnectionResult:
    max_residual: float
    residuals: np.ndarray
    n_singular: int


def _rk4(accel, x0, v0, step, steps, guard=None, stop_reason=""):
    x = as_points(x0).astype(float)
    v = as_vectors(v0).astype(float)
    xs, vs = [x], [v]
    h = float(step)
    truncated = False
    reason = ""
    for _ in range(steps):
        if guard is not None and not np.all(guard(x, v)):
            truncated = True
            reason = stop_reason
            break
        k1x, k1v = v, accel(x, v)
        k2x, k2v = v + 0.5 * h * k1v, accel(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = v + 0.5 * h * k2v, accel(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = v + h * k3v, accel(x + h * k3x, v + h * k3v)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_LIMIT or np.max(
            np.abs(v)
        ) > BLOWUP_LIMIT:
            raise IntegrationError("trajectory blew up past the magnitude limit")
        xs.append(x)
        vs.append(v)
    n = len(xs) - 1
    return Trajectory(
        s=h * np.arange(n + 1),
        x=np.stack(xs),
        v=np.stack(vs),
        step=h,
        steps=n,
        truncated=truncated,
        truncation_reason=reason,
    )


def integrate_autoparallel(conn, x0, v0, step, steps):
    """RK4 on xddot = -Gamma(x) xdot xdot; errors out when leaving the domain."""
    if step <= 0 or steps <= 0:
        raise ConfigError([("integration", "step and steps must be positive")])

    def guard(x, v):
        ok = conn.in_domain(x)
        if not np.all(ok):
            raise IntegrationError("autoparallel left the field domain")
        return True

    return _rk4(conn.autoparallel_acceleration, x0, v0, step, steps, guard=guard)


def integrate_geodesic(lagrangian, x0, v0, step, steps):
    """RK4 on xddot = -2 G(x, xdot); stops at the cone boundary (truncation)."""
    if step <= 0 or steps <= 0:
        raise ConfigError([("integration", "step and steps must be positive")])

    def accel(x, v):
        return -2.0 * spray(lagrangian, x, v, nonlinear=False).coefficients

    return _rk4(
        accel,
        x0,
        v0,
        step,
        steps,
        guard=lagrangian.admissible,
        stop_reason="state left the admissible cone",
    )


def compare_trajectories(t1, t2):
    """Max pointwise coordinate/velocity deviation over the shared steps."""
    n = min(t1.x.shape[0], t2.x.shape[0])
    dx = float(np.max(np.abs(t1.x[:n] - t2.x[:n])))
    dv = float(np.max(np.abs(t1.v[:n] - t2.v[:n])))
    return ComparisonResult(dx, dv, float(t1.s[n - 1]), n)


def lagrangian_drift(lagrangian, trajectory):
    """Max relative drift of L along the trajectory (a first integral)."""
    vals = np.atleast_1d(lagrangian.value(trajectory.x, trajectory.v))
    ref = vals.reshape(vals.shape[0], -1)[0]
    drift = np.abs(vals.reshape(vals.shape[0], -1) - ref)
    return float(np.max(drift / (np.abs(ref) + 1e-300)))


def euler_lagrange_residual(lagrangian, conn, x, v):
    """Euler-Lagrange defect of the autoparallel flow, with a magnitude scale.

    Computes H_mu - 2 g_mn (Gamma v v)^n where H is the force term of the
    geodesic system; zero exactly when autoparallels extremize L, whether or
    not g is invertible.
    """
    x, v = np.atleast_2d(as_points(x)), np.atleast_2d(as_vectors(v))
    _, gmat, hvec = _spray_blocks(lagrangian, x, v, order=2, check_det=False)
    gvv = -conn.autoparallel_acceleration(x, v)
    g_gvv = 2.0 * np.einsum("...mn,...n->...m", gmat, gvv)
    resid = hvec - g_gvv
    scale = 1.0 + np.max(np.abs(hvec), axis=-1) + np.max(np.abs(g_gvv), axis=-1)
    return resid, scale


def spray_vs_connection(lagrangian, conn, x, v, hessian_floor=1e-9):
    """Coincidence residual between 2G and Gamma v v over sample states.

    Regular states use |2G - Gamma v v| / (1 + |Gamma v v|); states whose
    Hessian determinant falls under ``hessian_floor`` use the equivalent
    premultiplied identity |2 g Gamma v v - H| / (1 + |H| + |2 g Gamma v v|).
    """
    x, v = np.atleast_2d(as_points(x)), np.atleast_2d(as_vectors(v))
    _, gmat, hvec = _spray_blocks(lagrangian, x, v, order=2, check_det=False)
    gvv = -conn.autoparallel_acceleration(x, v)
    dets = np.abs(np.linalg.det(gmat))
    # Hadamard-normalized determinant: scale-free singularity detection
    row_norms = np.linalg.norm(gmat, axis=-1)
    hadamard = np.prod(np.maximum(row_norms, 1e-300), axis=-1)
    singular = dets < hessian_floor * hadamard
    res = np.empty(x.shape[0])
    if np.any(~singular):
        g_reg = gmat[~singular]
        coeffs = 0.25 * np.linalg.solve(g_reg, hvec[~singular][..., None])[..., 0]
        num = np.max(np.abs(2.0 * coeffs - gvv[~singular]), axis=-1)
        den = 1.0 + np.linalg.norm(gvv[~singular], axis=-1)
        res[~singular] = num / den
    if np.any(singular):
        lhs = 2.0 * np.einsum("...mn,...n->...m", gmat[singular], gvv[singular])
        num = np.max(np.abs(lhs - hvec[singular]), axis=-1)
        prod_scale = 2.0 * np.max(
            np.einsum("...mn,...n->...m", np.abs(gmat[singular]), np.abs(gvv[singular])),
            axis=-1,
        )
        den = 1.0 + np.max(np.abs(hvec[singular]), axis=-1) + prod_scale
        res[singular] = num / den
    return SprayConnectionResult(
        max_residual=float(res.max()),
        residuals=res,
        n_singular=int(singular.sum()),
    )


def measured_convergence_order(integrate, step, steps):
    """Observed RK4 order from endpoint deviations at step, step/2, step/4."""
    t1 = integrate(step, steps)
    t2 = integrate(step / 2.0, 2 * steps)
    t4 = integrate(step / 4.0, 4 * steps)
    d12 = np.max(np.abs(t1.x[-1] - t2.x[-1]))
    d24 = np.max(np.abs(t2.x[-1] - t4.x[-1]))
    if d24 == 0.0:
        return float("inf")
    return float(np.log2(d12 / d24))


@dataclass
class VerificationSummary:
    checks: dict
    comparisons: list
    passed: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "checks": self.checks,
            "comparisons": [
                {
                    "max_coordinate_deviation": c.max_coordinate_deviation,
                    "max_velocity_deviation": c.max_velocity_deviation,
                    "parameter_span": c.parameter_span,
                    "n_compared": c.n_compared,
                }
                for c in self.comparisons
            ],
            "passed": self.passed,
            "notes": list(self.notes),
        }


DEFAULT_VERIFY_TOLERANCES = {
    "delta_residual": 1e-7,
    "spray_residual": 1e-7,
    "coincidence": 1e-6,
    "conservation": 1e-8,
    "euler_lagrange": 1e-9,
}


def verify_bundle(
    lagrangian,
    conn,
    states,
    initial_conditions,
    step=1e-3,
    steps=1000,
    tolerances=None,
):
    """Residual sampling plus paired integration from shared initial data.

    ``states`` is an (xs, vs) pair of admissible samples; each initial
    condition is an (x0, v0) pair.  On a degenerate-Hessian Lagrangian the
    geodesic side of the pairing is undefined, so the bundle verifies the
    Euler-Lagrange defect and L-conservation along the autoparallel instead.
    """
    tol = dict(DEFAULT_VERIFY_TOLERANCES)
    tol.update(tolerances or {})
    xs, vs = states
    xs, vs = np.atleast_2d(xs), np.atleast_2d(vs)
    if xs.shape[0] == 0:
        raise ConfigError([("samples", "empty sample set")])
    if len(initial_conditions) == 0:
        raise ConfigError([("initial_conditions", "at least one is required")])
    notes = []
    checks = {}

    delta, scale = horizontal_residual(lagrangian, conn, xs, vs)
    checks["delta_residual"] = {
        "value": float(np.max(np.abs(delta) / scale[..., None])),
        "tolerance": tol["delta_residual"],
    }
    checks["spray_residual"] = {
        "value": spray_vs_connection(lagrangian, conn, xs, vs).max_residual,
        "tolerance": tol["spray_residual"],
    }

    comparisons = []
    coincidence = []
    conservation = []
    el_resid = []
    for x0, v0 in initial_conditions:
        auto = integrate_autoparallel(conn, x0, v0, step, steps)
        try:
            geo = integrate_geodesic(lagrangian, x0, v0, step, steps)
            comparisons.append(compare_trajectories(auto, geo))
            coincidence.append(comparisons[-1].max_coordinate_deviation)
            conservation.append(lagrangian_drift(lagrangian, geo))
        except DegenerateHessianError:
            resid, rscale = euler_lagrange_residual(
                lagrangian, conn, auto.x, auto.v
            )
            el_resid.append(float(np.max(np.abs(resid) / rscale[..., None])))
            conservation.append(lagrangian_drift(lagrangian, auto))
            notes.append(
                "geodesic flow undefined (degenerate Hessian); checked the "
                "Euler-Lagrange defect along the autoparallel instead"
            )
    if coincidence:
        checks["coincidence"] = {
            "value": float(max(coincidence)),
            "tolerance": tol["coincidence"],
        }
    if el_resid:
        checks["euler_lagrange"] = {
            "value": float(max(el_resid)),
            "tolerance": tol["euler_lagrange"],
        }
    checks["conservation"] = {
        "value": float(max(conservation)),
        "tolerance": tol["conservation"],
    }
    for entry in checks.values():
        entry["passed"] = bool(entry["value"] < entry["tolerance"])
    passed = all(entry["passed"] for entry in checks.values())
    return VerificationSummary(checks, comparisons, passed, notes)


def write_trajectory_csv(trajectory, path):
    """CSV with columns s, x0..x3, v0..v3 (single-trajectory shape only)."""
    x = trajectory.x
    if x.ndim != 2:
        raise ValueError("CSV export expects an unbatched trajectory")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["s"] + [f"x{i}" for i in range(DIM)] + [f"v{i}" for i in range(DIM)])
        for k in range(x.shape[0]):
            writer.writerow(
                [repr(float(trajectory.s[k]))]
                + [repr(float(c)) for c in trajectory.x[k]]
                + [repr(float(c)) for c in trajectory.v[k]]
            )
