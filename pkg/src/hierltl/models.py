"""Built-in control systems: the unicycle and two reference systems."""
from __future__ import annotations

import numpy as np

from .intervals import Box
from .reach import BoundsTable, ReachError, SystemModel, constant_bounds
from .trig import cos_max, cos_min, orientation_bounds, sin_max, sin_min

UNICYCLE_STATES = Box([0.0, 0.0, -np.pi], [33.0, 20.0, np.pi])
UNICYCLE_CONTROLS = Box([-0.5, -0.3], [0.5, 0.3])


def unicycle_field(z, u, d):
    theta = z[..., 2]
    v, omega = u[..., 0], u[..., 1]
    return np.stack(
        [v * np.cos(theta) + d[..., 0], v * np.sin(theta) + d[..., 1], omega + d[..., 2] + 0.0 * theta],
        axis=-1,
    )


def unicycle_bounds(zlo, zhi, u, dlo, dhi, t) -> BoundsTable:
    """Jacobian bounds over the headings reachable within the sampling period."""
    zlo, zhi, u = np.asarray(zlo), np.asarray(zhi), np.asarray(u)
    N = zlo.shape[0]
    v, omega = u[:, 0], u[:, 1]
    th_lo, th_hi = orientation_bounds(zlo[:, 2], zhi[:, 2], omega, dlo[2], dhi[2], t)
    smin, smax = sin_min(th_lo, th_hi), sin_max(th_lo, th_hi)
    cmin, cmax = cos_min(th_lo, th_hi), cos_max(th_lo, th_hi)

    az = np.zeros((N, 3, 3))
    bz = np.zeros((N, 3, 3))
    # v >= 0 and v < 0 differ only by exchanging min and max
    az[:, 0, 2] = np.minimum(-v * smax, -v * smin)
    bz[:, 0, 2] = np.maximum(-v * smax, -v * smin)
    az[:, 1, 2] = np.minimum(v * cmin, v * cmax)
    bz[:, 1, 2] = np.maximum(v * cmin, v * cmax)

    au = np.zeros((N, 3, 2))
    bu = np.zeros((N, 3, 2))
    au[:, 0, 0], bu[:, 0, 0] = cmin, cmax
    au[:, 1, 0], bu[:, 1, 0] = smin, smax
    au[:, 2, 1] = bu[:, 2, 1] = 1.0

    ad = np.broadcast_to(np.eye(3), (N, 3, 3))
    return BoundsTable({"z": az, "u": au, "d": ad}, {"z": bz, "u": bu, "d": ad})


def unicycle_model(disturbance: Box | None = None, state_space: Box = UNICYCLE_STATES,
                   control_space: Box = UNICYCLE_CONTROLS) -> SystemModel:
    if disturbance is None:
        disturbance = Box.point([0.0, 0.0, 0.0])
    if disturbance.dim != 3:
        raise ValueError("unicycle disturbance must be a 3D box")
    return SystemModel(3, 2, 3, unicycle_field, unicycle_bounds, state_space, control_space,
                       disturbance, name="unicycle", periodic={2: 2 * np.pi})


def linear_model(A, B, state_space: Box, control_space: Box, disturbance: Box, E=None) -> SystemModel:
    """``dz/dt = A z + B u + E d`` with exact constant Jacobian bounds."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    n, p = B.shape
    q = disturbance.dim
    E = np.eye(n, q) if E is None else np.asarray(E, float)

    def field(z, u, d):
        return (np.einsum("ij,...j->...i", A, z) + np.einsum("ij,...j->...i", B, u)
                + np.einsum("ij,...j->...i", E, d))

    return SystemModel(n, p, q, field, constant_bounds(A, A, B, B, E, E), state_space,
                       control_space, disturbance, name="linear")


def apriori_enclosure(zlo, zhi, t, field_range, max_iter: int = 60):
    """Boxes ``B`` with ``[zlo, zhi] + [0, t] F(B) subset of B`` (rows batched).

    ``field_range(lo, hi)`` must return an interval enclosure of the vector
    field over the box ``[lo, hi]`` (inputs already folded in). Every solution
    on ``[0, t]`` starting in ``[zlo, zhi]`` then stays in ``B``.
    """
    zlo, zhi = np.atleast_2d(zlo).astype(float), np.atleast_2d(zhi).astype(float)
    blo, bhi = zlo.copy(), zhi.copy()
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            flo, fhi = field_range(blo, bhi)
        elo = zlo + t * np.minimum(0.0, flo)
        ehi = zhi + t * np.maximum(0.0, fhi)
        if np.all(elo >= blo) and np.all(ehi <= bhi):
            return blo, bhi
        # next candidate: the one-step image, slightly inflated
        pad = 0.05 * (ehi - elo) + 1e-9
        blo, bhi = elo - pad, ehi + pad
        if not (np.all(np.isfinite(blo)) and np.all(np.isfinite(bhi))):
            break
    raise ReachError("a-priori enclosure did not converge; reduce the horizon")


def _mul_range(alo, ahi, blo, bhi):
    c = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return c.min(0), c.max(0)


def _sq_range(lo, hi):
    m = np.maximum(lo * lo, hi * hi)
    low = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo * lo, hi * hi))
    return low, m


def polynomial_field(z, u, d):
    x1, x2 = z[..., 0], z[..., 1]
    return np.stack(
        [x2 - x1**3 + d[..., 0], 0.5 * x1**2 - x1 * x2 + u[..., 0] + d[..., 1]], axis=-1
    )


def polynomial_model(disturbance: Box | None = None) -> SystemModel:
    """Non-monotone planar system with state-dependent Jacobian bounds.

    ``dx1 = x2 - x1^3 + d1``, ``dx2 = x1^2 / 2 - x1 x2 + u + d2``; the bounds
    are taken over an a-priori enclosure of the reachable tube.
    """
    if disturbance is None:
        disturbance = Box([-0.05, -0.05], [0.05, 0.05])

    def provider(zlo, zhi, u, dlo, dhi, t):
        uu = np.asarray(u)[:, 0:1]

        def field_range(lo, hi):
            c_lo, c_hi = lo[:, 0] ** 3, hi[:, 0] ** 3
            f1lo = lo[:, 1] - c_hi + dlo[0]
            f1hi = hi[:, 1] - c_lo + dhi[0]
            s_lo, s_hi = _sq_range(lo[:, 0], hi[:, 0])
            p_lo, p_hi = _mul_range(lo[:, 0], hi[:, 0], lo[:, 1], hi[:, 1])
            f2lo = 0.5 * s_lo - p_hi + uu[:, 0] + dlo[1]
            f2hi = 0.5 * s_hi - p_lo + uu[:, 0] + dhi[1]
            return np.stack([f1lo, f2lo], -1), np.stack([f1hi, f2hi], -1)

        blo, bhi = apriori_enclosure(zlo, zhi, t, field_range)
        N = blo.shape[0]
        s_lo, s_hi = _sq_range(blo[:, 0], bhi[:, 0])
        az, bz = np.zeros((N, 2, 2)), np.zeros((N, 2, 2))
        az[:, 0, 0], bz[:, 0, 0] = -3 * s_hi, -3 * s_lo
        az[:, 0, 1] = bz[:, 0, 1] = 1.0
        az[:, 1, 0], bz[:, 1, 0] = blo[:, 0] - bhi[:, 1], bhi[:, 0] - blo[:, 1]
        az[:, 1, 1], bz[:, 1, 1] = -bhi[:, 0], -blo[:, 0]
        au, bu = np.zeros((N, 2, 1)), np.zeros((N, 2, 1))
        au[:, 1, 0] = bu[:, 1, 0] = 1.0
        ad = np.broadcast_to(np.eye(2), (N, 2, 2))
        return BoundsTable({"z": az, "u": au, "d": ad}, {"z": bz, "u": bu, "d": ad})

    return SystemModel(2, 1, 2, polynomial_field, provider, Box([-2.0, -2.0], [2.0, 2.0]),
                       Box([-1.0], [1.0]), disturbance, name="polynomial")
