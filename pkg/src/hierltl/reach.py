"""Interval reachability for C^1 systems through a monotone embedding.

The vector field ``f(z, u, d)`` is paired with a decomposition function
``g(z, u, d, z*, u*, d*)`` that is increasing in the plain arguments and
decreasing in the starred ones. Integrating the doubled system
``(g(x, x*), g(x*, x))`` from the two corners of a box gives lower and upper
bounds on every trajectory starting in the box.

Everything here is vectorised over leading batch dimensions so that the
refinement layer can evaluate thousands of (symbol, input) pairs at once.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .intervals import Box

DEFAULT_STEPS = 64


class ReachError(RuntimeError):
    """Raised when reachability cannot be computed (divergence, bad bounds)."""


class Case(enum.IntEnum):
    """Sign pattern of a partial derivative bound ``[a, b]``."""

    POSITIVE = 1  # a >= 0
    MOSTLY_POSITIVE = 2  # a <= 0 <= b, |a| <= |b|
    MOSTLY_NEGATIVE = 3  # a <= 0 <= b, |a| > |b|
    NEGATIVE = 4  # b <= 0


def classify(a: float, b: float) -> Case:
    if a > b:
        raise ValueError(f"invalid derivative bound: a={a} > b={b}")
    return Case(int(classify_array(np.asarray(a), np.asarray(b))))


def classify_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise case codes (1..4). Ties ``|a| == |b|`` go to case 2."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a > b):
        raise ReachError("jacobian bound with a > b")
    out = np.where(np.abs(a) <= np.abs(b), 2, 3)
    out = np.where(b <= 0, 4, out)
    out = np.where(a >= 0, 1, out)
    return out.astype(np.int8)


FAMILIES = ("z", "u", "d")


@dataclass(frozen=True)
class BoundsTable:
    """Jacobian bounds ``df_i/dc_j in [lower[c][..., i, j], upper[c][..., i, j]]``."""

    lower: Mapping[str, np.ndarray]
    upper: Mapping[str, np.ndarray]

    def __post_init__(self):
        for c in FAMILIES:
            a, b = self.lower[c], self.upper[c]
            if a.shape != b.shape:
                raise ValueError(f"bound shapes differ for {c}: {a.shape} vs {b.shape}")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise ReachError(f"non-finite jacobian bound for {c}")
            if np.any(a > b):
                raise ReachError(f"jacobian bound with a > b for {c}")

    @classmethod
    def from_arrays(cls, az, bz, au, bu, ad, bd) -> "BoundsTable":
        f = lambda x: np.asarray(x, dtype=float)  # noqa: E731
        return cls({"z": f(az), "u": f(au), "d": f(ad)}, {"z": f(bz), "u": f(bu), "d": f(bd)})


@dataclass(frozen=True)
class DecompositionSpec:
    cases: Mapping[str, np.ndarray]
    starred: Mapping[str, np.ndarray]  # use c*_j instead of c_j in f_i
    slopes: Mapping[str, np.ndarray]  # alpha^c_ij >= 0


BoundsProvider = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, float], BoundsTable]


@dataclass(frozen=True)
class SystemModel:
    """Control system ``dz/dt = f(z, u, d)`` with a Jacobian bound provider.

    ``field`` must broadcast over leading dimensions. ``jacobian_bounds`` is
    called as ``(zlo, zhi, u, dlo, dhi, t)`` with batched ``zlo, zhi, u`` of
    shape ``(N, .)`` and must return bounds of shape ``(N, n, m)`` that hold
    on every state reachable from ``[zlo, zhi]`` within ``[0, t]``.

    ``periodic`` maps a state dimension to its period; such dimensions are
    wrapped into ``(-period/2, period/2]`` when states are mapped to symbols.
    """

    n: int
    p: int
    q: int
    field: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    jacobian_bounds: BoundsProvider
    state_space: Box
    control_space: Box
    disturbance_space: Box
    name: str = "system"
    periodic: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.state_space.dim != self.n:
            raise ValueError("state_space dimension does not match n")
        if self.control_space.dim != self.p:
            raise ValueError("control_space dimension does not match p")
        if self.disturbance_space.dim != self.q:
            raise ValueError("disturbance_space dimension does not match q")

    def f(self, z, u, d) -> np.ndarray:
        return np.asarray(self.field(np.asarray(z, float), np.asarray(u, float), np.asarray(d, float)))

    def bounds(self, zbox: Box, u, dbox: Box, t: float) -> BoundsTable:
        """Unbatched convenience wrapper around ``jacobian_bounds``."""
        u = np.asarray(u, dtype=float).reshape(1, -1)
        tab = self.jacobian_bounds(zbox.lo[None], zbox.hi[None], u, dbox.lo, dbox.hi, t)
        return BoundsTable({c: tab.lower[c][0] for c in FAMILIES}, {c: tab.upper[c][0] for c in FAMILIES})


def constant_bounds(az, bz, au, bu, ad, bd) -> BoundsProvider:
    """Provider returning the same global bounds for every query."""
    base = BoundsTable.from_arrays(az, bz, au, bu, ad, bd)

    def provider(zlo, zhi, u, dlo, dhi, t):
        N = np.asarray(zlo).shape[0]
        lower = {c: np.broadcast_to(base.lower[c], (N,) + base.lower[c].shape) for c in FAMILIES}
        upper = {c: np.broadcast_to(base.upper[c], (N,) + base.upper[c].shape) for c in FAMILIES}
        return BoundsTable(lower, upper)

    return provider


def build_decomposition(sys: SystemModel, bounds: BoundsTable) -> DecompositionSpec:
    dims = {"z": sys.n, "u": sys.p, "d": sys.q}
    cases, starred, slopes = {}, {}, {}
    for c in FAMILIES:
        a, b = bounds.lower[c], bounds.upper[c]
        if a.shape[-2:] != (sys.n, dims[c]):
            raise ValueError(f"bounds for {c} have shape {a.shape}, expected (..., {sys.n}, {dims[c]})")
        k = classify_array(a, b)
        cases[c] = k
        starred[c] = k >= 3
        slopes[c] = np.where(k == 2, -a, np.where(k == 3, b, 0.0))
    return DecompositionSpec(cases, starred, slopes)


def _assemble(sel: np.ndarray, plain: np.ndarray, star: np.ndarray) -> np.ndarray:
    # row i holds the argument vector fed to f_i
    return np.where(sel, star[..., None, :], plain[..., None, :])


def g_eval(spec: DecompositionSpec, sys: SystemModel, z, u, d, zs, us, ds) -> np.ndarray:
    """Decomposition function; broadcasts over leading dimensions."""
    z, u, d, zs, us, ds = (np.asarray(x, dtype=float) for x in (z, u, d, zs, us, ds))
    Z = _assemble(spec.starred["z"], z, zs)
    U = _assemble(spec.starred["u"], u, us)
    D = _assemble(spec.starred["d"], d, ds)
    vals = np.diagonal(sys.field(Z, U, D), axis1=-2, axis2=-1)
    out = vals + (spec.slopes["z"] * (z - zs)[..., None, :]).sum(-1)
    out = out + (spec.slopes["u"] * (u - us)[..., None, :]).sum(-1)
    out = out + (spec.slopes["d"] * (d - ds)[..., None, :]).sum(-1)
    return out


def h_eval(spec: DecompositionSpec, sys: SystemModel, x, u, d, us, ds) -> np.ndarray:
    """Embedding vector field on the stacked state ``x = (z, z*)``."""
    x = np.asarray(x, dtype=float)
    z, zs = x[..., : sys.n], x[..., sys.n :]
    return np.concatenate(
        [g_eval(spec, sys, z, u, d, zs, us, ds), g_eval(spec, sys, zs, us, ds, z, u, d)], axis=-1
    )


def integrate(rhs, x0, t: float, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Classical fixed-step RK4 for ``dx/dt = rhs(s, x)`` on ``[0, t]``."""
    if t < 0:
        raise ValueError(f"negative horizon {t}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = np.array(x0, dtype=float)
    h = t / steps
    s = 0.0
    for _ in range(steps):
        k1 = rhs(s, x)
        k2 = rhs(s + h / 2, x + (h / 2) * k1)
        k3 = rhs(s + h / 2, x + (h / 2) * k2)
        k4 = rhs(s + h, x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        s += h
        if not np.all(np.isfinite(x)):
            raise ReachError(f"integration diverged at t={s:g}")
    return x


def embedding_flow(sys: SystemModel, spec: DecompositionSpec, z, u, d, zs, us, ds, t: float,
                   steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Stacked state of the embedding system at time ``t`` (constant inputs)."""
    x0 = np.concatenate([np.asarray(z, float), np.asarray(zs, float)], axis=-1)
    return integrate(lambda s, x: h_eval(spec, sys, x, u, d, us, ds), x0, t, steps)


@dataclass(frozen=True)
class ReachResult:
    over_box: Box
    horizon: float
    control: np.ndarray
    steps: int


def over_approximate(sys: SystemModel, zbox: Box, u, dbox: Box, t: float,
                     steps: int = DEFAULT_STEPS) -> ReachResult:
    """Interval enclosing ``Phi_f(t, z, u, d)`` for all ``z`` in ``zbox`` and disturbances in ``dbox``."""
    if t <= 0:
        raise ValueError(f"horizon must be positive, got {t}")
    u = np.asarray(u, dtype=float).reshape(-1)
    lo, hi = over_approximate_many(sys, zbox.lo[None], zbox.hi[None], u[None], dbox, t, steps)
    return ReachResult(Box(lo[0], hi[0]), float(t), u, steps)


def over_approximate_many(sys: SystemModel, zlo, zhi, u, dbox: Box, t: float,
                          steps: int = DEFAULT_STEPS) -> tuple[np.ndarray, np.ndarray]:
    """Batched version: rows of ``zlo, zhi, u`` are independent queries."""
    zlo = np.atleast_2d(np.asarray(zlo, dtype=float))
    zhi = np.atleast_2d(np.asarray(zhi, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    bounds = sys.jacobian_bounds(zlo, zhi, u, dbox.lo, dbox.hi, t)
    spec = build_decomposition(sys, bounds)
    dlo = np.broadcast_to(dbox.lo, (zlo.shape[0], sys.q))
    dhi = np.broadcast_to(dbox.hi, (zlo.shape[0], sys.q))
    x = embedding_flow(sys, spec, zlo, u, dlo, zhi, u, dhi, t, steps)
    lo, hi = x[:, : sys.n], x[:, sys.n :]
    if np.any(lo > hi):
        raise ReachError("embedding produced an inverted interval")
    return lo, hi


def simulate_flow(sys: SystemModel, z0, u, disturbance, t: float, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """RK4 end point of the original system under constant ``u``.

    ``disturbance`` is a vector (held constant), an array ``(K, q)`` of K
    values held on K equal sub-intervals of ``[0, t]``, or ``(N, K, q)`` with
    one schedule per row of a batched ``z0`` of shape ``(N, n)``. ``steps``
    is split evenly between the sub-intervals.
    """
    u = np.asarray(u, dtype=float)
    d = np.asarray(disturbance, dtype=float)
    segments = d[None, :] if d.ndim == 1 else d
    K = segments.shape[-2]
    sub = max(1, steps // K)
    z = np.array(z0, dtype=float)
    for k in range(K):
        dk = segments[..., k, :]
        z = integrate(lambda s, x: sys.field(x, u, dk), z, t / K, sub)
    return z
