"""The limiting odometer shape and numerical solvers for its free-boundary problem.

In one dimension the limit solves ``w'' = sqrt(2 w / pi)`` on ``(0, R)`` with
``w'(0+) = -1`` and ``w = w' = 0`` at the free boundary ``R``. Its closed
form is ``(R - |x|)^4 / (72 pi)`` with ``R = (18 pi)^(1/3)``. The solvers
here never evaluate the closed form; the tests use it as the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp
from scipy.optimize import brentq

from .errors import NonConvergence

SUPPORT_RADIUS = (18 * math.pi) ** (1 / 3)
EDGE_COEFF = 1 / (72 * math.pi)  # w ~ A s^4 at distance s inside the edge
REDUCTION_COEFF = (32 / (9 * math.pi)) ** 0.25  # f' = -c f^(3/4)
EDGE_START = 0.01  # depth where stepping takes over from the edge expansion


def closed_form_w(xi):
    s = np.maximum(SUPPORT_RADIUS - np.abs(np.asarray(xi, dtype=float)), 0.0)
    out = EDGE_COEFF * s**4
    return float(out) if out.ndim == 0 else out


def closed_form_dw(xi):
    x = np.asarray(xi, dtype=float)
    s = np.maximum(SUPPORT_RADIUS - np.abs(x), 0.0)
    out = -4 * EDGE_COEFF * s**3 * np.sign(x)
    return float(out) if out.ndim == 0 else out


def closed_form_residual(mesh_step: float = 1e-3) -> float:
    """``max |w'' - sqrt(2w/pi)|`` of the closed form, with ``w''`` taken analytically."""
    xi = np.arange(mesh_step, SUPPORT_RADIUS, mesh_step)
    w2 = 12 * EDGE_COEFF * (SUPPORT_RADIUS - xi) ** 2
    return float(np.max(np.abs(w2 - np.sqrt(2 * closed_form_w(xi) / math.pi))))


@dataclass
class ScalingProfile:
    """Even profile on a uniform grid over ``[-x_max, x_max]``."""

    grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    support_radius: float
    residual: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def mesh_step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def half(self):
        """``(xi, w, w')`` restricted to ``xi >= 0``."""
        k = np.searchsorted(self.grid, 0.0)
        return self.grid[k:], self.values[k:], self.derivative[k:]

    def at(self, xi):
        x, w, _ = self.half()
        return np.interp(np.abs(xi), x, w, right=0.0)

    @property
    def w0(self) -> float:
        return float(self.half()[1][0])

    @property
    def slope0(self) -> float:
        return float(self.half()[2][0])

    @property
    def b(self) -> float:
        """``b`` in the local form ``w = (a xi + b)^4``."""
        return self.w0**0.25

    def scaled(self, c: float) -> "ScalingProfile":
        return ScalingProfile(self.grid, c * self.values, c * self.derivative, self.support_radius)

    @classmethod
    def from_half(cls, xi, w, dw, support_radius, **kw) -> "ScalingProfile":
        grid = np.concatenate((-xi[:0:-1], xi))
        values = np.concatenate((w[:0:-1], w))
        deriv = np.concatenate((-dw[:0:-1], dw))
        return cls(grid, values, deriv, support_radius, **kw)

    @classmethod
    def closed_form(cls, mesh_step: float = 1e-3) -> "ScalingProfile":
        n = max(2, math.ceil(SUPPORT_RADIUS / mesh_step))
        xi = np.linspace(0.0, SUPPORT_RADIUS, n + 1)
        dw = closed_form_dw(xi)
        dw[0] = -1.0
        return cls.from_half(xi, closed_form_w(xi), dw, SUPPORT_RADIUS)


def _rk4_edge(h: float, n_steps: int, s0: float):
    """Integrate ``w_ss = sqrt(2w/pi)`` in the depth ``s`` below the free boundary.

    Starts at ``s0`` from the quartic edge expansion and takes ``n_steps``
    steps of size ``h``. Growth away from the edge is the stable direction.
    """
    k = math.sqrt(2 / math.pi)
    w = EDGE_COEFF * s0**4
    p = 4 * EDGE_COEFF * s0**3
    ws = np.empty(n_steps + 1)
    ps = np.empty(n_steps + 1)
    ws[0], ps[0] = w, p
    sqrt = math.sqrt
    for i in range(n_steps):
        a1 = k * sqrt(w if w > 0 else 0.0)
        wm = w + 0.5 * h * p
        pm = p + 0.5 * h * a1
        a2 = k * sqrt(wm if wm > 0 else 0.0)
        wm2 = w + 0.5 * h * pm
        pm2 = p + 0.5 * h * a2
        a3 = k * sqrt(wm2 if wm2 > 0 else 0.0)
        we = w + h * pm2
        pe = p + h * a3
        a4 = k * sqrt(we if we > 0 else 0.0)
        w += h * (p + 2 * pm + 2 * pm2 + pe) / 6
        p += h * (a1 + 2 * a2 + 2 * a3 + a4) / 6
        ws[i + 1], ps[i + 1] = w, p
    return ws, ps


def _hermite(s, ws, ps, h, t):
    """Cubic Hermite value and slope at ``t`` from samples on ``s``."""
    i = min(max(int((t - s[0]) // h), 0), len(s) - 2)
    u = (t - s[i]) / h
    y0, y1, m0, m1 = ws[i], ws[i + 1], ps[i] * h, ps[i + 1] * h
    val = (2 * u**3 - 3 * u**2 + 1) * y0 + (u**3 - 2 * u**2 + u) * m0 + (-2 * u**3 + 3 * u**2) * y1 + (u**3 - u**2) * m1
    slope = ((6 * u**2 - 6 * u) * y0 + (3 * u**2 - 4 * u + 1) * m0 + (-6 * u**2 + 6 * u) * y1 + (3 * u**2 - 2 * u) * m1) / h
    return val, slope


def _edge_cells(h: float) -> int:
    # cells filled from the edge expansion before stepping starts
    return max(1, math.ceil(EDGE_START / h))


def _edge_to_origin(R: float, n: int):
    h = R / n
    k = min(_edge_cells(h), n - 1)
    ws, ps = _rk4_edge(h, n - k, k * h)
    s = h * np.arange(k)
    w = np.concatenate((EDGE_COEFF * s**4, ws))[::-1]
    dw = -np.concatenate((4 * EDGE_COEFF * s**3, ps))[::-1]
    return np.linspace(0.0, R, n + 1), w, dw


def ode_bvp_solve(mesh_step: float = 1e-4, slope: float = -1.0) -> ScalingProfile:
    """Solve the one-dimensional free-boundary problem by shooting on the support radius.

    The equation is autonomous, so one integration from the edge fixes the
    depth ``R`` at which ``w'`` reaches ``slope``; a second integration on a
    mesh that divides ``R`` produces the profile.
    """
    if not mesh_step > 0:
        raise ValueError("mesh_step must be positive")
    target = -slope
    h = mesh_step
    n = int(2 * SUPPORT_RADIUS / h) + 16  # generous: the root is found below
    s0 = _edge_cells(h) * h
    while True:
        ws, ps = _rk4_edge(h, n, s0)
        if ps[-1] > target:
            break
        if n * h > 1e6:
            raise NonConvergence("slope never reached", bracket=(0.0, n * h))
        n *= 2
    s = s0 + h * np.arange(n + 1)
    j = int(np.argmax(ps > target))
    lo, hi = s[max(j - 1, 0)], s[j]
    try:
        R = brentq(lambda t: _hermite(s, ws, ps, h, t)[1] - target, lo, hi, xtol=1e-15, rtol=1e-15)
    except ValueError as exc:
        raise NonConvergence(str(exc), bracket=(lo, hi)) from exc
    cells = max(2, round(R / mesh_step))
    xi, w, dw = _edge_to_origin(R, cells)
    prof = ScalingProfile.from_half(xi, w, dw, R)
    prof.residual = _fd_residual(xi, w)
    prof.info = {"method": "edge-shooting-rk4", "cells": cells}
    return prof


def first_order_residual(profile: ScalingProfile) -> float:
    """Sup of ``|w' + c w^(3/4)|`` on ``xi >= 0``, the once-integrated form of the equation."""
    _, w, dw = profile.half()
    return float(np.max(np.abs(dw + REDUCTION_COEFF * np.maximum(w, 0) ** 0.75)))


def forward_shoot(w0: float, slope: float = -1.0, mesh_step: float = 1e-4, x_max: float = 10.0) -> dict:
    """Integrate from the origin with ``w(0)=w0``, ``w'(0)=slope`` and report the outer behaviour.

    A consistent start reaches ``w = 0`` and ``w' = 0`` together; otherwise
    either ``w`` crosses zero with negative slope (``"crosses"``) or ``w'``
    turns positive while ``w > 0`` (``"turns"``).
    """
    k = math.sqrt(2 / math.pi)

    def rhs(_, y):
        return [y[1], k * math.sqrt(max(y[0], 0.0))]

    def crosses(_, y):
        return y[0]

    def turns(_, y):
        return y[1]

    crosses.terminal = turns.terminal = True
    crosses.direction = -1
    turns.direction = 1
    sol = solve_ivp(rhs, (0, x_max), [w0, slope], events=(crosses, turns), rtol=1e-11, atol=1e-14, max_step=0.05)
    if sol.t_events[0].size:
        return {"outcome": "crosses", "at": float(sol.t_events[0][0]), "slope": float(sol.y_events[0][0][1])}
    if sol.t_events[1].size:
        return {"outcome": "turns", "at": float(sol.t_events[1][0]), "value": float(sol.y_events[1][0][0])}
    return {"outcome": "none", "at": x_max}


def uniqueness_probe(w0: float, delta: float = 1e-3) -> dict:
    """Forward shots from ``w0 +- delta``; each should miss the free-boundary condition."""
    return {"minus": forward_shoot(w0 - delta), "plus": forward_shoot(w0 + delta)}


def _fd_residual(xi, w) -> float:
    """Sup of ``|w'' - sqrt(2w/pi)|`` with ``w''`` from central differences on the open support."""
    h = xi[1] - xi[0]
    inner = slice(1, -1)
    w2 = (w[:-2] - 2 * w[1:-1] + w[2:]) / h**2
    res = np.abs(w2 - np.sqrt(2 * np.maximum(w[inner], 0) / math.pi))
    return float(res.max()) if res.size else 0.0


# -- radial problem in d >= 2 --------------------------------------------


def sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def green(r, d: int):
    """Free-space kernel with unit flux (``-Delta G = delta``)."""
    r = np.asarray(r, dtype=float)
    if d == 1:
        return -0.5 * r
    if d == 2:
        return np.log(1 / r) / (2 * math.pi)
    return r ** (2 - d) / ((d - 2) * sphere_area(d))


def source_mass(d: int) -> float:
    """Point-source strength: 2 in d=1 (unit slope on both sides), 1 otherwise."""
    return 2.0 if d == 1 else 1.0


@dataclass
class RadialProfile:
    dimension: int
    r: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    support_radius: float
    source_mass: float
    r0: float
    residual: float = float("nan")

    def at(self, r):
        return np.interp(r, self.r, self.values, right=0.0)

    def green_ratio(self):
        """``w(r) / (M G(r))`` on the mesh; tends to 1 as ``r -> 0`` (only logarithmically in d=2)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.values / (self.source_mass * green(self.r, self.dimension))

    def flux_ratio(self):
        """``-|S^{d-1}| r^{d-1} w'(r) / M``, the coefficient of ``G`` in ``w``; tends to 1 as ``r -> 0``."""
        om = sphere_area(self.dimension) if self.dimension > 1 else 2.0
        return -om * self.r ** (self.dimension - 1) * self.derivative / self.source_mass


def _radial_inward(R: float, d: int, r_end: float, s0: float, dense: bool = False):
    k = math.sqrt(2 / math.pi)
    B = 2 * EDGE_COEFF * (d - 1) / (7 * R)
    w_start = EDGE_COEFF * s0**4 + B * s0**5
    dw_start = -(4 * EDGE_COEFF * s0**3 + 5 * B * s0**4)

    def rhs(r, y):
        drag = (d - 1) * y[1] / r if d > 1 else 0.0
        return [y[1], k * math.sqrt(max(y[0], 0.0)) - drag]

    return solve_ivp(
        rhs, (R - s0, r_end), [w_start, dw_start], method="DOP853", rtol=1e-12, atol=1e-15, dense_output=dense
    )


def _flux_mismatch(R: float, d: int, r0: float, s0: float) -> float:
    sol = _radial_inward(R, d, r0, s0)
    w, dw = sol.y[0, -1], sol.y[1, -1]
    M = source_mass(d)
    if d == 1:
        return -2 * dw - M
    om = sphere_area(d)
    # source absorbed inside r0, with w ~ M G there
    inner, _ = quad(lambda p: om * p ** (d - 1) * math.sqrt(2 * max(M * float(green(p, d)), 0) / math.pi), 0, r0)
    return -om * r0 ** (d - 1) * dw + inner - M


def radial_pde_solve(d: int, mesh: float = 1e-3, r0: float = 1e-3) -> RadialProfile:
    """Radial free-boundary solve of ``w'' + (d-1) w'/r = sqrt(2w/pi)`` with a point source.

    Shoots on the support radius: integrate inward from the edge expansion
    and match the flux ``-|S^{d-1}| r^{d-1} w'`` to the source mass at ``r0``
    (``r0 = 0`` in d=1, where no singularity occurs).
    """
    if d not in (1, 2, 3, 4):
        raise ValueError("d must be in 1..4")
    if not mesh > 0:
        raise ValueError("mesh must be positive")
    r_in = 0.0 if d == 1 else r0
    s0 = 1e-3

    def F(R):
        return _flux_mismatch(R, d, r_in, min(s0, R / 10))

    lo, hi = 0.5, 1.0
    while F(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > 1e4:
            raise NonConvergence("no sign change in flux mismatch", bracket=(lo, hi))
    while F(lo) > 0:
        hi, lo = lo, lo / 2
        if lo < 1e-6:
            raise NonConvergence("no sign change in flux mismatch", bracket=(lo, hi))
    R = brentq(F, lo, hi, xtol=1e-13, rtol=1e-14)
    s_start = min(s0, R / 10)
    sol = _radial_inward(R, d, r_in, s_start, dense=True)
    n = max(2, math.ceil((R - r_in) / mesh))
    r = np.linspace(r_in, R, n + 1)
    inside = r < R - s_start
    y = sol.sol(np.where(inside, r, R - s_start))
    B = 2 * EDGE_COEFF * (d - 1) / (7 * R)
    s = R - r
    w = np.where(inside, y[0], EDGE_COEFF * s**4 + B * s**5)
    dw = np.where(inside, y[1], -(4 * EDGE_COEFF * s**3 + 5 * B * s**4))
    prof = RadialProfile(d, r, w, dw, R, source_mass(d), r_in)
    prof.residual = radial_residual(r, w, d)
    return prof


def radial_residual(r, w, d: int, inner: float = 0.1) -> float:
    """Sup of the finite-difference residual of ``w'' + (d-1) w'/r - sqrt(2w/pi)``.

    Points with ``r < inner * r_max`` are skipped in d >= 2, where the
    source singularity dominates the difference quotients.
    """
    h = r[1] - r[0]
    rr = r[1:-1]
    w2 = (w[:-2] - 2 * w[1:-1] + w[2:]) / h**2
    w1 = (w[2:] - w[:-2]) / (2 * h)
    lap = w2 + (d - 1) * w1 / np.where(rr > 0, rr, np.inf)
    res = np.abs(lap - np.sqrt(2 * np.maximum(w[1:-1], 0) / math.pi))
    if d > 1:
        res = res[rr >= inner * r[-1]]
    return float(res.max()) if res.size else 0.0


# -- rescaling and integrals ---------------------------------------------


@dataclass
class RescaleReport:
    t: float
    residual: float
    base_residual: float

    @property
    def ratio(self) -> float:
        return self.residual / self.base_residual if self.base_residual else float("inf")


def rescale(profile, t: float):
    """Mesh and values of ``v(x) = t^4 w(x / t)``."""
    if isinstance(profile, RadialProfile):
        return t * profile.r, t**4 * profile.values
    xi, w, _ = profile.half()
    return t * xi, t**4 * w


def rescale_check(profile, t: float) -> RescaleReport:
    """Finite-difference residual of the rescaled profile against the same equation."""
    if t <= 0:
        raise ValueError("t must be positive")

    def resid(x, v):
        if isinstance(profile, RadialProfile):
            return radial_residual(x, v, profile.dimension)
        return _fd_residual(x, v)

    base = resid(*rescale(profile, 1.0))
    return RescaleReport(t, resid(*rescale(profile, t)), base)


def scaled_height_curve(x, n: float):
    """``n^(4/3) w(x n^(-1/3))`` evaluated on lattice sites ``x``."""
    return n ** (4 / 3) * closed_form_w(np.asarray(x, dtype=float) / n ** (1 / 3))


def integral_constraint(profile) -> float:
    """``int_0^inf sqrt(2 w / pi)`` (composite Simpson on the half grid)."""
    if isinstance(profile, RadialProfile):
        om = sphere_area(profile.dimension) if profile.dimension > 1 else 2.0
        f = om * profile.r ** (profile.dimension - 1) * np.sqrt(2 * np.maximum(profile.values, 0) / math.pi)
        return float(simpson(f, x=profile.r))
    xi, w, _ = profile.half()
    return float(simpson(np.sqrt(2 * np.maximum(w, 0) / math.pi), x=xi))
