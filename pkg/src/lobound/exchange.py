"""Bound constants for negatively-correlated (exchange-only) states.

Everything reduces to the polynomial kernel theta(a,b) = a^3 b^3 (1-a-b)
on the unit square, its explicit feasible majorant g, and the radial
integral J = 4 pi int_0^1 a^-5 g(a) da.  The final constants are
(3/2)(2J)^(1/3) for general densities and (3/2)(pi/6)^(1/3) for densities
that are constant on their support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SWITCH = 0.375  # below this the inner maximum sits at b = a


def theta(a, b):
    """Polynomial interaction kernel a^3 b^3 (1 - a - b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = (a * b) ** 3 * (1.0 - a - b)
    return out if out.ndim else float(out)


def _cubic(a, b):
    # -3a^2(1-a) + (7a-3) a b + (7a-3) b^2 + 7 b^3, increasing through its
    # unique root on [0, 1]
    c = 7.0 * a - 3.0
    return 7.0 * b**3 + c * b * b + c * a * b - 3.0 * a * a * (1.0 - a)


def cubic_root_R(a):
    """Unique root in [0, 1] of the critical-point cubic, for 3/8 <= a <= 1.

    Bracketed bisection refined by Newton; the root is decreasing in a,
    equals 3/8 at a = 3/8 and 0 at a = 1.
    """
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr < SWITCH - 1e-12) or np.any(a_arr > 1.0 + 1e-12):
        raise ValueError("cubic root is defined for 3/8 <= a <= 1")
    lo = np.zeros_like(a_arr)
    hi = np.ones_like(a_arr)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pos = _cubic(a_arr, mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    b = 0.5 * (lo + hi)
    c = 7.0 * a_arr - 3.0
    for _ in range(3):
        f = _cubic(a_arr, b)
        df = 21.0 * b * b + 2.0 * c * b + c * a_arr
        step = np.where(np.abs(df) > 1e-30, f / np.where(df == 0, 1.0, df), 0.0)
        b = np.clip(b - step, 0.0, 1.0)
    return b if b.ndim else float(b)


def b_opt(a):
    """Maximizer of b -> theta(a,b) - theta(b,b)_+/2 on [0, a].

    Equals a up to the switch point 3/8 and the decreasing cubic root
    beyond; never exceeds 3/8.
    """
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr < 0.0) or np.any(a_arr > 1.0 + 1e-12):
        raise ValueError("b_opt is defined on [0, 1]")
    out = np.array(a_arr, dtype=float, copy=True)
    hi = a_arr > SWITCH
    if np.any(hi):
        out[hi] = cubic_root_R(a_arr[hi])
    return out if out.ndim else float(out)


def g_exchange(a):
    """Feasible majorant g(a) = theta(a, b(a)) - theta(b(a), b(a))_+/2.

    Nonnegative on [0, 1] with g(1) = 0; coincides with theta(a,a)/2 =
    a^6 (1-2a)/2 below the switch point.
    """
    a_arr = np.asarray(a, dtype=float)
    b = b_opt(a_arr)
    out = theta(a_arr, b) - 0.5 * np.maximum(theta(b, b), 0.0)
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ExchangeReport:
    J_value: float
    constant_general: float
    constant_uniform: float
    quadrature_error_estimate: float


def _gauss_panels(f, lo, hi, panels, nodes=16):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return float(np.dot(f(pts), wts))


def compute_J(quadrature_points: int = 2000) -> ExchangeReport:
    """Integrate 4 pi a^-5 g(a) over [0, 1] and assemble the constants.

    Composite Gauss-Legendre split at the switch point (the integrand is
    2 pi a (1 - 2a) below it and involves the cubic root above); panel
    count doubles until successive estimates differ by < 1e-6.
    """
    if quadrature_points < 100:
        raise ValueError("need at least 100 quadrature points")

    def integrand(a):
        return 4.0 * math.pi * g_exchange(a) / a**5

    panels = max(2, quadrature_points // 32)
    prev = None
    err = math.inf
    for _ in range(12):
        val = _gauss_panels(integrand, 0.0, SWITCH, panels) + _gauss_panels(
            integrand, SWITCH, 1.0, panels
        )
        if prev is not None:
            err = abs(val - prev)
            if err < 1e-6:
                prev = val
                break
        prev = val
        panels *= 2
    else:
        raise RuntimeError("quadrature failed to converge to 1e-6")
    J = prev
    return ExchangeReport(
        J_value=J,
        constant_general=1.5 * (2.0 * J) ** (1.0 / 3.0),
        constant_uniform=1.5 * (math.pi / 6.0) ** (1.0 / 3.0),
        quadrature_error_estimate=err,
    )
