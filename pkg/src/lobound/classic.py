"""The original majorant route to the bound, kept as a cross-check.

chi(a) = a^3 (1 - a V(a e1)) is squeezed under two nondecreasing
majorants: zeta, the smallest one (running maximum), and xi, the primitive
of the positive part of chi' (always >= zeta).  Each yields a constant
(3/2)(2 D^2 * 4 pi int v(r)/r^2 dr)^(1/3) that the dual-solver pipeline
must beat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import RadialMeasure, coulomb_self_energy, scaled_potential


def chi(mu: RadialMeasure, a):
    """a^3 (1 - a V_mu(a e1)); vanishes for a >= 1 by Newton."""
    if mu.delta_weight > 0:
        raise ValueError("chi requires a measure without a point mass at 0")
    a_arr = np.asarray(a, dtype=float)
    out = a_arr**3 * np.maximum(1.0 - scaled_potential(mu, a_arr), 0.0)
    # exactly zero past the support radius (the potential saturates there
    # up to float renormalization residue)
    out = np.where(a_arr < 1.0, out, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MajorantCurve:
    a: np.ndarray
    chi: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray


def majorants_from_samples(chi_values: np.ndarray):
    """(zeta, xi) from sampled chi: running max and summed positive rises."""
    chi_values = np.asarray(chi_values, dtype=float)
    zeta = np.maximum.accumulate(chi_values)
    rises = np.maximum(np.diff(chi_values), 0.0)
    xi = np.concatenate(([chi_values[0]], chi_values[0] + np.cumsum(rises)))
    return zeta, xi


def build_majorants(mu: RadialMeasure, grid_points: int = 100_000) -> MajorantCurve:
    """Sample chi on [0, 1] and build both majorants.

    chi is identically zero beyond 1 (compact support), so zeta and xi are
    constant there and the grid stops at 1.
    """
    if grid_points < 1000:
        raise ValueError("need at least 1000 grid points")
    a = np.linspace(0.0, 1.0, grid_points)
    c = chi(mu, a)
    zeta, xi = majorants_from_samples(c)
    return MajorantCurve(a=a, chi=c, zeta=zeta, xi=xi)


def classic_constant(
    mu: RadialMeasure, variant: str = "xi", grid_points: int = 100_000
) -> float:
    """(3/2)(2 D(mu,mu)^2 * 4 pi int_0^inf v(r)/r^2 dr)^(1/3), v = zeta or xi.

    The integrand is trapezoided on [0, 1]; beyond 1 the majorant is
    constant and the tail integrates in closed form to v(1).
    """
    if variant not in ("zeta", "xi"):
        raise ValueError(f"unknown variant {variant!r}")
    curve = build_majorants(mu, grid_points)
    v = curve.zeta if variant == "zeta" else curve.xi
    integrand = np.zeros_like(v)
    integrand[1:] = v[1:] / curve.a[1:] ** 2
    radial = float(np.trapezoid(integrand, curve.a)) + float(v[-1])
    D = coulomb_self_energy(mu)
    return 1.5 * (2.0 * D * D * 4.0 * math.pi * radial) ** (1.0 / 3.0)
