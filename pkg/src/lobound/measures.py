"""Radial probability measures as weighted combinations of concentric spheres.

A measure is ``delta_weight * delta_0 + (1/K) * sum_j w_j * sigma_{j/K}``
where ``sigma_r`` is the normalized uniform measure of the sphere of radius
``r``.  All radii live on the lattice ``j/K`` inside the closed unit ball;
global dilations are never represented because the final constant is
scale-invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Normalization guaranteed after construction / maximal drift the
# constructor silently repairs (larger drift is rejected).
NORMALIZATION_TOL = 1e-9
RENORMALIZE_DRIFT = 1e-6


@dataclass(frozen=True)
class RadialMeasure:
    """Probability measure supported on concentric spheres of radii j/K.

    ``delta_weight`` is the mass of an optional point charge at the origin.
    It must be zero for any measure whose Coulomb self-energy is needed
    (a point charge has infinite self-energy).
    """

    K: int
    delta_weight: float
    weights: np.ndarray

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.K,):
            raise ValueError(f"expected {self.K} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or not np.isfinite(self.delta_weight):
            raise ValueError("weights must be finite")
        if self.delta_weight < 0 or np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = self.delta_weight + w.sum() / self.K
        drift = abs(total - 1.0)
        if drift > RENORMALIZE_DRIFT:
            raise ValueError(
                f"not a probability measure: delta + mean(weights) = {total!r}"
            )
        if drift > 0.0:
            object.__setattr__(self, "delta_weight", self.delta_weight / total)
            w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def radii(self) -> np.ndarray:
        """Sphere radii j/K, j = 1..K."""
        return np.arange(1, self.K + 1) / self.K

    @property
    def sphere_mass(self) -> float:
        """Total mass carried by the spheres (1 - delta_weight)."""
        return float(self.weights.sum() / self.K)


def make_sphere() -> RadialMeasure:
    """Uniform measure of the unit sphere."""
    return RadialMeasure(K=1, delta_weight=0.0, weights=np.array([1.0]))


def make_delta() -> RadialMeasure:
    """Point charge at the origin.  Usable only on the background side."""
    return RadialMeasure(K=1, delta_weight=1.0, weights=np.array([0.0]))


def make_ball(K: int) -> RadialMeasure:
    """Uniform measure of the unit ball as K concentric spheres.

    Shell j at radius j/K carries the weight of the radial density r^2,
    sampled at the right endpoint: w_j proportional to j^2.
    """
    if K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    j = np.arange(1, K + 1, dtype=float)
    w = j * j
    w *= K / w.sum()
    return RadialMeasure(K=K, delta_weight=0.0, weights=w)


def coulomb_self_energy(m: RadialMeasure) -> float:
    """Coulomb self-energy D(m, m) = (1/2) iint dm dm / |x-y|.

    Two concentric spheres of radii r <= s interact like a point charge
    inside a shell: 2 D(sigma_r, sigma_s) = 1/s.
    """
    if m.delta_weight > 0:
        raise ValueError("infinite self-energy: measure has a point mass at 0")
    j = np.arange(1, m.K + 1, dtype=float)
    inv_max = 1.0 / np.maximum.outer(j, j)
    return float(m.weights @ inv_max @ m.weights / (2.0 * m.K))


def coulomb_interaction_energy(m1: RadialMeasure, m2: RadialMeasure) -> float:
    """Coulomb scalar product D(m1, m2) of two concentric measures."""
    if m1.delta_weight > 0 and m2.delta_weight > 0:
        raise ValueError("infinite energy: both measures have a point mass at 0")
    r1 = m1.radii
    r2 = m2.radii
    inv_max = 1.0 / np.maximum.outer(r1, r2)
    out = (m1.weights / m1.K) @ inv_max @ (m2.weights / m2.K) / 2.0
    # a point charge at the center of a sphere of radius r sees 1/r
    if m1.delta_weight > 0:
        out += m1.delta_weight * np.sum(m2.weights / m2.K / r2) / 2.0
    if m2.delta_weight > 0:
        out += m2.delta_weight * np.sum(m1.weights / m1.K / r1) / 2.0
    return float(out)


def scaled_potential(m: RadialMeasure, a):
    """a * V_m(a e1), the rescaled Coulomb potential of the measure.

    By Newton's theorem a sphere of radius r contributes min(a/r, 1),
    and a point mass at the origin contributes 1 for every a.  The result
    is nondecreasing in a, lies in [0, 1] and saturates at the total mass
    for a >= 1.
    """
    a_arr = np.asarray(a, dtype=float)
    frac = np.minimum(np.multiply.outer(a_arr, m.K / np.arange(1, m.K + 1)), 1.0)
    out = m.delta_weight + frac @ m.weights / m.K
    if np.isscalar(a) or a_arr.ndim == 0:
        return float(out)
    return out
