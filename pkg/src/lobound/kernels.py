"""Interaction-deficit kernels between smeared point charges.

``phi(a, b)`` measures how much Coulomb energy two unit point charges at
distance one lose when each is smeared by a radial probability measure at
scales 1/a and 1/b; the symmetrized kernel ``psi = phi_mn + phi_nm - phi_nn``
is the object every bound in this package is built from.  Closed forms are
available for spheres and balls; general concentric-sphere measures go
through a bilinear expansion over sphere pairs.

Every kernel vanishes identically on the set 1/a + 1/b <= 1 (Newton: the
smeared charges then interact exactly like points).  Builders exploit this
to skip most of the grid; skipped entries are exact zeros, not thresholded
values, so certificates are unaffected.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .measures import RadialMeasure, scaled_potential

EXACT_KINDS = ("sphere", "ball", "delta")


def _pos(x):
    return np.maximum(x, 0.0)


def psi_sphere_sphere(a, b):
    """Kernel for two unit spheres: (a^2 b^2 / 4)((a+b-ab)_+^2 - (|a-b|-ab)_+^2)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = a * b
    u = _pos(a + b - ab)
    v = _pos(np.abs(a - b) - ab)
    out = 0.25 * ab * ab * (u * u - v * v)
    return out if out.ndim else float(out)


def psi_ball_ball(a, b):
    """Kernel for two unit balls (two-term quartic-prefactor closed form)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = a * b
    d = np.abs(a - b)
    u = _pos(a + b - ab)
    v = _pos(d - ab)
    u4 = (u * u) ** 2
    v4 = (v * v) ** 2
    a2 = a * a
    b2 = b * b
    q1 = ab * ab - 5.0 * a2 - 5.0 * b2 + 4.0 * ab * (a + b) + 20.0 * ab
    q2 = ab * ab - 5.0 * a2 - 5.0 * b2 + 4.0 * d * ab - 20.0 * ab
    out = (u4 * q1 - v4 * q2) / 160.0
    return out if out.ndim else float(out)


def _phi_sphere_ball(a, b):
    """One-sided deficit: unit sphere at scale 1/a against unit ball at 1/b.

    Obtained by integrating the sphere-sphere deficit over the ball's radial
    profile 3 s^2 ds; the integrals of s (a s + b(1-a))^2 over the pieces
    where the positive parts are active are elementary:

        phi(a, b) = (3 a^2 b^2 / 4) (T1 - T2 - T3).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def prim(s, A, B):
        # antiderivative of s (A s + B)^2
        return 0.25 * A * A * s**4 + (2.0 / 3.0) * A * B * s**3 + 0.5 * B * B * s * s

    safe_a = np.where(a > 0.0, a, 1.0)
    B1 = b * (1.0 - a)
    s1 = np.clip(b * (a - 1.0) / safe_a, 0.0, 1.0)
    t1 = prim(1.0, a, B1) - prim(s1, a, B1)
    s2 = np.clip(B1 / safe_a, 0.0, 1.0)
    t2 = prim(s2, -a, B1)
    B3 = -b * (1.0 + a)
    s3 = np.clip(-B3 / safe_a, 0.0, 1.0)
    t3 = prim(1.0, a, B3) - prim(s3, a, B3)

    out = 0.75 * a * a * b * b * (t1 - t2 - t3)
    out = np.where((a > 0.0) & (b > 0.0), out, 0.0)
    return out if out.ndim else float(out)


def potential_sphere(x):
    """x V(x e1) for the unit sphere: min(x, 1)."""
    return np.minimum(np.asarray(x, dtype=float), 1.0)


def potential_ball(x):
    """x V(x e1) for the unit ball: x(3 - x^2)/2 inside, 1 outside."""
    x = np.asarray(x, dtype=float)
    return np.where(x < 1.0, 0.5 * x * (3.0 - x * x), 1.0)


def _psi_delta_reduced(pot, a, b):
    # background measure is a pure point charge: a^3 b^3 (2 - aV(a) - bV(b))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (a * b) ** 3 * (2.0 - pot(a) - pot(b))


def exact_kernel(mu_kind: str, nu_kind: str):
    """Vectorized closed-form kernel for continuum sphere/ball/delta pairs.

    The charge side (``mu_kind``) may be ``sphere`` or ``ball``; the
    background (``nu_kind``) additionally allows ``delta``.
    """
    if mu_kind not in ("sphere", "ball"):
        raise ValueError(f"unsupported charge measure {mu_kind!r}")
    if nu_kind not in EXACT_KINDS:
        raise ValueError(f"unsupported background measure {nu_kind!r}")
    if nu_kind == "delta":
        pot = potential_sphere if mu_kind == "sphere" else potential_ball
        return lambda a, b: _psi_delta_reduced(pot, a, b)
    if mu_kind == nu_kind:
        return psi_sphere_sphere if mu_kind == "sphere" else psi_ball_ball
    # mixed pair: phi_mn + phi_nm - phi_nn with phi_bs(a,b) = phi_sb(b,a)
    if mu_kind == "sphere":
        return lambda a, b: (
            _phi_sphere_ball(a, b) + _phi_sphere_ball(b, a) - psi_ball_ball(a, b)
        )
    return lambda a, b: (
        _phi_sphere_ball(b, a) + _phi_sphere_ball(a, b) - psi_sphere_sphere(a, b)
    )


def exact_self_energy(kind: str) -> float:
    """D(mu, mu) for the continuum shapes: 1/2 for the sphere, 3/5 for the ball."""
    if kind == "sphere":
        return 0.5
    if kind == "ball":
        return 0.6
    raise ValueError(f"no finite self-energy for {kind!r}")


def _sphere_components(m: RadialMeasure):
    """(radii, masses) of the sphere part; masses sum to 1 - delta_weight."""
    keep = m.weights > 0.0
    return m.radii[keep], m.weights[keep] / m.K


def psi_general(mu: RadialMeasure, nu: RadialMeasure, a, b):
    """Kernel of two concentric-sphere measures via the sphere-pair expansion.

    The sphere parts contribute three bilinear sums of scaled sphere-sphere
    kernels; a point mass nu_0 in the background adds the exactly separable
    term nu_0 a^3 b^3 [(P_nu - P_mu)(a) + (P_nu - P_mu)(b)] built from the
    scaled potentials P(x) = x V(x e1).
    """
    if mu.delta_weight > 0:
        raise ValueError("charge measure cannot carry a point mass at the origin")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a_b, b_b = np.broadcast_arrays(a, b)
    out = np.zeros(a_b.shape, dtype=float)

    rm, wm = _sphere_components(mu)
    rn, wn = _sphere_components(nu)

    def pair_sum(r1, w1, r2, w2):
        if len(r1) == 0 or len(r2) == 0:
            return 0.0
        rr = np.multiply.outer(r1, r2).ravel()
        cc = np.multiply.outer(w1, w2).ravel() * rr**3
        av = a_b[..., None] / np.repeat(r1, len(r2))
        bv = b_b[..., None] / np.tile(r2, len(r1))
        return psi_sphere_sphere(av, bv) @ cc

    out += pair_sum(rm, wm, rn, wn)
    out += pair_sum(rn, wn, rm, wm)
    out -= pair_sum(rn, wn, rn, wn)

    if nu.delta_weight > 0:
        qa = scaled_potential(nu, a_b) - scaled_potential(mu, a_b)
        qb = scaled_potential(nu, b_b) - scaled_potential(mu, b_b)
        out += nu.delta_weight * (a_b * b_b) ** 3 * (qa + qb)

    # Newton: the kernel vanishes exactly where 1/a + 1/b <= 1
    out = np.where(a_b + b_b - a_b * b_b > 0.0, out, 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# grid machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsiMatrix:
    """Kernel sampled on the radial grid (l/M, m/M), 0 <= l, m <= RM-1."""

    M: int
    R: float
    values: np.ndarray

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.R < 2:
            raise ValueError("R must be >= 2")
        n = grid_size(self.M, self.R)
        if self.values.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} grid, got {self.values.shape}")

    @property
    def rm(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.rm) / self.M


def grid_size(M: int, R: float) -> int:
    n = int(round(R * M))
    if abs(R * M - n) > 1e-9:
        raise ValueError(f"R*M = {R * M} is not an integer grid size")
    return n


def support_row_end(col: int, M: int, n: int) -> int:
    """First row index beyond which the kernel column is identically zero.

    Column m has support rows l < M m / (m - M) once m > M (from
    1/a + 1/b > 1); columns with m <= M are full.
    """
    if col <= M:
        return n
    return min(n, -((-col * M) // (col - M)))


def _row_blocks(n: int, block: int):
    for r0 in range(0, n, block):
        yield r0, min(n, r0 + block)


def build_psi_matrix_exact(
    mu_kind: str, nu_kind: str, M: int, R: float, threads: int = 1
) -> PsiMatrix:
    """Sample a closed-form kernel on the grid, skipping the zero region."""
    kern = exact_kernel(mu_kind, nu_kind)
    n = grid_size(M, R)
    grid = np.arange(n) / M
    out = np.zeros((n, n))

    def fill(r0, r1):
        cut = support_row_end(r0, M, n)  # symmetric support, reuse for rows
        out[r0:r1, :cut] = kern(grid[r0:r1, None], grid[None, :cut])

    blocks = list(_row_blocks(n, max(256, n // 64)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(lambda b: fill(*b), blocks))
    else:
        for b in blocks:
            fill(*b)
    return PsiMatrix(M=M, R=float(R), values=out)


def _accumulate_pair_sum(out, grid, M, r1, c1, r2, c2, symmetric=False):
    """out += sum_{j,k} c1_j c2_k (r1_j r2_k)^3 psi_ss(a / r1_j, b / r2_k).

    Each (j, k) term vanishes outside (rows < 2 r1_j M) union
    (cols < 2 r2_k M); only those two rectangles are evaluated.
    With ``symmetric`` the two lists are identical and transposed pairs
    are folded.
    """
    n = len(grid)
    for j in range(len(r1)):
        lj = min(n, math.ceil(2.0 * r1[j] * M))
        k0 = j if symmetric else 0
        for k in range(k0, len(r2)):
            coef = c1[j] * c2[k] * (r1[j] * r2[k]) ** 3
            ck = min(n, math.ceil(2.0 * r2[k] * M))
            a_top = grid[:lj, None] / r1[j]
            b_top = grid[None, :] / r2[k]
            top = coef * psi_sphere_sphere(a_top, b_top)
            a_rest = grid[lj:, None] / r1[j]
            b_rest = grid[None, :ck] / r2[k]
            rest = coef * psi_sphere_sphere(a_rest, b_rest)
            if symmetric and k > j:
                # fold (j,k) and (k,j): the latter is the transpose
                out[:lj, :] += top
                out[:, :lj] += top.T
                out[lj:, :ck] += rest
                out[:ck, lj:] += rest.T
            else:
                out[:lj, :] += top
                out[lj:, :ck] += rest


def build_psi_matrix(
    mu: RadialMeasure,
    nu: RadialMeasure,
    M: int,
    R: float,
    tensor: "SphereTensor | None" = None,
    threads: int = 1,
) -> PsiMatrix:
    """Kernel matrix for concentric-sphere measures (expansion path).

    When a precomputed ``SphereTensor`` for the same (K, M, R) is supplied,
    the sphere sums reduce to one contraction against the weight products.
    """
    if mu.delta_weight > 0:
        raise ValueError("charge measure cannot carry a point mass at the origin")
    n = grid_size(M, R)
    grid = np.arange(n) / M

    if tensor is not None:
        if mu.K != tensor.K or nu.K != tensor.K:
            raise ValueError(
                f"tensor built for K={tensor.K}, measures have K={mu.K}/{nu.K}"
            )
        if tensor.M != M or tensor.R != R:
            raise ValueError(
                f"tensor built for (M={tensor.M}, R={tensor.R}), requested ({M}, {R})"
            )
        # blocks already carry (r_j r_k)^3; masses contribute 1/K per side
        wm = mu.weights
        wn = nu.weights
        c = np.outer(wm, wn)
        c = (c + c.T - np.outer(wn, wn)) / float(mu.K) ** 2
        out = tensor.contract(c)
    else:
        out = np.zeros((n, n))
        rm, wm = _sphere_components(mu)
        rn, wn = _sphere_components(nu)
        same = (
            mu.K == nu.K
            and nu.delta_weight == 0.0
            and np.array_equal(mu.weights, nu.weights)
        )
        if same:
            _accumulate_pair_sum(out, grid, M, rm, wm, rm, wm, symmetric=True)
        else:
            half = np.zeros((n, n))
            _accumulate_pair_sum(half, grid, M, rm, wm, rn, wn)
            out += half
            out += half.T
            _accumulate_pair_sum(out, grid, M, rn, -wn, rn, wn)

    nu0 = nu.delta_weight
    if nu0 > 0:
        q = scaled_potential(nu, grid) - scaled_potential(mu, grid)
        cube = grid**3
        m1 = min(M, n)
        # the separable point-mass terms live on rows < M or cols < M only;
        # elsewhere both potentials saturate and the term is exactly zero
        out[:m1, :] += nu0 * (
            np.outer(cube[:m1] * q[:m1], cube) + np.outer(cube[:m1], cube * q)
        )
        out[m1:, :m1] += nu0 * (
            np.outer(cube[m1:] * q[m1:], cube[:m1])
            + np.outer(cube[m1:], (cube * q)[:m1])
        )
    return PsiMatrix(M=M, R=float(R), values=out)


class TensorBudgetError(MemoryError):
    """Raised when a sphere tensor would not fit the configured budget."""

    def __init__(self, required_bytes: int, budget_bytes: int):
        self.required_bytes = required_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"sphere tensor needs {required_bytes} bytes, budget is {budget_bytes}"
        )


class SphereTensor:
    """Scaled sphere-sphere kernels on the grid, reusable across measures.

    Entry (j, k, l, m) equals (jk/(lm))^3 psi_ss(K l/(M j), K m/(M k)).
    Rows with l >= 2 M j / K and columns with m >= 2 M k / K are zero and
    never stored: block j holds the nonzero row band for every k, and the
    complementary column bands are recovered by the (j,k,l,m) -> (k,j,m,l)
    symmetry.
    """

    def __init__(self, K: int, M: int, R: float, blocks, row_ends):
        self.K = K
        self.M = M
        self.R = float(R)
        self._blocks = blocks  # blocks[j-1]: (K, row_ends[j-1], n) scaled kernels
        self._row_ends = row_ends
        self.n = grid_size(M, R)
        # flat views so the contraction is a plain BLAS product, no copies
        self._flat = [b.reshape(self.K, -1) for b in blocks]

    @property
    def nbytes(self) -> int:
        return sum(b.nbytes for b in self._blocks)

    def entry(self, j: int, k: int, l: int, m: int) -> float:
        """T_{jklm} for 1 <= j,k <= K and 1 <= l,m <= RM-1."""
        if not (1 <= j <= self.K and 1 <= k <= self.K):
            raise IndexError("sphere indices out of range")
        if not (1 <= l < self.n and 1 <= m < self.n):
            raise IndexError("grid indices out of range")
        if l < self._row_ends[j - 1]:
            raw = self._blocks[j - 1][k - 1][l, m]
        elif m < self._row_ends[k - 1]:
            raw = self._blocks[k - 1][j - 1][m, l]
        else:
            return 0.0
        # blocks store (r_j r_k)^3 psi = (jk)^3 psi / K^6
        return float(raw) * self.K**6 / float(l * m) ** 3

    def contract(self, coef: np.ndarray) -> np.ndarray:
        """sum_{j,k} coef_{jk} (r_j r_k)^3 psi_ss(a / r_j, b / r_k) on the grid.

        ``coef`` must be symmetric (it always is for weight products of the
        form mu nu^T + nu mu^T - nu nu^T).
        """
        if coef.shape != (self.K, self.K):
            raise ValueError(f"coefficient matrix must be {self.K}x{self.K}")
        n = self.n
        out = np.zeros((n, n))
        lmax = self._row_ends[-1]
        z = np.zeros((lmax, n))
        for j in range(self.K):
            lj = self._row_ends[j]
            z[:lj, :] += coef[j].dot(self._flat[j]).reshape(lj, n)
        out[:lmax, :] += z
        out[:, :lmax] += z.T
        # subtract the doubly-counted corners (rows < L_j and cols < C_k)
        for j in range(self.K):
            lj = self._row_ends[j]
            for k in range(self.K):
                ck = self._row_ends[k]
                out[:lj, :ck] -= coef[j, k] * self._blocks[j][k][:, :ck]
        return out


def tensor_required_bytes(K: int, M: int, R: float) -> int:
    n = grid_size(M, R)
    total = 0
    for j in range(1, K + 1):
        total += K * min(n, math.ceil(2.0 * M * j / K)) * n * 8
    return total


def build_tensor(
    K: int, M: int, R: float, budget_bytes: int | None = None, threads: int = 1
) -> SphereTensor:
    """Precompute the scaled sphere-pair kernels shared by all (K, M, R) runs."""
    need = tensor_required_bytes(K, M, R)
    if budget_bytes is not None and need > budget_bytes:
        raise TensorBudgetError(need, budget_bytes)
    n = grid_size(M, R)
    grid = np.arange(n) / M
    row_ends = [min(n, math.ceil(2.0 * M * j / K)) for j in range(1, K + 1)]

    def one_block(j):
        lj = row_ends[j - 1]
        block = np.empty((K, lj, n))
        rj = j / K
        for k in range(1, K + 1):
            rk = k / K
            block[k - 1] = (rj * rk) ** 3 * psi_sphere_sphere(
                grid[:lj, None] / rj, grid[None, :] / rk
            )
        return block

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            blocks = list(ex.map(one_block, range(1, K + 1)))
    else:
        blocks = [one_block(j) for j in range(1, K + 1)]
    return SphereTensor(K, M, R, blocks, row_ends)


# ---------------------------------------------------------------------------
# quadrature oracle
# ---------------------------------------------------------------------------


def _oracle_components(m):
    if isinstance(m, RadialMeasure):
        comps = [("sphere", r, w) for r, w in zip(*_sphere_components(m))]
        if m.delta_weight > 0:
            comps.append(("delta", 0.0, m.delta_weight))
        return comps
    if m in EXACT_KINDS:
        return [(m, 1.0, 1.0)]
    raise ValueError(f"cannot build oracle components from {m!r}")


def _newton_potential(kind: str, radius: float, r: float) -> float:
    # potential of a unit-mass shape of the given radius, at distance r
    if kind == "delta" or r >= radius:
        return 1.0 / r
    if kind == "sphere":
        return 1.0 / radius
    return (3.0 * radius * radius - r * r) / (2.0 * radius**3)


def _pair_interaction(kind1: str, rad1: float, kind2: str, rad2: float) -> float:
    """2 D(shape1 at 0, shape2 at e1) by angular/radial quadrature."""
    if kind1 == "delta":
        return _newton_potential(kind2, rad2, 1.0)
    if kind2 == "delta":
        return _newton_potential(kind1, rad1, 1.0)

    def sphere_average(alpha, kind, rad):
        # average the (exact, Newton) potential of shape2 over a sphere of
        # radius alpha centered at distance one
        def integrand(theta):
            r = math.sqrt(1.0 + alpha * alpha - 2.0 * alpha * math.cos(theta))
            return 0.5 * math.sin(theta) * _newton_potential(kind, rad, r)

        pts = []
        c = (1.0 + alpha * alpha - rad * rad) / (2.0 * alpha)
        if -1.0 < c < 1.0:
            pts.append(math.acos(c))
        val, _ = quad(integrand, 0.0, math.pi, points=pts or None, limit=200)
        return val

    if kind1 == "sphere":
        return sphere_average(rad1, kind2, rad2)
    # ball first: integrate its radial profile 3 t^2 / rad1^3 over spheres
    val, _ = quad(
        lambda t: 3.0 * t * t / rad1**3 * sphere_average(t, kind2, rad2),
        0.0,
        rad1,
        limit=200,
    )
    return val


def phi_quadrature_oracle(mu, nu, a: float, b: float) -> float:
    """Independent evaluation of the kernel by numerical quadrature.

    Assembles phi_mn(a,b) + phi_nm(a,b) - phi_nn(a,b) from pairwise
    interactions 2D of the scaled components, each computed by adaptive
    quadrature against exact single-shape Newton potentials.  Intended as a
    test oracle (target accuracy ~1e-6), not for production grids.
    """
    if a <= 0 or b <= 0:
        raise ValueError("oracle requires a, b > 0")
    cm = _oracle_components(mu)
    cn = _oracle_components(nu)

    def phi(first, second, s1, s2):
        total = 0.0
        for kind1, rad1, w1 in first:
            for kind2, rad2, w2 in second:
                if kind1 == "delta" and kind2 == "delta":
                    inter = 1.0
                else:
                    inter = _pair_interaction(kind1, rad1 / s1, kind2, rad2 / s2)
                total += w1 * w2 * inter
        return (s1 * s2) ** 3 * (1.0 - total)

    out = phi(cm, cn, a, b) + phi(cn, cm, a, b) - phi(cn, cn, a, b)
    if not math.isfinite(out):
        raise RuntimeError("quadrature failed to converge")
    return out
