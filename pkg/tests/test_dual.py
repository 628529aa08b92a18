import math

import numpy as np
import pytest

from lobound.dual import (
    BoundVector,
    assemble_constant,
    certified_bound,
    g_vector,
    iterate_to_fixed_point,
    lp_oracle,
    objective,
    psi_transform,
    tail_correction,
    verify_feasible,
)
from lobound.kernels import PsiMatrix, build_psi_matrix, build_psi_matrix_exact
from lobound.measures import RadialMeasure, make_ball, make_delta


@pytest.fixture(scope="module")
def sphere_100_10():
    return build_psi_matrix_exact("sphere", "sphere", M=100, R=10)


@pytest.fixture(scope="module")
def ball_100_10():
    return build_psi_matrix_exact("ball", "ball", M=100, R=10)


def test_bound_vector_validation():
    with pytest.raises(ValueError, match="F_0"):
        BoundVector(M=10, R=2.0, values=np.ones(20))
    with pytest.raises(ValueError, match="nonnegative"):
        BoundVector(M=10, R=2.0, values=np.concatenate(([0.0], -np.ones(19))))
    with pytest.raises(ValueError, match="entries"):
        BoundVector(M=10, R=2.0, values=np.zeros(7))


def test_g_vector_basics(sphere_100_10):
    G = g_vector(sphere_100_10)
    assert G.values[0] == 0.0
    diag_half = 0.5 * np.maximum(np.diagonal(sphere_100_10.values), 0.0)
    assert np.all(G.values >= diag_half - 1e-15)
    ok, _ = verify_feasible(sphere_100_10, G)
    assert ok


def test_g_vector_asymptote():
    # g(a)/a^3 -> max_b b^3 (1 - b) = 27/256 for the unit sphere
    psi = build_psi_matrix_exact("sphere", "sphere", M=500, R=20)
    G = g_vector(psi)
    r_last = (psi.rm - 1) / psi.M
    ratio = G.values[-1] / r_last**3
    assert ratio == pytest.approx(27.0 / 256.0, rel=0.02)


def test_transform_dominated_start_gives_zero(sphere_100_10):
    n = sphere_100_10.rm
    huge = np.full(n, 1e12)
    huge[0] = 0.0
    out = psi_transform(sphere_100_10, BoundVector(M=100, R=10.0, values=huge))
    assert np.all(out.values == 0.0)


def test_transform_antitone(sphere_100_10):
    rng = np.random.default_rng(0)
    n = sphere_100_10.rm
    for _ in range(5):
        f = rng.uniform(0.0, 2.0, n)
        f[0] = 0.0
        g = f + rng.uniform(0.0, 1.0, n)
        g[0] = 0.0
        tf = psi_transform(sphere_100_10, BoundVector(M=100, R=10.0, values=f))
        tg = psi_transform(sphere_100_10, BoundVector(M=100, R=10.0, values=g))
        assert np.all(tf.values >= tg.values)


def test_transform_of_feasible_decreases(sphere_100_10):
    G = g_vector(sphere_100_10)
    out = psi_transform(sphere_100_10, G)
    assert np.all(out.values <= G.values)
    assert out.values[0] == 0.0
    assert np.all(out.values >= 0.0)
    # the constraint holds between F and its transform
    V = sphere_100_10.values
    lhs = V - G.values[:, None] - out.values[None, :]
    assert lhs.max() <= 0.0


def test_transform_shape_mismatch(sphere_100_10):
    with pytest.raises(ValueError, match="grid"):
        psi_transform(sphere_100_10, BoundVector(M=50, R=10.0, values=np.zeros(500)))


def test_iterate_sphere_stops_immediately(sphere_100_10):
    # G is already the fixed point for the sphere kernel
    G = g_vector(sphere_100_10)
    res = iterate_to_fixed_point(sphere_100_10, G, 1e-6)
    assert res.iterations <= 2
    np.testing.assert_allclose(res.vector.values, G.values, rtol=0, atol=1e-9)


def test_iterate_from_envelope_descends(ball_100_10):
    g = ball_100_10.grid
    F0 = BoundVector(M=100, R=10.0, values=np.minimum(2 * g**6, 8 * g**3))
    res = iterate_to_fixed_point(ball_100_10, F0, 1e-6)
    assert objective(res.vector) <= objective(F0)
    assert np.all(res.vector.values <= F0.values + 1e-12)
    ok, _ = verify_feasible(ball_100_10, res.vector)
    assert ok
    # lands near the optimum found from the majorant start
    assert objective(res.vector) == pytest.approx(1.642503, abs=2e-4)
    # approximate fixed-point equation at stopping scale
    trans = psi_transform(ball_100_10, res.vector)
    resid = np.max(res.vector.values - trans.values)
    assert resid >= -1e-15
    assert resid <= 1e-3 * np.max(res.vector.values)


def test_iterate_monotone_objective(ball_100_10):
    # manual averaging steps are monotone in the objective and componentwise
    g = ball_100_10.grid
    F = BoundVector(M=100, R=10.0, values=np.minimum(2 * g**6, 8 * g**3))
    prev = objective(F)
    for _ in range(8):
        half = 0.5 * (F.values + psi_transform(ball_100_10, F).values)
        nxt = BoundVector(M=100, R=10.0, values=half)
        assert np.all(nxt.values <= F.values + 1e-15)
        cur = objective(nxt)
        assert cur <= prev + 1e-12
        prev, F = cur, nxt


def test_iterate_rejects_infeasible_start(sphere_100_10):
    zero = BoundVector(M=100, R=10.0, values=np.zeros(sphere_100_10.rm))
    with pytest.raises(ValueError, match=r"\(l, m\)"):
        iterate_to_fixed_point(sphere_100_10, zero, 1e-6)


def test_iterate_rejects_bad_eps(sphere_100_10):
    G = g_vector(sphere_100_10)
    with pytest.raises(ValueError, match="eps"):
        iterate_to_fixed_point(sphere_100_10, G, 0.0)


def test_fixed_point_below_majorant_beyond_two():
    mu = RadialMeasure(K=4, delta_weight=0.0, weights=np.array([1.6, 0.4, 1.2, 0.8]))
    nu = RadialMeasure(K=4, delta_weight=0.3, weights=np.array([0.4, 1.2, 0.4, 0.8]))
    psi = build_psi_matrix(mu, nu, M=50, R=4)
    G = g_vector(psi)
    res = iterate_to_fixed_point(psi, G, 1e-8)
    assert np.all(res.vector.values[100:] <= G.values[100:] + 1e-12)


def test_objective_values():
    M, R = 200, 30
    n = M * R
    zero = BoundVector(M=M, R=float(R), values=np.zeros(n))
    assert objective(zero) == 0.0
    g = np.arange(n) / M
    F = BoundVector(M=M, R=float(R), values=np.minimum(2 * g**6, 8 * g**3))
    val = objective(F)
    total = 2.0 ** (4.0 / 3.0) * 12.0 * math.pi
    truncated = total - 32.0 * math.pi / R
    assert val <= total
    assert val == pytest.approx(truncated, rel=0.02)
    double = BoundVector(M=M, R=float(R), values=2 * F.values)
    assert objective(double) == pytest.approx(2 * val, rel=1e-14)


def test_verify_feasible_witness(sphere_100_10):
    zero = BoundVector(M=100, R=10.0, values=np.zeros(sphere_100_10.rm))
    ok, witness = verify_feasible(sphere_100_10, zero)
    assert not ok
    l, m = witness
    assert sphere_100_10.values[l, m] > 0.0


def test_tail_values(sphere_100_10):
    G10 = g_vector(sphere_100_10)
    assert tail_correction(G10, "rigorous") == pytest.approx(
        800.0 * math.pi / 729.0, rel=1e-14
    )
    assert tail_correction(G10, "heuristic") <= tail_correction(G10, "rigorous")
    zero = BoundVector(M=100, R=10.0, values=np.zeros(sphere_100_10.rm))
    assert tail_correction(zero, "heuristic") == 0.0
    with pytest.raises(ValueError, match="tail"):
        tail_correction(G10, "exact")


def test_assemble_constant_values():
    val = assemble_constant(2.0 ** (1.0 / 3.0) * 12.0 * math.pi, 0.5)
    assert val == pytest.approx(4.3117, abs=1e-4)
    assert assemble_constant(0.0, 0.5) == 0.0
    base = assemble_constant(1.7, 0.6)
    for t in (0.5, 2.0, 7.0):
        scaled = assemble_constant(1.7 / t**2, 0.6 * t)
        assert scaled == pytest.approx(base, rel=1e-12)
    with pytest.raises(ValueError):
        assemble_constant(-1.0, 0.5)


def test_certified_bound_ball_reference():
    rep = certified_bound("ball", "ball", M=100, R=10)
    assert rep.feasible
    assert rep.constant == pytest.approx(1.604358, abs=5e-5)
    assert rep.constant == assemble_constant(rep.I_value + rep.tail_value, rep.D_self)
    assert rep.D_self == 0.6
    assert rep.tail_rigorous == pytest.approx(800.0 * math.pi / 729.0, rel=1e-14)
    assert rep.constant_rigorous > rep.constant


def test_certified_bound_rigorous_mode():
    rep = certified_bound("ball", "ball", M=50, R=10, tail_mode="rigorous")
    assert rep.tail_value == rep.tail_rigorous
    assert rep.constant == rep.constant_rigorous


def test_certified_bound_expansion_matches_exact_in_limit():
    ball = make_ball(100)
    rep_exp = certified_bound(ball, ball, M=100, R=10)
    rep_exact = certified_bound("ball", "ball", M=100, R=10)
    assert rep_exp.constant == pytest.approx(rep_exact.constant, abs=2e-4)


def test_certified_bound_stage_errors():
    with pytest.raises(ValueError, match="both measures"):
        certified_bound("ball", make_delta(), M=20, R=2)
    with pytest.raises(RuntimeError, match="stage 'kernel'"):
        certified_bound(make_delta(), make_delta(), M=20, R=2)


def test_constant_monotone_in_R_and_I_nondecreasing():
    constants, ivalues = [], []
    for R in (10, 20, 30, 40):
        rep = certified_bound("ball", "ball", M=100, R=R)
        constants.append(rep.constant)
        ivalues.append(rep.I_value)
    assert all(b <= a + 1e-6 for a, b in zip(constants, constants[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(ivalues, ivalues[1:]))


def test_lp_oracle_zero_matrix():
    psi = PsiMatrix(M=2, R=5.0, values=np.zeros((10, 10)))
    assert lp_oracle(psi) == 0.0


def test_lp_oracle_hand_case():
    # M=1, R=3: variables F_1, F_2 with weights 4pi and 4pi/32;
    # constraints 2F_1 >= 2, F_1 + F_2 >= 1, F_2 >= 0 -> optimum (1, 0)
    values = np.array([[0.0, 0.0, 0.0], [0.0, 2.0, 1.0], [0.0, 1.0, 0.0]])
    psi = PsiMatrix(M=1, R=3.0, values=values)
    assert lp_oracle(psi) == pytest.approx(4.0 * math.pi, rel=1e-9)
    # brute-force vertex enumeration over candidate (F_1, F_2) pairs
    w = np.array([4.0 * math.pi, 4.0 * math.pi / 32.0])
    candidates = []
    for f1 in (0.0, 0.5, 1.0, 2.0):
        for f2 in (0.0, 0.5, 1.0, 2.0):
            if 2 * f1 >= 2.0 and f1 + f2 >= 1.0 and 2 * f2 >= 0.0:
                candidates.append(w @ (f1, f2))
    assert min(candidates) == pytest.approx(4.0 * math.pi, rel=1e-12)


def test_lp_oracle_sandwich_small_sphere_grid():
    psi = build_psi_matrix_exact("sphere", "sphere", M=4, R=5)
    assert psi.rm == 20
    G = g_vector(psi)
    res = iterate_to_fixed_point(psi, G, 1e-6)
    lp = lp_oracle(psi)
    fixed = objective(res.vector)
    assert lp <= fixed + 1e-9
    assert fixed <= objective(G) + 1e-12
    assert fixed <= lp * 1.05


def test_lp_oracle_refuses_large_grid(sphere_100_10):
    with pytest.raises(ValueError, match="40"):
        lp_oracle(sphere_100_10)


def test_bound_vector_binary_round_trip(tmp_path, sphere_100_10):
    from lobound.storage import load_bound_vector, save_bound_vector

    G = g_vector(sphere_100_10)
    path = tmp_path / "g.bin"
    save_bound_vector(path, G)
    back = load_bound_vector(path)
    assert back.M == G.M and back.R == G.R
    np.testing.assert_array_equal(back.values, G.values)
