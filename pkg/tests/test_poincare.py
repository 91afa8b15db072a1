import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heisgeom import cayley, poincare
from heisgeom.group import GroupElement


@pytest.fixture(scope="module")
def mini5():
    return poincare.build_forms(1, "mini:5")


def naive_form(pairs, f):
    return sum(w * (f[i] - f[j]) ** 2 for i, j, w in pairs)


@given(st.integers(2, 12), st.data())
def test_quadform_matches_naive_sum(n, data):
    m = data.draw(st.integers(1, 30))
    i = data.draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m))
    j = data.draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m))
    w = data.draw(st.lists(st.floats(0.1, 5.0), min_size=m, max_size=m))
    f = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n)))
    q = poincare.QuadForm.from_pairs(n, i, j, w)
    expected = naive_form(zip(i, j, w), f)
    assert q.evaluate(f) == pytest.approx(expected, rel=1e-10, abs=1e-10)
    assert float(f @ (q.matrix() @ f)) == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_quadform_validation():
    with pytest.raises(ValueError):
        poincare.QuadForm.from_pairs(3, [0], [3])
    with pytest.raises(ValueError):
        poincare.QuadForm.from_pairs(3, [0], [1], [-1.0])


def test_forms_match_definition(mini5):
    """Both sides evaluated through explicit group translations."""
    fp = mini5
    rng = np.random.default_rng(3)
    f = rng.standard_normal(fp.vertex_count)
    v = fp.vertices

    def val(x, y, z):
        idx = v.index(x, y, z)[0]
        assert idx >= 0
        return f[idx]

    L = 0.0
    for g in cayley.ball(1).elements():
        for k in range(1, 2):
            L += (val(g.x, g.y, g.z + k) - val(g.x, g.y, g.z)) ** 2 / k**2
    M = 0.0
    for g in cayley.ball(5).elements():
        ga = g * GroupElement(1, 0, 0)
        gb = g * GroupElement(0, 1, 0)
        M += (val(ga.x, ga.y, ga.z) - val(g.x, g.y, g.z)) ** 2
        M += (val(gb.x, gb.y, gb.z) - val(g.x, g.y, g.z)) ** 2
    assert fp.L.evaluate(f) == pytest.approx(L, rel=1e-12)
    assert fp.M.evaluate(f) == pytest.approx(M, rel=1e-12)


def test_dense_and_iterative_agree(mini5):
    dense = poincare.best_constant(mini5, "dense")
    it = poincare.best_constant(mini5, "iterative")
    assert dense.constant == pytest.approx(1.2183431894606198, rel=1e-9)
    assert it.constant == pytest.approx(dense.constant, rel=1e-8)
    assert it.residual <= 1e-6


def test_witness_attains_constant(mini5):
    res = poincare.best_constant(mini5, "dense")
    w = res.witness
    assert mini5.L.evaluate(w) / mini5.M.evaluate(w) == pytest.approx(res.constant, rel=1e-9)


def test_sample_method_is_a_lower_estimate(mini5):
    C = poincare.best_constant(mini5, "dense").constant
    s = poincare.best_constant(mini5, "sample", samples=200, seed=1)
    assert 0 < s.constant <= C + 1e-12


def test_rayleigh_bound_and_vector_reduction(mini5):
    C = poincare.best_constant(mini5, "dense").constant
    rng = np.random.default_rng(11)
    for _ in range(50):
        f = rng.standard_normal(mini5.vertex_count)
        assert mini5.L.evaluate(f) <= C * mini5.M.evaluate(f) + 1e-8 * mini5.M.evaluate(f)
        F = rng.standard_normal((mini5.vertex_count, 2))
        assert mini5.L.evaluate(F) / mini5.M.evaluate(F) <= C + 1e-12


def test_convergence_error_carries_diagnostics(mini5):
    with pytest.raises(poincare.ConvergenceError) as err:
        poincare.best_constant(mini5, "iterative", max_iter=1, tol=1e-15, block=1)
    e = err.value
    assert e.iterations == 1
    assert e.estimate > 0
    assert e.residual > 0


def test_disconnected_gradient_graph():
    q = poincare.QuadForm.from_pairs(4, [0, 2], [1, 3])
    with pytest.raises(poincare.DisconnectedGraph):
        poincare.generalized_top(q, q, "dense")


def test_unknown_method(mini5):
    with pytest.raises(ValueError):
        poincare.best_constant(mini5, "magic")


def test_preset_parsing():
    assert poincare.parse_preset("paper") == ("paper", 22)
    assert poincare.parse_preset("mini:7") == ("mini(7)", 7)
    assert poincare.parse_preset("mini(6)") == ("mini(6)", 6)
    assert poincare.parse_preset(9) == ("mini(9)", 9)
    for bad in ("mini:4", "huge", "mini:x"):
        with pytest.raises(ValueError):
            poincare.parse_preset(bad)


def test_central_sum_oracle():
    assert poincare.central_sum(2) == pytest.approx(16 + 36 / 4 + 64 / 9 + 64 / 16)
    assert poincare.central_sum(1) == 16.0


def test_lower_bound_formula():
    C = 1.2
    nR, nO = len(cayley.ball(2)), len(cayley.ball(44))
    expected = math.sqrt(nR * poincare.central_sum(2) / (2 * C * nO))
    assert poincare.distortion_lower_bound(2, C) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(ValueError):
        poincare.distortion_lower_bound(2, 0.0)


def test_lower_bound_below_sdp_distortion(mini5):
    # distortion of the vertex set dominates that of any subset, here B_1
    from heisgeom.distortion import ball_instance, min_distortion_l2

    C = poincare.best_constant(mini5, "dense").constant
    lb = poincare.distortion_lower_bound(1, C, rho=5)
    sdp = min_distortion_l2(ball_instance(1))
    assert 0 < lb <= sdp.D


def test_local_constant_dense_matches_iterative():
    d = poincare.local_constant(1, "dense", inner_factor=2, outer_factor=5)
    i = poincare.local_constant(1, "iterative", inner_factor=2, outer_factor=5)
    assert i.constant == pytest.approx(d.constant, rel=1e-8)
    with pytest.raises(ValueError):
        poincare.build_local_forms(1, inner_factor=6, outer_factor=5)


def test_witness_csv(mini5):
    res = poincare.best_constant(mini5, "dense")
    text = poincare.witness_csv(mini5.vertices, res.witness)
    lines = text.strip().split("\n")
    assert lines[0] == "x,y,z,value"
    assert len(lines) == mini5.vertex_count + 1


def frechet_map(R):
    """Isometric embedding of B_R into l_inf: x -> (d(x, y) - d(e, y))_y."""
    b = cayley.ball(R)
    D = cayley.pairwise_distances(b.x, b.y, b.z, R).astype(float)
    e = int(b.index(0, 0, 0)[0])
    return b, D - D[e][None, :]


@pytest.mark.parametrize("R", [4, 5, 6, 8])
def test_extension_is_twice_lipschitz(R):
    b, f = frechet_map(R)
    ext = poincare.extend_lipschitz(f, b, R)
    big = cayley.ball(R + 2)
    here = ext.evaluate(big.x, big.y, big.z)
    worst = 0.0
    for g in ((1, 0, 0), (0, 1, 0)):
        nx, ny, nz = big.x + g[0], big.y + g[1], big.z + g[2] + big.x * g[1]
        there = ext.evaluate(nx, ny, nz)
        worst = max(worst, float(np.abs(here - there).max()))
    assert worst <= 2.0 + 1e-12


def test_extension_branches():
    b, f = frechet_map(6)
    ext = poincare.extend_lipschitz(f, b, 6)
    half = b.dist <= 3
    assert np.array_equal(ext.evaluate(b.x[half], b.y[half], b.z[half]), f[half])
    assert not ext(GroupElement(0, 0, 100)).any()
    ring = b.dist == 5
    got = ext.evaluate(b.x[ring], b.y[ring], b.z[ring])
    assert np.allclose(got, 2 * (1 - 5 / 6) * f[ring])
    with pytest.raises(ValueError):
        poincare.extend_lipschitz(f + 1, b, 6)
