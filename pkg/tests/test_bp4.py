import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from asced.bp4 import (Bp4Config, Bp4Decoder, TannerGraph, cn_update, decode, decode_graph, hard_decision,
                       prior_llr, quantize, vn_update)
from asced.channel import sample_depolarizing_uniforms
from asced.codes import syndrome
from asced.degeneracy import logically_equivalent
from asced.pauli import phi, symplectic_gram

LABELS = {1: "X", 2: "Z", 3: "Y"}


def reference_decode(h, z, p0, i_max, clamp=30.0):
    """Flooding BP4 assembled only from the per-node operator functions."""
    graph = TannerGraph.from_check_matrix(h)
    n = graph.n
    prior = prior_llr(p0)
    checks = [(graph.check_neighbors(j), graph.edge_label[graph.check_ptr[j]:graph.check_ptr[j + 1]])
              for j in range(graph.m)]
    v2c = {(j, int(i)): prior.copy() for j, (vs, _) in enumerate(checks) for i in vs}
    post = np.tile(prior, (n, 1))
    est = hard_decision(post)
    if np.array_equal(syndrome(h, est), z):
        return est, True, 1
    for it in range(1, i_max + 1):
        c2v = {}
        for j, (vs, labs) in enumerate(checks):
            incoming = [quantize(v2c[j, int(i)], int(lab), clamp) for i, lab in zip(vs, labs)]
            for i, msg in zip(vs, cn_update(incoming, int(z[j]), clamp)):
                c2v[j, int(i)] = msg
        for i in range(n):
            js = [j for j, (vs, _) in enumerate(checks) if i in vs]
            labs = [LABELS[int(checks[j][1][list(checks[j][0]).index(i)])] for j in js]
            out, post[i] = vn_update(prior, [c2v[j, i] for j in js], labs)
            for j, o in zip(js, out):
                v2c[j, i] = o
        est = hard_decision(post)
        if np.array_equal(syndrome(h, est), z):
            return est, True, it
    return est, False, i_max


def test_prior_examples():
    assert np.allclose(prior_llr(0.75), 0)
    assert np.allclose(prior_llr(0.3), math.log(7))
    assert np.allclose(prior_llr(0.49), math.log(1.53 / 0.49))
    assert np.allclose(prior_llr(0.49), 1.1386, atol=1e-4)
    with pytest.raises(ValueError):
        prior_llr(0.0)
    with pytest.raises(ValueError):
        prior_llr(1.0)


def test_quantize_examples():
    a = math.log(7)
    for eta in "XYZ":
        assert quantize([a, a, a], eta) == pytest.approx(math.log(4))
    assert quantize([1, 2, 3], "X") == pytest.approx(2.0, abs=1e-12)
    assert quantize([100, 100, 100], "X", clamp=30) == 30
    assert quantize([100, -100, 0], "X", clamp=30) == -30
    with pytest.raises(ValueError):
        quantize([0, 0, 0], "I")


@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.sampled_from("XYZ"))
def test_quantize_matches_probability_domain(msg, eta):
    # probabilities proportional to (1, e^-LX, e^-LZ, e^-LY)
    probs = {"I": 1.0, "X": math.exp(-msg[0]), "Z": math.exp(-msg[1]), "Y": math.exp(-msg[2])}
    commute = probs["I"] + probs[eta]
    anti = sum(v for k, v in probs.items() if k not in ("I", eta))
    direct = math.log(commute / anti)
    assert quantize(msg, eta) == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_cn_update_examples():
    assert np.allclose(cn_update([1.5, -0.7], 0), [-0.7, 1.5])
    assert np.allclose(cn_update([1.5, -0.7], 1), [0.7, -1.5])
    out = cn_update([2.0, 2.0, 25.0], 0)
    assert out[0] == pytest.approx(2 * math.atanh(math.tanh(1.0) * math.tanh(12.5)))
    assert cn_update([2.0, 2.0, 30.0], 0)[2] == pytest.approx(2 * math.atanh(math.tanh(1.0) ** 2))
    assert cn_update([2.0, 2.0, 30.0], 0)[2] == pytest.approx(1.3250, abs=1e-4)
    # a zero input silences every other edge
    assert np.allclose(cn_update([0.0, 3.0, 4.0], 0), [2 * math.atanh(math.tanh(1.5) * math.tanh(2.0)), 0.0, 0.0])
    with pytest.raises(ValueError):
        cn_update([], 0)


def test_cn_update_high_degree_stays_finite():
    out = cn_update(np.full(400, 1e-3), 0)
    assert np.all(np.isfinite(out))
    out = cn_update(np.full(5, 40.0), 0)
    assert np.all(out == 30.0)


@given(st.lists(st.floats(-25, 25).filter(lambda x: abs(x) > 1e-6), min_size=1, max_size=12))
def test_cn_sign_symmetry_and_direct_formula(msgs):
    a = cn_update(msgs, 0)
    b = cn_update(msgs, 1)
    assert np.array_equal(a, -b)
    for k in range(len(msgs)):
        prod = np.prod([math.tanh(m / 2) for i, m in enumerate(msgs) if i != k])
        if abs(prod) < 1 - 1e-12:
            assert a[k] == pytest.approx(min(max(2 * math.atanh(prod), -30), 30), rel=1e-6, abs=1e-9)


def test_vn_update_examples():
    prior = prior_llr(0.1)
    out, post = vn_update(prior, [], [])
    assert out.shape == (0, 3) and np.allclose(post, prior)
    out, post = vn_update(prior, [0.8], ["Z"])
    assert np.allclose(post, prior + [0.8, 0.0, 0.8])
    assert np.allclose(out[0], prior)


def test_vn_update_leave_one_out(rng):
    prior = prior_llr(0.2)
    msgs = rng.normal(size=6)
    labs = rng.choice(list("XYZ"), 6)
    out, post = vn_update(prior, msgs, labs)
    anti = {"X": {"Z", "Y"}, "Z": {"X", "Y"}, "Y": {"X", "Z"}}
    for k in range(6):
        excluded = np.array([msgs[k] if zeta in anti[labs[k]] else 0.0 for zeta in ("X", "Z", "Y")])
        assert np.allclose(post - out[k], excluded)


def test_hard_decision_examples():
    assert not hard_decision([[1, 2, 3], [0.5, 0.5, 0.5]]).any()
    assert np.array_equal(hard_decision([[-1, 3, 2]]), phi("X"))
    assert np.array_equal(hard_decision([[-1, -1, 5]]), phi("X"))
    assert np.array_equal(hard_decision([[4, -2, -2]]), phi("Y"))
    assert np.array_equal(hard_decision([[4, -3, -2]]), phi("Z"))
    assert np.array_equal(hard_decision([[0.0, 1.0, 1.0]]), phi("X"))
    # rounding-level differences count as ties
    assert np.array_equal(hard_decision([[3.5, -4.341886798208362, -4.34188679820836]]), phi("Y"))


def test_tanner_graph(toric2):
    g = TannerGraph.from_check_matrix(toric2.h)
    assert (g.n, g.m, g.n_edges) == (8, 8, 32)
    assert set(g.edge_label[:16]) == {1} and set(g.edge_label[16:]) == {2}
    for j in range(8):
        assert set(g.check_neighbors(j)) == set(np.nonzero(toric2.h[j, :8] | toric2.h[j, 8:])[0])
    y = TannerGraph.from_check_matrix(phi("YX")[None])
    assert y.edge_label.tolist() == [3, 1]
    assert y.var_neighbors(0).tolist() == [0]


@pytest.mark.parametrize("p0", [0.1, 0.3, 0.49])
def test_zero_syndrome_fast_path(gb46, p0):
    res = decode(gb46.h, np.zeros(gb46.m, dtype=np.uint8), Bp4Config(p0, 25))
    assert not res.estimate.any() and res.converged and res.iterations_used == 1


def test_weight_one_errors_toric4(toric4):
    n = toric4.n
    errors = []
    for i in range(n):
        for p in "XYZ":
            s = ["I"] * n
            s[i] = p
            errors.append(phi("".join(s)))
    errors = np.array(errors)
    dec = Bp4Decoder(p0=0.1).fit(toric4.h)
    est, conv, iters = dec.decode_batch(symplectic_gram(errors, toric4.h))
    assert conv.all()
    assert np.array_equal(symplectic_gram(est, toric4.h), symplectic_gram(errors, toric4.h))
    assert all(logically_equivalent(toric4, e, f) for e, f in zip(errors, est))


@pytest.mark.parametrize("fixture,p,i_max,count", [("toric3", 0.08, 15, 150), ("toric4", 0.1, 10, 60),
                                                   ("gb46", 0.05, 10, 40)])
def test_kernel_matches_reference_decoder(fixture, p, i_max, count, request, rng):
    code = request.getfixturevalue(fixture)
    errors = sample_depolarizing_uniforms(rng.random((count, code.n)), p)
    zs = symplectic_gram(errors, code.h)
    est, conv, iters = decode_graph(TannerGraph.from_check_matrix(code.h), zs, Bp4Config(p, i_max))
    for b in range(len(zs)):
        r_est, r_conv, r_it = reference_decode(code.h, zs[b], p, i_max)
        assert (bool(conv[b]), int(iters[b])) == (r_conv, r_it)
        assert np.array_equal(est[b], r_est)


def test_converged_results_match_syndrome(gb46, rng):
    errors = sample_depolarizing_uniforms(rng.random((500, gb46.n)), 0.06)
    zs = symplectic_gram(errors, gb46.h)
    for schedule in ("flooding", "serial"):
        est, conv, iters = Bp4Decoder(p0=0.06, schedule=schedule).fit(gb46.h).decode_batch(zs)
        assert conv.mean() > 0.8
        assert np.array_equal(symplectic_gram(est[conv], gb46.h), zs[conv])
        assert (iters >= 1).all() and (iters <= 25).all()
        assert (iters[~conv] == 25).all()


def test_decode_is_deterministic(gb46, rng):
    z = symplectic_gram(sample_depolarizing_uniforms(rng.random((1, 46)), 0.08), gb46.h)[0]
    a = decode(gb46.h, z, Bp4Config(0.08, 25))
    b = decode(gb46.h, z, Bp4Config(0.08, 25))
    assert np.array_equal(a.estimate, b.estimate) and (a.converged, a.iterations_used) == (b.converged,
                                                                                          b.iterations_used)


def test_large_clamp_does_not_overflow(gb46, rng):
    errors = sample_depolarizing_uniforms(rng.random((50, 46)), 0.05)
    zs = symplectic_gram(errors, gb46.h)
    est, conv, _ = decode_graph(TannerGraph.from_check_matrix(gb46.h), zs, Bp4Config(0.05, 25, clamp=300))
    assert conv.any()
    assert np.array_equal(symplectic_gram(est[conv], gb46.h), zs[conv])


def test_config_validation():
    with pytest.raises(ValueError):
        Bp4Config(p0=0.75)
    with pytest.raises(ValueError):
        Bp4Config(i_max=0)
    with pytest.raises(ValueError):
        Bp4Config(clamp=0)
    with pytest.raises(ValueError):
        Bp4Config(clamp=1000)
    with pytest.raises(ValueError):
        Bp4Config(schedule="random")


def test_estimator_api(toric2):
    dec = Bp4Decoder(p0=0.2, max_iter=7)
    assert dec.get_params() == {"p0": 0.2, "max_iter": 7, "clamp": 30.0, "schedule": "flooding"}
    assert clone(dec).get_params() == dec.get_params()
    with pytest.raises(NotFittedError):
        dec.predict(np.zeros((1, 8), dtype=np.uint8))
    dec.fit(toric2.h)
    assert (dec.n_qubits_, dec.n_checks_) == (8, 8)
    assert dec.predict(np.zeros((3, 8), dtype=np.uint8)).shape == (3, 16)
    res = dec.decode(np.zeros(8, dtype=np.uint8))
    assert res.converged and res.iterations_used == 1
    with pytest.raises(ValueError):
        dec.predict(np.zeros((1, 7), dtype=np.uint8))
    with pytest.raises(ValueError):
        Bp4Decoder(p0=0.9).fit(toric2.h)
