import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lascl.corpus import FeatureVector
from lascl.encoder import (
    EncoderDims,
    EncoderParams,
    backward,
    cosine_matrix,
    cosine_matrix_backward,
    cosine_sim,
    encode,
    encode_batch,
    init_params,
)
from lascl.errors import ShapeMismatch

import oracles

SMALL = EncoderDims(16, 4, 5, 3)


def random_fvs(rng, n, buckets):
    out = []
    for _ in range(n):
        k = int(rng.integers(1, 6))
        idx = rng.choice(buckets, size=k, replace=False)
        out.append(FeatureVector({int(i): int(rng.integers(1, 4)) for i in idx}, buckets))
    return out


class TestInit:
    def test_deterministic(self):
        a, b = init_params(SMALL, 5), init_params(SMALL, 5)
        for (_, x), (_, y) in zip(a.items(), b.items()):
            np.testing.assert_array_equal(x, y)

    def test_zero_biases(self):
        p = init_params(SMALL, 1)
        assert not p.b1.any() and not p.b2.any()

    def test_glorot_bounds(self):
        p = init_params(EncoderDims(64, 8, 6, 4), 2)
        for M in (p.E, p.W1, p.W2):
            bound = math.sqrt(6 / (M.shape[0] + M.shape[1]))
            assert np.abs(M).max() <= bound
            assert np.abs(M).max() > 0.5 * bound

    def test_dims_positive(self):
        with pytest.raises(ValueError):
            EncoderDims(0, 1, 1, 1)


class TestEncode:
    def test_empty_with_zero_head(self):
        p = init_params(SMALL, 0)
        p.W2[:] = 0
        np.testing.assert_array_equal(encode(p, FeatureVector({}, 16)), np.zeros(3))

    def test_zero_row_gives_bias(self):
        p = init_params(SMALL, 0)
        p.E[3] = 0
        p.b2 = np.array([0.5, -1.0, 2.0])
        np.testing.assert_array_equal(encode(p, FeatureVector({3: 1}, 16)), p.b2)

    def test_hand_evaluated(self):
        # m = [0.5, 1.0]; h = tanh(m); z = [h0 + 0.1, h0 - h1]
        p = EncoderParams(
            E=np.array([[1.0, 0.0], [0.0, 2.0]]),
            W1=np.eye(2), b1=np.zeros(2),
            W2=np.array([[1.0, 1.0], [0.0, -1.0]]), b2=np.array([0.1, 0.0]),
        )
        z = encode(p, FeatureVector({0: 1, 1: 1}, 2))
        h0, h1 = math.tanh(0.5), math.tanh(1.0)
        np.testing.assert_allclose(z, [h0 + 0.1, h0 - h1], rtol=0, atol=1e-15)
        np.testing.assert_allclose(z, [0.5621171572600097, -0.29947699869575516], rtol=0, atol=1e-15)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(4)
        p = init_params(SMALL, 4)
        p.b1 = rng.normal(size=5)
        p.b2 = rng.normal(size=3)
        for fv in random_fvs(rng, 10, 16):
            want = oracles.mlp_forward(p.E.tolist(), p.W1.tolist(), p.b1.tolist(), p.W2.tolist(),
                                       p.b2.tolist(), fv.counts)
            np.testing.assert_allclose(encode(p, fv), want, rtol=1e-12, atol=1e-14)

    def test_batch_of_one(self):
        p = init_params(SMALL, 0)
        fv = FeatureVector({1: 2, 7: 1}, 16)
        np.testing.assert_array_equal(encode_batch(p, [fv])[0], encode(p, fv))

    def test_permutation(self):
        rng = np.random.default_rng(0)
        p = init_params(SMALL, 0)
        fvs = random_fvs(rng, 32, 16)
        perm = rng.permutation(32)
        np.testing.assert_array_equal(encode_batch(p, [fvs[i] for i in perm]), encode_batch(p, fvs)[perm])

    def test_pure(self):
        p = init_params(SMALL, 0)
        fvs = random_fvs(np.random.default_rng(1), 5, 16)
        np.testing.assert_array_equal(encode_batch(p, fvs), encode_batch(p, fvs))

    def test_bucket_out_of_range(self):
        with pytest.raises(ShapeMismatch):
            encode(init_params(SMALL, 0), FeatureVector({16: 1}, 32))


class TestBackward:
    def test_zero_upstream(self):
        p = init_params(SMALL, 0)
        fvs = random_fvs(np.random.default_rng(0), 3, 16)
        g = backward(p, fvs, np.zeros((3, 3)))
        assert all(not a.any() for _, a in g.items())

    def test_scalar_chain_rule(self):
        e, w1, c, w2, b, g = 0.7, -1.3, 0.2, 0.9, 0.4, 1.5
        p = EncoderParams(np.array([[e]]), np.array([[w1]]), np.array([c]),
                          np.array([[w2]]), np.array([b]))
        grads = backward(p, [FeatureVector({0: 2}, 1)], np.array([[g]]))
        t = math.tanh(w1 * e + c)
        assert grads.W2[0, 0] == pytest.approx(g * t, abs=1e-15)
        assert grads.b2[0] == pytest.approx(g, abs=1e-15)
        assert grads.W1[0, 0] == pytest.approx(g * w2 * (1 - t * t) * e, abs=1e-15)
        assert grads.b1[0] == pytest.approx(g * w2 * (1 - t * t), abs=1e-15)
        assert grads.E[0, 0] == pytest.approx(g * w2 * (1 - t * t) * w1, abs=1e-15)

    @pytest.mark.parametrize("seed", range(20))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        p = init_params(SMALL, seed)
        p.b1 = rng.normal(size=5) * 0.1
        p.b2 = rng.normal(size=3) * 0.1
        fvs = random_fvs(rng, 4, 16)
        gz = rng.normal(size=(4, 3))
        grads = backward(p, fvs, gz)
        for name, _ in p.items():
            def objective(x, name=name):
                q = p.copy()
                setattr(q, name, x)
                return float(np.sum(gz * encode_batch(q, fvs)))
            numeric = oracles.central_difference(objective, getattr(p, name))
            errs = oracles.rel_errors(getattr(grads, name), numeric)
            assert errs.size == 0 or errs.max() <= 1e-4, name

    def test_shape_mismatch(self):
        p = init_params(SMALL, 0)
        with pytest.raises(ShapeMismatch):
            backward(p, random_fvs(np.random.default_rng(0), 2, 16), np.zeros((3, 3)))


class TestCosine:
    def test_values(self):
        assert cosine_sim([1, 0], [0, 1]) == 0.0
        assert cosine_sim([2, 0], [1, 0]) == pytest.approx(1.0, abs=1e-12)
        assert cosine_sim([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_zero_vector(self):
        assert cosine_sim([0, 0], [1, 2]) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.floats(0.01, 100),
    )
    def test_symmetric_and_scale_invariant(self, a, b, alpha):
        a, b = np.array(a), np.array(b)
        assert cosine_sim(a, b) == pytest.approx(cosine_sim(b, a), abs=1e-12)
        # the additive guard shifts the value by ~eps / (|a||b|); negligible once that product is >= 1
        prod = np.linalg.norm(a) * np.linalg.norm(b)
        if prod >= 1 and alpha * prod >= 1:
            assert cosine_sim(alpha * a, b) == pytest.approx(cosine_sim(a, b), abs=1e-12)
        assert -1.0 - 1e-12 <= cosine_sim(a, b) <= 1.0 + 1e-12

    def test_matrix_backward_fd(self):
        rng = np.random.default_rng(3)
        A, B, G = rng.normal(size=(4, 3)), rng.normal(size=(5, 3)), rng.normal(size=(4, 5))
        dA, dB = cosine_matrix_backward(A, B, G)
        nA = oracles.central_difference(lambda x: float(np.sum(G * cosine_matrix(x, B))), A)
        nB = oracles.central_difference(lambda x: float(np.sum(G * cosine_matrix(A, x))), B)
        assert oracles.rel_errors(dA, nA).max() <= 1e-6
        assert oracles.rel_errors(dB, nB).max() <= 1e-6
