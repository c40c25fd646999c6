"""Backend equivalence: the compiled kernels and the numpy reference must
agree on every function, and the batch variants must agree with the scalar
ones row by row."""

import numpy as np
import pytest

from guessgame._kernels import pyref

try:
    from guessgame import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [pyref] + ([_ckernels] if _ckernels is not None else [])
PAIR = pytest.mark.skipif(_ckernels is None, reason="compiled kernels unavailable")


def _random_state(rng, n_obj=8, n_pred=16, v_size=24):
    post = rng.random(n_obj)
    post /= post.sum()
    codes = rng.integers(0, 3, size=(n_pred, n_obj)).astype(np.int8)
    asked = (rng.random(n_pred) < 0.3).astype(np.uint8)
    last = int(rng.integers(-1, v_size))
    j, m = int(rng.integers(1, 6)), int(rng.integers(0, 12))
    return post, codes, asked, last, j, m


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda b: b.NAME)
def test_masked_softmax_properties(impl):
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = int(rng.integers(2, 30))
        logits = rng.normal(0, 3, v)
        mask = (rng.random(v) < 0.5).astype(np.uint8)
        if mask.sum() == 0:
            mask[int(rng.integers(v))] = 1
        probs = impl.masked_softmax(logits, mask)
        assert abs(probs.sum() - 1.0) < 1e-9
        assert np.all(probs[mask == 0] == 0.0)
        assert np.all(probs[mask == 1] > 0.0)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda b: b.NAME)
def test_masked_softmax_all_false_raises(impl):
    with pytest.raises(ValueError):
        impl.masked_softmax(np.zeros(4), np.zeros(4, dtype=np.uint8))


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda b: b.NAME)
def test_sample_index_edges(impl):
    probs = np.array([0.0, 0.5, 0.5, 0.0])
    assert impl.sample_index(probs, 0.0) == 1
    assert impl.sample_index(probs, 0.4999) == 1
    assert impl.sample_index(probs, 0.5001) == 2
    assert impl.sample_index(probs, 0.999999999) == 2
    # float residue: u at or beyond the total falls back to the last positive
    assert impl.sample_index(probs * (1 - 1e-12), 1.0 - 1e-13) == 2


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda b: b.NAME)
def test_bayes_update_zero_normalizer(impl):
    post = np.array([0.5, 0.5])
    codes = np.array([0, 0], dtype=np.int8)
    out, inconsistent = impl.bayes_update(post, codes, 2, 0.0)
    assert inconsistent
    assert np.allclose(out, 0.5)


@PAIR
def test_scalar_kernels_match_reference():
    rng = np.random.default_rng(1)
    v_size = 24
    for _ in range(200):
        post, codes, asked, last, j, m = _random_state(rng)
        f_py = pyref.featurize(post, codes, asked, last, j, m, 5, 12, v_size)
        f_c = _ckernels.featurize(post, codes, asked, last, j, m, 5, 12, v_size)
        assert np.allclose(f_py, f_c, atol=1e-12)

        logits = rng.normal(0, 2, v_size)
        mask = (rng.random(v_size) < 0.4).astype(np.uint8)
        if mask.sum() == 0:
            mask[0] = 1
        p_py = pyref.masked_softmax(logits, mask)
        p_c = _ckernels.masked_softmax(logits, mask)
        assert np.allclose(p_py, p_c, atol=1e-13)

        u = rng.random()
        assert pyref.sample_index(p_py, u) == _ckernels.sample_index(p_py, u)

        w = rng.normal(0, 1, (v_size, f_py.shape[0]))
        b = rng.normal(0, 1, v_size)
        q_py = pyref.policy_probs(w, b, f_py, mask)
        q_c = _ckernels.policy_probs(w, b, f_py, mask)
        assert np.allclose(q_py, q_c, atol=1e-12)

        obs = int(rng.integers(3))
        eps = float(rng.choice([0.0, 0.1, 0.3]))
        row = codes[0]
        o_py, i_py = pyref.bayes_update(post, row, obs, eps)
        o_c, i_c = _ckernels.bayes_update(post, row, obs, eps)
        assert i_py == i_c
        assert np.allclose(o_py, o_c, atol=1e-15)

        g_py = pyref.info_gains(post, codes)
        g_c = _ckernels.info_gains(post, codes)
        assert np.allclose(g_py, g_c, atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda b: b.NAME)
def test_batch_matches_scalar(impl):
    rng = np.random.default_rng(2)
    rows = 17
    v_size = 24
    post = np.empty((rows, 8))
    codes = np.empty((rows, 16, 8), dtype=np.int8)
    asked = np.empty((rows, 16), dtype=np.uint8)
    last = np.empty(rows, dtype=np.int64)
    j = np.empty(rows, dtype=np.int64)
    m = np.empty(rows, dtype=np.int64)
    for r in range(rows):
        post[r], codes[r], asked[r], last[r], j[r], m[r] = _random_state(rng)
    batch = impl.featurize_batch(post, codes, asked, last, j, m, 5, 12, v_size)
    for r in range(rows):
        single = impl.featurize(post[r], codes[r], asked[r], int(last[r]), int(j[r]), int(m[r]), 5, 12, v_size)
        assert np.allclose(batch[r], single, atol=1e-12)

    logits = rng.normal(0, 2, (rows, v_size))
    masks = (rng.random((rows, v_size)) < 0.4).astype(np.uint8)
    masks[:, 3] = 1
    probs = impl.masked_softmax_batch(np.ascontiguousarray(logits), masks)
    for r in range(rows):
        assert np.allclose(probs[r], impl.masked_softmax(logits[r], masks[r]), atol=1e-13)

    u = rng.random(rows)
    acts = impl.sample_index_batch(probs, u)
    for r in range(rows):
        assert acts[r] == impl.sample_index(probs[r], float(u[r]))


@PAIR
def test_batch_kernels_match_reference():
    rng = np.random.default_rng(3)
    rows, v_size = 9, 24
    post = np.empty((rows, 8))
    codes = np.empty((rows, 16, 8), dtype=np.int8)
    asked = np.empty((rows, 16), dtype=np.uint8)
    last = np.empty(rows, dtype=np.int64)
    j = np.empty(rows, dtype=np.int64)
    m = np.empty(rows, dtype=np.int64)
    for r in range(rows):
        post[r], codes[r], asked[r], last[r], j[r], m[r] = _random_state(rng)
    f_py = pyref.featurize_batch(post, codes, asked, last, j, m, 5, 12, v_size)
    f_c = _ckernels.featurize_batch(post, codes, asked, last, j, m, 5, 12, v_size)
    assert np.allclose(f_py, f_c, atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda b: b.NAME)
def test_featurize_entropy_and_blocks(impl):
    # uniform posterior over 4: entropy ln 4, split score = yes fraction
    post = np.full(4, 0.25)
    codes = np.array([[0, 0, 1, 1], [2, 2, 2, 2]], dtype=np.int8)
    asked = np.array([1, 0], dtype=np.uint8)
    v_size = 5
    f = impl.featurize(post, codes, asked, -1, 1, 0, 5, 12, v_size)
    assert f[0] == pytest.approx(np.log(4))
    assert f[1] == pytest.approx(0.25)
    base = 7 + v_size
    assert f[base : base + 2].tolist() == [0.5, 0.0]
    assert f[base + 2 : base + 4].tolist() == [1.0, 0.0]
    # perfect half split gains ln 2; uniform-NA question gains nothing
    assert f[base + 4] == pytest.approx(np.log(2))
    assert f[base + 5] == pytest.approx(0.0, abs=1e-12)
    # fresh gain zeroes the asked predicate
    assert f[base + 6] == pytest.approx(0.0, abs=1e-12)
    assert f[base + 7] == pytest.approx(0.0, abs=1e-12)
