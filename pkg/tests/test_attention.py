import numpy as np
import pytest

from fcnet.attention import attn_forward_parallel, attn_forward_step, init_attn_params, new_kv_cache
from fcnet.model import FcnetConfig, gelu, layer_norm


def cfg(**kw):
    base = dict(d_s=3, d_a=2, d_h=8, d_q=6, layers=2, n=5, m=3)
    base.update(kw)
    return FcnetConfig(**base)


def stream(x, p):
    kv = new_kv_cache(p.cfg)
    return np.stack([attn_forward_step(row, p, kv) for row in x]), kv


@pytest.mark.parametrize("T", [1, 4, 5, 13])
def test_parallel_matches_step(T):
    p = init_attn_params(cfg(), 0)
    x = np.random.default_rng(T).standard_normal((T, 3))
    out, kv = stream(x, p)
    np.testing.assert_allclose(out, attn_forward_parallel(x, p), atol=1e-9)
    assert kv.length == min(T, 5)


def test_first_token_attends_only_to_itself():
    # with one key, softmax weight is 1 and attention returns the value row
    c = cfg(layers=1)
    p = init_attn_params(c, 2)
    x = np.random.default_rng(0).standard_normal(3)
    h = x @ p["enc.w"] + p["enc.b"]
    a, _ = layer_norm(h, p["layers.0.ln1.scale"], p["layers.0.ln1.shift"])
    v = (a @ p["layers.0.attn.wqkv"])[16:]
    y = v @ p["layers.0.attn.wo"] + h
    b, _ = layer_norm(y, p["layers.0.ln2.scale"], p["layers.0.ln2.shift"])
    y = gelu(b @ p["layers.0.ffn.w1"] + p["layers.0.ffn.b1"]) @ p["layers.0.ffn.w2"] + p["layers.0.ffn.b2"] + y
    ref = gelu(y @ p["dec.w1"] + p["dec.b1"]) @ p["dec.w2"] + p["dec.b2"]
    np.testing.assert_allclose(attn_forward_step(x, p, new_kv_cache(c)), ref, atol=1e-12)


def test_causal_and_windowed():
    # a single layer only sees positions t-4 .. t
    p = init_attn_params(cfg(layers=1), 1)
    x = np.random.default_rng(3).standard_normal((14, 3))
    base = attn_forward_parallel(x, p)
    y = x.copy()
    y[7] += 5.0
    moved = attn_forward_parallel(y, p)
    np.testing.assert_array_equal(moved[:7], base[:7])
    np.testing.assert_array_equal(moved[12:], base[12:])
    assert np.abs(moved[7:12] - base[7:12]).min() > 0


def test_cache_holds_at_most_n_entries():
    c = cfg()
    p = init_attn_params(c, 0)
    kv = new_kv_cache(c)
    for i in range(17):
        attn_forward_step(np.full(3, 0.1 * i), p, kv)
        assert kv.length <= c.n
    assert kv.keys[0].shape == (c.n, c.d_h)
    kv.reset()
    assert kv.length == 0 and kv.pos == 0


def test_step_rejects_bad_input():
    c = cfg()
    p = init_attn_params(c, 0)
    kv = new_kv_cache(c)
    with pytest.raises(ValueError):
        attn_forward_step(np.array([0.0, np.nan, 1.0]), p, kv)
    with pytest.raises(ValueError):
        attn_forward_step(np.zeros(4), p, kv)
    assert kv.length == 0


def test_params_drop_csc_and_add_attention():
    p = init_attn_params(cfg(), 0)
    assert not any(".csc." in k for k in p.tensors)
    assert p["layers.1.attn.wqkv"].shape == (8, 24)
