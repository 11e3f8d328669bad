import numpy as np

from flowloss import FlowField, dequantize, pack, quantize, unpack
from flowloss.quantization import PackedImage, QuantizedFlow


def field(u, v):
    return FlowField(u=np.atleast_2d(np.asarray(u, dtype=np.float64)),
                     v=np.atleast_2d(np.asarray(v, dtype=np.float64)))


def test_zero_maps_to_zero():
    q = quantize(field([0.0], [0.0]), 64)
    assert q.qu[0, 0] == 0 and q.qv[0, 0] == 0


def test_unit_value_exact():
    q = quantize(field([1.0], [0.0]), 64)
    assert q.qu[0, 0] == 64
    assert dequantize(q).u[0, 0] == 1.0


def test_saturation():
    q = quantize(field([10000.0], [-10000.0]), 64)
    assert q.qu[0, 0] == 32767
    assert q.qv[0, 0] == -32768


def test_round_half_away_from_zero():
    # 0.5 steps exactly: 1/(2*64) quantizes to 1, and symmetrically to -1
    step_half = 0.5 / 64
    q = quantize(field([step_half], [-step_half]), 64)
    assert q.qu[0, 0] == 1 and q.qv[0, 0] == -1


def test_quantize_dequantize_error_bound():
    rng = np.random.default_rng(11)
    for scale in (1, 64, 500):
        u = rng.uniform(-600, 600, size=(13, 9))
        v = rng.uniform(-600, 600, size=(13, 9))
        f = field(u, v)
        back = dequantize(quantize(f, scale))
        lo, hi = -32768 / scale, 32767 / scale
        cu = np.clip(u, lo, hi)
        cv = np.clip(v, lo, hi)
        assert np.max(np.abs(back.u - cu)) <= 0.5 / scale + 1e-15
        assert np.max(np.abs(back.v - cv)) <= 0.5 / scale + 1e-15


def test_dequantize_quantize_identity():
    rng = np.random.default_rng(3)
    q = QuantizedFlow(scale=64,
                      qu=rng.integers(-32768, 32768, size=(5, 7), dtype=np.int64).astype(np.int16),
                      qv=rng.integers(-32768, 32768, size=(5, 7), dtype=np.int64).astype(np.int16))
    q2 = quantize(dequantize(q), 64)
    assert np.array_equal(q2.qu, q.qu) and np.array_equal(q2.qv, q.qv)


def test_pack_zero_word():
    q = QuantizedFlow(scale=1, qu=np.array([[0]], dtype=np.int16), qv=np.array([[0]], dtype=np.int16))
    assert pack(q).words[0, 0] == 0x00000000


def test_pack_twos_complement():
    q = QuantizedFlow(scale=1, qu=np.array([[-1]], dtype=np.int16), qv=np.array([[1]], dtype=np.int16))
    assert pack(q).words[0, 0] == 0xFFFF0001


def test_pack_unpack_fuzz_identity():
    rng = np.random.default_rng(5)
    for _ in range(20):
        h, w = rng.integers(1, 30, size=2)
        q = QuantizedFlow(scale=64,
                          qu=rng.integers(-32768, 32768, size=(h, w)).astype(np.int16),
                          qv=rng.integers(-32768, 32768, size=(h, w)).astype(np.int16))
        back = unpack(pack(q), q.scale)
        assert np.array_equal(back.qu, q.qu) and np.array_equal(back.qv, q.qv)


def test_unpack_pack_identity_on_words():
    rng = np.random.default_rng(6)
    words = rng.integers(0, 2**32, size=(4, 4), dtype=np.uint64).astype(np.uint32)
    p = PackedImage(words=words)
    assert np.array_equal(pack(unpack(p, 64)).words, words)
