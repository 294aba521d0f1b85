import math

import numpy as np
import pytest

from gtransform import core, nlp, train
from gtransform.errors import FormatError, TokenOutOfRange

from oracles import dft2_double_sum, norm_rel_err, rel_err


def tiny(gt=None, layers=1, **kw):
    gt = gt or core.make_nlp_params((0.6, 0.3), 0.7)
    return nlp.EncoderConfig(vocab_size=10, seq_len=8, hidden_dim=8, ffn_dim=12, num_layers=layers, gt=gt, **kw)


def test_embed_examples(rng):
    z = nlp.embed([1, 2, 0], np.zeros((4, 3)), np.zeros((3, 3)))
    np.testing.assert_array_equal(z, 0)
    tok = np.eye(4, 3)
    out = nlp.embed([2, 0, 1], tok, np.zeros((3, 3)))
    np.testing.assert_array_equal(out, tok[[2, 0, 1]])
    te, pe = rng.normal(size=(6, 4)), rng.normal(size=(5, 4))
    ids = rng.integers(0, 6, 5)
    out = nlp.embed(ids, te, pe)
    for t in range(5):
        np.testing.assert_allclose(out[t] - pe[t], te[ids[t]], atol=1e-15)
    with pytest.raises(TokenOutOfRange):
        nlp.embed([6, 0, 0, 0, 0], te, pe)
    with pytest.raises(TokenOutOfRange):
        nlp.embed([-1, 0, 0, 0, 0], te, pe)


def test_mixing_sublayer(rng):
    X = rng.normal(size=(8, 16))
    np.testing.assert_allclose(nlp.gt_mixing_sublayer(X, core.make_nlp_params((0, 0))), X, atol=1e-15)
    np.testing.assert_allclose(nlp.gt_mixing_sublayer(X, core.make_nlp_params()), np.fft.fft2(X).real, atol=1e-10)
    np.testing.assert_allclose(nlp.gt_mixing_sublayer(X, core.make_nlp_params()), dft2_double_sum(X).real,
                               atol=1e-10)
    p = core.make_nlp_params((0.3, -0.4), 0.2)
    Y = rng.normal(size=(8, 16))
    np.testing.assert_allclose(nlp.gt_mixing_sublayer(2 * X - Y, p),
                               2 * nlp.gt_mixing_sublayer(X, p) - nlp.gt_mixing_sublayer(Y, p), atol=1e-10)


def _ln(x, g, b):
    mu = x.mean(-1, keepdims=True)
    return (x - mu) / np.sqrt(((x - mu) ** 2).mean(-1, keepdims=True) + 1e-12) * g + b


def _gelu(z):
    return 0.5 * z * (1 + np.vectorize(math.erf)(z / math.sqrt(2)))


def fnet_reference(params, tokens, layers):
    """FNet forward pass written from scratch with np.fft for token mixing."""
    X = params["tok_emb"][tokens] + params["pos_emb"]
    for l in range(layers):
        q = lambda k: params[f"layer{l}.{k}"]
        X = _ln(X + np.fft.fft2(X, axes=(-2, -1)).real, q("ln1.g"), q("ln1.b"))
        h = _gelu(X @ q("ffn.w1") + q("ffn.b1")) @ q("ffn.w2") + q("ffn.b2")
        X = _ln(X + h, q("ln2.g"), q("ln2.b"))
    return X[..., 0, :] @ params["head.w"] + params["head.b"]


def test_fnet_equivalence(rng):
    cfg = nlp.EncoderConfig(vocab_size=30, seq_len=8, hidden_dim=16, ffn_dim=24, num_layers=2, init_std=0.3)
    m = nlp.Encoder(cfg, seed=3)
    tokens = rng.integers(0, 30, (5, 8))
    np.testing.assert_allclose(m.forward(tokens)[0], fnet_reference(m.params, tokens, 2), atol=1e-10)


def test_degenerate_block(rng):
    cfg = tiny(core.make_nlp_params((0, 0)))
    m = nlp.Encoder(cfg, seed=0)
    for k in ("ffn.w1", "ffn.w2"):
        m.params["layer0." + k][:] = 0
    X = rng.normal(size=(8, 8))
    X = (X - X.mean(1, keepdims=True)) / X.std(1, keepdims=True)
    out, _ = m.block_forward(X, 0)
    g, b = np.ones(8), np.zeros(8)
    np.testing.assert_allclose(out, _ln(_ln(2 * X, g, b), g, b), atol=1e-10)
    np.testing.assert_allclose(out, X, atol=1e-10)


def test_two_blocks_change_output(rng):
    m = nlp.Encoder(tiny(layers=2, init_std=0.3), seed=1)
    X = rng.normal(size=(8, 8))
    one, _ = m.block_forward(X, 0)
    two, _ = m.block_forward(one, 1)
    assert np.max(np.abs(two - one)) > 1e-3


def _fd(m, name, idx, loss, h=1e-6):
    arr = m.params[name]
    old = arr[idx]
    arr[idx] = old + h
    fp = loss()
    arr[idx] = old - h
    fm = loss()
    arr[idx] = old
    return (fp - fm) / (2 * h)


@pytest.mark.parametrize("share", [False, True])
def test_full_model_gradients(rng, share):
    cfg = tiny(share_gt=share, init_std=0.5)
    m = nlp.Encoder(cfg, seed=5)
    tokens = rng.integers(0, 10, (3, 8))
    labels = np.array([0, 1, 1])

    def loss():
        return train.cross_entropy(m.forward(tokens)[0], labels)[0]

    logits, cache = m.forward(tokens)
    grads = m.backward(train.cross_entropy(logits, labels)[1], cache)
    assert list(grads) == list(m.params)
    for name, arr in m.params.items():
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            num[idx] = _fd(m, name, idx, loss)
        if name.endswith("gt"):
            assert rel_err(grads[name], num) < 1e-4, name
        else:
            assert norm_rel_err(grads[name], num) < 1e-4, name


def test_block_gradient_wrt_gt(rng):
    m = nlp.Encoder(tiny(init_std=0.5), seed=2)
    X = rng.normal(size=(8, 8))
    up = rng.normal(size=(8, 8))
    out, cache = m.block_forward(X, 0)
    grads = {}
    m.block_backward(up, 0, cache, grads)
    f = lambda: np.sum(up * m.block_forward(X, 0)[0])
    num = [_fd(m, "layer0.gt", (j,), f) for j in range(3)]
    assert rel_err(grads["layer0.gt"], num) < 1e-5


def test_classify_examples(rng):
    m = nlp.Encoder(tiny(), seed=0)
    m.params["head.w"][:] = 0
    tokens = rng.integers(0, 10, (4, 8))
    np.testing.assert_array_equal(m.classify(tokens), 0)
    np.testing.assert_allclose(train.softmax(m.classify(tokens)), 0.5)
    loss, _ = train.cross_entropy(m.classify(tokens), np.array([0, 1, 0, 1]))
    assert loss == pytest.approx(math.log(2), abs=1e-12)
    m2 = nlp.Encoder(tiny(), seed=0)
    np.testing.assert_array_equal(m2.classify(tokens), m2.classify(tokens))
    np.testing.assert_allclose(m2.classify(tokens[0]), m2.classify(tokens)[0], atol=1e-14)


def test_overfit_32_sequences():
    rng = np.random.default_rng(0)
    cfg = nlp.EncoderConfig(vocab_size=20, seq_len=8, hidden_dim=16, ffn_dim=32, num_layers=2)
    m = nlp.Encoder(cfg, seed=0)
    tokens, labels = rng.integers(0, 20, (32, 8)), rng.integers(0, 2, 32)
    opt, state = train.AdamW(weight_decay=0.0), {}
    acc = 0.0
    for _ in range(200):
        logits, cache = m.forward(tokens)
        acc = train.top1_accuracy(logits, labels)
        if acc == 100.0:
            break
        m.params, state = train.adamw_step(m.params, m.backward(train.cross_entropy(logits, labels)[1], cache),
                                           state, opt, 1e-2)
    assert acc == 100.0


def test_checkpoint_round_trip(tmp_path, rng):
    cfg = nlp.EncoderConfig(vocab_size=12, seq_len=8, hidden_dim=8, ffn_dim=8, num_layers=2,
                            gt=core.make_nlp_params((0.1 + 0.2, -3.63), 1 / 3))
    m = nlp.Encoder(cfg, seed=4)
    m.params["layer1.gt"] = np.array([0.7, 0.123456789012345, 0.9])
    path = tmp_path / "m.gtck"
    m.save(path)
    back = nlp.Encoder.load(path)
    assert list(back.params) == list(m.params)
    for k in m.params:
        assert np.asarray(back.params[k]).tobytes() == np.asarray(m.params[k], dtype=float).tobytes()
    tokens = rng.integers(0, 12, (2, 8))
    np.testing.assert_array_equal(back.forward(tokens)[0], m.forward(tokens)[0])
    path.write_bytes(b"GTCK" + b"\x00" * 3)
    with pytest.raises(FormatError):
        nlp.Encoder.load(path)


def test_tokenizer():
    tok = nlp.ByteTokenizer(6)
    np.testing.assert_array_equal(tok.encode("ab"), [1, 99, 100, 0, 0, 0])
    assert tok.encode("abcdefgh").tolist() == [1, 99, 100, 101, 102, 103]
    assert tok.encode("é").tolist()[:3] == [1, 0xC3 + 2, 0xA9 + 2]
    assert tok.encode_batch(["a", "b"]).shape == (2, 6)


def test_text_dataset():
    labels, texts = nlp.parse_text_dataset("1\tgood movie\n\n0\tbad\tfilm\n")
    assert labels.tolist() == [1, 0] and texts == ["good movie", "bad\tfilm"]
    with pytest.raises(FormatError):
        nlp.parse_text_dataset("no tab here\n")
    with pytest.raises(FormatError):
        nlp.parse_text_dataset("x\ttext\n")
