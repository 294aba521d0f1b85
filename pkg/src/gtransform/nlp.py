"""A small FNet-style text encoder whose token mixing is a 2-D general
transform over the sequence and hidden axes.

Each block computes::

    X1 = LN(X + GT2d(X))
    X2 = LN(X1 + W2 gelu(W1 X1 + b1) + b2)

and the classifier reads the representation at position 0. Parameters live
in a flat ``dict`` of numpy arrays so that the optimisers in
:mod:`gtransform.train` can update them uniformly; every general transform
is stored as a vector ``(p_1, ..., p_m, p3)`` under a name ending in
``.gt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .core import (
    GTParams,
    blend_kernel,
    dump_params,
    gt_forward_2d,
    gt_grad_input,
    gt_grad_params,
    load_params,
    make_nlp_params,
)
from .errors import ConfigError, FormatError, TokenOutOfRange
from .tensorio import read_checkpoint, write_checkpoint

LN_EPS = 1e-12
PAD, CLS, BYTE_OFFSET = 0, 1, 2


@dataclass
class EncoderConfig:
    vocab_size: int = 256 + BYTE_OFFSET
    seq_len: int = 16
    hidden_dim: int = 16
    ffn_dim: int = 32
    num_layers: int = 2
    num_classes: int = 2
    gt: GTParams = field(default_factory=make_nlp_params)
    share_gt: bool = False
    init_std: float = 0.02

    def __post_init__(self):
        for name in ("vocab_size", "seq_len", "hidden_dim", "ffn_dim", "num_layers", "num_classes"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        # fail early if a component transform does not exist at these sizes
        blend_kernel(self.gt, self.seq_len)
        blend_kernel(self.gt, self.hidden_dim)


def gt_name(layer: int, shared: bool) -> str:
    return "gt" if shared else f"layer{layer}.gt"


def init_params(config: EncoderConfig, rng: np.random.Generator) -> dict:
    s = config.init_std
    h, f = config.hidden_dim, config.ffn_dim
    p = {
        "tok_emb": rng.normal(0.0, s, (config.vocab_size, h)),
        "pos_emb": rng.normal(0.0, s, (config.seq_len, h)),
    }
    if config.share_gt:
        p["gt"] = config.gt.as_vector()
    for layer in range(config.num_layers):
        pre = f"layer{layer}."
        if not config.share_gt:
            p[pre + "gt"] = config.gt.as_vector()
        p[pre + "ln1.g"] = np.ones(h)
        p[pre + "ln1.b"] = np.zeros(h)
        p[pre + "ffn.w1"] = rng.normal(0.0, s, (h, f))
        p[pre + "ffn.b1"] = np.zeros(f)
        p[pre + "ffn.w2"] = rng.normal(0.0, s, (f, h))
        p[pre + "ffn.b2"] = np.zeros(h)
        p[pre + "ln2.g"] = np.ones(h)
        p[pre + "ln2.b"] = np.zeros(h)
    p["head.w"] = rng.normal(0.0, s, (h, config.num_classes))
    p["head.b"] = np.zeros(config.num_classes)
    return p


# -- primitive layers ----------------------------------------------------------

def embed(tokens, tok_emb, pos_emb) -> np.ndarray:
    tokens = np.asarray(tokens)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= tok_emb.shape[0]):
        raise TokenOutOfRange(f"token ids must lie in [0, {tok_emb.shape[0]})")
    if tokens.shape[-1] != pos_emb.shape[0]:
        raise ConfigError(f"sequence length {tokens.shape[-1]} != positional table length {pos_emb.shape[0]}")
    return tok_emb[tokens] + pos_emb


def layer_norm(x, g, b, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    axes = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(axis=axes)
    db = dy.sum(axis=axes)
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def gelu(z):
    return 0.5 * z * (1.0 + erf(z / np.sqrt(2.0)))


def gelu_grad(z):
    cdf = 0.5 * (1.0 + erf(z / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    return cdf + z * pdf


def gt_mixing_sublayer(X, gt: GTParams) -> np.ndarray:
    return gt_forward_2d(gt, X)[0]


# -- model ---------------------------------------------------------------------

class Encoder:
    def __init__(self, config: EncoderConfig, params: dict | None = None, seed: int = 0):
        self.config = config
        self.params = params if params is not None else init_params(config, np.random.default_rng(seed))

    def gt_params(self, layer: int) -> GTParams:
        vec = self.params[gt_name(layer, self.config.share_gt)]
        return self.config.gt.with_vector(vec)

    def gt_names(self) -> list:
        return [k for k in self.params if k == "gt" or k.endswith(".gt")]

    def block_forward(self, X, layer: int):
        p, pre = self.params, f"layer{layer}."
        gt = self.gt_params(layer)
        mixed, ycache = gt_forward_2d(gt, X)
        x1, ln1 = layer_norm(X + mixed, p[pre + "ln1.g"], p[pre + "ln1.b"])
        z = x1 @ p[pre + "ffn.w1"] + p[pre + "ffn.b1"]
        hdn = gelu(z)
        ffn = hdn @ p[pre + "ffn.w2"] + p[pre + "ffn.b2"]
        x2, ln2 = layer_norm(x1 + ffn, p[pre + "ln2.g"], p[pre + "ln2.b"])
        return x2, (X, gt, ycache, ln1, x1, z, hdn, ln2)

    def block_backward(self, dx2, layer: int, cache, grads: dict):
        p, pre = self.params, f"layer{layer}."
        X, gt, ycache, ln1, x1, z, hdn, ln2 = cache
        dc, dg2, db2 = layer_norm_backward(dx2, p[pre + "ln2.g"], ln2)
        grads[pre + "ln2.g"] = dg2
        grads[pre + "ln2.b"] = db2
        dffn = dc
        flat_h = hdn.reshape(-1, hdn.shape[-1])
        grads[pre + "ffn.w2"] = flat_h.T @ dffn.reshape(-1, dffn.shape[-1])
        grads[pre + "ffn.b2"] = dffn.reshape(-1, dffn.shape[-1]).sum(axis=0)
        dz = (dffn @ p[pre + "ffn.w2"].T) * gelu_grad(z)
        grads[pre + "ffn.w1"] = x1.reshape(-1, x1.shape[-1]).T @ dz.reshape(-1, dz.shape[-1])
        grads[pre + "ffn.b1"] = dz.reshape(-1, dz.shape[-1]).sum(axis=0)
        dx1 = dc + dz @ p[pre + "ffn.w1"].T
        da, dg1, db1 = layer_norm_backward(dx1, p[pre + "ln1.g"], ln1)
        grads[pre + "ln1.g"] = dg1
        grads[pre + "ln1.b"] = db1
        dp, dp3 = gt_grad_params(gt, X, da, ycache, ndim=2)
        name = gt_name(layer, self.config.share_gt)
        grads[name] = grads.get(name, 0.0) + np.append(dp, dp3)
        return da + gt_grad_input(gt, da, ndim=2)

    def encode(self, tokens):
        p = self.params
        X = embed(tokens, p["tok_emb"], p["pos_emb"])
        caches = []
        for layer in range(self.config.num_layers):
            X, c = self.block_forward(X, layer)
            caches.append(c)
        return X, caches

    def forward(self, tokens):
        """Logits for a ``(batch, seq_len)`` or ``(seq_len,)`` token array."""
        tokens = np.asarray(tokens)
        X, caches = self.encode(tokens)
        pooled = X[..., 0, :]
        logits = pooled @ self.params["head.w"] + self.params["head.b"]
        return logits, (tokens, caches, pooled)

    def backward(self, dlogits, cache) -> dict:
        tokens, caches, pooled = cache
        p = self.params
        grads = {}
        dl2 = np.atleast_2d(dlogits)
        pooled2 = np.atleast_2d(pooled)
        grads["head.w"] = pooled2.T @ dl2
        grads["head.b"] = dl2.sum(axis=0)
        dpool = dlogits @ p["head.w"].T
        shape = caches[-1][0].shape if caches else None
        dX = np.zeros(shape)
        dX[..., 0, :] = dpool
        for layer in reversed(range(self.config.num_layers)):
            dX = self.block_backward(dX, layer, caches[layer], grads)
        grads["pos_emb"] = dX.reshape(-1, *dX.shape[-2:]).sum(axis=0)
        dtok = np.zeros_like(p["tok_emb"])
        np.add.at(dtok, tokens.reshape(-1), dX.reshape(-1, dX.shape[-1]))
        grads["tok_emb"] = dtok
        return {k: grads[k] for k in p}

    def classify(self, tokens) -> np.ndarray:
        return self.forward(tokens)[0]

    # -- checkpoints -----------------------------------------------------------

    def save(self, path) -> None:
        tensors = {k: np.asarray(v, dtype=float) for k, v in self.params.items() if k not in self.gt_names()}
        blocks = {k: self.config.gt.with_vector(self.params[k]) for k in self.gt_names()}
        meta = {
            "vocab_size": self.config.vocab_size, "seq_len": self.config.seq_len,
            "hidden_dim": self.config.hidden_dim, "ffn_dim": self.config.ffn_dim,
            "num_layers": self.config.num_layers, "num_classes": self.config.num_classes,
            "share_gt": int(self.config.share_gt),
        }
        text = "[model]\n" + "".join(f"{k} = {v}\n" for k, v in meta.items()) + "\n" + dump_params(blocks)
        write_checkpoint(path, tensors, text)

    @classmethod
    def load(cls, path) -> "Encoder":
        import configparser

        tensors, text = read_checkpoint(path)
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        if "model" not in cp:
            raise FormatError("checkpoint has no [model] block")
        meta = cp["model"]
        gts = load_params(text, skip=("model",))
        if not gts:
            raise FormatError("checkpoint has no transform parameters")
        first = next(iter(gts.values()))
        config = EncoderConfig(
            vocab_size=meta.getint("vocab_size"), seq_len=meta.getint("seq_len"),
            hidden_dim=meta.getint("hidden_dim"), ffn_dim=meta.getint("ffn_dim"),
            num_layers=meta.getint("num_layers"), num_classes=meta.getint("num_classes"),
            gt=first, share_gt=bool(meta.getint("share_gt")))
        params = dict(tensors)
        for k, g in gts.items():
            params[k] = g.as_vector()
        ref = init_params(config, np.random.default_rng(0))
        missing = set(ref) - set(params)
        if missing:
            raise FormatError(f"checkpoint lacks tensors: {sorted(missing)}")
        return cls(config, {k: params[k] for k in ref})


# -- text data -----------------------------------------------------------------

class ByteTokenizer:
    """UTF-8 bytes shifted past two specials: 0 = pad, 1 = class token."""

    vocab_size = 256 + BYTE_OFFSET

    def __init__(self, seq_len: int):
        self.seq_len = seq_len

    def encode(self, text: str) -> np.ndarray:
        ids = [CLS] + [b + BYTE_OFFSET for b in text.encode("utf-8")][: self.seq_len - 1]
        ids += [PAD] * (self.seq_len - len(ids))
        return np.array(ids, dtype=np.int64)

    def encode_batch(self, texts) -> np.ndarray:
        return np.stack([self.encode(t) for t in texts]) if texts else np.zeros((0, self.seq_len), np.int64)


def parse_text_dataset(text: str):
    """``label<TAB>text`` per line; returns ``(labels, texts)``."""
    labels, texts = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        label, sep, body = line.partition("\t")
        if not sep:
            raise FormatError(f"line {lineno}: expected label<TAB>text")
        try:
            labels.append(int(label))
        except ValueError:
            raise FormatError(f"line {lineno}: label {label!r} is not an integer") from None
        texts.append(body)
    return np.array(labels, dtype=np.int64), texts


def load_text_dataset(path):
    with open(path, encoding="utf-8") as fh:
        return parse_text_dataset(fh.read())
