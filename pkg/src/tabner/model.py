"""Small transformer encoder with a 2D attention mask and a token classifier.

Everything is plain numpy in float64 with a hand-written backward pass, so
gradients can be checked against finite differences parameter by parameter.
Post-LN layout: embeddings -> LayerNorm -> n_layers x [masked multi-head
attention, residual, LayerNorm, GELU feed-forward, residual, LayerNorm] ->
linear classifier over the five IO tags.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .encoding import IGNORE, Batch, LinearizedInput, Vocabulary, pad_batch
from .errors import ConfigurationError, ParseError

N_CLASSES = 5
N_SEGMENTS = 2
LN_EPS = 1e-12
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass
class EncoderConfig:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_position: int = 64
    dropout_rate: float = 0.1
    n_segments: int = N_SEGMENTS
    n_classes: int = N_CLASSES

    def __post_init__(self):
        for name in ("d_model", "n_heads", "n_layers", "d_ff", "max_position"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ConfigurationError(
                f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError("dropout_rate must lie in [0, 1)")
        if self.n_segments != N_SEGMENTS or self.n_classes != N_CLASSES:
            raise ConfigurationError("n_segments and n_classes are fixed at 2 and 5")

    @property
    def d_head(self):
        return self.d_model // self.n_heads


def _layer_keys(l):
    p = f"layers.{l}."
    return {k: p + k for k in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                               "ln1_g", "ln1_b", "w1", "b1", "w2", "b2", "ln2_g", "ln2_b")}


def _xavier(rng, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class EncoderModel:
    def __init__(self, config: EncoderConfig, vocab_size: int, params: dict):
        self.config = config
        self.vocab_size = vocab_size
        self.params = params

    @classmethod
    def init(cls, config: EncoderConfig, vocab_size: int, seed=0) -> "EncoderModel":
        """Xavier-uniform matrices, zero biases, N(0, 0.02) embeddings."""
        rng = np.random.default_rng(seed)
        d, ff = config.d_model, config.d_ff
        p = {
            "tok_emb": rng.normal(0.0, 0.02, (vocab_size, d)),
            "seg_emb": rng.normal(0.0, 0.02, (config.n_segments, d)),
            "pos_emb": rng.normal(0.0, 0.02, (config.max_position, d)),
            "emb_ln_g": np.ones(d),
            "emb_ln_b": np.zeros(d),
        }
        for l in range(config.n_layers):
            k = _layer_keys(l)
            for w in ("wq", "wk", "wv", "wo"):
                p[k[w]] = _xavier(rng, d, d)
                p[k["b" + w[1]]] = np.zeros(d)
            p[k["w1"]] = _xavier(rng, d, ff)
            p[k["b1"]] = np.zeros(ff)
            p[k["w2"]] = _xavier(rng, ff, d)
            p[k["b2"]] = np.zeros(d)
            for ln in ("ln1", "ln2"):
                p[k[ln + "_g"]] = np.ones(d)
                p[k[ln + "_b"]] = np.zeros(d)
        p["cls_w"] = _xavier(rng, d, config.n_classes)
        p["cls_b"] = np.zeros(config.n_classes)
        return cls(config, vocab_size, p)

    def copy(self) -> "EncoderModel":
        return EncoderModel(self.config, self.vocab_size,
                            {k: v.copy() for k, v in self.params.items()})

    def predict(self, x: LinearizedInput) -> np.ndarray:
        """Argmax class index per token (eval mode)."""
        return forward(self, x).argmax(axis=-1)

    # -- checkpoints -----------------------------------------------------------

    def save(self, path, vocab: Vocabulary | None = None, meta: dict | None = None):
        """JSON checkpoint: config header, optional vocab, then named row-major tensors."""
        doc = {
            "format": "tabner-checkpoint",
            "version": 1,
            "config": asdict(self.config),
            "vocab_size": self.vocab_size,
            "vocab": vocab.tokens if vocab is not None else None,
            "meta": meta or {},
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                       for k, v in sorted(self.params.items())},
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path):
        """Returns (model, vocab or None, meta)."""
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            if doc.get("format") != "tabner-checkpoint":
                raise ParseError(f"{path}: not a tabner checkpoint")
            config = EncoderConfig(**doc["config"])
            params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
                      for k, v in doc["params"].items()}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: malformed checkpoint ({exc})") from None
        vocab = Vocabulary(doc["vocab"]) if doc.get("vocab") is not None else None
        return cls(config, doc["vocab_size"], params), vocab, doc.get("meta", {})


# -- primitives ----------------------------------------------------------------

def _layer_norm(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_back(dy, cache, g):
    xhat, inv = cache
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    red = tuple(range(dy.ndim - 1))
    return dx, (dy * xhat).sum(red), dy.sum(red)


def _gelu(u):
    t = np.tanh(_GELU_C * (u + 0.044715 * u ** 3))
    return 0.5 * u * (1.0 + t), t


def _gelu_back(dg, u, t):
    dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * u * u)
    return dg * (0.5 * (1.0 + t) + 0.5 * u * dt)


def _softmax(s):
    m = s.max(-1, keepdims=True)
    e = np.exp(s - m)
    return e / e.sum(-1, keepdims=True)


def _dropout(x, rate, rng):
    if rate <= 0.0:
        return x, None
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep, keep


def _split(x, h):
    B, L, d = x.shape
    return x.reshape(B, L, h, d // h).transpose(0, 2, 1, 3)


def _merge(x):
    B, h, L, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, L, h * dh)


def _as_batch(inputs):
    if isinstance(inputs, Batch):
        return inputs, False
    if isinstance(inputs, LinearizedInput):
        return pad_batch([inputs]), True
    return pad_batch(list(inputs)), False


def _check_inputs(model, batch):
    if batch.token_ids.size == 0:
        return
    if batch.positions.max() >= model.config.max_position:
        raise ConfigurationError(
            f"position {int(batch.positions.max())} exceeds max_position="
            f"{model.config.max_position}")
    if batch.token_ids.max() >= model.vocab_size:
        raise ConfigurationError(
            f"token id {int(batch.token_ids.max())} outside vocabulary of {model.vocab_size}")


# -- forward / loss / backward ---------------------------------------------------

def _forward(model, batch, mask, train_mode, rng):
    cfg, p = model.config, model.params
    rate = cfg.dropout_rate if train_mode else 0.0
    if rate > 0.0 and rng is None:
        raise ValueError("train-mode dropout needs an rng")
    h = cfg.n_heads
    scale = 1.0 / math.sqrt(cfg.d_head)
    x0 = p["tok_emb"][batch.token_ids] + p["seg_emb"][batch.segments] + p["pos_emb"][batch.positions]
    x, ln0 = _layer_norm(x0, p["emb_ln_g"], p["emb_ln_b"])
    caches = []
    for l in range(cfg.n_layers):
        k = _layer_keys(l)
        q = _split(x @ p[k["wq"]] + p[k["bq"]], h)
        kk = _split(x @ p[k["wk"]] + p[k["bk"]], h)
        v = _split(x @ p[k["wv"]] + p[k["bv"]], h)
        s = (q @ kk.transpose(0, 1, 3, 2)) * scale
        if mask is not None:
            s = np.where(mask[:, None], s, -np.inf)
        att = _softmax(s)
        att_d, att_keep = _dropout(att, rate, rng)
        ctx = _merge(att_d @ v)
        a = ctx @ p[k["wo"]] + p[k["bo"]]
        x1, ln1 = _layer_norm(x + a, p[k["ln1_g"]], p[k["ln1_b"]])
        u = x1 @ p[k["w1"]] + p[k["b1"]]
        g, t = _gelu(u)
        g_d, g_keep = _dropout(g, rate, rng)
        f = g_d @ p[k["w2"]] + p[k["b2"]]
        x2, ln2 = _layer_norm(x1 + f, p[k["ln2_g"]], p[k["ln2_b"]])
        caches.append(dict(x=x, q=q, k=kk, v=v, att=att, att_d=att_d, att_keep=att_keep,
                           ctx=ctx, ln1=ln1, x1=x1, u=u, t=t, g_d=g_d, g_keep=g_keep, ln2=ln2))
        x = x2
    logits = x @ p["cls_w"] + p["cls_b"]
    return logits, dict(ln0=ln0, layers=caches, x_out=x)


def forward(model: EncoderModel, inputs, train_mode=False, rng=None, use_mask=True):
    """Per-token logits.  A single LinearizedInput gives shape (L, 5), a
    list or Batch gives (B, L, 5).  ``use_mask=False`` runs a plain unmasked
    encoder (padding is then visible, so only use it on unpadded input)."""
    batch, single = _as_batch(inputs)
    _check_inputs(model, batch)
    logits, _ = _forward(model, batch, batch.mask if use_mask else None, train_mode, rng)
    return logits[0] if single else logits


def attention_weights(model: EncoderModel, x: LinearizedInput) -> list[np.ndarray]:
    """Eval-mode attention probabilities per layer, each (n_heads, L, L)."""
    batch, _ = _as_batch(x)
    _check_inputs(model, batch)
    _, cache = _forward(model, batch, batch.mask, False, None)
    return [c["att"][0] for c in cache["layers"]]


def _ce(logits, tags):
    """Mean cross-entropy over labeled positions and d(loss)/d(logits)."""
    tags = np.asarray(tags)
    labeled = tags != IGNORE
    n = int(labeled.sum())
    grad = np.zeros_like(logits)
    if n == 0:
        return 0.0, grad
    z = logits[labeled]
    y = tags[labeled]
    z = z - z.max(-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(-1, keepdims=True))
    loss = -logp[np.arange(n), y].sum() / n
    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    grad[labeled] = dz / n
    return float(loss), grad


def loss(logits, tags) -> float:
    """Mean token cross-entropy; positions tagged IGNORE are skipped."""
    return _ce(logits, tags)[0]


def backward(model: EncoderModel, inputs, tags=None, train_mode=False, rng=None):
    """Loss and exact gradients for every parameter, as (loss, {name: grad})."""
    batch, _ = _as_batch(inputs)
    _check_inputs(model, batch)
    if tags is None:
        tags = batch.tags
    tags = np.asarray(tags).reshape(batch.token_ids.shape)
    cfg, p = model.config, model.params
    logits, cache = _forward(model, batch, batch.mask, train_mode, rng)
    value, dlogits = _ce(logits, tags)
    grads = {}
    red = (0, 1)
    x = cache["x_out"]
    grads["cls_w"] = np.einsum("bld,blc->dc", x, dlogits)
    grads["cls_b"] = dlogits.sum(red)
    dx = dlogits @ p["cls_w"].T
    scale = 1.0 / math.sqrt(cfg.d_head)
    for l in reversed(range(cfg.n_layers)):
        k = _layer_keys(l)
        c = cache["layers"][l]
        dy2, grads[k["ln2_g"]], grads[k["ln2_b"]] = _layer_norm_back(dx, c["ln2"], p[k["ln2_g"]])
        # feed-forward
        grads[k["w2"]] = np.einsum("blf,bld->fd", c["g_d"], dy2)
        grads[k["b2"]] = dy2.sum(red)
        dg = dy2 @ p[k["w2"]].T
        if c["g_keep"] is not None:
            dg = dg * c["g_keep"]
        du = _gelu_back(dg, c["u"], c["t"])
        grads[k["w1"]] = np.einsum("bld,blf->df", c["x1"], du)
        grads[k["b1"]] = du.sum(red)
        dx1 = dy2 + du @ p[k["w1"]].T
        dy1, grads[k["ln1_g"]], grads[k["ln1_b"]] = _layer_norm_back(dx1, c["ln1"], p[k["ln1_g"]])
        # attention
        grads[k["wo"]] = np.einsum("bli,blo->io", c["ctx"], dy1)
        grads[k["bo"]] = dy1.sum(red)
        dctx = _split(dy1 @ p[k["wo"]].T, cfg.n_heads)
        datt_d = dctx @ c["v"].transpose(0, 1, 3, 2)
        dv = c["att_d"].transpose(0, 1, 3, 2) @ dctx
        datt = datt_d * c["att_keep"] if c["att_keep"] is not None else datt_d
        att = c["att"]
        ds = att * (datt - (datt * att).sum(-1, keepdims=True)) * scale
        dq = ds @ c["k"]
        dk = ds.transpose(0, 1, 3, 2) @ c["q"]
        xin = c["x"]
        dxin = dy1.copy()
        for name, dproj in (("q", dq), ("k", dk), ("v", dv)):
            dm = _merge(dproj)
            grads[k["w" + name]] = np.einsum("bli,blo->io", xin, dm)
            grads[k["b" + name]] = dm.sum(red)
            dxin += dm @ p[k["w" + name]].T
        dx = dxin
    dx0, grads["emb_ln_g"], grads["emb_ln_b"] = _layer_norm_back(dx, cache["ln0"], p["emb_ln_g"])
    flat = dx0.reshape(-1, cfg.d_model)
    for name, idx in (("tok_emb", batch.token_ids), ("seg_emb", batch.segments),
                      ("pos_emb", batch.positions)):
        gr = np.zeros_like(p[name])
        np.add.at(gr, idx.ravel(), flat)
        grads[name] = gr
    return value, grads


# -- optimizers ----------------------------------------------------------------

class SGD:
    def __init__(self, params):
        pass

    def step(self, params, grads, lr):
        for name, g in grads.items():
            params[name] -= lr * g


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam}
