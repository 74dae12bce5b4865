"""Forward passes for the MLP classifier and the character transformer."""

import numpy as np

from ..errors import InvalidArgument
from ..numcore import tensor as T
from ..numcore.rng import RngStream
from .config import GptConfig, MlpConfig


class Network:
    """Parameters of a checkpoint wrapped as leaf tensors.

    The tensors share memory with ``checkpoint.params``: optimizer updates
    on ``self.params[name].data`` are updates to the checkpoint.
    """

    def __init__(self, checkpoint, trainable=True):
        self.checkpoint = checkpoint
        self.config = checkpoint.config
        self.params = {
            name: T.Tensor(arr, requires_grad=trainable, name=name)
            for name, arr in checkpoint.params.items()
        }

    def parameters(self):
        return list(self.params.values())

    def __call__(self, batch, **kwargs):
        return self.forward(batch, **kwargs)


class Mlp(Network):
    def forward(self, x, train=False, rng=None, tap_block=None):
        cfg = self.config
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != cfg.input_dim:
            raise InvalidArgument(f"expected (N, {cfg.input_dim}) inputs, got {x.shape}")
        h = T.Tensor(x.astype(self.params["layers.0.weight"].dtype, copy=False))
        n_layers = len(cfg.hidden) + 1
        tapped = None
        for i in range(n_layers):
            h = T.linear(h, self.params[f"layers.{i}.weight"], self.params[f"layers.{i}.bias"])
            if i < n_layers - 1:
                h = T.relu(h)
                if tap_block == i:
                    tapped = h
        if tap_block is not None:
            if tapped is None:
                raise InvalidArgument(f"no hidden block {tap_block}")
            return h, tapped
        return h


def _slice_last(t, start, stop):
    full = t.shape

    def back(g):
        out = np.zeros(full, dtype=g.dtype)
        out[..., start:stop] = g
        return (out,)

    return T._node(np.ascontiguousarray(t.data[..., start:stop]), (t,), back, "slice")


class Gpt(Network):
    def forward(self, idx, train=False, rng=None, tap_block=None):
        """Logits (N, T, V); with ``tap_block`` also that block's output (N, T, d).

        ``rng`` drives dropout and is required when ``train`` and dropout > 0.
        """
        cfg = self.config
        idx = np.asarray(idx)
        if idx.ndim == 1:
            idx = idx[None, :]
        n, t = idx.shape
        if t > cfg.block_size:
            raise InvalidArgument(f"sequence length {t} exceeds block size {cfg.block_size}")
        if idx.size and (idx.min() < 0 or idx.max() >= cfg.vocab_size):
            raise InvalidArgument(f"token id out of range for vocabulary of {cfg.vocab_size}")
        p = self.params
        d, heads = cfg.d_model, cfg.n_head
        hd = d // heads
        drop = cfg.dropout if train else 0.0
        if drop > 0 and rng is None:
            raise InvalidArgument("training with dropout needs an rng")

        x = T.embedding(idx, p["wte"]) + T.embedding(np.arange(t), p["wpe"])
        x = T.dropout(x, drop, rng)
        tapped = None
        for i in range(cfg.n_layer):
            pre = f"h.{i}."
            h = T.layer_norm(x, p[pre + "ln_1.weight"], p[pre + "ln_1.bias"])
            qkv = T.linear(h, p[pre + "attn.c_attn.weight"], p[pre + "attn.c_attn.bias"])
            q, k, v = (
                T.transpose(T.reshape(_slice_last(qkv, j * d, (j + 1) * d), (n, t, heads, hd)), (0, 2, 1, 3))
                for j in range(3)
            )
            a = T.causal_attention(q, k, v)
            a = T.reshape(T.transpose(a, (0, 2, 1, 3)), (n, t, d))
            a = T.linear(a, p[pre + "attn.c_proj.weight"], p[pre + "attn.c_proj.bias"])
            x = x + T.dropout(a, drop, rng)
            h = T.layer_norm(x, p[pre + "ln_2.weight"], p[pre + "ln_2.bias"])
            h = T.gelu(T.linear(h, p[pre + "mlp.c_fc.weight"], p[pre + "mlp.c_fc.bias"]))
            h = T.linear(h, p[pre + "mlp.c_proj.weight"], p[pre + "mlp.c_proj.bias"])
            x = x + T.dropout(h, drop, rng)
            if tap_block == i:
                tapped = x
        x = T.layer_norm(x, p["ln_f.weight"], p["ln_f.bias"])
        logits = T.linear(x, p["lm_head.weight"])
        if tap_block is not None:
            if tapped is None:
                raise InvalidArgument(f"no block {tap_block} in a {cfg.n_layer}-layer model")
            return logits, tapped
        return logits


def build_network(checkpoint, trainable=True):
    if isinstance(checkpoint.config, MlpConfig):
        return Mlp(checkpoint, trainable)
    if isinstance(checkpoint.config, GptConfig):
        return Gpt(checkpoint, trainable)
    raise InvalidArgument(f"unsupported config {type(checkpoint.config).__name__}")


def forward(checkpoint, batch, tap_block=None):
    """Inference-mode logits as a numpy array (plus the tapped block output)."""
    net = build_network(checkpoint, trainable=False)
    with T.no_grad():
        out = net.forward(batch, train=False, tap_block=tap_block)
    if tap_block is not None:
        return out[0].data, out[1].data
    return out.data


def generate(checkpoint, prompt, length, temperature=1.0, seed=0):
    """Sample ``length`` tokens after ``prompt``; temperature 0 means argmax."""
    return generate_batch(checkpoint, [prompt], length, temperature, seed)[0]


def generate_batch(checkpoint, prompts, length, temperature=1.0, seed=0):
    """Autoregressive sampling for equal-length prompts in one batch.

    Row ``i`` draws its uniforms from ``RngStream(seed).spawn("row", i)``
    so a row's output does not depend on which other rows share the batch.
    """
    cfg = checkpoint.config
    if not isinstance(cfg, GptConfig):
        raise InvalidArgument("generation needs a GPT checkpoint")
    if cfg.vocab_size < 1:
        raise InvalidArgument("empty vocabulary")
    if length < 1:
        raise InvalidArgument("length must be at least 1")
    ctx = np.asarray(prompts, dtype=np.int64)
    if ctx.ndim != 2 or ctx.shape[1] < 1:
        raise InvalidArgument("prompts must be a non-empty list of equal-length token lists")
    if ctx.shape[1] > cfg.block_size:
        raise InvalidArgument(f"prompt length {ctx.shape[1]} exceeds block size {cfg.block_size}")
    if temperature < 0:
        raise InvalidArgument("temperature must be non-negative")
    streams = [RngStream(seed).spawn("row", i) for i in range(ctx.shape[0])]
    net = build_network(checkpoint, trainable=False)
    out = np.empty((ctx.shape[0], length), dtype=np.int64)
    with T.no_grad():
        for step in range(length):
            window = ctx[:, -cfg.block_size:]
            logits = net.forward(window).data[:, -1, :].astype(np.float64)
            if temperature == 0:
                nxt = np.argmax(logits, axis=1)
            else:
                z = logits / temperature
                probs = np.exp(z - z.max(axis=1, keepdims=True))
                cdf = np.cumsum(probs, axis=1)
                u = np.array([s.random() for s in streams]) * cdf[:, -1]
                nxt = np.minimum((cdf <= u[:, None]).sum(axis=1), cfg.vocab_size - 1)
            out[:, step] = nxt
            ctx = np.concatenate([ctx, nxt[:, None]], axis=1)
    return [row.tolist() for row in out]
