"""Architecture configs and named presets."""

from dataclasses import asdict, dataclass, replace

from ..errors import InvalidArgument


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden: tuple = (64, 64)
    n_classes: int = 10
    activation: str = "relu"

    kind = "mlp"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if len(self.hidden) < 1:
            raise InvalidArgument("MLP needs at least one hidden layer")
        if self.n_classes < 2:
            raise InvalidArgument("MLP needs at least two classes")
        if self.input_dim < 1 or min(self.hidden) < 1:
            raise InvalidArgument("layer sizes must be positive")
        if self.activation != "relu":
            raise InvalidArgument(f"unsupported activation {self.activation!r}")

    def to_dict(self):
        return {"kind": self.kind, **asdict(self), "hidden": list(self.hidden)}

    def param_shapes(self):
        shapes = {}
        dims = (self.input_dim,) + self.hidden + (self.n_classes,)
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            shapes[f"layers.{i}.weight"] = (fan_in, fan_out)
            shapes[f"layers.{i}.bias"] = (fan_out,)
        return shapes


def scaled_width(n_embd, n_head, width):
    """Round ``width * n_embd`` down to a multiple of ``n_head`` (minimum ``n_head``)."""
    return max(n_head, int(width * n_embd + 1e-9) // n_head * n_head)


@dataclass(frozen=True)
class GptConfig:
    vocab_size: int
    n_embd: int = 128
    n_layer: int = 4
    n_head: int = 4
    block_size: int = 128
    dropout: float = 0.1
    width: float = 1.0

    kind = "gpt"

    def __post_init__(self):
        if not 0.0 < self.width <= 1.0:
            raise InvalidArgument(f"width fraction must be in (0, 1], got {self.width}")
        if self.vocab_size < 1:
            raise InvalidArgument("empty vocabulary")
        if self.block_size < 2:
            raise InvalidArgument("block size must be at least 2")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArgument("dropout must be in [0, 1)")
        if self.n_layer < 1 or self.n_head < 1:
            raise InvalidArgument("need at least one layer and one head")
        if self.d_model % self.n_head:
            raise InvalidArgument("embedding width not divisible by head count")

    @property
    def d_model(self):
        return scaled_width(self.n_embd, self.n_head, self.width)

    def with_width(self, width):
        return replace(self, width=width)

    def to_dict(self):
        return {"kind": self.kind, **asdict(self)}

    def param_shapes(self):
        d, v, b = self.d_model, self.vocab_size, self.block_size
        shapes = {"wte": (v, d), "wpe": (b, d)}
        for i in range(self.n_layer):
            p = f"h.{i}."
            shapes.update({
                p + "ln_1.weight": (d,), p + "ln_1.bias": (d,),
                p + "attn.c_attn.weight": (d, 3 * d), p + "attn.c_attn.bias": (3 * d,),
                p + "attn.c_proj.weight": (d, d), p + "attn.c_proj.bias": (d,),
                p + "ln_2.weight": (d,), p + "ln_2.bias": (d,),
                p + "mlp.c_fc.weight": (d, 4 * d), p + "mlp.c_fc.bias": (4 * d,),
                p + "mlp.c_proj.weight": (4 * d, d), p + "mlp.c_proj.bias": (d,),
            })
        shapes["ln_f.weight"] = (d,)
        shapes["ln_f.bias"] = (d,)
        shapes["lm_head.weight"] = (d, v)
        return shapes


def gpt_param_count(config):
    """Closed form: ``2Vd + Bd + L(12d^2 + 13d) + 2d`` (untied head)."""
    d, v, b, layers = config.d_model, config.vocab_size, config.block_size, config.n_layer
    return 2 * v * d + b * d + layers * (12 * d * d + 13 * d) + 2 * d


GPT_PRESETS = {
    # Full-size settings reported for the Tiny Shakespeare teacher.
    "paper": dict(n_embd=384, n_layer=6, n_head=6, block_size=256, dropout=0.2),
    "pico": dict(n_embd=192, n_layer=6, n_head=6, block_size=256, dropout=0.2),
    # CPU-trainable in minutes.
    "desk": dict(n_embd=128, n_layer=4, n_head=4, block_size=128, dropout=0.1),
    # Single-core acceptance runs.
    "tiny": dict(n_embd=64, n_layer=2, n_head=4, block_size=64, dropout=0.0),
}


def gpt_preset(name, vocab_size, **overrides):
    try:
        base = dict(GPT_PRESETS[name])
    except KeyError:
        raise InvalidArgument(f"unknown GPT preset {name!r}; known: {sorted(GPT_PRESETS)}") from None
    base.update(overrides)
    return GptConfig(vocab_size=vocab_size, **base)


def config_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    if kind == "mlp":
        return MlpConfig(**d)
    if kind == "gpt":
        return GptConfig(**d)
    raise InvalidArgument(f"unknown model kind {kind!r}")


