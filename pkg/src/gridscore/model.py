"""Architecture families: declarative ``ModelSpec`` and the layer stack built from it."""

import re
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ArchitectureError, GeometryError, ValidationError
from .nn import (
    PADDINGS,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2D,
    Relu,
    SoftmaxOutput,
)

CONV_FILTERS = (32, 64, 96, 128, 160)
FC_UNITS = (128, 192, 256)
DROPOUT_RATE = 0.25
INPUT_SHAPE = (64, 64, 1)
N_CLASSES = 3

_NAME_RE = re.compile(r"^(?:ffn(?P<ffc>\d)|cnn(?P<conv>\d)x(?P<cfc>\d)-(?P<pad>zero|none))(?P<drop>-dropout)?$")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description.

    ``n_fc`` counts every fully connected layer including the 3-unit output.
    Filter and unit counts are fixed by position: conv layers get 32, 64, ...,
    160 filters and hidden fc layers 128, 192, 256 units.
    """

    family: str = "cnn"
    n_conv: int = 2
    n_fc: int = 2
    padding: str = "zero"
    dropout: bool = True
    input_shape: tuple = INPUT_SHAPE
    n_classes: int = N_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        if self.family not in ("ffn", "cnn"):
            raise ValidationError(f"family must be 'ffn' or 'cnn', got {self.family!r}")
        if self.family == "ffn" and self.n_conv != 0:
            raise ValidationError("an FFN has no convolutional layers")
        if self.family == "cnn" and not 1 <= self.n_conv <= len(CONV_FILTERS):
            raise ValidationError(f"n_conv must be in 1..{len(CONV_FILTERS)} for a CNN")
        if not 2 <= self.n_fc <= len(FC_UNITS) + 1:
            raise ValidationError(f"n_fc must be in 2..{len(FC_UNITS) + 1}")
        if self.padding not in PADDINGS:
            raise ValidationError(f"padding must be one of {PADDINGS}")
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValidationError(f"input_shape must be HxWxC, got {self.input_shape}")
        if self.n_classes < 2:
            raise ValidationError("need at least two classes")

    @property
    def conv_filters(self):
        return list(CONV_FILTERS[: self.n_conv])

    @property
    def fc_units(self):
        return [*FC_UNITS[: self.n_fc - 1], self.n_classes]

    @property
    def name(self):
        if self.family == "ffn":
            base = f"ffn{self.n_fc}"
        else:
            base = f"cnn{self.n_conv}x{self.n_fc}-{self.padding}"
        return base + ("-dropout" if self.dropout else "")

    @classmethod
    def from_name(cls, name):
        """Parse names such as ``ffn2``, ``cnn2x2-none`` or ``cnn5x2-zero-dropout``."""
        m = _NAME_RE.match(name.strip().lower())
        if not m:
            raise ValidationError(f"cannot parse model name {name!r}")
        dropout = bool(m["drop"])
        if m["ffc"]:
            return cls(family="ffn", n_conv=0, n_fc=int(m["ffc"]), dropout=dropout)
        return cls(
            family="cnn",
            n_conv=int(m["conv"]),
            n_fc=int(m["cfc"]),
            padding=m["pad"],
            dropout=dropout,
        )

    def to_dict(self):
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def describe(self):
        if self.family == "ffn":
            text = f"FFN with {self.n_fc} fully connected layers"
        else:
            text = (
                f"{self.n_conv} convolutional layer CNN with {self.n_fc} fully connected "
                f"layers and {'zero' if self.padding == 'zero' else 'no'} padding"
            )
        return text + (" and dropout layers" if self.dropout else "")


class Model:
    def __init__(self, spec, layers):
        self.spec = spec
        self.layers = layers

    @property
    def output_layer(self):
        return self.layers[-1]

    def named_params(self):
        """Parameters as ``{"<layer index>.<name>": array}``, in layer order."""
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                out[f"{i}.{name}"] = arr
        return out

    def param_count(self):
        return sum(layer.param_count() for layer in self.layers)

    def forward(self, x, train=False, rng=None):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, train=train, rng=rng)
            caches.append(cache)
        return x, caches

    def backward_from_logits(self, grad_logits, caches):
        """Backpropagate a gradient taken w.r.t. the softmax input (the logits)."""
        grads = {}
        g = grad_logits
        for i in range(len(self.layers) - 2, -1, -1):
            g, pgrads = self.layers[i].backward(g, caches[i], need_input_grad=i > 0)
            for name, arr in pgrads.items():
                grads[f"{i}.{name}"] = arr
        return grads

    def predict_proba(self, x, batch_size=256):
        x = np.asarray(x, dtype=np.float64)
        if len(x) == 0:
            return np.zeros((0, self.spec.n_classes))
        parts = [self.forward(x[i:i + batch_size])[0] for i in range(0, len(x), batch_size)]
        return np.concatenate(parts)

    def predict(self, x, batch_size=256):
        return self.predict_proba(x, batch_size).argmax(axis=1)

    def summary(self):
        lines = [f"{self.spec.name}: {self.param_count()} parameters"]
        for layer in self.layers:
            lines.append(f"  {layer.describe():40s} {str(layer.output_shape):18s} {layer.param_count()}")
        return "\n".join(lines)


def layer_plan(spec):
    """The unbuilt layer sequence for ``spec``."""
    layers = []
    for filters in spec.conv_filters:
        layers += [Conv2D(filters, spec.padding), Relu(), MaxPool2D()]
        if spec.dropout:
            layers.append(Dropout(DROPOUT_RATE))
    layers.append(Flatten())
    *hidden, final = spec.fc_units
    for units in hidden:
        layers += [Dense(units), Relu()]
        if spec.dropout:
            layers.append(Dropout(DROPOUT_RATE))
    layers += [Dense(final), SoftmaxOutput(final)]
    return layers


def build_model(spec, rng=None):
    """Instantiate ``spec`` with Glorot-uniform weights drawn from ``rng``.

    With ``rng=None`` all parameters are zero (used when loading checkpoints).
    """
    layers = layer_plan(spec)
    shape = spec.input_shape
    for i, layer in enumerate(layers):
        try:
            shape = layer.build(shape, rng)
        except GeometryError as exc:
            raise ArchitectureError(
                f"{spec.name}: layer {i} {layer.describe()} cannot take input {shape}: {exc}"
            ) from exc
    return Model(spec, layers)
