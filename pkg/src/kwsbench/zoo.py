"""Architecture registry, config format and weight persistence.

Config format (one statement per line, ``#`` starts a comment)::

    name = trad-fpool3
    input = 101x40x1
    labels = 12
    layer conv m=20 r=8 n=64 s=1x1 pool=1x3
    layer lin n=32
    layer dnn n=128
    layer softmax

Weight file: ``KWSW`` magic, u16 version, u16 layer count, then per layer
u8 rank, rank x u32 dims, f32 weights, u32 bias length, f32 bias. All
little-endian.
"""
import re
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import engine
from .errors import ArchParseError, ShapeError, UnknownArchError, WeightFormatError

LAYER_KINDS = ("conv", "lin", "dnn", "softmax")
ACTIVATION_BY_KIND = {"conv": "relu", "lin": "none", "dnn": "relu", "softmax": "softmax"}

BUILTIN_NAMES = ("trad-fpool3", "tpool2", "tpool3", "trad-pool2",
                 "one-stride1", "one-fstride4", "one-fstride8")

WEIGHT_MAGIC = b"KWSW"
WEIGHT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    n: int
    m: int | None = None
    r: int | None = None
    stride: tuple = (1, 1)
    pool: tuple = (1, 1)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.n < 1:
            raise ShapeError(f"{self.kind} layer needs n >= 1, got {self.n}")
        if self.kind == "conv":
            if self.m is None or self.r is None:
                raise ShapeError("conv layer needs m and r")
            if min(self.m, self.r, *self.stride, *self.pool) < 1:
                raise ShapeError(f"conv sizes must be >= 1: m={self.m} r={self.r} "
                                 f"s={self.stride} pool={self.pool}")
        elif self.m is not None or self.r is not None:
            raise ShapeError(f"{self.kind} layer carries only n")

    @property
    def activation(self):
        return ACTIVATION_BY_KIND[self.kind]


def conv(m, r, n, s=(1, 1), pool=(1, 1)):
    return LayerSpec("conv", n, m, r, tuple(s), tuple(pool))


def layer_output_shape(layer: LayerSpec, in_shape):
    """Shape after ``layer`` given ``in_shape``; (T, F, C) for conv, (n,) otherwise."""
    if layer.kind == "conv":
        if len(in_shape) != 3:
            raise ShapeError(f"conv layer needs a (T, F, C) input, got {tuple(in_shape)}")
        t, f, _ = in_shape
        if layer.m > t or layer.r > f:
            raise ShapeError(f"filter {layer.m}x{layer.r} larger than input {t}x{f}")
        t_out, f_out = engine.conv_output_dims(t, f, layer.m, layer.r, *layer.stride)
        p, q = layer.pool
        if p > t_out or q > f_out:
            raise ShapeError(f"pool {p}x{q} larger than conv output {t_out}x{f_out}")
        return (t_out // p, f_out // q, layer.n)
    return (layer.n,)


@dataclass(frozen=True)
class ArchSpec:
    name: str
    layers: tuple
    input_shape: tuple = (101, 40, 1)
    n_labels: int = 12

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))

    def shapes(self):
        """Output shape of every layer; raises ShapeError on an invalid chain."""
        if not self.layers:
            raise ShapeError("architecture has no layers")
        last = self.layers[-1]
        if last.kind != "softmax" or last.n != self.n_labels:
            raise ShapeError(f"last layer must be softmax with n={self.n_labels}",
                             layer_index=len(self.layers) - 1)
        out, shape = [], self.input_shape
        seen_dense = False
        for i, layer in enumerate(self.layers):
            if layer.kind == "conv" and seen_dense:
                raise ShapeError("conv layer after a fully-connected layer", layer_index=i)
            if layer.kind == "softmax" and i != len(self.layers) - 1:
                raise ShapeError("softmax must be the last layer", layer_index=i)
            seen_dense = seen_dense or layer.kind != "conv"
            try:
                shape = layer_output_shape(layer, shape)
            except ShapeError as exc:
                raise ShapeError(str(exc), layer_index=i) from None
            out.append(shape)
        return out

    def validate(self):
        self.shapes()
        return self

    def weight_shapes(self):
        shapes, in_shape = [], self.input_shape
        for layer, out_shape in zip(self.layers, self.shapes()):
            if layer.kind == "conv":
                shapes.append(((layer.m, layer.r, in_shape[2], layer.n), (layer.n,)))
            else:
                shapes.append(((int(np.prod(in_shape)), layer.n), (layer.n,)))
            in_shape = out_shape
        return shapes


# -- config text -----------------------------------------------------------

_DIMS = re.compile(r"^\s*(\d+)\s*x\s*(\d+)\s*$")


def _pair(text, key, lineno):
    match = _DIMS.match(text)
    if not match:
        raise ArchParseError(f"{key} must look like AxB, got {text!r}", lineno)
    return int(match.group(1)), int(match.group(2))


def _int(text, key, lineno):
    try:
        value = int(text)
    except ValueError:
        raise ArchParseError(f"{key} must be an integer, got {text!r}", lineno) from None
    if value < 1:
        raise ArchParseError(f"{key} must be >= 1, got {value}", lineno)
    return value


def _parse_layer(tokens, lineno):
    if not tokens:
        raise ArchParseError("layer line without a kind", lineno)
    kind, rest = tokens[0], tokens[1:]
    if kind not in LAYER_KINDS:
        raise ArchParseError(f"unknown layer kind {kind!r}", lineno)
    fields = {}
    for token in rest:
        if "=" not in token:
            raise ArchParseError(f"expected key=value, got {token!r}", lineno)
        key, value = token.split("=", 1)
        fields[key] = value
    allowed = {"conv": {"m", "r", "n", "s", "pool"}, "softmax": {"n"}}.get(kind, {"n"})
    unknown = set(fields) - allowed
    if unknown:
        raise ArchParseError(f"unknown key(s) for {kind}: {', '.join(sorted(unknown))}", lineno)
    required = {"conv": ("m", "r", "n"), "softmax": ()}.get(kind, ("n",))
    for key in required:
        if key not in fields:
            raise ArchParseError(f"{kind} layer missing field {key!r}", lineno)
    return kind, fields


def parse_arch_config(text):
    """Parse the line-oriented architecture format into a validated ArchSpec."""
    header = {}
    raw_layers = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        # tolerate whitespace around '=' everywhere
        line = re.sub(r"\s*=\s*", "=", line)
        if line.startswith("layer ") or line == "layer":
            raw_layers.append((lineno, _parse_layer(line.split()[1:], lineno)))
            continue
        if "=" not in line:
            raise ArchParseError(f"unrecognized statement {line!r}", lineno)
        key, value = line.split("=", 1)
        if key not in ("name", "input", "labels"):
            raise ArchParseError(f"unknown key {key!r}", lineno)
        if key in header:
            raise ArchParseError(f"duplicate key {key!r}", lineno)
        header[key] = (lineno, value)

    if "name" not in header:
        raise ArchParseError("missing field 'name'")
    name = header["name"][1]
    input_shape = (101, 40, 1)
    if "input" in header:
        lineno, value = header["input"]
        dims = value.split("x")
        if len(dims) != 3:
            raise ArchParseError(f"input must look like TxFxC, got {value!r}", lineno)
        input_shape = tuple(_int(d, "input", lineno) for d in dims)
    n_labels = 12
    if "labels" in header:
        n_labels = _int(header["labels"][1], "labels", header["labels"][0])

    layers, linenos = [], []
    for lineno, (kind, fields) in raw_layers:
        if kind == "conv":
            layer = conv(_int(fields["m"], "m", lineno), _int(fields["r"], "r", lineno),
                         _int(fields["n"], "n", lineno),
                         s=_pair(fields.get("s", "1x1"), "s", lineno),
                         pool=_pair(fields.get("pool", "1x1"), "pool", lineno))
        elif kind == "softmax":
            n = _int(fields["n"], "n", lineno) if "n" in fields else n_labels
            layer = LayerSpec("softmax", n)
        else:
            layer = LayerSpec(kind, _int(fields["n"], "n", lineno))
        layers.append(layer)
        linenos.append(lineno)
    if not layers:
        raise ArchParseError("no layer lines")

    spec = ArchSpec(name, layers, input_shape, n_labels)
    try:
        spec.validate()
    except ShapeError as exc:
        lineno = linenos[exc.layer_index] if exc.layer_index is not None else None
        raise ArchParseError(f"shape chain: {exc}", lineno) from None
    return spec


def serialize_arch(spec: ArchSpec):
    lines = [f"name = {spec.name}",
             "input = " + "x".join(str(d) for d in spec.input_shape),
             f"labels = {spec.n_labels}"]
    for layer in spec.layers:
        if layer.kind == "conv":
            lines.append(f"layer conv m={layer.m} r={layer.r} n={layer.n} "
                         f"s={layer.stride[0]}x{layer.stride[1]} "
                         f"pool={layer.pool[0]}x{layer.pool[1]}")
        elif layer.kind == "softmax":
            lines.append("layer softmax")
        else:
            lines.append(f"layer {layer.kind} n={layer.n}")
    return "\n".join(lines) + "\n"


def builtin_arch(name):
    name = name.removeprefix("cnn-")
    if name not in BUILTIN_NAMES:
        raise UnknownArchError(f"unknown architecture {name!r}; valid names: "
                               + ", ".join(BUILTIN_NAMES))
    text = resources.files("kwsbench.archs").joinpath(f"{name}.arch").read_text()
    return parse_arch_config(text)


def load_arch(name_or_path):
    """Resolve a builtin name or a config file path."""
    path = Path(name_or_path)
    if path.suffix == ".arch" or path.is_file():
        return parse_arch_config(path.read_text())
    return builtin_arch(str(name_or_path))


# -- weights ---------------------------------------------------------------

@dataclass(frozen=True)
class WeightSet:
    layers: tuple = field(default_factory=tuple)  # ((weights, bias), ...)

    def check(self, spec: ArchSpec):
        expected = spec.weight_shapes()
        if len(expected) != len(self.layers):
            raise ShapeError(f"weight set has {len(self.layers)} layers, "
                             f"{spec.name} has {len(expected)}")
        for i, ((w, b), (w_shape, b_shape)) in enumerate(zip(self.layers, expected)):
            if w.shape != w_shape or b.shape != b_shape:
                raise ShapeError(f"weights {w.shape}/bias {b.shape} do not match "
                                 f"{spec.name} shapes {w_shape}/{b_shape}", layer_index=i)
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ShapeError("non-finite weights", layer_index=i)
        return self

    def __eq__(self, other):
        if not isinstance(other, WeightSet):
            return NotImplemented
        if len(self.layers) != len(other.layers):
            return False
        return all(np.array_equal(w1, w2) and np.array_equal(b1, b2)
                   for (w1, b1), (w2, b2) in zip(self.layers, other.layers))


def init_weights(spec: ArchSpec, seed=0):
    """Deterministic uniform [-0.05, 0.05] weights with zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for w_shape, b_shape in spec.weight_shapes():
        w = rng.uniform(-0.05, 0.05, size=w_shape).astype(np.float32)
        layers.append((w, np.zeros(b_shape, dtype=np.float32)))
    return WeightSet(tuple(layers))


def zero_weights(spec: ArchSpec):
    return WeightSet(tuple((np.zeros(w, np.float32), np.zeros(b, np.float32))
                           for w, b in spec.weight_shapes()))


def weights_to_bytes(weights: WeightSet):
    chunks = [WEIGHT_MAGIC, struct.pack("<HH", WEIGHT_VERSION, len(weights.layers))]
    for w, b in weights.layers:
        chunks.append(struct.pack("<B", w.ndim))
        chunks.append(struct.pack(f"<{w.ndim}I", *w.shape))
        chunks.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        chunks.append(struct.pack("<I", b.size))
        chunks.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(chunks)


def weights_from_bytes(data):
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise WeightFormatError(f"truncated weight file at byte {pos} (need {n} more)")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != WEIGHT_MAGIC:
        raise WeightFormatError("bad magic, not a KWSW weight file")
    version, count = struct.unpack("<HH", take(4))
    if version != WEIGHT_VERSION:
        raise WeightFormatError(f"unsupported weight file version {version}")
    layers = []
    for _ in range(count):
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(dims)) if dims else 1
        w = np.frombuffer(take(4 * size), dtype="<f4").astype(np.float32).reshape(dims)
        (blen,) = struct.unpack("<I", take(4))
        b = np.frombuffer(take(4 * blen), dtype="<f4").astype(np.float32)
        layers.append((w, b))
    if pos != len(view):
        raise WeightFormatError(f"{len(view) - pos} trailing bytes after last layer")
    return WeightSet(tuple(layers))


def save_weights(path, weights: WeightSet):
    Path(path).write_bytes(weights_to_bytes(weights))


def load_weights(path, spec: ArchSpec | None = None):
    weights = weights_from_bytes(Path(path).read_bytes())
    if spec is not None:
        weights.check(spec)
    return weights


# -- executable model ------------------------------------------------------

class Model:
    """An ArchSpec bound to a WeightSet, callable on a (T, F) feature matrix."""

    def __init__(self, spec: ArchSpec, weights: WeightSet):
        weights.check(spec)
        self.spec = spec
        self.weights = weights
        self.params = []
        for layer, (w, b) in zip(spec.layers, weights.layers):
            if layer.kind == "conv":
                self.params.append(engine.ConvParams(w, b, layer.stride, layer.pool))
            else:
                self.params.append(engine.DenseParams(w, b, layer.activation))

    @property
    def name(self):
        return self.spec.name

    def forward(self, x):
        x = np.asarray(x, dtype=np.float32)
        if x.ndim == 2:
            x = x[:, :, None]
        if x.shape != self.spec.input_shape:
            raise ShapeError(f"input {x.shape} != model input {self.spec.input_shape}",
                             layer_index=0)
        return engine.run_layers(self.params, x)

    __call__ = forward
