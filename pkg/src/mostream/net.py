"""Compact convolutional classifier with hand-written forward/backward passes.

Everything runs in float64 so analytic gradients can be validated against
central finite differences. Layers: k x k convolution (stride/pad), ReLU,
2x2 max-pool, fully connected, inverted dropout; the network output is
always a softmax over the class logits produced by the final layer.

Training is synchronous mini-batch SGD with momentum, weight decay, and a
step learning-rate schedule; batches are class-balanced and every sample
gets a fresh random stack start and multi-scale crop.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .raster import Rng, make_rng, rng_uniform

CHECKPOINT_MAGIC = b"MOSN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    pad: int = 1


@dataclass(frozen=True)
class ReluSpec:
    pass


@dataclass(frozen=True)
class PoolSpec:
    """2x2 max pooling with stride 2; odd trailing rows/columns drop."""


@dataclass(frozen=True)
class FcSpec:
    width: int


@dataclass(frozen=True)
class DropoutSpec:
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.rate}")


LayerSpec = Union[ConvSpec, ReluSpec, PoolSpec, FcSpec, DropoutSpec]


@dataclass(frozen=True)
class NetConfig:
    input_shape: tuple[int, int, int]
    num_classes: int
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if len(self.input_shape) != 3 or any(d < 1 for d in self.input_shape):
            raise ValueError(f"input_shape must be a positive (C, H, W), got {self.input_shape}")
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")


def desk_net_config(
    input_shape: tuple[int, int, int] = (20, 56, 56),
    num_classes: int = 8,
    conv_channels: tuple[int, int] = (16, 32),
    fc_width: int = 64,
    dropout: float = 0.5,
) -> NetConfig:
    """Default desk-scale architecture: two conv/pool blocks, one hidden
    fully connected layer with dropout, then the class logits."""
    return NetConfig(
        input_shape=input_shape,
        num_classes=num_classes,
        layers=(
            ConvSpec(conv_channels[0]),
            ReluSpec(),
            PoolSpec(),
            ConvSpec(conv_channels[1]),
            ReluSpec(),
            PoolSpec(),
            FcSpec(fc_width),
            ReluSpec(),
            DropoutSpec(dropout),
            FcSpec(num_classes),
        ),
    )


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 0.005
    lr_step: int = 5000
    lr_factor: float = 0.1
    max_iter: int = 15000
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 32
    fc_dropout: tuple[float, float] = (0.9, 0.8)
    seed: int = 0

    def __post_init__(self):
        for name in ("base_lr", "lr_factor", "momentum", "weight_decay"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_step < 1 or self.max_iter < 0:
            raise ValueError("lr_step must be >= 1 and max_iter >= 0")


def learning_rate(iteration: int, cfg: TrainConfig) -> float:
    """Step schedule: base_lr scaled by lr_factor every lr_step iterations."""
    return cfg.base_lr * cfg.lr_factor ** (iteration // cfg.lr_step)


# --------------------------------------------------------------------------
# layers


def _im2col(x, k, stride, pad):
    # Patch matrix laid out as (n*out_h*out_w, k*k*c): a channel-last
    # overlapping-window view gathered in one pass, so the convolution GEMM
    # and its backward need no further transposes of the big buffer. The
    # matching weight layout is a cheap transpose of the small kernel tensor.
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    hp, wp = x.shape[2:]
    out_h = (hp - k) // stride + 1
    out_w = (wp - k) // stride + 1
    xcl = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    sn, sh, sw, sc = xcl.strides
    view = np.lib.stride_tricks.as_strided(
        xcl,
        shape=(n, out_h, out_w, k, k, c),
        strides=(sn, sh * stride, sw * stride, sh, sw, sc),
    )
    return np.ascontiguousarray(view).reshape(n * out_h * out_w, k * k * c), out_h, out_w


def _col2im(dflat, x_shape, k, stride, pad):
    n, c, h, w = x_shape
    hp, wp = h + 2 * pad, w + 2 * pad
    out_h = (hp - k) // stride + 1
    out_w = (wp - k) // stride + 1
    dcols = dflat.reshape(n, out_h, out_w, k, k, c)
    dxcl = np.zeros((n, hp, wp, c))
    for ki in range(k):
        for kj in range(k):
            dxcl[:, ki : ki + stride * out_h : stride, kj : kj + stride * out_w : stride, :] += dcols[:, :, :, ki, kj, :]
    dx = np.ascontiguousarray(dxcl.transpose(0, 3, 1, 2))
    if pad:
        dx = dx[:, :, pad:-pad, pad:-pad]
    return dx


class _Conv:
    def __init__(self, spec, in_shape, rng):
        c, h, w = in_shape
        k = spec.kernel
        if h + 2 * spec.pad < k or w + 2 * spec.pad < k:
            raise ValueError(f"conv kernel {k} larger than padded input {in_shape}")
        fan_in = c * k * k
        self.spec = spec
        self.w = rng.normal(0.0, np.sqrt(2.0 / fan_in), (spec.out_channels, c, k, k))
        self.b = np.zeros(spec.out_channels)
        out_h = (h + 2 * spec.pad - k) // spec.stride + 1
        out_w = (w + 2 * spec.pad - k) // spec.stride + 1
        self.out_shape = (spec.out_channels, out_h, out_w)

    def params(self):
        return {"w": self.w, "b": self.b}

    def _w2(self):
        # (out, k*k*c) to match the im2col feature order.
        return np.ascontiguousarray(self.w.transpose(0, 2, 3, 1)).reshape(self.spec.out_channels, -1)

    def forward(self, x, train, rng):
        spec = self.spec
        flat, out_h, out_w = _im2col(x, spec.kernel, spec.stride, spec.pad)
        n = x.shape[0]
        y = flat @ self._w2().T + self.b
        y = np.ascontiguousarray(
            y.reshape(n, out_h, out_w, spec.out_channels).transpose(0, 3, 1, 2)
        )
        return y, (flat, x.shape)

    def backward(self, dout, cache):
        flat, x_shape = cache
        spec = self.spec
        n, o, out_h, out_w = dout.shape
        k = spec.kernel
        c = x_shape[1]
        d2 = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(-1, o)
        dw = np.ascontiguousarray((d2.T @ flat).reshape(o, k, k, c).transpose(0, 3, 1, 2))
        db = d2.sum(axis=0)
        dflat = d2 @ self._w2()
        dx = _col2im(dflat, x_shape, spec.kernel, spec.stride, spec.pad)
        return dx, {"w": dw, "b": db}


class _Relu:
    def __init__(self, in_shape):
        self.out_shape = in_shape

    def params(self):
        return {}

    def forward(self, x, train, rng):
        return np.maximum(x, 0.0), x > 0

    def backward(self, dout, cache):
        return dout * cache, {}


class _Pool:
    def __init__(self, in_shape):
        c, h, w = in_shape
        if h < 2 or w < 2:
            raise ValueError(f"max-pool input too small: {in_shape}")
        self.crop = (h // 2 * 2, w // 2 * 2)
        self.out_shape = (c, h // 2, w // 2)

    def params(self):
        return {}

    def forward(self, x, train, rng):
        n, c, h, w = x.shape
        ch, cw = self.crop
        xv = x[:, :, :ch, :cw].reshape(n, c, ch // 2, 2, cw // 2, 2)
        xv = xv.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ch // 2, cw // 2, 4)
        idx = xv.argmax(axis=-1)
        y = np.take_along_axis(xv, idx[..., None], axis=-1)[..., 0]
        return y, (idx, x.shape)

    def backward(self, dout, cache):
        idx, x_shape = cache
        n, c, h, w = x_shape
        ch, cw = self.crop
        dxv = np.zeros((n, c, ch // 2, cw // 2, 4))
        np.put_along_axis(dxv, idx[..., None], dout[..., None], axis=-1)
        dxv = dxv.reshape(n, c, ch // 2, cw // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros(x_shape)
        dx[:, :, :ch, :cw] = dxv.reshape(n, c, ch, cw)
        return dx, {}


class _Fc:
    def __init__(self, spec, in_shape, rng):
        fan_in = int(np.prod(in_shape))
        self.in_shape = in_shape
        self.w = rng.normal(0.0, np.sqrt(2.0 / fan_in), (spec.width, fan_in))
        self.b = np.zeros(spec.width)
        self.out_shape = (spec.width,)

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, train, rng):
        flat = x.reshape(x.shape[0], -1)
        return flat @ self.w.T + self.b, flat

    def backward(self, dout, cache):
        dw = dout.T @ cache
        db = dout.sum(axis=0)
        dx = (dout @ self.w).reshape((dout.shape[0],) + self.in_shape)
        return dx, {"w": dw, "b": db}


class _Dropout:
    def __init__(self, spec, in_shape):
        self.rate = spec.rate
        self.out_shape = in_shape

    def params(self):
        return {}

    def forward(self, x, train, rng):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("train-mode forward through dropout requires an rng")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep) / keep
        return x * mask, mask

    def backward(self, dout, cache):
        if cache is None:
            return dout, {}
        return dout * cache, {}


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class TinyNet:
    """Feed-forward classifier built from a NetConfig; outputs class
    probabilities. Immutable after training apart from sgd_step updates."""

    def __init__(self, config: NetConfig, rng: Rng):
        self.config = config
        self.layers = []
        shape = tuple(config.input_shape)
        for i, spec in enumerate(config.layers):
            if isinstance(spec, ConvSpec):
                if len(shape) != 3:
                    raise ValueError(f"layer {i}: convolution needs a (C, H, W) input, got {shape}")
                layer = _Conv(spec, shape, rng)
            elif isinstance(spec, ReluSpec):
                layer = _Relu(shape)
            elif isinstance(spec, PoolSpec):
                if len(shape) != 3:
                    raise ValueError(f"layer {i}: max-pool needs a (C, H, W) input, got {shape}")
                layer = _Pool(shape)
            elif isinstance(spec, FcSpec):
                layer = _Fc(spec, shape, rng)
            elif isinstance(spec, DropoutSpec):
                layer = _Dropout(spec, shape)
            else:
                raise ValueError(f"layer {i}: unknown spec {spec!r}")
            self.layers.append(layer)
            shape = layer.out_shape
        if int(np.prod(shape)) != config.num_classes:
            raise ValueError(
                f"final layer produces {int(np.prod(shape))} values, expected {config.num_classes} classes"
            )

    def _as_batch(self, volume):
        x = np.asarray(volume, dtype=np.float64)
        if x.ndim == 3:
            return x[None], True
        if x.ndim == 4:
            return x, False
        raise ValueError(f"expected (C, H, W) or (N, C, H, W) input, got shape {x.shape}")

    def forward(self, volume, mode: str = "eval", rng: Rng = None):
        """Class probabilities for a volume or batch of volumes."""
        if mode not in ("eval", "train"):
            raise ValueError(f"mode must be 'eval' or 'train', got {mode!r}")
        probs, _ = self._forward(volume, mode == "train", rng, want_cache=False)
        return probs

    def forward_with_cache(self, volume, rng: Rng = None):
        """Train-mode forward returning (probabilities, caches) for backward."""
        return self._forward(volume, True, rng, want_cache=True)

    def _forward(self, volume, train, rng, want_cache):
        x, single = self._as_batch(volume)
        expected = tuple(self.config.input_shape)
        if x.shape[1:] != expected:
            raise ValueError(f"input shape {x.shape[1:]} does not match network input {expected}")
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, train, rng)
            caches.append(cache)
        logits = x.reshape(x.shape[0], self.config.num_classes)
        probs = _softmax(logits)
        out = probs[0] if single else probs
        if want_cache:
            return out, {"layers": caches, "probs": probs, "logits_shape": x.shape}
        return out, None

    def backward(self, cache, targets):
        """Softmax cross-entropy gradients for every parameter.

        `cache` comes from forward_with_cache; `targets` is a class index
        or an array of them (one per batch row). Returns one dict per
        layer, aligned with self.layers.
        """
        if cache is None:
            raise ValueError("backward requires the cache from a train-mode forward")
        targets = np.atleast_1d(np.asarray(targets, dtype=np.intp))
        probs = cache["probs"]
        n, k = probs.shape
        if targets.shape != (n,):
            raise ValueError(f"expected {n} targets, got shape {targets.shape}")
        if targets.min() < 0 or targets.max() >= k:
            raise ValueError("target class index out of range")
        dlogits = probs.copy()
        dlogits[np.arange(n), targets] -= 1.0
        dlogits /= n
        dx = dlogits.reshape(cache["logits_shape"])
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            dx, g = self.layers[i].backward(dx, cache["layers"][i])
            grads[i] = g
        return grads

    def loss_and_grads(self, volume, targets, rng: Rng = None):
        """Mean cross-entropy loss and parameter gradients for a batch."""
        probs, cache = self.forward_with_cache(volume, rng)
        probs = cache["probs"]
        targets = np.atleast_1d(np.asarray(targets, dtype=np.intp))
        n = probs.shape[0]
        loss = float(-np.log(np.maximum(probs[np.arange(n), targets], 1e-300)).mean())
        grads = self.backward(cache, targets)
        return loss, grads

    def parameters(self):
        """List of (layer_index, name, array) for every trainable tensor."""
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in sorted(layer.params().items()):
                out.append((i, name, arr))
        return out


class SgdState:
    """Momentum velocities, one per trainable tensor."""

    def __init__(self, net: TinyNet):
        self.velocities = {(i, name): np.zeros_like(arr) for i, name, arr in net.parameters()}


def sgd_step(net: TinyNet, grads, state: SgdState, iteration: int, cfg: TrainConfig):
    """One SGD update: v = m*v - lr*(g + wd*p); p += v. Mutates net/state."""
    lr = learning_rate(iteration, cfg)
    for i, name, param in net.parameters():
        grad = grads[i].get(name)
        if grad is None or grad.shape != param.shape:
            raise ValueError(f"gradient missing or mismatched for layer {i} param {name!r}")
        vel = state.velocities[(i, name)]
        vel *= cfg.momentum
        vel -= lr * (grad + cfg.weight_decay * param)
        param += vel
    return net


def train(
    net: TinyNet,
    train_by_class: Sequence[Sequence],
    make_volume: Callable,
    cfg: TrainConfig,
    progress: Callable | None = None,
):
    """SGD training loop over class-balanced mini-batches.

    `train_by_class[c]` lists the training clips of class c; `make_volume`
    maps (clip, rng) to an input volume and is where the random stack
    start and random crop are drawn. Returns the loss curve as a list of
    (iteration, lr, loss) tuples. Fully determined by cfg.seed.
    """
    k = len(train_by_class)
    if k == 0 or any(len(clips) == 0 for clips in train_by_class):
        raise ValueError("every class needs at least one training clip")
    rng = make_rng(cfg.seed, stream=1)
    state = SgdState(net)
    curve = []
    for it in range(cfg.max_iter):
        classes = [(it * cfg.batch_size + i) % k for i in range(cfg.batch_size)]
        xs = []
        for c in classes:
            clips = train_by_class[c]
            clip = clips[rng_uniform(rng, len(clips))]
            xs.append(make_volume(clip, rng))
        batch = np.stack(xs)
        targets = np.asarray(classes, dtype=np.intp)
        loss, grads = net.loss_and_grads(batch, targets, rng)
        sgd_step(net, grads, state, it, cfg)
        lr = learning_rate(it, cfg)
        curve.append((it, lr, loss))
        if progress is not None:
            progress(it, lr, loss)
    return curve


# --------------------------------------------------------------------------
# checkpoint format: magic "MOSN", version byte, JSON layer descriptors,
# then raw float64 little-endian parameter payloads in layer order.

_SPEC_TAGS = {
    ConvSpec: "conv",
    ReluSpec: "relu",
    PoolSpec: "pool",
    FcSpec: "fc",
    DropoutSpec: "dropout",
}


def _spec_to_dict(spec):
    tag = _SPEC_TAGS[type(spec)]
    d = {"type": tag}
    if isinstance(spec, ConvSpec):
        d.update(out_channels=spec.out_channels, kernel=spec.kernel, stride=spec.stride, pad=spec.pad)
    elif isinstance(spec, FcSpec):
        d.update(width=spec.width)
    elif isinstance(spec, DropoutSpec):
        d.update(rate=spec.rate)
    return d


def _spec_from_dict(d):
    tag = d["type"]
    if tag == "conv":
        return ConvSpec(d["out_channels"], d["kernel"], d["stride"], d["pad"])
    if tag == "relu":
        return ReluSpec()
    if tag == "pool":
        return PoolSpec()
    if tag == "fc":
        return FcSpec(d["width"])
    if tag == "dropout":
        return DropoutSpec(d["rate"])
    raise ValueError(f"unknown layer descriptor type {tag!r}")


def save_checkpoint(net: TinyNet, path, iterations: int = 0):
    """Write a bit-exact snapshot of the network to `path`."""
    header = {
        "input_shape": list(net.config.input_shape),
        "num_classes": net.config.num_classes,
        "layers": [_spec_to_dict(s) for s in net.config.layers],
        "iterations": iterations,
        "params": [
            {"layer": i, "name": name, "shape": list(arr.shape)}
            for i, name, arr in net.parameters()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(bytes([CHECKPOINT_VERSION]))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, _, arr in net.parameters():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[TinyNet, dict]:
    """Read a checkpoint; returns (net, header metadata)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    if data[4] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data[4]}")
    (blob_len,) = struct.unpack_from("<I", data, 5)
    header = json.loads(data[9 : 9 + blob_len].decode("utf-8"))
    config = NetConfig(
        input_shape=tuple(header["input_shape"]),
        num_classes=header["num_classes"],
        layers=tuple(_spec_from_dict(d) for d in header["layers"]),
    )
    net = TinyNet(config, make_rng(0))
    offset = 9 + blob_len
    for (i, name, arr), meta in zip(net.parameters(), header["params"]):
        if [i, name] != [meta["layer"], meta["name"]] or list(arr.shape) != meta["shape"]:
            raise ValueError("checkpoint parameter table does not match the architecture")
        count = int(np.prod(arr.shape))
        vals = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        arr[...] = vals.reshape(arr.shape)
        offset += count * 8
    if offset != len(data):
        raise ValueError(f"checkpoint has {len(data) - offset} trailing bytes")
    return net, header
