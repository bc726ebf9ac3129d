"""A small NumPy CNN-LSTM regressor with hand-written backpropagation.

Tensors are laid out (batch, time, channels).  The default stack is

    Conv1D(128, 3, relu) -> MaxPool1D(2) -> Conv1D(128, 3, relu)
    -> MaxPool1D(2) -> FlattenPerStep -> LSTM(64, relu) -> Dense(1)

Every layer caches what it needs in ``forward`` and returns the input
gradient from ``backward``; parameter gradients land in ``layer.grads``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class ShapeError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


# -- layer specs ------------------------------------------------------------

@dataclass(frozen=True)
class Conv1DSpec:
    filters: int
    kernel: int = 3
    activation: str = "relu"
    kind: str = field(default="conv1d", init=False)


@dataclass(frozen=True)
class MaxPool1DSpec:
    pool: int = 2
    kind: str = field(default="maxpool1d", init=False)


@dataclass(frozen=True)
class FlattenPerStepSpec:
    kind: str = field(default="flatten", init=False)


@dataclass(frozen=True)
class LSTMSpec:
    cells: int
    activation: str = "relu"
    kind: str = field(default="lstm", init=False)


@dataclass(frozen=True)
class DenseSpec:
    units: int = 1
    kind: str = field(default="dense", init=False)


SPEC_TYPES = {
    "conv1d": Conv1DSpec,
    "maxpool1d": MaxPool1DSpec,
    "flatten": FlattenPerStepSpec,
    "lstm": LSTMSpec,
    "dense": DenseSpec,
}


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_channels: int = 3
    t_in: int = 16

    def describe(self) -> str:
        parts = []
        for spec in self.layers:
            fields = {k: v for k, v in asdict(spec).items() if k != "kind"}
            parts.append(spec.kind + "".join(f":{k}={v}" for k, v in fields.items()))
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str, input_channels: int, t_in: int) -> "NetworkSpec":
        layers = []
        for token in text.split():
            kind, *kvs = token.split(":")
            if kind not in SPEC_TYPES:
                raise ValueError(f"unknown layer kind {kind!r}")
            kwargs = {}
            for kv in kvs:
                k, v = kv.split("=")
                kwargs[k] = v if k == "activation" else int(v)
            layers.append(SPEC_TYPES[kind](**kwargs))
        return cls(tuple(layers), input_channels, t_in)


def osl_spec(input_channels: int = 3, t_in: int = 16, filters: int = 128, cells: int = 64,
             kernel: int = 3, pool: int = 2) -> NetworkSpec:
    return NetworkSpec(
        (
            Conv1DSpec(filters, kernel, "relu"),
            MaxPool1DSpec(pool),
            Conv1DSpec(filters, kernel, "relu"),
            MaxPool1DSpec(pool),
            FlattenPerStepSpec(),
            LSTMSpec(cells, "relu"),
            DenseSpec(1),
        ),
        input_channels,
        t_in,
    )


def lstm_only_spec(input_channels: int = 3, t_in: int = 16, cells: int = 64) -> NetworkSpec:
    """The single-stage baseline: the OSL stack without its convolutional stage."""
    return NetworkSpec((LSTMSpec(cells, "relu"), DenseSpec(1)), input_channels, t_in)


# -- layers -----------------------------------------------------------------

def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(z, name):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "linear":
        return z
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def _activate_grad(z, a, name):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "linear":
        return np.ones_like(z)
    return 1.0 - a * a


class Layer:
    params: dict
    grads: dict

    def __init__(self):
        self.params, self.grads = {}, {}

    def zero_grad(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}


class Conv1D(Layer):
    """'same' zero padding, stride 1."""

    def __init__(self, spec: Conv1DSpec, in_channels: int, rng):
        super().__init__()
        self.spec = spec
        k, f = spec.kernel, spec.filters
        self.params["W"] = _glorot(rng, (k, in_channels, f), k * in_channels, k * f)
        self.params["b"] = np.zeros(f)
        self.left = (k - 1) // 2
        self.right = k - 1 - self.left

    def output_shape(self, t, c):
        return t, self.spec.filters

    def forward(self, x):
        B, T, C = x.shape
        k = self.spec.kernel
        xp = np.pad(x, ((0, 0), (self.left, self.right), (0, 0)))
        cols = np.stack([xp[:, j : j + T, :] for j in range(k)], axis=2).reshape(B, T, k * C)
        z = cols @ self.params["W"].reshape(k * C, -1) + self.params["b"]
        a = _activate(z, self.spec.activation)
        self.cache = (x.shape, cols, z, a)
        return a

    def backward(self, grad):
        (B, T, C), cols, z, a = self.cache
        k = self.spec.kernel
        dz = grad * _activate_grad(z, a, self.spec.activation)
        self.grads["W"] = (cols.reshape(B * T, k * C).T @ dz.reshape(B * T, -1)).reshape(self.params["W"].shape)
        self.grads["b"] = dz.sum(axis=(0, 1))
        dcols = (dz @ self.params["W"].reshape(k * C, -1).T).reshape(B, T, k, C)
        dxp = np.zeros((B, T + k - 1, C))
        for j in range(k):
            dxp[:, j : j + T, :] += dcols[:, :, j, :]
        return dxp[:, self.left : self.left + T, :]


class MaxPool1D(Layer):
    """Non-overlapping windows; a trailing partial window is dropped."""

    def __init__(self, spec: MaxPool1DSpec):
        super().__init__()
        self.spec = spec

    def output_shape(self, t, c):
        return t // self.spec.pool, c

    def forward(self, x):
        B, T, C = x.shape
        p = self.spec.pool
        n = T // p
        windows = x[:, : n * p, :].reshape(B, n, p, C)
        idx = windows.argmax(axis=2)
        self.cache = (x.shape, idx)
        return np.take_along_axis(windows, idx[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(self, grad):
        (B, T, C), idx = self.cache
        p = self.spec.pool
        n = T // p
        dwin = np.zeros((B, n, p, C))
        np.put_along_axis(dwin, idx[:, :, None, :], grad[:, :, None, :], axis=2)
        dx = np.zeros((B, T, C))
        dx[:, : n * p, :] = dwin.reshape(B, n * p, C)
        return dx


class FlattenPerStep(Layer):
    """Merges all feature axes per time step; (B, T, C) is already flat."""

    def __init__(self, spec=None):
        super().__init__()

    def output_shape(self, t, c):
        return t, c

    def forward(self, x):
        self.shape = x.shape
        return x.reshape(x.shape[0], x.shape[1], -1)

    def backward(self, grad):
        return grad.reshape(self.shape)


class LSTM(Layer):
    """Standard sigmoid-gated cell with tanh candidate; ``activation`` is
    applied to the final hidden state, which is the layer output."""

    def __init__(self, spec: LSTMSpec, in_features: int, rng):
        super().__init__()
        self.spec = spec
        H = spec.cells
        self.params["W"] = _glorot(rng, (in_features + H, 4 * H), in_features + H, 4 * H)
        self.params["b"] = np.zeros(4 * H)

    def output_shape(self, t, c):
        return None, self.spec.cells

    def forward(self, x):
        B, T, D = x.shape
        H = self.spec.cells
        W, b = self.params["W"], self.params["b"]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        steps = []
        for t in range(T):
            xh = np.concatenate([x[:, t, :], h], axis=1)
            z = xh @ W + b
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H : 2 * H])
            o = _sigmoid(z[:, 2 * H : 3 * H])
            g = np.tanh(z[:, 3 * H :])
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            steps.append((xh, i, f, o, g, c_prev, tc))
        out = _activate(h, self.spec.activation)
        self.cache = (x.shape, steps, h, out)
        return out

    def backward(self, grad):
        (B, T, D), steps, h_last, out = self.cache
        H = self.spec.cells
        W = self.params["W"]
        dW = np.zeros_like(W)
        db = np.zeros(4 * H)
        dx = np.zeros((B, T, D))
        dh = grad * _activate_grad(h_last, out, self.spec.activation)
        dc = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            xh, i, f, o, g, c_prev, tc = steps[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            dz = np.concatenate(
                [dc * g * i * (1 - i), dc * c_prev * f * (1 - f), do * o * (1 - o), dc * i * (1 - g * g)],
                axis=1,
            )
            dW += xh.T @ dz
            db += dz.sum(axis=0)
            dxh = dz @ W.T
            dx[:, t, :] = dxh[:, :D]
            dh = dxh[:, D:]
            dc = dc * f
        self.grads["W"], self.grads["b"] = dW, db
        return dx


class Dense(Layer):
    def __init__(self, spec: DenseSpec, in_features: int, rng):
        super().__init__()
        self.spec = spec
        self.params["W"] = _glorot(rng, (in_features, spec.units), in_features, spec.units)
        self.params["b"] = np.zeros(spec.units)

    def output_shape(self, t, c):
        return None, self.spec.units

    def forward(self, x):
        self.cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad):
        self.grads["W"] = self.cache.T @ grad
        self.grads["b"] = grad.sum(axis=0)
        return grad @ self.params["W"].T


# -- network ----------------------------------------------------------------

class SoHNet:
    """Sequential network built from a :class:`NetworkSpec`."""

    def __init__(self, spec: NetworkSpec, seed: int = 0):
        self.spec = spec
        rng = np.random.default_rng(seed)
        t, c = spec.t_in, spec.input_channels
        self.layers: list[Layer] = []
        seq = True
        for i, ls in enumerate(spec.layers):
            if ls.kind == "conv1d":
                layer = Conv1D(ls, c, rng)
            elif ls.kind == "maxpool1d":
                layer = MaxPool1D(ls)
            elif ls.kind == "flatten":
                layer = FlattenPerStep(ls)
            elif ls.kind == "lstm":
                layer = LSTM(ls, c, rng)
            elif ls.kind == "dense":
                layer = Dense(ls, c, rng)
            else:
                raise ValueError(f"unknown layer {ls!r}")
            if not seq and ls.kind not in ("dense",):
                raise ShapeError(f"layer {i} ({ls.kind}) needs a sequence input")
            t, c = layer.output_shape(t, c)
            if t is None:
                seq = False
            elif t < 1:
                raise ShapeError(f"time length collapses to {t} after layer {i} ({ls.kind})")
            self.layers.append(layer)
        if seq or c != 1:
            raise ShapeError("network must end in Dense(1) after a non-sequence layer")
        self.zero_grad()

    @property
    def lstm_steps(self) -> int:
        t = self.spec.t_in
        for layer in self.layers:
            if isinstance(layer, LSTM):
                return t
            t, _ = layer.output_shape(t, None)
        raise ValueError("network has no LSTM layer")

    def named_params(self) -> dict[str, np.ndarray]:
        return {f"{i}.{type(layer).__name__.lower()}.{k}": v
                for i, layer in enumerate(self.layers) for k, v in layer.params.items()}

    def named_grads(self) -> dict[str, np.ndarray]:
        return {f"{i}.{type(layer).__name__.lower()}.{k}": v
                for i, layer in enumerate(self.layers) for k, v in layer.grads.items()}

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        expected = (self.spec.t_in, self.spec.input_channels)
        if x.ndim != 3 or x.shape[1:] != expected:
            raise ShapeError(f"expected input (batch, {expected[0]}, {expected[1]}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ShapeError("input contains non-finite values")
        return x

    def forward(self, x) -> np.ndarray:
        out = self._check_input(x)
        for layer in self.layers:
            out = layer.forward(out)
        return out[:, 0]

    predict = forward

    def backward(self, x, y, scale: float = 1.0) -> float:
        """Mean-squared-error loss (times ``scale``); fills every layer's grads."""
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        pred = self.forward(x)
        if len(y) != len(pred):
            raise ShapeError(f"{len(pred)} predictions vs {len(y)} targets")
        err = pred - y
        loss = scale * float(np.mean(err * err))
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss}")
        grad = (2.0 * scale / len(y)) * err[:, None]
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return loss


# -- training ---------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    divergence_limit: float = 1e6


class Adam:
    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.config = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        cfg = self.config
        self.t += 1
        c1 = 1 - cfg.beta1 ** self.t
        c2 = 1 - cfg.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = cfg.beta1 * self.m[k] + (1 - cfg.beta1) * g
            self.v[k] = cfg.beta2 * self.v[k] + (1 - cfg.beta2) * g * g
            p -= cfg.learning_rate * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + cfg.epsilon)


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)


def evaluate_loss(model: SoHNet, x, y) -> float:
    pred = model.forward(x)
    return float(np.mean((pred - np.asarray(y, dtype=np.float64)) ** 2))


def train(model: SoHNet, x, y, config: TrainConfig | None = None, x_val=None, y_val=None) -> TrainHistory:
    """Mini-batch Adam on MSE, in place.  Returns per-epoch losses."""
    config = config or TrainConfig()
    x = model._check_input(x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(x) < 1 or len(x) != len(y):
        raise ValueError(f"need >= 1 window with matching targets, got {len(x)} / {len(y)}")
    rng = np.random.default_rng(config.seed)
    params = model.named_params()
    opt = Adam(params, config)
    history = TrainHistory()
    n = len(x)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            try:
                loss = model.backward(x[idx], y[idx])
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from exc
            total += loss * len(idx)
            opt.step(params, model.named_grads())
        epoch_loss = total / n
        if not np.isfinite(epoch_loss) or epoch_loss > config.divergence_limit:
            raise TrainingError(f"training diverged at epoch {epoch}: loss {epoch_loss}")
        history.loss.append(epoch_loss)
        if x_val is not None and len(x_val):
            history.val_loss.append(evaluate_loss(model, x_val, y_val))
    return history


# -- persistence ------------------------------------------------------------

MODEL_HEADER = "oslmodel v1"


def save_model(path, model: SoHNet, meta: dict | None = None) -> None:
    """Flat text: header, ``spec``/``meta`` lines, then one ``weight`` record per array."""
    lines = [MODEL_HEADER, f"spec {model.spec.input_channels} {model.spec.t_in} {model.spec.describe()}"]
    for key in sorted(meta or {}):
        lines.append(f"meta {key} {meta[key]}")
    for name, arr in model.named_params().items():
        shape = ",".join(str(s) for s in arr.shape)
        values = " ".join(repr(float(v)) for v in arr.ravel())
        lines.append(f"weight {name} {shape} {values}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> tuple[SoHNet, dict]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != MODEL_HEADER:
        raise ValueError(f"{path}: not an '{MODEL_HEADER}' file")
    spec = None
    meta, weights = {}, {}
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        tag, rest = line.split(" ", 1)
        if tag == "spec":
            ch, t_in, text = rest.split(" ", 2)
            spec = NetworkSpec.parse(text, int(ch), int(t_in))
        elif tag == "meta":
            key, _, value = rest.partition(" ")
            meta[key] = value
        elif tag == "weight":
            name, shape, *values = rest.split(" ")
            dims = tuple(int(s) for s in shape.split(",")) if shape else ()
            arr = np.array([float(v) for v in values])
            if arr.size != int(np.prod(dims)):
                raise ValueError(f"{path}:{n}: {name} has {arr.size} values for shape {dims}")
            weights[name] = arr.reshape(dims)
        else:
            raise ValueError(f"{path}:{n}: unknown record {tag!r}")
    if spec is None:
        raise ValueError(f"{path}: missing spec record")
    model = SoHNet(spec)
    params = model.named_params()
    if set(params) != set(weights):
        raise ValueError(f"{path}: weight names {sorted(weights)} do not match spec {sorted(params)}")
    for name, arr in params.items():
        if weights[name].shape != arr.shape:
            raise ValueError(f"{path}: {name} shape {weights[name].shape}, spec expects {arr.shape}")
        arr[...] = weights[name]
    return model, meta
