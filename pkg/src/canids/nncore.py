"""Minimal neural-network kernel on float64 numpy: layers, loss, Adam.

Sized for networks of ~10^4 parameters. Convolution is valid-padding
cross-correlation; pooling uses non-overlapping windows of two with the
trailing odd element dropped and ties resolved toward the earlier index.
Every layer caches what its backward pass needs, and all backward passes
are exact gradients verifiable against central finite differences.

Sequence tensors are (length, channels) for a single sample or
(batch, length, channels) batched; flat tensors are (units,) or
(batch, units). Single-sample inputs come back out single-sample.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    """Tensor shape incompatible with the layer or operation."""


class InvalidOneHot(ValueError):
    """Target rows are not valid one-hot vectors."""


class NonFiniteGradient(FloatingPointError):
    """Gradient contains NaN or infinity."""


class NonFiniteLoss(FloatingPointError):
    """Loss diverged to NaN or infinity."""


def glorot_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(x: np.ndarray) -> np.ndarray:
    """Shift-invariant softmax along the last axis; rows sum to 1.

    Preserves the input float dtype so extended-precision probes stay
    extended-precision end to end.
    """
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax requires finite inputs")
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def one_hot(labels: np.ndarray, classes: int = 2) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError(f"labels must lie in [0, {classes})")
    out = np.zeros((len(labels), classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


_PROB_FLOOR = 1e-12


def cross_entropy(probs: np.ndarray, onehot: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy and its gradient w.r.t. the probabilities.

    Probabilities are clamped to >= 1e-12 inside the log. Composed with the
    softmax backward pass this reproduces the usual (p - y) / N logits
    gradient exactly.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    onehot = np.atleast_2d(np.asarray(onehot, dtype=np.float64))
    if probs.shape != onehot.shape:
        raise ShapeMismatch(f"probs {probs.shape} vs targets {onehot.shape}")
    if not (np.isin(onehot, (0.0, 1.0)).all() and np.allclose(onehot.sum(axis=1), 1.0)):
        raise InvalidOneHot("targets must be one-hot rows")
    n = probs.shape[0]
    clamped = np.maximum(probs, _PROB_FLOOR)
    loss = float(-(onehot * np.log(clamped)).sum() / n)
    grad = -(onehot / clamped) / n
    return loss, grad


class Layer:
    """Forward/backward pair; trainable layers carry weight and bias arrays."""

    trainable = False

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def zero_grads(self) -> None:
        for g in self.grads():
            g[...] = 0.0

    def spec(self) -> str:
        raise NotImplementedError


class Conv1D(Layer):
    """Valid cross-correlation: out[t, f] = b[f] + sum_{k,c} w[f,k,c] x[t+k,c]."""

    trainable = True

    def __init__(self, in_channels: int, filters: int, kernel_size: int, rng: np.random.Generator | None = None):
        if filters < 1 or kernel_size < 1 or in_channels < 1:
            raise ValueError("conv dimensions must be positive")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        rng = rng or np.random.default_rng(0)
        self.w = glorot_uniform(
            (filters, kernel_size, in_channels),
            fan_in=kernel_size * in_channels,
            fan_out=kernel_size * filters,
            rng=rng,
        )
        self.b = np.zeros(filters)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self.frozen = False
        self._windows = None
        self._single = False

    def param_count(self) -> int:
        return self.filters * (self.kernel_size * self.in_channels + 1)

    def _window_index(self, length: int) -> np.ndarray:
        # gather index turning (batch, L, C) into (batch, out_len, K, C) windows
        if getattr(self, "_idx_length", None) != length:
            out_len = length - self.kernel_size + 1
            self._idx = (np.arange(out_len)[:, None] + np.arange(self.kernel_size)).ravel()
            self._idx_length = length
        return self._idx

    def forward(self, x):
        self._single = x.ndim == 2
        if self._single:
            x = x[None]
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeMismatch(f"expected (batch, length, {self.in_channels}), got {x.shape}")
        k = self.kernel_size
        n, length, channels = x.shape
        if length < k:
            raise ShapeMismatch(f"length {length} shorter than kernel {k}")
        out_len = length - k + 1
        windows = x[:, self._window_index(length), :].reshape(n, out_len, k * channels)
        self._windows = windows
        self._in_shape = x.shape
        out = windows @ self.w.reshape(self.filters, k * channels).T + self.b
        return out[0] if self._single else out

    def backward(self, grad):
        if self._single:
            grad = grad[None]
        if grad.shape != (*self._windows.shape[:2], self.filters):
            raise ShapeMismatch(f"upstream gradient shape {grad.shape} mismatches forward output")
        flat_grad = grad.reshape(-1, self.filters)
        flat_windows = self._windows.reshape(flat_grad.shape[0], -1)
        self.gw += (flat_grad.T @ flat_windows).reshape(self.w.shape)
        self.gb += grad.sum(axis=(0, 1))
        dx = np.zeros(self._in_shape)
        out_len = grad.shape[1]
        for i in range(self.kernel_size):
            dx[:, i : i + out_len, :] += grad @ self.w[:, i, :]
        return dx[0] if self._single else dx

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def spec(self):
        return f"conv1d:{self.in_channels}:{self.filters}:{self.kernel_size}"


class MaxPool1D(Layer):
    """Window-2 stride-2 max pooling; odd trailing element is dropped."""

    def forward(self, x):
        self._single = x.ndim == 2
        if self._single:
            x = x[None]
        if x.ndim != 3 or x.shape[1] < 2:
            raise ShapeMismatch(f"expected (batch, length >= 2, channels), got {x.shape}")
        out_len = x.shape[1] // 2
        self._first = x[:, 0 : 2 * out_len : 2, :]
        self._second = x[:, 1 : 2 * out_len : 2, :]
        self._in_shape = x.shape
        out = np.maximum(self._first, self._second)
        return out[0] if self._single else out

    def backward(self, grad):
        if self._single:
            grad = grad[None]
        if grad.shape != self._first.shape:
            raise ShapeMismatch(f"upstream gradient shape {grad.shape} mismatches forward output")
        keep_first = self._first >= self._second  # ties route to the earlier index
        out_len = grad.shape[1]
        dx = np.zeros(self._in_shape)
        dx[:, 0 : 2 * out_len : 2, :] = np.where(keep_first, grad, 0.0)
        dx[:, 1 : 2 * out_len : 2, :] = np.where(keep_first, 0.0, grad)
        return dx[0] if self._single else dx

    def spec(self):
        return "maxpool"


class Flatten(Layer):
    def forward(self, x):
        self._single = x.ndim == 2
        if self._single:
            x = x[None]
        self._in_shape = x.shape
        out = x.reshape(x.shape[0], -1)
        return out[0] if self._single else out

    def backward(self, grad):
        if self._single:
            grad = grad[None]
        dx = grad.reshape(self._in_shape)
        return dx[0] if self._single else dx

    def spec(self):
        return "flatten"


class Dense(Layer):
    """Affine map out = x @ w + b with w of shape (in_units, out_units)."""

    trainable = True

    def __init__(self, in_units: int, out_units: int, rng: np.random.Generator | None = None):
        if in_units < 1 or out_units < 1:
            raise ValueError("dense dimensions must be positive")
        self.in_units = in_units
        self.out_units = out_units
        rng = rng or np.random.default_rng(0)
        self.w = glorot_uniform((in_units, out_units), in_units, out_units, rng)
        self.b = np.zeros(out_units)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self.frozen = False
        self._single = False

    def param_count(self) -> int:
        return self.in_units * self.out_units + self.out_units

    def forward(self, x):
        self._single = x.ndim == 1
        if self._single:
            x = x[None]
        if x.ndim != 2 or x.shape[1] != self.in_units:
            raise ShapeMismatch(f"expected (batch, {self.in_units}), got {x.shape}")
        self._x = x
        out = x @ self.w + self.b
        return out[0] if self._single else out

    def backward(self, grad):
        if self._single:
            grad = grad[None]
        if grad.shape != (self._x.shape[0], self.out_units):
            raise ShapeMismatch(f"upstream gradient shape {grad.shape} mismatches forward output")
        self.gw += self._x.T @ grad
        self.gb += grad.sum(axis=0)
        dx = grad @ self.w.T
        return dx[0] if self._single else dx

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def spec(self):
        return f"dense:{self.in_units}:{self.out_units}"


class ReLU(Layer):
    def forward(self, x):
        self._x = x
        return np.maximum(x, 0.0)

    def backward(self, grad):
        if grad.shape != self._x.shape:
            raise ShapeMismatch(f"upstream gradient shape {grad.shape} mismatches forward output")
        return np.where(self._x > 0, grad, 0.0)

    def spec(self):
        return "relu"


class Softmax(Layer):
    def forward(self, x):
        self._out = softmax(x)
        return self._out

    def backward(self, grad):
        if grad.shape != self._out.shape:
            raise ShapeMismatch(f"upstream gradient shape {grad.shape} mismatches forward output")
        inner = (grad * self._out).sum(axis=-1, keepdims=True)
        return self._out * (grad - inner)

    def spec(self):
        return "softmax"


class Network:
    """A plain layer stack with explicit forward/backward passes."""

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def loss(self, x: np.ndarray, onehot: np.ndarray) -> float:
        return cross_entropy(self.forward(x), onehot)[0]

    def loss_and_backward(self, x: np.ndarray, onehot: np.ndarray) -> float:
        loss, grad = cross_entropy(self.forward(x), onehot)
        self.backward(grad)
        return loss

    def trainable_layers(self, include_frozen: bool = True) -> list[Layer]:
        return [
            l
            for l in self.layers
            if l.trainable and (include_frozen or not getattr(l, "frozen", False))
        ]

    def parameters(self, include_frozen: bool = True) -> list[np.ndarray]:
        return [p for l in self.trainable_layers(include_frozen) for p in l.params()]

    def gradients(self, include_frozen: bool = True) -> list[np.ndarray]:
        return [g for l in self.trainable_layers(include_frozen) for g in l.grads()]

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def param_count(self) -> int:
        return sum(l.param_count() for l in self.trainable_layers())

    def layer_param_counts(self) -> list[int]:
        return [l.param_count() for l in self.trainable_layers()]

    def describe(self) -> str:
        return "|".join(l.spec() for l in self.layers)

    def snapshot(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def restore(self, snapshot: list[np.ndarray]) -> None:
        for p, saved in zip(self.parameters(), snapshot, strict=True):
            np.copyto(p, saved)


def network_from_descriptor(descriptor: str) -> Network:
    """Rebuild a layer stack from its ``describe()`` string (weights unset)."""
    layers: list[Layer] = []
    for token in descriptor.split("|"):
        name, *args = token.split(":")
        if name == "conv1d":
            layers.append(Conv1D(int(args[0]), int(args[1]), int(args[2])))
        elif name == "dense":
            layers.append(Dense(int(args[0]), int(args[1])))
        elif name == "maxpool":
            layers.append(MaxPool1D())
        elif name == "flatten":
            layers.append(Flatten())
        elif name == "relu":
            layers.append(ReLU())
        elif name == "softmax":
            layers.append(Softmax())
        else:
            raise ValueError(f"unknown layer token {token!r}")
    return Network(layers)


class Adam:
    """Adaptive moment estimation over a fixed list of parameter arrays."""

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeMismatch("gradient list does not match parameter list")
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if p.shape != g.shape:
                raise ShapeMismatch(f"parameter {p.shape} vs gradient {g.shape}")
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient("gradient contains NaN or infinity")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1**self.t)
            v_hat = self.v[i] / (1 - self.beta2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def boundary_margin(network: Network, x: np.ndarray) -> float:
    """Distance of the forward pass from the nearest ReLU kink or pooling tie.

    Finite differences are untrustworthy within ~h of such a boundary; callers
    use this to apply the exclusion rule rather than chase phantom errors.
    Pool windows holding two exact zeros are ignored: both elements are stuck
    at a clamped ReLU output, so the tie cannot move under perturbation.
    """
    margin = np.inf
    for layer in network.layers:
        if isinstance(layer, ReLU):
            margin = min(margin, float(np.abs(x).min()))
        elif isinstance(layer, MaxPool1D):
            out_len = x.shape[-2] // 2
            windows = x[..., : 2 * out_len, :].reshape(*x.shape[:-2], out_len, 2, x.shape[-1])
            gaps = np.abs(windows[..., 0, :] - windows[..., 1, :])
            live = windows.max(axis=-2) > 0
            if live.any():
                margin = min(margin, float(gaps[live].min()))
        x = layer.forward(x)
    return margin


def jitter_parameters(network: Network, rng: np.random.Generator, scale: float = 0.3) -> None:
    """Add uniform noise to every parameter, biases included.

    Freshly built networks have zero biases, which parks ReLU pre-activations
    exactly on their kinks whenever an input path is fully clamped. Jittering
    moves the network to a generic point before a finite-difference check.
    """
    for p in network.parameters():
        p += rng.uniform(-scale, scale, size=p.shape)


def grad_check(
    network: Network,
    inputs: np.ndarray,
    labels: np.ndarray,
    h: float = 1e-5,
    block: int = 64,
) -> float:
    """Max relative error of analytic gradients vs central finite differences.

    Relative error per coordinate is |analytic - numeric| divided by
    max(|analytic| + |numeric|, 1e-8), maximized over every parameter of
    the network (frozen layers included).

    Numerical design: probes run in extended precision, because the float64
    noise floor of (hi - lo) / 2h sits near 1e-11 and swamps gradients of
    ~1e-7. A layer's output is linear in each of its own parameters, so a
    probe applies the exact rank-one update to the layer's precomputed base
    output instead of re-running it, and upstream activations are reused
    untouched. Probes are evaluated ``block`` coordinates at a time by
    stacking them along the batch axis of the tail network.
    """
    targets = one_hot(labels)
    network.zero_grads()
    network.loss_and_backward(inputs, targets)
    analytic = iter([g.copy() for g in network.gradients()])

    hp = np.longdouble
    targets_hp = targets.astype(hp)
    n = targets.shape[0]
    prefix = [np.asarray(inputs).astype(hp)]
    for layer in network.layers:
        prefix.append(layer.forward(prefix[-1]))

    worst = 0.0
    for start, layer in enumerate(network.layers):
        if not layer.trainable:
            continue
        x_in = prefix[start]
        tail = network.layers[start + 1 :]
        if isinstance(layer, Dense):
            base = x_in @ layer.w + layer.b
            windows = None
        else:
            kc = layer.kernel_size * layer.in_channels
            idx = layer._window_index(x_in.shape[1])
            windows = x_in[:, idx, :].reshape(n, -1, kc)
            base = windows @ layer.w.reshape(layer.filters, kc).T + layer.b

        def probe_losses(stacked: np.ndarray) -> np.ndarray:
            z = stacked.reshape(-1, *base.shape[1:])
            for l in tail:
                z = l.forward(z)
            clamped = np.maximum(z.reshape(len(stacked), n, -1), _PROB_FLOOR)
            return -(targets_hp[None] * np.log(clamped)).sum(axis=(1, 2)) / n

        for p, is_bias in ((layer.params()[0], False), (layer.params()[1], True)):
            flat_p = p.reshape(-1)
            flat_g = next(analytic).reshape(-1)
            for i0 in range(0, flat_p.size, block):
                cols = np.arange(i0, min(i0 + block, flat_p.size))
                orig = flat_p[cols]
                delta_up = (orig + np.float64(h)).astype(hp) - orig.astype(hp)
                delta_down = orig.astype(hp) - (orig - np.float64(h)).astype(hp)
                b_count = len(cols)
                rows = np.arange(2 * b_count)
                both = np.concatenate([cols, cols])
                deltas = np.concatenate([delta_up, -delta_down])
                stacked = np.repeat(base[None], 2 * b_count, axis=0)
                if isinstance(layer, Dense):
                    if is_bias:
                        stacked[rows, :, both] += deltas[:, None]
                    else:
                        j, k = both // layer.out_units, both % layer.out_units
                        stacked[rows, :, k] += deltas[:, None] * x_in[:, j].T
                else:
                    if is_bias:
                        stacked[rows, :, :, both] += deltas[:, None, None]
                    else:
                        f, m = both // kc, both % kc
                        stacked[rows, :, :, f] += (
                            deltas[:, None, None] * windows[:, :, m].transpose(2, 0, 1)
                        )
                losses = probe_losses(stacked)
                numeric = (
                    (losses[:b_count] - losses[b_count:]) / (delta_up + delta_down)
                ).astype(np.float64)
                ga = flat_g[cols]
                rel = np.abs(ga - numeric) / np.maximum(np.abs(ga) + np.abs(numeric), 1e-8)
                worst = max(worst, float(rel.max()))
    return worst
