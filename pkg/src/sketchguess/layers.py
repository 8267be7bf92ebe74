"""Layer primitives with analytic forward and backward passes.

All math is float64 numpy. Layers hold their parameters as ParamTensor
objects and accumulate gradients into them on backward(). Per-call
activations live in a caller-supplied ctx dict, so eval-mode forward passes
over frozen parameters are safe for concurrent readers.

Sequence tensors are laid out batch x time x channels. Variable-length
batches carry a (batch x time) validity mask; masked positions are skipped
by recurrent state updates and excluded from batch-norm statistics.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class ParamTensor:
    """Named parameter array plus its gradient accumulator."""

    __slots__ = ("name", "values", "grad")

    def __init__(self, name: str, values: np.ndarray):
        self.name = name
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad[...] = 0.0


def xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # overflow-safe: sigmoid(x) = (tanh(x/2) + 1) / 2
    return 0.5 * np.tanh(0.5 * x) + 0.5


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable softmax; -inf entries map to probability exactly 0."""
    logits = np.asarray(logits, dtype=np.float64)
    m = np.max(logits, axis=axis, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise ValueError("softmax needs at least one finite logit")
    z = np.exp(logits - m)
    return z / z.sum(axis=axis, keepdims=True)


def cross_entropy(probabilities: np.ndarray, label: int) -> float:
    """-log p[label], with p clamped at 1e-12."""
    probabilities = np.asarray(probabilities)
    if not 0 <= label < probabilities.shape[-1]:
        raise ValueError(f"label {label} out of range for {probabilities.shape[-1]} classes")
    return float(-np.log(max(probabilities[label], 1e-12)))


def softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch of logits and its gradient w.r.t. logits."""
    b = logits.shape[0]
    probs = softmax(logits, axis=1)
    picked = np.clip(probs[np.arange(b), labels], 1e-12, None)
    loss = float(-np.log(picked).mean())
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    return loss, dlogits / b


class Conv1d:
    """Same-padded 1-D cross-correlation over the time axis, stride 1."""

    def __init__(self, name: str, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator):
        if kernel % 2 != 1:
            raise ValueError(f"kernel size must be odd for same padding, got {kernel}")
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        w = xavier_uniform(rng, (out_ch, in_ch, kernel), in_ch * kernel, out_ch * kernel)
        self.w = ParamTensor(f"{name}.w", w)
        self.b = ParamTensor(f"{name}.b", np.zeros(out_ch))

    def params(self) -> list[ParamTensor]:
        return [self.w, self.b]

    def _wmat(self) -> np.ndarray:
        # (kernel * in_ch, out_ch); row j*in_ch + c multiplies x[t - k//2 + j, c]
        return self.w.values.transpose(2, 1, 0).reshape(self.kernel * self.in_ch, self.out_ch)

    def forward(self, x: np.ndarray, ctx: dict | None = None) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.in_ch:
            raise ShapeError(f"conv expects (B, T, {self.in_ch}), got {x.shape}")
        b, t, _ = x.shape
        pad = self.kernel // 2
        xp = np.zeros((b, t + 2 * pad, self.in_ch))
        xp[:, pad : pad + t] = x
        windows = np.empty((b, t, self.kernel * self.in_ch))
        for j in range(self.kernel):
            windows[:, :, j * self.in_ch : (j + 1) * self.in_ch] = xp[:, j : j + t]
        y = windows @ self._wmat() + self.b.values
        if ctx is not None:
            ctx[id(self)] = (windows, x.shape)
        return y

    def backward(self, dy: np.ndarray, ctx: dict) -> np.ndarray:
        windows, x_shape = ctx[id(self)]
        b, t, _ = x_shape
        pad = self.kernel // 2
        flat_w = windows.reshape(-1, self.kernel * self.in_ch)
        flat_dy = dy.reshape(-1, self.out_ch)
        dwmat = flat_w.T @ flat_dy
        self.w.grad += dwmat.reshape(self.kernel, self.in_ch, self.out_ch).transpose(2, 1, 0)
        self.b.grad += flat_dy.sum(axis=0)
        dwindows = dy @ self._wmat().T
        dxp = np.zeros((b, t + 2 * pad, self.in_ch))
        for j in range(self.kernel):
            dxp[:, j : j + t] += dwindows[:, :, j * self.in_ch : (j + 1) * self.in_ch]
        return dxp[:, pad : pad + t]


class BatchNorm:
    """Per-channel normalization with statistics pooled over batch and time.

    Train mode uses (masked) batch statistics and updates the running moments
    by EMA: running = (1 - momentum) * running + momentum * batch.
    """

    def __init__(self, name: str, ch: int, momentum: float = 0.1, eps: float = 1e-5):
        self.ch = ch
        self.momentum = momentum
        self.eps = eps
        self.gamma = ParamTensor(f"{name}.gamma", np.ones(ch))
        self.beta = ParamTensor(f"{name}.beta", np.zeros(ch))
        self.running_mean = np.zeros(ch)
        self.running_var = np.ones(ch)

    def params(self) -> list[ParamTensor]:
        return [self.gamma, self.beta]

    def forward(
        self,
        x: np.ndarray,
        train: bool,
        mask: np.ndarray | None = None,
        ctx: dict | None = None,
    ) -> np.ndarray:
        if x.shape[-1] != self.ch:
            raise ShapeError(f"batchnorm expects {self.ch} channels, got {x.shape}")
        if train:
            if mask is None:
                mask = np.ones(x.shape[:2])
            m = mask[:, :, None].astype(np.float64)
            count = m.sum()
            if count < 2:
                raise ValueError("batch norm train mode needs at least 2 valid positions")
            mean = (x * m).sum(axis=(0, 1)) / count
            var = (((x - mean) ** 2) * m).sum(axis=(0, 1)) / count
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        if ctx is not None:
            ctx[id(self)] = (xhat, inv_std, mask if train else None, count if train else None, train)
        return self.gamma.values * xhat + self.beta.values

    def backward(self, dy: np.ndarray, ctx: dict) -> np.ndarray:
        xhat, inv_std, mask, count, train = ctx[id(self)]
        self.gamma.grad += (dy * xhat).sum(axis=(0, 1))
        self.beta.grad += dy.sum(axis=(0, 1))
        g = dy * self.gamma.values
        if not train:
            return g * inv_std
        # Mean/variance were computed over the masked positions only, so the
        # correction terms apply only there; upstream grads at padded slots
        # are already zero because the model masks activations.
        m = mask[:, :, None].astype(np.float64)
        mean_g = (g * m).sum(axis=(0, 1)) / count
        mean_gx = (g * xhat * m).sum(axis=(0, 1)) / count
        return inv_std * (g - m * (mean_g + xhat * mean_gx))


class Dropout:
    """Inverted dropout: surviving activations scale by 1/(1-rate) in train mode."""

    def __init__(self, rate: float):
        if not 0 <= rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def params(self) -> list[ParamTensor]:
        return []

    def forward(
        self,
        x: np.ndarray,
        train: bool,
        rng: np.random.Generator | None = None,
        ctx: dict | None = None,
    ) -> np.ndarray:
        if not train or self.rate == 0.0:
            if ctx is not None:
                ctx[id(self)] = None
            return x
        keep = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        if ctx is not None:
            ctx[id(self)] = keep
        return x * keep

    def backward(self, dy: np.ndarray, ctx: dict) -> np.ndarray:
        keep = ctx[id(self)]
        return dy if keep is None else dy * keep


class BiLstm:
    """Bi-directional LSTM layer; outputs per-step [forward_h, backward_h].

    Gate order in the packed weight matrices is input, forget, output, cell
    candidate (all sigmoid gates first, then the tanh candidate). Masked
    (padded) steps copy the previous state so padding never touches the
    recurrence.
    """

    def __init__(self, name: str, in_dim: int, hidden: int, rng: np.random.Generator):
        self.in_dim = in_dim
        self.hidden = hidden
        self.dirs = {}
        for d in ("fwd", "bwd"):
            w = np.concatenate(
                [xavier_uniform(rng, (in_dim, hidden), in_dim, hidden) for _ in range(4)], axis=1
            )
            u = np.concatenate(
                [xavier_uniform(rng, (hidden, hidden), hidden, hidden) for _ in range(4)], axis=1
            )
            b = np.zeros(4 * hidden)
            b[hidden : 2 * hidden] = 1.0  # forget-gate bias
            self.dirs[d] = (
                ParamTensor(f"{name}.{d}.W", w),
                ParamTensor(f"{name}.{d}.U", u),
                ParamTensor(f"{name}.{d}.b", b),
            )

    def params(self) -> list[ParamTensor]:
        return [p for d in ("fwd", "bwd") for p in self.dirs[d]]

    def _run(self, x: np.ndarray, mask: np.ndarray, W, U, b):
        bsz, t, _ = x.shape
        h = self.hidden
        xw = x @ W.values + b.values
        gates = np.empty((bsz, t, 4 * h))
        cells = np.empty((bsz, t, h))  # pre-mask candidate cell state
        tanh_c = np.empty((bsz, t, h))
        h_prevs = np.empty((bsz, t, h))
        c_prevs = np.empty((bsz, t, h))
        hs = np.empty((bsz, t, h))
        h_prev = np.zeros((bsz, h))
        c_prev = np.zeros((bsz, h))
        abuf = np.empty((bsz, 4 * h))
        fully_valid = bool(mask.all())
        for step in range(t):
            np.matmul(h_prev, U.values, out=abuf)
            abuf += xw[:, step]
            gs = gates[:, step]
            # sigmoid gates i, f, o in one shot; tanh candidate separately
            np.multiply(abuf[:, : 3 * h], 0.5, out=gs[:, : 3 * h])
            np.tanh(gs[:, : 3 * h], out=gs[:, : 3 * h])
            gs[:, : 3 * h] *= 0.5
            gs[:, : 3 * h] += 0.5
            np.tanh(abuf[:, 3 * h :], out=gs[:, 3 * h :])
            i = gs[:, :h]
            f = gs[:, h : 2 * h]
            o = gs[:, 2 * h : 3 * h]
            g = gs[:, 3 * h :]
            c = cells[:, step]
            np.multiply(f, c_prev, out=c)
            c += i * g
            tc = tanh_c[:, step]
            np.tanh(c, out=tc)
            h_prevs[:, step] = h_prev
            c_prevs[:, step] = c_prev
            if fully_valid:
                h_prev = o * tc
                c_prev = c
            else:
                m = mask[:, step : step + 1]
                h_prev = m * (o * tc) + (1 - m) * h_prev
                c_prev = m * c + (1 - m) * c_prev
            hs[:, step] = h_prev
        return hs, (x, mask, gates, cells, tanh_c, h_prevs, c_prevs)

    def _run_backward(self, dhs: np.ndarray, cache, W, U, b) -> np.ndarray:
        x, mask, gates, cells, tanh_c, h_prevs, c_prevs = cache
        bsz, t, _ = x.shape
        h = self.hidden
        dx = np.empty_like(x)
        dh = np.zeros((bsz, h))
        dc = np.zeros((bsz, h))
        dW = np.zeros_like(W.values)
        dU = np.zeros_like(U.values)
        db = np.zeros_like(b.values)
        da = np.empty((bsz, 4 * h))
        fully_valid = bool(mask.all())
        for step in reversed(range(t)):
            dh_total = dh + dhs[:, step]
            if fully_valid:
                dhh = dh_total
                dc_in = dc
                dh_carry = dc_carry = 0.0
            else:
                m = mask[:, step : step + 1]
                dhh = dh_total * m
                dh_carry = dh_total * (1 - m)
                dc_in = dc * m
                dc_carry = dc * (1 - m)
            gs = gates[:, step]
            i = gs[:, :h]
            f = gs[:, h : 2 * h]
            o = gs[:, 2 * h : 3 * h]
            g = gs[:, 3 * h :]
            tc = tanh_c[:, step]
            do = dhh * tc
            dct = dc_in + dhh * o * (1 - tc * tc)
            np.multiply(dct * g, i * (1 - i), out=da[:, :h])
            np.multiply(dct * c_prevs[:, step], f * (1 - f), out=da[:, h : 2 * h])
            np.multiply(do, o * (1 - o), out=da[:, 2 * h : 3 * h])
            np.multiply(dct * i, 1 - g * g, out=da[:, 3 * h :])
            dW += x[:, step].T @ da
            dU += h_prevs[:, step].T @ da
            db += da.sum(axis=0)
            dx[:, step] = da @ W.values.T
            dh = da @ U.values.T + dh_carry
            dc = dct * f + dc_carry
        W.grad += dW
        U.grad += dU
        b.grad += db
        return dx

    def forward(self, x: np.ndarray, mask: np.ndarray | None = None, ctx: dict | None = None):
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"bilstm expects (B, T, {self.in_dim}), got {x.shape}")
        if mask is None:
            mask = np.ones(x.shape[:2])
        mask = mask.astype(np.float64)
        h_f, cache_f = self._run(x, mask, *self.dirs["fwd"])
        h_b_rev, cache_b = self._run(x[:, ::-1], mask[:, ::-1], *self.dirs["bwd"])
        if ctx is not None:
            ctx[id(self)] = (cache_f, cache_b)
        return np.concatenate([h_f, h_b_rev[:, ::-1]], axis=2)

    def backward(self, dy: np.ndarray, ctx: dict) -> np.ndarray:
        cache_f, cache_b = ctx[id(self)]
        h = self.hidden
        dx_f = self._run_backward(dy[:, :, :h], cache_f, *self.dirs["fwd"])
        dx_b = self._run_backward(dy[:, ::-1, h:], cache_b, *self.dirs["bwd"])
        return dx_f + dx_b[:, ::-1]


class Dense:
    """Fully connected layer mapping feature vectors to class logits."""

    def __init__(self, name: str, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.in_dim = in_dim
        self.out_dim = out_dim
        w = xavier_uniform(rng, (in_dim, out_dim), in_dim, out_dim)
        self.w = ParamTensor(f"{name}.w", w)
        self.b = ParamTensor(f"{name}.b", np.zeros(out_dim))

    def params(self) -> list[ParamTensor]:
        return [self.w, self.b]

    def forward(self, x: np.ndarray, ctx: dict | None = None) -> np.ndarray:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"dense expects input width {self.in_dim}, got {x.shape}")
        if ctx is not None:
            ctx[id(self)] = x
        return x @ self.w.values + self.b.values

    def backward(self, dy: np.ndarray, ctx: dict) -> np.ndarray:
        x = ctx[id(self)]
        self.w.grad += x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.values.T
