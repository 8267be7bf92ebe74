"""Network assembly, state cloning, and checkpoint serialization.

The classifier maps a batch of encoded stroke sequences (B x T x 3 plus a
validity mask) to class logits: a stack of same-padded 1-D convolutions
(each followed by dropout and batch norm), then bi-directional LSTM layers
(each followed by dropout), then a dense layer over a per-sequence summary
vector. The summary concatenates the last valid forward-direction state
with the first valid backward-direction state.
"""

from __future__ import annotations

import copy
import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .layers import BatchNorm, BiLstm, Conv1d, Dense, Dropout, ParamTensor, ShapeError

CHECKPOINT_MAGIC = b"INKM"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    pass


class ChecksumError(CheckpointError):
    pass


class VersionError(CheckpointError):
    pass


@dataclass
class ArchitectureSpec:
    conv_channels: list[int] = field(default_factory=lambda: [48, 64, 96])
    conv_kernels: list[int] = field(default_factory=lambda: [5, 5, 3])
    lstm_layers: int = 3
    hidden_size: int = 256
    dropout_rate: float = 0.3
    class_count: int = 345
    input_channels: int = 3

    def validate(self) -> None:
        if len(self.conv_channels) != len(self.conv_kernels):
            raise ValueError("conv_channels and conv_kernels must have the same length")
        if not self.conv_channels:
            raise ValueError("need at least one convolutional layer")
        if any(c <= 0 for c in self.conv_channels) or any(k <= 0 for k in self.conv_kernels):
            raise ValueError("conv sizes must be positive")
        if self.lstm_layers < 1 or self.hidden_size < 1:
            raise ValueError("recurrent stack must be non-empty")
        if self.class_count < 2:
            raise ValueError("need at least 2 classes")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout rate must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "conv_channels": list(self.conv_channels),
            "conv_kernels": list(self.conv_kernels),
            "lstm_layers": self.lstm_layers,
            "hidden_size": self.hidden_size,
            "dropout_rate": self.dropout_rate,
            "class_count": self.class_count,
            "input_channels": self.input_channels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        spec = cls(**d)
        spec.validate()
        return spec


class SketchModel:
    """Parameter state plus forward/backward over the full architecture."""

    def __init__(self, spec: ArchitectureSpec, seed: int):
        spec.validate()
        self.spec = spec
        self.init_seed = seed
        self.metadata: dict = {}
        rng = np.random.default_rng(seed)
        self.conv_blocks = []
        in_ch = spec.input_channels
        for i, (ch, k) in enumerate(zip(spec.conv_channels, spec.conv_kernels)):
            conv = Conv1d(f"conv{i}", in_ch, ch, k, rng)
            drop = Dropout(spec.dropout_rate)
            bn = BatchNorm(f"conv{i}.bn", ch)
            self.conv_blocks.append((conv, drop, bn))
            in_ch = ch
        self.lstm_blocks = []
        for i in range(spec.lstm_layers):
            lstm = BiLstm(f"lstm{i}", in_ch, spec.hidden_size, rng)
            drop = Dropout(spec.dropout_rate)
            self.lstm_blocks.append((lstm, drop))
            in_ch = 2 * spec.hidden_size
        self.dense = Dense("dense", in_ch, spec.class_count, rng)

    # ------------------------------------------------------------ state

    def params(self) -> list[ParamTensor]:
        out = []
        for conv, _, bn in self.conv_blocks:
            out.extend(conv.params())
            out.extend(bn.params())
        for lstm, _ in self.lstm_blocks:
            out.extend(lstm.params())
        out.extend(self.dense.params())
        return out

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        """Every array that defines the model: parameters and BN running stats."""
        out = [(p.name, p.values) for p in self.params()]
        for _, _, bn in self.conv_blocks:
            base = bn.gamma.name.rsplit(".", 1)[0]
            out.append((f"{base}.running_mean", bn.running_mean))
            out.append((f"{base}.running_var", bn.running_var))
        return out

    def zero_grads(self) -> None:
        for p in self.params():
            p.zero_grad()

    def clone(self) -> "SketchModel":
        """Deep copy; mutating the clone never touches the source."""
        return copy.deepcopy(self)

    def param_count(self) -> int:
        return sum(p.values.size for p in self.params())

    # ------------------------------------------------------------ compute

    def _summary_indices(self, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        valid = mask > 0
        if not np.all(valid.any(axis=1)):
            raise ValueError("batch contains an all-padding row")
        t = mask.shape[1]
        first = valid.argmax(axis=1)
        last = t - 1 - valid[:, ::-1].argmax(axis=1)
        return first, last

    def forward(
        self,
        x: np.ndarray,
        mask: np.ndarray | None = None,
        train: bool = False,
        rng: np.random.Generator | None = None,
        ctx: dict | None = None,
    ) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.spec.input_channels:
            raise ShapeError(f"expected (B, T, {self.spec.input_channels}), got {x.shape}")
        b, t, _ = x.shape
        if mask is None:
            mask = np.ones((b, t))
        mask = np.asarray(mask, dtype=np.float64)
        first, last = self._summary_indices(mask)
        m3 = mask[:, :, None]
        h = x
        for conv, drop, bn in self.conv_blocks:
            h = conv.forward(h, ctx=ctx)
            h = drop.forward(h, train=train, rng=rng, ctx=ctx)
            h = bn.forward(h, train=train, mask=mask, ctx=ctx)
            h = h * m3
        for lstm, drop in self.lstm_blocks:
            h = lstm.forward(h, mask=mask, ctx=ctx)
            h = drop.forward(h, train=train, rng=rng, ctx=ctx)
        hid = self.spec.hidden_size
        rows = np.arange(b)
        summary = np.concatenate([h[rows, last, :hid], h[rows, first, hid:]], axis=1)
        if ctx is not None:
            ctx["model"] = (mask, first, last, h.shape)
        return self.dense.forward(summary, ctx=ctx)

    def backward(self, dlogits: np.ndarray, ctx: dict) -> np.ndarray:
        mask, first, last, seq_shape = ctx["model"]
        dsummary = self.dense.backward(dlogits, ctx)
        hid = self.spec.hidden_size
        b = dsummary.shape[0]
        rows = np.arange(b)
        dh = np.zeros(seq_shape)
        dh[rows, last, :hid] = dsummary[:, :hid]
        dh[rows, first, hid:] = dsummary[:, hid:]
        for lstm, drop in reversed(self.lstm_blocks):
            dh = drop.backward(dh, ctx)
            dh = lstm.backward(dh, ctx)
        m3 = mask[:, :, None]
        for conv, drop, bn in reversed(self.conv_blocks):
            dh = dh * m3
            dh = bn.backward(dh, ctx)
            dh = drop.backward(dh, ctx)
            dh = conv.backward(dh, ctx)
        return dh


def build(spec: ArchitectureSpec, seed: int) -> SketchModel:
    """Construct a model with Xavier-uniform weights, deterministic per seed."""
    return SketchModel(spec, seed)


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(model: SketchModel, path) -> None:
    payload = bytearray()
    header = json.dumps(
        {"spec": model.spec.to_dict(), "init_seed": model.init_seed, "metadata": model.metadata},
        sort_keys=True,
    ).encode("utf-8")
    payload += struct.pack("<I", len(header))
    payload += header
    for name, arr in model.named_tensors():
        nb = name.encode("utf-8")
        payload += struct.pack("<H", len(nb))
        payload += nb
        payload += struct.pack("<BB", 0, arr.ndim)  # dtype tag 0 = float64
        payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.astype("<f8").tobytes()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<HI", CHECKPOINT_VERSION, zlib.crc32(payload)))
        f.write(payload)


def load_checkpoint(path, expect_class_count: int | None = None) -> SketchModel:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    version, crc = struct.unpack_from("<HI", data, 4)
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    payload = data[10:]
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{path}: checksum mismatch (truncated or corrupt file)")
    (hlen,) = struct.unpack_from("<I", payload, 0)
    header = json.loads(payload[4 : 4 + hlen].decode("utf-8"))
    spec = ArchitectureSpec.from_dict(header["spec"])
    if expect_class_count is not None and spec.class_count != expect_class_count:
        raise CheckpointError(
            f"{path}: checkpoint has {spec.class_count} classes, expected {expect_class_count}"
        )
    model = SketchModel(spec, header["init_seed"])
    model.metadata = header.get("metadata", {})
    tensors = dict(model.named_tensors())
    pos = 4 + hlen
    seen = set()
    while pos < len(payload):
        (nlen,) = struct.unpack_from("<H", payload, pos)
        pos += 2
        name = payload[pos : pos + nlen].decode("utf-8")
        pos += nlen
        dtype, rank = struct.unpack_from("<BB", payload, pos)
        pos += 2
        dims = struct.unpack_from(f"<{rank}I", payload, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(payload, dtype="<f8", count=count, offset=pos).reshape(dims)
        pos += 8 * count
        if dtype != 0:
            raise CheckpointError(f"{path}: unknown dtype tag {dtype} for {name}")
        if name not in tensors:
            raise CheckpointError(f"{path}: unexpected tensor {name}")
        if tensors[name].shape != values.shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {values.shape}, expected {tensors[name].shape}"
            )
        tensors[name][...] = values
        seen.add(name)
    missing = set(tensors) - seen
    if missing:
        raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
    return model
