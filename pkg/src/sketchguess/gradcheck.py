"""Finite-difference verification of analytic gradients.

The checker takes a scalar loss closure over a set of ParamTensors plus an
input array, compares every analytic gradient entry against a central
finite difference, and reports the worst relative errors. Run it in double
precision with dropout disabled; batch norm must be in eval mode or see a
fixed batch so that the loss is a smooth function of each perturbed entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import ParamTensor

# Relative error floor: central differences carry ~1e-11 absolute noise, so
# entries whose true gradient is far below the floor are compared absolutely.
REL_FLOOR = 1e-6


@dataclass
class GradCheckOffender:
    tensor: str
    index: tuple
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    entries_checked: int
    offenders: list[GradCheckOffender] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def summary(self) -> str:
        status = "OK" if self.passed else "FAIL"
        lines = [
            f"{status}: max relative error {self.max_rel_error:.3e} over "
            f"{self.entries_checked} entries (tolerance {self.tolerance:.0e})"
        ]
        for off in self.offenders:
            lines.append(
                f"  {off.tensor}{list(off.index)}: analytic={off.analytic:+.6e} "
                f"numeric={off.numeric:+.6e} rel={off.rel_error:.3e}"
            )
        return "\n".join(lines)


def _rel_error(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), REL_FLOOR)


def grad_check(
    loss_fn,
    params: list[ParamTensor],
    x: np.ndarray,
    tolerance: float = 1e-4,
    step: float = 1e-5,
    analytic_dx: np.ndarray | None = None,
    max_offenders: int = 5,
) -> GradCheckReport:
    """Compare param (and optionally input) gradients against central differences.

    `loss_fn(x)` must be a deterministic scalar function of the current
    parameter values and `x`. Call it once through the analytic backward path
    beforehand so that every ParamTensor.grad is populated; pass the analytic
    input gradient as `analytic_dx` to have input entries checked too.
    """
    offenders: list[GradCheckOffender] = []
    max_rel = 0.0
    checked = 0

    def check_entry(name: str, idx: tuple, analytic: float, values: np.ndarray):
        nonlocal max_rel, checked
        orig = values[idx]
        values[idx] = orig + step
        up = loss_fn(x)
        values[idx] = orig - step
        down = loss_fn(x)
        values[idx] = orig
        numeric = (up - down) / (2 * step)
        rel = _rel_error(analytic, numeric)
        checked += 1
        max_rel = max(max_rel, rel)
        offenders.append(GradCheckOffender(name, idx, analytic, numeric, rel))

    for p in params:
        for idx in np.ndindex(p.values.shape):
            check_entry(p.name, idx, float(p.grad[idx]), p.values)
    if analytic_dx is not None:
        for idx in np.ndindex(x.shape):
            check_entry("input", idx, float(analytic_dx[idx]), x)

    offenders.sort(key=lambda o: -o.rel_error)
    return GradCheckReport(
        max_rel_error=max_rel,
        tolerance=tolerance,
        entries_checked=checked,
        offenders=offenders[:max_offenders],
    )


def _check_projection(layer, x, forward, tolerance, seed) -> GradCheckReport:
    """Check a layer's gradients through a fixed random linear functional."""
    rng = np.random.default_rng(seed)
    proj = rng.normal(size=forward(x).shape)

    def loss(inp):
        return float((forward(inp) * proj).sum())

    ctx = {}
    forward(x, ctx=ctx)
    for p in layer.params():
        p.zero_grad()
    dx = layer.backward(proj, ctx)
    return grad_check(loss, layer.params(), x, tolerance=tolerance, analytic_dx=dx)


def run_full_suite(seed: int = 0) -> list[tuple[str, GradCheckReport]]:
    """Gradient-check every layer type plus the composite micro-network.

    The micro-network is two convolutions, one bi-directional LSTM and the
    dense head, run on a T=7 batch with 4 classes; batch norm uses eval mode
    (fixed running statistics) and dropout is disabled, so the loss is smooth.
    """
    from functools import partial

    from .layers import BatchNorm, BiLstm, Conv1d, Dense, softmax_xent
    from .model import ArchitectureSpec, build

    rng = np.random.default_rng(seed)
    results = []

    dense = Dense("dense", 5, 3, rng)
    results.append(
        ("dense", _check_projection(dense, rng.normal(size=(3, 5)), dense.forward, 1e-6, seed))
    )

    conv = Conv1d("conv", 2, 3, 3, rng)
    results.append(
        ("conv1d", _check_projection(conv, rng.normal(size=(2, 8, 2)), conv.forward, 1e-6, seed))
    )

    bn = BatchNorm("bn", 3)
    bn.gamma.values[:] = rng.uniform(0.5, 1.5, 3)
    bn.beta.values[:] = rng.normal(size=3)
    results.append(
        (
            "batchnorm-train",
            _check_projection(
                bn, rng.normal(size=(2, 5, 3)), partial(bn.forward, train=True), 1e-4, seed
            ),
        )
    )
    bn_eval = BatchNorm("bn", 3)
    bn_eval.running_mean = rng.normal(size=3)
    bn_eval.running_var = rng.uniform(0.5, 2.0, 3)
    results.append(
        (
            "batchnorm-eval",
            _check_projection(
                bn_eval, rng.normal(size=(2, 5, 3)), partial(bn_eval.forward, train=False), 1e-6, seed
            ),
        )
    )

    lstm = BiLstm("lstm", 2, 3, rng)
    results.append(
        ("bilstm", _check_projection(lstm, rng.normal(size=(2, 5, 2)), lstm.forward, 1e-4, seed))
    )

    spec = ArchitectureSpec(
        conv_channels=[4, 4],
        conv_kernels=[3, 3],
        lstm_layers=1,
        hidden_size=5,
        dropout_rate=0.0,
        class_count=4,
    )
    micro = build(spec, seed=seed)
    for _, _, layer_bn in micro.conv_blocks:
        layer_bn.running_mean = rng.normal(scale=0.1, size=layer_bn.ch)
        layer_bn.running_var = rng.uniform(0.5, 1.5, layer_bn.ch)
    x = rng.uniform(0, 1, size=(2, 7, 3))
    labels = rng.integers(0, 4, size=2)

    def micro_loss(inp):
        return softmax_xent(micro.forward(inp, train=False), labels)[0]

    ctx = {}
    logits = micro.forward(x, train=False, ctx=ctx)
    _, dlogits = softmax_xent(logits, labels)
    micro.zero_grads()
    dx = micro.backward(dlogits, ctx)
    results.append(
        ("composite", grad_check(micro_loss, micro.params(), x, tolerance=1e-4, analytic_dx=dx))
    )
    return results
