"""Minimal dense networks with explicit forward/backward passes.

One ``MlpNet`` is a chain of affine layers with per-layer activations
(identity, rectifier, or sigmoid-like).  The same substrate backs the
per-agent value networks, the monotone mixer's hypernetworks, the pattern
generator, and the Wasserstein critic, so reverse-mode gradients are exact
by construction and checked against finite differences.

For the critic's gradient penalty the loss depends on an input gradient,
which needs the mixed second derivative d/dtheta (v . dx f).  That is
computed by differentiating the forward-mode directional-derivative pass
in reverse (``mixed_second_grads``); a finite-difference-on-parameters
fallback exists for tiny networks.

Parameters persist in a little-endian binary layout: magic ``MLP1``, a
shape/activation table, then float64 weight and bias blocks per layer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MlpNet",
    "GradientTape",
    "LayerGrads",
    "UpdateRejectedError",
    "forward",
    "backward",
    "input_gradient",
    "mixed_second_grads",
    "finite_difference_param_grads",
    "sgd_update",
    "zero_grads",
    "add_grads",
    "scale_grads",
    "save_net",
    "load_net",
]

_ACT_CODES = {"linear": 0, "relu": 1, "sigmoid": 2, "tanh": 3}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def _act_prime(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "linear":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    raise ValueError(f"unknown activation {name!r}")


def _act_second(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name in ("linear", "relu"):
        return np.zeros_like(z)
    if name == "sigmoid":
        return a * (1.0 - a) * (1.0 - 2.0 * a)
    if name == "tanh":
        return -2.0 * a * (1.0 - a * a)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class MlpNet:
    """Affine-then-activation chain; weights[i] has shape (out_i, in_i)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self) -> None:
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases, and activations must align")
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in _ACT_CODES:
                raise ValueError(f"unknown activation {act!r}")
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[1]} breaks the chain")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite parameters")

    @classmethod
    def create(
        cls,
        widths: list[int],
        activations: list[str] | None = None,
        rng: np.random.Generator | None = None,
    ) -> "MlpNet":
        """Uniform fan-in initialization: W ~ U(+-1/sqrt(fan_in))."""
        if rng is None:
            rng = np.random.default_rng(0)
        if activations is None:
            activations = ["tanh"] * (len(widths) - 2) + ["linear"]
        ws, bs = [], []
        for d_in, d_out in zip(widths, widths[1:]):
            bound = 1.0 / np.sqrt(d_in)
            ws.append(rng.uniform(-bound, bound, size=(d_out, d_in)))
            bs.append(rng.uniform(-bound, bound, size=d_out))
        return cls(ws, bs, list(activations))

    @property
    def in_width(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_width(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpNet":
        return MlpNet(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
        )

    def params_equal(self, other: "MlpNet") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights)) and all(
            np.array_equal(a, b) for a, b in zip(self.biases, other.biases)
        )

    def checksum(self) -> int:
        import zlib

        crc = 0
        for w, b in zip(self.weights, self.biases):
            crc = zlib.crc32(w.tobytes(), crc)
            crc = zlib.crc32(b.tobytes(), crc)
        return crc


@dataclass
class GradientTape:
    """Cached layer inputs/outputs from one forward pass."""

    net_id: int
    inputs: list[np.ndarray]       # a_{i-1} per layer, batched
    pre_acts: list[np.ndarray]     # z_i per layer
    outputs: list[np.ndarray]      # a_i per layer
    squeeze: bool                  # input was 1-D


LayerGrads = list[tuple[np.ndarray, np.ndarray]]  # (dW, db) per layer


def forward(net: MlpNet, x: np.ndarray) -> tuple[np.ndarray, GradientTape]:
    """Batched forward pass; accepts (d,) or (batch, d) inputs."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    a = x[None, :] if squeeze else x
    if a.ndim != 2 or a.shape[1] != net.in_width:
        raise ValueError(f"input shape {x.shape} incompatible with width {net.in_width}")
    inputs, pre, outs = [], [], []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        inputs.append(a)
        z = a @ w.T + b
        a = _act(act, z)
        pre.append(z)
        outs.append(a)
    tape = GradientTape(id(net), inputs, pre, outs, squeeze)
    return (a[0] if squeeze else a), tape


def backward(net: MlpNet, tape: GradientTape, dy: np.ndarray) -> tuple[LayerGrads, np.ndarray]:
    """Exact reverse-mode gradients for a matching forward tape.

    ``dy`` is the loss gradient at the output; returns per-layer parameter
    gradients (summed over the batch) and the input gradient.
    """
    if tape.net_id != id(net):
        raise ValueError("tape does not belong to this network")
    dy = np.asarray(dy, dtype=float)
    da = dy[None, :] if tape.squeeze else dy
    if da.shape != tape.outputs[-1].shape:
        raise ValueError(f"output gradient shape {dy.shape} != {tape.outputs[-1].shape}")
    grads: LayerGrads = [None] * len(net.weights)  # type: ignore[list-item]
    for i in range(len(net.weights) - 1, -1, -1):
        dz = da * _act_prime(net.activations[i], tape.pre_acts[i], tape.outputs[i])
        grads[i] = (dz.T @ tape.inputs[i], dz.sum(axis=0))
        da = dz @ net.weights[i]
    return grads, (da[0] if tape.squeeze else da)


def input_gradient(net: MlpNet, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value and input gradient of a scalar-output network, batched."""
    if net.out_width != 1:
        raise ValueError("input_gradient requires a scalar-output network")
    y, tape = forward(net, x)
    ones = np.ones_like(tape.outputs[-1])
    _, gx = backward(net, tape, ones[0] if tape.squeeze else ones)
    return y, gx


def mixed_second_grads(
    net: MlpNet, x: np.ndarray, v: np.ndarray, coeff: np.ndarray
) -> LayerGrads:
    """Parameter gradient of sum_b coeff_b * (v_b . grad_x f(x_b)).

    The directional derivative phi_b = v_b . grad_x f(x_b) is evaluated by a
    forward-mode tangent pass, and that augmented computation is then
    differentiated in reverse with respect to the parameters.  ``v`` is
    treated as a constant.  Scalar-output networks only.
    """
    if net.out_width != 1:
        raise ValueError("mixed_second_grads requires a scalar-output network")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    coeff = np.asarray(coeff, dtype=float).reshape(-1, 1)
    if x.shape != v.shape or coeff.shape[0] != x.shape[0]:
        raise ValueError("x, v, and coeff batch shapes must align")

    a, adot = x, v
    inputs, in_dots, pres, outs = [], [], [], []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        inputs.append(a)
        in_dots.append(adot)
        z = a @ w.T + b
        zdot = adot @ w.T
        a_new = _act(act, z)
        s = _act_prime(act, z, a_new)
        pres.append((z, zdot))
        outs.append(a_new)
        a, adot = a_new, s * zdot

    # phi = adot at the output; reverse pass through the augmented graph.
    abar = np.zeros_like(a)
    adotbar = np.broadcast_to(coeff, adot.shape).copy()
    grads: LayerGrads = [None] * len(net.weights)  # type: ignore[list-item]
    for i in range(len(net.weights) - 1, -1, -1):
        act = net.activations[i]
        z, zdot = pres[i]
        a_i = outs[i]
        s = _act_prime(act, z, a_i)
        s2 = _act_second(act, z, a_i)
        zbar = s * abar + s2 * zdot * adotbar
        zdotbar = s * adotbar
        dw = zbar.T @ inputs[i] + zdotbar.T @ in_dots[i]
        db = zbar.sum(axis=0)
        grads[i] = (dw, db)
        abar = zbar @ net.weights[i]
        adotbar = zdotbar @ net.weights[i]
    return grads


def finite_difference_param_grads(
    net: MlpNet, loss_fn, step: float = 1e-5, max_params: int = 2048
) -> LayerGrads:
    """Central-difference parameter gradients of ``loss_fn(net)``.

    Fallback for small networks when an analytic path is unavailable;
    refuses to grind through more than ``max_params`` parameters.
    """
    if net.n_params > max_params:
        raise ValueError(f"{net.n_params} parameters exceed the finite-difference cap {max_params}")
    grads: LayerGrads = []
    for arr_pair in zip(net.weights, net.biases):
        pair = []
        for arr in arr_pair:
            g = np.zeros_like(arr)
            flat = arr.reshape(-1)
            gflat = g.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                hi = loss_fn(net)
                flat[j] = orig - step
                lo = loss_fn(net)
                flat[j] = orig
                gflat[j] = (hi - lo) / (2.0 * step)
            pair.append(g)
        grads.append((pair[0], pair[1]))
    return grads


class UpdateRejectedError(RuntimeError):
    """A parameter update carried non-finite gradients."""


def zero_grads(net: MlpNet) -> LayerGrads:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)]


def add_grads(total: LayerGrads, extra: LayerGrads, scale: float = 1.0) -> LayerGrads:
    return [
        (tw + scale * ew, tb + scale * eb) for (tw, tb), (ew, eb) in zip(total, extra)
    ]


def scale_grads(grads: LayerGrads, scale: float) -> LayerGrads:
    return [(w * scale, b * scale) for w, b in grads]


def sgd_update(net: MlpNet, grads: LayerGrads, learning_rate: float) -> MlpNet:
    """In-place descent step; rejects non-finite gradients outright."""
    for i, (dw, db) in enumerate(grads):
        if not (np.isfinite(dw).all() and np.isfinite(db).all()):
            raise UpdateRejectedError(
                f"layer {i}: non-finite gradient (|dw|max={np.abs(dw).max() if dw.size else 0})"
            )
    for (w, b), (dw, db) in zip(zip(net.weights, net.biases), grads):
        w -= learning_rate * dw
        b -= learning_rate * db
    return net


_MAGIC = b"MLP1"


def save_net(net: MlpNet, path: str | Path) -> None:
    """Binary layout: magic, layer count, per-layer (in, out, act) table,
    then per-layer weight and bias blocks as little-endian float64."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(net.weights)))
        for w, act in zip(net.weights, net.activations):
            fh.write(struct.pack("<IIB", w.shape[1], w.shape[0], _ACT_CODES[act]))
        for w, b in zip(net.weights, net.biases):
            fh.write(w.astype("<f8").tobytes())
            fh.write(b.astype("<f8").tobytes())


def load_net(path: str | Path) -> MlpNet:
    with Path(path).open("rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a parameter file")
        (n_layers,) = struct.unpack("<I", fh.read(4))
        shapes, acts = [], []
        for _ in range(n_layers):
            d_in, d_out, code = struct.unpack("<IIB", fh.read(9))
            shapes.append((d_out, d_in))
            acts.append(_ACT_NAMES[code])
        ws, bs = [], []
        for d_out, d_in in shapes:
            ws.append(np.frombuffer(fh.read(8 * d_out * d_in), dtype="<f8").reshape(d_out, d_in).copy())
            bs.append(np.frombuffer(fh.read(8 * d_out), dtype="<f8").copy())
    return MlpNet(ws, bs, acts)
