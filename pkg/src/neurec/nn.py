"""Minimal dense feed-forward network machinery.

Everything here operates on plain numpy arrays in double precision:
parameter initialization, forward passes with a selectable activation,
inverted dropout on input vectors, exact reverse-mode gradients, and an
Adam optimizer over named parameter blocks.  No hidden state anywhere;
training code owns its parameter dict and Adam state explicitly.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .validation import check_choice, check_finite, check_fraction

__all__ = [
    "ACTIVATIONS",
    "AdamState",
    "ForwardTrace",
    "MlpGrads",
    "MlpParams",
    "activate",
    "activation_derivative",
    "adam_step",
    "apply_input_dropout",
    "backward",
    "forward",
    "init_params",
    "load_mlp",
    "save_mlp",
]


def _sigmoid(z):
    return expit(z)


def _sigmoid_deriv(z, h):
    return h * (1.0 - h)


def _tanh_deriv(z, h):
    return 1.0 - h * h


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_deriv(z, h):
    # derivative at exactly 0 is defined as 0
    return (z > 0.0).astype(np.float64)


def _identity(z):
    return z


def _identity_deriv(z, h):
    return np.ones_like(z)


# kind -> (f, f') where f' is evaluated from the pre-activation z and, where
# cheaper, the already-computed activation h = f(z).
ACTIVATIONS = {
    "sigmoid": (_sigmoid, _sigmoid_deriv),
    "tanh": (np.tanh, _tanh_deriv),
    "relu": (_relu, _relu_deriv),
    "identity": (_identity, _identity_deriv),
}


def activate(kind, x):
    """Apply the named activation elementwise (scalars or arrays)."""
    fn, _ = ACTIVATIONS[check_choice("activation", kind, ACTIVATIONS)]
    return fn(np.asarray(x, dtype=np.float64))


def activation_derivative(kind, z):
    """Elementwise derivative of the named activation at pre-activation z."""
    fn, deriv = ACTIVATIONS[check_choice("activation", kind, ACTIVATIONS)]
    z = np.asarray(z, dtype=np.float64)
    return deriv(z, fn(z))


@dataclass
class MlpParams:
    """Weights and biases of a fully-connected net.

    ``weights[j]`` has shape ``(layer_dims[j + 1], layer_dims[j])`` and
    ``biases[j]`` has shape ``(layer_dims[j + 1],)``; the same activation is
    applied after every layer, including the last.
    """

    layer_dims: list
    weights: list
    biases: list
    activation: str

    @property
    def num_layers(self):
        return len(self.weights)

    def validate(self):
        if len(self.layer_dims) < 2:
            raise ValueError("need at least an input and an output layer")
        check_choice("activation", self.activation, ACTIVATIONS)
        for j, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_dims[j + 1], self.layer_dims[j])
            if w.shape != expect:
                raise ValueError(f"weight {j} has shape {w.shape}, expected {expect}")
            if b.shape != (self.layer_dims[j + 1],):
                raise ValueError(f"bias {j} has shape {b.shape}, expected ({self.layer_dims[j + 1]},)")
            check_finite(f"weights[{j}]", w)
            check_finite(f"biases[{j}]", b)
        return self

    def copy(self):
        return MlpParams(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )

    def frobenius_sq(self):
        """Sum of squared weight entries (biases excluded)."""
        return float(sum(np.sum(w * w) for w in self.weights))

    def size(self):
        """Total parameter count, biases included."""
        return int(sum(w.size + b.size for w, b in zip(self.weights, self.biases)))


@dataclass
class ForwardTrace:
    """Intermediate values of one forward pass, kept for backprop.

    ``inputs`` is whatever was fed to the first layer (already dropped out
    when dropout is in play).  Arrays are 2-d ``(batch, dim)`` internally;
    ``output`` mirrors the rank of the original input.
    """

    inputs: np.ndarray
    pre_activations: list = field(default_factory=list)
    activations: list = field(default_factory=list)
    squeeze: bool = False

    @property
    def output(self):
        h = self.activations[-1]
        return h[0] if self.squeeze else h


@dataclass
class MlpGrads:
    """Parameter gradients with the same shapes as MlpParams, plus d/d(input)."""

    weights: list
    biases: list
    inputs: np.ndarray


def init_params(layer_dims, activation, seed):
    """Seeded fan-scaled uniform weights, zero biases.

    Weights are drawn uniformly from +-sqrt(6 / (fan_in + fan_out)), which
    keeps activations well-scaled for the sigmoid nets used here.
    """
    layer_dims = [int(d) for d in layer_dims]
    if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
        raise ValueError(f"layer_dims must hold >= 2 sizes, all >= 1, got {layer_dims}")
    check_choice("activation", activation, ACTIVATIONS)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(layer_dims, weights, biases, activation)


def apply_input_dropout(x, rate, rng):
    """Inverted dropout: zero each coordinate with probability ``rate``,
    scale survivors by 1/(1 - rate) so the expectation is unchanged.

    Training-time only; inference code never calls this.  ``rate`` 0 returns
    the input unchanged.
    """
    check_fraction("dropout rate", rate)
    x = np.asarray(x, dtype=np.float64)
    if rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    return np.where(keep, x / (1.0 - rate), 0.0)


def forward(params, x):
    """Run the layer recurrence h_j = f(W_j h_{j-1} + b_j) and keep a trace.

    ``x`` may be a single vector ``(d0,)`` or a batch ``(B, d0)``.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != params.layer_dims[0]:
        raise ValueError(
            f"input has shape {x.shape}, expected (*, {params.layer_dims[0]})"
        )
    fn, _ = ACTIVATIONS[params.activation]
    trace = ForwardTrace(inputs=h, squeeze=squeeze)
    for w, b in zip(params.weights, params.biases):
        z = h @ w.T + b
        h = fn(z)
        trace.pre_activations.append(z)
        trace.activations.append(h)
    return trace


def backward(params, trace, grad_output):
    """Exact gradients of ``sum(grad_output * h_L)`` w.r.t. every W_j, b_j
    and the input, by reverse-mode sweep over the stored trace.
    """
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.ndim == 1:
        grad_output = grad_output[None, :]
    h_last = trace.activations[-1]
    if grad_output.shape != h_last.shape:
        raise ValueError(
            f"grad_output has shape {grad_output.shape}, expected {h_last.shape}"
        )
    _, deriv = ACTIVATIONS[params.activation]
    num = params.num_layers
    grad_w = [None] * num
    grad_b = [None] * num
    delta = grad_output
    for j in range(num - 1, -1, -1):
        delta = delta * deriv(trace.pre_activations[j], trace.activations[j])
        below = trace.activations[j - 1] if j > 0 else trace.inputs
        grad_w[j] = delta.T @ below
        grad_b[j] = delta.sum(axis=0)
        delta = delta @ params.weights[j]
    grad_x = delta[0] if trace.squeeze else delta
    return MlpGrads(weights=grad_w, biases=grad_b, inputs=grad_x)


@dataclass
class AdamState:
    """Adam accumulators for a dict of named parameter arrays."""

    first_moment: dict
    second_moment: dict
    step_count: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            step_count=0,
            learning_rate=float(learning_rate),
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(state, params, grads):
    """One Adam update with bias correction, in place.

    ``params`` and ``grads`` are dicts of same-shaped arrays keyed by block
    name.  Raises on any non-finite gradient, naming the offending block.
    Returns ``(state, params)`` for call-site convenience.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in parameter block {name!r}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for name, g in grads.items():
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        params[name] -= state.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon)
    return state, params


def save_mlp(path, params):
    """Write a net to a self-describing .npz checkpoint (exact float64)."""
    arrays = {
        "layer_dims": np.asarray(params.layer_dims, dtype=np.int64),
        "activation": np.asarray(params.activation),
    }
    for j, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{j + 1}"] = w
        arrays[f"b{j + 1}"] = b
    np.savez(path, **arrays)


def load_mlp(path):
    """Read a checkpoint produced by save_mlp."""
    with np.load(path) as data:
        layer_dims = [int(d) for d in data["layer_dims"]]
        activation = str(data["activation"])
        weights = [data[f"W{j + 1}"] for j in range(len(layer_dims) - 1)]
        biases = [data[f"b{j + 1}"] for j in range(len(layer_dims) - 1)]
    return MlpParams(layer_dims, weights, biases, activation).validate()
