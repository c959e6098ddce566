"""Fully connected networks with one shared trainable activation per layer."""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np

from .activations import (
    BASELINES,
    OpauParams,
    PauParams,
    activation_backward,
    activation_map,
    baseline_deriv,
    baseline_forward,
    pau_backward,
    pau_map,
)
from .bases import PolyBasis

__all__ = [
    "ACTIVATIONS",
    "DenseLayer",
    "Network",
    "ForwardCache",
    "StaleCacheError",
    "ExtraParamCount",
    "build_network",
    "make_activation",
    "network_forward",
    "network_backward",
    "network_loss",
    "count_extra_params",
]

OPAU_NAMES = tuple(b.value.lower() for b in PolyBasis)
ACTIVATIONS = ("relu", "leaky_relu", "elu", "softplus", "swish", "pau") + OPAU_NAMES
LOSSES = ("cross_entropy", "mse")


class StaleCacheError(RuntimeError):
    """Backward pass given a cache from another network or older parameters."""


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray
    biases: np.ndarray
    activation: OpauParams | PauParams | str = "identity"
    alpha: float | None = None

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        self.biases = np.array(self.biases, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.biases.size:
            raise ValueError(
                f"weights {self.weights.shape} and biases {self.biases.shape} are inconsistent"
            )
        if isinstance(self.activation, str) and self.activation not in BASELINES:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[0]

    @property
    def is_rational(self) -> bool:
        return isinstance(self.activation, (OpauParams, PauParams))

    def activation_arrays(self) -> dict[str, np.ndarray]:
        act = self.activation
        if isinstance(act, OpauParams):
            return {"c": act.c, "d": act.d}
        if isinstance(act, PauParams):
            return {"a": act.a, "b": act.b}
        return {}

    def activate(self, z):
        act = self.activation
        if isinstance(act, OpauParams):
            return activation_map(act, z)
        if isinstance(act, PauParams):
            return pau_map(act, z)
        return baseline_forward(act, z, self.alpha)

    def activate_backward(self, z, upstream):
        """Return ``(dL/dz, {name: summed parameter gradient})``."""
        act = self.activation
        if isinstance(act, OpauParams):
            _, dz, dc, dd = activation_backward(act, z, upstream)
            return dz, {"c": dc, "d": dd}
        if isinstance(act, PauParams):
            _, dz, da, db = pau_backward(act, z, upstream)
            return dz, {"a": da, "b": db}
        return upstream * baseline_deriv(act, z, self.alpha), {}

    def activation_doc(self) -> dict:
        act = self.activation
        if isinstance(act, OpauParams):
            return {"kind": "opau", "params": act.to_dict()}
        if isinstance(act, PauParams):
            return {"kind": "pau", "params": act.to_dict()}
        doc = {"kind": act}
        if self.alpha is not None:
            doc["alpha"] = self.alpha
        return doc


_versions = itertools.count()


@dataclass(eq=False)
class Network:
    layers: list[DenseLayer]
    loss: str = "cross_entropy"
    version: int = field(default_factory=lambda: next(_versions))

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; choose from {LOSSES}")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.fan_out != b.fan_in:
                raise ValueError(
                    f"layer {i} outputs {a.fan_out} units but layer {i + 1} expects {b.fan_in}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    def parameters(self) -> dict[str, np.ndarray]:
        """Named views of every trainable array; updating them in place updates the net."""
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{i}.weights"] = layer.weights
            out[f"{i}.biases"] = layer.biases
            for name, arr in layer.activation_arrays().items():
                out[f"{i}.{name}"] = arr
        return out

    def bump_version(self):
        """Mark cached forward passes as stale after a parameter update."""
        self.version = next(_versions)

    def predict(self, x) -> np.ndarray:
        out, _ = network_forward(self, x)
        return out


def make_activation(name: str, seed: int = 0, init: str = "published", k: int = 5, l: int = 4):
    """Activation for one hidden layer: a baseline name, a PAU, or an OPAU."""
    name = name.lower().replace("-", "_")
    if name in BASELINES:
        return name
    if name == "pau":
        return _pau_init(k, l, seed).copy()
    if name in OPAU_NAMES:
        basis = PolyBasis.parse(name)
        if init == "published":
            from .fit import published_params

            if (k, l) != (5, 4):
                raise ValueError("published initialisation exists only for k=5, l=4")
            return published_params(basis)
        if init == "fresh":
            return _opau_init(basis, k, l, seed).copy()
        raise ValueError(f"unknown init {init!r}; use published or fresh")
    raise ValueError(f"unknown activation {name!r}; choose from {', '.join(ACTIVATIONS)}")


@functools.lru_cache(maxsize=None)
def _opau_init(basis, k, l, seed):
    from .fit import FitTask, fit_opau

    return fit_opau(FitTask(basis=basis, k=k, l=l, seed=seed)).params


@functools.lru_cache(maxsize=None)
def _pau_init(k, l, seed):
    from .fit import FitTask, fit_pau

    return fit_pau(FitTask(k=k, l=l, seed=seed)).params


def build_network(
    sizes,
    activation: str = "hp1",
    seed: int = 0,
    init: str = "published",
    loss: str = "cross_entropy",
    k: int = 5,
    l: int = 4,
) -> Network:
    """MLP with ``sizes = [in, hidden..., out]``.

    Hidden layers get He-uniform weights and their own copy of the
    activation parameters; the linear output layer gets Glorot-uniform
    weights.  Biases start at zero.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ValueError(f"layer sizes must be positive and at least two, got {sizes}")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        last = i == len(sizes) - 2
        limit = np.sqrt(6.0 / (fan_in + fan_out)) if last else np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        act = "identity" if last else make_activation(activation, seed, init, k, l)
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return Network(layers, loss)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    output: np.ndarray
    network_id: int
    version: int


def network_forward(net: Network, x) -> tuple[np.ndarray, ForwardCache]:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1) if a.size else a.reshape(0, net.input_dim)
    if a.shape[1] != net.input_dim:
        raise ValueError(f"input has {a.shape[1]} features, network expects {net.input_dim}")
    inputs, preacts = [], []
    for layer in net.layers:
        inputs.append(a)
        z = a @ layer.weights.T + layer.biases
        preacts.append(z)
        a = layer.activate(z)
    return a, ForwardCache(inputs, preacts, a, id(net), net.version)


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _one_hot(labels, n):
    out = np.zeros((labels.size, n))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _check_labels(labels, output):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size != output.shape[0]:
        raise ValueError(f"{labels.size} labels for {output.shape[0]} samples")
    if labels.size and (labels.min() < 0 or labels.max() >= output.shape[1]):
        raise ValueError(f"labels must lie in [0, {output.shape[1]})")
    return labels


def _reduce(total, count, reduction):
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / count if count else 0.0
    raise ValueError(f"unknown reduction {reduction!r}")


def network_loss(net: Network, output, labels, reduction: str = "mean") -> float:
    labels = _check_labels(labels, output)
    if net.loss == "cross_entropy":
        per = -_log_softmax(output)[np.arange(labels.size), labels] if labels.size else np.zeros(0)
    else:
        per = 0.5 * np.sum((output - _one_hot(labels, output.shape[1])) ** 2, axis=1)
    return float(_reduce(per.sum(), labels.size, reduction))


def network_backward(net: Network, cache: ForwardCache, labels, reduction: str = "mean"):
    """Gradients of the loss for every array in :meth:`Network.parameters`.

    Activation-parameter gradients are summed over all units of a layer and
    use the same batch reduction as the weights.
    """
    if cache.network_id != id(net) or cache.version != net.version:
        raise StaleCacheError("forward cache does not match the current network parameters")
    out = cache.output
    labels = _check_labels(labels, out)
    n = labels.size
    scale = 1.0 / n if (reduction == "mean" and n) else 1.0
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    if net.loss == "cross_entropy":
        delta = (np.exp(_log_softmax(out)) - _one_hot(labels, out.shape[1])) * scale if n else out
    else:
        delta = (out - _one_hot(labels, out.shape[1])) * scale
    grads = {}
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        dz, act_grads = layer.activate_backward(cache.preacts[i], delta)
        grads[f"{i}.weights"] = dz.T @ cache.inputs[i]
        grads[f"{i}.biases"] = dz.sum(axis=0)
        for name, g in act_grads.items():
            grads[f"{i}.{name}"] = g
        delta = dz @ layer.weights
    return grads


@dataclass(frozen=True)
class ExtraParamCount:
    """Trainable activation parameters: ``formula`` counts k+l per layer,
    ``stored`` the k+1+l coefficients actually held."""

    layers: int
    formula: int
    stored: int


def count_extra_params(net: Network) -> ExtraParamCount:
    rational = [layer.activation for layer in net.layers if layer.is_rational]
    return ExtraParamCount(
        layers=len(rational),
        formula=sum(a.k + a.l for a in rational),
        stored=sum(a.num_params for a in rational),
    )
