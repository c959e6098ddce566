"""Mini-batch training loop, metrics export and JSON checkpoints."""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .activations import OpauParams, PauParams
from .datasets import DatasetBatch
from .nn import DenseLayer, Network, network_backward, network_forward, network_loss
from .optim import make_optimizer

__all__ = [
    "TrainConfig",
    "EpochMetrics",
    "TrainingDiverged",
    "evaluate",
    "train",
    "write_metrics_csv",
    "save_checkpoint",
    "load_checkpoint",
    "atomic_write_text",
]

METRIC_COLUMNS = ("epoch", "train_loss", "train_acc", "test_loss", "test_acc")


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.0
    batch_size: int = 128
    epochs: int = 10
    seed: int = 0
    init: str = "published"
    clip_activation_grad: float | None = None
    freeze: tuple[str, ...] = ()

    def validate(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.clip_activation_grad is not None and not self.clip_activation_grad > 0:
            raise ValueError("activation gradient clip norm must be positive")


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float = math.nan
    test_acc: float = math.nan
    activations: dict = field(default_factory=dict, repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_COLUMNS}


class TrainingDiverged(FloatingPointError):
    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


def evaluate(net: Network, data: DatasetBatch) -> tuple[float, float]:
    """Mean loss and accuracy over a whole dataset."""
    if len(data) == 0:
        return math.nan, math.nan
    out, _ = network_forward(net, data.features)
    loss = network_loss(net, out, data.labels)
    acc = float(np.mean(np.argmax(out, axis=1) == data.labels))
    return loss, acc


def _activation_snapshot(net: Network) -> dict:
    return {
        str(i): layer.activation.to_dict()
        for i, layer in enumerate(net.layers)
        if layer.is_rational
    }


def _clip_activation_grads(grads: dict, max_norm: float):
    keys = [k for k in grads if k.rsplit(".", 1)[1] in ("c", "d", "a", "b")]
    norm = math.sqrt(sum(float(np.sum(grads[k] ** 2)) for k in keys))
    if norm > max_norm:
        for k in keys:
            grads[k] = grads[k] * (max_norm / norm)


def train(
    net: Network,
    data: DatasetBatch,
    config: TrainConfig,
    test_data: DatasetBatch | None = None,
    metrics_path=None,
    log=None,
) -> list[EpochMetrics]:
    """Train in place and return per-epoch metrics.

    Deterministic for a fixed ``config.seed``.  A non-finite loss raises
    :class:`TrainingDiverged` carrying the last good parameters.
    """
    config.validate()
    if data.dim != net.input_dim:
        raise ValueError(f"data has {data.dim} features, network expects {net.input_dim}")
    rng = np.random.default_rng(config.seed)
    opt = make_optimizer(config.optimizer, config.lr, config.momentum)
    params = net.parameters()
    frozen = {k for k in params if k.rsplit(".", 1)[1] in config.freeze}
    history: list[EpochMetrics] = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        for batch in data.batches(config.batch_size, rng):
            out, cache = network_forward(net, batch.features)
            loss = network_loss(net, out, batch.labels)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {step}",
                    {"epoch": epoch, "step": step, "activations": _activation_snapshot(net)},
                )
            grads = network_backward(net, cache, batch.labels)
            for k in frozen:
                del grads[k]
            if config.clip_activation_grad is not None:
                _clip_activation_grads(grads, config.clip_activation_grad)
            opt.step(params, grads)
            net.bump_version()
            step += 1
        train_loss, train_acc = evaluate(net, data)
        if not math.isfinite(train_loss):
            raise TrainingDiverged(
                f"non-finite loss after epoch {epoch}",
                {"epoch": epoch, "step": step, "activations": _activation_snapshot(net)},
            )
        test_loss, test_acc = evaluate(net, test_data) if test_data is not None else (math.nan, math.nan)
        m = EpochMetrics(epoch, train_loss, train_acc, test_loss, test_acc, _activation_snapshot(net))
        history.append(m)
        if log is not None:
            log(m)
    if metrics_path is not None:
        write_metrics_csv(metrics_path, history)
    return history


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def atomic_write_text(path, text: str):
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_metrics_csv(path, history: list[EpochMetrics]):
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for m in history:
        writer.writerow([m.epoch] + [_fmt(getattr(m, k)) for k in METRIC_COLUMNS[1:]])
    atomic_write_text(path, buf.getvalue())


def checkpoint_doc(net: Network, config: TrainConfig | None = None, extra: dict | None = None) -> dict:
    doc = {
        "format": "opau-checkpoint",
        "version": 1,
        "loss": net.loss,
        "seed": config.seed if config is not None else None,
        "config": asdict(config) if config is not None else None,
        "layers": [
            {
                "in": layer.fan_in,
                "out": layer.fan_out,
                "weights": [float(v) for v in layer.weights.ravel()],
                "biases": [float(v) for v in layer.biases],
                "activation": layer.activation_doc(),
            }
            for layer in net.layers
        ],
    }
    if extra:
        doc.update(extra)
    return doc


def save_checkpoint(path, net: Network, config: TrainConfig | None = None, extra: dict | None = None):
    atomic_write_text(path, json.dumps(checkpoint_doc(net, config, extra), indent=1))


def _layer_from_doc(doc: dict) -> DenseLayer:
    w = np.array(doc["weights"], dtype=np.float64).reshape(doc["out"], doc["in"])
    act = doc["activation"]
    kind = act["kind"]
    if kind == "opau":
        activation = OpauParams.from_dict(act["params"])
    elif kind == "pau":
        activation = PauParams.from_dict(act["params"])
    else:
        activation = kind
    return DenseLayer(w, doc["biases"], activation, act.get("alpha"))


def load_checkpoint(path) -> tuple[Network, dict]:
    """Return the network and the raw checkpoint document."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "opau-checkpoint":
        raise ValueError(f"{path} is not an opau checkpoint")
    net = Network([_layer_from_doc(layer) for layer in doc["layers"]], doc.get("loss", "cross_entropy"))
    return net, doc
