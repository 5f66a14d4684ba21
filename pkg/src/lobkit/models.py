"""Reference encoder/decoder models and from-scratch training loops.

The model is deliberately a linear (optionally single-ReLU) autoencoder with
a 256-dimensional latent, so every gradient is hand-derivable and checkable
against finite differences. Adam and the backward pass are implemented here
directly; training is single-threaded and bit-deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import (
    LossConfig,
    cross_entropy,
    cross_entropy_gradient,
    l_all,
    l_all_gradient,
    masked_mse,
    masked_mse_gradient,
)

RECONSTRUCTION = "reconstruction"
PREDICTION = "prediction"
IMPUTATION = "imputation"


class NumericError(Exception):
    """Training hit a non-finite loss; carries batch id and parameter norm."""

    def __init__(self, batch_id: int, param_norm: float):
        super().__init__(
            f"non-finite loss at batch {batch_id} (param norm {param_norm:.3e})"
        )
        self.batch_id = batch_id
        self.param_norm = param_norm


def _init(shape, fan_in: int, rng) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class LinearAutoencoder:
    """Affine encoder 4000->256 and decoder 256->4000, optional ReLU latent."""

    def __init__(self, input_dim: int = 4000, latent: int = 256,
                 relu: bool = False, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.input_dim = input_dim
        self.latent = latent
        self.relu = relu
        self.params = {
            "enc.W": _init((input_dim, latent), input_dim, rng),
            "enc.b": np.zeros(latent),
            "dec.W": _init((latent, input_dim), latent, rng),
            "dec.b": np.zeros(input_dim),
        }

    def encode(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} inputs, got {x.shape[1]}")
        h = x @ self.params["enc.W"] + self.params["enc.b"]
        r = np.maximum(h, 0.0) if self.relu else h
        return r[0] if r.shape[0] == 1 else r

    def decode(self, r: np.ndarray) -> np.ndarray:
        r = np.atleast_2d(np.asarray(r, dtype=float))
        if r.shape[1] != self.latent:
            raise ValueError(f"expected {self.latent} latents, got {r.shape[1]}")
        y = r @ self.params["dec.W"] + self.params["dec.b"]
        return y[0] if y.shape[0] == 1 else y


class TaskHead:
    """Single affine map from the latent to the task output.

    Prediction: 256 -> 3 logits (classes -1, 0, +1 in index order).
    Imputation / reconstruction heads: 256 -> input_dim.
    """

    def __init__(self, kind: str, latent: int = 256, out_dim: int | None = None,
                 seed: int = 0):
        if kind not in (PREDICTION, IMPUTATION, RECONSTRUCTION):
            raise ValueError(f"bad head kind {kind!r}")
        if out_dim is None:
            out_dim = 3 if kind == PREDICTION else 4000
        rng = np.random.default_rng(seed)
        self.kind = kind
        self.latent = latent
        self.out_dim = out_dim
        self.params = {
            "head.W": _init((latent, out_dim), latent, rng),
            "head.b": np.zeros(out_dim),
        }

    def forward(self, r: np.ndarray) -> np.ndarray:
        r = np.atleast_2d(np.asarray(r, dtype=float))
        if r.shape[1] != self.latent:
            raise ValueError(f"expected {self.latent} latents, got {r.shape[1]}")
        y = r @ self.params["head.W"] + self.params["head.b"]
        return y[0] if y.shape[0] == 1 else y


def head_forward(head: TaskHead, r: np.ndarray) -> np.ndarray:
    return head.forward(r)


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def update(self, params: dict, grads: dict):
        self.t += 1
        b1t = 1 - self.beta1**self.t
        b2t = 1 - self.beta2**self.t
        for name, g in grads.items():
            p = params[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    task: str = RECONSTRUCTION
    freeze_encoder: bool = False
    clip_norm: float | None = None
    levels: int = 10
    lr_schedule: str = "constant"  # constant | cosine (warmup then anneal)
    warmup_epochs: int = 0
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def _batch_forward(model, head, X):
    """Shared forward with cached activations for the backward pass."""
    H = X @ model.params["enc.W"] + model.params["enc.b"]
    R = np.maximum(H, 0.0) if model.relu else H
    if head is None:
        Y = R @ model.params["dec.W"] + model.params["dec.b"]
    else:
        Y = R @ head.params["head.W"] + head.params["head.b"]
    return Y, (X, H, R)


def _batch_backward(model, head, cache, GY, freeze_encoder: bool):
    X, H, R = cache
    grads = {}
    if head is None:
        grads["dec.W"] = R.T @ GY
        grads["dec.b"] = GY.sum(axis=0)
        GR = GY @ model.params["dec.W"].T
    else:
        grads["head.W"] = R.T @ GY
        grads["head.b"] = GY.sum(axis=0)
        GR = GY @ head.params["head.W"].T
    if not freeze_encoder:
        GH = GR * (H > 0) if model.relu else GR
        grads["enc.W"] = X.T @ GH
        grads["enc.b"] = GH.sum(axis=0)
    return grads


def _task_loss_grad(task, Y, batch, cfg):
    """Mean loss over the batch and dLoss/dY, per task kind."""
    B = Y.shape[0]
    T = batch[0].T
    n_cols = batch[0].data.shape[1]
    loss = 0.0
    GY = np.empty_like(Y)
    for i, w in enumerate(batch):
        if task == PREDICTION:
            loss += cross_entropy(Y[i], w.label)
            GY[i] = cross_entropy_gradient(Y[i], w.label)
        elif task == IMPUTATION:
            xh = Y[i].reshape(T, n_cols)
            loss += masked_mse(w.data, xh, w.mask)
            GY[i] = masked_mse_gradient(w.data, xh, w.mask).ravel()
        else:
            xh = Y[i].reshape(T, n_cols)
            loss += l_all(w.data, xh, cfg.loss, cfg.levels)
            GY[i] = l_all_gradient(w.data, xh, cfg.loss, cfg.levels).ravel()
    return loss / B, GY / B


def _model_input(task, w) -> np.ndarray:
    x = w.masked_input() if task == IMPUTATION else w.data
    return x.ravel()


def _clip(grads: dict, max_norm: float):
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def train(model: LinearAutoencoder, head: TaskHead | None, data: list,
          cfg: TrainConfig, max_batches: int | None = None):
    """Mini-batch Adam over the given windows; returns per-epoch loss trace.

    `data` is a list of Window objects: labeled for prediction, masked for
    imputation, plain for reconstruction. Shuffling and batching are
    deterministic per cfg.seed. Model and head are updated in place.
    """
    if not data:
        raise ValueError("no training data")
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)
    trace = []
    batch_id = 0
    targets = [model.params] if head is None else [model.params, head.params]
    all_params = {k: v for d in targets for k, v in d.items()}
    inputs = np.stack([_model_input(cfg.task, w) for w in data])
    for epoch in range(cfg.epochs):
        if epoch < cfg.warmup_epochs:
            adam.lr = cfg.lr * (epoch + 1) / cfg.warmup_epochs
        elif cfg.lr_schedule == "cosine":
            t = (epoch - cfg.warmup_epochs) / max(
                cfg.epochs - cfg.warmup_epochs, 1
            )
            adam.lr = cfg.lr * 0.5 * (1 + np.cos(np.pi * t))
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(data), cfg.batch_size):
            if max_batches is not None and batch_id >= max_batches:
                return trace
            idx = order[start : start + cfg.batch_size]
            batch = [data[i] for i in idx]
            # divergence is detected from the loss, so let overflow propagate
            # to inf/nan silently instead of spamming warnings first
            with np.errstate(over="ignore", invalid="ignore"):
                Y, cache = _batch_forward(model, head, inputs[idx])
                loss, GY = _task_loss_grad(
                    cfg.task, np.atleast_2d(Y), batch, cfg
                )
            if not np.isfinite(loss):
                with np.errstate(over="ignore", invalid="ignore"):
                    norm = float(np.sqrt(sum(
                        float((p * p).sum()) for p in all_params.values()
                    )))
                raise NumericError(batch_id, norm)
            grads = _batch_backward(
                model, head, cache, np.atleast_2d(GY), cfg.freeze_encoder
            )
            if cfg.clip_norm is not None:
                _clip(grads, cfg.clip_norm)
            adam.update(all_params, grads)
            epoch_loss += loss
            n_batches += 1
            batch_id += 1
        trace.append(epoch_loss / max(n_batches, 1))
    return trace


def finetune_frozen(model: LinearAutoencoder, head: TaskHead, data: list,
                    cfg: TrainConfig, budget: int):
    """Fine-tune only the head for at most `budget` optimizer steps."""
    if budget == 0:
        return []
    frozen_cfg = TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr,
        seed=cfg.seed, loss=cfg.loss, task=cfg.task,
        freeze_encoder=True, clip_norm=cfg.clip_norm, levels=cfg.levels,
    )
    return train(model, head, data, frozen_cfg, max_batches=budget)


def predict_labels(model: LinearAutoencoder, head: TaskHead,
                   windows: list) -> np.ndarray:
    X = np.stack([w.data.ravel() for w in windows])
    logits = np.atleast_2d(head.forward(model.encode(X)))
    return logits.argmax(axis=1) - 1


def evaluate_classification(preds, labels) -> dict:
    """Confusion-matrix statistics over trend classes {-1, 0, +1}.

    Recall is absent (None) for classes missing from the labels, precision
    for classes never predicted; macro averages skip absent entries.
    """
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.size == 0 or preds.shape != labels.shape:
        raise ValueError("need matching non-empty prediction/label arrays")
    classes = (-1, 0, 1)
    precision = {}
    recall = {}
    for c in classes:
        tp = int(np.sum((preds == c) & (labels == c)))
        pred_c = int(np.sum(preds == c))
        true_c = int(np.sum(labels == c))
        precision[c] = tp / pred_c if pred_c else None
        recall[c] = tp / true_c if true_c else None
    defined_p = [v for v in precision.values() if v is not None]
    defined_r = [v for v in recall.values() if v is not None]
    return {
        "precision": precision,
        "recall": recall,
        "macro_precision": float(np.mean(defined_p)) if defined_p else None,
        "macro_recall": float(np.mean(defined_r)) if defined_r else None,
        "accuracy": float(np.mean(preds == labels)),
    }
