"""Minibatch training loop and evaluation reports."""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError
from .optim import OptimizerState, optimizer_step, per_sample_nll, scce_loss
from .rng import make_rng

log = logging.getLogger(__name__)

EpochStats = namedtuple("EpochStats", "epoch loss accuracy")


def pixels_to_input(pixels):
    """Map 8-bit grayscale images (N x 64 x 64) to network input (N x 64 x 64 x 1).

    Values become ink intensity ``1 - p/255`` so the white background is 0.
    """
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        pixels = pixels[None]
    return (1.0 - pixels.astype(np.float64) / 255.0)[..., None]


@dataclass
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    ids: list = None
    strata: list = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.labels)
        if len(self.images) != n:
            raise ShapeError(f"{len(self.images)} images but {n} labels")
        if self.ids is None:
            self.ids = [str(i) for i in range(n)]
        if self.strata is None:
            self.strata = [""] * n
        self.ids = list(self.ids)
        self.strata = list(self.strata)
        if len(self.ids) != n or len(self.strata) != n:
            raise ShapeError("ids and strata must have one entry per image")

    def __len__(self):
        return len(self.labels)

    def subset(self, index):
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            self.images[index],
            self.labels[index],
            [self.ids[i] for i in index],
            [self.strata[i] for i in index],
        )


@dataclass
class TrainConfig:
    epochs: int = 25
    optimizer: str = "adam"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")

    def new_optimizer(self):
        return OptimizerState(self.optimizer, self.lr, self.beta1, self.beta2, self.eps)


def train(model, data, config, optimizer=None):
    """Train ``model`` in place and return one ``EpochStats`` per epoch.

    Shuffling and dropout draw from separate streams derived from
    ``config.seed``; the final partial batch is kept.  Reported loss and
    accuracy are averaged over the epoch's train-mode forward passes.
    """
    if len(data) == 0:
        raise ValidationError("cannot train on an empty dataset")
    if data.labels.min() < 0 or data.labels.max() >= model.spec.n_classes:
        raise ValidationError(f"labels must lie in 0..{model.spec.n_classes - 1}")
    state = optimizer if optimizer is not None else config.new_optimizer()
    params = model.named_params()
    shuffle_rng = make_rng(config.seed, "shuffle")
    dropout_rng = make_rng(config.seed, "dropout")
    n = len(data)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            y = data.labels[idx]
            probs, caches = model.forward(data.images[idx], train=True, rng=dropout_rng)
            loss, grad = scce_loss(probs, y)
            optimizer_step(state, params, model.backward_from_logits(grad, caches))
            loss_sum += loss * len(idx)
            correct += int((probs.argmax(axis=1) == y).sum())
        stats = EpochStats(epoch, loss_sum / n, correct / n)
        history.append(stats)
        log.info("epoch %d/%d loss=%.4f accuracy=%.4f", epoch, config.epochs, stats.loss, stats.accuracy)
    return history


@dataclass
class EvalReport:
    """Classification summary against human scores.

    Counts are stored exactly; accuracies are derived.  ``loss`` is the mean
    per-response cross-entropy accumulated with ``math.fsum`` so it does not
    depend on response order.
    """

    n: int
    loss: float
    confusion: np.ndarray
    strata: dict
    misclassified: list
    meta: dict = field(default_factory=dict)

    @property
    def correct(self):
        return int(np.trace(self.confusion))

    @property
    def accuracy(self):
        return self.correct / self.n

    @property
    def category_counts(self):
        return self.confusion.sum(axis=1)

    @property
    def per_category_accuracy(self):
        out = {}
        for k, total in enumerate(self.category_counts):
            out[k] = self.confusion[k, k] / total if total else None
        return out

    @property
    def per_stratum_accuracy(self):
        return {s: c / t for s, (t, c) in self.strata.items()}


def evaluate_predictions(probs, data, meta=None):
    probs = np.asarray(probs, dtype=np.float64)
    if len(data) == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    if probs.shape[0] != len(data):
        raise ShapeError(f"{probs.shape[0]} predictions for {len(data)} responses")
    k = probs.shape[1]
    pred = probs.argmax(axis=1)
    truth = data.labels
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    hits = pred == truth
    strata = {}
    for s, ok in zip(data.strata, hits):
        total, good = strata.get(s, (0, 0))
        strata[s] = (total + 1, good + int(ok))
    loss = math.fsum(per_sample_nll(probs, truth)) / len(data)
    wrong = sorted(data.ids[i] for i in np.flatnonzero(~hits))
    return EvalReport(
        n=len(data),
        loss=loss,
        confusion=confusion,
        strata=dict(sorted(strata.items())),
        misclassified=wrong,
        meta=dict(meta or {}),
    )


def evaluate(model, data, meta=None, batch_size=256):
    """Evaluate in inference mode (dropout off); ties in argmax go to the lower category."""
    if len(data) == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    return evaluate_predictions(model.predict_proba(data.images, batch_size), data, meta)
