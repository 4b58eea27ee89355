"""Linear SVM, feed-forward network and stratified cross-validation.

Multiclass SVM classification uses one binary linear machine per unordered
pair of classes (one-vs-one) and majority voting. The network has a single
sigmoid hidden layer and a softmax output, trained by full-batch gradient
descent on the mean cross-entropy.

Labels are passed as arrays of `SignalClass` integer values. All training is
deterministic given the data, the hyperparameters and the seed.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol

import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit, log_softmax, softmax

from . import store
from .errors import (
    ClassAbsentError, DivergenceError, InputError, SingleClassError,
    TooFewSamplesError)
from .timeseries import SignalClass

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from numpy.typing import ArrayLike

log = logging.getLogger(__name__)

SVM_TOLERANCE = 1e-6
SVM_MAX_EPOCHS = 1000


class Classifier(Protocol):
    """A trained multiclass model."""

    classes: tuple[SignalClass, ...]

    def predict(self, x: ArrayLike) -> np.ndarray:
        """Predict the class value of every row of ``x``."""


class Trainer(Protocol):
    """A classifier family with fixed hyperparameters."""

    name: str

    def train(self, x: np.ndarray, labels: np.ndarray) -> Classifier:
        """Train a classifier on rows ``x`` with class values ``labels``."""


def _as_matrix(x: ArrayLike) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        msg = 'Training and prediction data must be finite'
        raise InputError(msg)
    return x


def _as_labels(labels: ArrayLike, n: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (n,):
        msg = f'Expected {n} labels, got shape {labels.shape}'
        raise InputError(msg)
    return labels


@dataclass(frozen=True, eq=False)
class LinearSvm:
    """A binary linear SVM.

    A positive decision value means ``class_pair[0]``.

    :history: The best primal objective after each epoch.
    """

    weights: np.ndarray
    bias: float
    class_pair: tuple[SignalClass, SignalClass]
    hyper_c: float = 1.0
    history: tuple[float, ...] = ()

    def decision(self, x: ArrayLike) -> np.ndarray:
        """The signed decision values of the rows of ``x``."""
        return np.atleast_2d(np.asarray(x, dtype=float)) @ self.weights \
            + self.bias

    def objective(self, x: ArrayLike, y: ArrayLike) -> float:
        """The primal objective on data with +1/-1 labels ``y``.

        The bias is not penalized.
        """
        margins = np.asarray(y, dtype=float) * self.decision(x)
        hinge = np.maximum(0.0, 1.0 - margins).sum()
        norm = float(self.weights @ self.weights)
        return 0.5 * norm + self.hyper_c * float(hinge)

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'weights': self.weights, 'bias': self.bias,
            'class_pair': [c.label for c in self.class_pair],
            'hyper_c': self.hyper_c}

    @classmethod
    def from_dict(cls, data: dict) -> LinearSvm:
        """Create from a dictionary made by `to_dict`."""
        a, b = (SignalClass.parse(c) for c in data['class_pair'])
        return cls(
            np.asarray(data['weights'], dtype=float), float(data['bias']),
            (a, b), float(data['hyper_c']))


def _project_dual(v: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    """Project ``v`` onto the box [0, c] cut by the plane ``y @ a == 0``.

    The projection is ``clip(v - shift * y, 0, c)`` for the shift that
    balances the classes. The balance is piecewise linear and decreasing in
    the shift, so it is bisected over its knots and then interpolated.
    """
    def balance(shift: float) -> float:
        return float(y @ np.clip(v - shift * y, 0.0, c))

    knots = np.unique(np.concatenate([y * v, y * (v - c)]))
    lo, hi = 0, len(knots) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if balance(knots[mid]) > 0:
            lo = mid
        else:
            hi = mid
    b_lo, b_hi = balance(knots[lo]), balance(knots[hi])
    shift = knots[lo] + b_lo * (knots[hi] - knots[lo]) / (b_lo - b_hi)
    return np.clip(v - shift * y, 0.0, c)


def _best_bias(f: np.ndarray, y: np.ndarray) -> float:
    """The bias minimizing the summed hinge loss of decision values ``f``.

    The loss is convex and piecewise linear in the bias. The first knot
    where its slope stops being negative is a minimizer. A flat bottom is
    resolved to its midpoint.
    """
    pos = np.sort(1.0 - f[y > 0])
    neg = np.sort(-1.0 - f[y < 0])
    knots = np.sort(np.concatenate([pos, neg]))
    slope = np.searchsorted(neg, knots, 'right') \
        - (len(pos) - np.searchsorted(pos, knots, 'right'))
    k = int(np.argmax(slope >= 0))
    if slope[k] > 0:
        return float(knots[k])
    following = knots[knots > knots[k]]
    return float((knots[k] + following[0]) / 2.0)


def svm_train(
        x: ArrayLike, y: ArrayLike, c: float = 1.0, *,
        class_pair: tuple[SignalClass, SignalClass] | None = None,
        tol: float = SVM_TOLERANCE,
        max_epochs: int = SVM_MAX_EPOCHS) -> LinearSvm:
    """Train a binary linear SVM on +1/-1 labels.

    Minimizes ``0.5 * |w|**2 + c * sum(hinge)`` with an unpenalized bias.
    The dual, with its ``y @ alpha == 0`` constraint, is solved by
    accelerated projected gradient ascent. Each epoch the bias is set to the
    exact hinge minimizer for the current weights, and the primal iterate
    with the lowest objective is kept, so the recorded objective history
    never increases. Training stops when the duality gap falls below ``tol``
    relative to the objective, or after ``max_epochs``.

    :raise SingleClassError: If ``y`` does not hold both +1 and -1.
    """
    if not c > 0:
        msg = f'c must be > 0, got {c}'
        raise InputError(msg)
    x = _as_matrix(x)
    y = np.asarray(y, dtype=float)
    if y.shape != (x.shape[0],):
        msg = f'Expected {x.shape[0]} labels, got shape {y.shape}'
        raise InputError(msg)
    if not (np.any(y > 0) and np.any(y < 0)):
        msg = 'Binary SVM training needs samples of both classes'
        raise SingleClassError(msg)
    if max_epochs < 1:
        msg = f'max_epochs must be >= 1, got {max_epochs}'
        raise InputError(msg)
    if class_pair is None:
        class_pair = (SignalClass(0), SignalClass(1))

    # On the constraint plane the weights do not depend on the data origin.
    z = y[:, None] * (x - x.mean(axis=0))
    lipschitz = max(float(np.linalg.norm(z, 2)) ** 2, 1e-12)
    alpha = np.zeros(x.shape[0])
    beta = alpha.copy()
    t = 1.0
    best_w, best_b = np.zeros(x.shape[1]), 0.0
    best_p = math.inf
    history = []
    for epoch in range(max_epochs):
        gradient = 1.0 - z @ (z.T @ beta)
        new_alpha = _project_dual(beta + gradient / lipschitz, y, c)
        new_t = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        beta = new_alpha + (t - 1.0) / new_t * (new_alpha - alpha)
        alpha, t = new_alpha, new_t

        w = z.T @ alpha
        f = x @ w
        b = _best_bias(f, y)
        half_norm = 0.5 * float(w @ w)
        hinge = float(np.maximum(0.0, 1.0 - y * (f + b)).sum())
        primal = half_norm + c * hinge
        dual = float(alpha.sum()) - half_norm
        if primal < best_p:
            best_p, best_w, best_b = primal, w, b
        history.append(best_p)
        if best_p - dual <= tol * max(1.0, abs(best_p)):
            break
    else:
        log.debug('SVM %s hit the %d epoch cap', class_pair, max_epochs)

    log.debug('SVM %s trained in %d epochs', class_pair, epoch + 1)
    return LinearSvm(
        best_w.copy(), best_b, class_pair, float(c), tuple(history))


@dataclass(frozen=True, eq=False)
class OvoSvm:
    """One-vs-one multiclass linear SVM.

    :machines: One machine per unordered class pair, in pair order.
    :classes:  The classes in ascending order.
    """

    machines: tuple[LinearSvm, ...]
    classes: tuple[SignalClass, ...]
    name: str = field(default='svm', init=False)

    def __post_init__(self):
        n = len(self.classes)
        if len(self.machines) != n * (n - 1) // 2:
            msg = f'{n} classes need {n * (n - 1) // 2} machines'
            raise InputError(msg)

    def votes(self, x: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
        """Count votes and summed winning margins for each class.

        :return: Two arrays of shape (rows, classes).
        """
        x = _as_matrix(x)
        column = {cls: i for i, cls in enumerate(self.classes)}
        votes = np.zeros((x.shape[0], len(self.classes)))
        margins = np.zeros_like(votes)
        rows = np.arange(x.shape[0])
        for machine in self.machines:
            d = machine.decision(x)
            a, b = (column[cls] for cls in machine.class_pair)
            winner = np.where(d > 0, a, b)
            votes[rows, winner] += 1
            margins[rows, winner] += np.abs(d)
        return votes, margins

    def predict(self, x: ArrayLike) -> np.ndarray:
        """Predict by majority vote.

        Vote ties go to the largest summed absolute margin, then to the first
        class in class order.
        """
        votes, margins = self.votes(x)
        # Sort keys, least significant first.
        position = np.broadcast_to(-np.arange(len(self.classes)), votes.shape)
        best = np.lexsort((position, margins, votes))[:, -1]
        return np.array([int(self.classes[i]) for i in best], dtype=int)

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'kind': self.name,
            'classes': [c.label for c in self.classes],
            'machines': [m.to_dict() for m in self.machines]}

    @classmethod
    def from_dict(cls, data: dict) -> OvoSvm:
        """Create from a dictionary made by `to_dict`."""
        return cls(
            tuple(LinearSvm.from_dict(m) for m in data['machines']),
            tuple(SignalClass.parse(c) for c in data['classes']))


def _present_classes(
        labels: np.ndarray,
        classes: Sequence[SignalClass] | None) -> tuple[SignalClass, ...]:
    present = {SignalClass(v) for v in np.unique(labels)}
    if classes is None:
        classes = sorted(present)
    absent = [c.label for c in classes if c not in present]
    if absent:
        msg = f'No training samples for class(es): {", ".join(absent)}'
        raise ClassAbsentError(msg)
    if len(classes) < 2:
        msg = 'Classification needs at least 2 classes'
        raise SingleClassError(msg)
    return tuple(sorted(classes))


def ovo_train(
        x: ArrayLike, labels: ArrayLike, c: float = 1.0, *,
        classes: Sequence[SignalClass] | None = None) -> OvoSvm:
    """Train one binary SVM per class pair, each on that pair's rows only.

    :classes: The classes to separate; by default those present in
              ``labels``.
    :raise ClassAbsentError: If a requested class has no rows.
    """
    x = _as_matrix(x)
    labels = _as_labels(labels, x.shape[0])
    classes = _present_classes(labels, classes)
    machines = []
    for a, b in itertools.combinations(classes, 2):
        rows = (labels == a) | (labels == b)
        y = np.where(labels[rows] == a, 1.0, -1.0)
        machines.append(svm_train(x[rows], y, c, class_pair=(a, b)))
    return OvoSvm(tuple(machines), classes)


def ovo_predict(model: OvoSvm, sample: ArrayLike) -> SignalClass:
    """Predict the class of a single sample."""
    return SignalClass(int(model.predict(np.atleast_2d(sample))[0]))


@dataclass(frozen=True, eq=False)
class Ffnn:
    """A single hidden layer sigmoid network with a softmax output.

    Inputs are standardized with ``input_mean`` and ``input_scale`` before
    the hidden layer.

    :history: The training loss of each epoch.
    """

    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    output_weights: np.ndarray
    output_bias: np.ndarray
    classes: tuple[SignalClass, ...]
    input_mean: np.ndarray
    input_scale: np.ndarray
    history: tuple[float, ...] = ()
    name: str = field(default='ffnn', init=False)

    def __post_init__(self):
        if self.hidden_weights.shape[0] < 1:
            msg = 'A network needs at least 1 hidden unit'
            raise InputError(msg)

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xs = (x - self.input_mean) / self.input_scale
        hidden = expit(xs @ self.hidden_weights.T + self.hidden_bias)
        return xs, hidden

    def logits(self, x: ArrayLike) -> np.ndarray:
        """The output layer inputs, before the softmax."""
        _, hidden = self._forward(_as_matrix(x))
        return hidden @ self.output_weights.T + self.output_bias

    def probabilities(self, x: ArrayLike) -> np.ndarray:
        """Softmax class probabilities, one row per sample."""
        return softmax(self.logits(x), axis=1)

    def predict(self, x: ArrayLike) -> np.ndarray:
        """Predict the most probable class; ties go to the lowest class."""
        best = np.argmax(self.probabilities(x), axis=1)
        return np.array([int(self.classes[i]) for i in best], dtype=int)

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'kind': self.name,
            'classes': [c.label for c in self.classes],
            'hidden_weights': self.hidden_weights,
            'hidden_bias': self.hidden_bias,
            'output_weights': self.output_weights,
            'output_bias': self.output_bias,
            'input_mean': self.input_mean,
            'input_scale': self.input_scale}

    @classmethod
    def from_dict(cls, data: dict) -> Ffnn:
        """Create from a dictionary made by `to_dict`."""
        def arr(key):
            return np.asarray(data[key], dtype=float)

        return cls(
            np.atleast_2d(arr('hidden_weights')), arr('hidden_bias'),
            np.atleast_2d(arr('output_weights')), arr('output_bias'),
            tuple(SignalClass.parse(c) for c in data['classes']),
            arr('input_mean'), arr('input_scale'))


def _one_hot(labels: np.ndarray, classes: Sequence[SignalClass]) -> np.ndarray:
    return (labels[:, None] == np.array([int(c) for c in classes])[None, :]) \
        .astype(float)


def ffnn_loss_and_gradient(
        model: Ffnn, x: ArrayLike, labels: ArrayLike,
    ) -> tuple[float, dict[str, np.ndarray]]:
    """The mean cross-entropy loss and its gradient.

    :return:
        A tuple of the loss and a dictionary of gradients keyed by parameter
        name (``hidden_weights``, ``hidden_bias``, ``output_weights`` and
        ``output_bias``).
    """
    x = _as_matrix(x)
    labels = _as_labels(labels, x.shape[0])
    targets = _one_hot(labels, model.classes)
    xs, hidden = model._forward(x)
    logits = hidden @ model.output_weights.T + model.output_bias
    log_p = log_softmax(logits, axis=1)
    n = x.shape[0]
    loss = float(-(targets * log_p).sum() / n)

    d_logits = (np.exp(log_p) - targets) / n
    d_hidden = d_logits @ model.output_weights * hidden * (1.0 - hidden)
    return loss, {
        'hidden_weights': d_hidden.T @ xs,
        'hidden_bias': d_hidden.sum(axis=0),
        'output_weights': d_logits.T @ hidden,
        'output_bias': d_logits.sum(axis=0),
    }


def ffnn_train(
        x: ArrayLike, labels: ArrayLike, h: int = 10, epochs: int = 500,
        rate: float = 0.1, seed: int = 0, *,
        classes: Sequence[SignalClass] | None = None) -> Ffnn:
    """Train a network by full-batch gradient descent.

    All weights start uniform in +-1/sqrt(M), for M input features, and
    biases at zero.

    :raise DivergenceError: If the loss becomes non-finite.
    """
    if h < 1 or epochs < 1 or not rate > 0:
        msg = (
            f'Need h >= 1, epochs >= 1 and rate > 0; got h={h},'
            f' epochs={epochs}, rate={rate}')
        raise InputError(msg)
    x = _as_matrix(x)
    labels = _as_labels(labels, x.shape[0])
    classes = _present_classes(labels, classes)
    m = x.shape[1]
    rng = np.random.default_rng(seed)
    limit = 1.0 / math.sqrt(m)
    scale = x.std(axis=0)
    params = {
        'hidden_weights': rng.uniform(-limit, limit, (h, m)),
        'hidden_bias': np.zeros(h),
        'output_weights': rng.uniform(-limit, limit, (len(classes), h)),
        'output_bias': np.zeros(len(classes)),
    }
    model = Ffnn(
        **params, classes=classes, input_mean=x.mean(axis=0),
        input_scale=np.where(scale > 0, scale, 1.0))

    history = []
    for epoch in range(epochs):
        loss, grads = ffnn_loss_and_gradient(model, x, labels)
        if not math.isfinite(loss):
            msg = f'Network training diverged at epoch {epoch}'
            log.warning(msg)
            raise DivergenceError(msg, epoch=epoch)
        history.append(loss)
        params = {k: v - rate * grads[k] for k, v in params.items()}
        model = Ffnn(
            **params, classes=classes, input_mean=model.input_mean,
            input_scale=model.input_scale)
    return Ffnn(
        **params, classes=classes, input_mean=model.input_mean,
        input_scale=model.input_scale, history=tuple(history))


def ffnn_predict(model: Ffnn, sample: ArrayLike) -> SignalClass:
    """Predict the class of a single sample."""
    return SignalClass(int(model.predict(np.atleast_2d(sample))[0]))


@dataclass(frozen=True)
class SvmTrainer:
    """Trains `OvoSvm` classifiers."""

    c: float = 1.0
    name: str = 'svm'

    def train(self, x: np.ndarray, labels: np.ndarray) -> OvoSvm:
        return ovo_train(x, labels, self.c)


@dataclass(frozen=True)
class FfnnTrainer:
    """Trains `Ffnn` classifiers."""

    hidden: int = 10
    epochs: int = 500
    rate: float = 0.1
    seed: int = 0
    name: str = 'ffnn'

    def train(self, x: np.ndarray, labels: np.ndarray) -> Ffnn:
        return ffnn_train(
            x, labels, self.hidden, self.epochs, self.rate, self.seed)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """The zero based fold number of every sample."""

    fold_of_sample: np.ndarray
    k: int

    def test_rows(self, fold: int) -> np.ndarray:
        """The rows held out in a fold."""
        return np.flatnonzero(self.fold_of_sample == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        """The rows used for training in a fold."""
        return np.flatnonzero(self.fold_of_sample != fold)


def stratified_folds(labels: ArrayLike, k: int, seed: int) -> FoldAssignment:
    """Assign samples to k folds keeping class proportions.

    Within each class, in class order, samples are shuffled and dealt to the
    folds round-robin; the dealing continues where the previous class
    stopped.

    :raise TooFewSamplesError: If a class has fewer than k samples.
    """
    labels = np.asarray(labels, dtype=int)
    if k < 1:
        msg = f'k must be >= 1, got {k}'
        raise InputError(msg)
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.size, dtype=int)
    start = 0
    for value in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == value))
        if members.size < k:
            msg = (
                f'Class {SignalClass(value).label} has {members.size} samples,'
                f' fewer than {k} folds')
            raise TooFewSamplesError(msg)
        folds[members] = (start + np.arange(members.size)) % k
        start = (start + members.size) % k
    return FoldAssignment(folds, k)


@dataclass(frozen=True)
class CvReport:
    """The outcome of a cross-validation run.

    :accuracy:       The unweighted mean of the fold accuracies.
    :fold_accuracy:  The accuracy of each fold, in fold order.
    :class_accuracy: Held-out accuracy pooled over folds, per class label.
    """

    classifier: str
    accuracy: float
    fold_accuracy: tuple[float, ...]
    class_accuracy: dict[str, float]
    k: int
    seed: int
    n_features: int

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'classifier': self.classifier, 'accuracy': self.accuracy,
            'fold_accuracy': list(self.fold_accuracy),
            'class_accuracy': self.class_accuracy, 'k': self.k,
            'seed': self.seed, 'n_features': self.n_features}


def _run_fold(
        trainer: Trainer, x: np.ndarray, labels: np.ndarray,
        folds: FoldAssignment, fold: int) -> np.ndarray:
    train, test = folds.train_rows(fold), folds.test_rows(fold)
    model = trainer.train(x[train], labels[train])
    return model.predict(x[test])


def cross_validate(
        trainer: Trainer, x: ArrayLike, labels: ArrayLike, k: int = 10,
        seed: int = 0, *, n_jobs: int = 1) -> CvReport:
    """Stratified k-fold cross-validation.

    Each fold is held out exactly once while the model is trained on the
    others.
    """
    if k < 2:
        msg = f'Cross-validation needs k >= 2, got {k}'
        raise InputError(msg)
    x = _as_matrix(x)
    labels = _as_labels(labels, x.shape[0])
    folds = stratified_folds(labels, k, seed)
    predictions = Parallel(n_jobs=n_jobs)(
        delayed(_run_fold)(trainer, x, labels, folds, fold)
        for fold in range(k))

    correct = np.zeros(labels.size, dtype=bool)
    fold_accuracy = []
    for fold, predicted in enumerate(predictions):
        rows = folds.test_rows(fold)
        hits = predicted == labels[rows]
        correct[rows] = hits
        fold_accuracy.append(float(hits.mean()))
    class_accuracy = {
        SignalClass(v).label: float(correct[labels == v].mean())
        for v in np.unique(labels)}
    return CvReport(
        trainer.name, math.fsum(fold_accuracy) / k, tuple(fold_accuracy),
        class_accuracy, k, seed, x.shape[1])


def accuracy(model: Classifier, x: ArrayLike, labels: ArrayLike) -> float:
    """The fraction of rows a model classifies correctly."""
    labels = np.asarray(labels, dtype=int)
    return float(np.mean(model.predict(x) == labels))


_model_kinds = {
    'svm': OvoSvm,
    'ffnn': Ffnn,
}


def save_model(path: Path, model: OvoSvm | Ffnn, **metadata) -> Path:
    """Write a trained model and its metadata as JSON."""
    return store.write_json(path, {'model': model.to_dict(), **metadata})


def load_model(path: Path) -> tuple[OvoSvm | Ffnn, dict]:
    """Read a model written by `save_model`.

    :return: A tuple of the model and the remaining metadata.
    """
    data = store.read_json(path)
    model_data = data.pop('model', None) or {}
    kind = _model_kinds.get(model_data.get('kind'))
    if kind is None:
        msg = f'{path}: not a saved classifier'
        raise InputError(msg)
    return kind.from_dict(model_data), data
