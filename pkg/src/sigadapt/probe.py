"""
Linear + softmax classification head trained on converted representations.

The head maximizes the summed log-probability of the true class over the training instances,
less an optional ``l2 * ||W||^2 / 2`` penalty, by plain mini-batch gradient ascent from zero weights.
"""
import logging
import pathlib
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from sigadapt.errors import ArtifactError, NumericError, ValidationError
from sigadapt.manifest import PathLike, write_bytes
from sigadapt.types import FloatArray, IntArray

log = logging.getLogger(__name__)

HEAD_MAGIC = b"SGPH"
HEAD_VERSION = 1
_HEAD_PREFIX = struct.Struct("<4sHII")


class ProbeHead:
    r"""
    ``classes x features`` weights and a ``classes`` bias.

    .. code-block:: python3

        >>> h = ProbeHead.zeros(3, 4)
        >>> h.classes, h.features
        (3, 4)
        >>> h
        ProbeHead(classes=3, features=4)

    Args:
        weights: real matrix, one row per class
        bias: real vector, one entry per class
    """

    __slots__ = ("_weights", "_bias")

    def __init__(self, weights: npt.ArrayLike, bias: npt.ArrayLike) -> None:
        w = np.array(weights, dtype=np.float64, copy=True)
        b = np.array(bias, dtype=np.float64, copy=True)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0] or w.shape[0] < 1:
            raise ValidationError(
                f"weights {w.shape} and bias {b.shape} do not describe a head"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NumericError("head parameters are not finite")
        w.setflags(write=False)
        b.setflags(write=False)
        self._weights: FloatArray = w
        self._bias: FloatArray = b

    @classmethod
    def zeros(cls, classes: int, features: int) -> "ProbeHead":
        return cls(np.zeros((classes, features)), np.zeros(classes))

    @property
    def weights(self) -> FloatArray:
        return self._weights

    @property
    def bias(self) -> FloatArray:
        return self._bias

    @property
    def classes(self) -> int:
        return int(self._weights.shape[0])

    @property
    def features(self) -> int:
        return int(self._weights.shape[1])

    def __eq__(self, other: object) -> bool:
        if isinstance(other, type(self)):
            return bool(
                np.array_equal(self._weights, other._weights)
                and np.array_equal(self._bias, other._bias)
            )
        return NotImplemented

    __hash__: None  # type: ignore

    def __repr__(self) -> str:
        return f"{type(self).__qualname__}(classes={self.classes}, features={self.features})"


class FeatureBatch:
    """``K`` feature rows and their class indices"""

    __slots__ = ("_features", "_labels")

    def __init__(self, features: npt.ArrayLike, labels: Sequence[int]) -> None:
        x = np.array(features, dtype=np.float64, copy=True)
        y = np.array(labels, dtype=np.int64, copy=True)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValidationError(
                f"features {x.shape} and labels {y.shape} do not describe a batch"
            )
        if x.shape[0] < 1:
            raise ValidationError("a batch needs at least one instance")
        if np.any(y < 0):
            raise ValidationError("labels must be non-negative")
        bad = np.flatnonzero(~np.isfinite(x))
        if bad.size:
            raise ValidationError(f"features contain a non-finite value at index {int(bad[0])}")
        x.setflags(write=False)
        y.setflags(write=False)
        self._features: FloatArray = x
        self._labels: IntArray = y

    @property
    def features(self) -> FloatArray:
        return self._features

    @property
    def labels(self) -> IntArray:
        return self._labels

    @property
    def width(self) -> int:
        return int(self._features.shape[1])

    def take(self, index: npt.ArrayLike) -> "FeatureBatch":
        i = np.asarray(index, dtype=np.intp)
        return FeatureBatch(self._features[i], self._labels[i].tolist())

    def __len__(self) -> int:
        return int(self._labels.shape[0])

    def __repr__(self) -> str:
        return f"{type(self).__qualname__}({len(self)}x{self.width})"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValidationError(f"learning rate must be positive, not {self.learning_rate}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be non-negative, not {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be positive, not {self.batch_size}")
        if self.seed < 0:
            raise ValidationError(f"seed must be unsigned, not {self.seed}")
        if not self.l2 >= 0:
            raise ValidationError(f"l2 must be non-negative, not {self.l2}")


def _check(head: ProbeHead, batch: FeatureBatch) -> None:
    if batch.width != head.features:
        raise ValidationError(
            f"batch has {batch.width} features but the head expects {head.features}"
        )
    if int(batch.labels.max()) >= head.classes:
        raise ValidationError(
            f"label {int(batch.labels.max())} outside the head's {head.classes} classes"
        )


def _log_softmax(logits: FloatArray) -> FloatArray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    out: FloatArray = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return out


def forward(head: ProbeHead, features: npt.ArrayLike) -> FloatArray:
    """
    Class probabilities of every feature row; rows sum to one.

    .. code-block:: python3

        >>> forward(ProbeHead.zeros(3, 2), [[1.0, 2.0]]).round(6).tolist()
        [[0.333333, 0.333333, 0.333333]]
        >>> forward(ProbeHead([[1.0], [0.0]], [0.0, 0.0]), [[1000.0]]).tolist()
        [[1.0, 0.0]]
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != head.features:
        raise ValidationError(
            f"features of shape {x.shape} do not match a head of {head.features} features"
        )
    logits = x @ head.weights.T + head.bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out: FloatArray = e / e.sum(axis=1, keepdims=True)
    return out


def objective(head: ProbeHead, batch: FeatureBatch, l2: float = 0.0) -> float:
    """
    Summed log-probability of the true classes, minus ``l2 * ||W||^2 / 2``.

    .. code-block:: python3

        >>> round(objective(ProbeHead.zeros(2, 1), FeatureBatch([[0.0]] * 4, [0, 1, 0, 1])), 4)
        -2.7726
    """
    _check(head, batch)
    logp = _log_softmax(batch.features @ head.weights.T + head.bias)
    total = float(logp[np.arange(len(batch)), batch.labels].sum())
    return total - l2 * float(np.sum(head.weights**2)) / 2.0


def gradient(head: ProbeHead, batch: FeatureBatch, l2: float = 0.0) -> Tuple[FloatArray, FloatArray]:
    """
    Gradient of the negated :func:`objective` with respect to the weights and the bias.

    The weight gradient is ``(P - Y)^T X + l2 * W`` summed over the batch, the bias gradient ``sum(P - Y)``,
    where ``P`` are the predicted probabilities and ``Y`` the one-hot labels.
    """
    _check(head, batch)
    residual = forward(head, batch.features)
    residual[np.arange(len(batch)), batch.labels] -= 1.0
    grad_w: FloatArray = residual.T @ batch.features + l2 * head.weights
    grad_b: FloatArray = residual.sum(axis=0)
    return grad_w, grad_b


@dataclass(frozen=True)
class TrainResult:
    """
    The trained head and the full-dataset objective before training and after every epoch.

    ``history[0]`` is the objective of the zero head, ``history[e]`` the objective after epoch ``e``.
    """

    head: ProbeHead
    history: Tuple[float, ...]


@np.errstate(over="ignore", invalid="ignore")
def train(batch: FeatureBatch, classes: int, config: TrainConfig = TrainConfig()) -> TrainResult:
    """
    Fit a head from zero initialization by mini-batch gradient ascent on :func:`objective`.

    Every epoch visits the instances in a fresh permutation drawn from a generator seeded with ``config.seed``;
    each step moves by ``learning_rate / len(minibatch)`` times the summed gradient.
    Identical inputs and configuration give bitwise identical heads.
    """
    if classes < 1:
        raise ValidationError(f"class count must be positive, not {classes}")
    w = np.zeros((classes, batch.width))
    b = np.zeros(classes)
    head = ProbeHead(w, b)
    _check(head, batch)
    rng = np.random.default_rng(config.seed)
    history: List[float] = [objective(head, batch, config.l2)]
    for epoch in range(config.epochs):
        order = rng.permutation(len(batch))
        for start in range(0, len(batch), config.batch_size):
            part = batch.take(order[start : start + config.batch_size])
            grad_w, grad_b = gradient(head, part, config.l2)
            step = config.learning_rate / len(part)
            w = w - step * grad_w
            b = b - step * grad_b
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError(
                    f"training diverged in epoch {epoch + 1}; lower the learning rate "
                    f"(currently {config.learning_rate})"
                )
            head = ProbeHead(w, b)
        value = objective(head, batch, config.l2)
        if not np.isfinite(value):
            raise NumericError(
                f"objective became {value} after epoch {epoch + 1}; lower the learning rate "
                f"(currently {config.learning_rate})"
            )
        history.append(value)
        log.debug("probe epoch", extra={"fields": {"epoch": epoch + 1, "objective": value}})
    log.info(
        "trained probe",
        extra={"fields": {"instances": len(batch), "epochs": config.epochs, "objective": history[-1]}},
    )
    return TrainResult(head, tuple(history))


def predict(head: ProbeHead, features: npt.ArrayLike) -> IntArray:
    """Most probable class per row; ties go to the lowest class index"""
    out: IntArray = np.argmax(forward(head, features), axis=1).astype(np.int64)
    return out


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    macro_f1: float
    confusion: Tuple[Tuple[int, ...], ...]
    """``confusion[t][p]`` counts instances of true class ``t`` predicted as ``p``"""


def metrics_from_confusion(confusion: Sequence[Sequence[int]]) -> Tuple[Fraction, Fraction]:
    """
    Exact accuracy and macro-F1 of a square confusion matrix.

    A class's F1 is ``2 * TP / (2 * TP + FP + FN)``, which is 0 when the class never occurs
    in the truth nor in the predictions.

    .. code-block:: python3

        >>> metrics_from_confusion([[1, 1], [1, 1]])
        (Fraction(1, 2), Fraction(1, 2))
        >>> metrics_from_confusion([[2, 0, 0], [0, 2, 0], [0, 0, 0]])
        (Fraction(1, 1), Fraction(2, 3))
    """
    c = np.asarray(confusion, dtype=np.int64)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
        raise ValidationError(f"confusion matrix must be square, got shape {c.shape}")
    total = int(c.sum())
    if total == 0:
        raise ValidationError("cannot score an empty confusion matrix")
    correct = int(np.trace(c))
    scores = []
    for k in range(c.shape[0]):
        tp = int(c[k, k])
        fp = int(c[:, k].sum()) - tp
        fn = int(c[k, :].sum()) - tp
        denom = 2 * tp + fp + fn
        scores.append(Fraction(2 * tp, denom) if denom else Fraction(0))
    return Fraction(correct, total), sum(scores, Fraction(0)) / len(scores)


def evaluate(head: ProbeHead, batch: FeatureBatch) -> Evaluation:
    """
    Accuracy, macro-F1 and confusion matrix of *head* on *batch*.

    .. code-block:: python3

        >>> e = evaluate(ProbeHead([[1.0], [-1.0]], [0.0, 0.0]), FeatureBatch([[1.0], [-1.0]], [0, 1]))
        >>> e.accuracy, e.macro_f1, e.confusion
        (1.0, 1.0, ((1, 0), (0, 1)))
    """
    _check(head, batch)
    predicted = predict(head, batch.features)
    confusion = np.zeros((head.classes, head.classes), dtype=np.int64)
    np.add.at(confusion, (batch.labels, predicted), 1)
    accuracy, macro_f1 = metrics_from_confusion(confusion)
    return Evaluation(
        accuracy=float(accuracy),
        macro_f1=float(macro_f1),
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
    )


def encode_head(head: ProbeHead) -> bytes:
    """Magic, version, class and feature counts, then weights and bias as little-endian float64"""
    return (
        _HEAD_PREFIX.pack(HEAD_MAGIC, HEAD_VERSION, head.classes, head.features)
        + head.weights.astype("<f8").tobytes()
        + head.bias.astype("<f8").tobytes()
    )


def decode_head(data: bytes, source: str = "head") -> ProbeHead:
    if len(data) < _HEAD_PREFIX.size:
        raise ArtifactError(f"{source}: too short for a probe head")
    magic, version, classes, features = _HEAD_PREFIX.unpack_from(data)
    if magic != HEAD_MAGIC:
        raise ArtifactError(f"{source}: not a probe head (magic {magic!r})")
    if version != HEAD_VERSION:
        raise ArtifactError(f"{source}: unsupported probe head version {version}")
    expected = _HEAD_PREFIX.size + 8 * classes * (features + 1)
    if len(data) != expected:
        raise ArtifactError(f"{source}: expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEAD_PREFIX.size)
    weights = values[: classes * features].reshape(classes, features)
    return ProbeHead(weights, values[classes * features :])


def save_head(head: ProbeHead, path: PathLike) -> None:
    write_bytes(path, encode_head(head))


def load_head(path: PathLike) -> ProbeHead:
    p = pathlib.Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ArtifactError(f"{p}: cannot read probe head: {exc}") from None
    return decode_head(data, str(p))
