"""A small deterministic MLP classifier and a synthetic image task.

The model exists so the analysis pipeline can be exercised end to end
without any deep-learning framework: flattened, per-channel standardized
pixels through zero or more ReLU hidden layers into a softmax classifier,
trained with plain mini-batch SGD plus L2 weight decay (no momentum, no
schedule).  Everything random (weight init, label noise, batch order) comes
from one PCG64 stream seeded by ``init_seed``, so training twice with the
same config and data reproduces parameters bit for bit.

The synthetic task renders 32x32 RGB images of three shape classes (disk,
square, triangle) with randomized position, size, colors, and pixel noise;
it is easy enough for a small MLP to learn and hard enough that capacity,
training length, and label noise spread a cohort's accuracies apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, ShapeMismatch

_STD_FLOOR = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and training hyperparameters; fully determines training
    together with the dataset."""

    model_id: str
    hidden_widths: tuple[int, ...] = (32,)
    epochs: int = 10
    learning_rate: float = 0.05
    weight_decay: float = 1e-4
    batch_size: int = 32
    init_seed: int = 0
    label_noise: float = 0.0

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 <= self.label_noise <= 1.0):
            raise ValueError("label_noise must lie in [0, 1]")


@dataclass
class TrainedModel:
    config: ModelConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    channel_mean: np.ndarray
    channel_std: np.ndarray
    input_shape: tuple[int, int, int]
    n_classes: int
    train_accuracy: float


def _check_images(images: np.ndarray) -> None:
    if not isinstance(images, np.ndarray) or images.dtype != np.uint8 \
            or images.ndim != 4 or images.shape[3] not in (1, 3):
        raise ShapeMismatch(f"images must be (n, H, W, C) uint8 with C in "
                            f"{{1, 3}}, got "
                            f"{getattr(images, 'shape', None)}")
    if images.shape[0] == 0:
        raise EmptyDataset("no images")


def _standardize(images: np.ndarray, mean: np.ndarray,
                 std: np.ndarray) -> np.ndarray:
    scaled = images.astype(np.float64) / 255.0
    return ((scaled - mean) / std).reshape(images.shape[0], -1)


def init_parameters(config: ModelConfig, input_dim: int, n_classes: int,
                    rng: np.random.Generator
                    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """He-normal hidden weights, 1/sqrt(fan_in)-scaled output weights, zero
    biases, drawn in layer order from ``rng``."""
    dims = [input_dim, *config.hidden_widths, n_classes]
    weights = []
    biases = []
    for layer in range(len(dims) - 1):
        fan_in, fan_out = dims[layer], dims[layer + 1]
        last = layer == len(dims) - 2
        scale = (1.0 / fan_in) ** 0.5 if last else (2.0 / fan_in) ** 0.5
        weights.append(rng.standard_normal((fan_in, fan_out)) * scale)
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return weights, biases


def _forward(x: np.ndarray, weights, biases) -> list[np.ndarray]:
    """Return per-layer activations; the last entry holds the logits."""
    activations = [x]
    for layer, (w, b) in enumerate(zip(weights, biases)):
        z = activations[-1] @ w + b
        if layer < len(weights) - 1:
            z = np.maximum(z, 0.0)
        activations.append(z)
    return activations


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def train(config: ModelConfig, images: np.ndarray,
          labels: np.ndarray) -> TrainedModel:
    """Train on uint8 images with integer labels 0..K-1.

    Randomness order within the single init_seed stream: weight init, then
    the label-noise mask and replacement labels, then one permutation per
    epoch.  Weight decay is applied to weights only, not biases.  The
    reported train_accuracy is measured against the labels actually used
    for training (noisy ones included).
    """
    _check_images(images)
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != images.shape[0]:
        raise ShapeMismatch(f"labels shape {y.shape} does not match "
                            f"{images.shape[0]} images")
    y = y.astype(np.int64)
    if y.min() < 0:
        raise ShapeMismatch("labels must be >= 0")
    n_classes = int(y.max()) + 1
    if n_classes < 2:
        n_classes = 2

    scaled = images.astype(np.float64) / 255.0
    mean = scaled.mean(axis=(0, 1, 2))
    std = np.maximum(scaled.std(axis=(0, 1, 2)), _STD_FLOOR)
    x = _standardize(images, mean, std)
    n, input_dim = x.shape

    rng = np.random.Generator(np.random.PCG64(config.init_seed))
    weights, biases = init_parameters(config, input_dim, n_classes, rng)

    if config.label_noise > 0.0:
        flip = rng.random(n) < config.label_noise
        offsets = rng.integers(1, n_classes, size=n)
        y = np.where(flip, (y + offsets) % n_classes, y)

    lr = config.learning_rate
    decay = config.weight_decay
    for _epoch in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            acts = _forward(x[batch], weights, biases)
            probs = _softmax(acts[-1])
            grad = probs
            grad[np.arange(batch.size), y[batch]] -= 1.0
            grad /= batch.size
            for layer in range(len(weights) - 1, -1, -1):
                g_w = acts[layer].T @ grad
                g_b = grad.sum(axis=0)
                if layer > 0:
                    grad = (grad @ weights[layer].T) * (acts[layer] > 0.0)
                weights[layer] -= lr * (g_w + decay * weights[layer])
                biases[layer] -= lr * g_b

    logits = _forward(x, weights, biases)[-1]
    train_acc = float(np.mean(np.argmax(logits, axis=1) == y))
    return TrainedModel(config=config, weights=weights, biases=biases,
                        channel_mean=mean, channel_std=std,
                        input_shape=images.shape[1:], n_classes=n_classes,
                        train_accuracy=train_acc)


def _batch_for(model: TrainedModel, images: np.ndarray) -> np.ndarray:
    _check_images(images)
    if images.shape[1:] != model.input_shape:
        raise ShapeMismatch(f"images have shape {images.shape[1:]}, model "
                            f"expects {model.input_shape}")
    return _standardize(images, model.channel_mean, model.channel_std)


def predict_batch(model: TrainedModel, images: np.ndarray) -> np.ndarray:
    """Predicted class per image; ties break toward the lowest index."""
    x = _batch_for(model, images)
    logits = _forward(x, model.weights, model.biases)[-1]
    return np.argmax(logits, axis=1).astype(np.int64)


def logits_batch(model: TrainedModel, images: np.ndarray) -> np.ndarray:
    x = _batch_for(model, images)
    return _forward(x, model.weights, model.biases)[-1]


def predict(model: TrainedModel, image: np.ndarray) -> int:
    return int(predict_batch(model, image[None, ...])[0])


def extract_features_batch(model: TrainedModel,
                           images: np.ndarray) -> np.ndarray:
    """Activations feeding the classifier layer: the last hidden layer's
    post-ReLU output, or the standardized flattened pixels when there are
    no hidden layers."""
    x = _batch_for(model, images)
    acts = _forward(x, model.weights, model.biases)
    return acts[-2]


def extract_features(model: TrainedModel, image: np.ndarray) -> np.ndarray:
    return extract_features_batch(model, image[None, ...])[0]


# --- synthetic shapes task ---------------------------------------------------

def make_shapes_dataset(n: int, seed: int, image_size: int = 32,
                        noise_sigma: float = 12.0
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Render n images of disks, squares, and triangles (classes 0, 1, 2).

    Labels cycle 0, 1, 2, ... so classes stay balanced.  Per sample, a PCG64
    stream seeded by ``seed`` draws center, size, foreground/background
    colors, and additive Gaussian pixel noise.  Deterministic in (n, seed,
    image_size, noise_sigma).
    """
    if n < 1:
        raise EmptyDataset("n must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    side = image_size
    yy, xx = np.mgrid[0:side, 0:side]
    images = np.empty((n, side, side, 3), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    lo = side * 13 // 32
    hi = side * 19 // 32
    for i in range(n):
        cls = i % 3
        cx = rng.uniform(lo, hi)
        cy = rng.uniform(lo, hi)
        size = rng.uniform(side * 7 / 32.0, side * 12 / 32.0)
        fg = rng.integers(90, 256, size=3)
        bg = rng.integers(0, 71, size=3)
        if cls == 0:
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= size ** 2
        elif cls == 1:
            mask = np.maximum(np.abs(xx - cx), np.abs(yy - cy)) <= size * 0.9
        else:
            top = cy - size
            mask = (yy >= top) & (yy <= cy + size) & \
                   (np.abs(xx - cx) <= (yy - top) / 2.0)
        img = np.where(mask[:, :, None], fg, bg).astype(np.float64)
        img += rng.normal(0.0, noise_sigma, size=img.shape)
        images[i] = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
        labels[i] = cls
    return images, labels
