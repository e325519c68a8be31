"""Line recognizer: normalization, model container, training, decoding.

Training is plain stochastic gradient descent with momentum, one line
per iteration, deterministic for a fixed seed.  Checkpoints are taken
every ``checkpoint_interval`` iterations and never deleted; picking the
best one is the evaluator's job.
"""

from __future__ import annotations

import copy
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ..evaluation import evaluate_pairs
from ..inventory import CharacterInventory, UnknownSymbolError
from . import ctc, network

MODEL_FORMAT_VERSION = 1

#: Normalized ink level below which a line counts as blank.
INK_THRESHOLD = 0.02


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel centers, edges clamped."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bottom = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def normalize_line(img: np.ndarray, target_height: int = 48) -> np.ndarray:
    """Gray line image -> frame matrix (width' x target_height) in [0,1].

    Ink maps to ~1 and background to ~0 relative to a smoothed
    per-column background estimate, so uneven illumination (binding
    shadows, faded edges) does not read as ink; a blank or uniform
    line comes out all zeros.  Aspect ratio is preserved; each row of
    the result is one input frame (one pixel column of the rescaled
    image).
    """
    img = np.asarray(img)
    if img.size == 0:
        raise ValueError("empty line image")
    f = img.astype(np.float64)
    background = np.percentile(f, 90, axis=0)
    if f.shape[1] > 1:
        from scipy.ndimage import uniform_filter1d

        background = uniform_filter1d(background, size=min(31, f.shape[1]), mode="nearest")
    background = np.maximum(background, 1.0)
    ink = np.clip(1.0 - f / background[None, :], 0.0, 1.0)
    h, w = ink.shape
    out_w = max(1, round(w * target_height / h))
    scaled = bilinear_resize(ink, target_height, out_w)
    return np.clip(scaled, 0.0, 1.0).T.copy()


@dataclass
class RecognizerModel:
    """Trained weights plus everything needed to run them on a line."""

    inventory: CharacterInventory
    input_height: int
    hidden_size: int
    params: dict[str, np.ndarray]
    checkpoint_iter: int = 0
    dev_cer: float = float("nan")

    def n_classes(self) -> int:
        return len(self.inventory) + 1

    def forward(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.input_height:
            raise ValueError(
                f"expected frames of height {self.input_height}, got {matrix.shape}"
            )
        return network.forward(self.params, matrix)

    def transcribe(self, img: np.ndarray) -> str:
        return self.recognize(img)[0]

    def recognize(self, img: np.ndarray) -> tuple[str, float]:
        matrix = normalize_line(img, self.input_height)
        if matrix.max() < INK_THRESHOLD:  # nothing to read on a blank line
            return "", 1.0
        logits = self.forward(matrix)
        return ctc.decode_greedy(logits, self.inventory), ctc.frame_confidence(logits)

    def copy(self) -> "RecognizerModel":
        return RecognizerModel(
            inventory=self.inventory,
            input_height=self.input_height,
            hidden_size=self.hidden_size,
            params={k: v.copy() for k, v in self.params.items()},
            checkpoint_iter=self.checkpoint_iter,
            dev_cer=self.dev_cer,
        )

    def save(self, path: str | Path) -> None:
        meta = {
            "format_version": MODEL_FORMAT_VERSION,
            "symbols": self.inventory.symbols,
            "input_height": self.input_height,
            "hidden_size": self.hidden_size,
            "checkpoint_iter": self.checkpoint_iter,
            "dev_cer": self.dev_cer,
        }
        buf = io.BytesIO()
        np.savez(buf, meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **self.params)
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "RecognizerModel":
        with np.load(Path(path), allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            if meta.get("format_version") != MODEL_FORMAT_VERSION:
                raise ValueError(f"unsupported model format {meta.get('format_version')}")
            params = {k: data[k] for k in data.files if k != "meta"}
        return cls(
            inventory=CharacterInventory(meta["symbols"]),
            input_height=meta["input_height"],
            hidden_size=meta["hidden_size"],
            params=params,
            checkpoint_iter=meta["checkpoint_iter"],
            dev_cer=meta["dev_cer"],
        )


@dataclass
class TrainingConfig:
    lr: float = 1e-4
    momentum: float = 0.9
    hidden_size: int = 100
    input_height: int = 48
    max_iterations: int = 10_000
    checkpoint_interval: int = 1_000
    seed: int = 0
    clip_norm: float = 10.0  # global gradient-norm cap; keeps high lr stable
    train_eval_sample: int = 40  # lines sampled for the train-error curve


@dataclass(frozen=True)
class HistoryPoint:
    iteration: int
    train_error: float
    dev_cer: float
    train_error_real: float | None = None  # synthetic lines excluded


@dataclass
class TrainingRun:
    config: TrainingConfig
    history: list[HistoryPoint] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)  # per iteration


def _check_history(history: list[HistoryPoint]) -> None:
    iters = [h.iteration for h in history]
    assert iters == sorted(set(iters)), "history iterations must strictly increase"


def train(
    train_pairs: list[tuple[str, np.ndarray]],
    dev_pairs: list[tuple[str, np.ndarray]],
    config: TrainingConfig,
    inventory: CharacterInventory | None = None,
    line_ids: list[str] | None = None,
    synthetic_flags: list[bool] | None = None,
    progress=None,
) -> tuple[TrainingRun, list[tuple[int, RecognizerModel]]]:
    """SGD training over (gt_text, gray_image) pairs, one line per step.

    Every training transcription must be covered by the inventory and
    emittable within its line's frame count; offending lines are
    rejected up front with their ids.  Returns the run history and the
    full checkpoint list.
    """
    if not train_pairs:
        raise ValueError("no training lines")
    ids = line_ids or [f"line{i}" for i in range(len(train_pairs))]
    if inventory is None:
        inventory = CharacterInventory.from_texts(gt for gt, _ in train_pairs)

    encoded: list[list[int]] = []
    matrices: list[np.ndarray] = []
    for rec_id, (gt, img) in zip(ids, train_pairs):
        try:
            target = inventory.encode(gt)
        except UnknownSymbolError as exc:
            exc.args = (f"line {rec_id}: {exc.args[0]}",)
            raise
        matrix = normalize_line(img, config.input_height)
        if matrix.shape[0] < ctc.min_frames(target):
            raise ctc.InfeasibleAlignmentError(
                f"line {rec_id}: {matrix.shape[0]} frames cannot emit {len(gt)} chars"
            )
        encoded.append(target)
        matrices.append(matrix)

    rng = np.random.default_rng(config.seed)
    params = network.init_params(
        config.input_height, config.hidden_size, len(inventory) + 1, seed=config.seed
    )
    optimizer = network.MomentumSgd(config.lr, config.momentum)
    model = RecognizerModel(inventory, config.input_height, config.hidden_size, params)

    n = len(train_pairs)
    sample_size = min(config.train_eval_sample, n)
    sample_idx = sorted(rng.choice(n, size=sample_size, replace=False))
    flags = synthetic_flags or [False] * n

    run = TrainingRun(config=config)
    checkpoints: list[tuple[int, RecognizerModel]] = []
    order = np.empty(0, dtype=int)
    pos = 0
    for iteration in range(1, config.max_iterations + 1):
        if pos >= len(order):
            order = rng.permutation(n)
            pos = 0
        idx = int(order[pos])
        pos += 1
        logits, cache = network.forward(params, matrices[idx], want_cache=True)
        loss, dlogits = ctc.ctc_loss(logits, encoded[idx])
        run.losses.append(loss)
        grads = network.backward(params, cache, dlogits)
        if config.clip_norm > 0:
            total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if total > config.clip_norm:
                scale = config.clip_norm / total
                for g in grads.values():
                    g *= scale
        optimizer.step(params, grads)

        if iteration % config.checkpoint_interval == 0 or iteration == config.max_iterations:
            if checkpoints and checkpoints[-1][0] == iteration:
                continue
            snapshot = model.copy()
            snapshot.checkpoint_iter = iteration
            train_eval = [
                (train_pairs[i][0], ctc.decode_greedy(network.forward(params, matrices[i]), inventory))
                for i in sample_idx
            ]
            train_error = evaluate_pairs(train_eval).cer
            real_eval = [pair for i, pair in zip(sample_idx, train_eval) if not flags[i]]
            train_error_real = evaluate_pairs(real_eval).cer if real_eval and any(flags) else None
            dev_cer = float("nan")
            if dev_pairs:
                dev_eval = [(gt, snapshot.transcribe(img)) for gt, img in dev_pairs]
                dev_cer = evaluate_pairs(dev_eval).cer
            snapshot.dev_cer = dev_cer
            checkpoints.append((iteration, snapshot))
            run.history.append(HistoryPoint(iteration, train_error, dev_cer, train_error_real))
            if progress is not None:
                progress(run.history[-1])
    _check_history(run.history)
    return run, checkpoints


class LineRecognizer(BaseEstimator):
    """Estimator facade over the trainer: fit on (text, image) pairs.

    After ``fit`` the best checkpoint by dev CER is available as
    ``model_``, the full checkpoint list as ``checkpoints_`` and the
    training curve as ``run_``.
    """

    def __init__(
        self,
        hidden_size: int = 100,
        input_height: int = 48,
        lr: float = 1e-4,
        momentum: float = 0.9,
        max_iterations: int = 10_000,
        checkpoint_interval: int = 1_000,
        clip_norm: float = 10.0,
        seed: int = 0,
    ):
        self.hidden_size = hidden_size
        self.input_height = input_height
        self.lr = lr
        self.momentum = momentum
        self.max_iterations = max_iterations
        self.checkpoint_interval = checkpoint_interval
        self.clip_norm = clip_norm
        self.seed = seed

    def _config(self) -> TrainingConfig:
        return TrainingConfig(
            lr=self.lr,
            momentum=self.momentum,
            hidden_size=self.hidden_size,
            input_height=self.input_height,
            max_iterations=self.max_iterations,
            checkpoint_interval=self.checkpoint_interval,
            clip_norm=self.clip_norm,
            seed=self.seed,
        )

    def fit(self, train_pairs, dev_pairs, inventory=None, **kwargs):
        self.run_, self.checkpoints_ = train(
            list(train_pairs), list(dev_pairs), self._config(), inventory=inventory, **kwargs
        )
        best = min(self.checkpoints_, key=lambda c: (c[1].dev_cer, c[0]))
        self.model_ = best[1]
        return self

    def predict(self, images) -> list[str]:
        return [self.model_.transcribe(img) for img in images]

    def predict_with_confidence(self, images) -> list[tuple[str, float]]:
        return [self.model_.recognize(img) for img in images]
