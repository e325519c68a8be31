"""Context-aware lemma classifier.

A token is encoded as (a) a max-pooled convolution over its character
sequence and (b) the pretrained embeddings of two context words on
each side; a hidden layer then classifies over the closed lemma
vocabulary seen in training.  The character path is what lets the
model lemmatize surface forms it never saw, as long as the lemma
itself occurred in training.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

MODEL_FORMAT_VERSION = 1

PAD = 0
UNK = 1


@dataclass
class AnnotatedToken:
    surface: str
    lemma: str | None = None

    def __post_init__(self):
        import unicodedata

        self.surface = unicodedata.normalize("NFC", self.surface)
        if self.lemma is not None:
            self.lemma = unicodedata.normalize("NFC", self.lemma)


@dataclass
class LemmatizerConfig:
    char_dim: int = 16
    conv_window: int = 3
    n_filters: int = 64
    hidden: int = 128
    context: int = 2  # words on each side
    max_chars: int = 20
    epochs: int = 100
    lr: float = 0.1
    seed: int = 0


@dataclass
class LemmaEvalReport:
    accuracy_all: float
    accuracy_known: float | None
    accuracy_unknown: float | None
    n_known: int
    n_unknown: int

    @property
    def n_total(self) -> int:
        return self.n_known + self.n_unknown


def _char_ids(surface: str, char_index: dict[str, int], max_chars: int) -> np.ndarray:
    ids = [char_index.get(c, UNK) for c in surface]
    if len(ids) > max_chars:
        half = max_chars // 2
        ids = ids[:half] + ids[-(max_chars - half):]  # keep both word edges
    ids = ids + [PAD] * (max_chars - len(ids))
    return np.array(ids, dtype=np.int64)


class LemmatizerModel:
    """Weights plus vocabularies; see ``train_lemmatizer`` to build one."""

    def __init__(
        self,
        lemma_vocab: list[str],
        char_index: dict[str, int],
        config: LemmatizerConfig,
        params: dict[str, np.ndarray],
        context_vectors: dict[str, np.ndarray],
        context_dim: int,
        epoch_trained: int = 0,
        dev_accuracy: float = float("nan"),
    ):
        self.lemma_vocab = lemma_vocab
        self.char_index = char_index
        self.config = config
        self.params = params
        self.context_vectors = context_vectors
        self.context_dim = context_dim
        self.epoch_trained = epoch_trained
        self.dev_accuracy = dev_accuracy

    # -- encoding -----------------------------------------------------
    def _context_vec(self, corpus: list[AnnotatedToken], i: int) -> np.ndarray:
        cfg = self.config
        slots = []
        for offset in range(-cfg.context, cfg.context + 1):
            if offset == 0:
                continue
            j = i + offset
            if 0 <= j < len(corpus):
                vec = self.context_vectors.get(corpus[j].surface)
            else:
                vec = None  # document boundary
            slots.append(vec if vec is not None else np.zeros(self.context_dim))
        return np.concatenate(slots)

    def _char_windows(self, surface: str) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.config
        ids = _char_ids(surface, self.char_index, cfg.max_chars)
        E = self.params["E"]
        embedded = E[ids]  # max_chars x char_dim
        P = cfg.max_chars - cfg.conv_window + 1
        windows = np.stack(
            [embedded[p : p + cfg.conv_window].ravel() for p in range(P)]
        )
        return ids, windows

    def encode_token(self, corpus: list[AnnotatedToken], i: int) -> np.ndarray:
        """Feature vector: pooled character convolution + context slots."""
        _, windows = self._char_windows(corpus[i].surface)
        conv = np.tanh(windows @ self.params["W_conv"] + self.params["b_conv"])
        pooled = conv.max(axis=0)
        return np.concatenate([pooled, self._context_vec(corpus, i)])

    # -- forward ------------------------------------------------------
    def _forward(self, corpus, i, want_cache=False):
        p = self.params
        ids, windows = self._char_windows(corpus[i].surface)
        pre_conv = windows @ p["W_conv"] + p["b_conv"]
        conv = np.tanh(pre_conv)
        arg = conv.argmax(axis=0)
        pooled = conv[arg, np.arange(conv.shape[1])]
        feature = np.concatenate([pooled, self._context_vec(corpus, i)])
        h = np.tanh(feature @ p["W1"] + p["b1"])
        logits = h @ p["W2"] + p["b2"]
        if not want_cache:
            return logits
        return logits, {
            "ids": ids,
            "windows": windows,
            "conv": conv,
            "arg": arg,
            "feature": feature,
            "h": h,
        }

    def predict_proba(self, corpus: list[AnnotatedToken], i: int) -> np.ndarray:
        logits = self._forward(corpus, i)
        shifted = logits - logits.max()
        probs = np.exp(shifted)
        return probs / probs.sum()

    def predict(self, corpus: list[AnnotatedToken], i: int) -> tuple[str, float]:
        """Most probable lemma and its probability.

        The vocabulary is sorted, so argmax ties resolve to the
        lexicographically smaller lemma.
        """
        probs = self.predict_proba(corpus, i)
        best = int(np.argmax(probs))
        return self.lemma_vocab[best], float(probs[best])

    # -- persistence ----------------------------------------------------
    def save(self, path: str | Path) -> None:
        meta = {
            "format_version": MODEL_FORMAT_VERSION,
            "lemma_vocab": self.lemma_vocab,
            "char_index": self.char_index,
            "config": self.config.__dict__,
            "context_dim": self.context_dim,
            "context_words": list(self.context_vectors),
            "epoch_trained": self.epoch_trained,
            "dev_accuracy": self.dev_accuracy,
        }
        arrays = dict(self.params)
        if self.context_vectors:
            arrays["context_matrix"] = np.stack(list(self.context_vectors.values()))
        buf = io.BytesIO()
        np.savez(
            buf,
            meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
            **arrays,
        )
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "LemmatizerModel":
        with np.load(Path(path), allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            if meta.get("format_version") != MODEL_FORMAT_VERSION:
                raise ValueError(f"unsupported model format {meta.get('format_version')}")
            params = {
                k: data[k] for k in data.files if k not in ("meta", "context_matrix")
            }
            context = {}
            if "context_matrix" in data.files:
                matrix = data["context_matrix"]
                context = {w: matrix[i] for i, w in enumerate(meta["context_words"])}
        return cls(
            lemma_vocab=meta["lemma_vocab"],
            char_index=meta["char_index"],
            config=LemmatizerConfig(**meta["config"]),
            params=params,
            context_vectors=context,
            context_dim=meta["context_dim"],
            epoch_trained=meta["epoch_trained"],
            dev_accuracy=meta["dev_accuracy"],
        )


def _init_model(
    corpus: list[AnnotatedToken],
    train_idx: list[int],
    embeddings,
    config: LemmatizerConfig,
) -> LemmatizerModel:
    lemmas = sorted({corpus[i].lemma for i in train_idx})
    chars = sorted({c for i in train_idx for c in corpus[i].surface})
    char_index = {c: k + 2 for k, c in enumerate(chars)}  # 0 pad, 1 unknown
    rng = np.random.default_rng(config.seed)
    in_conv = config.conv_window * config.char_dim
    context_dim = embeddings.dim if embeddings is not None else 8
    feat = config.n_filters + 2 * config.context * context_dim

    def glorot(shape):
        limit = np.sqrt(6.0 / sum(shape))
        return rng.uniform(-limit, limit, size=shape)

    params = {
        "E": rng.normal(scale=0.1, size=(len(chars) + 2, config.char_dim)),
        "W_conv": glorot((in_conv, config.n_filters)),
        "b_conv": np.zeros(config.n_filters),
        "W1": glorot((feat, config.hidden)),
        "b1": np.zeros(config.hidden),
        "W2": glorot((config.hidden, len(lemmas))),
        "b2": np.zeros(len(lemmas)),
    }
    params["E"][PAD] = 0.0
    context_vectors = {}
    if embeddings is not None:
        context_vectors = {
            w: embeddings.vectors[i].astype(np.float64)
            for w, i in embeddings.vocab.index.items()
        }
    return LemmatizerModel(
        lemma_vocab=lemmas,
        char_index=char_index,
        config=config,
        params=params,
        context_vectors=context_vectors,
        context_dim=context_dim,
    )


def loss_and_grads(
    model: LemmatizerModel, corpus: list[AnnotatedToken], i: int, target: int
) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy of one example with exact gradients for all weights."""
    p = model.params
    cfg = model.config
    logits, cache = model._forward(corpus, i, want_cache=True)
    shifted = logits - logits.max()
    probs = np.exp(shifted)
    probs /= probs.sum()
    loss = -float(np.log(probs[target]))

    dlogits = probs.copy()
    dlogits[target] -= 1.0
    grads = {
        "W2": np.outer(cache["h"], dlogits),
        "b2": dlogits,
    }
    dh = p["W2"] @ dlogits
    dpre1 = dh * (1.0 - cache["h"] ** 2)
    grads["W1"] = np.outer(cache["feature"], dpre1)
    grads["b1"] = dpre1
    dfeature = p["W1"] @ dpre1

    dpooled = dfeature[: cfg.n_filters]
    conv, arg = cache["conv"], cache["arg"]
    dpre_conv = np.zeros_like(conv)
    cols = np.arange(conv.shape[1])
    dpre_conv[arg, cols] = dpooled * (1.0 - conv[arg, cols] ** 2)
    grads["W_conv"] = cache["windows"].T @ dpre_conv
    grads["b_conv"] = dpre_conv.sum(axis=0)

    dwindows = dpre_conv @ p["W_conv"].T
    dE = np.zeros_like(p["E"])
    ids = cache["ids"]
    for pos in range(dwindows.shape[0]):
        win = dwindows[pos].reshape(cfg.conv_window, cfg.char_dim)
        for offset in range(cfg.conv_window):
            dE[ids[pos + offset]] += win[offset]
    dE[PAD] = 0.0  # padding embedding pinned at zero
    grads["E"] = dE
    return loss, grads


@dataclass
class LemmatizerRun:
    history: list[tuple[int, float, float]] = field(default_factory=list)
    # (epoch, train_loss, dev_accuracy)


def train_lemmatizer(
    corpus: list[AnnotatedToken],
    train_idx: list[int],
    dev_idx: list[int],
    embeddings=None,
    config: LemmatizerConfig | None = None,
    progress=None,
) -> tuple[LemmatizerModel, LemmatizerRun]:
    """Epoch-wise SGD; the checkpoint with the best dev accuracy wins.

    The training shuffle is owned here (seeded), so ingestion order of
    the corpus files cannot change the result.
    """
    config = config or LemmatizerConfig()
    train_idx = list(train_idx)
    dev_idx = list(dev_idx)
    if not train_idx:
        raise ValueError("no training tokens")
    if not dev_idx:
        raise ValueError("empty dev set: model selection is impossible")
    for i in train_idx + dev_idx:
        if corpus[i].lemma is None:
            raise ValueError(f"token {i} ({corpus[i].surface!r}) lacks a gold lemma")

    model = _init_model(corpus, train_idx, embeddings, config)
    lemma_to_id = {l: k for k, l in enumerate(model.lemma_vocab)}
    rng = np.random.default_rng(config.seed)
    run = LemmatizerRun()
    best: tuple[float, dict, int] | None = None
    order = np.array(sorted(train_idx))
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        total = 0.0
        for i in order:
            target = lemma_to_id[corpus[i].lemma]
            loss, grads = loss_and_grads(model, corpus, int(i), target)
            total += loss
            for name, grad in grads.items():
                model.params[name] -= config.lr * grad
        dev_acc = _accuracy(model, corpus, dev_idx)
        run.history.append((epoch, total / len(order), dev_acc))
        if progress is not None:
            progress(run.history[-1])
        if best is None or dev_acc > best[0]:
            best = (dev_acc, {k: v.copy() for k, v in model.params.items()}, epoch)
    model.params = best[1]
    model.epoch_trained = best[2]
    model.dev_accuracy = best[0]
    return model, run


def _accuracy(model: LemmatizerModel, corpus, indices) -> float:
    if not len(indices):
        return float("nan")
    hits = sum(
        1 for i in indices if model.predict(corpus, int(i))[0] == corpus[int(i)].lemma
    )
    return hits / len(indices)


def evaluate(
    model: LemmatizerModel,
    corpus: list[AnnotatedToken],
    test_idx: list[int],
    train_surface_set: set[str],
) -> LemmaEvalReport:
    """Accuracy split into known and unknown surface forms.

    A form is known iff its surface occurred in training, regardless
    of whether its lemma did.  Empty buckets report None.
    """
    test_idx = list(test_idx)
    if not test_idx:
        raise ValueError("empty test set")
    known_hits = known_n = unk_hits = unk_n = 0
    for i in test_idx:
        token = corpus[int(i)]
        correct = model.predict(corpus, int(i))[0] == token.lemma
        if token.surface in train_surface_set:
            known_n += 1
            known_hits += int(correct)
        else:
            unk_n += 1
            unk_hits += int(correct)
    accuracy_all = (known_hits + unk_hits) / (known_n + unk_n)
    return LemmaEvalReport(
        accuracy_all=accuracy_all,
        accuracy_known=known_hits / known_n if known_n else None,
        accuracy_unknown=unk_hits / unk_n if unk_n else None,
        n_known=known_n,
        n_unknown=unk_n,
    )


def majority_baseline(corpus, train_idx, eval_idx) -> float:
    """Accuracy of always guessing the most frequent training lemma."""
    from collections import Counter

    counts = Counter(corpus[int(i)].lemma for i in train_idx)
    top = max(sorted(counts), key=lambda l: counts[l])
    hits = sum(1 for i in eval_idx if corpus[int(i)].lemma == top)
    return hits / len(list(eval_idx))


class NeuralLemmatizer(BaseEstimator):
    """Estimator facade: fit over corpus indices, predict in context."""

    def __init__(
        self,
        char_dim: int = 16,
        conv_window: int = 3,
        n_filters: int = 64,
        hidden: int = 128,
        context: int = 2,
        max_chars: int = 20,
        epochs: int = 100,
        lr: float = 0.1,
        seed: int = 0,
    ):
        self.char_dim = char_dim
        self.conv_window = conv_window
        self.n_filters = n_filters
        self.hidden = hidden
        self.context = context
        self.max_chars = max_chars
        self.epochs = epochs
        self.lr = lr
        self.seed = seed

    def _config(self) -> LemmatizerConfig:
        return LemmatizerConfig(
            char_dim=self.char_dim,
            conv_window=self.conv_window,
            n_filters=self.n_filters,
            hidden=self.hidden,
            context=self.context,
            max_chars=self.max_chars,
            epochs=self.epochs,
            lr=self.lr,
            seed=self.seed,
        )

    def fit(self, corpus, train_idx, dev_idx, embeddings=None):
        self.model_, self.run_ = train_lemmatizer(
            corpus, train_idx, dev_idx, embeddings, self._config()
        )
        self.train_surfaces_ = {corpus[int(i)].surface for i in train_idx}
        return self

    def predict(self, corpus, indices) -> list[str]:
        return [self.model_.predict(corpus, int(i))[0] for i in indices]

    def score(self, corpus, indices) -> float:
        return _accuracy(self.model_, corpus, list(indices))
