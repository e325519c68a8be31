"""Skipgram word embeddings with negative sampling, plus analysis tools.

Trained on an unannotated token corpus to give the lemmatizer a
semantic representation of word context.  Deliberately single-threaded
and seed-driven: identical inputs reproduce identical vectors.  The
analysis side offers cosine neighbour queries, bottom-up Ward
clustering and a 2-D principal-component projection with an SVG
scatter for eyeballing the space.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit as sigmoid
from sklearn.base import BaseEstimator

MAGIC = b"SCRIPTORIUM-EMB1\n"


@dataclass
class Vocab:
    words: list[str]
    counts: dict[str, int]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index


def _sentences(corpus) -> list[list[str]]:
    if not corpus:
        return []
    if isinstance(corpus[0], str):
        return [list(corpus)]
    return [list(s) for s in corpus]


def build_vocab(corpus, min_count: int = 5) -> Vocab:
    """Count words and keep those at or above ``min_count``.

    Order is deterministic: by count descending, then alphabetically.
    """
    counts = Counter()
    for sentence in _sentences(corpus):
        counts.update(sentence)
    if not counts:
        raise ValueError("empty corpus")
    kept = [(w, c) for w, c in counts.items() if c >= min_count]
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    return Vocab(words=[w for w, _ in kept], counts={w: c for w, c in kept})


def sgns_pair_loss(
    center: np.ndarray, context: np.ndarray, negatives: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Logistic loss of one (center, context, negatives) triple.

    loss = -log sigma(u.v) - sum_n log sigma(-u_n.v); the returned
    gradients are exact, which the finite-difference tests rely on.
    """
    pos_score = float(context @ center)
    neg_scores = negatives @ center
    loss = -np.log(sigmoid(pos_score)) - np.log(sigmoid(-neg_scores)).sum()
    dpos = sigmoid(pos_score) - 1.0  # d loss / d pos_score
    dnegs = sigmoid(neg_scores)  # d loss / d neg_scores
    grad_center = dpos * context + dnegs @ negatives
    grad_context = dpos * center
    grad_negatives = np.outer(dnegs, center)
    return float(loss), grad_center, grad_context, grad_negatives


class EmbeddingTable:
    """Vocabulary plus one dense vector per word."""

    def __init__(self, vocab: Vocab, vectors: np.ndarray, meta: dict | None = None):
        if len(vocab) != vectors.shape[0]:
            raise ValueError("vocab size and vector count differ")
        if not np.isfinite(vectors).all():
            raise ValueError("vectors must be finite")
        self.vocab = vocab
        self.vectors = np.asarray(vectors, dtype=np.float32)
        self.meta = meta or {}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, word):
        return word in self.vocab

    def vector(self, word: str) -> np.ndarray:
        if word not in self.vocab:
            raise KeyError(f"word {word!r} not in vocabulary")
        return self.vectors[self.vocab.index[word]]

    def nearest(self, word: str, k: int = 10) -> list[tuple[str, float]]:
        """k most cosine-similar words, the query itself excluded."""
        v = self.vector(word).astype(np.float64)
        mat = self.vectors.astype(np.float64)
        norms = np.linalg.norm(mat, axis=1) * (np.linalg.norm(v) or 1.0)
        norms[norms == 0] = 1.0
        sims = (mat @ v) / norms
        order = [
            i
            for i in np.argsort(-sims, kind="stable")
            if self.vocab.words[i] != word
        ]
        return [(self.vocab.words[i], float(sims[i])) for i in order[:k]]

    def save(self, path: str | Path) -> None:
        """Binary layout: magic, "|V| dim" line, vocab lines, float32 LE matrix."""
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(f"{len(self.vocab)} {self.dim}\n".encode("utf-8"))
            for word in self.vocab.words:
                fh.write(word.encode("utf-8") + b"\n")
            fh.write(self.vectors.astype("<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        data = Path(path).read_bytes()
        if not data.startswith(MAGIC):
            raise ValueError("not an embedding table file")
        pos = len(MAGIC)
        end = data.index(b"\n", pos)
        n, dim = (int(x) for x in data[pos:end].split())
        pos = end + 1
        words = []
        for _ in range(n):
            end = data.index(b"\n", pos)
            words.append(data[pos:end].decode("utf-8"))
            pos = end + 1
        vectors = np.frombuffer(data[pos:], dtype="<f4").reshape(n, dim).copy()
        counts = {w: 1 for w in words}
        return cls(Vocab(words=words, counts=counts), vectors)


class SkipgramEmbeddings(BaseEstimator):
    """Skipgram-with-negative-sampling trainer.

    ``fit`` accepts a token list or a list of token lists (context
    windows never cross sentence boundaries) and exposes the result as
    ``table_``.
    """

    def __init__(
        self,
        dim: int = 100,
        window: int = 5,
        negatives: int = 5,
        epochs: int = 5,
        lr: float = 0.025,
        min_lr: float = 0.0001,
        min_count: int = 5,
        seed: int = 0,
    ):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.lr = lr
        self.min_lr = min_lr
        self.min_count = min_count
        self.seed = seed

    def fit(self, corpus):
        if self.dim <= 0:
            raise ValueError("embedding dimension must be positive")
        vocab = build_vocab(corpus, self.min_count)
        sentences = [
            [vocab.index[w] for w in sentence if w in vocab]
            for sentence in _sentences(corpus)
        ]
        sentences = [s for s in sentences if len(s) >= 2]
        rng = np.random.default_rng(self.seed)
        V = len(vocab)
        W_in = (rng.random((V, self.dim)) - 0.5) / self.dim
        W_out = np.zeros((V, self.dim))

        counts = np.array([vocab.counts[w] for w in vocab.words], dtype=np.float64)
        noise = counts**0.75
        noise /= noise.sum()

        pairs = [
            (s_idx, i)
            for s_idx, sentence in enumerate(sentences)
            for i in range(len(sentence))
        ]
        total_steps = max(1, self.epochs * len(pairs))
        step = 0
        losses: list[float] = []
        for _epoch in range(self.epochs):
            for s_idx, i in pairs:
                sentence = sentences[s_idx]
                center = sentence[i]
                lo = max(0, i - self.window)
                hi = min(len(sentence), i + self.window + 1)
                lr = max(self.min_lr, self.lr * (1.0 - step / total_steps))
                for j in range(lo, hi):
                    if j == i:
                        continue
                    context = sentence[j]
                    neg_idx = rng.choice(V, size=self.negatives, p=noise)
                    v = W_in[center]
                    loss, gv, gc, gn = sgns_pair_loss(v, W_out[context], W_out[neg_idx])
                    losses.append(loss)
                    W_out[context] -= lr * gc
                    # duplicate negative draws accumulate properly
                    np.add.at(W_out, neg_idx, -lr * gn)
                    W_in[center] = v - lr * gv
                step += 1
        self.loss_curve_ = losses
        self.table_ = EmbeddingTable(
            vocab,
            W_in,
            meta={
                "dim": self.dim,
                "window": self.window,
                "negatives": self.negatives,
                "epochs": self.epochs,
                "seed": self.seed,
            },
        )
        return self

    def transform(self, words) -> np.ndarray:
        return np.stack([self.table_.vector(w) for w in words])


# ---------------------------------------------------------------------------
# Ward clustering


def ward_merge_sequence(points: np.ndarray) -> list[tuple[int, int, float]]:
    """Bottom-up merge order under Ward's criterion.

    Clusters are numbered by creation order (originals 0..n-1, merges
    n, n+1, ...).  Distances follow the Lance-Williams update on
    squared Euclidean distances; ties pick the smallest (i, j) creation
    pair.  The merged cluster reuses the slot of its first member, so
    memory stays O(n^2) for the whole sequence.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    sq = (points**2).sum(axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    np.clip(D, 0.0, None, out=D)
    np.fill_diagonal(D, np.inf)
    active = np.ones(n, dtype=bool)
    slot_id = np.arange(n)  # creation id living in each slot
    sizes = np.ones(n)
    merges: list[tuple[int, int, float]] = []
    next_id = n
    for _ in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], D, np.inf)
        best = masked.min()
        rows, cols = np.nonzero(masked == best)
        pairs = sorted(
            (min(slot_id[r], slot_id[c]), max(slot_id[r], slot_id[c]), r, c)
            for r, c in zip(rows, cols)
        )
        cid_i, cid_j, r, c = pairs[0]
        if slot_id[r] != cid_i:
            r, c = c, r
        merges.append((cid_i, cid_j, float(best)))
        ni, nj = sizes[r], sizes[c]
        nk = sizes
        # Lance-Williams update for Ward, written over slot r
        merged = ((ni + nk) * D[r] + (nj + nk) * D[c] - nk * best) / (ni + nj + nk)
        D[r] = merged
        D[:, r] = merged
        D[r, r] = np.inf
        active[c] = False
        sizes[r] = ni + nj
        slot_id[r] = next_id
        next_id += 1
    return merges


def cluster_ward(table_or_matrix, n_clusters: int) -> dict | np.ndarray:
    """Cut the Ward merge tree at ``n_clusters`` groups.

    Accepts an EmbeddingTable (returns word -> label) or a raw matrix
    (returns an integer label array).  Deterministic throughout.
    """
    if isinstance(table_or_matrix, EmbeddingTable):
        matrix = table_or_matrix.vectors.astype(np.float64)
        words = table_or_matrix.vocab.words
    else:
        matrix = np.asarray(table_or_matrix, dtype=np.float64)
        words = None
    n = len(matrix)
    if n_clusters > n:
        raise ValueError(f"cannot make {n_clusters} clusters from {n} points")
    merges = ward_merge_sequence(matrix)
    members = {i: [i] for i in range(n)}
    next_id = n
    for i, j, _ in merges[: n - n_clusters]:
        members[next_id] = members.pop(i) + members.pop(j)
        next_id += 1
    labels = np.zeros(n, dtype=int)
    for label, cid in enumerate(sorted(members, key=lambda c: min(members[c]))):
        for point in members[cid]:
            labels[point] = label
    if words is None:
        return labels
    return {w: int(labels[i]) for i, w in enumerate(words)}


# ---------------------------------------------------------------------------
# 2-D projection


def project_2d(table_or_matrix) -> dict | np.ndarray:
    """Centered projection onto the top-2 principal components.

    Sign convention: each axis is flipped so its largest-magnitude
    coordinate is positive.  Rank-deficient data degrades gracefully
    (missing components produce a zero coordinate).
    """
    if isinstance(table_or_matrix, EmbeddingTable):
        matrix = table_or_matrix.vectors.astype(np.float64)
        words = table_or_matrix.vocab.words
    else:
        matrix = np.asarray(table_or_matrix, dtype=np.float64)
        words = None
    if len(matrix) < 2:
        raise ValueError("need at least two points to project")
    centered = matrix - matrix.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    coords = np.zeros((len(matrix), 2))
    for axis in range(min(2, vt.shape[0])):
        if singular[axis] <= 1e-12:
            continue
        proj = centered @ vt[axis]
        peak = np.argmax(np.abs(proj))
        if proj[peak] < 0:
            proj = -proj
        coords[:, axis] = proj
    if words is None:
        return coords
    return {w: (float(coords[i, 0]), float(coords[i, 1])) for i, w in enumerate(words)}


_SVG_COLORS = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]


def scatter_svg(
    points: dict[str, tuple[float, float]],
    clusters: dict[str, int] | None = None,
    size: int = 720,
    label_limit: int = 200,
) -> str:
    """Hand-rolled SVG scatter of a 2-D projection, colored by cluster."""
    if not points:
        raise ValueError("no points to plot")
    xs = np.array([p[0] for p in points.values()])
    ys = np.array([p[1] for p in points.values()])
    span = max(xs.max() - xs.min(), ys.max() - ys.min(), 1e-9)
    pad = 40

    def sx(x):
        return pad + (x - xs.min()) / span * (size - 2 * pad)

    def sy(y):
        return size - pad - (y - ys.min()) / span * (size - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for i, (word, (x, y)) in enumerate(sorted(points.items())):
        color = _SVG_COLORS[(clusters or {}).get(word, 0) % len(_SVG_COLORS)]
        parts.append(
            f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>'
        )
        if i < label_limit:
            label = word.replace("&", "&amp;").replace("<", "&lt;")
            parts.append(
                f'<text x="{sx(x) + 4:.1f}" y="{sy(y) - 4:.1f}" font-size="9" '
                f'fill="#333">{label}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts)
