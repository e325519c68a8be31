import numpy as np
import pytest

from scriptorium.embeddings import (
    EmbeddingTable,
    SkipgramEmbeddings,
    Vocab,
    build_vocab,
    cluster_ward,
    project_2d,
    scatter_svg,
    sgns_pair_loss,
    ward_merge_sequence,
)


def test_build_vocab_min_count():
    vocab = build_vocab(["a", "a", "b"], min_count=2)
    assert vocab.words == ["a"]
    assert vocab.counts == {"a": 2}


def test_build_vocab_keep_all():
    vocab = build_vocab(["b", "a", "b", "c"], min_count=1)
    assert vocab.words == ["b", "a", "c"]  # count desc, then alphabetical


def test_build_vocab_counts_conserved():
    rng = np.random.default_rng(0)
    words = [f"w{k}" for k in range(200)]
    corpus = [words[i] for i in rng.integers(0, 200, size=54600)]
    vocab = build_vocab(corpus, min_count=1)
    assert sum(vocab.counts.values()) == 54600


def test_build_vocab_empty_corpus():
    with pytest.raises(ValueError):
        build_vocab([], min_count=1)


def test_pair_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(10):
        d = 6
        center = rng.normal(size=d)
        context = rng.normal(size=d)
        negatives = rng.normal(size=(4, d))
        loss, g_c, g_ctx, g_neg = sgns_pair_loss(center, context, negatives)
        assert loss >= 0.0
        step = 1e-6

        def f(c=center, ctx=context, neg=negatives):
            return sgns_pair_loss(c, ctx, neg)[0]

        for vec, grad in ((center, g_c), (context, g_ctx)):
            fd = np.zeros_like(vec)
            for k in range(d):
                hi = vec.copy()
                hi[k] += step
                lo = vec.copy()
                lo[k] -= step
                if vec is center:
                    fd[k] = (f(c=hi) - f(c=lo)) / (2 * step)
                else:
                    fd[k] = (f(ctx=hi) - f(ctx=lo)) / (2 * step)
            denom = np.maximum(np.abs(fd), np.abs(grad))
            denom[denom < 1e-8] = 1.0
            assert (np.abs(fd - grad) / denom).max() <= 1e-4
        fd = np.zeros_like(negatives)
        for r in range(negatives.shape[0]):
            for k in range(d):
                hi = negatives.copy()
                hi[r, k] += step
                lo = negatives.copy()
                lo[r, k] -= step
                fd[r, k] = (f(neg=hi) - f(neg=lo)) / (2 * step)
        denom = np.maximum(np.abs(fd), np.abs(g_neg))
        denom[denom < 1e-8] = 1.0
        assert (np.abs(fd - g_neg) / denom).max() <= 1e-4


@pytest.fixture(scope="module")
def bigram_table():
    # long runs of the repeated bigram give a and b overlapping contexts,
    # which is what draws their vectors together
    corpus = [["a", "b"] * 20] * 10 + [["c", "d"] * 20] * 10
    est = SkipgramEmbeddings(dim=16, window=2, negatives=4, epochs=50, min_count=1, seed=1)
    est.fit(corpus)
    return est


def test_toy_bigram_nearest(bigram_table):
    table = bigram_table.table_
    assert table.nearest("a", k=1)[0][0] == "b"
    assert table.nearest("c", k=1)[0][0] == "d"


def test_training_loss_decreases(bigram_table):
    losses = np.array(bigram_table.loss_curve_)
    third = len(losses) // 3
    assert losses[-third:].mean() < losses[:third].mean()


def test_same_seed_identical_vectors():
    corpus = [["a", "b", "c"]] * 50
    t1 = SkipgramEmbeddings(dim=8, epochs=3, min_count=1, seed=7).fit(corpus).table_
    t2 = SkipgramEmbeddings(dim=8, epochs=3, min_count=1, seed=7).fit(corpus).table_
    assert np.array_equal(t1.vectors, t2.vectors)
    t3 = SkipgramEmbeddings(dim=8, epochs=3, min_count=1, seed=8).fit(corpus).table_
    assert not np.array_equal(t1.vectors, t3.vectors)


def test_bad_dim_rejected():
    with pytest.raises(ValueError):
        SkipgramEmbeddings(dim=0, min_count=1).fit(["a", "b"])


def test_nearest_properties(bigram_table):
    table = bigram_table.table_
    result = table.nearest("a", k=10)
    sims = [s for _, s in result]
    assert all(-1.0 - 1e-9 <= s <= 1.0 + 1e-9 for s in sims)
    assert sims == sorted(sims, reverse=True)
    assert "a" not in [w for w, _ in result]
    v = table.vector("a").astype(np.float64)
    self_sim = float(v @ v / (np.linalg.norm(v) ** 2))
    assert self_sim == pytest.approx(1.0)


def test_nearest_oov_raises(bigram_table):
    with pytest.raises(KeyError) as err:
        bigram_table.table_.nearest("zzz")
    assert "zzz" in str(err.value)


def test_table_save_load_round_trip(tmp_path, bigram_table):
    table = bigram_table.table_
    path = tmp_path / "emb.bin"
    table.save(path)
    loaded = EmbeddingTable.load(path)
    assert loaded.vocab.words == table.vocab.words
    assert np.array_equal(loaded.vectors, table.vectors)


# ---------------------------------------------------------------------------
# Ward clustering


def oracle_ward_sequence(points):
    # recompute the variance increase from raw points at every step;
    # scale (x2) matches the squared-distance initialization
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    clusters = {i: [i] for i in range(n)}
    next_id = n
    merges = []
    while len(clusters) > 1:
        best = None
        for i in sorted(clusters):
            for j in sorted(clusters):
                if j <= i:
                    continue
                a = points[clusters[i]].mean(axis=0)
                b = points[clusters[j]].mean(axis=0)
                na, nb = len(clusters[i]), len(clusters[j])
                delta = 2.0 * (na * nb / (na + nb)) * float(((a - b) ** 2).sum())
                if best is None or delta < best[0] - 1e-12 or (
                    abs(delta - best[0]) <= 1e-12 and (i, j) < best[1:3]
                ):
                    best = (delta, i, j)
        delta, i, j = best
        merges.append((i, j, delta))
        clusters[next_id] = clusters.pop(i) + clusters.pop(j)
        next_id += 1
    return merges


def test_ward_matches_bruteforce_oracle():
    rng = np.random.default_rng(5)
    for trial in range(10):
        n = int(rng.integers(3, 13))
        points = rng.normal(size=(n, 3))
        got = ward_merge_sequence(points)
        want = oracle_ward_sequence(points)
        assert [(i, j) for i, j, _ in got] == [(i, j) for i, j, _ in want], trial
        for (_, _, dg), (_, _, dw) in zip(got, want):
            assert dg == pytest.approx(dw, rel=1e-9, abs=1e-9)


def test_ward_two_separated_clouds():
    rng = np.random.default_rng(11)
    a = rng.normal(scale=0.2, size=(20, 4))
    b = rng.normal(scale=0.2, size=(20, 4)) + 50.0
    points = np.vstack([a, b])
    labels = cluster_ward(points, 2)
    assert len(set(labels[:20])) == 1
    assert len(set(labels[20:])) == 1
    assert labels[0] != labels[20]


def test_ward_singletons():
    points = np.arange(10, dtype=float).reshape(5, 2)
    labels = cluster_ward(points, 5)
    assert sorted(labels) == [0, 1, 2, 3, 4]


def test_ward_duplicates_merge_first():
    points = np.array([[0.0, 0.0], [5.0, 5.0], [0.0, 0.0], [9.0, 1.0]])
    merges = ward_merge_sequence(points)
    assert merges[0][:2] == (0, 2)
    assert merges[0][2] == 0.0


def test_ward_too_many_clusters():
    with pytest.raises(ValueError):
        cluster_ward(np.zeros((3, 2)), 4)


def test_ward_on_table_returns_word_labels(bigram_table):
    labels = cluster_ward(bigram_table.table_, 2)
    assert set(labels) == set("abcd")
    assert all(isinstance(v, int) for v in labels.values())


# ---------------------------------------------------------------------------
# 2-D projection


def test_project_full_rank_2d_preserves_distances():
    rng = np.random.default_rng(2)
    points = rng.normal(size=(12, 2))
    coords = project_2d(points)
    centered = points - points.mean(axis=0)
    before = np.linalg.norm(centered[:, None] - centered[None, :], axis=2)
    after = np.linalg.norm(coords[:, None] - coords[None, :], axis=2)
    assert np.allclose(before, after, atol=1e-9)


def test_project_rank1_collapses_to_line():
    direction = np.array([1.0, 2.0, -1.0])
    points = np.outer(np.arange(8, dtype=float), direction)
    coords = project_2d(points)
    assert np.allclose(coords[:, 1], 0.0, atol=1e-9)
    assert not np.allclose(coords[:, 0], 0.0)


def test_project_zero_variance_flat_layout():
    points = np.ones((5, 3))
    coords = project_2d(points)
    assert np.allclose(coords, 0.0)


def test_project_reconstruction_error_matches_eigen_oracle():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(50, 10))
    coords = project_2d(X)
    centered = X - X.mean(axis=0)
    # orthogonal projection: residual energy = total - projected
    residual = float((centered**2).sum() - (coords**2).sum())
    eigvals = np.linalg.eigvalsh(centered.T @ centered)
    dropped = float(np.sort(eigvals)[::-1][2:].sum())
    assert residual == pytest.approx(dropped, abs=1e-8)


def test_project_sign_convention_deterministic():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(20, 5))
    a = project_2d(X)
    b = project_2d(X.copy())
    assert np.array_equal(a, b)
    for axis in range(2):
        peak = np.argmax(np.abs(a[:, axis]))
        assert a[peak, axis] >= 0


def test_project_table_returns_words(bigram_table):
    points = project_2d(bigram_table.table_)
    assert set(points) == set("abcd")


def test_scatter_svg(bigram_table):
    points = project_2d(bigram_table.table_)
    clusters = cluster_ward(bigram_table.table_, 2)
    svg = scatter_svg(points, clusters)
    assert svg.startswith("<svg")
    assert svg.count("<circle") == 4
    assert "</svg>" in svg
