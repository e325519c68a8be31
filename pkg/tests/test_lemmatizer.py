import numpy as np
import pytest

from scriptorium.embeddings import SkipgramEmbeddings
from scriptorium.lemmatizer import (
    AnnotatedToken,
    LemmatizerConfig,
    LemmatizerModel,
    NeuralLemmatizer,
    evaluate,
    loss_and_grads,
    majority_baseline,
    train_lemmatizer,
)
from scriptorium.lemmatizer import _char_ids


def _corpus(pairs):
    return [AnnotatedToken(surface, lemma) for surface, lemma in pairs]


def _toy_embeddings(words, dim=8, seed=0):
    corpus = [list(words) * 4] * 5
    return SkipgramEmbeddings(dim=dim, epochs=2, min_count=1, seed=seed).fit(corpus).table_


@pytest.fixture
def tiny_model():
    corpus = _corpus([("ama", "amar"), ("amat", "amar"), ("vei", "vezer"), ("vi", "vezer")])
    table = _toy_embeddings(["ama", "amat", "vei", "vi"])
    config = LemmatizerConfig(char_dim=6, n_filters=8, hidden=10, epochs=3, seed=1)
    model, _ = train_lemmatizer(corpus, [0, 1, 2], [3], table, config)
    return corpus, table, model


def test_char_ids_pad_and_truncate():
    index = {c: i + 2 for i, c in enumerate("abcdefghijklmnopqrstuvwxyz")}
    short = _char_ids("abc", index, 20)
    assert len(short) == 20
    assert list(short[:3]) == [index["a"], index["b"], index["c"]]
    assert all(x == 0 for x in short[3:])
    long_surface = "abcdefghijklmnopqrstuvwxy"  # 25 chars
    kept = _char_ids(long_surface, index, 20)
    want = list(long_surface[:10]) + list(long_surface[-10:])
    assert [k for k in kept] == [index[c] for c in want]
    assert index.get("?", 1) == 1  # unknown chars map to the UNK slot


def test_encode_token_boundary_left_slots_zero(tiny_model):
    corpus, table, model = tiny_model
    feats = model.encode_token(corpus, 0)
    n_filters = model.config.n_filters
    dim = table.dim
    left = feats[n_filters : n_filters + 2 * dim]
    assert np.allclose(left, 0.0)  # document start: no left context
    right = feats[n_filters + 2 * dim :]
    assert not np.allclose(right, 0.0)


def test_encode_token_regression_pinned(tiny_model):
    corpus, _, model = tiny_model
    feats = model.encode_token(corpus, 1)
    assert feats.shape == (8 + 4 * 8,)
    # first filter outputs, frozen after the gradient-checked run
    pinned = np.array([0.074698370569, 0.041156370525, 0.037641974692, 0.019510136727])
    assert np.allclose(feats[:4], pinned, atol=1e-9)


def test_gradients_match_finite_differences():
    corpus = _corpus([("aba", "x"), ("bab", "y"), ("cac", "z")])
    table = _toy_embeddings(["aba", "bab", "cac"], dim=4, seed=2)
    config = LemmatizerConfig(char_dim=5, n_filters=6, hidden=7, max_chars=8, epochs=1, seed=3)
    model, _ = train_lemmatizer(corpus, [0, 1, 2], [0], table, config)
    step = 1e-5
    loss, grads = loss_and_grads(model, corpus, 1, 2)
    for name, weights in model.params.items():
        fd = np.zeros_like(weights)
        it = np.nditer(weights, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = weights[idx]
            weights[idx] = orig + step
            hi = loss_and_grads(model, corpus, 1, 2)[0]
            weights[idx] = orig - step
            lo = loss_and_grads(model, corpus, 1, 2)[0]
            weights[idx] = orig
            fd[idx] = (hi - lo) / (2 * step)
        if name == "E":
            fd[0] = 0.0  # padding row is pinned
        denom = np.maximum(np.abs(fd), np.abs(grads[name]))
        denom[denom < 1e-7] = 1.0
        rel = (np.abs(fd - grads[name]) / denom).max()
        assert rel <= 1e-4, f"{name}: {rel}"


def test_memorization_bijective_corpus():
    rng = np.random.default_rng(0)
    surfaces = [f"w{chr(97 + i)}{chr(97 + (i * 7) % 26)}{i:02d}" for i in range(50)]
    corpus = _corpus([(s, f"LEMMA_{s}") for s in surfaces])
    config = LemmatizerConfig(char_dim=8, n_filters=32, hidden=48, epochs=40, lr=0.15, seed=0)
    est = NeuralLemmatizer(**{k: getattr(config, k) for k in (
        "char_dim", "n_filters", "hidden", "epochs", "lr", "seed")})
    est.fit(corpus, list(range(50)), list(range(50)))
    assert est.score(corpus, range(50)) == 1.0


def test_training_deterministic():
    corpus = _corpus([("ama", "amar"), ("amat", "amar"), ("vei", "vezer"), ("vi", "vezer")])
    config = LemmatizerConfig(char_dim=4, n_filters=6, hidden=8, epochs=5, seed=9)
    _, run_a = train_lemmatizer(corpus, [0, 1, 2], [3], None, config)
    _, run_b = train_lemmatizer(corpus, [0, 1, 2], [3], None, config)
    assert run_a.history == run_b.history


def test_training_invariant_to_input_order():
    # the seeded shuffle inside the trainer owns the ordering
    corpus = _corpus([("ama", "amar"), ("amat", "amar"), ("vei", "vezer"), ("vi", "vezer")])
    config = LemmatizerConfig(char_dim=4, n_filters=6, hidden=8, epochs=5, seed=9)
    _, run_a = train_lemmatizer(corpus, [0, 1, 2], [3], None, config)
    _, run_b = train_lemmatizer(corpus, [2, 0, 1], [3], None, config)
    assert run_a.history == run_b.history


def test_dev_empty_rejected():
    corpus = _corpus([("a", "x")])
    with pytest.raises(ValueError):
        train_lemmatizer(corpus, [0], [], None, LemmatizerConfig(epochs=1))


def test_missing_lemma_rejected():
    corpus = [AnnotatedToken("a")]
    with pytest.raises(ValueError):
        train_lemmatizer(corpus, [0], [0], None, LemmatizerConfig(epochs=1))


def test_predict_confidence_and_closure(tiny_model):
    corpus, _, model = tiny_model
    for i in range(len(corpus)):
        lemma, confidence = model.predict(corpus, i)
        assert lemma in model.lemma_vocab  # closed vocabulary
        assert 0.0 <= confidence <= 1.0
        probs = model.predict_proba(corpus, i)
        assert probs.sum() == pytest.approx(1.0)


def test_evaluate_all_known_all_correct(tiny_model):
    corpus, _, model = tiny_model

    class Oracle:
        lemma_vocab = model.lemma_vocab

        def predict(self, corpus, i):
            return corpus[i].lemma, 1.0

    report = evaluate(Oracle(), corpus, [0, 1], {"ama", "amat"})
    assert report.accuracy_all == 1.0
    assert report.accuracy_known == 1.0
    assert report.accuracy_unknown is None
    assert report.n_unknown == 0


def test_evaluate_bucket_by_surface_not_lemma(tiny_model):
    corpus, _, model = tiny_model
    # "amat" lemma was seen but the surface was not -> unknown bucket
    report = evaluate(model, corpus, [1], train_surface_set={"ama", "vei"})
    assert report.n_unknown == 1
    assert report.n_known == 0


def test_evaluate_decomposition_identity(tiny_model):
    corpus, _, model = tiny_model
    report = evaluate(model, corpus, [0, 1, 2, 3], train_surface_set={"ama", "vei"})
    parts = 0.0
    if report.n_known:
        parts += report.accuracy_known * report.n_known
    if report.n_unknown:
        parts += report.accuracy_unknown * report.n_unknown
    assert report.accuracy_all == pytest.approx(parts / report.n_total, abs=1e-9)


def test_majority_baseline():
    corpus = _corpus([("a", "x"), ("b", "x"), ("c", "y"), ("d", "x")])
    assert majority_baseline(corpus, [0, 1, 2, 3], [0, 1, 2, 3]) == 0.75


def test_model_save_load_round_trip(tmp_path, tiny_model):
    corpus, _, model = tiny_model
    path = tmp_path / "lemmatizer.npz"
    model.save(path)
    loaded = LemmatizerModel.load(path)
    assert loaded.lemma_vocab == model.lemma_vocab
    for i in range(len(corpus)):
        assert loaded.predict(corpus, i) == model.predict(corpus, i)
