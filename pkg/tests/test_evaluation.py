import random
import unicodedata

import pytest

from scriptorium.evaluation import (
    ABSENT,
    DIACRITIC_CLASS,
    AlignOp,
    align,
    aligned_diff,
    cer,
    confusion_matrix,
    confusion_rows,
    edit_distance,
    evaluate_pairs,
    format_confusion_table,
    replay,
    select_best,
)


def oracle_distance(a: str, b: str) -> int:
    # Two-row Levenshtein, kept independent of the align() code path.
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return prev[len(b)]


def test_align_identical():
    ops = align("abc", "abc")
    assert [op.kind for op in ops] == ["match"] * 3


def test_align_dompna_example():
    ops = align("dompna", "domna")
    cost = sum(1 for op in ops if op.kind != "match")
    assert cost == 1
    assert sum(1 for op in ops if op.kind == "match") == 5
    assert replay(ops) == ("dompna", "domna")


def test_align_empty_gt():
    ops = align("", "ab")
    assert [op.kind for op in ops] == ["ins", "ins"]


def test_align_replay_reconstructs():
    rng = random.Random(11)
    alphabet = "abcdefgh"
    for _ in range(300):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        assert replay(align(a, b)) == (a, b)


def test_align_cost_matches_oracle_1000_pairs():
    rng = random.Random(7)
    alphabet = "abcdefgh"
    for _ in range(1000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        got = sum(1 for op in align(a, b) if op.kind != "match")
        assert got == oracle_distance(a, b)


def test_cer_identical():
    assert cer("abc", "abc") == 0.0


def test_cer_dompna():
    assert cer("dompna", "domna") == pytest.approx(1 / 6)


def test_cer_ignore_spaces():
    assert cer("a b", "ab", ignore_spaces=True) == 0.0


def test_cer_empty_gt_raises():
    with pytest.raises(ValueError):
        cer("", "x")
    with pytest.raises(ValueError):
        cer("   ", "x", ignore_spaces=True)


def test_cer_asymmetry():
    # denominator is |gt|, so swapping the arguments changes the rate
    assert cer("ab", "abcd") != cer("abcd", "ab")


def test_cer_monotone_under_extra_errors():
    rng = random.Random(3)
    for _ in range(200):
        gt = "".join(rng.choice("abcd") for _ in range(rng.randint(1, 8)))
        pred = "".join(rng.choice("abcd") for _ in range(rng.randint(0, 8)))
        worse = pred + "z"  # z never occurs in gt
        assert edit_distance(gt, worse) >= edit_distance(gt, pred)


def test_confusion_all_correct_is_empty():
    assert confusion_matrix([("abc", "abc"), ("x", "x")]) == {}


def test_confusion_substitution_pair():
    counts = confusion_matrix([("eo", "oe")])
    assert counts[("o", "e")] == 1
    assert counts[("e", "o")] == 1
    assert sum(counts.values()) == 2


def test_confusion_missing_diacritic_counts_as_diacritic_class():
    # gt has a combining acute; prediction lost it
    counts = confusion_matrix([("é", "e")])
    assert counts[(ABSENT, DIACRITIC_CLASS)] == 1


def test_confusion_rows_order_and_shape():
    counts = confusion_matrix([("éé a", "ee a"), ("eo", "oe")])
    rows = confusion_rows(counts)
    # most frequent first: two lost diacritics
    assert rows[0] == (2, ABSENT, DIACRITIC_CLASS)
    # remaining single counts tie, ordered lexicographically by (pred, gt)
    assert rows[1:] == [(1, "e", "o"), (1, "o", "e")]


def test_confusion_counts_sum_equals_errors():
    pairs = [("dompna", "domna"), ("bona amia", "bona ania"), ("jorn", "iorn")]
    counts = confusion_matrix(pairs)
    total = sum(
        oracle_distance(
            unicodedata.normalize("NFD", gt), unicodedata.normalize("NFD", pred)
        )
        for gt, pred in pairs
    )
    assert sum(counts.values()) == total


def test_format_confusion_table_columns():
    counts = confusion_matrix([("a b", "ab")])
    table = format_confusion_table(counts)
    lines = table.splitlines()
    assert lines[0].split("\t") == ["freq", "pred.", "GT"]
    assert lines[1].split("\t") == ["1", ABSENT, "[espace]"]


def test_evaluate_pairs_identity():
    report = evaluate_pairs([("dompna", "domna")])
    assert report.n_errors == 1
    assert report.cer == pytest.approx(1 / 6)
    assert sum(report.confusion.values()) == report.n_errors
    assert report.cer * report.n_gt_chars == pytest.approx(report.n_errors)


def test_evaluate_pairs_no_spaces_variant():
    report = evaluate_pairs([("a b", "ab")])
    assert report.cer == pytest.approx(1 / 3)
    assert report.cer_no_spaces == 0.0


def test_aligned_diff_marks_errors():
    dump = aligned_diff("dompna", "domna")
    assert "GT" in dump and "PRED" in dump and "^" in dump


class _StubModel:
    def __init__(self, outputs):
        self.outputs = outputs

    def transcribe(self, img):
        return self.outputs[img]


def _dev_fixture(cer_targets):
    # 1000-char gt; prediction wrong on exactly round(cer*1000) chars
    gt = "a" * 1000
    dev = [(gt, 0)]
    models = []
    for i, target in enumerate(cer_targets):
        wrong = round(target * 1000)
        pred = "b" * wrong + "a" * (1000 - wrong)
        models.append((1000 * (i + 1), _StubModel({0: pred})))
    return models, dev


def test_select_best_single_checkpoint():
    models, dev = _dev_fixture([0.10])
    it, model, score = select_best(models, dev)
    assert it == 1000
    assert score == pytest.approx(0.10)


def test_select_best_picks_lowest_dev_cer():
    models, dev = _dev_fixture([0.10, 0.061, 0.08])
    it, model, score = select_best(models, dev)
    assert it == 2000
    assert score == pytest.approx(0.061)


def test_select_best_tie_goes_to_earlier_iteration():
    models, dev = _dev_fixture([0.08, 0.08, 0.10])
    it, _, _ = select_best(models, dev)
    assert it == 1000


def test_select_best_empty_inputs():
    with pytest.raises(ValueError):
        select_best([], [("a", 0)])
    models, _ = _dev_fixture([0.1])
    with pytest.raises(ValueError):
        select_best(models, [])
