"""Character-level evaluation: edit alignment, CER and confusion statistics.

The alignment is a minimal unit-cost edit script between a ground-truth
string and a prediction.  CER divides the edit distance by the length of
the ground truth, which makes it asymmetric by design.  Confusion counts
are aggregated on NFD-decomposed text so that lost or spurious combining
marks show up as a class of their own instead of vanishing inside
precomposed characters.
"""

from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

#: Placeholder for "no character on this side" in confusion entries.
ABSENT = "_"

#: Display class for any combining mark (Unicode category M*).
DIACRITIC_CLASS = "[diacr.]"

#: Display form of a space inside confusion tables.
SPACE_CLASS = "[espace]"


@dataclass(frozen=True)
class AlignOp:
    """One step of an edit script.

    kind is one of ``match``, ``sub``, ``del``, ``ins``.  ``gt`` is the
    consumed ground-truth character ('' for ins), ``pred`` the consumed
    predicted character ('' for del).
    """

    kind: str
    gt: str = ""
    pred: str = ""


def align(gt: str, pred: str) -> list[AlignOp]:
    """Minimal unit-cost edit script turning ``gt`` into ``pred``.

    Ties during backtrace are resolved match > sub > del > ins, so the
    returned script is deterministic.  Replaying the ops reconstructs
    both inputs exactly.
    """
    n, m = len(gt), len(pred)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dp[i][0] = i
    for j in range(m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        row, prev = dp[i], dp[i - 1]
        gc = gt[i - 1]
        for j in range(1, m + 1):
            cost = 0 if gc == pred[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)

    ops: list[AlignOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and gt[i - 1] == pred[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            ops.append(AlignOp("match", gt[i - 1], pred[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            ops.append(AlignOp("sub", gt[i - 1], pred[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            ops.append(AlignOp("del", gt[i - 1], ""))
            i -= 1
        else:
            ops.append(AlignOp("ins", "", pred[j - 1]))
            j -= 1
    ops.reverse()
    return ops


def edit_distance(gt: str, pred: str) -> int:
    return sum(1 for op in align(gt, pred) if op.kind != "match")


def replay(ops: list[AlignOp]) -> tuple[str, str]:
    """Reconstruct (gt, pred) from an edit script."""
    gt = "".join(op.gt for op in ops)
    pred = "".join(op.pred for op in ops)
    return gt, pred


def cer(gt: str, pred: str, ignore_spaces: bool = False) -> float:
    """Edit distance divided by ground-truth length.

    With ``ignore_spaces`` all spaces are removed from both strings
    first.  An empty ground truth (after removal) has no defined rate
    and raises ValueError.
    """
    if ignore_spaces:
        gt = gt.replace(" ", "")
        pred = pred.replace(" ", "")
    if not gt:
        raise ValueError("CER is undefined for empty ground truth")
    return edit_distance(gt, pred) / len(gt)


def _confusion_class(c: str) -> str:
    if c == ABSENT:
        return ABSENT
    if unicodedata.category(c).startswith("M"):
        return DIACRITIC_CLASS
    return c


@dataclass
class EvalReport:
    """Aggregate error report over (gt, pred) pairs.

    Counting happens on NFD-decomposed strings so the errors on
    combining marks line up with the confusion classes; consequently
    ``cer * n_gt_chars`` equals the summed confusion counts exactly.
    """

    cer: float
    cer_no_spaces: float
    n_gt_chars: int
    n_errors: int
    confusion: Counter = field(default_factory=Counter)

    def to_json(self) -> str:
        payload = {
            "cer": self.cer,
            "cer_no_spaces": self.cer_no_spaces,
            "n_gt_chars": self.n_gt_chars,
            "n_errors": self.n_errors,
            "confusion": [
                {"freq": freq, "pred": pred, "gt": gt}
                for freq, pred, gt in confusion_rows(self.confusion)
            ],
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)


def confusion_matrix(pairs: list[tuple[str, str]]) -> Counter:
    """Aggregate confusion counts over (gt, pred) pairs.

    Pairs are NFD-decomposed before alignment; substitutions count as
    (pred, gt), insertions as (pred, ABSENT) and deletions as
    (ABSENT, gt).  Combining marks are lumped into one class.
    """
    counts: Counter = Counter()
    for gt, pred in pairs:
        gt_d = unicodedata.normalize("NFD", gt)
        pred_d = unicodedata.normalize("NFD", pred)
        for op in align(gt_d, pred_d):
            if op.kind == "sub":
                counts[(_confusion_class(op.pred), _confusion_class(op.gt))] += 1
            elif op.kind == "ins":
                counts[(_confusion_class(op.pred), ABSENT)] += 1
            elif op.kind == "del":
                counts[(ABSENT, _confusion_class(op.gt))] += 1
    return counts


def confusion_rows(counts: Counter) -> list[tuple[int, str, str]]:
    """Rows (freq, pred, gt) sorted by frequency desc, then lexicographic."""
    return sorted(
        ((freq, pred, gt) for (pred, gt), freq in counts.items()),
        key=lambda row: (-row[0], row[1], row[2]),
    )


def format_confusion_table(counts: Counter, top: int | None = None) -> str:
    """Printable table with columns freq / pred / GT."""
    rows = confusion_rows(counts)
    if top is not None:
        rows = rows[:top]

    def show(c: str) -> str:
        return SPACE_CLASS if c == " " else c

    lines = ["freq\tpred.\tGT"]
    for freq, pred, gt in rows:
        lines.append(f"{freq}\t{show(pred)}\t{show(gt)}")
    return "\n".join(lines)


def evaluate_pairs(pairs: list[tuple[str, str]]) -> EvalReport:
    """Micro-averaged CER (with and without spaces) plus confusion counts."""
    if not pairs:
        raise ValueError("cannot evaluate an empty pair list")
    total_gt = 0
    total_err = 0
    nospace_gt = 0
    nospace_err = 0
    for gt, pred in pairs:
        gt_d = unicodedata.normalize("NFD", gt)
        pred_d = unicodedata.normalize("NFD", pred)
        total_gt += len(gt_d)
        total_err += edit_distance(gt_d, pred_d)
        gs, ps = gt_d.replace(" ", ""), pred_d.replace(" ", "")
        nospace_gt += len(gs)
        nospace_err += edit_distance(gs, ps)
    if total_gt == 0:
        raise ValueError("CER is undefined for empty ground truth")
    return EvalReport(
        cer=total_err / total_gt,
        cer_no_spaces=(nospace_err / nospace_gt) if nospace_gt else 0.0,
        n_gt_chars=total_gt,
        n_errors=total_err,
        confusion=confusion_matrix(pairs),
    )


def aligned_diff(gt: str, pred: str) -> str:
    """Two-row dump of an alignment, errors marked in a third row."""
    top: list[str] = []
    bottom: list[str] = []
    marks: list[str] = []
    for op in align(gt, pred):
        g = op.gt if op.gt else ABSENT
        p = op.pred if op.pred else ABSENT
        width = max(len(g), len(p))
        top.append(g.ljust(width))
        bottom.append(p.ljust(width))
        marks.append((" " if op.kind == "match" else "^") * width)
    return "GT   " + "".join(top) + "\nPRED " + "".join(bottom) + "\n     " + "".join(marks)


def select_best(checkpoints, dev_lines):
    """Pick the checkpoint with the lowest dev CER.

    ``checkpoints`` is a list of (iteration, model) where the model
    exposes ``transcribe(image) -> str``; ``dev_lines`` yield
    (gt_text, image) pairs.  Ties go to the smallest iteration.
    Returns (iteration, model, dev_cer).
    """
    if not checkpoints:
        raise ValueError("no checkpoints to select from")
    dev_lines = list(dev_lines)
    if not dev_lines:
        raise ValueError("empty dev set")
    best = None
    for iteration, model in sorted(checkpoints, key=lambda c: c[0]):
        pairs = [(gt, model.transcribe(img)) for gt, img in dev_lines]
        score = evaluate_pairs(pairs).cer
        if best is None or score < best[2]:
            best = (iteration, model, score)
    return best
