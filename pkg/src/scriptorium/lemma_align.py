"""Glossary-to-lexicon alignment and lemma injection.

Edition glossaries carry their own headwords; the reference lexicon
spells lemmas with subscript-dot vowel diacritics.  Candidate matching
therefore works on folded keys (dots stripped, lowercased) scored by
normalized edit distance, with the human decision recorded in an
append-only log that can be replayed to reconstruct the active mapping
at any time.
"""

from __future__ import annotations

import json
import time
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .evaluation import edit_distance
from .tei import Document, Element, is_roman_numeral, walk_elements

NUMERAL_LEMMA = "@num@"

#: combining marks dropped by key folding: dot below, dot above
_FOLDED_MARKS = {"̣", "̇"}

POS_BONUS = 0.1


class UnknownGlossError(KeyError):
    pass


def fold_diacritics(lemma: str) -> str:
    """Matching key: strip dot-below/dot-above marks and lowercase.

    All other diacritics are kept, so e.g. a cedilla still separates
    candidates while the lexicon's subscript dots do not.
    """
    decomposed = unicodedata.normalize("NFD", lemma)
    kept = "".join(c for c in decomposed if c not in _FOLDED_MARKS)
    return unicodedata.normalize("NFC", kept).lower()


# ---------------------------------------------------------------------------
# lexicon


@dataclass
class LexiconEntry:
    lemma: str
    pos: str = ""
    source: str = ""
    provenance: str = "reference"  # or "project-created"
    documentation: str = ""


class LemmaLexicon:
    """Reference lemma list plus project-created additions."""

    def __init__(self, entries: list[LexiconEntry] | None = None):
        self.entries: dict[str, LexiconEntry] = {}
        for entry in entries or []:
            self.add(entry)

    def add(self, entry: LexiconEntry) -> None:
        key = unicodedata.normalize("NFC", entry.lemma)
        if key in self.entries:
            raise ValueError(f"duplicate lemma {key!r}")
        if entry.provenance == "project-created" and not entry.documentation:
            raise ValueError(f"project-created lemma {key!r} requires documentation")
        entry.lemma = key
        self.entries[key] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, lemma: str) -> bool:
        return unicodedata.normalize("NFC", lemma) in self.entries

    def __iter__(self):
        return iter(self.entries.values())

    @classmethod
    def load(cls, reference: str | Path, project: str | Path | None = None) -> "LemmaLexicon":
        lexicon = cls()
        for line in Path(reference).read_text(encoding="utf-8").splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            fields = (line.split("\t") + ["", ""])[:3]
            lexicon.add(LexiconEntry(fields[0], fields[1], fields[2]))
        if project and Path(project).exists():
            for line in Path(project).read_text(encoding="utf-8").splitlines():
                if not line.strip() or line.startswith("#"):
                    continue
                fields = (line.split("\t") + ["", "", ""])[:4]
                lexicon.add(
                    LexiconEntry(
                        fields[0], fields[1], fields[2],
                        provenance="project-created",
                        documentation=fields[3],
                    )
                )
        return lexicon

    def save_project_entries(self, path: str | Path) -> None:
        lines = [
            "\t".join([e.lemma, e.pos, e.source, e.documentation])
            for e in self.entries.values()
            if e.provenance == "project-created"
        ]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------
# glossary entries


@dataclass
class GlossSubEntry:
    id: str
    form: str
    gram: dict[str, str] = field(default_factory=dict)


@dataclass
class GlossEntry:
    id: str
    headword: str
    gram: dict[str, str] = field(default_factory=dict)
    sub_entries: list[GlossSubEntry] = field(default_factory=list)

    @property
    def pos(self) -> str:
        return self.gram.get("pos", "")


def _gram_dict(gram_el: Element | None) -> dict[str, str]:
    gram: dict[str, str] = {}
    if gram_el is None:
        return gram
    for child in gram_el.children:
        if isinstance(child, Element) and child.children:
            text = "".join(c for c in child.children if isinstance(c, str)).strip()
            gram[child.tag] = text
    return gram


def _first_child(element: Element, tag: str) -> Element | None:
    for child in element.children:
        if isinstance(child, Element) and child.tag == tag:
            return child
    return None


def _text_of(element: Element | None) -> str:
    if element is None:
        return ""
    return "".join(c for c in element.children if isinstance(c, str)).strip()


def glossary_entries(doc: Document) -> list[GlossEntry]:
    """Extract glossary entries (with sub-entries) from a parsed document."""
    out = []
    for element in walk_elements(doc.root):
        if element.tag != "entry":
            continue
        entry_id = element.attrs.get("xml:id", "")
        entry = GlossEntry(
            id=entry_id,
            headword=_text_of(_first_child(element, "form")),
            gram=_gram_dict(_first_child(element, "gramGrp")),
        )
        for child in element.children:
            if isinstance(child, Element) and child.tag == "re":
                sub_id = child.attrs.get("xml:id", "")
                if sub_id and entry_id and not sub_id.startswith(entry_id):
                    raise ValueError(
                        f"sub-entry {sub_id} not prefixed by parent {entry_id}"
                    )
                entry.sub_entries.append(
                    GlossSubEntry(
                        id=sub_id,
                        form=_text_of(_first_child(child, "form")),
                        gram=_gram_dict(_first_child(child, "gramGrp")),
                    )
                )
        out.append(entry)
    ids = [e.id for e in out]
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate glossary entry ids")
    return out


# ---------------------------------------------------------------------------
# candidate proposal


def propose_candidates(
    entry: GlossEntry,
    lexicon: LemmaLexicon,
    k: int = 5,
    threshold: float = 0.5,
) -> list[tuple[str, float]]:
    """Ranked lexicon candidates for a glossary headword.

    Score is 1 - normalized edit distance between folded forms, plus a
    small bonus for matching part of speech, clamped to [0, 1].  Exact
    folded matches always rank first; remaining ties break
    lexicographically.  An empty list means no candidate reached the
    threshold and a new lemma may be needed.
    """
    if len(lexicon) == 0:
        return []
    key = fold_diacritics(entry.headword)
    scored = []
    for lex in lexicon:
        lex_key = fold_diacritics(lex.lemma)
        denom = max(len(key), len(lex_key), 1)
        score = 1.0 - edit_distance(key, lex_key) / denom
        if entry.pos and lex.pos and entry.pos == lex.pos:
            score += POS_BONUS
        score = min(max(score, 0.0), 1.0)
        exact = lex_key == key
        if score >= threshold:
            scored.append((not exact, -score, lex.lemma, score))
    scored.sort()
    return [(lemma, score) for _, _, lemma, score in scored[:k]]


# ---------------------------------------------------------------------------
# decisions


@dataclass
class AlignmentDecision:
    gloss_id: str
    action: str  # "accept" | "new" | "reject"
    lemma: str | None = None
    documentation: str = ""
    reviewer: str = ""
    timestamp: float = 0.0
    candidates_shown: list = field(default_factory=list)

    def __post_init__(self):
        if self.action not in ("accept", "new", "reject"):
            raise ValueError(f"bad decision action {self.action!r}")
        if self.action in ("accept", "new") and not self.lemma:
            raise ValueError(f"{self.action} decision needs a lemma")
        if self.action == "new" and not self.documentation:
            raise ValueError("new lemmas must be documented")
        if not self.timestamp:
            self.timestamp = time.time()

    def to_json(self) -> dict:
        return {
            "gloss_id": self.gloss_id,
            "action": self.action,
            "lemma": self.lemma,
            "documentation": self.documentation,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
            "candidates_shown": list(self.candidates_shown),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AlignmentDecision":
        return cls(
            gloss_id=data["gloss_id"],
            action=data["action"],
            lemma=data.get("lemma"),
            documentation=data.get("documentation", ""),
            reviewer=data.get("reviewer", ""),
            timestamp=data.get("timestamp", 0.0),
            candidates_shown=data.get("candidates_shown", []),
        )


class DecisionLog:
    """Append-only decision log; later decisions supersede earlier ones."""

    def __init__(self, path: str | Path, known_gloss_ids: set[str] | None = None):
        self.path = Path(path)
        self.known_gloss_ids = known_gloss_ids

    def append(self, decision: AlignmentDecision, lexicon: LemmaLexicon | None = None) -> None:
        if self.known_gloss_ids is not None and decision.gloss_id not in self.known_gloss_ids:
            raise UnknownGlossError(decision.gloss_id)
        if decision.action == "new" and lexicon is not None and decision.lemma not in lexicon:
            lexicon.add(
                LexiconEntry(
                    decision.lemma,
                    provenance="project-created",
                    documentation=decision.documentation,
                )
            )
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(decision.to_json(), ensure_ascii=False) + "\n")

    def read_all(self) -> list[AlignmentDecision]:
        if not self.path.exists():
            return []
        return [
            AlignmentDecision.from_json(json.loads(line))
            for line in self.path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]

    def replay(self) -> dict[str, AlignmentDecision]:
        """Active decision per gloss id (append order wins)."""
        active: dict[str, AlignmentDecision] = {}
        for decision in self.read_all():
            active[decision.gloss_id] = decision
        return active


def active_mapping(decisions: dict[str, AlignmentDecision]) -> dict[str, str]:
    """gloss id -> lemma for accepted/new decisions only."""
    return {
        gid: d.lemma
        for gid, d in decisions.items()
        if d.action in ("accept", "new") and d.lemma
    }


# ---------------------------------------------------------------------------
# injection


@dataclass
class InjectionReport:
    resolved: int = 0
    numerals: int = 0
    unresolved: list[tuple[str | None, str]] = field(default_factory=list)
    untouched: int = 0


def _resolve_gloss_id(ref: str, mapping: dict[str, str]) -> str | None:
    """Follow a lemmaRef to a decided gloss id, trying sub-entry prefixes.

    ``#gloss_a116_11`` resolves through ``gloss_a116`` when no decision
    exists for the sub-entry itself.
    """
    gid = ref.lstrip("#")
    while gid:
        if gid in mapping:
            return gid
        if "_" not in gid:
            return None
        gid = gid.rsplit("_", 1)[0]
    return None


def inject_lemmas(
    doc: Document,
    decisions: dict[str, AlignmentDecision],
    lexicon: LemmaLexicon | None = None,
) -> tuple[Document, InjectionReport]:
    """Write decided lemmas onto tokens; surfaces and order untouched.

    Roman-numeral words get the counting lemma; tokens whose reference
    does not resolve are reported, never fatal.
    """
    mapping = active_mapping(decisions)
    report = InjectionReport()
    for token in doc.tokens():
        if token.kind != "word":
            continue
        if is_roman_numeral(token.surface):
            token.lemma = NUMERAL_LEMMA
            report.numerals += 1
            continue
        if token.lemma_ref:
            gid = _resolve_gloss_id(token.lemma_ref, mapping)
            if gid is None:
                report.unresolved.append((token.id, token.lemma_ref))
            else:
                token.lemma = mapping[gid]
                report.resolved += 1
        elif token.lemma is None:
            report.untouched += 1
    return doc, report
