"""TEI-subset document model: tokenizer, parser/emitter, pre-encoding.

The model is a plain tree: Element nodes with string attributes,
free-floating text (mixed content) and Token leaves for <w>/<pc>.
Parsing and emitting are exact inverses on this subset; the emitter is
the canonical form (attribute order fixed, double quotes, UTF-8), so
``emit(parse(x))`` is a stable normal form and ``parse(emit(doc))``
reproduces ``doc`` node for node.  Unknown elements pass through as
opaque nodes.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

XML_NS = "{http://www.w3.org/XML/1998/namespace}"

#: Canonical attribute order; anything else follows alphabetically.
ATTR_ORDER = ["lemma", "xml:id", "lemmaRef", "n", "type", "source", "cert"]

WORD = "word"
PUNCT = "punct"


class TeiParseError(ValueError):
    def __init__(self, message: str, position: tuple[int, int] | None = None):
        self.position = position
        if position:
            message = f"{message} (line {position[0]}, column {position[1]})"
        super().__init__(message)


class PatternError(ValueError):
    def __init__(self, name: str, pattern: str, reason: str):
        self.pattern_name = name
        super().__init__(f"pattern {name!r} ({pattern!r}) failed to compile: {reason}")


class IdAssignmentError(ValueError):
    pass


@dataclass
class Token:
    kind: str  # WORD or PUNCT
    surface: str
    id: str | None = None
    lemma: str | None = None
    lemma_ref: str | None = None
    attrs: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (WORD, PUNCT):
            raise ValueError(f"bad token kind {self.kind!r}")
        if self.kind == PUNCT and self.lemma is not None:
            raise ValueError("punctuation tokens carry no lemma")


@dataclass
class Element:
    tag: str
    attrs: dict[str, str] = field(default_factory=dict)
    children: list = field(default_factory=list)  # Element | Token | str


@dataclass
class Document:
    root: Element

    @property
    def id(self) -> str | None:
        return self.root.attrs.get("xml:id")

    def tokens(self) -> list[Token]:
        return list(walk_tokens(self.root))


def walk_tokens(node):
    if isinstance(node, Token):
        yield node
        return
    if isinstance(node, Element):
        for child in node.children:
            yield from walk_tokens(child)


def walk_elements(node):
    if isinstance(node, Element):
        yield node
        for child in node.children:
            yield from walk_elements(child)


# ---------------------------------------------------------------------------
# tokenizer


@dataclass(frozen=True)
class TokenizerRules:
    punctuation: str = ".,;:!?·()[]«»"
    split_elisions: bool = True
    detect_numerals: bool = True


_ROMAN_CHARS = set("IVXLCDM")


def is_roman_numeral(surface: str) -> bool:
    """Counting tokens like IIII or II; single letters stay ambiguous
    (D. the initial vs D the numeral) and are not flagged."""
    return len(surface) >= 2 and all(c in _ROMAN_CHARS for c in surface)


def tokenize_with_spans(
    text: str, rules: TokenizerRules | None = None
) -> list[tuple[Token, tuple[int, int]]]:
    """Tokens plus their (start, end) source spans.

    Words split on whitespace; leading/trailing punctuation becomes pc
    tokens; elision apostrophes split the word and are dropped (they
    count as separators, like whitespace).
    """
    rules = rules or TokenizerRules()
    out: list[tuple[Token, tuple[int, int]]] = []

    def add_word(piece: str, start: int):
        if piece:
            out.append((Token(WORD, piece), (start, start + len(piece))))

    for m in re.finditer(r"\S+", text):
        chunk, base = m.group(), m.start()
        start, end = 0, len(chunk)
        leading: list[int] = []
        while start < end and chunk[start] in rules.punctuation:
            leading.append(start)
            start += 1
        trailing: list[int] = []
        while end > start and chunk[end - 1] in rules.punctuation:
            trailing.append(end - 1)
            end -= 1
        for pos in leading:
            out.append((Token(PUNCT, chunk[pos]), (base + pos, base + pos + 1)))
        core = chunk[start:end]
        if rules.split_elisions and core:
            piece_start = start
            for i, c in enumerate(core, start):
                if c in "'’":
                    add_word(chunk[piece_start:i], base + piece_start)
                    piece_start = i + 1
            add_word(chunk[piece_start:end], base + piece_start)
        else:
            add_word(core, base + start)
        for pos in sorted(trailing):
            out.append((Token(PUNCT, chunk[pos]), (base + pos, base + pos + 1)))
    return out


def tokenize(text: str, rules: TokenizerRules | None = None) -> list[Token]:
    return [tok for tok, _ in tokenize_with_spans(text, rules)]


# ---------------------------------------------------------------------------
# id assignment


def assign_ids(
    doc: Document, prefix: str, start: int, pad: int = 6, force: bool = False
) -> Document:
    """Sequential document-order ids ``prefix_NNNNNN`` for all tokens.

    Refuses to touch a document whose tokens already carry ids unless
    ``force`` is set, and never collides with ids used elsewhere in the
    tree.  Deterministic: re-running on an unchanged document (with
    force) reproduces the same ids.
    """
    tokens = doc.tokens()
    if not force:
        assigned = [t.id for t in tokens if t.id]
        if assigned:
            raise IdAssignmentError(
                f"{len(assigned)} tokens already have ids (use force to reassign)"
            )
    element_ids = {
        el.attrs["xml:id"] for el in walk_elements(doc.root) if "xml:id" in el.attrs
    }
    for i, token in enumerate(tokens):
        new_id = f"{prefix}_{start + i:0{pad}d}"
        if new_id in element_ids:
            raise IdAssignmentError(f"id {new_id} already used in the document")
        token.id = new_id
    return doc


# ---------------------------------------------------------------------------
# parse / emit


def _attrs_from_xml(raw: dict[str, str]) -> dict[str, str]:
    return {(k.replace(XML_NS, "xml:") if k.startswith(XML_NS) else k): v for k, v in raw.items()}


def _token_from_xml(node: ET.Element) -> Token:
    attrs = _attrs_from_xml(node.attrib)
    kind = WORD if node.tag == "w" else PUNCT
    return Token(
        kind=kind,
        surface=node.text or "",
        id=attrs.pop("xml:id", None),
        lemma=attrs.pop("lemma", None) if kind == WORD else None,
        lemma_ref=attrs.pop("lemmaRef", None),
        attrs=attrs,
    )


def _convert(node: ET.Element):
    if node.tag in ("w", "pc") and len(node) == 0:
        return _token_from_xml(node)
    element = Element(node.tag, _attrs_from_xml(node.attrib))
    if node.text:
        element.children.append(node.text)
    for child in node:
        element.children.append(_convert(child))
        if child.tail:
            element.children.append(child.tail)
    return element


def parse_tei(data: bytes | str) -> Document:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise TeiParseError(str(exc), getattr(exc, "position", None)) from exc
    converted = _convert(root)
    if isinstance(converted, Token):  # bare <w>...</w> fragment
        converted = Element("item", children=[converted])
    return Document(root=converted)


def _ordered_attrs(attrs: dict[str, str]) -> list[tuple[str, str]]:
    known = [(k, attrs[k]) for k in ATTR_ORDER if k in attrs]
    rest = sorted((k, v) for k, v in attrs.items() if k not in ATTR_ORDER)
    return known + rest


def _open_tag(tag: str, attrs: dict[str, str], self_close: bool) -> str:
    parts = [tag]
    parts += [f"{k}={quoteattr(v)}" for k, v in _ordered_attrs(attrs)]
    return "<" + " ".join(parts) + ("/>" if self_close else ">")


def _emit_token(token: Token) -> str:
    tag = "w" if token.kind == WORD else "pc"
    attrs = dict(token.attrs)
    if token.lemma is not None:
        attrs["lemma"] = token.lemma
    if token.id is not None:
        attrs["xml:id"] = token.id
    if token.lemma_ref is not None:
        attrs["lemmaRef"] = token.lemma_ref
    if not token.surface:
        return _open_tag(tag, attrs, self_close=True)
    return _open_tag(tag, attrs, self_close=False) + escape(token.surface) + f"</{tag}>"


def _emit_node(node, out: list[str]) -> None:
    if isinstance(node, str):
        out.append(escape(node))
    elif isinstance(node, Token):
        out.append(_emit_token(node))
    else:
        if not node.children:
            out.append(_open_tag(node.tag, node.attrs, self_close=True))
            return
        out.append(_open_tag(node.tag, node.attrs, self_close=False))
        for child in node.children:
            _emit_node(child, out)
        out.append(f"</{node.tag}>")


def emit_tei(doc: Document) -> bytes:
    out: list[str] = []
    _emit_node(doc.root, out)
    return "".join(out).encode("utf-8")


# ---------------------------------------------------------------------------
# pattern-based pre-encoding


@dataclass(frozen=True)
class PatternSet:
    """What the pre-encoder may infer from raw text.

    ``folio`` is a regex with one capture group marking page breaks;
    ``stanzas`` turns blank-line-separated groups into stanza/verse
    structure.  An empty set produces a single flat item.
    """

    folio: str | None = None
    stanzas: bool = False

    @classmethod
    def default(cls) -> "PatternSet":
        return cls(folio=r"\[f\.\s*(\w+)\]", stanzas=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PatternSet":
        return cls(folio=data.get("folio"), stanzas=bool(data.get("stanzas", False)))


def _compile_folio(patterns: PatternSet):
    if patterns.folio is None:
        return None
    try:
        compiled = re.compile(patterns.folio)
    except re.error as exc:
        raise PatternError("folio", patterns.folio, str(exc)) from exc
    if compiled.groups < 1:
        raise PatternError("folio", patterns.folio, "needs one capture group for @n")
    return compiled


def _sep(children: list) -> None:
    children.append("\n")


def _encode_line(line: str, folio_re, rules: TokenizerRules, container: Element) -> None:
    pos = 0
    segments: list = []
    if folio_re:
        for m in folio_re.finditer(line):
            segments.append(line[pos : m.start()])
            segments.append(Element("pb", {"n": m.group(1)}))
            pos = m.end()
    segments.append(line[pos:])
    for segment in segments:
        if isinstance(segment, Element):
            _sep(container.children)
            container.children.append(segment)
            continue
        for token in tokenize(segment, rules):
            _sep(container.children)
            container.children.append(token)


def pre_encode(
    raw_text: str,
    patterns: PatternSet | None = None,
    rules: TokenizerRules | None = None,
    item_id: str | None = None,
) -> Document:
    """First-pass structure from raw text: folios, stanzas, verses, tokens."""
    patterns = patterns or PatternSet()
    rules = rules or TokenizerRules()
    folio_re = _compile_folio(patterns)
    attrs = {"xml:id": item_id} if item_id else {}
    item = Element("item", attrs)

    if not patterns.stanzas:
        _encode_line(raw_text.replace("\n", " "), folio_re, rules, item)
        if item.children:
            _sep(item.children)
        return Document(root=item)

    blocks = [b for b in re.split(r"\n\s*\n", raw_text) if b.strip()]
    for block in blocks:
        lines = [l for l in block.splitlines() if l.strip()]
        # a block that is nothing but folio markers stays at item level
        if folio_re and all(folio_re.fullmatch(l.strip()) for l in lines):
            for l in lines:
                _sep(item.children)
                item.children.append(Element("pb", {"n": folio_re.fullmatch(l.strip()).group(1)}))
            continue
        stanza = Element("lg")
        for line in lines:
            verse = Element("l")
            _encode_line(line, folio_re, rules, verse)
            if verse.children:
                _sep(verse.children)
            _sep(stanza.children)
            stanza.children.append(verse)
        _sep(stanza.children)
        _sep(item.children)
        item.children.append(stanza)
    if item.children:
        _sep(item.children)
    return Document(root=item)
