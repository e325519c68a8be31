"""Synthetic fixtures: rendered text lines, pages and toy training corpora.

Everything here is deterministic given a seed, so the demo pipeline and
the test suite can regenerate identical data.  Rendered text leans on a
small Old Occitan flavoured vocabulary to keep the fixtures close to
the material the workbench targets.
"""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

_FONT_DIRS = [
    Path("/usr/share/fonts/truetype/dejavu"),
    Path("/usr/share/fonts/TTF"),
]

FONT_FILES = {
    "sans": "DejaVuSans.ttf",
    "serif": "DejaVuSerif.ttf",
}

VOCABULARY = [
    "domna", "dompna", "dona", "bona", "amia", "joy", "gaug", "deport",
    "ioy", "esperansa", "pessamen", "jorn", "jorns", "ostal", "ostals",
    "gens", "mostrar", "anar", "anet", "aver", "avem", "ac", "dit",
    "desus", "que", "per", "en", "e", "los", "las", "lo", "la", "son",
    "sos", "amor", "amors", "cor", "cors", "chan", "chantar", "trobar",
    "vers", "fin", "fis", "pretz", "valor", "ric", "rics", "mal", "ben",
    "dieu", "sens", "razo", "folia", "mezura", "paratge", "solatz",
]


def find_font(name: str) -> Path:
    filename = FONT_FILES[name]
    for directory in _FONT_DIRS:
        candidate = directory / filename
        if candidate.exists():
            return candidate
    try:  # matplotlib bundles the same faces
        import matplotlib

        bundled = Path(matplotlib.__file__).parent / "mpl-data" / "fonts" / "ttf" / filename
        if bundled.exists():
            return bundled
    except ImportError:
        pass
    raise FileNotFoundError(f"font {filename} not found")


def available_fonts() -> dict[str, Path]:
    return {name: find_font(name) for name in FONT_FILES}


def render_line(
    text: str, font_path: str | Path, font_size: int = 24, pad: int = 6
) -> np.ndarray:
    """Render one text line as a gray image (ink 0 on background 255)."""
    font = ImageFont.truetype(str(font_path), font_size)
    left, top, right, bottom = font.getbbox(text) if text else (0, 0, 1, font_size)
    width = max(1, right - left) + 2 * pad
    height = max(1, bottom - top) + 2 * pad
    img = Image.new("L", (width, height), 255)
    draw = ImageDraw.Draw(img)
    draw.text((pad - left, pad - top), text, font=font, fill=0)
    return np.asarray(img)


def sample_text(rng: random.Random, min_words: int = 2, max_words: int = 4) -> str:
    n = rng.randint(min_words, max_words)
    return " ".join(rng.choice(VOCABULARY) for _ in range(n))


def make_line_set(
    n_lines: int,
    seed: int = 0,
    fonts: dict[str, Path] | None = None,
    font_size: int = 24,
    min_words: int = 2,
    max_words: int = 4,
) -> list[tuple[str, np.ndarray]]:
    """(text, image) pairs alternating over the available fonts."""
    fonts = fonts or available_fonts()
    rng = random.Random(seed)
    font_paths = list(fonts.values())
    out = []
    for i in range(n_lines):
        text = sample_text(rng, min_words, max_words)
        img = render_line(text, font_paths[i % len(font_paths)], font_size=font_size)
        out.append((text, img))
    return out


def mild_recipes(seed: int = 0):
    """Low-strength degradation battery for realistic-but-readable lines."""
    from .imaging import DegradationRecipe

    return [
        DegradationRecipe("identity", {}, seed),
        DegradationRecipe("blur", {"variant": 1, "radius": 1}, seed),
        DegradationRecipe("blur", {"variant": 2, "radius": 1}, seed),
        DegradationRecipe("blur", {"variant": 3, "radius": 1}, seed),
        DegradationRecipe("blur", {"variant": 4, "radius": 1}, seed),
        DegradationRecipe("bleedthrough", {"alpha": 0.15}, seed),
        DegradationRecipe("char_erosion", {"strength": 0.1}, seed),
        DegradationRecipe("holes", {"count": 2, "radius": 2}, seed),
        DegradationRecipe("binding_shadow", {"side": "left", "width": 12}, seed),
        DegradationRecipe("binding_shadow", {"side": "right", "width": 12}, seed),
    ]


def make_recognizer_corpus(
    n_lines: int,
    seed: int = 0,
    font_size: int = 22,
    min_words: int = 2,
    max_words: int = 4,
    recipes=None,
) -> list[tuple[str, np.ndarray]]:
    """Rendered lines in both fonts with per-line mild degradations."""
    from dataclasses import replace

    from .imaging import degrade

    pairs = make_line_set(
        n_lines, seed=seed, font_size=font_size, min_words=min_words, max_words=max_words
    )
    recipes = recipes if recipes is not None else mild_recipes()
    if not recipes:
        return pairs
    out = []
    for i, (text, img) in enumerate(pairs):
        recipe = replace(recipes[i % len(recipes)], seed=seed * 100003 + i)
        out.append((text, degrade(img, recipe)))
    return out


def make_page(
    texts: list[str],
    font_path: str | Path,
    font_size: int = 24,
    line_gap: int = 18,
    margin: int = 30,
) -> np.ndarray:
    """Stack rendered lines into one page image."""
    lines = [render_line(t, font_path, font_size=font_size, pad=2) for t in texts]
    width = max(l.shape[1] for l in lines) + 2 * margin
    height = sum(l.shape[0] for l in lines) + line_gap * (len(lines) - 1) + 2 * margin
    page = np.full((height, width), 255, dtype=np.uint8)
    y = margin
    for line in lines:
        h, w = line.shape
        page[y : y + h, margin : margin + w] = line
        y += h + line_gap
    return page


# ---------------------------------------------------------------------------
# lemma fixtures

GLOSSARY_XML = """<listentry>
<entry n="116" xml:id="gloss_a116">
  <form>aver</form>
  <gramGrp>
    <pos>verbe</pos>
    <subc>transitif</subc>
    <mood>infinitif</mood>
  </gramGrp>
  <re xml:id="gloss_a116_1">
    <form>avem</form>
  </re>
  <re xml:id="gloss_a116_11">
    <form>ac</form>
  </re>
</entry>
<entry n="57" xml:id="gloss_d57">
  <form>dos</form>
  <gramGrp>
    <pos>préposition</pos>
  </gramGrp>
</entry>
<entry n="16" xml:id="gloss_g16">
  <form>gens</form>
  <gramGrp>
    <pos>substantif</pos>
  </gramGrp>
</entry>
<entry n="30" xml:id="gloss_d30">
  <form>domna</form>
  <gramGrp><pos>substantif</pos></gramGrp>
</entry>
<entry n="5" xml:id="gloss_j5">
  <form>jorn</form>
  <gramGrp><pos>substantif</pos></gramGrp>
</entry>
<entry n="7" xml:id="gloss_o7">
  <form>ostal</form>
  <gramGrp><pos>substantif</pos></gramGrp>
</entry>
<entry n="73" xml:id="gloss_m73">
  <form>mostrar</form>
  <gramGrp><pos>verbe</pos></gramGrp>
</entry>
<entry n="47" xml:id="gloss_a47">
  <form>anar</form>
  <gramGrp><pos>verbe</pos></gramGrp>
  <re xml:id="gloss_a47_4">
    <form>anet</form>
  </re>
</entry>
<entry n="11" xml:id="gloss_q11">
  <form>que</form>
  <gramGrp><pos>conjonction</pos></gramGrp>
</entry>
<entry n="31" xml:id="gloss_p30">
  <form>per</form>
  <gramGrp><pos>préposition</pos></gramGrp>
</entry>
<entry n="9" xml:id="gloss_e9">
  <form>en</form>
  <gramGrp><pos>préposition</pos></gramGrp>
</entry>
</listentry>
"""

#: fixture words linked to their glossary entry (sub-entries where shown)
WORD_TO_GLOSS = {
    "ac": "gloss_a116_11",
    "aver": "gloss_a116",
    "avem": "gloss_a116_1",
    "dos": "gloss_d57",
    "gens": "gloss_g16",
    "domna": "gloss_d30",
    "jorn": "gloss_j5",
    "jorns": "gloss_j5",
    "ostal": "gloss_o7",
    "ostals": "gloss_o7",
    "mostrar": "gloss_m73",
    "anar": "gloss_a47",
    "anet": "gloss_a47_4",
    "que": "gloss_q11",
    "qu": "gloss_q11",
    "per": "gloss_p30",
    "en": "gloss_e9",
}

ROMAN_SAMPLES = ["II", "III", "IIII", "XII", "XVI"]

REFERENCE_LEXICON = [
    ("avẹr", "verbe", "DOM"),
    ("avars", "adjectif", "DOM"),
    ("da+lo2", "contraction", "DOM"),
    ("gẹn", "substantif", "DOM"),
    ("jọrn", "substantif", "DOM"),
    ("domna", "substantif", "DOM"),
    ("anar", "verbe", "DOM"),
    ("dire", "verbe", "DOM"),
    ("que", "conjonction", "DOM"),
    ("pẹr", "préposition", "DOM"),
    ("ẹn", "préposition", "DOM"),
    ("mostrar", "verbe", "DOM"),
    ("lo2", "article", "DOM"),
    ("ostal", "substantif", "DOM"),
    ("sol", "substantif", "DOM"),
    ("item", "adverbe", "DOM"),
]


def write_lexicon(path: str | Path) -> Path:
    path = Path(path)
    lines = ["\t".join(entry) for entry in REFERENCE_LEXICON]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_glossary(path: str | Path) -> Path:
    path = Path(path)
    path.write_text(GLOSSARY_XML, encoding="utf-8")
    return path


# demonstration convention profile: long s and r rotunda fold onto their
# graphemes, the tironian note and the tilde expand as abbreviations
DEMO_PROFILE = "\n".join(
    [f"char\t{c}" for c in "abcdefghijlmnopqrstuvxz ſꝛ⁊õ"]
    + [
        "allograph\tſ\ts",
        "allograph\tꝛ\tr",
        "abbrev\t⁊\tet",
        "abbrev\tõ\ton",
    ]
) + "\n"


def write_demo_profile(path: str | Path) -> Path:
    path = Path(path)
    path.write_text(DEMO_PROFILE, encoding="utf-8")
    return path


def write_corpus_source(path: str | Path, seed: int = 0, n_lines: int = 18) -> Path:
    """Accounts-style corpus with glossary references and numerals.

    Word tokens covered by the demo glossary carry a lemmaRef, so lemma
    injection after alignment yields enough annotated occurrences to
    train the lemmatizer on.
    """
    from .tei import Document, Element, Token, assign_ids, emit_tei

    rng = random.Random(seed)
    linked = [w for w in VOCABULARY if w in WORD_TO_GLOSS]
    item = Element("item", {"xml:id": "fixture_1"})
    for k in range(n_lines):
        line = Element("l", {"n": str(k + 1)})
        n_words = rng.randint(4, 7)
        for _ in range(n_words):
            # bias towards glossary-linked words so injection annotates most tokens
            word = rng.choice(linked) if rng.random() < 0.7 else rng.choice(VOCABULARY)
            ref = WORD_TO_GLOSS.get(word)
            line.children.append("\n")
            line.children.append(
                Token("word", word, lemma_ref=f"#{ref}" if ref else None)
            )
        if rng.random() < 0.5:
            line.children.append("\n")
            line.children.append(Token("word", rng.choice(ROMAN_SAMPLES)))
        line.children.append("\n")
        line.children.append(Token("punct", "."))
        line.children.append("\n")
        item.children.append("\n")
        item.children.append(line)
    item.children.append("\n")
    doc = Document(root=item)
    assign_ids(doc, "w", 1)
    path = Path(path)
    path.write_bytes(emit_tei(doc))
    return path


# ---------------------------------------------------------------------------
# morphology benchmark for the lemmatizer

ONSETS = ["b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "ch", "tr"]
NUCLEI = ["a", "e", "i", "o", "u", "ai", "au", "ei"]
SUFFIX_PARADIGM = ["ar", "at", "ava", "em", "eron", "an"]


def _make_stem(rng: random.Random) -> str:
    return "".join(rng.choice(ONSETS) + rng.choice(NUCLEI) for _ in range(2))


def make_morphology_corpus(
    n_lemmas: int = 40,
    occurrences_per_form: int | tuple[int, int] = (1, 3),
    seed: int = 0,
) -> list[tuple[str, str]]:
    """Regular paradigms: (surface, lemma) pairs.

    Every lemma is stem + "ar"; its surfaces are the stem combined with
    each suffix of the paradigm.  Generalizing to an unseen surface of
    a seen lemma amounts to recognizing the stem.  Varying the per-form
    occurrence count (the tuple form draws uniformly from the range)
    leaves some surfaces single-occurrence, so a held-out split
    naturally contains unknown forms.
    """
    rng = random.Random(seed)
    stems: list[str] = []
    seen = set()
    while len(stems) < n_lemmas:
        stem = _make_stem(rng)
        if stem not in seen:
            seen.add(stem)
            stems.append(stem)
    pairs = []
    for stem in stems:
        lemma = stem + "ar"
        for suffix in SUFFIX_PARADIGM:
            if isinstance(occurrences_per_form, tuple):
                count = rng.randint(*occurrences_per_form)
            else:
                count = occurrences_per_form
            for _ in range(count):
                pairs.append((stem + suffix, lemma))
    rng.shuffle(pairs)
    return pairs
