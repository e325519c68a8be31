"""Transcription conventions: allograph folding and abbreviation expansion.

A profile declares the character inventory, an allograph-to-grapheme
map (e.g. long s to s) and an ordered table of abbreviation rules.
Expansion keeps the observed text and the interpreted text side by
side, with spans linking the two so either can be reconstructed.

Profile file format (UTF-8, one declaration per line, TAB separated):

    char<TAB>x            declare an inventory symbol
    allograph<TAB>ſ<TAB>s map an allograph onto its grapheme
    abbrev<TAB>õ<TAB>on   expansion rule, applied in declared order

Blank lines and lines starting with '#' are ignored.  Abbreviation
patterns are literal strings where '?' matches any single character;
a '?' in the expansion copies the matched character in order.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .inventory import CharacterInventory


class ProfileError(ValueError):
    """Profile file failed validation; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(message + where)


class TranscriptionError(ValueError):
    def __init__(self, char: str, offset: int):
        self.char = char
        self.offset = offset
        super().__init__(f"character {char!r} at offset {offset} not in inventory")


@dataclass(frozen=True)
class AbbrevRule:
    rule_id: int
    pattern: str
    expansion: str

    def match_at(self, text: str, pos: int) -> str | None:
        """Expansion if the pattern matches at pos, else None."""
        end = pos + len(self.pattern)
        if end > len(text):
            return None
        captured = []
        for pc, tc in zip(self.pattern, text[pos:end]):
            if pc == "?":
                captured.append(tc)
            elif pc != tc:
                return None
        out = []
        it = iter(captured)
        for ec in self.expansion:
            out.append(next(it) if ec == "?" else ec)
        return "".join(out)


@dataclass
class ConventionProfile:
    inventory: CharacterInventory
    allograph_map: dict[str, str] = field(default_factory=dict)
    abbrev_rules: list[AbbrevRule] = field(default_factory=list)


@dataclass
class DualText:
    """Observed and interpreted state of the same passage.

    rule_spans holds ((obs_start, obs_end), (int_start, int_end), rule_id)
    for every applied expansion; splicing the observed slices back into
    the interpreted text reverses the expansion exactly.
    """

    observed: str
    interpreted: str
    rule_spans: list[tuple[tuple[int, int], tuple[int, int], int]] = field(
        default_factory=list
    )

    def revert(self) -> str:
        """Reconstruct the observed text from interpreted + spans."""
        out = []
        int_pos = 0
        obs_pos = 0
        for (o0, o1), (i0, i1), _rule in self.rule_spans:
            out.append(self.interpreted[int_pos:i0])
            out.append(self.observed[o0:o1])
            int_pos = i1
            obs_pos = o1
        out.append(self.interpreted[int_pos:])
        return "".join(out)


def _check_rule_cycles(rules: list[AbbrevRule]) -> None:
    # conservative: rule A feeds rule B if B's pattern could match inside
    # A's expansion (wildcards treated as matching anything)
    def may_contain(expansion: str, pattern: str) -> bool:
        if not pattern:
            return False
        for start in range(len(expansion) - len(pattern) + 1):
            ok = True
            for pc, ec in zip(pattern, expansion[start:]):
                if pc != "?" and ec != "?" and pc != ec:
                    ok = False
                    break
            if ok:
                return True
        return False

    edges = {
        a.rule_id: {b.rule_id for b in rules if may_contain(a.expansion, b.pattern)}
        for a in rules
    }
    visiting: set[int] = set()
    done: set[int] = set()

    def visit(node: int) -> None:
        if node in done:
            return
        if node in visiting:
            raise ProfileError(f"cyclic abbreviation rules involving rule {node}")
        visiting.add(node)
        for nxt in edges[node]:
            visit(nxt)
        visiting.discard(node)
        done.add(node)

    for rule in rules:
        visit(rule.rule_id)


def load_profile(path: str | Path) -> ConventionProfile:
    """Parse and validate a convention profile file."""
    chars: list[str] = []
    allographs: dict[str, str] = {}
    allograph_lines: dict[str, int] = {}
    raw_rules: list[tuple[int, str, str]] = []

    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        kind = fields[0].strip()
        if kind == "char" and len(fields) == 2:
            chars.append(unicodedata.normalize("NFC", fields[1]))
        elif kind == "allograph" and len(fields) == 3:
            key = unicodedata.normalize("NFC", fields[1])
            if key in allographs:
                raise ProfileError(f"duplicate allograph {key!r}", lineno)
            allographs[key] = unicodedata.normalize("NFC", fields[2])
            allograph_lines[key] = lineno
        elif kind == "abbrev" and len(fields) == 3:
            raw_rules.append(
                (
                    lineno,
                    unicodedata.normalize("NFC", fields[1]),
                    unicodedata.normalize("NFC", fields[2]),
                )
            )
        else:
            raise ProfileError(f"unrecognized declaration {line!r}", lineno)

    if not chars:
        raise ProfileError("profile declares an empty inventory")
    try:
        inventory = CharacterInventory(chars)
    except ValueError as exc:
        raise ProfileError(str(exc)) from exc

    for key, value in allographs.items():
        if key not in inventory:
            raise ProfileError(
                f"allograph {key!r} not declared in inventory", allograph_lines[key]
            )
        if value not in inventory:
            raise ProfileError(
                f"allograph {key!r} maps to {value!r} outside the inventory",
                allograph_lines[key],
            )

    rules = []
    for order, (lineno, pattern, expansion) in enumerate(raw_rules):
        if not pattern:
            raise ProfileError("empty abbreviation pattern", lineno)
        for c in pattern + expansion:
            if c != "?" and c not in inventory:
                raise ProfileError(
                    f"abbreviation uses {c!r} outside the inventory", lineno
                )
        rules.append(AbbrevRule(order, pattern, expansion))
    _check_rule_cycles(rules)

    return ConventionProfile(inventory, allographs, rules)


def save_profile(profile: ConventionProfile, path: str | Path) -> None:
    lines = [f"char\t{c}" for c in profile.inventory.symbols]
    lines += [f"allograph\t{k}\t{v}" for k, v in profile.allograph_map.items()]
    lines += [f"abbrev\t{r.pattern}\t{r.expansion}" for r in profile.abbrev_rules]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def to_graphematic(text: str, profile: ConventionProfile) -> str:
    """Collapse allographs onto their graphemes, char by char."""
    out = []
    for offset, c in enumerate(text):
        if c not in profile.inventory:
            raise TranscriptionError(c, offset)
        out.append(profile.allograph_map.get(c, c))
    return "".join(out)


def expand_abbreviations(text: str, profile: ConventionProfile) -> DualText:
    """Single left-to-right pass of the abbreviation rules.

    At each position the longest matching pattern wins; equal lengths
    fall back to declaration order.  Expanded regions are never
    rescanned, so rule output cannot trigger further rules.
    """
    observed = text
    out: list[str] = []
    spans: list[tuple[tuple[int, int], tuple[int, int], int]] = []
    pos = 0
    int_len = 0
    while pos < len(observed):
        best: tuple[int, int, str] | None = None  # (-len, order, expansion)
        for rule in profile.abbrev_rules:
            expansion = rule.match_at(observed, pos)
            if expansion is None:
                continue
            key = (-len(rule.pattern), rule.rule_id)
            if best is None or key < (best[0], best[1]):
                best = (key[0], key[1], expansion)
        if best is None:
            out.append(observed[pos])
            int_len += 1
            pos += 1
            continue
        neg_len, rule_id, expansion = best
        pat_len = -neg_len
        spans.append(
            ((pos, pos + pat_len), (int_len, int_len + len(expansion)), rule_id)
        )
        out.append(expansion)
        int_len += len(expansion)
        pos += pat_len
    return DualText(observed, "".join(out), spans)


def validate_transcription(text: str, profile: ConventionProfile) -> list[tuple[int, str]]:
    """Offsets and characters not covered by the inventory; [] when clean."""
    return [(i, c) for i, c in enumerate(text) if c not in profile.inventory]
