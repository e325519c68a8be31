"""Character inventory shared by transcription conventions and the recognizer.

Index 0 is reserved for the CTC blank and is never a transcribable
symbol; real symbols occupy indices 1..K in declaration order.
"""

from __future__ import annotations

from collections.abc import Iterable


class UnknownSymbolError(ValueError):
    def __init__(self, symbol: str, offset: int | None = None):
        self.symbol = symbol
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"symbol {symbol!r} not in inventory{where}")


class CharacterInventory:
    """Ordered set of output symbols with a reserved blank at index 0."""

    BLANK = "␀"  # display symbol for the blank; not transcribable

    def __init__(self, symbols: Iterable[str]):
        symbols = list(symbols)
        seen = set()
        for s in symbols:
            if len(s) != 1:
                raise ValueError(f"inventory symbols are single chars, got {s!r}")
            if s in seen:
                raise ValueError(f"duplicate inventory symbol {s!r}")
            seen.add(s)
        self.symbols = symbols
        self._index = {s: i + 1 for i, s in enumerate(symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, CharacterInventory) and self.symbols == other.symbols

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise UnknownSymbolError(symbol) from None

    def symbol(self, index: int) -> str:
        if index == 0:
            return self.BLANK
        return self.symbols[index - 1]

    def encode(self, text: str) -> list[int]:
        out = []
        for offset, c in enumerate(text):
            if c not in self._index:
                raise UnknownSymbolError(c, offset)
            out.append(self._index[c])
        return out

    def decode(self, indices: Iterable[int]) -> str:
        return "".join(self.symbol(i) for i in indices if i != 0)

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "CharacterInventory":
        chars = sorted({c for text in texts for c in text})
        return cls(chars)
