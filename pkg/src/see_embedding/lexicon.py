"""Sememe/morpheme lexicons and their compilation into per-word index grids.

Lexicon file format (UTF-8, one record per line)::

    word<TAB>morph1,morph2,...<TAB>sememeA|sememeB;sememeC|sememeD

Senses are separated by ``;`` and sememes inside a sense by ``|``. A
morpheme field of ``-`` asks for fallback segmentation. Blank lines and
lines starting with ``#`` are ignored.

A word with ``r x o`` basic units is laid out as an ``r x o`` grid of unit
ids: row 0 holds the word's morphemes, rows ``1..r-1`` hold one sense each.
Partially filled rows are padded with :data:`PAD_ID` (a trainable unit);
rows for senses the word does not have are filled with :data:`ZERO_ID`
(a frozen all-zeros unit), so they add nothing to the reconstruction.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

PAD_ID = 0
ZERO_ID = 1
PAD_UNIT = "<pad>"
ZERO_UNIT = "<zero>"

MIN_STEM = 4


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class LexiconRecord:
    word: str
    morphemes: tuple[str, ...]
    senses: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.word:
            raise LexiconError("empty word")
        if len(self.morphemes) == 0 or any(not m for m in self.morphemes):
            raise LexiconError(f"{self.word!r}: morpheme list must be non-empty")
        for s in self.senses:
            if len(s) == 0 or any(not x for x in s):
                raise LexiconError(f"{self.word!r}: every sense needs at least one sememe")


@dataclass
class Lexicon:
    records: list[LexiconRecord] = field(default_factory=list)

    def __post_init__(self):
        self._by_word: dict[str, LexiconRecord] = {}
        for rec in self.records:
            if rec.word in self._by_word:
                raise LexiconError(f"duplicate word {rec.word!r}")
            self._by_word[rec.word] = rec

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __contains__(self, word):
        return word in self._by_word

    def __getitem__(self, word) -> LexiconRecord:
        return self._by_word[word]

    def get(self, word, default=None):
        return self._by_word.get(word, default)

    def __eq__(self, other):
        return isinstance(other, Lexicon) and self.records == other.records


# -- morpheme segmentation -------------------------------------------------


@functools.lru_cache(maxsize=None)
def builtin_affixes() -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(prefixes, suffixes) from the shipped affix list, longest first."""
    text = resources.files("see_embedding").joinpath("data/affixes.txt").read_text("utf-8")
    prefixes, suffixes = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        kind, affix = line.split()
        (prefixes if kind == "prefix" else suffixes).append(affix)
    key = lambda a: (-len(a), a)
    return tuple(sorted(prefixes, key=key)), tuple(sorted(suffixes, key=key))


def _strip_affixes(word: str) -> list[str]:
    prefixes, suffixes = builtin_affixes()
    head, stem = [], word
    for p in prefixes:
        if stem.startswith(p) and len(stem) - len(p) >= MIN_STEM:
            head.append(p)
            stem = stem[len(p):]
            break
    tail: list[str] = []
    for _ in range(2):
        for s in suffixes:
            if stem.endswith(s) and len(stem) - len(s) >= MIN_STEM:
                tail.insert(0, s)
                stem = stem[: -len(s)]
                break
        else:
            break
    return head + [stem] + tail


def segment_morphemes(word: str, table: Mapping[str, Sequence[str]] | None = None) -> list[str]:
    """Morphemes of ``word``: table lookup first, else longest-match affix stripping.

    Never empty; a word with no matching affix is its own single morpheme.
    """
    if not word:
        raise ValueError("word must be non-empty")
    if table is not None and word in table and len(table[word]) > 0:
        return list(table[word])
    return _strip_affixes(word)


def load_morpheme_table(stream: TextIO) -> dict[str, list[str]]:
    """Read ``word<TAB>m1,m2,...`` lines."""
    table = {}
    for n, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1]:
            raise LexiconError(f"line {n}: expected 'word<TAB>morphemes'")
        table[parts[0]] = [m for m in parts[1].split(",") if m]
    return table


# -- parsing ---------------------------------------------------------------


def parse_lexicon(stream: TextIO | str, morpheme_table=None) -> Lexicon:
    if isinstance(stream, str):
        stream = stream.splitlines()
    records = []
    seen: dict[str, int] = {}
    for n, line in enumerate(stream, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise LexiconError(f"line {n}: expected 3 tab-separated fields, got {len(parts)}")
        word, morph_field, sense_field = parts
        if not word:
            raise LexiconError(f"line {n}: empty word")
        if word in seen:
            raise LexiconError(f"line {n}: duplicate word {word!r} (first on line {seen[word]})")
        seen[word] = n
        if morph_field == "-":
            morphemes = segment_morphemes(word, morpheme_table)
        else:
            morphemes = morph_field.split(",")
            if any(not m for m in morphemes):
                raise LexiconError(f"line {n}: empty morpheme in {morph_field!r}")
        senses = []
        if sense_field:
            for sense in sense_field.split(";"):
                sememes = sense.split("|")
                if any(not s for s in sememes):
                    raise LexiconError(f"line {n}: sense {sense!r} has an empty sememe")
                senses.append(tuple(sememes))
        records.append(LexiconRecord(word, tuple(morphemes), tuple(senses)))
    return Lexicon(records)


def serialize_lexicon(lex: Lexicon) -> str:
    lines = []
    for rec in lex:
        senses = ";".join("|".join(s) for s in rec.senses)
        lines.append(f"{rec.word}\t{','.join(rec.morphemes)}\t{senses}\n")
    return "".join(lines)


# -- unit vocabulary -------------------------------------------------------


@dataclass
class UnitVocab:
    """Joint id space over morphemes and sememes plus the two reserved units.

    Morphemes and sememes are separate namespaces: the same string used as a
    morpheme and as a sememe gets two ids.
    """

    units: list[str] = field(default_factory=lambda: [PAD_UNIT, ZERO_UNIT])
    kinds: list[str] = field(default_factory=lambda: ["reserved", "reserved"])
    morphemes: dict[str, int] = field(default_factory=dict)
    sememes: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.units)

    @property
    def n_morphemes(self) -> int:
        return len(self.morphemes)

    @property
    def n_sememes(self) -> int:
        return len(self.sememes)

    def _add(self, name: str, kind: str) -> int:
        table = self.morphemes if kind == "morpheme" else self.sememes
        if name not in table:
            table[name] = len(self.units)
            self.units.append(name)
            self.kinds.append(kind)
        return table[name]

    def morpheme_id(self, name: str) -> int:
        try:
            return self.morphemes[name]
        except KeyError:
            raise LexiconError(f"unknown morpheme {name!r}") from None

    def sememe_id(self, name: str) -> int:
        try:
            return self.sememes[name]
        except KeyError:
            raise LexiconError(f"unknown sememe {name!r}") from None


def build_unit_vocab(lex: Lexicon, tokens: Iterable[str] | None = None, morpheme_table=None) -> UnitVocab:
    """Assign ids in first-appearance order (morphemes then sememes, per record).

    ``tokens`` optionally adds the fallback morphemes of out-of-lexicon tokens,
    after all lexicon units.
    """
    vocab = UnitVocab()
    for rec in lex:
        for m in rec.morphemes:
            vocab._add(m, "morpheme")
        for sense in rec.senses:
            for s in sense:
                vocab._add(s, "sememe")
    if tokens is not None:
        for tok in tokens:
            if tok not in lex:
                for m in segment_morphemes(tok, morpheme_table):
                    vocab._add(m, "morpheme")
    return vocab


# -- grids -----------------------------------------------------------------


@dataclass(frozen=True)
class IndexGrid:
    grid: np.ndarray  # (r, o) int64 unit ids
    dropped_senses: int = 0

    @property
    def r(self) -> int:
        return self.grid.shape[0]

    @property
    def o(self) -> int:
        return self.grid.shape[1]


def _fit_row(ids: list[int], o: int) -> list[int]:
    return ids[:o] + [PAD_ID] * max(0, o - len(ids))


def _grid_from(morph_ids: list[int], sense_ids: list[list[int]], r: int, o: int) -> IndexGrid:
    if r < 2 or o < 1:
        raise ValueError(f"need r >= 2 and o >= 1, got r={r}, o={o}")
    grid = np.full((r, o), ZERO_ID, dtype=np.int64)
    grid[0] = _fit_row(morph_ids, o)
    kept = sense_ids[: r - 1]
    for j, ids in enumerate(kept, start=1):
        grid[j] = _fit_row(ids, o)
    grid.setflags(write=False)
    return IndexGrid(grid, dropped_senses=len(sense_ids) - len(kept))


def compile_grid(rec: LexiconRecord, vocab: UnitVocab, r: int, o: int) -> IndexGrid:
    """Lay out ``rec`` as an ``r x o`` grid; keeps the first ``r-1`` senses and first ``o`` units per row."""
    morph_ids = [vocab.morpheme_id(m) for m in rec.morphemes]
    sense_ids = [[vocab.sememe_id(s) for s in sense] for sense in rec.senses]
    return _grid_from(morph_ids, sense_ids, r, o)


@dataclass(frozen=True)
class GridTable:
    tokens: tuple[str, ...]
    grids: np.ndarray  # (|V|, r, o) int64
    oov: np.ndarray  # (|V|,) bool
    dropped_senses: np.ndarray  # (|V|,) int64
    vocab_size: int

    def __post_init__(self):
        object.__setattr__(self, "word_ids", {w: i for i, w in enumerate(self.tokens)})
        for a in (self.grids, self.oov, self.dropped_senses):
            a.setflags(write=False)

    @property
    def r(self) -> int:
        return self.grids.shape[1]

    @property
    def o(self) -> int:
        return self.grids.shape[2]

    def __len__(self):
        return len(self.tokens)

    def grid(self, word: str) -> IndexGrid:
        i = self.word_ids[word]
        return IndexGrid(self.grids[i], int(self.dropped_senses[i]))


def compile_table(lex: Lexicon, tokens: Sequence[str], vocab: UnitVocab, r: int, o: int,
                  morpheme_table=None) -> GridTable:
    """One grid per token. Tokens missing from the lexicon get morpheme-only grids."""
    if len(tokens) == 0:
        raise ValueError("token vocabulary is empty")
    if len(set(tokens)) != len(tokens):
        raise ValueError("token vocabulary has duplicates")
    grids = np.empty((len(tokens), r, o), dtype=np.int64)
    oov = np.zeros(len(tokens), dtype=bool)
    dropped = np.zeros(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        rec = lex.get(tok)
        if rec is None:
            oov[i] = True
            morph_ids = [vocab.morpheme_id(m) for m in segment_morphemes(tok, morpheme_table)]
            g = _grid_from(morph_ids, [], r, o)
        else:
            g = compile_grid(rec, vocab, r, o)
        grids[i] = g.grid
        dropped[i] = g.dropped_senses
    return GridTable(tuple(tokens), grids, oov, dropped, vocab.size)


@dataclass(frozen=True)
class CoverageStats:
    words: int
    oov_fraction: float
    mean_senses: float
    truncated_senses: int
    pad_fill_rate: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def coverage_stats(table: GridTable) -> CoverageStats:
    g = table.grids
    present = ~np.all(g == ZERO_ID, axis=2)  # (V, r); row 0 is always present
    senses = present[:, 1:].sum(axis=1)
    cells = present.sum() * table.o
    pads = ((g == PAD_ID) & present[:, :, None]).sum()
    return CoverageStats(
        words=len(table),
        oov_fraction=float(table.oov.mean()),
        mean_senses=float(senses.mean()),
        truncated_senses=int(table.dropped_senses.sum()),
        pad_fill_rate=float(pads / cells) if cells else 0.0,
    )
