"""Turning a sense lexicon into index grids.

Each word gets an r x o grid of unit ids: row 0 holds its morphemes, the
remaining rows hold one sense each. Run with ``python demos/01_lexicon_grids.py``.
"""
import io

from see_embedding import (PAD_ID, ZERO_ID, build_unit_vocab, compile_table, coverage_stats,
                           parse_lexicon, segment_morphemes)

# word <TAB> morphemes ("-" = segment automatically) <TAB> senses, ";" between senses
LEXICON = """\
chair\t-\tComeTogether|manage|fact;furniture|sit
power\t-\tphysical|PhysicsPower;AnimalHuman|Power|politics;math|symbol|Quantity;country|place|politics;machine|function|Strength
friendly\tfriend ly\tattribute|behavior|kind
"""

lex = parse_lexicon(io.StringIO(LEXICON))
for word in ("unfriendly", "chair", "reheating"):
    print(f"{word:12s} -> {segment_morphemes(word)}")

# "unkindly" is not in the lexicon; passing it as a token gives its
# morphemes ids so its row 0 is still informative.
tokens = ["chair", "power", "friendly", "unkindly"]
vocab = build_unit_vocab(lex, tokens)
print(f"\n{vocab.size} units: {vocab.n_morphemes} morphemes, {vocab.n_sememes} sememes, 2 reserved")

table = compile_table(lex, tokens, vocab, r=5, o=3)
names = {PAD_ID: "<pad>", ZERO_ID: "<zero>"}
for word in ("chair", "power"):
    print(f"\n{word}:")
    for row in table.grid(word).grid:
        print("   ", [names.get(int(u), vocab.units[int(u)]) for u in row])

# power has five senses but r=5 leaves room for four; the last one is dropped.
print()
for key, value in coverage_stats(table).as_dict().items():
    print(f"{key:18s} {value}")
