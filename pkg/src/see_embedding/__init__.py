"""Sememe-entanglement embeddings: lexicon compilation, Kronecker-factor
reconstruction, parameter accounting, baselines and distillation losses."""

from .embedding import (FactorStore, MaterializedTable, SeeConfig, count_params, factor_dim,
                        init_factors, materialize, param_count, reconstruct_backward,
                        reconstruct_row, solve_m_for_ratio)
from .lexicon import (PAD_ID, ZERO_ID, GridTable, IndexGrid, Lexicon, LexiconError, LexiconRecord,
                      UnitVocab, build_unit_vocab, compile_grid, compile_table, coverage_stats,
                      parse_lexicon, segment_morphemes, serialize_lexicon)
from .tensor_core import finite_diff_check, kron, kron_chain, kron_chain_backward

__version__ = "0.1.0"
