"""Ziv-Merhav cross-entropy estimation with exact Markov and hidden-Markov oracles."""

from .core import Alphabet, RngStream, Sequence, read_sequence, shift, write_sequence
from .errors import (
    AlphabetError,
    BudgetExceeded,
    ConfigError,
    ModelError,
    NotFound,
    SequenceParseError,
    SupportViolation,
    ZmError,
)
from .matcher import MatchIndex, build_index, contains, longest_prefix_match, waiting_time
from .parsers import block_parse, classify_blocks, count_words_matched, lz78_parse, threshold_parse, zm_parse
from .sources import HmmModel, MarkovModel, load_model, lump, model_from_json, stationary_distribution

__version__ = "0.1.0"
