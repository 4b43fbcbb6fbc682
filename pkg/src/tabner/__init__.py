"""Sub-cell named entity recognition in tables."""
from .errors import TabnerError
from .table import Cell, Corpus, CorpusStats, NerTag, Table, column, compute_stats, entity_types_in, read_corpus, write_corpus
from .encoding import LinearizedInput, Vocabulary, build_vocab, linearize, visibility_matrix
from .model import EncoderConfig, EncoderModel, backward, forward, loss
from .training import TrainConfig, train
from .rdl import RdlGraph, load_graph
from .augment import AugmentConfig, TagPattern, generate_tag, lwtr_augment, rdltab_augment
from .rule_ner import rule_predict, rule_predict_corpus
from .metrics import EvalReport, evaluate

__version__ = "0.1.0"
