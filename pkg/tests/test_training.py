import numpy as np
import pytest

from tabner.augment import AugmentConfig, RdlTabAugmenter
from tabner.encoding import build_vocab
from tabner.errors import DivergenceError, EmptyInputError
from tabner.model import EncoderConfig, EncoderModel
from tabner.synth import generate_synthetic_corpus, graph_tokens, make_synthetic_graph
from tabner.table import Corpus
from tabner.training import TrainConfig, learning_rate_at, predict_corpus, train

SMALL = EncoderConfig(d_model=16, n_heads=2, n_layers=1, d_ff=32, max_position=64)


@pytest.fixture(scope="module")
def setup():
    g = make_synthetic_graph(20, seed=0)
    corpus = generate_synthetic_corpus(g, 8, 3, seed=0)
    vocab = build_vocab(corpus).extend(graph_tokens(g))
    return g, corpus, vocab


def test_lr_schedule_endpoints():
    cfg = TrainConfig(learning_rate=0.1, max_epochs=10)
    assert learning_rate_at(cfg, 0) == 0.1
    assert learning_rate_at(cfg, 9) == pytest.approx(0.01)
    assert learning_rate_at(cfg, cfg.max_epochs) == 0.0


def test_loss_falls(setup):
    g, corpus, vocab = setup
    model = EncoderModel.init(SMALL, len(vocab), seed=0)
    cfg = TrainConfig(learning_rate=0.05, batch_size=2, max_epochs=15, early_stop_patience=15)
    res = train(model, corpus.subset(range(6)), corpus.subset([6, 7]), cfg, vocab)
    losses = [r.train_loss for r in res.trace]
    assert losses[-1] < 0.5 * losses[0]
    assert res.best_epoch == res.peak_valid_epoch


def test_augmented_stream_size(setup):
    g, corpus, vocab = setup
    tr = corpus.subset(range(6))
    aug = RdlTabAugmenter(g, tr, AugmentConfig(n_samples=1))
    model = EncoderModel.init(SMALL, len(vocab), seed=0)
    cfg = TrainConfig(max_epochs=2, early_stop_patience=5)
    res = train(model, tr, corpus.subset([6]), cfg, vocab, aug)
    assert [r.n_examples for r in res.trace] == [12, 12]


def test_deterministic(setup):
    g, corpus, vocab = setup
    tr = corpus.subset(range(6))
    aug = RdlTabAugmenter(g, tr, AugmentConfig())
    cfg = TrainConfig(max_epochs=3)
    runs = [train(EncoderModel.init(SMALL, len(vocab), seed=3), tr, corpus.subset([7]), cfg, vocab, aug)
            for _ in range(2)]
    assert runs[0].trace == runs[1].trace
    for k in runs[0].model.params:
        np.testing.assert_array_equal(runs[0].model.params[k], runs[1].model.params[k])


def test_early_stopping_restores_best(setup):
    g, corpus, vocab = setup
    model = EncoderModel.init(SMALL, len(vocab), seed=0)
    # tiny rate: validation F1 stays flat, so patience runs out
    cfg = TrainConfig(learning_rate=1e-9, max_epochs=20, early_stop_patience=2)
    res = train(model, corpus.subset(range(6)), corpus.subset([6]), cfg, vocab)
    assert res.stopped_early and len(res.trace) == 3 and res.best_epoch == 1
    pred = predict_corpus(res.model, vocab, corpus.subset([7]))
    assert pred[0].id == corpus[7].id and pred[0].is_tagged()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence(setup):
    g, corpus, vocab = setup
    model = EncoderModel.init(SMALL, len(vocab), seed=0)
    model.params["cls_w"][:] = np.inf
    with pytest.raises(DivergenceError):
        train(model, corpus.subset(range(6)), corpus.subset([6]), TrainConfig(max_epochs=1), vocab)


def test_empty_split(setup):
    g, corpus, vocab = setup
    model = EncoderModel.init(SMALL, len(vocab), seed=0)
    with pytest.raises(EmptyInputError):
        train(model, corpus, Corpus([]), TrainConfig(), vocab)
