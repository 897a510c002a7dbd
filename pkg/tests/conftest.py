import numpy as np
import pytest

from spokentopic import pipeline
from spokentopic.config import ModelConfig
from spokentopic.synthcorpus import CorpusSpec, generate_corpus


def tiny_corpus_spec(**overrides) -> CorpusSpec:
    base = dict(num_topics=4, word_vocab=12, topic_words=2, phoneme_vocab=6, d_feat=8,
                words_per_doc=(3, 5), n_train=64, n_dev=8, n_test=16, seed=0)
    base.update(overrides)
    return CorpusSpec(**base)


def tiny_model_config(**overrides) -> ModelConfig:
    base = dict(d_feat=8, phoneme_vocab=6, word_vocab=12, num_topics=4, input_proj_dim=8,
                a2p_layers=1, a2p_hidden=8, p2w_layers=1, p2w_hidden=8, head_hidden=8,
                head_fc_dim=8, num_heads=2, max_len=64, epochs_a2p=8, epochs_p2w=8,
                epochs_fusion=3, lr_a2p=2e-2, lr_p2w=2e-2, batch_size=8, seed=0)
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_corpus():
    return generate_corpus(tiny_corpus_spec())


@pytest.fixture(scope="session")
def tiny_config():
    return tiny_model_config()


@pytest.fixture(scope="session")
def tiny_stages(tiny_corpus, tiny_config):
    """A2P and P2W checkpoints trained on the tiny corpus."""
    a2p = pipeline.train_stage("a2p", tiny_corpus.train, tiny_config)
    p2w = pipeline.train_stage("p2w", tiny_corpus.train, tiny_config, {"a2p": a2p})
    return {"a2p": a2p, "p2w": p2w}


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
