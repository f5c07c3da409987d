import numpy as np
import pytest

from smt_analogy.dag import SmtDag
from smt_analogy.synth import GenParams
from smt_analogy.vocab import default_vocab


def chain() -> SmtDag:
    return SmtDag.build([("relation", "rel0"), ("function", "fn0a"), ("entity", "ent0a")], [(0, 1, 0), (1, 2, 0)], "chain")


def diamond() -> SmtDag:
    return SmtDag.build(
        [("relation", "rel0"), ("function", "fn0a"), ("function", "fn1a"), ("entity", "ent0a")],
        [(0, 1, 0), (0, 2, 1), (1, 3, 0), (2, 3, 0)],
        "diamond",
    )


@pytest.fixture(scope="session")
def vocab():
    return default_vocab()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SMALL = GenParams(depth_min=2, depth_max=4, max_nodes=15, distractor=0.3, relabel=0.0, base_max_nodes=8)


@pytest.fixture(scope="session")
def small_encoder(vocab):
    """A quickly trained encoder, shared by pipeline and CLI tests."""
    from smt_analogy.embedding import EmbedConfig, train_encoder
    from smt_analogy.synth import generate_dag

    corpus = [generate_dag(GenParams(depth_min=2, depth_max=4), s) for s in range(30)]
    cfg = EmbedConfig(layers=3, hidden=16, dim=16, steps=150, lr=3e-3, pairs=100)
    return train_encoder(cfg, corpus, vocab).params


@pytest.fixture(scope="session")
def model_file(small_encoder, vocab, tmp_path_factory):
    from smt_analogy.fileio import write_checkpoint

    path = tmp_path_factory.mktemp("model") / "model.json"
    write_checkpoint(path, small_encoder, vocab)
    return path


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
