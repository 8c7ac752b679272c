import pytest
import torch

from linecomp.asdl import default_grammar
from linecomp.synth import bundled_corpus, generate_corpus
from linecomp.pycorpus import tokenize_file


def pytest_configure(config):
    torch.set_num_threads(max(1, torch.get_num_threads()))


@pytest.fixture(scope="session")
def grammar():
    return default_grammar()


@pytest.fixture(scope="session")
def corpus():
    """The bundled hand-written corpus as (name, lines) pairs."""
    return bundled_corpus()


@pytest.fixture(scope="session")
def toy_files():
    """Ten small synthetic files with distinct first lines."""
    return [tokenize_file(t) for t in generate_corpus(10, seed=0)]
