import json
from pathlib import Path

import pytest

from citriage.builds import (
    BuildKind,
    BuildRef,
    BuildStatus,
    ConsoleLog,
    FixtureBuildStore,
    PipelineBuild,
    load_fixture,
)
from citriage.gateway import ChatGateway, ChatMessage, Role, ScriptedBackend, ScriptedExchange
from citriage.harness.corpus import generate_corpus
from citriage.knowledge import HistoryDb, KnowledgeBase

DATA_DIR = Path(__file__).parent / "data"
FIXTURES_DIR = Path(__file__).parent.parent / "fixtures"

CORPUS_SEED = 0


def make_build(
    name,
    number,
    status=BuildStatus.FAILURE,
    kind=BuildKind.FREESTYLE_JOB,
    log=(),
    parent=None,
):
    return PipelineBuild(
        ref=BuildRef(name, number),
        status=status,
        kind=kind,
        console_log=ConsoleLog.of(log),
        parent=parent,
    )


def make_store(*builds) -> FixtureBuildStore:
    return FixtureBuildStore({b.ref: b for b in builds})


def assistant_reply(content: str) -> ChatMessage:
    return ChatMessage(role=Role.ASSISTANT, content=content)


def scripted_gateway(*exchanges: ScriptedExchange) -> ChatGateway:
    return ChatGateway(backend=ScriptedBackend(list(exchanges)))


@pytest.fixture
def chain3_store():
    return load_fixture(DATA_DIR / "chain3.json")


@pytest.fixture(scope="session")
def corpus_bundle():
    return generate_corpus(CORPUS_SEED)


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def corpus_kb(corpus_bundle, tmp_path):
    db = HistoryDb(tmp_path / "history.jsonl")
    for record in corpus_bundle.history_records:
        db.add_record(record)
    return KnowledgeBase(
        pipeline_information=corpus_bundle.pipeline_information,
        failure_management_instructions=corpus_bundle.failure_management_instructions,
        finder_knowledge=corpus_bundle.finder_knowledge,
        history=db,
    )


def load_replay_exchanges(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return doc["exchanges"]
