import json
from collections import Counter

import pytest

from citriage.builds import BuildStatus, store_to_document
from citriage.errors import ProfileMismatch
from citriage.harness.corpus import (
    CAUSE_CATALOG,
    DEFAULT_CAUSE_FREQUENCIES,
    DEFAULT_JOB_FREQUENCIES,
    DEFAULT_PROFILE,
    JOB_NAMES,
    PLANTED_PII_STRINGS,
    DistributionProfile,
    generate_corpus,
    write_corpus,
)
from citriage.harness.scoring import Rounds
from citriage.harness.scripts import walk_failed_chain

from conftest import CORPUS_SEED


@pytest.fixture(scope="module")
def bundle():
    return generate_corpus(CORPUS_SEED)


def test_default_profile_counts(bundle):
    assert len(bundle.truths) == 76
    job_hist = Counter(t.expected_most_downstream.pipeline_name for t in bundle.truths)
    assert sorted(job_hist.values(), reverse=True) == sorted(
        DEFAULT_JOB_FREQUENCIES, reverse=True
    )
    assert [job_hist[name] for name in JOB_NAMES] == list(DEFAULT_JOB_FREQUENCIES)

    cause_hist = Counter(t.cause_id for t in bundle.truths)
    assert [cause_hist[c.cause_id] for c in CAUSE_CATALOG] == list(
        DEFAULT_CAUSE_FREQUENCIES
    )

    rounds = Counter(t.rounds for t in bundle.truths)
    assert rounds[Rounds.ONE_ROUND] == 59
    assert rounds[Rounds.TWO_ROUND] == 17


def test_distinct_label_counts(bundle):
    assert len({t.expected_most_downstream.pipeline_name for t in bundle.truths}) == 13
    assert len({t.cause_id for t in bundle.truths}) == 18


def test_same_seed_is_byte_identical(tmp_path):
    a = generate_corpus(CORPUS_SEED)
    b = generate_corpus(CORPUS_SEED)
    assert json.dumps(store_to_document(a.store)) == json.dumps(store_to_document(b.store))
    assert [t.to_json() for t in a.truths] == [t.to_json() for t in b.truths]
    assert [r.to_json() for r in a.history_records] == [
        r.to_json() for r in b.history_records
    ]


def test_different_seed_differs():
    a = generate_corpus(CORPUS_SEED)
    b = generate_corpus(CORPUS_SEED + 1)
    assert json.dumps(store_to_document(a.store)) != json.dumps(store_to_document(b.store))


def test_profile_mismatch_rejected():
    bad = DistributionProfile(one_round=58, two_round=17)  # sums to 75
    with pytest.raises(ProfileMismatch):
        generate_corpus(0, bad)


def test_chain_depth_matches_rounds(bundle):
    for truth in bundle.truths:
        chain = walk_failed_chain(bundle.store, truth.entry)
        expected_len = 2 if truth.rounds is Rounds.ONE_ROUND else 3
        assert len(chain) == expected_len
        assert chain[-1] == truth.expected_most_downstream


def test_every_job_has_a_successful_reference_build(bundle):
    for name in JOB_NAMES:
        best = bundle.store.get_latest_successful_build(name)
        assert best is not None
        assert best.status is BuildStatus.SUCCESS


def test_history_records_unique_per_job_cause(bundle):
    keys = [(r.most_downstream_job, r.root_cause) for r in bundle.history_records]
    assert len(keys) == len(set(keys))
    jobs_with_history = {r.most_downstream_job for r in bundle.history_records}
    assert jobs_with_history == set(JOB_NAMES)


def test_terminal_logs_plant_pii(bundle):
    planted = 0
    for truth in bundle.truths:
        log = bundle.store.get_console_log(truth.expected_most_downstream)
        text = log.text()
        if any(p in text for p in PLANTED_PII_STRINGS):
            planted += 1
    assert planted == len(bundle.truths)  # every terminal log carries PII


def test_terminal_logs_have_no_downstream_markers(bundle):
    from citriage.chain import MarkerGrammar, parse_downstream_markers

    grammar = MarkerGrammar()
    for truth in bundle.truths:
        log = bundle.store.get_console_log(truth.expected_most_downstream)
        assert parse_downstream_markers(log, grammar) == []


def test_write_corpus_layout(tmp_path, bundle):
    write_corpus(bundle, tmp_path / "corpus")
    for name in (
        "builds.json",
        "truths.json",
        "history.jsonl",
        "knowledge/pipeline_information.txt",
        "knowledge/failure_management.txt",
        "knowledge/finder_knowledge.txt",
    ):
        assert (tmp_path / "corpus" / name).exists(), name


def test_committed_fixtures_match_generator(tmp_path, fixtures_dir):
    """Regenerating with the pinned seed reproduces the committed corpus."""
    bundle = generate_corpus(CORPUS_SEED)
    write_corpus(bundle, tmp_path / "regen")
    for name in ("builds.json", "truths.json", "history.jsonl"):
        committed = (fixtures_dir / "corpus" / name).read_bytes()
        regenerated = (tmp_path / "regen" / name).read_bytes()
        assert committed == regenerated, f"{name} drifted from the generator"
