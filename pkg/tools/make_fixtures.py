#!/usr/bin/env python3
"""Regenerate every committed fixture under fixtures/.

Run from the repository root after changing the corpus generator or the
script generators:

    python3 tools/make_fixtures.py

Output is byte-deterministic for the pinned seeds, so an unchanged generator
reproduces the committed files exactly (a test asserts this).
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from citriage.cli import main as cli_main  # noqa: E402
from citriage.gateway import save_replay_file  # noqa: E402
from citriage.harness.corpus import generate_corpus, write_corpus  # noqa: E402
from citriage.harness.scripts import (  # noqa: E402
    generate_ablation_scripts,
    generate_finder_scripts,
    sanity_check_markers,
)

CORPUS_SEED = 0
ABLATION_SCRIPT_SEED = 7
FINDER_SCRIPT_SEED = 11

FIXTURES = REPO_ROOT / "fixtures"

SAMPLE_CONFIG = {
    "schema_version": 1,
    "store": "corpus/builds.json",
    "knowledge": {
        "pipeline_information": "corpus/knowledge/pipeline_information.txt",
        "failure_management_instructions": "corpus/knowledge/failure_management.txt",
        "finder_knowledge": "corpus/knowledge/finder_knowledge.txt",
    },
    "history": "corpus/history.jsonl",
    "gateway": {"backend": "scripted", "replay": "scripts/triage_replay.json"},
    "sink": {"kind": "stdout"},
    "outbox_dir": "outbox",
}


def main() -> int:
    bundle = generate_corpus(CORPUS_SEED)
    sanity_check_markers(bundle.truths)

    corpus_dir = FIXTURES / "corpus"
    if corpus_dir.exists():
        shutil.rmtree(corpus_dir)
    write_corpus(bundle, corpus_dir)

    ablation_dir = FIXTURES / "scripts" / "ablation"
    ablation_dir.mkdir(parents=True, exist_ok=True)
    ablation_scripts = generate_ablation_scripts(bundle.truths, ABLATION_SCRIPT_SEED)
    merged = []
    for label, exchanges in ablation_scripts.items():
        save_replay_file(exchanges, ablation_dir / f"{label}.json")
        merged.extend(exchanges)
    save_replay_file(merged, FIXTURES / "scripts" / "triage_replay.json")

    finder_dir = FIXTURES / "scripts" / "finder"
    finder_dir.mkdir(parents=True, exist_ok=True)
    finder_scripts = generate_finder_scripts(
        bundle.store, bundle.truths, FINDER_SCRIPT_SEED
    )
    for name, exchanges in finder_scripts.items():
        save_replay_file(exchanges, finder_dir / f"{name}.json")

    config_path = FIXTURES / "config.json"
    config_path.write_text(json.dumps(SAMPLE_CONFIG, indent=1) + "\n", encoding="utf-8")

    golden_dir = FIXTURES / "golden"
    golden_dir.mkdir(exist_ok=True)
    code = cli_main(
        [
            "ablate",
            "--corpus",
            str(corpus_dir),
            "--scripts",
            str(ablation_dir),
            "--out",
            str(golden_dir / "ablation_report.json"),
        ]
    )
    if code != 0:
        raise SystemExit(f"golden ablate run failed with exit code {code}")
    print("fixtures regenerated under", FIXTURES)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
