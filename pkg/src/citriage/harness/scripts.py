"""Generation of the pinned replay scripts used by the evaluation suites.

Finder scripts drive the agentic chain resolver: one exchange per build in a
case's downstream walk, keyed on that build's unique 'Build tag' log line.
Three variants exist: a clean script, a fault-injected script (10 finder
hallucinations plus 2 premature terminations), and a knowledge-run script
with 2 premature terminations only.

Ablation scripts drive the triage engine across all eight knowledge
conditions. Exchanges are keyed by the case's chain token plus the knowledge
section headers present (and absent) in the prompt, and replies are authored
per target verdict so a replayed run reproduces the pinned per-condition
counts exactly.
"""

from __future__ import annotations

import random
import re

from ..builds import BuildRef, BuildStore
from ..gateway import (
    FINDER_TERMINAL_SENTINEL,
    ChatMessage,
    Role,
    ScriptedExchange,
)
from ..knowledge import FMI_HEADER, HR_HEADER, NO_KNOWLEDGE_TEXT, PI_HEADER
from .corpus import CAUSES_BY_ID, CauseSpec
from .scoring import GroundTruth

# Per-condition (green, yellow, red) verdict targets for script generation.
ABLATION_TARGETS: dict[str, tuple[int, int, int]] = {
    "none": (13, 13, 50),
    "pi": (15, 21, 40),
    "fmi": (40, 27, 9),
    "hr": (70, 4, 2),
    "pi+fmi": (33, 33, 10),
    "pi+hr": (70, 6, 0),
    "fmi+hr": (70, 6, 0),
    "pi+fmi+hr": (69, 5, 2),
}

TERMINAL_REPLY = (
    f"{FINDER_TERMINAL_SENTINEL} - the job is already the most downstream failed job."
)

PHANTOM_JOB = BuildRef("workspace-cleanup-util", 877)

WRONG_SOLUTION_TEXT = (
    "The logs are inconclusive; collect more diagnostics from the controller "
    "and escalate to the on-call rotation."
)

FINDER_FAULT_HALLUCINATIONS = 10
FINDER_FAULT_MISTERMINATIONS = 2


def _assistant(content: str) -> ChatMessage:
    return ChatMessage(role=Role.ASSISTANT, content=content)


def _build_tag_matcher(ref: BuildRef) -> str:
    return rf"(?m)^Build tag: jenkins-{re.escape(ref.pipeline_name)}-{ref.build_number}$"


def walk_failed_chain(store: BuildStore, entry: BuildRef) -> list[BuildRef]:
    """Ground-truth walk over declared parent links: at each level follow the
    unique failed child until none exists."""
    links = [entry]
    current = entry
    while True:
        children = store.failed_children(current)
        if not children:
            return links
        if len(children) > 1:
            raise ValueError(f"{current} has {len(children)} failed children")
        current = children[0].ref
        links.append(current)


def _chain_exchanges(
    chain: list[BuildRef],
    hallucinate_terminal: bool,
    premature_stop: bool,
) -> list[ScriptedExchange]:
    """Exchanges for one case's walk. ``premature_stop`` makes the last
    intermediate level answer the terminal sentinel too early;
    ``hallucinate_terminal`` makes the terminal level name a nonexistent job."""
    exchanges = []
    for level, ref in enumerate(chain):
        is_terminal = level == len(chain) - 1
        is_last_intermediate = level == len(chain) - 2
        if is_terminal:
            if hallucinate_terminal:
                reply = _assistant(f"Failed downstream job: {PHANTOM_JOB}")
            else:
                reply = _assistant(TERMINAL_REPLY)
        elif premature_stop and is_last_intermediate:
            reply = _assistant(TERMINAL_REPLY)
        else:
            child = chain[level + 1]
            reply = _assistant(f"Failed downstream job: {child}")
        exchanges.append(ScriptedExchange(reply=reply, pattern=_build_tag_matcher(ref)))
    return exchanges


def generate_finder_scripts(
    store: BuildStore, truths: list[GroundTruth], seed: int
) -> dict[str, list[ScriptedExchange]]:
    """Build the clean, fault-injected, and knowledge-run finder scripts."""
    rng = random.Random(seed)
    chains = {t.case_id: walk_failed_chain(store, t.entry) for t in truths}

    all_cases = [t.case_id for t in truths]
    two_round_cases = [t.case_id for t in truths if len(chains[t.case_id]) >= 3]

    hallucinated = set(rng.sample(all_cases, FINDER_FAULT_HALLUCINATIONS))
    misterm_pool = [c for c in two_round_cases if c not in hallucinated]
    misterminated = set(rng.sample(misterm_pool, FINDER_FAULT_MISTERMINATIONS))
    knowledge_misterminated = set(
        rng.sample(two_round_cases, FINDER_FAULT_MISTERMINATIONS)
    )

    scripts: dict[str, list[ScriptedExchange]] = {"clean": [], "faulty": [], "knowledge": []}
    for truth in truths:
        chain = chains[truth.case_id]
        scripts["clean"].extend(_chain_exchanges(chain, False, False))
        scripts["faulty"].extend(
            _chain_exchanges(
                chain,
                truth.case_id in hallucinated,
                truth.case_id in misterminated,
            )
        )
        scripts["knowledge"].extend(
            _chain_exchanges(chain, False, truth.case_id in knowledge_misterminated)
        )
    return scripts


# ---------------------------------------------------------------------------
# Ablation scripts
# ---------------------------------------------------------------------------

_CONDITION_FINGERPRINTS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "none": ((NO_KNOWLEDGE_TEXT,), ()),
    "pi": ((PI_HEADER,), (FMI_HEADER, HR_HEADER)),
    "fmi": ((FMI_HEADER,), (PI_HEADER, HR_HEADER)),
    "hr": ((HR_HEADER,), (PI_HEADER, FMI_HEADER)),
    "pi+fmi": ((PI_HEADER, FMI_HEADER), (HR_HEADER,)),
    "pi+hr": ((PI_HEADER, HR_HEADER), (FMI_HEADER,)),
    "fmi+hr": ((FMI_HEADER, HR_HEADER), (PI_HEADER,)),
    "pi+fmi+hr": ((PI_HEADER, FMI_HEADER, HR_HEADER), ()),
}


def _reply_text(cause: CauseSpec, verdict: str) -> str:
    if verdict == "green":
        solutions = cause.solution
    elif verdict == "yellow":
        solutions = f"{cause.solution} Also, {cause.benign_markers[0]}."
    elif verdict == "red-harmful":
        solutions = f"{cause.solution} Additionally, {cause.harmful_markers[0]}."
    else:  # red-missing
        solutions = WRONG_SOLUTION_TEXT
    return (
        "Causes of Failures:\n"
        f"{cause.root_cause}.\n\n"
        "Recommended Solutions:\n"
        f"{solutions}"
    )


def generate_ablation_scripts(
    truths: list[GroundTruth],
    seed: int,
    targets: dict[str, tuple[int, int, int]] = ABLATION_TARGETS,
) -> dict[str, list[ScriptedExchange]]:
    """One exchange per (condition, case), with verdicts assigned by a seeded
    shuffle so the per-condition counts replay exactly."""
    rng = random.Random(seed)
    scripts: dict[str, list[ScriptedExchange]] = {}
    for label, (green, yellow, red) in targets.items():
        if green + yellow + red != len(truths):
            raise ValueError(f"targets for {label} do not sum to {len(truths)}")
        order = list(truths)
        rng.shuffle(order)
        verdict_by_case: dict[str, str] = {}
        red_kind = "red-harmful" if "hr" in label.split("+") else "red-missing"
        for i, truth in enumerate(order):
            if i < green:
                verdict_by_case[truth.case_id] = "green"
            elif i < green + yellow:
                verdict_by_case[truth.case_id] = "yellow"
            else:
                verdict_by_case[truth.case_id] = red_kind

        required, absent = _CONDITION_FINGERPRINTS[label]
        exchanges = []
        for truth in truths:
            cause = CAUSES_BY_ID[truth.cause_id]
            chain_token = f"[{truth.entry}]"
            exchanges.append(
                ScriptedExchange(
                    reply=_assistant(_reply_text(cause, verdict_by_case[truth.case_id])),
                    all_of=(chain_token,) + required,
                    none_of=absent,
                )
            )
        scripts[label] = exchanges
    return scripts


def sanity_check_markers(truths: list[GroundTruth]) -> None:
    """Authoring guard: the wrong-solution text must not accidentally contain
    any case's required markers, and green replies no extra markers."""
    lowered = WRONG_SOLUTION_TEXT.lower()
    for truth in truths:
        cause = CAUSES_BY_ID[truth.cause_id]
        for marker in cause.required_markers:
            if marker.lower() in lowered:
                raise ValueError(f"wrong-solution text contains {marker!r}")
        green = _reply_text(cause, "green").lower()
        for marker in cause.benign_markers + cause.harmful_markers:
            if marker.lower() in green:
                raise ValueError(f"green reply for {cause.cause_id} contains {marker!r}")
