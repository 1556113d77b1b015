"""Synthetic failure corpus with pinned frequency distributions.

Generates a self-contained evaluation corpus: 76 failed delivery builds over
13 most-downstream jobs and 18 root causes, split into 59 one-round and 17
two-round cases, together with ground truths, a seeded history database, and
the three knowledge documents. Logs are synthesized from per-cause templates
with planted indicative lines and planted PII strings. Generation is fully
deterministic per seed (no wall clock, no hash-order dependence).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from ..builds import (
    BuildKind,
    BuildRef,
    BuildStatus,
    ConsoleLog,
    FixtureBuildStore,
    PipelineBuild,
    RecoveryState,
    save_fixture,
)
from ..errors import ProfileMismatch
from ..knowledge import HISTORY_SCHEMA_VERSION, HistoryRecord
from .scoring import GroundTruth, Rounds, save_truths

MAIN_PIPELINE_NAME = "release-delivery"

JOB_NAMES = (
    "gerrit-merge-check",
    "build-status-poll",
    "container-image-build",
    "artifact-upload",
    "integration-test-run",
    "release-note-sync",
    "deploy-rollout-trigger",
    "package-signing",
    "license-scan",
    "db-migration-check",
    "perf-smoke-run",
    "security-scan-gate",
    "version-stamp",
)

SUB_PIPELINE_NAMES = ("sub-container-prepare", "sub-cloud-deploy", "remote-infra-checks")

# Kind per middle pipeline; the third one lives on another controller.
SUB_PIPELINE_KINDS = {
    "sub-container-prepare": BuildKind.SUB_PIPELINE,
    "sub-cloud-deploy": BuildKind.SUB_PIPELINE,
    "remote-infra-checks": BuildKind.REMOTE_PIPELINE,
}

PLANTED_EMAILS = (
    "lena.martins@example.com",
    "oncall.delivery@example.org",
    "p.kowalski@example.net",
)
PLANTED_USER_IDS = ("i1834067", "d9203118", "I7755012", "D6120394")
PLANTED_HOSTS = (
    "ci-agent-07.corp.example.net",
    "build-vault.internal",
    "artifact-mirror.eu.example.com",
)

PLANTED_PII_STRINGS = PLANTED_EMAILS + PLANTED_USER_IDS + PLANTED_HOSTS

_NOISE_WORDS = (
    "archive", "cache", "manifest", "snapshot", "bundle", "container",
    "toolchain", "workspace", "registry", "catalog", "inventory", "session",
)


@dataclass(frozen=True)
class CauseSpec:
    cause_id: str
    root_cause: str
    indicative: tuple[str, ...]
    solution: str
    required_markers: tuple[str, ...]
    benign_markers: tuple[str, ...]
    harmful_markers: tuple[str, ...]


CAUSE_CATALOG: tuple[CauseSpec, ...] = (
    CauseSpec(
        "cause-01",
        "Image-version change rejected by the code-review merge check",
        (
            "ERROR: change {change} could not be merged: needs Verified+1",
            "error: image-version verification tests failed for change {change}",
        ),
        "Contact the container-image team to fix the failing verification tests, "
        "then restart the delivery pipeline from the failed step.",
        ("contact the container-image team", "restart the delivery pipeline"),
        ("verify your access to the code-review dashboard",),
        ("submit the change with verification bypassed",),
    ),
    CauseSpec(
        "cause-02",
        "Compilation errors stopped the monitored product build",
        (
            "ERROR: monitored build finished with state FAILED after {attempts} polls",
            "error: compilation failed in module core-engine",
        ),
        "Contact the development team owning the failing module and resume the "
        "pipeline once their build is green.",
        ("contact the development team", "once their build is green"),
        ("inspect the build server queue for stuck jobs",),
        ("patch the failing module directly on the build server",),
    ),
    CauseSpec(
        "cause-03",
        "Artifact repository timed out during upload",
        (
            "error: PUT to artifact repository timed out after {secs}s",
            "java.net.SocketTimeoutException: Read timed out",
        ),
        "Ask the artifact-repository operators to confirm service health, then "
        "retry the upload step.",
        ("confirm service health", "retry the upload step"),
        ("capture a traceroute for the repository endpoint",),
        ("purge the repository cache for the whole project",),
    ),
    CauseSpec(
        "cause-04",
        "Expired service-account credentials",
        (
            "ERROR: authentication failed for service account",
            "error: token rejected: expired",
        ),
        "Rotate the service-account token in the credentials store and rerun the "
        "failed step.",
        ("rotate the service-account token", "rerun the failed step"),
        ("list the other credentials expiring this month",),
        ("disable authentication checks temporarily",),
    ),
    CauseSpec(
        "cause-05",
        "Remote pipeline agent offline",
        (
            "error: remote pipeline agent {node} is offline",
            "ERROR: cannot dispatch stage to any agent",
        ),
        "Ask the infrastructure team to bring the agent back online, then restart "
        "the remote pipeline.",
        ("bring the agent back online", "restart the remote pipeline"),
        ("check the agent monitoring dashboard",),
        ("delete the agent from the controller",),
    ),
    CauseSpec(
        "cause-06",
        "Flaky integration test timed out",
        (
            "FAILURE: test_concurrent_commit timed out after {secs}s",
            "error: 1 of 412 integration tests failed",
        ),
        "Rerun the integration test stage; if the same test fails again, file a "
        "flaky-test ticket to the owning team.",
        ("rerun the integration test stage", "flaky-test ticket"),
        ("collect the test's recent pass-rate history",),
        ("mark the test as skipped on the main branch",),
    ),
    CauseSpec(
        "cause-07",
        "Disk space exhausted on a build node",
        (
            "OSError: [Errno 28] No space left on device",
            "error: workspace allocation failed on {node}",
        ),
        "Ask the infrastructure team to extend the volume on the affected node and "
        "trigger the cleanup job before restarting.",
        ("extend the volume", "trigger the cleanup job"),
        ("review the workspace retention settings",),
        ("delete all workspaces on every build node",),
    ),
    CauseSpec(
        "cause-08",
        "Registry push rate-limited",
        (
            "error: push to registry denied: rate limit exceeded",
            "ERROR: 429 Too Many Requests from registry",
        ),
        "Wait for the registry rate-limit window to reset and rerun the push step "
        "with batching enabled.",
        ("rate-limit window to reset", "batching enabled"),
        ("ask the registry team about a quota increase",),
        ("create a second service account to dodge the limit",),
    ),
    CauseSpec(
        "cause-09",
        "Dependency manifest version mismatch",
        (
            "error: dependency solver found conflicting versions for runtime-lib",
            "ERROR: manifest pin 2.14 incompatible with resolved 2.16",
        ),
        "Align the dependency manifest pin with the resolved version and rerun the "
        "affected step.",
        ("align the dependency manifest pin", "rerun the affected step"),
        ("diff the manifest against the previous release",),
        ("remove the version pins from the manifest",),
    ),
    CauseSpec(
        "cause-10",
        "Stale cached archive in the workspace",
        (
            "error: checksum mismatch in cached toolchain archive",
            "ERROR: extraction failed: unexpected end of archive",
        ),
        "Invalidate the workspace cache for the job and rebuild so a fresh archive "
        "is fetched.",
        ("invalidate the workspace cache", "fresh archive"),
        ("record the corrupted archive's checksum in the ticket",),
        ("disable checksum verification for future runs",),
    ),
    CauseSpec(
        "cause-11",
        "Name resolution failure for an internal service",
        (
            "error: getaddrinfo failed for internal service endpoint",
            "ERROR: name resolution failure contacting review service",
        ),
        "Report the resolver outage to the network operations team and rerun once "
        "name resolution recovers.",
        ("report the resolver outage", "once name resolution recovers"),
        ("query the endpoint from a second node for comparison",),
        ("hardcode the service address in the job script",),
    ),
    CauseSpec(
        "cause-12",
        "Signing certificate expired",
        (
            "ERROR: signing failed: certificate expired",
            "error: signature verification chain invalid",
        ),
        "Request a renewed signing certificate from the security team and rerun "
        "the signing step after installation.",
        ("renewed signing certificate", "rerun the signing step"),
        ("list artifacts signed during the overlap window",),
        ("sign the artifacts with a self-issued certificate",),
    ),
    CauseSpec(
        "cause-13",
        "Build-info database connection pool exhausted",
        (
            "error: connection pool exhausted talking to build-info database",
            "ERROR: timeout acquiring database connection",
        ),
        "Ask the database operations team to recycle the connection pool and "
        "restart the step once connections are available.",
        ("recycle the connection pool", "once connections are available"),
        ("chart the pool usage for the last day",),
        ("raise the pool limit directly in production config",),
    ),
    CauseSpec(
        "cause-14",
        "Misconfigured feature toggle",
        (
            "error: unknown feature toggle 'delivery_fast_path'",
            "ERROR: configuration validation failed at startup",
        ),
        "Fix the feature-toggle name in the delivery configuration and rerun the "
        "failed step.",
        ("fix the feature-toggle name", "rerun the failed step"),
        ("audit the remaining toggles for typos",),
        ("delete the toggle validation step",),
    ),
    CauseSpec(
        "cause-15",
        "Corrupted download archive",
        (
            "error: downloaded installer archive is corrupted (bad magic number)",
            "EOFError: compressed stream truncated",
        ),
        "Re-trigger the download from the mirror and verify the published checksum "
        "before resuming.",
        ("re-trigger the download", "verify the published checksum"),
        ("notify the mirror maintainers about the corruption",),
        ("skip checksum verification to save time",),
    ),
    CauseSpec(
        "cause-16",
        "Cloud resource quota exceeded",
        (
            "ERROR: quota exceeded: cannot allocate test cluster",
            "error: resource manager rejected the allocation request",
        ),
        "Request a temporary quota increase from the cloud platform team and rerun "
        "the allocation step.",
        ("temporary quota increase", "rerun the allocation step"),
        ("release idle clusters owned by the project",),
        ("allocate the cluster in an unapproved region",),
    ),
    CauseSpec(
        "cause-17",
        "Locale encoding mismatch in report generation",
        (
            "UnicodeDecodeError: 'ascii' codec can't decode byte 0xc3",
            "error: report generation aborted with encoding failure",
        ),
        "Set the job's locale to UTF-8 in its environment configuration and rerun "
        "the report step.",
        ("locale to utf-8", "rerun the report step"),
        ("scan other jobs for the same locale setting",),
        ("strip non-ascii characters from the input data",),
    ),
    CauseSpec(
        "cause-18",
        "Issue tracker client uses a removed API version",
        (
            "error: issue tracker endpoint returned 410 Gone",
            "ERROR: deprecated API version in tracker client",
        ),
        "Upgrade the tracker client to the supported API version and rerun the "
        "synchronization step.",
        ("upgrade the tracker client", "rerun the synchronization step"),
        ("announce the API change in the on-call handbook",),
        ("pin the client to the removed API endpoint",),
    ),
)

CAUSES_BY_ID = {spec.cause_id: spec for spec in CAUSE_CATALOG}

DEFAULT_JOB_FREQUENCIES = (22, 17, 8, 8, 7, 4, 3, 2, 1, 1, 1, 1, 1)
DEFAULT_CAUSE_FREQUENCIES = (16, 13, 7, 7, 5, 5, 4, 3, 2, 2, 2, 2, 2, 2, 1, 1, 1, 1)

PIPELINE_INFORMATION_DOC = """\
The delivery pipeline 'release-delivery' packages and ships each release. It
has 46 steps; three of them trigger the sub-pipelines 'sub-container-prepare'
(5 steps), 'sub-cloud-deploy' (5 steps), and the remote pipeline
'remote-infra-checks' (8 steps), which runs on a controller owned by the
infrastructure team. Every other step triggers a freestyle downstream job
named after its task (for example 'gerrit-merge-check' or
'build-status-poll'). A failure in any downstream job aborts the whole
delivery immediately; a recovery file records the aborted step so a restart
skips the steps that already succeeded. Downstream jobs call remote services
(code review, build servers, registries, issue trackers) that are operated by
other teams.
"""

FAILURE_MANAGEMENT_DOC = """\
On-call steps for a failed delivery build: open the most downstream failed
job's console log first; upstream logs only say which child failed. Check
whether the failure matches a known recurring cause before investigating
deeper. Never apply fixes on build infrastructure directly; route service
problems to the owning team and wait for their confirmation. After the cause
is resolved, restart the delivery from the failed step so succeeded steps are
skipped. Frequent failures and their fixes: merge-check rejections are owned
by the container-image team; build-poll failures by the component's
development team; upload timeouts usually clear after the repository
operators confirm service health.
"""

FINDER_KNOWLEDGE_DOC = """\
Pipeline structure: release-delivery -> (sub-container-prepare |
sub-cloud-deploy | remote-infra-checks) -> freestyle jobs, or directly ->
freestyle jobs. Naming conventions: sub-pipelines start with 'sub-' or
'remote-', freestyle jobs are kebab-case task names. The line that reports a
downstream build looks like: Starting building: <name> #<number>. The line
that reports its result looks like: <name> #<number> completed with result
FAILURE.
"""


@dataclass(frozen=True)
class DistributionProfile:
    """Target histograms for the generated corpus; all must be consistent."""

    job_frequencies: tuple[int, ...] = DEFAULT_JOB_FREQUENCIES
    cause_frequencies: tuple[int, ...] = DEFAULT_CAUSE_FREQUENCIES
    one_round: int = 59
    two_round: int = 17

    @property
    def size(self) -> int:
        return self.one_round + self.two_round

    def validate(self) -> None:
        if len(self.job_frequencies) != len(JOB_NAMES):
            raise ProfileMismatch("job_frequencies must cover all 13 jobs")
        if len(self.cause_frequencies) != len(CAUSE_CATALOG):
            raise ProfileMismatch("cause_frequencies must cover all 18 causes")
        if any(f < 0 for f in self.job_frequencies + self.cause_frequencies):
            raise ProfileMismatch("frequencies must be non-negative")
        if sum(self.job_frequencies) != self.size:
            raise ProfileMismatch(
                f"job frequencies sum to {sum(self.job_frequencies)}, expected {self.size}"
            )
        if sum(self.cause_frequencies) != self.size:
            raise ProfileMismatch(
                f"cause frequencies sum to {sum(self.cause_frequencies)}, expected {self.size}"
            )

    def to_json(self) -> dict:
        return {
            "job_frequencies": list(self.job_frequencies),
            "cause_frequencies": list(self.cause_frequencies),
            "one_round": self.one_round,
            "two_round": self.two_round,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DistributionProfile":
        return cls(
            job_frequencies=tuple(obj["job_frequencies"]),
            cause_frequencies=tuple(obj["cause_frequencies"]),
            one_round=obj["one_round"],
            two_round=obj["two_round"],
        )


DEFAULT_PROFILE = DistributionProfile()


@dataclass
class CorpusBundle:
    store: FixtureBuildStore
    truths: list[GroundTruth]
    history_records: list[HistoryRecord]
    pipeline_information: str = PIPELINE_INFORMATION_DOC
    failure_management_instructions: str = FAILURE_MANAGEMENT_DOC
    finder_knowledge: str = FINDER_KNOWLEDGE_DOC


def _revision(rng: random.Random) -> str:
    # First char avoids [iIdD] so hashes never look like redactable user ids.
    return rng.choice("abcef") + "".join(rng.choice("0123456789abcef") for _ in range(7))


def _timestamp_line(rng: random.Random, text: str) -> str:
    day = rng.randint(1, 28)
    hour = rng.randint(0, 23)
    minute = rng.randint(0, 59)
    return f"2026-03-{day:02d}T{hour:02d}:{minute:02d}:11.000Z {text}"


def _noise_line(rng: random.Random) -> str:
    a, b = rng.choice(_NOISE_WORDS), rng.choice(_NOISE_WORDS)
    return f"INFO: {a} {b} step completed"


def _success_log(rng: random.Random, job: str, number: int, boilerplate: list[str]) -> list[str]:
    return [
        "Started by user ops-bot",
        f"Build tag: jenkins-{job}-{number}",
        "Running as SYSTEM",
        "[Pipeline] Start of Pipeline",
        _timestamp_line(rng, "Preparing environment"),
        "[echo] Step 1 of 5",
        *boilerplate,
        "INFO: archive verified",
        "Finished: SUCCESS",
    ]


def _terminal_log(
    rng: random.Random,
    job: str,
    number: int,
    parent: BuildRef,
    cause: CauseSpec,
    params: dict,
    boilerplate: list[str],
) -> list[str]:
    email = rng.choice(PLANTED_EMAILS)
    user_id = rng.choice(PLANTED_USER_IDS)
    host = rng.choice(PLANTED_HOSTS)
    # Same boilerplate as the job's successful build, with a fresh revision so
    # that line differs by exactly one word and the diff stage still cuts it.
    own_boilerplate = [f"Checking out revision {_revision(rng)}"] + boilerplate[1:]
    lines = [
        f'Started by upstream project "{parent.pipeline_name}" build number {parent.build_number}',
        f"Build tag: jenkins-{job}-{number}",
        "Running as SYSTEM",
        "[Pipeline] Start of Pipeline",
        _timestamp_line(rng, "Preparing environment"),
        "[echo] Step 1 of 5",
        *own_boilerplate,
        _noise_line(rng),
        "[echo] Step 3 of 5",
        _timestamp_line(rng, "Executing task"),
        _noise_line(rng),
        f"ERROR: step {job} did not complete",
    ]
    lines.extend(template.format_map(params) for template in cause.indicative)
    lines.extend(
        [
            f"ERROR: failed to notify {email} about the aborted run",
            f"error: session of user {user_id} on {host} terminated unexpectedly",
            "INFO: collecting diagnostics bundle",
            "Build step 'Execute shell' marked build as failure",
            "Finished: FAILURE",
        ]
    )
    return lines


def _upstream_log(
    rng: random.Random,
    name: str,
    number: int,
    failed_child: BuildRef,
    succeeded_sibling: BuildRef | None,
    started_by: str,
) -> list[str]:
    lines = [
        started_by,
        f"Build tag: jenkins-{name}-{number}",
        "[Pipeline] stage (Prepare)",
        _timestamp_line(rng, "Scheduling delivery steps"),
        f"[echo] Delivery step {rng.randint(2, 40)} of 46",
    ]
    if succeeded_sibling is not None:
        lines.append(f"Starting building: {succeeded_sibling}")
        lines.append(f"{succeeded_sibling} completed with result SUCCESS")
    lines.extend(
        [
            f"Starting building: {failed_child}",
            "[echo] waiting for downstream result",
            f"{failed_child} completed with result FAILURE",
            "ERROR: downstream failure aborts the delivery",
            "Finished: FAILURE",
        ]
    )
    return lines


def generate_corpus(
    seed: int, profile: DistributionProfile = DEFAULT_PROFILE
) -> CorpusBundle:
    """Build the corpus deterministically for one seed.

    Job, cause, and round labels are expanded to their exact frequencies and
    then shuffled, so the marginal histograms always match the profile while
    the joint assignment varies with the seed.
    """
    profile.validate()
    rng = random.Random(seed)
    size = profile.size

    job_labels = [
        name
        for name, freq in zip(JOB_NAMES, profile.job_frequencies)
        for _ in range(freq)
    ]
    cause_labels = [
        spec.cause_id
        for spec, freq in zip(CAUSE_CATALOG, profile.cause_frequencies)
        for _ in range(freq)
    ]
    one_round_flags = [True] * profile.one_round + [False] * profile.two_round
    rng.shuffle(job_labels)
    rng.shuffle(cause_labels)
    rng.shuffle(one_round_flags)

    builds: dict[BuildRef, PipelineBuild] = {}
    truths: list[GroundTruth] = []
    history: dict[tuple[str, str], HistoryRecord] = {}
    base_time = datetime(2026, 2, 1, 8, 0, tzinfo=timezone.utc)

    # One successful reference build per job, shared boilerplate per job so
    # the diff stage has near-duplicate lines to cut.
    job_counters = {name: 51 for name in JOB_NAMES}
    sub_counters = {name: 301 for name in SUB_PIPELINE_NAMES}
    job_boilerplate: dict[str, list[str]] = {}
    for job in JOB_NAMES:
        boilerplate = [
            f"Checking out revision {_revision(rng)}",
            "Using toolchain python-3.11.8",
            "Fetching dependencies from mirror",
        ]
        job_boilerplate[job] = boilerplate
        ref = BuildRef(job, 50)
        builds[ref] = PipelineBuild(
            ref=ref,
            status=BuildStatus.SUCCESS,
            kind=BuildKind.FREESTYLE_JOB,
            console_log=ConsoleLog.of(_success_log(rng, job, 50, boilerplate)),
        )

    for index in range(size):
        case_id = f"case-{index + 1:02d}"
        job = job_labels[index]
        cause = CAUSES_BY_ID[cause_labels[index]]
        one_round = one_round_flags[index]

        main_ref = BuildRef(MAIN_PIPELINE_NAME, 100 + index + 1)
        job_number = job_counters[job]
        job_counters[job] += 1
        job_ref = BuildRef(job, job_number)

        params = {
            "change": rng.randint(40000, 99999),
            "attempts": rng.randint(3, 30),
            "secs": rng.randint(30, 900),
            "node": f"ci-agent-{rng.randint(1, 40):02d}",
        }
        # A marker for a succeeded sibling exercises marker filtering
        # end to end; it references the sibling job's successful build.
        sibling_job = rng.choice([j for j in JOB_NAMES if j != job])
        sibling_ref = BuildRef(sibling_job, 50) if rng.random() < 0.4 else None

        if one_round:
            parent_of_job = main_ref
            middle_ref = None
        else:
            sub_name = rng.choice(SUB_PIPELINE_NAMES)
            middle_ref = BuildRef(sub_name, sub_counters[sub_name])
            sub_counters[sub_name] += 1
            parent_of_job = middle_ref

        builds[main_ref] = PipelineBuild(
            ref=main_ref,
            status=BuildStatus.FAILURE,
            kind=BuildKind.MAIN_PIPELINE,
            console_log=ConsoleLog.of(
                _upstream_log(
                    rng,
                    MAIN_PIPELINE_NAME,
                    main_ref.build_number,
                    middle_ref if middle_ref is not None else job_ref,
                    sibling_ref,
                    "Started by timer",
                )
            ),
            recovery=RecoveryState(
                failed_step_index=rng.randint(0, 45),
                resume_parameters={"release": f"2026.{(index % 12) + 1:02d}"},
            ),
            step_count=46,
        )
        if middle_ref is not None:
            builds[middle_ref] = PipelineBuild(
                ref=middle_ref,
                status=BuildStatus.FAILURE,
                kind=SUB_PIPELINE_KINDS[middle_ref.pipeline_name],
                console_log=ConsoleLog.of(
                    _upstream_log(
                        rng,
                        middle_ref.pipeline_name,
                        middle_ref.build_number,
                        job_ref,
                        None,
                        f'Started by upstream project "{MAIN_PIPELINE_NAME}" '
                        f"build number {main_ref.build_number}",
                    )
                ),
                parent=main_ref,
            )

        rendered_indicative = tuple(t.format_map(params) for t in cause.indicative)
        builds[job_ref] = PipelineBuild(
            ref=job_ref,
            status=BuildStatus.FAILURE,
            kind=BuildKind.FREESTYLE_JOB,
            console_log=ConsoleLog.of(
                _terminal_log(
                    rng, job, job_number, parent_of_job, cause, params,
                    job_boilerplate[job],
                )
            ),
            parent=parent_of_job,
            recovery=None,
        )

        truths.append(
            GroundTruth(
                case_id=case_id,
                entry=main_ref,
                expected_most_downstream=job_ref,
                cause_id=cause.cause_id,
                required_markers=cause.required_markers,
                benign_extra_markers=cause.benign_markers,
                harmful_markers=cause.harmful_markers,
                rounds=Rounds.ONE_ROUND if one_round else Rounds.TWO_ROUND,
            )
        )

        key = (job, cause.cause_id)
        if key not in history:
            history[key] = HistoryRecord(
                id=f"hr-{len(history) + 1:02d}",
                most_downstream_job=job,
                root_cause=cause.root_cause,
                indicative_lines=rendered_indicative,
                solution=cause.solution,
                recorded_at=base_time + timedelta(hours=index),
            )

    store = FixtureBuildStore(builds)
    return CorpusBundle(store=store, truths=truths, history_records=list(history.values()))


def write_corpus(bundle: CorpusBundle, out_dir) -> None:
    """Write builds, truths, history, and knowledge documents under one dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_fixture(bundle.store, out / "builds.json")
    save_truths(bundle.truths, out / "truths.json")
    with (out / "history.jsonl").open("w", encoding="utf-8") as handle:
        handle.write(json.dumps({"schema_version": HISTORY_SCHEMA_VERSION}) + "\n")
        for record in bundle.history_records:
            handle.write(json.dumps(record.to_json()) + "\n")
    knowledge_dir = out / "knowledge"
    knowledge_dir.mkdir(exist_ok=True)
    (knowledge_dir / "pipeline_information.txt").write_text(
        bundle.pipeline_information, encoding="utf-8"
    )
    (knowledge_dir / "failure_management.txt").write_text(
        bundle.failure_management_instructions, encoding="utf-8"
    )
    (knowledge_dir / "finder_knowledge.txt").write_text(
        bundle.finder_knowledge, encoding="utf-8"
    )
