import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from citriage.builds import BuildRef
from citriage.chain import ChainMethod, DownstreamChain
from citriage.errors import (
    GatewayError,
    InvalidToolCall,
    MissingSections,
    RedactionViolation,
    ScriptMiss,
)
from citriage.gateway import (
    COORDINATOR_INSTRUCTION,
    FINDER_INSTRUCTION,
    ChatMessage,
    GatewayConfig,
    HttpBackend,
    ReplySections,
    Role,
    ScriptedBackend,
    ScriptedExchange,
    ToolCall,
    ToolSpec,
    build_triage_prompt,
    complete,
    complete_with_tools,
    parse_triage_reply,
    render_chain,
    save_replay_file,
)
from citriage.preprocess import DEFAULT_REDACTION_RULES, PreprocessedLog

from conftest import assistant_reply

CONFIG = GatewayConfig()


def user(content):
    return ChatMessage(role=Role.USER, content=content)


def exchange(reply_text, **match):
    return ScriptedExchange(reply=assistant_reply(reply_text), **match)


# --- scripted backend -------------------------------------------------------


def test_scripted_match_returns_reply_verbatim():
    backend = ScriptedBackend([exchange("the reply", substring="ping")])
    reply = complete(backend, [user("ping pong")], CONFIG)
    assert reply.content == "the reply"
    assert reply.role is Role.ASSISTANT


def test_scripted_no_match_raises_script_miss():
    backend = ScriptedBackend([exchange("x", substring="absent")])
    with pytest.raises(ScriptMiss):
        complete(backend, [user("nothing matches")], CONFIG)


def test_scripted_determinism_same_request_same_reply():
    backend = ScriptedBackend([exchange("stable", substring="q")])
    first = complete(backend, [user("q")], CONFIG)
    second = complete(backend, [user("q")], CONFIG)
    assert first == second


def test_scripted_consume_once():
    backend = ScriptedBackend(
        [
            exchange("first", substring="q", consume_once=True),
            exchange("second", substring="q"),
        ]
    )
    assert complete(backend, [user("q")], CONFIG).content == "first"
    assert complete(backend, [user("q")], CONFIG).content == "second"


def test_scripted_all_of_none_of_matcher():
    backend = ScriptedBackend(
        [exchange("hit", all_of=("alpha", "beta"), none_of=("gamma",))]
    )
    assert complete(backend, [user("alpha ... beta")], CONFIG).content == "hit"
    with pytest.raises(ScriptMiss):
        complete(backend, [user("alpha beta gamma")], CONFIG)
    with pytest.raises(ScriptMiss):
        complete(backend, [user("alpha only")], CONFIG)


def test_scripted_pattern_matcher_is_anchored_regex():
    backend = ScriptedBackend([exchange("hit", pattern=r"(?m)^Build tag: jenkins-job-7$")])
    assert (
        complete(backend, [user("x\nBuild tag: jenkins-job-7\ny")], CONFIG).content
        == "hit"
    )
    with pytest.raises(ScriptMiss):
        complete(backend, [user("Build tag: jenkins-job-77")], CONFIG)


def test_scripted_matches_last_user_message():
    backend = ScriptedBackend([exchange("hit", substring="latest")])
    messages = [user("older text"), assistant_reply("mid"), user("the latest ask")]
    assert complete(backend, messages, CONFIG).content == "hit"


def test_replay_file_round_trip(tmp_path):
    exchanges = [
        exchange("plain", substring="completely different request"),
        ScriptedExchange(
            reply=ChatMessage(
                role=Role.ASSISTANT,
                content="",
                tool_call=ToolCall("find_downstream", {"pipeline_name": "job"}),
            ),
            all_of=("x", "y"),
            none_of=("z",),
            consume_once=True,
        ),
    ]
    path = tmp_path / "replay.json"
    save_replay_file(exchanges, path)
    loaded = ScriptedBackend.from_replay_file(path)
    reply = complete_with_tools(
        loaded,
        [user("x and y")],
        [ToolSpec("find_downstream", "d", {"type": "object"})],
        CONFIG,
    )
    assert reply.tool_call is not None
    assert reply.tool_call.name == "find_downstream"


def test_request_log_records_every_request():
    backend = ScriptedBackend([exchange("r", substring="q")])
    complete(backend, [user("q1 q")], CONFIG)
    complete(backend, [user("q2 q")], CONFIG)
    assert len(backend.request_log) == 2


def test_consume_once_is_exclusive_under_concurrency():
    from concurrent.futures import ThreadPoolExecutor

    backend = ScriptedBackend(
        [
            exchange("first", substring="q", consume_once=True),
            exchange("later", substring="q"),
        ]
    )

    def ask(_):
        return complete(backend, [user("q")], CONFIG).content

    with ThreadPoolExecutor(max_workers=8) as pool:
        replies = list(pool.map(ask, range(24)))
    assert replies.count("first") == 1
    assert replies.count("later") == 23


# --- completion validation ----------------------------------------------------


def test_complete_requires_messages():
    with pytest.raises(ValueError):
        complete(ScriptedBackend(), [], CONFIG)


def test_complete_requires_user_or_tool_tail():
    backend = ScriptedBackend([exchange("r", substring="q")])
    with pytest.raises(ValueError):
        complete(backend, [assistant_reply("q")], CONFIG)


def test_tool_message_requires_correlation_id():
    with pytest.raises(ValueError):
        ChatMessage(role=Role.TOOL, content="result")
    ok = ChatMessage(role=Role.TOOL, content="result", tool_call_id="call_1")
    assert ok.tool_call_id == "call_1"


def test_gateway_config_validates_temperature():
    with pytest.raises(ValueError):
        GatewayConfig(temperature=2.5)


# --- tools ---------------------------------------------------------------------


FINDER_TOOL = ToolSpec(
    name="find_downstream",
    description="Report the failed downstream build at the current level.",
    parameter_schema={
        "type": "object",
        "properties": {
            "pipeline_name": {"type": "string"},
            "build_number": {"type": "integer"},
        },
        "required": ["pipeline_name", "build_number"],
    },
)


def tool_call_exchange(name, arguments, **match):
    return ScriptedExchange(
        reply=ChatMessage(role=Role.ASSISTANT, content="", tool_call=ToolCall(name, arguments)),
        **match,
    )


def test_tool_call_reply_passes_validation():
    backend = ScriptedBackend(
        [tool_call_exchange("find_downstream", {"pipeline_name": "job", "build_number": 3},
                            substring=COORDINATOR_INSTRUCTION[:30])]
    )
    reply = complete_with_tools(
        backend, [user(COORDINATOR_INSTRUCTION)], [FINDER_TOOL], CONFIG
    )
    assert reply.tool_call.arguments == {"pipeline_name": "job", "build_number": 3}


def test_final_answer_passes_through():
    backend = ScriptedBackend([exchange("the most downstream failed job is job #3",
                                        substring="find")])
    reply = complete_with_tools(backend, [user("find it")], [FINDER_TOOL], CONFIG)
    assert reply.tool_call is None
    assert "job #3" in reply.content


def test_undeclared_tool_rejected():
    backend = ScriptedBackend([tool_call_exchange("rm_rf", {}, substring="q")])
    with pytest.raises(InvalidToolCall):
        complete_with_tools(backend, [user("q")], [FINDER_TOOL], CONFIG)


def test_schema_violation_rejected():
    backend = ScriptedBackend(
        [tool_call_exchange("find_downstream", {"pipeline_name": 5}, substring="q")]
    )
    with pytest.raises(InvalidToolCall):
        complete_with_tools(backend, [user("q")], [FINDER_TOOL], CONFIG)


def test_tools_must_be_declared_and_unique():
    backend = ScriptedBackend()
    with pytest.raises(ValueError):
        complete_with_tools(backend, [user("q")], [], CONFIG)
    with pytest.raises(ValueError):
        complete_with_tools(backend, [user("q")], [FINDER_TOOL, FINDER_TOOL], CONFIG)


# --- live backend ----------------------------------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    calls = []
    fail_first_with = None

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).calls.append(body)
        if type(self).fail_first_with and len(type(self).calls) == 1:
            self.send_response(type(self).fail_first_with)
            self.end_headers()
            return
        payload = {
            "choices": [{"message": {"role": "assistant", "content": "stub says hi"}}]
        }
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    _StubHandler.calls = []
    _StubHandler.fail_first_with = None
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()


def fast_config(endpoint, retries=2):
    return GatewayConfig(
        endpoint=endpoint, timeout=2.0, max_retries=retries, backoff_base=0.01
    )


def test_http_backend_success(stub_server):
    reply = complete(HttpBackend(), [user("hello")], fast_config(stub_server))
    assert reply.content == "stub says hi"
    sent = _StubHandler.calls[0]
    assert sent["model"] == "gpt-4o"
    assert sent["temperature"] == 0.0
    assert sent["messages"][-1] == {"role": "user", "content": "hello"}


def test_http_backend_retries_on_5xx_then_succeeds(stub_server):
    _StubHandler.fail_first_with = 503
    reply = complete(HttpBackend(), [user("hello")], fast_config(stub_server, retries=3))
    assert reply.content == "stub says hi"
    assert len(_StubHandler.calls) == 2


def test_http_backend_4xx_fails_immediately(stub_server):
    _StubHandler.fail_first_with = 401
    with pytest.raises(GatewayError):
        complete(HttpBackend(), [user("hello")], fast_config(stub_server, retries=3))
    assert len(_StubHandler.calls) == 1


def test_http_backend_unreachable_endpoint_exhausts_retries():
    config = fast_config("http://127.0.0.1:9/v1/chat/completions", retries=2)
    with pytest.raises(GatewayError, match="retries exhausted"):
        complete(HttpBackend(), [user("hello")], config)


# --- prompt construction -----------------------------------------------------------


def sample_chain():
    return DownstreamChain(
        links=(BuildRef("delivery-main", 12), BuildRef("image-builder", 31)),
        method=ChainMethod.DETERMINISTIC,
    )


FIXED_SENTENCES = [
    "Consider yourself a software engineer specializing in resolving Jenkins pipeline failures.",
    "Here, we have navigated through these jobs, sub-pipelines, and remote pipelines:",
    "and obtained the console logs of the most downstream failed job:",
    "Your task is to analyze these console logs to identify the root causes of the failure "
    "and suggest solutions. Here is some domain knowledge that may help you:",
    "If the domain knowledge includes historical records of related failure cases, their "
    "root causes, and their solutions, please follow them exactly.",
    "Your answer should contain two sections: Causes of Failures and Recommended Solutions.",
    "Your answer should be direct and concise to help resolve the problem as quickly as possible.",
]


def test_triage_prompt_contains_every_fixed_sentence():
    log = PreprocessedLog(lines=("error: base image pull failed",))
    [message] = build_triage_prompt(sample_chain(), log, "No additional domain knowledge is available.")
    assert message.role is Role.USER
    for sentence in FIXED_SENTENCES:
        assert sentence in message.content


def test_triage_prompt_renders_bracketed_chain():
    log = PreprocessedLog(lines=())
    [message] = build_triage_prompt(sample_chain(), log, "k")
    assert "[delivery-main #12] -> [image-builder #31]" in message.content


def test_render_chain_single_element():
    assert render_chain([BuildRef("main", 1)]) == "[main #1]"


def test_triage_prompt_with_three_history_records(tmp_path):
    from datetime import datetime, timezone

    from citriage.knowledge import (
        AblationCondition,
        HistoryDb,
        HistoryRecord,
        KnowledgeBase,
        compose_knowledge,
    )

    kb = KnowledgeBase(
        pipeline_information="",
        failure_management_instructions="",
        finder_knowledge="",
        history=HistoryDb(tmp_path / "history.jsonl"),
    )
    records = [
        HistoryRecord(
            id=f"hr-{i}",
            most_downstream_job="image-builder",
            root_cause="base image unpinned",
            indicative_lines=(f"error: pull failed {i}",),
            solution="Repin the base image.",
            recorded_at=datetime(2026, 1, 1 + i, tzinfo=timezone.utc),
        )
        for i in range(3)
    ]
    knowledge = compose_knowledge(kb, AblationCondition(include_hr=True), records)
    [message] = build_triage_prompt(sample_chain(), PreprocessedLog(lines=()), knowledge)
    assert message.content.count("### Record") == 3
    assert "please follow them exactly" in message.content


def test_triage_prompt_refuses_unredacted_log():
    log = PreprocessedLog(lines=("mail ops@example.com now",))
    with pytest.raises(RedactionViolation):
        build_triage_prompt(sample_chain(), log, "k", DEFAULT_REDACTION_RULES)


def test_triage_prompt_accepts_redacted_log():
    log = PreprocessedLog(lines=("mail <EMAIL> now",))
    [message] = build_triage_prompt(sample_chain(), log, "k", DEFAULT_REDACTION_RULES)
    assert "<EMAIL>" in message.content


def test_finder_instruction_contains_sentinel_sentence():
    assert "No failed downstream job found" in FINDER_INSTRUCTION
    assert "report its name and build number" in FINDER_INSTRUCTION


def test_coordinator_instruction_pinned():
    assert COORDINATOR_INSTRUCTION.startswith("Find the most downstream failed job")


# --- reply parsing ----------------------------------------------------------------


def test_parse_well_formed_reply():
    reply = assistant_reply(
        "Causes of Failures:\nThe base image is gone.\n\n"
        "Recommended Solutions:\nRepin the base image."
    )
    sections = parse_triage_reply(reply)
    assert sections == ReplySections(
        causes="The base image is gone.", solutions="Repin the base image."
    )


@pytest.mark.parametrize(
    "causes_header,solutions_header",
    [
        ("## Causes of Failures", "## Recommended Solutions"),
        ("**Causes of Failures**", "**Recommended Solutions**"),
        ("CAUSES OF FAILURES:", "RECOMMENDED SOLUTIONS:"),
        ("1. Causes of Failures", "2. Recommended Solutions"),
    ],
)
def test_parse_tolerates_heading_markup(causes_header, solutions_header):
    reply = assistant_reply(f"{causes_header}\nroot\n\n{solutions_header}\nfix")
    sections = parse_triage_reply(reply)
    assert sections.causes == "root"
    assert sections.solutions == "fix"


def test_parse_missing_solutions_section():
    reply = assistant_reply("Causes of Failures:\nonly causes here")
    with pytest.raises(MissingSections):
        parse_triage_reply(reply)


def test_parse_headers_out_of_order():
    reply = assistant_reply("Recommended Solutions:\nfix\n\nCauses of Failures:\nroot")
    with pytest.raises(MissingSections):
        parse_triage_reply(reply)
