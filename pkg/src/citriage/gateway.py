"""Chat-completion gateway with a live HTTP backend and a scripted one.

The scripted backend replays pinned exchanges from a versioned file and is
the deterministic oracle used by every agent-behavior test; it never invents
a reply. The HTTP backend speaks the de-facto chat-completions POST shape so
any compatible hosted or local server works.

This module also owns the three prompt templates (triage, coordinator,
downstream-job finder) and the parser that splits a triage reply into its two
required sections.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import httpx
import jsonschema

from .errors import (
    GatewayError,
    InvalidToolCall,
    MissingSections,
    RedactionViolation,
    ScriptMiss,
)
from .preprocess import PreprocessedLog, scan_for_sensitive

if TYPE_CHECKING:
    from .chain import DownstreamChain

REPLAY_SCHEMA_VERSION = 1


class Role(Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict
    call_id: str = "call_0"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str = ""
    tool_call: ToolCall | None = None
    tool_call_id: str | None = None

    def __post_init__(self):
        if self.role is Role.TOOL and not self.tool_call_id:
            raise ValueError("tool messages must carry a tool_call correlation id")


@dataclass(frozen=True)
class GatewayConfig:
    model_name: str = "gpt-4o"
    temperature: float = 0.0
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameter_schema: dict


# ---------------------------------------------------------------------------
# Scripted backend
# ---------------------------------------------------------------------------


@dataclass
class ScriptedExchange:
    """One pinned request/reply pair.

    A request matches when the last user message satisfies the predicate:
    ``substring`` or ``pattern`` for single checks, or ``all_of``/``none_of``
    substring lists for compound checks.
    """

    reply: ChatMessage
    substring: str | None = None
    pattern: str | None = None
    all_of: tuple[str, ...] = ()
    none_of: tuple[str, ...] = ()
    consume_once: bool = False
    consumed: bool = field(default=False, compare=False)

    def matches(self, text: str) -> bool:
        if self.substring is not None and self.substring not in text:
            return False
        if self.pattern is not None and re.search(self.pattern, text) is None:
            return False
        if any(needle not in text for needle in self.all_of):
            return False
        if any(needle in text for needle in self.none_of):
            return False
        return True

    @classmethod
    def from_json(cls, obj: dict) -> "ScriptedExchange":
        match = obj.get("match", {})
        reply_obj = obj.get("reply", {})
        tool_call = None
        if "tool_call" in reply_obj:
            tc = reply_obj["tool_call"]
            tool_call = ToolCall(tc["name"], tc.get("arguments", {}), tc.get("id", "call_0"))
        reply = ChatMessage(
            role=Role.ASSISTANT,
            content=reply_obj.get("content", ""),
            tool_call=tool_call,
        )
        return cls(
            reply=reply,
            substring=match.get("substring"),
            pattern=match.get("pattern"),
            all_of=tuple(match.get("all_of", ())),
            none_of=tuple(match.get("none_of", ())),
            consume_once=bool(obj.get("consume_once", False)),
        )

    def to_json(self) -> dict:
        match: dict = {}
        if self.substring is not None:
            match["substring"] = self.substring
        if self.pattern is not None:
            match["pattern"] = self.pattern
        if self.all_of:
            match["all_of"] = list(self.all_of)
        if self.none_of:
            match["none_of"] = list(self.none_of)
        reply: dict = {}
        if self.reply.content:
            reply["content"] = self.reply.content
        if self.reply.tool_call is not None:
            reply["tool_call"] = {
                "name": self.reply.tool_call.name,
                "arguments": self.reply.tool_call.arguments,
            }
        obj = {"match": match, "reply": reply}
        if self.consume_once:
            obj["consume_once"] = True
        return obj


def _last_user_text(messages: Sequence[ChatMessage]) -> str:
    for message in reversed(messages):
        if message.role is Role.USER:
            return message.content
    return messages[-1].content


class ScriptedBackend:
    """Deterministic backend replaying pinned exchanges.

    Unmatched requests raise ScriptMiss. Every request is recorded in
    ``request_log`` so tests can count and inspect outgoing prompts.
    """

    def __init__(self, exchanges: Sequence[ScriptedExchange] = ()):
        self._exchanges = list(exchanges)
        self._lock = threading.Lock()
        self.request_log: list[tuple[ChatMessage, ...]] = []

    def add(self, exchange: ScriptedExchange) -> None:
        self._exchanges.append(exchange)

    @classmethod
    def from_replay_file(cls, path) -> "ScriptedBackend":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("schema_version") != REPLAY_SCHEMA_VERSION:
            raise GatewayError(f"unsupported replay schema in {path}")
        return cls([ScriptedExchange.from_json(obj) for obj in doc.get("exchanges", [])])

    def extend_from_replay_file(self, path) -> None:
        other = ScriptedBackend.from_replay_file(path)
        self._exchanges.extend(other._exchanges)

    def complete(
        self,
        messages: Sequence[ChatMessage],
        config: GatewayConfig,
        tools: Sequence[ToolSpec] | None = None,
    ) -> ChatMessage:
        text = _last_user_text(messages)
        with self._lock:
            self.request_log.append(tuple(messages))
            for exchange in self._exchanges:
                if exchange.consume_once and exchange.consumed:
                    continue
                if exchange.matches(text):
                    if exchange.consume_once:
                        exchange.consumed = True
                    return exchange.reply
        raise ScriptMiss(f"no scripted exchange matches request: {text[:120]!r}")


def save_replay_file(exchanges: Sequence[ScriptedExchange], path) -> None:
    doc = {
        "schema_version": REPLAY_SCHEMA_VERSION,
        "exchanges": [exchange.to_json() for exchange in exchanges],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Live HTTP backend
# ---------------------------------------------------------------------------


def _message_to_wire(message: ChatMessage) -> dict:
    wire: dict = {"role": message.role.value, "content": message.content}
    if message.role is Role.ASSISTANT and message.tool_call is not None:
        wire["tool_calls"] = [
            {
                "id": message.tool_call.call_id,
                "type": "function",
                "function": {
                    "name": message.tool_call.name,
                    "arguments": json.dumps(message.tool_call.arguments),
                },
            }
        ]
    if message.role is Role.TOOL:
        wire["tool_call_id"] = message.tool_call_id
    return wire


class HttpBackend:
    """One POST per completion attempt against a chat-completions endpoint.

    Retries with exponential backoff on transport errors and 5xx replies;
    auth and other 4xx failures are surfaced immediately.
    """

    def complete(
        self,
        messages: Sequence[ChatMessage],
        config: GatewayConfig,
        tools: Sequence[ToolSpec] | None = None,
    ) -> ChatMessage:
        api_key = os.environ.get(config.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload: dict = {
            "model": config.model_name,
            "messages": [_message_to_wire(m) for m in messages],
            "temperature": config.temperature,
        }
        if tools:
            payload["tools"] = [
                {
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.parameter_schema,
                    },
                }
                for t in tools
            ]

        last_error: Exception | None = None
        for attempt in range(config.max_retries):
            try:
                response = httpx.post(
                    config.endpoint, json=payload, headers=headers, timeout=config.timeout
                )
            except httpx.HTTPError as exc:
                last_error = exc
                time.sleep(config.backoff_base * (2**attempt))
                continue
            if response.status_code >= 500:
                last_error = GatewayError(f"server error {response.status_code}")
                time.sleep(config.backoff_base * (2**attempt))
                continue
            if response.status_code >= 400:
                raise GatewayError(
                    f"request rejected ({response.status_code}): {response.text[:200]}"
                )
            return self._parse_reply(response.json())
        raise GatewayError(f"retries exhausted: {last_error}")

    @staticmethod
    def _parse_reply(doc: dict) -> ChatMessage:
        try:
            message = doc["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed completion response: {exc}") from None
        tool_call = None
        calls = message.get("tool_calls")
        if calls:
            fn = calls[0].get("function", {})
            try:
                arguments = json.loads(fn.get("arguments", "{}"))
            except json.JSONDecodeError as exc:
                raise GatewayError(f"malformed tool arguments: {exc}") from None
            tool_call = ToolCall(fn.get("name", ""), arguments, calls[0].get("id", "call_0"))
        return ChatMessage(
            role=Role.ASSISTANT,
            content=message.get("content") or "",
            tool_call=tool_call,
        )


# ---------------------------------------------------------------------------
# Completion operations
# ---------------------------------------------------------------------------


def complete(backend, messages: Sequence[ChatMessage], config: GatewayConfig) -> ChatMessage:
    """Issue one completion; returns exactly one assistant message."""
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[-1].role not in (Role.USER, Role.TOOL):
        raise ValueError("conversation must end with a user or tool message")
    reply = backend.complete(messages, config)
    if reply.role is not Role.ASSISTANT:
        raise GatewayError("backend returned a non-assistant message")
    return reply


def complete_with_tools(
    backend,
    messages: Sequence[ChatMessage],
    tools: Sequence[ToolSpec],
    config: GatewayConfig,
) -> ChatMessage:
    """Completion with declared tools; validates any returned tool call."""
    if not tools:
        raise ValueError("tools must be non-empty")
    names = [t.name for t in tools]
    if len(set(names)) != len(names):
        raise ValueError("tool names must be unique within a request")
    if not messages:
        raise ValueError("messages must be non-empty")
    reply = backend.complete(messages, config, tools=tools)
    if reply.tool_call is not None:
        spec = next((t for t in tools if t.name == reply.tool_call.name), None)
        if spec is None:
            raise InvalidToolCall(f"undeclared tool {reply.tool_call.name!r}")
        try:
            jsonschema.validate(reply.tool_call.arguments, spec.parameter_schema)
        except jsonschema.ValidationError as exc:
            raise InvalidToolCall(f"arguments violate schema: {exc.message}") from None
    return reply


@dataclass
class ChatGateway:
    """A backend plus the request configuration it should be called with."""

    backend: object
    config: GatewayConfig = field(default_factory=GatewayConfig)

    def complete(self, messages: Sequence[ChatMessage]) -> ChatMessage:
        return complete(self.backend, messages, self.config)

    def complete_with_tools(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolSpec]
    ) -> ChatMessage:
        return complete_with_tools(self.backend, messages, tools, self.config)


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

TRIAGE_PROMPT_TEMPLATE = """\
Consider yourself a software engineer specializing in resolving Jenkins pipeline failures. The pipeline is large and contains not only jobs but also sub-pipelines and remote pipelines. When the pipeline fails, it may be due to an issue in a sub-pipeline or remote pipeline, which in turn could be caused by an issue in their jobs or other sub-pipelines and remote pipelines. Here, we have navigated through these jobs, sub-pipelines, and remote pipelines:

{chain}

and obtained the console logs of the most downstream failed job:

{log}

Your task is to analyze these console logs to identify the root causes of the failure and suggest solutions. Here is some domain knowledge that may help you:

{knowledge}

If the domain knowledge includes historical records of related failure cases, their root causes, and their solutions, please follow them exactly.

Your answer should contain two sections: Causes of Failures and Recommended Solutions.

Your answer should be direct and concise to help resolve the problem as quickly as possible."""

COORDINATOR_INSTRUCTION = (
    "Find the most downstream failed job by iteratively finding downstream jobs/ "
    "sub-pipelines/ remote pipelines and following their downstream chains until "
    "you reach the most downstream failed job."
)

FINDER_INSTRUCTION = (
    "Your task is to find the failed downstream job or sub-pipeline that caused "
    "the pipeline failure and report its name and build number. If you cannot "
    "find any downstream job (because the current job is already the most "
    "downstream failed job), please return: No failed downstream job found - "
    "the job is already the most downstream failed job."
)

FINDER_TERMINAL_SENTINEL = "No failed downstream job found"

CAUSES_HEADER_RE = re.compile(
    r"(?im)^\s*(?:\d+[.)]\s*)?[^a-z0-9\n]*causes of failures[^a-z0-9\n]*$"
)
SOLUTIONS_HEADER_RE = re.compile(
    r"(?im)^\s*(?:\d+[.)]\s*)?[^a-z0-9\n]*recommended solutions[^a-z0-9\n]*$"
)


def render_chain(links) -> str:
    """Arrow notation for a downstream chain: [A #1] -> [B #7] -> ..."""
    return " -> ".join(f"[{ref}]" for ref in links)


def build_triage_prompt(
    chain: "DownstreamChain",
    log: PreprocessedLog,
    knowledge: str,
    redaction_rules: Sequence[tuple[str, str]] | None = None,
) -> list[ChatMessage]:
    """Instantiate the triage prompt as a single user message.

    When redaction rules are given, the log block is scanned first and the
    prompt is refused outright if anything sensitive survived preprocessing.
    """
    if redaction_rules is not None:
        dirty = scan_for_sensitive(log.lines, redaction_rules)
        if dirty:
            raise RedactionViolation(
                f"log block still matches redaction rules on {len(dirty)} line(s)"
            )
    content = TRIAGE_PROMPT_TEMPLATE.format(
        chain=render_chain(chain.links),
        log=log.text(),
        knowledge=knowledge,
    )
    return [ChatMessage(role=Role.USER, content=content)]


@dataclass(frozen=True)
class ReplySections:
    causes: str
    solutions: str


def parse_triage_reply(reply: ChatMessage) -> ReplySections:
    """Split an assistant reply at its two section headers.

    Markup around the headers (hashes, bold markers, numbering, colons) is
    tolerated; the heading words themselves are required. Raises
    MissingSections when either header is absent or out of order.
    """
    if reply.role is not Role.ASSISTANT:
        raise ValueError("expected an assistant reply")
    text = reply.content
    causes_match = CAUSES_HEADER_RE.search(text)
    solutions_match = SOLUTIONS_HEADER_RE.search(text)
    if causes_match is None or solutions_match is None:
        raise MissingSections("reply lacks the two required section headers")
    if solutions_match.start() < causes_match.end():
        raise MissingSections("section headers out of order")
    causes = text[causes_match.end() : solutions_match.start()].strip()
    solutions = text[solutions_match.end() :].strip()
    return ReplySections(causes=causes, solutions=solutions)
