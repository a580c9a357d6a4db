"""Chat sessions: the gate, the dispatch loop, and session state.

One turn appends the user message, queries the client, executes tool calls
(at most eight per turn), and returns the assistant text plus the updated
session.  The gate sits in front of solve_repair/apply_repair: requests that
touch immutable or left-hand-side parameters produce a warning the user must
confirm in the next turn.  Affirmation detection is deterministic — safety
logic never depends on model output.

Turns are transactional: the incoming session is never mutated, and a failed
turn leaves no partial state behind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from ..model import Model
from .client import MockClient, ToolCallReply, complete, wants_confirmation
from .prompts import SENTIMENT_INSTRUCTION, param_sides
from .tools import GATED_TOOLS, execute_tool, schema_for, tool_schemas, validate_args

MAX_TOOL_ROUNDS = 8

REASON_IMMUTABLE = "immutable_param"
REASON_LHS = "lhs_param"


class ToolLoopExceeded(Exception):
    """A turn tried to chain more than MAX_TOOL_ROUNDS tool calls."""


@dataclass(frozen=True)
class GateDecision:
    allowed: bool
    reason: Optional[str] = None      # immutable_param | lhs_param
    consequence: str = ""

    def __post_init__(self):
        if not self.allowed:
            assert self.consequence, "a warning must explain its consequence"


ALLOW = GateDecision(True)


@dataclass(frozen=True)
class ToolCall:
    name: str
    args: dict
    result: Optional[dict] = None


@dataclass(frozen=True)
class PendingRequest:
    call: ToolCall
    decision: GateDecision


@dataclass
class ChatSession:
    model: Model
    history: list = field(default_factory=list)   # {role, content} dicts
    cached_iis: Optional[object] = None
    cached_plan: Optional[object] = None
    pending_confirmation: Optional[PendingRequest] = None
    llm_mode: str = "mock"
    client: object = field(default_factory=MockClient)

    def copy(self) -> "ChatSession":
        return ChatSession(
            model=self.model,
            history=list(self.history),
            cached_iis=self.cached_iis,
            cached_plan=self.cached_plan,
            pending_confirmation=self.pending_confirmation,
            llm_mode=self.llm_mode,
            client=self.client,
        )


def new_session(model: Model, client=None) -> ChatSession:
    client = client if client is not None else MockClient()
    mode = "mock" if isinstance(client, MockClient) else "live"
    history = [{"role": "assistant",
                "content": f"Loaded model {model.name!r}. {SENTIMENT_INSTRUCTION}"}]
    return ChatSession(model=model, history=history, llm_mode=mode, client=client)


def is_affirmation(text: str) -> bool:
    return wants_confirmation(text)


def gate_request(session: ChatSession, requested_params) -> GateDecision:
    """Allow iff every requested parameter is mutable and purely right-hand-side."""
    model = session.model
    known = {p.name: p for p in model.params}
    unknown = sorted(set(requested_params) - set(known))
    if unknown:
        from ..model import UnknownParam

        raise UnknownParam(", ".join(unknown))
    sides = param_sides(model)
    ordered = sorted(requested_params, key=[p.name for p in model.params].index)
    lhs = [n for n in ordered if sides[n] in ("lhs", "both")]
    immutable = [n for n in ordered if n not in lhs and not known[n].mutable]
    if lhs:
        return GateDecision(
            False, REASON_LHS,
            f"{', '.join(lhs)} multiplies decision variables; relaxing it turns the "
            "repair into a nonconvex mixed-integer quadratically constrained program "
            "and is not recommended.")
    if immutable:
        return GateDecision(
            False, REASON_IMMUTABLE,
            f"{', '.join(immutable)} is marked fixed: it usually cannot be changed in "
            "the real world, so a plan that moves it may not be actionable.")
    return ALLOW


def _gate_params(session: ChatSession, name: str, args: dict):
    if name == "solve_repair":
        return args.get("params", [])
    if name == "apply_repair" and session.cached_plan is not None:
        return sorted(session.cached_plan.targets)
    return []


def _warning_text(pending: PendingRequest) -> str:
    d = pending.decision
    return (f"WARNING[{d.reason}]: {d.consequence} "
            f"Reply 'yes' to run {pending.call.name} anyway, or ask for something else.")


def _append_tool_exchange(draft: ChatSession, call: ToolCall):
    draft.history.append({
        "role": "assistant",
        "content": "[tool_call] " + json.dumps(
            {"name": call.name, "args": call.args}, sort_keys=True),
    })
    draft.history.append({
        "role": "tool",
        "content": json.dumps({"tool": call.name, "result": call.result},
                              sort_keys=True),
    })


def _finish(draft: ChatSession, text: str):
    draft.history.append({"role": "assistant", "content": text})
    return text, draft


def chat_turn(session: ChatSession, user_message: str):
    """Run one conversation turn; returns (assistant_text, updated_session)."""
    draft = session.copy()
    draft.history.append({"role": "user", "content": user_message})

    pending = draft.pending_confirmation
    draft.pending_confirmation = None
    if pending is not None and is_affirmation(user_message):
        call = ToolCall(pending.call.name, pending.call.args,
                        execute_tool(draft, pending.call.name, pending.call.args))
        _append_tool_exchange(draft, call)
        reply = complete(draft.client, draft.history, tool_schemas(draft.model))
        if isinstance(reply, ToolCallReply):
            # the confirmed action is done; one summary is all this turn needs
            reply = f"Done: {call.name} executed."
        return _finish(draft, reply)

    tools = tool_schemas(draft.model)
    for _round in range(MAX_TOOL_ROUNDS):
        reply = complete(draft.client, draft.history, tools)
        if not isinstance(reply, ToolCallReply):
            return _finish(draft, reply)
        problems = validate_args(schema_for(tools, reply.name) or
                                 {"parameters": {"type": "object", "properties": {}}},
                                 reply.arguments)
        if schema_for(tools, reply.name) is None or problems:
            detail = "; ".join(problems) or f"unknown tool {reply.name!r}"
            return _finish(draft, f"I tried an invalid action ({detail}); "
                                  "please rephrase the request.")
        if reply.name in GATED_TOOLS:
            decision = gate_request(draft, _gate_params(draft, reply.name, reply.arguments))
            if not decision.allowed:
                draft.pending_confirmation = PendingRequest(
                    ToolCall(reply.name, reply.arguments), decision)
                return _finish(draft, _warning_text(draft.pending_confirmation))
        call = ToolCall(reply.name, reply.arguments,
                        execute_tool(draft, reply.name, reply.arguments))
        _append_tool_exchange(draft, call)
        tools = tool_schemas(draft.model)  # apply_repair may have swapped the model
    raise ToolLoopExceeded(f"more than {MAX_TOOL_ROUNDS} tool rounds in one turn")
