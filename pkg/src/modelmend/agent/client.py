"""Chat-completion clients: a deterministic mock and a thin HTTP transport.

The wire protocol is a single JSON POST::

    {"model": ..., "messages": [{"role", "content"}, ...], "tools": [...]}

answered by either ``{"content": "..."}`` or
``{"tool_call": {"name": ..., "arguments": {...}}}``.

Configuration comes from WORKBENCH_LLM_URL / WORKBENCH_LLM_KEY /
WORKBENCH_LLM_MODEL; with all of them unset everything runs on the mock.
"""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Optional, Union

from .tools import schema_for, validate_args


class ClientError(Exception):
    """Transport or protocol failure talking to the completion service."""

    def __init__(self, kind: str, detail: str):
        self.kind = kind  # timeout | auth | transport | protocol
        super().__init__(f"{kind}: {detail}")


@dataclass(frozen=True)
class ToolCallReply:
    name: str
    arguments: dict


Reply = Union[str, ToolCallReply]

_CALL_MARKER = re.compile(r"\[CALL:([a-z_]+)(?:\s+(\{.*?\}))?\]", re.DOTALL)

_CONFIRM_PREFIXES = ("yes", "confirm", "do it", "go ahead", "sure")


def wants_confirmation(text: str) -> bool:
    if "[CONFIRM]" in text:
        return True
    return text.strip().lower().startswith(_CONFIRM_PREFIXES)


@dataclass
class MockClient:
    """Scripted, fully deterministic stand-in for a language model.

    Decision order (first hit wins): summarize a fresh tool result; explicit
    [CALL:...] marker; confirmation with nothing pending; then a small fixed
    keyword table; otherwise a canned pointer to the available actions.
    """

    def complete(self, messages: list, tools: list) -> Reply:
        last = messages[-1] if messages else {"role": "user", "content": ""}
        if last["role"] == "tool":
            record = json.loads(last["content"])
            return _summarize(record["tool"], record["result"])
        text = last.get("content", "")
        lowered = text.lower()

        marker = _CALL_MARKER.search(text)
        if marker:
            args = json.loads(marker.group(2)) if marker.group(2) else {}
            return ToolCallReply(marker.group(1), args)

        if wants_confirmation(text):
            return "There is nothing waiting for confirmation."

        if "apply" in lowered:
            return ToolCallReply("apply_repair", {})

        if any(k in lowered for k in ("make it feasible", "repair", "relax", "chang")):
            mentioned = self._mentioned_params(lowered, tools)
            mode = "entry" if "entry" in lowered else "tied"
            return ToolCallReply("solve_repair", {"params": mentioned, "mode": mode})

        if any(k in lowered for k in ("why", "infeasib", "conflict", "diagnos", "wrong")):
            return ToolCallReply("get_iis", {})

        if any(k in lowered for k in ("mutable", "which param", "adjustab")):
            return ToolCallReply("list_mutable_params", {})

        if any(k in lowered for k in ("describe", "overview", "what is", "about the model")):
            return ToolCallReply("describe_model", {})

        return ("I can describe the model, explain the conflict, recommend parameter "
                "changes, or run a repair. Ask away.")

    @staticmethod
    def _mentioned_params(lowered: str, tools: list) -> list:
        schema = schema_for(tools, "solve_repair")
        known = schema["parameters"]["properties"]["params"]["items"]["enum"]
        hits = [name for name in known
                if re.search(rf"(?<![a-z0-9_]){re.escape(name.lower())}(?![a-z0-9_])", lowered)]
        return hits if hits else list(known)


def _summarize(tool: str, result: dict) -> str:
    if "error" in result:
        return f"That did not work: {result['message']}"
    if tool == "describe_model":
        return result["text"]
    if tool == "get_iis":
        if result.get("already_feasible"):
            return "The model is already feasible; there is no conflict to explain."
        members = ", ".join(result["members"])
        return (f"The conflict ({result['method']} isolation, "
                f"{result['solver_calls']} solver calls) involves: {members}. "
                "Dropping any one of them makes the rest satisfiable.")
    if tool == "list_mutable_params":
        adjustable = [p["name"] for p in result["params"] if p["mutable"] and p["side"] == "rhs"]
        discouraged = [p["name"] for p in result["params"] if p["name"] not in adjustable]
        lines = ["Adjustable at low cost: " + (", ".join(adjustable) or "none") + "."]
        if discouraged:
            lines.append("Discouraged: " + ", ".join(discouraged) + ".")
        return " ".join(lines)
    if tool == "solve_repair":
        if result["status"] == "already_feasible":
            return "The model is already feasible; no change is needed."
        recs = "; ".join(r["phrase"] for r in result["recommendations"]) \
            or "no parameter movement"
        return f"Minimal total change {result['total']}: {recs}."
    if tool == "apply_repair":
        params = ", ".join(f"{k} = {v}" for k, v in sorted(result["params"].items()))
        state = "feasible" if result["feasible"] else "still infeasible"
        return f"Applied the plan ({params}). The model is now {state}."
    if tool == "resolve_with_params":
        return ("With those values the model is feasible."
                if result["feasible"] else
                "With those values the model is still infeasible.")
    return json.dumps(result, sort_keys=True)


@dataclass
class HttpClient:
    """One-round-trip JSON transport to any chat-completion endpoint."""

    url: str
    key: Optional[str] = None
    model: str = "default"
    timeout: float = 30.0

    def complete(self, messages: list, tools: list) -> Reply:
        corrective: list = []
        args_retries = 0
        name_retries = 0
        while True:
            raw = self._post(messages + corrective, tools)
            if "tool_call" not in raw:
                content = raw.get("content")
                if not isinstance(content, str):
                    raise ClientError("protocol", f"malformed reply: {raw!r}")
                return content
            call = raw["tool_call"]
            name = call.get("name")
            schema = schema_for(tools, name) if isinstance(name, str) else None
            if schema is None:
                if name_retries >= 1:
                    raise ClientError("protocol", f"unknown tool {name!r} after retry")
                name_retries += 1
                listing = ", ".join(t["name"] for t in tools)
                corrective = [{"role": "user",
                               "content": f"[protocol] unknown tool {name!r}; "
                                          f"available tools: {listing}. Try again."}]
                continue
            problems = validate_args(schema, call.get("arguments", {}))
            if problems:
                if args_retries >= 2:
                    raise ClientError("protocol",
                                      f"invalid arguments for {name}: {'; '.join(problems)}")
                args_retries += 1
                corrective = [{"role": "user",
                               "content": f"[protocol] invalid arguments for {name}: "
                                          f"{'; '.join(problems)}. Try again."}]
                continue
            return ToolCallReply(name, call.get("arguments", {}))

    def _post(self, messages: list, tools: list) -> dict:
        body = json.dumps({"model": self.model, "messages": messages,
                           "tools": tools}).encode()
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        request = urllib.request.Request(self.url, data=body, headers=headers)
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = response.read()
        except urllib.error.HTTPError as e:
            if e.code in (401, 403):
                raise ClientError("auth", f"endpoint rejected credentials ({e.code})")
            raise ClientError("transport", f"HTTP {e.code}")
        except urllib.error.URLError as e:
            reason = str(e.reason)
            kind = "timeout" if "timed out" in reason.lower() else "transport"
            raise ClientError(kind, reason)
        except TimeoutError as e:
            raise ClientError("timeout", str(e) or "request timed out")
        try:
            return json.loads(payload)
        except json.JSONDecodeError as e:
            raise ClientError("protocol", f"reply is not JSON: {e}")


def complete(client, messages: list, tool_schema: list) -> Reply:
    """One completion round against whichever client is configured."""
    return client.complete(messages, tool_schema)


def client_from_env(environ=None):
    env = os.environ if environ is None else environ
    url = env.get("WORKBENCH_LLM_URL")
    if not url:
        return MockClient()
    return HttpClient(url=url, key=env.get("WORKBENCH_LLM_KEY"),
                      model=env.get("WORKBENCH_LLM_MODEL", "default"))
