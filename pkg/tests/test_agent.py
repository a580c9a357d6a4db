"""Agent layer: technique matrix, fallback renders, gate, dispatch, transport."""

import json
import threading
from fractions import Fraction
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from conftest import C, M, P, V, pref
from modelmend.iis import deletion_filter
from modelmend.model import UnknownParam, list_keys, normalize
from modelmend.agent import (
    ChatSession,
    ClientError,
    HttpClient,
    MissingContext,
    MockClient,
    PromptContext,
    TASK_TECHNIQUES,
    ToolCallReply,
    ToolLoopExceeded,
    build_prompt,
    chat_turn,
    client_from_env,
    gate_request,
    new_session,
    render_fallback,
    tool_schemas,
)


def cap_hours_model():
    """cap is mutable rhs, hours is immutable rhs, w multiplies a variable."""
    return M(
        name="plant",
        params=[P("cap", 10, mutable=True, description="storage vessel capacity"),
                P("hours", 24, description="hours in a day"),
                P("w", 2, description="per-unit draw")],
        variables=[V("x"), V("y")],
        constraints=[
            C("demand_floor", [("x", 1)], ">=", pref("hours")),
            C("vessel", [("x", 1)], "<=", pref("cap")),
            C("draw", [("y", pref("w"))], "<=", 100),
        ],
    )


def diagnosed(model):
    return deletion_filter(normalize(model))


# --- technique matrix -------------------------------------------------------

def test_technique_sets_match_matrix(two_row_model):
    iis = diagnosed(two_row_model)
    context = PromptContext(iis=iis)
    for task, expected in TASK_TECHNIQUES.items():
        bundle = build_prompt(task, two_row_model, context)
        assert bundle.techniques() == expected, task


def test_t1_steps_order(two_row_model):
    steps = build_prompt("T1", two_row_model).steps
    order = [next(i for i, s in enumerate(steps) if key in s.lower())
             for key in ("overview", "parameter", "decision", "constraint")]
    assert order == sorted(order) and len(steps) == 4


def test_t2_requires_iis(two_row_model):
    with pytest.raises(MissingContext):
        build_prompt("T2", two_row_model)
    with pytest.raises(MissingContext):
        render_fallback("T2", two_row_model)


def test_t2_contains_every_member(two_row_model):
    iis = diagnosed(two_row_model)
    text = build_prompt("T2", two_row_model, PromptContext(iis=iis)).render()
    for member in iis.members:
        assert member in text


def test_t4_bundle_is_sentiment_only(two_row_model):
    bundle = build_prompt("T4", two_row_model)
    assert bundle.exemplars == () and bundle.steps == () and bundle.keys is None
    assert bundle.sentiment


def test_key_coverage_in_prompts_and_fallbacks(training_model):
    iis = diagnosed(training_model)
    names = list_keys(training_model).all_names()
    for text in (
        build_prompt("T1", training_model).render(),
        build_prompt("T2", training_model, PromptContext(iis=iis)).render(),
        render_fallback("T1", training_model),
    ):
        for name in names:
            assert name in text


# --- fallback renders -------------------------------------------------------

def test_fallback_t2_mentions_members_and_params(two_row_model):
    iis = diagnosed(two_row_model)
    text = render_fallback("T2", two_row_model, PromptContext(iis=iis))
    for token in ("demand", "cap_limit", "dmin", "cap"):
        assert token in text


def test_fallback_t3_recommends_cap_discourages_hours():
    model = cap_hours_model()
    iis = diagnosed(model)
    assert iis.members == frozenset({"demand_floor", "vessel"})
    text = render_fallback("T3", model, PromptContext(iis=iis))
    assert text.index("Worth changing:") < text.index("cap ")
    assert "hours — fixed in the real world" in text
    # w is outside the conflict, so it is not listed at all
    first_tokens = {line.split()[0] for line in text.splitlines() if line.strip()}
    assert "w" not in first_tokens


def test_fallback_deterministic(training_model):
    iis = diagnosed(training_model)
    context = PromptContext(iis=iis)
    for task in ("T1", "T2", "T3", "T4"):
        assert render_fallback(task, training_model, context) == \
            render_fallback(task, training_model, context)


# --- gate -------------------------------------------------------------------

def test_gate_allows_mutable_rhs():
    session = new_session(cap_hours_model())
    assert gate_request(session, ["cap"]).allowed


def test_gate_warns_immutable():
    session = new_session(cap_hours_model())
    decision = gate_request(session, ["hours"])
    assert not decision.allowed and decision.reason == "immutable_param"
    assert decision.consequence


def test_gate_warns_lhs_with_miqcp_consequence():
    session = new_session(cap_hours_model())
    decision = gate_request(session, ["w"])
    assert not decision.allowed and decision.reason == "lhs_param"
    assert "quadratically constrained" in decision.consequence


def test_gate_unknown_param():
    session = new_session(cap_hours_model())
    with pytest.raises(UnknownParam):
        gate_request(session, ["ghost"])


# --- chat turns (mock) ------------------------------------------------------

def test_why_infeasible_runs_get_iis(two_row_model):
    session = new_session(two_row_model)
    reply, session = chat_turn(session, "why is this infeasible?")
    assert "demand" in reply and "cap_limit" in reply
    assert session.cached_iis is not None
    assert any(m["role"] == "tool" and '"tool": "get_iis"' in m["content"]
               for m in session.history)


def test_gated_relax_then_confirm():
    session = new_session(cap_hours_model())
    reply, session = chat_turn(session, "please relax hours")
    assert reply.startswith("WARNING[immutable_param]")
    assert session.pending_confirmation is not None
    assert session.history[-1]["content"] == reply  # warning is the last message

    reply2, session = chat_turn(session, "yes, do it anyway")
    assert session.pending_confirmation is None
    tool_msgs = [m for m in session.history if m["role"] == "tool"]
    record = json.loads(tool_msgs[-1]["content"])
    assert record["tool"] == "solve_repair"
    assert record["result"]["param_deltas"] == {"hours": "-14"}


def test_confirmation_unlocks_exactly_once():
    session = new_session(cap_hours_model())
    _, session = chat_turn(session, "please relax hours")
    _, session = chat_turn(session, "yes")
    reply, session = chat_turn(session, "please relax hours")
    assert reply.startswith("WARNING[immutable_param]")  # gated again


def test_nonconfirmation_clears_pending(two_row_model):
    session = new_session(cap_hours_model())
    _, session = chat_turn(session, "please relax hours")
    reply, session = chat_turn(session, "actually, describe the model instead")
    assert session.pending_confirmation is None
    assert "WARNING" not in reply


def test_repair_apply_resolve_flow(two_row_model):
    session = new_session(two_row_model)
    reply, session = chat_turn(session, "make it feasible by changing dmin")
    assert session.cached_plan is not None and session.cached_plan.total == 1
    assert "decrease dmin from 1 to 0" in reply

    reply, session = chat_turn(session, "apply that plan")
    assert session.model.param_values()["dmin"] == 0
    assert "feasible" in reply

    reply, session = chat_turn(session, '[CALL:resolve_with_params {"overrides": {}}]')
    assert "is feasible" in reply


def test_lhs_confirmation_surfaces_advisory():
    session = new_session(cap_hours_model())
    reply, session = chat_turn(session, "change w please")
    assert reply.startswith("WARNING[lhs_param]")
    reply, session = chat_turn(session, "yes")
    assert "quadratically constrained" in reply  # engine refusal relayed


def test_gate_soundness_over_history():
    """No solve_repair on discouraged params without a warning + confirmation."""
    session = new_session(cap_hours_model())
    for message in ("please relax hours", "yes", "please relax cap",
                    "why infeasible?", "change w", "no thanks", "describe"):
        _, session = chat_turn(session, message)
    warned = False
    for m in session.history:
        if m["role"] == "assistant" and m["content"].startswith("WARNING["):
            warned = True
        if m["role"] == "assistant" and m["content"].startswith("[tool_call]"):
            call = json.loads(m["content"][len("[tool_call] "):])
            if call["name"] == "solve_repair":
                params = call["args"]["params"]
                discouraged = {"hours", "w"} & set(params)
                if discouraged:
                    assert warned, f"unwarned gated call over {params}"


def test_mock_transcripts_reproducible(training_model):
    script = ["describe the model", "why is it infeasible?",
              "make it feasible by changing demand", "apply it"]

    def run():
        session = new_session(training_model)
        for message in script:
            _, session = chat_turn(session, message)
        return json.dumps(session.history, sort_keys=True)

    assert run() == run()


def test_tool_loop_bounded(two_row_model):
    class LoopingClient(MockClient):
        def complete(self, messages, tools):
            return ToolCallReply("describe_model", {})

    session = new_session(two_row_model, client=LoopingClient())
    with pytest.raises(ToolLoopExceeded):
        chat_turn(session, "hello")


def test_feasible_model_get_iis(feasible_model):
    session = new_session(feasible_model)
    reply, session = chat_turn(session, "why is this infeasible?")
    assert "already feasible" in reply


# --- live transport against a local stub ------------------------------------

class _StubHandler(BaseHTTPRequestHandler):
    responses = []
    requests = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        _StubHandler.requests.append(json.loads(self.rfile.read(length)))
        status, payload = _StubHandler.responses.pop(0)
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.responses = []
    _StubHandler.requests = []
    yield f"http://127.0.0.1:{server.server_port}", _StubHandler
    server.shutdown()


def test_live_text_reply(stub_server, two_row_model):
    url, stub = stub_server
    stub.responses.append((200, {"content": "hello from the wire"}))
    client = HttpClient(url=url)
    assert client.complete([{"role": "user", "content": "hi"}],
                           tool_schemas(two_row_model)) == "hello from the wire"
    assert stub.requests[0]["messages"][0]["content"] == "hi"


def test_live_tool_call_reply(stub_server, two_row_model):
    url, stub = stub_server
    stub.responses.append((200, {"tool_call": {"name": "get_iis", "arguments": {}}}))
    reply = HttpClient(url=url).complete([], tool_schemas(two_row_model))
    assert reply == ToolCallReply("get_iis", {})


def test_live_unknown_tool_retried_once_then_protocol_error(stub_server, two_row_model):
    url, stub = stub_server
    stub.responses.append((200, {"tool_call": {"name": "frobnicate", "arguments": {}}}))
    stub.responses.append((200, {"tool_call": {"name": "frobnicate", "arguments": {}}}))
    with pytest.raises(ClientError) as info:
        HttpClient(url=url).complete([], tool_schemas(two_row_model))
    assert info.value.kind == "protocol"
    assert len(stub.requests) == 2
    assert "available tools" in stub.requests[1]["messages"][-1]["content"]


def test_live_bad_args_retried_then_accepted(stub_server, two_row_model):
    url, stub = stub_server
    stub.responses.append((200, {"tool_call": {"name": "solve_repair",
                                               "arguments": {"params": ["nope"]}}}))
    stub.responses.append((200, {"tool_call": {"name": "solve_repair",
                                               "arguments": {"params": ["dmin"]}}}))
    reply = HttpClient(url=url).complete([], tool_schemas(two_row_model))
    assert reply == ToolCallReply("solve_repair", {"params": ["dmin"]})


def test_live_auth_error(stub_server, two_row_model):
    url, stub = stub_server
    stub.responses.append((401, {"error": "who are you"}))
    with pytest.raises(ClientError) as info:
        HttpClient(url=url, key="bad").complete([], tool_schemas(two_row_model))
    assert info.value.kind == "auth"


def test_unreachable_endpoint_is_client_error(two_row_model):
    client = HttpClient(url="http://127.0.0.1:9", timeout=0.3)
    with pytest.raises(ClientError) as info:
        client.complete([], tool_schemas(two_row_model))
    assert info.value.kind in ("timeout", "transport")


def test_client_from_env_defaults_to_mock():
    assert isinstance(client_from_env({}), MockClient)
    live = client_from_env({"WORKBENCH_LLM_URL": "http://x", "WORKBENCH_LLM_MODEL": "m"})
    assert isinstance(live, HttpClient) and live.model == "m"
