"""Four-task conversational layer over the diagnosis/repair engine.

T1 model analysis, T2 infeasibility diagnosis, T3 troubleshoot
recommendation, T4 interactive conversation — prompt assembly plus a
tool-dispatch loop over a pluggable chat-completion client, with a
deterministic offline renderer so everything is testable without a
language model.
"""

from .client import ClientError, HttpClient, MockClient, ToolCallReply, client_from_env, complete
from .prompts import (
    MissingContext,
    PromptBundle,
    PromptContext,
    TASK_TECHNIQUES,
    TECH_COT,
    TECH_FEWSHOT,
    TECH_KEYS,
    TECH_SENTIMENT,
    build_prompt,
    member_expression,
    param_sides,
    render_fallback,
)
from .session import (
    ChatSession,
    GateDecision,
    PendingRequest,
    ToolCall,
    ToolLoopExceeded,
    chat_turn,
    gate_request,
    is_affirmation,
    new_session,
)
from .tools import GATED_TOOLS, execute_tool, tool_schemas, validate_args
