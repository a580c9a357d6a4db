"""A full scripted chat session over the deterministic mock client.

Everything below runs offline; set WORKBENCH_LLM_URL / WORKBENCH_LLM_KEY /
WORKBENCH_LLM_MODEL to route the same turns through a live endpoint.

Run:  python3 demos/03_chat.py
"""

from modelmend.agent import chat_turn, new_session
from modelmend.modelfile import parse_text

SOURCE = """
model training;

param staff_cap = 10 mutable "total staff headcount";
param demand = 12 "operators needed on the floor";
param ratio = 2 "trainees one mentor can coach";

var operators integer >= 0;
var mentors integer >= 0;

s.t. headcount: operators + mentors <= staff_cap;
s.t. coverage: operators >= demand;
s.t. mentoring: operators <= ratio * mentors;

min: operators + mentors;
"""

session = new_session(parse_text(SOURCE))

script = [
    "describe the model",
    "why is this infeasible?",
    "which parameters are adjustable?",
    "make it feasible by changing staff_cap",
    "apply the plan",
    "please relax demand",          # immutable: expect a warning first
    "yes, do it anyway",            # explicit confirmation unlocks it once
]

for message in script:
    print(f"\nuser> {message}")
    reply, session = chat_turn(session, message)
    print(f"bot > {reply}")

print("\nfinal parameter values:",
      {k: str(v) for k, v in session.model.param_values().items()})
