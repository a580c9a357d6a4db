"""Prompt assembly for the four tasks, plus the deterministic fallback renderer.

The technique matrix is fixed:

    T1 model analysis        : expert-cot, few-shot, key-retrieve
    T2 infeasibility diagnosis: expert-cot, few-shot, key-retrieve
    T3 troubleshoot recommendation: expert-cot, few-shot
    T4 interactive conversation   : sentiment

Key-retrieve embeds the exact `list_keys` inventory verbatim so the model
cannot drift onto invented names; the fallback renderer mirrors the same
expert steps so every behavior is testable offline, byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from ..model import KeyInventory, Model, list_keys, normalize, param_sides
from ..modelfile import render_constraint
from ..rationals import format_rational

TECH_COT = "expert-cot"
TECH_FEWSHOT = "few-shot"
TECH_KEYS = "key-retrieve"
TECH_SENTIMENT = "sentiment"

TASKS = ("T1", "T2", "T3", "T4")

TASK_TECHNIQUES = {
    "T1": frozenset({TECH_COT, TECH_FEWSHOT, TECH_KEYS}),
    "T2": frozenset({TECH_COT, TECH_FEWSHOT, TECH_KEYS}),
    "T3": frozenset({TECH_COT, TECH_FEWSHOT}),
    "T4": frozenset({TECH_SENTIMENT}),
}

SENTIMENT_INSTRUCTION = (
    "Read the user's sentiment before acting. If they ask to change a parameter that "
    "is discouraged (fixed in the real world, or multiplying a variable), do not refuse: "
    "warn about the consequences and wait for their explicit confirmation before solving."
)


class MissingContext(Exception):
    """The task needs context (an IIS, mutability info) that was not supplied."""


@dataclass(frozen=True)
class PromptContext:
    iis: Optional[object] = None   # IisResult
    plan: Optional[object] = None  # RepairPlan


@dataclass(frozen=True)
class PromptBundle:
    task: str
    system_text: str
    steps: tuple       # ordered expert instructions; empty when no expert-cot
    exemplars: tuple   # ((prompt, answer), ...); empty when no few-shot
    keys: Optional[KeyInventory]  # None when no key-retrieve
    sentiment: Optional[str]      # None when no sentiment prompt

    def techniques(self) -> frozenset:
        present = set()
        if self.steps:
            present.add(TECH_COT)
        if self.exemplars:
            present.add(TECH_FEWSHOT)
        if self.keys is not None:
            present.add(TECH_KEYS)
        if self.sentiment:
            present.add(TECH_SENTIMENT)
        return frozenset(present)

    def render(self) -> str:
        parts = [self.system_text]
        if self.steps:
            parts.append("Work through these steps in order:")
            parts.extend(f"  {i}. {step}" for i, step in enumerate(self.steps, 1))
        for prompt, answer in self.exemplars:
            parts.append(f"Example question: {prompt}")
            parts.append(f"Example answer: {answer}")
        if self.keys is not None:
            parts.append("These are the exact names in the model; use them verbatim "
                         "and no others:")
            parts.append(self.keys.text_block())
        if self.sentiment:
            parts.append(self.sentiment)
        return "\n".join(parts)


def _load_exemplars(kind: str) -> tuple:
    pairs = []
    for name in ("tsp.json", "knapsack.json"):
        data = json.loads(resources.files(__package__).joinpath("exemplars", name).read_text())
        entry = data[kind]
        pairs.append((entry["prompt"], entry["answer"]))
    return tuple(pairs)


def member_expression(model: Model, member_id: str) -> str:
    """Symbolic form of an IIS member: a constraint or a variable bound."""
    if "." in member_id:
        var, _, side = member_id.rpartition(".")
        for v in model.vars:
            if v.name == var and side == "lower":
                return f"{var} >= {format_rational(v.lower)}"
            if v.name == var and side == "upper":
                return f"{var} <= {format_rational(v.upper)}"
    return render_constraint(model.constraint(member_id))


T1_STEPS = (
    "Give a plain-language overview of what the model decides and why.",
    "Summarize every input parameter and what it measures.",
    "List the decisions to be made (the variables) and their ranges.",
    "Walk through each constraint and say what it enforces.",
)

T2_STEPS = (
    "Restate the conflict set: the constraints and bounds that cannot hold together.",
    "Map each member back to its symbolic form with its parameters by name.",
    "Explain how the members push against each other.",
    "Name the smallest real-world change that would break the deadlock.",
)

T3_STEPS = (
    "List the parameters involved in the conflict.",
    "Classify each: can it be changed at low cost in the real world?",
    "Prefer right-hand-side parameters; left-hand-side ones make the repair "
    "problem nonconvex and usually stand for physics.",
    "Propose a direction of change for each recommended parameter.",
)


def build_prompt(task: str, model: Model, context: Optional[PromptContext] = None) -> PromptBundle:
    """Assemble the prompt bundle for a task, technique matrix enforced."""
    context = context or PromptContext()
    keys = list_keys(model)
    if task == "T1":
        return PromptBundle(
            task="T1",
            system_text=(f"You are an optimization expert describing the model "
                         f"{model.name!r} to someone who has never seen it."),
            steps=T1_STEPS,
            exemplars=_load_exemplars("describe"),
            keys=keys,
            sentiment=None,
        )
    if task == "T2":
        if context.iis is None:
            raise MissingContext("T2 needs the isolated conflict set (IisResult)")
        members = sorted(context.iis.members)
        lines = [f"  {m}: {member_expression(model, m)}" for m in members]
        return PromptBundle(
            task="T2",
            system_text=("You are an optimization expert explaining why the model "
                         f"{model.name!r} is infeasible.\nThe isolated conflict set is:\n"
                         + "\n".join(lines)),
            steps=T2_STEPS,
            exemplars=_load_exemplars("diagnose"),
            keys=keys,
            sentiment=None,
        )
    if task == "T3":
        scope = _t3_scope(model, context)
        lines = [f"  {name}: {'adjustable' if ok else 'discouraged'} ({why})"
                 for name, ok, why in scope]
        return PromptBundle(
            task="T3",
            system_text=("You are an optimization expert recommending which parameters "
                         f"of {model.name!r} to change.\nAdjustability of the parameters "
                         "involved:\n" + "\n".join(lines)),
            steps=T3_STEPS,
            exemplars=_load_exemplars("recommend"),
            keys=None,
            sentiment=None,
        )
    if task == "T4":
        return PromptBundle(
            task="T4",
            system_text=(f"You are assisting with the optimization model {model.name!r}; "
                         "answer follow-up questions and call tools when asked to act."),
            steps=(),
            exemplars=(),
            keys=None,
            sentiment=SENTIMENT_INSTRUCTION,
        )
    raise ValueError(f"unknown task {task!r}")


def _t3_scope(model: Model, context: PromptContext) -> list:
    """Parameters in play with an (adjustable?, reason) classification.

    With an IIS in context only the parameters feeding its rows are
    considered, mirroring how an expert reads the conflict first.
    """
    sides = param_sides(model)
    mutables = {p.name: p.mutable for p in model.params}
    if context.iis is not None:
        system = normalize(model)
        involved = []
        for i in sorted(context.iis.rows):
            row = system.rows[i]
            for prov in row.coeff_prov:
                if prov is not None and prov.param is not None and prov.param not in involved:
                    involved.append(prov.param)
            if row.rhs_prov.param is not None and row.rhs_prov.param not in involved:
                involved.append(row.rhs_prov.param)
    else:
        involved = [p.name for p in model.params]
    scope = []
    for name in involved:
        if sides[name] in ("lhs", "both"):
            scope.append((name, False, "multiplies a variable; changing it makes the "
                                       "repair nonconvex"))
        elif not mutables[name]:
            scope.append((name, False, "fixed in the real world"))
        else:
            scope.append((name, True, "right-hand side and adjustable at low cost"))
    return scope


def render_fallback(task: str, model: Model, context: Optional[PromptContext] = None) -> str:
    """Deterministic offline rendering that mirrors the expert steps."""
    context = context or PromptContext()
    if task == "T1":
        return _fallback_describe(model)
    if task == "T2":
        if context.iis is None:
            raise MissingContext("T2 needs the isolated conflict set (IisResult)")
        return _fallback_diagnose(model, context.iis)
    if task == "T3":
        return _fallback_recommend(model, context)
    if task == "T4":
        return ("I can describe the model, explain the conflict, recommend parameter "
                "changes, or run a repair. Ask away.")
    raise ValueError(f"unknown task {task!r}")


def _fallback_describe(model: Model) -> str:
    inv = list_keys(model)
    lines = [f"Model {model.name!r}: {len(model.vars)} decision(s), "
             f"{len(model.constraints)} constraint(s), {len(model.params)} parameter(s)."]
    if model.objective is not None:
        goal = "minimize" if model.objective.sense == "min" else "maximize"
        lines.append(f"The goal is to {goal} the stated objective.")
    lines.append("Parameters:")
    for p in model.params:
        flag = "adjustable" if p.mutable else "fixed"
        desc = f" — {p.description}" if p.description else ""
        lines.append(f"  {p.name} = {format_rational(p.value)} ({flag}){desc}")
    lines.append("Decisions:")
    for v in model.vars:
        lo = format_rational(v.lower) if v.lower is not None else "-inf"
        hi = format_rational(v.upper) if v.upper is not None else "+inf"
        lines.append(f"  {v.name}: {v.kind} in [{lo}, {hi}]")
    lines.append("Constraints:")
    for c in model.constraints:
        desc = f" — {c.description}" if c.description else ""
        lines.append(f"  {c.name}: {render_constraint(c)}{desc}")
    assert all(name in "\n".join(lines) for name in inv.all_names())
    return "\n".join(lines)


def _fallback_diagnose(model: Model, iis) -> str:
    members = sorted(iis.members)
    lines = [f"The model {model.name!r} is infeasible. The conflict was isolated by the "
             f"{iis.method} route to {len(members)} member(s):"]
    for m in members:
        lines.append(f"  {m}: {member_expression(model, m)}")
    lines.append("These cannot all hold at once, but dropping any single one of them "
                 "leaves a satisfiable system.")
    params = sorted({p for m in members for p in _member_params(model, m)})
    if params:
        lines.append("Parameters feeding the conflict: " + ", ".join(params) + ".")
    return "\n".join(lines)


def _member_params(model: Model, member_id: str) -> set:
    if "." in member_id and member_id.rpartition(".")[2] in ("lower", "upper"):
        return set()
    c = model.constraint(member_id)
    named = {coeff.param for _, coeff in c.terms if coeff.param is not None}
    if c.rhs.param is not None:
        named.add(c.rhs.param)
    return named


def _fallback_recommend(model: Model, context: PromptContext) -> str:
    scope = _t3_scope(model, context)
    values = model.param_values()
    recommended = [(n, why) for n, ok, why in scope if ok]
    discouraged = [(n, why) for n, ok, why in scope if not ok]
    lines = ["Troubleshooting recommendation:"]
    if recommended:
        lines.append("Worth changing:")
        for name, why in recommended:
            lines.append(f"  {name} (currently {format_rational(values[name])}) — {why}")
    else:
        lines.append("No parameter in the conflict is both adjustable and on the "
                     "right-hand side.")
    if discouraged:
        lines.append("Discouraged:")
        for name, why in discouraged:
            lines.append(f"  {name} — {why}")
    return "\n".join(lines)
