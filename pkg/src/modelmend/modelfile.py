"""Parse and serialize the workbench model formats.

Two equivalent surfaces:

  * a small algebraic text language (``.om`` files, UTF-8, ``#`` comments)::

        model training;
        param demand = 12 mutable "operators needed";
        var o integer >= 0;
        s.t. coverage: o >= demand;
        min: o;

    Expressions are sums of terms NUMBER, NAME, NUMBER*NAME, NAME*NAME
    (parameter times variable) or NUMBER*NAME*NAME; a name is a variable or
    a parameter according to its declaration.  Numbers are integers,
    decimals or ``p/q`` rationals, all converted exactly.

  * a structured JSON document with keys {name, params, vars, constraints,
    objective}; every number is a string so nothing is rounded in transit.

Both parsers return either a Model or the list of *all* errors found.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .model import (
    CONTINUOUS,
    INTEGER,
    SENSE_EQ,
    SENSE_GE,
    SENSE_LE,
    Coefficient,
    Constraint,
    InvalidModel,
    Model,
    Objective,
    ParamDef,
    VarDef,
    validate,
)
from .rationals import format_rational, parse_rational

KIND_LEX = "lex"
KIND_SYNTAX = "syntax"
KIND_RESOLVE = "resolve"
KIND_DUPLICATE = "duplicate-name"

FORMAT_TEXT = "text"
FORMAT_STRUCTURED = "structured"


@dataclass(frozen=True)
class SourceSpan:
    line: int    # 1-based
    column: int  # 1-based
    length: int = 1


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    kind: str
    message: str


# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r]+)
      | (?P<comment>\#[^\n]*)
      | (?P<nl>\n)
      | (?P<st>s\.t\.)
      | (?P<number>\d+(?:\.\d+)?(?:/\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<string>"[^"\n]*")
      | (?P<op><=|>=|=|\+|-|\*|:|;)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str   # st | number | name | string | op | eof
    text: str
    span: SourceSpan


def _lex(source: str):
    tokens: list[_Token] = []
    errors: list[ParseError] = []
    pos, line, col = 0, 1, 1
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            errors.append(ParseError(SourceSpan(line, col, 1), KIND_LEX,
                                     f"unexpected character {source[pos]!r}"))
            pos += 1
            col += 1
            continue
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(text)
        else:
            tokens.append(_Token(kind, text, SourceSpan(line, col, len(text))))
            col += len(text)
        pos = m.end()
    tokens.append(_Token("eof", "", SourceSpan(line, col, 0)))
    return tokens, errors


# ---------------------------------------------------------------------------
# text parser

# Raw expression term before name resolution: sign * num * name1 * name2.
@dataclass
class _RawTerm:
    sign: int
    num: Optional[Fraction]
    names: list
    span: SourceSpan


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0
        self.errors: list[ParseError] = []

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, span: SourceSpan, message: str, kind: str = KIND_SYNTAX):
        self.errors.append(ParseError(span, kind, message))

    def expect_op(self, text: str) -> Optional[_Token]:
        t = self.peek()
        if t.kind == "op" and t.text == text:
            return self.take()
        self.error(t.span, f"expected {text!r}, found {t.text or 'end of input'!r}")
        return None

    def skip_past_semicolon(self):
        while True:
            t = self.take()
            if t.kind == "eof" or (t.kind == "op" and t.text == ";"):
                return

    def parse_number(self, allow_sign=True) -> Optional[Fraction]:
        sign = 1
        t = self.peek()
        if allow_sign and t.kind == "op" and t.text in "+-":
            self.take()
            sign = -1 if t.text == "-" else 1
            t = self.peek()
        if t.kind != "number":
            self.error(t.span, f"expected a number, found {t.text or 'end of input'!r}")
            return None
        self.take()
        return sign * parse_rational(t.text)

    def parse_raw_expr(self) -> Optional[list]:
        """Sum of terms; returns raw terms for later name resolution."""
        terms: list[_RawTerm] = []
        first = True
        while True:
            t = self.peek()
            sign = 1
            if t.kind == "op" and t.text in "+-":
                self.take()
                sign = -1 if t.text == "-" else 1
            elif not first:
                return terms
            term = self.parse_raw_term(sign)
            if term is None:
                return None
            terms.append(term)
            first = False
            nxt = self.peek()
            if not (nxt.kind == "op" and nxt.text in "+-"):
                return terms

    def parse_raw_term(self, sign: int) -> Optional[_RawTerm]:
        t = self.peek()
        span = t.span
        num: Optional[Fraction] = None
        names: list = []
        if t.kind == "number":
            self.take()
            num = parse_rational(t.text)
        elif t.kind == "name":
            self.take()
            names.append((t.text, t.span))
        else:
            self.error(span, f"expected a term, found {t.text or 'end of input'!r}")
            return None
        while self.peek().kind == "op" and self.peek().text == "*":
            self.take()
            t = self.peek()
            if t.kind != "name":
                self.error(t.span, f"expected a name after '*', found {t.text or 'end of input'!r}")
                return None
            if len(names) >= 2:
                self.error(t.span, "a term multiplies at most a parameter and a variable")
                return None
            self.take()
            names.append((t.text, t.span))
        return _RawTerm(sign, num, names, span)


@dataclass
class _RawConstraint:
    name: str
    name_span: SourceSpan
    lhs: list
    sense: str
    rhs: list
    description: Optional[str]


def parse_text(source: str) -> Union[Model, list]:
    """Parse the text language; returns a Model or every ParseError found."""
    tokens, errors = _lex(source)
    p = _Parser(tokens)
    p.errors.extend(errors)

    model_name = "model"
    params: list[ParamDef] = []
    variables: list[VarDef] = []
    raw_constraints: list[_RawConstraint] = []
    objective_raw = None  # (sense, raw terms)
    declared_spans: dict = {}

    def declare(name: str, span: SourceSpan) -> bool:
        if name in declared_spans:
            p.error(span, f"name {name!r} already declared", KIND_DUPLICATE)
            return False
        declared_spans[name] = span
        return True

    while p.peek().kind != "eof":
        t = p.take()
        before = len(p.errors)
        if t.kind == "name" and t.text == "model":
            nm = p.peek()
            if nm.kind == "name":
                p.take()
                model_name = nm.text
            else:
                p.error(nm.span, "expected a model name")
            p.expect_op(";")
        elif t.kind == "name" and t.text == "param":
            _parse_param(p, declare, params)
        elif t.kind == "name" and t.text == "var":
            _parse_var(p, declare, variables)
        elif t.kind == "st":
            _parse_constraint(p, declare, raw_constraints)
        elif t.kind == "name" and t.text in ("min", "max"):
            if p.expect_op(":") is not None:
                terms = p.parse_raw_expr()
                if terms is not None:
                    if objective_raw is not None:
                        p.error(t.span, "objective declared more than once")
                    else:
                        objective_raw = (t.text, terms)
                    p.expect_op(";")
        elif t.kind == "op" and t.text == ";":
            continue  # stray semicolon
        else:
            p.error(t.span, f"expected a declaration, found {t.text!r}")
        if len(p.errors) > before:
            # resynchronize only when the statement bailed before its ';'
            prev = p.tokens[p.i - 1] if p.i > 0 else None
            if not (prev is not None and prev.kind == "op" and prev.text == ";"):
                p.skip_past_semicolon()

    param_names = {d.name for d in params}
    var_names = {v.name for v in variables}
    constraints = []
    for rc in raw_constraints:
        c = _resolve_constraint(p, rc, param_names, var_names)
        if c is not None:
            constraints.append(c)
    objective = None
    if objective_raw is not None:
        sense, terms = objective_raw
        resolved = _resolve_expr(p, terms, param_names, var_names)
        if resolved is not None:
            var_terms, const = resolved
            if const != (Fraction(0), []):
                # constants in the objective shift the value; keep the grammar strict
                p.error(terms[0].span, "objective must be a sum of variable terms", KIND_RESOLVE)
            else:
                objective = Objective(sense, tuple(var_terms))

    if p.errors:
        return _sorted_errors(p.errors)

    model = Model(model_name, tuple(params), tuple(variables), tuple(constraints), objective)
    leftovers = validate(model)
    if leftovers:
        for v in leftovers:
            kind = KIND_DUPLICATE if v.kind == "duplicate-name" else KIND_RESOLVE
            p.error(declared_spans.get(v.element, SourceSpan(1, 1, 1)), v.message, kind)
        return _sorted_errors(p.errors)
    return model


def _parse_param(p: _Parser, declare, params: list):
    t = p.peek()
    if t.kind != "name":
        p.error(t.span, "expected a parameter name")
        return
    p.take()
    ok = declare(t.text, t.span)
    if p.expect_op("=") is None:
        return
    value = p.parse_number()
    if value is None:
        return
    mutable = False
    description = None
    if p.peek().kind == "name" and p.peek().text == "mutable":
        p.take()
        mutable = True
    if p.peek().kind == "string":
        description = p.take().text[1:-1]
    if p.expect_op(";") is None:
        return
    if ok:
        params.append(ParamDef(t.text, value, mutable, description))


def _parse_var(p: _Parser, declare, variables: list):
    t = p.peek()
    if t.kind != "name":
        p.error(t.span, "expected a variable name")
        return
    p.take()
    ok = declare(t.text, t.span)
    kind = CONTINUOUS
    lower = upper = None
    if p.peek().kind == "name" and p.peek().text == "integer":
        p.take()
        kind = INTEGER
    while p.peek().kind == "op" and p.peek().text in (">=", "<="):
        op = p.take().text
        bound = p.parse_number()
        if bound is None:
            return
        if op == ">=":
            lower = bound
        else:
            upper = bound
    if p.expect_op(";") is None:
        return
    if ok:
        variables.append(VarDef(t.text, kind, lower, upper))


def _parse_constraint(p: _Parser, declare, out: list):
    t = p.peek()
    if t.kind != "name":
        p.error(t.span, "expected a constraint name after 's.t.'")
        return
    p.take()
    ok = declare(t.text, t.span)
    if p.expect_op(":") is None:
        return
    lhs = p.parse_raw_expr()
    if lhs is None:
        return
    sense_tok = p.peek()
    if not (sense_tok.kind == "op" and sense_tok.text in ("<=", ">=", "=")):
        p.error(sense_tok.span, f"expected <=, >= or =, found {sense_tok.text or 'end of input'!r}")
        return
    p.take()
    rhs = p.parse_raw_expr()
    if rhs is None:
        return
    description = None
    if p.peek().kind == "string":
        description = p.take().text[1:-1]
    if p.expect_op(";") is None:
        return
    if ok:
        out.append(_RawConstraint(t.text, t.span, lhs, sense_tok.text, rhs, description))


def _resolve_expr(p: _Parser, terms, param_names, var_names):
    """Split raw terms into variable terms and a constant side.

    Returns (var_terms, (literal_sum, [(scale, param)])) or None on error.
    """
    var_terms: dict = {}
    order: list = []
    lit_sum = Fraction(0)
    param_parts: list = []
    ok = True
    for term in terms:
        names = term.names
        num = term.num if term.num is not None else Fraction(1)
        factor = term.sign * num
        kinds = []
        for name, span in names:
            if name in var_names:
                kinds.append("var")
            elif name in param_names:
                kinds.append("param")
            else:
                p.error(span, f"unknown name {name!r}", KIND_RESOLVE)
                ok = False
                kinds.append("?")
        if not ok:
            continue
        if len(names) == 0:
            lit_sum += factor
        elif len(names) == 1:
            name = names[0][0]
            if kinds[0] == "var":
                coeff = Coefficient.lit(factor)
                _merge_term(p, var_terms, order, name, coeff, names[0][1])
            else:
                param_parts.append((factor, name))
        else:  # two names: parameter * variable
            if kinds == ["param", "var"]:
                pname, vname = names[0][0], names[1][0]
            elif kinds == ["var", "param"]:
                vname, pname = names[0][0], names[1][0]
            else:
                p.error(names[0][1],
                        "a product term must pair one parameter with one variable", KIND_RESOLVE)
                ok = False
                continue
            coeff = Coefficient.of_param(pname, factor)
            _merge_term(p, var_terms, order, vname, coeff, names[0][1])
    if not ok:
        return None
    return [(name, var_terms[name]) for name in order], (lit_sum, param_parts)


def _merge_term(p: _Parser, var_terms: dict, order: list, name: str,
                coeff: Coefficient, span: SourceSpan):
    if name not in var_terms:
        var_terms[name] = coeff
        order.append(name)
        return
    old = var_terms[name]
    if old.is_literal and coeff.is_literal:
        var_terms[name] = Coefficient.lit(old.scale + coeff.scale)
    elif old.param is not None and old.param == coeff.param:
        var_terms[name] = Coefficient(old.scale + coeff.scale, old.param)
    else:
        p.error(span, f"cannot combine coefficients on {name!r} "
                      "(mixing a number with a parameter)", KIND_RESOLVE)


def _resolve_constraint(p: _Parser, rc: _RawConstraint, param_names, var_names):
    left = _resolve_expr(p, rc.lhs, param_names, var_names)
    right = _resolve_expr(p, rc.rhs, param_names, var_names)
    if left is None or right is None:
        return None
    lvars, (llit, lparams) = left
    rvars, (rlit, rparams) = right

    merged: dict = {}
    order: list = []
    for name, coeff in lvars:
        _merge_term(p, merged, order, name, coeff, rc.name_span)
    for name, coeff in rvars:
        _merge_term(p, merged, order, name, coeff.negated(), rc.name_span)
    terms = tuple((name, merged[name]) for name in order if merged[name].scale != 0
                  or merged[name].param is not None)

    # constant side: rhs - lhs constants
    lit = rlit - llit
    parts = [(s, name) for s, name in rparams] + [(-s, name) for s, name in lparams]
    parts = [(s, name) for s, name in parts if s != 0]
    if not parts:
        rhs = Coefficient.lit(lit)
    elif len(parts) == 1 and lit == 0:
        rhs = Coefficient.of_param(parts[0][1], parts[0][0])
    else:
        p.error(rc.name_span,
                f"constraint {rc.name!r}: right-hand side must reduce to a single "
                "number or parameter term", KIND_RESOLVE)
        return None
    return Constraint(rc.name, terms, rc.sense, rhs, rc.description)


def _sorted_errors(errors: list) -> list:
    return sorted(errors, key=lambda e: (e.span.line, e.span.column))


# ---------------------------------------------------------------------------
# structured (JSON) parser

def parse_structured(document: str) -> Union[Model, list]:
    """Parse the structured JSON form; numbers are strings ("1/3" stays 1/3)."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        return [ParseError(SourceSpan(e.lineno, e.colno, 1), KIND_SYNTAX, e.msg)]

    errors: list[ParseError] = []
    here = SourceSpan(1, 1, 1)

    def err(message, kind=KIND_RESOLVE):
        errors.append(ParseError(here, kind, message))

    if not isinstance(doc, dict):
        return [ParseError(here, KIND_RESOLVE, "top level must be an object")]

    for key in ("params", "vars", "constraints"):
        if key not in doc:
            err(f"missing required key {key!r}")
        elif not isinstance(doc[key], list):
            err(f"key {key!r} must be a list")
    if errors:
        return errors

    name = doc.get("name", "model")
    if not isinstance(name, str):
        err("'name' must be a string")
        name = "model"

    def number(value, where):
        try:
            return parse_rational(value)
        except (ValueError, ZeroDivisionError, TypeError):
            err(f"{where}: not an exact rational: {value!r}")
            return Fraction(0)

    def coefficient(value, where) -> Coefficient:
        if isinstance(value, (str, int)):
            return Coefficient.lit(number(value, where))
        if isinstance(value, dict) and "param" in value:
            scale = number(value.get("scale", "1"), where)
            return Coefficient(scale, str(value["param"]))
        err(f"{where}: expected a number string or {{'param': ...}} object")
        return Coefficient.lit(0)

    params = []
    for i, item in enumerate(doc["params"]):
        where = f"params[{i}]"
        if not isinstance(item, dict) or "name" not in item or "value" not in item:
            err(f"{where}: needs 'name' and 'value'")
            continue
        params.append(ParamDef(str(item["name"]), number(item["value"], where),
                               bool(item.get("mutable", False)),
                               item.get("description")))

    variables = []
    for i, item in enumerate(doc["vars"]):
        where = f"vars[{i}]"
        if not isinstance(item, dict) or "name" not in item:
            err(f"{where}: needs 'name'")
            continue
        kind = item.get("kind", CONTINUOUS)
        if kind not in (CONTINUOUS, INTEGER):
            err(f"{where}: unknown kind {kind!r}")
            kind = CONTINUOUS
        lower = number(item["lower"], where) if "lower" in item and item["lower"] is not None else None
        upper = number(item["upper"], where) if "upper" in item and item["upper"] is not None else None
        variables.append(VarDef(str(item["name"]), kind, lower, upper))

    def term_list(raw, where):
        terms = []
        if not isinstance(raw, list):
            err(f"{where}: 'terms' must be a list")
            return ()
        for k, entry in enumerate(raw):
            if not (isinstance(entry, list) and len(entry) == 2):
                err(f"{where}: terms[{k}] must be [var, coefficient]")
                continue
            terms.append((str(entry[0]), coefficient(entry[1], f"{where}.terms[{k}]")))
        return tuple(terms)

    constraints = []
    for i, item in enumerate(doc["constraints"]):
        where = f"constraints[{i}]"
        if not isinstance(item, dict) or "name" not in item or "terms" not in item:
            err(f"{where}: needs 'name' and 'terms'")
            continue
        sense = item.get("sense", SENSE_LE)
        if sense not in (SENSE_LE, SENSE_GE, SENSE_EQ):
            err(f"{where}: unknown sense {sense!r}")
            sense = SENSE_LE
        constraints.append(Constraint(
            str(item["name"]),
            term_list(item["terms"], where),
            sense,
            coefficient(item.get("rhs", "0"), f"{where}.rhs"),
            item.get("description"),
        ))

    objective = None
    raw_obj = doc.get("objective")
    if raw_obj is not None:
        if not isinstance(raw_obj, dict) or raw_obj.get("sense") not in ("min", "max"):
            err("objective needs sense 'min' or 'max'")
        else:
            objective = Objective(raw_obj["sense"], term_list(raw_obj.get("terms", []), "objective"))

    if errors:
        return _sorted_errors(errors)

    model = Model(name, tuple(params), tuple(variables), tuple(constraints), objective)
    leftovers = validate(model)
    if leftovers:
        for v in leftovers:
            kind = KIND_DUPLICATE if v.kind == "duplicate-name" else KIND_RESOLVE
            err_kind = kind
            errors.append(ParseError(here, err_kind, v.message))
        return _sorted_errors(errors)
    return model


def parse(source: str, format: str) -> Union[Model, list]:
    if format == FORMAT_TEXT:
        return parse_text(source)
    if format == FORMAT_STRUCTURED:
        return parse_structured(source)
    raise ValueError(f"unknown format {format!r}")


# ---------------------------------------------------------------------------
# serializer

def serialize(model: Model, format: str = FORMAT_TEXT) -> str:
    """Canonical text for a valid model; output re-parses to an equal Model."""
    violations = validate(model)
    if violations:
        raise InvalidModel(violations)
    if format == FORMAT_TEXT:
        return _serialize_text(model)
    if format == FORMAT_STRUCTURED:
        return _serialize_structured(model)
    raise ValueError(f"unknown format {format!r}")


def render_expr(terms) -> str:
    """Human/parser form of a term list: ``2*x + cost*y - z``."""
    if not terms:
        return "0"
    parts: list[str] = []
    for i, (var, coeff) in enumerate(terms):
        scale, param = coeff.scale, coeff.param
        negative = scale < 0
        mag = -scale if negative else scale
        if param is None:
            body = var if mag == 1 else f"{format_rational(mag)}*{var}"
        else:
            body = f"{param}*{var}" if mag == 1 else f"{format_rational(mag)}*{param}*{var}"
        if i == 0:
            parts.append(f"-{body}" if negative else body)
        else:
            parts.append(f"- {body}" if negative else f"+ {body}")
    return " ".join(parts)


def render_rhs(coeff: Coefficient) -> str:
    if coeff.param is None:
        return format_rational(coeff.scale)
    if coeff.scale == 1:
        return coeff.param
    if coeff.scale == -1:
        return f"-{coeff.param}"
    return f"{format_rational(coeff.scale)}*{coeff.param}"


def render_constraint(c: Constraint) -> str:
    return f"{render_expr(c.terms)} {c.sense} {render_rhs(c.rhs)}"


def _serialize_text(model: Model) -> str:
    lines = [f"model {model.name};", ""]
    for p in model.params:
        bits = [f"param {p.name} = {format_rational(p.value)}"]
        if p.mutable:
            bits.append("mutable")
        if p.description is not None:
            bits.append(f'"{p.description}"')
        lines.append(" ".join(bits) + ";")
    for v in model.vars:
        bits = [f"var {v.name}"]
        if v.kind == INTEGER:
            bits.append("integer")
        if v.lower is not None:
            bits.append(f">= {format_rational(v.lower)}")
        if v.upper is not None:
            bits.append(f"<= {format_rational(v.upper)}")
        lines.append(" ".join(bits) + ";")
    if model.params or model.vars:
        lines.append("")
    for c in model.constraints:
        desc = f' "{c.description}"' if c.description is not None else ""
        lines.append(f"s.t. {c.name}: {render_constraint(c)}{desc};")
    if model.objective is not None:
        lines.append("")
        lines.append(f"{model.objective.sense}: {render_expr(model.objective.terms)};")
    return "\n".join(lines) + "\n"


def _coeff_json(coeff: Coefficient):
    if coeff.param is None:
        return format_rational(coeff.scale)
    if coeff.scale == 1:
        return {"param": coeff.param}
    return {"param": coeff.param, "scale": format_rational(coeff.scale)}


def _serialize_structured(model: Model) -> str:
    doc = {
        "name": model.name,
        "params": [
            {k: v for k, v in (
                ("name", p.name),
                ("value", format_rational(p.value)),
                ("mutable", p.mutable),
                ("description", p.description),
            ) if not (k == "description" and v is None)}
            for p in model.params
        ],
        "vars": [
            {k: v for k, v in (
                ("name", var.name),
                ("kind", var.kind),
                ("lower", format_rational(var.lower) if var.lower is not None else None),
                ("upper", format_rational(var.upper) if var.upper is not None else None),
            ) if v is not None}
            for var in model.vars
        ],
        "constraints": [
            {k: v for k, v in (
                ("name", c.name),
                ("terms", [[var, _coeff_json(coeff)] for var, coeff in c.terms]),
                ("sense", c.sense),
                ("rhs", _coeff_json(c.rhs)),
                ("description", c.description),
            ) if not (k == "description" and v is None)}
            for c in model.constraints
        ],
        "objective": None if model.objective is None else {
            "sense": model.objective.sense,
            "terms": [[var, _coeff_json(coeff)] for var, coeff in model.objective.terms],
        },
    }
    return json.dumps(doc, indent=2) + "\n"
