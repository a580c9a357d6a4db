"""Symbolic optimization models and their canonical inequality form.

A `Model` keeps parameters symbolic so every matrix/rhs entry of the lowered
system can be traced back to a named, possibly adjustable number.  `normalize`
lowers the model to rows of A·x <= b over exact rationals:

  * `a >= b` rows are negated,
  * equalities are split into a <= and a >= row,
  * finite variable bounds become rows of their own (so they can take part
    in infeasibility diagnosis like any constraint).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .rationals import format_rational

CONTINUOUS = "continuous"
INTEGER = "integer"

SENSE_LE = "<="
SENSE_GE = ">="
SENSE_EQ = "="

# Row halves: which face of the original item a normalized row represents.
HALF_LE = "le"        # the <=-side (plain <= constraints, <= half of =)
HALF_GE = "ge"        # the >=-side, stored negated
HALF_LOWER = "lower"  # finite lower bound of a variable
HALF_UPPER = "upper"  # finite upper bound of a variable


class InvalidModel(Exception):
    """Raised when an operation requires a model that passes `validate`."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        summary = "; ".join(v.message for v in self.violations) or "invalid model"
        super().__init__(summary)


class UnknownParam(Exception):
    """A referenced parameter name does not exist in the model."""


@dataclass(frozen=True)
class Coefficient:
    """A single matrix or rhs entry: `scale` or `scale * value(param)`.

    Plain numbers have ``param is None``.  A bare parameter reference is
    ``scale == 1``; anything else is a scaled parameter.
    """

    scale: Fraction
    param: Optional[str] = None

    @staticmethod
    def lit(value) -> "Coefficient":
        return Coefficient(Fraction(value), None)

    @staticmethod
    def of_param(name: str, scale=1) -> "Coefficient":
        return Coefficient(Fraction(scale), name)

    @property
    def is_literal(self) -> bool:
        return self.param is None

    def negated(self) -> "Coefficient":
        return Coefficient(-self.scale, self.param)

    def evaluate(self, param_values: Mapping[str, Fraction]) -> Fraction:
        if self.param is None:
            return self.scale
        return self.scale * param_values[self.param]

    def __repr__(self) -> str:  # compact, for debugging and error text
        if self.param is None:
            return format_rational(self.scale)
        if self.scale == 1:
            return self.param
        return f"{format_rational(self.scale)}*{self.param}"


@dataclass(frozen=True)
class ParamDef:
    name: str
    value: Fraction
    mutable: bool = False
    description: Optional[str] = None


@dataclass(frozen=True)
class VarDef:
    name: str
    kind: str = CONTINUOUS
    lower: Optional[Fraction] = None  # None means -inf
    upper: Optional[Fraction] = None  # None means +inf


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple  # tuple[(var name, Coefficient), ...]
    sense: str    # one of <=, >=, =
    rhs: Coefficient
    description: Optional[str] = None


@dataclass(frozen=True)
class Objective:
    sense: str    # "min" | "max"
    terms: tuple  # like Constraint.terms


@dataclass(frozen=True)
class Model:
    name: str
    params: tuple  # tuple[ParamDef, ...]
    vars: tuple    # tuple[VarDef, ...]
    constraints: tuple  # tuple[Constraint, ...]
    objective: Optional[Objective] = None

    def param_map(self) -> dict:
        return {p.name: p for p in self.params}

    def param_values(self) -> dict:
        return {p.name: p.value for p in self.params}

    def var_index(self) -> dict:
        return {v.name: i for i, v in enumerate(self.vars)}

    def constraint(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def with_param_values(self, updates: Mapping[str, Fraction]) -> "Model":
        """A copy of the model with some parameter values replaced."""
        missing = [n for n in updates if n not in self.param_values()]
        if missing:
            raise UnknownParam(", ".join(sorted(missing)))
        new_params = tuple(
            dataclasses.replace(p, value=Fraction(updates[p.name])) if p.name in updates else p
            for p in self.params
        )
        return dataclasses.replace(self, params=new_params)


@dataclass(frozen=True)
class Violation:
    """One broken model invariant; data, not an exception."""

    kind: str     # duplicate-name | unresolved-ref | bad-bounds | duplicate-term | no-variables
    element: str
    message: str


def validate(model: Model) -> list:
    """Check every structural invariant; empty list means well-formed."""
    violations: list[Violation] = []
    seen: set[str] = set()
    for name in (
        [p.name for p in model.params]
        + [v.name for v in model.vars]
        + [c.name for c in model.constraints]
    ):
        if name in seen:
            violations.append(Violation("duplicate-name", name, f"name {name!r} declared more than once"))
        seen.add(name)

    if not model.vars:
        violations.append(Violation("no-variables", model.name, "model declares no variables"))

    param_names = {p.name for p in model.params}
    var_names = {v.name for v in model.vars}

    for v in model.vars:
        if v.kind not in (CONTINUOUS, INTEGER):
            violations.append(Violation("unresolved-ref", v.name, f"unknown variable kind {v.kind!r}"))
        if v.lower is not None and v.upper is not None and v.lower > v.upper:
            violations.append(
                Violation("bad-bounds", v.name,
                          f"variable {v.name!r} has lower bound above its upper bound")
            )

    def check_coeff(c: Coefficient, where: str):
        if c.param is not None and c.param not in param_names:
            violations.append(Violation("unresolved-ref", c.param,
                                        f"{where} references unknown parameter {c.param!r}"))

    for c in model.constraints:
        seen_vars: set[str] = set()
        for var, coeff in c.terms:
            if var not in var_names:
                violations.append(Violation("unresolved-ref", var,
                                            f"constraint {c.name!r} references unknown variable {var!r}"))
            if var in seen_vars:
                violations.append(Violation("duplicate-term", var,
                                            f"constraint {c.name!r} lists variable {var!r} twice"))
            seen_vars.add(var)
            check_coeff(coeff, f"constraint {c.name!r}")
        check_coeff(c.rhs, f"constraint {c.name!r} rhs")
        if c.sense not in (SENSE_LE, SENSE_GE, SENSE_EQ):
            violations.append(Violation("unresolved-ref", c.name,
                                        f"constraint {c.name!r} has unknown sense {c.sense!r}"))

    if model.objective is not None:
        for var, coeff in model.objective.terms:
            if var not in var_names:
                violations.append(Violation("unresolved-ref", var,
                                            f"objective references unknown variable {var!r}"))
            check_coeff(coeff, "objective")

    return violations


@dataclass(frozen=True)
class NormRow:
    """One row a·x <= rhs with full provenance back to the model."""

    coeffs: tuple          # dense tuple[Fraction, ...] over system variables
    rhs: Fraction
    source: str            # constraint name, or variable name for bound rows
    half: str              # HALF_LE | HALF_GE | HALF_LOWER | HALF_UPPER
    coeff_prov: tuple      # tuple[Coefficient | None, ...], None where coeff == 0
    rhs_prov: Coefficient

    @property
    def member_id(self) -> str:
        """User-facing identifier this row belongs to.

        Both halves of an equality share the constraint name, so an IIS
        containing either half reports the equality once.
        """
        if self.half in (HALF_LOWER, HALF_UPPER):
            return f"{self.source}.{self.half}"
        return self.source

    @property
    def is_bound(self) -> bool:
        return self.half in (HALF_LOWER, HALF_UPPER)


@dataclass(frozen=True)
class NormalizedSystem:
    """The model lowered to A·x <= b over exact rationals."""

    var_names: tuple       # tuple[str, ...]
    integer_mask: tuple    # tuple[bool, ...], aligned with var_names
    rows: tuple            # tuple[NormRow, ...]

    @property
    def n(self) -> int:
        return len(self.var_names)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def has_integers(self) -> bool:
        return any(self.integer_mask)

    def matrix(self) -> list:
        return [list(r.coeffs) for r in self.rows]

    def rhs(self) -> list:
        return [r.rhs for r in self.rows]

    def member_ids(self, row_indices: Iterable[int]) -> frozenset:
        return frozenset(self.rows[i].member_id for i in row_indices)

    def rows_of_member(self, member_id: str) -> list:
        return [i for i, r in enumerate(self.rows) if r.member_id == member_id]

    def point_satisfies(self, point: Mapping[str, Fraction], row_indices=None) -> bool:
        """Exact substitution check of a named point against (a subset of) rows."""
        idx = range(self.m) if row_indices is None else row_indices
        values = [Fraction(point.get(name, 0)) for name in self.var_names]
        for i in idx:
            row = self.rows[i]
            lhs = sum(c * v for c, v in zip(row.coeffs, values))
            if lhs > row.rhs:
                return False
        return True


def _lower_terms(terms, var_pos, nvars, negate: bool, values):
    coeffs = [Fraction(0)] * nvars
    prov: list = [None] * nvars
    for var, coeff in terms:
        c = coeff.negated() if negate else coeff
        j = var_pos[var]
        coeffs[j] = c.evaluate(values)
        prov[j] = c
    return tuple(coeffs), tuple(prov)


def normalize(model: Model) -> NormalizedSystem:
    """Lower a valid model to its canonical <=-row system.

    Row order: constraints in declaration order (equalities contribute their
    <= half first), then finite variable bounds in declaration order (lower
    before upper).  Infinite bounds produce no row.
    """
    violations = validate(model)
    if violations:
        raise InvalidModel(violations)

    values = model.param_values()
    var_pos = model.var_index()
    nvars = len(model.vars)
    rows: list[NormRow] = []

    for c in model.constraints:
        if c.sense in (SENSE_LE, SENSE_EQ):
            coeffs, prov = _lower_terms(c.terms, var_pos, nvars, negate=False, values=values)
            rows.append(NormRow(coeffs, c.rhs.evaluate(values), c.name, HALF_LE, prov, c.rhs))
        if c.sense in (SENSE_GE, SENSE_EQ):
            coeffs, prov = _lower_terms(c.terms, var_pos, nvars, negate=True, values=values)
            neg_rhs = c.rhs.negated()
            rows.append(NormRow(coeffs, neg_rhs.evaluate(values), c.name, HALF_GE, prov, neg_rhs))

    for v in model.vars:
        j = var_pos[v.name]
        if v.lower is not None:
            coeffs = tuple(Fraction(-1) if k == j else Fraction(0) for k in range(nvars))
            prov = tuple(Coefficient.lit(-1) if k == j else None for k in range(nvars))
            rows.append(NormRow(coeffs, Fraction(-v.lower), v.name, HALF_LOWER,
                                prov, Coefficient.lit(-v.lower)))
        if v.upper is not None:
            coeffs = tuple(Fraction(1) if k == j else Fraction(0) for k in range(nvars))
            prov = tuple(Coefficient.lit(1) if k == j else None for k in range(nvars))
            rows.append(NormRow(coeffs, Fraction(v.upper), v.name, HALF_UPPER,
                                prov, Coefficient.lit(v.upper)))

    return NormalizedSystem(
        var_names=tuple(v.name for v in model.vars),
        integer_mask=tuple(v.kind == INTEGER for v in model.vars),
        rows=tuple(rows),
    )


def raw_system(matrix, rhs, integer_mask=None, var_names=None, sources=None) -> NormalizedSystem:
    """Build a NormalizedSystem straight from numbers (all-literal provenance).

    Convenience constructor for solver-level work and tests that do not need
    a symbolic model behind the rows.
    """
    m = len(matrix)
    n = len(matrix[0]) if m else (len(integer_mask) if integer_mask else 1)
    names = tuple(var_names) if var_names else tuple(f"x{j}" for j in range(n))
    mask = tuple(bool(b) for b in integer_mask) if integer_mask else (False,) * n
    srcs = list(sources) if sources else [f"r{i}" for i in range(m)]
    rows = []
    for i in range(m):
        coeffs = tuple(Fraction(c) for c in matrix[i])
        b = Fraction(rhs[i])
        prov = tuple(Coefficient.lit(c) if c != 0 else None for c in coeffs)
        rows.append(NormRow(coeffs, b, srcs[i], HALF_LE, prov, Coefficient.lit(b)))
    return NormalizedSystem(names, mask, tuple(rows))


def substitute_params(model: Model, overrides: Mapping[str, Fraction]) -> NormalizedSystem:
    """Normalize the model at overridden parameter values (what-if re-solve).

    The original model is untouched; unknown override names raise UnknownParam.
    """
    return normalize(model.with_param_values(dict(overrides)))


def param_sides(model: Model) -> dict:
    """Where each parameter lands after lowering: 'rhs', 'lhs', 'both' or 'unused'."""
    sides = {p.name: set() for p in model.params}
    for row in normalize(model).rows:
        for prov in row.coeff_prov:
            if prov is not None and prov.param is not None:
                sides[prov.param].add("lhs")
        if row.rhs_prov.param is not None:
            sides[row.rhs_prov.param].add("rhs")
    return {
        name: ("both" if s == {"lhs", "rhs"} else s.pop() if s else "unused")
        for name, s in sides.items()
    }


@dataclass(frozen=True)
class KeyEntry:
    name: str
    description: Optional[str] = None
    mutable: Optional[bool] = None
    kind: Optional[str] = None


@dataclass(frozen=True)
class KeyInventory:
    """The exact name sets embedded verbatim into agent prompts.

    Deliberately value-free: parameter values may change during a session,
    the keys never do.
    """

    params: tuple       # tuple[KeyEntry, ...] with description + mutable
    vars: tuple         # tuple[KeyEntry, ...] with kind
    constraints: tuple  # tuple[KeyEntry, ...] with description

    def all_names(self) -> list:
        return ([e.name for e in self.params]
                + [e.name for e in self.vars]
                + [e.name for e in self.constraints])

    def text_block(self) -> str:
        """Canonical rendering used wherever the keys are embedded in prompts."""
        lines = ["parameters:"]
        for e in self.params:
            flag = "mutable" if e.mutable else "fixed"
            desc = f" - {e.description}" if e.description else ""
            lines.append(f"  {e.name} ({flag}){desc}")
        lines.append("variables:")
        for e in self.vars:
            lines.append(f"  {e.name} ({e.kind})")
        lines.append("constraints:")
        for e in self.constraints:
            desc = f" - {e.description}" if e.description else ""
            lines.append(f"  {e.name}{desc}")
        return "\n".join(lines)


def list_keys(model: Model) -> KeyInventory:
    """Parameter / variable / constraint names with descriptions and mutability."""
    return KeyInventory(
        params=tuple(KeyEntry(p.name, description=p.description, mutable=p.mutable)
                     for p in model.params),
        vars=tuple(KeyEntry(v.name, kind=v.kind) for v in model.vars),
        constraints=tuple(KeyEntry(c.name, description=c.description)
                          for c in model.constraints),
    )
