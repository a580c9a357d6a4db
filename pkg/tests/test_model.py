"""Model types, validation, normalization and key inventory."""

from fractions import Fraction

import pytest

from conftest import C, M, P, V, lit, pref
from modelmend.model import (
    Coefficient,
    HALF_GE,
    HALF_LE,
    HALF_LOWER,
    HALF_UPPER,
    InvalidModel,
    UnknownParam,
    list_keys,
    normalize,
    substitute_params,
    validate,
)
from modelmend.simplex import Feasible, check_feasible


def test_validate_duplicate_param_name():
    m = M(params=[P("cap", 1), P("cap", 2)], variables=[V("x")])
    kinds = [(v.kind, v.element) for v in validate(m)]
    assert ("duplicate-name", "cap") in kinds


def test_validate_clean_fixture(knapsack_model):
    assert validate(knapsack_model) == []


def test_validate_unresolved_variable():
    m = M(variables=[V("x")], constraints=[C("c", [("z", 1)], "<=", 1)])
    violations = validate(m)
    assert any(v.kind == "unresolved-ref" and v.element == "z" for v in violations)


def test_validate_bounds_and_duplicate_terms():
    m = M(variables=[V("x", lower=3, upper=1)],
          constraints=[C("c", [("x", 1), ("x", 2)], "<=", 1)])
    kinds = {v.kind for v in validate(m)}
    assert {"bad-bounds", "duplicate-term"} <= kinds


def test_validate_requires_a_variable():
    m = M(params=[P("a", 1)])
    assert any(v.kind == "no-variables" for v in validate(m))


def test_normalize_flips_ge_with_provenance():
    m = M(params=[P("dmin", 1)], variables=[V("x")],
          constraints=[C("demand", [("x", 1)], ">=", pref("dmin"))])
    system = normalize(m)
    assert system.m == 1
    row = system.rows[0]
    assert row.coeffs == (Fraction(-1),)
    assert row.rhs == Fraction(-1)
    assert row.half == HALF_GE
    assert row.rhs_prov == Coefficient(Fraction(-1), "dmin")


def test_normalize_splits_equalities():
    m = M(variables=[V("x"), V("y")],
          constraints=[C("pair", [("x", 1), ("y", 1)], "=", 2)])
    system = normalize(m)
    assert system.m == 2
    le, ge = system.rows
    assert (le.half, ge.half) == (HALF_LE, HALF_GE)
    assert le.coeffs == (Fraction(1), Fraction(1)) and le.rhs == 2
    assert ge.coeffs == (Fraction(-1), Fraction(-1)) and ge.rhs == -2
    assert le.member_id == ge.member_id == "pair"


def test_normalize_lowers_finite_bounds():
    m = M(variables=[V("x", lower=0, upper=5)])
    system = normalize(m)
    assert [(r.half, r.coeffs[0], r.rhs) for r in system.rows] == [
        (HALF_LOWER, Fraction(-1), Fraction(0)),
        (HALF_UPPER, Fraction(1), Fraction(5)),
    ]
    assert system.rows[0].member_id == "x.lower"


def test_normalize_row_count_formula(training_model):
    m = training_model
    n_le = sum(1 for c in m.constraints if c.sense == "<=")
    n_ge = sum(1 for c in m.constraints if c.sense == ">=")
    n_eq = sum(1 for c in m.constraints if c.sense == "=")
    n_bounds = sum((v.lower is not None) + (v.upper is not None) for v in m.vars)
    assert normalize(m).m == n_le + n_ge + 2 * n_eq + n_bounds


def test_normalize_rejects_invalid():
    m = M(params=[P("a", 1), P("a", 2)], variables=[V("x")])
    with pytest.raises(InvalidModel):
        normalize(m)


def test_provenance_reproduces_entries(training_model, fig2_model, knapsack_model):
    for m in (training_model, fig2_model, knapsack_model):
        values = m.param_values()
        for row in normalize(m).rows:
            for coeff, prov in zip(row.coeffs, row.coeff_prov):
                if prov is None:
                    assert coeff == 0
                else:
                    assert prov.evaluate(values) == coeff
            assert row.rhs_prov.evaluate(values) == row.rhs


def test_substitute_boundary_coincidence():
    m = M(params=[P("dmin", 1)], variables=[V("x")],
          constraints=[C("demand", [("x", 1)], ">=", pref("dmin")),
                       C("cap", [("x", 1)], "<=", 0)])
    system = substitute_params(m, {"dmin": Fraction(0)})
    verdict = check_feasible(system)
    assert isinstance(verdict, Feasible)
    assert verdict.point["x"] == 0
    # original untouched
    assert m.param_values()["dmin"] == 1


def test_substitute_direct_values():
    m = M(params=[P("dmin", 1)], variables=[V("x")],
          constraints=[C("demand", [("x", 1)], ">=", pref("dmin")),
                       C("cap", [("x", 1)], "<=", 0)])
    system = substitute_params(m, {"dmin": Fraction(2)})
    assert system.rows[0].rhs == -2
    assert system.rows[1].rhs == 0


def test_substitute_unknown_param():
    m = M(params=[P("dmin", 1)], variables=[V("x")])
    with pytest.raises(UnknownParam):
        substitute_params(m, {"nosuch": Fraction(1)})


def test_substitute_empty_equals_normalize(training_model):
    a = normalize(training_model)
    b = substitute_params(training_model, {})
    assert a == b


def test_list_keys_reads_fixture(training_model):
    inv = list_keys(training_model)
    assert [e.name for e in inv.params] == ["staff_cap", "demand", "hours", "ratio"]
    assert [e.mutable for e in inv.params] == [True, False, False, False]
    assert [e.name for e in inv.vars] == ["operators", "mentors"]
    assert [e.name for e in inv.constraints] == [
        "headcount", "coverage", "mentoring", "shift_cap"]
    assert inv.params[0].description == "total staff headcount"


def test_list_keys_empty_constraints():
    inv = list_keys(M(variables=[V("x")]))
    assert inv.constraints == ()


def test_list_keys_value_independent(two_row_model):
    before = list_keys(two_row_model)
    after = list_keys(two_row_model.with_param_values({"dmin": Fraction(99)}))
    assert before == after
