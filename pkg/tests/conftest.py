"""Shared fixtures: bundled models and small construction helpers."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from modelmend.model import (
    Coefficient,
    Constraint,
    Model,
    Objective,
    ParamDef,
    VarDef,
)
from modelmend.modelfile import parse_text

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str) -> Model:
    model = parse_text((FIXTURES / name).read_text())
    assert isinstance(model, Model), f"fixture {name} failed to parse: {model}"
    return model


def fixture_source(name: str) -> str:
    return (FIXTURES / name).read_text()


# --- terse builders -------------------------------------------------------

def P(name, value, mutable=False, description=None):
    return ParamDef(name, Fraction(value), mutable, description)


def V(name, kind="continuous", lower=None, upper=None):
    return VarDef(name, kind,
                  None if lower is None else Fraction(lower),
                  None if upper is None else Fraction(upper))


def lit(x):
    return Coefficient.lit(Fraction(x))


def pref(name, scale=1):
    return Coefficient.of_param(name, Fraction(scale))


def C(name, terms, sense, rhs, description=None):
    cooked = tuple((v, c if isinstance(c, Coefficient) else lit(c)) for v, c in terms)
    rhs_c = rhs if isinstance(rhs, Coefficient) else lit(rhs)
    return Constraint(name, cooked, sense, rhs_c, description)


def M(name="m", params=(), variables=(), constraints=(), objective=None):
    return Model(name, tuple(params), tuple(variables), tuple(constraints), objective)


@pytest.fixture
def two_row_model():
    """x >= dmin(=1), x <= cap(=0): the canonical two-row conflict."""
    return load_fixture("two_row.om")


@pytest.fixture
def fig2_model():
    """x >= 1, y >= 1, x + y <= 1: every pair feasible, the triple not."""
    return load_fixture("fig2.om")


@pytest.fixture
def training_model():
    return load_fixture("training.om")


@pytest.fixture
def feasible_model():
    return load_fixture("feasible.om")


@pytest.fixture
def knapsack_model():
    return load_fixture("knapsack.om")
