"""modelmend: diagnose and repair infeasible linear and mixed-integer models."""

from .model import (
    Coefficient,
    Constraint,
    InvalidModel,
    KeyInventory,
    Model,
    NormalizedSystem,
    Objective,
    ParamDef,
    UnknownParam,
    VarDef,
    Violation,
    list_keys,
    normalize,
    raw_system,
    substitute_params,
    validate,
)
from .modelfile import ParseError, SourceSpan, parse, parse_structured, parse_text, serialize
from .simplex import (
    FarkasCertificate,
    Feasible,
    Infeasible,
    Optimal,
    Unbounded,
    check_feasible,
    solve_lp,
)
from .branch_bound import NodeBudgetExceeded, check_feasible_milp, solve_milp
from .iis import (
    IisResult,
    IntegerVariablesPresent,
    NotInfeasible,
    TooLarge,
    additive_method,
    deletion_filter,
    enumerate_iis_lp,
    oracle_iis_all,
)
from .repair import (
    NonlinearRepairUnsupported,
    NotApplicable,
    Recommendation,
    RepairPlan,
    RepairSpec,
    Unrepairable,
    apply_repair,
    derive_support,
    explain_deltas,
    solve_repair,
)

__version__ = "0.1.0"
