"""Minimal-slack repair: support sets, entry vs tied mode, write-back.

Run:  python3 demos/02_repair.py
"""

from modelmend import (
    Feasible,
    RepairSpec,
    apply_repair,
    check_feasible,
    derive_support,
    explain_deltas,
    normalize,
    parse_text,
    solve_repair,
)

SOURCE = """
model two_row;

param dmin = 1 mutable "minimum demand to serve";
param cap = 0 mutable "production capacity";
var x;

s.t. demand: x >= dmin;
s.t. cap_limit: x <= cap;
"""

model = parse_text(SOURCE)

print("=" * 60)
print("1. which entries can receive slack?")
print("=" * 60)
spec = RepairSpec(frozenset({"dmin", "cap"}))
matrix_side, rhs_side = derive_support(model, spec)
print("matrix-side entries:", sorted(matrix_side), "(empty keeps the repair linear)")
print("rhs-side rows:      ", sorted(rhs_side))

print()
print("=" * 60)
print("2. entry mode: one independent slack per selected row")
print("=" * 60)
plan = solve_repair(model, RepairSpec(frozenset({"dmin", "cap"}), "entry"))
print("status:", plan.status, "| minimal total slack:", plan.total)
print("per-row slacks:", {row: str(v) for row, v in plan.entry_slacks.items()})
for rec in explain_deltas(model, plan):
    print("  suggests:", rec.phrase)

print()
print("=" * 60)
print("3. tied mode: one signed move per parameter, ready to apply")
print("=" * 60)
plan = solve_repair(model, RepairSpec(frozenset({"dmin"})))
print("status:", plan.status, "| total:", plan.total,
      "| deltas:", {k: str(v) for k, v in plan.param_deltas.items()})
repaired = apply_repair(model, plan)
print("after apply, dmin =", repaired.param_values()["dmin"])
print("repaired model feasible?",
      isinstance(check_feasible(normalize(repaired)), Feasible))

print()
print("=" * 60)
print("4. matrix-side parameters are refused, not mangled")
print("=" * 60)
lhs_model = parse_text(
    "param w = 2; var x; s.t. draw: w*x <= 5; s.t. need: x >= 10;")
try:
    solve_repair(lhs_model, RepairSpec(frozenset({"w"})))
except Exception as e:
    print("refused:", e)
