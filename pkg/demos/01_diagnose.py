"""Walk through infeasibility diagnosis on a tiny staffing model.

Run:  python3 demos/01_diagnose.py
"""

from modelmend import (
    Feasible,
    check_feasible,
    additive_method,
    deletion_filter,
    enumerate_iis_lp,
    normalize,
    oracle_iis_all,
    parse_text,
)

SOURCE = """
model staffing;

param floor_x = 1 "minimum level of x";
param floor_y = 1 "minimum level of y";
param budget = 1 mutable "shared budget for x and y";
var x;
var y;

s.t. need_x: x >= floor_x;
s.t. need_y: y >= floor_y;
s.t. budget_cap: x + y <= budget;
"""

model = parse_text(SOURCE)
system = normalize(model)

print("=" * 60)
print("1. the model in canonical <=-row form")
print("=" * 60)
for i, row in enumerate(system.rows):
    terms = " + ".join(f"{c}*{v}" for c, v in zip(row.coeffs, system.var_names) if c)
    print(f"  row {i} [{row.member_id}]: {terms} <= {row.rhs}")

print()
print("=" * 60)
print("2. feasibility check with a certificate of impossibility")
print("=" * 60)
verdict = check_feasible(system)
print("feasible?", isinstance(verdict, Feasible))
print("dual multipliers y (y*A = 0, y*b = -1):", dict(verdict.certificate.y))

print()
print("=" * 60)
print("3. the same conflict through all three isolation routes")
print("=" * 60)
for result in (deletion_filter(system), additive_method(system)):
    print(f"  {result.method:11s} -> {sorted(result.members)} "
          f"({result.solver_calls} solver calls)")
for result in sorted(enumerate_iis_lp(system), key=lambda r: sorted(r.rows)):
    print(f"  {result.method:11s} -> {sorted(result.members)}")

print()
print("=" * 60)
print("4. ground truth by brute-force subset enumeration")
print("=" * 60)
for rows in oracle_iis_all(system):
    print("  minimal infeasible row set:", sorted(rows),
          "->", sorted(system.member_ids(rows)))

print()
print("every pair of the three constraints is satisfiable; only the triple")
print("conflicts, so the conflict set is all three members.")
