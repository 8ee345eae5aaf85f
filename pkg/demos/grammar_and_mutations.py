"""
Equation structures and their mutations
=======================================

A structure is an LBP threshold template whose operators are the
placeholder ``o``.  A mutation assigns one of ``+ - * /`` to every binary
placeholder, or ``+ -`` to a unary one.
"""

# %%
# Parse a structure; the canonical text has single spaces around operators.
from lbp_discovery.expr import (
    apply_operators,
    enumerate_mutations,
    evaluate,
    mutation_count,
    parse_equation,
    parse_structure,
)

s = parse_structure("((Z o C) o (Z o C) o (Z o C)) o ((o C) o (Z o C)) o a")
print(s.text)
print("placeholders:", s.placeholder_count, "unary slots:", s.unary_slots)
print("mutations:", mutation_count(s))

# %%
# Mutations come in mixed-radix order: the last placeholder varies fastest.
small = parse_structure("(Z o C) o a")
for eq in enumerate_mutations(small, cap=6):
    print(eq.text)

# %%
# A concrete operator vector gives one equation.
print(apply_operators(small, [1, 0]).text)

# %%
# Equations evaluate on scalars or arrays; division by zero yields inf/nan,
# which the thresholding step treats as a zero bit.
import numpy as np

eq = parse_equation("(Z - C) / (a - C) * (Z / C) / (Z + C) + a")
Z = np.array([0.2, 0.5, 0.8])
print(evaluate(eq, Z, 0.5, 0.01))
