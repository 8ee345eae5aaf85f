"""
Pareto ranks, hypervolume and the MO-CMA-ES loop
================================================
"""

# %%
import numpy as np

from lbp_discovery import mocmaes as mo

front = [(1, 3), (2, 2), (3, 1)]
print("ranks:", mo.pareto_rank(front + [(3, 3)]))
print("hypervolume:", mo.hypervolume_2d(front, (4, 4)))
print("contribution of (2, 2):", mo.contributing_hypervolume((2, 2), front, (4, 4)))

# %%
# Minimise the two squared distances to 0 and to e1 in five dimensions.
# The Pareto set is the segment between the two centres.
e1 = np.eye(5)[0]


def objectives(xs):
    return [(float(x @ x), float((x - e1) @ (x - e1))) for x in xs]


rng = np.random.default_rng(0)
x0 = [rng.uniform(-0.5, 0.5, 5) for _ in range(10)]
pop = mo.optimize(objectives, x0, 0.1, 50, rng)
print("final hypervolume:", mo.hypervolume_2d(pop.objectives(), (2, 2)), "of", 4 - 1 / 6)

# %%
# Categorical search spaces are reached through the unit cube.
space = [[64, 128, 256], ["Adam", "RMSprop", "Adadelta"]]
print(mo.encode_categorical(space, [0.1, 0.9]))
