"""
LBP codes under different threshold equations
=============================================
"""

# %%
import numpy as np

from lbp_discovery.expr import BASELINE, parse_equation
from lbp_discovery.lbp import LbpConfig, intersection, lbp_code, region_histogram

cfg = LbpConfig()
print("neighbours:", cfg.P, "radius:", cfg.R, "offset a:", cfg.a)

# %%
# On a nearly flat patch the offset decides the bit: the neighbour is only
# 0.005 darker than the centre.
patch = np.full((3, 3), 0.495)
patch[1, 1] = 0.5
print("Z - C      ->", format(lbp_code(patch, 1, 1, parse_equation("Z - C"), cfg), "08b"))
print("Z - C + a  ->", format(lbp_code(patch, 1, 1, BASELINE, cfg), "08b"))

# %%
# Region histograms of two textures, compared by intersection.
rng = np.random.default_rng(1)
noise = rng.uniform(size=(40, 40))
stripes = np.tile(np.linspace(0, 1, 40), (40, 1))
h_noise = region_histogram(noise, 20, 20, BASELINE, cfg)
h_stripes = region_histogram(stripes, 20, 20, BASELINE, cfg)
print("self:", intersection(h_noise, h_noise))
print("cross:", intersection(h_noise, h_stripes))
