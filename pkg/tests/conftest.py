import numpy as np
import pytest

from lbp_discovery.bgs import BgsParams
from lbp_discovery.lbp import LbpConfig
from lbp_discovery.synthetic import moving_square

# (scene, structure, best equation) as published, spacing untouched
BEST_EQUATIONS = [
    ("peopleInShade", "(Z o C) o (a o C) o (Z o C) o (Z o C) o a", "(Z - C) / (a - C) * (Z / C) / (Z + C) + a"),
    ("snowFall", "(Z o (Z o C) o (Z o C) o (Z o C) o (Z o C) o (Z o C)) o a", "(Z +( Z / C) * (Z + C) + (Z / C) - (Z - C) * (Z - C)) + a"),
    ("canoe", "(Z o C) o (Z o C) o (Z o C) o (Z o C) o  (Z o C) o (Z o C o C) o a", "(Z - C) + (Z + C) * (Z + C) + (Z + C) / (Z / C) - (Z + C + C) / a"),
    ("busStation", "(Z o C) o (Z o C) o (Z o C) o (Z o C) o (Z o C) o a", "(Z - C) + (Z + C) + (Z - C) - (Z / C) - (Z * C) * a"),
    ("skating", "Z o C o ((Z o C) o (Z o C) o (Z o C)) o a", "Z / C/ ((Z / C) - (Z + C) +(Z / C)) + a"),
    ("fall", "((Z o C) o (Z o C) o (Z o C)) o ((o C) o (Z o C)) o a", "((Z / C) * (Z / C) / (Z + C)) / ((-C) / (Z + C)) +  a"),
]

# (scene, method, precision, recall, F-score)
SCORE_TABLE = [
    ("peopleInShade", "texture", 0.7339, 0.9009, 0.8088),
    ("peopleInShade", "proposed", 0.8211, 0.8988, 0.8582),
    ("snowFall", "texture", 0.5970, 0.9384, 0.7298),
    ("snowFall", "proposed", 0.8673, 0.91638, 0.8911),
    ("canoe", "texture", 0.1106, 0.8183, 0.1949),
    ("canoe", "proposed", 0.8710, 0.5535, 0.6769),
    ("busStation", "texture", 0.2747, 0.9695, 0.4282),
    ("busStation", "proposed", 0.8792, 0.8859, 0.8825),
    ("skating", "texture", 0.2666, 0.9161, 0.4130),
    ("skating", "proposed", 0.9213, 0.8520, 0.8853),
    ("fall", "texture", 0.5453, 0.7904, 0.6453),
    ("fall", "proposed", 0.4625, 0.8190, 0.5912),
]

# window/threshold preset for the 60x80 synthetic clips
SYNTH_LBP = LbpConfig(region_radius=2)
SYNTH_BGS = BgsParams(T_P=0.5)


@pytest.fixture(scope="session")
def square_clip():
    return moving_square()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
