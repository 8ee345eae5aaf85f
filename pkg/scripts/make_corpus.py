"""Regenerate the bundled structure corpus (src/lbp_discovery/data/corpus.txt).

The corpus holds the classic thresholding templates "Z o C" and "Z o C o a"
plus seeded random chains of 2 to 6 terms drawn from a fixed pool of atoms,
pairs, triples and unary terms.  The six reference structures used by the
test-suite are excluded so that discovery has unseen targets.
"""

import random
import sys
from pathlib import Path

from lbp_discovery.expr import parse_structure

SIZE = 305
HELD_OUT = [
    "(Z o C) o (a o C) o (Z o C) o (Z o C) o a",
    "(Z o (Z o C) o (Z o C) o (Z o C) o (Z o C) o (Z o C)) o a",
    "(Z o C) o (Z o C) o (Z o C) o (Z o C) o (Z o C) o (Z o C o C) o a",
    "(Z o C) o (Z o C) o (Z o C) o (Z o C) o (Z o C) o a",
    "Z o C o ((Z o C) o (Z o C) o (Z o C)) o a",
    "((Z o C) o (Z o C) o (Z o C)) o ((o C) o (Z o C)) o a",
]
ATOMS = ["Z", "C", "a"]
PAIRS = [f"({x} o {y})" for x in ATOMS for y in ATOMS if x != y]
POOL = (
    ATOMS * 2
    + ["(Z o C)"] * 6
    + PAIRS
    + ["(o C)", "(o Z)", "(Z o C o C)", "(Z o C o a)", "((Z o C) o a)", "((Z o C) o (Z o C))"]
)


def build(seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    held = {parse_structure(s).text for s in HELD_OUT}
    out = ["Z o C", "Z o C o a"]
    seen = set(out) | held
    while len(out) < SIZE:
        n = rng.randint(2, 6)
        terms = [rng.choice(POOL) for _ in range(n)]
        if rng.random() < 0.7:
            terms.append("a")
        text = parse_structure(" o ".join(terms)).text
        if text not in seen:
            seen.add(text)
            out.append(text)
    return out


if __name__ == "__main__":
    dest = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "src/lbp_discovery/data/corpus.txt"
    dest.write_text("".join(s + "\n" for s in build()), encoding="utf-8")
