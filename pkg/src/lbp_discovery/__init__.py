"""Search for LBP thresholding equations that improve texture background subtraction."""

from .bgs import BgsParams, evaluate_equation, segment  # noqa: F401
from .expr import BASELINE, Equation, EquationStructure, parse_equation, parse_structure, validate  # noqa: F401
from .lbp import LbpConfig  # noqa: F401
from .metrics import Confusion, accumulate, scores  # noqa: F401
from .records import EvalRecord, load_records, persist  # noqa: F401
